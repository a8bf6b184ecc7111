"""Seeded splitmix64 generator used for every randomized experiment.

The algorithm is fixed so point sets can be reproduced from the seed alone,
in any language:

    state <- (state + 0x9E3779B97F4A7C15) mod 2^64
    z <- state
    z <- ((z xor (z >> 30)) * 0xBF58476D1CE4E5B9) mod 2^64
    z <- ((z xor (z >> 27)) * 0x94D049BB133111EB) mod 2^64
    output <- z xor (z >> 31)

`uniform()` is the top 53 bits of an output scaled by 2^-53, `randint(n)` is
an output reduced mod n, and `bit()` is the top bit.
"""

MASK64 = (1 << 64) - 1


class SplitMix64:
    def __init__(self, seed):
        self.state = seed & MASK64

    def next_u64(self):
        self.state = (self.state + 0x9E3779B97F4A7C15) & MASK64
        z = self.state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
        return z ^ (z >> 31)

    def uniform(self):
        """Uniform float in [0, 1) with 53 random bits."""
        return (self.next_u64() >> 11) * (2.0 ** -53)

    def randint(self, n):
        """Integer in [0, n). Modulo reduction; bias is < n/2^64."""
        return self.next_u64() % n

    def bit(self):
        return self.next_u64() >> 63

    def bits(self, count):
        """List of `count` independent bits (one u64 drawn per bit)."""
        return [self.bit() for _ in range(count)]
