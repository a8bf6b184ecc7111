"""Built-in dynamical systems: circle rotations, torus translations, full
shifts, Sturmian subshifts, suspension/special flows over them, and time
changes of those flows.

Every system exposes `evolve`, `dist`, point parsing/printing and seeded
random points. Orbit segments are sampled with `sample_orbit`, which also
carries the packed numpy arrays the matching solvers run on.

Conventions:
  * circle coordinates live in [0, 1) with the arc-length metric,
  * shift points are cyclic words (the word is the period of a one-sided
    sequence), compared on a `window`-symbol prefix of the current offset,
  * suspension points are (base, height) with height in [0, roof(base)),
  * map systems only accept integer times, flows accept any real time.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, UsageError


# ---------------------------------------------------------------------------
# small numeric helpers

def frac(v):
    """Fractional part in [0, 1), safe against v - floor(v) == 1.0."""
    f = v - math.floor(v)
    return f if f < 1.0 else 0.0


def circle_dist(a, b):
    g = frac(a - b)
    return g if g <= 0.5 else 1.0 - g


# ---------------------------------------------------------------------------
# phase points

@dataclass(frozen=True)
class CirclePoint:
    value: float


@dataclass(frozen=True)
class TorusPoint:
    x: float
    y: float


@dataclass(frozen=True)
class WordPoint:
    """Point of a shift space: the periodic sequence with period `word`,
    read from `offset`. Rotating the offset makes the shift invertible."""
    word: tuple
    offset: int


@dataclass(frozen=True)
class SturmianPoint:
    """A Sturmian sequence coded by the rotation phase that generates it."""
    phase: float


@dataclass(frozen=True)
class SuspensionPoint:
    base: object
    height: float


# ---------------------------------------------------------------------------
# closed-form roof / rate presets

@dataclass(frozen=True)
class FunctionSpec:
    """Strictly positive closed-form function preset: `const` is c,
    `cos` is c + a*cos(2*pi*x) with c > a >= 0, evaluated on the base
    coordinate of a point."""
    kind: str
    c: float
    a: float = 0.0

    def validate(self, role):
        if self.kind not in ("const", "cos"):
            raise ConfigurationError(f"{role}: unknown preset {self.kind!r}")
        if self.kind == "const":
            if not self.c > 0:
                raise ConfigurationError(f"{role}: const value must be > 0, got {self.c}")
        else:
            if not (self.c > self.a >= 0):
                raise ConfigurationError(f"{role}: cos preset needs c > a >= 0, got c={self.c}, a={self.a}")

    def value(self, x):
        if self.kind == "const":
            return self.c
        return self.c + self.a * math.cos(2.0 * math.pi * x)

    def value_array(self, xs):
        if self.kind == "const":
            return np.full_like(np.asarray(xs, dtype=float), self.c)
        return self.c + self.a * np.cos(2.0 * np.pi * np.asarray(xs, dtype=float))

    @property
    def minimum(self):
        return self.c if self.kind == "const" else self.c - self.a

    def text(self):
        if self.kind == "const":
            return f"const:{self.c:g}"
        return f"cos:c={self.c:g},a={self.a:g}"


CONST_ONE = FunctionSpec("const", 1.0)


# ---------------------------------------------------------------------------
# system specs

@dataclass(frozen=True)
class SystemSpec:
    """Parameter record for `make_system`. `inner` nests the wrapped spec for
    suspension/special_flow/time_change; `func` holds the roof or rate."""
    kind: str
    alpha: float = 0.0
    alpha2: float = 0.0
    arity: int = 0
    window: int = 0
    inner: object = None
    func: FunctionSpec = None


def rotation(alpha):
    return SystemSpec("rotation", alpha=alpha)


def torus_translation(a1, a2):
    return SystemSpec("torus_translation", alpha=a1, alpha2=a2)


def full_shift(arity=2, window=32):
    return SystemSpec("full_shift", arity=arity, window=window)


def sturmian(slope, window=32):
    return SystemSpec("sturmian", alpha=slope, window=window)


def suspension(inner):
    return SystemSpec("suspension", inner=inner, func=CONST_ONE)


def special_flow(inner, roof):
    return SystemSpec("special_flow", inner=inner, func=roof)


def time_change(inner, rate):
    return SystemSpec("time_change", inner=inner, func=rate)


GOLDEN = 0.6180339887498949  # golden-mean rotation angle preset


# ---------------------------------------------------------------------------
# systems

class System:
    is_flow = False
    kind = "abstract"

    def evolve(self, p, t):
        raise NotImplementedError

    def dist(self, p, q):
        raise NotImplementedError

    def check_point(self, p):
        raise NotImplementedError

    def diameter(self):
        raise NotImplementedError

    def base_coordinate(self, p):
        """Canonical real coordinate in [0,1) used by cos presets and grids."""
        raise NotImplementedError

    def _check_time(self, t):
        if not self.is_flow:
            k = round(t)
            if abs(t - k) > 1e-9:
                raise UsageError(f"{self.kind} is a map; time must be an integer, got {t}")
            return int(k)
        return t


class MapSystem(System):
    def iterate(self, p, k):
        """Closed-form k-th iterate, k any integer."""
        raise NotImplementedError

    def evolve(self, p, t):
        return self.iterate(p, self._check_time(t))


class RotationSystem(MapSystem):
    kind = "rotation"

    def __init__(self, alpha):
        self.alpha = alpha

    def check_point(self, p):
        if not isinstance(p, CirclePoint):
            raise UsageError(f"rotation expects CirclePoint, got {type(p).__name__}")

    def iterate(self, p, k):
        self.check_point(p)
        return CirclePoint(frac(p.value + k * self.alpha))

    def dist(self, p, q):
        self.check_point(p)
        self.check_point(q)
        return circle_dist(p.value, q.value)

    def diameter(self):
        return 0.5

    def base_coordinate(self, p):
        return p.value

    def random_point(self, rng, **kw):
        return CirclePoint(rng.uniform())

    def parse_point(self, text):
        return CirclePoint(frac(float(text)))

    def point_text(self, p):
        return f"{p.value:.12g}"

    def orbit_values(self, p, ks):
        return np.mod(p.value + np.asarray(ks, dtype=float) * self.alpha, 1.0)


class TorusTranslationSystem(MapSystem):
    kind = "torus_translation"

    def __init__(self, a1, a2):
        self.a1 = a1
        self.a2 = a2

    def check_point(self, p):
        if not isinstance(p, TorusPoint):
            raise UsageError(f"torus_translation expects TorusPoint, got {type(p).__name__}")

    def iterate(self, p, k):
        self.check_point(p)
        return TorusPoint(frac(p.x + k * self.a1), frac(p.y + k * self.a2))

    def dist(self, p, q):
        self.check_point(p)
        self.check_point(q)
        return max(circle_dist(p.x, q.x), circle_dist(p.y, q.y))

    def diameter(self):
        return 0.5

    def base_coordinate(self, p):
        return p.x

    def random_point(self, rng, **kw):
        return TorusPoint(rng.uniform(), rng.uniform())

    def parse_point(self, text):
        parts = text.split(",")
        if len(parts) != 2:
            raise UsageError(f"torus point needs two comma-separated coordinates: {text!r}")
        return TorusPoint(frac(float(parts[0])), frac(float(parts[1])))

    def point_text(self, p):
        return f"{p.x:.12g},{p.y:.12g}"


class WordSystemBase(MapSystem):
    """Shared window metric for the full shift and Sturmian systems."""

    def __init__(self, arity, window):
        self.arity = arity
        self.window = window

    def window_of(self, p):
        raise NotImplementedError

    def dist(self, p, q):
        self.check_point(p)
        self.check_point(q)
        wp = self.window_of(p)
        wq = self.window_of(q)
        d = 0.0
        w = 0.5
        for a, b in zip(wp, wq):
            if a != b:
                d += w
            w *= 0.5
        return d

    def diameter(self):
        return 1.0

    def base_coordinate(self, p):
        # dyadic embedding of the visible window
        v = 0.0
        w = 0.5
        for s in self.window_of(p):
            v += w * s / max(1, self.arity - 1)
            w *= 0.5
        return frac(v)


class FullShiftSystem(WordSystemBase):
    kind = "full_shift"

    def check_point(self, p):
        if not isinstance(p, WordPoint):
            raise UsageError(f"full_shift expects WordPoint, got {type(p).__name__}")
        if any(not (0 <= s < self.arity) for s in p.word):
            raise UsageError(f"word symbols must lie in [0,{self.arity})")

    def iterate(self, p, k):
        self.check_point(p)
        return WordPoint(p.word, (p.offset + k) % len(p.word))

    def window_of(self, p):
        L = len(p.word)
        return tuple(p.word[(p.offset + i) % L] for i in range(self.window))

    def random_point(self, rng, word_length=1024, **kw):
        length = max(word_length, self.window)
        return WordPoint(tuple(rng.randint(self.arity) for _ in range(length)), 0)

    def parse_point(self, text):
        try:
            word = tuple(int(ch) for ch in text.strip())
        except ValueError:
            raise UsageError(f"shift point must be a digit string, got {text!r}")
        if not word:
            raise UsageError("shift point needs at least one symbol")
        return WordPoint(word, 0)

    def point_text(self, p):
        w = self.window_of(p)
        return "".join(str(s) for s in w)

    def orbit_symbols(self, p, m):
        """(m, window) symbol matrix for offsets 0..m-1."""
        L = len(p.word)
        word = np.asarray(p.word, dtype=np.uint8)
        idx = (p.offset + np.arange(m)[:, None] + np.arange(self.window)[None, :]) % L
        return word[idx]


class SturmianSystem(WordSystemBase):
    kind = "sturmian"

    def __init__(self, slope, window):
        super().__init__(2, window)
        self.slope = slope

    def check_point(self, p):
        if not isinstance(p, SturmianPoint):
            raise UsageError(f"sturmian expects SturmianPoint, got {type(p).__name__}")

    def iterate(self, p, k):
        self.check_point(p)
        return SturmianPoint(frac(p.phase + k * self.slope))

    def window_of(self, p):
        # symbol i is 1 iff frac(phase + i*slope) lands in [1 - slope, 1)
        return tuple(
            1 if frac(p.phase + i * self.slope) >= 1.0 - self.slope else 0
            for i in range(self.window)
        )

    def random_point(self, rng, **kw):
        return SturmianPoint(rng.uniform())

    def parse_point(self, text):
        return SturmianPoint(frac(float(text)))

    def point_text(self, p):
        return f"{p.phase:.12g}"

    def orbit_symbols(self, p, m):
        phases = np.mod(p.phase + np.arange(m + self.window) * self.slope, 1.0)
        bits = (phases >= 1.0 - self.slope).astype(np.uint8)
        idx = np.arange(m)[:, None] + np.arange(self.window)[None, :]
        return bits[idx]


class SpecialFlowSystem(System):
    """Special flow over a map: flow upward under the roof, apply the base
    map at each roof crossing. A constant roof of 1 is the suspension."""

    is_flow = True

    def __init__(self, base: MapSystem, roof: FunctionSpec, kind="special_flow"):
        self.base = base
        self.roof = roof
        self.kind = kind

    def roof_at(self, basept):
        return self.roof.value(self.base.base_coordinate(basept))

    def check_point(self, p):
        if not isinstance(p, SuspensionPoint):
            raise UsageError(f"{self.kind} expects SuspensionPoint, got {type(p).__name__}")
        self.base.check_point(p.base)
        if not (0.0 <= p.height < self.roof_at(p.base) + 1e-12):
            raise UsageError(f"height {p.height} outside [0, roof)")

    def evolve(self, p, t):
        self.check_point(p)
        if self.roof.kind == "const":
            c = self.roof.c
            total = p.height + t
            k = math.floor(total / c)
            h = total - k * c
            if h >= c:  # float guard at the roof
                h -= c
                k += 1
            if h < 0.0:
                h += c
                k -= 1
            return SuspensionPoint(self.base.iterate(p.base, k), h)
        # non-constant roof: walk crossings one at a time
        b, h = p.base, p.height + t
        if t >= 0:
            while h >= self.roof_at(b) - 1e-15:
                h -= self.roof_at(b)
                b = self.base.iterate(b, 1)
            if h < 0.0:
                h = 0.0
        else:
            while h < 0.0:
                b = self.base.iterate(b, -1)
                h += self.roof_at(b)
        return SuspensionPoint(b, h)

    def dist(self, p, q):
        """Closeness surrogate. At equal heights (unit roof) this is the
        sliced suspension metric (1-t)d(x,y) + t d(Tx,Ty); at unequal
        heights the smaller of flowing down to the common height or
        wrapping the lower fiber gap through the roof is used, which keeps
        the surrogate continuous across roof crossings."""
        self.check_point(p)
        self.check_point(q)
        rp = self.roof_at(p.base)
        rq = self.roof_at(q.base)
        # order so that hi has the larger height
        if p.height >= q.height:
            hi, lo, r_hi, r_lo = p, q, rp, rq
        else:
            hi, lo, r_hi, r_lo = q, p, rq, rp
        gap = hi.height - lo.height
        theta_lo = lo.height / max(r_lo, r_hi)
        d0 = self.base.dist(lo.base, hi.base)
        d1 = self.base.dist(self.base.iterate(lo.base, 1), self.base.iterate(hi.base, 1))
        down = gap + (1.0 - theta_lo) * d0 + theta_lo * d1
        # wrap: flow hi up through its roof, compare at lo's height band
        wrap_gap = (r_hi - hi.height) + lo.height
        theta_hi = lo.height / max(r_lo, r_hi)
        e0 = self.base.dist(self.base.iterate(hi.base, 1), lo.base)
        e1 = self.base.dist(self.base.iterate(hi.base, 2), self.base.iterate(lo.base, 1))
        up = wrap_gap + (1.0 - theta_hi) * e0 + theta_hi * e1
        return min(down, up)

    def diameter(self):
        if self.roof.kind == "const":
            return self.roof.c + 2.0 * self.base.diameter()
        return self.roof.c + self.roof.a + 2.0 * self.base.diameter()

    def base_coordinate(self, p):
        return self.base.base_coordinate(p.base)

    def random_point(self, rng, **kw):
        b = self.base.random_point(rng, **kw)
        return SuspensionPoint(b, rng.uniform() * self.roof_at(b))

    def parse_point(self, text):
        if "@" not in text:
            raise UsageError(f"suspension point must be '<base>@<height>', got {text!r}")
        base_text, _, h_text = text.rpartition("@")
        b = self.base.parse_point(base_text)
        h = float(h_text)
        if not (0.0 <= h < self.roof_at(b)):
            raise UsageError(f"height {h} outside [0, roof(base))")
        return SuspensionPoint(b, h)

    def point_text(self, p):
        return f"{self.base.point_text(p.base)}@{p.height:.12g}"


class TimeChangeSystem(System):
    """Time change of a special flow by a strictly positive rate preset
    evaluated on the base coordinate (constant along each fiber segment,
    so the time integral is piecewise linear and inverted exactly)."""

    is_flow = True
    kind = "time_change"

    def __init__(self, flow: SpecialFlowSystem, rate: FunctionSpec):
        self.flow = flow
        self.rate = rate

    def check_point(self, p):
        self.flow.check_point(p)

    def _rate_at(self, basept):
        return self.rate.value(self.flow.base.base_coordinate(basept))

    def warp_time(self, p, t):
        """Solve integral of rate along the base flow from p equal to t;
        returns the base-flow time v with psi^t(p) = phi^v(p)."""
        b, h = p.base, p.height
        v = 0.0
        remaining = t
        if t >= 0:
            while True:
                seg = self.flow.roof_at(b) - h  # base-flow time to the roof
                r = self._rate_at(b)
                cost = r * seg
                if remaining < cost - 1e-15:
                    return v + remaining / r
                remaining -= cost
                v += seg
                b = self.flow.base.iterate(b, 1)
                h = 0.0
        else:
            while True:
                seg = h  # base-flow time back to the floor
                r = self._rate_at(b)
                cost = r * seg
                if -remaining < cost - 1e-15:
                    return v + remaining / r
                remaining += cost
                v -= seg
                b = self.flow.base.iterate(b, -1)
                h = self.flow.roof_at(b)

    def evolve(self, p, t):
        self.check_point(p)
        return self.flow.evolve(p, self.warp_time(p, t))

    def dist(self, p, q):
        return self.flow.dist(p, q)

    def diameter(self):
        return self.flow.diameter()

    def base_coordinate(self, p):
        return self.flow.base_coordinate(p)

    def random_point(self, rng, **kw):
        return self.flow.random_point(rng, **kw)

    def parse_point(self, text):
        return self.flow.parse_point(text)

    def point_text(self, p):
        return self.flow.point_text(p)


# ---------------------------------------------------------------------------
# construction and validation

def make_system(spec: SystemSpec) -> System:
    kind = spec.kind
    if kind == "rotation":
        if not (0.0 < spec.alpha < 1.0):
            raise ConfigurationError(f"rotation: alpha must lie in (0,1), got {spec.alpha}")
        return RotationSystem(spec.alpha)
    if kind == "torus_translation":
        return TorusTranslationSystem(frac(spec.alpha), frac(spec.alpha2))
    if kind == "full_shift":
        if spec.arity < 2:
            raise ConfigurationError(f"full_shift: arity must be >= 2, got {spec.arity}")
        if spec.window < 1:
            raise ConfigurationError(f"full_shift: window must be >= 1, got {spec.window}")
        return FullShiftSystem(spec.arity, spec.window)
    if kind == "sturmian":
        if not (0.0 < spec.alpha < 1.0):
            raise ConfigurationError(f"sturmian: slope must lie in (0,1), got {spec.alpha}")
        if spec.window < 1:
            raise ConfigurationError(f"sturmian: window must be >= 1, got {spec.window}")
        return SturmianSystem(spec.alpha, spec.window)
    if kind in ("suspension", "special_flow"):
        if spec.inner is None:
            raise ConfigurationError(f"{kind}: missing base spec")
        base = make_system(spec.inner)
        if base.is_flow:
            raise ConfigurationError(f"{kind}: base must be a map, got flow {base.kind}")
        roof = spec.func or CONST_ONE
        roof.validate("roof")
        return SpecialFlowSystem(base, roof, kind="suspension" if roof == CONST_ONE else "special_flow")
    if kind == "time_change":
        if spec.inner is None:
            raise ConfigurationError("time_change: missing flow spec")
        flow = make_system(spec.inner)
        if not flow.is_flow:
            raise ConfigurationError(f"time_change: inner system must be a flow, got map {flow.kind}")
        if isinstance(flow, TimeChangeSystem):
            raise ConfigurationError("time_change: nesting time changes is not supported")
        rate = spec.func
        if rate is None:
            raise ConfigurationError("time_change: missing rate preset")
        rate.validate("rate")
        return TimeChangeSystem(flow, rate)
    raise ConfigurationError(f"unknown system kind {kind!r}")


# ---------------------------------------------------------------------------
# textual spec grammar (CLI)

def _parse_func(text, role):
    # const:1.0  |  cos:c=2,a=0.5
    head, _, rest = text.partition(":")
    if head == "const":
        try:
            return FunctionSpec("const", float(rest))
        except ValueError:
            raise ConfigurationError(f"{role}: bad const value {rest!r}")
    if head == "cos":
        kv = {}
        for item in rest.split(","):
            k, _, v = item.partition("=")
            kv[k.strip()] = v
        try:
            return FunctionSpec("cos", float(kv["c"]), float(kv.get("a", 0.0)))
        except (KeyError, ValueError):
            raise ConfigurationError(f"{role}: bad cos preset {rest!r} (need c=<real>[,a=<real>])")
    raise ConfigurationError(f"{role}: unknown preset {head!r}")


def _parse_params(kind, rest):
    kv = {}
    if rest:
        for item in rest.split(","):
            k, eq, v = item.partition("=")
            if not eq:
                raise ConfigurationError(f"{kind}: expected key=value, got {item!r}")
            kv[k.strip()] = v.strip()
    try:
        if kind == "rotation":
            return rotation(float(kv["alpha"]))
        if kind == "torus":
            return torus_translation(float(kv["a1"]), float(kv["a2"]))
        if kind == "shift":
            return full_shift(int(kv.get("arity", 2)), int(kv.get("window", 32)))
        if kind == "sturmian":
            return sturmian(float(kv["slope"]), int(kv.get("window", 32)))
    except KeyError as e:
        raise ConfigurationError(f"{kind}: missing parameter {e.args[0]}")
    except ValueError as e:
        raise ConfigurationError(f"{kind}: {e}")
    raise ConfigurationError(f"unknown system kind {kind!r}")


def parse_system_spec(text: str) -> SystemSpec:
    """Parse the CLI system grammar, e.g.
    `rotation:alpha=0.618`, `shift:arity=2,window=32`,
    `suspend(rotation:alpha=0.618)`,
    `special(rotation:alpha=0.618;roof=cos:c=2,a=0.5)`,
    `timechange(suspend(rotation:alpha=0.618);rate=cos:c=1,a=0.3)`."""
    text = text.strip()
    for wrapper, kind in (("suspend", "suspension"), ("special", "special_flow"), ("timechange", "time_change")):
        if text.startswith(wrapper + "("):
            if not text.endswith(")"):
                raise ConfigurationError(f"{wrapper}: missing closing ')' in {text!r}")
            body = text[len(wrapper) + 1:-1]
            # split on the ';' that separates the inner spec from roof/rate
            depth = 0
            split = -1
            for i, ch in enumerate(body):
                if ch == "(":
                    depth += 1
                elif ch == ")":
                    depth -= 1
                elif ch == ";" and depth == 0:
                    split = i
                    break
            if split < 0:
                inner_text, opt = body, None
            else:
                inner_text, opt = body[:split], body[split + 1:]
            inner = parse_system_spec(inner_text)
            func = None
            if opt is not None:
                k, eq, v = opt.partition("=")
                role = "roof" if wrapper in ("suspend", "special") else "rate"
                if not eq or k.strip() != role:
                    raise ConfigurationError(f"{wrapper}: expected {role}=<preset>, got {opt!r}")
                func = _parse_func(v.strip(), role)
            if kind == "suspension":
                if func is not None:
                    raise ConfigurationError("suspend() takes no roof; use special()")
                return suspension(inner)
            if kind == "special_flow":
                return special_flow(inner, func or CONST_ONE)
            if func is None:
                raise ConfigurationError("timechange: missing rate=<preset>")
            return time_change(inner, func)
    head, _, rest = text.partition(":")
    return _parse_params(head.strip(), rest.strip())


def system_spec_text(spec: SystemSpec) -> str:
    if spec.kind == "rotation":
        return f"rotation:alpha={spec.alpha:.12g}"
    if spec.kind == "torus_translation":
        return f"torus:a1={spec.alpha:.12g},a2={spec.alpha2:.12g}"
    if spec.kind == "full_shift":
        return f"shift:arity={spec.arity},window={spec.window}"
    if spec.kind == "sturmian":
        return f"sturmian:slope={spec.alpha:.12g},window={spec.window}"
    if spec.kind == "suspension":
        return f"suspend({system_spec_text(spec.inner)})"
    if spec.kind == "special_flow":
        return f"special({system_spec_text(spec.inner)};roof={spec.func.text()})"
    if spec.kind == "time_change":
        return f"timechange({system_spec_text(spec.inner)};rate={spec.func.text()})"
    raise ConfigurationError(f"unknown system kind {spec.kind!r}")


# ---------------------------------------------------------------------------
# orbit sampling

@dataclass
class OrbitSample:
    """Finite time-stamped sampling of an orbit segment: m = floor(horizon/step)
    samples at times k*step, k = 0..m-1."""
    system: System
    origin: object
    step: float
    m: int

    def __post_init__(self):
        self._points = None
        self._arrays = None

    @property
    def horizon(self):
        return self.m * self.step

    @property
    def times(self):
        return np.arange(self.m) * self.step

    @property
    def points(self):
        if self._points is None:
            self._points = orbit_points(self.system, self.origin, self.m, self.step)
        return self._points

    @property
    def arrays(self):
        if self._arrays is None:
            self._arrays = orbit_arrays(self.system, self.origin, self.m, self.step)
        return self._arrays


def sample_orbit(system, p, horizon, step):
    if step <= 0:
        raise UsageError(f"step must be > 0, got {step}")
    if horizon <= 0:
        raise UsageError(f"horizon must be > 0, got {horizon}")
    if not system.is_flow and abs(step - round(step)) > 1e-12:
        raise UsageError("map systems must be sampled at integer steps")
    system.check_point(p)
    m = int(math.floor(horizon / step + 1e-9))
    if m < 1:
        raise UsageError(f"horizon {horizon} shorter than one step {step}")
    return OrbitSample(system, p, float(step), m)


# --- structured orbit arrays for the vectorized solvers ---------------------
#
# Arrays are dicts with a `kind` tag:
#   circle: {vals}
#   torus:  {xs, ys}
#   word:   {symbols (m, window+2), packed0/1/2 (uint64, binary only)}
#   susp:   {heights, roofs, base: <arrays of the base orbit points>}
# Time changes produce `susp` arrays sampled at warped times.

def _pack_binary_windows(sym):
    """Pack the first min(window, 64) binary symbols of each row into a
    uint64, most significant bit first, so the window metric is the packed
    XOR divided by 2^64."""
    m, w = sym.shape
    take = min(w, 64)
    packed = np.zeros(m, dtype=np.uint64)
    for i in range(take):
        packed |= sym[:, i].astype(np.uint64) << np.uint64(63 - i)
    return packed


def _word_arrays(system, p, ks):
    if isinstance(system, SturmianSystem):
        phases = np.mod(p.phase + (np.asarray(ks, dtype=float)[:, None] + np.arange(system.window + 2)[None, :]) * system.slope, 1.0)
        sym = (phases >= 1.0 - system.slope).astype(np.uint8)
    else:
        L = len(p.word)
        word = np.asarray(p.word, dtype=np.uint8)
        idx = (p.offset + np.asarray(ks, dtype=np.int64)[:, None] + np.arange(system.window + 2)[None, :]) % L
        sym = word[idx]
    out = {"kind": "word", "symbols": sym, "window": system.window, "arity": system.arity}
    if system.arity == 2:
        out["packed0"] = _pack_binary_windows(sym[:, :system.window])
        out["packed1"] = _pack_binary_windows(sym[:, 1:1 + system.window])
        out["packed2"] = _pack_binary_windows(sym[:, 2:2 + system.window])
    return out


def _base_arrays_at(system, p, ks):
    """Arrays for base-map orbit points T^{k} p at the given iterate counts."""
    if isinstance(system, RotationSystem):
        vals = np.mod(p.value + np.asarray(ks, dtype=float) * system.alpha, 1.0)
        return {"kind": "circle", "vals": vals, "alpha": system.alpha}
    if isinstance(system, TorusTranslationSystem):
        ks = np.asarray(ks, dtype=float)
        return {
            "kind": "torus",
            "xs": np.mod(p.x + ks * system.a1, 1.0),
            "ys": np.mod(p.y + ks * system.a2, 1.0),
            "a1": system.a1,
            "a2": system.a2,
        }
    if isinstance(system, (FullShiftSystem, SturmianSystem)):
        return _word_arrays(system, p, ks)
    raise UsageError(f"no vectorized orbit arrays for {system.kind}")


def _special_flow_states(system: SpecialFlowSystem, p, times):
    """(base iterate counts, heights) of phi^{times}(p) for sorted times >= 0."""
    if system.roof.kind == "const":
        c = system.roof.c
        total = p.height + np.asarray(times, dtype=float)
        ks = np.floor(total / c + 1e-12).astype(np.int64)
        hs = total - ks * c
        hs = np.where(hs < 0, hs + c, hs)
        hs = np.where(hs >= c, hs - c, hs)
        ks = np.floor((p.height + np.asarray(times, dtype=float)) / c + 1e-12).astype(np.int64)
        return ks, hs
    ks = np.empty(len(times), dtype=np.int64)
    hs = np.empty(len(times), dtype=float)
    b, h, k = p.base, p.height, 0
    roof = system.roof_at(b)
    prev_t = 0.0
    for i, t in enumerate(times):
        h += t - prev_t
        prev_t = t
        while h >= roof - 1e-15:
            h -= roof
            b = system.base.iterate(b, 1)
            k += 1
            roof = system.roof_at(b)
        ks[i] = k
        hs[i] = max(h, 0.0)
    return ks, hs


def orbit_arrays(system, p, m, step):
    times = np.arange(m) * step
    if isinstance(system, (RotationSystem, TorusTranslationSystem, FullShiftSystem, SturmianSystem)):
        ks = np.rint(times).astype(np.int64)
        return _base_arrays_at(system, p, ks)
    if isinstance(system, TimeChangeSystem):
        warped = np.empty(m, dtype=float)
        b, h = p.base, p.height
        flow = system.flow
        v = 0.0
        t_done = 0.0
        for i in range(m):
            target = times[i]
            remaining = target - t_done
            while True:
                seg = flow.roof_at(b) - h
                r = system.rate.value(flow.base.base_coordinate(b))
                cost = r * seg
                if remaining < cost - 1e-15:
                    v += remaining / r
                    h += remaining / r
                    break
                remaining -= cost
                v += seg
                b = flow.base.iterate(b, 1)
                h = 0.0
            warped[i] = v
            t_done = target
        ks, hs = _special_flow_states(flow, p, warped)
        base_arrays = _base_arrays_at(flow.base, p.base, ks)
        roofs = flow.roof.value_array(_coords_of(base_arrays))
        return {"kind": "susp", "heights": hs, "roofs": roofs, "base": base_arrays,
                "roof_const": flow.roof.c if flow.roof.kind == "const" else None}
    if isinstance(system, SpecialFlowSystem):
        ks, hs = _special_flow_states(system, p, times)
        base_arrays = _base_arrays_at(system.base, p.base, ks)
        roofs = system.roof.value_array(_coords_of(base_arrays))
        return {"kind": "susp", "heights": hs, "roofs": roofs, "base": base_arrays,
                "roof_const": system.roof.c if system.roof.kind == "const" else None}
    raise UsageError(f"no vectorized orbit arrays for {system.kind}")


def _coords_of(base_arrays):
    if base_arrays["kind"] == "circle":
        return base_arrays["vals"]
    if base_arrays["kind"] == "torus":
        return base_arrays["xs"]
    sym = base_arrays["symbols"][:, :base_arrays["window"]]
    weights = 0.5 ** np.arange(1, sym.shape[1] + 1)
    denom = max(1, base_arrays["arity"] - 1)
    return np.mod((sym / denom) @ weights, 1.0)


def orbit_points(system, p, m, step):
    if isinstance(system, MapSystem):
        return [system.iterate(p, k) for k in range(m)]
    pts = []
    cur = p
    for k in range(m):
        pts.append(cur)
        if k + 1 < m:
            cur = system.evolve(p, (k + 1) * step)
    return pts
