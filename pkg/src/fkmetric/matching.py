"""Orbit-matching solvers and the pseudometric estimators.

Discrete side: order-preserving partial matchings of orbit windows under a
closeness threshold (longest-chain DP), the per-horizon gap, its tail
surrogate, and the induced pseudometric via bisection over the threshold.

Continuous side: slope-constrained piecewise-linear reparametrizations on a
sampling grid (coverage-maximizing DP), the same gap/tail/pseudometric
tower, and the constructive lift of a discrete time-1 matching to a
continuous one by unit-interval translations.

All feasibility claims are certificate-backed: a returned ContMatching can
be re-validated against the raw orbits by `validate_cont_matching`, which
never consults the solver.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels as K
from .errors import RefusalError, UsageError
from .systems import (
    FullShiftSystem,
    OrbitSample,
    RotationSystem,
    SturmianSystem,
    SuspensionPoint,
    TimeChangeSystem,
    TorusTranslationSystem,
    SpecialFlowSystem,
    sample_orbit,
)

DENSE_LIMIT = 8192          # largest orbit length for materialized matrices
FLOW_GRID_LIMIT = 12001     # largest flow sampling grid (nodes)
BACKTRACK_LIMIT = 20001     # largest grid for certificate reconstruction
DEFAULT_TOL = 1.0 / 128.0
DEFAULT_STEP = 0.05


# ---------------------------------------------------------------------------
# result types

@dataclass(frozen=True)
class Matching:
    """Order-preserving index matching: pairs strictly increasing in both
    coordinates, indices inside the length-n window."""
    pairs: tuple
    n: int

    def __len__(self):
        return len(self.pairs)


@dataclass
class ContMatching:
    """Piecewise-linear monotone reparametrization with coverage data.

    `knots` are (s, u) pairs, strictly increasing in both coordinates;
    `segments` are (first, last) knot-index ranges; h interpolates linearly
    between consecutive knots inside a segment and is undefined in gaps.
    """
    knots: list
    segments: list
    t: float
    coverage: float
    coverage_image: float
    eps: float
    delta: float
    step: float
    meta: dict = field(default_factory=dict)

    def to_json_dict(self):
        return {
            "knots": [[float(s), float(u)] for s, u in self.knots],
            "segments": [[int(a), int(b)] for a, b in self.segments],
            "t": self.t,
            "coverage": self.coverage,
            "coverage_image": self.coverage_image,
            "eps": self.eps,
            "delta": self.delta,
            "step": self.step,
            "meta": self.meta,
        }


@dataclass
class GapEstimate:
    """Finite-horizon gap curve plus the tail surrogate for the limit
    superior: the max over the last quartile of horizons."""
    horizons: list
    gaps: list
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if len(self.horizons) < 4:
            raise UsageError("gap estimates need at least 4 horizons")
        if len(self.horizons) != len(self.gaps):
            raise UsageError("horizons and gaps must have equal length")

    @property
    def tail_sup(self):
        k = max(1, math.ceil(len(self.gaps) / 4))
        return max(self.gaps[-k:])


# ---------------------------------------------------------------------------
# pairwise distances / compatibility

def _check_pairable(ox: OrbitSample, oy: OrbitSample):
    if _signature(ox.system) != _signature(oy.system):
        raise UsageError("orbit samples come from different systems")
    if abs(ox.step - oy.step) > 1e-12:
        raise UsageError(f"orbit samples have different steps: {ox.step} vs {oy.step}")


def _signature(system):
    if isinstance(system, RotationSystem):
        return ("rotation", system.alpha)
    if isinstance(system, TorusTranslationSystem):
        return ("torus", system.a1, system.a2)
    if isinstance(system, FullShiftSystem):
        return ("shift", system.arity, system.window)
    if isinstance(system, SturmianSystem):
        return ("sturmian", system.slope, system.window)
    if isinstance(system, SpecialFlowSystem):
        return ("special", _signature(system.base), system.roof)
    if isinstance(system, TimeChangeSystem):
        return ("timechange", _signature(system.flow), system.rate)
    return ("?", id(system))


def _base_cross_arc(arrA, arrB, a, b):
    """Distance matrix d(T^a p_i, T^b q_j) for base-map orbit arrays."""
    kind = arrA["kind"]
    if kind == "circle":
        va = np.mod(arrA["vals"] + a * arrA["alpha"], 1.0)
        vb = np.mod(arrB["vals"] + b * arrB["alpha"], 1.0)
        return K.dist_mat_circle(va, vb)
    if kind == "torus":
        xa = np.mod(arrA["xs"] + a * arrA["a1"], 1.0)
        ya = np.mod(arrA["ys"] + a * arrA["a2"], 1.0)
        xb = np.mod(arrB["xs"] + b * arrB["a1"], 1.0)
        yb = np.mod(arrB["ys"] + b * arrB["a2"], 1.0)
        return K.dist_mat_torus(xa, ya, xb, yb)
    if kind == "word":
        if arrA["arity"] == 2:
            return K.dist_mat_packed(arrA[f"packed{a}"], arrB[f"packed{b}"])
        w = arrA["window"]
        return K.dist_mat_word_symbols(
            np.ascontiguousarray(arrA["symbols"][:, a:a + w]),
            np.ascontiguousarray(arrB["symbols"][:, b:b + w]),
            arrA["arity"],
        )
    raise UsageError(f"no pairwise distances for orbit arrays of kind {kind!r}")


def pair_distance_matrix(ox: OrbitSample, oy: OrbitSample):
    """Dense matrix of distances between all sample-point pairs."""
    _check_pairable(ox, oy)
    if max(ox.m, oy.m) > DENSE_LIMIT:
        raise RefusalError(
            f"dense distance matrix for {ox.m}x{oy.m} samples refused; "
            f"limit {DENSE_LIMIT} per side (subsample the orbits)")
    return _dist_matrix(ox.arrays, oy.arrays)


def _dist_matrix(arrA, arrB):
    kind = arrA["kind"]
    if kind != "susp":
        return _base_cross_arc(arrA, arrB, 0, 0)
    baseA, baseB = arrA["base"], arrB["base"]
    if baseA["kind"] == "circle":
        return K.dist_mat_susp_circle(
            arrA["heights"], arrA["roofs"], baseA["vals"],
            arrB["heights"], arrB["roofs"], baseB["vals"], baseA["alpha"])
    if baseA["kind"] == "word" and baseA["arity"] == 2:
        return K.dist_mat_susp_packed(
            arrA["heights"], arrA["roofs"],
            baseA["packed0"], baseA["packed1"], baseA["packed2"],
            arrB["heights"], arrB["roofs"],
            baseB["packed0"], baseB["packed1"], baseB["packed2"])
    # generic composition from base cross distances
    hx, hy = arrA["heights"], arrB["heights"]
    rx, ry = arrA["roofs"], arrB["roofs"]
    D0 = _base_cross_arc(baseA, baseB, 0, 0)
    D1 = _base_cross_arc(baseA, baseB, 1, 1)
    Dx1y0 = _base_cross_arc(baseA, baseB, 1, 0)
    Dx2y1 = _base_cross_arc(baseA, baseB, 2, 1)
    Dx0y1 = _base_cross_arc(baseA, baseB, 0, 1)
    Dx1y2 = _base_cross_arc(baseA, baseB, 1, 2)
    H = hx[:, None] - hy[None, :]
    x_hi = H >= 0
    lo_h = np.where(x_hi, hy[None, :], hx[:, None])
    hi_h = np.where(x_hi, hx[:, None], hy[None, :])
    r_hi = np.where(x_hi, rx[:, None], ry[None, :])
    rmax = np.maximum(rx[:, None], ry[None, :])
    theta = lo_h / rmax
    down = (hi_h - lo_h) + (1.0 - theta) * D0 + theta * D1
    e0 = np.where(x_hi, Dx1y0, Dx0y1)
    e1 = np.where(x_hi, Dx2y1, Dx1y2)
    up = (r_hi - hi_h) + lo_h + (1.0 - theta) * e0 + theta * e1
    return np.minimum(down, up)


def _compat_dense(ox, oy, delta, mx=None, my=None):
    """Boolean node-compatibility matrix d < delta, built in row blocks."""
    arrA, arrB = ox.arrays, oy.arrays
    mx = ox.m if mx is None else mx
    my = oy.m if my is None else my
    M = np.empty((mx, my), dtype=np.bool_)
    block = max(1, int(4e6 // max(my, 1)))
    for i0 in range(0, mx, block):
        i1 = min(mx, i0 + block)
        D = _dist_matrix(_slice_arrays(arrA, i0, i1), _slice_arrays(arrB, 0, my))
        M[i0:i1] = D < delta
    return M


def _slice_arrays(arr, i0, i1):
    out = {}
    for k, v in arr.items():
        if isinstance(v, np.ndarray) and v.shape and v.shape[0] >= i1:
            out[k] = v[i0:i1]
        elif k == "base":
            out[k] = _slice_arrays(v, i0, i1)
        else:
            out[k] = v
    return out


def compat_matrix(ox: OrbitSample, oy: OrbitSample, delta):
    """M[i][j] = True iff dist(x_i, y_j) < delta (strict). Unequal orbit
    lengths are padded square with all-false rows/columns."""
    if delta <= 0:
        raise UsageError(f"delta must be > 0, got {delta}")
    _check_pairable(ox, oy)
    n = max(ox.m, oy.m)
    if n > DENSE_LIMIT:
        raise RefusalError(f"compat matrix of size {n} refused; limit {DENSE_LIMIT}")
    M = np.zeros((n, n), dtype=np.bool_)
    M[:ox.m, :oy.m] = _compat_dense(ox, oy, delta)
    return M


# ---------------------------------------------------------------------------
# discrete maximum matching

def max_matching(M) -> Matching:
    """Maximum-cardinality order-preserving matching on true entries.

    Longest-chain DP, O(n^2). Among maximum matchings the lexicographically
    smallest pair sequence is returned, so output is deterministic.
    """
    M = np.asarray(M, dtype=np.bool_)
    if M.size == 0:
        raise UsageError("empty compatibility matrix")
    if max(M.shape) >= BACKTRACK_LIMIT:
        raise RefusalError(f"matching backtrack refused for size {M.shape}")
    S = K.lcs_suffix_table(M)
    pairs = K.lcs_lex_pairs(M, S)
    return Matching(tuple((int(i), int(j)) for i, j in pairs), int(max(M.shape)))


def max_matching_bruteforce(M) -> Matching:
    """Exhaustive test oracle: explores every skip/match branch over rows
    (memoized on (row, column) suffixes). Refuses n > 14."""
    M = np.asarray(M, dtype=np.bool_)
    if M.size == 0:
        raise UsageError("empty compatibility matrix")
    nx, ny = M.shape
    if max(nx, ny) > 14:
        raise RefusalError("brute-force matching limited to n <= 14")
    memo = {}

    def best(i, j):
        if i >= nx or j >= ny:
            return 0
        key = (i, j)
        if key in memo:
            return memo[key]
        v = best(i + 1, j)
        for c in range(j, ny):
            if M[i, c]:
                w = 1 + best(i + 1, c + 1)
                if w > v:
                    v = w
        memo[key] = v
        return v

    total = best(0, 0)
    pairs = []
    i, j = 0, 0
    remaining = total
    while remaining > 0:
        placed = False
        for c in range(j, ny):
            if M[i, c] and best(i + 1, c + 1) >= remaining - 1:
                pairs.append((i, c))
                i, j = i + 1, c + 1
                remaining -= 1
                placed = True
                break
        if not placed:
            i += 1
    return Matching(tuple(pairs), int(max(nx, ny)))


def _matching_size(ox: OrbitSample, oy: OrbitSample, delta):
    """Cardinality-only fast path; dispatches per orbit structure."""
    arrA, arrB = ox.arrays, oy.arrays
    kind = arrA["kind"]
    if kind == "circle":
        return int(K.lcs_circle(arrA["vals"], arrB["vals"], delta))
    if kind == "torus":
        return int(K.lcs_torus(arrA["xs"], arrA["ys"], arrB["xs"], arrB["ys"], delta))
    if kind == "word" and arrA["arity"] == 2:
        return int(K.lcs_packed(arrA["packed0"], arrB["packed0"], delta))
    if max(ox.m, oy.m) > DENSE_LIMIT:
        raise RefusalError(
            f"matching of length {max(ox.m, oy.m)} needs a dense matrix; limit {DENSE_LIMIT}")
    return int(K.lcs_dense(_compat_dense(ox, oy, delta)))


# ---------------------------------------------------------------------------
# discrete gap, tail, pseudometric

def fbar_gap(system, x, y, n, delta):
    """Unmatched fraction 1 - |max matching| / n over length-n windows."""
    if n < 1:
        raise UsageError(f"window length must be >= 1, got {n}")
    if delta <= 0:
        raise UsageError(f"delta must be > 0, got {delta}")
    step = 1.0 if not system.is_flow else 1.0
    ox = sample_orbit(system, x, n * step, step)
    oy = sample_orbit(system, y, n * step, step)
    _check_pairable(ox, oy)
    return 1.0 - _matching_size(ox, oy, delta) / n


def fbar_limsup(system, x, y, delta, horizons) -> GapEstimate:
    """Gap at each horizon; the tail max stands in for the limsup."""
    horizons = list(horizons)
    if sorted(horizons) != horizons or len(horizons) < 4:
        raise UsageError("horizons must be increasing with at least 4 entries")
    n_max = horizons[-1]
    ox = sample_orbit(system, x, float(n_max), 1.0)
    oy = sample_orbit(system, y, float(n_max), 1.0)
    _check_pairable(ox, oy)
    gaps = []
    for n in horizons:
        sub_x = OrbitSample(system, x, 1.0, n)
        sub_y = OrbitSample(system, y, 1.0, n)
        sub_x._arrays = _slice_arrays(ox.arrays, 0, n)
        sub_y._arrays = _slice_arrays(oy.arrays, 0, n)
        gaps.append(1.0 - _matching_size(sub_x, sub_y, delta) / n)
    return GapEstimate(horizons, gaps, meta={"delta": delta})


def rho_fk(system, x, y, horizons, tol=0.01):
    """inf{delta > 0 : tail gap at delta <= delta}, by bisection over delta.

    Valid because the gap is nonincreasing in delta. Returns the bracket
    midpoint once the bracket width is <= tol.
    """
    if tol <= 0:
        raise UsageError(f"tol must be > 0, got {tol}")
    lo = 0.0
    hi = system.diameter() + tol

    def ok(delta):
        return fbar_limsup(system, x, y, delta, horizons).tail_sup <= delta

    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if ok(mid):
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)


# ---------------------------------------------------------------------------
# slope-constrained continuous matching

def _drift_length(eps):
    """Cell extent of drift pieces: smallest L with slope 1 + 1/L inside the
    open window, i.e. 1/L < eps. Returns 0 when no such piece fits the
    one-over-eps length budget (eps with integer reciprocal)."""
    L = math.ceil(1.0 / eps)
    return L if 1.0 / L < eps else 0


def _feasible_value(M, eps):
    L = _drift_length(eps)
    return int(K.cover_dp(M, L)), L


def _cells_needed(ncells, eps):
    # coverage > (1 - eps) t realized as >= with one-cell slack
    return (1.0 - eps) * ncells - 1.0


def _is_feasible(M, eps):
    ncells = M.shape[0] - 1
    value, _ = _feasible_value(M, eps)
    return value >= 1 and value >= _cells_needed(ncells, eps)


def _pieces_from_choices(ch, L, nx, ny):
    pieces = []
    i, j = nx, ny
    while i > 0 and j > 0:
        c = ch[i, j]
        if c == 0:
            j -= 1
        elif c == 1:
            i -= 1
        elif c == 2:
            pieces.append((i - 1, j - 1, i, j))
            i -= 1
            j -= 1
        elif c == 3:
            pieces.append((i - L, j - L - 1, i, j))
            i -= L
            j -= L + 1
        else:
            pieces.append((i - L - 1, j - L, i, j))
            i -= L + 1
            j -= L
    pieces.reverse()
    return pieces


def _build_cont_matching(pieces, step, t, eps, delta, meta):
    knots = []
    segments = []
    for (i0, j0, i1, j1) in pieces:
        s0, u0 = i0 * step, j0 * step
        s1, u1 = i1 * step, j1 * step
        if knots and abs(knots[-1][0] - s0) < 1e-12 and abs(knots[-1][1] - u0) < 1e-12:
            knots.append((s1, u1))
            segments[-1] = (segments[-1][0], len(knots) - 1)
        else:
            knots.append((s0, u0))
            knots.append((s1, u1))
            segments.append((len(knots) - 2, len(knots) - 1))
    coverage = sum(knots[b][0] - knots[a][0] for a, b in segments)
    coverage_image = sum(knots[b][1] - knots[a][1] for a, b in segments)
    return ContMatching(knots, segments, t, coverage, coverage_image,
                        eps, delta, step, meta)


def slope_constrained_matching(ox: OrbitSample, oy: OrbitSample, delta, eps):
    """Coverage-maximizing matching with per-piece slope in (1-eps, 1+eps).

    Returns a certified ContMatching iff the matched coverage clears
    (1-eps)t (with one grid cell of slack), else None.
    """
    _check_pairable(ox, oy)
    if not (0.0 < eps < 1.0):
        raise UsageError(f"eps must lie in (0,1), got {eps}")
    if delta <= 0:
        raise UsageError(f"delta must be > 0, got {delta}")
    if ox.m != oy.m:
        raise UsageError("orbit samples must cover the same horizon")
    if ox.m > FLOW_GRID_LIMIT:
        raise RefusalError(f"grid of {ox.m} nodes refused; limit {FLOW_GRID_LIMIT}")
    M = _compat_dense(ox, oy, delta)
    return _certified_matching(M, ox.step, eps, delta)


def _certified_matching(M, step, eps, delta, meta_extra=None):
    ncells = M.shape[0] - 1
    t = ncells * step
    L = _drift_length(eps)
    B, ch = K.cover_dp_choices(M, L)
    value = int(B[ncells, M.shape[1] - 1])
    if value < 1 or value < _cells_needed(ncells, eps):
        return None
    pieces = _pieces_from_choices(ch, L, ncells, M.shape[1] - 1)
    meta = {"value_cells": value, "drift_cells": L, "grid_cells": ncells}
    if meta_extra:
        meta.update(meta_extra)
    return _build_cont_matching(pieces, step, t, eps, delta, meta)


# ---------------------------------------------------------------------------
# continuous gap, tail, pseudometric

def ftilde_gap(system, x, y, t, delta, step=DEFAULT_STEP, tol=DEFAULT_TOL):
    """inf{eps : a slope-constrained (t,eps,delta)-matching exists}, by
    bisection over eps (feasibility is monotone in eps). Returns 1.0 when
    even eps = 1 - 1e-6 is infeasible."""
    M = _ftilde_compat(system, x, y, t, delta, step)
    return _gap_from_compat(M, tol)


def _ftilde_compat(system, x, y, t, delta, step):
    if not system.is_flow:
        raise UsageError(f"{system.kind} is a map; use fbar_gap")
    if t <= 1:
        raise UsageError(f"horizon must be > 1, got {t}")
    if not (0 < step <= 0.1):
        raise UsageError(f"grid step must lie in (0, 0.1], got {step}")
    if delta <= 0:
        raise UsageError(f"delta must be > 0, got {delta}")
    ox = sample_orbit(system, x, t, step)
    oy = sample_orbit(system, y, t, step)
    if ox.m > FLOW_GRID_LIMIT:
        raise RefusalError(f"flow grid of {ox.m} nodes refused; limit {FLOW_GRID_LIMIT}")
    return _compat_dense(ox, oy, delta)


def _gap_from_compat(M, tol):
    if not _is_feasible_any(M):
        return 1.0
    lo, hi = 0.0, 1.0
    if not _is_feasible(M, 1.0 - 1e-6):
        return 1.0
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if _is_feasible(M, mid):
            hi = mid
        else:
            lo = mid
    return hi


def _is_feasible_any(M):
    # a matching needs at least one compatible diagonal cell
    return bool((M[:-1, :-1] & M[1:, 1:]).any()) if min(M.shape) > 1 else False


def ftilde_limsup(system, x, y, delta, t_horizons, step=DEFAULT_STEP, tol=DEFAULT_TOL) -> GapEstimate:
    t_horizons = list(t_horizons)
    if sorted(t_horizons) != t_horizons or len(t_horizons) < 4:
        raise UsageError("t_horizons must be increasing with at least 4 entries")
    M = _ftilde_compat(system, x, y, t_horizons[-1], delta, step)
    gaps = []
    for t in t_horizons:
        m = int(math.floor(t / step + 1e-9))
        gaps.append(_gap_from_compat(np.ascontiguousarray(M[:m, :m]), tol))
    return GapEstimate(t_horizons, gaps, meta={"delta": delta, "step": step, "tol": tol})


def rho_fk_flow(system, x, y, t_horizons, tol=0.01, step=DEFAULT_STEP, eps_tol=DEFAULT_TOL):
    """inf{delta : tail of the flow gap at delta < delta} (strict), by
    bisection over delta. Returns the bracket midpoint at width <= tol."""
    if tol <= 0:
        raise UsageError(f"tol must be > 0, got {tol}")
    lo = 0.0
    hi = system.diameter() + tol

    def ok(delta):
        est = ftilde_limsup(system, x, y, delta, t_horizons, step=step, tol=eps_tol)
        return est.tail_sup < delta

    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if ok(mid):
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)


# ---------------------------------------------------------------------------
# constructive lift of a discrete matching

def lift_matching(pi: Matching, n, delta, eps) -> ContMatching:
    """Lift an (n+1, delta)-matching of the time-1 map to a continuous
    (t, eps, eps)-matching on t = n+1 by translating unit intervals.

    Keeps the pairs with both indices <= n-1 (at most two are dropped) and
    maps [k, k+1) isometrically onto [pi(k), pi(k)+1). Preconditions follow
    the constructive proof: |pi| >= (1-delta)(n+1), delta < eps/2 and
    (n+1) eps / 4 > 1.
    """
    t = float(n + 1)
    if len(pi) < (1.0 - delta) * (n + 1):
        raise UsageError(
            f"lift precondition failed: |pi| = {len(pi)} < (1-delta)(n+1) = {(1.0 - delta) * (n + 1):.6g}")
    if not delta < eps / 2.0:
        raise UsageError(f"lift precondition failed: delta = {delta} not < eps/2 = {eps / 2.0}")
    if not t * eps / 4.0 > 1.0:
        raise UsageError(f"lift precondition failed: t*eps/4 = {t * eps / 4.0:.6g} not > 1")
    for (i, j) in pi.pairs:
        if not (0 <= i <= n and 0 <= j <= n):
            raise UsageError(f"pair ({i},{j}) outside the (n+1)-window [0,{n}]")
    kept = [(i, j) for (i, j) in pi.pairs if i <= n - 1 and j <= n - 1]
    if len(kept) < len(pi) - 2:
        raise UsageError("internal: translation construction dropped more than 2 pairs")
    if len(kept) <= (1.0 - eps) * t:
        raise UsageError(
            f"lift coverage failed: |D0| = {len(kept)} not > (1-eps)t = {(1.0 - eps) * t:.6g}")
    pieces = [(i, j, i + 1, j + 1) for (i, j) in kept]
    cm = _build_cont_matching(pieces, 1.0, t, eps, eps,
                              {"lifted_pairs": len(pi), "kept_pairs": len(kept), "source_delta": delta})
    return cm


# ---------------------------------------------------------------------------
# independent certificate checker

def validate_cont_matching(system, x, y, cm: ContMatching, delta=None, eps=None,
                           subdiv=4, strict_interior=False):
    """Re-validate a ContMatching against the raw orbits.

    Checks knot monotonicity, per-piece slopes against the open window,
    coverage of both domain and image with one grid cell of slack, and the
    closeness condition by direct evolution at knots plus `subdiv` interior
    points per piece. Interior points are allowed the measured one-step
    displacement on top of delta (reported as `slack`), or nothing when
    `strict_interior` is set.
    """
    delta = cm.delta if delta is None else delta
    eps = cm.eps if eps is None else eps
    report = {"valid": True, "failures": [], "eps": eps, "delta": delta}
    t = cm.t
    for (s, u) in cm.knots:
        if not (0.0 <= s <= t + 1e-9 and 0.0 <= u <= t + 1e-9):
            report["failures"].append(f"knot ({s},{u}) outside [0,{t}]")
    for a, b in cm.segments:
        for k in range(a, b):
            s0, u0 = cm.knots[k]
            s1, u1 = cm.knots[k + 1]
            if not (s1 > s0 and u1 > u0):
                report["failures"].append(f"knots not increasing at {k}")
                continue
            slope = (u1 - u0) / (s1 - s0)
            if not (1.0 - eps < slope < 1.0 + eps):
                report["failures"].append(f"slope {slope:.6g} outside (1-eps,1+eps) at knot {k}")
    for sa, sb in zip(cm.segments, cm.segments[1:]):
        s_end = cm.knots[sa[1]]
        s_next = cm.knots[sb[0]]
        if not (s_next[0] >= s_end[0] and s_next[1] >= s_end[1]):
            report["failures"].append("segments out of order")
    cov_x = sum(cm.knots[b][0] - cm.knots[a][0] for a, b in cm.segments)
    cov_y = sum(cm.knots[b][1] - cm.knots[a][1] for a, b in cm.segments)
    slack_cells = cm.step
    if cov_x < (1.0 - eps) * t - slack_cells - 1e-9:
        report["failures"].append(f"domain coverage {cov_x:.6g} below (1-eps)t = {(1 - eps) * t:.6g}")
    if cov_y < (1.0 - eps) * t - slack_cells - 1e-9:
        report["failures"].append(f"image coverage {cov_y:.6g} below (1-eps)t")
    # measured one-step displacement bounds the interior drift between knots
    disp = 0.0
    probe = min(t, 20 * cm.step)
    steps = max(2, int(probe / cm.step))
    for k in range(steps):
        s = k * cm.step
        disp = max(disp, system.dist(system.evolve(x, s + cm.step), system.evolve(x, s)))
        disp = max(disp, system.dist(system.evolve(y, s + cm.step), system.evolve(y, s)))
    slack = 0.0 if strict_interior else 2.0 * disp
    max_knot = 0.0
    max_interior = 0.0
    for a, b in cm.segments:
        for k in range(a, b):
            s0, u0 = cm.knots[k]
            s1, u1 = cm.knots[k + 1]
            for q in range(subdiv + 1):
                f = q / subdiv
                s = s0 + f * (s1 - s0)
                u = u0 + f * (u1 - u0)
                d = system.dist(system.evolve(x, s), system.evolve(y, u))
                if q in (0, subdiv):
                    max_knot = max(max_knot, d)
                else:
                    max_interior = max(max_interior, d)
    if not max_knot < delta:
        report["failures"].append(f"knot distance {max_knot:.6g} not < delta = {delta}")
    if not max_interior < delta + slack:
        report["failures"].append(
            f"interior distance {max_interior:.6g} not < delta + slack = {delta + slack:.6g}")
    report.update(coverage_x=cov_x, coverage_y=cov_y, max_knot_dist=max_knot,
                  max_interior_dist=max_interior, slack=slack, one_step_displacement=disp)
    report["valid"] = not report["failures"]
    return report
