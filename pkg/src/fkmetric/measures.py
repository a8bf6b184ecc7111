"""Empirical measures along orbits, the Prokhorov distance between finite
empirical measures, and the quantitative measure-theoretic checks.

The Prokhorov decision `mu(B) <= nu(B^eps) + eps for all B` is solved as a
coupling feasibility problem (Strassen reformulation): there must be a
partial coupling of total mass >= 1 - eps supported on atom pairs at
distance <= eps. On finite uniform measures this is an integer max-flow
problem, exactly dual to the worst violating set B, so the flow answer and
the subset-enumeration oracle agree exactly. Hulls are evaluated with
non-strict `<=` on both routes (recorded in output metadata).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import maximum_flow

from .errors import RefusalError, UsageError
from .matching import _dist_matrix, ftilde_gap
from .systems import OrbitSample, point_arrays, sample_orbit

ATOM_LIMIT = 5000
EXACT_ATOM_LIMIT = 64
BISECT_RESOLUTION = 1.0 / 512.0


@dataclass
class EmpiricalMeasure:
    """Uniform measure on the sample points of one orbit segment (or an
    explicit atom list); the m = 1 case is a Dirac measure."""
    system: object
    arrays: dict
    m: int
    horizon: float = 0.0
    step: float = 0.0
    points: list = None

    @property
    def weights(self):
        return np.full(self.m, 1.0 / self.m)


def empirical(orbit: OrbitSample) -> EmpiricalMeasure:
    if orbit.m < 1:
        raise UsageError("empty orbit sample")
    return EmpiricalMeasure(orbit.system, orbit.arrays, orbit.m,
                            horizon=orbit.horizon, step=orbit.step)


def empirical_from_points(system, points) -> EmpiricalMeasure:
    if not points:
        raise UsageError("empty atom list")
    return EmpiricalMeasure(system, point_arrays(system, points), len(points),
                            points=list(points))


@dataclass
class ProkhorovResult:
    value: float
    certificate: dict
    meta: dict = field(default_factory=dict)


# ---------------------------------------------------------------------------
# coupling feasibility (max-flow)

def _atom_distances(mu: EmpiricalMeasure, nu: EmpiricalMeasure):
    if mu.m > ATOM_LIMIT or nu.m > ATOM_LIMIT:
        raise RefusalError(
            f"coupling with {mu.m}x{nu.m} atoms refused; limit {ATOM_LIMIT} "
            "per measure (subsample the orbits)")
    return _dist_matrix(mu.arrays, nu.arrays)


def _flow_feasible(D, eps, m, n, want_certificate):
    """Max mass (integer, scaled by m*n) of a coupling on pairs <= eps."""
    total = m * n
    need = (1.0 - eps) * total
    ii, jj = np.nonzero(D <= eps)
    if len(ii) == 0:
        flow_value = 0
        feasible = flow_value + 1e-9 >= need
        cert = None
        if want_certificate and not feasible:
            cert = {"kind": "violating_set", "B": list(range(m)),
                    "mu_B": 1.0, "nu_hull": 0.0}
        return feasible, flow_value, cert
    src = 0
    sink = m + n + 1
    rows = np.concatenate([np.zeros(m, dtype=np.int64), ii + 1, np.arange(n) + m + 1])
    cols = np.concatenate([np.arange(m) + 1, jj + m + 1, np.full(n, sink, dtype=np.int64)])
    caps = np.concatenate([np.full(m, n, dtype=np.int32), np.full(len(ii), n, dtype=np.int32),
                           np.full(n, m, dtype=np.int32)])
    graph = csr_matrix((caps, (rows, cols)), shape=(m + n + 2, m + n + 2))
    res = maximum_flow(graph, src, sink)
    feasible = res.flow_value + 1e-9 >= need
    cert = None
    if want_certificate:
        if feasible:
            flow = res.flow
            coo = flow.tocoo()
            mask = (coo.data > 0) & (coo.row >= 1) & (coo.row <= m) & (coo.col >= m + 1) & (coo.col <= m + n)
            pairs = [(int(r - 1), int(c - m - 1), int(v))
                     for r, c, v in zip(coo.row[mask], coo.col[mask], coo.data[mask])]
            cert = {"kind": "coupling", "scale": total, "pairs": pairs,
                    "coupled_mass": res.flow_value / total}
        else:
            B = _min_cut_source_side(graph, res.flow, src, m)
            hull = set()
            for i in B:
                hull.update(np.nonzero(D[i] <= eps)[0].tolist())
            cert = {"kind": "violating_set", "B": B,
                    "mu_B": len(B) / m, "nu_hull": len(hull) / n}
    return feasible, res.flow_value, cert


def _min_cut_source_side(graph, flow, src, m):
    residual = graph - flow  # reverse residual arcs come from negative flow entries
    residual = residual.tolil()
    nnodes = graph.shape[0]
    seen = np.zeros(nnodes, dtype=bool)
    seen[src] = True
    stack = [src]
    rows = residual.rows
    data = residual.data
    while stack:
        u = stack.pop()
        for v, cap in zip(rows[u], data[u]):
            if cap > 0 and not seen[v]:
                seen[v] = True
                stack.append(v)
    return [i for i in range(m) if seen[i + 1]]


def coupling_feasible(mu: EmpiricalMeasure, nu: EmpiricalMeasure, eps, D=None):
    """True iff some coupling puts mass >= 1 - eps on atom pairs within eps.
    Returns (feasible, certificate); the certificate is the positive flow
    (feasible) or a violating set from the saturated cut (infeasible)."""
    if not (0.0 < eps <= 1.0):
        raise UsageError(f"eps must lie in (0,1], got {eps}")
    if D is None:
        D = _atom_distances(mu, nu)
    feasible, _, cert = _flow_feasible(D, eps, mu.m, nu.m, True)
    return feasible, cert


def validate_coupling(mu, nu, eps, cert, D=None):
    """Re-check a coupling certificate: coupled pairs within eps, coupled
    mass >= 1 - eps."""
    if cert["kind"] != "coupling":
        return False
    if D is None:
        D = _atom_distances(mu, nu)
    total = cert["scale"]
    mass = 0
    row_used = np.zeros(mu.m, dtype=np.int64)
    col_used = np.zeros(nu.m, dtype=np.int64)
    for i, j, v in cert["pairs"]:
        if D[i, j] > eps + 1e-12:
            return False
        mass += v
        row_used[i] += v
        col_used[j] += v
    if row_used.max(initial=0) > nu.m or col_used.max(initial=0) > mu.m:
        return False
    return mass + 1e-9 >= (1.0 - eps) * total


# ---------------------------------------------------------------------------
# Prokhorov distance

def _candidates(D, m, n):
    vals = np.unique(D[D <= 1.0])
    grid = {i / m for i in range(m + 1)} | {j / n for j in range(n + 1)}
    grid |= {i / m - j / n for i in range(m + 1) for j in range(n + 1) if 0.0 < i / m - j / n <= 1.0}
    cand = np.unique(np.concatenate([vals, np.fromiter(grid, dtype=float), [1.0]]))
    return cand[cand > 0.0]


def prokhorov(mu: EmpiricalMeasure, nu: EmpiricalMeasure, D=None) -> ProkhorovResult:
    """Least eps with a feasible coupling. Exact search over the finite
    candidate set (distances plus mass-grid differences) up to
    EXACT_ATOM_LIMIT atoms per side; bisection at documented resolution
    above that."""
    if D is None:
        D = _atom_distances(mu, nu)
    m, n = mu.m, nu.m
    if max(m, n) <= EXACT_ATOM_LIMIT:
        cand = _candidates(D, m, n)
        lo, hi = 0, len(cand) - 1
        # cand[hi] = 1.0 is always feasible
        while lo < hi:
            mid = (lo + hi) // 2
            feasible, _, _ = _flow_feasible(D, cand[mid], m, n, False)
            if feasible:
                hi = mid
            else:
                lo = mid + 1
        value = float(cand[hi])
        _, _, cert = _flow_feasible(D, value, m, n, True)
        return ProkhorovResult(value, cert, {"mode": "exact-candidates", "hull": "non-strict"})
    lo, hi = 0.0, 1.0
    while hi - lo > BISECT_RESOLUTION:
        mid = 0.5 * (lo + hi)
        feasible, _, _ = _flow_feasible(D, mid, m, n, False)
        if feasible:
            hi = mid
        else:
            lo = mid
    _, _, cert = _flow_feasible(D, hi, m, n, True)
    return ProkhorovResult(hi, cert, {"mode": "bisection", "resolution": BISECT_RESOLUTION,
                                      "hull": "non-strict"})


def prokhorov_bruteforce(mu: EmpiricalMeasure, nu: EmpiricalMeasure, D=None):
    """Subset-enumeration oracle: max over B subset of mu's atoms of the
    least candidate eps with mu(B) <= nu(B^eps) + eps. Refuses > 12 atoms."""
    if mu.m > 12:
        raise RefusalError("subset enumeration limited to 12 atoms")
    if D is None:
        D = _atom_distances(mu, nu)
    m, n = mu.m, nu.m
    cand = _candidates(D, m, n)
    worst = 0.0
    for mask in range(1, 1 << m):
        idx = [i for i in range(m) if mask >> i & 1]
        mu_B = len(idx) / m
        sub = D[idx]
        mind = sub.min(axis=0)
        for eps in cand:
            if eps < worst:
                continue
            hull = float((mind <= eps).sum()) / n
            if mu_B <= hull + eps + 1e-15:
                if eps > worst:
                    worst = eps
                break
    return float(worst)


# ---------------------------------------------------------------------------
# quantitative checks

def max_step_displacement(measure: EmpiricalMeasure):
    """Largest distance between consecutive atoms along the sampled orbit."""
    if measure.m < 2:
        return 0.0
    a = measure.arrays
    from .matching import _slice_arrays
    D = _dist_matrix(_slice_arrays(a, 0, measure.m - 1), _slice_arrays(a, 1, measure.m))
    return float(np.diagonal(D).max())


def fk_measure_check(system, x, y, t, delta, step=0.05, meas_step=None,
                     tol=1.0 / 128.0):
    """Check the matching-to-measure bound: with eps* the estimated flow gap
    at threshold delta, the Prokhorov distance of the two t-empirical
    measures must stay below max(delta, 2 eps*) plus the computed slack.

    Slack eta = max one-step displacement along both measure orbits
    + gap bisection tolerance + Prokhorov resolution; printed in the report.
    """
    meas_step = step if meas_step is None else meas_step
    eps_star = ftilde_gap(system, x, y, t, delta, step=step, tol=tol)
    mu = empirical(sample_orbit(system, x, t, meas_step))
    nu = empirical(sample_orbit(system, y, t, meas_step))
    D = _atom_distances(mu, nu)
    pr = prokhorov(mu, nu, D=D)
    disp = max(max_step_displacement(mu), max_step_displacement(nu))
    resolution = pr.meta.get("resolution", 0.0)
    eta = disp + tol + resolution + 2.0 / mu.m
    bound = max(delta, 2.0 * eps_star) + eta
    return {
        "epsilon_star": eps_star,
        "delta": delta,
        "prokhorov": pr.value,
        "bound": bound,
        "slack": eta,
        "pass": bool(pr.value <= bound + 1e-12),
        "meta": {"t": t, "step": step, "meas_step": meas_step, "tol": tol,
                 "displacement": disp, "atoms": mu.m},
    }


def generic_defect(system, x, horizons, mu_ref: EmpiricalMeasure, step):
    """Prokhorov distance of the growing empirical measure of x to a
    reference measure, per horizon. A decreasing curve is (surrogate)
    evidence of genericity."""
    horizons = list(horizons)
    if sorted(horizons) != horizons:
        raise UsageError("horizons must be increasing")
    top = empirical(sample_orbit(system, x, horizons[-1], step))
    from .matching import _slice_arrays
    out = []
    for t in horizons:
        m = int(math.floor(t / step + 1e-9))
        mu_t = EmpiricalMeasure(system, _slice_arrays(top.arrays, 0, m), m,
                                horizon=t, step=step)
        out.append(prokhorov(mu_t, mu_ref).value)
    return out
