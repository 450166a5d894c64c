"""Certified regional bounds on the inter-sample time.

On each subinterval [j h, (j+1) h], h = sigma_bar / l, the triggering
matrix is written as Phi(j h + s) = sum_k L_{k,j} s^k + remainder.  The
truncated polynomial on s in [0, chi] lies in the convex hull of its
partial sums sum_{k<=i} L_{k,j} chi^k, and a constant nu bounds the
remainder.  A finite family of "vertex" matrices therefore decides the
sign of x' Phi(sigma) x on a whole time window; restricting x to a cone
via a multiplier (S-procedure) gives per-region bounds.
"""

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np

from .errors import AbstractionFailure
from .linalg import int_expm, lam_max_batch, sym2_extremes, sym_eig_extremes
from .partition import ConicRegion, Partition
from .plant import Plant, phi_at

log = logging.getLogger(__name__)

FEAS_TOL = 1e-9
BISECTION_STEPS = 30
GOLDEN_STEPS = 120
SUBGRADIENT_STEPS = 500
DEFAULT_NU_GRID = 16
DEFAULT_NU_SAFETY = 1.5
DEFAULT_DOUBLING_CAP = 60
_INVPHI = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass(eq=False)
class EmbeddingTables:
    sigma_bar: float
    l: int
    N_conv: int
    M: np.ndarray  # (l, n, n)
    N: np.ndarray
    Pi1: np.ndarray
    Pi2: np.ndarray
    L: np.ndarray  # (l, N_conv + 1, n, n)
    nu_lower: float
    nu_upper: float
    nu_lower_grid: float  # before the safety factor
    nu_upper_grid: float
    grid_per_cell: int
    safety: float
    doubling_cap: int = DEFAULT_DOUBLING_CAP

    @property
    def h(self) -> float:
        return self.sigma_bar / self.l

    @property
    def n(self) -> int:
        return self.L.shape[-1]

    def truncated_phi(self, j: int, s: float) -> np.ndarray:
        """sum_k L_{k,j} s^k."""
        powers = s ** np.arange(self.N_conv + 1)
        return np.tensordot(powers, self.L[j], axes=1)

    def partial_sums(self, j: int, chi: float) -> np.ndarray:
        """(N_conv + 1, n, n): sum_{k<=i} L_{k,j} chi^k for i = 0..N_conv."""
        powers = chi ** np.arange(self.N_conv + 1)
        return np.cumsum(self.L[j] * powers[:, None, None], axis=0)

    def metadata(self) -> dict:
        return {
            "sigma_bar": self.sigma_bar, "l": self.l, "N_conv": self.N_conv,
            "nu_lower": self.nu_lower, "nu_upper": self.nu_upper,
            "nu_lower_grid": self.nu_lower_grid, "nu_upper_grid": self.nu_upper_grid,
            "nu_grid_per_cell": self.grid_per_cell, "nu_safety": self.safety,
            "nu_method": "finite grid max/min scaled by safety factor",
        }


def taylor_blocks(p: Plant, Pi1, Pi2, N_conv: int) -> np.ndarray:
    """L_{0..N_conv} for one subinterval, from Pi1 = Lambda(j h) and Pi2."""
    n = p.n
    I = np.eye(n)
    a = 1.0 - p.alpha
    # G_i = A^{i-1} / i!, the coefficients of int_0^s e^{Ar} dr
    G = [None, I.copy()]
    Ak = I.copy()
    for i in range(2, N_conv + 1):
        Ak = Ak @ p.A
        G.append(Ak / math.factorial(i))
    L = np.empty((N_conv + 1, n, n))
    L[0] = I - Pi1 - Pi1.T + a * Pi1.T @ Pi1
    left = a * Pi1.T - I
    for k in range(1, N_conv + 1):
        Lk = left @ G[k] @ Pi2
        Lk = Lk + Lk.T
        if k >= 2:
            cross = sum(G[i].T @ G[k - i] for i in range(1, k))
            Lk = Lk + a * Pi2.T @ cross @ Pi2
        L[k] = Lk
    return L


def build_embedding(p: Plant, sigma_bar: float, l: int, N_conv: int,
                    grid_per_cell: int = DEFAULT_NU_GRID,
                    safety: float = DEFAULT_NU_SAFETY,
                    doubling_cap: int = DEFAULT_DOUBLING_CAP) -> EmbeddingTables:
    """Tables M_j, N_j, Pi_{1,j}, Pi_{2,j}, L_{k,j} and remainder constants.

    The remainder constants are the max of lambda_max (resp. min of
    lambda_min) of Phi - truncation over ``grid_per_cell`` points per
    subinterval, multiplied by ``safety``.
    """
    if l < 1 or N_conv < 1 or grid_per_cell < 2:
        raise ValueError("need l >= 1, N_conv >= 1 and grid_per_cell >= 2")
    n = p.n
    h = sigma_bar / l
    Acl = p.closed_loop
    M = np.array([int_expm(p.A, j * h) for j in range(l)])
    N = p.A @ M + np.eye(n)
    Pi1 = np.eye(n) + M @ Acl
    Pi2 = N @ Acl
    L = np.array([taylor_blocks(p, Pi1[j], Pi2[j], N_conv) for j in range(l)])
    tab = EmbeddingTables(sigma_bar, l, N_conv, M, N, Pi1, Pi2, L, 0.0, 0.0,
                          0.0, 0.0, grid_per_cell, safety, doubling_cap)
    hi_all, lo_all = -np.inf, np.inf
    grid = np.linspace(0.0, h, grid_per_cell)
    for r in range(l):
        R = np.array([phi_at(p, s + r * h) - tab.truncated_phi(r, s) for s in grid])
        if n == 2:
            lo, hi = sym2_extremes(R[:, 0, 0], R[:, 0, 1], R[:, 1, 1])
        else:
            ext = np.array([sym_eig_extremes(Ri)[:2] for Ri in R])
            lo, hi = ext[:, 0], ext[:, 1]
        hi_all = max(hi_all, float(hi.max()))
        lo_all = min(lo_all, float(lo.min()))
    tab.nu_lower_grid = hi_all
    tab.nu_upper_grid = lo_all
    tab.nu_lower = safety * hi_all
    tab.nu_upper = safety * lo_all
    return tab


# -- vertex families ---------------------------------------------------------

def _lower_index(tab, tau):
    J = int(math.floor(tau / tab.h + 1e-9))
    if J >= tab.l:
        return tab.l - 1, tab.h
    return J, max(tau - J * tab.h, 0.0)


def _upper_index(tab, tau):
    J = int(math.floor(tau / tab.h + 1e-9))
    if J >= tab.l:
        return tab.l - 1, 0.0
    return J, max((J + 1) * tab.h - tau, 0.0)


def vertex_matrices_lower(tab: EmbeddingTables, tau_lo: float) -> Dict[Tuple[int, int], np.ndarray]:
    """Vertex family whose nonpositivity gives no trigger on [0, tau_lo]."""
    if not 0.0 < tau_lo <= tab.sigma_bar + 1e-12:
        raise ValueError("tau_lo must lie in (0, sigma_bar]")
    J, chi = _lower_index(tab, tau_lo)
    out = {}
    nu = tab.nu_lower * np.eye(tab.n)
    for j in range(J + 1):
        P = tab.partial_sums(j, tab.h if j < J else chi)
        for i in range(tab.N_conv + 1):
            out[(i, j)] = P[i] + nu
    return out


def vertex_matrices_upper(tab: EmbeddingTables, tau_hi: float) -> Dict[Tuple[int, int], np.ndarray]:
    """Vertex family whose nonnegativity forces a trigger by tau_hi.

    For tau_hi = sigma_bar the family degenerates to j = l - 1 with chi = 0.
    """
    if not 0.0 < tau_hi <= tab.sigma_bar + 1e-12:
        raise ValueError("tau_hi must lie in (0, sigma_bar]")
    J, chi = _upper_index(tab, tau_hi)
    out = {}
    nu = tab.nu_upper * np.eye(tab.n)
    for j in range(J, tab.l):
        P = tab.partial_sums(j, chi if j == J else tab.h)
        for i in range(tab.N_conv + 1):
            out[(i, j)] = P[i] + nu
    return out


# -- S-procedure --------------------------------------------------------------

def _golden_2d(Vs, Q, cap):
    """Minimize g(e) = lam_max(V + e Q) over e >= 0 for a stack of 2x2 V."""
    a0, b0, c0 = Vs[:, 0, 0], 0.5 * (Vs[:, 0, 1] + Vs[:, 1, 0]), Vs[:, 1, 1]
    qa, qb, qc = Q[0, 0], Q[0, 1], Q[1, 1]

    def g(e):
        return sym2_extremes(a0 + e * qa, b0 + e * qb, c0 + e * qc)[1]

    g0 = g(np.zeros(len(Vs)))
    eps = np.zeros(len(Vs))
    best = g0.copy()
    todo = g0 > FEAS_TOL
    if not todo.any() or not np.any(Q):
        return eps, best
    # bracket: double until g stops decreasing (g is convex in e)
    hi = np.ones(len(Vs))
    ghi = g(hi)
    grow = todo & (ghi < g0)
    for _ in range(cap):
        if not grow.any():
            break
        g2 = g(2.0 * hi)
        step = grow & (g2 < ghi)
        hi = np.where(step, 2.0 * hi, hi)
        ghi = np.where(step, g2, ghi)
        grow = step
    hi = np.where(todo, 2.0 * hi, 0.0)
    lo = np.zeros(len(Vs))
    x1 = hi - _INVPHI * (hi - lo)
    x2 = lo + _INVPHI * (hi - lo)
    f1, f2 = g(x1), g(x2)
    for _ in range(GOLDEN_STEPS):
        left = f1 <= f2  # minimum in [lo, x2]
        lo = np.where(left, lo, x1)
        hi = np.where(left, x2, hi)
        x1 = hi - _INVPHI * (hi - lo)
        x2 = lo + _INVPHI * (hi - lo)
        f1, f2 = g(x1), g(x2)
        if np.all(hi - lo <= 1e-13 * (1.0 + hi)):
            break
    cand = 0.5 * (lo + hi)
    gc = g(cand)
    improve = todo & (gc < best)
    eps = np.where(improve, cand, eps)
    best = np.where(improve, gc, best)
    return eps, best


def _subgradient(V, E, steps=SUBGRADIENT_STEPS):
    """Minimize lam_max(V + E'UE) over symmetric U >= 0 entrywise."""
    p = E.shape[0]
    U = np.zeros((p, p))
    _, val, w = sym_eig_extremes(V)
    best, bestU = val, U.copy()
    if val <= FEAS_TOL:
        return bestU, best
    step0 = max(abs(val), 1e-6) / max(np.linalg.norm(E, 2) ** 2, 1e-12)
    for k in range(steps):
        Ew = E @ w
        G = np.outer(Ew, Ew)
        gn = np.linalg.norm(G)
        if gn == 0.0:
            break
        U = np.maximum(U - step0 / math.sqrt(k + 1.0) * G / gn, 0.0)
        U = 0.5 * (U + U.T)
        _, val, w = sym_eig_extremes(V + E.T @ U @ E)
        if val < best:
            best, bestU = val, U.copy()
            if best <= FEAS_TOL:
                break
    return bestU, best


def _sproc_batch(Vs, region: ConicRegion, sense: str, cap=DEFAULT_DOUBLING_CAP):
    """Vectorized S-procedure; returns (feasible, multipliers, margins)."""
    Vs = np.asarray(Vs, dtype=float)
    if sense == "upper":
        Vs = -Vs
    elif sense != "lower":
        raise ValueError("sense must be 'lower' or 'upper'")
    if region.n == 2:
        eps, best = _golden_2d(Vs, region.Q, cap)
        return best <= FEAS_TOL, eps, best
    mults, vals = [], []
    for V in Vs:
        U, val = _subgradient(V, region.E)
        mults.append(U)
        vals.append(val)
    vals = np.array(vals)
    return vals <= FEAS_TOL, mults, vals


def sproc_feasible(V, region: ConicRegion, sense: str = "lower"):
    """Search a cone multiplier making V + mult <= 0 (lower) or V - mult >= 0 (upper).

    For n = 2 the multiplier is a scalar e >= 0 on the region's Q; for
    n >= 3 it is a symmetric entrywise-nonnegative U on E'UE.

    Returns
    -------
    (feasible, multiplier)
    """
    ok, mult, _ = _sproc_batch(np.asarray(V, dtype=float)[None], region, sense)
    return bool(ok[0]), (float(mult[0]) if region.n == 2 else mult[0])


def certificate_margin(V, region: ConicRegion, sense, mult) -> float:
    """lam_max of the certified matrix, recomputed from a stored multiplier.

    Feasible certificates have margin <= 1e-9.
    """
    V = np.asarray(V, dtype=float)
    if region.n == 2:
        S = V + mult * region.Q if sense == "lower" else -(V - mult * region.Q)
    else:
        U = np.asarray(mult)
        S = (V + region.E.T @ U @ region.E if sense == "lower"
             else -(V - region.E.T @ U @ region.E))
    return float(lam_max_batch(S))


# -- line searches -----------------------------------------------------------

class _RegionSearch:
    """Feasibility oracles for one region with per-subinterval caching."""

    def __init__(self, tab: EmbeddingTables, region: Optional[ConicRegion]):
        self.tab = tab
        self.region = region
        I = np.eye(tab.n)
        self.int_lower = np.array([tab.partial_sums(j, tab.h) for j in range(tab.l)]) + tab.nu_lower * I
        self.int_upper = np.array([tab.partial_sums(j, tab.h) for j in range(tab.l)]) + tab.nu_upper * I
        self._first_bad_lower = None
        self._last_bad_upper = None

    def _ok(self, Vs, sense):
        Vs = np.asarray(Vs)
        flat = Vs.reshape(-1, self.tab.n, self.tab.n)
        if self.region is None:
            lam = lam_max_batch(flat if sense == "lower" else -flat)
            return (lam <= FEAS_TOL).reshape(Vs.shape[:-2])
        ok, _, _ = _sproc_batch(flat, self.region, sense, self.tab.doubling_cap)
        return np.asarray(ok).reshape(Vs.shape[:-2])

    @property
    def first_bad_lower(self):
        if self._first_bad_lower is None:
            ok = self._ok(self.int_lower, "lower").all(axis=1)
            bad = np.flatnonzero(~ok)
            self._first_bad_lower = int(bad[0]) if bad.size else self.tab.l
        return self._first_bad_lower

    @property
    def last_bad_upper(self):
        if self._last_bad_upper is None:
            ok = self._ok(self.int_upper, "upper").all(axis=1)
            bad = np.flatnonzero(~ok)
            self._last_bad_upper = int(bad[-1]) if bad.size else -1
        return self._last_bad_upper

    def lower_ok(self, tau):
        tab = self.tab
        J, chi = _lower_index(tab, tau)
        if J > self.first_bad_lower:
            return False
        last = tab.partial_sums(J, chi) + tab.nu_lower * np.eye(tab.n)
        return bool(self._ok(last, "lower").all())

    def upper_ok(self, tau):
        tab = self.tab
        J, chi = _upper_index(tab, tau)
        if J < self.last_bad_upper:
            return False
        first = tab.partial_sums(J, chi) + tab.nu_upper * np.eye(tab.n)
        return bool(self._ok(first, "upper").all())


def _bisect_largest(ok, lo, hi, steps=BISECTION_STEPS):
    # lo is known feasible
    if ok(hi):
        return hi
    for _ in range(steps):
        mid = 0.5 * (lo + hi)
        if ok(mid):
            lo = mid
        else:
            hi = mid
    return lo


def _bisect_smallest(ok, lo, hi, steps=BISECTION_STEPS):
    # hi is known feasible
    if ok(lo):
        return lo
    for _ in range(steps):
        mid = 0.5 * (lo + hi)
        if ok(mid):
            hi = mid
        else:
            lo = mid
    return hi


def global_lower_bound(tab: EmbeddingTables) -> float:
    """Largest tau with every lower vertex matrix negative semidefinite.

    This certifies no trigger on [0, tau] for every state, with no cone
    restriction.
    """
    search = _RegionSearch(tab, None)
    tiny = tab.sigma_bar / 2.0 ** BISECTION_STEPS
    if not search.lower_ok(tiny):
        raise AbstractionFailure(
            "no positive inter-sample time can be certified even globally; "
            "increase l or N_conv (remainder nu_lower = %.3g)" % tab.nu_lower)
    return _bisect_largest(search.lower_ok, tiny, tab.sigma_bar)


def regional_lower_bound(p: Plant, tab: EmbeddingTables, region: ConicRegion,
                         tau_prime: Optional[float] = None) -> float:
    """Largest certified tau_lo in [tau_prime, sigma_bar] for ``region``."""
    if tau_prime is None:
        tau_prime = global_lower_bound(tab)
    search = _RegionSearch(tab, region)
    return _bisect_largest(search.lower_ok, tau_prime, tab.sigma_bar)


def _upper_search(tab, region, tau_lo):
    search = _RegionSearch(tab, region)
    if not search.upper_ok(tab.sigma_bar):
        return tab.sigma_bar, True
    return _bisect_smallest(search.upper_ok, tau_lo, tab.sigma_bar), False


def regional_upper_bound(p: Plant, tab: EmbeddingTables, region: ConicRegion,
                         tau_lo: float) -> float:
    """Smallest certified tau_hi in [tau_lo, sigma_bar].

    Returns sigma_bar when even that cannot be certified; ``certify_region``
    reports this as saturation.
    """
    return _upper_search(tab, region, tau_lo)[0]


@dataclass
class RegionalBounds:
    index: int
    tau_lo: float
    tau_hi: float
    saturated: bool = False
    lower_certificate: dict = field(default_factory=dict)
    upper_certificate: dict = field(default_factory=dict)

    def with_index(self, index):
        return RegionalBounds(index, self.tau_lo, self.tau_hi, self.saturated,
                              self.lower_certificate, self.upper_certificate)


def family_certificate(family, region: ConicRegion, sense: str, cap=DEFAULT_DOUBLING_CAP):
    keys = list(family)
    ok, mults, margins = _sproc_batch(np.array([family[k] for k in keys]), region,
                                      sense, cap)
    if region.n == 2:
        mults = [float(m) for m in mults]
    else:
        mults = [np.asarray(m).tolist() for m in mults]
    return {
        "vertices": [list(k) for k in keys],
        "multipliers": mults,
        "margins": [float(m) for m in margins],
        "feasible": bool(np.all(ok)),
    }


def certify_region(p: Plant, tab: EmbeddingTables, region: ConicRegion,
                   tau_prime: float) -> RegionalBounds:
    """Both bounds for one region plus the multipliers that certify them."""
    tau_lo = regional_lower_bound(p, tab, region, tau_prime)
    tau_hi, saturated = _upper_search(tab, region, tau_lo)
    cap = tab.doubling_cap
    low = family_certificate(vertex_matrices_lower(tab, tau_lo), region, "lower", cap)
    up = family_certificate(vertex_matrices_upper(tab, tau_hi), region, "upper", cap)
    return RegionalBounds(region.index, tau_lo, tau_hi, saturated, low, up)


def _certify_job(args):
    return certify_region(*args)


def compute_bounds(p: Plant, tab: EmbeddingTables, part: Partition,
                   threads: int = 1) -> List[RegionalBounds]:
    """Bounds for every region: computed on the half cover, copied to mirrors."""
    tau_prime = global_lower_bound(tab)
    regions = [part.region(s) for s in part.half_indices]
    jobs = [(p, tab, r, tau_prime) for r in regions]
    if threads > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            half = list(pool.map(_certify_job, jobs))
    else:
        half = [_certify_job(j) for j in jobs]
    out = list(half)
    for b in half:
        out.append(b.with_index(part.mirror(b.index)))
    out.sort(key=lambda b: b.index)
    log.info("bounds: tau' = %.6f, %d regions", tau_prime, len(out))
    return out, tau_prime
