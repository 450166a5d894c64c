"""Flow pipes of each region over its certified window, and the induced
region-to-region transitions.

The state reached after sigma from x is Lambda(sigma) x, linear in x, so
the image of the initial polytope at a fixed time is the hull of the
vertex images.  Only the time direction needs over-approximation: each
segment hull is bloated by a bound on the deviation of a vertex arc from
its chord.
"""

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import List, Set, Tuple

import numpy as np

from .errors import DegenerateHullError
from .linalg import convex_hull, expm, lp_feasible
from .partition import ConicRegion, Partition
from .plant import Plant, lambda_at

log = logging.getLogger(__name__)

CURVATURE_SAMPLES = 8
CURVATURE_SAFETY = 1.5
DEGENERATE_PAD = 1e-6
DEFAULT_STEP = 0.01


@dataclass(eq=False)
class FlowPipeSegment:
    region: int
    t0: float
    t1: float
    C: np.ndarray
    d: np.ndarray
    bloat: float
    exact_hull: bool = True
    points: np.ndarray = None  # sampled vertex images, all inside the segment

    def contains(self, x, tol=1e-9) -> bool:
        return bool(np.all(self.C @ np.asarray(x, dtype=float) <= self.d + tol))

    @property
    def contains_origin(self) -> bool:
        return bool(np.all(self.d >= 0.0))

    def to_dict(self):
        return {"t0": self.t0, "t1": self.t1, "C": self.C.tolist(),
                "d": self.d.tolist(), "bloat": self.bloat}


def initial_polytope(region: ConicRegion) -> np.ndarray:
    """Unit vectors on the extreme rays of ``region`` (one per row)."""
    R = np.asarray(region.rays, dtype=float)
    if len(R) < 2:
        raise ValueError("region needs at least two extreme rays")
    return R / np.linalg.norm(R, axis=1)[:, None]


def _curvature_bound(p: Plant, t0, t1):
    """Bound on ||Lambda''(t)||_2 = ||A e^{At} (A + BK)||_2 on [t0, t1]."""
    Acl = p.closed_loop
    ts = np.linspace(t0, t1, CURVATURE_SAMPLES)
    return CURVATURE_SAFETY * max(np.linalg.norm(p.A @ expm(p.A, t) @ Acl, 2) for t in ts)


def _segment(p, index, V, t0, t1):
    n = V.shape[1]
    dt = t1 - t0
    times = (t0,) if dt == 0.0 else (t0, 0.5 * (t0 + t1), t1)
    pts = np.vstack([V @ lambda_at(p, t).T for t in times])
    # arc-to-chord deviation of t -> Lambda(t) v over the segment, |v| = 1
    delta = 0.0 if dt == 0.0 else (dt / 2.0) ** 2 / 2.0 * _curvature_bound(p, t0, t1)
    try:
        C, d, exact = convex_hull(pts)
    except DegenerateHullError:
        r = delta + DEGENERATE_PAD
        offsets = np.vstack([np.eye(n), -np.eye(n)]) * r
        cloud = (pts[:, None, :] + offsets[None]).reshape(-1, n)
        C, d, exact = convex_hull(cloud)
    d = d + delta * np.linalg.norm(C, axis=1)
    return FlowPipeSegment(index, float(t0), float(t1), C, d, float(delta), exact, pts)


def flow_pipe(p: Plant, region: ConicRegion, tau_lo: float, tau_hi: float,
              f_bar: int) -> List[FlowPipeSegment]:
    """Union of ``f_bar`` polytopes covering Lambda(t) X0 for t in [tau_lo, tau_hi]."""
    if tau_hi < tau_lo:
        raise ValueError("tau_hi < tau_lo")
    if f_bar < 1:
        raise ValueError("f_bar must be at least 1")
    V = initial_polytope(region)
    ts = np.linspace(tau_lo, tau_hi, f_bar + 1)
    return [_segment(p, region.index, V, ts[f], ts[f + 1]) for f in range(f_bar)]


def segment_count(tau_lo: float, tau_hi: float, step: float = DEFAULT_STEP) -> int:
    return max(1, int(math.ceil((tau_hi - tau_lo) / step - 1e-9)))


def _pipe_job(args):
    p, region, lo, hi, step = args
    return flow_pipe(p, region, lo, hi, segment_count(lo, hi, step))


def compute_flow_pipes(p: Plant, part: Partition, bounds, step: float = DEFAULT_STEP,
                       threads: int = 1) -> List[List[FlowPipeSegment]]:
    """Flow pipes for every region, in region-index order."""
    jobs = [(p, part.region(b.index), b.tau_lo, b.tau_hi, step) for b in bounds]
    if threads > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(_pipe_job, jobs))
    return [_pipe_job(j) for j in jobs]


def _intersects(seg: FlowPipeSegment, region: ConicRegion, witnesses) -> bool:
    # a hull point inside the cone is a witness; otherwise decide by LP
    if np.any(np.all(witnesses @ region.E.T >= 0.0, axis=1)):
        return True
    return lp_feasible(seg.C, seg.d, region.E)


@dataclass
class TransitionSet:
    edges: Set[Tuple[int, int]]
    origin_in_pipe: List[int]  # regions whose pipe contains 0 (edges to all)

    def sorted_edges(self):
        return sorted(self.edges)

    def successors(self, s):
        return sorted(t for (a, t) in self.edges if a == s)

    def __contains__(self, e):
        return tuple(e) in self.edges

    def __len__(self):
        return len(self.edges)


def _transitions_job(args):
    part, pipe = args
    out = set()
    origin = False
    for seg in pipe:
        if seg.contains_origin:
            origin = True
        for r in part.regions:
            if (seg.region, r.index) not in out and _intersects(seg, r, seg.points):
                out.add((seg.region, r.index))
    return out, origin


def transitions(part: Partition, pipes, threads: int = 1) -> TransitionSet:
    """Edge (s, s') iff some segment of region s's pipe meets cone s'."""
    jobs = [(part, pipe) for pipe in pipes]
    if threads > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(_transitions_job, jobs))
    else:
        results = [_transitions_job(j) for j in jobs]
    edges = set()
    origin = []
    for pipe, (e, o) in zip(pipes, results):
        edges |= e
        if o and pipe:
            origin.append(pipe[0].region)
    if origin:
        log.warning("flow pipes of regions %s contain the origin", origin)
    return TransitionSet(edges, sorted(origin))
