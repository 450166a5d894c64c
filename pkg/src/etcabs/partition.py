"""Isotropic conic covering of the state space.

Angular coordinates: for k = 1..n-1, theta_k is the polar angle of the
planar point (x_k, x_n), so theta_k in [0, pi] on the half-space x_n >= 0.
A bound theta_k >= a (or <= b) is then a hyperplane through the origin,
so every box of angles is a convex polyhedral cone with at most 2n - 2
faces.  For n = 2 this is the usual polar angle.

The half-space x_n >= 0 is cut into m_bar^(n-1) equal angular boxes;
region s + H (H = m_bar^(n-1)) is the antipodal mirror of region s.
Region indices are 1-based.
"""

import itertools
import json
from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np

from .errors import InvalidSectorError, UndefinedPointError

MEMBER_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class ConicRegion:
    index: int
    angular_box: Tuple[Tuple[float, float], ...]
    rays: np.ndarray  # (r, n) unit extreme rays
    E: np.ndarray  # (p, n), cone = {x : E x >= 0}
    Q: Optional[np.ndarray] = None  # n = 2 only, x'Qx >= 0 on cone u -cone

    @property
    def n(self) -> int:
        return self.E.shape[1]

    def contains(self, x, tol=MEMBER_TOL) -> bool:
        x = np.asarray(x, dtype=float)
        return bool(np.all(self.E @ x >= -tol * max(1.0, np.linalg.norm(x))))

    def to_dict(self):
        return {
            "index": self.index,
            "angular_box": [list(b) for b in self.angular_box],
            "rays": self.rays.tolist(),
            "E": self.E.tolist(),
        }


@dataclass(frozen=True, eq=False)
class Partition:
    n: int
    m_bar: int
    regions: List[ConicRegion]

    @property
    def q(self) -> int:
        return len(self.regions)

    @property
    def half(self) -> int:
        return self.q // 2

    @property
    def half_indices(self) -> List[int]:
        return list(range(1, self.half + 1))

    def region(self, s: int) -> ConicRegion:
        return self.regions[s - 1]

    def mirror(self, s: int) -> int:
        """Index of the antipodal partner of region ``s``."""
        H = self.half
        return s + H if s <= H else s - H

    def to_json(self) -> str:
        return json.dumps({"n": self.n, "m_bar": self.m_bar,
                           "regions": [r.to_dict() for r in self.regions]},
                          indent=1)


def _bound_normal(k, n, angle, lower):
    """Inward normal for theta_k >= angle (lower) or theta_k <= angle."""
    row = np.zeros(n)
    c, s = np.cos(angle), np.sin(angle)
    if lower:
        # cross((cos a, sin a), (x_k, x_n)) >= 0
        row[k], row[n - 1] = -s, c
    else:
        row[k], row[n - 1] = s, -c
    # exact zeros at multiples of pi/2 keep the tables tidy
    row[np.abs(row) < 1e-15] = 0.0
    return row


def region_halfspace_form(angular_box) -> np.ndarray:
    """E with E x >= 0 exactly on the cone of the given angular box.

    ``angular_box`` holds (lo, hi) for theta_1..theta_{n-1}; widths must not
    exceed pi.  Rows come in (lower, upper) pairs per coordinate.
    """
    box = [tuple(map(float, b)) for b in angular_box]
    n = len(box) + 1
    rows = []
    for k, (lo, hi) in enumerate(box):
        if hi - lo > np.pi + 1e-12 or hi < lo:
            raise InvalidSectorError(f"theta_{k + 1} interval [{lo}, {hi}] is not a valid sector")
        rows.append(_bound_normal(k, n, lo, True))
        rows.append(_bound_normal(k, n, hi, False))
    return np.array(rows)


def region_quadratic_form(rays) -> np.ndarray:
    """Q with x'Qx >= 0 exactly on cone(a, b) u -cone(a, b), n = 2.

    ``rays`` = (a, b) with b counter-clockwise from a.  Built as the
    symmetrized product of the two inward normals; for a half-plane
    (opening pi) the union is all of R^2 and Q = 0.
    """
    a, b = (np.asarray(r, dtype=float) for r in rays)
    if a.shape != (2,) or b.shape != (2,):
        raise InvalidSectorError("quadratic form needs two planar rays")
    cross = a[0] * b[1] - a[1] * b[0]
    dot = a @ b
    opening = np.arctan2(cross, dot)
    if opening < -1e-12:
        opening += 2 * np.pi
    if opening > np.pi + 1e-12:
        raise InvalidSectorError(f"sector opening {opening} exceeds pi")
    if abs(opening - np.pi) <= 1e-12:
        return np.zeros((2, 2))
    na = np.array([-a[1], a[0]])  # na @ x = cross(a, x)
    nb = np.array([b[1], -b[0]])  # nb @ x = cross(x, b)
    return 0.5 * (np.outer(na, nb) + np.outer(nb, na))


def cone_extreme_rays(E, tol=1e-9) -> np.ndarray:
    """Unit extreme rays of the pointed cone {x : E x >= 0}.

    Enumerates (n-1)-subsets of active rows; fine for the small n here.
    For a non-pointed cone (a half-space) the boundary line directions
    are not extreme and callers must supply rays themselves.
    """
    E = np.asarray(E, dtype=float)
    n = E.shape[1]
    found = []
    for rows in itertools.combinations(range(E.shape[0]), n - 1):
        sub = E[list(rows)]
        _, s, vt = np.linalg.svd(sub)
        if n - 1 > 0 and s[-1] < 1e-10:
            continue
        r = vt[-1]
        for cand in (r, -r):
            if np.all(E @ cand >= -tol) and not any(np.allclose(cand, f, atol=1e-9) for f in found):
                found.append(cand)
    return np.array(found)


def _make_region(index, box):
    box = tuple((float(lo), float(hi)) for lo, hi in box)
    E = region_halfspace_form(box)
    n = E.shape[1]
    if n == 2:
        lo, hi = box[0]
        rays = np.array([[np.cos(lo), np.sin(lo)], [np.cos(hi), np.sin(hi)]])
        rays[np.abs(rays) < 1e-15] = 0.0
        Q = region_quadratic_form(rays)
        return ConicRegion(index, box, rays, E, Q)
    rays = cone_extreme_rays(E)
    return ConicRegion(index, box, rays, E, None)


def isotropic_cover(n: int, m_bar: int) -> Partition:
    """Equidistant angular covering with q = 2 * m_bar^(n-1) regions."""
    if n < 2:
        raise ValueError("n must be at least 2")
    if m_bar < 1:
        raise ValueError("m_bar must be at least 1")
    if n > 2 and m_bar < 2:
        raise InvalidSectorError("n >= 3 needs m_bar >= 2 for pointed cones")
    edges = np.linspace(0.0, np.pi, m_bar + 1)
    cells = list(itertools.product(range(m_bar), repeat=n - 1))
    upper = [_make_region(i + 1, [(edges[c], edges[c + 1]) for c in cell])
             for i, cell in enumerate(cells)]
    H = len(upper)
    lower = []
    for r in upper:
        box = tuple((lo - np.pi, hi - np.pi) for lo, hi in r.angular_box)
        Q = None if r.Q is None else r.Q.copy()  # x'Qx is even
        lower.append(ConicRegion(r.index + H, box, -r.rays, -r.E, Q))
    return Partition(n, m_bar, upper + lower)


def _upper_half(x):
    # canonical representative of {x, -x}: last non-negligible coordinate > 0
    scale = np.abs(x).max()
    nz = np.flatnonzero(np.abs(x) > 1e-12 * scale)
    return x[nz[-1]] > 0


def locate_region(part: Partition, x, tol=MEMBER_TOL) -> int:
    """Index of a region containing ``x``.

    Ties on shared boundaries go to the lowest index, except on the
    seam x_n = 0 where x and -x always land in antipodal partners.
    """
    x = np.asarray(x, dtype=float)
    nx = np.linalg.norm(x)
    if nx == 0.0:
        raise UndefinedPointError("the origin belongs to every region")
    u = x / nx
    flip = not _upper_half(u)
    v = -u if flip else u
    for r in part.regions[:part.half]:
        if np.all(r.E @ v >= -tol):
            return part.mirror(r.index) if flip else r.index
    raise UndefinedPointError(f"no region contains {x}")  # unreachable for a cover
