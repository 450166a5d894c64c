"""Dense linear-algebra primitives used by every stage of the abstraction.

Everything here is a pure function of its (numpy) inputs.
"""

import math
from typing import NamedTuple

import numpy as np

from .errors import ContractError, DegenerateHullError, DimensionError

# expm: halve ||At||_inf until <= this, then a fixed-order Taylor core
EXPM_SCALE_TARGET = 0.5
EXPM_TAYLOR_ORDER = 13

JACOBI_TOL = 1e-12
JACOBI_MAX_SWEEPS = 100
SYMMETRY_TOL = 1e-9

LP_TOL = 1e-9
HULL_TOL = 1e-9


def _square(A, name="A"):
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise DimensionError(f"{name} must be square, got shape {A.shape}")
    return A


def expm(A, t=1.0):
    """Matrix exponential e^{At} by scaling and squaring.

    The scaled argument has infinity norm at most 0.5, where a degree-13
    Taylor polynomial is accurate to roughly machine precision.
    """
    A = _square(A)
    if t < 0:
        raise ValueError("t must be nonnegative")
    X = A * t
    n = X.shape[0]
    norm = np.abs(X).sum(axis=1).max() if n else 0.0
    squarings = 0
    if norm > EXPM_SCALE_TARGET:
        squarings = int(np.ceil(np.log2(norm / EXPM_SCALE_TARGET)))
        X = X / 2.0 ** squarings
    # Horner evaluation of sum_k X^k / k!
    E = np.eye(n)
    for k in range(EXPM_TAYLOR_ORDER, 0, -1):
        E = np.eye(n) + X @ E / k
    for _ in range(squarings):
        E = E @ E
    return E


def int_expm(A, t):
    """Integral of e^{Ar} over r in [0, t].

    Read off the top-right block of exp([[A, I], [0, 0]] t), which is
    valid for singular A.
    """
    A = _square(A)
    if t < 0:
        raise ValueError("t must be nonnegative")
    n = A.shape[0]
    aug = np.zeros((2 * n, 2 * n))
    aug[:n, :n] = A
    aug[:n, n:] = np.eye(n)
    return expm(aug, t)[:n, n:]


def expm_and_integral(A, t):
    """Return (e^{At}, int_0^t e^{Ar} dr) from one augmented exponential."""
    A = _square(A)
    n = A.shape[0]
    aug = np.zeros((2 * n, 2 * n))
    aug[:n, :n] = A
    aug[:n, n:] = np.eye(n)
    F = expm(aug, t)
    return F[:n, :n], F[:n, n:]


def symmetrize(M):
    M = np.asarray(M, dtype=float)
    return (M + M.T) / 2.0


def jacobi_eigh(M):
    """Eigen-decomposition of a symmetric matrix by cyclic Jacobi rotations.

    Returns
    -------
    w : ndarray
        Eigenvalues (unsorted, diagonal of the rotated matrix).
    V : ndarray
        Orthogonal matrix whose columns are the matching eigenvectors.
    """
    M = _square(M, "M")
    scale = max(1.0, float(np.abs(M).max())) if M.size else 1.0
    if np.abs(M - M.T).max(initial=0.0) > SYMMETRY_TOL * scale:
        raise ContractError("matrix is not symmetric within tolerance")
    S0 = symmetrize(M)
    n = S0.shape[0]
    tol = JACOBI_TOL * max(1.0, float(np.linalg.norm(S0)))
    # scalar rotations on nested lists: far cheaper than numpy for small n
    S = S0.tolist()
    V = np.eye(n).tolist()
    for _ in range(JACOBI_MAX_SWEEPS):
        off = math.sqrt(2.0 * sum(S[i][j] ** 2 for i in range(n) for j in range(i + 1, n)))
        if off <= tol:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = S[p][q]
                if apq == 0.0:
                    continue
                # rotation angle zeroing S[p][q] (Golub & Van Loan 8.5.2)
                theta = (S[q][q] - S[p][p]) / (2.0 * apq)
                if theta == 0.0:
                    t = 1.0
                else:
                    t = math.copysign(1.0, theta) / (abs(theta) + math.sqrt(theta * theta + 1.0))
                c = 1.0 / math.sqrt(t * t + 1.0)
                s = t * c
                for row in S:
                    a, b = row[p], row[q]
                    row[p], row[q] = c * a - s * b, s * a + c * b
                Sp, Sq = S[p], S[q]
                S[p] = [c * a - s * b for a, b in zip(Sp, Sq)]
                S[q] = [s * a + c * b for a, b in zip(Sp, Sq)]
                S[p][q] = S[q][p] = 0.0
                for row in V:
                    a, b = row[p], row[q]
                    row[p], row[q] = c * a - s * b, s * a + c * b
    return np.array([S[i][i] for i in range(n)]), np.array(V)


def sym_eig_extremes(M):
    """Smallest and largest eigenvalue of a symmetric matrix.

    Returns
    -------
    (lam_min, lam_max, v_max)
        ``v_max`` is a unit eigenvector for ``lam_max``.
    """
    w, V = jacobi_eigh(M)
    i_max = int(np.argmax(w))
    v = V[:, i_max]
    return float(w.min()), float(w[i_max]), v / np.linalg.norm(v)


def sym2_extremes(a, b, c):
    """Vectorized eigen-extremes of 2x2 symmetric matrices [[a, b], [b, c]].

    One Jacobi rotation diagonalizes a 2x2 matrix exactly, which gives the
    closed form used here.  Arguments broadcast.
    """
    mid = 0.5 * (a + c)
    rad = np.hypot(0.5 * (a - c), b)
    return mid - rad, mid + rad


def lam_max_batch(Ms):
    """Largest eigenvalue for a stack of symmetric matrices, shape (..., n, n)."""
    Ms = np.asarray(Ms, dtype=float)
    if Ms.shape[-1] == 2:
        return sym2_extremes(Ms[..., 0, 0], 0.5 * (Ms[..., 0, 1] + Ms[..., 1, 0]),
                             Ms[..., 1, 1])[1]
    flat = Ms.reshape(-1, Ms.shape[-2], Ms.shape[-1])
    out = np.array([sym_eig_extremes(symmetrize(M))[1] for M in flat])
    return out.reshape(Ms.shape[:-2])


def lp_feasible(C, d, E):
    """Decide whether {x : Cx <= d, Ex >= 0} is nonempty.

    Phase-1 simplex on a dense tableau with Bland's anti-cycling rule.
    Free variables are split as x = x+ - x-.
    """
    C = np.atleast_2d(np.asarray(C, dtype=float))
    d = np.atleast_1d(np.asarray(d, dtype=float))
    E = np.asarray(E, dtype=float)
    n = C.shape[1]
    if E.size == 0:
        E = np.zeros((0, n))
    E = np.atleast_2d(E)
    if C.shape[0] != d.shape[0]:
        raise DimensionError(f"C has {C.shape[0]} rows but d has {d.shape[0]}")
    if E.shape[1] != n:
        raise DimensionError(f"E has {E.shape[1]} columns, expected {n}")
    f, p = C.shape[0], E.shape[0]
    m = f + p
    if m == 0:
        return True
    # columns: x+ (n), x- (n), slacks for C (f), surplus for E (p)
    A = np.zeros((m, 2 * n + f + p))
    A[:f, :n] = C
    A[:f, n:2 * n] = -C
    A[:f, 2 * n:2 * n + f] = np.eye(f)
    A[f:, :n] = E
    A[f:, n:2 * n] = -E
    A[f:, 2 * n + f:] = -np.eye(p)
    b = np.concatenate([d, np.zeros(p)])
    neg = b < 0
    A[neg] *= -1.0
    b[neg] *= -1.0
    nv = A.shape[1]
    T = np.hstack([A, np.eye(m), b[:, None]])
    basis = list(range(nv, nv + m))
    # reduced costs of the phase-1 objective (sum of artificials)
    r = np.concatenate([-A.sum(axis=0), np.zeros(m), [-b.sum()]])
    tol = LP_TOL * max(1.0, float(np.abs(b).max(initial=0.0)))
    for _ in range(50 * (nv + m)):
        enter = next((j for j in range(nv + m) if r[j] < -LP_TOL), None)
        if enter is None:
            break
        col = T[:, enter]
        rows = np.nonzero(col > LP_TOL)[0]
        if rows.size == 0:  # unbounded direction; cannot happen in phase 1
            break
        ratios = T[rows, -1] / col[rows]
        best = ratios.min()
        ties = rows[ratios <= best + 1e-15]
        leave = min(ties, key=lambda i: basis[i])
        T[leave] /= T[leave, enter]
        for i in range(m):
            if i != leave and T[i, enter] != 0.0:
                T[i] -= T[i, enter] * T[leave]
        r = r - r[enter] * T[leave]
        basis[leave] = enter
    return -r[-1] <= tol


class HalfSpaces(NamedTuple):
    C: np.ndarray
    d: np.ndarray
    exact: bool = True


def _hull_2d(P):
    # Andrew's monotone chain, counter-clockwise, collinear points dropped
    pts = sorted(map(tuple, P))

    def cross(o, a, b):
        return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])

    lower, upper = [], []
    for q in pts:
        while len(lower) >= 2 and cross(lower[-2], lower[-1], q) <= 0:
            lower.pop()
        lower.append(q)
    for q in reversed(pts):
        while len(upper) >= 2 and cross(upper[-2], upper[-1], q) <= 0:
            upper.pop()
        upper.append(q)
    return np.array(lower[:-1] + upper[:-1])


def convex_hull(points):
    """H-representation {x : Cx <= d} of the convex hull of a point set.

    Rows of ``C`` are unit outward normals.  Exact in 2-D and 3-D; for
    higher dimensions the axis-aligned bounding box is returned and
    ``exact`` is False.
    """
    P = np.atleast_2d(np.asarray(points, dtype=float))
    k, n = P.shape
    if k < n + 1:
        raise DegenerateHullError(f"need at least {n + 1} points in {n}-D, got {k}")
    centered = P - P.mean(axis=0)
    scale = max(1.0, float(np.abs(P).max()))
    sv = np.linalg.svd(centered, compute_uv=False)
    if sv[-1] <= 1e-10 * scale:
        raise DegenerateHullError("points are affinely dependent")
    if n == 2:
        H = _hull_2d(P)
        edges = np.roll(H, -1, axis=0) - H
        C = np.column_stack([edges[:, 1], -edges[:, 0]])
        C /= np.linalg.norm(C, axis=1)[:, None]
        d = np.einsum("ij,ij->i", C, H)
    elif n == 3:
        from scipy.spatial import ConvexHull

        eq = ConvexHull(P).equations
        C = eq[:, :-1]
        d = -eq[:, -1]
    else:
        C = np.vstack([np.eye(n), -np.eye(n)])
        d = np.concatenate([P.max(axis=0), -P.min(axis=0)])
        return HalfSpaces(C, d, exact=False)
    # round-off guard: every input point must satisfy Cx <= d + HULL_TOL
    d = np.maximum(d, (P @ C.T).max(axis=0))
    return HalfSpaces(C, d, exact=True)
