"""Brute-force verifiers used to cross-check the solvers.

Nothing in here calls the Newton or balancing code; the checks only need the
closed-form momentum maps.  Hulls are desk-scale (affine dimension <= 6) and
are computed by Qhull in an orthonormal chart of the points' affine hull.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linprog
from scipy.spatial import ConvexHull

from .measures import DiscreteMeasure, supports
from .model_space import ModelSpace, momentum_a, momentum_p, normalize

MAX_HULL_DIM = 6
RANK_TOL = 1e-10


class InfeasibleTarget(ValueError):
    pass


class BracketError(ValueError):
    pass


@dataclass
class ConvexBody:
    """Vertex/facet description of a polytope inside its affine hull.

    Facets are ``normals @ x <= offsets`` with unit outward normals lying in
    the affine hull direction.  ``origin + affine_basis @ y`` parametrizes the
    affine hull.
    """

    vertices: np.ndarray
    normals: np.ndarray
    offsets: np.ndarray
    affine_basis: np.ndarray
    origin: np.ndarray
    reduced: bool = False
    requested_dim: int | None = None

    @property
    def dim(self) -> int:
        return self.affine_basis.shape[1]

    @property
    def facets(self):
        return list(zip(self.normals, self.offsets))

    def volume(self) -> float:
        """Volume inside the affine hull (length/area/...)."""
        if self.dim == 0:
            return 0.0
        y = (self.vertices - self.origin) @ self.affine_basis
        if self.dim == 1:
            return float(np.ptp(y))
        return float(ConvexHull(y).volume)


class Verdict(enum.Enum):
    INTERIOR = "Interior"
    BOUNDARY = "Boundary"
    EXTERIOR = "Exterior"


@dataclass(frozen=True)
class HullMembership:
    verdict: Verdict
    margin: float


def affine_chart(points, tol=RANK_TOL):
    """Centroid and orthonormal basis of the affine hull of the rows of ``points``."""
    pts = np.asarray(points, dtype=float)
    origin = pts.mean(axis=0)
    centered = pts - origin
    if len(pts) == 1:
        return origin, np.zeros((pts.shape[1], 0))
    _, s, Vh = np.linalg.svd(centered, full_matrices=False)
    scale = max(1.0, float(s[0])) if len(s) else 1.0
    rank = int(np.sum(s > tol * scale))
    return origin, Vh[:rank].T


def hull_build(points, dim: int | None = None) -> ConvexBody:
    """Convex hull of ``points`` (rows) in their affine hull.

    If the points span fewer than ``dim`` affine dimensions the hull of lower
    dimension is returned with ``reduced=True``.
    """
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2:
        raise ValueError("points must be a 2-d array")
    origin, B = affine_chart(pts)
    r = B.shape[1]
    if r > MAX_HULL_DIM:
        raise ValueError(f"affine dimension {r} exceeds {MAX_HULL_DIM}; use lp_depth instead")
    reduced = dim is not None and r < dim
    D = pts.shape[1]
    if r == 0:
        return ConvexBody(pts[:1].copy(), np.zeros((0, D)), np.zeros(0), B, origin, reduced, dim)
    y = (pts - origin) @ B
    if r == 1:
        lo, hi = int(np.argmin(y[:, 0])), int(np.argmax(y[:, 0]))
        u = B[:, 0]
        normals = np.array([u, -u])
        offsets = np.array([pts[hi] @ u, -(pts[lo] @ u)])
        return ConvexBody(pts[[lo, hi]], normals, offsets, B, origin, reduced, dim)
    hull = ConvexHull(y)
    eq = hull.equations
    # Qhull triangulates facets; collapse coplanar pieces
    _, keep = np.unique(np.round(eq, 9), axis=0, return_index=True)
    eq = eq[np.sort(keep)]
    normals = eq[:, :-1] @ B.T
    offsets = normals @ origin - eq[:, -1]
    return ConvexBody(pts[np.sort(hull.vertices)], normals, offsets, B, origin, reduced, dim)


def hull_membership(p, body: ConvexBody, tol: float = 1e-10) -> HullMembership:
    """Signed distance to the nearest facet; positive inside."""
    p = np.asarray(p, dtype=float)
    d = p - body.origin
    off = float(np.linalg.norm(d - body.affine_basis @ (body.affine_basis.T @ d)))
    if off > tol:
        return HullMembership(Verdict.EXTERIOR, -off)
    if body.dim == 0:
        margin = -float(np.linalg.norm(d))
    else:
        margin = float(np.min(body.offsets - body.normals @ p))
    if margin > tol:
        verdict = Verdict.INTERIOR
    elif margin >= -tol:
        verdict = Verdict.BOUNDARY
    else:
        verdict = Verdict.EXTERIOR
    return HullMembership(verdict, margin)


def lp_depth(p, points) -> float:
    """Largest eps with p = sum lam_k v_k, sum lam = 1, lam_k >= eps.

    Positive iff p lies in the relative interior of conv(points); -inf when p
    is outside.  Used where facet enumeration is too expensive.
    """
    V = np.asarray(points, dtype=float)
    p = np.asarray(p, dtype=float)
    m = len(V)
    # variables: lam (m), eps
    A_eq = np.zeros((V.shape[1] + 1, m + 1))
    A_eq[:-1, :m] = V.T
    A_eq[-1, :m] = 1.0
    b_eq = np.append(p, 1.0)
    A_ub = np.hstack([-np.eye(m), np.ones((m, 1))])
    c = np.zeros(m + 1)
    c[-1] = -1.0
    res = linprog(c, A_ub=A_ub, b_ub=np.zeros(m), A_eq=A_eq, b_eq=b_eq,
                  bounds=[(None, None)] * (m + 1), method="highs")
    if res.status == 2:
        return -np.inf
    if res.status != 0:
        raise RuntimeError(f"LP failed: {res.message}")
    return float(res.x[-1])


def dirac_attain(target, sample_points, model: ModelSpace, tol: float = 1e-9) -> DiscreteMeasure:
    """Measure on at most dim p + 1 of ``sample_points`` whose gradient map is ``target``.

    Solve the barycentric LP, then drop points along affine dependencies until
    the support is affinely independent, and re-solve on that support.
    """
    pts = normalize(np.array(sample_points, dtype=model.dtype, ndmin=2))
    target = np.asarray(target)
    t = model.p_coords(target) if target.ndim == 2 else np.asarray(target, dtype=float)
    V = model.p_coords(momentum_p(pts))
    m, D = V.shape
    A_eq = np.vstack([V.T, np.ones((1, m))])
    b_eq = np.append(t, 1.0)
    res = linprog(np.zeros(m), A_eq=A_eq, b_eq=b_eq, bounds=[(0, None)] * m, method="highs-ds")
    if res.status != 0:
        raise InfeasibleTarget("target is outside the hull of the sample images")
    lam = np.clip(res.x, 0.0, None)
    support = np.flatnonzero(lam > 1e-14)
    lam = lam[support]
    # Caratheodory: move along an affine dependency until a weight vanishes
    while True:
        A = np.vstack([V[support].T, np.ones(len(support))])
        _, s, Vh = np.linalg.svd(A)
        rank = int(np.sum(s > 1e-10 * max(1.0, s[0])))
        if rank == len(support):
            break
        z = Vh[-1]
        if not np.any(z > 0):
            z = -z
        pos = z > 0
        step = np.min(lam[pos] / z[pos])
        lam = lam - step * z
        alive = lam > 1e-14
        support, lam = support[alive], lam[alive]
    A = np.vstack([V[support].T, np.ones(len(support))])
    polished, *_ = np.linalg.lstsq(A, b_eq, rcond=None)
    if np.all(polished >= 0):
        lam = polished
    lam = lam / lam.sum()
    nu = DiscreteMeasure(model, pts[support], lam)
    resid = np.linalg.norm(lam @ V[support] - t)
    if resid > tol:
        raise InfeasibleTarget(f"attained residual {resid:.3g} exceeds {tol:g}")
    return nu


def fd_check(f, p, g_claimed, h: float = 1e-5, basis=None) -> float:
    """Max over directions of |central difference - claimed directional derivative|.

    Directions are the standard basis, or the rows of ``basis`` (the claimed
    gradient is then paired with each row).
    """
    if not 1e-8 <= h <= 1e-2:
        raise ValueError("h must lie in [1e-8, 1e-2]")
    p = np.asarray(p, dtype=float)
    g = np.asarray(g_claimed, dtype=float).ravel()
    E = np.eye(p.size) if basis is None else np.asarray(basis, dtype=float).reshape(-1, p.size)
    err = 0.0
    for e in E:
        d = (f(p + h * e.reshape(p.shape)) - f(p - h * e.reshape(p.shape))) / (2 * h)
        err = max(err, abs(d - e @ g))
    return float(err)


def torus_pairing(nu: DiscreteMeasure, beta, t: float) -> float:
    """<F_a(exp(t beta) . nu), beta>, evaluated directly on the atoms."""
    beta = np.asarray(beta, dtype=float)
    y = nu.atoms * np.exp(t * beta)
    y = normalize(y)
    return float(nu.weights @ momentum_a(y) @ beta)


def bisect_balance_1d(nu: DiscreteMeasure, beta, target_component: float,
                      t_range=(-50.0, 50.0)) -> float:
    """t with <F_a(exp(t beta) . nu), beta> = target_component, by bisection."""
    lo, hi = map(float, t_range)
    flo = torus_pairing(nu, beta, lo) - target_component
    fhi = torus_pairing(nu, beta, hi) - target_component
    if flo > 0 or fhi < 0:
        raise BracketError("target component is outside the one-parameter image")
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        fm = torus_pairing(nu, beta, mid) - target_component
        if fm == 0:
            return mid
        if fm < 0:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 4 * np.finfo(float).eps * max(1.0, abs(mid)):
            break
    t = 0.5 * (lo + hi)
    if abs(torus_pairing(nu, beta, t) - target_component) >= 1e-10:
        raise BracketError("bisection stalled before reaching 1e-10")
    return t


def torus_image_depth(nu: DiscreteMeasure, target) -> float:
    """LP depth of ``target`` in sum_i w_i conv{mu_a(e_j) : j in supp x_i}.

    The closure of the torus-orbit image is this weighted Minkowski sum of
    support simplices; the target is attained iff the largest uniform lower
    bound on a transport plan with those supports is positive.
    """
    S = supports(nu)
    w = nu.weights
    N = nu.model.N
    col = np.asarray(target, dtype=float) + 1.0 / N
    edges = np.argwhere(S & (w[:, None] > 0))
    E = len(edges)
    m = len(w)
    A_eq = np.zeros((m + N, E + 1))
    A_eq[edges[:, 0], np.arange(E)] = 1.0
    A_eq[m + edges[:, 1], np.arange(E)] = 1.0
    b_eq = np.concatenate([w, col])
    # drop atoms with zero weight
    live = np.concatenate([w > 0, np.ones(N, bool)])
    A_ub = np.hstack([-np.eye(E), np.ones((E, 1))])
    c = np.zeros(E + 1)
    c[-1] = -1.0
    res = linprog(c, A_ub=A_ub, b_ub=np.zeros(E), A_eq=A_eq[live], b_eq=b_eq[live],
                  bounds=[(None, None)] * (E + 1), method="highs")
    if res.status == 2:
        return -np.inf
    if res.status != 0:
        raise RuntimeError(f"LP failed: {res.message}")
    return float(res.x[-1])
