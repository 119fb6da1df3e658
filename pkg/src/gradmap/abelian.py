"""Torus part: integrated Kempf-Ness functional and Newton inversion onto orbit images.

For the diagonal torus A = exp(a) acting on a discrete measure nu the integrated
potential is

    f(alpha) = sum_i w_i * 0.5 * log sum_j |x_ij|^2 exp(2 alpha_j),

a weighted log-sum-exp.  Its gradient is F_a(exp(alpha) . nu) and it is
strictly convex on the complement of the isotropy algebra, so minimizing
f - <target, .> inverts the torus gradient map whenever the target lies in the
orbit image.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Any, NamedTuple

import numpy as np

from .convex_oracle import ConvexBody, hull_build
from .measures import (
    DiscreteMeasure,
    gradient_F_torus,
    isotropy_matrix,
    supports,
)

ARMIJO_C = 1e-4
ARMIJO_SHRINK = 0.5
LEVENBERG = 1e-10
DIVERGENCE_RADIUS = 50.0


class Status(enum.Enum):
    CONVERGED = "Converged"
    TARGET_UNREACHABLE = "TargetUnreachable"
    MAX_ITERATIONS = "MaxIterations"
    NON_CONVERGENCE = "NonConvergence"


@dataclass
class SolveReport:
    status: Status
    solution: np.ndarray
    residual_norm: float
    iterations: int
    trace: list = field(default_factory=list)
    message: str = ""
    extras: dict[str, Any] = field(default_factory=dict)

    @property
    def converged(self) -> bool:
        return self.status is Status.CONVERGED


class KNEval(NamedTuple):
    value: float
    gradient: np.ndarray | None
    hessian: np.ndarray | None


class AffineComponent(NamedTuple):
    offset: np.ndarray
    direction_basis: list


_ORDERS = {"value": 0, "gradient": 1, "hessian": 2}


def _softmax_rows(abs2, alpha):
    with np.errstate(divide="ignore"):
        L = np.log(abs2) + 2.0 * alpha
    mx = L.max(axis=1, keepdims=True)
    E = np.exp(L - mx)
    s = E.sum(axis=1, keepdims=True)
    return E / s, (mx + np.log(s)).ravel()


def _kn(abs2, w, alpha, order=2):
    """Value, ambient gradient F_a(e^alpha nu) and Hessian of f at alpha."""
    p, logs = _softmax_rows(abs2, alpha)
    value = 0.5 * float(w @ logs)
    if order == 0:
        return value, None, None
    wp = w @ p
    grad = wp - w.sum() / abs2.shape[1]
    if order == 1:
        return value, grad, None
    H = 2.0 * (np.diag(wp) - (p.T * w) @ p)
    return value, grad, H


def complement_basis(nu: DiscreteMeasure) -> np.ndarray:
    """Orthonormal basis (columns) of the complement of the isotropy algebra in a."""
    Q = isotropy_matrix(nu)
    A = nu.model.a_basis()
    if Q.shape[1] == 0:
        return A
    R = A - Q @ (Q.T @ A)
    U, s, _ = np.linalg.svd(R, full_matrices=False)
    return U[:, : A.shape[1] - Q.shape[1]]


def integrated_kn(nu: DiscreteMeasure, alpha, order: str = "hessian") -> KNEval:
    """f(alpha), its gradient and Hessian restricted to the isotropy complement.

    ``order`` is one of "value", "gradient", "hessian"; lower orders are
    always computed, higher ones are returned as None.
    """
    k = _ORDERS[order]
    alpha = nu.model.check_a(alpha, tol=1e-9)
    abs2 = np.abs(nu.atoms) ** 2
    value, grad, H = _kn(abs2, nu.weights, alpha, k)
    if k == 0:
        return KNEval(value, None, None)
    B = complement_basis(nu)
    P = B @ B.T
    grad = P @ grad
    if k == 1:
        return KNEval(value, grad, None)
    return KNEval(value, grad, P @ H @ P)


def affine_component(nu: DiscreteMeasure) -> AffineComponent:
    """Affine subspace offset + span(direction) that contains F_a(A . nu)."""
    Q = isotropy_matrix(nu)
    offset = Q @ (Q.T @ gradient_F_torus(nu))
    B = complement_basis(nu)
    return AffineComponent(offset, list(B.T))


def torus_target_reachable(nu: DiscreteMeasure, target, tol: float = 1e-12) -> bool:
    """Whether ``target`` lies in F_a(A . nu), decided on the atom supports.

    The orbit image is the relative interior of sum_i w_i conv{mu_a(e_j) :
    j in supp x_i}.  Membership is the existence of a transport plan that is
    strictly positive exactly on the support pattern, with row sums w and
    column sums target + 1/N; that holds iff every column set S satisfies
    w(rows inside S) <= (target + 1/N)(S), with equality only when no other
    row touches S.
    """
    S = supports(nu)
    w = nu.weights
    live = w > 0
    N = nu.model.N
    col = np.asarray(target, dtype=float) + 1.0 / N
    bits = 1 << np.arange(N)
    masks = (S[live].astype(np.int64) * bits).sum(axis=1)
    uniq, inv = np.unique(masks, return_inverse=True)
    mass = np.bincount(inv, weights=w[live])
    for subset in range(1, 1 << N):
        inside = (uniq & ~subset) == 0
        w_in = mass[inside].sum()
        c_S = col[(subset & bits) != 0].sum()
        if w_in > c_S + tol:
            return False
        if w_in >= c_S - tol:
            leaks = ((uniq & subset) != 0) & ~inside
            if np.any(leaks):
                return False
    return True


def solve_torus_target(nu: DiscreteMeasure, target, tol: float = 1e-8, max_iter: int = 500,
                       alpha0=None, radius: float = DIVERGENCE_RADIUS) -> SolveReport:
    """Find alpha in a with F_a(exp(alpha) . nu) = target by damped Newton.

    The target is first projected onto the affine subspace that carries the
    orbit image; a target off that subspace (by more than ``tol``) or outside
    the image is reported TargetUnreachable, as is any run whose iterate
    leaves the ball of ``radius``.
    """
    if not tol > 0:
        raise ValueError("tol must be positive")
    if int(max_iter) != max_iter or max_iter < 0:
        raise ValueError("max_iter must be a nonnegative integer")
    model = nu.model
    target = model.check_a(target, tol=1e-9)
    Q = isotropy_matrix(nu)
    B = complement_basis(nu)
    offset = Q @ (Q.T @ gradient_F_torus(nu))
    off_affine = float(np.linalg.norm(Q @ (Q.T @ target) - offset))
    projected = offset + B @ (B.T @ target)
    abs2 = np.abs(nu.atoms) ** 2
    w = nu.weights

    def report(status, alpha, res, it, trace, msg):
        return SolveReport(status, alpha, res, it, trace, msg,
                           {"projected_target": projected, "off_affine": off_affine})

    zero = np.zeros(model.N)
    if off_affine > tol:
        res = float(np.linalg.norm(gradient_F_torus(nu) - target))
        return report(Status.TARGET_UNREACHABLE, zero, res, 0, [],
                      "target is off the affine subspace of the orbit image")
    if not torus_target_reachable(nu, projected):
        res = float(np.linalg.norm(gradient_F_torus(nu) - target))
        return report(Status.TARGET_UNREACHABLE, zero, res, 0, [],
                      "target is outside the open orbit image")

    c = np.zeros(B.shape[1]) if alpha0 is None else B.T @ np.asarray(alpha0, dtype=float)

    def phi(cc):
        a = B @ cc
        return _kn(abs2, w, a, 0)[0] - projected @ a

    trace = []
    for it in range(max_iter + 1):
        alpha = B @ c
        val, grad, H = _kn(abs2, w, alpha)
        res = float(np.linalg.norm(grad - target))
        trace.append((alpha.copy(), res))
        if res < tol:
            return report(Status.CONVERGED, alpha, res, it, trace, "")
        if np.linalg.norm(alpha) > radius:
            return report(Status.TARGET_UNREACHABLE, alpha, res, it, trace,
                          f"iterate left the ball of radius {radius:g}")
        if it == max_iter:
            break
        g = B.T @ (grad - projected)
        Hc = B.T @ H @ B + LEVENBERG * np.eye(len(c))
        step = -np.linalg.solve(Hc, g)
        slope = float(g @ step)
        f0 = val - projected @ alpha
        s = 1.0
        slack = 1e-13 * (1.0 + abs(f0))
        while phi(c + s * step) > f0 + ARMIJO_C * s * slope + slack:
            s *= ARMIJO_SHRINK
            if s < 1e-12:
                break
        c = c + s * step
    return report(Status.MAX_ITERATIONS, B @ c, res, max_iter, trace,
                  f"no convergence in {max_iter} iterations")


def polytope_P(model) -> ConvexBody:
    """Simplex conv{e_i - 1/N}: the image of the torus gradient map on the model."""
    N = model.N
    return hull_build(np.eye(N) - 1.0 / N, dim=model.dim_a)


def orbit_image_sample(nu: DiscreteMeasure, count: int, radius: float, seed: int) -> np.ndarray:
    """F_a(exp(alpha_j) . nu) for alpha_j uniform in the radius ball of the isotropy complement."""
    if count < 1:
        raise ValueError("count must be >= 1")
    rng = np.random.default_rng(seed)
    B = complement_basis(nu)
    d = B.shape[1]
    abs2 = np.abs(nu.atoms) ** 2
    w = nu.weights
    if d == 0:
        return np.tile(gradient_F_torus(nu), (count, 1))
    u = rng.standard_normal((count, d))
    u /= np.linalg.norm(u, axis=1, keepdims=True)
    r = radius * rng.random(count) ** (1.0 / d)
    alphas = (u * r[:, None]) @ B.T
    return np.array([_kn(abs2, w, a, 1)[1] for a in alphas])
