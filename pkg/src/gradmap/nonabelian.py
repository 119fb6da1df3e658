"""The map g -> F(g . nu) on G, balancing, submersion probes and affine-hull reduction."""
from __future__ import annotations

import itertools
import warnings
from dataclasses import dataclass, field

import numpy as np

from .abelian import SolveReport, Status
from .convex_oracle import Verdict, affine_chart, hull_build, hull_membership, lp_depth
from .measures import DiscreteMeasure, gradient_F, in_W_class, weighted_momentum
from .model_space import (
    ModelSpace,
    act,
    exp_p,
    momentum_p,
    normalize,
)

ARMIJO_C = 1e-4
ARMIJO_SHRINK = 0.5
MAX_STEP = 10.0
DIVERGENCE_RADIUS = 50.0
RANK_REL_TOL = 1e-7
THETA_SAMPLES = 200
PROXY_SEEDS = 8


class BalanceWarning(UserWarning):
    pass


def _p_part(g, g_inv):
    """Cartan p-part X of g = k exp(X), stable when g is badly conditioned.

    Singular values below 1 are taken from g^{-1}, where they are large and
    therefore computed to full relative accuracy.
    """
    _, s, Vh = np.linalg.svd(g)
    s_inv = np.linalg.svd(g_inv, compute_uv=False)[::-1]
    logs = np.where(s >= 1.0, np.log(s), -np.log(s_inv))
    V = Vh.conj().T
    X = (V * logs) @ Vh
    return X if np.iscomplexobj(g) else X.real


def F_nu(nu: DiscreteMeasure, g) -> np.ndarray:
    """Gradient map of g . nu, evaluated without merging atoms."""
    return weighted_momentum(act(g, nu.atoms), nu.weights)


def dF(y, w, beta) -> np.ndarray:
    """Derivative of F at the atoms ``y`` along exp(t beta), beta in p.

    d/dt (y y*) = beta y y* + y y* beta - 2 Re(y* beta y) y y*.
    """
    Y = (y.T * w) @ y.conj()
    if not np.iscomplexobj(y):
        Y = Y.real
    q = np.real(np.einsum("ij,jk,ik->i", y.conj(), beta, y))
    Yq = (y.T * (w * q)) @ y.conj()
    if not np.iscomplexobj(y):
        Yq = Yq.real
    return beta @ Y + Y @ beta - 2.0 * Yq


def dF_matrix(model: ModelSpace, y, w) -> np.ndarray:
    """[<dF(beta_j), beta_k>] over the orthonormal basis of p; symmetric PSD."""
    basis = model.p_basis()
    cols = [model.p_coords(dF(y, w, b)) for b in basis]
    D = np.array(cols).T
    return 0.5 * (D + D.T)


def in_omega(target, tol: float = 0.0) -> bool:
    """Whether target lies in the interior of conv(mu_p(M)): target + I/N positive definite."""
    target = np.asarray(target)
    N = target.shape[0]
    return bool(np.linalg.eigvalsh(target + np.eye(N) / N)[0] > tol)


def stability_margin(nu: DiscreteMeasure, max_atoms: int = 30) -> float:
    """min over proper subspaces V spanned by atoms of dim V / N - nu(V).

    Positive margin means no proper subspace carries its critical share of
    mass.  With more than ``max_atoms`` atoms, atoms are assumed in general
    position and only the heaviest k atoms are tested for each k.
    """
    N = nu.model.N
    atoms = nu.atoms
    w = nu.weights
    order = np.argsort(-w, kind="stable")
    margin = np.inf
    if len(w) > max_atoms:
        cum = np.cumsum(w[order])
        for k in range(1, N):
            if k <= len(w):
                margin = min(margin, k / N - cum[k - 1])
        return float(margin)
    m = len(w)
    for k in range(1, N):
        for idx in itertools.combinations(range(m), min(k, m)):
            sub = atoms[list(idx)]
            U, s, _ = np.linalg.svd(sub.T, full_matrices=False)
            r = int(np.sum(s > 1e-10))
            if r != len(idx):
                continue
            Ub = U[:, :r]
            resid = np.linalg.norm(atoms.T - Ub @ (Ub.conj().T @ atoms.T), axis=0)
            mass = w[resid < 1e-9].sum()
            margin = min(margin, r / N - mass)
    return float(margin)


@dataclass
class RegularityReport:
    ok: bool
    w_class_all_frames: bool
    max_weight: float
    stability_margin: float
    reasons: list = field(default_factory=list)


def regularity_proxy(nu: DiscreteMeasure, seeds: int = PROXY_SEEDS) -> RegularityReport:
    """Finite checks standing in for absolute continuity of nu.

    Every atom must have all coordinates nonzero in the standard frame and in
    ``seeds`` randomly rotated frames, the heaviest atom must weigh less than
    1/2, and every proper subspace spanned by atoms must carry strictly less
    than dim V / N of the mass.
    """
    reasons = []
    frames_ok = in_W_class(nu)
    for seed in range(seeds):
        k = nu.model.random_k(np.random.default_rng(seed))
        frames_ok = frames_ok and bool(np.all(np.abs(nu.atoms @ k.T) > 1e-12))
    if not frames_ok:
        reasons.append("an atom has a vanishing coordinate in some tested frame")
    wmax = float(nu.weights.max())
    if not wmax < 0.5:
        reasons.append(f"max atom weight {wmax:.6g} is not below 1/2")
    margin = stability_margin(nu)
    if not margin > 0:
        reasons.append(f"a proper subspace carries too much mass (margin {margin:.3g})")
    return RegularityReport(not reasons, frames_ok, wmax, margin, reasons)


def balance(nu: DiscreteMeasure, target=None, tol: float = 1e-8, max_iter: int = 500,
            radius: float = DIVERGENCE_RADIUS, check_regular: bool = True) -> SolveReport:
    """Find g in G with F(g . nu) = target by descent on G/K.

    Each step moves g <- exp(s beta) g where beta solves dF(beta) = r for the
    residual r = target - F(g . nu) (falling back to beta = r when that system
    is singular), with Armijo backtracking on 0.5 ||r||^2.  The report's
    solution is g; ``extras`` holds its Cartan p-part X (g = k exp(X)) and the
    positive factor exp(X), which represent the class of g in K\\G.
    """
    if not tol > 0:
        raise ValueError("tol must be positive")
    if int(max_iter) != max_iter or max_iter < 0:
        raise ValueError("max_iter must be a nonnegative integer")
    model = nu.model
    N = model.N
    if target is None:
        target = np.zeros((N, N), dtype=model.dtype)
    target = model.check_p(np.asarray(target, dtype=model.dtype), tol=1e-9)
    if not in_omega(target):
        warnings.warn("target is not inside the interior of the momentum image hull",
                      BalanceWarning, stacklevel=2)
    if check_regular:
        reg = regularity_proxy(nu)
        if not reg.ok:
            warnings.warn("measure fails the regularity proxy: " + "; ".join(reg.reasons),
                          BalanceWarning, stacklevel=2)

    w = nu.weights
    x = nu.atoms
    tc = model.p_coords(target)

    def residual(gm):
        y = act(gm, x)
        return y, tc - model.p_coords(weighted_momentum(y, w))

    def finish(status, g, res, it, trace, msg):
        X = _p_part(g, g_inv)
        return SolveReport(status, g, res, it, trace, msg,
                           {"p_part": X, "positive_factor": exp_p(X),
                            "p_part_norm": float(np.linalg.norm(X))})

    g = np.eye(N, dtype=model.dtype)
    g_inv = g.copy()
    y, r = residual(g)
    res = float(np.linalg.norm(r))
    trace = [(g.copy(), res)]
    for it in range(max_iter):
        if res < tol:
            return finish(Status.CONVERGED, g, res, it, trace, "")
        D = dF_matrix(model, y, w)
        bc, *_ = np.linalg.lstsq(D, r, rcond=1e-12)
        Db = D @ bc
        if not (r @ Db) > 0.5 * (r @ r):
            bc = r
            Db = D @ r
        nb = np.linalg.norm(bc)
        if nb > MAX_STEP:
            bc = bc * (MAX_STEP / nb)
            Db = Db * (MAX_STEP / nb)
        slope = -float(r @ Db)
        m0 = 0.5 * res * res
        beta = model.p_from_coords(bc)
        s = 1.0
        while True:
            g_new = exp_p(s * beta) @ g
            y_new, r_new = residual(g_new)
            m_new = 0.5 * float(r_new @ r_new)
            if m_new <= m0 + ARMIJO_C * s * slope:
                break
            s *= ARMIJO_SHRINK
            if s < 1e-12:
                return finish(Status.NON_CONVERGENCE, g, res, it, trace,
                              "line search stalled; target looks unreachable")
        g = g_new
        g_inv = g_inv @ exp_p(-s * beta)
        y, r = residual(g)
        res = float(np.linalg.norm(r))
        trace.append((g.copy(), res))
        if not np.isfinite(res) or np.linalg.norm(_p_part(g, g_inv)) > radius:
            return finish(Status.NON_CONVERGENCE, g, res, it + 1, trace,
                          f"Cartan p-part left the ball of radius {radius:g}")
    if res < tol:
        return finish(Status.CONVERGED, g, res, max_iter, trace, "")
    return finish(Status.NON_CONVERGENCE, g, res, max_iter, trace,
                  f"no convergence in {max_iter} iterations")


def submersion_rank(nu: DiscreteMeasure, g, h: float = 1e-4) -> int:
    """Numerical rank of dF_nu at g from central differences along exp(h beta) g."""
    if not h > 0:
        raise ValueError("h must be positive")
    model = nu.model
    g = np.asarray(g)
    J = np.array([
        model.p_coords(F_nu(nu, exp_p(h * b) @ g) - F_nu(nu, exp_p(-h * b) @ g)) / (2 * h)
        for b in model.p_basis()
    ])
    s = np.linalg.svd(J, compute_uv=False)
    if s[0] == 0:
        return 0
    return int(np.sum(s > RANK_REL_TOL * s[0]))


@dataclass
class ReductionResult:
    shift: np.ndarray
    subspace_basis: list
    reduced_dimension: int
    margin: float
    verdict: Verdict
    lower_dimensional: bool
    off_subspace: float


def reduce_and_recenter(nu: DiscreteMeasure, sample_count: int = 200, seed: int = 0) -> ReductionResult:
    """Recenter the momentum image of the projective span of nu's support.

    The image of P(span of atoms) is sampled (random points of the span plus
    the atoms).  If its affine hull is a proper affine subspace, the shift
    is minus its minimum-norm point; otherwise the shift is minus the
    K-average of F(nu) over Haar-random rotations.  The margin of 0 inside the
    shifted sampled hull, measured within the hull's span, is reported.
    """
    model = nu.model
    if sample_count < model.dim_p + 1:
        raise ValueError(f"sample_count must be at least dim p + 1 = {model.dim_p + 1}")
    rng = np.random.default_rng(seed)
    U, s, _ = np.linalg.svd(nu.atoms.T, full_matrices=False)
    Ub = U[:, : int(np.sum(s > 1e-10 * s[0]))]
    z = rng.standard_normal((sample_count, Ub.shape[1]))
    if model.is_complex:
        z = z + 1j * rng.standard_normal(z.shape)
    pts = np.concatenate([normalize(z @ Ub.T), nu.atoms])
    img = model.p_coords(momentum_p(pts))
    origin, B = affine_chart(img)
    d = B.shape[1]
    if d == 0:
        raise ValueError("sampled momentum image is a single point; nothing to reduce")
    lower = d < model.dim_p
    if lower:
        center = origin - B @ (B.T @ origin)
    else:
        F = gradient_F(nu)
        acc = np.zeros_like(F)
        for _ in range(THETA_SAMPLES):
            k = model.random_k(rng)
            acc = acc + k @ F @ k.conj().T
        center = model.p_coords(acc / THETA_SAMPLES)
    shifted = img - center
    off = float(np.max(np.linalg.norm(shifted - (shifted @ B) @ B.T, axis=1)))
    y = shifted @ B
    if d <= 6:
        body = hull_build(y)
        hm = hull_membership(np.zeros(d), body)
        verdict, margin = hm.verdict, hm.margin
    else:
        margin = lp_depth(np.zeros(d), y)
        verdict = Verdict.INTERIOR if margin > 1e-10 else (
            Verdict.BOUNDARY if margin > -1e-10 else Verdict.EXTERIOR)
    basis = [model.p_from_coords(b) for b in B.T]
    return ReductionResult(model.p_from_coords(-center), basis, d, float(margin), verdict,
                           lower, off)
