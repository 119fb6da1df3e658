"""Projective models RP^n and CP^n with their closed-form gradient maps.

A model fixes the manifold M (real or complex projective space of dimension n),
the group G = SL(n+1) over the matching field, its maximal compact subgroup
K = SO(n+1) / SU(n+1), and the Cartan complement p of traceless symmetric /
Hermitian matrices.  The diagonal traceless matrices form the maximal abelian
subspace a, stored as plain length-(n+1) vectors.

Points are unit vectors, group elements and elements of p are square arrays.
Everything here is a pure function of its arguments.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

POINT_TOL = 1e-12
DET_TOL = 1e-9
EIG_REL_TOL = 1e-9
COMPONENT_TOL = 1e-12

KINDS = ("rp", "cp")


@dataclass(frozen=True)
class ModelSpace:
    """RP^n (``kind="rp"``, G = SL(n+1, R)) or CP^n (``kind="cp"``, G = SL(n+1, C))."""

    kind: str
    n: int

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown model kind {self.kind!r}; expected one of {KINDS}")
        if int(self.n) != self.n or self.n < 1:
            raise ValueError(f"model dimension must be an integer >= 1, got {self.n!r}")

    @property
    def N(self) -> int:
        """Ambient dimension n+1."""
        return self.n + 1

    @property
    def is_complex(self) -> bool:
        return self.kind == "cp"

    @property
    def dtype(self):
        return np.complex128 if self.is_complex else np.float64

    @property
    def dim_p(self) -> int:
        N = self.N
        return N * N - 1 if self.is_complex else N * (N + 1) // 2 - 1

    @property
    def dim_a(self) -> int:
        return self.n

    def __str__(self):
        return f"{'RP' if self.kind == 'rp' else 'CP'}^{self.n}"

    # -- bases ---------------------------------------------------------------

    def a_basis(self) -> np.ndarray:
        """Orthonormal basis of the traceless diagonal vectors, shape (N, n)."""
        return _helmert(self.N)

    def p_basis(self) -> np.ndarray:
        """Orthonormal basis of p under the trace form, shape (dim_p, N, N)."""
        N = self.N
        mats = []
        for col in self.a_basis().T:
            mats.append(np.diag(col).astype(self.dtype))
        s = 1.0 / np.sqrt(2.0)
        for i in range(N):
            for j in range(i + 1, N):
                m = np.zeros((N, N), dtype=self.dtype)
                m[i, j] = m[j, i] = s
                mats.append(m)
                if self.is_complex:
                    m = np.zeros((N, N), dtype=self.dtype)
                    m[i, j] = -1j * s
                    m[j, i] = 1j * s
                    mats.append(m)
        return np.array(mats)

    def p_coords(self, X) -> np.ndarray:
        """Coordinates of X (or a stack of X) in :meth:`p_basis`; an isometry onto R^dim_p."""
        X = np.asarray(X)
        basis = self.p_basis()
        return np.real(np.einsum("...ij,kij->...k", X, basis.conj()))

    def p_from_coords(self, c) -> np.ndarray:
        c = np.asarray(c, dtype=float)
        M = np.einsum("...k,kij->...ij", c, self.p_basis())
        return M if self.is_complex else M.real

    # -- random elements -----------------------------------------------------

    def random_point(self, rng, size=None) -> np.ndarray:
        shape = (self.N,) if size is None else (size, self.N)
        z = rng.standard_normal(shape)
        if self.is_complex:
            z = z + 1j * rng.standard_normal(shape)
        return z / np.linalg.norm(z, axis=-1, keepdims=True)

    def random_k(self, rng) -> np.ndarray:
        """Haar-distributed element of SO(N) / SU(N)."""
        N = self.N
        z = rng.standard_normal((N, N))
        if self.is_complex:
            z = z + 1j * rng.standard_normal((N, N))
        q, r = np.linalg.qr(z)
        d = np.diagonal(r)
        q = q * (d / np.abs(d))
        det = np.linalg.det(q)
        q[:, 0] = q[:, 0] / det
        return q

    def random_p(self, rng, scale=1.0) -> np.ndarray:
        return self.p_from_coords(scale * rng.standard_normal(self.dim_p))

    def random_g(self, rng, scale=1.0) -> np.ndarray:
        return self.random_k(rng) @ exp_p(self.random_p(rng, scale))

    # -- validation ----------------------------------------------------------

    def check_point(self, x) -> np.ndarray:
        x = np.asarray(x)
        if x.shape != (self.N,):
            raise ValueError(f"point must have length {self.N}, got shape {x.shape}")
        if not self.is_complex and np.iscomplexobj(x):
            raise ValueError("real model expects a real representative")
        if abs(np.linalg.norm(x) - 1.0) > POINT_TOL:
            raise ValueError("point representative must have unit norm")
        return x

    def check_group(self, g) -> np.ndarray:
        g = np.asarray(g)
        if g.shape != (self.N, self.N):
            raise ValueError(f"group element must be {self.N}x{self.N}, got {g.shape}")
        if abs(np.linalg.det(g) - 1.0) > DET_TOL:
            raise ValueError("group element must have determinant 1")
        return g

    def check_p(self, X, tol=POINT_TOL) -> np.ndarray:
        X = np.asarray(X)
        if X.shape != (self.N, self.N):
            raise ValueError(f"p element must be {self.N}x{self.N}, got {X.shape}")
        if np.max(np.abs(X - X.conj().T)) > tol:
            raise ValueError("p element must be symmetric/Hermitian")
        if abs(np.trace(X)) > tol:
            raise ValueError("p element must be traceless")
        return X

    def check_a(self, v, tol=POINT_TOL) -> np.ndarray:
        v = np.asarray(v, dtype=float)
        if v.shape != (self.N,):
            raise ValueError(f"a element must have length {self.N}, got shape {v.shape}")
        if abs(v.sum()) > tol:
            raise ValueError("a element must sum to zero")
        return v


def _helmert(N):
    # columns: (1,-1,0..)/sqrt2, (1,1,-2,0..)/sqrt6, ...
    H = np.zeros((N, N - 1))
    for k in range(1, N):
        H[:k, k - 1] = 1.0
        H[k, k - 1] = -k
        H[:, k - 1] /= np.sqrt(k * (k + 1))
    return H


def inner(X, Y) -> float:
    """Trace form Re tr(X Y*)."""
    return float(np.real(np.vdot(np.asarray(Y), np.asarray(X))))


def normalize(v):
    v = np.asarray(v)
    return v / np.linalg.norm(v, axis=-1, keepdims=True)


def projective_distance(u, v) -> float:
    """min over unit phases c of ||u - c v||."""
    u = np.asarray(u)
    v = np.asarray(v)
    ip = np.vdot(v, u)
    if abs(ip) == 0.0:
        return float(np.linalg.norm(u - v))
    phase = ip / abs(ip)
    return float(np.linalg.norm(u - phase * v))


def act(g, x) -> np.ndarray:
    """Projective action; ``x`` may be a single point or a stack of points (rows)."""
    x = np.asarray(x)
    return normalize(x @ np.asarray(g).T)


def momentum_p(x) -> np.ndarray:
    """x x* - I/N for a unit representative (or stack of them)."""
    x = np.asarray(x)
    N = x.shape[-1]
    out = x[..., :, None] * x[..., None, :].conj()
    if not np.iscomplexobj(x):
        out = out.real
    return out - np.eye(N) / N


def momentum_a(x) -> np.ndarray:
    x = np.asarray(x)
    return np.abs(x) ** 2 - 1.0 / x.shape[-1]


def mu_beta(x, beta) -> float:
    return inner(momentum_p(x), beta)


def kempf_ness(x, g) -> float:
    """0.5 * log ||g x||^2 for a unit representative x."""
    y = np.asarray(g) @ np.asarray(x)
    return 0.5 * float(np.log(np.real(np.vdot(y, y))))


def exp_p(beta) -> np.ndarray:
    beta = np.asarray(beta)
    lam, V = np.linalg.eigh(beta)
    out = (V * np.exp(lam)) @ V.conj().T
    return out if np.iscomplexobj(beta) else out.real


def log_p(P) -> np.ndarray:
    """Inverse of :func:`exp_p` on positive definite matrices."""
    lam, V = np.linalg.eigh(np.asarray(P))
    out = (V * np.log(lam)) @ V.conj().T
    return out if np.iscomplexobj(P) else out.real


def cartan_p_part(g) -> np.ndarray:
    """X in p with g = k exp(X), i.e. X = log (g* g) / 2."""
    g = np.asarray(g)
    return 0.5 * log_p(g.conj().T @ g)


def polar_positive(g) -> np.ndarray:
    """Positive factor P of the left polar decomposition g = P u."""
    g = np.asarray(g)
    return exp_p(0.5 * log_p(g @ g.conj().T))


class KAK(NamedTuple):
    k: np.ndarray
    alpha: np.ndarray
    l: np.ndarray


def kak_decompose(g) -> KAK:
    """Factor g = k exp(diag(alpha)) l^{-1} with k, l in K and alpha descending.

    Column phases of the singular vectors are fixed so that the largest entry
    of each left singular vector is real positive; the determinant correction
    is absorbed by the first column of both k and l.
    """
    g = np.asarray(g)
    U, s, Vh = np.linalg.svd(g)
    V = Vh.conj().T
    idx = np.argmax(np.abs(U), axis=0)
    lead = U[idx, np.arange(U.shape[1])]
    ph = np.abs(lead) / lead
    U = U * ph
    V = V * ph
    d = np.linalg.det(U)
    fix = 1.0 / d
    if not np.iscomplexobj(g):
        fix = float(np.sign(np.real(fix)))
    U[:, 0] *= fix
    V[:, 0] *= fix
    return KAK(U, np.log(s), V)


class Stratum(NamedTuple):
    index: int
    limit: np.ndarray


def critical_values(beta) -> np.ndarray:
    """Distinct eigenvalues of beta, ascending, grouped with relative tolerance."""
    lam = np.linalg.eigvalsh(np.asarray(beta))
    return _group(lam)[0]


def _group(lam):
    scale = max(np.max(np.abs(lam)), 1e-300)
    values, labels = [lam[0]], [0]
    for v in lam[1:]:
        if v - values[-1] > EIG_REL_TOL * scale:
            values.append(v)
        labels.append(len(values) - 1)
    return np.array(values), np.array(labels)


def morse_stratum(x, beta) -> Stratum:
    """Unstable-manifold index (1-based) of x for the gradient flow of <mu_p, beta>.

    Index r (the number of critical values) is the open dense top stratum.
    ``limit`` is the limit of exp(t beta).x as t -> infinity.
    """
    beta = np.asarray(beta)
    x = np.asarray(x)
    lam, V = np.linalg.eigh(beta)
    if np.max(np.abs(lam)) == 0.0:
        raise ValueError("beta = 0 is a degenerate direction")
    _, labels = _group(lam)
    coeffs = V.conj().T @ x
    thresh = COMPONENT_TOL * np.linalg.norm(x)
    for j in range(labels[-1], -1, -1):
        cols = labels == j
        c = coeffs[cols]
        if np.linalg.norm(c) > thresh:
            return Stratum(j + 1, normalize(V[:, cols] @ c))
    raise ValueError("zero representative")
