"""Finitely supported probability measures on a projective model.

A :class:`DiscreteMeasure` stores its atoms as the rows of an ``(m, N)`` array
of unit representatives.  Smooth measures are approximated by large atom
clouds; nothing in this module pretends a cloud is smooth.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from .model_space import (
    ModelSpace,
    critical_values,
    momentum_a,
    momentum_p,
    morse_stratum,
    normalize,
)

WEIGHT_TOL = 1e-12
MERGE_TOL = 1e-10
SUPPORT_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class DiscreteMeasure:
    model: ModelSpace
    atoms: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        atoms = np.array(self.atoms, dtype=self.model.dtype, ndmin=2)
        weights = np.array(self.weights, dtype=float, ndmin=1)
        if atoms.ndim != 2 or atoms.shape[1] != self.model.N:
            raise ValueError(f"atoms must have shape (m, {self.model.N}), got {atoms.shape}")
        if weights.shape != (atoms.shape[0],):
            raise ValueError("need exactly one weight per atom")
        if len(weights) == 0:
            raise ValueError("measure needs at least one atom")
        if np.any(weights < 0):
            raise ValueError("weights must be nonnegative")
        if abs(weights.sum() - 1.0) > WEIGHT_TOL:
            raise ValueError(f"weights sum to {weights.sum()!r}, not 1")
        norms = np.linalg.norm(atoms, axis=1)
        if np.any(np.abs(norms - 1.0) > 1e-12):
            raise ValueError("atoms must be unit representatives")
        if len(_duplicate_groups(atoms)) != len(atoms):
            raise ValueError("atoms must be pairwise distinct projective points")
        atoms.setflags(write=False)
        weights.setflags(write=False)
        object.__setattr__(self, "atoms", atoms)
        object.__setattr__(self, "weights", weights)

    @classmethod
    def from_points(cls, model, points, weights=None, merge=True):
        """Normalize ``points`` and, with ``merge``, fold coincident atoms together."""
        pts = normalize(np.array(points, dtype=model.dtype, ndmin=2))
        m = len(pts)
        w = np.full(m, 1.0 / m) if weights is None else np.asarray(weights, dtype=float)
        w = w / w.sum()
        if merge:
            pts, w = merge_atoms(pts, w)
        return cls(model, pts, w)

    @classmethod
    def vertex_uniform(cls, model):
        return cls(model, np.eye(model.N, dtype=model.dtype), np.full(model.N, 1.0 / model.N))

    def __len__(self):
        return len(self.weights)

    def __repr__(self):
        return f"DiscreteMeasure({self.model}, {len(self)} atoms)"


def _duplicate_groups(atoms):
    """Group labels for atoms closer than MERGE_TOL in projective distance."""
    m = len(atoms)
    if m == 1:
        return [[0]]
    # x x* is a smooth embedding of projective space; ||xx* - yy*|| ~ sqrt2 * dist
    emb = momentum_p(atoms).reshape(m, -1)
    if np.iscomplexobj(emb):
        emb = np.concatenate([emb.real, emb.imag], axis=1)
    tree = cKDTree(emb)
    parent = list(range(m))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for i, j in tree.query_pairs(1e-6):
        ip = np.vdot(atoms[j], atoms[i])
        phase = ip / abs(ip) if abs(ip) > 0 else 1.0
        if np.linalg.norm(atoms[i] - phase * atoms[j]) <= MERGE_TOL:
            ri, rj = find(i), find(j)
            if ri != rj:
                parent[max(ri, rj)] = min(ri, rj)
    groups = {}
    for i in range(m):
        groups.setdefault(find(i), []).append(i)
    return [groups[k] for k in sorted(groups)]


def merge_atoms(atoms, weights):
    groups = _duplicate_groups(atoms)
    if len(groups) == len(atoms):
        return atoms, weights
    keep = [g[0] for g in groups]
    w = np.array([weights[g].sum() for g in groups])
    return atoms[keep], w


def pushforward(g, nu: DiscreteMeasure) -> DiscreteMeasure:
    """g . nu: atoms moved by g, weights carried along; atoms g collapses are merged."""
    pts = normalize(nu.atoms @ np.asarray(g).T)
    pts, w = merge_atoms(pts, nu.weights)
    return DiscreteMeasure(nu.model, pts, w)


def gradient_F(nu: DiscreteMeasure) -> np.ndarray:
    return weighted_momentum(nu.atoms, nu.weights)


def weighted_momentum(atoms, weights):
    """sum_i w_i (x_i x_i* - I/N) for an atom array; no validation."""
    N = atoms.shape[1]
    out = (atoms.T * weights) @ atoms.conj()
    if not np.iscomplexobj(atoms):
        out = out.real
    return out - np.eye(N) * (weights.sum() / N)


def gradient_F_torus(nu: DiscreteMeasure) -> np.ndarray:
    return nu.weights @ momentum_a(nu.atoms)


def supports(nu: DiscreteMeasure) -> np.ndarray:
    """Boolean (m, N) mask of nonzero coordinates of each atom."""
    return np.abs(nu.atoms) > SUPPORT_TOL


def support_components(nu: DiscreteMeasure) -> list[list[int]]:
    """Coordinate indices linked by shared atom support (union-find)."""
    N = nu.model.N
    parent = list(range(N))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for row in supports(nu):
        idx = np.flatnonzero(row)
        for j in idx[1:]:
            ri, rj = find(idx[0]), find(j)
            if ri != rj:
                parent[max(ri, rj)] = min(ri, rj)
    comps = {}
    for i in range(N):
        comps.setdefault(find(i), []).append(i)
    return [comps[k] for k in sorted(comps)]


def isotropy_algebra_torus(nu: DiscreteMeasure) -> list[np.ndarray]:
    """Orthonormal basis of {beta in a : beta_M vanishes on every atom}.

    beta is diagonal, so beta_M(x) = 0 iff beta is constant on the support of x;
    the algebra is the traceless part of the functions constant on each
    support component.
    """
    N = nu.model.N
    comps = support_components(nu)
    if len(comps) == 1:
        return []
    C = np.zeros((N, len(comps)))
    for k, comp in enumerate(comps):
        C[comp, k] = 1.0
    C -= C.mean(axis=0)
    U, s, _ = np.linalg.svd(C, full_matrices=False)
    basis = U[:, : len(comps) - 1]
    out = []
    for b in basis.T:
        lead = b[np.flatnonzero(np.abs(b) > 1e-12)[0]]
        out.append(b * np.sign(lead))
    return out


def isotropy_matrix(nu):
    """Isotropy basis as an (N, k) array (k may be 0)."""
    basis = isotropy_algebra_torus(nu)
    N = nu.model.N
    return np.array(basis).T if basis else np.zeros((N, 0))


def in_W_class(nu: DiscreteMeasure) -> bool:
    """Every atom in the open top stratum for every beta in the diagonal torus."""
    return bool(np.all(np.abs(nu.atoms) > SUPPORT_TOL))


def in_top_stratum(nu, beta) -> bool:
    """Direct check through :func:`morse_stratum` for one direction."""
    r = len(critical_values(beta))
    return all(morse_stratum(x, beta).index == r for x in nu.atoms)


def tv_norm_diff(nu1: DiscreteMeasure, nu2: DiscreteMeasure) -> float:
    """Total variation ||nu1 - nu2|| = sup over |h| <= 1 of the integral of h."""
    if nu1.model != nu2.model:
        raise ValueError("measures live on different models")
    atoms = np.concatenate([nu1.atoms, nu2.atoms])
    signed = np.concatenate([nu1.weights, -nu2.weights])
    return float(sum(abs(signed[g].sum()) for g in _duplicate_groups(atoms)))
