import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gradmap.abelian import Status
from gradmap.convex_oracle import Verdict
from gradmap.invariants import random_measure, regular_measure, _gapped_beta
from gradmap.measures import DiscreteMeasure, gradient_F, pushforward
from gradmap.model_space import ModelSpace, act, exp_p, momentum_p, morse_stratum, mu_beta
from gradmap.nonabelian import (
    BalanceWarning,
    F_nu,
    balance,
    dF,
    in_omega,
    reduce_and_recenter,
    regularity_proxy,
    stability_margin,
    submersion_rank,
)


@pytest.fixture
def heavy_cp1(cp1):
    return DiscreteMeasure.from_points(cp1, [[1, 0.3 + 0.2j], [0.4, 1 - 0.5j], [1, -1 + 0.7j]],
                                       [0.6, 0.2, 0.2])


def test_F_nu_examples(model, rng):
    nu = random_measure(model, rng, 4)
    np.testing.assert_allclose(F_nu(nu, np.eye(model.N)), gradient_F(nu), atol=1e-15)
    g = model.random_g(rng)
    np.testing.assert_allclose(F_nu(nu, g), gradient_F(pushforward(g, nu)), atol=1e-13)
    k = model.random_k(rng)
    np.testing.assert_allclose(F_nu(nu, k @ g), k @ F_nu(nu, g) @ k.conj().T, atol=1e-12)


def test_F_nu_vertex_uniform_permutations(model):
    nu = DiscreteMeasure.vertex_uniform(model)
    N = model.N
    P = np.eye(N)[np.roll(np.arange(N), 1)]
    if np.linalg.det(P) < 0:
        P[:, 0] *= -1
    np.testing.assert_allclose(F_nu(nu, P.astype(model.dtype)), 0.0, atol=1e-15)


def test_dF_matches_finite_differences(model, rng):
    nu = random_measure(model, rng, 5)
    g = model.random_g(rng, 0.5)
    y = act(g, nu.atoms)
    beta = model.random_p(rng)
    h = 1e-5
    fd = (F_nu(nu, exp_p(h * beta) @ g) - F_nu(nu, exp_p(-h * beta) @ g)) / (2 * h)
    np.testing.assert_allclose(dF(y, nu.weights, beta), fd, atol=1e-8)


def test_in_omega():
    assert in_omega(np.zeros((3, 3)))
    assert not in_omega(np.diag([2 / 3, -1 / 3, -1 / 3]))
    assert not in_omega(np.diag([1.0, -0.5, -0.5]))


def test_regularity_proxy(rp2, heavy_cp1, rng):
    assert not regularity_proxy(DiscreteMeasure.vertex_uniform(rp2)).ok
    heavy = regularity_proxy(heavy_cp1)
    assert not heavy.ok and heavy.max_weight == pytest.approx(0.6)
    # a weight of 0.4 on one point of RP^2 exceeds the 1/3 share of a line
    three = DiscreteMeasure.from_points(rp2, [[1, 2, 3], [2, -1, 1], [1, 1, -2]], [0.3, 0.3, 0.4])
    assert stability_margin(three) == pytest.approx(1 / 3 - 0.4)
    assert not regularity_proxy(three).ok
    assert regularity_proxy(regular_measure(rp2, rng)).ok


def test_stability_margin_sees_planes(rp2):
    # three atoms on one plane carry 0.75 > 2/3
    nu = DiscreteMeasure.from_points(rp2, [[1, 2, 0.5], [2, -1, 1], [3, 1, 1.5], [1, 1, -5]],
                                     [0.25, 0.25, 0.25, 0.25])
    assert stability_margin(nu) == pytest.approx(2 / 3 - 0.75)


def test_balance_vertex_uniform(model):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", BalanceWarning)
        rep = balance(DiscreteMeasure.vertex_uniform(model))
    assert rep.status is Status.CONVERGED and rep.iterations == 0
    assert rep.extras["p_part_norm"] < 1e-8
    np.testing.assert_allclose(rep.solution, np.eye(model.N))


def test_balance_regular(rng):
    for model in (ModelSpace("rp", 2), ModelSpace("cp", 1), ModelSpace("cp", 2)):
        nu = regular_measure(model, rng)
        with warnings.catch_warnings():
            warnings.simplefilter("error", BalanceWarning)
            rep = balance(nu)
        assert rep.status is Status.CONVERGED
        assert np.linalg.norm(F_nu(nu, rep.solution)) < 1e-8
        assert abs(np.linalg.det(rep.solution) - 1) < 1e-9


def test_balance_nonzero_target(rng):
    model = ModelSpace("rp", 2)
    nu = regular_measure(model, rng)
    target = momentum_p(model.random_point(rng)) * 0.3
    rep = balance(nu, target)
    assert rep.converged
    np.testing.assert_allclose(F_nu(nu, rep.solution), target, atol=1e-8)


def test_balance_equivariance(rng):
    model = ModelSpace("cp", 1)
    nu = regular_measure(model, rng)
    target = 0.2 * momentum_p(model.random_point(rng))
    k = model.random_k(rng)
    rep = balance(nu, target)
    rep_k = balance(pushforward(k, nu), k @ target @ k.conj().T)
    assert rep.converged and rep_k.converged
    conj = k @ rep.solution @ k.conj().T
    np.testing.assert_allclose(F_nu(pushforward(k, nu), conj), k @ target @ k.conj().T, atol=1e-8)


def test_balance_fibre_is_K_invariant_for_invariant_measure(rp2):
    nu = DiscreteMeasure.vertex_uniform(rp2)
    g = rp2.random_g(np.random.default_rng(3))
    P = np.eye(3)[[1, 2, 0]]
    # same atoms in another order: equal up to summation roundoff
    np.testing.assert_allclose(F_nu(nu, g @ P), F_nu(nu, g), atol=1e-15)


def test_balance_heavy_atom(heavy_cp1):
    with pytest.warns(BalanceWarning):
        rep = balance(heavy_cp1)
    assert rep.status is Status.NON_CONVERGENCE
    res = np.array([r for _, r in rep.trace])
    assert np.all(np.diff(res) <= 1e-15)
    # the best one can do is to squeeze the light atoms onto the antipode: residual -> 0.2 * sqrt 2 / 2
    assert res[-1] >= 0.2 / np.sqrt(2) - 1e-9
    assert res[-1] < res[0]
    assert res[-1] - 0.2 / np.sqrt(2) < 0.01


def test_balance_warns_outside_omega(rp2, rng):
    nu = regular_measure(rp2, rng)
    with pytest.warns(BalanceWarning, match="interior"):
        rep = balance(nu, np.diag([1.0, -0.5, -0.5]), max_iter=100)
    assert rep.status is Status.NON_CONVERGENCE
    # a vertex image lies on the boundary: approachable, but still flagged
    with pytest.warns(BalanceWarning, match="interior"):
        balance(nu, np.diag([2 / 3, -1 / 3, -1 / 3]), max_iter=30)


def test_balance_invalid(rp2, rng):
    nu = regular_measure(rp2, rng)
    with pytest.raises(ValueError):
        balance(nu, tol=-1.0)
    with pytest.raises(ValueError):
        balance(nu, max_iter=2.5)
    with pytest.raises(ValueError):
        balance(nu, np.eye(3))


def test_properness_ray(rng):
    for model in (ModelSpace("rp", 2), ModelSpace("cp", 1)):
        nu = random_measure(model, rng, 5)
        beta = _gapped_beta(model, rng, diagonal=False)
        ts = np.linspace(-5, 40, 200)
        vals = np.array([np.real(np.vdot(beta, F_nu(nu, exp_p(t * beta)))) for t in ts])
        assert np.all(np.diff(vals) >= -1e-10)
        limit = sum(w * mu_beta(morse_stratum(x, beta).limit, beta) for x, w in zip(nu.atoms, nu.weights))
        assert vals[-1] == pytest.approx(limit, abs=1e-8)


def test_submersion_examples(three_atom_rp1, rp2, rng):
    assert submersion_rank(three_atom_rp1, np.eye(2)) == 2
    dirac = DiscreteMeasure.from_points(rp2, [[1, 2, 3]])
    assert submersion_rank(dirac, np.eye(3)) < rp2.dim_p
    nu = regular_measure(rp2, rng)
    g = rp2.random_g(rng, 0.5)
    k = rp2.random_k(rng)
    assert submersion_rank(nu, g) == submersion_rank(nu, k @ g) == rp2.dim_p
    with pytest.raises(ValueError):
        submersion_rank(nu, g, h=0)


def test_reduce_subspace_example(rp2):
    nu = DiscreteMeasure.from_points(rp2, [[1, 2, 0], [3, 1, 0], [1, -1, 0]])
    rr = reduce_and_recenter(nu, 100, 0)
    assert rr.lower_dimensional and rr.reduced_dimension == 2
    np.testing.assert_allclose(rr.shift, -np.diag([1 / 6, 1 / 6, -1 / 3]), atol=1e-12)
    for b in rr.subspace_basis:
        assert b[2, 2] == pytest.approx(0, abs=1e-12) and b[0, 0] == pytest.approx(-b[1, 1], abs=1e-12)
        np.testing.assert_allclose(b[2], 0, atol=1e-12)
    assert rr.verdict is Verdict.INTERIOR
    assert rr.off_subspace < 1e-9


def test_reduce_full_support(rng):
    for model in (ModelSpace("rp", 2), ModelSpace("cp", 2)):
        nu = random_measure(model, rng, 6, full_support=True)
        rr = reduce_and_recenter(nu, 300, 1)
        assert not rr.lower_dimensional and rr.reduced_dimension == model.dim_p
        assert rr.verdict is Verdict.INTERIOR and rr.off_subspace < 1e-9
        # the K-average of a traceless matrix is small
        assert np.linalg.norm(rr.shift) < np.linalg.norm(gradient_F(nu))


def test_reduce_vertex_uniform(model):
    rr = reduce_and_recenter(DiscreteMeasure.vertex_uniform(model), model.dim_p + 50, 0)
    np.testing.assert_allclose(rr.shift, 0.0, atol=1e-15)


def test_reduce_errors(rp2):
    with pytest.raises(ValueError):
        reduce_and_recenter(DiscreteMeasure.vertex_uniform(rp2), 3, 0)
    with pytest.raises(ValueError, match="single point"):
        reduce_and_recenter(DiscreteMeasure.from_points(rp2, [[1, 2, 3]]), 20, 0)


@settings(max_examples=15, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), complex_=st.booleans())
def test_balance_recheck_property(seed, complex_):
    model = ModelSpace("cp", 1) if complex_ else ModelSpace("rp", 2)
    r = np.random.default_rng(seed)
    nu = regular_measure(model, r)
    rep = balance(nu)
    assert rep.converged
    assert np.linalg.norm(gradient_F(pushforward(rep.solution, nu))) < 1e-8
