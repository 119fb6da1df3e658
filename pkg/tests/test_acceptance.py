"""The eleven acceptance criteria at full instance counts and stated tolerances.

Each test prints one PASS/FAIL line (visible with ``pytest -v`` output capture
disabled for the line) and fails if its criterion fails.
"""
import pytest

from gradmap import invariants as inv

CRITERIA = [
    ("kempf_ness_link", lambda: inv.kn_derivative(100)),
    ("cocycle", lambda: inv.cocycle(100)),
    ("image_is_convex_hull", lambda: inv.image_is_hull(1000, 100)),
    ("abelian_convexity", lambda: inv.abelian_convexity(20, 50, 10, 100)),
    ("interior_attainment", lambda: inv.interior_attainment(200)),
    ("submersion_rank", lambda: inv.submersion(20)),
    ("balancing_and_fibres", lambda: inv.balancing(50)),
    ("kak_reconstruction", lambda: inv.kak(1000)),
    ("affine_hull_reduction", lambda: inv.reduction(10)),
    ("morse_strata", lambda: inv.morse_strata(100)),
    ("equivariance", lambda: inv.equivariance(100)),
]


@pytest.mark.parametrize("name, run", CRITERIA, ids=[c[0] for c in CRITERIA])
def test_criterion(name, run, capsys):
    result = run()
    with capsys.disabled():
        print("\n" + result.line())
    assert result.passed, result.detail
