"""Gradient maps of probability measures on projective models."""
from .abelian import (
    SolveReport,
    Status,
    affine_component,
    integrated_kn,
    orbit_image_sample,
    polytope_P,
    solve_torus_target,
)
from .measures import (
    DiscreteMeasure,
    gradient_F,
    gradient_F_torus,
    in_W_class,
    isotropy_algebra_torus,
    pushforward,
    tv_norm_diff,
)
from .model_space import (
    ModelSpace,
    act,
    exp_p,
    kak_decompose,
    kempf_ness,
    momentum_a,
    momentum_p,
    morse_stratum,
    mu_beta,
)
from .nonabelian import F_nu, balance, reduce_and_recenter, regularity_proxy, submersion_rank

__all__ = [
    "DiscreteMeasure", "F_nu", "ModelSpace", "SolveReport", "Status", "act", "affine_component",
    "balance", "exp_p", "gradient_F", "gradient_F_torus", "in_W_class", "integrated_kn",
    "isotropy_algebra_torus", "kak_decompose", "kempf_ness", "momentum_a", "momentum_p",
    "morse_stratum", "mu_beta", "orbit_image_sample", "polytope_P", "pushforward",
    "reduce_and_recenter", "regularity_proxy", "solve_torus_target", "submersion_rank",
    "tv_norm_diff",
]
__version__ = "0.1.0"
