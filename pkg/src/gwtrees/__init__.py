"""Conditioned Galton-Watson trees, their codings, exact laws, and stable limits."""

from .codings import (
    ContourSeq,
    HeightSeq,
    LukasiewiczPath,
    RescaledPath,
    Tree,
    contour_from_tree,
    height_from_tree,
    height_from_walk,
    rescale,
    tree_from_walk,
    visit_times,
    walk_from_tree,
)
from .exactlaw import (
    PmfTable,
    check_absolute_continuity,
    discrete_ratio,
    enumerate_conditioned,
    phi,
    phi_phi_star_at,
    phi_star,
    progeny_pmf,
    walk_pmf,
)
from .offspring import (
    OffspringLaw,
    StepLaw,
    calibrate_bn,
    law_from_spec,
    make_explicit,
    make_geometric,
    make_stable_family,
    step_law,
    tilt_to_critical,
)
from .report import ExperimentReport
from .sampler import (
    conditioned_increments,
    cycle_shift,
    derive_rng,
    sample_conditioned,
    sample_gw,
)
from .stable import (
    StableLaw,
    density_p1,
    density_pt,
    excursion_marginal_theta2,
    first_passage_density,
    gamma_a,
    passage_integral,
    zeta_tail,
)

__version__ = "0.1.0"

__all__ = [
    "Tree",
    "LukasiewiczPath",
    "HeightSeq",
    "ContourSeq",
    "RescaledPath",
    "OffspringLaw",
    "StepLaw",
    "PmfTable",
    "StableLaw",
    "ExperimentReport",
    "walk_from_tree",
    "tree_from_walk",
    "height_from_walk",
    "height_from_tree",
    "contour_from_tree",
    "visit_times",
    "rescale",
    "make_geometric",
    "make_stable_family",
    "make_explicit",
    "tilt_to_critical",
    "step_law",
    "calibrate_bn",
    "law_from_spec",
    "walk_pmf",
    "progeny_pmf",
    "phi",
    "phi_star",
    "phi_phi_star_at",
    "discrete_ratio",
    "enumerate_conditioned",
    "check_absolute_continuity",
    "sample_gw",
    "sample_conditioned",
    "conditioned_increments",
    "cycle_shift",
    "derive_rng",
    "density_p1",
    "density_pt",
    "first_passage_density",
    "passage_integral",
    "gamma_a",
    "zeta_tail",
    "excursion_marginal_theta2",
]
