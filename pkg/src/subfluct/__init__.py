"""Birkhoff-sum fluctuations along substitution fixed points."""

__version__ = "0.1.0"

from .coboundary import (
    CoboundaryCertificate,
    DiscrepancyVerdict,
    VarianceReport,
    classify_discrepancy,
    clt_variance,
    solve_coboundary,
)
from .fluctuations import (
    blowup_experiment,
    cantor_limit_experiment,
    clt_experiment,
    coupling_decay_experiment,
    markov_clt_harness,
    typical_orbit_experiment,
)
from .measures import MarkovModel, drift, markov_model
from .path_space import adic_successor, decode, encode, renormalized_birkhoff
from .spectral import SpectralReport, eigen_decompose, pf_data, spectral_report
from .substitution import (
    Substitution,
    SubstitutionError,
    SubstitutionSyntaxError,
    abelianization,
    birkhoff_partial_sums,
    find_seed,
    fixed_point_prefix,
    is_primitive,
    iter_fixed_point,
    parse_substitution,
    theta_matrix,
)

__all__ = [
    "CoboundaryCertificate",
    "DiscrepancyVerdict",
    "MarkovModel",
    "SpectralReport",
    "Substitution",
    "SubstitutionError",
    "SubstitutionSyntaxError",
    "VarianceReport",
    "abelianization",
    "adic_successor",
    "birkhoff_partial_sums",
    "blowup_experiment",
    "cantor_limit_experiment",
    "classify_discrepancy",
    "clt_experiment",
    "clt_variance",
    "coupling_decay_experiment",
    "decode",
    "drift",
    "eigen_decompose",
    "encode",
    "find_seed",
    "fixed_point_prefix",
    "is_primitive",
    "iter_fixed_point",
    "markov_clt_harness",
    "markov_model",
    "parse_substitution",
    "pf_data",
    "renormalized_birkhoff",
    "solve_coboundary",
    "spectral_report",
    "theta_matrix",
    "typical_orbit_experiment",
]
