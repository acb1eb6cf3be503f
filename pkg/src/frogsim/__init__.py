"""Frog model on d-ary trees: simulation, star-graph operators, recurrence certificates."""

__version__ = "0.1.0"

from .bootstrap import (
    BootstrapTrace,
    CertificateReport,
    binary_certificate,
    binary_gap,
    bootstrap_iterate,
    dary_certificate,
    find_d0,
    h_Cc,
    optimize_constants,
)
from .dominance import DominanceVerdict, brute_force_dominates, critical_rate, h_n, poisson_dominance
from .engine import SimConfig, VisitRecord, run_frog_model, run_trial, run_trials
from .operators import (
    DiscreteDist,
    FinitePmf,
    Poisson,
    PoissonMixture,
    ShiftedBinomialMixture,
    StarModelParams,
    B_from_U,
    U_doubleprime_dist,
    exact_B,
    exact_B_binary,
    exact_U,
    exact_U_binary,
    monte_carlo_B,
)
from .selfsimilar import run_self_similar, sample_V
from .tree import ROOT, ROOT_CHILD, Tree
from .walks import WalkKind

__all__ = [
    "B_from_U",
    "BootstrapTrace",
    "CertificateReport",
    "DiscreteDist",
    "DominanceVerdict",
    "FinitePmf",
    "Poisson",
    "PoissonMixture",
    "ROOT",
    "ROOT_CHILD",
    "ShiftedBinomialMixture",
    "SimConfig",
    "StarModelParams",
    "Tree",
    "U_doubleprime_dist",
    "VisitRecord",
    "WalkKind",
    "binary_certificate",
    "binary_gap",
    "bootstrap_iterate",
    "brute_force_dominates",
    "critical_rate",
    "dary_certificate",
    "exact_B",
    "exact_B_binary",
    "exact_U",
    "exact_U_binary",
    "find_d0",
    "h_Cc",
    "h_n",
    "monte_carlo_B",
    "optimize_constants",
    "poisson_dominance",
    "run_frog_model",
    "run_self_similar",
    "run_trial",
    "run_trials",
    "sample_V",
]
