"""Numerical lab for the cutoff phenomenon in finite Markov chains."""

__version__ = "0.1.0"

from .analysis import ChainAnalysis
from .bounds import BoundReport, VerifyGrid, verify
from .chain import Chain, ChainMetrics, chain_metrics, lipschitz_norm, validate_chain
from .cutoff import SweepRecord, Thresholds, TrendVerdict, sweep, window_consistency, verdict
from .families import FamilySpec, generate
from .heat_kernel import Distribution, HeatKernel, heat_kernel_all, heat_kernel_row, heat_kernels
from .info_stats import (
    ProfilePoint,
    entropy_dissipation,
    kl_divergence,
    mixing_time,
    mixing_times,
    profile,
    tv_distance,
    varentropy,
    worst_case_profile,
)
from .spectral import (
    cheeger_exact,
    cheeger_sweep_bound,
    poincare_constant,
    spectral_summary,
    stationary_distribution,
)
