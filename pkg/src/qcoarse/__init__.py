"""Lossy quantum compression of continuous-time stochastic processes.

Approximates the square-root wave of a wait-time law by a short complex
exponential sum, embeds it as a finite-dimensional quantum memory with an
explicit stepping unitary, and evaluates the resulting statistics against
the exact process and classical counter baselines.
"""
from qcoarse.errors import (
    ConstructionFailureError,
    DomainError,
    EmptyDecompositionError,
    InconsistentDecompositionError,
    InputError,
    NonTerminatingError,
    NumericalFailureError,
    QcoarseError,
    ReducibleChainError,
    TailUnderflowError,
    UnsupportedDistributionError,
)
from qcoarse.processes import (
    AlternatingPoisson,
    BimodalGaussian,
    Exponential,
    Tabulated,
    TopHat,
    WaitTimeDistribution,
    make_distribution,
    parse_dist_spec,
    tail_cutoff,
    unit_rate,
)
from qcoarse.metrics import (
    DiscretePmf,
    KsReport,
    averaged_ks,
    best_memoryless_ks,
    ks_continuous_discrete,
    ks_survival,
)
from qcoarse.expsum import (
    ExpSum,
    ExpTerm,
    beylkin_monzon,
    postprocess,
    scan_epsilon,
    scan_epsilon_multi,
)
from qcoarse.qmodel import (
    KernelSpectrum,
    QuantumModel,
    build_unitary,
    gram_matrix,
    kernel_spectrum,
)
from qcoarse.simulate import Trajectory, run_trajectory, sample_waits
from qcoarse.classical import (
    ClassicalCounterModel,
    FitHyper,
    classical_wait_pmf,
    fit_classical,
)
from qcoarse.hsmm import (
    CompressedHsmm,
    Edge,
    Hsmm,
    compress,
    example_process,
    interference_diagnostic,
    split_uniform_process,
)

__version__ = "0.1.0"

__all__ = [
    "QcoarseError", "DomainError", "InputError", "UnsupportedDistributionError",
    "NumericalFailureError", "EmptyDecompositionError",
    "InconsistentDecompositionError", "ConstructionFailureError",
    "TailUnderflowError", "NonTerminatingError", "ReducibleChainError",
    "WaitTimeDistribution", "Exponential", "AlternatingPoisson",
    "BimodalGaussian", "TopHat", "Tabulated", "make_distribution",
    "parse_dist_spec", "tail_cutoff", "unit_rate",
    "KsReport", "DiscretePmf", "ks_survival", "ks_continuous_discrete",
    "averaged_ks", "best_memoryless_ks",
    "ExpTerm", "ExpSum", "beylkin_monzon", "postprocess", "scan_epsilon",
    "scan_epsilon_multi",
    "QuantumModel", "KernelSpectrum", "gram_matrix", "build_unitary",
    "kernel_spectrum",
    "Trajectory", "run_trajectory", "sample_waits",
    "ClassicalCounterModel", "FitHyper", "classical_wait_pmf", "fit_classical",
    "Edge", "Hsmm", "CompressedHsmm", "compress", "example_process",
    "split_uniform_process", "interference_diagnostic",
    "__version__",
]
