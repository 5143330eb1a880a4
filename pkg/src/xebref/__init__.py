"""Interleaved benchmarking with single-qubit reference sequences: simulation and analysis."""

__version__ = "0.1.0"

from .clifford import CliffordElement, CliffordGroup, clifford_group, compose, enumerate_group, invert, sample_uniform
from .decay import (
    DecayFit,
    FitError,
    depolarizing_to_average_fidelity,
    f_additive,
    f_exponential,
    f_single,
    fit_decay,
    naive_interleaved_fidelity,
    p_multi_exact,
    p_multi_leading,
    refined_interleaved_fidelity,
)
from .distributions import (
    DistributionVerdict,
    ProbabilitySample,
    clifford_step_cdf,
    factorized_cdf,
    ks_distance,
    porter_thomas_cdf,
    sample_factorized_ensemble,
    sample_haar_ensemble,
    validate_reference,
)
from .ensembles import Ensemble
from .protocols import (
    DepolarizingParams,
    ExperimentPlan,
    ExperimentResult,
    bootstrap_uncertainty,
    interleaved_gate_estimate,
    isolated_single_qubit_fit,
    ratio_gate_estimate,
    run_experiment,
)
from .simulator import Circuit, Layer, LocalNoiseModel, ideal_probabilities, run_noisy_circuit, sample_bitstrings
from .xeb import CircuitRecord, FidelityPoint, circuit_record, estimate_fidelity, survival_probability
