"""Serialization of experiment results into report documents."""

from __future__ import annotations

import datetime as _dt
import platform

import numpy as np

from . import __version__
from .decay import DecayFit
from .protocols import ExperimentResult, GateFidelityEstimate

# bump when an estimator's formula changes
FORMULA_VERSIONS = {
    "xeb_least_squares": "xeb-ls/1: F = sum((m-u)(e-u)) / sum((e-u)^2)",
    "f_single": "f_single/1: [2^n prod(2+p^m) + 3^n - prod(3+p^m) - 4^n] / [6^n + 3^n - 2*4^n]",
    "p_multi_leading": "p_multi/1: 1 - (3/4) / (1 - 4^-n) * sum(e)",
    "refined_interleaved": "p_G/1: p_int / p_multi_leading(e)",
    "naive_interleaved": "p_G_naive/1: p_int / (1 - sum(e))",
    "average_fidelity": "avg_fid/1: (d-1)/d * p + 1/d",
    "irb_survival": "irb/1: F = (survival - 1/d) / (1 - 1/d)",
}


def metadata(seed: int, config_sha256: str | None, command: str) -> dict:
    return {
        "command": command,
        "seed": seed,
        "config_sha256": config_sha256,
        "package_version": __version__,
        "numpy_version": np.__version__,
        "python_version": platform.python_version(),
        "timestamp": _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds"),
        "formula_versions": FORMULA_VERSIONS,
    }


def fit_dict(fit: DecayFit) -> dict:
    return {
        "model": fit.model_id,
        "params": fit.params,
        "param_names": _param_names(fit),
        "stderr": fit.stderr,
        "stderr_method": fit.stderr_method + (" (resampled circuits, refit)" if fit.stderr_method == "bootstrap" else ""),
        "covariance": fit.covariance,
        "covariance_method": "inverse Gauss-Newton Hessian at optimum"
        + (" (weights 1/stderr^2)" if fit.weighted else " (uniform weights, scaled by residual variance)"),
        "residual_norm": fit.residual_norm,
        "depths_used": fit.depths_used,
        "iterations": fit.iterations,
    }


def _param_names(fit: DecayFit) -> list[str]:
    if fit.model_id == "exponential":
        return ["p", "amplitude"] if fit.amplitude else ["p"]
    if fit.model_id == "additive":
        return ["sum_errors"]
    return ["p_shared"] if fit.shared else [f"p_{i}" for i in range(fit.n)]


def result_dict(result: ExperimentResult) -> dict:
    plan = result.plan
    out = {
        "plan": {
            "protocol": plan.protocol,
            "n": plan.n,
            "depths": list(plan.depths),
            "circuits_per_depth": plan.circuits_per_depth,
            "shots": plan.shots,
            "ensemble": plan.ensemble,
            "target_gate": plan.target_gate,
            "seed": plan.seed,
            "m_min": plan.m_min,
            "noise": {
                "per_qubit_p": plan.noise.per_qubit_p,
                "interleaved_gate_p": plan.noise.interleaved_gate_p,
                "layer_p": plan.noise.layer_p,
            },
            "bootstrap_resamples": plan.bootstrap_resamples,
        },
        "fidelity_curve": [
            {
                "depth": pt.depth,
                "fidelity": pt.fidelity,
                "stderr": pt.stderr,
                "stderr_method": f"bootstrap ({plan.bootstrap_resamples} resamples)" if plan.bootstrap_resamples else "none",
                "num_circuits": pt.num_circuits,
            }
            for pt in result.points
        ],
        "fits": {k: fit_dict(v) for k, v in result.fits.items()},
    }
    if result.fit_errors:
        out["fit_errors"] = result.fit_errors
    return out


def gate_dict(g: GateFidelityEstimate) -> dict:
    out = {
        "reference": g.reference,
        "p_int": g.p_int,
        "p_int_stderr": g.p_int_stderr,
        "p_gate_refined": g.refined,
        "p_gate_refined_stderr": g.refined_stderr,
        "average_fidelity_refined": g.average_fidelity_refined,
        "gate_dimension": g.d,
        "uncertainty_method": g.uncertainty_method,
    }
    if g.reference == "single-qubit":
        out.update(
            p_gate_naive=g.naive,
            p_gate_naive_stderr=g.naive_stderr,
            average_fidelity_naive=g.average_fidelity_naive,
            naive_minus_refined=g.naive - g.refined,
            p_reference_leading_order=g.p_ref,
            single_qubit_errors={
                "values": g.errors,
                "stderr": g.errors_stderr,
                "provenance": g.errors_provenance,
            },
        )
    else:
        out.update(p_ref=g.p_ref, p_ref_stderr=g.p_ref_stderr)
    return out
