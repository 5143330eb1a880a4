"""Output-probability statistics of random circuit ensembles.

Continuous references: Porter-Thomas for Haar-random states and the factorized
law for products of independent single-qubit Haar states. Discrete references:
the step distributions generated by the Clifford group (full or factorized).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Callable

import numpy as np

from .clifford import clifford_group
from .ensembles import Ensemble, haar_unitary, run_batch

KS_COEFFICIENT = 1.63  # 99th percentile of the Kolmogorov distribution
_SNAP = 1e-9


@dataclass
class ProbabilitySample:
    values: np.ndarray
    n: int
    source_tag: str = ""

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float).ravel()
        if np.any(self.values < -_SNAP) or np.any(self.values > 1 + _SNAP):
            raise ValueError("probabilities must lie in [0, 1]")

    def __len__(self) -> int:
        return self.values.size


def porter_thomas_pdf(p, d: int):
    return (d - 1) * np.power(1.0 - np.asarray(p, dtype=float), d - 2)


def porter_thomas_cdf(p, d: int):
    if d < 2:
        raise ValueError("dimension must be >= 2")
    p = np.clip(np.asarray(p, dtype=float), 0.0, 1.0)
    return 1.0 - np.power(1.0 - p, d - 1)


def factorized_pdf(p, n: int):
    p = np.asarray(p, dtype=float)
    with np.errstate(divide="ignore"):
        return np.power(-np.log(p), n - 1) / math.factorial(n - 1)


def factorized_cdf(p, n: int):
    """``P * sum_{k<n} (-ln P)**k / k!``: distribution of a product of n uniforms."""
    if n < 1:
        raise ValueError("n must be >= 1")
    p = np.clip(np.asarray(p, dtype=float), 0.0, 1.0)
    out = np.zeros_like(p)
    pos = p > 0
    lg = -np.log(p[pos])
    total = np.zeros_like(lg)
    term = np.ones_like(lg)
    for k in range(n):
        if k:
            term = term * lg / k
        total += term
    out[pos] = p[pos] * total
    return out if out.ndim else float(out)


@dataclass(frozen=True)
class StepDistribution:
    """Exact discrete distribution of pooled output probabilities."""

    values: tuple[Fraction, ...]
    weights: tuple[Fraction, ...]

    def __post_init__(self):
        if sum(self.weights) != 1:
            raise ValueError("step weights must sum to 1")

    def support(self) -> np.ndarray:
        return np.array([float(v) for v in self.values])

    def probabilities(self) -> np.ndarray:
        return np.array([float(w) for w in self.weights])

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        cum = np.cumsum(self.probabilities())
        pos = np.searchsorted(self.support() - _SNAP, x, side="right")
        return np.where(pos > 0, cum[np.maximum(pos - 1, 0)], 0.0)

    def table(self) -> list[tuple[float, float]]:
        return list(zip(self.support().tolist(), np.cumsum(self.probabilities()).tolist()))


def _snap_fraction(x: float, n: int) -> Fraction:
    return Fraction(round(x * 2**n), 2**n)


@lru_cache(maxsize=None)
def clifford_step(n: int) -> StepDistribution:
    """Diagonal elements of ``C|0..0><0..0|C^dagger`` pooled over the full n-qubit Clifford group."""
    group = clifford_group(n)
    probs = np.abs(group.matrices[:, :, 0]) ** 2
    counts: dict[Fraction, int] = {}
    for v in probs.ravel():
        f = _snap_fraction(float(v), n)
        counts[f] = counts.get(f, 0) + 1
    total = probs.size
    keys = sorted(counts)
    return StepDistribution(tuple(keys), tuple(Fraction(counts[k], total) for k in keys))


@lru_cache(maxsize=None)
def factorized_clifford_step(n: int) -> StepDistribution:
    """Pooled output probabilities of products of n independent single-qubit stabilizer states."""
    base = clifford_step(1)
    dist = {Fraction(1): Fraction(1)}
    for _ in range(n):
        nxt: dict[Fraction, Fraction] = {}
        for v, w in dist.items():
            for bv, bw in zip(base.values, base.weights):
                nxt[v * bv] = nxt.get(v * bv, Fraction(0)) + w * bw
        dist = nxt
    keys = sorted(dist)
    return StepDistribution(tuple(keys), tuple(dist[k] for k in keys))


def clifford_step_cdf(n: int) -> list[tuple[float, float]]:
    return clifford_step(n).table()


def sample_haar_ensemble(n: int, num_states: int, rng: np.random.Generator) -> ProbabilitySample:
    psi = haar_unitary(2**n, rng, num_states)[..., 0]
    return ProbabilitySample(np.abs(psi) ** 2, n, f"haar-{n}q")


def sample_factorized_ensemble(n: int, num_states: int, rng: np.random.Generator) -> ProbabilitySample:
    single = np.abs(haar_unitary(2, rng, (num_states, n))[..., 0]) ** 2  # (S, n, 2)
    probs = single[:, 0, :]
    for q in range(1, n):
        probs = (probs[:, :, None] * single[:, q, None, :]).reshape(num_states, -1)
    return ProbabilitySample(probs, n, f"factorized-{n}q")


def ks_distance(sample: ProbabilitySample | np.ndarray, cdf: Callable) -> float:
    """Sup-norm distance between the empirical CDF of ``sample`` and a continuous ``cdf``."""
    x = np.sort(sample.values if isinstance(sample, ProbabilitySample) else np.asarray(sample, float).ravel())
    if x.size == 0:
        raise ValueError("empty sample")
    f = np.asarray(cdf(x), dtype=float)
    n = x.size
    above = np.arange(1, n + 1) / n - f
    below = f - np.arange(n) / n
    return float(np.clip(max(above.max(), below.max()), 0.0, 1.0))


def tv_distance(sample: ProbabilitySample | np.ndarray, step: StepDistribution) -> float:
    """Total-variation distance between the sample's histogram and a discrete reference.

    Sample values off the reference support count entirely toward the distance.
    """
    x = sample.values if isinstance(sample, ProbabilitySample) else np.asarray(sample, float).ravel()
    if x.size == 0:
        raise ValueError("empty sample")
    support = step.support()
    nearest = np.abs(x[:, None] - support[None, :])
    j = nearest.argmin(axis=1)
    on = nearest[np.arange(x.size), j] <= 1e-6
    freq = np.bincount(j[on], minlength=support.size) / x.size
    off = 1.0 - on.mean()
    return float(0.5 * (np.abs(freq - step.probabilities()).sum() + off))


def ks_threshold(num_values: int) -> float:
    return KS_COEFFICIENT / math.sqrt(num_values)


@lru_cache(maxsize=None)
def _state_profiles(n: int, factorized: bool) -> np.ndarray:
    """Output distributions of every state in the reference ensemble, one row per state."""
    g1 = clifford_group(1).matrices
    if not factorized:
        return np.abs(clifford_group(n).matrices[:, :, 0]) ** 2
    rows = np.abs(g1[:, :, 0]) ** 2
    out = rows
    for _ in range(n - 1):
        out = (out[:, None, :, None] * rows[None, :, None, :]).reshape(-1, out.shape[1] * 2)
    return out


@lru_cache(maxsize=None)
def tv_threshold(n: int, num_states: int, factorized: bool, quantile: float = 0.99, replicates: int = 400) -> float:
    """Null quantile of the TV distance for ``num_states`` pooled states drawn from a step reference.

    The 2**n values of one state are dependent, so the quantile is calibrated by
    parametric bootstrap at the state level rather than from a pooled-sample bound.
    """
    step = factorized_clifford_step(n) if factorized else clifford_step(n)
    profiles = _state_profiles(n, factorized)
    support = step.support()
    counts = np.stack([(np.abs(profiles - v) < 1e-6).sum(axis=1) for v in support], axis=1)
    rng = np.random.default_rng(np.random.SeedSequence(20_240, spawn_key=(n, num_states, int(factorized))))
    tvs = np.empty(replicates)
    for r in range(replicates):
        idx = rng.integers(0, len(profiles), size=num_states)
        freq = counts[idx].sum(axis=0) / (num_states * 2**n)
        tvs[r] = 0.5 * np.abs(freq - step.probabilities()).sum()
    return float(np.quantile(tvs, quantile))


@dataclass
class DistributionVerdict:
    ks_to_porter_thomas: float
    ks_to_factorized: float
    ks_to_clifford_step: float | None
    verdict: str
    threshold: float
    num_values: int
    reference: str
    metrics: dict[str, str] = field(default_factory=dict)
    thresholds: dict[str, float] = field(default_factory=dict)


def _decide(d_multi: float | None, d_fact: float, thr_multi: float, thr_fact: float) -> str:
    if d_multi is None:
        return "indeterminate"
    multi_ok, fact_ok = d_multi < thr_multi, d_fact < thr_fact
    if multi_ok and not fact_ok:
        return "multiqubit-like"
    if fact_ok and not multi_ok:
        return "factorized-like"
    return "indeterminate"


def verdict_for_sample(sample: ProbabilitySample, clifford: bool, threshold: float | None = None) -> DistributionVerdict:
    """Distances of a pooled sample to all references plus the randomization verdict.

    Continuous references use the KS statistic with threshold ``1.63/sqrt(N)``; the
    discrete Clifford references use TV distance with a calibrated null quantile.
    ``threshold`` overrides every threshold at once.
    """
    n = sample.n
    states = len(sample) // 2**n
    ks_thr = ks_threshold(len(sample)) if threshold is None else threshold
    ks_pt = ks_distance(sample, lambda x: porter_thomas_cdf(x, 2**n))
    step = clifford_step(n) if n <= 2 else None
    if clifford:
        d_fact = tv_distance(sample, factorized_clifford_step(n))
        d_step = tv_distance(sample, step) if step else None
        thr_fact = tv_threshold(n, states, True) if threshold is None else threshold
        thr_multi = (tv_threshold(n, states, False) if step else math.nan) if threshold is None else threshold
        metrics = {"porter_thomas": "ks", "factorized": "tv (factorized Clifford steps)", "clifford_step": "tv"}
        thresholds = {"porter_thomas": ks_thr, "factorized": thr_fact, "clifford_step": thr_multi}
        d_multi, ref = d_step, "clifford-step"
    else:
        d_fact = ks_distance(sample, lambda x: factorized_cdf(x, n))
        d_step = tv_distance(sample, step) if step else None
        thr_fact = thr_multi = ks_thr
        metrics = {"porter_thomas": "ks", "factorized": "ks", "clifford_step": "tv"}
        thresholds = {"porter_thomas": ks_thr, "factorized": ks_thr}
        d_multi, ref = ks_pt, "porter-thomas"
    return DistributionVerdict(
        ks_to_porter_thomas=ks_pt,
        ks_to_factorized=d_fact,
        ks_to_clifford_step=d_step,
        verdict=_decide(d_multi, d_fact, thr_multi, thr_fact),
        threshold=thr_multi,
        num_values=len(sample),
        reference=ref,
        metrics=metrics,
        thresholds=thresholds,
    )


def ensemble_sample(ensemble: Ensemble, depth: int, num_circuits: int, seed: int) -> ProbabilitySample:
    """Pooled noiseless output probabilities of ``num_circuits`` circuits of one depth."""
    out = run_batch(ensemble, depth, num_circuits, seed, stream=50)
    tag = ensemble.layer + (f"+{ensemble.target_gate}" if ensemble.target_gate else "") + f"@m={depth}"
    return ProbabilitySample(np.clip(out.ideal, 0.0, 1.0), ensemble.n, tag)


def validate_reference(
    ensemble: Ensemble,
    depth: int,
    num_circuits: int,
    seed: int = 0,
    threshold: float | None = None,
) -> DistributionVerdict:
    """Check whether an ideal ensemble randomizes like its multi-qubit reference.

    Clifford-type ensembles are compared with the n-qubit Clifford step distribution,
    Haar-type ensembles with Porter-Thomas; both are also compared with the matching
    factorized reference.
    """
    sample = ensemble_sample(ensemble, depth, num_circuits, seed)
    return verdict_for_sample(sample, ensemble.is_clifford, threshold)
