"""End-to-end benchmarking experiments: circuit generation, simulation, estimation, fits.

Protocols
---------
xeb-single       simultaneous single-qubit reference layers, XEB estimator
xeb-multi        n-qubit Clifford (or Haar) layers, XEB estimator
irb-clifford     n-qubit Clifford layers with an inverting recovery gate, survival probability;
                 with a target gate this is the interleaved IRB run
xeb-interleaved  single-qubit reference layers with the target gate after every layer
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from . import decay
from .decay import DecayFit, FitError, fit_decay
from .ensembles import Ensemble, circuit_rng, run_batch
from .simulator import LocalNoiseModel, measured_frequencies
from .xeb import FidelityPoint, IndeterminateFidelityError, least_squares_fidelity, overlap_arrays, survival_to_fidelity

log = logging.getLogger(__name__)

PROTOCOLS = ("xeb-single", "xeb-multi", "irb-clifford", "xeb-interleaved")
_STREAM = {"xeb-single": 1, "xeb-multi": 2, "irb-clifford": 3, "xeb-interleaved": 4}
_BOOT_STREAM = 99
DEFAULT_RESAMPLES = 1000


@dataclass(frozen=True)
class ExperimentPlan:
    protocol: str
    n: int
    depths: tuple[int, ...]
    noise: LocalNoiseModel
    circuits_per_depth: int = 50
    shots: int = 0
    target_gate: str | None = None
    target_qubits: tuple[int, ...] | None = None
    seed: int = 0
    m_min: int = decay.DEFAULT_M_MIN
    ensemble: str = "clifford"
    bootstrap_resamples: int = DEFAULT_RESAMPLES
    f_single_shared: bool = False
    models: tuple[str, ...] | None = None
    fit_amplitude: bool | None = None
    threads: int = 1

    def __post_init__(self):
        object.__setattr__(self, "depths", tuple(int(m) for m in self.depths))
        if self.protocol not in PROTOCOLS:
            raise ValueError(f"unknown protocol {self.protocol!r}; expected one of {PROTOCOLS}")
        if not 1 <= self.n <= 4:
            raise ValueError("n must be between 1 and 4")
        if not self.depths:
            raise ValueError("depth list is empty")
        if any(b <= a for a, b in zip(self.depths, self.depths[1:])) or self.depths[0] < 0:
            raise ValueError("depths must be nonnegative and strictly increasing")
        if self.circuits_per_depth < 1:
            raise ValueError("circuits_per_depth must be >= 1")
        if self.shots < 0:
            raise ValueError("shots must be >= 0")
        if self.noise.n != self.n:
            raise ValueError(f"noise model covers {self.noise.n} qubits, plan has n={self.n}")
        if self.protocol == "xeb-interleaved" and self.target_gate is None:
            raise ValueError("xeb-interleaved requires a target gate")
        if self.ensemble not in ("clifford", "haar"):
            raise ValueError("ensemble must be 'clifford' or 'haar'")
        if self.protocol == "irb-clifford" and (self.ensemble != "clifford" or self.n > 2):
            raise ValueError("irb-clifford needs Clifford layers and n <= 2")
        if self.protocol == "xeb-multi" and self.ensemble == "clifford" and self.n > 2:
            raise ValueError("multi-qubit Clifford layers are available for n <= 2 only")
        if self.bootstrap_resamples and self.bootstrap_resamples < 100:
            raise ValueError("bootstrap_resamples must be 0 (off) or >= 100")

    @property
    def layer_kind(self) -> str:
        scope = "1q" if self.protocol in ("xeb-single", "xeb-interleaved") else "nq"
        return f"{self.ensemble}-{scope}"

    def make_ensemble(self) -> Ensemble:
        gate = self.target_gate if self.protocol in ("xeb-interleaved", "irb-clifford") else None
        return Ensemble(self.layer_kind, self.n, gate, self.target_qubits)

    @property
    def fit_models(self) -> tuple[str, ...]:
        if self.models is not None:
            return self.models
        if self.protocol == "xeb-single":
            return ("f_single", "exponential", "additive")
        return ("exponential",)

    @property
    def amplitude(self) -> bool:
        """Free prefactor in exponential fits; on by default when layers do not commute with the noise."""
        if self.fit_amplitude is not None:
            return self.fit_amplitude
        return self.protocol != "xeb-single"

    @property
    def uses_survival(self) -> bool:
        return self.protocol == "irb-clifford"


@dataclass
class DepthData:
    """Raw per-circuit statistics at one depth (XEB overlaps or survival probabilities)."""

    depth: int
    m_u: np.ndarray | None = None
    e_u: np.ndarray | None = None
    u_u: np.ndarray | None = None
    survival: np.ndarray | None = None
    d: int = 2

    @property
    def num_circuits(self) -> int:
        return len(self.survival if self.survival is not None else self.m_u)

    def estimate(self, idx: np.ndarray | None = None):
        """Fidelity estimate; ``idx`` of shape ``(B, K)`` gives B resampled estimates."""
        if self.survival is not None:
            f = survival_to_fidelity(self.survival, self.d)
            return f.mean() if idx is None else f[idx].mean(axis=-1)
        if idx is None:
            return least_squares_fidelity(self.m_u, self.e_u, self.u_u)
        m, e, u = self.m_u[idx], self.e_u[idx], self.u_u[idx]
        num = np.sum((m - u) * (e - u), axis=-1)
        den = np.sum((e - u) ** 2, axis=-1)
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(den > 0, num / np.where(den > 0, den, 1.0), np.nan)


@dataclass
class GateFidelityEstimate:
    p_int: float
    p_int_stderr: float
    refined: float
    refined_stderr: float
    naive: float | None
    naive_stderr: float | None
    average_fidelity_refined: float
    average_fidelity_naive: float | None
    d: int
    reference: str
    errors: tuple[float, ...] = ()
    errors_stderr: tuple[float, ...] = ()
    errors_provenance: str = ""
    p_ref: float | None = None
    p_ref_stderr: float | None = None
    uncertainty_method: str = "fit"


@dataclass
class ExperimentResult:
    plan: ExperimentPlan
    points: list[FidelityPoint]
    fits: dict[str, DecayFit]
    data: list[DepthData] = field(repr=False, default_factory=list)
    gate_fidelity: GateFidelityEstimate | None = None
    verdict: object | None = None
    fit_errors: dict[str, str] = field(default_factory=dict)

    def fit(self, model_id: str = "exponential") -> DecayFit:
        try:
            return self.fits[model_id]
        except KeyError:
            raise FitError(f"no {model_id} fit in this result ({self.fit_errors.get(model_id, 'not run')})") from None


@dataclass
class DepolarizingParams:
    per_qubit_p: tuple[float, ...]
    stderr: tuple[float, ...]
    source: str = "isolated"

    @property
    def errors(self) -> tuple[float, ...]:
        return tuple(1.0 - p for p in self.per_qubit_p)


# --- data generation ---------------------------------------------------------


def _simulate_depth(plan: ExperimentPlan, ensemble: Ensemble, depth: int) -> DepthData:
    out = run_batch(
        ensemble,
        depth,
        plan.circuits_per_depth,
        plan.seed,
        _STREAM[plan.protocol],
        plan.noise,
        recovery=plan.uses_survival,
    )
    d = 2**plan.n
    if plan.shots:
        measured = np.array(
            [measured_frequencies(p, plan.shots, r) for p, r in zip(out.noisy, out.rngs)]
        )
    else:
        measured = out.noisy
    if plan.uses_survival:
        return DepthData(depth, survival=measured[:, 0].copy(), d=d)
    m_u, e_u, u_u = overlap_arrays(out.ideal, measured)
    return DepthData(depth, m_u, e_u, u_u, d=d)


def simulate_data(plan: ExperimentPlan) -> list[DepthData]:
    ensemble = plan.make_ensemble()
    work = lambda m: _simulate_depth(plan, ensemble, m)  # noqa: E731
    if plan.threads == 1:
        return [work(m) for m in plan.depths]
    with ThreadPoolExecutor(max_workers=plan.threads or None) as pool:
        return list(pool.map(work, plan.depths))


# --- estimation --------------------------------------------------------------


def _fit_kwargs(plan: ExperimentPlan, model_id: str) -> dict:
    if model_id == "f_single":
        return dict(n=plan.n, shared=plan.f_single_shared)
    if model_id == "exponential":
        return dict(amplitude=plan.amplitude)
    return {}


def bootstrap_uncertainty(
    data: Sequence[DepthData],
    num_resamples: int,
    rng: np.random.Generator,
    fit_specs: Sequence[tuple[str, dict]] = (),
    m_min: int = decay.DEFAULT_M_MIN,
    point_stderr: Sequence[float | None] | None = None,
    initial: dict[str, np.ndarray] | None = None,
):
    """Resample circuits with replacement within each depth.

    Returns ``(point_stderr, param_stderr)``: per-depth standard deviations of the
    fidelity estimate (``None`` where fewer than 2 circuits exist) and, per fit spec,
    the standard deviation of refitted parameters. Refits reuse the weights of the
    original fit (``point_stderr``) so only the data are resampled.
    """
    if num_resamples < 100:
        raise ValueError("num_resamples must be >= 100")
    samples = []
    for dd in data:
        k = dd.num_circuits
        idx = rng.integers(0, k, size=(num_resamples, k))
        samples.append(dd.estimate(idx))
    samples = np.array(samples)  # (depths, B)
    stderr_pts: list[float | None] = []
    for dd, s in zip(data, samples):
        if dd.num_circuits < 2:
            stderr_pts.append(None)
        else:
            s = s[np.isfinite(s)]
            stderr_pts.append(float(np.std(s, ddof=1)) if len(s) > 1 else None)
    weights_from = stderr_pts if point_stderr is None else point_stderr
    param_se: dict[str, np.ndarray] = {}
    for model_id, kw in fit_specs:
        draws = []
        for b in range(num_resamples):
            col = samples[:, b]
            if not np.all(np.isfinite(col)):
                continue
            pts = [
                FidelityPoint(dd.depth, float(f), se, dd.num_circuits)
                for dd, f, se in zip(data, col, weights_from)
            ]
            try:
                init = None if initial is None else initial.get(model_id)
                draws.append(fit_decay(pts, model_id, m_min, initial=init, **kw).params)
            except FitError:
                continue
        if len(draws) > 1:
            draws = np.array(draws)
            if model_id == "f_single" and not kw.get("shared", False):
                draws = np.sort(draws, axis=1)
            param_se[model_id] = np.std(draws, axis=0, ddof=1)
    return stderr_pts, param_se


def analyze_data(
    data: Sequence[DepthData],
    specs: Sequence[tuple[str, dict]],
    m_min: int,
    resamples: int,
    rng: np.random.Generator,
) -> tuple[list[FidelityPoint], dict[str, DecayFit], dict[str, str], list[DepthData]]:
    """Fidelity points, bootstrap errors and decay fits from per-circuit data.

    Depths whose fidelity is indeterminate are dropped with a warning.
    """
    points = []
    for dd in data:
        try:
            f = float(dd.estimate())
        except IndeterminateFidelityError:
            log.warning("depth %d: fidelity indeterminate, point dropped", dd.depth)
            continue
        points.append(FidelityPoint(dd.depth, f, 0.0, dd.num_circuits))
    kept = {pt.depth for pt in points}
    data = [dd for dd in data if dd.depth in kept]

    if resamples:
        se_pts, _ = bootstrap_uncertainty(data, resamples, rng, (), m_min)
        points = [replace(pt, stderr=se) for pt, se in zip(points, se_pts)]

    fits: dict[str, DecayFit] = {}
    fit_errors: dict[str, str] = {}
    for mid, kw in specs:
        try:
            fits[mid] = fit_decay(points, mid, m_min, **kw)
        except FitError as exc:
            fit_errors[mid] = str(exc)
            log.warning("%s fit failed: %s", mid, exc)

    if resamples and fits:
        ok_specs = [(mid, kw) for mid, kw in specs if mid in fits]
        _, param_se = bootstrap_uncertainty(
            data,
            resamples,
            rng,
            ok_specs,
            m_min,
            point_stderr=[pt.stderr for pt in points],
            initial={mid: fits[mid].params for mid, _ in ok_specs},
        )
        for mid, se in param_se.items():
            fit = fits[mid]
            if mid == "f_single" and not fit.shared:
                # bootstrap draws were sorted; report in the fitted order
                se = se[np.argsort(np.argsort(fit.params))]
            fit.param_stderr_bootstrap = se
    return points, fits, fit_errors, list(data)


def analyze(plan: ExperimentPlan, data: Sequence[DepthData]) -> ExperimentResult:
    specs = [(mid, _fit_kwargs(plan, mid)) for mid in plan.fit_models]
    rng = circuit_rng(plan.seed, _BOOT_STREAM, _STREAM[plan.protocol], 0)
    points, fits, errors, kept = analyze_data(data, specs, plan.m_min, plan.bootstrap_resamples, rng)
    return ExperimentResult(plan, points, fits, kept, fit_errors=errors)


def run_experiment(plan: ExperimentPlan) -> ExperimentResult:
    return analyze(plan, simulate_data(plan))


# --- gate estimates ----------------------------------------------------------


def _gate_dim(plan: ExperimentPlan) -> int:
    from .ensembles import resolve_gate

    return resolve_gate(plan.target_gate).shape[0]


def interleaved_gate_estimate(
    reference: ExperimentResult | DepolarizingParams | None,
    interleaved: ExperimentResult,
    errors: DepolarizingParams | None = None,
) -> GateFidelityEstimate:
    """Refined and naive gate depolarizing fidelity from a single-qubit-referenced run.

    ``errors`` supplies per-qubit parameters (normally from isolated single-qubit fits);
    without it they come from ``reference``: either given directly or taken from the
    reference run's simultaneous ``f_single`` fit.
    """
    fit_int = interleaved.fit("exponential")
    if errors is None:
        if reference is None:
            raise FitError("need single-qubit errors or a reference result")
        if isinstance(reference, DepolarizingParams):
            errors = reference
        else:
            fs = reference.fit("f_single")
            p = np.full(fs.n, fs.p) if fs.shared else fs.params
            se = np.full(fs.n, fs.stderr[0]) if fs.shared else fs.stderr
            errors = DepolarizingParams(tuple(map(float, p)), tuple(map(float, se)), "simultaneous")
    return single_reference_estimate(
        fit_int.p,
        float(fit_int.stderr[0]),
        errors,
        _gate_dim(interleaved.plan),
        f"{fit_int.stderr_method} (p_int) + quadrature",
    )


def single_reference_estimate(
    p_int: float, p_int_stderr: float, errors: DepolarizingParams, d: int, method: str = "quadrature"
) -> GateFidelityEstimate:
    e = np.array(errors.errors)
    se_e = np.array(errors.stderr) if errors.stderr else np.zeros_like(e)
    n = len(e)
    coeff = 0.75 / (1.0 - 0.25**n)
    p_ref = decay.p_multi_leading(e, n)
    refined = decay.refined_interleaved_fidelity(p_int, e, n)
    refined_se = np.sqrt((p_int_stderr / p_ref) ** 2 + np.sum((p_int * coeff * se_e / p_ref**2) ** 2))
    add = 1.0 - e.sum()
    naive = decay.naive_interleaved_fidelity(p_int, e)
    naive_se = np.sqrt((p_int_stderr / add) ** 2 + np.sum((p_int * se_e / add**2) ** 2))
    return GateFidelityEstimate(
        p_int=p_int,
        p_int_stderr=p_int_stderr,
        refined=refined,
        refined_stderr=float(refined_se),
        naive=naive,
        naive_stderr=float(naive_se),
        average_fidelity_refined=decay.depolarizing_to_average_fidelity(refined, d),
        average_fidelity_naive=decay.depolarizing_to_average_fidelity(naive, d),
        d=d,
        reference="single-qubit",
        errors=tuple(map(float, e)),
        errors_stderr=tuple(map(float, se_e)),
        errors_provenance=errors.source,
        p_ref=p_ref,
        uncertainty_method=method,
    )


def ratio_gate_estimate(reference: ExperimentResult, interleaved: ExperimentResult) -> GateFidelityEstimate:
    """Standard interleaved ratio ``p_int / p_ref`` for a multi-qubit Clifford reference."""
    fr, fi = reference.fit("exponential"), interleaved.fit("exponential")
    p_ref, s_ref = fr.p, float(fr.stderr[0])
    p_int, s_int = fi.p, float(fi.stderr[0])
    p_g = p_int / p_ref
    se = p_g * np.sqrt((s_int / p_int) ** 2 + (s_ref / p_ref) ** 2)
    d = _gate_dim(interleaved.plan)
    return GateFidelityEstimate(
        p_int=p_int,
        p_int_stderr=s_int,
        refined=p_g,
        refined_stderr=float(se),
        naive=None,
        naive_stderr=None,
        average_fidelity_refined=decay.depolarizing_to_average_fidelity(p_g, d),
        average_fidelity_naive=None,
        d=d,
        reference="multi-qubit",
        p_ref=p_ref,
        p_ref_stderr=s_ref,
        uncertainty_method=f"{fi.stderr_method} + quadrature",
    )


def isolated_single_qubit_fit(
    noise: LocalNoiseModel,
    depths: Sequence[int],
    circuits_per_depth: int,
    shots: int,
    seed: int,
    m_min: int = 1,
    bootstrap_resamples: int = DEFAULT_RESAMPLES,
) -> DepolarizingParams:
    """Benchmark each qubit alone (n = 1) and fit its depolarizing parameter."""
    ps, ses = [], []
    for q, p in enumerate(noise.per_qubit_p):
        plan = ExperimentPlan(
            "xeb-single",
            1,
            tuple(depths),
            LocalNoiseModel((p,)),
            circuits_per_depth,
            shots,
            seed=int(np.random.SeedSequence(seed, spawn_key=(7, q)).generate_state(1)[0]),
            m_min=m_min,
            bootstrap_resamples=bootstrap_resamples,
            models=("exponential",),
        )
        fit = run_experiment(plan).fit("exponential")
        ps.append(fit.p)
        ses.append(float(fit.stderr[0]))
    return DepolarizingParams(tuple(ps), tuple(ses), "isolated")
