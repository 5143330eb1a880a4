"""Command-line front end.

    xebref simulate   --config configs/reference_decays.toml [--out DIR] [--seed S] [--threads K] [--format csv|json]
    xebref interleave --config configs/interleaved_cz.toml ...
    xebref dist-test  --config configs/distributions.toml ...
    xebref fit DATA [--ideal IDEAL] [--model exponential ...] [--errors 0.006,0.004] ...
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from . import decay, report
from .config import Config, ConfigError, depth_list, load_config
from .dataio import (
    DataFormatError,
    dumps,
    read_counts,
    read_points,
    write_curve,
    write_table,
)
from .decay import FitError, fit_decay
from .distributions import (
    clifford_step,
    ensemble_sample,
    factorized_cdf,
    porter_thomas_cdf,
    verdict_for_sample,
)
from .ensembles import Ensemble
from .protocols import (
    DepolarizingParams,
    ExperimentPlan,
    ExperimentResult,
    analyze_data,
    interleaved_gate_estimate,
    isolated_single_qubit_fit,
    ratio_gate_estimate,
    run_experiment,
    single_reference_estimate,
)
from .simulator import LocalNoiseModel, SimulationIntegrityError

log = logging.getLogger("xebref")

DEFAULT_DEPTHS = {"start": 1, "stop": 300, "num": 14}
DEFAULT_ISOLATED_DEPTHS = (1, 2, 4, 8, 16, 32, 64, 128, 256)


# --- config helpers ------------------------------------------------------------


def _noise(cfg: Config, n: int, **extra) -> LocalNoiseModel:
    sec = cfg.section("noise")
    if "errors" in sec and "per_qubit_p" in sec:
        raise ConfigError("noise: give either errors or per_qubit_p, not both")
    if "errors" in sec:
        p = [1.0 - float(e) for e in sec["errors"]]
    else:
        p = [float(x) for x in sec.get("per_qubit_p", [1.0] * n)]
    if len(p) != n:
        raise ConfigError(f"noise lists {len(p)} qubits but experiment.n = {n}")
    kw = dict(interleaved_gate_p=sec.get("interleaved_gate_p"), layer_p=sec.get("layer_p"))
    kw.update(extra)
    try:
        return LocalNoiseModel(tuple(p), **kw)
    except ValueError as exc:
        raise ConfigError(f"noise: {exc}") from None


def _plan(cfg: Config, protocol: str, seed: int, threads: int, **overrides) -> ExperimentPlan:
    exp = cfg.section("experiment")
    n = int(exp.get("n", 2))
    kw = dict(
        protocol=protocol,
        n=n,
        depths=depth_list(exp.get("depths", DEFAULT_DEPTHS)),
        noise=_noise(cfg, n),
        circuits_per_depth=int(exp.get("circuits_per_depth", 50)),
        shots=int(exp.get("shots", 0)),
        seed=seed,
        m_min=int(exp.get("m_min", decay.DEFAULT_M_MIN)),
        ensemble=exp.get("ensemble", "clifford"),
        bootstrap_resamples=int(cfg.section("bootstrap").get("resamples", 1000)),
        f_single_shared=bool(exp.get("f_single_shared", False)),
        fit_amplitude=exp.get("fit_amplitude"),
        threads=threads,
    )
    kw.update(overrides)
    try:
        return ExperimentPlan(**kw)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def _predictions(plan: ExperimentPlan, depths) -> dict[str, np.ndarray]:
    """Analytic curves at the planted noise parameters."""
    p = plan.noise.per_qubit_p
    e = plan.noise.errors
    m = np.asarray(depths, dtype=float)
    return {
        "f_single": decay.f_single(p, m),
        "exponential": decay.p_multi_leading(e, plan.n) ** m,
        "additive": decay.f_additive(e, m),
    }


def _curve(out: Path, name: str, result: ExperimentResult, fmt: str) -> str:
    depths = [pt.depth for pt in result.points]
    return write_curve(out / f"curve_{name}", result.points, _predictions(result.plan, depths), fmt).name


def _write_report(out: Path, name: str, doc: dict) -> Path:
    path = out / name
    path.write_text(dumps(doc), encoding="utf-8")
    return path


# --- commands ----------------------------------------------------------------


def cmd_simulate(cfg: Config, seed: int, out: Path, threads: int, fmt: str) -> dict:
    n = int(cfg.section("experiment").get("n", 2))
    protocols = cfg.section("simulate").get("protocols") or (["xeb-multi", "xeb-single"] if n <= 2 else ["xeb-single"])
    doc = {"metadata": report.metadata(seed, cfg.sha256, "simulate"), "experiments": {}, "files": []}
    for proto in protocols:
        plan = _plan(cfg, proto, seed, threads)
        result = run_experiment(plan)
        doc["experiments"][proto] = report.result_dict(result)
        doc["files"].append(_curve(out, proto, result, fmt))
    doc["model_predictions"] = "evaluated at the planted noise parameters"
    doc["files"].append(_write_report(out, "report.json", doc).name)
    return doc


def _verdict_dict(v) -> dict:
    return {
        "distance_porter_thomas": v.ks_to_porter_thomas,
        "distance_factorized": v.ks_to_factorized,
        "distance_clifford_step": v.ks_to_clifford_step,
        "metrics": v.metrics,
        "thresholds": v.thresholds,
        "threshold": v.threshold,
        "reference": v.reference,
        "num_values": v.num_values,
        "verdict": v.verdict,
        "threshold_rule": "KS: 1.63/sqrt(N) (99%); TV: calibrated 99% null quantile at the circuit level",
    }


def cmd_interleave(cfg: Config, seed: int, out: Path, threads: int, fmt: str) -> dict:
    sec = cfg.section("interleave")
    if "target_gate" not in sec:
        raise ConfigError("interleave.target_gate is required")
    gate = sec["target_gate"]
    qubits = tuple(sec["target_qubits"]) if "target_qubits" in sec else None
    source = sec.get("error_source", "isolated")
    if source not in ("isolated", "simultaneous"):
        raise ConfigError("interleave.error_source must be 'isolated' or 'simultaneous'")
    doc: dict = {"metadata": report.metadata(seed, cfg.sha256, "interleave"), "files": []}

    ref_plan = _plan(cfg, "xeb-single", seed, threads)
    int_plan = _plan(cfg, "xeb-interleaved", seed, threads, target_gate=gate, target_qubits=qubits)
    reference = run_experiment(ref_plan)
    interleaved = run_experiment(int_plan)
    doc["reference"] = report.result_dict(reference)
    doc["interleaved"] = report.result_dict(interleaved)
    doc["files"] += [_curve(out, "reference", reference, fmt), _curve(out, "interleaved", interleaved, fmt)]

    if source == "isolated":
        params = isolated_single_qubit_fit(
            ref_plan.noise,
            depth_list(sec.get("isolated_depths", DEFAULT_ISOLATED_DEPTHS)),
            ref_plan.circuits_per_depth,
            ref_plan.shots,
            seed,
            bootstrap_resamples=ref_plan.bootstrap_resamples,
        )
        estimate = interleaved_gate_estimate(None, interleaved, params)
    else:
        estimate = interleaved_gate_estimate(reference, interleaved)
    doc["gate_fidelity"] = report.gate_dict(estimate)
    doc["gate_fidelity"]["single_qubit_errors"]["provenance"] = (
        "isolated single-qubit XEB fits (n=1 per qubit)" if source == "isolated" else "simultaneous f_single fit of the reference run"
    )

    ens = Ensemble(f"{ref_plan.ensemble}-1q", ref_plan.n, gate, qubits)
    sample = ensemble_sample(ens, int_plan.m_min, int(sec.get("verdict_circuits", 10000)), seed)
    doc["randomization_verdict"] = {"depth": int_plan.m_min, **_verdict_dict(verdict_for_sample(sample, ens.is_clifford))}

    if sec.get("compare_irb", False):
        layer_p = sec.get("irb_layer_p")
        irb_noise = _noise(cfg, ref_plan.n, layer_p=layer_p) if layer_p is not None else ref_plan.noise
        rb = run_experiment(_plan(cfg, "irb-clifford", seed, threads, noise=irb_noise))
        irb = run_experiment(_plan(cfg, "irb-clifford", seed, threads, noise=irb_noise, target_gate=gate, target_qubits=qubits))
        doc["irb_reference"] = report.result_dict(rb)
        doc["irb_interleaved"] = report.result_dict(irb)
        doc["irb_gate_fidelity"] = report.gate_dict(ratio_gate_estimate(rb, irb))
        doc["files"] += [_curve(out, "irb_reference", rb, fmt), _curve(out, "irb_interleaved", irb, fmt)]
    doc["notes"] = [
        "IRB Clifford layers are applied as atomic noisy layers; synthesis cost enters only through irb_layer_p",
        "fit weights are 1/stderr^2 from the bootstrap; weighting and algorithm are implementation choices",
    ]
    doc["files"].append(_write_report(out, "report.json", doc).name)
    return doc


DEFAULT_ENSEMBLES = (
    {"layer": "haar-1q"},
    {"layer": "haar-nq"},
    {"layer": "haar-1q", "target_gate": "CZ"},
    {"layer": "clifford-1q"},
    {"layer": "clifford-nq"},
    {"layer": "clifford-1q", "target_gate": "CZ"},
)


def cmd_dist_test(cfg: Config, seed: int, out: Path, threads: int, fmt: str) -> dict:
    sec = cfg.section("distribution")
    grid = np.linspace(0.0, 1.0, int(sec.get("grid_points", 501)))
    n_default = int(cfg.section("experiment").get("n", 2))
    doc: dict = {"metadata": report.metadata(seed, cfg.sha256, "dist-test"), "ensembles": [], "files": []}
    sizes = set()
    for i, spec in enumerate(sec.get("ensembles", DEFAULT_ENSEMBLES)):
        n = int(spec.get("n", n_default))
        sizes.add(n)
        ens = Ensemble(spec["layer"], n, spec.get("target_gate"))
        depth = int(spec.get("depth", 4))
        sample = ensemble_sample(ens, depth, int(spec.get("num_circuits", 10000)), seed + i)
        verdict = verdict_for_sample(sample, ens.is_clifford)
        xs = np.sort(sample.values)
        cdf = np.searchsorted(xs, grid, side="right") / xs.size
        name = f"cdf_{sample.source_tag.replace('@m=', '_m').replace('+', '_')}.csv"
        write_table(out / name, ("P_x", "cdf"), zip(grid, cdf))
        doc["files"].append(name)
        doc["ensembles"].append({"tag": sample.source_tag, "file": name, **_verdict_dict(verdict)})
    for n in sorted(sizes):
        d = 2**n
        write_table(out / f"analytic_porter_thomas_d{d}.csv", ("P_x", "cdf"), zip(grid, porter_thomas_cdf(grid, d)))
        write_table(out / f"analytic_factorized_n{n}.csv", ("P_x", "cdf"), zip(grid, factorized_cdf(grid, n)))
        doc["files"] += [f"analytic_porter_thomas_d{d}.csv", f"analytic_factorized_n{n}.csv"]
        if n <= 2:
            write_table(out / f"analytic_clifford_step_n{n}.csv", ("P_x", "cdf"), clifford_step(n).table())
            doc["files"].append(f"analytic_clifford_step_n{n}.csv")
    doc["files"].append(_write_report(out, "report.json", doc).name)
    return doc


def _detect_kind(path: Path) -> str:
    if path.suffix == ".json":
        return "points"
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().strip().split(",")
    if header[:4] == ["depth", "circuit", "bitstring", "count"]:
        return "counts"
    if header[:2] == ["depth", "fidelity"]:
        return "points"
    raise DataFormatError(f"{path.name} line 1: unrecognized header {header}")


def cmd_fit(args, out: Path) -> dict:
    path = Path(args.data)
    kind = _detect_kind(path)
    models = args.model or ["exponential"]
    rng = np.random.default_rng(np.random.SeedSequence(args.seed or 0, spawn_key=(12,)))
    n = args.n
    if kind == "counts":
        data = read_counts(path, args.ideal)
        n = n or int(np.log2(data[0].d))
        specs = [(mid, _spec(mid, n, args)) for mid in models]
        points, fits, errors, _ = analyze_data(data, specs, args.m_min, args.resamples, rng)
    else:
        points = read_points(path)
        fits, errors = {}, {}
        for mid in models:
            try:
                fits[mid] = fit_decay(points, mid, args.m_min, **_spec(mid, n or 1, args))
            except FitError as exc:
                errors[mid] = str(exc)
    doc: dict = {
        "metadata": report.metadata(args.seed or 0, None, "fit"),
        "input": {"path": str(path), "schema": kind},
        "fidelity_curve": [{"depth": p.depth, "fidelity": p.fidelity, "stderr": p.stderr} for p in points],
        "fits": {k: report.fit_dict(v) for k, v in fits.items()},
    }
    if errors:
        doc["fit_errors"] = errors
    if args.errors:
        e = [float(x) for x in args.errors.split(",")]
        se = [float(x) for x in args.errors_stderr.split(",")] if args.errors_stderr else [0.0] * len(e)
        if "exponential" not in fits:
            raise FitError("applying the interleaved correction needs an exponential fit of the interleaved data")
        fit = fits["exponential"]
        params = DepolarizingParams(tuple(1 - x for x in e), tuple(se), "command line (--errors)")
        est = single_reference_estimate(fit.p, float(fit.stderr[0]), params, args.gate_dim, f"{fit.stderr_method} + quadrature")
        doc["gate_fidelity"] = report.gate_dict(est)
    write_curve(out / "fit_points", points, {}, args.format)
    doc["files"] = [f"fit_points.{args.format}", "fit_report.json"]
    _write_report(out, "fit_report.json", doc)
    return doc


def _spec(model_id: str, n: int, args) -> dict:
    if model_id == "f_single":
        return dict(n=n, shared=args.shared)
    if model_id == "exponential":
        return dict(amplitude=args.amplitude)
    return {}


# --- entry point -------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="xebref", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, config=True):
        if config:
            p.add_argument("--config", required=True, type=Path)
        p.add_argument("--seed", type=int, default=None, help="overrides the config seed")
        p.add_argument("--out", type=Path, default=None, help="output directory")
        p.add_argument("--threads", type=int, default=1, help="worker threads (0 = auto)")
        p.add_argument("--format", choices=("csv", "json"), default=None)

    for name in ("simulate", "interleave", "dist-test"):
        common(sub.add_parser(name))
    fit = sub.add_parser("fit", help="fit fidelity points or raw counts")
    common(fit, config=False)
    fit.add_argument("data", type=Path)
    fit.add_argument("--ideal", type=Path, default=None, help="ideal-probability file for counts data")
    fit.add_argument("--model", action="append", choices=decay.MODELS)
    fit.add_argument("--n", type=int, default=None, help="qubit count for the f_single model")
    fit.add_argument("--m-min", type=int, default=decay.DEFAULT_M_MIN)
    fit.add_argument("--shared", action="store_true", help="one shared p for the f_single model")
    fit.add_argument("--amplitude", action="store_true", help="free prefactor in the exponential model")
    fit.add_argument("--errors", default=None, help="comma-separated single-qubit errors e_i")
    fit.add_argument("--errors-stderr", default=None)
    fit.add_argument("--gate-dim", type=int, default=4)
    fit.add_argument("--resamples", type=int, default=1000)
    return parser


COMMANDS = {"simulate": cmd_simulate, "interleave": cmd_interleave, "dist-test": cmd_dist_test}


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        if args.command == "fit":
            args.format = args.format or "csv"
            out = args.out or Path(".")
            out.mkdir(parents=True, exist_ok=True)
            doc = cmd_fit(args, out)
        else:
            cfg = load_config(args.config)
            seed = cfg.seed if args.seed is None else args.seed
            out_sec = cfg.section("output")
            out = args.out or Path(out_sec.get("dir", "out"))
            fmt = args.format or out_sec.get("format", "csv")
            out.mkdir(parents=True, exist_ok=True)
            doc = COMMANDS[args.command](cfg, seed, out, args.threads, fmt)
    except (ConfigError, DataFormatError, FitError, SimulationIntegrityError, OSError) as exc:
        print(f"xebref {args.command}: error: {exc}", file=sys.stderr)
        return 2
    for name in doc.get("files", []):
        print(out / name)
    return 0
