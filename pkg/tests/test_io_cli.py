from __future__ import annotations

import json
from pathlib import Path

import numpy as np
import pytest

from xebref.cli import main
from xebref.config import ConfigError, depth_list, parse_config
from xebref.dataio import DataFormatError, read_counts, read_points, write_counts, write_curve
from xebref.decay import f_single, fit_decay
from xebref.protocols import analyze_data
from xebref.xeb import FidelityPoint

REFERENCE_RUN = """\
seed = 5

[experiment]
n = 2
depths = [1, 4, 8, 16, 32, 64]
circuits_per_depth = 10
shots = 0

[noise]
errors = [0.006, 0.004]

[bootstrap]
resamples = 100

[simulate]
protocols = ["xeb-multi", "xeb-single"]
"""


def write(tmp_path: Path, name: str, text: str) -> Path:
    path = tmp_path / name
    path.write_text(text, encoding="utf-8")
    return path


def load(path: Path) -> dict:
    return json.loads(path.read_text(encoding="utf-8"))


# --- config ------------------------------------------------------------------


def test_config_rejects_unknown_key_with_line():
    with pytest.raises(ConfigError, match=r"unknown key 'experiment.colour' \(line 3\)"):
        parse_config("[experiment]\nn = 2\ncolour = 1\n")


def test_config_rejects_wrong_type_with_line():
    with pytest.raises(ConfigError, match=r"line 4"):
        parse_config("seed = 1\n\n[experiment]\nn = 'two'\n")


def test_config_syntax_error():
    with pytest.raises(ConfigError):
        parse_config("[experiment\n")


def test_depth_lists():
    assert depth_list([1, 2, 3]) == (1, 2, 3)
    assert depth_list({"start": 1, "stop": 100, "num": 5}) == (1, 3, 10, 32, 100)
    with pytest.raises(ConfigError):
        depth_list([])
    with pytest.raises(ConfigError):
        depth_list([3, 2])


def test_empty_depth_list_is_a_cli_error(tmp_path, capsys):
    cfg = write(tmp_path, "c.toml", REFERENCE_RUN.replace("[1, 4, 8, 16, 32, 64]", "[]"))
    assert main(["simulate", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 2
    assert "depth list is empty" in capsys.readouterr().err


# --- data files --------------------------------------------------------------


def test_curve_roundtrip_exact(tmp_path):
    rng = np.random.default_rng(0)
    pts = [FidelityPoint(int(m), float(0.99**m + rng.normal(0, 1e-3)), float(rng.uniform(1e-4, 1e-3))) for m in (1, 4, 9, 20, 50, 120)]
    for fmt in ("csv", "json"):
        path = write_curve(tmp_path / "curve", pts, {}, fmt)
        back = read_points(path)
        assert [(p.depth, p.fidelity, p.stderr) for p in back] == [(p.depth, p.fidelity, p.stderr) for p in pts]
        a, b = fit_decay(pts, "exponential"), fit_decay(back, "exponential")
        assert np.allclose(a.params, b.params, atol=1e-12, rtol=0)


def test_points_errors_are_line_numbered(tmp_path):
    bad = write(tmp_path, "bad.csv", "depth,fidelity,stderr\n1,0.99,0.001\n2,oops,0.001\n")
    with pytest.raises(DataFormatError, match="line 3"):
        read_points(bad)
    short = write(tmp_path, "short.csv", "depth,fidelity,stderr\n1,0.99\n")
    with pytest.raises(DataFormatError, match="line 2"):
        read_points(short)
    extra = write(tmp_path, "extra.csv", "depth,fidelity,color\n1,0.99,red\n")
    with pytest.raises(DataFormatError, match="unknown columns"):
        read_points(extra)


def counts_records(n, lam, rng, depths=(4, 8, 12), k=5, shots=None):
    d = 2**n
    for m in depths:
        for c in range(k):
            ideal = rng.dirichlet(np.ones(d))
            meas = lam**m * ideal + (1 - lam**m) / d
            cnt = rng.multinomial(shots, meas) if shots else np.rint(meas * 10**9).astype(np.int64)
            yield m, c, cnt, ideal


def test_counts_roundtrip(tmp_path, rng):
    recs = list(counts_records(2, 1.0, rng))
    write_counts(tmp_path / "counts.csv", recs, 2)
    data = read_counts(tmp_path / "counts.csv")
    assert [dd.depth for dd in data] == [4, 8, 12]
    for dd in data:
        assert dd.estimate() == pytest.approx(1.0, abs=1e-8)


def test_counts_mixed_qubit_numbers_rejected(tmp_path):
    write(tmp_path, "c.csv", "depth,circuit,bitstring,count\n1,0,00,5\n1,0,010,5\n")
    write(tmp_path, "c_ideal.csv", "depth,circuit,bitstring,ideal_prob\n1,0,00,1.0\n")
    with pytest.raises(DataFormatError, match="line 3: mixed qubit counts"):
        read_counts(tmp_path / "c.csv")


def test_counts_missing_ideal_rows(tmp_path):
    write(tmp_path, "c.csv", "depth,circuit,bitstring,count\n1,0,0,5\n1,1,0,5\n")
    write(tmp_path, "c_ideal.csv", "depth,circuit,bitstring,ideal_prob\n1,0,0,1.0\n")
    with pytest.raises(DataFormatError, match="circuit 1"):
        read_counts(tmp_path / "c.csv")


def test_counts_bad_values(tmp_path):
    write(tmp_path, "c.csv", "depth,circuit,bitstring,count\n1,0,0,-5\n")
    write(tmp_path, "c_ideal.csv", "depth,circuit,bitstring,ideal_prob\n1,0,0,1.0\n")
    with pytest.raises(DataFormatError, match="line 2: negative count"):
        read_counts(tmp_path / "c.csv")
    write(tmp_path, "c.csv", "depth,circuit,bitstring,count\n1,0,0x,5\n")
    with pytest.raises(DataFormatError, match="not binary"):
        read_counts(tmp_path / "c.csv")


# --- commands ----------------------------------------------------------------


def test_simulate_writes_curves_and_report(tmp_path):
    cfg = write(tmp_path, "run.toml", REFERENCE_RUN)
    out = tmp_path / "o"
    assert main(["simulate", "--config", str(cfg), "--out", str(out)]) == 0
    header = (out / "curve_xeb-multi.csv").read_text().splitlines()[0]
    assert header == "depth,fidelity,stderr,model_prediction_f_single,model_prediction_exponential,model_prediction_additive"
    report = load(out / "report.json")
    meta = report["metadata"]
    assert meta["seed"] == 5 and len(meta["config_sha256"]) == 64 and meta["formula_versions"]
    fits = report["experiments"]["xeb-single"]["fits"]
    assert set(fits) == {"f_single", "exponential", "additive"}
    for fit in fits.values():
        assert fit["stderr_method"]


def test_simulate_is_byte_identical_and_seed_overrides(tmp_path):
    cfg = write(tmp_path, "run.toml", REFERENCE_RUN)
    for tag in ("a", "b"):
        assert main(["simulate", "--config", str(cfg), "--out", str(tmp_path / tag), "--threads", "2"]) == 0
    for name in ("curve_xeb-multi.csv", "curve_xeb-single.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    main(["simulate", "--config", str(cfg), "--out", str(tmp_path / "c"), "--seed", "99"])
    assert (tmp_path / "c" / "curve_xeb-multi.csv").read_bytes() != (tmp_path / "a" / "curve_xeb-multi.csv").read_bytes()
    assert load(tmp_path / "c" / "report.json")["metadata"]["seed"] == 99


def test_simulate_json_format_roundtrips_through_fit(tmp_path):
    cfg = write(tmp_path, "run.toml", REFERENCE_RUN)
    out = tmp_path / "o"
    assert main(["simulate", "--config", str(cfg), "--out", str(out), "--format", "json"]) == 0
    report = load(out / "report.json")
    assert main(["fit", str(out / "curve_xeb-multi.json"), "--amplitude", "--out", str(tmp_path / "f")]) == 0
    refit = load(tmp_path / "f" / "fit_report.json")["fits"]["exponential"]
    orig = report["experiments"]["xeb-multi"]["fits"]["exponential"]
    assert np.allclose(refit["params"], orig["params"], atol=1e-12, rtol=0)


def test_curve_csv_roundtrips_through_fit(tmp_path):
    cfg = write(tmp_path, "run.toml", REFERENCE_RUN)
    out = tmp_path / "o"
    main(["simulate", "--config", str(cfg), "--out", str(out)])
    orig = load(out / "report.json")["experiments"]["xeb-single"]["fits"]["f_single"]
    assert main(["fit", str(out / "curve_xeb-single.csv"), "--model", "f_single", "--n", "2", "--out", str(tmp_path / "f")]) == 0
    refit = load(tmp_path / "f" / "fit_report.json")["fits"]["f_single"]
    assert np.allclose(refit["params"], orig["params"], atol=1e-12, rtol=0)


def test_fit_prefers_f_single_on_f_single_data(tmp_path):
    depths = [1, 2, 4, 8, 16, 32, 64, 128, 256]
    pts = [FidelityPoint(m, float(f_single((0.994, 0.996), m)), 0.0) for m in depths]
    path = write_curve(tmp_path / "synthetic", pts, {}, "csv")
    argv = ["fit", str(path), "--model", "f_single", "--model", "exponential", "--n", "2", "--out", str(tmp_path)]
    assert main(argv) == 0
    fits = load(tmp_path / "fit_report.json")["fits"]
    assert fits["f_single"]["residual_norm"] < fits["exponential"]["residual_norm"]


def test_fit_applies_single_reference_correction(tmp_path):
    pts = [FidelityPoint(m, 0.97897**m, 0.0) for m in (4, 8, 16, 32, 64)]
    path = write_curve(tmp_path / "int", pts, {}, "csv")
    assert main(["fit", str(path), "--errors", "0.0045,0.003", "--errors-stderr", "1e-4,1e-4", "--out", str(tmp_path)]) == 0
    g = load(tmp_path / "fit_report.json")["gate_fidelity"]
    assert g["p_gate_refined"] == pytest.approx(0.9849, abs=1e-4)
    assert g["p_gate_naive"] == pytest.approx(0.98637, abs=1e-5)
    assert g["naive_minus_refined"] == pytest.approx(0.0015, abs=1e-4)
    assert g["single_qubit_errors"]["provenance"]


def test_fit_counts_with_perfect_measurements(tmp_path, rng):
    write_counts(tmp_path / "counts.csv", list(counts_records(2, 1.0, rng, depths=(4, 8, 12, 16))), 2)
    assert main(["fit", str(tmp_path / "counts.csv"), "--resamples", "100", "--out", str(tmp_path / "o")]) == 0
    rep = load(tmp_path / "o" / "fit_report.json")
    assert rep["input"]["schema"] == "counts"
    for pt in rep["fidelity_curve"]:
        assert pt["fidelity"] == pytest.approx(1.0, abs=1e-8)


def test_fit_counts_with_shot_noise(tmp_path, rng):
    recs = list(counts_records(2, 0.98, rng, depths=(4, 8, 16, 32, 48), k=60, shots=2000))
    write_counts(tmp_path / "run.csv", recs, 2)
    ideal = tmp_path / "ideal.csv"
    (tmp_path / "run_ideal.csv").rename(ideal)
    assert main(["fit", str(tmp_path / "run.csv"), "--ideal", str(ideal), "--out", str(tmp_path / "o")]) == 0
    fit = load(tmp_path / "o" / "fit_report.json")["fits"]["exponential"]
    assert abs(fit["params"][0] - 0.98) < 5 * fit["stderr"][0]
    assert fit["stderr_method"].startswith("bootstrap")


def test_fit_reports_bad_data(tmp_path, capsys):
    bad = write(tmp_path, "bad.csv", "depth,fidelity\n1,0.9\nx,0.8\n")
    assert main(["fit", str(bad), "--out", str(tmp_path)]) == 2
    assert "line 3" in capsys.readouterr().err
    unknown = write(tmp_path, "u.csv", "a,b\n1,2\n")
    assert main(["fit", str(unknown), "--out", str(tmp_path)]) == 2


def test_analyze_data_on_counts_matches_cli(tmp_path, rng):
    recs = list(counts_records(1, 0.99, rng, depths=(4, 8, 16), k=10))
    write_counts(tmp_path / "c.csv", recs, 1)
    pts, fits, errors, _ = analyze_data(read_counts(tmp_path / "c.csv"), [("exponential", {})], 4, 0, rng)
    assert fits["exponential"].p == pytest.approx(0.99, abs=1e-8)
    assert not errors


def test_interleave_zero_noise(tmp_path):
    cfg = write(
        tmp_path,
        "z.toml",
        """\
seed = 1
[experiment]
n = 2
depths = [4, 8, 16]
circuits_per_depth = 5
[noise]
errors = [0.0, 0.0]
[bootstrap]
resamples = 100
[interleave]
target_gate = "CZ"
isolated_depths = [1, 2, 4, 8]
verdict_circuits = 2000
""",
    )
    assert main(["interleave", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 0
    rep = load(tmp_path / "o" / "report.json")
    g = rep["gate_fidelity"]
    assert g["p_gate_refined"] == 1.0 and g["p_gate_naive"] == 1.0
    assert rep["randomization_verdict"]["verdict"] == "multiqubit-like"
    assert rep["randomization_verdict"]["depth"] == 4


def test_interleave_requires_target(tmp_path, capsys):
    cfg = write(tmp_path, "z.toml", "[experiment]\nn = 2\n[noise]\nerrors = [0.0, 0.0]\n")
    assert main(["interleave", "--config", str(cfg), "--out", str(tmp_path)]) == 2
    assert "target_gate" in capsys.readouterr().err


DIST = """\
seed = 3
[distribution]
grid_points = 101
[[distribution.ensembles]]
layer = "haar-1q"
n = 1
depth = 2
num_circuits = 5000
[[distribution.ensembles]]
layer = "clifford-1q"
n = 2
target_gate = "CZ"
num_circuits = 3000
"""


def test_dist_test_tables_and_determinism(tmp_path):
    cfg = write(tmp_path, "d.toml", DIST)
    for tag in ("a", "b"):
        assert main(["dist-test", "--config", str(cfg), "--out", str(tmp_path / tag)]) == 0
    rep = load(tmp_path / "a" / "report.json")
    one, cz = rep["ensembles"]
    # single-qubit factorized and Porter-Thomas references coincide
    assert one["distance_porter_thomas"] < one["thresholds"]["porter_thomas"]
    assert one["distance_factorized"] < one["thresholds"]["factorized"]
    assert cz["verdict"] == "multiqubit-like"
    for name in rep["files"]:
        if name.endswith(".csv"):
            assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
            assert (tmp_path / "a" / name).read_text().startswith("P_x,cdf\n")
    assert (tmp_path / "a" / "analytic_clifford_step_n2.csv").exists()
