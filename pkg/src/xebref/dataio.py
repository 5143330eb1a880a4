"""Plain-text data files: curve tables, fidelity points, raw counts, JSON reports."""

from __future__ import annotations

import csv
import json
import math
from collections import defaultdict
from dataclasses import asdict, is_dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .protocols import DepthData
from .xeb import FidelityPoint, overlap_arrays

CURVE_COLUMNS = (
    "depth",
    "fidelity",
    "stderr",
    "model_prediction_f_single",
    "model_prediction_exponential",
    "model_prediction_additive",
)
COUNTS_COLUMNS = ("depth", "circuit", "bitstring", "count")
IDEAL_COLUMNS = ("depth", "circuit", "bitstring", "ideal_prob")


class DataFormatError(ValueError):
    pass


def _fmt(x) -> str:
    if x is None or (isinstance(x, float) and math.isnan(x)):
        return ""
    if isinstance(x, str):
        return x
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return repr(float(x))


def _write_csv(path: Path, header: Sequence[str], rows: Iterable[Sequence]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])


def write_curve(path: Path, points: Sequence[FidelityPoint], predictions: dict[str, np.ndarray], fmt: str = "csv") -> Path:
    cols = {k: predictions.get(k, [None] * len(points)) for k in ("f_single", "exponential", "additive")}
    rows = [
        (pt.depth, pt.fidelity, pt.stderr, cols["f_single"][i], cols["exponential"][i], cols["additive"][i])
        for i, pt in enumerate(points)
    ]
    if fmt == "json":
        path = path.with_suffix(".json")
        doc = [dict(zip(CURVE_COLUMNS, r)) for r in rows]
        path.write_text(dumps({"columns": list(CURVE_COLUMNS), "rows": doc}), encoding="utf-8")
        return path
    path = path.with_suffix(".csv")
    _write_csv(path, CURVE_COLUMNS, rows)
    return path


def write_table(path: Path, header: Sequence[str], rows: Iterable[Sequence]) -> Path:
    _write_csv(path, header, rows)
    return path


def _float(text: str, line: int, col: str, optional: bool = False):
    if text.strip() == "" and optional:
        return None
    try:
        return float(text)
    except ValueError:
        raise DataFormatError(f"line {line}: column {col!r} is not a number: {text!r}") from None


def _int(text: str, line: int, col: str) -> int:
    try:
        return int(text)
    except ValueError:
        raise DataFormatError(f"line {line}: column {col!r} is not an integer: {text!r}") from None


def read_points(path: str | Path) -> list[FidelityPoint]:
    """Fidelity points from a CSV (``depth,fidelity[,stderr]``, extra model columns ignored) or JSON curve."""
    path = Path(path)
    if path.suffix == ".json":
        doc = json.loads(path.read_text(encoding="utf-8"))
        rows = doc["rows"] if isinstance(doc, dict) else doc
        return [
            FidelityPoint(int(r["depth"]), float(r["fidelity"]), None if r.get("stderr") is None else float(r["stderr"]))
            for r in rows
        ]
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or header[:2] != ["depth", "fidelity"]:
            raise DataFormatError(f"line 1: expected header starting with 'depth,fidelity', got {header}")
        allowed = set(CURVE_COLUMNS) | {"num_circuits"}
        extra = [h for h in header if h not in allowed]
        if extra:
            raise DataFormatError(f"line 1: unknown columns {extra}")
        has_se = "stderr" in header
        points = []
        for line, row in enumerate(reader, 2):
            if not row:
                continue
            if len(row) != len(header):
                raise DataFormatError(f"line {line}: expected {len(header)} fields, got {len(row)}")
            rec = dict(zip(header, row))
            points.append(
                FidelityPoint(
                    _int(rec["depth"], line, "depth"),
                    _float(rec["fidelity"], line, "fidelity"),
                    _float(rec["stderr"], line, "stderr", optional=True) if has_se else None,
                )
            )
    return points


def _read_keyed(path: Path, columns: Sequence[str], value_col: str, as_int: bool):
    out: dict[tuple[int, int], dict[str, float]] = defaultdict(dict)
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(header) != tuple(columns):
            raise DataFormatError(f"{path.name} line 1: expected header {','.join(columns)}, got {header}")
        width = None
        for line, row in enumerate(reader, 2):
            if not row:
                continue
            if len(row) != len(columns):
                raise DataFormatError(f"{path.name} line {line}: expected {len(columns)} fields, got {len(row)}")
            depth, circ, bits, val = row
            if not bits or set(bits) - {"0", "1"}:
                raise DataFormatError(f"{path.name} line {line}: bitstring {bits!r} is not binary")
            if width is None:
                width = len(bits)
            elif len(bits) != width:
                raise DataFormatError(f"{path.name} line {line}: mixed qubit counts ({len(bits)} vs {width})")
            v = _int(val, line, value_col) if as_int else _float(val, line, value_col)
            if v < 0:
                raise DataFormatError(f"{path.name} line {line}: negative {value_col}")
            out[(_int(depth, line, "depth"), _int(circ, line, "circuit"))][bits] = v
    return out, width


def read_counts(counts_path: str | Path, ideal_path: str | Path | None = None) -> list[DepthData]:
    """Per-circuit XEB overlaps from measured counts and companion ideal probabilities.

    Without ``ideal_path`` the sibling file ``<stem>_ideal.csv`` is used.
    """
    counts_path = Path(counts_path)
    ideal_path = Path(ideal_path) if ideal_path else counts_path.with_name(counts_path.stem + "_ideal.csv")
    counts, n_c = _read_keyed(counts_path, COUNTS_COLUMNS, "count", True)
    ideal, n_i = _read_keyed(ideal_path, IDEAL_COLUMNS, "ideal_prob", False)
    if n_c != n_i:
        raise DataFormatError(f"counts use {n_c} qubits but ideal probabilities use {n_i}")
    n = n_c
    d = 2**n
    by_depth: dict[int, list[tuple[np.ndarray, np.ndarray]]] = defaultdict(list)
    for key in sorted(counts):
        if key not in ideal:
            raise DataFormatError(f"no ideal probabilities for depth {key[0]}, circuit {key[1]}")
        meas = np.zeros(d)
        ide = np.zeros(d)
        for bits, c in counts[key].items():
            meas[int(bits, 2)] = c
        for bits, p in ideal[key].items():
            ide[int(bits, 2)] = p
        if meas.sum() <= 0:
            raise DataFormatError(f"depth {key[0]}, circuit {key[1]} has no counts")
        if abs(ide.sum() - 1.0) > 1e-6:
            raise DataFormatError(f"ideal probabilities of depth {key[0]}, circuit {key[1]} sum to {ide.sum():.9g}")
        by_depth[key[0]].append((ide / ide.sum(), meas / meas.sum()))
    data = []
    for depth in sorted(by_depth):
        ide = np.array([a for a, _ in by_depth[depth]])
        meas = np.array([b for _, b in by_depth[depth]])
        m_u, e_u, u_u = overlap_arrays(ide, meas)
        data.append(DepthData(depth, m_u, e_u, u_u, d=d))
    return data


def write_counts(path: Path, records: Iterable[tuple[int, int, np.ndarray, np.ndarray]], n: int) -> tuple[Path, Path]:
    """Write ``(depth, circuit, counts, ideal)`` tuples as a counts file and its ideal sibling."""
    path = Path(path)
    ideal_path = path.with_name(path.stem + "_ideal.csv")
    rows_c, rows_i = [], []
    for depth, circ, cnt, ide in records:
        for x in range(2**n):
            bits = format(x, f"0{n}b")
            rows_c.append((depth, circ, bits, int(cnt[x])))
            rows_i.append((depth, circ, bits, float(ide[x])))
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(COUNTS_COLUMNS)
        w.writerows((a, b, c, str(v)) for a, b, c, v in rows_c)
    _write_csv(ideal_path, IDEAL_COLUMNS, ((a, b, c, v) for a, b, c, v in rows_i))
    return path, ideal_path


def to_jsonable(obj):
    if is_dataclass(obj) and not isinstance(obj, type):
        return {k: to_jsonable(v) for k, v in asdict(obj).items()}
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return to_jsonable(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        return None if math.isnan(x) or math.isinf(x) else x
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    return obj


def dumps(obj) -> str:
    return json.dumps(to_jsonable(obj), indent=2, sort_keys=True) + "\n"
