"""CSV pattern files, JSON run configs and result files.

Pattern CSV: header ``pattern_id,x,y[,label]`` (``x1..xd`` for d != 2), one
row per point.  Rows sharing a ``pattern_id`` form one pattern; patterns are
ordered by first appearance.  A pattern id with an empty coordinate cell
denotes an empty pattern.
"""

from __future__ import annotations

import csv
import json
import math
from collections import OrderedDict
from pathlib import Path
from typing import Optional, Sequence

import jsonschema
import numpy as np

from .core import LabeledPattern, PointPattern, Window, bounding_window


class ConfigError(ValueError):
    """Malformed input file or configuration."""


class PatternParseError(ConfigError):
    def __init__(self, path, line: int, message: str):
        super().__init__(f"{path}:{line}: {message}")
        self.line = line


def _coord_columns(header: list) -> list:
    rest = header[1:]
    if rest[-1:] == ["label"]:
        rest = rest[:-1]
    if rest == ["x", "y"]:
        return rest
    if rest and rest == [f"x{i + 1}" for i in range(len(rest))]:
        return rest
    raise ValueError(f"expected columns pattern_id,x,y[,label] or pattern_id,x1..xd[,label], got {header}")


def read_pattern_table(path) -> list:
    """Raw records ``(pattern_id, coords (n, d), label)`` in order of first appearance."""
    path = Path(path)
    try:
        fh = path.open(newline="", encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc
    with fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise PatternParseError(path, 1, "missing header")
        header = [h.strip() for h in header]
        if not header or header[0] != "pattern_id":
            raise PatternParseError(path, 1, "first column must be pattern_id")
        try:
            coords = _coord_columns(header)
        except ValueError as exc:
            raise PatternParseError(path, 1, str(exc)) from None
        has_label = header[-1] == "label"
        dim = len(coords)
        groups: "OrderedDict[str, list]" = OrderedDict()
        labels: dict = {}
        for row in reader:
            line = reader.line_num
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(header):
                raise PatternParseError(path, line, f"expected {len(header)} fields, got {len(row)}")
            pid = row[0].strip()
            if not pid:
                raise PatternParseError(path, line, "empty pattern_id")
            label = None
            if has_label and row[-1].strip():
                try:
                    label = int(row[-1])
                except ValueError:
                    raise PatternParseError(path, line, f"label {row[-1]!r} is not an integer") from None
                if label < 0:
                    raise PatternParseError(path, line, f"label {label} is negative")
            if pid in labels and labels[pid] != label:
                raise PatternParseError(path, line, f"inconsistent label for pattern {pid!r}")
            labels[pid] = label
            cells = [c.strip() for c in row[1:1 + dim]]
            pts = groups.setdefault(pid, [])
            if all(not c for c in cells):
                continue
            try:
                values = [float(c) for c in cells]
            except ValueError:
                raise PatternParseError(path, line, f"non-numeric coordinate in {cells}") from None
            if not all(math.isfinite(v) for v in values):
                raise PatternParseError(path, line, f"non-finite coordinate in {cells}")
            pts.append(values)
    return [(pid, np.asarray(pts, dtype=float).reshape(-1, dim), labels[pid]) for pid, pts in groups.items()]


def _build(records, window: Window) -> list:
    out = []
    for pid, pts, label in records:
        try:
            out.append(LabeledPattern(PointPattern(pts, window), label, pid))
        except ValueError as exc:
            raise ConfigError(f"pattern {pid!r}: {exc}") from exc
    return out


def infer_window(*tables, margin: float = 0.01) -> Window:
    pts = [rec[1] for table in tables for rec in table if rec[1].size]
    if not pts:
        raise ConfigError("cannot infer a window: no points in input")
    return bounding_window(np.vstack(pts), margin)


def read_patterns(path, window: Optional[Window] = None) -> list:
    """Labeled patterns from ``path``; the window defaults to the 1%-padded bounding box."""
    table = read_pattern_table(path)
    if not table:
        return []
    return _build(table, window or infer_window(table))


def _fmt(v: float) -> str:
    return repr(float(v))


def write_patterns(path, patterns: Sequence[LabeledPattern]) -> None:
    """Inverse of :func:`read_patterns`; coordinates use shortest round-trip decimals."""
    patterns = list(patterns)
    dim = patterns[0].pattern.window.dim if patterns else 2
    coords = ["x", "y"] if dim == 2 else [f"x{i + 1}" for i in range(dim)]
    has_label = any(lp.label is not None for lp in patterns)
    header = ["pattern_id", *coords] + (["label"] if has_label else [])
    path = Path(path)
    try:
        with path.open("w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            for i, lp in enumerate(patterns):
                pid = lp.pattern_id or str(i)
                tail = [("" if lp.label is None else str(lp.label))] if has_label else []
                if lp.pattern.count == 0:
                    w.writerow([pid, *([""] * dim), *tail])
                for p in lp.pattern.points:
                    w.writerow([pid, *(_fmt(v) for v in p), *tail])
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc}") from exc


def write_grid(path, nodes: np.ndarray, values: np.ndarray) -> None:
    dim = nodes.shape[1]
    coords = ["x", "y"] if dim == 2 else [f"x{i + 1}" for i in range(dim)]
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([*coords, "lambda_hat"])
        for p, v in zip(nodes, values):
            w.writerow([*(_fmt(c) for c in p), _fmt(v)])


def write_result(result, path, csv_path=None) -> None:
    """JSON result plus a long-format ``classifier,replication,error`` CSV.

    ``result`` is an :class:`~ppclass.experiments.ExperimentResult`; its
    invariants are checked before anything is written.
    """
    payload = result.to_dict()
    path = Path(path)
    csv_path = Path(csv_path) if csv_path is not None else path.with_suffix(".csv")
    try:
        path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")
        with csv_path.open("w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["classifier", "replication", "error"])
            for name, rep, v in result.long_rows():
                w.writerow([name, rep, _fmt(v)])
    except OSError as exc:
        raise OSError(f"cannot write result to {path}: {exc}") from exc


def read_result(path):
    from .experiments import ExperimentResult

    return ExperimentResult.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


# Run configuration -----------------------------------------------------------

_NUM = {"type": "number"}
_POS_INT = {"type": "integer", "minimum": 1}
_SIGMA = {"oneOf": [{"const": "cv"}, {"type": "number", "exclusiveMinimum": 0},
                    {"type": "array", "items": {"type": "number", "exclusiveMinimum": 0}, "minItems": 1}]}

RUN_CONFIG_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "mode": {"enum": ["experiment", "sweep_k", "sweep_sigma", "classify"]},
        "scenario": {
            "type": "object",
            "additionalProperties": False,
            "required": ["name"],
            "properties": {"name": {"type": "string"}, "params": {"type": "object", "additionalProperties": _NUM}},
        },
        "window": {
            "type": "object",
            "additionalProperties": False,
            "required": ["lower", "upper"],
            "properties": {"lower": {"type": "array", "items": _NUM}, "upper": {"type": "array", "items": _NUM}},
        },
        "classifiers": {"type": "array", "items": {"type": "string"}},
        "train_per_class": _POS_INT,
        "test_per_class": _POS_INT,
        "replications": _POS_INT,
        "k": {"oneOf": [{"const": "cv"}, _POS_INT]},
        "sigma": _SIGMA,
        "cv": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "folds": {"oneOf": [{"const": "loo"}, {"type": "integer", "minimum": 2}]},
                "k_grid": {"type": "array", "items": _POS_INT, "minItems": 1},
                "sigma_grid": {"type": "array", "items": {"type": "number", "exclusiveMinimum": 0}, "minItems": 1},
                "share_sigma": {"type": "boolean"},
                "seed": {"type": "integer", "minimum": 0},
            },
        },
        "kernel": {"enum": ["gaussian", "uniform"]},
        "grid": _POS_INT,
        "k_list": {"type": "array", "items": _POS_INT, "minItems": 1},
        "sigma_pairs": {
            "type": "array", "minItems": 1,
            "items": {"type": "array", "items": {"type": "number", "exclusiveMinimum": 0}, "minItems": 2, "maxItems": 2},
        },
        "seed": {"type": "integer", "minimum": 0},
        "n_jobs": {"type": "integer"},
        "output": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"json": {"type": "string"}, "csv": {"type": "string"}},
        },
    },
}


def load_config(path) -> dict:
    """Parse and schema-validate a JSON run config; unknown keys are rejected."""
    path = Path(path)
    try:
        cfg = json.loads(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}:{exc.lineno}: invalid JSON: {exc.msg}") from exc
    validate_config(cfg)
    return cfg


def validate_config(cfg) -> None:
    try:
        jsonschema.validate(cfg, RUN_CONFIG_SCHEMA)
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"config error at {where}: {exc.message}") from None


def experiment_spec_from_config(cfg: dict):
    from .crossval import CvConfig
    from .experiments import CLASSIFIERS, ExperimentSpec

    if "scenario" not in cfg:
        raise ConfigError("config needs a scenario")
    try:
        return ExperimentSpec(
            scenario=cfg["scenario"]["name"],
            params=dict(cfg["scenario"].get("params", {})),
            train_per_class=cfg.get("train_per_class", 50),
            test_per_class=cfg.get("test_per_class", 50),
            replications=cfg.get("replications", 100),
            classifiers=tuple(cfg.get("classifiers", CLASSIFIERS)),
            k=cfg.get("k", "cv"),
            sigma=cfg.get("sigma"),
            cv=CvConfig(**cfg.get("cv", {})),
            kernel=cfg.get("kernel", "gaussian"),
            grid=cfg.get("grid", 64),
            seed=cfg.get("seed", 0),
            n_jobs=cfg.get("n_jobs", 1),
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def read_dataset(train_path, test_path, window: Optional[Window] = None) -> tuple:
    """Train and test patterns on one shared window (inferred from both files if not given)."""
    train_t, test_t = read_pattern_table(train_path), read_pattern_table(test_path)
    if not test_t:
        raise ConfigError(f"{test_path}: test file contains no patterns")
    if not train_t:
        raise ConfigError(f"{train_path}: training file contains no patterns")
    for path, table in ((train_path, train_t), (test_path, test_t)):
        unlabeled = [pid for pid, _, label in table if label is None]
        if unlabeled:
            raise ConfigError(f"{path}: pattern {unlabeled[0]!r} has no label")
    window = window or infer_window(train_t, test_t)
    return _build(train_t, window), _build(test_t, window)


def window_from_config(cfg: dict) -> Optional[Window]:
    if "window" not in cfg:
        return None
    try:
        return Window(tuple(cfg["window"]["lower"]), tuple(cfg["window"]["upper"]))
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc

