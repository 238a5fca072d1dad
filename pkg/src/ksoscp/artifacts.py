"""CSV and JSON persistence for datasets, fitted models and calibrations.

Floats are written with ``repr``, the shortest text that parses back to the
same double, so every file round-trips exactly.
"""

from __future__ import annotations

import csv
import json
import os

import numpy as np

from .conformal import CalibratedModel, ConstantScale
from .datasets import Dataset
from .dual import KsosModel
from .exceptions import ConfigError
from .gp import GpModel

__all__ = [
    "fmt",
    "write_csv",
    "write_dataset",
    "read_dataset",
    "write_json",
    "read_json",
    "model_artifact",
    "load_model_artifact",
    "calibrated_artifact",
    "load_calibrated",
]

MODEL_FORMAT = "ksoscp-model/1"
CALIBRATED_FORMAT = "ksoscp-calibrated/1"


def fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return "" if v is None else str(v)


def write_csv(path, header, rows):
    _ensure_dir(path)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(v) for v in row])


def _ensure_dir(path):
    d = os.path.dirname(os.fspath(path))
    if d:
        os.makedirs(d, exist_ok=True)


def write_dataset(path, data):
    """Columns ``x_1 .. x_d, y``."""
    header = [f"x_{j + 1}" for j in range(data.d)] + ["y"]
    write_csv(path, header, (list(x) + [y] for x, y in zip(data.X, data.Y)))


def read_dataset(path):
    try:
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise ConfigError(f"cannot read dataset {path}: {exc}") from exc
    if not rows:
        raise ConfigError(f"{path}: empty file")
    header = rows[0]
    if not header or header[-1] != "y" or not all(h.startswith("x_") for h in header[:-1]):
        raise ConfigError(f"{path}: expected columns x_1..x_d,y, got {header}")
    try:
        arr = np.array([[float(v) for v in r] for r in rows[1:]], dtype=float)
    except ValueError as exc:
        raise ConfigError(f"{path}: non-numeric entry ({exc})") from exc
    arr = arr.reshape(-1, len(header))
    return Dataset(arr[:, :-1], arr[:, -1], {"source": os.fspath(path)})


def write_json(path, obj):
    _ensure_dir(path)
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=1)
        fh.write("\n")


def read_json(path):
    try:
        with open(path) as fh:
            return json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: malformed JSON ({exc})") from exc


def model_artifact(model, gp, theta_f, config=None):
    return {"format": MODEL_FORMAT, "theta_f": list(theta_f), "model": model.to_dict(),
            "gp": gp.to_dict(), "config": config}


def load_model_artifact(obj):
    """``(KsosModel, GpModel, theta_f)`` from a dict or a JSON path."""
    if not isinstance(obj, dict):
        obj = read_json(obj)
    if obj.get("format") != MODEL_FORMAT:
        raise ConfigError(f"not a model artifact (format={obj.get('format')!r})")
    return (KsosModel.from_dict(obj["model"]), GpModel.from_dict(obj["gp"]),
            tuple(obj["theta_f"]))


def calibrated_artifact(cal, method, model_obj, config=None):
    return {"format": CALIBRATED_FORMAT, "method": method, "q_hat": cal.q_hat,
            "alpha_level": cal.alpha_level, "calib_size": cal.calib_size,
            "score_kind": cal.score_kind, "model_artifact": model_obj, "config": config}


def load_calibrated(obj):
    """``(CalibratedModel, method, model_artifact_dict)``."""
    if not isinstance(obj, dict):
        obj = read_json(obj)
    if obj.get("format") != CALIBRATED_FORMAT:
        raise ConfigError(f"not a calibrated artifact (format={obj.get('format')!r})")
    model, gp, _ = load_model_artifact(obj["model_artifact"])
    method = obj["method"]
    if method == "ksos":
        base = model
    elif method == "gp":
        base = ConstantScale(gp)
    else:
        raise ConfigError(f"unknown method {method!r}")
    cal = CalibratedModel(base, float(obj["q_hat"]), float(obj["alpha_level"]),
                          int(obj["calib_size"]), obj["score_kind"])
    return cal, method, obj["model_artifact"]
