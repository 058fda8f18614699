"""File formats: dataset CSV, JSON weight files, simulation-log CSV.

Weight files are JSON with named layers, each holding its shape and a
flat row-major weight array, plus architecture metadata and a hash of
the training config. Condition indices are 1-based on disk (ascending
morph ratio) and 0-based in memory.
"""

import csv
import dataclasses
import hashlib
import json

import numpy as np

from .classifier import ClassifierNet
from .data import Dataset
from .errors import ConfigError
from .meta import PhiNet
from .nets import Mlp
from .sim import SimLog
from .vehicle import STATE_NAMES

DATASET_COLUMNS = (["t"] + list(STATE_NAMES) + ["delta_e", "delta_t"]
                   + [f"y_{n}" for n in STATE_NAMES] + ["xi_true", "condition_index"])


def write_dataset(data, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(DATASET_COLUMNS)
        for i in range(len(data)):
            w.writerow([repr(float(data.t[i]))] + [repr(float(v)) for v in data.X[i]]
                       + [repr(float(v)) for v in data.U[i]] + [repr(float(v)) for v in data.Y[i]]
                       + [repr(float(data.xi[i])), int(data.k[i]) + 1])


def read_dataset(path):
    try:
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader)
            rows = np.array([[float(v) for v in row] for row in reader])
    except (OSError, StopIteration, ValueError) as exc:
        raise ConfigError(f"cannot read dataset {path}: {exc}") from exc
    if header != DATASET_COLUMNS:
        raise ConfigError(f"unexpected dataset columns in {path}")
    return Dataset(rows[:, 0], rows[:, 1:6], rows[:, 6:8], rows[:, 8:13], rows[:, 13],
                   rows[:, 14].astype(int) - 1)


def config_hash(cfg):
    """Short sha256 of a dataclass config."""
    d = dataclasses.asdict(cfg)
    blob = json.dumps(d, sort_keys=True, default=lambda v: np.asarray(v).tolist())
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


def _dump(obj, path):
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=1)


def _load(path, kind):
    try:
        with open(path) as fh:
            obj = json.load(fh)
    except (OSError, ValueError) as exc:
        raise ConfigError(f"cannot read weight file {path}: {exc}") from exc
    if obj.get("kind") != kind:
        raise ConfigError(f"{path} holds {obj.get('kind')!r} weights, expected {kind!r}")
    return obj


def save_phi(phi_net, path, cfg=None, coefficients=None, disc=None):
    """Feature network, optional per-condition coefficients and discriminator."""
    obj = {"kind": "phi", "network": phi_net.mlp.to_dict(), "x_scale": phi_net.x_scale.tolist(),
           "m": phi_net.m, "config_hash": config_hash(cfg) if cfg is not None else None}
    if coefficients is not None:
        obj["coefficients"] = np.asarray(coefficients).tolist()
    if disc is not None:
        obj["discriminator"] = disc.to_dict()
    _dump(obj, path)


def load_phi(path):
    """Return ``(phi_net, coefficients or None)``."""
    obj = _load(path, "phi")
    phi = PhiNet(Mlp.from_dict(obj["network"]), np.asarray(obj["x_scale"], dtype=float))
    coeffs = np.asarray(obj["coefficients"], dtype=float) if "coefficients" in obj else None
    return phi, coeffs


def save_classifier(net, path, cfg=None):
    _dump({"kind": "classifier", "network": net.mlp.to_dict(), "mean": net.mean.tolist(),
           "std": net.std.tolist(), "config_hash": config_hash(cfg) if cfg is not None else None}, path)


def load_classifier(path):
    obj = _load(path, "classifier")
    return ClassifierNet(Mlp.from_dict(obj["network"]), np.asarray(obj["mean"], dtype=float),
                         np.asarray(obj["std"], dtype=float))


def read_log(path, x_e):
    """Inverse of `SimLog.to_csv`; the morph coefficient vector is not stored."""
    try:
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader)
            rows = np.array([[float(v) for v in row] for row in reader])
    except (OSError, StopIteration, ValueError) as exc:
        raise ConfigError(f"cannot read log {path}: {exc}") from exc
    col = {name: rows[:, i] for i, name in enumerate(header)}
    try:
        return SimLog(
            t=col["t"], x_n=np.column_stack([col[n] for n in STATE_NAMES]),
            u_n=np.column_stack([col["delta_e"], col["delta_t"]]),
            u_cmd=np.column_stack([col["delta_e_cmd"], col["delta_t_cmd"]]),
            xi_cmd=col["xi_cmd"], xi_plant=col["xi_plant"], j_u=col["j_u"], j_a=col["j_a"],
            iterations=col["iterations"], res_u=col["res_u"], res_a=col["res_a"],
            wall_time=col["wall_time"], x_e=np.asarray(x_e, dtype=float),
        )
    except KeyError as exc:
        raise ConfigError(f"log {path} lacks column {exc}") from exc
