"""File formats: model JSON, trajectory CSV, generic JSON output."""
from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from .errors import DomainError
from .lti import StateSpaceModel
from .simulate import Trajectory


def fmt(x: float) -> str:
    """17 significant digits: round-trips every double exactly."""
    return format(float(x), ".17g")


def load_model(path: str | Path) -> StateSpaceModel:
    with open(path) as fh:
        data = json.load(fh)
    if not isinstance(data, dict):
        raise DomainError(f"{path}: model file must hold a JSON object")
    return StateSpaceModel.from_dict(data)


def save_model(model: StateSpaceModel, path: str | Path, **extra) -> None:
    data = model.to_dict()
    data.update(extra)
    write_json(data, path)


def write_json(data, path: str | Path) -> None:
    with open(path, "w") as fh:
        json.dump(_jsonable(data), fh, indent=2)
        fh.write("\n")


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, np.generic):
        return obj.item()
    return obj


def write_trajectory(traj: Trajectory, path: str | Path) -> None:
    header = ["t"] + [f"u_{i + 1}" for i in range(traj.m)] + [f"y_{i + 1}" for i in range(traj.p)]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for t in range(len(traj)):
            w.writerow([t + 1] + [fmt(v) for v in traj.U[t]] + [fmt(v) for v in traj.Y[t]])


def read_trajectory(path: str | Path) -> Trajectory:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise DomainError(f"{path}: empty trajectory file")
    header = rows[0]
    u_cols = [i for i, h in enumerate(header) if h.startswith("u_")]
    y_cols = [i for i, h in enumerate(header) if h.startswith("y_")]
    if not header or header[0] != "t" or not u_cols or not y_cols:
        raise DomainError(f"{path}: header must be t,u_1..u_m,y_1..y_p")
    body = np.array([[float(v) for v in r] for r in rows[1:]], dtype=float)
    if body.size == 0:
        raise DomainError(f"{path}: no data rows")
    return Trajectory(body[:, u_cols], body[:, y_cols])
