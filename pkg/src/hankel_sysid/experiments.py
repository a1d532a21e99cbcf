"""End-to-end pipeline, parameter sweeps and ground-truth reports."""
from __future__ import annotations

import csv
import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np
import yaml

from .errors import ConfigError, DomainError, SysIdError
from .io import fmt, load_model
from .lti import (
    StateSpaceModel, balanced_truncate, delta_plus, hankel_singular_values, hinf_norm,
    noise_to_signal, numerical_rank,
)
from .ols import estimate_hankel
from .realize import aligned_param_error, compare_models, hankel2sys
from .selection import SelectionConfig, SelectionTrace, candidate_set, choose_d, choose_k
from .simulate import (
    NoiseSpec, Trajectory, fixture_example1, fixture_fir, fixture_lowerbound,
    random_stable_model, simulate,
)

log = logging.getLogger(__name__)

SWEEP_COLUMNS = ["T", "seed", "d_hat", "k", "hankel_err", "hinf_err", "param_err", "runtime_ms", "error"]

_SELECTION_KEYS = {f.name for f in fields(SelectionConfig)} - {"p", "m"}
_NOISE_KEYS = {f.name for f in fields(NoiseSpec)}


@dataclass
class ExperimentConfig:
    model: dict
    T_values: list[int] = field(default_factory=lambda: [1000])
    seeds: list[int] = field(default_factory=lambda: [0])
    selection: dict = field(default_factory=dict)
    noise: dict = field(default_factory=dict)
    truth_horizon: int = 200
    output_dir: str = "out"
    base_seed: int = 0
    workers: int = 1
    grid: int = 4096

    def __post_init__(self):
        if not isinstance(self.model, dict) or not ({"file", "fixture"} & set(self.model)):
            raise ConfigError("model must be a mapping with a 'file' or 'fixture' key")
        if isinstance(self.seeds, int):
            self.seeds = list(range(self.seeds))
        if isinstance(self.T_values, int):
            self.T_values = [self.T_values]
        self.T_values = [int(t) for t in self.T_values]
        self.seeds = [int(s) for s in self.seeds]
        if not self.seeds:
            raise ConfigError("seeds must be nonempty")
        if not self.T_values or self.T_values != sorted(self.T_values):
            raise ConfigError("T_values must be a nonempty ascending list")
        bad = set(self.selection) - _SELECTION_KEYS
        if bad:
            raise ConfigError(f"unknown selection keys: {sorted(bad)}")
        bad = set(self.noise) - _NOISE_KEYS
        if bad:
            raise ConfigError(f"unknown noise keys: {sorted(bad)}")
        if self.truth_horizon < 1 or self.workers < 1:
            raise ConfigError("truth_horizon and workers must be positive")

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        if not isinstance(data, dict):
            raise ConfigError("config must be a mapping")
        known = {f.name for f in fields(cls)}
        bad = set(data) - known
        if bad:
            raise ConfigError(f"unknown config keys: {sorted(bad)}")
        try:
            return cls(**data)
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc

    @classmethod
    def load(cls, path: str | Path) -> "ExperimentConfig":
        try:
            with open(path) as fh:
                data = yaml.safe_load(fh)
        except (OSError, yaml.YAMLError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        return cls.from_dict(data or {})

    def to_dict(self) -> dict:
        return asdict(self)

    def dump(self, path: str | Path) -> None:
        with open(path, "w") as fh:
            yaml.safe_dump(self.to_dict(), fh, sort_keys=False)


def build_model(source: dict) -> StateSpaceModel:
    """Instantiate the ``model`` section: a JSON file or a named fixture."""
    source = dict(source)
    if "file" in source:
        return load_model(source["file"])
    name = source.pop("fixture")
    which = source.pop("which", None)
    try:
        if name == "fir":
            return fixture_fir(**source)
        if name == "example1":
            pair = fixture_example1(**source)
            return pair[1 if which in (2, "M2") else 0]
        if name == "lowerbound":
            pair = fixture_lowerbound(**source)
            return pair[0 if which in (0, "M0") else 1]
        if name == "scalar":
            a = source.get("a", 0.5)
            return StateSpaceModel([[source.get("c", 1.0)]], [[a]], [[source.get("b", 1.0)]])
        if name == "random":
            return random_stable_model(**source)
    except TypeError as exc:
        raise ConfigError(f"bad parameters for fixture {name!r}: {exc}") from exc
    raise ConfigError(f"unknown fixture {name!r}")


def selection_config(cfg: ExperimentConfig, model: StateSpaceModel | None,
                     p: int, m: int) -> SelectionConfig:
    """Selection constants, with ``beta`` and ``R`` from the true model unless given.

    Oracle values are floored at 1, the smallest bounds the guarantees allow.
    """
    sel = dict(cfg.selection)
    if "beta" not in sel or "R" not in sel:
        if model is None:
            raise ConfigError("beta and R must be configured when no true model is available")
        beta, R = noise_to_signal(model)
        sel.setdefault("beta", max(beta, 1.0))
        sel.setdefault("R", max(R, 1.0))
    return SelectionConfig(p=p, m=m, **sel)


def cell_seed(base_seed: int, T: int, seed_index: int) -> int:
    """Per-cell seed; independent of which other cells exist."""
    return int(np.random.SeedSequence([base_seed, T, seed_index]).generate_state(1, np.uint64)[0])


def identify(traj: Trajectory, sel: SelectionConfig, T: int | None = None) -> dict:
    """Window choice, Hankel estimate, order choice and realization on one trajectory."""
    T = T or len(traj)
    cache: dict = {}
    d_hat, trace = choose_d(traj, sel, cache, T=T)
    est = cache.get(d_hat) or estimate_hankel(traj, d_hat)
    k, trace = choose_k(est.sigmas, d_hat, sel, T, trace)
    out = {"T": T, "d_hat": d_hat, "k": k, "estimate": est, "trace": trace, "realized": None}
    if k == 0:
        trace.flags.append("no identifiable order")
    else:
        out["realized"] = hankel2sys(est, k)
    return out


def _score(truth: StateSpaceModel, realized, horizon: int, grid: int) -> dict:
    hsv = hankel_singular_values(truth)
    k = realized.k
    truth_k = balanced_truncate(truth, k)
    dist = compare_models(truth_k, realized.model, horizon=horizon, grid=grid)
    if truth_k.n == k:
        param_err = aligned_param_error(truth_k, realized.model, sigmas=hsv[:k])
    else:
        param_err = math.nan  # true Hankel rank below k
    return {"hankel_err": dist.hankel_err, "hinf_err": dist.hinf_err, "param_err": param_err}


def run_identify(cfg: ExperimentConfig, T: int | None = None, seed_index: int | None = None,
                 model: StateSpaceModel | None = None, sel: SelectionConfig | None = None) -> dict:
    """Simulate the configured model, identify it and score against its balanced truncation."""
    start = time.perf_counter()
    T = T if T is not None else cfg.T_values[-1]
    seed_index = seed_index if seed_index is not None else cfg.seeds[0]
    stage = "model"
    try:
        model = model or build_model(cfg.model)
        stage = "config"
        sel = sel or selection_config(cfg, model, model.p, model.m)
        stage = "simulate"
        d_max = candidate_set(sel, T)[-1]
        seed = cell_seed(cfg.base_seed, T, seed_index)
        traj = simulate(model, T + 2 * d_max, NoiseSpec(**cfg.noise), seed=seed)
        stage = "identify"
        res = identify(traj, sel, T=T)
        stage = "score"
        scores = {"hankel_err": math.nan, "hinf_err": math.nan, "param_err": math.nan}
        if res["realized"] is not None:
            scores = _score(model, res["realized"], cfg.truth_horizon, cfg.grid)
    except SysIdError as exc:
        raise type(exc)(f"[{stage}] {exc}") from exc
    trace: SelectionTrace = res["trace"]
    return {
        "T": T, "seed": seed_index, "cell_seed": seed, "d_hat": res["d_hat"], "d0": trace.d0,
        "k": res["k"], **scores,
        "runtime_ms": 1000.0 * (time.perf_counter() - start),
        "beta": sel.beta, "R": sel.R,
        "flags": list(trace.flags),
        "sigmas": res["estimate"].sigmas,
        "realized": res["realized"].to_dict() if res["realized"] is not None else None,
        "trace": trace.to_dict(),
    }


def _cell(args) -> dict:
    cfg, T, seed_index, model, sel = args
    try:
        row = run_identify(cfg, T, seed_index, model=model, sel=sel)
        row["error"] = ""
    except SysIdError as exc:
        row = {"T": T, "seed": seed_index, "d_hat": "", "k": "", "hankel_err": math.nan,
               "hinf_err": math.nan, "param_err": math.nan, "runtime_ms": 0.0, "error": str(exc)}
    return row


def _csv_value(v) -> str:
    if isinstance(v, (float, np.floating)):
        return fmt(v)
    return str(v)


def run_sweep(cfg: ExperimentConfig, out_dir: str | Path | None = None,
              workers: int | None = None) -> Path:
    """One row per ``(T, seed)`` cell, then per-T medians; writes CSV and a gnuplot script."""
    out = Path(out_dir or cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    workers = workers or cfg.workers
    model = build_model(cfg.model)
    sel = selection_config(cfg, model, model.p, model.m)
    cells = [(cfg, T, s, model, sel) for T in cfg.T_values for s in cfg.seeds]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_cell, cells))
    else:
        rows = [_cell(c) for c in cells]

    path = out / "sweep.csv"
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(SWEEP_COLUMNS)
        for r in rows:
            w.writerow([_csv_value(r.get(c, "")) for c in SWEEP_COLUMNS])
        for T in cfg.T_values:
            group = [r for r in rows if r["T"] == T and not r["error"]]
            med = {c: (float(np.median([float(r[c]) for r in group])) if group else math.nan)
                   for c in SWEEP_COLUMNS[2:8]}
            w.writerow([T, "median"] + [_csv_value(med[c]) for c in SWEEP_COLUMNS[2:8]] + [""])
    (out / "sweep.gp").write_text(_gnuplot_script(path.name))
    log.info("wrote %s (%d cells)", path, len(rows))
    return path


def _gnuplot_script(csv_name: str) -> str:
    return f"""# gnuplot script for {csv_name}; run: gnuplot sweep.gp
set datafile separator ","
set terminal pngcairo size 1500,450
set output "sweep.png"
set multiplot layout 1,3
set logscale x
set xlabel "T"
med(c) = (strcol(2) eq "median") ? column(c) : NaN
set title "window d_hat"
plot "{csv_name}" every ::1 using 1:3 with points title "cells", \\
     "" every ::1 using 1:(med(3)) with linespoints title "median"
set title "order k"
plot "{csv_name}" every ::1 using 1:4 with points title "cells", \\
     "" every ::1 using 1:(med(4)) with linespoints title "median"
set logscale y
set title "error vs balanced truncation"
plot "{csv_name}" every ::1 using 1:(med(5)) with linespoints title "hankel", \\
     "" every ::1 using 1:(med(6)) with linespoints title "hinf", \\
     "" every ::1 using 1:(med(7)) with linespoints title "param"
unset multiplot
"""


def run_truth(model: StateSpaceModel, max_order: int = 20, grid: int = 4096) -> dict:
    """System-theoretic facts about a stable model, including truncation errors and bounds."""
    if not model.is_stable:
        raise DomainError(f"truth report needs a stable model, rho(A) = {model.spectral_radius():.6g}")
    hsv = hankel_singular_values(model)
    rank = numerical_rank(hsv)
    beta_toeplitz, R = noise_to_signal(model)
    rows = []
    for r in range(1, min(rank, max_order + 1)):
        reduced = balanced_truncate(model, r)
        rows.append({
            "r": r,
            "hinf_err": hinf_norm(model - reduced, grid),
            "bound": 2.0 * float(np.sum(hsv[r:])),
        })
    return {
        "n": model.n, "p": model.p, "m": model.m,
        "spectral_radius": model.spectral_radius(),
        "hankel_singular_values": hsv,
        "rank": rank,
        "delta_plus": delta_plus(hsv, floor=1e-10 * hsv[0]) if hsv[0] > 0 else 1.0,
        "beta": hinf_norm(model, grid),
        "beta_toeplitz": beta_toeplitz,
        "R": R,
        "truncation": rows,
    }
