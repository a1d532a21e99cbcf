"""Command line entry point: ``hankel-sysid <command> [options]``.

Exit codes: 0 success, 2 configuration error, 3 numerical or domain failure.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .errors import ConfigError, SysIdError
from .experiments import (
    ExperimentConfig, build_model, cell_seed, identify, run_identify, run_sweep, run_truth,
    selection_config,
)
from .io import load_model, read_trajectory, write_json, write_trajectory
from .realize import compare_models
from .simulate import NoiseSpec, simulate

EXIT_CONFIG = 2
EXIT_NUMERICAL = 3


def _load_config(args) -> ExperimentConfig:
    if args.config is None:
        raise ConfigError("--config is required for this command")
    cfg = ExperimentConfig.load(args.config)
    overrides = {k: getattr(args, k) for k in ("delta", "kappa", "delta_plus")
                 if getattr(args, k) is not None}
    if overrides:
        cfg.selection = {**cfg.selection, **overrides}
    if args.workers is not None:
        cfg.workers = args.workers
    # re-run validation after overrides
    return ExperimentConfig.from_dict(cfg.to_dict())


def _emit(data, out: str | None) -> None:
    if out:
        write_json(data, out)
    else:
        from .io import _jsonable
        json.dump(_jsonable(data), sys.stdout, indent=2)
        sys.stdout.write("\n")


def cmd_simulate(args) -> None:
    cfg = _load_config(args)
    model = build_model(cfg.model)
    T = args.T or cfg.T_values[-1]
    seed = args.seed if args.seed is not None else cell_seed(cfg.base_seed, T, cfg.seeds[0])
    traj = simulate(model, T, NoiseSpec(**cfg.noise), seed=seed)
    out = args.out or "trajectory.csv"
    write_trajectory(traj, out)
    logging.info("wrote %d samples to %s", T, out)


def cmd_identify(args) -> None:
    cfg = _load_config(args)
    if args.data:
        traj = read_trajectory(args.data)
        model = None
        try:
            model = build_model(cfg.model)
        except (ConfigError, OSError):
            pass
        sel = selection_config(cfg, model, traj.p, traj.m)
        res = identify(traj, sel)
        result = {
            "T": res["T"], "d_hat": res["d_hat"], "k": res["k"],
            "sigmas": res["estimate"].sigmas, "flags": res["trace"].flags,
            "realized": res["realized"].to_dict() if res["realized"] is not None else None,
            "trace": res["trace"].to_dict(),
        }
    else:
        seed_index = args.seed if args.seed is not None else cfg.seeds[0]
        result = run_identify(cfg, args.T, seed_index)
    _emit(result, args.out)


def cmd_sweep(args) -> None:
    cfg = _load_config(args)
    path = run_sweep(cfg, args.out, args.workers)
    print(path)


def cmd_truth(args) -> None:
    if args.model:
        model = load_model(args.model)
    else:
        model = build_model(_load_config(args).model)
    _emit(run_truth(model, max_order=args.max_order), args.out)


def cmd_compare(args) -> None:
    a, b = load_model(args.model_a), load_model(args.model_b)
    dist = compare_models(a, b, horizon=args.horizon)
    _emit({"hankel_err": dist.hankel_err, "hinf_err": dist.hinf_err,
           "impulse_err": dist.impulse_err}, args.out)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="experiment YAML file")
    common.add_argument("--out", help="output path (file or directory)")
    common.add_argument("--seed", type=int, help="seed index (simulate: raw seed)")
    common.add_argument("--workers", type=int, help="parallel worker processes")
    common.add_argument("--delta", type=float, help="failure probability")
    common.add_argument("--kappa", type=float, help="singular value threshold multiplier")
    common.add_argument("--delta-plus", dest="delta_plus", type=float,
                        help="known normalized singular value gap")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="hankel-sysid",
                                     description="Finite-sample LTI system identification.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", parents=[common], help="simulate a trajectory to CSV")
    p.add_argument("--T", type=int, help="number of samples")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("identify", parents=[common], help="choose d and k, realize a model")
    p.add_argument("--T", type=int, help="nominal sample count for a simulated run")
    p.add_argument("--data", help="trajectory CSV to identify instead of simulating")
    p.set_defaults(func=cmd_identify)

    p = sub.add_parser("sweep", parents=[common], help="grid over T and seeds")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("truth", parents=[common], help="report on a true model")
    p.add_argument("--model", help="model JSON (else the config's model)")
    p.add_argument("--max-order", dest="max_order", type=int, default=20)
    p.set_defaults(func=cmd_truth)

    p = sub.add_parser("compare", parents=[common], help="distances between two models")
    p.add_argument("model_a")
    p.add_argument("model_b")
    p.add_argument("--horizon", type=int)
    p.set_defaults(func=cmd_compare)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (SysIdError, ArithmeticError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except OSError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return 0


if __name__ == "__main__":
    sys.exit(main())
