"""Command-line entry point: ``penn <subcommand> ...``.

Every subcommand that takes a configuration accepts ``--config FILE`` (flat
``key = value`` lines) plus ``--set key=value`` overrides; dedicated flags
such as ``--model`` are shorthands for the same keys. Outputs go to
``--out-dir``, defaulting to $PENN_OUTPUT_DIR or ./penn-output.
"""
from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import sys
from pathlib import Path

from . import config as kv
from .checkpoint import load_checkpoint, save_checkpoint
from .dataset import load_csv, write_csv
from .errors import ContractError, DivergenceError, ParameterError, PolicyError, SchemaError, StatsError
from .experiments import RUNNERS, ExperimentConfig, bench_timing, hardware_description
from .harness import TrainConfig, default_output_dir, evaluate, inference_latency, train, write_metrics_csv
from .networks import MODEL_KINDS, build_network
from .synth import SyntheticGenConfig, synth_generate

log = logging.getLogger("penn")


class UsageError(Exception):
    pass


def _gather(cls, args, flag_keys, base=None):
    values = kv.read_kv(args.config) if getattr(args, "config", None) else {}
    for key in flag_keys:
        value = getattr(args, key, None)
        if value is not None:
            values[key] = str(value)
    values.update(kv.parse_overrides(getattr(args, "set", None)))
    try:
        return kv.build(cls, values, base)
    except kv.ConfigError as exc:
        raise UsageError(str(exc)) from None


def _out_dir(args) -> Path:
    return Path(args.out_dir) if args.out_dir else default_output_dir()


def cmd_gen_data(args) -> int:
    cfg = _gather(SyntheticGenConfig, args, ["regime", "count", "seed", "noise_sd"])
    ds = synth_generate(cfg)
    out = Path(args.out) if args.out else _out_dir(args) / f"synthetic_{cfg.regime}_{cfg.count}_s{cfg.seed}.csv"
    write_csv(ds, out)
    zero = int((ds.Y[:, 1] == 0).sum())
    print(f"wrote {len(ds)} samples ({zero} with zero specific impulse) to {out}")
    return 0


TRAIN_FLAGS = ["model", "width_multiplier", "target", "loss", "epochs", "batch_size", "seed", "data_path",
               "regime", "count", "subsample"]


def cmd_train(args) -> int:
    cfg = _gather(TrainConfig, args, TRAIN_FLAGS)
    try:
        cfg.validate()
    except kv.ConfigError as exc:
        raise UsageError(str(exc)) from None
    est, report = train(cfg)
    out = _out_dir(args)
    stem = f"{cfg.model}_{cfg.target}_s{cfg.seed}"
    ckpt = save_checkpoint(est, out / f"{stem}.ckpt")
    metrics = write_metrics_csv(report, out / f"{stem}_metrics.csv")
    (out / f"{stem}_report.json").write_text(json.dumps(report.to_dict(), indent=2, default=str), encoding="utf-8")
    print(f"{report.model_name} ({report.n_params} params) target={cfg.target} loss={cfg.loss}")
    print(f"  train/val/test sizes: {report.n_train}/{report.n_val}/{report.n_test}")
    print(f"  best epoch {report.best_epoch}, val MAPE {report.val_mape:.4f}%, test MAPE {report.test_mape[cfg.target]:.4f}%")
    print(f"  training {report.train_seconds:.2f}s, inference {report.inference_seconds * 1e6:.1f}us/sample")
    print(f"  checkpoint {ckpt}\n  metrics {metrics}")
    return 0


def cmd_eval(args) -> int:
    est = load_checkpoint(args.checkpoint)
    ds = load_csv(args.data)
    result = evaluate(est, ds, args.target)
    print(f"{est.network_.name} target={result['target']} n={result['n']} MAPE={result['mape']:.6f}%")
    return 0


def cmd_count_params(args) -> int:
    print(build_network(args.model, args.width_multiplier).n_params)
    return 0


EXPERIMENT_FLAGS = ["epochs", "hs_count", "ls_count"]


def cmd_experiment(args) -> int:
    cfg = _gather(ExperimentConfig, args, EXPERIMENT_FLAGS)
    result = RUNNERS[args.name](cfg)
    paths = result.write(_out_dir(args))
    print(result.summary())
    for p in paths:
        print(f"wrote {p}")
    return 0


def cmd_bench(args) -> int:
    out = _out_dir(args)
    if args.checkpoint:
        est = load_checkpoint(args.checkpoint)
        ds = load_csv(args.data)
        latency = inference_latency(est, ds.X, args.passes)
        print(f"{est.network_.name}: {latency * 1e6:.2f} us per single-sample inference ({args.passes} passes)")
        print(f"hardware: {hardware_description()}")
        return 0
    cfg = _gather(ExperimentConfig, args, EXPERIMENT_FLAGS)
    cfg = dataclasses.replace(cfg, timing_passes=args.passes)
    result = bench_timing(cfg)
    paths = result.write(out)
    print(result.summary())
    print(f"hardware: {result.meta['hardware']}")
    for p in paths:
        print(f"wrote {p}")
    return 0


def _common(p: argparse.ArgumentParser, with_config=True) -> None:
    if with_config:
        p.add_argument("--config", help="flat key = value configuration file")
        p.add_argument("--set", action="append", metavar="KEY=VALUE", help="override one configuration key")
    p.add_argument("--out-dir", help="output directory (default $PENN_OUTPUT_DIR or ./penn-output)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="penn", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-data", help="write a synthetic dataset CSV",
                       epilog="config keys:\n" + kv.describe(SyntheticGenConfig),
                       formatter_class=argparse.RawDescriptionHelpFormatter)
    _common(p)
    p.add_argument("--regime", choices=["hs", "ls"])
    p.add_argument("--count", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--noise-sd", dest="noise_sd", type=float)
    p.add_argument("--out", help="output CSV path")
    p.set_defaults(func=cmd_gen_data)

    p = sub.add_parser("train", help="train one model on one target",
                       epilog="config keys:\n" + kv.describe(TrainConfig),
                       formatter_class=argparse.RawDescriptionHelpFormatter)
    _common(p)
    p.add_argument("--model", choices=MODEL_KINDS)
    p.add_argument("--width-multiplier", dest="width_multiplier", type=float)
    p.add_argument("--target", choices=["thrust", "impulse"])
    p.add_argument("--loss", choices=["mse", "mae", "mare"])
    p.add_argument("--epochs", type=int)
    p.add_argument("--batch-size", dest="batch_size", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--data", dest="data_path", help="dataset CSV")
    p.add_argument("--regime", choices=["hs", "ls"], help="generate synthetic data of this regime")
    p.add_argument("--count", type=int, help="synthetic sample count")
    p.add_argument("--subsample", type=float)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a checkpoint on a dataset CSV")
    _common(p, with_config=False)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--target", choices=["thrust", "impulse"])
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("count-params", help="print the parameter count of a model")
    p.add_argument("--model", required=True, choices=MODEL_KINDS)
    p.add_argument("--width-multiplier", dest="width_multiplier", type=float, default=1.0)
    p.set_defaults(func=cmd_count_params)

    p = sub.add_parser("experiment", help="run one experiment grid",
                       epilog="config keys:\n" + kv.describe(ExperimentConfig),
                       formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("name", choices=sorted(RUNNERS))
    _common(p)
    p.add_argument("--epochs", type=int)
    p.add_argument("--hs-count", dest="hs_count", type=int)
    p.add_argument("--ls-count", dest="ls_count", type=int)
    p.set_defaults(func=cmd_experiment)

    p = sub.add_parser("bench", help="inference latency of a checkpoint, or the family timing table")
    _common(p)
    p.add_argument("--checkpoint")
    p.add_argument("--data", help="dataset CSV (with --checkpoint)")
    p.add_argument("--passes", type=int, default=10_000)
    p.add_argument("--epochs", type=int)
    p.add_argument("--hs-count", dest="hs_count", type=int)
    p.add_argument("--ls-count", dest="ls_count", type=int)
    p.set_defaults(func=cmd_bench)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.command == "bench" and args.checkpoint and not args.data:
        parser.error("bench --checkpoint needs --data")
    try:
        return args.func(args)
    except UsageError as exc:
        parser.error(str(exc))
    except (ContractError, DivergenceError, ParameterError, PolicyError, SchemaError, StatsError,
            kv.ConfigError, OSError) as exc:
        print(f"penn: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
