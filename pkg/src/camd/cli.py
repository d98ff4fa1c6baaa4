"""Single `camd` executable: gen / train / eval / ablate / gradcheck.

Exit codes: 0 success, 1 runtime failure, 2 usage or config error.
Every run writes a resolved-config snapshot beside its outputs so the
artifact is reproducible from the output directory alone.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from .checks import run_battery
from .model import (
    CamdModel,
    CheckpointFormatError,
    ModelConfig,
    VARIANTS,
    count_params,
    estimate_flops,
    load_checkpoint,
    save_checkpoint,
)
from .model.config import ConfigError
from .sigsynth import (
    DatasetFormatError,
    DatasetSpec,
    ModulationError,
    generate_dataset,
    known_class_names,
    read_dataset,
    write_dataset,
)
from .traineval import (
    SplitSpec,
    TrainHyper,
    emit_csv,
    evaluate,
    split_dataset,
    train,
    write_train_log,
)

USAGE_ERROR = 2
RUNTIME_ERROR = 1

# flat dotted-key config schema: key -> (type, default)
CONFIG_SCHEMA = {
    "model.C": (int, 64),
    "model.C_cc": (int, 32),
    "model.heads": (int, 4),
    "model.ffn_mult": (int, 2),
    "model.kernel": (int, 3),
    "model.K_c": (int, 2),
    "model.K_t": (int, 2),
    "model.K_l": (int, 2),
    "model.variant": (str, "full"),
    "train.lr": (float, 2e-3),
    "train.wd": (float, 1e-3),
    "train.batch": (int, 512),
    "train.epochs": (int, 50),
    "train.seed": (int, 0),
    "split.seed": (int, 0),
    "eval.low_snr_db": (float, -4.0),
}


class CliConfigError(Exception):
    pass


def _parse_value(key: str, raw: str):
    if key not in CONFIG_SCHEMA:
        raise CliConfigError(f"unknown config key {key!r}")
    typ = CONFIG_SCHEMA[key][0]
    try:
        return typ(raw)
    except ValueError:
        raise CliConfigError(f"config key {key!r}: cannot parse {raw!r} as {typ.__name__}")


def load_run_config(config_path: str | None, overrides: list[str]) -> dict:
    cfg = {k: default for k, (_, default) in CONFIG_SCHEMA.items()}
    if config_path:
        for lineno, line in enumerate(Path(config_path).read_text().splitlines(), 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise CliConfigError(f"{config_path}:{lineno}: expected 'key = value'")
            key, raw = (part.strip() for part in line.split("=", 1))
            cfg[key] = _parse_value(key, raw)
    for item in overrides:
        if "=" not in item:
            raise CliConfigError(f"--set expects key=value, got {item!r}")
        key, raw = (part.strip() for part in item.split("=", 1))
        cfg[key] = _parse_value(key, raw)
    return cfg


def model_config_from_run(cfg: dict, num_classes: int, nt: int, nr: int,
                          length: int) -> ModelConfig:
    return ModelConfig(
        num_classes=num_classes, nt=nt, nr=nr, length=length,
        channels=cfg["model.C"], cc_channels=cfg["model.C_cc"],
        heads=cfg["model.heads"], ffn_mult=cfg["model.ffn_mult"],
        kernel=cfg["model.kernel"], conv_layers=cfg["model.K_c"],
        attn_layers=cfg["model.K_t"], lstm_layers=cfg["model.K_l"],
        variant=cfg["model.variant"])


def hyper_from_run(cfg: dict) -> TrainHyper:
    return TrainHyper(lr=cfg["train.lr"], weight_decay=cfg["train.wd"],
                      batch_size=cfg["train.batch"], epochs=cfg["train.epochs"],
                      seed=cfg["train.seed"])


def _snapshot(cfg: dict, out_dir: Path, extra: dict | None = None):
    out_dir.mkdir(parents=True, exist_ok=True)
    resolved = dict(sorted(cfg.items()))
    if extra:
        resolved.update(extra)
    (out_dir / "resolved_config.json").write_text(json.dumps(resolved, indent=2) + "\n")


def parse_snr_list(text: str) -> list[float]:
    """Either 'a:step:b' (inclusive) or a comma-separated list."""
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise CliConfigError(f"SNR range must be start:step:stop, got {text!r}")
        start, step, stop = (float(p) for p in parts)
        if step <= 0:
            raise CliConfigError("SNR range step must be positive")
        n = int(round((stop - start) / step)) + 1
        return [start + i * step for i in range(n) if start + i * step <= stop + 1e-9]
    return [float(p) for p in text.split(",") if p.strip()]


def cmd_gen(args) -> int:
    classes = [c.strip().lower() for c in args.classes.split(",") if c.strip()]
    if not classes or classes == ["none"]:
        raise CliConfigError(
            f"no modulation classes given; known: {', '.join(known_class_names())}")
    spec = DatasetSpec(classes=classes, nt=args.nt, nr=args.nr, length=args.length,
                       snr_dbs=parse_snr_list(args.snr), frames_per_stratum=args.frames,
                       seed=args.seed, include_clean=args.clean, drift=args.drift)
    d = generate_dataset(spec)
    write_dataset(d, args.out)
    print(f"wrote {d.num_frames} frames ({len(classes)} classes x "
          f"{len(spec.snr_dbs)} SNRs x {args.frames}) to {args.out}")
    return 0


def _load_and_split(data_path: str, cfg: dict):
    d = read_dataset(data_path)
    splits = split_dataset(d, SplitSpec(seed=cfg["split.seed"]))
    return d, splits


def cmd_train(args) -> int:
    cfg = load_run_config(args.config, args.set or [])
    d, (train_idx, val_idx, test_idx) = _load_and_split(args.data, cfg)
    mcfg = model_config_from_run(cfg, len(d.class_names), d.nt, d.nr, d.length)
    model = CamdModel(mcfg, seed=cfg["train.seed"])
    log = train(model, d, train_idx, val_idx, hyper_from_run(cfg))
    out = Path(args.out)
    _snapshot(cfg, out, {"data": str(args.data), "model.num_classes": mcfg.num_classes,
                         "model.Nt": mcfg.nt, "model.Nr": mcfg.nr, "model.L": mcfg.length})
    save_checkpoint(model, out / "model.cmdw")
    write_train_log(log, out / "train_log.jsonl")
    report = evaluate(model, d, test_idx, low_snr_db=cfg["eval.low_snr_db"])
    emit_csv(report, out)
    print(f"best val acc {log.best_val_accuracy:.4f} (epoch {log.best_epoch}); "
          f"test avg acc {report.avg_accuracy:.4f}; checkpoint at {out / 'model.cmdw'}")
    return 0


def cmd_eval(args) -> int:
    cfg = load_run_config(args.config, args.set or [])
    model = load_checkpoint(args.model)
    d = read_dataset(args.data)
    if args.split == "all":
        indices = np.arange(d.num_frames)
    else:
        splits = dict(zip(("train", "val", "test"),
                          split_dataset(d, SplitSpec(seed=cfg["split.seed"]))))
        indices = splits[args.split]
    report = evaluate(model, d, indices, low_snr_db=cfg["eval.low_snr_db"])
    out = Path(args.out)
    _snapshot(cfg, out, {"data": str(args.data), "model": str(args.model),
                         "split": args.split})
    emit_csv(report, out)
    low = "n/a" if report.low_snr_accuracy is None else f"{report.low_snr_accuracy:.4f}"
    print(f"avg {report.avg_accuracy:.4f}  max {report.max_accuracy:.4f}  "
          f"low({report.low_snr_db:g}dB) {low}")
    return 0


def cmd_ablate(args) -> int:
    cfg = load_run_config(args.config, args.set or [])
    d, (train_idx, val_idx, test_idx) = _load_and_split(args.data, cfg)
    out = Path(args.out)
    _snapshot(cfg, out, {"data": str(args.data)})
    rows = ["variant,params,flops,max_acc,low_acc,avg_acc"]
    for variant in VARIANTS:
        run_cfg = dict(cfg)
        run_cfg["model.variant"] = variant
        mcfg = model_config_from_run(run_cfg, len(d.class_names), d.nt, d.nr, d.length)
        model = CamdModel(mcfg, seed=cfg["train.seed"])
        train(model, d, train_idx, val_idx, hyper_from_run(run_cfg))
        report = evaluate(model, d, test_idx, low_snr_db=cfg["eval.low_snr_db"])
        low = "" if report.low_snr_accuracy is None else f"{report.low_snr_accuracy:.6f}"
        rows.append(f"{variant},{count_params(mcfg)},{estimate_flops(mcfg)},"
                    f"{report.max_accuracy:.6f},{low},{report.avg_accuracy:.6f}")
        print(rows[-1])
    (out / "ablation.csv").write_text("\n".join(rows) + "\n")
    return 0


def cmd_gradcheck(args) -> int:
    results = run_battery()
    width = max(len(r.name) for r in results)
    failed = False
    for r in results:
        status = "pass" if r.passed else "FAIL"
        print(f"{r.name:<{width}}  max_rel_err={r.max_rel_error:.3e}  "
              f"tol={r.tolerance:.0e}  {status}")
        failed |= not r.passed
    return RUNTIME_ERROR if failed else 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="camd", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", help="generate a labeled dataset file")
    g.add_argument("--classes", required=True, help="comma-separated class names")
    g.add_argument("--nt", type=int, default=2)
    g.add_argument("--nr", type=int, default=2)
    g.add_argument("--length", type=int, default=128)
    g.add_argument("--snr", default="10,20", help="'a:step:b' or comma list, in dB")
    g.add_argument("--frames", type=int, default=100, help="frames per (class, snr)")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--clean", action="store_true", help="store clean symbols too")
    g.add_argument("--drift", action="store_true", help="per-slot Gauss-Markov fading")
    g.add_argument("--out", required=True)
    g.set_defaults(fn=cmd_gen)

    def common(sp):
        sp.add_argument("--config", help="flat dotted-key config file")
        sp.add_argument("--set", action="append", metavar="KEY=VALUE",
                        help="override a config key (repeatable)")

    t = sub.add_parser("train", help="train a model on a dataset file")
    t.add_argument("--data", required=True)
    t.add_argument("--out", required=True)
    common(t)
    t.set_defaults(fn=cmd_train)

    e = sub.add_parser("eval", help="evaluate a checkpoint")
    e.add_argument("--model", required=True)
    e.add_argument("--data", required=True)
    e.add_argument("--out", required=True)
    e.add_argument("--split", choices=("train", "val", "test", "all"), default="all")
    common(e)
    e.set_defaults(fn=cmd_eval)

    a = sub.add_parser("ablate", help="train and compare all variants")
    a.add_argument("--data", required=True)
    a.add_argument("--out", required=True)
    common(a)
    a.set_defaults(fn=cmd_ablate)

    gc = sub.add_parser("gradcheck", help="run the gradient-check battery")
    gc.set_defaults(fn=cmd_gradcheck)
    return p


def main(argv=None) -> int:
    # CAMD_THREADS caps worker parallelism; the implementation is
    # sequential, so results never depend on it.
    os.environ.setdefault("CAMD_THREADS", "1")
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except (CliConfigError, ConfigError, ModulationError) as exc:
        print(f"camd: config error: {exc}", file=sys.stderr)
        return USAGE_ERROR
    except (DatasetFormatError, CheckpointFormatError, OSError, ValueError, KeyError) as exc:
        print(f"camd: error: {exc}", file=sys.stderr)
        return RUNTIME_ERROR


if __name__ == "__main__":
    sys.exit(main())
