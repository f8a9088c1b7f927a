"""Command-line interface.

Subcommands: train, eval, bench, gradcheck, augment, gen-data.  Options can
also come from a config file of ``key=value`` lines (or a run manifest's
JSON); explicit flags win over the file.  Exit codes: 0 success, 1 failed
checks, 2 errors (one machine-parseable line on stderr).
"""

import argparse
import json
import sys

import numpy as np

from . import gradcheck, metrics, model, train
from .augment import AugmentSpec, location_channels
from .backend import BACKEND
from .data import (
    CircleTaskConfig,
    LocationBiasConfig,
    Sample,
    gen_circle_dataset,
    gen_location_bias_dataset,
    load_dataset,
    resize_nearest,
    write_dataset,
)
from .tensor import write_tensor

_NORM_ALIASES = {"unit": "unit_interval", "unit_interval": "unit_interval",
                 "symmetric": "symmetric"}


def _parse_widths(text):
    if isinstance(text, (list, tuple)):
        return tuple(int(p) for p in text)
    return tuple(int(p) for p in str(text).split(",") if p != "")


def _parse_threshold(text):
    if text == "adaptive":
        return "adaptive"
    return float(text)


def _parse_task(text):
    if text == "saliency":
        return "saliency", 1
    if text.startswith("multiclass:"):
        k = int(text.split(":", 1)[1])
        if k < 2:
            raise ValueError("multiclass needs at least 2 classes")
        return "multiclass", k
    raise ValueError(f"unknown task {text!r} (saliency or multiclass:K)")


def _parse_bool(v):
    if isinstance(v, bool):
        return v
    return str(v).lower() in ("1", "true", "yes", "on")


def _parse_size(text):
    h, w = str(text).lower().split("x")
    return int(h), int(w)


_COERCE = {
    "depth": int, "epochs": int, "batch": int, "seed": int, "eval_every": int,
    "num_classes": int,
    "lr": float, "beta1": float, "beta2": float, "eps": float,
    "momentum": float, "weight_decay": float, "stop_iou": float,
    "widths": _parse_widths, "threshold": _parse_threshold,
    "pad_to_fit": _parse_bool,
    "norm": lambda v: _NORM_ALIASES[v],
}


def read_config_file(path):
    """Config as key=value lines, or a JSON run manifest (its "config" key)."""
    with open(path) as f:
        text = f.read()
    if text.lstrip().startswith("{"):
        doc = json.loads(text)
        return doc.get("config", doc)
    out = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{lineno}: expected key=value, got {raw!r}")
        key, val = line.split("=", 1)
        out[key.strip().replace("-", "_")] = val.strip()
    return out


def _resolve(args, keys):
    """defaults < config file < explicit flags, with per-key coercion."""
    file_cfg = read_config_file(args.config) if getattr(args, "config", None) else {}
    merged = {}
    for key in keys:
        flag = getattr(args, key, None)
        if flag is not None:
            merged[key] = flag
        elif key in file_cfg and file_cfg[key] is not None:
            val = file_cfg[key]
            merged[key] = _COERCE[key](val) if key in _COERCE and isinstance(val, (str, list)) else val
    return merged


_TRAIN_KEYS = tuple(train.TrainConfig.__dataclass_fields__) + (
    "data", "out", "train_split", "test_split", "resize",
)


def _add_train_flags(p, with_out=True):
    p.add_argument("--data", help="dataset directory (images/, masks/, <split>.txt)")
    if with_out:
        p.add_argument("--out", help="output directory for model + manifest")
    p.add_argument("--config", help="key=value config file or a run manifest")
    p.add_argument("--task", help="saliency (default) or multiclass:K")
    p.add_argument("--variant", choices=list(train.BENCH_VARIANTS) + ["rgb+lin"])
    p.add_argument("--norm", choices=["unit", "symmetric", "unit_interval"])
    p.add_argument("--depth", type=int)
    p.add_argument("--widths", type=_parse_widths, help="per-stage channels, e.g. 16,32")
    p.add_argument("--optimizer", choices=["adam", "sgd"])
    p.add_argument("--lr", type=float)
    p.add_argument("--beta1", type=float)
    p.add_argument("--beta2", type=float)
    p.add_argument("--eps", type=float)
    p.add_argument("--momentum", type=float)
    p.add_argument("--weight-decay", dest="weight_decay", type=float)
    p.add_argument("--batch", type=int)
    p.add_argument("--epochs", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--threshold", type=_parse_threshold)
    p.add_argument("--eval-every", dest="eval_every", type=int)
    p.add_argument("--stop-iou", dest="stop_iou", type=float)
    p.add_argument("--pad-to-fit", dest="pad_to_fit", action="store_const", const=True)
    p.add_argument("--train-split", dest="train_split")
    p.add_argument("--test-split", dest="test_split")
    p.add_argument("--resize", help="resize inputs to HxW (nearest neighbor)")


def _load_split(data, split, task, resize):
    samples = load_dataset(data, split, task)
    if resize:
        h, w = _parse_size(resize)
        samples = [
            Sample(resize_nearest(s.image, h, w), resize_nearest(s.mask, h, w), s.id)
            for s in samples
        ]
    return samples


def _train_setup(args):
    merged = _resolve(args, _TRAIN_KEYS)
    if "task" in merged:
        merged["task"], merged["num_classes"] = _parse_task(merged["task"])
    if "norm" in merged:
        merged["norm"] = _NORM_ALIASES[merged["norm"]]
    data = merged.pop("data", None)
    out = merged.pop("out", None)
    splits = (merged.pop("train_split", None) or "train",
              merged.pop("test_split", None) or "test")
    resize = merged.pop("resize", None)
    cfg = train.config_from_dict(merged)
    return cfg, data, out, splits, resize


def cmd_train(args):
    cfg, data, out, splits, resize = _train_setup(args)
    if data is None:
        raise ValueError("--data is required")
    if out is None:
        raise ValueError("--out is required")
    train_samples = _load_split(data, splits[0], cfg.task, resize)
    try:
        test_samples = _load_split(data, splits[1], cfg.task, resize)
    except FileNotFoundError:
        test_samples = None
    manifest = train.train_run(cfg, out, data, splits,
                               train_samples=train_samples, test_samples=test_samples)
    print(f"backend={manifest['backend']}")
    print(f"epochs_run={manifest['epochs_run']}")
    print(f"final_loss={manifest['final']['loss']:.6f}")
    for key in ("f_beta", "iou", "mean_iou"):
        if manifest["best"] and key in manifest["best"]:
            print(f"best_{key}={manifest['best'][key]:.6f}")
    print(f"model_sha256={manifest['model_sha256']}")
    print(f"manifest={out}/manifest.json")
    return 0


def cmd_eval(args):
    cfg, data, _, splits, resize = _train_setup(args)
    if data is None:
        raise ValueError("--data is required")
    with open(args.model, "rb") as f:
        net = model.load_model(f.read())
    samples = _load_split(data, splits[1], cfg.task, resize)
    report = train.eval_net(net, samples, cfg)
    print(metrics.format_report(report))
    for line in metrics.report_lines(report):
        print(line)
    return 0


def cmd_bench(args):
    cfg, data, _, splits, resize = _train_setup(args)
    if data is None:
        raise ValueError("--data is required")
    train_samples = _load_split(data, splits[0], cfg.task, resize)
    test_samples = _load_split(data, splits[1], cfg.task, resize)
    seeds = tuple(int(s) for s in args.seeds.split(","))
    variants = tuple(args.variants.split(",")) if args.variants else train.BENCH_VARIANTS
    rows = train.bench_variants(cfg, train_samples, test_samples, variants, seeds)
    print(f"backend={BACKEND}")
    print(train.format_bench_table(rows))
    base = next((r for r in rows if r["variant"] == "rgb"), None)
    if base:
        for r in rows:
            if r is not base:
                rel = r["sec_per_image"] / base["sec_per_image"] - 1.0
                print(f"overhead[{r['variant']}]={rel * 100:.1f}%  "
                      f"extra_params={r['params'] - base['params']}")
    return 0


def cmd_gradcheck(args):
    results = gradcheck.run_gradcheck(instances=args.instances, tol=args.tol,
                                      seed=args.seed)
    for line in gradcheck.format_results(results):
        print(line)
    failed = [r for r in results if not r.passed]
    print(f"{len(results) - len(failed)}/{len(results)} checks passed")
    return 1 if failed else 0


def cmd_augment(args):
    spec = AugmentSpec(args.variant, _NORM_ALIASES[args.norm])
    channels = location_channels(args.height, args.width, spec)
    if channels is None:
        raise ValueError("variant rgb has no location channels to export")
    with open(args.out, "wb") as f:
        f.write(write_tensor(channels))
    print(f"wrote {args.out}: shape {list(channels.shape)}")
    return 0


def cmd_gen_data(args):
    n = args.train + args.test
    if args.task == "circle":
        center = tuple(int(c) for c in args.center.split(",")) if args.center else (
            args.height // 2, args.width // 2)
        cfg = CircleTaskConfig(args.height, args.width, args.radius, center,
                               args.color_mode, n, args.seed)
        samples = gen_circle_dataset(cfg)
    elif args.task == "bias":
        cfg = LocationBiasConfig(args.height, args.width, args.square_size,
                                 args.squares, n, args.seed)
        samples = gen_location_bias_dataset(cfg)
    else:
        raise ValueError(f"unknown synthetic task {args.task!r}")
    write_dataset(args.out, {"train": samples[: args.train], "test": samples[args.train :]})
    from dataclasses import asdict
    with open(f"{args.out}/manifest.json", "w") as f:
        json.dump({"format": "locaug-dataset-manifest-v1", "task": args.task,
                   "config": asdict(cfg), "train": args.train, "test": args.test},
                  f, indent=2, sort_keys=True)
        f.write("\n")
    print(f"wrote {args.train}+{args.test} samples to {args.out}")
    return 0


def build_parser():
    top = argparse.ArgumentParser(
        prog="locaug",
        description="location-augmented segmentation networks: train, evaluate, benchmark",
    )
    sub = top.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train a model and write a run manifest")
    _add_train_flags(p)
    p.set_defaults(fn=cmd_train)

    p = sub.add_parser("eval", help="evaluate a saved model on a dataset split")
    p.add_argument("--model", required=True)
    _add_train_flags(p, with_out=False)
    p.set_defaults(fn=cmd_eval)

    p = sub.add_parser("bench", help="compare augmentation variants")
    _add_train_flags(p, with_out=False)
    p.add_argument("--seeds", default="0", help="comma-separated seeds")
    p.add_argument("--variants", help="comma-separated variants (default: the four standard)")
    p.set_defaults(fn=cmd_bench)

    p = sub.add_parser("gradcheck", help="finite-difference check of every backward pass")
    p.add_argument("--instances", type=int, default=gradcheck.DEFAULT_INSTANCES)
    p.add_argument("--tol", type=float, default=gradcheck.DEFAULT_TOL)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(fn=cmd_gradcheck)

    p = sub.add_parser("augment", help="export location channels as a LAUG tensor")
    p.add_argument("--height", type=int, required=True)
    p.add_argument("--width", type=int, required=True)
    p.add_argument("--variant", required=True,
                   choices=["rgb", "rgb+coord", "rgb+dist", "rgb+dist+coord", "rgb+lin"])
    p.add_argument("--norm", default="unit", choices=["unit", "symmetric", "unit_interval"])
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_augment)

    p = sub.add_parser("gen-data", help="generate a synthetic dataset directory")
    p.add_argument("--task", required=True, choices=["circle", "bias"])
    p.add_argument("--out", required=True)
    p.add_argument("--height", type=int, default=64)
    p.add_argument("--width", type=int, default=64)
    p.add_argument("--train", type=int, default=200)
    p.add_argument("--test", type=int, default=50)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--radius", type=int, default=14)
    p.add_argument("--center", help="circle center as row,col (default: image center)")
    p.add_argument("--color-mode", dest="color_mode", default="uniform_random",
                   choices=["uniform_random", "per_pixel_noise"])
    p.add_argument("--squares", type=int, default=3)
    p.add_argument("--square-size", dest="square_size", type=int, default=9)
    p.set_defaults(fn=cmd_gen_data)
    return top


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except (ValueError, RuntimeError, OSError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
