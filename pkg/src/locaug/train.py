"""Training loop, run manifests, and the variant benchmark.

Runs are deterministic: parameters come from the seeded builder, the data
order of epoch e is a seeded shuffle of (seed, e), and all reductions are
fixed-order.  Repeating a run with the same config and seed on the same
platform reproduces the model file bit for bit.
"""

import hashlib
import json
import os
import time
from dataclasses import asdict, dataclass

import numpy as np

from . import metrics, model, optim
from .augment import AugmentSpec, augment_image, scale_rgb
from .backend import BACKEND
from .data import load_dataset


class TrainingError(RuntimeError):
    """Raised when a run cannot proceed (bad data, diverged loss, ...)."""


@dataclass
class TrainConfig:
    task: str = "saliency"
    num_classes: int = 1  # output channels; 1 means sigmoid saliency head
    variant: str = "rgb"
    norm: str = "unit_interval"
    depth: int = 2
    widths: tuple | None = None
    optimizer: str = "adam"
    lr: float = 1e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    momentum: float = 0.99
    weight_decay: float | None = None  # per-optimizer default if None
    batch: int = 2
    epochs: int = 50
    seed: int = 0
    threshold: object = "adaptive"
    eval_every: int = 1
    stop_iou: float | None = None
    pad_to_fit: bool = False

    def resolved_weight_decay(self):
        if self.weight_decay is not None:
            return self.weight_decay
        return 1e-6 if self.optimizer == "adam" else 5e-4

    def spec(self):
        return AugmentSpec(self.variant, self.norm)


def _uniform_size(samples):
    sizes = {s.image.shape[1:] for s in samples}
    if len(sizes) != 1:
        raise TrainingError(f"samples have mixed sizes {sorted(sizes)}; resize first")
    return next(iter(sizes))


def _pad_amounts(h, w, step):
    return (-h) % step, (-w) % step


def prepare_inputs(samples, spec, pad_hw=(0, 0)):
    """Stack samples into one augmented [n,C,H,W] batch (location channels
    computed once and replicated)."""
    h, w = _uniform_size(samples)
    ph, pw = pad_hw
    imgs = np.stack([s.image for s in samples])
    if ph or pw:
        imgs = np.pad(imgs, ((0, 0), (0, 0), (0, ph), (0, pw)))
    return augment_image(scale_rgb(imgs, spec), spec)


def prepare_targets(samples, task, pad_hw=(0, 0)):
    ph, pw = pad_hw
    masks = np.stack([s.mask for s in samples])
    if task == "saliency":
        if ph or pw:
            masks = np.pad(masks, ((0, 0), (0, ph), (0, pw)))
        return masks[:, None]  # [n,1,H,W] float targets
    if ph or pw:
        masks = np.pad(masks, ((0, 0), (0, ph), (0, pw)),
                       constant_values=optim.IGNORE_CLASS)
    return masks


def _epoch_order(seed, epoch, n):
    rng = np.random.default_rng(np.random.SeedSequence((seed, epoch, 0x0DDE2)))
    return rng.permutation(n)


def predict_maps(net, x, batch=16):
    """Forward a stacked input in chunks; returns saliency maps [n,H,W] or
    class maps for multi-channel heads."""
    outs = []
    for i in range(0, x.shape[0], batch):
        pred = model.forward(net, x[i : i + batch])
        if net.out_channels == 1:
            outs.append(pred[:, 0])
        else:
            outs.append(pred.argmax(axis=1).astype(np.float64))
    return np.concatenate(outs)


def eval_net(net, samples, cfg):
    """MetricReport of a network on a list of samples.  Inputs that do not
    divide by 2^depth are zero-padded and predictions cropped back."""
    h, w = _uniform_size(samples)
    pad_hw = _pad_amounts(h, w, 2**net.depth)
    x = prepare_inputs(samples, net.spec, pad_hw)
    preds = predict_maps(net, x, max(cfg.batch, 16))
    preds = preds[:, :h, :w]
    return metrics.evaluate_dataset(
        list(preds),
        samples,
        task=cfg.task,
        threshold=cfg.threshold,
        num_classes=cfg.num_classes if cfg.task == "multiclass" else None,
    )


def _metric_entry(report, cfg):
    if cfg.task == "saliency":
        return {
            "f_beta": report.f_beta,
            "iou": report.per_class_iou[1],
            "mean_iou": report.mean_iou,
        }
    return {"mean_iou": report.mean_iou}


def _score(entry, cfg):
    return entry["iou"] if cfg.task == "saliency" else entry["mean_iou"]


def fit(train_samples, cfg, test_samples=None, checkpoint_cb=None):
    """Train a fresh network on ``train_samples``.

    Returns (net, history, best).  ``history`` has one entry per epoch with
    the mean loss and, on evaluation epochs, test metrics.  ``best`` is the
    highest-scoring evaluated entry.  Aborts with TrainingError on a
    non-finite loss (divergence must not contaminate benchmarks).
    """
    if not train_samples:
        raise TrainingError("empty training dataset")
    h, w = _uniform_size(train_samples)
    step = 2**cfg.depth
    pad_hw = _pad_amounts(h, w, step)
    if pad_hw != (0, 0) and not cfg.pad_to_fit:
        axis = "H" if pad_hw[0] else "W"
        extent = h if pad_hw[0] else w
        raise TrainingError(
            f"axis {axis}={extent} not divisible by 2^{cfg.depth}={step} "
            "(rerun with pad_to_fit)"
        )

    spec = cfg.spec()
    x_all = prepare_inputs(train_samples, spec, pad_hw)
    y_all = prepare_targets(train_samples, cfg.task, pad_hw)
    out_channels = 1 if cfg.task == "saliency" else cfg.num_classes
    net = model.build(cfg.depth, spec, cfg.widths, out_channels, cfg.seed)
    params = net.params()
    wd = cfg.resolved_weight_decay()
    if cfg.optimizer == "adam":
        state = optim.AdamState.init(params, lr=cfg.lr, beta1=cfg.beta1,
                                     beta2=cfg.beta2, eps=cfg.eps, weight_decay=wd)
        step_fn = optim.adam_step
    elif cfg.optimizer == "sgd":
        state = optim.SgdState.init(params, lr=cfg.lr, momentum=cfg.momentum,
                                    weight_decay=wd)
        step_fn = optim.sgd_momentum_step
    else:
        raise TrainingError(f"unknown optimizer {cfg.optimizer!r}")

    n = x_all.shape[0]
    history = []
    best = None
    for epoch in range(cfg.epochs):
        order = _epoch_order(cfg.seed, epoch, n)
        total, seen = 0.0, 0
        for start in range(0, n, cfg.batch):
            idx = order[start : start + cfg.batch]
            xb, yb = x_all[idx], y_all[idx]
            pred, caches = model.forward(net, xb, with_caches=True)
            if cfg.task == "saliency":
                loss, d_pred = optim.bce_loss(pred, yb)
            else:
                loss, d_pred = optim.softmax_ce_loss(pred, yb)
            if not np.isfinite(loss):
                raise TrainingError(
                    f"non-finite loss at epoch {epoch + 1}, step {start // cfg.batch + 1}"
                )
            grads, _ = model.backward(net, caches, d_pred)
            flat = []
            for dw, db in grads:
                flat += [dw, db]
            step_fn(params, flat, state)
            total += loss * len(idx)
            seen += len(idx)

        entry = {"epoch": epoch + 1, "loss": total / seen}
        is_eval = test_samples and (
            (epoch + 1) % cfg.eval_every == 0 or epoch + 1 == cfg.epochs
        )
        if is_eval:
            report = eval_net(net, test_samples, cfg)
            entry.update(_metric_entry(report, cfg))
            if best is None or _score(entry, cfg) > _score(best, cfg):
                best = dict(entry)
        history.append(entry)
        if checkpoint_cb is not None:
            checkpoint_cb(net, entry, best is not None and best["epoch"] == epoch + 1)
        if (
            is_eval
            and cfg.stop_iou is not None
            and _score(entry, cfg) >= cfg.stop_iou
        ):
            break
    return net, history, best


def time_inference(net, samples, repeats=3, limit=50):
    """Median per-image forward time (seconds), augmentation included."""
    spec = net.spec
    subset = samples[:limit]
    times = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        for s in subset:
            x = augment_image(scale_rgb(s.image[None], spec), spec)
            model.forward(net, x)
        times.append((time.perf_counter() - t0) / len(subset))
    return float(np.median(times))


# ---------------------------------------------------------------------------
# manifests

def _config_dict(cfg, data=None, splits=None):
    d = asdict(cfg)
    d["widths"] = list(cfg.widths) if cfg.widths is not None else None
    if data is not None:
        d["data"] = data
        d["train_split"], d["test_split"] = splits
    return d


def config_from_dict(d):
    fields = {f for f in TrainConfig.__dataclass_fields__}
    kw = {k: v for k, v in d.items() if k in fields}
    if kw.get("widths") is not None:
        kw["widths"] = tuple(kw["widths"])
    return TrainConfig(**kw)


def train_run(cfg, out_dir, data=None, splits=("train", "test"),
              train_samples=None, test_samples=None):
    """CLI-level run: load data, fit, write model + checkpoints + manifest.

    Returns the manifest dict.  Either ``data`` (a dataset directory) or
    in-memory sample lists must be provided.
    """
    if train_samples is None:
        if data is None:
            raise TrainingError("no dataset given")
        train_samples = load_dataset(data, splits[0], cfg.task)
        try:
            test_samples = load_dataset(data, splits[1], cfg.task)
        except FileNotFoundError:
            test_samples = None
    os.makedirs(out_dir, exist_ok=True)

    def checkpoint(net, entry, is_best):
        blob = model.save_model(net)
        with open(os.path.join(out_dir, "last.lnet"), "wb") as f:
            f.write(blob)
        if is_best:
            with open(os.path.join(out_dir, "best.lnet"), "wb") as f:
                f.write(blob)

    net, history, best = fit(train_samples, cfg, test_samples, checkpoint)
    blob = model.save_model(net)
    model_path = os.path.join(out_dir, "model.lnet")
    with open(model_path, "wb") as f:
        f.write(blob)

    manifest = {
        "format": "locaug-run-manifest-v1",
        "backend": BACKEND,
        "config": _config_dict(cfg, data, splits),
        "param_count": model.param_count(net),
        "model_file": "model.lnet",
        "model_sha256": hashlib.sha256(blob).hexdigest(),
        "epochs_run": len(history),
        "history": history,
        "best": best,
        "final": history[-1],
    }
    with open(os.path.join(out_dir, "manifest.json"), "w") as f:
        json.dump(manifest, f, indent=2, sort_keys=True)
        f.write("\n")
    return manifest


# ---------------------------------------------------------------------------
# variant benchmark

BENCH_VARIANTS = ("rgb", "rgb+dist", "rgb+coord", "rgb+dist+coord")


def bench_variants(cfg, train_samples, test_samples, variants=BENCH_VARIANTS,
                   seeds=(0,), time_repeats=3):
    """Train every variant with everything else held fixed.

    Seeds, data order, and the initialization of every equal-shape parameter
    are shared across variants (only the first layer's extra-channel block
    differs), so each column isolates the augmentation effect.  Returns one
    row per variant.
    """
    if not seeds:
        raise TrainingError("need at least one seed")
    rows = []
    for variant in variants:
        fs, ious = [], []
        last_net = None
        for seed in seeds:
            vcfg = config_from_dict({**_config_dict(cfg), "variant": variant, "seed": seed})
            net, history, best = fit(train_samples, vcfg, test_samples)
            final = history[-1]
            entry = best if best is not None else final
            fs.append(entry.get("f_beta", float("nan")))
            ious.append(entry.get("iou", entry.get("mean_iou", float("nan"))))
            last_net = net
        secs = time_inference(last_net, test_samples or train_samples, time_repeats)
        rows.append({
            "variant": variant,
            "params": model.param_count(last_net),
            "f_mean": float(np.mean(fs)),
            "f_min": float(np.min(fs)),
            "f_max": float(np.max(fs)),
            "iou_mean": float(np.mean(ious)),
            "sec_per_image": secs,
            "seeds": list(seeds),
        })
    return rows


def format_bench_table(rows):
    header = f"{'variant':<16} {'params':>8} {'F_beta (mean [min,max])':>26} {'IoU':>7} {'s/image':>9}"
    lines = [header, "-" * len(header)]
    for r in rows:
        lines.append(
            f"{r['variant']:<16} {r['params']:>8d} "
            f"{r['f_mean']:.4f} [{r['f_min']:.4f},{r['f_max']:.4f}]".rjust(26)
            + f" {r['iou_mean']:>7.4f} {r['sec_per_image']:>9.5f}"
        )
    return "\n".join(lines)
