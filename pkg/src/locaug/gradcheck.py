"""Finite-difference verification of every backward pass.

Each named check draws one random instance, computes analytic gradients,
and compares them against central differences of the forward pass.  The
relative error is the largest elementwise deviation divided by the overall
gradient magnitude of the instance.  Inputs are nudged away from the
non-differentiable points of relu and max-pool so the comparison is valid.
"""

from dataclasses import dataclass

import numpy as np

from . import layers, model, optim
from .augment import AugmentSpec

DEFAULT_TOL = 1e-4
DEFAULT_EPS = 1e-5
DEFAULT_INSTANCES = 20


@dataclass
class CheckResult:
    name: str
    max_rel_err: float
    tol: float

    @property
    def passed(self):
        return self.max_rel_err <= self.tol


def central_diff(f, x, eps=DEFAULT_EPS):
    """d f / d x by central differences, elementwise on a float64 array."""
    g = np.zeros_like(x)
    flat = x.ravel()
    gf = g.ravel()
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + eps
        hi = f()
        flat[i] = orig - eps
        lo = f()
        flat[i] = orig
        gf[i] = (hi - lo) / (2.0 * eps)
    return g


def rel_error(analytic, numeric):
    """Pairs of gradient arrays -> worst deviation over the shared scale."""
    if isinstance(analytic, np.ndarray):
        analytic, numeric = [analytic], [numeric]
    scale = max(max(np.abs(a).max() for a in analytic),
                max(np.abs(n).max() for n in numeric), 1e-8)
    worst = max(np.abs(a - n).max() for a, n in zip(analytic, numeric))
    return worst / scale


def _proj_loss(y, c):
    return float((y * c).sum())


def _avoid_zero(x, margin=1e-3):
    # shift values out of (-margin, margin) so eps-perturbations cannot
    # cross a relu kink
    return np.where(np.abs(x) < margin, x + np.where(x >= 0, margin, -margin), x)


def _untie_windows(x, min_gap=1e-3, bump=0.01):
    n, c, h, w = x.shape
    flat = x.reshape(n, c, h // 2, 2, w // 2, 2).transpose(0, 1, 2, 4, 3, 5).reshape(
        n, c, h // 2, w // 2, 4
    )
    srt = np.sort(flat, axis=-1)
    close = srt[..., 3] - srt[..., 2] < min_gap
    arg = flat.argmax(axis=-1)
    top = np.take_along_axis(flat, arg[..., None], axis=-1)[..., 0]
    np.put_along_axis(flat, arg[..., None], (top + close * bump)[..., None], axis=-1)
    back = flat.reshape(n, c, h // 2, w // 2, 2, 2).transpose(0, 1, 2, 4, 3, 5)
    return np.ascontiguousarray(back.reshape(n, c, h, w))


def _check_conv(rng, padding, k):
    cin, cout = 3, 4
    x = rng.normal(size=(2, cin, 6, 8))
    p = layers.ConvParams(rng.normal(size=(cout, cin, k, k)), rng.normal(size=cout), padding)
    y = layers.conv2d(x, p)
    c = rng.normal(size=y.shape)
    lg = layers.conv2d_backward(x, p, c)

    num_w = central_diff(lambda: _proj_loss(layers.conv2d(x, p), c), p.weights)
    num_b = central_diff(lambda: _proj_loss(layers.conv2d(x, p), c), p.bias)
    num_x = central_diff(lambda: _proj_loss(layers.conv2d(x, p), c), x)
    return rel_error([lg.d_weights, lg.d_bias, lg.d_input], [num_w, num_b, num_x])


def check_conv3x3_zero(rng):
    return _check_conv(rng, "zero", 3)


def check_conv3x3_valid(rng):
    return _check_conv(rng, "none", 3)


def check_conv1x1(rng):
    return _check_conv(rng, "zero", 1)


def check_maxpool2(rng):
    x = _untie_windows(rng.normal(size=(1, 3, 8, 8)))
    _, arg = layers.maxpool2(x)
    c = rng.normal(size=(1, 3, 4, 4))
    dx = layers.maxpool2_backward(c, arg)
    num = central_diff(lambda: _proj_loss(layers.maxpool2(x)[0], c), x)
    return rel_error(dx, num)


def check_upsample2(rng):
    x = rng.normal(size=(1, 2, 4, 4))
    c = rng.normal(size=(1, 2, 8, 8))
    dx = layers.upsample2_backward(c)
    num = central_diff(lambda: _proj_loss(layers.upsample2_nearest(x), c), x)
    return rel_error(dx, num)


def check_relu(rng):
    x = _avoid_zero(rng.normal(size=(2, 3, 5, 5)))
    c = rng.normal(size=x.shape)
    dx = layers.relu_backward(x, c)
    num = central_diff(lambda: _proj_loss(layers.relu(x), c), x)
    return rel_error(dx, num)


def check_sigmoid(rng):
    x = rng.normal(size=(2, 3, 5, 5))
    c = rng.normal(size=x.shape)
    dx = layers.sigmoid_backward(layers.sigmoid(x), c)
    num = central_diff(lambda: _proj_loss(layers.sigmoid(x), c), x)
    return rel_error(dx, num)


def check_softmax(rng):
    x = rng.normal(size=(1, 4, 3, 3))
    c = rng.normal(size=x.shape)
    dx = layers.softmax_channels_backward(layers.softmax_channels(x), c)
    num = central_diff(lambda: _proj_loss(layers.softmax_channels(x), c), x)
    return rel_error(dx, num)


def check_bce_loss(rng):
    pred = rng.uniform(0.05, 0.95, size=(1, 1, 4, 4))
    target = rng.integers(0, 2, size=pred.shape).astype(np.float64)
    _, d = optim.bce_loss(pred, target)
    num = central_diff(lambda: optim.bce_loss(pred, target)[0], pred)
    return rel_error(d, num)


def check_softmax_ce_loss(rng):
    logits = rng.normal(size=(1, 3, 4, 4))
    classes = rng.integers(0, 3, size=(1, 4, 4))
    classes[0, 0, 0] = optim.IGNORE_CLASS
    _, d = optim.softmax_ce_loss(logits, classes)
    num = central_diff(lambda: optim.softmax_ce_loss(logits, classes)[0], logits)
    return rel_error(d, num)


def _kink_margin(net, x):
    """Smallest |pre-activation| at any relu plus the smallest max-pool gap.

    Central differences are only valid when no relu kink or pooling tie lies
    within the perturbation; instances are resampled until this margin is
    comfortable.
    """
    margin = np.inf
    h = x
    k = 0
    for _ in range(net.depth):
        for _ in range(2):
            h = layers.conv2d(h, net.convs[k])
            k += 1
            margin = min(margin, np.abs(h).min())
            h = layers.relu(h)
        n, c, hh, ww = h.shape
        win = h.reshape(n, c, hh // 2, 2, ww // 2, 2).transpose(0, 1, 2, 4, 3, 5)
        flat = np.sort(win.reshape(n, c, hh // 2, ww // 2, 4), axis=-1)
        # ties between relu zeros are stable (the window max stays 0); only
        # windows with a positive max need a clear winner
        gap = flat[..., 3] - flat[..., 2]
        positive = flat[..., 3] > 0
        if positive.any():
            margin = min(margin, gap[positive].min())
        h, _ = layers.maxpool2(h)
    for _ in range(net.depth):
        h = layers.upsample2_nearest(h)
        h = layers.conv2d(h, net.convs[k])
        k += 1
        margin = min(margin, np.abs(h).min())
        h = layers.relu(h)
    return margin


def check_composite_net(rng):
    """End-to-end: BCE loss through a depth-2 network, every parameter."""
    spec = AugmentSpec("rgb+coord")
    net = model.build(2, spec, widths=(4, 4), out_channels=1, seed=int(rng.integers(1 << 30)))
    for conv in net.convs:
        # zero-init biases put relu pre-activations of all-zero windows
        # exactly on the kink, where central differences are undefined
        conv.bias += rng.normal(scale=0.1, size=conv.bias.shape)
    for _ in range(200):
        x = rng.normal(size=(1, spec.in_channels, 8, 8))
        if _kink_margin(net, x) > 5e-4:
            break
    else:
        raise RuntimeError("could not find a kink-free gradient-check instance")
    target = rng.integers(0, 2, size=(1, 1, 8, 8)).astype(np.float64)

    def loss():
        return optim.bce_loss(model.forward(net, x), target)[0]

    pred, caches = model.forward(net, x, with_caches=True)
    _, d_pred = optim.bce_loss(pred, target)
    grads, _ = model.backward(net, caches, d_pred)

    analytic, numeric = [], []
    for conv, (dw, db) in zip(net.convs, grads):
        analytic += [dw, db]
        numeric += [central_diff(loss, conv.weights), central_diff(loss, conv.bias)]
    return rel_error(analytic, numeric)


def default_checks():
    return [
        ("conv3x3_zero", check_conv3x3_zero),
        ("conv3x3_valid", check_conv3x3_valid),
        ("conv1x1", check_conv1x1),
        ("maxpool2", check_maxpool2),
        ("upsample2_nearest", check_upsample2),
        ("relu", check_relu),
        ("sigmoid", check_sigmoid),
        ("softmax_channels", check_softmax),
        ("bce_loss", check_bce_loss),
        ("softmax_ce_loss", check_softmax_ce_loss),
        ("composite_depth2", check_composite_net),
    ]


def run_gradcheck(checks=None, instances=DEFAULT_INSTANCES, tol=DEFAULT_TOL, seed=0):
    """Run every check ``instances`` times; returns one result per check."""
    if checks is None:
        checks = default_checks()
    if not checks:
        raise ValueError("no gradient checks to run")
    results = []
    for idx, (name, fn) in enumerate(checks):
        worst = 0.0
        for inst in range(instances):
            rng = np.random.default_rng(np.random.SeedSequence((seed, idx, inst)))
            worst = max(worst, fn(rng))
        results.append(CheckResult(name, worst, tol))
    return results


def format_results(results):
    lines = []
    for r in results:
        status = "PASS" if r.passed else "FAIL"
        lines.append(f"{status} {r.name}: max_rel_err={r.max_rel_err:.3e} (tol {r.tol:g})")
    return lines
