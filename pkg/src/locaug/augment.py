"""Location channels appended to the RGB input of a segmentation network.

Three kinds of location plane are supported: row/column coordinate ramps,
Euclidean distance from the image center, and a single linearly-indexed
plane.  All of them depend only on the image size, never on pixel values.
"""

from dataclasses import dataclass

import numpy as np

from .tensor import concat_channels

VARIANTS = ("rgb", "rgb+coord", "rgb+dist", "rgb+dist+coord", "rgb+lin")
NORMS = ("unit_interval", "symmetric")

_EXTRA_CHANNELS = {
    "rgb": 0,
    "rgb+coord": 2,
    "rgb+dist": 1,
    "rgb+dist+coord": 3,
    "rgb+lin": 1,
}


@dataclass(frozen=True)
class AugmentSpec:
    """Input variant plus the normalization range of every input channel."""

    variant: str = "rgb"
    normalization: str = "unit_interval"

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown variant {self.variant!r}, expected one of {VARIANTS}")
        if self.normalization not in NORMS:
            raise ValueError(f"unknown normalization {self.normalization!r}")

    @property
    def extra_channels(self):
        return _EXTRA_CHANNELS[self.variant]

    @property
    def in_channels(self):
        return 3 + self.extra_channels


def _check_extents(H, W):
    if H < 1 or W < 1:
        raise ValueError(f"zero extent: H={H}, W={W}")


def _to_norm(x01, norm):
    # x01 lies in [0,1]; symmetric mode remaps to [-1,1]
    if norm == "symmetric":
        return 2.0 * x01 - 1.0
    if norm != "unit_interval":
        raise ValueError(f"unknown normalization {norm!r}")
    return x01


def _ramp(extent):
    if extent == 1:
        return np.full(1, 0.5)
    return np.arange(extent, dtype=np.float64) / (extent - 1)


def make_coord_channels(H, W, norm="unit_interval"):
    """Row and column index planes, shape [1,2,H,W] (row plane first)."""
    _check_extents(H, W)
    rows = np.broadcast_to(_ramp(H)[:, None], (H, W))
    cols = np.broadcast_to(_ramp(W)[None, :], (H, W))
    out = np.stack([rows, cols])[None]
    return _to_norm(np.ascontiguousarray(out), norm)


def make_distance_channel(H, W, norm="unit_interval"):
    """Euclidean distance from the (real-valued) image center, max-normalized."""
    _check_extents(H, W)
    cr, cc = (H - 1) / 2.0, (W - 1) / 2.0
    r = np.arange(H, dtype=np.float64)[:, None] - cr
    c = np.arange(W, dtype=np.float64)[None, :] - cc
    raw = np.sqrt(r * r + c * c)
    peak = raw.max()
    if peak > 0:
        raw /= peak
    return _to_norm(raw[None, None], norm)


def make_linear_index_channel(H, W, norm="unit_interval"):
    """Row-major pixel index scaled to [0,1], shape [1,1,H,W]."""
    _check_extents(H, W)
    n = H * W
    idx = np.arange(n, dtype=np.float64).reshape(H, W)
    if n > 1:
        idx /= n - 1
    return _to_norm(idx[None, None], norm)


def location_channels(H, W, spec):
    """All extra planes for ``spec`` in fixed order: coord rows, coord cols,
    dist, lin.  Returns None for the plain rgb variant."""
    parts = []
    if "coord" in spec.variant:
        parts.append(make_coord_channels(H, W, spec.normalization))
    if "dist" in spec.variant:
        parts.append(make_distance_channel(H, W, spec.normalization))
    if "lin" in spec.variant:
        parts.append(make_linear_index_channel(H, W, spec.normalization))
    if not parts:
        return None
    out = parts[0]
    for p in parts[1:]:
        out = concat_channels(out, p)
    return out


def augment_image(img, spec):
    """Append the spec's location planes to a [N,3,H,W] image batch.

    The RGB data must already be scaled to the spec's normalization range
    (see :func:`scale_rgb`).  The same planes are replicated across the batch.
    """
    if img.ndim != 4 or img.shape[1] != 3:
        raise ValueError(
            f"expected [N,3,H,W] input, got shape {tuple(img.shape)}"
        )
    N, _, H, W = img.shape
    extra = location_channels(H, W, spec)
    if extra is None:
        return img
    extra = np.ascontiguousarray(np.broadcast_to(extra, (N,) + extra.shape[1:]))
    return concat_channels(img, extra)


def scale_rgb(img01, spec):
    """Map RGB values from [0,1] to the spec's normalization range."""
    return _to_norm(np.asarray(img01, dtype=np.float64), spec.normalization)
