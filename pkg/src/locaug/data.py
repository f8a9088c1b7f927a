"""Synthetic datasets and simple image/mask file IO.

Two generators make the central claims testable at desk scale:

* ``gen_circle_dataset`` - random-colored images that all share one fixed
  circular mask, so the label depends on location only.
* ``gen_location_bias_dataset`` - several identical squares per image; the
  ground truth is the square nearest the image center, so color cannot
  disambiguate the target.

File IO is limited to binary PPM (P6, images) and PGM (P5, masks), 8-bit.
A dataset directory holds ``images/<id>.ppm`` + ``masks/<id>.pgm`` and one
list file per split with one id per line.
"""

import os
from dataclasses import dataclass

import numpy as np


@dataclass
class Sample:
    image: np.ndarray  # [3,H,W] float64 in [0,1]
    mask: np.ndarray  # [H,W] float64; {0,1} for saliency, class ids otherwise
    id: str

    def __post_init__(self):
        if self.image.shape[1:] != self.mask.shape:
            raise ValueError(
                f"image {self.image.shape[1:]} and mask {self.mask.shape} sizes differ"
            )


@dataclass(frozen=True)
class CircleTaskConfig:
    height: int = 64
    width: int = 64
    radius: int = 14
    center: tuple = (32, 32)
    color_mode: str = "uniform_random"  # or per_pixel_noise
    count: int = 250
    seed: int = 0

    def __post_init__(self):
        cr, cc = self.center
        margin = min(cr, cc, self.height - 1 - cr, self.width - 1 - cc)
        if self.radius > margin:
            raise ValueError(
                f"circle of radius {self.radius} at {self.center} does not fit "
                f"inside {self.height}x{self.width}"
            )
        if self.color_mode not in ("uniform_random", "per_pixel_noise"):
            raise ValueError(f"unknown color_mode {self.color_mode!r}")


def circle_mask(height, width, radius, center):
    cr, cc = center
    r = np.arange(height, dtype=np.float64)[:, None] - cr
    c = np.arange(width, dtype=np.float64)[None, :] - cc
    return (r * r + c * c <= radius * radius).astype(np.float64)


def gen_circle_dataset(cfg):
    """Images of random color sharing one fixed circular mask."""
    mask = circle_mask(cfg.height, cfg.width, cfg.radius, cfg.center)
    rng = np.random.default_rng(np.random.SeedSequence((cfg.seed, 0xC14C1E)))
    samples = []
    for i in range(cfg.count):
        if cfg.color_mode == "uniform_random":
            color = rng.uniform(size=3)
            img = np.broadcast_to(color[:, None, None], (3, cfg.height, cfg.width)).copy()
        else:
            img = rng.uniform(size=(3, cfg.height, cfg.width))
        samples.append(Sample(img, mask.copy(), f"circle_{i:04d}"))
    return samples


@dataclass(frozen=True)
class LocationBiasConfig:
    height: int = 48
    width: int = 48
    square: int = 9  # side length in pixels
    num_squares: int = 3
    count: int = 150
    seed: int = 0

    def __post_init__(self):
        if self.square > min(self.height, self.width):
            raise ValueError("square does not fit inside the image")
        if self.num_squares < 1:
            raise ValueError("need at least one square")


def _place_squares(rng, cfg):
    """Non-overlapping top-left corners with a strictly nearest-to-center
    square (ties and overlaps are resampled)."""
    ic, jc = (cfg.height - 1) / 2.0, (cfg.width - 1) / 2.0
    half = (cfg.square - 1) / 2.0
    for _ in range(1000):
        tops = rng.integers(0, cfg.height - cfg.square + 1, size=cfg.num_squares)
        lefts = rng.integers(0, cfg.width - cfg.square + 1, size=cfg.num_squares)
        boxes = list(zip(tops.tolist(), lefts.tolist()))
        ok = True
        for a in range(len(boxes)):
            for b in range(a + 1, len(boxes)):
                if (abs(boxes[a][0] - boxes[b][0]) < cfg.square
                        and abs(boxes[a][1] - boxes[b][1]) < cfg.square):
                    ok = False
        if not ok:
            continue
        d = [np.hypot(t + half - ic, l + half - jc) for t, l in boxes]
        order = sorted(range(len(d)), key=lambda k: d[k])
        if len(d) > 1 and d[order[1]] - d[order[0]] < 0.5:
            continue  # no clear winner
        return boxes, order[0]
    raise RuntimeError("could not place squares without overlap/tie")


def gen_location_bias_dataset(cfg):
    """Noise images with identical solid squares; GT is the centermost one."""
    rng = np.random.default_rng(np.random.SeedSequence((cfg.seed, 0x5B1A5)))
    samples = []
    for i in range(cfg.count):
        img = rng.uniform(size=(3, cfg.height, cfg.width))
        color = rng.uniform(size=3)
        boxes, target = _place_squares(rng, cfg)
        mask = np.zeros((cfg.height, cfg.width))
        for k, (t, l) in enumerate(boxes):
            img[:, t : t + cfg.square, l : l + cfg.square] = color[:, None, None]
            if k == target:
                mask[t : t + cfg.square, l : l + cfg.square] = 1.0
        samples.append(Sample(img, mask, f"bias_{i:04d}"))
    return samples


# ---------------------------------------------------------------------------
# PPM / PGM

def _read_pnm_header(f):
    def token():
        t = b""
        while True:
            ch = f.read(1)
            if not ch:
                raise ValueError("unsupported format: truncated header")
            if ch == b"#":
                while ch not in (b"\n", b""):
                    ch = f.read(1)
                continue
            if ch.isspace():
                if t:
                    return t
                continue
            t += ch

    magic = f.read(2)
    if magic not in (b"P5", b"P6"):
        raise ValueError(f"unsupported format: magic {magic!r} (need binary P5/P6)")
    width = int(token())
    height = int(token())
    maxval = int(token())
    if maxval != 255:
        raise ValueError(f"unsupported format: maxval {maxval} (only 8-bit supported)")
    return magic, width, height


def load_ppm(path):
    """Binary P6 image as [3,H,W] float64 scaled to [0,1]."""
    with open(path, "rb") as f:
        magic, width, height = _read_pnm_header(f)
        if magic != b"P6":
            raise ValueError(f"unsupported format: {path} is not a P6 image")
        raw = f.read(width * height * 3)
    if len(raw) != width * height * 3:
        raise ValueError(f"unsupported format: truncated pixel data in {path}")
    img = np.frombuffer(raw, dtype=np.uint8).reshape(height, width, 3)
    return np.ascontiguousarray(img.transpose(2, 0, 1)).astype(np.float64) / 255.0


def load_pgm(path):
    """Binary P5 image as [H,W] float64 of raw byte values (0..255)."""
    with open(path, "rb") as f:
        magic, width, height = _read_pnm_header(f)
        if magic != b"P5":
            raise ValueError(f"unsupported format: {path} is not a P5 image")
        raw = f.read(width * height)
    if len(raw) != width * height:
        raise ValueError(f"unsupported format: truncated pixel data in {path}")
    return np.frombuffer(raw, dtype=np.uint8).reshape(height, width).astype(np.float64)


def save_ppm(path, img01):
    """Write a [3,H,W] array in [0,1] as binary P6."""
    img = np.asarray(img01)
    data = np.clip(np.rint(img * 255.0), 0, 255).astype(np.uint8)
    h, w = img.shape[1:]
    with open(path, "wb") as f:
        f.write(b"P6\n%d %d\n255\n" % (w, h))
        f.write(np.ascontiguousarray(data.transpose(1, 2, 0)).tobytes())


def save_pgm(path, values):
    """Write a [H,W] array of byte values (0..255) as binary P5."""
    data = np.clip(np.rint(np.asarray(values)), 0, 255).astype(np.uint8)
    h, w = data.shape
    with open(path, "wb") as f:
        f.write(b"P5\n%d %d\n255\n" % (w, h))
        f.write(data.tobytes())


def load_image(path):
    return load_ppm(path)


def load_mask(path, task="saliency"):
    """Saliency masks binarize at 128; class masks pass byte values through."""
    raw = load_pgm(path)
    if task == "saliency":
        return (raw >= 128).astype(np.float64)
    return raw


def resize_nearest(x, new_h, new_w):
    """Nearest-neighbor resize of the trailing two axes (never interpolates,
    so masks stay valid).  Source index = floor(dst * src / new)."""
    h, w = x.shape[-2], x.shape[-1]
    rows = (np.arange(new_h) * h) // new_h
    cols = (np.arange(new_w) * w) // new_w
    return np.ascontiguousarray(x[..., rows[:, None], cols[None, :]])


# ---------------------------------------------------------------------------
# dataset directories

def write_dataset(root, splits):
    """Write samples as images/<id>.ppm + masks/<id>.pgm with one list file
    per split.  ``splits`` maps split name -> list of Samples.  Saliency
    masks are stored as 0/255."""
    os.makedirs(os.path.join(root, "images"), exist_ok=True)
    os.makedirs(os.path.join(root, "masks"), exist_ok=True)
    for split, samples in splits.items():
        with open(os.path.join(root, f"{split}.txt"), "w") as f:
            for s in samples:
                f.write(s.id + "\n")
                save_ppm(os.path.join(root, "images", s.id + ".ppm"), s.image)
                mask = s.mask * 255.0 if s.mask.max() <= 1.0 else s.mask
                save_pgm(os.path.join(root, "masks", s.id + ".pgm"), mask)


def load_dataset(root, split, task="saliency"):
    """Load the samples listed in ``<root>/<split>.txt``."""
    list_path = os.path.join(root, f"{split}.txt")
    with open(list_path) as f:
        ids = [line.strip() for line in f if line.strip()]
    if not ids:
        raise ValueError(f"empty split file {list_path}")
    samples = []
    for sid in ids:
        img = load_image(os.path.join(root, "images", sid + ".ppm"))
        mask = load_mask(os.path.join(root, "masks", sid + ".pgm"), task)
        if img.shape[1:] != mask.shape:
            raise ValueError(f"dimension mismatch between image and mask for id {sid}")
        samples.append(Sample(img, mask, sid))
    return samples
