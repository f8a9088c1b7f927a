"""Dense float64 tensors in NCHW layout, plus the LAUG binary tensor format.

Tensors are plain C-contiguous ``numpy.ndarray`` values of dtype float64 with
rank 1..4.  All computation stays in 64-bit; the LAUG file format stores
32-bit floats, so writing a tensor to bytes is the only lossy step.

LAUG layout (little-endian throughout):

    magic   4 bytes  b"LAUG"
    rank    uint32
    extents uint32 per axis
    payload float32 per element, row-major
"""

import struct

import numpy as np

LAUG_MAGIC = b"LAUG"
MAX_RANK = 4
# extents are uint32 on disk; keep element counts comfortably inside int32
MAX_ELEMENTS = 2**31


class LaugFormatError(ValueError):
    """Raised for malformed LAUG byte streams."""


class ShapeMismatchError(ValueError):
    """Raised when tensor shapes disagree on a named axis."""


def as_tensor(data, shape=None):
    """Coerce ``data`` to a valid tensor (float64, C-contiguous, rank 1..4)."""
    t = np.ascontiguousarray(data, dtype=np.float64)
    if shape is not None:
        t = t.reshape(shape)
    check_tensor(t)
    return t


def check_tensor(t):
    if not isinstance(t, np.ndarray) or t.dtype != np.float64:
        raise TypeError("tensor must be a float64 ndarray")
    if not 1 <= t.ndim <= MAX_RANK:
        raise ValueError(f"tensor rank must be 1..{MAX_RANK}, got {t.ndim}")
    if any(e < 1 for e in t.shape):
        raise ValueError(f"all extents must be >= 1, got shape {t.shape}")
    return t


def concat_channels(a, b):
    """Concatenate two NCHW tensors along the channel axis.

    Channels of ``a`` precede channels of ``b``; data is preserved bit-exactly.
    """
    if a.ndim != 4 or b.ndim != 4:
        raise ShapeMismatchError(
            f"concat_channels needs rank-4 NCHW tensors, got ranks {a.ndim} and {b.ndim}"
        )
    for axis, name in ((0, "N"), (2, "H"), (3, "W")):
        if a.shape[axis] != b.shape[axis]:
            raise ShapeMismatchError(
                f"axis {name} mismatch: {a.shape[axis]} vs {b.shape[axis]}"
            )
    return np.concatenate([a, b], axis=1)


def write_tensor(t):
    """Serialize a tensor to LAUG bytes (float32 payload; lossy for float64)."""
    check_tensor(t)
    if t.size > MAX_ELEMENTS:
        raise LaugFormatError(f"extent overflow: {t.size} elements exceed {MAX_ELEMENTS}")
    header = LAUG_MAGIC + struct.pack("<I", t.ndim)
    extents = struct.pack(f"<{t.ndim}I", *t.shape)
    payload = t.astype("<f4").tobytes()
    return header + extents + payload


def read_tensor(buf):
    """Parse LAUG bytes into a float64 tensor."""
    if len(buf) < 8:
        raise LaugFormatError("truncated header")
    if buf[:4] != LAUG_MAGIC:
        raise LaugFormatError(f"bad magic {buf[:4]!r}")
    (rank,) = struct.unpack_from("<I", buf, 4)
    if not 1 <= rank <= MAX_RANK:
        raise LaugFormatError(f"unsupported rank {rank}")
    if len(buf) < 8 + 4 * rank:
        raise LaugFormatError("truncated extent list")
    shape = struct.unpack_from(f"<{rank}I", buf, 8)
    if any(e < 1 for e in shape):
        raise LaugFormatError(f"zero extent in shape {shape}")
    count = 1
    for e in shape:
        count *= e
        if count > MAX_ELEMENTS:
            raise LaugFormatError(f"extent overflow in shape {shape}")
    start = 8 + 4 * rank
    if len(buf) != start + 4 * count:
        raise LaugFormatError(
            f"truncated payload: expected {4 * count} bytes, got {len(buf) - start}"
        )
    data = np.frombuffer(buf, dtype="<f4", count=count, offset=start)
    return data.astype(np.float64).reshape(shape)
