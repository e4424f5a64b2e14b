"""
File formats
============

* FCM1: lossless binary matrix. ``b"FCM1"``, u32 LE rows, u32 LE cols, then
  ``rows * cols`` float64 LE values in row-major order.
* PGM: P2 (ASCII) or P5 (binary), maxval 255. For masks 0 is opaque and
  255 transparent. Real-valued images are scaled linearly into 0..255; the
  mapping ``value = pixel * scale + offset`` is stored in a sidecar CSV
  (``<name>.pgm.csv``) so the image can be read back in physical units.
* CSV: row-major, comma separated, no header.
"""

from __future__ import annotations

import hashlib
import json
import struct
from pathlib import Path
from typing import Union

import numpy as np

from .errors import ValidationError

PathLike = Union[str, Path]
FCM_MAGIC = b"FCM1"
_HEADER = struct.Struct("<4sII")


def write_fcm(path: PathLike, matrix) -> None:
    a = np.asarray(matrix, dtype="<f8")
    if a.ndim == 1:
        a = a[None, :]
    if a.ndim != 2:
        raise ValidationError("FCM1 stores 2-D matrices only")
    rows, cols = a.shape
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(FCM_MAGIC, rows, cols))
        fh.write(np.ascontiguousarray(a).tobytes(order="C"))


def read_fcm(path: PathLike) -> np.ndarray:
    data = Path(path).read_bytes()
    if len(data) < _HEADER.size:
        raise ValidationError(f"{path}: truncated FCM1 header")
    magic, rows, cols = _HEADER.unpack_from(data)
    if magic != FCM_MAGIC:
        raise ValidationError(f"{path}: bad magic {magic!r}")
    expected = _HEADER.size + 8 * rows * cols
    if len(data) != expected:
        raise ValidationError(f"{path}: expected {expected} bytes, found {len(data)}")
    return np.frombuffer(data, dtype="<f8", offset=_HEADER.size).reshape(rows, cols).astype(float)


def write_csv(path: PathLike, matrix) -> None:
    a = np.asarray(matrix, dtype=float)
    if a.ndim == 1:
        a = a[None, :]
    np.savetxt(path, a, delimiter=",", fmt="%.17g")


def read_csv(path: PathLike) -> np.ndarray:
    return np.loadtxt(path, delimiter=",", ndmin=2)


def write_pgm(path: PathLike, pixels, binary: bool = True) -> None:
    """Write integer pixels in 0..255 as P5 (``binary``) or P2."""
    p = np.asarray(pixels)
    if p.ndim == 1:
        p = p[None, :]
    if p.ndim != 2:
        raise ValidationError("PGM images are 2-D")
    if p.size and (p.min() < 0 or p.max() > 255):
        raise ValidationError("PGM pixels must lie in 0..255")
    p = np.rint(p).astype(np.uint8)
    rows, cols = p.shape
    header = f"{'P5' if binary else 'P2'}\n{cols} {rows}\n255\n".encode("ascii")
    with open(path, "wb") as fh:
        fh.write(header)
        if binary:
            fh.write(p.tobytes())
        else:
            for row in p:
                fh.write((" ".join(str(int(v)) for v in row) + "\n").encode("ascii"))


def _pgm_tokens(data: bytes):
    """Yield (token, end_offset) pairs from a PGM header, skipping comments."""
    pos = 0
    while True:
        while pos < len(data) and data[pos:pos + 1].isspace():
            pos += 1
        if pos < len(data) and data[pos:pos + 1] == b"#":
            while pos < len(data) and data[pos:pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        start = pos
        while pos < len(data) and not data[pos:pos + 1].isspace():
            pos += 1
        if start == pos:
            return
        yield data[start:pos], pos


def read_pgm(path: PathLike) -> np.ndarray:
    """Read a P2 or P5 PGM as an integer array of pixel values."""
    data = Path(path).read_bytes()
    tokens = _pgm_tokens(data)
    try:
        magic, _ = next(tokens)
        cols, _ = next(tokens)
        rows, _ = next(tokens)
        maxval, end = next(tokens)
    except StopIteration:
        raise ValidationError(f"{path}: truncated PGM header") from None
    cols, rows, maxval = int(cols), int(rows), int(maxval)
    if magic == b"P5":
        if maxval > 255:
            raise ValidationError(f"{path}: only 8-bit P5 is supported")
        raw = data[end + 1:end + 1 + rows * cols]
        if len(raw) != rows * cols:
            raise ValidationError(f"{path}: truncated P5 raster")
        return np.frombuffer(raw, dtype=np.uint8).reshape(rows, cols).astype(np.int64)
    if magic == b"P2":
        vals = np.array(data[end:].split(), dtype=np.int64)
        if vals.size != rows * cols:
            raise ValidationError(f"{path}: expected {rows * cols} values, found {vals.size}")
        return vals.reshape(rows, cols)
    raise ValidationError(f"{path}: not a PGM file (magic {magic!r})")


def _sidecar(path: PathLike) -> Path:
    return Path(str(path) + ".csv")


def write_image_pgm(path: PathLike, image, binary: bool = True) -> tuple:
    """Scale a real image into 0..255, write it and its (scale, offset) sidecar."""
    a = np.asarray(image, dtype=float)
    lo, hi = float(a.min()), float(a.max())
    scale = (hi - lo) / 255.0 if hi > lo else 1.0
    write_pgm(path, np.clip((a - lo) / scale, 0.0, 255.0), binary=binary)
    with open(_sidecar(path), "w") as fh:
        fh.write(f"{scale!r},{lo!r}\n")
    return scale, lo


def read_image_pgm(path: PathLike) -> np.ndarray:
    """Read a PGM back in physical units using its sidecar, if present."""
    pixels = read_pgm(path).astype(float)
    side = _sidecar(path)
    if side.exists():
        scale, offset = np.loadtxt(side, delimiter=",", ndmin=1)[:2]
        return pixels * scale + offset
    return pixels


def write_mask_pgm(path: PathLike, mask, binary: bool = True) -> None:
    """Mask as PGM: transmittance 0 -> 0 (opaque), 1 -> 255 (transparent)."""
    t = np.asarray(getattr(mask, "transmittance", mask), dtype=float)
    if getattr(mask, "form", "optical") == "signed":
        t = (t + 1.0) / 2.0
    write_pgm(path, 255.0 * t, binary=binary)


def read_mask_pgm(path: PathLike) -> np.ndarray:
    """Optical transmittance in [0, 1] from a mask PGM."""
    return read_pgm(path) / 255.0


def read_matrix(path: PathLike) -> np.ndarray:
    """Load a matrix from ``.fcm``, ``.pgm`` (with sidecar scaling) or ``.csv``."""
    suffix = Path(path).suffix.lower()
    if suffix == ".fcm":
        return read_fcm(path)
    if suffix == ".pgm":
        return read_image_pgm(path)
    if suffix == ".csv":
        return read_csv(path)
    raise ValidationError(f"unsupported matrix file type: {path}")


def write_matrix(path: PathLike, matrix) -> None:
    suffix = Path(path).suffix.lower()
    if suffix == ".fcm":
        write_fcm(path, matrix)
    elif suffix == ".pgm":
        write_image_pgm(path, matrix)
    elif suffix == ".csv":
        write_csv(path, matrix)
    else:
        raise ValidationError(f"unsupported matrix file type: {path}")


def config_hash(obj) -> str:
    """Stable SHA-256 of a JSON-serializable object."""
    blob = json.dumps(obj, sort_keys=True, separators=(",", ":"), default=str).encode()
    return hashlib.sha256(blob).hexdigest()


def _json_default(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, Path):
        return str(o)
    raise TypeError(f"{type(o).__name__} is not JSON serializable")


def _finite_or_none(o):
    if isinstance(o, float) and not np.isfinite(o):
        return None if np.isnan(o) else ("inf" if o > 0 else "-inf")
    if isinstance(o, dict):
        return {k: _finite_or_none(v) for k, v in o.items()}
    if isinstance(o, (list, tuple)):
        return [_finite_or_none(v) for v in o]
    return o


def write_json(path: PathLike, obj) -> None:
    """JSON with non-finite floats written as ``"inf"``/``"-inf"``/``null``."""
    text = json.dumps(_finite_or_none(obj), indent=2, sort_keys=True, default=_json_default)
    Path(path).write_text(text + "\n")


def read_json(path: PathLike):
    return json.loads(Path(path).read_text())
