"""Minimal PGM (P2/P5) reader and writer, 8- or 16-bit."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import UnsupportedFormat


@dataclass(frozen=True)
class IntensityImage:
    """Grayscale image with samples in [0, 1], row-major, row 0 on top."""

    pixels: np.ndarray  # (H, W) float

    def __post_init__(self):
        px = np.asarray(self.pixels, dtype=float)
        if px.ndim != 2 or px.shape[0] < 1 or px.shape[1] < 1:
            raise ValueError("image must be a non-empty 2-D array")
        if px.min() < 0.0 or px.max() > 1.0:
            raise ValueError("samples must lie in [0, 1]")
        object.__setattr__(self, "pixels", px)

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]


def _tokens(data: bytes):
    """Yield whitespace-separated header tokens, skipping '#' comments."""
    pos = 0
    while pos < len(data):
        ch = data[pos:pos + 1]
        if ch.isspace():
            pos += 1
        elif ch == b"#":
            end = data.find(b"\n", pos)
            pos = len(data) if end < 0 else end + 1
        else:
            end = pos
            while end < len(data) and not data[end:end + 1].isspace():
                end += 1
            yield data[pos:end], end
            pos = end


def read_pgm(path) -> IntensityImage:
    with open(path, "rb") as fh:
        data = fh.read()
    it = _tokens(data)
    try:
        magic, _ = next(it)
        width, _ = next(it)
        height, _ = next(it)
        maxval, end = next(it)
    except StopIteration:
        raise UnsupportedFormat(f"{path}: truncated PGM header") from None
    if magic not in (b"P2", b"P5"):
        raise UnsupportedFormat(f"{path}: not a PGM file (magic {magic!r})")
    w, h, mv = int(width), int(height), int(maxval)
    if w < 1 or h < 1 or not 0 < mv <= 65535:
        raise UnsupportedFormat(f"{path}: bad PGM dimensions or maxval")
    if magic == b"P2":
        values = np.array(data[end:].split(), dtype=np.uint32)
        if values.size != w * h:
            raise UnsupportedFormat(f"{path}: expected {w * h} samples, got {values.size}")
    else:
        raw = data[end + 1:]  # exactly one whitespace byte after maxval
        dtype = np.dtype(">u2") if mv > 255 else np.dtype(np.uint8)
        need = w * h * dtype.itemsize
        if len(raw) < need:
            raise UnsupportedFormat(f"{path}: truncated P5 payload")
        values = np.frombuffer(raw[:need], dtype=dtype).astype(np.uint32)
    if values.max(initial=0) > mv:
        raise UnsupportedFormat(f"{path}: sample exceeds maxval")
    return IntensityImage(values.reshape(h, w) / mv)


def write_pgm(path, image: IntensityImage, maxval: int = 255, comments=()):
    """Write a plain-text (P2) PGM with optional '#' comment lines."""
    if not 0 < maxval <= 65535:
        raise ValueError("maxval must be in (0, 65535]")
    q = np.rint(image.pixels * maxval).astype(int)
    lines = ["P2"]
    lines += [f"# {c}" for c in comments]
    lines.append(f"{image.width} {image.height}")
    lines.append(str(maxval))
    for row in q:
        lines.append(" ".join(str(v) for v in row))
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")
