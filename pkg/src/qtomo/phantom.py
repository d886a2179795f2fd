"""Shepp-Logan test images and image file I/O.

Pixel ``(i, j)`` of an ``H x W`` image is the unit square centred at
``(j - W/2 + 0.5, H/2 - i - 0.5)``, so the image is centred on the origin.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import FormatError, InvalidArgument

# Ten-ellipse Shepp-Logan geometry with the higher-contrast gray values of
# Toft (the variant most toolkits ship). Columns: value, semi-axis a (x),
# semi-axis b (y), centre x, centre y, rotation in degrees. Coordinates are
# normalised to [-1, 1].
SHEPP_LOGAN_ELLIPSES = np.array(
    [
        [1.0, 0.69, 0.92, 0.0, 0.0, 0.0],
        [-0.8, 0.6624, 0.874, 0.0, -0.0184, 0.0],
        [-0.2, 0.11, 0.31, 0.22, 0.0, -18.0],
        [-0.2, 0.16, 0.41, -0.22, 0.0, 18.0],
        [0.1, 0.21, 0.25, 0.0, 0.35, 0.0],
        [0.1, 0.046, 0.046, 0.0, 0.1, 0.0],
        [0.1, 0.046, 0.046, 0.0, -0.1, 0.0],
        [0.1, 0.046, 0.023, -0.08, -0.605, 0.0],
        [0.1, 0.023, 0.023, 0.0, -0.606, 0.0],
        [0.1, 0.023, 0.046, 0.06, -0.605, 0.0],
    ]
)

BINARY_THRESHOLD = 0.1


@dataclass
class Image:
    """A 2-D grid of non-negative intensities.

    ``levels`` optionally declares the discrete value set every pixel must
    belong to (``(0, 1)`` for binary phantoms).
    """

    pixels: np.ndarray
    levels: tuple[float, ...] | None = None
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        px = np.array(self.pixels, dtype=float)
        if px.ndim != 2:
            raise InvalidArgument(f"image must be 2-D, got shape {px.shape}")
        if not np.all(np.isfinite(px)):
            raise InvalidArgument("image contains non-finite values")
        if np.any(px < 0):
            raise InvalidArgument("image values must be >= 0")
        if self.levels is not None:
            self.levels = tuple(float(v) for v in self.levels)
            if not np.all(np.isin(px, self.levels)):
                raise InvalidArgument("pixel value outside declared levels")
        self.pixels = px

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.pixels.shape

    def __array__(self, dtype=None, copy=None):
        if dtype is None:
            return self.pixels
        return self.pixels.astype(dtype)


def pixel_centres(height: int, width: int) -> tuple[np.ndarray, np.ndarray]:
    """Return (x, y) centre coordinates of every pixel, each shaped (H, W)."""
    x = np.arange(width) - width / 2 + 0.5
    y = height / 2 - np.arange(height) - 0.5
    return np.meshgrid(x, y)


def shepp_logan_values(size: int) -> np.ndarray:
    """Summed ellipse intensities sampled at pixel centres."""
    x, y = pixel_centres(size, size)
    x = x / (size / 2)
    y = y / (size / 2)
    out = np.zeros((size, size))
    for val, a, b, x0, y0, phi in SHEPP_LOGAN_ELLIPSES:
        t = np.deg2rad(phi)
        dx, dy = x - x0, y - y0
        u = dx * np.cos(t) + dy * np.sin(t)
        v = -dx * np.sin(t) + dy * np.cos(t)
        out[(u / a) ** 2 + (v / b) ** 2 <= 1.0] += val
    # cancelling ellipse values leave ~1e-17 residue
    return np.round(out, 9)


def generate_shepp_logan(size: int, mode: str = "binary", k: int = 4) -> Image:
    """Deterministic Shepp-Logan phantom.

    ``mode="binary"`` thresholds the summed intensities at
    ``BINARY_THRESHOLD``. ``mode="integer"`` ranks the distinct summed
    intensities (0 for the smallest) and clamps ranks to ``k - 1``.
    """
    if size < 4:
        raise InvalidArgument(f"phantom size must be >= 4, got {size}")
    vals = shepp_logan_values(size)
    if mode == "binary":
        px = (vals > BINARY_THRESHOLD).astype(float)
        return Image(px, levels=(0.0, 1.0))
    if mode == "integer":
        if k < 2:
            raise InvalidArgument(f"integer mode needs k >= 2, got {k}")
        distinct, rank = np.unique(vals, return_inverse=True)
        px = np.minimum(rank.reshape(vals.shape), k - 1).astype(float)
        return Image(px, levels=tuple(float(v) for v in range(k)))
    raise InvalidArgument(f"unknown phantom mode {mode!r}")


def disk_phantom(size: int, radius: float, value: float = 1.0) -> Image:
    """Centred disk, radius in pixels. Used for path-length checks."""
    x, y = pixel_centres(size, size)
    return Image(np.where(x**2 + y**2 <= radius**2, value, 0.0))


# -- file formats -----------------------------------------------------------


def _fmt(v: float) -> str:
    # 17 significant digits round-trip any double exactly
    return format(float(v), ".17g")


def save_image(image, path) -> None:
    """Write ``image`` as text (default), ``.npy`` or ``.pgm``."""
    path = Path(path)
    px = np.asarray(image, dtype=float)
    suffix = path.suffix.lower()
    if suffix == ".npy":
        np.save(path, px)
    elif suffix == ".pgm":
        save_pgm(px, path)
    else:
        lines = [f"IMG {px.shape[0]} {px.shape[1]}"]
        lines += [" ".join(_fmt(v) for v in row) for row in px]
        path.write_text("\n".join(lines) + "\n")


def load_image(path, levels=None) -> Image:
    path = Path(path)
    suffix = path.suffix.lower()
    if suffix == ".npy":
        px = np.load(path)
        if px.ndim != 2:
            raise FormatError(f"{path}: expected a 2-D array")
        return Image(px, levels=levels)
    if suffix == ".pgm":
        return Image(load_pgm(path), levels=levels)
    return Image(_parse_text_image(path.read_text(), str(path)), levels=levels)


def _parse_text_image(text: str, name: str = "<text>") -> np.ndarray:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise FormatError(f"{name}: empty file")
    head = lines[0].split()
    if len(head) != 3 or head[0] != "IMG":
        raise FormatError(f"{name}: bad header {lines[0]!r}")
    try:
        h, w = int(head[1]), int(head[2])
        vals = [float(t) for ln in lines[1:] for t in ln.split()]
    except ValueError as exc:
        raise FormatError(f"{name}: {exc}") from None
    if h < 1 or w < 1:
        raise FormatError(f"{name}: non-positive dimensions {h}x{w}")
    if len(vals) != h * w:
        raise FormatError(f"{name}: header says {h}x{w} but found {len(vals)} values")
    return np.array(vals).reshape(h, w)


def save_pgm(image, path, binary: bool = True) -> None:
    """Export to PGM (P5 or P2), scaling values linearly onto 0..255."""
    px = np.asarray(image, dtype=float)
    lo, hi = px.min(), px.max()
    scaled = np.zeros(px.shape) if hi == lo else (px - lo) / (hi - lo) * 255.0
    g = np.round(scaled).astype(np.uint8)
    h, w = g.shape
    if binary:
        Path(path).write_bytes(f"P5\n{w} {h}\n255\n".encode() + g.tobytes())
    else:
        rows = "\n".join(" ".join(str(v) for v in row) for row in g)
        Path(path).write_text(f"P2\n{w} {h}\n255\n{rows}\n")


def load_pgm(path) -> np.ndarray:
    """Read a P2/P5 graymap; values are returned as raw gray levels."""
    data = Path(path).read_bytes()
    tokens = []
    pos = 0
    # header: magic, width, height, maxval, with '#' comments allowed
    while len(tokens) < 4:
        while pos < len(data) and data[pos : pos + 1].isspace():
            pos += 1
        if data[pos : pos + 1] == b"#":
            while pos < len(data) and data[pos : pos + 1] != b"\n":
                pos += 1
            continue
        start = pos
        while pos < len(data) and not data[pos : pos + 1].isspace():
            pos += 1
        if start == pos:
            raise FormatError(f"{path}: truncated PGM header")
        tokens.append(data[start:pos].decode("ascii", "replace"))
    magic = tokens[0]
    try:
        w, h, maxval = int(tokens[1]), int(tokens[2]), int(tokens[3])
    except ValueError:
        raise FormatError(f"{path}: bad PGM header") from None
    if magic == "P5":
        pos += 1
        dtype = np.uint8 if maxval < 256 else np.dtype(">u2")
        raw = np.frombuffer(data[pos:], dtype=dtype)
        if raw.size < w * h:
            raise FormatError(f"{path}: PGM payload too short")
        return raw[: w * h].reshape(h, w).astype(float)
    if magic == "P2":
        vals = data[pos:].split()
        if len(vals) != w * h:
            raise FormatError(f"{path}: expected {w * h} values, got {len(vals)}")
        return np.array([float(v) for v in vals]).reshape(h, w)
    raise FormatError(f"{path}: unsupported magic {magic!r}")
