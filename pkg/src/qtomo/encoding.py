"""Pixel value <-> binary variable encodings.

Every encoding is affine in its bits: ``value = offset + sum_k w_k q_k``.

- ``radix2(m)``: weights ``1, 2, ..., 2**(m-1)``.
- ``mac_direct(alphas)``: weights ``alphas`` (one bit per known attenuation).
- ``mac_cumulative(alphas)``: offset ``alphas[0]``, weights are the successive
  differences, so ``len(alphas) - 1`` bits and values in
  ``[alphas[0], alphas[-1]]``.
- ``unit_step(m)``: ``m`` unit-weight bits, value = number of set bits.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .errors import InvalidArgument

MODES = ("radix2", "mac_direct", "mac_cumulative", "unit_step")


@dataclass(frozen=True)
class EncodingSpec:
    mode: str
    bits: int = 1
    alphas: tuple[float, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "alphas", tuple(float(a) for a in self.alphas))
        if self.mode not in MODES:
            raise InvalidArgument(f"unknown encoding mode {self.mode!r}")
        if self.mode in ("mac_direct", "mac_cumulative"):
            a = np.asarray(self.alphas)
            if a.size == 0:
                raise InvalidArgument("MAC encodings need at least one alpha")
            if np.any(np.diff(a) <= 0):
                raise InvalidArgument("alphas must be strictly increasing")
            if self.mode == "mac_direct" and a[0] <= 0:
                raise InvalidArgument("mac_direct alphas must be positive")
            if self.mode == "mac_cumulative":
                if a[0] < 0:
                    raise InvalidArgument("mac_cumulative alphas must be >= 0")
                if a.size < 2:
                    raise InvalidArgument("mac_cumulative needs at least two alphas")
            object.__setattr__(
                self, "bits", a.size - (1 if self.mode == "mac_cumulative" else 0)
            )
        elif self.bits < 1:
            raise InvalidArgument(f"bits per pixel must be >= 1, got {self.bits}")

    @property
    def weights(self) -> np.ndarray:
        return basis_weights(self)[1]

    @property
    def offset(self) -> float:
        return basis_weights(self)[0]

    def levels(self) -> np.ndarray:
        """Every value some bit pattern decodes to, ascending."""
        off, w = basis_weights(self)
        vals = {
            round(off + float(np.dot(p, w)), 12)
            for p in itertools.product((0, 1), repeat=self.bits)
        }
        return np.array(sorted(vals))

    def to_dict(self) -> dict:
        d = {"mode": self.mode}
        if self.mode in ("radix2", "unit_step"):
            d["bits"] = self.bits
        else:
            d["alphas"] = list(self.alphas)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "EncodingSpec":
        return cls(d["mode"], int(d.get("bits", 1)), tuple(d.get("alphas", ())))


def radix2(m: int) -> EncodingSpec:
    return EncodingSpec("radix2", m)


def unit_step(m: int) -> EncodingSpec:
    return EncodingSpec("unit_step", m)


def mac_direct(alphas) -> EncodingSpec:
    return EncodingSpec("mac_direct", alphas=tuple(alphas))


def mac_cumulative(alphas) -> EncodingSpec:
    return EncodingSpec("mac_cumulative", alphas=tuple(alphas))


def basis_weights(spec: EncodingSpec) -> tuple[float, np.ndarray]:
    """Return ``(offset, weights)`` for one pixel."""
    if spec.mode == "radix2":
        return 0.0, 2.0 ** np.arange(spec.bits)
    if spec.mode == "unit_step":
        return 0.0, np.ones(spec.bits)
    a = np.asarray(spec.alphas)
    if spec.mode == "mac_direct":
        return 0.0, a.copy()
    return float(a[0]), np.diff(a)


def decode(bits, spec: EncodingSpec) -> float:
    q = np.asarray(bits, dtype=float)
    if q.shape != (spec.bits,):
        raise InvalidArgument(f"expected {spec.bits} bits, got {q.shape}")
    off, w = basis_weights(spec)
    return off + float(q @ w)


def encode(value: float, spec: EncodingSpec, atol: float = 1e-9) -> np.ndarray:
    """A bit pattern decoding to ``value``.

    Radix-2 patterns are unique. For the other encodings the pattern with
    the fewest set bits wins, ties going to the one with ones earliest
    (so unit-step codes come out monotone: 2 -> 1,1,0).
    """
    if spec.mode == "radix2":
        v = int(round(value))
        if abs(v - value) > atol or not 0 <= v < 2**spec.bits:
            raise InvalidArgument(f"{value} not representable with {spec.bits} radix-2 bits")
        return np.array([(v >> k) & 1 for k in range(spec.bits)], dtype=np.uint8)
    off, w = basis_weights(spec)
    best = None
    for p in itertools.product((1, 0), repeat=spec.bits):
        if abs(off + float(np.dot(p, w)) - value) <= atol:
            if best is None or sum(p) < sum(best):
                best = p
    if best is None:
        raise InvalidArgument(f"{value} is not representable by {spec}")
    return np.array(best, dtype=np.uint8)


def quantize(values, spec: EncodingSpec) -> np.ndarray:
    """Snap values to the nearest representable level (ties go low)."""
    lv = spec.levels()
    v = np.asarray(values, dtype=float)
    idx = np.clip(np.searchsorted(lv, v), 1, lv.size - 1) if lv.size > 1 else np.zeros(v.shape, int)
    if lv.size == 1:
        return np.full(v.shape, lv[0])
    lo, hi = lv[idx - 1], lv[idx]
    return np.where(v - lo <= hi - v, lo, hi)
