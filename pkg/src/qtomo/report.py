"""Reconstruction metrics, dose estimate and the per-region gap table."""

from __future__ import annotations

import csv
import io
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import EmptyTableError, InvalidArgument
from .phantom import save_pgm

LEDGER_COLUMNS = ("sample", "iteration", "region", "runtime_s", "target_min", "achieved", "abs_gap")


def quantize_to_levels(values, levels) -> np.ndarray:
    """Nearest declared level; exact midpoints go to the lower level."""
    lv = np.sort(np.asarray(levels, dtype=float))
    v = np.asarray(values, dtype=float)
    if lv.size == 1:
        return np.full(v.shape, lv[0])
    idx = np.clip(np.searchsorted(lv, v), 1, lv.size - 1)
    lo, hi = lv[idx - 1], lv[idx]
    return np.where(v - lo <= hi - v, lo, hi)


def pixel_accuracy(reconstructed, reference, levels) -> float:
    a = np.asarray(reconstructed, dtype=float)
    b = np.asarray(reference, dtype=float)
    if a.shape != b.shape:
        raise InvalidArgument(f"shape mismatch: {a.shape} vs {b.shape}")
    qa, qb = quantize_to_levels(a, levels), quantize_to_levels(b, levels)
    return float(np.mean(qa == qb))


def rmse(reconstructed, reference) -> float:
    a = np.asarray(reconstructed, dtype=float)
    b = np.asarray(reference, dtype=float)
    if a.shape != b.shape:
        raise InvalidArgument(f"shape mismatch: {a.shape} vs {b.shape}")
    return float(np.sqrt(np.mean((a - b) ** 2)))


def dose_reduction(n: int, N: int) -> float:
    """Projection-data reduction ``(1 - n/N) * 100`` when starting from an
    ``n x n`` initialisation of an ``N x N`` image."""
    if not 0 < n <= N:
        raise InvalidArgument(f"need 0 < n <= N, got n={n}, N={N}")
    return (1 - n / N) * 100


def render_gap_table(ledger, include_runtime: bool = True) -> str:
    """CSV with one row per solved region, in ledger order.

    With ``include_runtime=False`` the runtime column is left empty so the
    table is byte-reproducible across runs.
    """
    if not ledger:
        raise EmptyTableError("ledger is empty")
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(LEDGER_COLUMNS)
    for r in ledger:
        w.writerow(
            [
                r.sample,
                r.iteration,
                r.region,
                repr(float(r.runtime_s)) if include_runtime else "",
                repr(float(r.target_min)),
                repr(float(r.achieved)),
                repr(float(r.abs_gap)),
            ]
        )
    return buf.getvalue()


@dataclass
class ReconReport:
    pixel_accuracy: float | None
    rmse: float | None
    dose_reduction_pct: float
    wall_time_s: float = 0.0
    gaps: list = field(default_factory=list)
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.pixel_accuracy is not None and not 0 <= self.pixel_accuracy <= 1:
            raise InvalidArgument("pixel_accuracy must lie in [0, 1]")
        if not 0 <= self.dose_reduction_pct < 100:
            raise InvalidArgument("dose_reduction_pct must lie in [0, 100)")

    def to_dict(self, include_timing: bool = True) -> dict:
        d = asdict(self)
        if not include_timing:
            d.pop("wall_time_s")
        return d

    def summary(self) -> str:
        lines = []
        if self.pixel_accuracy is not None:
            lines.append(f"pixel accuracy   {self.pixel_accuracy:.4f}")
            lines.append(f"rmse             {self.rmse:.6g}")
        lines.append(f"dose reduction   {self.dose_reduction_pct:.1f}%")
        if self.gaps:
            lines.append(f"final gap        {self.gaps[-1]['abs_gap']:.3g}")
        return "\n".join(lines)


def build_report(image, reference, levels, ledger, n: int, N: int, wall_time_s=0.0, **extra):
    gaps = [
        {"iteration": r.iteration, "region": r.region, "abs_gap": r.abs_gap, "level": r.level}
        for r in ledger
    ]
    return ReconReport(
        pixel_accuracy(image, reference, levels) if reference is not None else None,
        rmse(image, reference) if reference is not None else None,
        dose_reduction(n, N),
        wall_time_s,
        gaps,
        dict(extra),
    )


def save_difference_pgm(reconstructed, reference, path) -> None:
    """Absolute difference image, scaled to 0..255."""
    diff = np.abs(np.asarray(reconstructed, float) - np.asarray(reference, float))
    save_pgm(diff, path)
