"""Per-region QUBO construction.

For a region with ray matrix ``A`` (rays x region pixels) and difference
sinogram ``D``, the objective ``||A J - D||^2`` over encoded pixels
``J = offset + sum_b w_b q_b`` expands into a QUBO once the constant
``||D||^2`` is dropped. Linear terms are folded onto the diagonal
(``q^2 = q``), so the minimum equals ``-||D||^2`` whenever the region can
reproduce its contribution exactly.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from .encoding import EncodingSpec, basis_weights
from .errors import DegenerateProblemError, FormatError, InvalidArgument
from .projector import Geometry, Region, Sinogram, region_contribution, system_matrix, zero_masked_sinogram

PRUNE_TOL = 1e-12


@dataclass
class QuboProblem:
    """Upper-triangular QUBO in coordinate form.

    ``rows[k] <= cols[k]`` and entries are sorted by ``(row, col)``. The
    variable map sends variable ``v`` to image pixel ``(var_rows[v],
    var_cols[v])`` and bit ``var_bits[v]``.
    """

    n_vars: int
    rows: np.ndarray
    cols: np.ndarray
    vals: np.ndarray
    target_min: float = 0.0
    var_rows: np.ndarray | None = None
    var_cols: np.ndarray | None = None
    var_bits: np.ndarray | None = None
    _csr: tuple | None = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        self.rows = np.asarray(self.rows, dtype=np.int64)
        self.cols = np.asarray(self.cols, dtype=np.int64)
        self.vals = np.asarray(self.vals, dtype=float)
        if not (self.rows.shape == self.cols.shape == self.vals.shape):
            raise InvalidArgument("rows, cols and vals must have equal length")
        if self.rows.size and (
            np.any(self.rows > self.cols) or self.rows.min() < 0 or self.cols.max() >= self.n_vars
        ):
            raise InvalidArgument("entries must satisfy 0 <= i <= j < n_vars")

    @classmethod
    def from_dict(cls, coeffs: dict, n_vars: int | None = None, target_min: float = 0.0):
        """Build from ``{(i, j): c}``; pairs are folded to ``i <= j``."""
        acc: dict = {}
        for (i, j), c in coeffs.items():
            key = (min(i, j), max(i, j))
            acc[key] = acc.get(key, 0.0) + float(c)
        keys = sorted(acc)
        if n_vars is None:
            n_vars = 1 + max((j for _, j in keys), default=-1)
        return cls(
            n_vars,
            [k[0] for k in keys],
            [k[1] for k in keys],
            [acc[k] for k in keys],
            target_min,
        )

    @property
    def n_entries(self) -> int:
        return self.vals.size

    def as_dict(self) -> dict:
        return {(int(i), int(j)): float(c) for i, j, c in zip(self.rows, self.cols, self.vals)}

    def dense(self) -> np.ndarray:
        """Dense upper-triangular coefficient matrix."""
        Q = np.zeros((self.n_vars, self.n_vars))
        np.add.at(Q, (self.rows, self.cols), self.vals)
        return Q

    def adjacency(self):
        """``(indptr, indices, data, diag)`` with off-diagonal terms stored
        symmetrically in CSR form; built once and cached."""
        if self._csr is None:
            off = self.rows != self.cols
            r, c, v = self.rows[off], self.cols[off], self.vals[off]
            M = sp.csr_matrix(
                (np.concatenate([v, v]), (np.concatenate([r, c]), np.concatenate([c, r]))),
                shape=(self.n_vars, self.n_vars),
            )
            M.sum_duplicates()
            M.sort_indices()
            diag = np.zeros(self.n_vars)
            np.add.at(diag, self.rows[~off], self.vals[~off])
            self._csr = (
                M.indptr.astype(np.int64),
                M.indices.astype(np.int64),
                M.data.astype(float),
                diag,
            )
        return self._csr


def evaluate_energy(problem: QuboProblem, bits) -> float:
    """``sum_{i<=j} c_ij x_i x_j`` for a binary vector ``bits``."""
    x = np.asarray(bits)
    if x.shape != (problem.n_vars,):
        raise InvalidArgument(f"expected {problem.n_vars} bits, got shape {x.shape}")
    x = x.astype(float)
    return float(np.sum(problem.vals * x[problem.rows] * x[problem.cols]))


def target_minimum_energy(D) -> float:
    """Analytic QUBO minimum ``-sum D(theta, s)^2``."""
    d = D.values if isinstance(D, Sinogram) else np.asarray(D, dtype=float)
    return -float(np.sum(d * d))


def _check_target(target: Sinogram, geometry: Geometry) -> None:
    tg = target.geometry
    if (tg.angles, tg.detectors, tg.image_size) != (
        geometry.angles,
        geometry.detectors,
        geometry.image_size,
    ):
        raise InvalidArgument("target sinogram geometry does not match the working geometry")
    if not np.isclose(target.path_scale * geometry.pixel_size, 1.0, rtol=1e-9, atol=0):
        raise InvalidArgument(
            f"target path_scale {target.path_scale} inconsistent with working pixel "
            f"size {geometry.pixel_size} (expected {1 / geometry.pixel_size})"
        )


def build_region_qubo(
    fixed_image,
    region: Region,
    target_sino: Sinogram,
    geometry: Geometry,
    encoding: EncodingSpec,
) -> QuboProblem:
    """QUBO whose minimisers are region pixels best explaining
    ``target_sino - P_z`` with every pixel outside ``region`` held fixed.

    Variables are ordered row-major over region pixels, bit-minor.
    """
    _check_target(target_sino, geometry)
    fixed = np.asarray(fixed_image, dtype=float)
    region.check_inside(fixed.shape)
    Pz = zero_masked_sinogram(fixed, region, geometry)
    D = region_contribution(target_sino, Pz).values.ravel()

    pix = region.pixel_indices(geometry.image_size)
    A = system_matrix(geometry).tocsc()[:, pix]
    if A.nnz == 0:
        raise DegenerateProblemError(f"no ray crosses {region}")
    offset, w = basis_weights(encoding)
    m = w.size
    if offset != 0.0:
        D = D - offset * np.asarray(A.sum(axis=1)).ravel()
    b = A.T @ D
    G = sp.triu((A.T @ A).tocoo()).tocoo()
    gi, gj, gv = G.row.astype(np.int64), G.col.astype(np.int64), G.data

    bits = np.arange(m)
    ww = np.outer(w, w)
    # pixel pairs p < q: every bit pair couples, 2 G_pq w_b w_b'
    cross = gi < gj
    pi, pj, pg = gi[cross], gj[cross], gv[cross]
    r_cross = (pi[:, None, None] * m + bits[None, :, None]).repeat(m, axis=2)
    c_cross = (pj[:, None, None] * m + bits[None, None, :]).repeat(m, axis=1)
    v_cross = 2.0 * pg[:, None, None] * ww[None, :, :]
    # same pixel: diagonal G_pp w_b^2 - 2 w_b b_p, and 2 G_pp w_b w_b' for b < b'
    same = ~cross
    sp_, sg = gi[same], gv[same]
    gdiag = np.zeros(pix.size)
    gdiag[sp_] = sg
    p_all = np.arange(pix.size)
    r_diag = (p_all[:, None] * m + bits).ravel()
    v_diag = (gdiag[:, None] * w**2 - 2.0 * b[:, None] * w).ravel()
    bu, bv = np.triu_indices(m, k=1)
    r_in = (p_all[:, None] * m + bu).ravel()
    c_in = (p_all[:, None] * m + bv).ravel()
    v_in = (2.0 * gdiag[:, None] * (w[bu] * w[bv])).ravel()

    rows = np.concatenate([r_cross.ravel(), r_diag, r_in])
    cols = np.concatenate([c_cross.ravel(), r_diag, c_in])
    vals = np.concatenate([v_cross.ravel(), v_diag, v_in])
    keep = np.abs(vals) >= PRUNE_TOL
    rows, cols, vals = rows[keep], cols[keep], vals[keep]
    order = np.lexsort((cols, rows))

    n_vars = pix.size * m
    var_pix = np.repeat(np.arange(pix.size), m)
    return QuboProblem(
        n_vars,
        rows[order],
        cols[order],
        vals[order],
        target_min=target_minimum_energy(D),
        var_rows=region.row0 + var_pix // region.width,
        var_cols=region.col0 + var_pix % region.width,
        var_bits=np.tile(bits, pix.size),
    )


def encode_region(pixels, encoding: EncodingSpec) -> np.ndarray:
    """Bit vector (variable order of :func:`build_region_qubo`) for the
    given region pixel values."""
    from .encoding import encode

    px = np.asarray(pixels, dtype=float).ravel()
    cache: dict = {}
    out = []
    for v in px:
        if v not in cache:
            cache[v] = encode(v, encoding)
        out.append(cache[v])
    return np.concatenate(out) if out else np.zeros(0, np.uint8)


def decode_solution(bits, problem: QuboProblem, encoding: EncodingSpec, shape=None) -> np.ndarray:
    """Region pixel values from a solution vector, shaped like the region."""
    x = np.asarray(bits, dtype=float)
    if x.shape != (problem.n_vars,):
        raise InvalidArgument(f"expected {problem.n_vars} bits, got shape {x.shape}")
    offset, w = basis_weights(encoding)
    vals = offset + x.reshape(-1, w.size) @ w
    if shape is None:
        if problem.var_rows is None:
            return vals
        h = int(problem.var_rows.max() - problem.var_rows.min() + 1)
        shape = (h, vals.size // h)
    return vals.reshape(shape)


# -- file format ------------------------------------------------------------


def _fmt(v: float) -> str:
    return format(float(v), ".17g")


def save_qubo(problem: QuboProblem, path, varmap_path=None) -> None:
    lines = [f"QUBO {problem.n_vars} {problem.n_entries} {_fmt(problem.target_min)}"]
    lines += [f"{i} {j} {_fmt(c)}" for i, j, c in zip(problem.rows, problem.cols, problem.vals)]
    Path(path).write_text("\n".join(lines) + "\n")
    if varmap_path is not None and problem.var_rows is not None:
        vm = [
            f"{v} {r} {c} {b}"
            for v, (r, c, b) in enumerate(zip(problem.var_rows, problem.var_cols, problem.var_bits))
        ]
        Path(varmap_path).write_text("\n".join(vm) + "\n")


def load_qubo(path, varmap_path=None) -> QuboProblem:
    lines = [ln for ln in Path(path).read_text().splitlines() if ln.strip()]
    if not lines:
        raise FormatError(f"{path}: empty file")
    head = lines[0].split()
    if len(head) != 4 or head[0] != "QUBO":
        raise FormatError(f"{path}: bad header {lines[0]!r}")
    try:
        n, ne, tmin = int(head[1]), int(head[2]), float(head[3])
        ent = [ln.split() for ln in lines[1:]]
        rows = [int(e[0]) for e in ent]
        cols = [int(e[1]) for e in ent]
        vals = [float(e[2]) for e in ent]
    except (ValueError, IndexError) as exc:
        raise FormatError(f"{path}: {exc}") from None
    if len(ent) != ne:
        raise FormatError(f"{path}: header says {ne} entries, found {len(ent)}")
    try:
        prob = QuboProblem(n, rows, cols, vals, tmin)
    except InvalidArgument as exc:
        raise FormatError(f"{path}: {exc}") from None
    if varmap_path is not None:
        vm = np.loadtxt(varmap_path, dtype=np.int64, ndmin=2)
        if vm.shape != (n, 4) or np.any(vm[:, 0] != np.arange(n)):
            raise FormatError(f"{varmap_path}: var map does not cover 0..{n - 1}")
        prob.var_rows, prob.var_cols, prob.var_bits = vm[:, 1], vm[:, 2], vm[:, 3]
    return prob
