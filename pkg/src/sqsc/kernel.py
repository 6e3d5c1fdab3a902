"""Compressed kernel matrices K_ij = 1[i != j] f(x_i^T x_j / sqrt p) / sqrt p.

Gram entries are produced panel by panel (row block against the columns at
or right of it) with compensated accumulation over chunks of the feature
axis, then compressed on the fly. Dense and sparse layouts consume the same
panels, so every stored entry is bit-identical between the two.
"""
from __future__ import annotations

import io
import math
import struct
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Union

import numpy as np
import scipy.sparse as sp

from .nonlin import Kind, Nonlinearity, center, storage_bits, to_spec
from .synth import _STREAM_MASK, DataMatrix, stream

ROW_BLOCK = 256
FEATURE_CHUNK = 512


@dataclass
class SparseSymKernel:
    """Strict upper triangle in CSR form; the lower half is implied.

    ``values`` holds raw reals, or uint8 codebook indices when ``codebook``
    is set. Entry (i, j) is ``decoded_value * scale``.
    """

    n: int
    row_ptr: np.ndarray
    col_idx: np.ndarray
    values: np.ndarray
    scale: float
    codebook: Optional[np.ndarray] = None
    f_spec: str = ""
    _upper: Optional[sp.csr_matrix] = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        self.row_ptr = np.asarray(self.row_ptr, dtype=np.int64)
        self.col_idx = np.asarray(self.col_idx, dtype=np.int32)
        if self.row_ptr.shape != (self.n + 1,) or self.row_ptr[0] != 0:
            raise ValueError("row_ptr must have length n + 1 and start at 0")
        if self.row_ptr[-1] != len(self.col_idx) or len(self.values) != len(self.col_idx):
            raise ValueError("nnz inconsistent with row_ptr")

    @property
    def nnz(self) -> int:
        """Stored (upper-triangle) entries; the full matrix has twice as many."""
        return int(self.row_ptr[-1])

    @property
    def shape(self) -> tuple[int, int]:
        return (self.n, self.n)

    def decoded(self) -> np.ndarray:
        if self.codebook is not None:
            return self.codebook[self.values]
        return np.asarray(self.values, dtype=float)

    def upper(self) -> sp.csr_matrix:
        if self._upper is None:
            self._upper = sp.csr_matrix((self.decoded() * self.scale, self.col_idx, self.row_ptr),
                                        shape=self.shape)
        return self._upper

    def matvec(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.shape[0] != self.n:
            raise ValueError(f"vector has length {x.shape[0]}, kernel has order {self.n}")
        U = self.upper()
        # two serial sparse products, fixed order: no thread-dependent rounding
        return U @ x + U.T @ x

    __matmul__ = matvec

    def to_dense(self) -> np.ndarray:
        K = np.zeros(self.shape)
        rows = np.repeat(np.arange(self.n), np.diff(self.row_ptr))
        vals = self.decoded() * self.scale
        K[rows, self.col_idx] = vals
        K[self.col_idx, rows] = vals
        return K

    def frobenius_sq(self) -> float:
        vals = self.decoded() * self.scale
        return 2.0 * float(vals @ vals)


Kernel = Union[np.ndarray, SparseSymKernel]


@dataclass
class KernelBuildReport:
    nnz: int                 # off-diagonal nonzeros of the full symmetric matrix
    sparsity: float          # nnz / (n (n - 1))
    build_wall_time: float
    bytes_estimate: float
    f_spec: str = ""
    warnings: list = field(default_factory=list)


def _compensated_gram(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    """A^T B summed over feature chunks with Kahan compensation."""
    p = A.shape[0]
    if p <= FEATURE_CHUNK:
        return A.T @ B
    total = np.zeros((A.shape[1], B.shape[1]))
    comp = np.zeros_like(total)
    for lo in range(0, p, FEATURE_CHUNK):
        part = A[lo:lo + FEATURE_CHUNK].T @ B[lo:lo + FEATURE_CHUNK] - comp
        new = total + part
        comp = (new - total) - part
        total = new
    return total


def _panel(values: np.ndarray, i0: int, block: int) -> np.ndarray:
    p, n = values.shape
    i1 = min(i0 + block, n)
    return _compensated_gram(values[:, i0:i1], values[:, i0:]) * (1.0 / math.sqrt(p))


def _strict_upper_mask(rows: int, cols: int) -> np.ndarray:
    # panel row a corresponds to global i0 + a and column b to i0 + b
    return np.arange(cols)[None, :] > np.arange(rows)[:, None]


def _compress_panel(T: np.ndarray, f: Nonlinearity):
    """Return (mask of stored entries, values or codes) for one panel."""
    upper = _strict_upper_mask(*T.shape)
    if f.kind in (Kind.QUANTIZE, Kind.BINARIZE, Kind.SIGN):
        codes, keep = f.encode(T)
        return upper & keep, codes
    vals = f(T)
    return upper & (vals != 0), vals


def build_kernel(X: Union[DataMatrix, np.ndarray], f: Nonlinearity, layout: str = "dense",
                 block: int = ROW_BLOCK, n_max: int = 16384, threads: int = 1):
    """Build K for operator ``f``; returns (kernel, KernelBuildReport)."""
    values = X.values if isinstance(X, DataMatrix) else np.asarray(X, dtype=float)
    p, n = values.shape
    if p < 2 or n < 2:
        raise ValueError(f"need p, n >= 2, got p={p}, n={n}")
    if layout not in ("dense", "sparse"):
        raise ValueError(f"layout must be 'dense' or 'sparse', got {layout!r}")
    if layout == "dense" and n > n_max:
        raise ValueError(f"dense layout refused for n={n} > n_max={n_max}; use layout='sparse'")
    notes = []
    if f.kind is Kind.CUSTOM:
        g = center(f)
        if g is not f:
            notes.append(f"custom operator centered by a0={g.offset:.6g}")
        f = g
    scale = 1.0 / math.sqrt(p)
    codebook = f.codebook()
    starts = list(range(0, n, block))
    t0 = time.perf_counter()

    def work(i0):
        T = _panel(values, i0, block)
        return _compress_panel(T, f)

    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            panels = list(pool.map(work, starts))
    else:
        panels = [work(i0) for i0 in starts]

    if layout == "dense":
        K = np.zeros((n, n))
        for i0, (mask, vals) in zip(starts, panels):
            if codebook is not None:
                vals = codebook[vals]
            sub = np.where(mask, vals, 0.0) * scale
            K[i0:i0 + sub.shape[0], i0:] = sub
        iu = np.triu_indices(n, 1)
        K[(iu[1], iu[0])] = K[iu]
        nnz_upper = int(np.count_nonzero(K[iu]))
        kernel: Kernel = K
    else:
        counts, cols, vals_out = [], [], []
        for i0, (mask, vals) in zip(starts, panels):
            rr, cc = np.nonzero(mask)  # row-major order: columns ascending per row
            counts.append(np.bincount(rr, minlength=mask.shape[0]))
            cols.append(cc + i0)
            vals_out.append(vals[rr, cc])
        row_counts = np.concatenate(counts)
        row_ptr = np.concatenate(([0], np.cumsum(row_counts)))
        col_idx = np.concatenate(cols) if cols else np.zeros(0, np.int32)
        data = np.concatenate(vals_out) if vals_out else np.zeros(0)
        if codebook is not None:
            data = data.astype(np.uint8)
        kernel = SparseSymKernel(n, row_ptr, col_idx, data, scale, codebook, to_spec(f))
        nnz_upper = kernel.nnz
    elapsed = time.perf_counter() - t0
    report = KernelBuildReport(nnz=2 * nnz_upper, sparsity=2 * nnz_upper / (n * (n - 1)),
                               build_wall_time=elapsed, bytes_estimate=storage_bits(f, n) / 8,
                               f_spec=to_spec(f), warnings=notes)
    return kernel, report


def uniform_mask_kernel(X: Union[DataMatrix, np.ndarray], eps: float, seed: int = 0,
                        block: int = ROW_BLOCK):
    """Linear kernel with each off-diagonal pair kept independently with prob. eps."""
    if not 0.0 <= eps <= 1.0:
        raise ValueError(f"eps must lie in [0, 1], got {eps}")
    values = X.values if isinstance(X, DataMatrix) else np.asarray(X, dtype=float)
    p, n = values.shape
    scale = 1.0 / math.sqrt(p)
    t0 = time.perf_counter()
    counts, cols, vals_out = [], [], []
    for i0 in range(0, n, block):
        T = _panel(values, i0, block)
        rows = T.shape[0]
        # one mask substream per row keeps the draw independent of block size
        draw = np.zeros(T.shape, dtype=bool)
        for a in range(rows):
            i = i0 + a
            width = n - i - 1
            if width > 0:
                draw[a, a + 1:] = stream(seed, _STREAM_MASK, i).random(width) < eps
        mask = draw & (T != 0)
        rr, cc = np.nonzero(mask)
        counts.append(np.bincount(rr, minlength=rows))
        cols.append(cc + i0)
        vals_out.append(T[rr, cc])
    row_ptr = np.concatenate(([0], np.cumsum(np.concatenate(counts))))
    kernel = SparseSymKernel(n, row_ptr, np.concatenate(cols), np.concatenate(vals_out),
                             scale, None, f"uniform:eps={eps!r}")
    report = KernelBuildReport(nnz=2 * kernel.nnz, sparsity=2 * kernel.nnz / (n * (n - 1)),
                               build_wall_time=time.perf_counter() - t0,
                               bytes_estimate=eps * n * n * 8.0, f_spec=kernel.f_spec)
    return kernel, report


def matvec(K: Kernel, x: np.ndarray) -> np.ndarray:
    if isinstance(K, SparseSymKernel):
        return K.matvec(x)
    x = np.asarray(x, dtype=float)
    if x.shape[0] != K.shape[0]:
        raise ValueError(f"vector has length {x.shape[0]}, kernel has order {K.shape[0]}")
    return K @ x


def to_dense(K: Kernel) -> np.ndarray:
    return K.to_dense() if isinstance(K, SparseSymKernel) else np.asarray(K)


# -- export -----------------------------------------------------------------------
#
# SQSK container, all little-endian:
#   b"SQSK" | u32 version | u32 flags (bit 0: codebook indices) | u64 n | u64 nnz
#   | u32 codebook_len | f64 scale | u32 spec_len | spec (UTF-8)
#   | i64 row_ptr[n+1] | i32 col_idx[nnz] | values (u8 or f64)[nnz] | f64 codebook[len]

SQSK_MAGIC = b"SQSK"
SQSK_VERSION = 1
_HEADER = struct.Struct("<4sIIQQIdI")


def save_sqsk(K: SparseSymKernel, path) -> None:
    spec = K.f_spec.encode("utf-8")
    cb = K.codebook if K.codebook is not None else np.zeros(0)
    flags = 1 if K.codebook is not None else 0
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(SQSK_MAGIC, SQSK_VERSION, flags, K.n, K.nnz, len(cb), K.scale, len(spec)))
        fh.write(spec)
        fh.write(K.row_ptr.astype("<i8").tobytes())
        fh.write(K.col_idx.astype("<i4").tobytes())
        fh.write(np.asarray(K.values).astype("u1" if flags else "<f8").tobytes())
        fh.write(np.asarray(cb, dtype="<f8").tobytes())


def load_sqsk(path) -> SparseSymKernel:
    raw = Path(path).read_bytes()
    if len(raw) < _HEADER.size:
        raise ValueError(f"{path}: truncated SQSK header")
    magic, version, flags, n, nnz, cb_len, scale, spec_len = _HEADER.unpack_from(raw)
    if magic != SQSK_MAGIC:
        raise ValueError(f"{path}: not an SQSK file")
    if version != SQSK_VERSION:
        raise ValueError(f"{path}: unsupported SQSK version {version}")
    buf = io.BytesIO(raw[_HEADER.size:])

    def take(count, dtype):
        dt = np.dtype(dtype)
        chunk = buf.read(count * dt.itemsize)
        if len(chunk) != count * dt.itemsize:
            raise ValueError(f"{path}: truncated SQSK payload")
        return np.frombuffer(chunk, dtype=dt).copy()

    spec = buf.read(spec_len).decode("utf-8")
    row_ptr = take(n + 1, "<i8")
    col_idx = take(nnz, "<i4")
    values = take(nnz, "u1" if flags & 1 else "<f8")
    codebook = take(cb_len, "<f8") if flags & 1 else None
    return SparseSymKernel(n, row_ptr, col_idx, values, scale, codebook, spec)


def save_mtx(K: Kernel, path) -> None:
    """Matrix Market coordinate file, symmetric storage (lower triangle, 1-based)."""
    if isinstance(K, SparseSymKernel):
        rows = np.repeat(np.arange(K.n), np.diff(K.row_ptr))
        cols, vals, n = K.col_idx, K.decoded() * K.scale, K.n
    else:
        n = K.shape[0]
        rows, cols = np.triu_indices(n, 1)
        vals = K[rows, cols]
        keep = vals != 0
        rows, cols, vals = rows[keep], cols[keep], vals[keep]
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("%%MatrixMarket matrix coordinate real symmetric\n")
        fh.write(f"{n} {n} {len(vals)}\n")
        # upper (i, j) is stored as its mirror (j, i) to satisfy the lower-triangle rule
        for i, j, v in zip(rows, cols, vals):
            fh.write(f"{j + 1} {i + 1} {float(v)!r}\n")
