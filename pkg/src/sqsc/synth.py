"""Two-class mixture data and IDX (MNIST-style) ingestion.

Columns of the data matrix are samples: x_i = v_i * mu + z_i with labels
v_i in {-1, +1}. Every column draws its noise from its own counter-based
stream keyed by (seed, column), so generation order and thread count
cannot change the result.
"""
from __future__ import annotations

import gzip
import math
import struct
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Union

import numpy as np

_MASK64 = (1 << 64) - 1
# second key word separates the independent stream families of one seed
_STREAM_NOISE, _STREAM_MU, _STREAM_MASK, _STREAM_SUBSET = 0, 1, 2, 3


def stream(seed: int, family: int, index: int = 0) -> np.random.Generator:
    """Philox generator for one (seed, family, index) substream."""
    bitgen = np.random.Philox(key=[int(seed) & _MASK64, family],
                              counter=[0, 0, int(index), 0])
    return np.random.Generator(bitgen)


@dataclass(frozen=True)
class Noise:
    """Law of the i.i.d. noise entries (zero mean, unit variance)."""

    kind: str = "gaussian"
    dof: Optional[float] = None

    def __post_init__(self):
        if self.kind not in ("gaussian", "student_t", "rademacher"):
            raise ValueError(f"unknown noise law {self.kind!r}")
        if self.kind == "student_t" and (self.dof is None or not self.dof > 4):
            raise ValueError(f"Student-t noise needs dof > 4 for finite kurtosis, got {self.dof}")

    @classmethod
    def gaussian(cls) -> "Noise":
        return cls("gaussian")

    @classmethod
    def student_t(cls, dof: float) -> "Noise":
        return cls("student_t", float(dof))

    @classmethod
    def rademacher(cls) -> "Noise":
        return cls("rademacher")

    @property
    def kurtosis(self) -> float:
        return kurtosis(self)

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        if self.kind == "gaussian":
            return rng.standard_normal(size)
        if self.kind == "student_t":
            return rng.standard_t(self.dof, size) * math.sqrt((self.dof - 2) / self.dof)
        return rng.integers(0, 2, size).astype(float) * 2 - 1

    def spec(self) -> str:
        return f"student_t:{self.dof:g}" if self.kind == "student_t" else self.kind

    @classmethod
    def parse(cls, text: str) -> "Noise":
        head, _, arg = text.strip().lower().partition(":")
        if head in ("student_t", "student", "t"):
            return cls.student_t(float(arg or 7))
        return cls(head)


def kurtosis(noise: Noise) -> float:
    """Fourth standardized moment of the noise law."""
    if noise.kind == "gaussian":
        return 3.0
    if noise.kind == "rademacher":
        return 1.0
    return 3.0 + 6.0 / (noise.dof - 4)


@dataclass(frozen=True)
class MixtureConfig:
    p: int
    n: int
    rho: float
    balance: float = 0.5
    noise: Noise = field(default_factory=Noise.gaussian)
    mu_direction: Union[str, np.ndarray] = "ones"  # "ones", "random" or a vector
    seed: int = 0

    def __post_init__(self):
        if self.p < 2 or self.n < 2:
            raise ValueError(f"need p, n >= 2, got p={self.p}, n={self.n}")
        if not self.rho >= 0:
            raise ValueError(f"rho must be >= 0, got {self.rho}")
        if not 0 < self.balance < 1:
            raise ValueError(f"balance must lie in (0, 1), got {self.balance}")

    @property
    def c(self) -> float:
        return self.p / self.n


@dataclass(frozen=True)
class DataMatrix:
    """p x n data (columns are samples) with optional +-1 labels."""

    values: np.ndarray
    labels: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.values.ndim != 2:
            raise ValueError("data matrix must be 2-D")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("data matrix has non-finite entries")
        if self.labels is not None and len(self.labels) != self.values.shape[1]:
            raise ValueError("label count does not match the number of samples")

    @property
    def p(self) -> int:
        return self.values.shape[0]

    @property
    def n(self) -> int:
        return self.values.shape[1]


def labels_for(n: int, balance: float = 0.5) -> np.ndarray:
    """[-1, ..., -1, +1, ..., +1] with round(balance * n) leading -1s."""
    n_neg = int(math.floor(balance * n + 0.5))
    v = np.ones(n)
    v[:n_neg] = -1.0
    return v


def mean_vector(cfg: MixtureConfig) -> np.ndarray:
    """The class mean mu, scaled so that ||mu||^2 = rho."""
    direction = cfg.mu_direction
    if isinstance(direction, str):
        if direction == "ones":
            u = np.ones(cfg.p)
        elif direction == "random":
            u = stream(cfg.seed, _STREAM_MU).standard_normal(cfg.p)
        else:
            raise ValueError(f"unknown mu direction {direction!r}")
    else:
        u = np.asarray(direction, dtype=float)
        if u.shape != (cfg.p,):
            raise ValueError(f"mu direction must have length p={cfg.p}")
    norm = np.linalg.norm(u)
    if norm == 0:
        raise ValueError("mu direction is the zero vector")
    return u * (math.sqrt(cfg.rho) / norm)


def generate(cfg: MixtureConfig, threads: int = 1) -> DataMatrix:
    """Draw X = Z + mu v^T. Bit-identical for a given config."""
    v = labels_for(cfg.n, cfg.balance)
    mu = mean_vector(cfg)
    X = np.empty((cfg.p, cfg.n))

    def fill(cols: range):
        for j in cols:
            X[:, j] = cfg.noise.sample(stream(cfg.seed, _STREAM_NOISE, j), cfg.p)

    if threads <= 1:
        fill(range(cfg.n))
    else:
        step = -(-cfg.n // threads)
        blocks = [range(i, min(i + step, cfg.n)) for i in range(0, cfg.n, step)]
        with ThreadPoolExecutor(threads) as pool:
            list(pool.map(fill, blocks))
    X += np.outer(mu, v)
    return DataMatrix(X, v)


# -- IDX files -----------------------------------------------------------------

class IdxFormatError(ValueError):
    pass


_IDX_DTYPES = {0x08: ">u1", 0x09: ">i1", 0x0B: ">i2", 0x0C: ">i4", 0x0D: ">f4", 0x0E: ">f8"}


def _open_bytes(path) -> bytes:
    path = Path(path)
    with open(path, "rb") as fh:
        raw = fh.read()
    if raw[:2] == b"\x1f\x8b":
        raw = gzip.decompress(raw)
    return raw


def read_idx(path, expect_magic: Optional[int] = None) -> np.ndarray:
    """Parse an IDX file (optionally gzipped) into an array."""
    raw = _open_bytes(path)
    if len(raw) < 4:
        raise IdxFormatError(f"{path}: truncated header at offset {len(raw)}")
    zero, dtype_code, ndim = struct.unpack(">HBB", raw[:4])
    magic = (dtype_code << 8) | ndim
    if zero != 0 or dtype_code not in _IDX_DTYPES:
        raise IdxFormatError(f"{path}: bad magic 0x{struct.unpack('>I', raw[:4])[0]:08x} at offset 0")
    if expect_magic is not None and magic != expect_magic:
        raise IdxFormatError(f"{path}: expected magic 0x{expect_magic:08x}, got 0x{magic:08x} at offset 0")
    header_end = 4 + 4 * ndim
    if len(raw) < header_end:
        raise IdxFormatError(f"{path}: truncated dimension header at offset {len(raw)}")
    dims = struct.unpack(f">{ndim}I", raw[4:header_end])
    dtype = np.dtype(_IDX_DTYPES[dtype_code])
    need = header_end + dtype.itemsize * int(np.prod(dims))
    if len(raw) < need:
        raise IdxFormatError(f"{path}: truncated payload at offset {len(raw)} (expected {need} bytes)")
    return np.frombuffer(raw, dtype=dtype, count=int(np.prod(dims)), offset=header_end).reshape(dims)


def write_idx(path, array: np.ndarray) -> None:
    codes = {np.dtype("uint8"): 0x08, np.dtype("int8"): 0x09, np.dtype(">i2"): 0x0B,
             np.dtype(">i4"): 0x0C, np.dtype(">f4"): 0x0D, np.dtype(">f8"): 0x0E}
    arr = np.asarray(array)
    if arr.dtype.kind != "u" or arr.itemsize != 1:
        arr = arr.astype(arr.dtype.newbyteorder(">"))
    code = codes[arr.dtype]
    with open(path, "wb") as fh:
        fh.write(struct.pack(">HBB", 0, code, arr.ndim))
        fh.write(struct.pack(f">{arr.ndim}I", *arr.shape))
        fh.write(arr.tobytes())


def load_idx(images_path, labels_path, class_a: int, class_b: int, n: int,
             seed: int = 0) -> DataMatrix:
    """Two-class subset of an IDX image set as a p x n matrix in [0, 1].

    Labels are -1 for ``class_a`` and +1 for ``class_b``; n/2 samples of each
    class are drawn without replacement from a seeded stream.
    """
    if class_a == class_b:
        raise ValueError("class_a and class_b must differ")
    if n < 2 or n % 2:
        raise ValueError(f"n must be an even number >= 2, got {n}")
    images = read_idx(images_path, expect_magic=0x0803)
    labels = read_idx(labels_path, expect_magic=0x0801)
    if images.shape[0] != labels.shape[0]:
        raise IdxFormatError(f"{images.shape[0]} images but {labels.shape[0]} labels")
    half = n // 2
    rng = stream(seed, _STREAM_SUBSET)
    picks = []
    for cls in (class_a, class_b):
        pool = np.flatnonzero(labels == cls)
        if len(pool) < half:
            raise ValueError(f"class {cls} has {len(pool)} samples, need {half}")
        picks.append(np.sort(rng.choice(pool, size=half, replace=False)))
    idx = np.concatenate(picks)
    X = images[idx].reshape(n, -1).astype(float).T / 255.0
    v = np.concatenate([-np.ones(half), np.ones(half)])
    return DataMatrix(np.ascontiguousarray(X), v)


def standardize(X: DataMatrix) -> DataMatrix:
    """Remove the global mean sample, then rescale so the mean squared entry is 1."""
    values = X.values
    if values.shape[1] < 2:
        raise ValueError("standardize needs n >= 2")
    centered = values - values.mean(axis=1, keepdims=True)
    ms = np.mean(centered * centered)
    if not ms > 0:
        raise ValueError("zero-variance input cannot be standardized")
    return DataMatrix(centered / math.sqrt(ms), X.labels)
