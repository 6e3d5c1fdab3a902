"""Entry-wise compression operators and their Gaussian moments.

The operators act on the normalized Gram entries t = x_i^T x_j / sqrt(p).
Everything the spectral theory needs from an operator is the triple
(a1, a2, nu) of Gaussian moments, computed here either in closed form
(built-in operators) or by Gaussian quadrature (any operator).
"""
from __future__ import annotations

import math
import re
import warnings
from functools import lru_cache
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Callable, Optional, Sequence

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.special import roots_hermite

SQRT2 = math.sqrt(2.0)
SQRT_PI = math.sqrt(math.pi)
SQRT_2_OVER_PI = math.sqrt(2.0 / math.pi)

# Gaussian tail beyond this is below 1e-30 for polynomially growing integrands.
_QUAD_HALF_WIDTH = 12.0


class Kind(str, Enum):
    LINEAR = "linear"
    SPARSE = "sparse"
    QUANTIZE = "quantize"
    BINARIZE = "binarize"
    SIGN = "sign"
    CUSTOM = "custom"


@dataclass(frozen=True)
class Nonlinearity:
    """A scalar compression operator f applied to normalized Gram entries.

    Use the constructors (``Nonlinearity.sparse(1.0)`` etc.) or ``parse``.
    For ``Custom`` operators, ``breakpoints`` lists points where f is not
    smooth; quadrature splits there.
    """

    kind: Kind
    s: float = 0.0
    M: int = 2
    custom_fn: Optional[Callable[[np.ndarray], np.ndarray]] = field(default=None, compare=False)
    name: str = ""
    breakpoints: tuple[float, ...] = ()
    offset: float = 0.0  # subtracted after evaluation; set by ``centered``

    def __post_init__(self):
        kind = Kind(self.kind)
        object.__setattr__(self, "kind", kind)
        if not (self.s >= 0 and math.isfinite(self.s)):
            raise ValueError(f"threshold s must be finite and >= 0, got {self.s}")
        if kind is Kind.QUANTIZE and (int(self.M) != self.M or self.M < 2):
            raise ValueError(f"quantize needs integer M >= 2, got {self.M}")
        if kind is Kind.QUANTIZE and self.M > 9:
            # codebook indices are stored as uint8 (2^(M-1) + 2 levels)
            raise ValueError(f"quantize supports M <= 9, got {self.M}")
        if kind is Kind.CUSTOM and self.custom_fn is None:
            raise ValueError("custom operator needs custom_fn")
        if kind is Kind.SIGN and self.s != 0:
            raise ValueError("sign has no threshold; use binarize")

    # -- constructors -----------------------------------------------------
    @classmethod
    def linear(cls) -> "Nonlinearity":
        return cls(Kind.LINEAR)

    @classmethod
    def sparse(cls, s: float) -> "Nonlinearity":
        return cls(Kind.SPARSE, s=float(s))

    @classmethod
    def quantize(cls, M: int, s: float) -> "Nonlinearity":
        return cls(Kind.QUANTIZE, s=float(s), M=int(M))

    @classmethod
    def binarize(cls, s: float) -> "Nonlinearity":
        return cls(Kind.BINARIZE, s=float(s))

    @classmethod
    def sign(cls) -> "Nonlinearity":
        return cls(Kind.SIGN)

    @classmethod
    def custom(cls, fn, name: str, breakpoints: Sequence[float] = ()) -> "Nonlinearity":
        return cls(Kind.CUSTOM, custom_fn=fn, name=name,
                   breakpoints=tuple(float(b) for b in breakpoints))

    # -- evaluation -------------------------------------------------------
    @property
    def cutoff(self) -> float:
        """|t| above this is kept (sparse) or saturated (quantize/binarize)."""
        return SQRT2 * self.s

    def __call__(self, t):
        return apply(self, t)

    def codebook(self) -> Optional[np.ndarray]:
        """Finite value set for quantized/binary operators, else None."""
        if self.kind is Kind.QUANTIZE:
            levels = 2 ** (self.M - 2)
            step = 2.0 ** (2 - self.M)
            inner = step * (np.arange(-levels, levels) + 0.5)
            return np.concatenate(([-1.0], inner, [1.0]))
        if self.kind in (Kind.BINARIZE, Kind.SIGN):
            return np.array([-1.0, 1.0])
        return None

    def encode(self, t) -> tuple[np.ndarray, np.ndarray]:
        """Codebook indices for ``t`` plus a mask of nonzero outputs."""
        t = np.asarray(t, dtype=float)
        b = self.cutoff
        if self.kind is Kind.QUANTIZE:
            levels = 2 ** (self.M - 2)
            inside = np.abs(t) <= b
            if b > 0:
                with np.errstate(over="ignore"):  # only points outside overflow; masked below
                    j = np.floor(t * levels / b)
            else:
                j = np.zeros_like(t)
            # |t| = b exactly would land one level above the codebook
            j = np.clip(j, -levels, levels - 1)
            idx = np.where(inside, j + levels + 1, np.where(t > 0, 2 * levels + 1, 0))
            return idx.astype(np.uint8), np.ones(t.shape, dtype=bool)
        if self.kind in (Kind.BINARIZE, Kind.SIGN):
            keep = np.abs(t) > b
            return (t > 0).astype(np.uint8), keep
        raise TypeError(f"{self.kind.value} has no codebook")

    # -- bookkeeping ------------------------------------------------------
    def discontinuities(self) -> tuple[float, ...]:
        """Points where f jumps or kinks (used to split quadrature)."""
        b = self.cutoff
        if self.kind in (Kind.SPARSE, Kind.BINARIZE):
            return (-b, b) if b > 0 else (0.0,)
        if self.kind is Kind.SIGN:
            return (0.0,)
        if self.kind is Kind.QUANTIZE:
            if b == 0:
                return (0.0,)
            levels = 2 ** (self.M - 2)
            return tuple(b * j / levels for j in range(-levels, levels + 1))
        if self.kind is Kind.CUSTOM:
            return self.breakpoints
        return ()

    def centered(self, a0: float) -> "Nonlinearity":
        return replace(self, offset=self.offset + a0)

    def spec(self) -> str:
        return to_spec(self)

    @classmethod
    def parse(cls, text: str) -> "Nonlinearity":
        return parse_spec(text)


# -- scalar / vectorized evaluation ----------------------------------------

def apply(f: Nonlinearity, t):
    """Evaluate f at t (scalar or array).

    The boundary |t| = sqrt(2) s falls in the non-exceeding branch: zero for
    sparse/binary, the top inner level for quantize.
    """
    scalar = np.ndim(t) == 0
    x = np.asarray(t, dtype=float)
    kind = f.kind
    if kind is Kind.LINEAR:
        out = x.copy()
    elif kind is Kind.SPARSE:
        out = np.where(np.abs(x) > f.cutoff, x, 0.0)
    elif kind in (Kind.QUANTIZE, Kind.BINARIZE, Kind.SIGN):
        idx, keep = f.encode(x)
        out = np.where(keep, f.codebook()[idx], 0.0)
    else:
        out = np.asarray(f.custom_fn(x), dtype=float)
        if out.shape != x.shape:
            out = np.broadcast_to(out, x.shape).astype(float)
    if f.offset:
        out = out - f.offset
    return float(out) if scalar else out


# -- moments ----------------------------------------------------------------

@dataclass(frozen=True)
class HermiteCoefficients:
    """Gaussian moments of f: a0 = E f, a1 = E xi f, a2, nu = Var f."""

    a0: float
    a1: float
    a2: float
    nu: float

    @property
    def needs_centering(self) -> bool:
        return abs(self.a0) > 1e-12

    @property
    def ratio(self) -> float:
        """nu / a1^2 (infinite when a1 = 0)."""
        return self.nu / self.a1 ** 2 if self.a1 != 0 else math.inf


def _inner_levels(M: int) -> np.ndarray:
    return np.arange(1, 2 ** (M - 2))


def coefficients_closed_form(f: Nonlinearity) -> HermiteCoefficients:
    """Closed-form (a1, nu) of the built-in operators; a0 = a2 = 0."""
    s = f.s
    if f.kind is Kind.LINEAR:
        return HermiteCoefficients(0.0, 1.0, 0.0, 1.0)
    if f.kind is Kind.SPARSE:
        a1 = math.erfc(s) + 2 * s * math.exp(-s * s) / SQRT_PI
        return HermiteCoefficients(0.0, a1, 0.0, a1)
    if f.kind in (Kind.BINARIZE, Kind.SIGN):
        return HermiteCoefficients(0.0, math.exp(-s * s) * SQRT_2_OVER_PI, 0.0, math.erfc(s))
    if f.kind is Kind.QUANTIZE:
        M = f.M
        k = _inner_levels(M)
        q = 4.0 ** (M - 2)
        a1 = SQRT_2_OVER_PI * 2.0 ** (1 - M) * (
            1 + math.exp(-s * s) + math.fsum(2 * np.exp(-k ** 2 * s * s / q)))
        erf_k = np.array([math.erf(kk * s * 2.0 ** (2 - M)) for kk in k])
        nu = (1 - (2 ** M - 1) / 4.0 ** (M - 1) * math.erf(s)
              - math.fsum(k * erf_k) / 2.0 ** (2 * M - 5))
        return HermiteCoefficients(0.0, a1, 0.0, nu)
    raise ValueError("closed form unavailable for custom operators; use coefficients_quadrature")


def coefficient_derivatives(f: Nonlinearity) -> tuple[float, float]:
    """d a1/ds and d nu/ds for sparse, quantize and binarize operators."""
    s = f.s
    g = math.exp(-s * s)
    if f.kind is Kind.SPARSE:
        d = -4 * s * s * g / SQRT_PI
        return d, d
    if f.kind is Kind.BINARIZE:
        return -2 * s * g * SQRT_2_OVER_PI, -2 * g / SQRT_PI
    if f.kind is Kind.QUANTIZE:
        M = f.M
        k = _inner_levels(M)
        q = 4.0 ** (M - 2)
        da1 = SQRT_2_OVER_PI * 2.0 ** (1 - M) * (
            -2 * s * g + math.fsum(-4 * k ** 2 * s / q * np.exp(-k ** 2 * s * s / q)))
        r = 2.0 ** (2 - M)
        dnu = (-(2 ** M - 1) / 4.0 ** (M - 1) * 2 * g / SQRT_PI
               - math.fsum(k * (2 / SQRT_PI) * k * r * np.exp(-(k * s * r) ** 2)) / 2.0 ** (2 * M - 5))
        return da1, dnu
    raise ValueError(f"no threshold derivative for {f.kind.value}")


def _gaussian_rule(f: Nonlinearity, nodes: int) -> tuple[np.ndarray, np.ndarray]:
    """Nodes and weights integrating against the standard normal density."""
    cuts = sorted(b for b in set(f.discontinuities()) if abs(b) < _QUAD_HALF_WIDTH)
    if not cuts:
        x, w = roots_hermite(nodes)  # numpy hermgauss overflows past ~350 nodes
        return SQRT2 * x, w / SQRT_PI
    # piecewise Gauss-Legendre: each piece is smooth, so convergence is spectral
    edges = np.array([-_QUAD_HALF_WIDTH, *cuts, _QUAD_HALF_WIDTH])
    lo, hi = edges[:-1], edges[1:]
    lo, hi = lo[hi > lo], hi[hi > lo]
    gx, gw = _leggauss(nodes)
    half = 0.5 * (hi - lo)[:, None]
    x = lo[:, None] + half * (gx + 1)
    w = half * gw * np.exp(-0.5 * x * x) / math.sqrt(2 * math.pi)
    return x.ravel(), w.ravel()


@lru_cache(maxsize=16)
def _leggauss(nodes: int):
    return leggauss(nodes)


def coefficients_quadrature(f: Nonlinearity, nodes: int = 200) -> HermiteCoefficients:
    """Quadrature estimate of (a0, a1, a2, nu) against the Gaussian weight.

    Operators with known jump/kink points are integrated piecewise (``nodes``
    Gauss-Legendre points per smooth piece); smooth ones use plain
    Gauss-Hermite. A nonzero a0 is returned as is; check ``needs_centering``.
    """
    if nodes < 64:
        raise ValueError(f"need at least 64 quadrature nodes, got {nodes}")
    x, w = _gaussian_rule(f, nodes)
    fx = np.asarray(apply(f, x), dtype=float)
    if not np.all(np.isfinite(fx)):
        bad = x[~np.isfinite(fx)][0]
        raise ValueError(f"non-finite value of {to_spec(f)} at quadrature node t={bad!r}")
    a0 = math.fsum(w * fx)
    a1 = math.fsum(w * x * fx)
    a2 = (math.fsum(w * x * x * fx) - a0) / SQRT2
    nu = math.fsum(w * fx * fx) - a0 * a0
    return HermiteCoefficients(a0, a1, a2, nu)


def coefficients(f: Nonlinearity, nodes: int = 200) -> HermiteCoefficients:
    """Closed form when available, quadrature otherwise."""
    if f.kind is Kind.CUSTOM or f.offset:
        return coefficients_quadrature(f, nodes)
    return coefficients_closed_form(f)


def center(f: Nonlinearity, nodes: int = 200) -> Nonlinearity:
    """Return f with its Gaussian mean removed (no-op when a0 = 0)."""
    if f.kind is not Kind.CUSTOM:
        return f
    a0 = coefficients_quadrature(f, nodes).a0
    if abs(a0) <= 1e-12:
        return f
    warnings.warn(f"{to_spec(f)} has a0 = {a0:.6g}; subtracting it before kernel use",
                  stacklevel=2)
    return f.centered(a0)


# -- sparsity and storage -----------------------------------------------------

def sparsity_level(f: Nonlinearity) -> float:
    """Expected fraction of nonzero kernel entries in the Gaussian limit."""
    if f.kind in (Kind.SPARSE, Kind.BINARIZE, Kind.SIGN):
        return math.erfc(f.s)
    return 1.0


def bits_per_entry(f: Nonlinearity, bits_per_dense_entry: int = 64) -> int:
    if f.kind is Kind.QUANTIZE:
        return 2 ** (f.M - 2) + 1
    if f.kind in (Kind.BINARIZE, Kind.SIGN):
        return 1
    return bits_per_dense_entry


def naive_quantize_bits(M: int) -> int:
    """Bits needed to index the 2^(M-1) + 2 quantization levels."""
    return math.ceil(math.log2(2 ** (M - 1) + 2))


def storage_bits(f: Nonlinearity, n: int, bits_per_dense_entry: int = 64) -> int:
    if n < 1:
        raise ValueError("n must be >= 1")
    if bits_per_dense_entry not in (32, 64):
        raise ValueError("bits_per_dense_entry must be 32 or 64")
    return int(round(sparsity_level(f) * n * n * bits_per_entry(f, bits_per_dense_entry)))


# -- named custom operators ---------------------------------------------------

def _relu_centered(t):
    return np.maximum(t, 0.0) - 1.0 / math.sqrt(2 * math.pi)


def _sin_cos(t):
    return np.sin(t) - 3 * np.cos(t) + 3 / math.sqrt(math.e)


CUSTOM_REGISTRY = {
    "relu": (_relu_centered, (0.0,)),
    "sincos": (_sin_cos, ()),
}


def relu_centered() -> Nonlinearity:
    """max(t, 0) - 1/sqrt(2 pi)."""
    return Nonlinearity.custom(_relu_centered, "relu", breakpoints=(0.0,))


def sin_cos() -> Nonlinearity:
    """sin(t) - 3 cos(t) + 3/sqrt(e)."""
    return Nonlinearity.custom(_sin_cos, "sincos")


# -- compact string form --------------------------------------------------------

def _fmt(x: float) -> str:
    return repr(float(x))


def to_spec(f: Nonlinearity) -> str:
    if f.kind is Kind.LINEAR:
        return "linear"
    if f.kind is Kind.SIGN:
        return "sign"
    if f.kind is Kind.SPARSE:
        return f"sparse:s={_fmt(f.s)}"
    if f.kind is Kind.BINARIZE:
        return f"binarize:s={_fmt(f.s)}"
    if f.kind is Kind.QUANTIZE:
        return f"quantize:M={f.M},s={_fmt(f.s)}"
    return f"custom:{f.name or 'anonymous'}"


_SPEC_RE = re.compile(r"^\s*([a-z]+)\s*(?::\s*(.*))?$")


def parse_spec(text: str) -> Nonlinearity:
    """Parse ``linear``, ``sparse:s=1.25``, ``quantize:M=3,s=0.8``,
    ``binarize:s=0.43``, ``sign`` or ``custom:<registered name>``."""
    m = _SPEC_RE.match(text.lower())
    if not m:
        raise ValueError(f"bad operator spec {text!r}")
    head, rest = m.group(1), (m.group(2) or "").strip()
    if head == "custom":
        if rest not in CUSTOM_REGISTRY:
            raise ValueError(f"unknown custom operator {rest!r}; known: {sorted(CUSTOM_REGISTRY)}")
        fn, bps = CUSTOM_REGISTRY[rest]
        return Nonlinearity.custom(fn, rest, breakpoints=bps)
    params: dict[str, str] = {}
    if rest:
        for part in rest.split(","):
            key, sep, val = part.partition("=")
            if not sep:
                raise ValueError(f"bad parameter {part!r} in {text!r}")
            params[key.strip().lower()] = val.strip()
    allowed = {"linear": set(), "sign": set(), "sparse": {"s"}, "binarize": {"s"},
               "quantize": {"m", "s"}}
    if head not in allowed:
        raise ValueError(f"unknown operator kind {head!r}")
    extra = set(params) - allowed[head]
    missing = allowed[head] - set(params)
    if extra or missing:
        raise ValueError(f"{text!r}: expected parameters {sorted(allowed[head])}")
    try:
        if head == "linear":
            return Nonlinearity.linear()
        if head == "sign":
            return Nonlinearity.sign()
        s = float(params["s"])
        if head == "sparse":
            return Nonlinearity.sparse(s)
        if head == "binarize":
            return Nonlinearity.binarize(s)
        M = float(params["m"])
        if M != int(M):
            raise ValueError(f"M must be an integer, got {params['m']}")
        return Nonlinearity.quantize(int(M), s)
    except ValueError as exc:
        raise ValueError(f"{text!r}: {exc}") from None
