"""Large-dimensional predictions for compressed kernel spectra.

Everything here is a deterministic function of the scalars (a1, a2, nu, c,
kappa, rho, eta). The Stieltjes transform m(z) of the limiting spectral
measure solves

    -1/m = z + a1^2 m / (c + a1 m) + (nu - a1^2) m / c,

whose functional inverse x(m) (the right-hand side with z removed) drives the
support edges and the spike locations.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field, replace
from typing import Optional, Sequence

import numpy as np
from scipy.optimize import brentq
from scipy.special import erfc, erfcinv

from . import nonlin
from .nonlin import Nonlinearity

REAL_TOL = 1e-8          # |Im r| <= REAL_TOL (1 + |r|) counts as a real root
RESIDUAL_TOL = 1e-10


class DomainError(ValueError):
    """Model outside the domain of a formula (e.g. a1 <= 0)."""


class StieltjesError(RuntimeError):
    def __init__(self, message: str, candidates):
        super().__init__(message)
        self.candidates = candidates


@dataclass(frozen=True)
class SpectrumModel:
    a1: float
    a2: float
    nu: float
    c: float
    kappa: float = 3.0
    rho: float = 0.0
    eta: float = 0.0

    def __post_init__(self):
        if not self.c > 0:
            raise DomainError(f"c must be positive, got {self.c}")
        if not self.nu > 0:
            raise DomainError(f"degenerate model: nu must be positive, got {self.nu}")
        if self.nu < self.a1 ** 2 + self.a2 ** 2 - 1e-12 * max(1.0, self.nu):
            raise DomainError(f"nu = {self.nu} < a1^2 + a2^2 = {self.a1**2 + self.a2**2}")
        if not self.rho >= 0:
            raise DomainError(f"rho must be >= 0, got {self.rho}")
        if abs(self.eta) > 1:
            raise DomainError(f"|eta| must be <= 1, got {self.eta}")
        if not self.kappa >= 1:
            raise DomainError(f"kurtosis must be >= 1, got {self.kappa}")

    @classmethod
    def from_nonlinearity(cls, f: Nonlinearity, c: float, kappa: float = 3.0, rho: float = 0.0,
                          eta: float = 0.0) -> "SpectrumModel":
        h = nonlin.coefficients(f)
        return cls(h.a1, h.a2, h.nu, c, kappa, rho, eta)

    @property
    def excess(self) -> float:
        """nu - a1^2, clipped at 0 against rounding."""
        return max(self.nu - self.a1 ** 2, 0.0)

    def with_(self, **changes) -> "SpectrumModel":
        return replace(self, **changes)


# -- polynomial machinery -------------------------------------------------------

def _trim(coeffs) -> np.ndarray:
    """Drop leading coefficients that vanish relative to the largest one."""
    coeffs = np.asarray(coeffs, dtype=complex)
    scale = np.max(np.abs(coeffs))
    if scale == 0:
        raise ValueError("zero polynomial")
    k = 0
    while k < len(coeffs) - 1 and abs(coeffs[k]) <= 1e-14 * scale:
        k += 1
    return coeffs[k:]


def _newton(coeffs: np.ndarray, r, steps: int = 2):
    d = np.polyder(coeffs)
    for _ in range(steps):
        dp = np.polyval(d, r)
        step = np.where(dp != 0, np.polyval(coeffs, r) / np.where(dp != 0, dp, 1), 0)
        r = r - step
    return r


def poly_roots(coeffs) -> np.ndarray:
    """All roots via companion-matrix eigenvalues, each polished by Newton."""
    c = _trim(coeffs)
    if len(c) == 1:
        return np.zeros(0, dtype=complex)
    roots = np.roots(c)
    polished = _newton(c, roots.astype(complex))
    # keep the polish only where it helped
    better = np.abs(np.polyval(c, polished)) <= np.abs(np.polyval(c, roots))
    return np.where(better, polished, roots)


def real_roots(coeffs) -> np.ndarray:
    r = poly_roots(coeffs)
    keep = np.abs(r.imag) <= REAL_TOL * (1 + np.abs(r))
    c = _trim(coeffs).real
    out = _newton(c, r[keep].real.astype(float), steps=1)
    return np.sort(out)


# -- master equation ---------------------------------------------------------------

def inverse_x(model: SpectrumModel, m):
    """x(m) = -1/m - a1^2 m/(c + a1 m) - (nu - a1^2) m / c."""
    a1, c = model.a1, model.c
    return -1.0 / m - a1 * a1 * m / (c + a1 * m) - (model.nu - a1 * a1) * m / c


def inverse_x_prime(model: SpectrumModel, m):
    a1, c = model.a1, model.c
    return 1.0 / (m * m) - a1 * a1 * c / (c + a1 * m) ** 2 - (model.nu - a1 * a1) / c


def master_residual(model: SpectrumModel, m, z):
    """|1 + m (z + a1^2 m/(c + a1 m) + (nu - a1^2) m/c)|, zero at a solution."""
    return np.abs(1.0 + m * (z - inverse_x(model, m) - 1.0 / m))


def _cubic_coeffs(model: SpectrumModel, z):
    a1, nu, c = model.a1, model.nu, model.c
    z = np.asarray(z, dtype=complex)
    c3 = a1 * (nu - a1 * a1) * np.ones_like(z)
    c2 = c * (z * a1 + nu)
    c1 = c * (z * c + a1)
    c0 = c * c * np.ones_like(z)
    return c3, c2, c1, c0


def _roots_batch(model: SpectrumModel, z: np.ndarray) -> np.ndarray:
    """Roots of the cleared master equation for each z; shape (len(z), 3), NaN-padded."""
    c3, c2, c1, c0 = _cubic_coeffs(model, z)
    scale = max(abs(model.c) ** 2, abs(model.c * model.nu), 1.0)
    out = np.full((len(z), 3), np.nan + 0j)
    if abs(c3[0]) > 1e-14 * scale:
        comp = np.zeros((len(z), 3, 3), dtype=complex)
        comp[:, 0, 0] = -c2 / c3
        comp[:, 0, 1] = -c1 / c3
        comp[:, 0, 2] = -c0 / c3
        comp[:, 1, 0] = 1
        comp[:, 2, 1] = 1
        out[:] = np.linalg.eigvals(comp)
        coeffs = (c3, c2, c1, c0)
    else:
        quad = np.abs(c2) > 1e-14 * scale
        disc = np.sqrt(c1 * c1 - 4 * c2 * c0)
        # numerically stable pair: q = -(b + sign b sqrt(disc))/2
        sgn = np.where((np.conj(c1) * disc).real >= 0, 1.0, -1.0)
        q = -0.5 * (c1 + sgn * disc)
        safe_q = np.where(q != 0, q, 1)
        r1 = np.where(quad, q / np.where(quad, c2, 1), -c0 / np.where(c1 != 0, c1, 1))
        r2 = np.where(quad & (q != 0), c0 / safe_q, np.nan)
        out[:, 0], out[:, 1] = r1, r2
        coeffs = (np.zeros_like(c2), c2, c1, c0)
    # Newton polish on the cubic (or its trimmed form)
    c3_, c2_, c1_, c0_ = (np.asarray(a)[:, None] for a in coeffs)
    r = out
    for _ in range(2):
        p = ((c3_ * r + c2_) * r + c1_) * r + c0_
        dp = (3 * c3_ * r + 2 * c2_) * r + c1_
        ok = np.isfinite(r) & (dp != 0)
        new = np.where(ok, r - p / np.where(ok, dp, 1), r)
        improve = np.abs(((c3_ * new + c2_) * new + c1_) * new + c0_) <= np.abs(p)
        r = np.where(ok & improve, new, r)
    return r


def _select(model: SpectrumModel, z: np.ndarray, roots: np.ndarray) -> np.ndarray:
    """Pick the Stieltjes branch: Im m Im z > 0 and |m| <= 1/|Im z|."""
    s = np.sign(z.imag)[:, None]
    finite = np.isfinite(roots)
    bound = 1.0 / np.abs(z.imag)[:, None] * (1 + 1e-8)
    im = np.where(finite, roots.imag * s, -np.inf)
    admissible = finite & (np.abs(roots) <= bound)
    score = np.where(admissible, im, -np.inf)
    # largest signed imaginary part among admissible roots; the true branch is
    # the only one with positive sign, others sit at O(Im z) or below zero
    idx = np.argmax(score, axis=1)
    none = ~np.isfinite(np.max(score, axis=1))
    if np.any(none):
        idx = np.where(none, np.argmax(np.where(finite, roots.imag * s, -np.inf), axis=1), idx)
    return roots[np.arange(len(z)), idx]


def stieltjes_many(model: SpectrumModel, z, check: bool = True) -> np.ndarray:
    """Vectorized Stieltjes transform for complex z with Im z != 0."""
    z = np.atleast_1d(np.asarray(z, dtype=complex))
    if np.any(z.imag == 0):
        raise ValueError("stieltjes_many needs Im z != 0; use stieltjes() for real z")
    roots = _roots_batch(model, z)
    m = _select(model, z, roots)
    if check:
        res = master_residual(model, m, z)
        bad = ~(res <= RESIDUAL_TOL)
        if np.any(bad):
            i = int(np.flatnonzero(bad)[0])
            raise StieltjesError(f"no admissible root at z={z[i]} (residual {res[i]:.3e})",
                                 roots[i].tolist())
    return m


def stieltjes(model: SpectrumModel, z: complex, bracket: Optional[Sequence[float]] = None) -> complex:
    """m(z) on the branch with Im m Im z >= 0.

    Real z must lie outside the support (pass ``bracket`` = (left, right) edges
    to have that checked); the real root continuous with the upper half-plane
    is returned.
    """
    z = complex(z)
    if z.imag != 0:
        return complex(stieltjes_many(model, [z])[0])
    if bracket is not None and bracket[0] <= z.real <= bracket[1]:
        raise DomainError(f"real z={z.real} lies inside the support bracket {tuple(bracket)}")
    ref = complex(stieltjes_many(model, [z + 1e-9j], check=False)[0])
    roots = _roots_batch(model, np.array([z]))[0]
    roots = roots[np.isfinite(roots)]
    real = roots[np.abs(roots.imag) <= REAL_TOL * (1 + np.abs(roots))]
    if len(real) == 0:
        raise StieltjesError(f"no real root at real z={z.real}; is it inside the support?",
                             roots.tolist())
    m = real[np.argmin(np.abs(real - ref))].real
    res = float(master_residual(model, m, z.real))
    if not res <= RESIDUAL_TOL:
        raise StieltjesError(f"residual {res:.3e} at z={z.real}", roots.tolist())
    return complex(m, 0.0)


def density(model: SpectrumModel, x, eps_im: float = 1e-6, richardson: bool = False) -> np.ndarray:
    """Limiting eigenvalue density Im m(x + i eps)/pi on a real grid."""
    if not eps_im > 0:
        raise ValueError("eps_im must be positive")
    x = np.asarray(x, dtype=float)
    flat = x.ravel()
    rho = stieltjes_many(model, flat + 1j * eps_im).imag / math.pi
    if richardson:
        half = stieltjes_many(model, flat + 0.5j * eps_im).imag / math.pi
        rho = 2 * half - rho
    return rho.reshape(x.shape)


# -- support --------------------------------------------------------------------

@dataclass(frozen=True)
class SupportDescription:
    edges: tuple[float, ...]

    @property
    def components(self) -> int:
        return len(self.edges) // 2

    @property
    def intervals(self) -> list[tuple[float, float]]:
        e = self.edges
        return [(e[i], e[i + 1]) for i in range(0, len(e), 2)]

    @property
    def left(self) -> float:
        return self.edges[0]

    @property
    def right(self) -> float:
        return self.edges[-1]

    def contains(self, x: float, margin: float = 0.0) -> bool:
        return any(a - margin <= x <= b + margin for a, b in self.intervals)


def edge_polynomial(model: SpectrumModel) -> np.ndarray:
    """x'(m) = 0 cleared of denominators, coefficients from m^4 down."""
    a1, c = model.a1, model.c
    d = model.nu - a1 * a1
    return np.array([-a1 * a1 * d, -2 * c * a1 * d, c * a1 * a1 - a1 * a1 * c * c - d * c * c,
                     2 * c * c * a1, c ** 3])


def support_edges(model: SpectrumModel) -> SupportDescription:
    a1, c = model.a1, model.c
    roots = real_roots(edge_polynomial(model))
    keep = [r for r in roots
            if abs(r) > 1e-12 and not (a1 != 0 and abs(r + c / a1) <= 1e-12 * (1 + abs(c / a1)))]
    edges = sorted(float(inverse_x(model, r)) for r in keep)
    if len(edges) % 2 == 1 and abs(model.nu - a1 * a1) <= 1e-12 * model.nu and a1 != 0:
        # Marchenko-Pastur at c = 1: hard edge where the Wishart part vanishes
        edges = sorted(edges + [-a1])
    if len(edges) not in (2, 4):
        raise RuntimeError(f"unexpected number of support edges {len(edges)}: {edges}")
    return SupportDescription(tuple(edges))


# -- spikes ---------------------------------------------------------------------

@dataclass
class SpikePrediction:
    location: float
    m_value: float
    informative: bool
    alignment: Optional[float]  # None when no closed form applies

    def to_json(self) -> dict:
        return {"z": self.location, "m": self.m_value, "informative": self.informative,
                "alpha": self.alignment}


@dataclass
class SpikeReport:
    spikes: list
    rejected: list = field(default_factory=list)  # (candidate m, reason)


def noninformative_spikes(model: SpectrumModel, diagnostics: bool = False):
    """Label-free spikes driven by a2 and the noise kurtosis."""
    report = SpikeReport([])
    a1, a2, c, kappa = model.a1, model.a2, model.c, model.kappa
    if a2 == 0 or kappa == 1:
        return report if diagnostics else report.spikes
    edges = support_edges(model)
    root = (1.0 / a2) * math.sqrt(2.0 / (kappa - 1))
    for x in (root, -root):
        if abs(a1 * x + 1) <= 1e-12:
            report.rejected.append((c * x, "a1 x = -1 (pole of x(m))"))
            continue
        lhs = model.excess * x * x + a1 * a1 * x * x / (1 + a1 * x) ** 2
        if not lhs < 1.0 / c:
            report.rejected.append((c * x, "inside the bulk (x'(m) <= 0)"))
            continue
        if abs(a1 * x - 1) <= 1e-12:
            z = -model.nu / a1 - a1 * (2 - c) / (2 * c)
        else:
            z = -1.0 / (c * x) - a1 * a1 * x / (1 + a1 * x) - model.excess * x
        if edges.contains(z):
            report.rejected.append((c * x, "location inside the support"))
            continue
        report.spikes.append(SpikePrediction(float(z), float(c * x), False, 0.0))
    report.spikes.sort(key=lambda s: s.location)
    return report if diagnostics else report.spikes


def F_poly(model: SpectrumModel) -> np.ndarray:
    a1, c, nu = model.a1, model.c, model.nu
    return np.array([1.0, 2.0, 1 - c * nu / (a1 * a1), -2 * c, -c])


def F(model: SpectrumModel, x):
    return np.polyval(F_poly(model), x)


def G(model: SpectrumModel, x):
    a1, c = model.a1, model.c
    return (a1 / c) * (1 + x) + a1 / x + (model.excess / a1) / (1 + x)


def _require_informative_domain(model: SpectrumModel):
    if not model.a1 > 0:
        raise DomainError(f"a1 = {model.a1} <= 0: no informative spike on the right; "
                          "negate the operator (use -K) to study it")
    if model.a2 != 0 and model.eta != 0:
        raise DomainError("informative spike formulas need a2 = 0 or balanced classes (eta = 0)")


def phase_transition(model: SpectrumModel) -> float:
    """Largest real root gamma of F; the SNR threshold for an informative spike."""
    _require_informative_domain(model)
    coeffs = F_poly(model)
    roots = real_roots(coeffs)
    if len(roots) == 0:
        raise RuntimeError("F has no real root")
    gamma = float(_newton(coeffs, roots[-1], steps=1))
    lo, hi = math.sqrt(model.c), math.sqrt(model.c * model.nu) / model.a1
    slack = 1e-9 * (1 + hi)
    if not lo - slack <= gamma <= hi + slack:
        raise RuntimeError(f"gamma = {gamma} outside the bracket [{lo}, {hi}]")
    return min(max(gamma, lo), hi)


def _alignment_from_m(model: SpectrumModel, m: float) -> float:
    a1, c, rho = model.a1, model.c, model.rho
    val = (rho / (1 + rho)) * (1 - a1 * a1 * c * m * m / (c + a1 * m) ** 2 - model.excess * m * m / c)
    return float(min(max(val, 0.0), 1.0))


def informative_spike(model: SpectrumModel) -> SpikePrediction:
    """Location and eigenvector alignment of the label-carrying spike."""
    gamma = phase_transition(model)
    rho, a1, c = model.rho, model.a1, model.c
    if rho > gamma:
        alpha = float(F(model, rho) / (rho * (1 + rho) ** 3))
        return SpikePrediction(float(G(model, rho)), -c / (a1 * (1 + rho)), True,
                               min(max(alpha, 0.0), 1.0))
    return SpikePrediction(float(G(model, gamma)), -c / (a1 * (1 + gamma)), False, 0.0)


def H_poly(model: SpectrumModel) -> np.ndarray:
    a1, a2, c, k, rho, eta = model.a1, model.a2, model.c, model.kappa, model.rho, model.eta
    return np.array([a1 * a2 * a2 * (k - 1) * (eta * eta * rho - 1 - rho),
                     -a2 * a2 * c * (k - 1),
                     2 * a1 * c * c * (rho + 1),
                     2 * c ** 3])


def general_spikes(model: SpectrumModel) -> list[SpikePrediction]:
    """All isolated eigenvalues (up to three) from the real roots of H."""
    a1, c = model.a1, model.c
    edges = support_edges(model)
    m_rho = -c / (a1 * (1 + model.rho)) if a1 != 0 else None
    closed_form = model.eta == 0 or model.a2 == 0
    out = []
    for m in real_roots(H_poly(model)):
        if abs(m) <= 1e-12 or (a1 != 0 and abs(c + a1 * m) <= 1e-12 * c):
            continue
        if not inverse_x_prime(model, m) > 0:
            continue
        z = float(inverse_x(model, m))
        if edges.contains(z):
            continue
        informative = m_rho is not None and abs(m - m_rho) <= 1e-8 * (1 + abs(m_rho))
        if informative:
            alpha = _alignment_from_m(model, m_rho) if closed_form else None
            m = m_rho
        else:
            alpha = 0.0 if closed_form else None
        out.append(SpikePrediction(z, float(m), bool(informative), alpha))
    out.sort(key=lambda s: s.location)
    return out


# -- classification performance --------------------------------------------------

def misclassification(alpha):
    """Asymptotic error rate of sign-thresholding the top eigenvector."""
    a = np.asarray(alpha, dtype=float)
    if np.any(a >= 1) or np.any(a < 0):
        raise DomainError("alignment must lie in [0, 1)")
    out = 0.5 * erfc(np.sqrt(a / (2 - 2 * a)))
    return float(out) if out.ndim == 0 else out


def alignment_for_error(error: float) -> float:
    """Inverse of ``misclassification`` on (0, 0.5]."""
    if not 0 < error <= 0.5:
        raise DomainError("target error must lie in (0, 0.5]")
    q = float(erfcinv(2 * error))
    return 2 * q * q / (1 + 2 * q * q)


@dataclass
class OptimalThreshold:
    family: str
    M: Optional[int]
    s_opt: float
    a1: float
    nu: float
    sparsity: float

    @property
    def nu_over_a1sq(self) -> float:
        return self.nu / self.a1 ** 2

    def to_json(self) -> dict:
        d = asdict(self)
        d["nu_over_a1sq"] = self.nu_over_a1sq
        return d


def _binarize_condition(s: float) -> float:
    return s - math.exp(-s * s) / (2 * math.sqrt(math.pi) * math.erfc(s))


def _quantize_condition(M: int, s: float) -> float:
    f = Nonlinearity.quantize(M, s)
    h = nonlin.coefficients_closed_form(f)
    da1, dnu = nonlin.coefficient_derivatives(f)
    return (h.a1 * dnu - 2 * da1 * h.nu) / (h.a1 * h.nu)


def optimal_threshold(family: str, M: Optional[int] = None) -> OptimalThreshold:
    """Threshold s minimizing nu/a1^2 (hence the asymptotic error) for f3 or f2."""
    family = family.lower()
    if family == "binarize":
        s = brentq(_binarize_condition, 1e-3, 3.0, xtol=1e-14)
        f = Nonlinearity.binarize(s)
    elif family == "quantize":
        if M is None or int(M) < 2:
            raise DomainError("quantize needs an integer M >= 2")
        M = int(M)
        grid = np.arange(0.05, 6.0, 0.05)
        vals = [_quantize_condition(M, s) for s in grid]
        hit = next((i for i in range(len(grid) - 1) if vals[i] < 0 <= vals[i + 1]), None)
        if hit is None:
            raise RuntimeError(f"no bracket for the optimal threshold at M={M}")
        s = brentq(lambda t: _quantize_condition(M, t), grid[hit], grid[hit + 1], xtol=1e-14)
        f = Nonlinearity.quantize(M, s)
    else:
        raise DomainError(f"family must be 'binarize' or 'quantize', got {family!r}")
    h = nonlin.coefficients_closed_form(f)
    return OptimalThreshold(family, M if family == "quantize" else None, float(s), h.a1, h.nu,
                            nonlin.sparsity_level(f))


# -- sparsification baselines ------------------------------------------------------

@dataclass(frozen=True)
class UniformEquivalent:
    eps_unif: float
    eps_selec: float
    ratio: float
    asymptote: Optional[float]  # 1/(2(1 + s^2)), reported for s >= 3


def uniform_equivalent(s: float) -> UniformEquivalent:
    """Sparsity of a uniform mask matching thresholding at s, and the selective one."""
    if s < 0:
        raise DomainError("s must be >= 0")
    eps_selec = math.erfc(s)
    eps_unif = eps_selec + 2 * s * math.exp(-s * s) / math.sqrt(math.pi)
    asym = 1.0 / (2 * (1 + s * s)) if s >= 3 else None
    return UniformEquivalent(eps_unif, eps_selec, eps_selec / eps_unif, asym)


def uniform_model(c: float, eps: float, rho: float = 0.0) -> SpectrumModel:
    """Linear kernel with a Bernoulli(eps) mask: a1 = 1, nu = 1/eps."""
    if not 0 < eps <= 1:
        raise DomainError("eps must lie in (0, 1]")
    return SpectrumModel(1.0, 0.0, 1.0 / eps, c, rho=rho)


def subsample_model(model: SpectrumModel, eps_sub: float) -> SpectrumModel:
    if not 0 < eps_sub <= 1:
        raise DomainError("eps_sub must lie in (0, 1]")
    return model.with_(nu=model.a1 ** 2, c=model.c / eps_sub)


@dataclass(frozen=True)
class TheoryPoint:
    gamma: float
    lam: float
    alpha: float


def subsampling_theory(model: SpectrumModel, eps_sub: float) -> TheoryPoint:
    """Phase transition and spike of a linear kernel on an eps_sub fraction of samples."""
    sub = subsample_model(model, eps_sub)
    spike = informative_spike(sub)
    return TheoryPoint(phase_transition(sub), spike.location, spike.alignment)


def method_model(method: str, c: float, eps: float, rho: float = 0.0) -> SpectrumModel:
    """Model for selective (f1 at s = erfcinv(eps)), uniform, or subsample at budget eps."""
    if not 0 < eps <= 1:
        raise DomainError("eps must lie in (0, 1]")
    if method == "selective":
        s = float(erfcinv(eps)) if eps < 1 else 0.0
        h = nonlin.coefficients_closed_form(Nonlinearity.sparse(max(s, 0.0)))
        return SpectrumModel(h.a1, 0.0, h.nu, c, rho=rho)
    if method == "uniform":
        return uniform_model(c, eps, rho)
    if method == "subsample":
        return SpectrumModel(1.0, 0.0, 1.0, c / eps, rho=rho)
    raise DomainError(f"unknown method {method!r}")


@dataclass
class CurvePoint:
    method: str
    eps: float
    rho: Optional[float]
    status: str = "ok"


def rho_for_error(model: SpectrumModel, target_error: float, rho_max: float = 1e8) -> float:
    """Smallest SNR reaching ``target_error``; the phase transition for 0.5."""
    gamma = phase_transition(model)
    if target_error >= 0.5:
        return gamma
    target = alignment_for_error(target_error)

    def gap(r):
        return informative_spike(model.with_(rho=r)).alignment - target

    hi = max(2 * gamma, 1.0)
    while gap(hi) < 0:
        hi *= 2
        if hi > rho_max:
            raise DomainError(f"error {target_error} unattainable below rho = {rho_max:g}")
    return brentq(gap, gamma, hi, xtol=1e-12, rtol=1e-12)


def equi_performance_curve(target_error: float, c: float, eps_grid: Sequence[float],
                           methods: Sequence[str] = ("selective", "uniform", "subsample")
                           ) -> list[CurvePoint]:
    """SNR needed by each method to reach ``target_error`` at each sparsity budget."""
    if not 0 < target_error <= 0.5:
        raise DomainError("target_error must lie in (0, 0.5]")
    out = []
    for method in methods:
        for eps in eps_grid:
            try:
                rho = rho_for_error(method_model(method, c, float(eps)), target_error)
                out.append(CurvePoint(method, float(eps), float(rho)))
            except (DomainError, RuntimeError) as exc:
                out.append(CurvePoint(method, float(eps), None, f"unattainable: {exc}"))
    return out


# -- one-stop prediction record ---------------------------------------------------

def predict(model: SpectrumModel) -> dict:
    """JSON-ready summary of every prediction available for ``model``."""
    record = {"model": asdict(model), "a1": model.a1, "a2": model.a2, "nu": model.nu,
              "edges": list(support_edges(model).edges)}
    spikes = general_spikes(model)
    record["spikes"] = [s.to_json() for s in spikes]
    gamma = lam = alpha = err = None
    if not model.a1 > 0:
        _require_informative_domain(model)
    if model.a2 == 0 or model.eta == 0:
        gamma = phase_transition(model)
        spike = informative_spike(model)
        lam, alpha = spike.location, spike.alignment
        err = misclassification(alpha)
    record.update(gamma=gamma, **{"lambda": lam}, alpha=alpha, error_rate=err)
    return record
