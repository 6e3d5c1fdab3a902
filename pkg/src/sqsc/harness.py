"""Monte Carlo trials and sweeps joined with the theoretical predictions."""
from __future__ import annotations

import csv
import json
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
from scipy.special import erfcinv

from . import eigen, kernel, nonlin, rmt, synth
from .nonlin import Kind, Nonlinearity
from .synth import DataMatrix, MixtureConfig

METHODS = ("selective", "uniform", "subsample", "linear")
AXES = ("rho", "s", "c", "eps", "M")

COLUMNS = ("axis_value", "repeat", "p", "n", "c", "rho", "f_spec", "method", "eps_nominal",
           "sparsity_emp", "nnz", "a1", "a2", "nu", "gamma", "alignment_theory", "alignment_emp",
           "error_theory", "error_emp", "lambda_theory", "lambda1_emp", "lambda2_emp",
           "time_kernel_s", "time_eig_s", "seed")
_TEXT_COLUMNS = {"f_spec", "method"}
_INT_COLUMNS = {"repeat", "p", "n", "nnz", "seed"}

_STREAM_SUBSAMPLE = 5


class TrialError(RuntimeError):
    """A trial failed; the original exception is chained as __cause__."""


@dataclass(frozen=True)
class TrialConfig:
    mixture: MixtureConfig
    f: Nonlinearity = field(default_factory=Nonlinearity.linear)
    method: str = "selective"
    eps: Optional[float] = None        # budget for uniform / subsample
    k_eigs: int = 2
    seed: int = 0
    layout: str = "auto"               # dense, sparse, or auto (by expected sparsity)

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"method must be one of {METHODS}, got {self.method!r}")
        if self.method in ("uniform", "subsample"):
            if self.eps is None or not 0 < self.eps <= 1:
                raise ValueError(f"{self.method} needs eps in (0, 1]")
            if self.f.kind is not Kind.LINEAR:
                raise ValueError(f"{self.method} operates on the linear kernel; got {self.f.spec()}")
        if self.method == "linear" and self.f.kind is not Kind.LINEAR:
            raise ValueError("method 'linear' requires f = linear")
        if not 1 <= self.k_eigs <= 8:
            raise ValueError("k_eigs must lie in [1, 8]")

    @property
    def eps_nominal(self) -> float:
        if self.method in ("uniform", "subsample"):
            return float(self.eps)
        return nonlin.sparsity_level(self.f)


@dataclass
class TrialResult:
    alignment_emp: float
    error_emp: float
    top_values: list
    sparsity_emp: float
    nnz: int
    time_kernel_s: float
    time_eig_s: float
    seed: int
    alignments: list = field(default_factory=list)  # |v_k^T v|^2 / n for every returned pair


def empirical_error(vector: np.ndarray, labels: Optional[np.ndarray]) -> float:
    """Fraction of sign(v) disagreeing with labels, after sign alignment.

    Without labels the two-cluster split is compared to itself, so the best of
    the two assignments is reported.
    """
    pred = np.where(vector >= 0, 1.0, -1.0)
    if labels is None:
        frac = float(np.mean(pred > 0))
        return min(frac, 1 - frac)
    aligned = eigen.sign_align(vector, labels)
    pred = np.where(aligned >= 0, 1.0, -1.0)
    err = float(np.mean(pred != labels))
    return min(err, 1.0)


def _layout(f: Nonlinearity, requested: str) -> str:
    if requested != "auto":
        return requested
    return "sparse" if nonlin.sparsity_level(f) < 0.35 else "dense"


def evaluate(X: DataMatrix, f: Nonlinearity, method: str = "selective", eps: Optional[float] = None,
             k_eigs: int = 2, seed: int = 0, layout: str = "auto") -> TrialResult:
    """Build the kernel for ``method``, extract eigenpairs and score the top one."""
    labels = X.labels
    t0 = time.perf_counter()
    if method == "uniform":
        K, report = kernel.uniform_mask_kernel(X, eps, seed=seed)
    elif method == "subsample":
        n_sub = max(2, int(round(eps * X.n)))
        pick = np.sort(synth.stream(seed, _STREAM_SUBSAMPLE).choice(X.n, n_sub, replace=False))
        X = DataMatrix(X.values[:, pick], None if labels is None else labels[pick])
        labels = X.labels
        K, report = kernel.build_kernel(X, Nonlinearity.linear(), _layout(f, layout))
    else:
        K, report = kernel.build_kernel(X, f, _layout(f, layout))
    t_kernel = time.perf_counter() - t0
    t0 = time.perf_counter()
    pairs = eigen.top_eigenpairs(K, min(k_eigs, X.n), seed=seed)
    t_eig = time.perf_counter() - t0
    top = pairs[0].vector
    if labels is not None:
        aligns = [float((p.vector @ labels) ** 2 / X.n) for p in pairs]
    else:
        aligns = [math.nan] * len(pairs)
    return TrialResult(alignment_emp=min(aligns[0], 1.0) if labels is not None else math.nan,
                       error_emp=empirical_error(top, labels),
                       top_values=[p.value for p in pairs], sparsity_emp=report.sparsity,
                       nnz=report.nnz, time_kernel_s=t_kernel, time_eig_s=t_eig, seed=seed,
                       alignments=aligns)


def run_trial(cfg: TrialConfig) -> TrialResult:
    """One seeded Monte Carlo run; identical configs give identical results."""
    mix = replace(cfg.mixture, seed=cfg.seed)
    try:
        X = synth.generate(mix)
        return evaluate(X, cfg.f, cfg.method, cfg.eps, cfg.k_eigs, cfg.seed, cfg.layout)
    except Exception as exc:
        raise TrialError(f"trial (p={mix.p}, n={mix.n}, rho={mix.rho}, f={cfg.f.spec()}, "
                        f"method={cfg.method}, seed={cfg.seed}): {exc}") from exc


# -- theory join -------------------------------------------------------------------

def theory_model(cfg: TrialConfig) -> rmt.SpectrumModel:
    mix = cfg.mixture
    c = mix.p / mix.n
    kappa = synth.kurtosis(mix.noise)
    eta = float(np.mean(synth.labels_for(mix.n, mix.balance)))  # v^T 1 / n
    if cfg.method == "uniform":
        return rmt.uniform_model(c, cfg.eps, mix.rho).with_(kappa=kappa, eta=eta)
    if cfg.method == "subsample":
        return rmt.SpectrumModel(1.0, 0.0, 1.0, c / cfg.eps, kappa, mix.rho, eta)
    h = nonlin.coefficients(cfg.f)
    return rmt.SpectrumModel(h.a1, h.a2, h.nu, c, kappa, mix.rho, eta)


def theory(cfg: TrialConfig) -> dict:
    """Predicted gamma, alignment, error and spike location (NaN when unavailable)."""
    model = theory_model(cfg)
    out = {"a1": model.a1, "a2": model.a2, "nu": model.nu, "gamma": math.nan,
           "alignment_theory": math.nan, "error_theory": math.nan, "lambda_theory": math.nan}
    if model.a1 > 0 and (model.a2 == 0 or model.eta == 0):
        spike = rmt.informative_spike(model)
        out.update(gamma=rmt.phase_transition(model), alignment_theory=spike.alignment,
                   error_theory=rmt.misclassification(spike.alignment),
                   lambda_theory=spike.location)
    return out


# -- sweeps ------------------------------------------------------------------------

@dataclass(frozen=True)
class SweepSpec:
    axis: str
    grid: tuple
    repeats: int
    base: TrialConfig
    # same seeds at every grid point (common random numbers), handy for s-sweeps
    common_random_numbers: bool = False

    def __post_init__(self):
        if self.axis not in AXES:
            raise ValueError(f"axis must be one of {AXES}, got {self.axis!r}")
        if len(self.grid) == 0:
            raise ValueError("sweep grid is empty")
        if self.repeats < 1:
            raise ValueError("repeats must be >= 1")
        object.__setattr__(self, "grid", tuple(float(g) for g in self.grid))


def derive_seed(base_seed: int, axis_index: int, repeat: int) -> int:
    """64-bit seed hashed from (base seed, grid index, repeat)."""
    words = np.random.SeedSequence([int(base_seed) & (2 ** 64 - 1), axis_index, repeat]).generate_state(2)
    return int(words[0]) << 32 | int(words[1])


def config_at(spec: SweepSpec, value: float) -> TrialConfig:
    base = spec.base
    f = base.f
    if spec.axis == "rho":
        return replace(base, mixture=replace(base.mixture, rho=value))
    if spec.axis == "c":
        return replace(base, mixture=replace(base.mixture, p=max(2, int(round(value * base.mixture.n)))))
    if spec.axis == "s":
        if f.kind is Kind.SIGN:
            f = Nonlinearity.binarize(value)
        return replace(base, f=replace(f, s=value))
    if spec.axis == "M":
        return replace(base, f=replace(f, M=int(value)))
    # eps: budget of the method; selective maps it to s = erfcinv(eps)
    if base.method == "selective":
        s = float(erfcinv(value)) if value < 1 else 0.0
        return replace(base, f=Nonlinearity.sparse(max(s, 0.0)))
    return replace(base, eps=value)


@dataclass
class SweepResult:
    rows: list
    failures: list

    def summary(self) -> list:
        return summarize(self.rows)


def _row(value: float, repeat: int, cfg: TrialConfig, th: dict, res: Optional[TrialResult]) -> dict:
    mix = cfg.mixture
    nan = math.nan
    tops = res.top_values if res else []
    row = {"axis_value": value, "repeat": repeat, "p": mix.p, "n": mix.n, "c": mix.p / mix.n,
           "rho": mix.rho, "f_spec": cfg.f.spec(), "method": cfg.method,
           "eps_nominal": cfg.eps_nominal,
           "sparsity_emp": res.sparsity_emp if res else nan, "nnz": res.nnz if res else -1,
           "alignment_emp": res.alignment_emp if res else nan,
           "error_emp": res.error_emp if res else nan,
           "lambda1_emp": tops[0] if len(tops) > 0 else nan,
           "lambda2_emp": tops[1] if len(tops) > 1 else nan,
           "time_kernel_s": res.time_kernel_s if res else nan,
           "time_eig_s": res.time_eig_s if res else nan, "seed": cfg.seed}
    row.update(th)
    return {k: row[k] for k in COLUMNS}


def run_sweep(spec: SweepSpec, threads: int = 1) -> SweepResult:
    """All (grid point, repeat) trials; rows ordered by index, never by completion."""
    jobs = []
    for gi, value in enumerate(spec.grid):
        cfg = config_at(spec, value)
        for r in range(spec.repeats):
            seed = derive_seed(spec.base.seed, 0 if spec.common_random_numbers else gi, r)
            jobs.append((value, r, replace(cfg, seed=seed)))
    theory_cache: dict = {}

    def run(job):
        value, r, cfg = job
        try:
            return run_trial(cfg), None
        except Exception as exc:
            return None, f"{type(exc).__name__}: {exc}"

    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            outcomes = list(pool.map(run, jobs))
    else:
        outcomes = [run(j) for j in jobs]
    rows, failures = [], []
    for (value, r, cfg), (res, err) in zip(jobs, outcomes):
        if value not in theory_cache:
            try:
                theory_cache[value] = theory(cfg)
            except Exception as exc:
                theory_cache[value] = {k: math.nan for k in ("a1", "a2", "nu", "gamma",
                                       "alignment_theory", "error_theory", "lambda_theory")}
                failures.append({"axis_value": value, "repeat": -1, "error": f"theory: {exc}"})
        if err is not None:
            failures.append({"axis_value": value, "repeat": r, "error": err})
        rows.append(_row(value, r, cfg, theory_cache[value], res))
    return SweepResult(rows, failures)


class Welford:
    """Running mean and variance."""

    def __init__(self):
        self.count, self.mean, self._m2 = 0, 0.0, 0.0

    def add(self, x: float):
        if not math.isfinite(x):
            return
        self.count += 1
        d = x - self.mean
        self.mean += d / self.count
        self._m2 += d * (x - self.mean)

    @property
    def variance(self) -> float:
        return self._m2 / (self.count - 1) if self.count > 1 else math.nan

    @property
    def stderr(self) -> float:
        return math.sqrt(self.variance / self.count) if self.count > 1 else math.nan


def summarize(rows: Sequence[dict],
              fields: Sequence[str] = ("alignment_emp", "error_emp", "sparsity_emp",
                                       "lambda1_emp", "time_kernel_s", "time_eig_s")) -> list:
    """Per grid point mean and standard error, theory columns carried over."""
    groups: dict = {}
    for row in rows:
        groups.setdefault(row["axis_value"], []).append(row)
    out = []
    for value, members in groups.items():
        agg = {"axis_value": value, "count": len(members)}
        for name in fields:
            w = Welford()
            for m in members:
                w.add(float(m[name]))
            agg[f"{name}_mean"] = w.mean if w.count else math.nan
            agg[f"{name}_stderr"] = w.stderr
        for name in ("gamma", "alignment_theory", "error_theory", "lambda_theory"):
            agg[name] = members[0][name]
        out.append(agg)
    return out


# -- spectrum experiment --------------------------------------------------------

@dataclass
class SpectrumResult:
    histogram: eigen.SpectrumHistogram
    grid: np.ndarray            # bin centers
    density: np.ndarray         # bin-averaged limiting density
    support: rmt.SupportDescription
    predicted_spikes: list      # SpikePrediction
    isolated: np.ndarray        # empirical eigenvalues away from the predicted bulk
    l1_bulk: float
    top_pairs: list = field(default_factory=list)
    alignments: list = field(default_factory=list)

    def rows(self) -> list:
        """Per-bin table plus predicted spikes and isolated eigenvalues (for export/plotting)."""
        e = self.histogram.bin_edges
        dens = self.histogram.normalized()
        out = [{"kind": "bin", "x_left": float(e[i]), "x_right": float(e[i + 1]),
                "count": int(self.histogram.counts[i]), "empirical_density": float(dens[i]),
                "theory_density": float(self.density[i])} for i in range(len(dens))]
        for s in self.predicted_spikes:
            out.append({"kind": "spike", "x_left": s.location, "x_right": s.location, "count": 0,
                        "empirical_density": math.nan, "theory_density": math.nan})
        for x in self.isolated:
            out.append({"kind": "isolated", "x_left": float(x), "x_right": float(x), "count": 1,
                        "empirical_density": math.nan, "theory_density": math.nan})
        return out

    def summary(self) -> dict:
        return {"edges": list(self.support.edges), "l1_bulk": self.l1_bulk,
                "isolated": [float(x) for x in self.isolated],
                "predicted_spikes": [s.to_json() for s in self.predicted_spikes],
                "top_values": [p.value for p in self.top_pairs], "top_alignments": self.alignments}


SPECTRUM_COLUMNS = ("kind", "x_left", "x_right", "count", "empirical_density", "theory_density")


def spectrum_experiment(cfg: TrialConfig, bins: int = 100, margin_bins: float = 3.0,
                        isolation_bins: float = 1.0, k_eigs: int = 4) -> SpectrumResult:
    """Full eigenvalue histogram against the limiting density and predicted spikes.

    An eigenvalue is isolated when it sits more than ``isolation_bins`` bin
    widths outside the predicted support; bins within ``margin_bins`` widths of
    an isolated eigenvalue are left out of the bulk L1 distance.
    """
    mix = replace(cfg.mixture, seed=cfg.seed)
    X = synth.generate(mix)
    if cfg.method == "uniform":
        K, _ = kernel.uniform_mask_kernel(X, cfg.eps, seed=cfg.seed)
        K = K.to_dense()
    else:
        K, _ = kernel.build_kernel(X, cfg.f, "dense")
    model = theory_model(cfg)
    support = rmt.support_edges(model)
    try:
        spikes = rmt.general_spikes(model)
    except rmt.DomainError:
        spikes = rmt.noninformative_spikes(model)
    A = K if isinstance(K, np.ndarray) else K.to_dense()
    eig = eigen.full_spectrum(A, bins=1).eigenvalues
    lo = min(eig[0], support.left)
    hi = max(eig[-1], support.right)
    pad = 0.02 * (hi - lo)
    counts, bin_edges = np.histogram(eig, bins=bins, range=(lo - pad, hi + pad))
    hist = eigen.SpectrumHistogram(eig, bin_edges, counts)
    edges = hist.bin_edges
    width = hist.bin_width
    # bin-averaged density: the square-root edges make point samples biased
    sub = 16
    fine = (edges[:-1, None] + (np.arange(sub)[None, :] + 0.5) / sub * width)
    dens = rmt.density(model, fine, richardson=True).mean(axis=1)
    dens = np.maximum(dens, 0.0)
    margin = margin_bins * width
    isolated = np.array([x for x in eig if not support.contains(x, isolation_bins * width)])
    centers = 0.5 * (edges[:-1] + edges[1:])
    keep = np.ones(bins, dtype=bool)
    for x in isolated:
        keep &= np.abs(centers - x) > margin
    l1 = float(np.sum(np.abs(hist.normalized() - dens)[keep]) * width)
    pairs = eigen.top_eigenpairs(A, min(k_eigs, A.shape[0]), seed=cfg.seed)
    aligns = [float((p.vector @ X.labels) ** 2 / X.n) for p in pairs]
    return SpectrumResult(hist, centers, dens, support, spikes, isolated, l1, pairs, aligns)


# -- persistence ------------------------------------------------------------------

def _fmt(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return str(bool(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return format(float(value), ".17g")
    return "" if value is None else str(value)


def export(table: Sequence[dict], path, format: Optional[str] = None,
           columns: Optional[Sequence[str]] = None) -> None:
    """Write rows as CSV (fixed column order) or JSON (array of objects)."""
    path = Path(path)
    fmt = (format or path.suffix.lstrip(".") or "csv").lower()
    cols = list(columns) if columns is not None else list(COLUMNS)
    for i, row in enumerate(table):
        missing = [c for c in cols if c not in row]
        if missing:
            raise ValueError(f"row {i} lacks columns {missing}")
    try:
        if fmt == "csv":
            with open(path, "w", newline="", encoding="utf-8") as fh:
                w = csv.writer(fh)
                w.writerow(cols)
                for row in table:
                    w.writerow([_fmt(row[c]) for c in cols])
        elif fmt == "json":
            def clean(v):
                if isinstance(v, (np.floating, float)):
                    v = float(v)
                    return v if math.isfinite(v) else None
                if isinstance(v, np.integer):
                    return int(v)
                return v
            with open(path, "w", encoding="utf-8") as fh:
                json.dump([{c: clean(row[c]) for c in cols} for row in table], fh, indent=1)
        else:
            raise ValueError(f"format must be csv or json, got {fmt!r}")
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc}") from exc


def read_table(path) -> list:
    """Parse a CSV or JSON table written by ``export``; numbers come back as numbers."""
    path = Path(path)
    if path.suffix.lower() == ".json":
        rows = json.loads(path.read_text(encoding="utf-8"))
        return [{k: (math.nan if v is None else v) for k, v in r.items()} for r in rows]
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        out = []
        for r in reader:
            row = {}
            for k, v in r.items():
                if k in _TEXT_COLUMNS:
                    row[k] = v
                elif k in _INT_COLUMNS:
                    row[k] = int(v)
                else:
                    try:
                        row[k] = float(v)
                    except ValueError:
                        row[k] = v
            out.append(row)
        return out


def read_header(path) -> list:
    with open(path, newline="", encoding="utf-8") as fh:
        return next(csv.reader(fh), [])
