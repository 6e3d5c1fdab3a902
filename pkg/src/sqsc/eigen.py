"""Symmetric eigensolvers for kernel matrices.

``top_eigenpairs`` is a Lanczos iteration with full reorthogonalization that
only touches K through matrix-vector products. ``full_spectrum`` returns every
eigenvalue of a dense symmetric matrix for histogram comparisons.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
import scipy.linalg

from .kernel import Kernel, SparseSymKernel, matvec
from .synth import stream

DENSE_CAP = 8192
_BREAKDOWN = 1e-14
_STREAM_LANCZOS = 7


class ConvergenceError(RuntimeError):
    def __init__(self, message: str, best_residual: float, iterations: int):
        super().__init__(message)
        self.best_residual = best_residual
        self.iterations = iterations


@dataclass
class EigenPair:
    value: float
    vector: np.ndarray
    residual: float  # ||K v - value v||_2, computed explicitly


@dataclass
class SpectrumHistogram:
    eigenvalues: np.ndarray
    bin_edges: np.ndarray
    counts: np.ndarray

    @property
    def bin_width(self) -> float:
        return float(self.bin_edges[1] - self.bin_edges[0])

    def normalized(self) -> np.ndarray:
        """Counts divided by n * bin width, comparable to a density."""
        return self.counts / (len(self.eigenvalues) * np.diff(self.bin_edges))


def _order(theta: np.ndarray, which: str) -> np.ndarray:
    if which == "LA":
        return np.argsort(-theta, kind="stable")
    if which == "SA":
        return np.argsort(theta, kind="stable")
    if which == "LM":
        return np.argsort(-np.abs(theta), kind="stable")
    raise ValueError(f"which must be 'LA', 'SA' or 'LM', got {which!r}")


def top_eigenpairs(K: Kernel, k: int = 1, tol: float = 1e-8, max_iter: Optional[int] = None,
                   seed: int = 0, which: str = "LA") -> list[EigenPair]:
    """k extreme eigenpairs of symmetric K, ordered by ``which`` (default: descending).

    Convergence means every returned pair has ||K v - lambda v|| <= tol * ||K||_est,
    where ||K||_est is the largest Ritz value magnitude seen.
    """
    n = K.shape[0]
    if not 1 <= k <= 8:
        raise ValueError(f"k must lie in [1, 8], got {k}")
    if k > n:
        raise ValueError(f"k={k} exceeds the matrix order {n}")
    max_iter = n if max_iter is None else min(int(max_iter), n)
    max_iter = max(max_iter, k)

    restarts = 0
    q = stream(seed, _STREAM_LANCZOS, restarts).standard_normal(n)
    q /= np.linalg.norm(q)
    Q = np.zeros((n, max_iter))
    alpha = np.zeros(max_iter)
    beta = np.zeros(max_iter)
    best = np.inf
    norm_est = 0.0
    check_every = 1 if n <= 64 else 5
    settled = None  # picked Ritz values at the last invariant-subspace breakdown

    for m in range(max_iter):
        Q[:, m] = q
        w = matvec(K, q)
        alpha[m] = q @ w
        w -= alpha[m] * q
        if m > 0:
            w -= beta[m - 1] * Q[:, m - 1]
        # full reorthogonalization, twice is enough
        for _ in range(2):
            w -= Q[:, :m + 1] @ (Q[:, :m + 1].T @ w)
        b = np.linalg.norm(w)
        size = m + 1
        exhausted = size == n
        breakdown = b < _BREAKDOWN * max(norm_est, 1.0)
        if size >= k and (exhausted or size % check_every == 0 or size == max_iter
                          or breakdown):
            T = np.diag(alpha[:size]) + np.diag(beta[:size - 1], 1) + np.diag(beta[:size - 1], -1)
            theta, S = np.linalg.eigh(T)
            norm_est = max(norm_est, float(np.max(np.abs(theta))))
            pick = _order(theta, which)[:k]
            est = np.abs(b * S[-1, pick])
            threshold = tol * max(norm_est, np.finfo(float).tiny)
            converged = np.all(est <= threshold)
            if converged and breakdown and not exhausted and size < max_iter:
                # a closed Krylov block says nothing about unexplored directions
                # (e.g. repeated eigenvalues); accept only once a restarted block
                # leaves the selection unchanged
                if settled is None or not np.allclose(theta[pick], settled, rtol=0,
                                                      atol=threshold):
                    settled = theta[pick].copy()
                    converged = False
            if exhausted or converged:
                pairs = _ritz_pairs(K, Q[:, :size], theta[pick], S[:, pick])
                worst = max(p.residual for p in pairs)
                best = min(best, worst)
                if worst <= threshold or exhausted:
                    if worst > threshold:
                        raise ConvergenceError(
                            f"Krylov space exhausted with residual {worst:.3e} > {threshold:.3e}",
                            worst, size)
                    return pairs
            else:
                best = min(best, float(np.max(est)))
        if size == max_iter:
            break
        if breakdown:
            # invariant subspace found: continue from a fresh direction
            restarts += 1
            w = stream(seed, _STREAM_LANCZOS, restarts).standard_normal(n)
            for _ in range(2):
                w -= Q[:, :size] @ (Q[:, :size].T @ w)
            b_new = np.linalg.norm(w)
            beta[m] = 0.0
            q = w / b_new
        else:
            beta[m] = b
            q = w / b
    raise ConvergenceError(f"Lanczos did not converge in {max_iter} steps "
                           f"(best residual {best:.3e})", float(best), max_iter)


def _ritz_pairs(K, Qm, theta, S) -> list[EigenPair]:
    pairs = []
    for j in range(len(theta)):
        v = Qm @ S[:, j]
        v /= np.linalg.norm(v)
        lam = float(v @ matvec(K, v))
        res = float(np.linalg.norm(matvec(K, v) - lam * v))
        pairs.append(EigenPair(lam, v, res))
    return pairs


def residual(K: Kernel, pair: EigenPair) -> float:
    return float(np.linalg.norm(matvec(K, pair.vector) - pair.value * pair.vector))


def full_spectrum(K_dense, bins: int = 100, value_range: Optional[Sequence[float]] = None
                  ) -> SpectrumHistogram:
    """All eigenvalues of a dense symmetric matrix, ascending, plus a histogram.

    Uses LAPACK's symmetric driver (Householder tridiagonalization followed by
    implicit-shift QL/QR on the tridiagonal).
    """
    if isinstance(K_dense, SparseSymKernel):
        K_dense = K_dense.to_dense()
    A = np.asarray(K_dense, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError("full_spectrum needs a square matrix")
    n = A.shape[0]
    if n > DENSE_CAP:
        raise ValueError(f"dense spectrum capped at n={DENSE_CAP}, got {n}")
    asym = float(np.max(np.abs(A - A.T))) if n else 0.0
    if asym > 1e-10:
        raise ValueError(f"matrix is not symmetric (max |K - K^T| = {asym:.3e})")
    if n == 1:
        eig = A[0].copy()
    else:
        eig = scipy.linalg.eigh(A, eigvals_only=True, driver="ev")
    eig = np.sort(eig)
    lo, hi = (value_range if value_range is not None else (eig[0], eig[-1]))
    lo, hi = min(lo, eig[0]), max(hi, eig[-1])  # every eigenvalue must be counted
    if hi <= lo:
        lo, hi = lo - 0.5, hi + 0.5
    counts, edges = np.histogram(eig, bins=bins, range=(lo, hi))
    return SpectrumHistogram(eig, edges, counts)


def sign_align(vector: np.ndarray, labels: np.ndarray) -> np.ndarray:
    """Flip ``vector`` so that <vector, labels> >= 0 (ties keep the input)."""
    vector = np.asarray(vector, dtype=float)
    labels = np.asarray(labels, dtype=float)
    if vector.shape != labels.shape:
        raise ValueError("vector and labels must have the same length")
    return -vector if vector @ labels < 0 else vector
