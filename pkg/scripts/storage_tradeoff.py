#!/usr/bin/env python3
"""Theory-only error and storage curves for sparse, binarized and quantized kernels.

No sampling: everything comes from the Hermite coefficients, so this runs in a
second. Also prints the error-minimizing thresholds and the equal-error SNR
curves for the selective, uniform and subsampling budgets.
"""
import argparse
from pathlib import Path

import numpy as np

from sqsc import harness, nonlin, rmt
from sqsc.nonlin import Nonlinearity
from sqsc.rmt import SpectrumModel


def rows_for(family, c, rho, n, s_grid, M=None):
    out = []
    for s in s_grid:
        f = {"sparse": lambda: Nonlinearity.sparse(s), "binarize": lambda: Nonlinearity.binarize(s),
             "quantize": lambda: Nonlinearity.quantize(M, s)}[family]()
        model = SpectrumModel.from_nonlinearity(f, c, rho=rho)
        alpha = rmt.informative_spike(model).alignment
        out.append({"family": family, "M": M or 0, "s": float(s), "ratio": model.nu / model.a1 ** 2,
                    "alpha": alpha, "error": rmt.misclassification(alpha),
                    "sparsity": nonlin.sparsity_level(f),
                    "storage_fraction": nonlin.storage_bits(f, n) / (64.0 * n * n)})
    return out


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out-dir", default="results")
    ap.add_argument("--c", type=float, default=2.0)
    ap.add_argument("--rho", type=float, default=4.0)
    ap.add_argument("--n", type=int, default=4096)
    args = ap.parse_args()

    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    s_grid = np.linspace(0, 2.5, 51)
    rows = rows_for("sparse", args.c, args.rho, args.n, s_grid)
    rows += rows_for("binarize", args.c, args.rho, args.n, s_grid)
    for M in (3, 5, 8):
        rows += rows_for("quantize", args.c, args.rho, args.n, s_grid[s_grid > 0], M)
    harness.export(rows, out / "storage_tradeoff.csv", columns=tuple(rows[0]))

    b = rmt.optimal_threshold("binarize")
    print(f"binarize: s_opt {b.s_opt:.4f}, nu/a1^2 {b.nu_over_a1sq:.4f}, sparsity {b.sparsity:.4f}")
    for M in range(2, 9):
        q = rmt.optimal_threshold("quantize", M)
        print(f"quantize M={M}: s_opt {q.s_opt:.4f}, nu/a1^2 {q.nu_over_a1sq:.5f}")

    eps = [float(e) for e in np.linspace(0.05, 1.0, 20)]
    pts = rmt.equi_performance_curve(0.1, args.c, eps)
    curve = [{"method": p.method, "eps": p.eps, "rho": np.nan if p.rho is None else p.rho,
              "status": p.status} for p in pts]
    harness.export(curve, out / "equal_error_curves.csv", columns=tuple(curve[0]))
    print(f"wrote {out / 'storage_tradeoff.csv'} and {out / 'equal_error_curves.csv'}")


if __name__ == "__main__":
    main()
