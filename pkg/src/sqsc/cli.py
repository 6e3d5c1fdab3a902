"""Command-line front end: theory queries, experiments, sweeps and plots.

Exit codes: 0 success, 2 bad flags, 3 domain errors (e.g. a1 <= 0).
"""
from __future__ import annotations

import argparse
import io
import json
import math
import os
import sys
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import harness, nonlin, rmt, svg, synth
from .nonlin import Nonlinearity

DEFAULT_SEED = 20240229


# -- flag types -------------------------------------------------------------------

def _f_spec(text: str) -> Nonlinearity:
    try:
        return nonlin.parse_spec(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc))


def _noise(text: str) -> synth.Noise:
    try:
        return synth.Noise.parse(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc))


def _grid(text: str) -> list[float]:
    """``a,b,c`` or ``start:stop:count`` (inclusive linspace)."""
    try:
        if ":" in text:
            start, stop, count = text.split(":")
            return [float(x) for x in np.linspace(float(start), float(stop), int(count))]
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"bad grid {text!r}: {exc}")


def _classes(text: str) -> tuple[int, int]:
    try:
        a, b = (int(x) for x in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError("classes must look like 0,1")
    return a, b


# -- output helpers ------------------------------------------------------------------

def _clean(obj):
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else None
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def _emit(args, payload, text: Optional[str] = None):
    if args.json or text is None:
        sys.stdout.write(json.dumps(_clean(payload), indent=2, sort_keys=False) + "\n")
    else:
        sys.stdout.write(text + "\n")


def _kv(d: dict) -> str:
    return "\n".join(f"{k}: {v}" for k, v in _clean(d).items())


def _write_rows(rows, path: Optional[str], columns, as_json: bool):
    if path:
        harness.export(rows, path, columns=columns)
        return
    if as_json:
        sys.stdout.write(json.dumps(_clean([{c: r[c] for c in columns} for r in rows]), indent=1) + "\n")
        return
    buf = io.StringIO()
    buf.write(",".join(columns) + "\n")
    for r in rows:
        buf.write(",".join(harness._fmt(r[c]) for c in columns) + "\n")
    sys.stdout.write(buf.getvalue())


def _model(args, rho: float = 0.0) -> rmt.SpectrumModel:
    return rmt.SpectrumModel.from_nonlinearity(args.f, args.c, kappa=args.kappa, rho=rho,
                                               eta=getattr(args, "eta", 0.0))


def _mixture(args, rho=None) -> synth.MixtureConfig:
    return synth.MixtureConfig(p=args.p, n=args.n, rho=args.rho if rho is None else rho,
                               balance=args.balance, noise=args.noise, mu_direction=args.mu,
                               seed=args.seed)


def _trial(args) -> harness.TrialConfig:
    f = args.f
    if args.method in ("uniform", "subsample", "linear"):
        f = Nonlinearity.linear()
    return harness.TrialConfig(_mixture(args), f, args.method, args.eps, args.k, args.seed, args.layout)


# -- subcommands ------------------------------------------------------------------

def cmd_predict(args):
    record = rmt.predict(_model(args, args.rho))
    text = _kv({k: record[k] for k in ("a1", "a2", "nu", "gamma", "lambda", "alpha", "error_rate")})
    _emit(args, record, text)


def cmd_density(args):
    model = _model(args)
    support = rmt.support_edges(model)
    width = support.right - support.left
    lo = args.x_min if args.x_min is not None else support.left - 0.1 * width
    hi = args.x_max if args.x_max is not None else support.right + 0.1 * width
    x = np.linspace(lo, hi, args.points)
    d = rmt.density(model, x, eps_im=args.eps_im, richardson=args.richardson)
    rows = [{"x": float(a), "density": float(b)} for a, b in zip(x, d)]
    _write_rows(rows, args.out, ("x", "density"), args.json)


def cmd_edges(args):
    support = rmt.support_edges(_model(args))
    payload = {"edges": list(support.edges), "components": support.components}
    _emit(args, payload, _kv(payload))


def cmd_spikes(args):
    model = _model(args, args.rho)
    report = rmt.noninformative_spikes(model.with_(rho=0.0), diagnostics=True)
    payload = {"spikes": [s.to_json() for s in rmt.general_spikes(model)],
               "noninformative": [s.to_json() for s in report.spikes],
               "rejected": [{"m": m, "reason": why} for m, why in report.rejected]}
    _emit(args, payload)


def cmd_optimal_threshold(args, parser):
    if args.family == "quantize" and (args.M is None or args.M < 2):
        parser.error("quantize needs --M >= 2")
    res = rmt.optimal_threshold(args.family, args.M)
    payload = {"s_opt": res.s_opt, "nu_over_a1sq": res.nu_over_a1sq, "sparsity": res.sparsity,
               "a1": res.a1, "nu": res.nu}
    _emit(args, payload, _kv(payload))


def cmd_tradeoff(args, parser):
    if args.family == "quantize" and (args.M is None or args.M < 2):
        parser.error("quantize needs --M >= 2")
    if args.curve_error is not None:
        eps = args.eps_grid or [float(e) for e in np.linspace(0.05, 1.0, 20)]
        pts = rmt.equi_performance_curve(args.curve_error, args.c, eps)
        rows = [{"method": p.method, "eps": p.eps, "rho": math.nan if p.rho is None else p.rho,
                 "status": p.status} for p in pts]
        _write_rows(rows, args.out, ("method", "eps", "rho", "status"), args.json)
        return
    rows = []
    for s in np.linspace(args.s_min, args.s_max, args.points):
        s = float(s)
        if args.family == "sparse":
            f = Nonlinearity.sparse(s)
        elif args.family == "binarize":
            f = Nonlinearity.binarize(s)
        else:
            f = Nonlinearity.quantize(args.M, s)
        model = rmt.SpectrumModel.from_nonlinearity(f, args.c, rho=args.rho)
        spike = rmt.informative_spike(model)
        row = {"s": s, "f_spec": f.spec(), "a1": model.a1, "nu": model.nu,
               "nu_over_a1sq": model.nu / model.a1 ** 2, "gamma": rmt.phase_transition(model),
               "alpha": spike.alignment, "error": rmt.misclassification(spike.alignment),
               "sparsity": nonlin.sparsity_level(f), "bits_per_entry": nonlin.bits_per_entry(f),
               "storage_bits": nonlin.storage_bits(f, args.n),
               "naive_bits_per_entry": nonlin.naive_quantize_bits(args.M) if args.family == "quantize"
               else nonlin.bits_per_entry(f),
               "eps_unif_equivalent": rmt.uniform_equivalent(s).eps_unif if args.family == "sparse"
               else math.nan}
        rows.append(row)
    _write_rows(rows, args.out, tuple(rows[0]), args.json)


def cmd_simulate(args):
    cfg = _trial(args)
    res = harness.run_trial(cfg)
    payload = {"config": {"p": args.p, "n": args.n, "rho": args.rho, "f": cfg.f.spec(),
                          "method": cfg.method, "eps": cfg.eps, "seed": cfg.seed},
               "alignment_emp": res.alignment_emp, "error_emp": res.error_emp,
               "top_values": res.top_values, "alignments": res.alignments,
               "sparsity_emp": res.sparsity_emp, "nnz": res.nnz,
               "time_kernel_s": res.time_kernel_s, "time_eig_s": res.time_eig_s}
    payload.update(harness.theory(cfg))
    _emit(args, payload, _kv({k: v for k, v in payload.items() if k != "config"}))


def cmd_sweep(args):
    spec = harness.SweepSpec(args.axis, tuple(args.grid), args.repeats, _trial(args),
                             common_random_numbers=args.crn)
    result = harness.run_sweep(spec, threads=args.threads)
    if args.out:
        harness.export(result.rows, args.out)
    summary = result.summary()
    if args.json or not args.out:
        _emit(args, {"summary": summary, "failures": result.failures, "rows_written": args.out})
    else:
        lines = [f"{s['axis_value']:.6g}: alignment {s['alignment_emp_mean']:.4f} "
                 f"(theory {s['alignment_theory']:.4f}), error {s['error_emp_mean']:.4f} "
                 f"(theory {s['error_theory']:.4f})" for s in summary]
        sys.stdout.write("\n".join(lines) + "\n")
        if result.failures:
            sys.stderr.write(f"{len(result.failures)} trial(s) failed\n")


def cmd_spectrum(args):
    cfg = _trial(args)
    res = harness.spectrum_experiment(cfg, bins=args.bins)
    if args.out:
        harness.export(res.rows(), args.out, columns=harness.SPECTRUM_COLUMNS)
    _emit(args, res.summary(), _kv(res.summary()))


def cmd_mnist(args):
    a, b = args.classes
    X = synth.load_idx(args.images, args.labels, a, b, args.n, seed=args.seed)
    X = synth.standardize(X)
    specs = [Nonlinearity.linear()] + list(args.f_list or [])
    for s in args.s_grid or []:
        specs.append(Nonlinearity.binarize(s) if args.family == "binarize" else Nonlinearity.sparse(s))
    rows = []
    for f in specs:
        res = harness.evaluate(X, f, "selective", k_eigs=args.k, seed=args.seed)
        rows.append({"f_spec": f.spec(), "s": f.s, "error_emp": res.error_emp,
                     "alignment_emp": res.alignment_emp, "sparsity_emp": res.sparsity_emp,
                     "lambda1_emp": res.top_values[0]})
    _write_rows(rows, args.out, ("f_spec", "s", "error_emp", "alignment_emp", "sparsity_emp",
                                 "lambda1_emp"), args.json)


def cmd_plot(args):
    path = Path(args.input)
    header = harness.read_header(path) if path.suffix.lower() != ".json" else None
    rows = harness.read_table(path)
    if header is None:
        header = list(rows[0]) if rows else []
    out = svg.render(args.kind, rows, header)
    with open(args.out, "w", encoding="utf-8") as fh:
        fh.write(out)
    _emit(args, {"written": args.out, "rows": len(rows)}, f"wrote {args.out}")


# -- parser --------------------------------------------------------------------------

def _theory_flags(p, rho=True):
    p.add_argument("--f", type=_f_spec, required=True, help="operator, e.g. binarize:s=0.43")
    p.add_argument("--c", type=float, required=True, help="limit ratio p/n")
    p.add_argument("--kappa", type=float, default=3.0, help="noise kurtosis")
    if rho:
        p.add_argument("--rho", type=float, default=0.0, help="SNR ||mu||^2")
        p.add_argument("--eta", type=float, default=0.0, help="class imbalance v^T 1 / n")


def _data_flags(p):
    p.add_argument("--f", type=_f_spec, default=Nonlinearity.linear())
    p.add_argument("--p", type=int, default=512)
    p.add_argument("--n", type=int, default=256)
    p.add_argument("--rho", type=float, default=4.0)
    p.add_argument("--balance", type=float, default=0.5)
    p.add_argument("--noise", type=_noise, default=synth.Noise.gaussian(),
                   help="gaussian, rademacher or student_t:<dof>")
    p.add_argument("--mu", choices=("ones", "random"), default="ones")
    p.add_argument("--method", choices=harness.METHODS, default="selective")
    p.add_argument("--eps", type=float, default=None, help="budget for uniform/subsample")
    p.add_argument("--k", type=int, default=2, help="eigenpairs to extract")
    p.add_argument("--layout", choices=("auto", "dense", "sparse"), default="auto")


def build_parser() -> tuple[argparse.ArgumentParser, dict]:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--json", action="store_true", help="machine-readable output")
    common.add_argument("--config", help="JSON file supplying flag values")
    common.add_argument("--seed", type=int, default=DEFAULT_SEED)
    common.add_argument("--threads", type=int,
                        default=int(os.environ.get("SQSC_THREADS", "1") or 1))

    parser = argparse.ArgumentParser(prog="sqsc", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    subs = {}

    def add(name, func, help_text):
        p = sub.add_parser(name, parents=[common], help=help_text)
        p.set_defaults(func=func)
        subs[name] = p
        return p

    p = add("predict", cmd_predict, "phase transition, spike, alignment and error")
    _theory_flags(p)
    p = add("density", cmd_density, "limiting eigenvalue density on a grid")
    _theory_flags(p, rho=False)
    p.add_argument("--x-min", type=float)
    p.add_argument("--x-max", type=float)
    p.add_argument("--points", type=int, default=400)
    p.add_argument("--eps-im", type=float, default=1e-6)
    p.add_argument("--richardson", action="store_true")
    p.add_argument("--out")
    p = add("edges", cmd_edges, "support edges of the limiting spectrum")
    _theory_flags(p, rho=False)
    p = add("spikes", cmd_spikes, "all predicted isolated eigenvalues")
    _theory_flags(p)
    p = add("optimal-threshold", cmd_optimal_threshold, "error-minimizing threshold")
    p.add_argument("--family", choices=("binarize", "quantize"), required=True)
    p.add_argument("--M", type=int)
    p = add("trade-off", cmd_tradeoff, "error and storage against the threshold s")
    p.add_argument("--family", choices=("sparse", "binarize", "quantize"), default="binarize")
    p.add_argument("--M", type=int)
    p.add_argument("--c", type=float, default=2.0)
    p.add_argument("--rho", type=float, default=4.0)
    p.add_argument("--n", type=int, default=1000, help="kernel order for storage accounting")
    p.add_argument("--s-min", type=float, default=0.0)
    p.add_argument("--s-max", type=float, default=2.0)
    p.add_argument("--points", type=int, default=21)
    p.add_argument("--curve-error", type=float, help="emit equal-error SNR curves instead")
    p.add_argument("--eps-grid", type=_grid)
    p.add_argument("--out")
    p = add("simulate", cmd_simulate, "one Monte Carlo trial")
    _data_flags(p)
    p = add("sweep", cmd_sweep, "Monte Carlo sweep over one axis")
    _data_flags(p)
    p.add_argument("--axis", choices=harness.AXES, default="rho")
    p.add_argument("--grid", type=_grid, required=True, help="a,b,c or start:stop:count")
    p.add_argument("--repeats", type=int, default=10)
    p.add_argument("--crn", action="store_true", help="reuse seeds across grid points")
    p.add_argument("--out", help="CSV or JSON path for per-trial rows")
    p = add("spectrum", cmd_spectrum, "eigenvalue histogram against theory")
    _data_flags(p)
    p.add_argument("--bins", type=int, default=100)
    p.add_argument("--out", help="CSV path for the histogram table")
    p = add("mnist", cmd_mnist, "two-digit clustering on IDX image files")
    p.add_argument("--images", required=True)
    p.add_argument("--labels", required=True)
    p.add_argument("--classes", type=_classes, default=(0, 1))
    p.add_argument("--n", type=int, default=2048)
    p.add_argument("--family", choices=("binarize", "sparse"), default="binarize")
    p.add_argument("--s-grid", type=_grid)
    p.add_argument("--f", dest="f_list", type=_f_spec, action="append")
    p.add_argument("--k", type=int, default=2)
    p.add_argument("--out")
    p = add("plot", cmd_plot, "render a CSV table as SVG")
    p.add_argument("--input", required=True)
    p.add_argument("--kind", choices=("hist", "curve", "tradeoff"), required=True)
    p.add_argument("--out", required=True)
    return parser, subs


def _apply_config(parser, subs, argv):
    """Config file values become defaults of the subcommand; explicit flags win."""
    pre = argparse.ArgumentParser(add_help=False, allow_abbrev=False)
    pre.add_argument("--config")
    known, _ = pre.parse_known_args(argv)
    command = next((tok for tok in argv if tok in subs), None)
    if known.config and command is not None:
        try:
            values = json.loads(Path(known.config).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            parser.error(f"cannot read config {known.config}: {exc}")
        if not isinstance(values, dict):
            parser.error("config file must hold a JSON object")
        sp = subs[command]
        actions = {a.dest: a for a in sp._actions}
        converted = {}
        for key, val in values.items():
            dest = key.lstrip("-").replace("-", "_")
            if dest not in actions or dest in ("help", "config"):
                parser.error(f"unknown config key {key!r} for {command}")
            action = actions[dest]
            if action.type is not None and isinstance(val, str):
                try:
                    val = action.type(val)
                except argparse.ArgumentTypeError as exc:
                    parser.error(f"config key {key!r}: {exc}")
            converted[dest] = val
            action.required = False
        sp.set_defaults(**converted)
    return parser.parse_args(argv)


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser, subs = build_parser()
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        args = _apply_config(parser, subs, argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        if args.func in (cmd_optimal_threshold, cmd_tradeoff):
            args.func(args, subs[args.command])
        else:
            args.func(args)
    except SystemExit as exc:
        return int(exc.code or 0)
    except (ValueError, RuntimeError, OSError) as exc:
        # DomainError, IdxFormatError and TrialError all land here
        sys.stderr.write(f"error: {exc}\n")
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
