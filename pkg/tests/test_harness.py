import json
import math
from dataclasses import replace

import numpy as np
import pytest
from scipy.special import erfc

from sqsc import harness, kernel, rmt
from sqsc.harness import SweepSpec, TrialConfig, TrialError
from sqsc.nonlin import Nonlinearity, relu_centered
from sqsc.synth import MixtureConfig


def small(rho=2.0, f=None, **kw):
    return TrialConfig(MixtureConfig(p=64, n=48, rho=rho), f or Nonlinearity.sign(), **kw)


# -- configs -------------------------------------------------------------------

@pytest.mark.parametrize("kw", [dict(method="uniform"), dict(method="uniform", eps=0.5, f=Nonlinearity.sign()),
                                dict(method="subsample", eps=0), dict(method="bogus"),
                                dict(method="linear", f=Nonlinearity.sign()), dict(k_eigs=9)])
def test_config_validation(kw):
    kw = dict(kw)
    f = kw.pop("f", Nonlinearity.linear())
    with pytest.raises(ValueError):
        TrialConfig(MixtureConfig(p=8, n=8, rho=1), f, **kw)


def test_eps_nominal():
    assert small(f=Nonlinearity.binarize(1)).eps_nominal == pytest.approx(erfc(1))
    cfg = TrialConfig(MixtureConfig(p=8, n=8, rho=1), method="uniform", eps=0.3)
    assert cfg.eps_nominal == 0.3


# -- trials -----------------------------------------------------------------------

def test_trial_deterministic():
    a, b = harness.run_trial(small(seed=5)), harness.run_trial(small(seed=5))
    assert (a.alignment_emp, a.error_emp, a.top_values) == (b.alignment_emp, b.error_emp, b.top_values)
    c = harness.run_trial(small(seed=6))
    assert c.top_values != a.top_values


def test_trial_result_ranges():
    for method, eps, f in [("selective", None, Nonlinearity.sparse(0.8)),
                           ("uniform", 0.4, Nonlinearity.linear()),
                           ("subsample", 0.5, Nonlinearity.linear()),
                           ("linear", None, Nonlinearity.linear())]:
        r = harness.run_trial(TrialConfig(MixtureConfig(p=64, n=48, rho=3), f, method, eps, seed=1))
        assert 0 <= r.alignment_emp <= 1 and 0 <= r.error_emp <= 0.5 + 1e-12
        assert r.top_values == sorted(r.top_values, reverse=True)
        assert r.time_kernel_s >= 0 and r.time_eig_s >= 0


def test_below_transition_alignment_small():
    cfg = TrialConfig(MixtureConfig(p=512, n=256, rho=0), Nonlinearity.linear(), "linear", seed=2)
    assert harness.run_trial(cfg).alignment_emp <= 0.05


def test_sign_kernel_alignment_near_theory():
    cfg = TrialConfig(MixtureConfig(p=512, n=256, rho=9, mu_direction="random"), Nonlinearity.sign(), seed=3)
    r = harness.run_trial(cfg)
    assert r.alignment_emp == pytest.approx(harness.theory(cfg)["alignment_theory"], abs=0.05)


def test_error_consistent_with_alignment():
    cfg = TrialConfig(MixtureConfig(p=512, n=512, rho=6), Nonlinearity.binarize(0.5), seed=4)
    r = harness.run_trial(cfg)
    assert r.error_emp == pytest.approx(rmt.misclassification(r.alignment_emp), abs=0.02)


def test_selective_sparsity_binomial():
    n = 512
    for s in (0.5, 1.0, 1.5):
        cfg = TrialConfig(MixtureConfig(p=512, n=n, rho=0), Nonlinearity.sparse(s), seed=3)
        eps = erfc(s)
        sd = math.sqrt(eps * (1 - eps) / (n * (n - 1) / 2))
        assert abs(harness.run_trial(cfg).sparsity_emp - eps) <= 3 * sd


def test_trial_error_carries_context(monkeypatch):
    def boom(*a, **k):
        raise ValueError("kaput")
    monkeypatch.setattr(kernel, "build_kernel", boom)
    with pytest.raises(TrialError, match="seed=11.*kaput") as info:
        harness.run_trial(small(seed=11))
    assert isinstance(info.value.__cause__, ValueError)


def test_empirical_error():
    labels = np.array([-1, -1, 1, 1.0])
    assert harness.empirical_error(np.array([-1, -2, 3, 4.0]), labels) == 0
    assert harness.empirical_error(np.array([1, 2, -3, -4.0]), labels) == 0
    assert harness.empirical_error(np.array([-1, 2, 3, 4.0]), labels) == 0.25
    assert harness.empirical_error(np.array([1, 1, 1, -1.0]), None) == 0.25


def test_theory_columns():
    th = harness.theory(TrialConfig(MixtureConfig(p=100, n=100, rho=2), Nonlinearity.linear(), "linear"))
    assert th["alignment_theory"] == pytest.approx(0.5) and th["gamma"] == pytest.approx(1)
    th = harness.theory(TrialConfig(MixtureConfig(p=100, n=200, rho=4), method="subsample", eps=0.5))
    assert th["gamma"] == pytest.approx(1.0)
    # imbalanced classes with a2 != 0: no closed form, NaN columns
    th = harness.theory(TrialConfig(MixtureConfig(p=100, n=100, rho=4, balance=0.3), relu_centered()))
    assert math.isnan(th["alignment_theory"]) and th["a2"] > 0


# -- sweeps ---------------------------------------------------------------------

def test_sweep_rows_and_seeds():
    spec = SweepSpec("rho", (0.0, 3.0), 3, small(seed=9))
    out = harness.run_sweep(spec)
    assert len(out.rows) == 6 and not out.failures
    assert [r["axis_value"] for r in out.rows] == [0, 0, 0, 3, 3, 3]
    assert all(tuple(r) == harness.COLUMNS for r in out.rows)
    seeds = [r["seed"] for r in out.rows]
    assert len(set(seeds)) == 6
    assert seeds[4] == harness.derive_seed(9, 1, 1)
    # a row re-run alone reproduces its numbers
    row = out.rows[4]
    again = harness.run_trial(replace(harness.config_at(spec, 3.0), seed=row["seed"]))
    assert again.alignment_emp == row["alignment_emp"] and again.top_values[0] == row["lambda1_emp"]


def test_sweep_threads_match_serial():
    spec = SweepSpec("s", (0.2, 0.8), 2, small(seed=1))
    a = harness.run_sweep(spec).rows
    b = harness.run_sweep(spec, threads=3).rows
    strip = lambda rows: [{k: v for k, v in r.items() if not k.startswith("time")} for r in rows]
    assert strip(a) == strip(b)


def test_common_random_numbers():
    spec = SweepSpec("s", (0.2, 0.8), 2, small(seed=1), common_random_numbers=True)
    rows = harness.run_sweep(spec).rows
    assert [r["seed"] for r in rows[:2]] == [r["seed"] for r in rows[2:]]


def test_sweep_axes():
    base = small(f=Nonlinearity.sign())
    assert harness.config_at(SweepSpec("s", (0.5,), 1, base), 0.5).f == Nonlinearity.binarize(0.5)
    q = replace(base, f=Nonlinearity.quantize(3, 0.5))
    assert harness.config_at(SweepSpec("M", (5,), 1, q), 5).f.M == 5
    assert harness.config_at(SweepSpec("c", (2,), 1, base), 2).mixture.p == 96
    sel = harness.config_at(SweepSpec("eps", (erfc(1),), 1, base), erfc(1))
    assert sel.f.s == pytest.approx(1)
    uni = TrialConfig(MixtureConfig(p=8, n=8, rho=1), method="uniform", eps=0.5)
    assert harness.config_at(SweepSpec("eps", (0.2,), 1, uni), 0.2).eps == 0.2


def test_sweep_spec_validation():
    with pytest.raises(ValueError):
        SweepSpec("rho", (), 1, small())
    with pytest.raises(ValueError):
        SweepSpec("rho", (1,), 0, small())
    with pytest.raises(ValueError):
        SweepSpec("temperature", (1,), 1, small())


def test_sweep_records_failures_and_continues(monkeypatch):
    real = harness.evaluate

    def flaky(X, f, method, eps, k_eigs, seed, layout):
        if seed == harness.derive_seed(0, 1, 0):
            raise RuntimeError("flaky")
        return real(X, f, method, eps, k_eigs, seed, layout)

    monkeypatch.setattr(harness, "evaluate", flaky)
    out = harness.run_sweep(SweepSpec("rho", (1.0, 2.0), 2, small(seed=0)))
    assert len(out.rows) == 4 and len(out.failures) == 1
    assert out.failures[0]["axis_value"] == 2.0 and "flaky" in out.failures[0]["error"]
    assert math.isnan(out.rows[2]["alignment_emp"]) and not math.isnan(out.rows[3]["alignment_emp"])


def test_welford_matches_numpy():
    x = np.random.default_rng(0).standard_normal(1000) * 3 + 1e6
    w = harness.Welford()
    for v in x:
        w.add(v)
    w.add(math.nan)
    assert w.count == 1000
    assert w.mean == pytest.approx(x.mean(), rel=1e-14)
    assert w.variance == pytest.approx(x.var(ddof=1), rel=1e-9)
    assert w.stderr == pytest.approx(x.std(ddof=1) / math.sqrt(1000), rel=1e-9)


def test_summary():
    spec = SweepSpec("rho", (0.0, 4.0), 3, small(seed=2))
    summary = harness.run_sweep(spec).summary()
    assert [s["axis_value"] for s in summary] == [0.0, 4.0]
    assert all(s["count"] == 3 for s in summary)
    assert summary[1]["alignment_emp_mean"] > summary[0]["alignment_emp_mean"]


# -- export ------------------------------------------------------------------------

def test_export_round_trip(tmp_path):
    rows = harness.run_sweep(SweepSpec("rho", (0.5, 2.5), 2, small(seed=4))).rows
    rows[0]["alignment_theory"] = 1 / 3
    harness.export(rows, tmp_path / "t.csv")
    back = harness.read_table(tmp_path / "t.csv")
    assert harness.read_header(tmp_path / "t.csv") == list(harness.COLUMNS)
    for a, b in zip(rows, back):
        for k in harness.COLUMNS:
            if isinstance(a[k], float) and math.isnan(a[k]):
                assert math.isnan(b[k])
            else:
                assert a[k] == b[k], k
    harness.export(rows, tmp_path / "t.json")
    data = json.loads((tmp_path / "t.json").read_text())
    assert [list(r) for r in data] == [list(harness.COLUMNS)] * len(rows)
    assert harness.read_table(tmp_path / "t.json")[1]["rho"] == rows[1]["rho"]


def test_export_empty_and_errors(tmp_path):
    harness.export([], tmp_path / "e.csv")
    assert (tmp_path / "e.csv").read_text().strip() == ",".join(harness.COLUMNS)
    with pytest.raises(ValueError, match="lacks columns"):
        harness.export([{"rho": 1}], tmp_path / "x.csv")
    with pytest.raises(OSError, match="cannot write"):
        harness.export([], tmp_path / "missing" / "x.csv")
    with pytest.raises(ValueError):
        harness.export([], tmp_path / "x.txt", format="xml")


# -- spectrum ---------------------------------------------------------------------

def test_linear_spectrum_l1():
    cfg = TrialConfig(MixtureConfig(p=6400, n=3200, rho=0), Nonlinearity.linear(), "linear", seed=1)
    res = harness.spectrum_experiment(cfg)
    assert res.l1_bulk <= 0.05
    assert res.support.edges == pytest.approx(rmt.support_edges(rmt.SpectrumModel(1, 0, 1, 2)).edges)


def test_spectrum_rows_and_spurious_spike():
    cfg = TrialConfig(MixtureConfig(p=256, n=1024, rho=0), relu_centered(), seed=2)
    res = harness.spectrum_experiment(cfg, bins=100)
    rows = res.rows()
    bins = [r for r in rows if r["kind"] == "bin"]
    assert len(bins) == 100 and sum(r["count"] for r in bins) == 1024
    assert all(set(r) == set(harness.SPECTRUM_COLUMNS) for r in rows)
    assert len(res.predicted_spikes) == 1
    left = [x for x in res.isolated if x < res.support.left]
    assert len(left) == 1
    assert left[0] == pytest.approx(res.predicted_spikes[0].location, abs=0.25)
    summary = res.summary()
    assert summary["edges"] == list(res.support.edges)
