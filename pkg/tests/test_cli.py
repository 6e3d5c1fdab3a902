import csv
import json

import numpy as np
import pytest

from sqsc import cli, nonlin, synth


def run(capsys, *argv):
    code = cli.main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def run_json(capsys, *argv):
    code, out, err = run(capsys, *argv, "--json")
    assert code == 0, err
    return json.loads(out)


def test_predict_linear(capsys):
    rec = run_json(capsys, "predict", "--f", "linear", "--c", "0.5", "--rho", "1")
    # linear kernel: gamma = sqrt(c), alpha = (rho^2 - c)/(rho^2 + rho)
    assert rec["gamma"] == pytest.approx(np.sqrt(0.5))
    assert rec["alpha"] == pytest.approx(0.25, abs=1e-10)


def test_predict_linear_hand_values(capsys):
    rec = run_json(capsys, "predict", "--f", "linear", "--c", "1", "--rho", "2")
    assert rec["alpha"] == pytest.approx(0.5, abs=1e-10)
    assert rec["lambda"] == pytest.approx(3.5, abs=1e-10)


def test_predict_below_transition(capsys):
    rec = run_json(capsys, "predict", "--f", "binarize:s=0.43", "--c", "2", "--rho", "1")
    assert rec["alpha"] == 0
    assert rec["error_rate"] == pytest.approx(0.5)


def test_predict_text_output(capsys):
    code, out, _ = run(capsys, "predict", "--f", "sign", "--c", "1", "--rho", "4")
    assert code == 0
    assert out.startswith("a1: ") and "error_rate: " in out


def test_optimal_threshold(capsys):
    rec = run_json(capsys, "optimal-threshold", "--family", "binarize")
    assert rec["s_opt"] == pytest.approx(0.4319, abs=1e-3)
    rec = run_json(capsys, "optimal-threshold", "--family", "quantize", "--M", "8")
    assert rec["nu_over_a1sq"] <= 1.001


@pytest.mark.parametrize("argv", [
    ["optimal-threshold", "--family", "quantize", "--M", "1"],
    ["optimal-threshold", "--family", "quantize"],
    ["predict", "--f", "bogus:s=1", "--c", "1"],
    ["predict", "--f", "linear", "--c", "1", "--no-such-flag"],
    ["predict", "--f", "linear"],
    ["sweep", "--grid", "1,x"],
])
def test_bad_flags_exit_2(capsys, argv):
    code, _, err = run(capsys, *argv)
    assert code == 2 and err


def test_negative_a1_exits_3(capsys, monkeypatch):
    monkeypatch.setitem(nonlin.CUSTOM_REGISTRY, "neg", (lambda t: -np.asarray(t, dtype=float), ()))
    code, _, err = run(capsys, "predict", "--f", "custom:neg", "--c", "1", "--rho", "2")
    assert code == 3
    assert err.startswith("error:")


def test_config_file_supplies_and_yields(capsys, tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"f": "linear", "c": 1, "rho": 2}))
    rec = run_json(capsys, "predict", "--config", str(cfg))
    assert rec["lambda"] == pytest.approx(3.5)
    rec = run_json(capsys, "predict", "--config", str(cfg), "--rho", "4")
    # linear: lambda = rho + c(1 + rho)/rho
    assert rec["lambda"] == pytest.approx(4 + 5 / 4)


def test_config_unknown_key(capsys, tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"f": "linear", "c": 1, "colour": "red"}))
    code, _, err = run(capsys, "predict", "--config", str(cfg))
    assert code == 2 and "colour" in err


def test_config_not_an_object(capsys, tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text("[1, 2]")
    code, _, _ = run(capsys, "predict", "--config", str(cfg))
    assert code == 2


def test_threads_env_fallback(monkeypatch):
    monkeypatch.setenv("SQSC_THREADS", "3")
    parser, _ = cli.build_parser()
    args = parser.parse_args(["edges", "--f", "sign", "--c", "1"])
    assert args.threads == 3
    args = parser.parse_args(["edges", "--f", "sign", "--c", "1", "--threads", "2"])
    assert args.threads == 2


def test_edges_sign(capsys):
    rec = run_json(capsys, "edges", "--f", "sign", "--c", "1", "--kappa", "1")
    # a2 = 0 for sign, so kappa plays no role
    assert rec["components"] >= 1
    assert rec["edges"][0] < 0 < rec["edges"][-1]


def test_density_rows(capsys, tmp_path):
    out = tmp_path / "d.csv"
    code, _, _ = run(capsys, "density", "--f", "linear", "--c", "2", "--points", "50", "--out", str(out))
    assert code == 0
    with open(out) as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 50
    x = np.array([float(r["x"]) for r in rows])
    d = np.array([float(r["density"]) for r in rows])
    assert np.all(d >= 0)
    assert np.trapezoid(d, x) == pytest.approx(1, abs=0.05)


def test_density_stdout_csv(capsys):
    code, out, _ = run(capsys, "density", "--f", "sign", "--c", "1", "--points", "5")
    assert code == 0
    lines = out.strip().splitlines()
    assert lines[0] == "x,density" and len(lines) == 6


def test_spikes_relu(capsys):
    rec = run_json(capsys, "spikes", "--f", "custom:relu", "--c", "0.25", "--kappa", "3")
    assert len(rec["noninformative"]) >= 1
    assert all(not s["informative"] for s in rec["noninformative"])
    assert min(s["z"] for s in rec["noninformative"]) == pytest.approx(-1.77, abs=0.005)
    assert all("reason" in r for r in rec["rejected"])


def test_tradeoff_rows(capsys, tmp_path):
    out = tmp_path / "t.csv"
    code, _, _ = run(capsys, "trade-off", "--family", "quantize", "--M", "3", "--points", "5",
                     "--s-max", "1", "--out", str(out))
    assert code == 0
    with open(out) as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 5
    assert rows[0]["f_spec"].startswith("quantize:M=3")
    errs = [float(r["error"]) for r in rows]
    assert all(0 <= e <= 0.5 for e in errs)


def test_tradeoff_sparse_has_uniform_equivalent(capsys):
    rows = run_json(capsys, "trade-off", "--family", "sparse", "--points", "3", "--s-min", "0.5")
    assert all(0 < r["eps_unif_equivalent"] <= 1 for r in rows)


def test_tradeoff_curves(capsys):
    rows = run_json(capsys, "trade-off", "--curve-error", "0.1", "--c", "2", "--eps-grid", "0.5,1")
    methods = {r["method"] for r in rows}
    assert len(methods) >= 2
    at_one = [r["rho"] for r in rows if r["eps"] == 1 and r["rho"] is not None]
    assert max(at_one) == pytest.approx(min(at_one), rel=1e-6)


def test_simulate(capsys):
    rec = run_json(capsys, "simulate", "--f", "sign", "--p", "64", "--n", "128", "--rho", "4")
    assert 0 <= rec["alignment_emp"] <= 1
    assert 0 <= rec["error_emp"] <= 0.5
    assert rec["config"]["f"] == "sign"
    again = run_json(capsys, "simulate", "--f", "sign", "--p", "64", "--n", "128", "--rho", "4")
    assert again["top_values"] == rec["top_values"]


def test_simulate_uniform_ignores_operator(capsys):
    rec = run_json(capsys, "simulate", "--f", "sign", "--method", "uniform", "--eps", "0.5",
                   "--p", "32", "--n", "64")
    assert rec["config"]["f"] == "linear"


def test_sweep_to_csv(capsys, tmp_path):
    out = tmp_path / "sweep.csv"
    code, text, _ = run(capsys, "sweep", "--f", "sign", "--p", "32", "--n", "64", "--grid", "0:4:3",
                        "--repeats", "2", "--out", str(out))
    assert code == 0
    assert len(text.strip().splitlines()) == 3
    with open(out) as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 6
    assert sorted({float(r["axis_value"]) for r in rows}) == [0, 2, 4]


def test_sweep_json_summary(capsys):
    rec = run_json(capsys, "sweep", "--p", "32", "--n", "64", "--grid", "1,9", "--repeats", "2")
    assert len(rec["summary"]) == 2 and rec["failures"] == []


def test_spectrum_out(capsys, tmp_path):
    out = tmp_path / "spec.csv"
    rec = run_json(capsys, "spectrum", "--p", "64", "--n", "128", "--rho", "0", "--bins", "20",
                   "--out", str(out))
    assert rec["l1_bulk"] >= 0
    with open(out) as fh:
        rows = list(csv.DictReader(fh))
    assert sum(1 for r in rows if r["kind"] == "bin") == 20


def fake_idx(tmp_path, per_class=40):
    rng = np.random.default_rng(1)
    labels = np.repeat(np.arange(2, dtype=np.uint8), per_class)
    images = rng.integers(0, 60, (len(labels), 6, 6), dtype=np.uint8)
    images[labels == 1, :3, :] += 150  # second class is brighter at the top
    ip, lp = tmp_path / "img", tmp_path / "lab"
    synth.write_idx(ip, images)
    synth.write_idx(lp, labels)
    return ip, lp


def test_mnist_on_fake_idx(capsys, tmp_path):
    ip, lp = fake_idx(tmp_path)
    rows = run_json(capsys, "mnist", "--images", str(ip), "--labels", str(lp), "--n", "60",
                    "--s-grid", "0.5,1", "--f", "sign")
    assert [r["f_spec"] for r in rows] == ["linear", "sign", "binarize:s=0.5", "binarize:s=1.0"]
    assert rows[0]["error_emp"] <= 0.05


def test_mnist_bad_file_exits_3(capsys, tmp_path):
    ip, lp = fake_idx(tmp_path)
    code, _, err = run(capsys, "mnist", "--images", str(lp), "--labels", str(ip), "--n", "20")
    assert code == 3 and "error" in err


def sweep_csv(capsys, tmp_path):
    out = tmp_path / "s.csv"
    assert cli.main(["sweep", "--p", "32", "--n", "64", "--grid", "1,4", "--repeats", "2",
                     "--out", str(out)]) == 0
    capsys.readouterr()
    return out


@pytest.mark.parametrize("kind", ["curve", "hist", "tradeoff"])
def test_plot_kinds_are_deterministic(capsys, tmp_path, kind):
    if kind == "curve":
        src = sweep_csv(capsys, tmp_path)
    elif kind == "hist":
        src = tmp_path / "h.csv"
        run(capsys, "spectrum", "--p", "32", "--n", "64", "--bins", "10", "--out", str(src))
    else:
        src = tmp_path / "t.csv"
        run(capsys, "sweep", "--f", "binarize:s=0.5", "--axis", "s", "--grid", "0.2,0.8",
            "--p", "32", "--n", "64", "--repeats", "2", "--out", str(src))
    a, b = tmp_path / "a.svg", tmp_path / "b.svg"
    for out in (a, b):
        code, _, err = run(capsys, "plot", "--input", str(src), "--kind", kind, "--out", str(out))
        assert code == 0, err
    assert a.read_bytes() == b.read_bytes()
    assert "<svg" in a.read_text()


def test_plot_header_only_says_no_data(capsys, tmp_path):
    src = tmp_path / "empty.csv"
    src.write_text("kind,x_left,x_right,count,empirical_density,theory_density\n")
    out = tmp_path / "e.svg"
    code, _, _ = run(capsys, "plot", "--input", str(src), "--kind", "hist", "--out", str(out))
    assert code == 0
    assert "no data" in out.read_text()


def test_plot_missing_column_is_named(capsys, tmp_path):
    src = tmp_path / "bad.csv"
    src.write_text("x,y\n1,2\n")
    code, _, err = run(capsys, "plot", "--input", str(src), "--kind", "curve",
                       "--out", str(tmp_path / "o.svg"))
    assert code == 3 and "axis_value" in err
