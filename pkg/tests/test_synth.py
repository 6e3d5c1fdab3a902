import gzip
import math

import numpy as np
import pytest
from hypothesis import given, settings
import hypothesis.strategies as st

from sqsc import synth
from sqsc.synth import DataMatrix, MixtureConfig, Noise


def test_kurtosis_values():
    assert synth.kurtosis(Noise.gaussian()) == 3
    assert synth.kurtosis(Noise.rademacher()) == 1
    assert synth.kurtosis(Noise.student_t(7)) == pytest.approx(5)
    assert Noise.student_t(10).kurtosis == pytest.approx(4)


@pytest.mark.parametrize("dof", [4, 3.5, 1])
def test_student_t_needs_finite_kurtosis(dof):
    with pytest.raises(ValueError):
        Noise.student_t(dof)


def test_negative_rho_rejected():
    with pytest.raises(ValueError):
        MixtureConfig(p=4, n=4, rho=-1)


def test_generate_is_deterministic():
    cfg = MixtureConfig(p=2, n=2, rho=0, seed=7)
    a, b = synth.generate(cfg), synth.generate(cfg)
    assert a.values.tobytes() == b.values.tobytes()
    other = synth.generate(MixtureConfig(p=2, n=2, rho=0, seed=8))
    assert not np.array_equal(a.values, other.values)


@pytest.mark.parametrize("threads", [2, 3, 8])
def test_threads_do_not_change_output(threads):
    cfg = MixtureConfig(p=33, n=50, rho=2, noise=Noise.student_t(7), seed=3)
    assert np.array_equal(synth.generate(cfg).values, synth.generate(cfg, threads).values)


def test_columns_are_mean_plus_noise():
    cfg = MixtureConfig(p=512, n=256, rho=4, seed=1)
    X = synth.generate(cfg)
    mu = synth.mean_vector(cfg)
    assert np.dot(mu, mu) == pytest.approx(4)
    assert list(X.labels[:128]) == [-1] * 128 and list(X.labels[128:]) == [1] * 128
    Z = X.values - np.outer(mu, X.labels)
    assert abs(Z.var() - 1) <= 3 / math.sqrt(cfg.p * cfg.n)
    # class means: each coordinate error is N(0, 1/(n/2)), so the norm is about sqrt(2p/n)
    m2 = X.values[:, X.labels > 0].mean(axis=1)
    assert np.linalg.norm(m2 - mu) <= 4 * math.sqrt(cfg.p / (cfg.n / 2))
    assert np.linalg.norm(m2 - mu) / math.sqrt(cfg.p) <= 4 * math.sqrt(1 / cfg.n)


def test_random_mu_direction_has_norm_rho():
    cfg = MixtureConfig(p=100, n=10, rho=9, mu_direction="random", seed=5)
    mu = synth.mean_vector(cfg)
    assert np.linalg.norm(mu) == pytest.approx(3)
    assert np.ptp(mu) > 0


def test_student_t_empirical_kurtosis():
    cfg = MixtureConfig(p=1000, n=1000, rho=0, noise=Noise.student_t(7), seed=11)
    z = synth.generate(cfg).values.ravel()
    k = np.mean(z ** 4) / np.mean(z ** 2) ** 2
    assert k == pytest.approx(5, abs=0.2)


def test_rademacher_entries():
    X = synth.generate(MixtureConfig(p=10, n=10, rho=0, noise=Noise.rademacher()))
    assert set(np.unique(X.values)) == {-1.0, 1.0}


@settings(max_examples=40, deadline=None)
@given(st.integers(2, 300), st.floats(0.01, 0.99))
def test_labels_balance(n, balance):
    v = synth.labels_for(n, balance)
    n_neg = int((v < 0).sum())
    assert abs(n_neg - balance * n) <= 0.5
    assert np.all(np.diff(v) >= 0)


def test_noise_spec_round_trip():
    for noise in (Noise.gaussian(), Noise.rademacher(), Noise.student_t(7)):
        assert Noise.parse(noise.spec()) == noise


# -- standardize -------------------------------------------------------------

@settings(max_examples=30, deadline=None)
@given(st.integers(2, 20), st.integers(2, 20), st.floats(0.1, 100), st.floats(-50, 50))
def test_standardize_mean_square(p, n, scale, shift):
    vals = np.random.default_rng(p * 31 + n).standard_normal((p, n)) * scale + shift
    out = synth.standardize(DataMatrix(vals)).values
    assert np.mean(out ** 2) == pytest.approx(1, abs=1e-12)
    assert np.allclose(out.mean(axis=1), 0, atol=1e-12)


def test_standardize_leaves_gaussian_nearly_alone():
    vals = np.random.default_rng(0).standard_normal((400, 400))
    out = synth.standardize(DataMatrix(vals)).values
    ratio = np.linalg.norm(out) / np.linalg.norm(vals - vals.mean(axis=1, keepdims=True))
    assert ratio == pytest.approx(1, rel=0.01)
    scalar = np.sqrt(np.mean((vals - vals.mean(axis=1, keepdims=True)) ** 2))
    assert scalar == pytest.approx(1, rel=0.01)


def test_standardize_rejects_degenerate():
    with pytest.raises(ValueError):
        synth.standardize(DataMatrix(np.ones((3, 4))))


# -- IDX -------------------------------------------------------------------------

def fake_mnist(tmp_path, per_class=12, gz=False):
    rng = np.random.default_rng(0)
    labels = np.repeat(np.arange(3, dtype=np.uint8), per_class)
    images = rng.integers(0, 256, (len(labels), 4, 5), dtype=np.uint8)
    images[:, 0, 0] = labels * 100  # encode class in a pixel
    ip, lp = tmp_path / "img.idx", tmp_path / "lab.idx"
    synth.write_idx(ip, images)
    synth.write_idx(lp, labels)
    if gz:
        for p in (ip, lp):
            p.write_bytes(gzip.compress(p.read_bytes()))
    return ip, lp


def test_idx_round_trip(tmp_path):
    arr = np.arange(24, dtype=np.uint8).reshape(2, 3, 4)
    synth.write_idx(tmp_path / "a", arr)
    assert np.array_equal(synth.read_idx(tmp_path / "a", expect_magic=0x0803), arr)


@pytest.mark.parametrize("gz", [False, True])
def test_load_idx_two_classes(tmp_path, gz):
    ip, lp = fake_mnist(tmp_path, gz=gz)
    X = synth.load_idx(ip, lp, 0, 2, n=10, seed=4)
    assert X.values.shape == (20, 10)
    assert list(X.labels) == [-1] * 5 + [1] * 5
    assert np.all(X.values[0, :5] == 0) and np.allclose(X.values[0, 5:], 200 / 255)
    assert X.values.max() <= 1 and X.values.min() >= 0
    again = synth.load_idx(ip, lp, 0, 2, n=10, seed=4)
    assert np.array_equal(X.values, again.values)


def test_load_idx_errors(tmp_path):
    ip, lp = fake_mnist(tmp_path, per_class=3)
    with pytest.raises(ValueError):
        synth.load_idx(ip, lp, 1, 1, n=4)
    with pytest.raises(ValueError):
        synth.load_idx(ip, lp, 0, 1, n=8)
    with pytest.raises(synth.IdxFormatError):
        synth.load_idx(lp, ip, 0, 1, n=4)


def test_truncated_idx_names_offset(tmp_path):
    ip, _ = fake_mnist(tmp_path)
    raw = ip.read_bytes()
    bad = tmp_path / "trunc"
    bad.write_bytes(raw[:50])
    with pytest.raises(synth.IdxFormatError, match="offset 50"):
        synth.read_idx(bad)
    bad.write_bytes(raw[:2])
    with pytest.raises(synth.IdxFormatError, match="offset"):
        synth.read_idx(bad)
    bad.write_bytes(b"\x01\x02\x08\x01" + raw[4:])
    with pytest.raises(synth.IdxFormatError, match="magic"):
        synth.read_idx(bad)
