import numpy as np
import pytest

from fbcert.games.qp import (NOISE_STD, QpInstance, QpOracle, qp_bound_m, qp_generate,
                             qp_operator, qp_oracle, qp_reference, qp_samples)
from fbcert.operators import BoxSet, normal_cone_distance
from fbcert.splitting import approx_operator


def test_generate_spectrum_and_symmetry():
    for seed in range(5):
        inst = qp_generate(10, seed)
        assert np.max(np.abs(inst.p_bar - inst.p_bar.T)) <= 1e-12
        assert inst.lambda_max() == pytest.approx(1.0, abs=1e-10)
        # an orthogonal similarity keeps the prescribed spectrum
        np.testing.assert_allclose(np.linalg.eigvalsh(inst.p_bar), np.linspace(0, 1, 10),
                                   atol=1e-10)
        assert np.all(inst.box.lower == 0) and 0 < inst.box.upper[0] < 2
        assert np.all(inst.box.upper == inst.box.upper[0])


def test_generate_deterministic():
    a, b = qp_generate(10, 42, n_samples=5), qp_generate(10, 42, n_samples=5)
    np.testing.assert_array_equal(a.p_bar, b.p_bar)
    np.testing.assert_array_equal(a.q, b.q)
    np.testing.assert_array_equal(a.perturbations.samples, b.perturbations.samples)
    with pytest.raises(ValueError):
        qp_generate(0, 1)


def test_sample_variance():
    d = qp_samples(4, 200000, np.random.default_rng(0))
    assert d.samples.var() == pytest.approx(0.5, rel=0.01)
    assert NOISE_STD**2 == pytest.approx(0.5)


def test_instance_validation():
    with pytest.raises(ValueError):
        QpInstance(np.array([[1.0, 0.5], [0.0, 1.0]]), np.zeros(2), BoxSet(np.zeros(2), np.ones(2)))
    with pytest.raises(ValueError):
        QpInstance(np.eye(2), np.zeros(3), BoxSet(np.zeros(2), np.ones(2)))


def test_oracle_examples():
    inst = qp_generate(6, 3)
    rng = np.random.default_rng(1)
    x = rng.normal(size=6)
    B = qp_operator(inst)
    np.testing.assert_array_equal(qp_oracle(x, np.zeros(6), inst), B(x))
    np.testing.assert_array_equal(qp_oracle(np.zeros(6), rng.normal(size=6), inst), inst.q)
    xi = rng.normal(size=6)
    pair = 0.5 * (qp_oracle(x, xi, inst) + qp_oracle(x, -xi, inst))
    np.testing.assert_allclose(pair, B(x), rtol=0, atol=1e-15)
    np.testing.assert_allclose(qp_oracle(x, xi, inst), inst.q + (inst.p_bar + np.diag(xi)) @ x,
                               atol=1e-14)


def test_averager_matches_batch():
    inst = qp_generate(6, 3)
    d = qp_samples(6, 100, np.random.default_rng(2))
    x = np.random.default_rng(3).normal(size=6)
    np.testing.assert_allclose(QpOracle(inst).averager(d.samples)(x),
                               approx_operator(x, QpOracle(inst), d), atol=1e-14)


def test_mean_operator_cocoercive():
    rng = np.random.default_rng(4)
    for seed in range(5):
        inst = qp_generate(10, seed)
        B = qp_operator(inst)
        for _ in range(200):
            x, y = rng.normal(0, 2, (2, 10))
            d = B(x) - B(y)
            assert (x - y) @ d >= 1.0 * (d @ d) - 1e-10


def test_reference_kkt_and_corner():
    for seed in range(5):
        inst = qp_generate(10, seed)
        x = qp_reference(inst, tol=1e-10)
        assert inst.box.contains(x, 1e-12)
        assert normal_cone_distance(x, qp_operator(inst)(x), inst.box) <= 1e-8
    a = np.random.default_rng(5).normal(size=(4, 4))
    inst = QpInstance(a @ a.T, np.abs(np.random.default_rng(6).normal(size=4)),
                      BoxSet(np.zeros(4), np.ones(4)))
    np.testing.assert_array_equal(qp_reference(inst), np.zeros(4))


def test_reference_matches_grid_2d():
    inst = qp_generate(2, 11)
    x = qp_reference(inst)
    # brute-force minimization of the objective on a fine grid
    a = inst.box.upper[0]
    g = np.linspace(0, a, 2001)
    A, B = np.meshgrid(g, g, indexing="ij")
    pts = np.column_stack([A.ravel(), B.ravel()])
    vals = pts @ inst.q + 0.5 * np.einsum("ki,ij,kj->k", pts, inst.p_bar, pts)
    best = pts[np.argmin(vals)]
    np.testing.assert_allclose(x, best, atol=2 * a / 2000 + 1e-12)


def test_bound_m_dominates_oracle_norms():
    rng = np.random.default_rng(7)
    inst = qp_generate(5, 2)
    d = qp_samples(5, 50, rng)
    m = qp_bound_m(inst, d)
    xs = rng.uniform(0, inst.box.upper[0], (200, 5))
    norms = [np.linalg.norm(qp_oracle(x, d.samples, inst), axis=1).max() for x in xs]
    assert max(norms) <= m
    # interval bound for large dimensions is looser than the exact vertex maximum
    big = qp_generate(17, 2)
    db = qp_samples(17, 20, rng)
    xs = rng.uniform(0, big.box.upper[0], (100, 17))
    norms = [np.linalg.norm(qp_oracle(x, db.samples, big), axis=1).max() for x in xs]
    assert max(norms) <= qp_bound_m(big, db)


def test_summed_oracle_cocoercive_for_psd_samples():
    # each P_bar + diag(xi) with xi >= 0 is PSD and 1/lambda_max cocoercive,
    # so the sum of s such oracles is (theta/s)-cocoercive with the smallest theta
    rng = np.random.default_rng(12)
    inst = qp_generate(10, 5)
    for s in (5, 50):
        d = np.abs(qp_samples(10, s, rng).samples)
        theta = min(1.0 / np.linalg.eigvalsh(inst.p_bar + np.diag(xi))[-1] for xi in d)
        for _ in range(500):
            x, y = rng.normal(0, 1, (2, 10))
            g = (qp_oracle(x, d, inst) - qp_oracle(y, d, inst)).sum(axis=0)
            assert (x - y) @ g >= (theta / s) * (g @ g) - 1e-10
