import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fbcert.certificates import (COCO, STRONG, Certificate, beta_coco, beta_strong,
                                 deviation_width, epsilon_zero_coco, epsilon_zero_strong,
                                 fixed_point_residual, generalization_bound)
from fbcert.operators import BoxSet, OperatorConstants, normal_cone_distance, project_box

from oracles import mp_beta_strong, mp_bound, mp_bound_removal, mp_eps_coco, mp_eps_strong

TABLE = OperatorConstants(mu=0.0127, kappa=0.1159, bound_m=39.2192, loss_bound=24.3852)

# oracle values (50-digit evaluation), frozen
BETA_TABLE_S3000 = 4.1604718400667245667
BOUND_EXAMPLE = 1.2443240492042449639


def test_beta_strong_table_value():
    assert beta_strong(0.02, TABLE, 3000) == pytest.approx(BETA_TABLE_S3000, rel=1e-12)
    assert float(mp_beta_strong(0.02, 0.0127, 0.1159, 39.2192, 3000)) == pytest.approx(
        BETA_TABLE_S3000, rel=1e-15)


def test_beta_strong_scaling_and_tau_zero():
    assert beta_strong(0.02, TABLE, 200) == pytest.approx(2 * beta_strong(0.02, TABLE, 400),
                                                          rel=1e-15)
    c = OperatorConstants(mu=2.0, kappa=2.0, bound_m=3.0)
    assert beta_strong(0.5, c, 10) == pytest.approx(2 * 0.5 * 3.0 / 10, rel=1e-15)
    with pytest.raises(ValueError):
        beta_strong(2.0, TABLE, 10)


def test_beta_coco_examples():
    assert beta_coco(0.01, 10.0, 0, 10000) == 0.0
    assert beta_coco(0.01, 10.0, 100, 10000) == pytest.approx(0.004, rel=1e-15)
    b = beta_coco(0.01, 10.0, 100, 500)
    assert beta_coco(0.01, 10.0, 100, 1000) == pytest.approx(b / 2, rel=1e-15)
    assert beta_coco(0.01, 10.0, 200, 500) == pytest.approx(2 * b, rel=1e-15)
    with pytest.raises(ValueError):
        beta_coco(0.01, 1.0, 1, 0)


def test_generalization_bound_examples():
    assert generalization_bound(0.5, 0.01, 2.0, 100, 0.05) == pytest.approx(BOUND_EXAMPLE,
                                                                            rel=1e-14)
    assert generalization_bound(0.3, 0.0, 0.0, 50, 0.2) == 0.3
    near_one = generalization_bound(0.3, 0.02, 5.0, 50, 1 - 1e-12)
    assert near_one == pytest.approx(0.32, abs=1e-5)
    for bad in (0.0, 1.0, -0.1, 1.5):
        with pytest.raises(ValueError):
            generalization_bound(0.1, 0.1, 0.1, 10, bad)


def test_removal_form():
    got = generalization_bound(0.5, 0.01, 2.0, 100, 0.05, form="removal")
    assert got == pytest.approx(float(mp_bound_removal(0.5, 0.01, 2.0, 100, 0.05)), rel=1e-14)
    assert deviation_width(100, 0.05, "removal") == pytest.approx(
        math.sqrt(math.log(20) / 200))
    with pytest.raises(ValueError):
        generalization_bound(0.5, 0.01, 2.0, 100, 0.05, form="other")


def test_epsilon_strong_decomposition_and_limit():
    c = epsilon_zero_strong(0.1, 0.02, TABLE, 3000, 0.05, k=1000)
    assert c.regime == STRONG and c.k == 1000 and c.loss_bound_provenance == "analytic"
    total = c.empirical_term + c.stability_term + c.deviation_term
    assert c.epsilon * c.gamma == pytest.approx(total, rel=1e-12)
    assert c.epsilon * 0.02 == pytest.approx(
        generalization_bound(0.1, beta_strong(0.02, TABLE, 3000), TABLE.loss_bound, 3000, 0.05),
        rel=1e-12)
    lim = epsilon_zero_strong(0.0, 0.02, TABLE, 3000, 1 - 1e-15)
    # the deviation term vanishes like sqrt(2 (1 - delta) / s)
    assert lim.epsilon == pytest.approx(beta_strong(0.02, TABLE, 3000) / 0.02, rel=1e-5)


def test_epsilon_coco_decomposition_and_limit():
    c = epsilon_zero_coco(0.2, 0.01, 7.0, 3.0, 10000, 100, 0.05, theta=1.0)
    assert c.regime == COCO
    assert c.epsilon * c.gamma == pytest.approx(
        c.empirical_term + c.stability_term + c.deviation_term, rel=1e-12)
    assert epsilon_zero_coco(0.0, 0.01, 7.0, 0.0, 100, 0, 1 - 1e-15).epsilon == pytest.approx(0.0)
    with pytest.raises(ValueError):
        epsilon_zero_coco(0.2, 2.5, 7.0, 3.0, 100, 10, 0.05, theta=1.0)
    with pytest.raises(ValueError):
        epsilon_zero_coco(0.2, 0.01, 7.0, 3.0, 100, 10, 0.0)


def test_epsilon_monotonicity():
    eps_s = [epsilon_zero_strong(0.1, 0.02, TABLE, s, 0.05).epsilon for s in (10, 100, 1000)]
    assert eps_s[0] > eps_s[1] > eps_s[2]
    assert (epsilon_zero_strong(0.1, 0.02, TABLE, 100, 0.5).epsilon
            < epsilon_zero_strong(0.1, 0.02, TABLE, 100, 0.05).epsilon)
    eps_k = [epsilon_zero_coco(0.1, 0.01, 5.0, 1.0, 1000, k, 0.05).epsilon for k in (0, 10, 100)]
    assert eps_k[0] < eps_k[1] < eps_k[2]


@settings(max_examples=300, deadline=None)
@given(r=st.floats(0, 10), g_frac=st.floats(0.01, 0.99), mu=st.floats(0.01, 1.0),
       ratio=st.floats(1.0, 5.0), m=st.floats(0.1, 100), lbar=st.floats(0, 50),
       s=st.integers(1, 10**6), delta=st.floats(1e-6, 0.999))
def test_epsilon_strong_against_extended_precision(r, g_frac, mu, ratio, m, lbar, s, delta):
    c = OperatorConstants(mu=mu, kappa=mu * ratio, bound_m=m)
    g = g_frac * c.step_limit()
    got = epsilon_zero_strong(r, g, c, s, delta, loss_bound=lbar).epsilon
    ref = float(mp_eps_strong(r, g, mu, mu * ratio, m, lbar, s, delta))
    assert got == pytest.approx(ref, rel=1e-12)


@settings(max_examples=300, deadline=None)
@given(r=st.floats(0, 10), g=st.floats(1e-4, 1.0), m=st.floats(0.1, 100),
       lbar=st.floats(0, 50), s=st.integers(1, 10**6), k=st.integers(0, 10**5),
       delta=st.floats(1e-6, 0.999))
def test_epsilon_coco_against_extended_precision(r, g, m, lbar, s, k, delta):
    got = epsilon_zero_coco(r, g, m, lbar, s, k, delta).epsilon
    ref = float(mp_eps_coco(r, g, m, lbar, s, k, delta))
    assert got == pytest.approx(ref, rel=1e-12, abs=1e-300)


def test_certificate_roundtrip_and_relative():
    c = epsilon_zero_strong(0.1, 0.02, TABLE, 3000, 0.05, k=1000)
    assert c.epsilon_relative is None
    c2 = c.with_reference(18.0)
    assert c2.epsilon_relative == pytest.approx(c.epsilon / 18.0)
    d = c2.to_dict()
    for key in ("epsilon", "delta", "s", "k", "regime", "empirical_term", "stability_term",
                "deviation_term", "loss_bound_provenance"):
        assert key in d
    assert Certificate.from_dict(d) == c2
    with pytest.raises(ValueError):
        epsilon_zero_strong(0.1, 0.02, TABLE, 10, 0.05, loss_bound_provenance="guess")


def test_fixed_point_residual_examples():
    unit = BoxSet([0.0], [1.0])
    J = lambda y: project_box(y, unit)
    assert fixed_point_residual([0.0], lambda x: x - 2.0, J, 0.5) == 1.0
    assert fixed_point_residual([1.0], lambda x: x - 2.0, J, 0.5) == 0.0
    with pytest.raises(ValueError):
        fixed_point_residual([1.0], lambda x: x, J, 0.0)


def test_residual_bounds_normal_cone_distance_at_output():
    rng = np.random.default_rng(12)
    box = BoxSet(np.zeros(3), np.full(3, 1.5))
    J = lambda y: project_box(y, box)
    for _ in range(200):
        a = rng.normal(size=(3, 3))
        P = a @ a.T
        q = rng.normal(size=3)
        B = lambda x: q + P @ x
        g = 1.0 / np.linalg.eigvalsh(P)[-1]
        x = rng.uniform(0, 1.5, 3)
        x_out = J(x - g * B(x))
        res = fixed_point_residual(x, B, J, g)
        # at the resolvent output z = (x - x_out)/g - B(x) lies in the normal cone
        bound = res / g + np.linalg.norm(B(x_out) - B(x))
        assert normal_cone_distance(x_out, B(x_out), box) <= bound * (1 + 1e-12) + 1e-12
