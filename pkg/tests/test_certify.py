import io
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from daecontract import registry
from daecontract.certify import (
    CAVEAT,
    certify_box_reduced,
    certify_contraction,
    coppel_envelope,
    fd_variational_oracle,
    fit_decay,
    gamma_lower_bound,
    pairwise_distance,
    riccati_residual,
    riccati_residual_along,
    transition_matrix,
)
from daecontract.dae import DaeSystem, simulate
from daecontract.dsl import parse_model
from daecontract.linalg import NormKind, vector_norm
from daecontract.variational import MetricTransform, integrate_variational


def model(text, name="model"):
    return DaeSystem.from_model(parse_model(text, name=name))


# --- certify_contraction -------------------------------------------------------

def test_smex1_certified_short_span(smex1):
    ics = [([3.0, -3.0], [1.38]), ([-3.0, 3.0], [-1.38])]
    cert = certify_contraction(smex1, ics, (0.0, 5.0), gamma=0.9, p="1", beta_min=0.5, step=1e-3)
    assert cert.certified and cert.mu_max <= -0.5
    assert cert.samples.shape == (2 * 5001, 3)
    assert cert.metric_product_max == 1.0
    assert cert.verdict.startswith("Certified(")


@pytest.mark.parametrize("gamma", [0.0, 1.0, 4.0])
@pytest.mark.parametrize("p", ["1", "inf"])
def test_exam1_not_certified(exam1, gamma, p):
    cert = certify_contraction(exam1, [([1.0], [0.0])], (0.0, 1.0), gamma=gamma, p=p, step=1e-2)
    assert not cert.certified
    assert cert.mu_max > 0
    assert "NotCertified" in cert.verdict


def test_zero_system_not_certified():
    cert = certify_contraction(model("n=1 m=0 f1 = 0"), [([1.0], None)], (0.0, 1.0), beta_min=0.01, step=0.01)
    assert not cert.certified and cert.mu_max == 0.0


def test_gamma_ladder_stops_at_first_certified():
    sys = model("n=1 m=1 f1 = -w1 ; g1 = z1 - w1")
    cert = certify_contraction(sys, [([1.0], [1.0])], (0.0, 1.0), gamma=None, beta_min=0.5, step=0.01)
    assert cert.certified and cert.gamma == 1.0
    assert cert.extra["gamma_ladder"].startswith("0->")


def test_singular_along_trajectory_not_certified():
    sys = model("n=1 m=1 f1 = -w1 ; g1 = (1 - t)*z1 - w1")
    cert = certify_contraction(sys, [([1.0], [1.0])], (0.0, 2.0), step=1e-2)
    assert not cert.certified
    assert "singular" in cert.reason.lower() or "trajectory 0" in cert.reason


def test_metric_cap_blocks_certificate(smex1):
    big = MetricTransform.constant(np.diag([1.0, 1e4, 1e-4]))
    cert = certify_contraction(smex1, [([3.0, -3.0], [1.38])], (0.0, 0.5), gamma=0.9, metric=big,
                               beta_min=1e-9, step=1e-2, metric_cap=10.0)
    assert not cert.certified
    assert cert.metric_product_max == pytest.approx(1e8)


def test_threads_do_not_change_result(smex1):
    ics = [([3.0, -3.0], [1.38])]
    a = certify_contraction(smex1, ics, (0.0, 1.0), gamma=0.9, step=1e-2, threads=1)
    b = certify_contraction(smex1, ics, (0.0, 1.0), gamma=0.9, step=1e-2, threads=4)
    assert np.array_equal(a.samples, b.samples)
    assert a.mu_max == b.mu_max


def test_report_and_csv(smex1):
    cert = certify_contraction(smex1, [([3.0, -3.0], [1.38])], (0.0, 0.1), gamma=0.9, step=1e-2)
    text = cert.report()
    assert "mu_max:" in text and CAVEAT in text and "verdict:" in text
    buf = io.StringIO()
    cert.to_csv(buf)
    lines = buf.getvalue().splitlines()
    assert lines[0] == "trajectory_id,t,mu" and len(lines) == 12


def test_invalid_arguments(smex1):
    with pytest.raises(ValueError):
        certify_contraction(smex1, [], (0.0, 1.0))
    with pytest.raises(ValueError):
        certify_contraction(smex1, [([3.0, -3.0], [1.38])], (0.0, 1.0), beta_min=0.0)


# --- box test ------------------------------------------------------------------

def test_box_trivial_system():
    sys = model("n=2 m=2\nf1 = -w1\nf2 = -w2\ng1 = z1 - w1\ng2 = z2 - w2")
    assert sys.time_invariant
    cert = certify_box_reduced(sys, [(-1, 1), (-1, 1), (0, 0), (0, 0)], grid=5, beta_min=1.0)
    assert cert.mu_max == -1.0 and cert.certified
    assert cert.extra["coupling_norm_max"] == 1.0
    assert cert.extra["grid_points"] == 25


def test_box_smex2_certified(smex2):
    box = registry.get_example("smex2").preset.box
    cert = certify_box_reduced(smex2, box, grid=101, p="1", beta_min=1.1)
    assert cert.certified and cert.mu_max <= -1.1
    assert cert.extra["grid_points"] == 101 * 101
    assert math.isfinite(cert.extra["coupling_norm_max"])


def test_box_smex2_high_gain_fails():
    sys = registry.smex2_system(k1=3.0, k2=3.0)
    box = registry.get_example("smex2").preset.box
    cert = certify_box_reduced(sys, box, grid=21, p="1", beta_min=1.1)
    assert not cert.certified and cert.mu_max > -1.1


def test_box_column_sum_oracle(smex2):
    # mu_1 of the reduced Jacobian at one point, by hand: A - B gz^-1 (gw = I)
    th, V = 0.3, 1.02
    s, c = math.sin(th), math.cos(th)
    gz = np.array([[V * s - V * c, -c - s], [-V * c - V * s, -s + c]])
    A = np.array([[-3.0, 0.0], [0.5, -2.5]])
    B = np.diag([-1.0, -1.0])
    J = A - B @ np.linalg.inv(gz)
    oracle = max(J[j, j] + sum(abs(J[i, j]) for i in range(2) if i != j) for j in range(2))
    cert = certify_box_reduced(smex2, [(1, 1), (-1, -1), (th, th), (V, V)], grid=3)
    assert cert.mu_max == pytest.approx(oracle, abs=1e-12)


def test_box_requires_time_invariant(exam1):
    with pytest.raises(ValueError):
        certify_box_reduced(exam1, [(0, 1), (0, 1)])


def test_box_singular():
    sys = model("n=1 m=1\nf1 = -w1\ng1 = z1^3 - w1")
    cert = certify_box_reduced(sys, [(0, 1), (-1, 1)], grid=3)
    assert not cert.certified and "singular" in cert.reason


# --- gamma bound ---------------------------------------------------------------

def test_gamma_bound_examples():
    assert gamma_lower_bound(2, 1, 0) == 3
    assert gamma_lower_bound(1, 0, 0) == 1
    assert gamma_lower_bound(2, -1, 0) == 2
    with pytest.raises(ValueError):
        gamma_lower_bound(0, 1, 1)


finite = st.floats(-50, 50, allow_nan=False)


@settings(max_examples=200, deadline=None)
@given(st.floats(0.01, 50), finite, finite, st.floats(0, 10))
def test_gamma_bound_monotone(a, lf, lg, d):
    base = gamma_lower_bound(a, lf, lg)
    assert gamma_lower_bound(a + d, lf, lg) >= base
    assert gamma_lower_bound(a, lf + d, lg) >= base
    assert gamma_lower_bound(a, lf, lg + d) >= base


# --- transition matrix and Coppel envelope -------------------------------------

def random_ltv(rng, dim):
    """Smooth random J(t) = A0 + A1 sin(w t) + A2 cos(w t)."""
    mats = rng.uniform(-2, 2, (3, dim, dim))
    om = rng.uniform(0.5, 3.0)
    return lambda t: mats[0] + mats[1] * math.sin(om * t) + mats[2] * math.cos(om * t)


def test_transition_examples():
    assert np.array_equal(transition_matrix(lambda t: np.zeros((3, 3)), 0.0, 1.0), np.eye(3))
    assert transition_matrix(lambda t: [[-2.0]], 0.0, 1.0)[0, 0] == pytest.approx(math.exp(-2), rel=1e-12)
    assert transition_matrix(lambda t: [[-2.0]], 0.0, 1.0)[0, 0] == pytest.approx(0.135335, abs=1e-6)
    assert np.array_equal(transition_matrix(lambda t: [[5.0]], 1.0, 1.0), np.eye(1))


def test_transition_cocycle():
    rng = np.random.default_rng(21)
    for _ in range(20):
        J = random_ltv(rng, int(rng.integers(1, 5)))
        t0, t1, t2 = 0.0, 0.7, 1.5
        lhs = transition_matrix(J, t0, t2, 1e-3)
        rhs = transition_matrix(J, t1, t2, 1e-3) @ transition_matrix(J, t0, t1, 1e-3)
        assert np.abs(lhs - rhs).max() <= 1e-8 * max(1, np.abs(lhs).max())


def test_coppel_examples():
    ts = np.linspace(0, 2, 201)
    env = coppel_envelope(lambda t: -0.7 * np.eye(2), "2", [3.0, 4.0], ts)
    np.testing.assert_allclose(env, 5.0 * np.exp(-0.7 * ts), rtol=1e-12)
    env0 = coppel_envelope(lambda t: np.zeros((2, 2)), "1", [3.0, -4.0], ts)
    assert np.all(env0 == 7.0)


def test_coppel_soundness_sample():
    rng = np.random.default_rng(5)
    ts = np.linspace(0, 2, 401)
    for _ in range(15):
        dim = int(rng.integers(1, 6))
        J = random_ltv(rng, dim)
        x0 = rng.normal(size=dim)
        xs = [x0]
        for a, b in zip(ts[:-1], ts[1:]):
            xs.append(transition_matrix(J, a, b, 1e-3) @ xs[-1])
        for p in NormKind:
            env = coppel_envelope(J, p, x0, ts)
            norms = np.array([vector_norm(x, p) for x in xs])
            assert np.all(norms <= env * (1 + 1e-3))


# --- finite-difference variational oracle --------------------------------------

def test_fd_oracle_exam1(exam1):
    traj = simulate(exam1, 0.0, [1.0], [0.0], 1.0, 1e-3)
    var = integrate_variational(exam1, traj, [1.0])
    fd = fd_variational_oracle(exam1, 0.0, [1.0], [1.0], delta=1e-6, t_end=1.0)
    assert np.abs(fd.stacked() - var.stacked()).max() <= 1e-4


def test_fd_oracle_zero(smex1):
    fd = fd_variational_oracle(smex1, 0.0, [3.0, -3.0], [0.0, 0.0], t_end=0.5, z_guess=[1.38])
    assert not fd.stacked().any()


def test_fd_oracle_smex1_first_order(smex1):
    traj = simulate(smex1, 0.0, [3.0, -3.0], [1.38], 1.0, 1e-3)
    var = integrate_variational(smex1, traj, [1.0, 0.0])
    errs = []
    for delta in (1e-3, 5e-4):
        fd = fd_variational_oracle(smex1, 0.0, [3.0, -3.0], [1.0, 0.0], delta=delta, t_end=1.0, z_guess=[1.38])
        errs.append(np.abs(fd.stacked() - var.stacked()).max())
    assert errs[0] <= 1e-2
    assert errs[1] / errs[0] == pytest.approx(0.5, abs=0.05)
    fd = fd_variational_oracle(smex1, 0.0, [3.0, -3.0], [1.0, 0.0], delta=1e-6, t_end=1.0, z_guess=[1.38])
    assert np.abs(fd.stacked() - var.stacked()).max() <= 1e-4


# --- Riccati residual ----------------------------------------------------------

def test_riccati_trivial():
    I = np.eye(2)
    assert riccati_residual([-I], [I], [0 * I], 1.0) == pytest.approx(-1.0)
    assert riccati_residual([0 * I], [I], [0 * I], 1.0) == pytest.approx(1.0)
    with pytest.raises(ValueError):
        riccati_residual([I], [np.array([[1.0, 1.0], [0.0, 1.0]])], [0 * I], 1.0)


def test_riccati_observer():
    ex = registry.get_example("oex1_observer")
    plant = ex.system.plant
    ptraj = simulate(plant.as_dae(), 0.0, [-2.0, 2.0], [-2.0], 5.0, 1e-3)
    sys = ex.dae(ptraj)
    traj = simulate(sys, 0.0, [2.0, -2.0], [2.0], 5.0, 1e-3)
    res = riccati_residual_along(sys, traj, 1.0, lambda t: math.exp(-2 * t) * np.eye(3),
                                 lambda t: -2 * math.exp(-2 * t) * np.eye(3), 1.0,
                                 times=np.linspace(0, 5, 200))
    assert res <= 1e-9


# --- decay fits ----------------------------------------------------------------

def test_fit_decay_examples():
    t = np.linspace(0, 5, 101)
    fit = fit_decay(t, 2 * np.exp(-3 * t))
    assert fit.c == pytest.approx(2.0, rel=1e-12) and fit.alpha == pytest.approx(3.0, rel=1e-12)
    assert fit.residual <= 1e-12
    assert fit_decay(t, np.full_like(t, 4.0)).alpha == pytest.approx(0.0, abs=1e-14)
    with pytest.raises(ValueError):
        fit_decay(t, np.where(t > 1, 0.0, 1.0))


def test_fit_discards_transient():
    t = np.linspace(0, 10, 1001)
    r = np.exp(-t) + np.where(t < 0.5, 5.0, 0.0)
    assert fit_decay(t, r).alpha == pytest.approx(1.0, rel=1e-10)


def test_certified_smex1_pair_decays(smex1):
    ics = [([3.0, -3.0], [1.38]), ([-3.0, 3.0], [-1.38])]
    cert = certify_contraction(smex1, ics, (0.0, 10.0), gamma=0.9, step=1e-3)
    assert cert.certified
    a = simulate(smex1, 0.0, [3.0, -3.0], [1.38], 10.0, 1e-3)
    b = simulate(smex1, 0.0, [-3.0, 3.0], [-1.38], 10.0, 1e-3)
    t, d = pairwise_distance(a, b, "2")
    mask = d > 1e-12
    assert fit_decay(t[mask], d[mask]).alpha >= 0.9 * cert.beta
