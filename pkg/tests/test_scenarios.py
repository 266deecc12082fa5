import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from kalman_bench.ekf import jacobian_check
from kalman_bench.errors import SingularGeometryError
from kalman_bench.ode import rk4_integrate
from kalman_bench.scenarios import (
    FreeFallParams,
    LVParams,
    ReentryInit,
    ReentryParams,
    dump_params,
    freefall_exact,
    freefall_h,
    freefall_linear_model,
    freefall_nonlinear_model,
    freefall_step,
    freefall_transition_matrix,
    lv_derivatives,
    lv_jacobian,
    lv_transition,
    parse_params,
    radar_invert,
    radar_jacobian,
    radar_measure,
    reentry_derivatives,
    reentry_derivatives_jacobian,
    reentry_transition,
    reentry_transition_jacobian,
)

G = 9.80665
X0_TRUE = np.array(ReentryInit().x0_true)


# ---------------------------------------------------------------- free fall


def test_freefall_initial_condition():
    for mu in (0.0, 0.1):
        assert freefall_exact(FreeFallParams(mu=mu), 0.0) == (10.0, 3.0)


def test_freefall_one_second():
    x, v = freefall_exact(FreeFallParams(), 1.0)
    assert (x, v) == (pytest.approx(8.096675, rel=1e-14), pytest.approx(-6.80665, rel=1e-14))


def test_freefall_drag_one_second():
    # frozen from an independent high-accuracy ODE solve (scipy, rtol 1e-13)
    x, v = freefall_exact(FreeFallParams(mu=0.1), 1.0)
    assert x == pytest.approx(8.1109909006869, rel=1e-12)
    assert v == pytest.approx(-6.61774909006869, rel=1e-12)


# (mu, t, x, v) evaluated at 40 digits with mpmath
DRAG_REFERENCE = [
    (1e-8, 1.0, 8.0966750013444167, -6.80664998096675),
    (1e-3, 2.5, -13.129626244705758, -21.493495373755294),
    (0.1, 1.0, 8.110990900686918, -6.6177490900686918),
    (3.0, 4.0, -0.98591839467236164, -3.2688448159829151),
]


@pytest.mark.parametrize("mu, t, x, v", DRAG_REFERENCE)
def test_drag_closed_form_reference_values(mu, t, x, v):
    got = freefall_exact(FreeFallParams(mu=mu), t)
    assert got == (pytest.approx(x, rel=1e-13), pytest.approx(v, rel=1e-13))


def test_drag_first_order_coefficients():
    # d/dmu at mu = 0: x gets -(v0 t^2/2 - g t^3/6), v gets -(v0 t - g t^2/2)
    mu, t = 1e-9, 1.3
    x0, v0 = freefall_exact(FreeFallParams(), t)
    x1, v1 = freefall_exact(FreeFallParams(mu=mu), t)
    assert (x1 - x0) / mu == pytest.approx(-(3 * t**2 / 2 - G * t**3 / 6), rel=1e-5)
    assert (v1 - v0) / mu == pytest.approx(-(3 * t - G * t**2 / 2), rel=1e-5)


@given(st.floats(1e-12, 1e-3), st.floats(0.01, 10.0))
def test_drag_forms_reduce_to_drag_free(mu, t):
    # deviation relative to the state, measured on the (x, v) pair since each
    # component crosses zero somewhere along the fall
    t = min(t, 1e-3 / mu)
    base = np.array(freefall_exact(FreeFallParams(), t))
    drag = np.array(freefall_exact(FreeFallParams(mu=mu), t))
    assert np.max(np.abs(drag - base)) <= 10 * mu * t * np.max(np.abs(base))


def test_drag_closed_form_matches_rk4():
    p = FreeFallParams(mu=0.1)
    state = rk4_integrate(lambda s: np.array([s[1], -p.g - p.mu * s[1]]), [p.x0, p.v0], 10.0, 10000)
    assert state == pytest.approx(freefall_exact(p, 10.0), rel=1e-8)


@pytest.mark.parametrize("mu", [0.0, 0.1, 2.0])
def test_freefall_step_composes(mu):
    p = FreeFallParams(mu=mu)
    s = np.array([p.x0, p.v0])
    for _ in range(100):
        s = freefall_step(s, p, 0.01)
    assert s == pytest.approx(freefall_exact(p, 1.0), rel=1e-12)


def test_freefall_step_jacobian():
    p = FreeFallParams(mu=0.3)
    chk = jacobian_check(lambda s: freefall_step(s, p, 0.5), [4.0, -1.0], freefall_transition_matrix(0.3, 0.5), 1e-8)
    assert chk.ok


def test_freefall_linear_model_examples():
    model, u = freefall_linear_model(FreeFallParams(), 1.0)
    assert np.array_equal(model.f, [[1.0, 1.0], [0.0, 1.0]])
    assert np.array_equal(model.b, [[0.5], [1.0]])
    assert np.array_equal(u, [-9.80665])
    assert np.array_equal(model.h, np.eye(2))
    k1, _ = freefall_linear_model(FreeFallParams(), 1.0, "height_only")
    assert np.array_equal(k1.h, [[1.0, 0.0]]) and k1.r.shape == (1, 1)
    with pytest.raises(ValueError, match="drag"):
        freefall_linear_model(FreeFallParams(mu=0.1), 1.0)
    with pytest.raises(ValueError):
        freefall_h("velocity_only")


def test_freefall_nonlinear_is_vectorized():
    m = freefall_nonlinear_model(FreeFallParams(mu=0.1))
    rows = np.array([[10.0, 3.0], [5.0, -1.0]])
    out = m.f(rows, None, 0.1)
    assert out.shape == (2, 2)
    assert out[1] == pytest.approx(m.f(rows[1], None, 0.1), rel=1e-15)


# ---------------------------------------------------------- Lotka-Volterra


def test_lv_derivative_examples():
    p = LVParams()
    assert np.array_equal(lv_derivatives([10.0, 10.0], p), [-10.0, -20.0])
    assert np.array_equal(lv_derivatives([4.0, 0.0], p), [4.0, 0.0])
    assert np.array_equal(lv_derivatives([0.0, 3.0], p), [0.0, -15.0])


def test_lv_transition_examples():
    p = LVParams()
    assert lv_transition([10.0, 10.0], p, 0.01) == pytest.approx([9.9, 9.8], rel=1e-15)
    assert lv_jacobian([10.0, 10.0], p, 0.01) == pytest.approx(np.array([[0.99, -0.02], [0.03, 0.98]]), rel=1e-14)
    assert np.array_equal(lv_transition([3.0, 4.0], p, 0.0), [3.0, 4.0])
    assert np.array_equal(lv_jacobian([3.0, 4.0], p, 0.0), np.eye(2))


def test_lv_rates_must_be_positive():
    with pytest.raises(ValueError):
        LVParams(beta=0.0)


def test_lv_euler_is_first_order():
    p = LVParams()
    start = np.array([10.0, 10.0])
    ref = rk4_integrate(lambda s: lv_derivatives(s, p), start, 0.5, 5000)

    def euler_error(dt):
        s = start.copy()
        for _ in range(int(round(0.5 / dt))):
            s = lv_transition(s, p, dt)
        return np.max(np.abs(s - ref))

    ratios = [euler_error(dt) / euler_error(dt / 2) for dt in (0.01, 0.005, 0.0025)]
    assert all(1.8 < r < 2.2 for r in ratios), ratios


@settings(max_examples=100)
@given(st.floats(0.5, 60.0), st.floats(0.5, 60.0))
def test_lv_jacobian_matches_finite_differences(x, y):
    p = LVParams()
    chk = jacobian_check(lambda s: lv_transition(s, p, 0.01), [x, y], lv_jacobian([x, y], p, 0.01), 1e-5)
    assert chk.ok, chk.max_rel_error


# ----------------------------------------------------------------- re-entry


def test_reentry_geometry_at_start():
    r = math.hypot(X0_TRUE[0], X0_TRUE[1])
    v = math.hypot(X0_TRUE[2], X0_TRUE[3])
    assert r == pytest.approx(6509.77, abs=0.005)
    assert v == pytest.approx(7.03340, abs=5e-6)
    assert r - ReentryParams().R == pytest.approx(131.632, abs=0.01)


def test_reentry_gravity_coefficient():
    p = ReentryParams()
    assert p.gm == pytest.approx(3.98601e5, rel=1e-5)
    r = math.hypot(X0_TRUE[0], X0_TRUE[1])
    assert -p.gm / r**3 == pytest.approx(-1.445e-6, rel=1e-3)
    # with x3 = x4 = 0 there is no drag, so the acceleration is B * position
    still = X0_TRUE.copy()
    still[2:4] = 0.0
    acc = reentry_derivatives(still, p)[2:4]
    assert acc == pytest.approx(-p.gm / r**3 * X0_TRUE[:2], rel=1e-12)


def test_reentry_drag_opposes_velocity():
    p = ReentryParams()
    d = reentry_derivatives(X0_TRUE, p)
    r = math.hypot(X0_TRUE[0], X0_TRUE[1])
    drag = d[2:4] + p.gm / r**3 * X0_TRUE[:2]
    assert np.dot(drag, X0_TRUE[2:4]) < 0
    assert np.array_equal(d[:2], X0_TRUE[2:4]) and d[4] == 0.0


def test_reentry_noise_enters_accelerations():
    p = ReentryParams()
    q = np.array([1e-3, -2e-3, 5e-4])
    diff = reentry_derivatives(X0_TRUE, p, q) - reentry_derivatives(X0_TRUE, p)
    assert diff == pytest.approx([0.0, 0.0, 1e-3, -2e-3, 5e-4], abs=1e-15)


def test_reentry_origin_is_singular():
    with pytest.raises(SingularGeometryError):
        reentry_derivatives(np.zeros(5), ReentryParams())


def test_reentry_descends_initially():
    p = ReentryParams()
    s = reentry_transition(X0_TRUE, p, 1.0)
    assert math.hypot(s[0], s[1]) < math.hypot(X0_TRUE[0], X0_TRUE[1])


def test_radar_examples():
    p = ReentryParams()
    d, theta = radar_measure(X0_TRUE, p)
    assert d == pytest.approx(369.93, abs=0.005)
    # hand value atan(349.14 / 122.263); frozen from math.atan2
    assert theta == pytest.approx(1.233958213797884, rel=1e-12)
    assert radar_measure([p.R + 50.0, 0.0, 0, 0, 0], p)[1] == 0.0
    with pytest.raises(SingularGeometryError):
        radar_measure([p.R, 0.0, 0, 0, 0], p)


@st.composite
def reentry_states(draw):
    # around the descent: altitude 5-140 km, speed 1-8 km/s, heading mostly downward
    p = ReentryParams()
    alt = draw(st.floats(5.0, 140.0))
    ang = draw(st.floats(0.0, 0.2))
    speed = draw(st.floats(1.0, 8.0))
    head = draw(st.floats(-2.5, -0.5))
    x5 = draw(st.floats(-1.0, 1.0))
    r = p.R + alt
    return np.array([r * math.cos(ang), r * math.sin(ang), speed * math.cos(head), speed * math.sin(head), x5])


@settings(max_examples=100)
@given(reentry_states())
def test_radar_roundtrip(state):
    p = ReentryParams()
    assert np.allclose(radar_invert(radar_measure(state, p), p), state[:2], rtol=0, atol=1e-9)


@settings(max_examples=100)
@given(reentry_states())
def test_reentry_jacobians_match_finite_differences(state):
    p = ReentryParams()
    assert jacobian_check(lambda s: reentry_derivatives(s, p), state, reentry_derivatives_jacobian(state, p), 1e-5).ok
    assert jacobian_check(lambda s: radar_measure(s, p), state, radar_jacobian(state, p), 1e-5).ok


@settings(max_examples=15, deadline=None)
@given(reentry_states())
def test_reentry_transition_jacobian(state):
    p = ReentryParams()
    analytic = reentry_transition_jacobian(state, p, 0.1)
    chk = jacobian_check(lambda s: reentry_transition(s, p, 0.1), state, analytic, 1e-5)
    assert chk.ok, chk.max_rel_error


def test_reentry_noise_matrices():
    init = ReentryInit()
    assert init.q_sim[4, 4] == 0.0 and init.q_filter[4, 4] == 1e-6
    assert init.q_sim[2, 2] == init.q_filter[3, 3] == 2.4064e-5
    assert init.x0_est[4] == 0.0 and init.p0_diag[4] == 1.0


# --------------------------------------------------------- parameter files


def test_parse_params_roundtrip():
    text = "# drag run\nmu = 0.25\nx0 = 100  # m\nq_sigmas = 0.001, 0.003\n"
    (p,) = parse_params(text, FreeFallParams)
    assert p.mu == 0.25 and p.x0 == 100.0 and p.q_sigmas == (0.001, 0.003)
    (again,) = parse_params(dump_params(p), FreeFallParams)
    assert again == p


def test_parse_params_splits_across_classes():
    p, init = parse_params("gamma0 = 0.6\np0_diag = 1,1,1,1,2\n", ReentryParams, ReentryInit)
    assert p.gamma0 == 0.6 and init.p0_diag[4] == 2.0


def test_parse_params_rejects_unknown_key_with_line():
    with pytest.raises(KeyError, match="cfg.txt:2"):
        parse_params("mu = 0.1\nwind = 3\n", FreeFallParams, source="cfg.txt")
    with pytest.raises(ValueError, match=":1:"):
        parse_params("mu 0.1\n", FreeFallParams)
