import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fbsnn import (
    ConfigurationError,
    ControllerState,
    NumericalDivergenceError,
    OutputLayerState,
    SimulationParams,
    StructuralError,
    WeightSet,
    heaviside,
    reset_states,
    step_controller,
    step_output_layer,
)


def test_decay_factors():
    p = SimulationParams(dt=1e-3, tau_m=10e-3, tau_c=50e-3, tau_u=5e-3)
    assert p.alpha == pytest.approx(0.9)
    assert p.beta == pytest.approx(0.98)
    assert p.gamma == pytest.approx(0.8)


@pytest.mark.parametrize("kw", [dict(dt=0.0), dict(tau_m=1e-3), dict(tau_c=5e-4), dict(v_th=0.0), dict(u_th=-1.0)])
def test_invalid_params_rejected(kw):
    with pytest.raises(ConfigurationError):
        SimulationParams(**kw)


def test_slow_controller_warns():
    with pytest.warns(RuntimeWarning):
        SimulationParams(tau_u=60e-3, tau_c=50e-3)


def test_pure_decay():
    p = SimulationParams(dt=1e-3, tau_m=10e-3, v_th=1.0, u_th=1.0, tau_u=5e-3)
    out, _ = reset_states(1)
    out.v[:] = 0.5
    nxt = step_output_layer(out, WeightSet([[0.0]]), [0], [0], [0], p)
    assert nxt.v[0] == pytest.approx(0.45)
    assert nxt.s[0] == 0


def test_soft_reset_subtracts_threshold():
    # alpha = 1 in the limit of a very slow membrane
    p = SimulationParams(dt=1e-3, tau_m=1e12, v_th=1.0)
    out = OutputLayerState(np.array([1.2]), np.zeros(1), np.zeros(1), np.array([1.0]))
    nxt = step_output_layer(out, WeightSet([[0.0]]), [0], [0], [0], p)
    assert nxt.v[0] == pytest.approx(0.2)
    assert nxt.s[0] == 0


def test_feedforward_current_hand_value():
    p = SimulationParams(dt=1e-3, tau_c=5e-3, tau_u=2e-3)  # beta = 0.8
    out, _ = reset_states(2)
    w = WeightSet([[0.04, 0.0], [0.0, 0.04]])
    nxt = step_output_layer(out, w, [1, 1], [0, 0], [0, 0], p)
    np.testing.assert_allclose(nxt.i_ff, [0.04, 0.04])


def test_spike_at_exact_threshold():
    assert heaviside(0.0) == 1.0
    assert heaviside(-1e-300) == 0.0
    p = SimulationParams(dt=1e-3, tau_m=1e12, tau_c=1e12, v_th=1.0)
    out, _ = reset_states(1)
    nxt = step_output_layer(out, WeightSet([[1.0]]), [1], [0], [0], p)
    assert nxt.v[0] == 1.0 and nxt.s[0] == 1.0


def test_feedback_sign_convention():
    p = SimulationParams()
    out, _ = reset_states(1)
    w = WeightSet([[0.0]])
    up = step_output_layer(out, w, [0], [1], [0], p)
    down = step_output_layer(out, w, [0], [0], [1], p)
    assert up.i_fb[0] == 1.0 and down.i_fb[0] == -1.0
    off = step_output_layer(out, w, [0], [1], [1], p, control_active=False)
    assert off.i_fb[0] == 0.0


def test_controller_one_step_hand_value():
    p = SimulationParams(dt=1e-3, tau_u=10e-3)  # gamma = 0.9
    st_ = ControllerState(*(np.zeros(1) for _ in range(6)))
    st_.j_ff[:] = 2.0
    st_.j_fb[:] = 1.0
    # zero inputs: traces decay by beta before entering the voltages
    nxt = step_controller(st_, [0], [0], p)
    b = p.beta
    assert nxt.u_p[0] == pytest.approx(b * 1.0 - b * 2.0)
    assert nxt.u_n[0] == pytest.approx(-(b * 1.0 - b * 2.0))


def test_controller_hand_value_beta_one():
    # with beta = 1 the traces stay at (2, 1) and u_p' = -1, u_n' = +1 exactly
    p = SimulationParams(dt=1e-3, tau_c=1e12, tau_u=10e-3, u_th=5.0)
    st_ = ControllerState(np.zeros(1), np.zeros(1), np.array([2.0]), np.array([1.0]), np.zeros(1), np.zeros(1))
    nxt = step_controller(st_, [0], [0], p)
    assert nxt.u_p[0] == pytest.approx(-1.0)
    assert nxt.u_n[0] == pytest.approx(1.0)


def test_controller_fixed_point_and_direction(params):
    _, ctl = reset_states(2)
    for _ in range(50):
        ctl = step_controller(ctl, [0, 0], [0, 0], params)
    assert all(np.all(a == 0) for a in (ctl.u_p, ctl.u_n, ctl.j_ff, ctl.j_fb, ctl.s_p, ctl.s_n))
    # persistent target excess: only the positive controller can fire
    fired_n = 0
    for _ in range(100):
        ctl = step_controller(ctl, [0, 0], [1, 1], params)
        fired_n += ctl.s_n.sum()
        assert np.all(ctl.u_n <= 0)
    assert fired_n == 0


def test_reset_states():
    out, ctl = reset_states(3)
    assert out.v.shape == (3,) and ctl.u_p.shape == (3,)
    with pytest.raises(StructuralError):
        reset_states(0)
    _, ctl = reset_states(1)
    ctl = step_controller(ctl, [0], [1], SimulationParams())
    assert ctl.j_fb[0] == 1.0


def test_dimension_and_binary_checks(params):
    out, ctl = reset_states(2)
    w = WeightSet(np.zeros((2, 3)))
    with pytest.raises(StructuralError):
        step_output_layer(out, w, [1, 0], [0, 0], [0, 0], params)
    with pytest.raises(StructuralError):
        step_output_layer(out, w, [1, 0, 2], [0, 0], [0, 0], params)
    with pytest.raises(StructuralError):
        step_controller(ctl, [0, 0, 0], [0, 0], params)
    with pytest.raises(StructuralError):
        WeightSet(np.zeros((2, 3)), q_n=np.eye(2))


def test_divergence_raises(params):
    out, _ = reset_states(1)
    out.v[:] = np.inf
    with pytest.raises(NumericalDivergenceError) as e:
        step_output_layer(out, WeightSet([[0.0]]), [0], [0], [0], params)
    assert "v" in e.value.diagnostics


def test_voltage_floor():
    p = SimulationParams(v_floor=0.0)
    out, _ = reset_states(1)
    nxt = step_output_layer(out, WeightSet([[-5.0]]), [1], [0], [0], p)
    assert nxt.v[0] == 0.0


spikes = st.lists(st.integers(0, 1), min_size=3, max_size=3)


@settings(max_examples=200, deadline=None)
@given(st.floats(-50, 50), st.integers(1, 30))
def test_free_decay_is_monotone(v0, steps):
    p = SimulationParams()
    out, _ = reset_states(1)
    out.v[:] = v0
    w = WeightSet([[0.0]])
    prev = abs(v0)
    for _ in range(steps):
        if out.s[0]:
            break
        out = step_output_layer(out, w, [0], [0], [0], p)
        assert abs(out.v[0]) <= prev + 1e-12 or out.s[0] == 1
        prev = abs(out.v[0])


@settings(max_examples=200, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 1), st.integers(0, 1)), min_size=1, max_size=60))
def test_controller_antisymmetry(seq):
    p = SimulationParams()
    _, a = reset_states(1)
    _, b = reset_states(1)
    for s_out, s_trg in seq:
        a = step_controller(a, [s_out], [s_trg], p)
        b = step_controller(b, [s_trg], [s_out], p)
        assert np.array_equal(a.u_p, b.u_n) and np.array_equal(a.s_p, b.s_n)
        assert np.array_equal(a.u_n, b.u_p) and np.array_equal(a.s_n, b.s_p)
        assert a.j_ff[0] >= 0 and a.j_fb[0] >= 0


@settings(max_examples=100, deadline=None)
@given(spikes, spikes, spikes, st.integers(0, 2**31 - 1))
def test_determinism(s_in, s_p, s_n, seed):
    p = SimulationParams()
    rng = np.random.default_rng(seed)
    out = OutputLayerState(rng.normal(size=3), rng.normal(size=3), rng.normal(size=3), np.zeros(3))
    w = WeightSet(rng.normal(size=(3, 3)))
    a = step_output_layer(out, w, s_in, s_p, s_n, p)
    b = step_output_layer(out.copy(), w.copy(), s_in, s_p, s_n, p)
    for x, y in zip((a.v, a.i_ff, a.i_fb, a.s), (b.v, b.i_ff, b.i_fb, b.s)):
        assert x.tobytes() == y.tobytes()
