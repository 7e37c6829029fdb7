"""The compiled batch loop against the one-step reference functions."""

import numpy as np
import pytest

from fbsnn import Network, SimulationParams, WeightSet, reset_states, simulate
from fbsnn.dynamics import step_controller, step_output_layer
from fbsnn.errors import NumericalDivergenceError, StructuralError
from fbsnn.network import array_to_states, states_to_array
from fbsnn.training import local_weight_update


def reference_run(w, inp, trg, params, control, learn, eta, state=None):
    n = w.n
    out, ctl = state if state is not None else reset_states(n)
    counts = np.zeros(n)
    for t in range(inp.shape[1]):
        out = step_output_layer(out, w, inp[:, t], ctl.s_p, ctl.s_n, params, control_active=control)
        counts += out.s
        if learn:
            w = w.with_w(local_weight_update(w.w, out.i_fb, inp[:, t], eta))
        if control:
            ctl = step_controller(ctl, out.s, trg[:, t], params)
    return counts, w, (out, ctl)


def _data(seed, n=3, m=4, T=400, p_in=0.08, p_trg=0.03):
    rng = np.random.default_rng(seed)
    inp = (rng.random((m, T)) < p_in).astype(np.uint8)
    trg = (rng.random((n, T)) < p_trg).astype(np.uint8)
    w = WeightSet(rng.normal(0, 2.0, (n, m)))
    return inp, trg, w


@pytest.mark.parametrize("seed", range(6))
@pytest.mark.parametrize("control,learn", [(False, False), (True, False), (True, True)])
def test_kernel_matches_reference(seed, control, learn):
    params = SimulationParams(tau_m=20e-3, v_th=5.0, u_th=1.0)
    inp, trg, w = _data(seed)
    eta = 1e-3
    counts, w_ref, (out, ctl) = reference_run(w, inp, trg, params, control, learn, eta)
    res = simulate(Network(w, params), inp[None], trg[None], control=control, learn=learn,
                   eta=eta, immediate=True)
    np.testing.assert_array_equal(res.counts[0], counts)
    np.testing.assert_allclose(res.w, w_ref.w, rtol=1e-10, atol=1e-12)
    k_out, k_ctl = array_to_states(res.state, 0)
    np.testing.assert_allclose(k_out.v, out.v, rtol=1e-9, atol=1e-9)
    np.testing.assert_allclose(k_ctl.u_p, ctl.u_p, rtol=1e-9, atol=1e-9)
    assert counts.sum() > 0


def test_deferred_deltas_equal_frozen_weight_sum():
    params = SimulationParams(v_th=5.0, u_th=1.0)
    inp, trg, w = _data(11)
    eta = 1e-4
    res = simulate(Network(w, params), inp[None], trg[None], control=True, learn=True, eta=eta)
    # with frozen weights the delta is the sum of per-step outer products
    out, ctl = reset_states(w.n)
    acc = np.zeros_like(w.w)
    for t in range(inp.shape[1]):
        out = step_output_layer(out, w, inp[:, t], ctl.s_p, ctl.s_n, params)
        acc = local_weight_update(acc, out.i_fb, inp[:, t], eta)
        ctl = step_controller(ctl, out.s, trg[:, t], params)
    np.testing.assert_allclose(res.dw[0], acc, rtol=1e-10, atol=1e-15)
    np.testing.assert_array_equal(res.w, w.w)


def test_carried_state_equals_one_long_trial():
    params = SimulationParams(v_th=5.0, u_th=1.0)
    inp, trg, w = _data(3, T=600)
    net = Network(w, params)
    whole = simulate(net, inp[None], trg[None], control=True)
    first = simulate(net, inp[None, :, :250], trg[None, :, :250], control=True)
    second = simulate(net, inp[None, :, 250:], trg[None, :, 250:], control=True, state=first.state)
    assert first.counts[0].sum() + second.counts[0].sum() == whole.counts[0].sum()
    np.testing.assert_array_equal(second.state, whole.state)


def test_chain_mode_matches_sequential_calls():
    params = SimulationParams(v_th=5.0, u_th=1.0)
    rng = np.random.default_rng(5)
    inp = (rng.random((4, 4, 150)) < 0.08).astype(np.uint8)
    trg = (rng.random((4, 3, 150)) < 0.03).astype(np.uint8)
    w = WeightSet(rng.normal(0, 2.0, (3, 4)))
    net = Network(w, params)
    chained = simulate(net, inp, trg, control=True, learn=True, eta=1e-3, immediate=True, chain=True)
    state, ww = None, w
    for b in range(4):
        r = simulate(Network(ww, params), inp[b:b + 1], trg[b:b + 1], control=True, learn=True,
                     eta=1e-3, immediate=True, state=state)
        state, ww = r.state, WeightSet(r.w)
        np.testing.assert_array_equal(chained.counts[b], r.counts[0])
    np.testing.assert_array_equal(chained.w, ww.w)


def test_state_packing_round_trip():
    out, ctl = reset_states(2)
    out.v[:] = [1.0, 2.0]
    ctl.j_fb[:] = [3.0, 4.0]
    o2, c2 = array_to_states(states_to_array(out, ctl))
    assert np.array_equal(o2.v, out.v) and np.array_equal(c2.j_fb, ctl.j_fb)


def test_simulate_shape_errors():
    net = Network(WeightSet(np.zeros((1, 2))), SimulationParams())
    with pytest.raises(StructuralError):
        simulate(net, np.zeros((1, 3, 10)), np.zeros((1, 1, 10)), control=False)
    with pytest.raises(StructuralError):
        simulate(net, np.zeros((1, 2, 10)), np.zeros((1, 1, 10)), control=False, learn=True)


def test_kernel_reports_divergence():
    net = Network(WeightSet([[np.inf]]), SimulationParams())
    with pytest.raises(NumericalDivergenceError):
        simulate(net, np.ones((1, 1, 5)), np.zeros((1, 1, 5)), control=False)
