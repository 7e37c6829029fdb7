"""Compiled trial loop.

One call simulates a batch of trials. The update order is the same as
:func:`fbsnn.dynamics.step_output_layer` followed by
:func:`fbsnn.dynamics.step_controller`, generalised to per-neuron parameters
and to populations (``group[i]`` is the logical unit of physical neuron ``i``).

Spike inputs are ``uint8`` arrays shaped (batch, neurons, T).
"""

import numpy as np
from numba import njit

# indices into the packed (10, B, N) state array
V, IFF, IFB, S, UP, UN, JFF, JFB, SP, SN = range(10)
N_STATE = 10


@njit(cache=True)
def simulate_batch(
    inp,
    trg,
    w,
    group,
    qp,
    qn,
    c_in,
    alpha,
    beta_out,
    beta_ctl,
    gamma_p,
    gamma_n,
    v_th,
    u_th_p,
    u_th_n,
    v_floor,
    control,
    learn,
    immediate,
    eta,
    inv_p,
    w_min,
    w_max,
    state,
    chain,
    counts,
    fb_energy,
    dw,
    rec_out,
    rec_p,
    rec_n,
    record,
    diverged,
):
    n_batch, m, n_steps = inp.shape
    n_phys = group.shape[0]
    for b in range(n_batch):
        row = 0 if chain else b
        v = state[V, row]
        iff = state[IFF, row]
        ifb = state[IFB, row]
        s = state[S, row]
        up = state[UP, row]
        un = state[UN, row]
        jff = state[JFF, row]
        jfb = state[JFB, row]
        sp = state[SP, row]
        sn = state[SN, row]
        for t in range(n_steps):
            # output layer: currents, voltage, spikes
            for i in range(n_phys):
                iff[i] = beta_out[i] * iff[i]
                ifb[i] = beta_out[i] * ifb[i]
            if control:
                for k in range(n_phys):
                    if sp[k] != 0.0:
                        for i in range(n_phys):
                            ifb[i] += qp[i, k]
                    if sn[k] != 0.0:
                        for i in range(n_phys):
                            ifb[i] += qn[i, k]
            for j in range(m):
                if inp[b, j, t]:
                    for i in range(n_phys):
                        iff[i] += w[group[i], j]
            for i in range(n_phys):
                vi = alpha[i] * v[i] - v_th[i] * s[i] + iff[i] + ifb[i]
                if vi < v_floor:
                    vi = v_floor
                v[i] = vi
                s[i] = 1.0 if vi >= v_th[i] else 0.0
                counts[b, i] += s[i]
                fb_energy[b, i] += abs(ifb[i])
                if record:
                    rec_out[b, i, t] = np.uint8(s[i])
            # local update from the instantaneous feedback current
            if learn:
                for j in range(m):
                    if inp[b, j, t]:
                        for i in range(n_phys):
                            g = group[i]
                            delta = eta * ifb[i] * inv_p
                            if immediate:
                                wn = w[g, j] + delta
                                if wn < w_min:
                                    wn = w_min
                                elif wn > w_max:
                                    wn = w_max
                                w[g, j] = wn
                            else:
                                dw[b, g, j] += delta
            if not control:
                continue
            # controller pairs, driven by output spikes of this step
            for k in range(n_phys):
                drive = 0.0
                for i in range(n_phys):
                    drive += c_in[k, i] * s[i]
                jff[k] = beta_ctl[k] * jff[k] + drive
                jfb[k] = beta_ctl[k] * jfb[k] + trg[b, group[k], t]
                diff = jfb[k] - jff[k]
                upk = gamma_p[k] * up[k] - u_th_p[k] * sp[k] + diff
                unk = gamma_n[k] * un[k] - u_th_n[k] * sn[k] - diff
                if upk < v_floor:
                    upk = v_floor
                if unk < v_floor:
                    unk = v_floor
                up[k] = upk
                un[k] = unk
                sp[k] = 1.0 if upk >= u_th_p[k] else 0.0
                sn[k] = 1.0 if unk >= u_th_n[k] else 0.0
                if record:
                    rec_p[b, k, t] = np.uint8(sp[k])
                    rec_n[b, k, t] = np.uint8(sn[k])
        bad = False
        for i in range(n_phys):
            if not (np.isfinite(v[i]) and np.isfinite(iff[i]) and np.isfinite(ifb[i])):
                bad = True
            if not (np.isfinite(up[i]) and np.isfinite(un[i])):
                bad = True
        diverged[b] = bad
        if bad:
            return


def new_state(n_batch, n_phys):
    return np.zeros((N_STATE, n_batch, n_phys), dtype=np.float64)
