"""Physical network assembly and the batched simulation entry point.

A :class:`Network` pairs the learned logical weights with simulation
parameters and, optionally, a population size and per-neuron parameters.
:func:`simulate` hands it to the compiled kernel.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .dynamics import ControllerState, OutputLayerState, SimulationParams, WeightSet
from .errors import NumericalDivergenceError, StructuralError

__all__ = ["Network", "SimResult", "simulate", "states_to_array", "array_to_states"]


@dataclass
class Network:
    weights: WeightSet
    params: SimulationParams
    p: int = 1
    neuron_params: "object | None" = None  # hardware.PerNeuronParams
    w_clip: tuple[float, float] | None = None

    def __post_init__(self):
        if int(self.p) != self.p or self.p < 1:
            raise StructuralError(f"population size must be >= 1, got {self.p}")
        self.p = int(self.p)
        if self.neuron_params is not None and self.neuron_params.size != self.n_phys:
            raise StructuralError(
                f"per-neuron parameters cover {self.neuron_params.size} neurons, "
                f"network has {self.n_phys}"
            )

    @property
    def n(self) -> int:
        return self.weights.n

    @property
    def m(self) -> int:
        return self.weights.m

    @property
    def n_phys(self) -> int:
        return self.n * self.p

    def with_weights(self, weights: WeightSet) -> "Network":
        return Network(weights, self.params, self.p, self.neuron_params, self.w_clip)

    def group(self) -> np.ndarray:
        return np.repeat(np.arange(self.n, dtype=np.int64), self.p)

    def physical_feedback(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Feedback matrices and output-to-controller matrix for all physical neurons.

        Within a logical unit, controllers and output neurons are connected
        all-to-all with weights scaled by 1/p.
        """
        block = np.full((self.p, self.p), 1.0 / self.p)
        qp = np.kron(self.weights.q_p, block)
        qn = np.kron(self.weights.q_n, block)
        c_in = np.kron(np.eye(self.n), block)
        return qp, qn, c_in

    def vectors(self) -> dict[str, np.ndarray]:
        """Decay factors and thresholds as length-``n_phys`` vectors."""
        N, dt = self.n_phys, self.params.dt
        if self.neuron_params is None:
            P = self.params
            full = lambda x: np.full(N, float(x))  # noqa: E731
            return dict(
                alpha=full(P.alpha), beta_out=full(P.beta), beta_ctl=full(P.beta),
                gamma_p=full(P.gamma), gamma_n=full(P.gamma),
                v_th=full(P.v_th), u_th_p=full(P.u_th), u_th_n=full(P.u_th),
            )
        q = self.neuron_params
        return dict(
            alpha=1.0 - dt / q.tau_m,
            beta_out=1.0 - dt / q.tau_c[0],
            beta_ctl=1.0 - dt / q.tau_c[1],
            gamma_p=1.0 - dt / q.tau_u[0],
            gamma_n=1.0 - dt / q.tau_u[1],
            v_th=np.array(q.v_th, dtype=np.float64),
            u_th_p=np.array(q.u_th[0], dtype=np.float64),
            u_th_n=np.array(q.u_th[1], dtype=np.float64),
        )


@dataclass
class SimResult:
    counts: np.ndarray  # (B, n_phys) output spike counts
    fb_energy: np.ndarray  # (B, n_phys) sum over time of |i_fb|
    dw: np.ndarray | None  # (B, n, m) accumulated deltas (deferred learning)
    state: np.ndarray  # packed kernel state
    w: np.ndarray  # logical weights after the call
    rasters: dict | None = None

    def logical_counts(self, p: int) -> np.ndarray:
        B, N = self.counts.shape
        return self.counts.reshape(B, N // p, p).mean(axis=2)


def simulate(
    net: Network,
    inputs: np.ndarray,
    targets: np.ndarray,
    *,
    control: bool,
    learn: bool = False,
    eta: float = 0.0,
    immediate: bool = False,
    state: np.ndarray | None = None,
    chain: bool = False,
    record: bool = False,
) -> SimResult:
    """Run a batch of trials through the compiled kernel.

    ``inputs`` is (B, m, T), ``targets`` (B, n, T). With ``immediate`` the
    weights change at every presynaptic spike; otherwise per-trial deltas are
    returned in ``dw`` and the weights stay frozen. ``chain`` runs the batch as
    one continuous stream through a single carried state.
    """
    inputs = np.ascontiguousarray(inputs, dtype=np.uint8)
    targets = np.ascontiguousarray(targets, dtype=np.uint8)
    if inputs.ndim != 3 or targets.ndim != 3:
        raise StructuralError("inputs and targets must be (batch, neurons, T)")
    B, m, T = inputs.shape
    if m != net.m:
        raise StructuralError(f"input has {m} channels, weights expect {net.m}")
    if targets.shape[0] != B or targets.shape[2] != T:
        raise StructuralError("targets do not match inputs in batch size or T")
    if control and targets.shape[1] != net.n:
        raise StructuralError(f"target has {targets.shape[1]} rows, network has {net.n} units")
    if learn and not control:
        raise StructuralError("learning requires active control (feedback current)")

    N = net.n_phys
    rows = 1 if chain else B
    if state is None:
        state = kernels.new_state(rows, N)
    elif state.shape != (kernels.N_STATE, rows, N):
        raise StructuralError(f"carried state has shape {state.shape}")
    w = np.array(net.weights.w, dtype=np.float64, copy=True)
    qp, qn, c_in = net.physical_feedback()
    vec = net.vectors()
    lo, hi = net.w_clip if net.w_clip is not None else (-np.inf, np.inf)
    v_floor = -np.inf if net.params.v_floor is None else float(net.params.v_floor)
    counts = np.zeros((B, N))
    fb_energy = np.zeros((B, N))
    dw = np.zeros((B, net.n, m) if learn and not immediate else (1, net.n, m))
    shape = (B, N, T) if record else (1, 1, 1)
    rec_out = np.zeros(shape, dtype=np.uint8)
    rec_p = np.zeros(shape, dtype=np.uint8)
    rec_n = np.zeros(shape, dtype=np.uint8)
    diverged = np.zeros(B, dtype=np.bool_)
    if not control and targets.shape[1] != net.n:
        targets = np.zeros((B, net.n, T), dtype=np.uint8)

    kernels.simulate_batch(
        inputs, targets, w, net.group(), qp, qn, c_in,
        vec["alpha"], vec["beta_out"], vec["beta_ctl"], vec["gamma_p"], vec["gamma_n"],
        vec["v_th"], vec["u_th_p"], vec["u_th_n"], v_floor,
        bool(control), bool(learn), bool(immediate), float(eta), 1.0 / net.p,
        float(lo), float(hi),
        state, bool(chain), counts, fb_energy, dw, rec_out, rec_p, rec_n, bool(record),
        diverged,
    )
    if diverged.any():
        b = int(np.flatnonzero(diverged)[0])
        raise NumericalDivergenceError(
            f"trial {b} of the batch produced non-finite state",
            {"trial": b, "state": state[:, 0 if chain else b].copy(), "w": w.copy()},
        )
    rasters = {"out": rec_out, "p": rec_p, "n": rec_n} if record else None
    return SimResult(counts, fb_energy, dw if learn and not immediate else None, state, w, rasters)


def states_to_array(out: OutputLayerState, ctl: ControllerState) -> np.ndarray:
    """Pack reference-state objects into the kernel layout (one row)."""
    arr = kernels.new_state(1, out.n)
    for idx, a in zip(
        (kernels.V, kernels.IFF, kernels.IFB, kernels.S),
        (out.v, out.i_ff, out.i_fb, out.s),
    ):
        arr[idx, 0] = a
    for idx, a in zip(
        (kernels.UP, kernels.UN, kernels.JFF, kernels.JFB, kernels.SP, kernels.SN),
        (ctl.u_p, ctl.u_n, ctl.j_ff, ctl.j_fb, ctl.s_p, ctl.s_n),
    ):
        arr[idx, 0] = a
    return arr


def array_to_states(arr: np.ndarray, row: int = 0) -> tuple[OutputLayerState, ControllerState]:
    k = kernels
    return (
        OutputLayerState(*(arr[i, row].copy() for i in (k.V, k.IFF, k.IFB, k.S))),
        ControllerState(*(arr[i, row].copy() for i in (k.UP, k.UN, k.JFF, k.JFB, k.SP, k.SN))),
    )
