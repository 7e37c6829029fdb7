"""Discrete-time dynamics of the output layer and the spiking controller.

Everything here advances the network by exactly one timestep and knows
nothing about datasets or training. The functions are the reference
implementation; :mod:`fbsnn.kernels` holds a compiled batch version that is
tested against them.

Per timestep the output layer is advanced first, then the controller. The
output layer therefore sees controller spikes from the previous step, while
the controller sees output spikes of the current step.
"""

from __future__ import annotations

import dataclasses
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, NumericalDivergenceError, StructuralError

__all__ = [
    "SimulationParams",
    "OutputLayerState",
    "ControllerState",
    "WeightSet",
    "heaviside",
    "step_output_layer",
    "step_controller",
    "reset_states",
]


@dataclass(frozen=True)
class SimulationParams:
    """Time constants, thresholds and timestep (seconds / voltage units).

    ``v_floor`` optionally clamps both membrane voltages from below; ``None``
    leaves them unbounded. The training tasks use the tuned values in
    :data:`fbsnn.config.SIM_PRESETS` instead of these generic defaults.
    """

    dt: float = 1e-3
    tau_m: float = 10e-3
    tau_c: float = 50e-3
    tau_u: float = 5e-3
    v_th: float = 1.0
    u_th: float = 1.0
    v_floor: float | None = None

    def __post_init__(self):
        if not self.dt > 0:
            raise ConfigurationError(f"dt must be positive, got {self.dt}")
        for name in ("tau_m", "tau_c", "tau_u"):
            tau = getattr(self, name)
            if not np.isfinite(tau) or tau <= self.dt:
                raise ConfigurationError(
                    f"{name}={tau} must exceed dt={self.dt} so its decay factor lies in (0, 1)"
                )
        for name in ("v_th", "u_th"):
            if not getattr(self, name) > 0:
                raise ConfigurationError(f"{name} must be positive")
        if self.tau_u >= self.tau_c:
            warnings.warn(
                f"tau_u={self.tau_u} >= tau_c={self.tau_c}: controller reset dynamics "
                "are no longer negligible",
                RuntimeWarning,
                stacklevel=3,
            )

    @property
    def alpha(self) -> float:
        return 1.0 - self.dt / self.tau_m

    @property
    def beta(self) -> float:
        return 1.0 - self.dt / self.tau_c

    @property
    def gamma(self) -> float:
        return 1.0 - self.dt / self.tau_u

    def replace(self, **changes) -> "SimulationParams":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


def _zeros(n):
    return np.zeros(n, dtype=np.float64)


@dataclass
class OutputLayerState:
    v: np.ndarray
    i_ff: np.ndarray
    i_fb: np.ndarray
    s: np.ndarray

    @property
    def n(self) -> int:
        return self.v.shape[0]

    def copy(self) -> "OutputLayerState":
        return OutputLayerState(self.v.copy(), self.i_ff.copy(), self.i_fb.copy(), self.s.copy())


@dataclass
class ControllerState:
    u_p: np.ndarray
    u_n: np.ndarray
    j_ff: np.ndarray
    j_fb: np.ndarray
    s_p: np.ndarray
    s_n: np.ndarray

    @property
    def n(self) -> int:
        return self.u_p.shape[0]

    def copy(self) -> "ControllerState":
        return ControllerState(*(a.copy() for a in dataclasses.astuple(self)))


@dataclass
class WeightSet:
    """Feedforward matrix ``w`` (n x m) and feedback matrices (n x n).

    ``q_p`` is non-negative and ``q_n`` non-positive, so negative-controller
    spikes subtract current from their output neuron.
    """

    w: np.ndarray
    q_p: np.ndarray = field(default=None)
    q_n: np.ndarray = field(default=None)

    def __post_init__(self):
        self.w = np.array(self.w, dtype=np.float64, ndmin=2)
        n = self.w.shape[0]
        if self.q_p is None:
            self.q_p = np.eye(n)
        if self.q_n is None:
            self.q_n = -np.eye(n)
        self.q_p = np.array(self.q_p, dtype=np.float64)
        self.q_n = np.array(self.q_n, dtype=np.float64)
        if self.w.ndim != 2:
            raise StructuralError(f"w must be 2-D, got shape {self.w.shape}")
        for name in ("q_p", "q_n"):
            if getattr(self, name).shape != (n, n):
                raise StructuralError(
                    f"{name} has shape {getattr(self, name).shape}, expected {(n, n)}"
                )
        if np.any(self.q_p < 0):
            raise StructuralError("q_p entries must be non-negative")
        if np.any(self.q_n > 0):
            raise StructuralError("q_n entries must be non-positive")

    @property
    def n(self) -> int:
        return self.w.shape[0]

    @property
    def m(self) -> int:
        return self.w.shape[1]

    def copy(self) -> "WeightSet":
        return WeightSet(self.w.copy(), self.q_p.copy(), self.q_n.copy())

    def with_w(self, w) -> "WeightSet":
        return WeightSet(np.array(w, dtype=np.float64), self.q_p, self.q_n)


def heaviside(x):
    """Step function with ``H(0) = 1``: a spike is emitted at exact threshold."""
    return (np.asarray(x) >= 0).astype(np.float64)


def _check_binary(name, x, n):
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (n,):
        raise StructuralError(f"{name} has shape {x.shape}, expected ({n},)")
    if np.any((x != 0) & (x != 1)):
        raise StructuralError(f"{name} must be binary")
    return x


def _check_finite(where, **arrays):
    bad = [k for k, a in arrays.items() if not np.all(np.isfinite(a))]
    if bad:
        raise NumericalDivergenceError(
            f"non-finite values in {', '.join(bad)} during {where}",
            {k: np.array(a, copy=True) for k, a in arrays.items()},
        )


def step_output_layer(
    state: OutputLayerState,
    weights: WeightSet,
    s_in,
    s_p,
    s_n,
    params: SimulationParams,
    control_active: bool = True,
) -> OutputLayerState:
    """Advance the output neurons by one step.

    ``s_p`` and ``s_n`` are the controller spikes of the previous step.
    """
    n, m = weights.n, weights.m
    if state.n != n:
        raise StructuralError(f"state has {state.n} neurons, weights have {n}")
    s_in = _check_binary("s_in", s_in, m)
    s_p = _check_binary("s_p", s_p, n)
    s_n = _check_binary("s_n", s_n, n)

    beta = params.beta
    i_ff = beta * state.i_ff + weights.w @ s_in
    if control_active:
        i_fb = beta * state.i_fb + weights.q_p @ s_p + weights.q_n @ s_n
    else:
        i_fb = beta * state.i_fb
    v = params.alpha * state.v - params.v_th * state.s + i_ff + i_fb
    if params.v_floor is not None:
        v = np.maximum(v, params.v_floor)
    _check_finite("step_output_layer", v=v, i_ff=i_ff, i_fb=i_fb)
    s = heaviside(v - params.v_th)
    return OutputLayerState(v=v, i_ff=i_ff, i_fb=i_fb, s=s)


def step_controller(
    state: ControllerState,
    s_out,
    s_trg,
    params: SimulationParams,
) -> ControllerState:
    """Advance the positive/negative controller pairs by one step."""
    n = state.n
    s_out = _check_binary("s_out", s_out, n)
    s_trg = _check_binary("s_trg", s_trg, n)

    beta, gamma, u_th = params.beta, params.gamma, params.u_th
    j_ff = beta * state.j_ff + s_out
    j_fb = beta * state.j_fb + s_trg
    # one shared difference keeps the pair exactly antisymmetric in floating point
    drive = j_fb - j_ff
    u_p = gamma * state.u_p - u_th * state.s_p + drive
    u_n = gamma * state.u_n - u_th * state.s_n - drive
    if params.v_floor is not None:
        u_p = np.maximum(u_p, params.v_floor)
        u_n = np.maximum(u_n, params.v_floor)
    _check_finite("step_controller", u_p=u_p, u_n=u_n, j_ff=j_ff, j_fb=j_fb)
    return ControllerState(
        u_p=u_p,
        u_n=u_n,
        j_ff=j_ff,
        j_fb=j_fb,
        s_p=heaviside(u_p - u_th),
        s_n=heaviside(u_n - u_th),
    )


def reset_states(n: int) -> tuple[OutputLayerState, ControllerState]:
    """Zero-initialised states for ``n`` output neurons and controller pairs."""
    if int(n) != n or n < 1:
        raise StructuralError(f"need at least one neuron, got n={n}")
    n = int(n)
    return (
        OutputLayerState(_zeros(n), _zeros(n), _zeros(n), _zeros(n)),
        ControllerState(_zeros(n), _zeros(n), _zeros(n), _zeros(n), _zeros(n), _zeros(n)),
    )
