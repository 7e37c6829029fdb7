"""Device-mismatch emulation and population redundancy.

Mismatch is drawn once per experiment as a multiplicative Gaussian deviation
of every per-neuron time constant and threshold. Populations replace each
logical output neuron and controller pair by ``p`` physical copies that share
the logical feedforward weights.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .dynamics import SimulationParams, WeightSet
from .errors import ConfigurationError, StructuralError

__all__ = [
    "PARAM_NAMES",
    "MismatchSpec",
    "PopulationSpec",
    "PerNeuronParams",
    "PopulationLayout",
    "apply_mismatch",
    "expand_population",
    "aggregate_population_output",
    "mismatch_to_json",
    "mismatch_from_json",
]

PARAM_NAMES = ("tau_m", "tau_c", "tau_u", "v_th", "u_th")
MAX_RESAMPLE = 100


@dataclass(frozen=True)
class MismatchSpec:
    cv: float = 0.0
    affected: frozenset = field(default_factory=lambda: frozenset(PARAM_NAMES))
    seed: int = 0

    def __post_init__(self):
        if not (np.isfinite(self.cv) and self.cv >= 0):
            raise ConfigurationError(f"cv must be >= 0, got {self.cv}")
        unknown = set(self.affected) - set(PARAM_NAMES)
        if unknown:
            raise ConfigurationError(f"unknown mismatch parameters {sorted(unknown)}")
        object.__setattr__(self, "affected", frozenset(self.affected))


@dataclass(frozen=True)
class PopulationSpec:
    p: int = 1

    def __post_init__(self):
        if int(self.p) != self.p or self.p < 1:
            raise StructuralError(f"population size must be >= 1, got {self.p}")


@dataclass
class PerNeuronParams:
    """Per-physical-neuron parameters.

    ``tau_c`` rows are (output-neuron synapses, controller synapses); ``tau_u``
    and ``u_th`` rows are (positive, negative) controller. The others are
    plain vectors over output neurons.
    """

    tau_m: np.ndarray
    tau_c: np.ndarray
    tau_u: np.ndarray
    v_th: np.ndarray
    u_th: np.ndarray
    dt: float

    def __post_init__(self):
        N = self.tau_m.shape[0]
        for name in ("tau_c", "tau_u", "u_th"):
            if getattr(self, name).shape != (2, N):
                raise StructuralError(f"{name} must be (2, {N})")
        if self.v_th.shape != (N,):
            raise StructuralError(f"v_th must be ({N},)")
        bad = _invalid(self.as_dict(), self.dt)
        if bad:
            raise ConfigurationError(f"invalid per-neuron values in {sorted(bad)}")

    @property
    def size(self) -> int:
        return self.tau_m.shape[0]

    @classmethod
    def broadcast(cls, params: SimulationParams, size: int) -> "PerNeuronParams":
        return cls(
            tau_m=np.full(size, params.tau_m),
            tau_c=np.full((2, size), params.tau_c),
            tau_u=np.full((2, size), params.tau_u),
            v_th=np.full(size, params.v_th),
            u_th=np.full((2, size), params.u_th),
            dt=params.dt,
        )

    def as_dict(self) -> dict[str, np.ndarray]:
        return {k: getattr(self, k) for k in PARAM_NAMES}


def _invalid(values: dict, dt: float) -> set:
    bad = set()
    for k, v in values.items():
        ok = v > dt if k.startswith("tau") else v > 0
        if not np.all(ok & np.isfinite(v)):
            bad.add(k)
    return bad


def apply_mismatch(params: SimulationParams, layout, spec: MismatchSpec) -> PerNeuronParams:
    """Draw ``theta * (1 + cv * z)`` independently per neuron and parameter.

    ``layout`` is the number of physical neurons or an ``(n, p)`` pair.
    Entries that leave the valid range are redrawn, at most 100 times.
    """
    size = int(np.prod(layout)) if np.ndim(layout) else int(layout)
    if size < 1:
        raise StructuralError("layout must contain at least one neuron")
    base = PerNeuronParams.broadcast(params, size)
    if spec.cv == 0:
        return base
    rng = np.random.default_rng(spec.seed)
    out = {}
    for name in PARAM_NAMES:
        ideal = getattr(base, name)
        if name not in spec.affected:
            out[name] = ideal.copy()
            continue
        vals = ideal * (1.0 + spec.cv * rng.standard_normal(ideal.shape))
        floor = params.dt if name.startswith("tau") else 0.0
        for _ in range(MAX_RESAMPLE):
            bad = ~(vals > floor)
            if not bad.any():
                break
            vals[bad] = ideal[bad] * (1.0 + spec.cv * rng.standard_normal(int(bad.sum())))
        if not np.all(vals > floor):
            raise ConfigurationError(
                f"mismatch on {name} still invalid after {MAX_RESAMPLE} redraws (cv={spec.cv})"
            )
        out[name] = vals
    return PerNeuronParams(dt=params.dt, **out)


@dataclass(frozen=True)
class PopulationLayout:
    n: int
    p: int

    @property
    def size(self) -> int:
        return self.n * self.p

    @property
    def group(self) -> np.ndarray:
        """Logical unit of every physical neuron."""
        return np.repeat(np.arange(self.n), self.p)


def expand_population(weights: WeightSet, targets, p: int):
    """Physical weights, replicated target rates and the layout.

    Feedforward rows are copied to every member. Feedback between a unit's
    controller population and its output population is all-to-all with
    weights divided by ``p``.
    """
    PopulationSpec(p)
    block = np.full((p, p), 1.0 / p)
    expanded = WeightSet(
        np.repeat(weights.w, p, axis=0),
        np.kron(weights.q_p, block),
        np.kron(weights.q_n, block),
    )
    targets = None if targets is None else np.repeat(np.asarray(targets), p, axis=-1)
    return expanded, targets, PopulationLayout(weights.n, p)


def aggregate_population_output(spikes, p: int) -> np.ndarray:
    """Logical rates (spikes/step) as the mean over each group of ``p`` rows.

    Accepts an (p*n, T) raster or a vector of per-neuron rates.
    """
    data = np.asarray(getattr(spikes, "data", spikes), dtype=np.float64)
    rates = data.mean(axis=1) if data.ndim == 2 else data
    if rates.ndim != 1 or rates.shape[0] % p:
        raise StructuralError(f"{rates.shape[0]} neurons do not split into groups of {p}")
    return rates.reshape(-1, p).mean(axis=1)


def mismatch_to_json(q: PerNeuronParams, spec: MismatchSpec | None = None) -> str:
    doc = {"dt": q.dt, "params": {k: v.tolist() for k, v in q.as_dict().items()}}
    if spec is not None:
        doc["spec"] = {"cv": spec.cv, "affected": sorted(spec.affected), "seed": spec.seed}
    return json.dumps(doc, indent=1, sort_keys=True)


def mismatch_from_json(text: str) -> PerNeuronParams:
    doc = json.loads(text)
    arrs = {k: np.asarray(v, dtype=np.float64) for k, v in doc["params"].items()}
    return PerNeuronParams(dt=float(doc["dt"]), **arrs)
