"""Trials, losses, the local learning rule and the training loops.

Output rates are kept in spikes per step internally. Class scores fed to the
softmax are in Hz: with rates in spikes per step every softmax would sit next
to uniform and the loss would carry no signal.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import kernels
from .dynamics import SimulationParams, WeightSet
from .encoding import LabeledSample, SpikeDataset
from .errors import ConfigurationError, StructuralError
from .network import Network, array_to_states, simulate, states_to_array

__all__ = [
    "TrainConfig",
    "TrialRecord",
    "MetricsRow",
    "EvalResult",
    "softmax",
    "cross_entropy",
    "target_error",
    "readout_rates",
    "class_scores",
    "local_weight_update",
    "run_trial",
    "evaluate",
    "train_offline",
    "train_online",
    "init_weights",
    "baseline_linear_readout",
]


@dataclass
class TrainConfig:
    """Training hyperparameters.

    ``immediate`` applies offline updates inside each trial instead of the
    batch mean (ablation). ``samples`` and ``window`` only matter online.
    """

    epochs: int = 30
    batch_size: int = 50
    eta: float = 1e-5
    T: int = 5000
    mode: str = "offline"
    seed: int = 0
    immediate: bool = False
    samples: int = 2500
    window: int = 25
    redraw: bool = False
    w_clip: tuple[float, float] | None = None
    n_val_eval: int | None = None

    def __post_init__(self):
        if self.mode not in ("offline", "online"):
            raise ConfigurationError(f"mode must be offline or online, got {self.mode!r}")
        if not self.eta >= 0 or not np.isfinite(self.eta):
            raise ConfigurationError(f"eta must be a finite non-negative number, got {self.eta}")
        if self.mode == "online":
            self.batch_size = 1
        if self.batch_size < 1 or self.epochs < 0 or self.window < 1 or self.samples < 0:
            raise ConfigurationError("batch_size and window must be >= 1, epochs and samples >= 0")
        if self.w_clip is not None:
            lo, hi = self.w_clip
            if not lo < hi:
                raise ConfigurationError("w_clip needs lo < hi")
            self.w_clip = (float(lo), float(hi))

    @property
    def update_cadence(self) -> str:
        return "per_spike_online" if self.mode == "online" else "per_batch_offline"

    def replace(self, **changes) -> "TrainConfig":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["update_cadence"] = self.update_cadence
        return d


@dataclass
class TrialRecord:
    output_rates: np.ndarray  # spikes/step, logical units
    prediction: np.ndarray  # softmax over class scores
    spike_counts: np.ndarray
    feedback_energy: np.ndarray


@dataclass
class MetricsRow:
    index: int
    train_loss: float
    val_loss: float
    target_error: float
    accuracy: float
    class_rates: np.ndarray = field(repr=False)  # (n_classes, n) mean output rate in Hz

    def as_dict(self) -> dict:
        d = {
            "index": self.index,
            "train_loss": self.train_loss,
            "val_loss": self.val_loss,
            "target_error": self.target_error,
            "accuracy": self.accuracy,
        }
        C, n = self.class_rates.shape
        for c in range(C):
            for i in range(n):
                d[f"rate_c{c}_n{i}"] = float(self.class_rates[c, i])
        return d


@dataclass
class EvalResult:
    loss: float
    accuracy: float
    target_error: float
    class_rates: np.ndarray
    rates: np.ndarray  # (N, n) spikes/step
    predictions: np.ndarray


# -- losses and readout -------------------------------------------------------


def softmax(z):
    z = np.asarray(z, dtype=np.float64)
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def cross_entropy(rates, label) -> float | np.ndarray:
    """``-log softmax(rates)[label]``; batched when ``rates`` is 2-D."""
    z = np.asarray(rates, dtype=np.float64)
    if not np.all(np.isfinite(z)):
        raise ValueError("rates must be finite")
    z = z - z.max(axis=-1, keepdims=True)
    logp = z - np.log(np.exp(z).sum(axis=-1, keepdims=True))
    if z.ndim == 1:
        return float(-logp[int(label)])
    label = np.asarray(label, dtype=np.int64)
    return -logp[np.arange(len(label)), label]


def target_error(output_rates, target_rates) -> float:
    """Mean absolute difference, same units on both sides."""
    a = np.asarray(output_rates, dtype=np.float64)
    b = np.asarray(target_rates, dtype=np.float64)
    if a.shape != b.shape:
        raise StructuralError(f"shape mismatch {a.shape} vs {b.shape}")
    return float(np.mean(np.abs(b - a)))


def readout_rates(spikes) -> np.ndarray:
    """Mean spikes per step of each row of an (n, T) raster."""
    data = getattr(spikes, "data", spikes)
    data = np.asarray(data)
    if data.ndim != 2 or data.shape[1] < 1:
        raise StructuralError("need an (n, T) raster with T >= 1")
    return data.mean(axis=1, dtype=np.float64)


def class_scores(rates_hz, class_targets_hz) -> np.ndarray:
    """Scores for the softmax readout.

    With one output per class the score is the rate itself. Otherwise (the
    single-neuron binary task) each class scores minus the mean distance to
    its target rate vector.
    """
    r = np.atleast_2d(np.asarray(rates_hz, dtype=np.float64))
    tgt = np.asarray(class_targets_hz, dtype=np.float64)
    C, n = tgt.shape
    if r.shape[1] != n:
        raise StructuralError(f"rates have {r.shape[1]} units, targets {n}")
    if C == n and np.all(np.argmax(tgt, axis=1) == np.arange(C)):
        out = r
    else:
        out = -np.abs(r[:, None, :] - tgt[None, :, :]).mean(axis=2)
    return out if np.ndim(rates_hz) > 1 else out[0]


# -- learning rule ------------------------------------------------------------


def local_weight_update(w, i_fb, s_in, eta) -> np.ndarray:
    """``w + eta * outer(i_fb, s_in)``; only columns with an input spike move."""
    w = np.asarray(w, dtype=np.float64)
    i_fb = np.asarray(i_fb, dtype=np.float64)
    s_in = np.asarray(s_in, dtype=np.float64)
    if w.shape != (i_fb.shape[0], s_in.shape[0]):
        raise StructuralError(f"w {w.shape} does not match i_fb {i_fb.shape} and s_in {s_in.shape}")
    return w + eta * np.outer(i_fb, s_in)


def init_weights(task: str, n: int, m: int, seed) -> WeightSet:
    """Uniform [0, 0.04] for the binary task, N(0, 0.5) for Yin-Yang."""
    rng = np.random.default_rng(seed)
    if task == "binary":
        w = rng.uniform(0.0, 0.04, (n, m))
    elif task == "yinyang":
        w = rng.normal(0.0, 0.5, (n, m))
    else:
        raise ConfigurationError(f"unknown task {task!r}")
    return WeightSet(w)


# -- trials -------------------------------------------------------------------


def _as_network(weights, params, network) -> Network:
    if network is not None:
        return network.with_weights(weights)
    return Network(weights, params)


def run_trial(
    sample: LabeledSample,
    weights: WeightSet,
    params: SimulationParams,
    control_active: bool,
    learn: bool = False,
    eta: float = 0.0,
    carry_state=None,
    *,
    network: Network | None = None,
    class_targets=None,
):
    """Simulate one sample; returns ``(TrialRecord, WeightSet, (out_state, ctl_state))``.

    Learning updates the weights at every presynaptic spike. ``carry_state`` is
    an ``(OutputLayerState, ControllerState)`` pair to continue from.
    """
    if learn and not control_active:
        raise StructuralError("learning requires active control")
    net = _as_network(weights, params, network)
    if carry_state is not None:
        out, ctl = carry_state
        if net.p != 1:
            raise StructuralError("carried reference states only cover p = 1")
        state = states_to_array(out, ctl)
    else:
        state = None
    res = simulate(
        net, sample.input.data[None], sample.target.data[None],
        control=control_active, learn=learn, eta=eta, immediate=True, state=state,
    )
    counts = res.logical_counts(net.p)[0]
    T = sample.input.T
    rates = counts / T
    tgt = class_targets if class_targets is not None else np.eye(max(net.n, 2))[:, : net.n]
    pred = softmax(class_scores(rates / params.dt, tgt))
    rec = TrialRecord(rates, pred, res.counts[0], res.fb_energy[0])
    new_w = weights.with_w(res.w) if learn else weights
    states = array_to_states(res.state, 0) if net.p == 1 else res.state
    return rec, new_w, states


def evaluate(net: Network, ds: SpikeDataset, chunk: int = 200) -> EvalResult:
    """Control-inactive pass over a dataset with fresh state per sample."""
    counts = np.zeros((len(ds), net.n))
    for k in range(0, len(ds), chunk):
        sl = slice(k, k + chunk)
        res = simulate(net, ds.inputs[sl], ds.targets[sl], control=False)
        counts[sl] = res.logical_counts(net.p)
    return _score(counts / ds.T, ds)


def _score(rates: np.ndarray, ds: SpikeDataset) -> EvalResult:
    dt = ds.dt
    tgt = ds.class_target_rates()
    scores = class_scores(rates / dt, tgt)
    loss = float(np.mean(cross_entropy(scores, ds.labels)))
    pred = scores.argmax(axis=1)
    acc = float(np.mean(pred == ds.labels))
    terr = float(np.mean(np.abs(ds.target_rates * dt - rates)))
    class_rates = np.zeros_like(tgt)
    for c in range(tgt.shape[0]):
        sel = ds.labels == c
        if sel.any():
            class_rates[c] = rates[sel].mean(axis=0) / dt
    return EvalResult(loss, acc, terr, class_rates, rates, pred)


def _train_loss(counts: np.ndarray, ds: SpikeDataset, idx) -> float:
    scores = class_scores(counts / ds.T / ds.dt, ds.class_target_rates())
    return float(np.mean(cross_entropy(scores, ds.labels[idx])))


def _clip(w, bounds):
    return w if bounds is None else np.clip(w, *bounds)


def _eval_set(val: SpikeDataset, config: TrainConfig) -> SpikeDataset:
    if config.n_val_eval is not None and config.n_val_eval < len(val):
        return val.subset(np.arange(config.n_val_eval))
    return val


def train_offline(
    datasets: Sequence[SpikeDataset],
    config: TrainConfig,
    params: SimulationParams,
    init: WeightSet,
    *,
    network: Network | None = None,
    callback=None,
) -> tuple[WeightSet, list[MetricsRow]]:
    """Mini-batch training with state reset per trial.

    ``datasets`` is ``(train, val)`` or ``(train, val, test)``. Row 0 holds the
    metrics of the initial weights; row ``e`` those after epoch ``e``.
    ``callback(row, weights)`` runs after every epoch; returning True stops early.
    """
    if config.mode != "offline":
        raise ConfigurationError("train_offline needs mode='offline'")
    train, val = datasets[0], datasets[1]
    val_eval = _eval_set(val, config)
    net = _as_network(init.copy(), params, network)
    if config.w_clip is not None:
        net.w_clip = config.w_clip
    rng = np.random.default_rng(config.seed)

    ev = evaluate(net, val_eval)
    rows = [MetricsRow(0, float("nan"), ev.loss, ev.target_error, ev.accuracy, ev.class_rates)]
    for epoch in range(1, config.epochs + 1):
        if config.redraw:
            train = train.redraw((config.seed, epoch))
        order = rng.permutation(len(train))
        losses = []
        for k in range(0, len(order), config.batch_size):
            idx = order[k : k + config.batch_size]
            res = simulate(
                net, train.inputs[idx], train.targets[idx],
                control=True, learn=config.eta > 0, eta=config.eta,
                immediate=config.immediate,
            )
            if config.eta > 0:
                if config.immediate:
                    w = res.w
                else:
                    w = _clip(net.weights.w + res.dw.mean(axis=0), config.w_clip)
                net = net.with_weights(net.weights.with_w(w))
            losses.append(_train_loss(res.logical_counts(net.p), train, idx) * len(idx))
        ev = evaluate(net, val_eval)
        row = MetricsRow(epoch, float(np.sum(losses) / len(order)), ev.loss,
                         ev.target_error, ev.accuracy, ev.class_rates)
        rows.append(row)
        if callback is not None and callback(row, net.weights) is True:
            break
    return net.weights, rows


def train_online(
    stream: SpikeDataset,
    config: TrainConfig,
    params: SimulationParams,
    init: WeightSet,
    *,
    val: SpikeDataset | None = None,
    network: Network | None = None,
    callback=None,
) -> tuple[WeightSet, list[MetricsRow]]:
    """Single-phase learning on a stream of randomly drawn samples.

    State is never reset and the weights change at every presynaptic spike.
    Each metrics row covers one window of ``config.window`` samples; its
    validation columns come from a control-inactive pass over ``val`` at the
    end of the window (or over the stream itself when ``val`` is None).
    """
    if config.mode != "online":
        raise ConfigurationError("train_online needs mode='online'")
    net = _as_network(init.copy(), params, network)
    net.w_clip = config.w_clip
    val_eval = _eval_set(val if val is not None else stream, config)
    rng = np.random.default_rng(config.seed)
    order = rng.integers(0, len(stream), size=config.samples)
    state = kernels.new_state(1, net.n_phys)

    ev = evaluate(net, val_eval)
    rows = [MetricsRow(0, float("nan"), ev.loss, ev.target_error, ev.accuracy, ev.class_rates)]
    for k, start in enumerate(range(0, len(order), config.window), start=1):
        idx = order[start : start + config.window]
        res = simulate(
            net, stream.inputs[idx], stream.targets[idx],
            control=True, learn=config.eta > 0, eta=config.eta,
            immediate=True, state=state, chain=True,
        )
        state = res.state
        net = net.with_weights(net.weights.with_w(res.w))
        train_loss = _train_loss(res.logical_counts(net.p), stream, idx)
        ev = evaluate(net, val_eval)
        row = MetricsRow(k, train_loss, ev.loss, ev.target_error, ev.accuracy, ev.class_rates)
        rows.append(row)
        if callback is not None and callback(row, net.weights) is True:
            break
    return net.weights, rows


# -- baseline -----------------------------------------------------------------


def baseline_linear_readout(
    rate_features,
    labels,
    epochs: int = 300,
    eta: float = 2e-3,
    *,
    test_features=None,
    test_labels=None,
    batch_size: int | None = 20,
    n_classes: int | None = None,
    seed=0,
) -> float:
    """Softmax regression on input rates; returns accuracy on the test pair.

    Features are standardised with training statistics and a bias column is
    appended. ``batch_size=None`` gives full-batch gradient descent. Without a
    test set the training accuracy is returned.
    """
    X = np.asarray(rate_features, dtype=np.float64)
    y = np.asarray(labels, dtype=np.int64)
    if X.ndim != 2 or len(X) != len(y):
        raise StructuralError("features must be (N, k) with one label per row")
    if not np.all(np.isfinite(X)):
        raise ValueError("features must be finite")
    C = int(n_classes or y.max() + 1)
    Xt = X if test_features is None else np.asarray(test_features, dtype=np.float64)
    yt = y if test_labels is None else np.asarray(test_labels, dtype=np.int64)
    mu, sd = X.mean(axis=0), X.std(axis=0)
    sd[sd == 0] = 1.0
    prep = lambda A: np.c_[(A - mu) / sd, np.ones(len(A))]  # noqa: E731
    X, Xt = prep(X), prep(Xt)
    W = np.zeros((X.shape[1], C))
    Y = np.eye(C)[y]
    rng = np.random.default_rng(seed)
    bs = len(X) if batch_size is None else int(batch_size)
    for _ in range(epochs):
        order = rng.permutation(len(X)) if bs < len(X) else np.arange(len(X))
        for k in range(0, len(X), bs):
            i = order[k : k + bs]
            W -= eta * X[i].T @ (softmax(X[i] @ W) - Y[i]) / len(i)
    # ties (e.g. untrained zero weights) resolve to a random class, not class 0
    scores = Xt @ W + 1e-12 * rng.random((len(Xt), C))
    return float(np.mean(scores.argmax(axis=1) == yt))
