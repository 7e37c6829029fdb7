"""Poisson rate coding and the two classification datasets.

Rasters are ``uint8`` arrays shaped (neurons, timesteps). A dataset keeps all
samples of one split in stacked arrays so the compiled trial loop can consume
them without copying; indexing it yields :class:`LabeledSample` views.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import EncodingSaturationError, StructuralError

__all__ = [
    "SpikeRaster",
    "LabeledSample",
    "SpikeDataset",
    "YinYangClass",
    "YinYangPoint",
    "poisson_encode",
    "poisson_encode_many",
    "gen_binary_dataset",
    "yinyang_class",
    "gen_yinyang_points",
    "encode_yinyang_sample",
    "gen_yinyang_dataset",
]

# split ids mixed into per-sample seeds
TRAIN, VAL, TEST = 0, 1, 2


@dataclass
class SpikeRaster:
    data: np.ndarray
    dt: float

    def __post_init__(self):
        self.data = np.asarray(self.data)
        if self.data.ndim != 2:
            raise StructuralError(f"raster must be 2-D (neurons, T), got {self.data.shape}")

    @property
    def n_neurons(self) -> int:
        return self.data.shape[0]

    @property
    def T(self) -> int:
        return self.data.shape[1]

    def counts(self) -> np.ndarray:
        return self.data.sum(axis=1, dtype=np.int64)

    def rates(self) -> np.ndarray:
        """Empirical rate of each row in Hz."""
        return self.counts() / (self.T * self.dt)


@dataclass
class LabeledSample:
    input: SpikeRaster
    target: SpikeRaster
    label: int
    input_rates: np.ndarray
    target_rates: np.ndarray


@dataclass
class SpikeDataset:
    """One split of spike-encoded samples.

    ``inputs`` is (N, m, T) and ``targets`` is (N, n, T), both ``uint8``.
    ``coords`` holds the raw (x, y) of Yin-Yang points and is empty otherwise.
    """

    inputs: np.ndarray
    targets: np.ndarray
    labels: np.ndarray
    input_rates: np.ndarray
    target_rates: np.ndarray
    dt: float
    seed: int = 0
    split: int = TRAIN
    coords: np.ndarray | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        N = len(self.labels)
        if self.inputs.shape[0] != N or self.targets.shape[0] != N:
            raise StructuralError("inputs, targets and labels disagree on sample count")
        if self.inputs.shape[2] != self.targets.shape[2]:
            raise StructuralError("inputs and targets disagree on T")

    def __len__(self):
        return len(self.labels)

    def __getitem__(self, i) -> LabeledSample:
        return LabeledSample(
            input=SpikeRaster(self.inputs[i], self.dt),
            target=SpikeRaster(self.targets[i], self.dt),
            label=int(self.labels[i]),
            input_rates=self.input_rates[i],
            target_rates=self.target_rates[i],
        )

    @property
    def m(self) -> int:
        return self.inputs.shape[1]

    @property
    def n(self) -> int:
        return self.targets.shape[1]

    @property
    def T(self) -> int:
        return self.inputs.shape[2]

    @property
    def n_classes(self) -> int:
        return int(self.meta.get("n_classes", max(self.n, 2)))

    def class_target_rates(self) -> np.ndarray:
        """Target rate vector (Hz) of each class, shape (n_classes, n)."""
        out = np.zeros((self.n_classes, self.n))
        for c in range(self.n_classes):
            rows = self.target_rates[self.labels == c]
            if len(rows):
                out[c] = rows[0]
        return out

    def subset(self, idx) -> "SpikeDataset":
        idx = np.asarray(idx)
        return SpikeDataset(
            inputs=self.inputs[idx],
            targets=self.targets[idx],
            labels=self.labels[idx],
            input_rates=self.input_rates[idx],
            target_rates=self.target_rates[idx],
            dt=self.dt,
            seed=self.seed,
            split=self.split,
            coords=None if self.coords is None else self.coords[idx],
            meta=dict(self.meta),
        )

    def redraw(self, seed: int) -> "SpikeDataset":
        """Fresh Poisson rasters from the stored rates."""
        T = self.T
        inputs = poisson_encode_many(self.input_rates, T, self.dt, (seed, self.split, 0))
        targets = poisson_encode_many(self.target_rates, T, self.dt, (seed, self.split, 1))
        return SpikeDataset(
            inputs, targets, self.labels, self.input_rates, self.target_rates,
            self.dt, seed, self.split, self.coords, dict(self.meta),
        )


def _bernoulli_p(rates, dt):
    p = np.asarray(rates, dtype=np.float64) * dt
    if np.any(p < 0) or not np.all(np.isfinite(p)):
        raise EncodingSaturationError("rates must be finite and non-negative")
    if np.any(p > 1.0 + 1e-12):
        raise EncodingSaturationError(
            f"rate {np.max(rates)} Hz with dt={dt} gives spike probability {np.max(p):.3g} > 1"
        )
    return p


def poisson_encode(rates, T: int, dt: float, seed) -> SpikeRaster:
    """Independent Bernoulli(rate * dt) spikes per row and timestep."""
    p = _bernoulli_p(np.atleast_1d(rates), dt)
    rng = np.random.default_rng(seed)
    data = (rng.random((p.shape[0], int(T))) < p[:, None]).astype(np.uint8)
    return SpikeRaster(data, dt)


def poisson_encode_many(rates, T: int, dt: float, seed, chunk: int = 256) -> np.ndarray:
    """Encode a (N, k) rate matrix into a (N, k, T) ``uint8`` array.

    Chunks keep the temporary float buffer small; the result depends only on
    ``seed`` and not on ``chunk``'s relation to N because every chunk gets its
    own child seed.
    """
    rates = np.atleast_2d(np.asarray(rates, dtype=np.float64))
    p = _bernoulli_p(rates, dt)
    N, k = p.shape
    out = np.empty((N, k, int(T)), dtype=np.uint8)
    base = np.random.SeedSequence(_entropy(seed))
    for c, start in enumerate(range(0, N, chunk)):
        stop = min(start + chunk, N)
        rng = np.random.default_rng(_child(base, c))
        out[start:stop] = rng.random((stop - start, k, int(T))) < p[start:stop, :, None]
    return out


def _entropy(seed):
    if isinstance(seed, (tuple, list)):
        return [int(s) for s in seed]
    return int(seed)


def _child(base: np.random.SeedSequence, index: int) -> np.random.SeedSequence:
    entropy = base.entropy if isinstance(base.entropy, list) else [base.entropy]
    return np.random.SeedSequence(list(entropy) + [index])


# -- binary task ------------------------------------------------------------


def gen_binary_dataset(
    n_train: int = 5000,
    n_val: int = 1000,
    n_test: int = 1000,
    T: int = 5000,
    dt: float = 1e-3,
    seed: int = 0,
    f_high: float = 100.0,
    f_low: float = 50.0,
    f1: float = 100.0,
    f0: float = 20.0,
    high_target_class: int = 0,
) -> tuple[SpikeDataset, SpikeDataset, SpikeDataset]:
    """Two inputs A, B and one output neuron.

    Class 0 has A at ``f_high`` and B at ``f_low``; class 1 the reverse. The
    output neuron's target is ``f1`` for ``high_target_class`` and ``f0`` for
    the other class. Labels alternate, so every split is balanced.
    """
    if min(n_train, n_val, n_test) < 1:
        raise StructuralError("every split needs at least one sample")
    if high_target_class not in (0, 1):
        raise StructuralError("high_target_class must be 0 or 1")
    splits = []
    for split, count in ((TRAIN, n_train), (VAL, n_val), (TEST, n_test)):
        labels = np.arange(count) % 2
        in_rates = np.where(labels[:, None] == 0, [f_high, f_low], [f_low, f_high]).astype(float)
        trg = np.where(labels == high_target_class, f1, f0).astype(float)[:, None]
        splits.append(
            SpikeDataset(
                inputs=poisson_encode_many(in_rates, T, dt, (seed, split, 0)),
                targets=poisson_encode_many(trg, T, dt, (seed, split, 1)),
                labels=labels.astype(np.int64),
                input_rates=in_rates,
                target_rates=trg,
                dt=dt,
                seed=seed,
                split=split,
                meta={"task": "binary", "n_classes": 2, "f1": f1, "f0": f0,
                      "high_target_class": high_target_class},
            )
        )
    return tuple(splits)


# -- Yin-Yang ---------------------------------------------------------------


class YinYangClass(enum.IntEnum):
    YIN = 0
    YANG = 1
    DOT = 2


@dataclass(frozen=True)
class YinYangPoint:
    x: float
    y: float
    cls: YinYangClass

    @property
    def features(self) -> np.ndarray:
        return np.array([self.x, self.y, 1.0 - self.x, 1.0 - self.y])


def yinyang_class(x, y, r_big: float = 0.5, r_small: float = 0.1):
    """Region of the yin-yang symbol containing (x, y); vectorised.

    The symbol is a disc of radius ``r_big`` centred at (r_big, r_big), split
    into two lobes by half-discs of radius ``r_big / 2`` around the left and
    right eyes, with eyes of radius ``r_small``. Yin is the upper half minus
    the right half-disc, plus the left half-disc.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    lobe = 0.5 * r_big
    d_left = np.hypot(x - lobe, y - r_big)
    d_right = np.hypot(x - 3 * lobe, y - r_big)
    # the left eye's rim belongs to the lobe only outside the eye itself
    in_left_lobe = (d_left > r_small) & (d_left <= lobe)
    in_right_lobe = d_right <= lobe
    upper = y > r_big
    yin = in_left_lobe | (upper & ~in_right_lobe) | (d_right <= r_small)
    cls = np.where(yin, YinYangClass.YIN, YinYangClass.YANG)
    eye = (d_left < r_small) | (d_right < r_small)
    return np.where(eye, YinYangClass.DOT, cls).astype(np.int64)


def gen_yinyang_points(count: int, seed, r_big: float = 0.5, r_small: float = 0.1):
    """Uniform points in the symbol disc, classes cycling Yin/Yang/Dot.

    Each point is drawn by rejection until it lands in its assigned class, so
    any count divisible by three is exactly balanced.
    """
    if count < 1:
        raise StructuralError("count must be >= 1")
    rng = np.random.default_rng(seed)
    points = []
    for i in range(count):
        goal = i % 3
        while True:
            x, y = rng.random(2) * 2.0 * r_big
            if np.hypot(x - r_big, y - r_big) > r_big:
                continue
            c = int(yinyang_class(x, y, r_big, r_small))
            if c == goal:
                break
        points.append(YinYangPoint(float(x), float(y), YinYangClass(c)))
    order = rng.permutation(count)
    return [points[k] for k in order]


def _yinyang_rates(xy, f_min, f_max):
    x, y = xy[:, 0], xy[:, 1]
    feats = np.stack([x, y, 1.0 - x, 1.0 - y], axis=1)
    return f_min + feats * (f_max - f_min)


def _yinyang_targets(labels, f1, f0, n=3):
    trg = np.full((len(labels), n), float(f0))
    trg[np.arange(len(labels)), labels] = f1
    return trg


def encode_yinyang_sample(
    point: YinYangPoint,
    T: int = 1000,
    dt: float = 1e-3,
    f_min: float = 10.0,
    f_max: float = 100.0,
    f1: float = 20.0,
    f0: float = 2.0,
    seed=0,
) -> LabeledSample:
    """Map features (x, y, 1-x, 1-y) linearly onto [f_min, f_max] Hz."""
    if not f_min < f_max:
        raise StructuralError("need f_min < f_max")
    if not f0 < f1:
        raise StructuralError("need f0 < f1")
    label = int(point.cls)
    in_rates = _yinyang_rates(np.array([[point.x, point.y]]), f_min, f_max)[0]
    trg = _yinyang_targets(np.array([label]), f1, f0)[0]
    rng_seed = _entropy(seed)
    rng_seed = rng_seed if isinstance(rng_seed, list) else [rng_seed]
    return LabeledSample(
        input=poisson_encode(in_rates, T, dt, rng_seed + [0]),
        target=poisson_encode(trg, T, dt, rng_seed + [1]),
        label=label,
        input_rates=in_rates,
        target_rates=trg,
    )


def gen_yinyang_dataset(
    n_train: int = 5000,
    n_val: int = 1000,
    n_test: int = 1000,
    T: int = 1000,
    dt: float = 1e-3,
    seed: int = 0,
    f_min: float = 10.0,
    f_max: float = 100.0,
    f1: float = 20.0,
    f0: float = 2.0,
) -> tuple[SpikeDataset, SpikeDataset, SpikeDataset]:
    if not f_min < f_max or not f0 < f1:
        raise StructuralError("need f_min < f_max and f0 < f1")
    splits = []
    for split, count in ((TRAIN, n_train), (VAL, n_val), (TEST, n_test)):
        pts = gen_yinyang_points(count, (seed, split))
        xy = np.array([[p.x, p.y] for p in pts])
        labels = np.array([int(p.cls) for p in pts], dtype=np.int64)
        in_rates = _yinyang_rates(xy, f_min, f_max)
        trg = _yinyang_targets(labels, f1, f0)
        splits.append(
            SpikeDataset(
                inputs=poisson_encode_many(in_rates, T, dt, (seed, split, 0)),
                targets=poisson_encode_many(trg, T, dt, (seed, split, 1)),
                labels=labels,
                input_rates=in_rates,
                target_rates=trg,
                dt=dt,
                seed=seed,
                split=split,
                coords=xy,
                meta={"task": "yinyang", "n_classes": 3, "f1": f1, "f0": f0,
                      "f_min": f_min, "f_max": f_max},
            )
        )
    return tuple(splits)


def stack_samples(samples: Sequence[LabeledSample]) -> SpikeDataset:
    """Collect individually encoded samples into one dataset."""
    if not samples:
        raise StructuralError("no samples")
    return SpikeDataset(
        inputs=np.stack([s.input.data for s in samples]).astype(np.uint8),
        targets=np.stack([s.target.data for s in samples]).astype(np.uint8),
        labels=np.array([s.label for s in samples], dtype=np.int64),
        input_rates=np.stack([s.input_rates for s in samples]),
        target_rates=np.stack([s.target_rates for s in samples]),
        dt=samples[0].input.dt,
    )
