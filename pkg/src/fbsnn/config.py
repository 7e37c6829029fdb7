"""Experiment configuration: task presets, INI files and overrides.

A config file is INI with the sections ``experiment``, ``simulation``,
``training``, ``dataset`` and ``hardware``. Keys not listed in
:data:`SCHEMA` are rejected with their line number. Values not given fall
back to the preset of the chosen task and mode.
"""

from __future__ import annotations

import configparser
import copy
import json
from dataclasses import dataclass, field
from pathlib import Path

from .dynamics import SimulationParams
from .errors import ConfigurationError
from .training import TrainConfig

__all__ = ["SCHEMA", "ExperimentConfig", "preset", "load_config", "parse_seed_list", "FAST"]

_float = float
_int = int


def _bool(s):
    if isinstance(s, bool):
        return s
    v = str(s).strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {s!r}")


def _opt_float(s):
    if s is None or str(s).strip().lower() in ("", "none"):
        return None
    return float(s)


def _opt_int(s):
    if s is None or str(s).strip().lower() in ("", "none"):
        return None
    return int(s)


def _float_list(s):
    if isinstance(s, (list, tuple)):
        return [float(x) for x in s]
    return [float(x) for x in str(s).replace(",", " ").split()]


def _int_list(s):
    if isinstance(s, (list, tuple)):
        return [int(x) for x in s]
    return [int(x) for x in str(s).replace(",", " ").split()]


def _choice(*options):
    def parse(s):
        s = str(s).strip()
        if s not in options:
            raise ValueError(f"expected one of {options}, got {s!r}")
        return s

    return parse


def parse_seed_list(text) -> list[int]:
    """``"0,1,2"``, ``"0-4"`` or a mix such as ``"0-2,7"``."""
    if isinstance(text, (list, tuple)):
        return [int(x) for x in text]
    seeds = []
    for part in str(text).replace(" ", "").split(","):
        if not part:
            continue
        if "-" in part[1:]:
            lo, hi = part.split("-", 1) if not part.startswith("-") else part[1:].split("-", 1)
            seeds.extend(range(int(lo), int(hi) + 1))
        else:
            seeds.append(int(part))
    if not seeds:
        raise ConfigurationError("empty seed list")
    return seeds


SCHEMA = {
    "experiment": {
        "task": _choice("binary", "yinyang"),
        "mode": _choice("offline", "online"),
        "seeds": parse_seed_list,
        "out_dir": str,
        "workers": _int,
        "figures": _bool,
    },
    "simulation": {
        "dt": _float,
        "tau_m": _float,
        "tau_c": _float,
        "tau_u": _float,
        "v_th": _float,
        "u_th": _float,
        "v_floor": _opt_float,
    },
    "training": {
        "epochs": _int,
        "batch_size": _int,
        "eta": _float,
        "T": _int,
        "immediate": _bool,
        "samples": _int,
        "window": _int,
        "redraw": _bool,
        "w_min": _opt_float,
        "w_max": _opt_float,
        "n_val_eval": _opt_int,
    },
    "dataset": {
        "n_train": _int,
        "n_val": _int,
        "n_test": _int,
        "f_high": _float,
        "f_low": _float,
        "f_min": _float,
        "f_max": _float,
        "f1": _float,
        "f0": _float,
        "high_target_class": _int,
    },
    "hardware": {
        "cv_list": _float_list,
        "p_list": _int_list,
        "p": _int,
        "cv": _float,
    },
}

# Output-layer and controller constants per task. The binary values keep
# tight closed-loop tracking; Yin-Yang uses a higher controller threshold and
# a slower membrane, which lowers the feedback noise at its 2-20 Hz targets.
SIM_PRESETS = {
    "binary": dict(dt=1e-3, tau_m=20e-3, tau_c=50e-3, tau_u=5e-3, v_th=50.0, u_th=2.0, v_floor=None),
    "yinyang": dict(dt=1e-3, tau_m=100e-3, tau_c=50e-3, tau_u=3e-3, v_th=50.0, u_th=5.0, v_floor=None),
}

TRAIN_PRESETS = {
    ("binary", "offline"): dict(epochs=30, batch_size=50, eta=1e-5, T=5000),
    ("binary", "online"): dict(epochs=1, batch_size=1, eta=1e-9, T=4000, samples=2500, window=25),
    ("yinyang", "offline"): dict(epochs=100, batch_size=50, eta=1e-4, T=1000),
    ("yinyang", "online"): dict(epochs=1, batch_size=1, eta=5e-9, T=1000, samples=10000, window=50),
}

SEED_PRESETS = {"binary": list(range(5)), "yinyang": list(range(15))}

FAST = {
    "experiment": {"seeds": [0, 1, 2]},
    "training": {"epochs": 20, "T": 500, "samples": 500, "n_val_eval": 200},
    "dataset": {"n_train": 600, "n_val": 200, "n_test": 200},
}

DATASET_DEFAULTS = dict(
    n_train=5000, n_val=1000, n_test=1000, f_high=100.0, f_low=50.0,
    f_min=10.0, f_max=100.0, f1=None, f0=None, high_target_class=0,
)


def preset(task: str = "binary", mode: str = "offline") -> dict:
    """Fully resolved defaults for a task/mode pair, as nested dicts."""
    if task not in SIM_PRESETS:
        raise ConfigurationError(f"unknown task {task!r}")
    if mode not in ("offline", "online"):
        raise ConfigurationError(f"unknown mode {mode!r}")
    tr = dict(
        epochs=30, batch_size=50, eta=1e-5, T=5000, immediate=False, samples=2500,
        window=25, redraw=False, w_min=None, w_max=None, n_val_eval=None,
    )
    tr.update(TRAIN_PRESETS[(task, mode)])
    ds = dict(DATASET_DEFAULTS)
    ds["f1"], ds["f0"] = (100.0, 20.0) if task == "binary" else (20.0, 2.0)
    seeds = SEED_PRESETS[task] if mode == "offline" else list(range(15))
    return {
        "experiment": dict(task=task, mode=mode, seeds=list(seeds), out_dir="runs", workers=1, figures=False),
        "simulation": dict(SIM_PRESETS[task]),
        "training": tr,
        "dataset": ds,
        "hardware": dict(cv_list=[0.0, 0.05, 0.10, 0.20], p_list=[1, 2], p=1, cv=0.0),
    }


# where and how a run executes, but not what it computes
_RUN_ONLY = ("out_dir", "workers", "figures")


@dataclass
class ExperimentConfig:
    values: dict = field(default_factory=preset)

    @property
    def task(self) -> str:
        return self.values["experiment"]["task"]

    @property
    def mode(self) -> str:
        return self.values["experiment"]["mode"]

    @property
    def seeds(self) -> list[int]:
        return list(self.values["experiment"]["seeds"])

    @property
    def out_dir(self) -> Path:
        return Path(self.values["experiment"]["out_dir"])

    @property
    def workers(self) -> int:
        return int(self.values["experiment"]["workers"])

    def section(self, name: str) -> dict:
        return self.values[name]

    def sim_params(self) -> SimulationParams:
        return SimulationParams(**self.values["simulation"])

    def train_config(self, seed: int) -> TrainConfig:
        t = dict(self.values["training"])
        lo, hi = t.pop("w_min"), t.pop("w_max")
        clip = None
        if lo is not None or hi is not None:
            clip = (float("-inf") if lo is None else lo, float("inf") if hi is None else hi)
        return TrainConfig(mode=self.mode, seed=seed, w_clip=clip, **t)

    def to_dict(self) -> dict:
        return copy.deepcopy(self.values)

    def record(self) -> dict:
        """Config as written into outputs; drops keys that cannot change results."""
        rec = copy.deepcopy(self.values)
        for key in _RUN_ONLY:
            rec["experiment"].pop(key, None)
        return rec

    def dumps(self) -> str:
        return json.dumps(self.record(), sort_keys=True)

    def override(self, section: str, **kv) -> "ExperimentConfig":
        new = copy.deepcopy(self.values)
        for k, v in kv.items():
            new[section][k] = _coerce(section, k, v)
        return ExperimentConfig(new)


def _coerce(section, key, raw, where=""):
    if section not in SCHEMA:
        raise ConfigurationError(f"{where}unknown section [{section}]")
    if key not in SCHEMA[section]:
        raise ConfigurationError(f"{where}unknown key {key!r} in [{section}]")
    try:
        return SCHEMA[section][key](raw)
    except (TypeError, ValueError) as e:
        raise ConfigurationError(f"{where}bad value for {section}.{key}: {e}") from None


def _line_of(text: str, section: str, key: str) -> int:
    current = None
    for no, line in enumerate(text.splitlines(), 1):
        s = line.strip()
        if s.startswith("[") and s.endswith("]"):
            current = s[1:-1].strip()
        elif current == section and s.split("=", 1)[0].split(":", 1)[0].strip() == key:
            return no
    return 0


def load_config(path=None, *, text: str | None = None, fast: bool = False, overrides: dict | None = None,
                task: str | None = None, mode: str | None = None) -> ExperimentConfig:
    """Resolve a config from presets, an optional INI file, ``--fast`` and overrides.

    Precedence, lowest first: task/mode preset, fast profile, file, overrides.
    ``task`` and ``mode`` arguments win over the file when given.
    """
    if path is not None:
        text = Path(path).read_text(encoding="utf-8")
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str
    if text:
        try:
            parser.read_string(text, source=str(path or "<config>"))
        except configparser.Error as e:
            raise ConfigurationError(f"cannot parse config: {e}") from None
    src = str(path or "<config>")
    raw = {}
    for sec in parser.sections():
        if sec not in SCHEMA:
            raise ConfigurationError(f"{src}: unknown section [{sec}]")
        for key, val in parser.items(sec):
            where = f"{src}:{_line_of(text, sec, key)}: "
            raw.setdefault(sec, {})[key] = _coerce(sec, key, val, where)

    exp = raw.get("experiment", {})
    task = task or exp.get("task", "binary")
    mode = mode or exp.get("mode", "offline")
    values = preset(task, mode)
    if fast:
        for sec, kv in FAST.items():
            values[sec].update(copy.deepcopy(kv))
        if task == "binary" and mode == "offline":
            values["training"]["epochs"] = 5
            values["training"]["T"] = 2000
    for sec, kv in raw.items():
        values[sec].update(kv)
    values["experiment"]["task"], values["experiment"]["mode"] = task, mode
    for sec, kv in (overrides or {}).items():
        for k, v in kv.items():
            if v is not None:
                values[sec][k] = _coerce(sec, k, v)
    cfg = ExperimentConfig(values)
    cfg.sim_params()  # validate early
    cfg.train_config(0)
    return cfg
