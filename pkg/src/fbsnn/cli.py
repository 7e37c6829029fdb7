"""Command-line experiment runner.

Subcommands: ``gen-dataset``, ``train``, ``sweep-mismatch`` and ``eval``.
Every output file carries the resolved config and seed; nothing depends on
wall-clock time, so reruns with the same config are byte-identical.
"""

from __future__ import annotations

import argparse
import hashlib
import logging
import sys
import traceback
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import io
from .config import ExperimentConfig, load_config
from .dynamics import WeightSet
from .encoding import SpikeDataset, gen_binary_dataset, gen_yinyang_dataset
from .errors import FBSNNError
from .hardware import MismatchSpec, apply_mismatch, mismatch_to_json
from .network import Network
from .training import evaluate, init_weights, train_offline, train_online

log = logging.getLogger("fbsnn")

SPLITS = ("train", "val", "test")
METRIC_COLUMNS = ["seed", "index", "train_loss", "val_loss", "target_error", "accuracy"]


# -- shared pieces ------------------------------------------------------------


def make_datasets(cfg: ExperimentConfig, seed: int) -> tuple[SpikeDataset, ...]:
    d = cfg.section("dataset")
    T = cfg.section("training")["T"]
    dt = cfg.section("simulation")["dt"]
    common = dict(n_train=d["n_train"], n_val=d["n_val"], n_test=d["n_test"], T=T, dt=dt, seed=seed)
    if cfg.task == "binary":
        return gen_binary_dataset(
            **common, f_high=d["f_high"], f_low=d["f_low"], f1=d["f1"], f0=d["f0"],
            high_target_class=d["high_target_class"],
        )
    return gen_yinyang_dataset(**common, f_min=d["f_min"], f_max=d["f_max"], f1=d["f1"], f0=d["f0"])


def _load_or_make(cfg: ExperimentConfig, seed: int, data_dir) -> tuple[SpikeDataset, ...]:
    if data_dir is None:
        return make_datasets(cfg, seed)
    return tuple(io.load_dataset(Path(data_dir) / f"{cfg.task}_seed{seed}_{s}.fbsd") for s in SPLITS)


def _mismatch_seed(seed: int, cv: float, p: int) -> int:
    ss = np.random.SeedSequence([seed, p, int(round(cv * 1e6)), 0x6D6D])
    return int(ss.generate_state(1)[0])


def _weights_digest(w: np.ndarray) -> str:
    return hashlib.sha256(np.ascontiguousarray(w, dtype=np.float64).tobytes()).hexdigest()[:16]


def _comment(cfg: ExperimentConfig, **extra) -> str:
    lines = [f"config: {cfg.dumps()}"]
    lines += [f"{k}: {v}" for k, v in extra.items()]
    return "\n".join(lines)


def run_seed(values: dict, seed: int, cv: float = 0.0, p: int = 1, data_dir=None) -> dict:
    """Train and test one seed; returns plain data so it can cross processes."""
    cfg = ExperimentConfig(values)
    params = cfg.sim_params()
    tcfg = cfg.train_config(seed)
    train, val, test = _load_or_make(cfg, seed, data_dir)
    init = init_weights(cfg.task, train.n, train.m, seed)
    q = None
    if cv > 0:
        q = apply_mismatch(params, (train.n, p), MismatchSpec(cv=cv, seed=_mismatch_seed(seed, cv, p)))
    net = Network(init, params, p=p, neuron_params=q)
    if cfg.mode == "offline":
        w, rows = train_offline((train, val), tcfg, params, init, network=net)
    else:
        w, rows = train_online(train, tcfg, params, init, val=val, network=net)
    ev = evaluate(net.with_weights(w), test)
    return {
        "seed": seed,
        "cv": cv,
        "p": p,
        "rows": [r.as_dict() for r in rows],
        "w": w.w.tolist(),
        "weights_hash": _weights_digest(w.w),
        "init_hash": _weights_digest(init.w),
        "test": {"accuracy": ev.accuracy, "loss": ev.loss, "target_error": ev.target_error},
        "final_val": rows[-1].as_dict(),
        "mismatch": None if q is None else mismatch_to_json(q),
    }


def _safe_run(args):
    values, seed, cv, p, data_dir = args
    try:
        return {"ok": True, **run_seed(values, seed, cv, p, data_dir)}
    except (FBSNNError, ValueError, FloatingPointError, OSError) as e:
        return {"ok": False, "seed": seed, "cv": cv, "p": p, "error": f"{type(e).__name__}: {e}",
                "trace": traceback.format_exc()}


def _map(jobs, workers: int):
    if workers <= 1 or len(jobs) <= 1:
        return [_safe_run(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(_safe_run, jobs))


def _report_failures(results) -> int:
    failed = [r for r in results if not r["ok"]]
    for r in failed:
        print(f"seed {r['seed']} (cv={r['cv']}, p={r['p']}) failed: {r['error']}", file=sys.stderr)
    return 1 if failed else 0


def _stats(x) -> dict:
    x = np.asarray(x, dtype=float)
    if x.size == 0:
        return {"mean": None, "std": None, "median": None, "q25": None, "q75": None, "n": 0}
    return {
        "mean": float(x.mean()),
        "std": float(x.std(ddof=1)) if x.size > 1 else 0.0,
        "median": float(np.median(x)),
        "q25": float(np.percentile(x, 25)),
        "q75": float(np.percentile(x, 75)),
        "n": int(x.size),
    }


# -- subcommands --------------------------------------------------------------


def cmd_gen_dataset(cfg: ExperimentConfig) -> int:
    out = cfg.out_dir
    out.mkdir(parents=True, exist_ok=True)
    manifest = {"schema": io.SUMMARY_SCHEMA, "config": cfg.record(), "files": []}
    for seed in cfg.seeds:
        for split, ds in zip(SPLITS, make_datasets(cfg, seed)):
            name = f"{cfg.task}_seed{seed}_{split}.fbsd"
            io.save_dataset(ds, out / name, extra={"config": cfg.record()})
            manifest["files"].append({
                "file": name, "seed": seed, "split": split, "count": len(ds),
                "m": ds.m, "n": ds.n, "T": ds.T,
                "class_target_rates": ds.class_target_rates(),
            })
            log.info("wrote %s (%d samples)", name, len(ds))
    io.write_json(out / "manifest.json", manifest)
    return 0


def _write_seed_outputs(cfg: ExperimentConfig, res: dict, out: Path, stem: str) -> Path:
    rows = [{"seed": res["seed"], **r} for r in res["rows"]]
    columns = METRIC_COLUMNS + sorted(k for k in rows[0] if k.startswith("rate_"))
    path = out / f"{stem}.csv"
    io.write_metrics_csv(path, rows, columns, comment=_comment(cfg, seed=res["seed"]))
    io.save_weights(WeightSet(np.array(res["w"])), out / f"{stem}_weights.txt",
                    {**cfg.record(), "seed": res["seed"]})
    return path


def cmd_train(cfg: ExperimentConfig, data_dir=None) -> int:
    out = cfg.out_dir
    out.mkdir(parents=True, exist_ok=True)
    hw = cfg.section("hardware")
    jobs = [(cfg.to_dict(), s, hw["cv"], hw["p"], data_dir) for s in cfg.seeds]
    results = _map(jobs, cfg.workers)
    ok = [r for r in results if r["ok"]]
    csvs = []
    for r in ok:
        csvs.append(_write_seed_outputs(cfg, r, out, f"metrics_seed{r['seed']}"))
        if r["mismatch"]:
            (out / f"mismatch_seed{r['seed']}.json").write_text(r["mismatch"] + "\n", encoding="utf-8")

    # cross-seed aggregate per epoch/window
    agg_rows = []
    if ok:
        length = min(len(r["rows"]) for r in ok)
        for i in range(length):
            row = {"index": ok[0]["rows"][i]["index"]}
            for key in ("train_loss", "val_loss", "target_error", "accuracy"):
                vals = np.array([r["rows"][i][key] for r in ok], dtype=float)
                row[f"{key}_mean"] = float(np.mean(vals))
                row[f"{key}_std"] = float(np.std(vals))
            agg_rows.append(row)
        io.write_metrics_csv(out / "metrics_aggregate.csv", agg_rows, comment=_comment(cfg, seeds=cfg.seeds))

    eta = cfg.section("training")["eta"]
    summary = {
        "schema": io.SUMMARY_SCHEMA,
        "config": cfg.record(),
        "seeds": cfg.seeds,
        "failed_seeds": [r["seed"] for r in results if not r["ok"]],
        "per_seed": {
            str(r["seed"]): {
                "test": r["test"],
                "final_val_accuracy": r["final_val"]["accuracy"],
                "final_val_loss": r["final_val"]["val_loss"],
                "weights_hash": r["weights_hash"],
            }
            for r in ok
        },
        "aggregate": {
            "test_accuracy": _stats([r["test"]["accuracy"] for r in ok]),
            "test_loss": _stats([r["test"]["loss"] for r in ok]),
            "final_val_accuracy": _stats([r["final_val"]["accuracy"] for r in ok]),
        },
    }
    if eta == 0:
        summary["no_learning"] = all(r["weights_hash"] == r["init_hash"] for r in ok)
        summary["weights_checksum"] = {str(r["seed"]): r["weights_hash"] for r in ok}
    io.write_json(out / "summary.json", summary)
    if cfg.section("experiment")["figures"] and csvs:
        from .plotting import plot_training_curves

        plot_training_curves(csvs, out / "training_curves.png", title=f"{cfg.task} {cfg.mode}")
    agg = summary["aggregate"]["test_accuracy"]
    if agg["n"]:
        print(f"test accuracy {agg['mean']:.3f} +- {agg['std']:.3f} over {agg['n']} seeds")
    return _report_failures(results)


def cmd_sweep_mismatch(cfg: ExperimentConfig, data_dir=None) -> int:
    hw = cfg.section("hardware")
    if not hw["cv_list"] or not hw["p_list"]:
        print("cv_list and p_list must be non-empty", file=sys.stderr)
        return 2
    out = cfg.out_dir
    out.mkdir(parents=True, exist_ok=True)
    jobs = [
        (cfg.to_dict(), s, float(cv), int(p), data_dir)
        for cv in hw["cv_list"] for p in hw["p_list"] for s in cfg.seeds
    ]
    results = _map(jobs, cfg.workers)
    rows = []
    for r in results:
        row = {"cv": r["cv"], "p": r["p"], "seed": r["seed"]}
        if r["ok"]:
            row.update(accuracy=r["test"]["accuracy"], target_error=r["test"]["target_error"],
                       val_loss=r["final_val"]["val_loss"], status="ok")
        else:
            row.update(accuracy="", target_error="", val_loss="", status="failed")
        rows.append(row)
    cols = ["cv", "p", "seed", "accuracy", "target_error", "val_loss", "status"]
    io.write_metrics_csv(out / "mismatch_sweep.csv", rows, cols, comment=_comment(cfg))
    cells = {}
    for cv in hw["cv_list"]:
        for p in hw["p_list"]:
            acc = [r["test"]["accuracy"] for r in results
                   if r["ok"] and r["cv"] == float(cv) and r["p"] == int(p)]
            cells[f"cv={float(cv):g},p={int(p)}"] = _stats(acc)
    io.write_json(out / "mismatch_summary.json", {
        "schema": io.SUMMARY_SCHEMA, "config": cfg.record(), "cells": cells,
        "failed": [[r["cv"], r["p"], r["seed"]] for r in results if not r["ok"]],
    })
    if cfg.section("experiment")["figures"]:
        from .plotting import plot_mismatch_sweep

        plot_mismatch_sweep(out / "mismatch_sweep.csv", out / "mismatch_sweep.png")
    for k, v in cells.items():
        if v["n"]:
            print(f"{k}: median {v['median']:.3f} IQR [{v['q25']:.3f}, {v['q75']:.3f}]")
    return _report_failures(results)


def cmd_eval(cfg: ExperimentConfig, checkpoint, data_dir=None) -> int:
    weights, header = io.load_weights(checkpoint)
    seed = int(header["config"].get("seed", cfg.seeds[0]))
    _, _, test = _load_or_make(cfg, seed, data_dir)
    net = Network(weights, cfg.sim_params())
    ev = evaluate(net, test)
    doc = {
        "schema": io.SUMMARY_SCHEMA,
        "checkpoint": str(checkpoint),
        "config_hash": header["config_hash"],
        "seed": seed,
        "test": {"accuracy": ev.accuracy, "loss": ev.loss, "target_error": ev.target_error},
        "class_rates_hz": ev.class_rates,
    }
    out = cfg.out_dir
    out.mkdir(parents=True, exist_ok=True)
    io.write_json(out / f"eval_{Path(checkpoint).stem}.json", doc)
    print(f"test accuracy {ev.accuracy:.3f}, loss {ev.loss:.4f}")
    return 0


# -- argument parsing ---------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="INI config file")
    common.add_argument("--task", choices=["binary", "yinyang"])
    common.add_argument("--mode", choices=["offline", "online"])
    common.add_argument("--seed-list", help="seeds, e.g. 0-4 or 0,3,7")
    common.add_argument("--out-dir", type=Path)
    common.add_argument("--workers", type=int)
    common.add_argument("--fast", action="store_true", help="small desk-scale profile (not the reference tolerances)")
    common.add_argument("--data-dir", type=Path, help="read datasets written by gen-dataset")
    common.add_argument("--epochs", type=int)
    common.add_argument("--eta", type=float)
    common.add_argument("--T", type=int)
    common.add_argument("--figures", action="store_true", help="render PNG figures from the CSV outputs")
    common.add_argument("-v", "--verbose", action="store_true")

    ap = argparse.ArgumentParser(prog="fbsnn", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)
    sub.add_parser("gen-dataset", parents=[common], help="write spike dataset files")
    sub.add_parser("train", parents=[common], help="train over the seed list")
    sw = sub.add_parser("sweep-mismatch", parents=[common], help="factorial sweep over cv x p x seed")
    sw.add_argument("--cv-list")
    sw.add_argument("--p-list")
    ev = sub.add_parser("eval", parents=[common], help="evaluate a weight checkpoint on the test split")
    ev.add_argument("checkpoint", type=Path)
    return ap


def resolve_config(args) -> ExperimentConfig:
    overrides = {
        "experiment": {
            "seeds": args.seed_list,
            "out_dir": None if args.out_dir is None else str(args.out_dir),
            "workers": args.workers,
            "figures": True if args.figures else None,
        },
        "training": {"epochs": args.epochs, "eta": args.eta, "T": args.T},
        "hardware": {
            "cv_list": getattr(args, "cv_list", None),
            "p_list": getattr(args, "p_list", None),
        },
    }
    return load_config(args.config, fast=args.fast, overrides=overrides, task=args.task, mode=args.mode)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        cfg = resolve_config(args)
    except FBSNNError as e:
        print(f"config error: {e}", file=sys.stderr)
        return 2
    except ValueError as e:
        print(f"config error: {e}", file=sys.stderr)
        return 2
    if args.command == "gen-dataset":
        return cmd_gen_dataset(cfg)
    if args.command == "train":
        return cmd_train(cfg, args.data_dir)
    if args.command == "sweep-mismatch":
        return cmd_sweep_mismatch(cfg, args.data_dir)
    return cmd_eval(cfg, args.checkpoint, args.data_dir)


if __name__ == "__main__":
    sys.exit(main())
