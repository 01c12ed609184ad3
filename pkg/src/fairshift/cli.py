"""Command-line entry point.

    fairshift generate  --config C --out DIR
    fairshift train     --config C --data DIR --out DIR
    fairshift sweep     --config C --data DIR --out DIR
    fairshift evaluate  --config C --data DIR --checkpoint CK [CK ...] [--oracle] --out DIR
    fairshift stability --config C --data DIR --checkpoint CK [CK ...] --out DIR
    fairshift report    --reports R [R ...] --out DIR

``--config`` also accepts a run manifest, in which case the recorded config,
inputs and seed are reused. Exit codes: 0 ok, 1 validation error, 2 runtime/data error.
"""

from __future__ import annotations

import argparse
import csv
import datetime as _dt
import json
import logging
import sys
import warnings
from pathlib import Path

from . import __version__
from . import config as C
from . import metrics as M
from .domain import Dataset, JointSpec
from .experiments import default_family, make_bundle, slice_mmds, train_validation
from .kernelmmd import SliceSkipped
from .modelselect import select, write_sweep_csv
from .predictor import load_checkpoint, save_checkpoint
from .synthgen import InsufficientCell, SynthConfig, oracle_fstar
from .train import TrainingDiverged, fit

log = logging.getLogger("fairshift")

MANIFEST = "manifest.json"
STABILITY_COLUMNS = ("model", "split", "statistic", "y_slice", "value")


class UsageError(ValueError):
    pass


def _fmt(x) -> str:
    return repr(float(x))


def write_manifest(out: Path, command: str, cfg: dict, inputs: dict, outputs: list) -> None:
    payload = {
        "manifest_version": 1,
        "command": command,
        "config": cfg,
        "inputs": inputs,
        "outputs": sorted(outputs),
        "seed": cfg["seed"],
        "tool_version": __version__,
        "timestamp": _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds"),
    }
    with open(out / MANIFEST, "w") as fh:
        json.dump(payload, fh, indent=1, sort_keys=True)


def _manifest_inputs(path):
    if path is None:
        return {}
    try:
        d = json.loads(Path(path).read_text())
    except (json.JSONDecodeError, UnicodeDecodeError):
        return {}
    return d.get("inputs", {}) if isinstance(d, dict) and "manifest_version" in d else {}


def _write_json(path: Path, obj) -> None:
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=1, sort_keys=True)


def _load_data(data_dir: Path, name: str) -> Dataset:
    path = data_dir / f"{name}.csv"
    if not path.exists():
        raise FileNotFoundError(f"missing dataset {path}")
    return Dataset.from_csv(path)


def _load_synth(data_dir: Path):
    side = json.loads((data_dir / "train.json").read_text())
    return SynthConfig.from_dict(side["synth"]), JointSpec(**side["spec"])


# -- commands -----------------------------------------------------------------

def cmd_generate(cfg: dict, args) -> list:
    out = args.out
    b = make_bundle(cfg)
    written = []
    for name, data, spec in (("train", b.train, b.source), ("test", b.test, b.source),
                             ("pool", b.pool, JointSpec(**cfg["data"]["pool"]))):
        data.to_csv(out / f"{name}.csv")
        _write_json(out / f"{name}.json", {
            "synth": b.synth.to_dict(), "spec": {"p_y1": spec.p_y1, "mu": spec.mu}, "n": len(data),
        })
        written += [f"{name}.csv", f"{name}.json"]
    return written


def _train_val(cfg: dict, data_dir: Path):
    return train_validation(cfg, _load_data(data_dir, "train"))


def cmd_train(cfg: dict, args) -> list:
    train, _ = _train_val(cfg, args.data)
    tc = C.train_config(cfg)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", SliceSkipped)
        model, tlog = fit(train, tc)
    save_checkpoint(args.out / "checkpoint.json", model, tc.to_dict())
    tlog.to_jsonl(args.out / "trainlog.jsonl")
    return ["checkpoint.json", "trainlog.jsonl"]


def cmd_sweep(cfg: dict, args) -> list:
    grid = C.sweep_grid(cfg)
    if not grid:
        raise UsageError("sweep grid is empty")
    train, val = _train_val(cfg, args.data)
    written = []
    by_obj = {}
    for tc in grid:
        by_obj.setdefault(tc.objective, []).append(tc)
    rows = []
    for obj, sub in by_obj.items():
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            best, points = select(sub, train, val, k=cfg["sweep"]["folds"])
        rows += points
        name = f"selected_{obj}.json"
        save_checkpoint(args.out / name, best.model, best.cfg.to_dict())
        written.append(name)
    write_sweep_csv(rows, args.out / "sweep.csv")
    return written + ["sweep.csv"]


def model_name(ck: Path) -> str:
    """File stem, or the run directory name for a bare ``checkpoint.json``."""
    ck = Path(ck)
    return ck.parent.name if ck.stem == "checkpoint" and ck.parent.name else ck.stem


def _scorers(cfg: dict, args):
    models = []
    for ck in args.checkpoint or ():
        p, _ = load_checkpoint(ck)
        models.append((model_name(ck), p))
    names = [n for n, _ in models]
    if len(set(names)) != len(names):
        raise UsageError(f"checkpoints share a name: {names}")
    if args.oracle:
        sc, spec = _load_synth(args.data)
        models.append(("oracle", lambda x, sc=sc, spec=spec: oracle_fstar(sc, spec, x)))
    if not models:
        raise UsageError("give --checkpoint and/or --oracle")
    return models


def cmd_evaluate(cfg: dict, args) -> list:
    pool, test = _load_data(args.data, "pool"), _load_data(args.data, "test")
    ev = cfg["evaluate"]
    family = default_family(cfg)
    written, rows = [], []
    for name, model in _scorers(cfg, args):
        rep = M.evaluate(model, pool, test, family, ev["n_per"], cfg["seed"], B=ev["bootstrap"], name=name)
        rep.to_json(args.out / f"report_{name}.json")
        written.append(f"report_{name}.json")
        rows += rep.plot_rows()
    cols = ["model", "mu", "risk", "auroc", "auroc_boot_mean", "auroc_boot_std", "n"]
    with open(args.out / "plot.csv", "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=cols)
        w.writeheader()
        for r in rows:
            w.writerow({k: (_fmt(v) if isinstance(v, float) else v) for k, v in r.items()})
    return written + ["plot.csv"]


def cmd_stability(cfg: dict, args) -> list:
    train, val = _train_val(cfg, args.data)
    test = _load_data(args.data, "test")
    splits = {"train": train, "validation": val, "test": test}
    rows = []
    for ck in args.checkpoint or ():
        model, tc = load_checkpoint(ck)
        gamma = (tc or {}).get("kernel", {}).get("bandwidth_gamma", cfg["train"]["gamma"])
        for sname, data in splits.items():
            for (stat, ys), val_ in slice_mmds(model, data, gamma).items():
                rows.append((model_name(ck), sname, stat, ys, val_))
    if not rows:
        raise UsageError("give at least one --checkpoint")
    with open(args.out / "stability.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(STABILITY_COLUMNS)
        for r in rows:
            w.writerow([r[0], r[1], r[2], r[3], _fmt(r[4])])
    return ["stability.csv"]


def cmd_report(cfg: dict, args) -> list:
    if not args.reports:
        raise UsageError("give at least one --reports file")
    rows = []
    for path in args.reports:
        d = json.loads(Path(path).read_text())
        boot = d.get("bootstrap", {})
        rows.append({
            "model": d["name"],
            "robustness_range": d["robustness_range"],
            "robustness_range_std": boot.get("robustness_range", {}).get("std"),
            "eo_violation": d["eo_violation"],
            "eo_violation_std": boot.get("eo_violation", {}).get("std"),
            "dp_violation": d["dp_violation"],
            "dp_violation_std": boot.get("dp_violation", {}).get("std"),
        })
    with open(args.out / "summary.csv", "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=list(rows[0]))
        w.writeheader()
        for r in rows:
            w.writerow({k: (_fmt(v) if isinstance(v, float) else v) for k, v in r.items()})
    return ["summary.csv"]


COMMANDS = {
    "generate": cmd_generate, "train": cmd_train, "sweep": cmd_sweep,
    "evaluate": cmd_evaluate, "stability": cmd_stability, "report": cmd_report,
}
NEEDS_DATA = {"train", "sweep", "evaluate", "stability"}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="fairshift", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", type=Path, help="YAML config or a run manifest")
        p.add_argument("--out", type=Path, required=True)
        p.add_argument("--seed", type=int)
        p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE")
        if name in NEEDS_DATA:
            p.add_argument("--data", type=Path)
        if name in ("evaluate", "stability"):
            p.add_argument("--checkpoint", nargs="+", type=Path)
        if name == "evaluate":
            p.add_argument("--oracle", action="store_true", help="also evaluate the closed-form E[Y|X*]")
        if name == "report":
            p.add_argument("--reports", nargs="+", type=Path)
        p.add_argument("-v", "--verbose", action="store_true")
    return ap


def _fill_from_manifest(args) -> None:
    rec = _manifest_inputs(args.config)
    for key in ("data", "checkpoint", "reports"):
        if hasattr(args, key) and getattr(args, key) in (None, []) and rec.get(key) is not None:
            val = rec[key]
            setattr(args, key, [Path(v) for v in val] if isinstance(val, list) else Path(val))
    if hasattr(args, "oracle") and not args.oracle:
        args.oracle = bool(rec.get("oracle", False))


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        _fill_from_manifest(args)
        sets = list(args.set)
        if args.seed is not None:
            sets.append(f"seed={args.seed}")
        cfg = C.load(args.config, sets)
        if args.command in NEEDS_DATA and args.data is None:
            raise UsageError("--data is required")
        args.out.mkdir(parents=True, exist_ok=True)
        outputs = COMMANDS[args.command](cfg, args)
    except (C.ConfigError, UsageError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    except (InsufficientCell, TrainingDiverged, FileNotFoundError, M.MissingCell, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    inputs = {}
    for key in ("data", "checkpoint", "reports"):
        val = getattr(args, key, None)
        if val is not None:
            inputs[key] = [str(v) for v in val] if isinstance(val, list) else str(val)
    if getattr(args, "oracle", False):
        inputs["oracle"] = True
    write_manifest(args.out, args.command, cfg, inputs, outputs)
    log.info("wrote %s", ", ".join(outputs))
    return 0


if __name__ == "__main__":
    sys.exit(main())
