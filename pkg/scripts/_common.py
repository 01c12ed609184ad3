"""Argument handling shared by the replication scripts."""

import argparse
import csv
from pathlib import Path

from fairshift import config as C


def parser(desc: str, seeds: int = 10) -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(description=desc)
    ap.add_argument("--config", type=Path, help="YAML config (defaults built in)")
    ap.add_argument("--set", action="append", default=[], metavar="KEY=VALUE")
    ap.add_argument("--seeds", type=int, default=seeds, help="seeds 0..N-1")
    ap.add_argument("--out", type=Path, required=True, help="CSV to write")
    return ap


def load(args) -> dict:
    return C.load(args.config, args.set)


def write_rows(path: Path, rows: list) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=list(rows[0]))
        w.writeheader()
        w.writerows(rows)
    print(f"wrote {len(rows)} rows to {path}")
