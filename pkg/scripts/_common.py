"""Shared helpers for the experiment scripts."""

import csv
import sys
from pathlib import Path

from efnet.cli import load_config, run

ROOT = Path(__file__).resolve().parents[1]


def run_config(name: str, overrides=()) -> Path:
    """Run ``configs/<name>.ini`` (paths relative to the repository root)."""
    cfg = load_config(ROOT / "configs" / f"{name}.ini", overrides)
    if not cfg.output.is_absolute():
        cfg = load_config(ROOT / "configs" / f"{name}.ini",
                          [*overrides, f"experiment.output={ROOT / cfg.output}"])
    code = run(cfg)
    if code:
        print(f"run ended with exit code {code}", file=sys.stderr)
    return cfg.output


def read_rows(path: Path) -> list[dict]:
    with open(path, encoding="utf-8") as fh:
        return list(csv.DictReader(ln for ln in fh if not ln.startswith("#")))
