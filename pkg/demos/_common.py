"""Shared helpers for the demo scripts."""

from __future__ import annotations

import sys
from pathlib import Path

from photon_limits.cli import main

ROOT = Path(__file__).resolve().parent.parent
CONFIGS = ROOT / "configs"
OUT = Path(__file__).resolve().parent / "out"


def run(*argv: str) -> None:
    """Echo and run one CLI invocation, exiting on failure."""
    OUT.mkdir(exist_ok=True)
    print("$ photon-limits " + " ".join(argv), flush=True)
    code = main(list(argv))
    if code:
        sys.exit(code)
