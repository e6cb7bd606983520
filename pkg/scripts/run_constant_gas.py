#!/usr/bin/env python3
"""Constant-gas-price experiment: solve, export surfaces and plot scripts.

Reproduces the single-commodity setup where the gas price is frozen at
3.5 and electricity follows a mean-reverting diffusion with rare large
upward spikes.  Writes CSV surfaces, metadata and plot scripts to
out/constant_gas (override with --out), then Monte-Carlo evaluates the
exported policy from a cold start.
"""

import argparse
import sys
from importlib import resources
from pathlib import Path

from gasplant.cli import main as cli_main


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="out/constant_gas")
    ap.add_argument("--skip-simulate", action="store_true")
    args = ap.parse_args()

    cfg = resources.files("gasplant.configs").joinpath("thompson_constgas.toml")
    with resources.as_file(cfg) as path:
        rc = cli_main(["--config", str(path), "--out", args.out, "--emit-plots"])
        if rc != 0:
            return rc
        if not args.skip_simulate:
            rc = cli_main(["--config", str(path), "--mode", "simulate", "--out", args.out])
    print(f"artifacts in {Path(args.out).resolve()}")
    return rc


if __name__ == "__main__":
    sys.exit(main())
