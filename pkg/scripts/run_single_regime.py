#!/usr/bin/env python3
"""Two-price single-regime valuation with copula-dependent spikes.

Solves the full (S_e, S_g, L) problem under the base parameter set with
skewed-Clayton-dependent jumps and exports value/control surfaces plus
plot scripts to out/single_regime (override with --out).

This is the expensive headline run; pass --coarse for a quick look on a
reduced lattice.
"""

import argparse
import sys
import tempfile
from importlib import resources
from pathlib import Path

from gasplant.cli import main as cli_main


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="out/single_regime")
    ap.add_argument("--coarse", action="store_true",
                    help="solve on a reduced lattice for a fast preview")
    args = ap.parse_args()

    text = resources.files("gasplant.configs").joinpath("single_regime.toml").read_text()
    if args.coarse:
        text = (text.replace("n_e = 60", "n_e = 24")
                    .replace("n_g = 40", "n_g = 16")
                    .replace("n_l = 29", "n_l = 15"))
    with tempfile.NamedTemporaryFile("w", suffix=".toml", delete=False) as f:
        f.write(text)
        path = f.name
    rc = cli_main(["--config", path, "--out", args.out, "--emit-plots"])
    Path(path).unlink(missing_ok=True)
    if rc == 0:
        print(f"artifacts in {Path(args.out).resolve()}")
    return rc


if __name__ == "__main__":
    sys.exit(main())
