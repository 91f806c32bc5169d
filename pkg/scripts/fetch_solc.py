#!/usr/bin/env python3
"""Seed the Solidity toolchain cache for offline runs.

    python3 scripts/fetch_solc.py 0.4.26 [0.8.21 ...] [--cache DIR]

Fetches each requested release from the solc-js registry (npm) into the
version cache used by patchlab. Respects PATCHLAB_SOLC_CACHE.
"""

import argparse
import os
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from patchlab.compiler import SolcCache  # noqa: E402
from patchlab.errors import ToolchainMissing  # noqa: E402


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("versions", nargs="+", help="exact solc releases, e.g. 0.4.26")
    parser.add_argument("--cache", default=os.environ.get(
        "PATCHLAB_SOLC_CACHE",
        Path(__file__).resolve().parent.parent / ".solc-cache"))
    args = parser.parse_args()
    cache = SolcCache(args.cache)
    status = 0
    for version in args.versions:
        try:
            path = cache.ensure(version, allow_network=True)
            print(f"{version}: ready at {path}")
        except ToolchainMissing as error:
            print(f"{version}: FAILED ({error})", file=sys.stderr)
            status = 1
    return status


if __name__ == "__main__":
    sys.exit(main())
