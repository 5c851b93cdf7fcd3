#!/usr/bin/env python3
"""Run the whole verification grid and write one JSON report.

Thin wrapper over ``divalg verify-all``; any flags given here are passed
through unchanged.  With no arguments it runs the full-depth preset:

    python3 scripts/run_verification_suite.py
    python3 scripts/run_verification_suite.py --preset desk --seed 42 --jobs 8 --out report.json
"""
import sys

from divalg.cli import main

if __name__ == "__main__":
    argv = sys.argv[1:] or ["--preset", "full", "--seed", "0"]
    sys.exit(main(["verify-all", *argv]))
