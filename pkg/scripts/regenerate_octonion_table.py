#!/usr/bin/env python3
"""Rebuild the octonion basis multiplication table and diff it against the
golden copy shipped with the package.

The table is derived from the doubling construction, so this is a consistency
check, not an independent source of truth.  Pass --write to refresh the golden
file in the source tree after an intentional basis-convention change.
"""
import argparse
import json
from pathlib import Path

from divalg.algebra import load_octonion_table, multiplication_table

GOLDEN = Path(__file__).resolve().parent.parent / "src" / "divalg" / "_octonion_table.json"


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--write", action="store_true", help="overwrite the golden file")
    args = parser.parse_args()

    rebuilt = multiplication_table(8)
    if args.write:
        GOLDEN.write_text(json.dumps(rebuilt) + "\n")
        print(f"wrote {GOLDEN}")
        return 0

    golden = load_octonion_table()
    if rebuilt == golden:
        print("octonion table matches the golden copy (64 basis products)")
        return 0
    diffs = [
        (i, j, golden[i][j], rebuilt[i][j])
        for i in range(8)
        for j in range(8)
        if golden[i][j] != rebuilt[i][j]
    ]
    print(f"octonion table DIFFERS in {len(diffs)} entries:")
    for i, j, want, got in diffs[:10]:
        print(f"  e{i}*e{j}: golden {want}, rebuilt {got}")
    return 1


if __name__ == "__main__":
    raise SystemExit(main())
