#!/usr/bin/env python3
"""Convert univariate equal-length .ts files (sktime/aeon format) to UCR TSV.

Usage: ts_to_ucr_tsv.py INPUT.ts OUTPUT.tsv
"""
import sys


def convert(src, dst):
    rows = []
    in_data = False
    with open(src) as f:
        for line in f:
            line = line.strip()
            if not line or line.startswith(("#", "%")):
                continue
            if line.lower().startswith("@data"):
                in_data = True
                continue
            if line.startswith("@"):
                continue
            if not in_data:
                in_data = True
            values, label = line.rsplit(":", 1)
            rows.append([label] + values.split(","))
    with open(dst, "w") as f:
        for r in rows:
            f.write("\t".join(r) + "\n")
    return len(rows)


if __name__ == "__main__":
    if len(sys.argv) != 3:
        sys.exit(__doc__)
    print(convert(sys.argv[1], sys.argv[2]))
