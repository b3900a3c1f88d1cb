"""Run both design cases end to end and print expected against observed values.

    python3 scripts/reproduce_table2.py [--cycles 5000] [--out DIR]
"""

import argparse
from pathlib import Path

from cyclecert.cli import validate_tables


def main():
    ap = argparse.ArgumentParser(description=__doc__.split("\n")[0])
    ap.add_argument("--cycles", type=int, default=5000)
    ap.add_argument("--out", type=Path, default=None)
    args = ap.parse_args()

    rows = validate_tables(args.cycles)
    keys = list(rows[0])
    lines = [",".join(keys)] + [",".join(str(r[k]) for k in keys) for r in rows]
    text = "\n".join(lines) + "\n"
    print(text, end="")
    if args.out:
        args.out.mkdir(parents=True, exist_ok=True)
        (args.out / "table2.csv").write_text(text)


if __name__ == "__main__":
    main()
