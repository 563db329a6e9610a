"""Build the staged cover of [b1, b0] and report how much each refinement leaves uncovered.

Without --A0/--A1/--sigma the window comes from the fixed-point pipeline,
which takes a few seconds once the tuned maps are cached.
"""
import argparse
import csv
import sys
from pathlib import Path

from henonlab.cli import load_config, run


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default="runs/cover")
    ap.add_argument("--A0", type=float)
    ap.add_argument("--A1", type=float)
    ap.add_argument("--sigma", type=float)
    ap.add_argument("--stages", type=int, default=2)
    ap.add_argument("--refinements", type=int, default=8)
    args = ap.parse_args()
    sets = [f"cover.stages={args.stages}", f"cover.refinements={args.refinements}"]
    sets += [f"cover.{k}={v}" for k, v in (("A0", args.A0), ("A1", args.A1), ("sigma", args.sigma))
             if v is not None]
    cfg = load_config(None, sets, out=args.out)
    code, checks = run("cover", cfg)
    with (Path(cfg.output_dir) / "cover_ledger.csv").open() as fh:
        for row in csv.DictReader(fh):
            share = float(row["uncovered"]) / (float(row["T_hi"]) - float(row["T_lo"]))
            print(f"stage {row['stage']} refinement {row['refinement']:>2}  m={row['m']:>3}  "
                  f"uncovered {share:.4f}  bound {float(row['bound']) / (float(row['T_hi']) - float(row['T_lo'])):.4f}")
    for name, ok in checks.items():
        print(f"{'ok' if ok else 'FAIL':4}  {name}")
    return code


if __name__ == "__main__":
    sys.exit(main())
