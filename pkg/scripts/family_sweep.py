"""Sweep the thickness b over a grid and record the average Jacobian of each tuned map."""
import argparse
import sys

from henonlab.cli import load_config, run


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="runs/family")
    ap.add_argument("--shape", default="y", help="thickening profile, e.g. y or y(1+x/10)")
    ap.add_argument("--b", type=float, nargs="+", default=[0.01, 0.05, 0.1])
    ap.add_argument("--depth", type=int, default=4)
    args = ap.parse_args()
    cfg = load_config(None, [f"family.shape={args.shape}", f"family.b_grid={args.b}",
                             f"family.depth={args.depth}"], out=args.out)
    code, checks = run("family-sweep", cfg)
    for name, ok in checks.items():
        print(f"{'ok' if ok else 'FAIL':4}  {name}")
    print(f"rows in {cfg.output_dir}/family_sweep.csv")
    return code


if __name__ == "__main__":
    sys.exit(main())
