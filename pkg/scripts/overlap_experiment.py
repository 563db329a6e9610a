"""Tune b into the overlap window for a schedule of (m, n) and test the detector.

Each pair is run at the log-midpoint of the window and at b^(2^m) shifted down
by a factor 10, which should take it out of the window.  Results land in
overlap.csv and distortion_decay.csv under --out.
"""
import argparse
import json
import sys

from henonlab.cli import load_config, run


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default="runs/overlap")
    ap.add_argument("--pairs", help='JSON list such as "[[1, 7], [2, 8]]"; default is the automatic schedule')
    ap.add_argument("--workers", type=int, default=1)
    args = ap.parse_args()
    sets = [f"workers={args.workers}"]
    if args.pairs:
        sets.append(f"overlap.schedule={json.dumps(json.loads(args.pairs))}")
    cfg = load_config(None, sets, out=args.out)
    code, checks = run("overlap", cfg)
    for name, ok in checks.items():
        print(f"{'ok' if ok else 'FAIL':4}  {name}")
    return code


if __name__ == "__main__":
    sys.exit(main())
