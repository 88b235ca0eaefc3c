"""Compare per-iteration advantage std of VRPO, MAPPO and IPPO on a game; writes a CSV."""

import argparse
import csv

import numpy as np

from vrpo.cli import ExperimentConfig, variance_report


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--game", default="kuhn")
    ap.add_argument("--iterations", type=int, default=500)
    ap.add_argument("--seeds", default="0,1,2,3,4")
    ap.add_argument("--out", default="runs/variance")
    ap.add_argument("--skip", type=int, default=50, help="iterations excluded from the summary")
    args = ap.parse_args()
    cfg = ExperimentConfig(game=args.game, out=args.out,
                           seeds=tuple(int(s) for s in args.seeds.split(",")))
    path = variance_report(cfg, args.iterations)
    with open(path) as fh:
        rows = list(csv.DictReader(fh))
    cols = [c for c in rows[0] if c.startswith("adv_std_") and "_p" not in c[8:]] if rows else []
    for seed in cfg.seeds:
        sel = [r for r in rows if int(r["seed"]) == seed and int(r["iteration"]) >= args.skip]
        means = {c[8:]: np.mean([float(r[c]) for r in sel]) for c in cols}
        print(f"seed {seed}: " + "  ".join(f"{k}={v:.4f}" for k, v in means.items()))
    print(f"wrote {path}")


if __name__ == "__main__":
    main()
