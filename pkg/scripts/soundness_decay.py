"""Dual-unveil success of the 45 degree attack against N, with both analytic bounds.

    python scripts/soundness_decay.py --n-values 5,10,20,40,80 --trials 100000
"""

import argparse
import sys

from relbc.adversary import BREIDBART_RATE, AttackStrategy, estimate_success
from relbc.analysis import soundness_curve
from relbc.protocol import ProtocolConfig
from relbc.tables import to_csv


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n-values", default="5,10,20,40,80")
    ap.add_argument("--trials", type=int, default=100_000)
    ap.add_argument("--seed", type=int, default=2)
    ap.add_argument("--jobs", type=int, default=1)
    ap.add_argument("--out")
    args = ap.parse_args(argv)

    rows = []
    strategy = AttackStrategy.projective_angle(45)
    for bound in soundness_curve([int(v) for v in args.n_values.split(",")], BREIDBART_RATE):
        config = ProtocolConfig(n=bound.n, e=0.0, eta=1.0, tau_accept=0.0)
        rep = estimate_success(strategy, config, args.trials, seed=args.seed + bound.n, jobs=args.jobs)
        lo, hi = rep.wilson
        rows.append((bound.n, rep.trials, rep.success_rate, lo, hi, bound.per_transmitted, bound.per_relevant,
                     int(lo <= bound.per_transmitted <= hi)))
    text = to_csv(["N", "trials", "dual_mc", "lo", "hi", "per_transmitted_bound", "per_relevant_bound",
                   "bound_in_interval"], rows)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


if __name__ == "__main__":
    main()
