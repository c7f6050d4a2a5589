"""Honest acceptance: simulated rate next to the exact prediction over a noise grid.

    python scripts/completeness_table.py --n 200 --runs 500
"""

import argparse
import math
import sys

import numpy as np

from relbc.analysis import completeness_failure, plan_thresholds, InfeasiblePlan
from relbc.protocol import ProtocolConfig, bob_verify, run_honest
from relbc.tables import to_csv


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=200)
    ap.add_argument("--runs", type=int, default=500)
    ap.add_argument("--e-values", default="0,0.02,0.05,0.08,0.1")
    ap.add_argument("--eta", type=float, default=1.0)
    ap.add_argument("--tau-accept", type=float, default=0.15)
    ap.add_argument("--rho-reject", type=float, default=0.3)
    ap.add_argument("--target", type=float, default=0.99, help="completeness target for the planned thresholds")
    ap.add_argument("--seed", type=int, default=3)
    ap.add_argument("--out")
    args = ap.parse_args(argv)

    rows = []
    for e in (float(v) for v in args.e_values.split(",")):
        config = ProtocolConfig(n=args.n, e=e, eta=args.eta, tau_accept=args.tau_accept, rho_reject=args.rho_reject)
        seeds = np.random.SeedSequence([args.seed, int(e * 1e6)]).spawn(args.runs)
        fails = sum(not bob_verify(run_honest(config, i % 2, s)).accepted for i, s in enumerate(seeds))
        exact = completeness_failure(args.n, e, args.eta, args.tau_accept, args.rho_reject,
                                     config.min_same_basis_count).failure
        z = (fails / args.runs - exact) / math.sqrt(max(exact * (1 - exact), 1e-300) / args.runs)
        try:
            planned = plan_thresholds(args.n, e, args.eta, args.target).tau_accept
        except InfeasiblePlan:
            planned = math.nan
        rows.append((e, args.runs, fails / args.runs, exact, z, planned))
    text = to_csv(["e", "runs", "failure_mc", "failure_exact", "z_score", "planned_tau_accept"], rows)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


if __name__ == "__main__":
    main()
