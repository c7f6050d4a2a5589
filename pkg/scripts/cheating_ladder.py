"""Per-qubit and dual-unveil rates for the standard cheating strategies.

    python scripts/cheating_ladder.py --n 20 --trials 100000 --out ladder.csv
"""

import argparse
import sys

from relbc.adversary import AttackStrategy, estimate_success, per_qubit_success, simulate_qubits
from relbc.protocol import ProtocolConfig
from relbc.qubits import Basis
from relbc.tables import fmt6, to_csv

import numpy as np

STRATEGIES = [
    AttackStrategy.blind_guess(),
    AttackStrategy.fixed_basis(Basis.Z),
    AttackStrategy.projective_angle(22.5),
    AttackStrategy.projective_angle(45),
    AttackStrategy.breidbart_pair(),
]


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=20)
    ap.add_argument("--trials", type=int, default=100_000)
    ap.add_argument("--seed", type=int, default=1)
    ap.add_argument("--jobs", type=int, default=1)
    ap.add_argument("--out", help="CSV path (stdout if omitted)")
    args = ap.parse_args(argv)

    # strict game: zero noise, perfect detection, exact same-basis consistency
    config = ProtocolConfig(n=args.n, e=0.0, eta=1.0, tau_accept=0.0)
    rows = []
    for s in STRATEGIES:
        per_qubit = simulate_qubits(s, args.trials, np.random.default_rng(args.seed)).mean()
        rep = estimate_success(s, config, args.trials, seed=args.seed, jobs=args.jobs)
        lo, hi = rep.wilson
        # same attack against the default (threshold) verifier
        loose = estimate_success(s, ProtocolConfig(n=args.n), args.trials, seed=args.seed, jobs=args.jobs)
        rows.append((s.label, per_qubit_success(s), per_qubit, args.n, rep.success_rate, lo, hi,
                     per_qubit_success(s) ** args.n, loose.threshold_rate))
        print(f"{s.label:<28} per-qubit {fmt6(per_qubit):<10} dual {fmt6(rep.success_rate):<10}"
              f" [{fmt6(lo)}, {fmt6(hi)}]", file=sys.stderr)
    text = to_csv(["strategy", "per_qubit_analytic", "per_qubit_mc", "N", "dual_mc", "lo", "hi",
                   "dual_analytic", "threshold_rate_default_verifier"], rows)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


if __name__ == "__main__":
    main()
