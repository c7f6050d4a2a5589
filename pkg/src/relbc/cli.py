"""Command-line front end.

    relbc honest   --n 100 --bit 0 --seed 7
    relbc attack   --strategy projective --theta 45 --n 20 --trials 100000
    relbc sweep    --step 1 --trials 100000
    relbc geometry --x 1 --offset-q0 0.01,0.02
    relbc plan     --n 1000 --e 0.05 --target 0.99

Exit codes: 0 success, 2 configuration error, 3 causality violation.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import analysis
from .adversary import (
    BREIDBART_RATE,
    AttackStrategy,
    WingRule,
    WingStrategy,
    estimate_success,
    sweep_projective_angle,
)
from .protocol import ConfigError, ProtocolConfig, bob_verify, run_honest
from .sched import CausalityViolation
from .spacetime import (
    GeometryError,
    LabOffset,
    earliest_joint_future_time,
    latest_binding_time,
    offset_geometry,
)
from .tables import fmt6, to_csv

DEFAULT_SEED = 0xB1C0FFEE
DEFAULT_N = 100

EXIT_OK, EXIT_CONFIG, EXIT_CAUSALITY = 0, 2, 3

_INT_FIELDS = {"n", "min_same_basis_count"}


class UsageError(ValueError):
    """Bad command-line value; reported like a config error."""


def _parse_offset(text: str) -> LabOffset:
    try:
        parts = [float(v) for v in text.split(",")]
    except ValueError:
        raise UsageError(f"offset {text!r}: expected comma-separated numbers") from None
    if len(parts) == 2:
        return LabOffset(dx=parts[0], delay=parts[1])
    if len(parts) == 4:
        return LabOffset(*parts)
    raise UsageError(f"offset {text!r}: expected 'dx,delay' or 'dx,dy,dz,delay'")


def _parse_triple(text: str) -> tuple[float, float, float]:
    parts = [float(v) for v in text.split(",")]
    if len(parts) == 1:
        return (parts[0], 0.0, 0.0)
    if len(parts) != 3:
        raise UsageError(f"position {text!r}: expected 'x' or 'x,y,z'")
    return tuple(parts)


def _config_parent() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--config", type=Path, help="flat JSON object of protocol config fields")
    for name in ProtocolConfig.field_names():
        p.add_argument("--" + name.replace("_", "-"), dest="cfg_" + name, default=None,
                       type=int if name in _INT_FIELDS else float, metavar=name.upper())
    p.add_argument("--seed", type=lambda s: int(s, 0), default=DEFAULT_SEED,
                   help=f"64-bit seed (default {DEFAULT_SEED:#x})")
    p.add_argument("--entropy", action="store_true", help="seed from OS randomness instead")
    p.add_argument("--output", type=Path, help="CSV output path")
    for lab in ("p", "q0", "q1"):
        p.add_argument(f"--offset-{lab}", type=_parse_offset, default=None, metavar="DX,DELAY",
                       help=f"displacement and delay of Bob's {lab.upper()} lab")
    return p


def build_parser() -> argparse.ArgumentParser:
    parent = _config_parent()
    parser = argparse.ArgumentParser(prog="relbc", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    h = sub.add_parser("honest", parents=[parent], help="honest commit-and-unveil runs")
    h.add_argument("--bit", type=int, choices=(0, 1), default=0)
    h.add_argument("--runs", type=int, default=1)
    h.add_argument("--transcript", type=Path, help="write the (first) run's transcript log here")

    a = sub.add_parser("attack", parents=[parent], help="Monte Carlo cheating-Alice estimate")
    a.add_argument("--strategy", choices=("blind", "fixed", "projective", "pair", "breidbart-pair"),
                   default="projective")
    a.add_argument("--basis", choices=("Z", "X"), default="Z")
    a.add_argument("--theta", type=float, default=45.0)
    a.add_argument("--rule0", choices=[r.value for r in WingRule], default="copy")
    a.add_argument("--rule1", choices=[r.value for r in WingRule], default="copy")
    a.add_argument("--trials", type=int, default=100_000)
    a.add_argument("--jobs", type=int, default=1)

    s = sub.add_parser("sweep", parents=[parent], help="projective-angle sweep or soundness table")
    s.add_argument("--what", choices=("angle", "soundness"), default="angle")
    s.add_argument("--step", type=float, default=1.0)
    s.add_argument("--trials", type=int, default=100_000, help="qubits per grid point")
    s.add_argument("--n-values", default="5,10,20,40,80,160")
    s.add_argument("--rate", type=float, default=BREIDBART_RATE)
    s.add_argument("--jobs", type=int, default=1)

    g = sub.add_parser("geometry", parents=[parent], help="layout, lab anchors and binding time")
    g.add_argument("--worldline", type=_parse_triple, default=(0.0, 0.0, 0.0))

    pl = sub.add_parser("plan", parents=[parent], help="choose verifier thresholds")
    pl.add_argument("--target", type=float, default=0.99)
    return parser


def load_config(args) -> ProtocolConfig:
    data: dict = {}
    if args.config is not None:
        try:
            data = json.loads(Path(args.config).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError("config", f"cannot read {args.config}: {exc}") from None
        if not isinstance(data, dict):
            raise ConfigError("config", "must be a flat JSON object")
        for key, value in data.items():
            if isinstance(value, (dict, list, bool)) or value is None:
                raise ConfigError(key, f"bad value {value!r}")
    for name in ProtocolConfig.field_names():
        value = getattr(args, "cfg_" + name)
        if value is not None:
            data[name] = value
    data.setdefault("n", DEFAULT_N)
    return ProtocolConfig.from_mapping(data)


def _seed(args, out) -> Optional[int]:
    if args.entropy:
        seed = int(np.random.SeedSequence().entropy)
        print(f"seed (from entropy): {seed}", file=out)
        return seed
    return args.seed


def _geometry(args, config: ProtocolConfig):
    offsets = {lab: getattr(args, f"offset_{lab}") for lab in ("p", "q0", "q1")
               if getattr(args, f"offset_{lab}") is not None}
    return offset_geometry(config.x, offsets)


def _write(path: Optional[Path], text: str, append: bool = False) -> None:
    if path is None:
        return
    if append and path.exists() and path.stat().st_size:
        text = "".join(text.splitlines(keepends=True)[1:])
        with path.open("a", encoding="utf-8") as fh:
            fh.write(text)
    else:
        path.write_text(text, encoding="utf-8")


def _fmt_event(ev) -> str:
    return "(" + ", ".join(fmt6(v) for v in ev.as_tuple()) + ")"


def cmd_honest(args, out) -> int:
    config = load_config(args)
    geometry = _geometry(args, config)
    seed = _seed(args, out)
    seeds = [seed] if args.runs == 1 else np.random.SeedSequence(seed).spawn(args.runs)
    rows = []
    accepted = 0
    for i, s in enumerate(seeds):
        t = run_honest(config, args.bit, s, geometry)
        if i == 0 and args.transcript is not None:
            args.transcript.write_text(t.to_log(), encoding="utf-8")
        r = bob_verify(t)
        accepted += r.accepted
        rows.append((i, args.bit, r.verdict_text(), r.mismatch_same, r.mismatch_conj, r.same_count, r.conj_count))
        if args.runs == 1:
            print(f"{'verdict':<16}{r.verdict_text()}", file=out)
            print(f"{'mismatchSame':<16}{r.mismatch_same:.3f}", file=out)
            print(f"{'mismatchConj':<16}{r.mismatch_conj:.3f}", file=out)
            print(f"{'sameCount':<16}{r.same_count}", file=out)
            print(f"{'conjCount':<16}{r.conj_count}", file=out)
            print(f"{'timingOk':<16}{r.timing_ok}", file=out)
            print(f"{'compareAt':<16}{_fmt_event(r.comparison_event)}", file=out)
            for reason in r.reasons:
                print(f"{'note':<16}{reason}", file=out)
    if args.runs > 1:
        print(f"{'runs':<16}{args.runs}", file=out)
        print(f"{'accepted':<16}{accepted}", file=out)
        print(f"{'rate':<16}{accepted / args.runs:.4f}", file=out)
    _write(args.output, to_csv(["run", "bit", "verdict", "mismatch_same", "mismatch_conj", "same_count",
                                "conj_count"], rows))
    return EXIT_OK


def _strategy(args) -> AttackStrategy:
    if args.strategy == "blind":
        return AttackStrategy.blind_guess()
    if args.strategy == "fixed":
        return AttackStrategy.fixed_basis(args.basis)
    if args.strategy == "projective":
        return AttackStrategy.projective_angle(args.theta)
    if args.strategy == "breidbart-pair":
        return AttackStrategy.breidbart_pair()
    rules = [WingRule(args.rule0), WingRule(args.rule1)]
    return AttackStrategy.per_wing_pair(
        *(WingStrategy(r, None if r is WingRule.RANDOM else args.theta) for r in rules)
    )


def cmd_attack(args, out) -> int:
    config = load_config(args)
    try:
        strategy = _strategy(args)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    if args.trials < 1:
        raise UsageError("--trials must be positive")
    report = estimate_success(strategy, config, args.trials, _seed(args, out), jobs=args.jobs)
    lo, hi = report.wilson
    for key, value in (
        ("strategy", strategy.label),
        ("N", config.n),
        ("trials", report.trials),
        ("successes", report.successes),
        ("rate", fmt6(report.success_rate)),
        ("wilson95", f"[{fmt6(lo)}, {fmt6(hi)}]"),
        ("p0Hat", fmt6(report.p0_hat)),
        ("p1Hat", fmt6(report.p1_hat)),
        ("deltaHat", fmt6(report.delta_hat)),
        ("thresholdRate", fmt6(report.threshold_rate)),
    ):
        print(f"{key:<16}{value}", file=out)
    _write(args.output, report.to_csv(), append=True)
    return EXIT_OK


def cmd_sweep(args, out) -> int:
    config = load_config(args)
    if args.what == "soundness":
        try:
            ns = [int(v) for v in args.n_values.split(",") if v]
            rows = analysis.soundness_curve(ns, args.rate)
        except ValueError as exc:
            raise UsageError(str(exc)) from None
        text = analysis.soundness_csv(rows, args.rate)
        print(text, end="", file=out)
        _write(args.output, text)
        return EXIT_OK
    try:
        result = sweep_projective_angle(args.step, config, args.trials, _seed(args, out))
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    best, mc_best = result.analytic_maximizer, result.mc_maximizer
    print(f"{'maximizer':<16}{fmt6(best.theta)} deg", file=out)
    print(f"{'perQubit':<16}{fmt6(best.per_qubit_analytic)} (MC {fmt6(best.per_qubit_mc)})", file=out)
    print(f"{'dualUnveil':<16}{fmt6(best.dual_analytic)} at N={config.n} (MC {fmt6(best.dual_mc)})", file=out)
    print(f"{'mcArgmax':<16}{fmt6(mc_best.theta)} deg", file=out)
    _write(args.output, result.to_csv())
    return EXIT_OK


def cmd_geometry(args, out) -> int:
    config = load_config(args)
    g = _geometry(args, config)
    for name in ("p", "q0", "q1", "bob_p", "bob_q0", "bob_q1"):
        print(f"{name:<16}{_fmt_event(getattr(g, name))}", file=out)
    t_bind = latest_binding_time(g.bob_q0, g.bob_q1, args.worldline)
    t_cmp = earliest_joint_future_time([g.bob_q0, g.bob_q1], args.worldline)
    print(f"{'worldline':<16}({', '.join(fmt6(v) for v in args.worldline)})", file=out)
    print(f"{'latestBinding':<16}{fmt6(t_bind)}", file=out)
    print(f"{'earliestCompare':<16}{fmt6(t_cmp)}", file=out)
    _write(args.output, to_csv(["event", "x", "y", "z", "t"],
                               [(name, *getattr(g, name).as_tuple())
                                for name in ("p", "q0", "q1", "bob_p", "bob_q0", "bob_q1")]))
    return EXIT_OK


def cmd_plan(args, out) -> int:
    config = load_config(args)
    try:
        plan = analysis.plan_thresholds(config.n, config.e, config.eta, args.target, config.min_same_basis_count)
    except analysis.InfeasiblePlan as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    for key in ("tau_accept", "rho_reject", "completeness_failure_prob", "strict_soundness_bound",
                "threshold_soundness_estimate"):
        print(f"{key:<30}{getattr(plan, key):.6g}", file=out)
    _write(args.output, plan.to_csv())
    return EXIT_OK


COMMANDS = {"honest": cmd_honest, "attack": cmd_attack, "sweep": cmd_sweep, "geometry": cmd_geometry,
            "plan": cmd_plan}


def main(argv: Optional[Sequence[str]] = None, out=None) -> int:
    out = out or sys.stdout
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return COMMANDS[args.command](args, out)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (GeometryError, UsageError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except CausalityViolation as exc:
        print(f"causality violation: {exc}", file=sys.stderr)
        return EXIT_CAUSALITY


if __name__ == "__main__":
    sys.exit(main())
