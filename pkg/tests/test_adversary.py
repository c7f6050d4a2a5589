import csv
import io
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from relbc import sched
from relbc.adversary import (
    BREIDBART_RATE,
    CSV_COLUMNS,
    AttackReport,
    AttackStrategy,
    WingRule,
    WingStrategy,
    estimate_success,
    execute_attack,
    per_qubit_success,
    projective_rate,
    simulate_attacks,
    simulate_qubits,
    sweep_projective_angle,
    wilson_interval,
)
from relbc.protocol import ProtocolConfig, bob_verify, Verdict
from relbc.qubits import Basis

STRICT = dict(e=0.0, eta=1.0, tau_accept=0.0)


def born_success(theta):
    """Closed form for one projective angle: cos^2 of half the angle to the nearer axis."""
    return (1 + math.cos(math.radians(theta))) / 4 + (1 + math.cos(math.radians(90 - theta))) / 4


class TestAnalytic:
    def test_ladder(self):
        assert per_qubit_success(AttackStrategy.blind_guess()) == 0.5
        assert per_qubit_success(AttackStrategy.fixed_basis(Basis.Z)) == 0.75
        assert per_qubit_success(AttackStrategy.fixed_basis(Basis.X)) == 0.75
        assert projective_rate(45) == pytest.approx(0.8535533905932737, abs=1e-15)
        assert BREIDBART_RATE == pytest.approx(math.cos(math.pi / 8) ** 2, abs=1e-15)

    @given(st.floats(0, 90))
    def test_closed_form(self, theta):
        assert projective_rate(theta) == pytest.approx(born_success(theta), abs=1e-12)

    @given(st.floats(0, 90))
    def test_symmetric_about_45(self, theta):
        assert projective_rate(theta) == pytest.approx(projective_rate(90 - theta), abs=1e-12)

    def test_breidbart_pair_same_rate(self):
        assert per_qubit_success(AttackStrategy.breidbart_pair()) == pytest.approx(BREIDBART_RATE, abs=1e-12)

    @given(st.floats(0, 90))
    def test_no_angle_beats_45(self, theta):
        assert projective_rate(theta) <= projective_rate(45) + 1e-15


class TestStrategyValidation:
    def test_angle_range(self):
        for bad in (-1, 91, math.nan):
            with pytest.raises(ValueError):
                AttackStrategy.projective_angle(bad)

    def test_two_measurements_refused(self):
        with pytest.raises(ValueError):
            AttackStrategy.per_wing_pair(WingStrategy(WingRule.COPY, 0.0), WingStrategy(WingRule.COPY, 90.0))

    def test_copy_needs_angle(self):
        with pytest.raises(ValueError):
            WingStrategy(WingRule.COPY)

    def test_labels(self):
        assert AttackStrategy.blind_guess().label == "blindGuess"
        assert AttackStrategy.projective_angle(45).label == "projectiveAngle(45)"


class TestMonteCarlo:
    @pytest.mark.parametrize(
        "strategy",
        [AttackStrategy.blind_guess(), AttackStrategy.fixed_basis(Basis.Z), AttackStrategy.projective_angle(30),
         AttackStrategy.breidbart_pair()],
        ids=lambda s: s.label,
    )
    def test_per_qubit_matches_analytic(self, strategy):
        ok = simulate_qubits(strategy, 100_000, np.random.default_rng(3))
        assert abs(ok.mean() - per_qubit_success(strategy)) <= 0.005

    @pytest.mark.parametrize("n", [5, 10, 20])
    def test_dual_rate_inside_wilson(self, n):
        rep = estimate_success(AttackStrategy.projective_angle(45), ProtocolConfig(n=n, **STRICT), 40_000, seed=n)
        # 99.9% Wilson band so the three draws do not flake
        lo, hi = wilson_interval(rep.successes, rep.trials, 0.999)
        assert lo <= BREIDBART_RATE ** n <= hi

    def test_decays_with_n(self):
        rates = [estimate_success(AttackStrategy.projective_angle(45), ProtocolConfig(n=n, **STRICT), 20_000, seed=1)
                 .success_rate for n in (5, 10, 20, 40)]
        assert rates == sorted(rates, reverse=True)

    def test_dual_at_least_delta_hat(self):
        for s in (AttackStrategy.blind_guess(), AttackStrategy.fixed_basis("X"), AttackStrategy.projective_angle(45)):
            rep = estimate_success(s, ProtocolConfig(n=6, **STRICT), 20_000, seed=2)
            assert rep.success_rate >= rep.delta_hat - 1e-12

    def test_marginals_at_least_dual(self):
        rep = estimate_success(AttackStrategy.projective_angle(20), ProtocolConfig(n=4, **STRICT), 10_000, seed=4)
        assert min(rep.p0_hat, rep.p1_hat) >= rep.success_rate

    def test_jobs_do_not_change_result(self):
        c = ProtocolConfig(n=10, **STRICT)
        s = AttackStrategy.projective_angle(45)
        a = estimate_success(s, c, 5_000, seed=9, jobs=1, chunk=1000)
        b = estimate_success(s, c, 5_000, seed=9, jobs=2, chunk=1000)
        assert a.to_csv() == b.to_csv()

    def test_breidbart_pair_beats_threshold_defaults(self):
        # the conjugate check never fires on complementary declarations
        out = simulate_attacks(AttackStrategy.breidbart_pair(), ProtocolConfig(n=200), 2000, seed=0)
        assert (out.threshold0 & out.threshold1).mean() > 0.3
        out = simulate_attacks(AttackStrategy.projective_angle(45), ProtocolConfig(n=200), 2000, seed=0)
        assert (out.threshold0 & out.threshold1).mean() == 0.0


class TestSweep:
    def test_grid_maximizer(self):
        res = sweep_projective_angle(1.0, ProtocolConfig(n=20, **STRICT), 100_000, seed=5)
        assert len(res.points) == 91
        assert res.analytic_maximizer.theta == 45.0
        assert abs(res.mc_maximizer.theta - 45.0) <= 10
        for p in res.points:
            assert abs(p.per_qubit_mc - p.per_qubit_analytic) <= 0.006

    def test_bad_step(self):
        with pytest.raises(ValueError):
            sweep_projective_angle(7.0, ProtocolConfig(n=20), 100)


class TestExecuteAttack:
    def test_transcript_is_causal(self):
        out = execute_attack(AttackStrategy.projective_angle(45), ProtocolConfig(n=20, **STRICT), seed=1)
        assert sched.audit(out.transcript.messages) == []
        assert {u.claimed_bit for u in out.unveilings} == {0, 1}
        assert bob_verify(out.transcript).verdict is Verdict.REJECT_CHEAT  # wings disagree by design

    def test_rate_agrees_with_batch(self):
        c = ProtocolConfig(n=6, **STRICT)
        s = AttackStrategy.projective_angle(45)
        wins = sum(execute_attack(s, c, seed=i).success for i in range(3000))
        lo, hi = wilson_interval(wins, 3000, 0.999)
        assert lo <= BREIDBART_RATE ** 6 <= hi

    @settings(max_examples=25, deadline=None)
    @given(st.integers(0, 2**32), st.integers(0, 2**32), st.integers(0, 2**32))
    def test_wing0_blind_to_wing1(self, seed, w0, w1):
        s = AttackStrategy.per_wing_pair(WingStrategy(WingRule.RANDOM), WingStrategy(WingRule.RANDOM))
        c = ProtocolConfig(n=16)
        a = execute_attack(s, c, seed=seed, wing_seeds=(w0, w1))
        b = execute_attack(s, c, seed=seed, wing_seeds=(w0, w1 + 1))
        assert a.unveilings[0].payload == b.unveilings[0].payload

    def test_wing0_blind_to_wing1_rule(self):
        c = ProtocolConfig(n=32)
        copy, flip = WingStrategy(WingRule.COPY, 45.0), WingStrategy(WingRule.FLIP, 45.0)
        a = execute_attack(AttackStrategy.per_wing_pair(copy, copy), c, seed=3)
        b = execute_attack(AttackStrategy.per_wing_pair(copy, flip), c, seed=3)
        assert a.unveilings[0].payload == b.unveilings[0].payload
        assert a.unveilings[1].payload != b.unveilings[1].payload


class TestReport:
    def test_csv_row(self):
        rep = AttackReport(AttackStrategy.projective_angle(45), 20, 1000, 42, 200, 210)
        rows = list(csv.reader(io.StringIO(rep.to_csv())))
        assert rows[0] == CSV_COLUMNS
        row = dict(zip(rows[0], rows[1]))
        assert row["strategy"] == "projectiveAngle(45)" and row["theta"] == "45"
        assert row["rate"] == "0.042" and row["deltaHat"] == "-0.59"
        assert float(row["lo"]) < 0.042 < float(row["hi"])

    def test_wilson_against_formula(self):
        k, n, z = 42, 1000, 1.959963984540054
        p = k / n
        centre = (p + z * z / (2 * n)) / (1 + z * z / n)
        half = z * math.sqrt(p * (1 - p) / n + z * z / (4 * n * n)) / (1 + z * z / n)
        lo, hi = wilson_interval(k, n)
        assert lo == pytest.approx(centre - half, rel=1e-9)
        assert hi == pytest.approx(centre + half, rel=1e-9)

    def test_bad_counts(self):
        with pytest.raises(ValueError):
            AttackReport(AttackStrategy.blind_guess(), 4, 10, 11, 0, 0)
