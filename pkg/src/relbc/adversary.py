"""Cheating-Alice strategies and the harness that measures their success.

A cheating Alice tries to unveil 0 at Q0 *and* 1 at Q1. Every strategy here
makes at most one projective measurement per qubit at P and sends the same
measurement record towards both wings. Each wing then applies its own
classical declaration rule using only that record and private randomness;
nothing else is available at Q_i in time.

Wing 0 is checked on Z-prepared qubits and wing 1 on X-prepared ones, so a
qubit prepared in basis B is "relevant" to wing B only.
"""

from __future__ import annotations

import csv
import enum
import io
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.stats import binomtest

from . import sched
from .channels import (
    Message,
    MessageKind,
    OneTimePad,
    bits_to_str,
    decode_outcomes,
    encode_outcomes,
    otp_decrypt,
    otp_encrypt,
)
from .protocol import (
    BobLab,
    ProtocolConfig,
    Transcript,
    Unveiling,
    _anchor,
    _emit,
    bob_prepare,
    check_geometry,
    make_pads,
    spawn_rngs,
    reception_on_time,
    wing_statistics,
)
from .qubits import Basis, QubitRegister, bloch_angles, measure_angles, outcome_zero_probability, sample_detection
from .sched import Role
from .tables import fmt6 as _fmt, to_csv
from .spacetime import Geometry, causally_precedes, light_arrival, standard_geometry

BREIDBART_ANGLE = 45.0
# (1 + cos 45deg) / 2: best single-angle projective per-qubit rate
BREIDBART_RATE = (1.0 + math.cos(math.radians(45.0))) / 2.0


class WingRule(str, enum.Enum):
    COPY = "copy"
    FLIP = "flip"
    RANDOM = "random"


@dataclass(frozen=True)
class WingStrategy:
    """Declaration rule for one wing.

    ``angle`` is the measurement (degrees) this rule needs performed at P, or
    None if it uses no measurement data.
    """

    rule: WingRule = WingRule.COPY
    angle: Optional[float] = None

    def __post_init__(self):
        object.__setattr__(self, "rule", WingRule(self.rule))
        if self.rule is not WingRule.RANDOM and self.angle is None:
            raise ValueError(f"rule {self.rule.value} needs a measurement angle")
        if self.angle is not None and not math.isfinite(self.angle):
            raise ValueError("measurement angle must be finite")

    def declare(self, outcomes: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        outcomes = np.asarray(outcomes, dtype=np.uint8)
        if self.rule is WingRule.COPY:
            return outcomes.copy()
        if self.rule is WingRule.FLIP:
            return outcomes ^ 1
        return rng.integers(0, 2, size=outcomes.shape, dtype=np.uint8)


@dataclass(frozen=True)
class AttackStrategy:
    kind: str
    wings: tuple[WingStrategy, WingStrategy]
    theta: Optional[float] = None
    basis: Optional[Basis] = None

    def __post_init__(self):
        angles = {w.angle for w in self.wings if w.angle is not None}
        if len(angles) > 1:
            raise ValueError(f"strategy needs measurements at {sorted(angles)} on the same qubit; only one is possible")

    @classmethod
    def blind_guess(cls) -> "AttackStrategy":
        w = WingStrategy(WingRule.RANDOM)
        return cls("blindGuess", (w, w))

    @classmethod
    def fixed_basis(cls, basis: Basis | str) -> "AttackStrategy":
        basis = Basis[basis] if isinstance(basis, str) else Basis(basis)
        w = WingStrategy(WingRule.COPY, basis.angle)
        return cls("fixedBasis", (w, w), theta=basis.angle, basis=basis)

    @classmethod
    def projective_angle(cls, theta: float) -> "AttackStrategy":
        if not 0.0 <= theta <= 90.0:
            raise ValueError(f"projective angle must lie in [0, 90] degrees, got {theta}")
        w = WingStrategy(WingRule.COPY, float(theta))
        return cls("projectiveAngle", (w, w), theta=float(theta))

    @classmethod
    def per_wing_pair(cls, s0: WingStrategy, s1: WingStrategy) -> "AttackStrategy":
        angle = s0.angle if s0.angle is not None else s1.angle
        return cls("perWingPair", (s0, s1), theta=angle)

    @classmethod
    def breidbart_pair(cls) -> "AttackStrategy":
        """Measure once at -45 deg; wing 0 copies the record, wing 1 flips it.

        Same per-qubit rate as projectiveAngle(45) in the strict game, but the
        declarations look conjugate-inconsistent on each wing, so it also
        survives the verifier's other-hypothesis test.
        """
        return cls.per_wing_pair(WingStrategy(WingRule.COPY, -45.0), WingStrategy(WingRule.FLIP, -45.0))

    @property
    def measurement_angle(self) -> Optional[float]:
        for w in self.wings:
            if w.angle is not None:
                return w.angle
        return None

    @property
    def label(self) -> str:
        if self.kind == "fixedBasis":
            return f"fixedBasis({self.basis.name})"
        if self.kind == "projectiveAngle":
            return f"projectiveAngle({_fmt(self.theta)})"
        if self.kind == "perWingPair":
            return f"perWingPair({self.wings[0].rule.value},{self.wings[1].rule.value})"
        return self.kind


def per_qubit_success(strategy: AttackStrategy) -> float:
    """Exact probability that the relevant wing declares a qubit correctly.

    Averages over the four BB84 states; a state of basis B is checked on
    wing B.
    """
    total = 0.0
    for angle in (0.0, 90.0, 180.0, 270.0):
        basis, bit = int(angle // 90) % 2, int(angle // 180)
        wing = strategy.wings[basis]
        if wing.rule is WingRule.RANDOM:
            total += 0.5
            continue
        p0 = float(outcome_zero_probability(angle, strategy.measurement_angle))
        right = p0 if bit == 0 else 1.0 - p0
        total += right if wing.rule is WingRule.COPY else 1.0 - right
    return total / 4.0


def projective_rate(theta: float) -> float:
    return per_qubit_success(AttackStrategy.projective_angle(theta))


# ---------------------------------------------------------------------------
# vectorised Monte Carlo


@dataclass
class BatchOutcome:
    strict0: np.ndarray
    strict1: np.ndarray
    threshold0: np.ndarray
    threshold1: np.ndarray


def _declare_batch(strategy: AttackStrategy, bases, bits, detected, rngs) -> tuple[np.ndarray, np.ndarray]:
    rng_p, rng0, rng1 = rngs
    angle = strategy.measurement_angle
    if angle is None:
        record = np.zeros(bases.shape, dtype=np.uint8)
    else:
        record = measure_angles(bloch_angles(bases, bits), angle, rng_p)
        record &= detected.astype(np.uint8)
    return strategy.wings[0].declare(record, rng0), strategy.wings[1].declare(record, rng1)


def simulate_attacks(strategy: AttackStrategy, config: ProtocolConfig, trials: int, seed) -> BatchOutcome:
    """``trials`` independent full attacks, vectorised over a (trials, N) grid."""
    rng_q, rng_p, rng0, rng1 = spawn_rngs(seed, 4)
    codes = rng_q.integers(0, 4, size=(trials, config.n))
    bases, bits = (codes & 1).astype(np.uint8), (codes >> 1).astype(np.uint8)
    detected = sample_detection(trials * config.n, config.eta, rng_q).reshape(trials, config.n)
    d0, d1 = _declare_batch(strategy, bases, bits, detected, (rng_p, rng0, rng1))
    s0 = wing_statistics(bases, bits, detected, d0, 0)
    s1 = wing_statistics(bases, bits, detected, d1, 1)
    return BatchOutcome(s0.passes(config, strict=True), s1.passes(config, strict=True),
                        s0.passes(config), s1.passes(config))


def simulate_qubits(strategy: AttackStrategy, m: int, rng: np.random.Generator) -> np.ndarray:
    """Per-qubit relevant-declaration successes for ``m`` independent qubits."""
    codes = rng.integers(0, 4, size=m)
    bases, bits = (codes & 1).astype(np.uint8), (codes >> 1).astype(np.uint8)
    detected = np.ones(m, dtype=bool)
    d0, d1 = _declare_batch(strategy, bases, bits, detected, (rng, rng, rng))
    relevant = np.where(bases == 0, d0, d1)
    return relevant == bits


# ---------------------------------------------------------------------------
# reports


def wilson_interval(successes: int, trials: int, confidence: float = 0.95) -> tuple[float, float]:
    ci = binomtest(int(successes), int(trials)).proportion_ci(confidence, method="wilson")
    return float(ci.low), float(ci.high)


CSV_COLUMNS = ["strategy", "theta", "N", "trials", "successes", "rate", "lo", "hi", "p0Hat", "p1Hat", "deltaHat"]




@dataclass
class AttackReport:
    strategy: AttackStrategy
    n: int
    trials: int
    successes: int
    p0_successes: int
    p1_successes: int
    threshold_successes: int = 0
    wilson: tuple[float, float] = field(init=False)

    def __post_init__(self):
        if not 0 <= self.successes <= self.trials:
            raise ValueError("successes must lie in [0, trials]")
        self.wilson = wilson_interval(self.successes, self.trials)

    @property
    def success_rate(self) -> float:
        return self.successes / self.trials

    @property
    def p0_hat(self) -> float:
        return self.p0_successes / self.trials

    @property
    def p1_hat(self) -> float:
        return self.p1_successes / self.trials

    @property
    def delta_hat(self) -> float:
        return self.p0_hat + self.p1_hat - 1.0

    @property
    def threshold_rate(self) -> float:
        return self.threshold_successes / self.trials

    def csv_row(self) -> list[str]:
        lo, hi = self.wilson
        return [self.strategy.label, _fmt(self.strategy.theta), str(self.n), str(self.trials), str(self.successes),
                _fmt(self.success_rate), _fmt(lo), _fmt(hi), _fmt(self.p0_hat), _fmt(self.p1_hat),
                _fmt(self.delta_hat)]

    def to_csv(self, header: bool = True) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        if header:
            w.writerow(CSV_COLUMNS)
        w.writerow(self.csv_row())
        return buf.getvalue()


def _chunk_counts(args) -> tuple[int, int, int, int]:
    strategy, config, trials, seed = args
    out = simulate_attacks(strategy, config, trials, seed)
    return (int(np.sum(out.strict0 & out.strict1)), int(out.strict0.sum()), int(out.strict1.sum()),
            int(np.sum(out.threshold0 & out.threshold1)))


def estimate_success(
    strategy: AttackStrategy,
    config: ProtocolConfig,
    trials: int,
    seed=None,
    jobs: int = 1,
    chunk: int = 20_000,
) -> AttackReport:
    """Monte Carlo dual-unveiling rate with per-wing marginals.

    Trials are split into fixed-size chunks with spawned seeds, so the result
    depends only on (strategy, config, trials, seed), never on ``jobs``.
    """
    if trials < 1:
        raise ValueError("need at least one trial")
    chunk = max(1, min(chunk, max(1, 2_000_000 // config.n)))
    sizes = [chunk] * (trials // chunk) + ([trials % chunk] if trials % chunk else [])
    seeds = np.random.SeedSequence(seed).spawn(len(sizes))
    work = [(strategy, config, size, s) for size, s in zip(sizes, seeds)]
    if jobs > 1 and len(work) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            counts = list(pool.map(_chunk_counts, work))
    else:
        counts = [_chunk_counts(w) for w in work]
    dual, p0, p1, thr = (sum(c[i] for c in counts) for i in range(4))
    return AttackReport(strategy, config.n, trials, dual, p0, p1, thr)


@dataclass
class SweepPoint:
    theta: float
    per_qubit_analytic: float
    per_qubit_mc: float
    dual_analytic: float
    dual_mc: float


@dataclass
class SweepResult:
    points: list[SweepPoint]
    trials_per_point: int

    @property
    def analytic_maximizer(self) -> SweepPoint:
        return max(self.points, key=lambda p: p.per_qubit_analytic)

    @property
    def mc_maximizer(self) -> SweepPoint:
        return max(self.points, key=lambda p: p.per_qubit_mc)

    def to_csv(self) -> str:
        return to_csv(
            ["theta", "per_qubit_analytic", "per_qubit_mc", "dual_analytic", "dual_mc"],
            [(p.theta, p.per_qubit_analytic, p.per_qubit_mc, p.dual_analytic, p.dual_mc) for p in self.points],
        )


def sweep_projective_angle(step: float, config: ProtocolConfig, trials_per_point: int, seed=None) -> SweepResult:
    """Scan single-angle projective attacks over [0, 90] degrees.

    Monte Carlo uses common random numbers: the same qubits and the same
    uniforms are reused at every angle, so differences between grid points
    are not swamped by independent sampling noise. ``trials_per_point``
    counts qubits; the dual-unveil column groups them into runs of N.
    """
    if step <= 0 or abs(90.0 / step - round(90.0 / step)) > 1e-9:
        raise ValueError(f"grid step must divide 90 degrees, got {step}")
    rng = np.random.default_rng(seed)
    codes = rng.integers(0, 4, size=trials_per_point)
    angles = bloch_angles(codes & 1, codes >> 1)
    bits = (codes >> 1).astype(np.uint8)
    uniforms = rng.random(trials_per_point)
    detected = sample_detection(trials_per_point, config.eta, rng)
    runs = trials_per_point // config.n
    points = []
    for k in range(int(round(90.0 / step)) + 1):
        theta = k * step
        outcome = (uniforms >= outcome_zero_probability(angles, theta)).astype(np.uint8)
        ok = outcome == bits
        rate = projective_rate(theta)
        counted = ok | ~detected
        dual_mc = float(counted[: runs * config.n].reshape(runs, config.n).all(axis=1).mean()) if runs else math.nan
        points.append(SweepPoint(theta, rate, float(ok.mean()), (1 - config.eta + config.eta * rate) ** config.n, dual_mc))
    return SweepResult(points, trials_per_point)


# ---------------------------------------------------------------------------
# a single attack through the causal scheduler


class CheatingAliceP:
    """Measures once at P and relays the raw record (encrypted) to both wings."""

    def __init__(self, strategy, config, pads, rng, geometry):
        self.anchor = _anchor(Role.ALICE_P, geometry.p)
        self.strategy, self.config, self.pads, self.rng, self.geometry = strategy, config, pads, rng, geometry

    def handle(self, message: Message) -> list[Message]:
        if message.kind is not MessageKind.QUBIT_BATCH:
            raise sched.AgentError(f"aliceP cannot handle {message.kind.value}")
        register: QubitRegister = message.quantum
        detected = sample_detection(len(register), self.config.eta, self.rng)
        angle = self.strategy.measurement_angle
        if angle is None:
            record = np.zeros(int(detected.sum()), dtype=np.uint8)
        else:
            record = register.measure(angle, self.rng, which=detected)
        plaintext = encode_outcomes(0, record, detected)
        here = message.reception
        out = [_emit(Role.ALICE_P, Role.BOB_P, here, light_arrival(here, self.geometry.bob_p.position),
                     bits_to_str(detected), MessageKind.DETECTION_REPORT)]
        for wing, role in ((0, Role.ALICE_Q0), (1, Role.ALICE_Q1)):
            out.append(_emit(Role.ALICE_P, role, here, light_arrival(here, self.geometry.q(wing).position),
                             bits_to_str(otp_encrypt(self.pads[wing], plaintext)), MessageKind.OUTCOME_RELAY))
        return out


class CheatingAliceWing:
    """Applies one wing's declaration rule and unveils bit ``wing`` there.

    Its inputs are the relay from P, its pad half and its own random source;
    the other wing's state is unreachable by construction.
    """

    def __init__(self, wing: int, rule: WingStrategy, pad: OneTimePad, rng, geometry: Geometry):
        self.wing = wing
        self.anchor = _anchor((Role.ALICE_Q0, Role.ALICE_Q1)[wing], geometry.q(wing))
        self.rule, self.pad, self.rng, self.geometry = rule, pad, rng, geometry

    def handle(self, message: Message) -> list[Message]:
        if message.kind is not MessageKind.OUTCOME_RELAY:
            raise sched.AgentError(f"{self.anchor.agent_id} cannot handle {message.kind.value}")
        _, record, detected = decode_outcomes(otp_decrypt(self.pad, message.payload_bits))
        declared = self.rule.declare(record, self.rng)
        payload = bits_to_str(encode_outcomes(self.wing, declared, detected))
        emission = message.reception
        target = self.geometry.bob_q(self.wing)
        reception = target if causally_precedes(emission, target) else light_arrival(emission, target.position)
        bob = (Role.BOB_Q0, Role.BOB_Q1)[self.wing]
        return [_emit(self.anchor.role, bob, emission, reception, payload, MessageKind.UNVEIL)]


@dataclass
class AttackOutcome:
    transcript: Transcript
    unveilings: tuple[Unveiling, Unveiling]
    strict_pass: tuple[bool, bool]
    threshold_pass: tuple[bool, bool]

    @property
    def success(self) -> bool:
        return all(self.strict_pass)

    @property
    def threshold_success(self) -> bool:
        return all(self.threshold_pass)


def judge_wing(transcript: Transcript, unveiling: Optional[Unveiling], config: ProtocolConfig) -> tuple[bool, bool]:
    """Bob's checks for one wing taken alone, for the bit claimed there."""
    if unveiling is None or unveiling.malformed or len(unveiling.detected) != len(transcript.records):
        return False, False
    announced = transcript.detection_report()
    on_time = reception_on_time(unveiling.reception, transcript.geometry.bob_q(unveiling.wing),
                                config.timing_tolerance)
    consistent = announced is not None and np.array_equal(announced, unveiling.detected)
    if not (on_time and consistent):
        return False, False
    stats = wing_statistics(transcript.prepared_bases, transcript.prepared_bits, unveiling.detected,
                            unveiling.declared_per_qubit(), unveiling.claimed_bit)
    return bool(stats.passes(config, strict=True)), bool(stats.passes(config))


def execute_attack(
    strategy: AttackStrategy,
    config: ProtocolConfig,
    seed=None,
    geometry: Optional[Geometry] = None,
    wing_seeds: Optional[Sequence] = None,
) -> AttackOutcome:
    """Run one cheating attempt through the scheduler and judge both wings.

    ``wing_seeds`` overrides the private randomness of the two wing agents;
    the mutation tests use it to perturb one wing and watch the other.
    """
    geometry = geometry or standard_geometry(config.x)
    check_geometry(config, geometry)
    rng_bob, rng_alice, rng_pads, rng_w0, rng_w1 = spawn_rngs(seed, 5)
    if wing_seeds is not None:
        rng_w0, rng_w1 = (np.random.default_rng(s) for s in wing_seeds)
    send_pads, wing_pads = make_pads(config, rng_pads)
    records, batch = bob_prepare(config, rng_bob, geometry)
    agents = [
        BobLab(Role.BOB_P, geometry.bob_p),
        CheatingAliceP(strategy, config, send_pads, rng_alice, geometry),
        CheatingAliceWing(0, strategy.wings[0], wing_pads[0], rng_w0, geometry),
        CheatingAliceWing(1, strategy.wings[1], wing_pads[1], rng_w1, geometry),
        BobLab(Role.BOB_Q0, geometry.bob_q0),
        BobLab(Role.BOB_Q1, geometry.bob_q1),
    ]
    messages = sched.run(agents, [batch])
    transcript = Transcript(config, geometry, records, messages)
    u = (transcript.unveiling(0), transcript.unveiling(1))
    j0, j1 = judge_wing(transcript, u[0], config), judge_wing(transcript, u[1], config)
    return AttackOutcome(transcript, u, (j0[0], j1[0]), (j0[1], j1[1]))
