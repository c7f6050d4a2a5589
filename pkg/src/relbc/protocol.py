"""Honest agents, the protocol runner, Bob's verifier, and transcript logs."""

from __future__ import annotations

import dataclasses
import enum
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import sched
from .channels import (
    Message,
    MessageKind,
    OneTimePad,
    PadExhausted,
    WireFormatError,
    bits_to_str,
    decode_outcomes,
    encode_outcomes,
    otp_decrypt,
    otp_encrypt,
    report_length,
)
from .qubits import (
    Basis,
    BB84State,
    QubitRecord,
    QubitRegister,
    apply_noise,
    basis_for_bit,
    random_bases_bits,
    sample_detection,
)
from .sched import AGENT_IDS, AgentAnchor, Role
from .spacetime import (
    Geometry,
    SpacetimeEvent,
    at,
    causally_precedes,
    earliest_joint_future_time,
    light_arrival,
    standard_geometry,
)


class ConfigError(ValueError):
    def __init__(self, field_name: str, message: str):
        self.field = field_name
        super().__init__(f"{field_name}: {message}")


@dataclass(frozen=True)
class ProtocolConfig:
    n: int
    x: float = 1.0
    e: float = 0.0
    eta: float = 1.0
    tau_accept: float = 0.15
    rho_reject: float = 0.3
    timing_tolerance: float = 1e-9
    min_same_basis_count: int = 16

    def __post_init__(self):
        def need(ok, name, msg):
            if not ok:
                raise ConfigError(name, f"{msg} (got {getattr(self, name)!r})")

        need(isinstance(self.n, (int, np.integer)) and not isinstance(self.n, bool) and self.n >= 1, "n", "must be a positive integer")
        need(_finite(self.x) and self.x > 0, "x", "must be positive")
        need(_finite(self.e) and 0 <= self.e < 0.5, "e", "must satisfy 0 <= e < 0.5")
        need(_finite(self.eta) and 0 < self.eta <= 1, "eta", "must satisfy 0 < eta <= 1")
        need(_finite(self.tau_accept) and 0 <= self.tau_accept < 0.5, "tau_accept", "must satisfy 0 <= tau_accept < 0.5")
        need(_finite(self.rho_reject) and 0 < self.rho_reject < 0.5, "rho_reject", "must satisfy 0 < rho_reject < 0.5")
        need(self.tau_accept < self.rho_reject, "tau_accept", f"must be below rho_reject={self.rho_reject}")
        need(_finite(self.timing_tolerance) and self.timing_tolerance >= 0, "timing_tolerance", "must be non-negative")
        need(
            isinstance(self.min_same_basis_count, (int, np.integer)) and self.min_same_basis_count >= 1,
            "min_same_basis_count",
            "must be a positive integer",
        )

    @classmethod
    def field_names(cls) -> list[str]:
        return [f.name for f in dataclasses.fields(cls)]

    @classmethod
    def from_mapping(cls, data: dict) -> "ProtocolConfig":
        unknown = set(data) - set(cls.field_names())
        if unknown:
            name = sorted(unknown)[0]
            raise ConfigError(name, "unknown configuration key")
        if "n" not in data:
            raise ConfigError("n", "missing")
        typed = {}
        for f in dataclasses.fields(cls):
            if f.name not in data:
                continue
            value = data[f.name]
            want_int = f.name in ("n", "min_same_basis_count")
            try:
                if want_int:
                    if isinstance(value, float) and not value.is_integer():
                        raise ValueError
                    typed[f.name] = int(value)
                else:
                    typed[f.name] = float(value)
            except (TypeError, ValueError):
                raise ConfigError(f.name, f"bad value {value!r}") from None
        return cls(**typed)

    def to_mapping(self) -> dict:
        return dataclasses.asdict(self)


def _finite(v) -> bool:
    try:
        return math.isfinite(v)
    except TypeError:
        return False


# ---------------------------------------------------------------------------
# statistics shared by the verifier, the attack harness and the analysis


def fraction_at_most(k, m, limit):
    """k/m <= limit, elementwise; False where m == 0."""
    k, m = np.asarray(k), np.asarray(m)
    with np.errstate(divide="ignore", invalid="ignore"):
        return (m > 0) & (k / np.where(m > 0, m, 1) <= limit)


def fraction_at_least(k, m, limit):
    k, m = np.asarray(k), np.asarray(m)
    with np.errstate(divide="ignore", invalid="ignore"):
        return (m > 0) & (k / np.where(m > 0, m, 1) >= limit)


@dataclass
class WingStatistics:
    same_count: np.ndarray
    same_mismatch: np.ndarray
    conj_count: np.ndarray
    conj_mismatch: np.ndarray

    def passes(self, config: ProtocolConfig, strict: bool = False) -> np.ndarray:
        """Per-wing verdict on the statistics alone.

        ``strict`` is the exact-consistency game: every detected qubit of the
        claimed basis must match, nothing else is tested.
        """
        if strict:
            return self.same_mismatch == 0
        enough = (self.same_count >= config.min_same_basis_count) & (self.conj_count >= config.min_same_basis_count)
        return (
            enough
            & fraction_at_most(self.same_mismatch, self.same_count, config.tau_accept)
            & fraction_at_least(self.conj_mismatch, self.conj_count, config.rho_reject)
        )


def wing_statistics(bases, bits, detected, declared, claimed_bit) -> WingStatistics:
    """Mismatch counts of declared outcomes against Bob's preparations.

    All arrays share a trailing qubit axis; leading axes batch independent
    runs. ``declared`` entries for undetected qubits are ignored.
    ``claimed_bit`` broadcasts against the leading axes.
    """
    bases = np.asarray(bases)
    claimed = np.asarray(claimed_bit)[..., None]
    detected = np.asarray(detected, dtype=bool)
    wrong = np.asarray(declared) != np.asarray(bits)
    same = detected & (bases == claimed)
    conj = detected & (bases != claimed)
    return WingStatistics(
        same.sum(-1), (same & wrong).sum(-1), conj.sum(-1), (conj & wrong).sum(-1)
    )


# ---------------------------------------------------------------------------
# transcript


@dataclass
class Unveiling:
    wing: int
    payload: str
    reception: SpacetimeEvent
    claimed_bit: Optional[int] = None
    outcomes: Optional[np.ndarray] = None
    detected: Optional[np.ndarray] = None
    malformed: bool = False

    @classmethod
    def from_message(cls, wing: int, msg: Message) -> "Unveiling":
        try:
            bit, outcomes, detected = decode_outcomes(msg.payload_bits)
        except WireFormatError:
            return cls(wing, msg.payload, msg.reception, malformed=True)
        return cls(wing, msg.payload, msg.reception, bit, outcomes, detected)

    def declared_per_qubit(self) -> np.ndarray:
        """Declared outcome per qubit index (0 where undetected)."""
        full = np.zeros(len(self.detected), dtype=np.uint8)
        full[self.detected] = self.outcomes
        return full


@dataclass
class Transcript:
    config: ProtocolConfig
    geometry: Geometry
    records: list[QubitRecord]
    messages: list[Message]
    committed_bit: Optional[int] = None

    def messages_of(self, kind: MessageKind, receiver: Optional[str] = None) -> list[Message]:
        return [m for m in self.messages if m.kind == kind and (receiver is None or m.receiver == receiver)]

    def unveiling(self, wing: int) -> Optional[Unveiling]:
        bob = AGENT_IDS[(Role.BOB_Q0, Role.BOB_Q1)[wing]]
        found = self.messages_of(MessageKind.UNVEIL, bob)
        if not found:
            return None
        # Bob honours the first unveiling delivered to each wing lab
        return Unveiling.from_message(wing, found[0])

    def detection_report(self) -> Optional[np.ndarray]:
        found = self.messages_of(MessageKind.DETECTION_REPORT, AGENT_IDS[Role.BOB_P])
        return found[0].payload_bits.astype(bool) if found else None

    @property
    def prepared_bases(self) -> np.ndarray:
        return np.array([int(r.prepared.basis) for r in self.records], dtype=np.uint8)

    @property
    def prepared_bits(self) -> np.ndarray:
        return np.array([r.prepared.bit for r in self.records], dtype=np.uint8)

    def to_log(self) -> str:
        return dump_transcript(self)


# ---------------------------------------------------------------------------
# verifier


class Verdict(str, enum.Enum):
    ACCEPT = "accept"
    REJECT_CHEAT = "rejectCheat"
    ABORT_INSUFFICIENT_DATA = "abortInsufficientData"


@dataclass
class VerificationReport:
    timing_ok: bool = False
    wings_equal: bool = False
    claimed_bits_equal: bool = False
    statistical_ok: bool = False
    other_hypothesis_rejected: bool = False
    well_formed: bool = False
    mismatch_same: float = math.nan
    mismatch_conj: float = math.nan
    same_count: int = 0
    conj_count: int = 0
    verdict: Verdict = Verdict.ABORT_INSUFFICIENT_DATA
    bit: Optional[int] = None
    comparison_event: Optional[SpacetimeEvent] = None
    reasons: list[str] = field(default_factory=list)

    @property
    def accepted(self) -> bool:
        return self.verdict is Verdict.ACCEPT

    def verdict_text(self) -> str:
        return f"accept({self.bit})" if self.accepted else self.verdict.value


def reception_on_time(reception: SpacetimeEvent, anchor: SpacetimeEvent, tolerance: float) -> bool:
    return math.dist(reception.as_tuple(), anchor.as_tuple()) <= tolerance


def bob_verify(
    transcript: Transcript,
    config: Optional[ProtocolConfig] = None,
    comparison_position: Sequence[float] = (0.0, 0.0, 0.0),
) -> VerificationReport:
    config = config or transcript.config
    report = VerificationReport()
    geom = transcript.geometry

    if not transcript.records:
        report.reasons.append("no preparation record")
        return report
    u = [transcript.unveiling(0), transcript.unveiling(1)]
    if any(w is None for w in u):
        report.reasons.append("missing unveiling")
        return report

    report.comparison_event = at(
        comparison_position, earliest_joint_future_time([w.reception for w in u], comparison_position)
    )

    report.timing_ok = all(
        reception_on_time(w.reception, geom.bob_q(w.wing), config.timing_tolerance)
        and causally_precedes(geom.p, w.reception)
        for w in u
    )
    if not report.timing_ok:
        report.reasons.append("unveiling off its designated event")

    n = len(transcript.records)
    announced = transcript.detection_report()
    report.well_formed = (
        not any(w.malformed for w in u)
        and announced is not None
        and len(announced) == n
        and all(len(w.detected) == n and np.array_equal(w.detected, announced) for w in u)
    )
    if not report.well_formed:
        report.reasons.append("malformed unveiling or detection set inconsistent with report at P")

    report.wings_equal = u[0].payload == u[1].payload
    report.claimed_bits_equal = (
        u[0].claimed_bit is not None and u[0].claimed_bit == u[1].claimed_bit
    )
    if not report.wings_equal:
        report.reasons.append("wing payloads differ")
    if not report.claimed_bits_equal:
        report.reasons.append("claimed bits differ")

    cheat_free = report.timing_ok and report.well_formed and report.wings_equal and report.claimed_bits_equal
    if report.well_formed:
        bit = u[0].claimed_bit
        stats = wing_statistics(
            transcript.prepared_bases, transcript.prepared_bits, u[0].detected, u[0].declared_per_qubit(), bit
        )
        report.same_count = int(stats.same_count)
        report.conj_count = int(stats.conj_count)
        if report.same_count:
            report.mismatch_same = int(stats.same_mismatch) / report.same_count
        if report.conj_count:
            report.mismatch_conj = int(stats.conj_mismatch) / report.conj_count
        report.statistical_ok = bool(fraction_at_most(stats.same_mismatch, stats.same_count, config.tau_accept))
        report.other_hypothesis_rejected = bool(
            fraction_at_least(stats.conj_mismatch, stats.conj_count, config.rho_reject)
        )

    if not cheat_free:
        report.verdict = Verdict.REJECT_CHEAT
    elif min(report.same_count, report.conj_count) < config.min_same_basis_count:
        report.verdict = Verdict.ABORT_INSUFFICIENT_DATA
        report.reasons.append("too few detected qubits for a statistical decision")
    elif report.statistical_ok and report.other_hypothesis_rejected:
        report.verdict = Verdict.ACCEPT
        report.bit = u[0].claimed_bit
    else:
        report.verdict = Verdict.REJECT_CHEAT
        if not report.statistical_ok:
            report.reasons.append("inconsistent with the claimed basis")
        if not report.other_hypothesis_rejected:
            report.reasons.append("not inconsistent with the conjugate basis")
    return report


# ---------------------------------------------------------------------------
# honest agents


def _emit(sender: Role, receiver: Role, emission: SpacetimeEvent, reception: SpacetimeEvent, payload: str,
          kind: MessageKind, quantum=None) -> Message:
    return Message(AGENT_IDS[sender], AGENT_IDS[receiver], emission, reception, payload, kind, quantum=quantum)


def _anchor(role: Role, event: SpacetimeEvent) -> AgentAnchor:
    return AgentAnchor(AGENT_IDS[role], role, event.position)


def bob_prepare(config: ProtocolConfig, rng: np.random.Generator, geometry: Optional[Geometry] = None):
    """Draw the BB84 states and the qubit-batch message from P' to P."""
    geometry = geometry or standard_geometry(config.x)
    bases, bits = random_bases_bits(config.n, rng)
    records = [QubitRecord(i, BB84State(Basis(b), int(v))) for i, (b, v) in enumerate(zip(bases, bits))]
    msg = _emit(Role.BOB_P, Role.ALICE_P, geometry.bob_p, geometry.p, "", MessageKind.QUBIT_BATCH,
                quantum=QubitRegister(bases, bits))
    return records, msg


@dataclass
class CommitResult:
    detected: np.ndarray
    outcomes: np.ndarray
    plaintext: np.ndarray
    messages: list[Message]


def alice_commit(
    config: ProtocolConfig,
    bit: int,
    batch: Message,
    pads: Sequence[OneTimePad],
    rng: np.random.Generator,
    geometry: Optional[Geometry] = None,
    delay: float = 0.0,
) -> CommitResult:
    """Honest commitment at P: detect, measure in basis(bit), relay both ways.

    Returns the detection report to Bob followed by the two encrypted relays.
    """
    if bit not in (0, 1):
        raise ValueError(f"committed bit must be 0 or 1, got {bit!r}")
    geometry = geometry or standard_geometry(config.x)
    register: QubitRegister = batch.quantum
    detected = sample_detection(len(register), config.eta, rng)
    raw = register.measure(basis_for_bit(bit).angle, rng, which=detected)
    outcomes = np.asarray(apply_noise(raw, config.e, rng), dtype=np.uint8)
    plaintext = encode_outcomes(bit, outcomes, detected)

    here = batch.reception.shifted(dt=delay)
    msgs = [_emit(Role.ALICE_P, Role.BOB_P, here, light_arrival(here, geometry.bob_p.position),
                  bits_to_str(detected), MessageKind.DETECTION_REPORT)]
    for wing, role in ((0, Role.ALICE_Q0), (1, Role.ALICE_Q1)):
        cipher = otp_encrypt(pads[wing], plaintext)
        msgs.append(_emit(Role.ALICE_P, role, here, light_arrival(here, geometry.q(wing).position),
                          bits_to_str(cipher), MessageKind.OUTCOME_RELAY))
    return CommitResult(detected, outcomes, plaintext, msgs)


def alice_unveil(
    wing: int,
    relay: Message,
    pad: OneTimePad,
    unveil_time: float,
    geometry: Geometry,
) -> Message:
    """Decrypt the relayed report at Q_wing and hand it to Bob's wing lab.

    A relay longer than the remaining pad cannot be decrypted; the wing then
    hands over an empty payload, which Bob's verifier treats as malformed.
    """
    if unveil_time < relay.reception.t:
        raise sched.CausalityViolation(relay.reception, relay.reception.shifted(dt=unveil_time - relay.reception.t),
                                       "unveiling before the relay arrived")
    cipher = relay.payload_bits
    try:
        payload = bits_to_str(otp_decrypt(pad, cipher))
    except PadExhausted:
        payload = ""
    emission = relay.reception.shifted(dt=unveil_time - relay.reception.t)
    target = geometry.bob_q(wing)
    reception = target if causally_precedes(emission, target) else light_arrival(emission, target.position)
    role = (Role.ALICE_Q0, Role.ALICE_Q1)[wing]
    bob = (Role.BOB_Q0, Role.BOB_Q1)[wing]
    return _emit(role, bob, emission, reception, payload, MessageKind.UNVEIL)


class BobLab:
    """Bob's agent at P' or at a wing lab; records what it receives."""

    def __init__(self, role: Role, event: SpacetimeEvent):
        self.anchor = _anchor(role, event)
        self.received: list[Message] = []

    def handle(self, message: Message) -> list[Message]:
        if message.kind not in (MessageKind.DETECTION_REPORT, MessageKind.UNVEIL):
            raise sched.AgentError(f"{self.anchor.agent_id} cannot handle {message.kind.value}")
        self.received.append(message)
        return []


class HonestAliceP:
    def __init__(self, config, bit, pads, rng, geometry, delay=0.0):
        self.anchor = _anchor(Role.ALICE_P, geometry.p)
        self.config, self.bit, self.pads, self.rng, self.geometry, self.delay = config, bit, pads, rng, geometry, delay
        self.result: Optional[CommitResult] = None

    def handle(self, message: Message) -> list[Message]:
        if message.kind is not MessageKind.QUBIT_BATCH:
            raise sched.AgentError(f"aliceP cannot handle {message.kind.value}")
        self.result = alice_commit(self.config, self.bit, message, self.pads, self.rng, self.geometry, self.delay)
        return self.result.messages


class HonestAliceWing:
    def __init__(self, wing: int, pad: OneTimePad, geometry: Geometry, delay: float = 0.0):
        self.wing = wing
        self.anchor = _anchor((Role.ALICE_Q0, Role.ALICE_Q1)[wing], geometry.q(wing))
        self.pad, self.geometry, self.delay = pad, geometry, delay

    def handle(self, message: Message) -> list[Message]:
        if message.kind is not MessageKind.OUTCOME_RELAY:
            raise sched.AgentError(f"{self.anchor.agent_id} cannot handle {message.kind.value}")
        return [alice_unveil(self.wing, message, self.pad, message.reception.t + self.delay, self.geometry)]


def make_pads(config: ProtocolConfig, rng: np.random.Generator) -> tuple[list[OneTimePad], list[OneTimePad]]:
    """Pad pairs (P side, wing side) sized for the longest possible report."""
    length = report_length(config.n)
    sender = [OneTimePad.generate(f"P-Q{w}", length, rng) for w in (0, 1)]
    return sender, [p.mirror() for p in sender]


def as_seed_sequence(seed) -> np.random.SeedSequence:
    return seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)


def spawn_rngs(seed, count: int) -> list[np.random.Generator]:
    return [np.random.default_rng(s) for s in as_seed_sequence(seed).spawn(count)]


def check_geometry(config: ProtocolConfig, geometry: Geometry) -> None:
    if abs(geometry.scale - config.x) > 1e-12:
        raise ConfigError("x", f"geometry scale {geometry.scale} disagrees with config x={config.x}")


def run_honest(
    config: ProtocolConfig,
    bit: int,
    seed=None,
    geometry: Optional[Geometry] = None,
    delays: Optional[dict] = None,
) -> Transcript:
    """One complete honest run through the scheduler.

    ``delays`` maps :class:`Role` to agent processing delays (default 0).
    """
    geometry = geometry or standard_geometry(config.x)
    check_geometry(config, geometry)
    delays = delays or {}
    rng_bob, rng_alice, rng_pads = spawn_rngs(seed, 3)
    send_pads, wing_pads = make_pads(config, rng_pads)

    records, batch = bob_prepare(config, rng_bob, geometry)
    alice = HonestAliceP(config, bit, send_pads, rng_alice, geometry, delays.get(Role.ALICE_P, 0.0))
    agents = [
        BobLab(Role.BOB_P, geometry.bob_p),
        alice,
        HonestAliceWing(0, wing_pads[0], geometry, delays.get(Role.ALICE_Q0, 0.0)),
        HonestAliceWing(1, wing_pads[1], geometry, delays.get(Role.ALICE_Q1, 0.0)),
        BobLab(Role.BOB_Q0, geometry.bob_q0),
        BobLab(Role.BOB_Q1, geometry.bob_q1),
    ]
    messages = sched.run(agents, [batch])

    if alice.result is not None:
        outcomes = np.zeros(config.n, dtype=np.uint8)
        outcomes[alice.result.detected] = alice.result.outcomes
        for rec, det, out in zip(records, alice.result.detected, outcomes):
            rec.detected = bool(det)
            rec.honest_outcome = int(out) if det else None
    return Transcript(config, geometry, records, messages, committed_bit=bit)


# ---------------------------------------------------------------------------
# line-delimited log


def _num(v: float) -> str:
    return np.format_float_positional(float(v), unique=True, trim="-")


def _event_fields(ev: SpacetimeEvent) -> list[str]:
    return [_num(c) for c in ev.as_tuple()]


def _event_from(fields: Sequence[str]) -> SpacetimeEvent:
    return SpacetimeEvent(*(float(f) for f in fields))


LOG_HEADER = "#relbc-transcript\t1"


def dump_transcript(t: Transcript) -> str:
    lines = [LOG_HEADER]
    lines.append("\t".join(["config"] + [f"{k}={v!r}" for k, v in t.config.to_mapping().items()]))
    g = t.geometry
    for name in ("p", "q0", "q1", "bob_p", "bob_q0", "bob_q1"):
        lines.append("\t".join(["event", name] + _event_fields(getattr(g, name))))
    for name, off in sorted(g.offsets.items()):
        lines.append("\t".join(["offset", name] + [_num(v) for v in (off.dx, off.dy, off.dz, off.delay)]))
    lines.append(f"commit\t{'-' if t.committed_bit is None else t.committed_bit}")
    for r in t.records:
        out = "-" if r.honest_outcome is None else str(r.honest_outcome)
        lines.append(f"qubit\t{r.index}\t{r.prepared.basis.name}\t{r.prepared.bit}\t{int(r.detected)}\t{out}")
    for m in t.messages:
        cause = "-" if m.cause is None else str(m.cause)
        lines.append("\t".join(
            ["message", str(m.seq), cause, m.kind.value, m.sender, m.receiver]
            + _event_fields(m.emission) + _event_fields(m.reception) + [m.payload or "-"]
        ))
    return "\n".join(lines) + "\n"


def load_transcript(text: str) -> Transcript:
    from .spacetime import LabOffset

    lines = [ln for ln in text.splitlines() if ln]
    if not lines or lines[0] != LOG_HEADER:
        raise ValueError("not a transcript log")
    config = None
    events: dict[str, SpacetimeEvent] = {}
    offsets = {}
    committed = None
    records, messages = [], []
    for ln in lines[1:]:
        tag, *f = ln.split("\t")
        if tag == "config":
            raw = dict(item.split("=", 1) for item in f)
            config = ProtocolConfig.from_mapping({k: float(v) if "." in v or "e" in v else int(v) for k, v in raw.items()})
        elif tag == "event":
            events[f[0]] = _event_from(f[1:5])
        elif tag == "offset":
            offsets[f[0]] = LabOffset(*(float(v) for v in f[1:5]))
        elif tag == "commit":
            committed = None if f[0] == "-" else int(f[0])
        elif tag == "qubit":
            idx, basis, bit, det, out = f
            records.append(QubitRecord(int(idx), BB84State(Basis[basis], int(bit)), det == "1",
                                       None if out == "-" else int(out)))
        elif tag == "message":
            seq, cause, kind, sender, receiver = f[:5]
            payload = f[13]
            messages.append(Message(sender, receiver, _event_from(f[5:9]), _event_from(f[9:13]),
                                    "" if payload == "-" else payload, MessageKind(kind), int(seq),
                                    None if cause == "-" else int(cause)))
        else:
            raise ValueError(f"unknown log line tag {tag!r}")
    geometry = Geometry(**{k: events[k] for k in ("p", "q0", "q1", "bob_p", "bob_q0", "bob_q1")}, offsets=offsets)
    return Transcript(config, geometry, records, messages, committed)
