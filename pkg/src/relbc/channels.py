"""One-time-pad channels and the message envelope carried by the scheduler.

Bitstrings are uint8 numpy arrays of 0/1 values. Message payloads are kept
as '0'/'1' text so messages stay immutable and serialise verbatim.

Outcome report wire format (bit-level, MSB first):

    claimed bit (1) | N (32, big-endian) | detection bitmap (N) | outcomes (popcount)
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Any, Optional

import numpy as np

from .spacetime import SpacetimeEvent

HEADER_BITS = 33


class PadExhausted(RuntimeError):
    """Raised instead of ever reusing one-time-pad material."""


class WireFormatError(ValueError):
    pass


def as_bits(values) -> np.ndarray:
    arr = np.asarray(values, dtype=np.uint8).ravel()
    if arr.size and arr.max() > 1:
        raise WireFormatError("bitstrings may only contain 0 and 1")
    return arr


def bits_to_str(bits) -> str:
    return "".join("1" if b else "0" for b in as_bits(bits))


def str_to_bits(text: str) -> np.ndarray:
    if text.strip("01"):
        raise WireFormatError(f"not a bitstring: {text[:40]!r}")
    return np.frombuffer(text.encode("ascii"), dtype=np.uint8) - ord("0")


@dataclass
class OneTimePad:
    pad_id: str
    bits: np.ndarray
    offset: int = 0
    # (start, stop) of every segment handed out, for non-reuse audits
    issued: list = field(default_factory=list)

    @classmethod
    def generate(cls, pad_id: str, length: int, rng: np.random.Generator) -> "OneTimePad":
        return cls(pad_id, rng.integers(0, 2, size=length, dtype=np.uint8))

    def mirror(self) -> "OneTimePad":
        """The other endpoint's copy: same material, independent offset."""
        return OneTimePad(self.pad_id, self.bits.copy())

    @property
    def remaining(self) -> int:
        return len(self.bits) - self.offset

    def take(self, n: int) -> np.ndarray:
        if n > self.remaining:
            raise PadExhausted(f"pad {self.pad_id}: need {n} bits, {self.remaining} left")
        seg = self.bits[self.offset:self.offset + n]
        self.issued.append((self.offset, self.offset + n))
        self.offset += n
        return seg


def otp_encrypt(pad: OneTimePad, plaintext) -> np.ndarray:
    plaintext = as_bits(plaintext)
    return plaintext ^ pad.take(len(plaintext))


otp_decrypt = otp_encrypt


def encode_outcomes(bit: int, outcomes, detected) -> np.ndarray:
    detected = np.asarray(detected, dtype=bool).ravel()
    outcomes = as_bits(outcomes)
    if bit not in (0, 1):
        raise WireFormatError(f"claimed bit must be 0 or 1, got {bit!r}")
    if len(outcomes) != int(detected.sum()):
        raise WireFormatError(f"{len(outcomes)} outcomes for {int(detected.sum())} detected qubits")
    n = len(detected)
    if n >= 1 << 32:
        raise WireFormatError("N does not fit in 32 bits")
    header = [bit] + [(n >> (31 - i)) & 1 for i in range(32)]
    return np.concatenate([np.array(header, dtype=np.uint8), detected.astype(np.uint8), outcomes])


def decode_outcomes(bits) -> tuple[int, np.ndarray, np.ndarray]:
    """Inverse of :func:`encode_outcomes`: (claimed bit, outcomes, detected)."""
    bits = as_bits(bits)
    if len(bits) < HEADER_BITS:
        raise WireFormatError(f"report too short: {len(bits)} bits")
    n = 0
    for b in bits[1:HEADER_BITS]:
        n = (n << 1) | int(b)
    if len(bits) < HEADER_BITS + n:
        raise WireFormatError(f"report truncated inside the detection bitmap (N={n})")
    detected = bits[HEADER_BITS:HEADER_BITS + n].astype(bool)
    outcomes = bits[HEADER_BITS + n:]
    if len(outcomes) != int(detected.sum()):
        raise WireFormatError(f"{len(outcomes)} outcome bits for {int(detected.sum())} detected qubits")
    return int(bits[0]), outcomes.copy(), detected.copy()


def report_length(n: int, detected_count: Optional[int] = None) -> int:
    return HEADER_BITS + n + (n if detected_count is None else detected_count)


class MessageKind(str, enum.Enum):
    QUBIT_BATCH = "qubit-batch"
    DETECTION_REPORT = "detection-report"
    OUTCOME_RELAY = "outcome-relay"
    UNVEIL = "unveil"


@dataclass(frozen=True)
class Message:
    """Immutable envelope. Causality is checked when scheduled, not here.

    ``seq`` and ``cause`` are stamped by the scheduler: the delivery index of
    this message and of the delivery that triggered its emission.
    ``quantum`` carries the physical qubits of a qubit batch; it is never
    serialised and never compared.
    """

    sender: str
    receiver: str
    emission: SpacetimeEvent
    reception: SpacetimeEvent
    payload: str
    kind: MessageKind
    seq: int = -1
    cause: Optional[int] = None
    quantum: Any = field(default=None, compare=False, repr=False)

    @property
    def payload_bits(self) -> np.ndarray:
        return str_to_bits(self.payload)
