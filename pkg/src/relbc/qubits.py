"""BB84 states as angles on the X-Z Bloch great circle, and their measurement.

|0> = 0 deg, |+> = 90 deg, |1> = 180 deg, |-> = 270 deg. A projective
measurement at angle phi returns 0 with probability (1 + cos(state - phi))/2.
The array helpers work elementwise and accept any broadcastable shape.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Optional

import numpy as np


class Basis(enum.IntEnum):
    Z = 0
    X = 1

    @property
    def conjugate(self) -> "Basis":
        return Basis(1 - self.value)

    @property
    def angle(self) -> float:
        """Honest measurement angle in degrees."""
        return 90.0 * self.value


def basis_for_bit(bit: int) -> Basis:
    """Commitment to 0 measures in Z, commitment to 1 in X."""
    return Basis(int(bit))


@dataclass(frozen=True)
class BB84State:
    basis: Basis
    bit: int

    def __post_init__(self):
        if self.bit not in (0, 1):
            raise ValueError(f"BB84 bit must be 0 or 1, got {self.bit!r}")
        object.__setattr__(self, "basis", Basis(self.basis))

    @property
    def bloch_angle(self) -> float:
        return 90.0 * self.basis + 180.0 * self.bit

    @classmethod
    def from_angle(cls, angle: float) -> "BB84State":
        a = int(round(angle)) % 360
        if a % 90:
            raise ValueError(f"{angle} is not a BB84 angle")
        return cls(Basis((a // 90) % 2), a // 180)

    def __str__(self):
        return ("|0>", "|+>", "|1>", "|->")[int(self.bloch_angle) // 90]


ALL_STATES = tuple(BB84State.from_angle(a) for a in (0, 90, 180, 270))


@dataclass
class QubitRecord:
    """Bob's preparation record for one transmitted qubit.

    ``honest_outcome`` is filled in only for detected qubits and only in
    white-box runs, where the simulator keeps Alice's private record.
    """

    index: int
    prepared: BB84State
    detected: bool = False
    honest_outcome: Optional[int] = None

    def __post_init__(self):
        if self.honest_outcome is not None and not self.detected:
            raise ValueError(f"qubit {self.index}: outcome recorded for an undetected qubit")


def bloch_angles(bases, bits) -> np.ndarray:
    return 90.0 * np.asarray(bases, dtype=float) + 180.0 * np.asarray(bits, dtype=float)


def random_bases_bits(n: int, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """Vectorised BB84 draw: (bases, bits) as uint8 arrays of length n."""
    if n < 1:
        raise ValueError(f"need at least one qubit, got n={n}")
    codes = rng.integers(0, 4, size=n)
    return (codes & 1).astype(np.uint8), (codes >> 1).astype(np.uint8)


def random_bb84(n: int, rng: np.random.Generator) -> list[BB84State]:
    bases, bits = random_bases_bits(n, rng)
    return [BB84State(Basis(b), int(v)) for b, v in zip(bases, bits)]


def outcome_zero_probability(state_angle, measurement_angle):
    """Born probability of outcome 0 (angles in degrees)."""
    delta = np.radians(np.asarray(state_angle, dtype=float) - np.asarray(measurement_angle, dtype=float))
    return (1.0 + np.cos(delta)) / 2.0


def measure_angles(state_angles, measurement_angles, rng: np.random.Generator) -> np.ndarray:
    """Projective measurement of many qubits; returns uint8 outcomes."""
    p0 = outcome_zero_probability(state_angles, measurement_angles)
    return (rng.random(np.shape(p0)) >= p0).astype(np.uint8)


def measure_projective(state: BB84State, measurement_angle: float, rng: np.random.Generator) -> int:
    return int(measure_angles(state.bloch_angle, measurement_angle, rng))


def _check_noise(e: float) -> None:
    if not 0.0 <= e < 0.5:
        raise ValueError(f"noise rate must satisfy 0 <= e < 0.5, got {e}")


def apply_noise(outcome, e: float, rng: np.random.Generator):
    """Flip each outcome bit independently with probability ``e``."""
    _check_noise(e)
    arr = np.asarray(outcome, dtype=np.uint8)
    if e == 0.0:
        return arr.copy() if arr.ndim else int(arr)
    flips = rng.random(arr.shape) < e
    out = arr ^ flips.astype(np.uint8)
    return out if out.ndim else int(out)


def sample_detection(n: int, eta: float, rng: np.random.Generator) -> np.ndarray:
    if not 0.0 < eta <= 1.0:
        raise ValueError(f"detection efficiency must satisfy 0 < eta <= 1, got {eta}")
    if eta == 1.0:
        return np.ones(n, dtype=bool)
    return rng.random(n) < eta


class DoubleMeasurement(RuntimeError):
    pass


class QubitRegister:
    """The physical qubits in flight from Bob to Alice.

    Holders can only measure, never read the preparation angles, and each
    qubit admits a single projective measurement.
    """

    def __init__(self, bases, bits):
        self._angles = bloch_angles(bases, bits)
        self._measured = np.zeros(len(self._angles), dtype=bool)

    def __len__(self):
        return len(self._angles)

    def measure(self, angle, rng: np.random.Generator, which=None) -> np.ndarray:
        """Measure the selected qubits (boolean mask, default all) at ``angle``.

        ``angle`` is a scalar or one angle per selected qubit. Returns the
        outcomes of the selected qubits in index order.
        """
        mask = np.ones(len(self), dtype=bool) if which is None else np.asarray(which, dtype=bool)
        if np.any(self._measured & mask):
            raise DoubleMeasurement("a qubit can be measured only once")
        self._measured |= mask
        return measure_angles(self._angles[mask], angle, rng)
