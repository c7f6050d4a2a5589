"""Minkowski geometry for the commitment protocol.

Natural units (c = 1), metric signature (+, -, -, -). Events are 3+1
dimensional; the standard layouts keep y = z = 0.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

# |s^2| <= LIGHTLIKE_TOL * max(1, dt^2) counts as a null separation.
LIGHTLIKE_TOL = 1e-9


class GeometryError(ValueError):
    """Raised for invalid protocol layouts or unreachable binding regions."""


@dataclass(frozen=True)
class SpacetimeEvent:
    x: float
    y: float
    z: float
    t: float

    def __post_init__(self):
        for name in ("x", "y", "z", "t"):
            value = getattr(self, name)
            if not math.isfinite(value):
                raise GeometryError(f"event coordinate {name} must be finite, got {value!r}")

    @property
    def position(self) -> tuple[float, float, float]:
        return (self.x, self.y, self.z)

    def shifted(self, dx: float = 0.0, dy: float = 0.0, dz: float = 0.0, dt: float = 0.0) -> "SpacetimeEvent":
        return SpacetimeEvent(self.x + dx, self.y + dy, self.z + dz, self.t + dt)

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.x, self.y, self.z, self.t)


ORIGIN = SpacetimeEvent(0.0, 0.0, 0.0, 0.0)


def at(position: Sequence[float], t: float) -> SpacetimeEvent:
    """Event at a static spatial position and coordinate time."""
    x, y, z = position
    return SpacetimeEvent(float(x), float(y), float(z), float(t))


def spatial_distance(a: Sequence[float], b: Sequence[float]) -> float:
    return math.dist(a, b)


def interval_squared(a: SpacetimeEvent, b: SpacetimeEvent) -> float:
    """s^2 = dt^2 - dx^2 - dy^2 - dz^2 (positive: timelike)."""
    dt = b.t - a.t
    dx = b.x - a.x
    dy = b.y - a.y
    dz = b.z - a.z
    return dt * dt - dx * dx - dy * dy - dz * dz


def _null_tolerance(dt: float) -> float:
    return LIGHTLIKE_TOL * max(1.0, dt * dt)


def is_lightlike(a: SpacetimeEvent, b: SpacetimeEvent) -> bool:
    return abs(interval_squared(a, b)) <= _null_tolerance(b.t - a.t)


def causally_precedes(a: SpacetimeEvent, b: SpacetimeEvent) -> bool:
    """True iff ``b`` lies in the closed future light cone of ``a``.

    Light-speed signals are legal; the null boundary is widened by
    ``LIGHTLIKE_TOL`` to absorb rounding in constructed geometries.
    """
    dt = b.t - a.t
    if dt < -LIGHTLIKE_TOL:
        return False
    return interval_squared(a, b) >= -_null_tolerance(dt)


def light_arrival(emission: SpacetimeEvent, position: Sequence[float]) -> SpacetimeEvent:
    """Earliest event at ``position`` reachable from ``emission``."""
    return at(position, emission.t + spatial_distance(emission.position, position))


def boost_x(event: SpacetimeEvent, rapidity: float) -> SpacetimeEvent:
    ch, sh = math.cosh(rapidity), math.sinh(rapidity)
    return SpacetimeEvent(ch * event.x - sh * event.t, event.y, event.z, ch * event.t - sh * event.x)


@dataclass(frozen=True)
class LabOffset:
    """Displacement of one of Bob's labs from its ideal point.

    ``delay`` is the lab's processing delay. For the wing labs it is added
    to the ideal event time (Bob records the unveiling after ``Q_i``); for
    the preparation lab it is subtracted (Bob emits before ``P``).
    """

    dx: float = 0.0
    dy: float = 0.0
    dz: float = 0.0
    delay: float = 0.0

    def __post_init__(self):
        for name in ("dx", "dy", "dz", "delay"):
            if not math.isfinite(getattr(self, name)):
                raise GeometryError(f"offset {name} must be finite")
        if self.delay < 0:
            raise GeometryError(f"offset delay must be non-negative, got {self.delay}")

    @property
    def is_zero(self) -> bool:
        return self.dx == self.dy == self.dz == self.delay == 0.0


@dataclass(frozen=True)
class Geometry:
    """Agreed points plus the anchor events of Bob's three laboratories.

    Alice's agents sit exactly at P, Q0, Q1. Bob's agents sit at
    ``bob_p`` (P'), ``bob_q0`` (Q'0) and ``bob_q1`` (Q'1).
    """

    p: SpacetimeEvent
    q0: SpacetimeEvent
    q1: SpacetimeEvent
    bob_p: SpacetimeEvent
    bob_q0: SpacetimeEvent
    bob_q1: SpacetimeEvent
    offsets: Mapping[str, LabOffset] = field(default_factory=dict)

    def q(self, wing: int) -> SpacetimeEvent:
        return (self.q0, self.q1)[wing]

    def bob_q(self, wing: int) -> SpacetimeEvent:
        return (self.bob_q0, self.bob_q1)[wing]

    @property
    def scale(self) -> float:
        return self.q0.x - self.p.x


def standard_geometry(x: float) -> Geometry:
    """P at the origin, Q0 = (x,0,0,x), Q1 = (-x,0,0,x); Bob's labs coincide."""
    if not (math.isfinite(x) and x > 0):
        raise GeometryError(f"geometry scale x must be positive, got {x!r}")
    q0 = SpacetimeEvent(x, 0.0, 0.0, x)
    q1 = SpacetimeEvent(-x, 0.0, 0.0, x)
    return Geometry(ORIGIN, q0, q1, ORIGIN, q0, q1, {})


def offset_geometry(x: float, offsets: Mapping[str, LabOffset] | None = None) -> Geometry:
    """Standard layout with Bob's labs displaced, as in a non-ideal setup.

    ``offsets`` maps ``"p"``, ``"q0"``, ``"q1"`` to :class:`LabOffset`.
    Each Q'_i must lie in the causal future of Q_i and P' in the causal
    past of P; otherwise :class:`GeometryError` is raised.
    """
    base = standard_geometry(x)
    offsets = dict(offsets or {})
    unknown = set(offsets) - {"p", "q0", "q1"}
    if unknown:
        raise GeometryError(f"unknown lab offset keys: {sorted(unknown)}")
    zero = LabOffset()
    op, o0, o1 = (offsets.get(k, zero) for k in ("p", "q0", "q1"))

    bob_p = base.p.shifted(op.dx, op.dy, op.dz, -op.delay)
    bob_q0 = base.q0.shifted(o0.dx, o0.dy, o0.dz, o0.delay)
    bob_q1 = base.q1.shifted(o1.dx, o1.dy, o1.dz, o1.delay)

    if not causally_precedes(bob_p, base.p):
        raise GeometryError(f"P' = {bob_p.as_tuple()} cannot reach P = {base.p.as_tuple()}")
    for name, ideal, anchor in (("q0", base.q0, bob_q0), ("q1", base.q1, bob_q1)):
        if not causally_precedes(ideal, anchor):
            raise GeometryError(
                f"Q'{name[1]} = {anchor.as_tuple()} is not in the causal future of {name.upper()} = {ideal.as_tuple()}"
            )
    kept = {k: v for k, v in offsets.items() if not v.is_zero}
    return Geometry(base.p, base.q0, base.q1, bob_p, bob_q0, bob_q1, kept)


def latest_binding_time(
    q0b: SpacetimeEvent,
    q1b: SpacetimeEvent,
    position: Sequence[float] = (0.0, 0.0, 0.0),
    not_before: float | None = None,
) -> float:
    """Latest time T with (position, T) in the past cones of both receptions.

    A static worldline meets the intersection of the two past cones in the
    half-line t <= T. ``not_before`` marks where the worldline starts (e.g.
    when the lab came into existence); if T falls before it the intersection
    is empty and :class:`GeometryError` is raised.
    """
    bound = min(ev.t - spatial_distance(position, ev.position) for ev in (q0b, q1b))
    if not_before is not None and bound < not_before:
        raise GeometryError(
            f"worldline at {tuple(position)} starting at t={not_before} misses the common past of the receptions"
        )
    return bound


def earliest_joint_future_time(events: Sequence[SpacetimeEvent], position: Sequence[float]) -> float:
    """Earliest time on a static worldline inside every event's future cone."""
    return max(ev.t + spatial_distance(position, ev.position) for ev in events)
