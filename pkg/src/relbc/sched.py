"""Causality-enforcing discrete-event scheduler.

The global queue runs in the agreed coordinate frame. Every message is
checked against the closed light cone when scheduled; deliveries are popped
in (reception time, insertion sequence) order and handed to the receiving
agent, whose response messages go back through the same check.
"""

from __future__ import annotations

import dataclasses
import enum
import heapq
import logging
from dataclasses import dataclass, field
from typing import Iterable, Protocol, Sequence

from .channels import Message
from .spacetime import SpacetimeEvent, causally_precedes, spatial_distance

log = logging.getLogger(__name__)


class CausalityViolation(RuntimeError):
    def __init__(self, emission: SpacetimeEvent, reception: SpacetimeEvent, detail: str = ""):
        self.emission = emission
        self.reception = reception
        msg = f"reception {reception.as_tuple()} is outside the future light cone of emission {emission.as_tuple()}"
        super().__init__(f"{detail}: {msg}" if detail else msg)


class AgentError(RuntimeError):
    """An agent had no transition for a delivered message."""


class Role(str, enum.Enum):
    ALICE_P = "aliceP"
    BOB_P = "bobP"
    ALICE_Q0 = "aliceQ0"
    ALICE_Q1 = "aliceQ1"
    BOB_Q0 = "bobQ0"
    BOB_Q1 = "bobQ1"


AGENT_IDS = {
    Role.ALICE_P: "alice@P",
    Role.BOB_P: "bob@P",
    Role.ALICE_Q0: "alice@Q0",
    Role.ALICE_Q1: "alice@Q1",
    Role.BOB_Q0: "bob@Q0",
    Role.BOB_Q1: "bob@Q1",
}


@dataclass(frozen=True)
class AgentAnchor:
    agent_id: str
    role: Role
    position: tuple[float, float, float]


class Agent(Protocol):
    anchor: AgentAnchor

    def handle(self, message: Message) -> Sequence[Message]:
        ...


@dataclass(order=True)
class ScheduledEvent:
    time: float
    sequence: int
    target: str = field(compare=False)
    payload: Message = field(compare=False)


def check_causal(message: Message) -> None:
    if not causally_precedes(message.emission, message.reception):
        raise CausalityViolation(
            message.emission, message.reception, f"{message.kind.value} {message.sender} -> {message.receiver}"
        )


def audit(messages: Iterable[Message]) -> list[Message]:
    """Post-hoc check of a message log; returns the violating messages."""
    return [m for m in messages if not causally_precedes(m.emission, m.reception)]


class Scheduler:
    def __init__(self, agents: Iterable[Agent] = ()):
        self.agents: dict[str, Agent] = {}
        self._queue: list[ScheduledEvent] = []
        self._sequence = 0
        self.delivered: list[Message] = []
        for agent in agents:
            self.register(agent)

    def register(self, agent: Agent) -> None:
        aid = agent.anchor.agent_id
        if aid in self.agents:
            raise ValueError(f"agent {aid} registered twice")
        self.agents[aid] = agent

    def schedule(self, message: Message, cause: int | None = None) -> ScheduledEvent:
        check_causal(message)
        seq = self._sequence
        self._sequence += 1
        stamped = dataclasses.replace(message, seq=seq, cause=cause)
        event = ScheduledEvent(message.reception.t, seq, message.receiver, stamped)
        heapq.heappush(self._queue, event)
        return event

    def run(self) -> list[Message]:
        while self._queue:
            event = heapq.heappop(self._queue)
            msg = event.payload
            agent = self.agents.get(event.target)
            if agent is None:
                raise AgentError(f"no agent {event.target!r} for {msg.kind.value} message #{msg.seq}")
            if spatial_distance(agent.anchor.position, msg.reception.position) > 1e-12:
                raise AgentError(f"{msg.kind.value} #{msg.seq} delivered away from {event.target}'s lab")
            self.delivered.append(msg)
            try:
                responses = agent.handle(msg)
            except (CausalityViolation, AgentError):
                raise
            except Exception as exc:
                raise AgentError(f"agent {event.target} failed on {msg.kind.value} #{msg.seq}: {exc}") from exc
            for out in responses:
                # an agent may only act at its own lab, after the triggering delivery
                if not causally_precedes(msg.reception, out.emission):
                    raise CausalityViolation(msg.reception, out.emission, f"{event.target} acted before being informed")
                self.schedule(out, cause=msg.seq)
            log.debug("delivered #%d %s to %s at t=%g", msg.seq, msg.kind.value, event.target, event.time)
        return self.delivered


def run(agents: Iterable[Agent], initial: Iterable[Message]) -> list[Message]:
    """Register agents, schedule initial messages, and process to exhaustion."""
    scheduler = Scheduler(agents)
    for msg in initial:
        scheduler.schedule(msg)
    return scheduler.run()
