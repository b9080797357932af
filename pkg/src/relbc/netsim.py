"""Causal discrete-event transport with move-only custody of quantum payloads.

Messages are delivered in receive-time order (ties broken by sender name,
then sequence number).  Scheduling validates the light-speed constraint and,
for qubit transfers, that the sender actually holds every label; custody
moves to the channel in transit and to the receiver on delivery.  Classical
payloads are copyable and carry no custody.  Cloning attempts therefore
surface as custody violations at the transport layer, without touching any
amplitudes.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass, field
from enum import Enum
from typing import TYPE_CHECKING, Iterable

from .spacetime import Event, causal_ok

if TYPE_CHECKING:  # pragma: no cover
    from .protocol import Message, Transcript
    from .quantum import QubitLabel


class CausalityViolation(Exception):
    """A schedule required superluminal signalling."""


class CustodyViolation(Exception):
    """A qubit was sent, duplicated or measured by a non-holder."""


class MessageStatus(Enum):
    PENDING = "PENDING"
    DELIVERED = "DELIVERED"


@dataclass
class ScheduledMessage:
    message: "Message"
    status: MessageStatus = MessageStatus.PENDING
    seq: int = 0


@dataclass(frozen=True)
class CustodyRecord:
    """Who holds a labelled qubit, and since when (sim time)."""

    label: "QubitLabel"
    holder: str
    since: float


_TIME_EPS = 1e-12


class Simulation:
    """One run's event queue, clock and custody ledger."""

    def __init__(self):
        self._heap: list[tuple[float, str, int, ScheduledMessage]] = []
        self._seq = 0
        self.clock = float("-inf")
        self._holder: dict["QubitLabel", str] = {}
        self._since: dict["QubitLabel", float] = {}

    # -- custody ------------------------------------------------------------

    def register_qubits(self, labels: Iterable["QubitLabel"], holder: str, since: float = float("-inf")) -> None:
        for l in labels:
            if l in self._holder:
                raise CustodyViolation(f"label {l} already registered")
            self._holder[l] = holder
            self._since[l] = since

    def holder(self, label: "QubitLabel") -> str:
        return self._holder[label]

    def custody_record(self, label: "QubitLabel") -> CustodyRecord:
        return CustodyRecord(label, self._holder[label], self._since[label])

    def require_custody(self, agent: str, labels: Iterable["QubitLabel"]) -> None:
        for l in labels:
            h = self._holder.get(l)
            if h != agent:
                raise CustodyViolation(f"{agent} does not hold {l} (holder: {h})")

    # -- scheduling and delivery ---------------------------------------------

    def schedule(self, message: "Message") -> ScheduledMessage:
        """Validate and enqueue; quantum payloads move into the channel."""
        if not causal_ok(message.send_event, message.receive_event):
            raise CausalityViolation(
                f"superluminal schedule {message.send_event.coords()} -> "
                f"{message.receive_event.coords()}"
            )
        if self.clock != float("-inf") and message.send_event.t < self.clock - _TIME_EPS:
            raise CausalityViolation(
                f"send at t={message.send_event.t} is in the past of clock {self.clock}"
            )
        sm = ScheduledMessage(message, MessageStatus.PENDING, self._seq)
        if message.is_quantum():
            self.require_custody(message.sender, message.payload)
            for l in message.payload:
                self._holder[l] = f"channel#{sm.seq}"
                self._since[l] = message.send_event.t
        heapq.heappush(
            self._heap, (message.receive_event.t, message.sender, sm.seq, sm)
        )
        self._seq += 1
        return sm

    def step(self) -> "Message | None":
        """Deliver the next message, or None when the queue is drained."""
        if not self._heap:
            return None
        _, _, _, sm = heapq.heappop(self._heap)
        msg = sm.message
        self.clock = msg.receive_event.t
        sm.status = MessageStatus.DELIVERED
        if msg.is_quantum():
            for l in msg.payload:
                self._holder[l] = msg.receiver
                self._since[l] = msg.receive_event.t
        return msg


def audit(transcript: "Transcript") -> list[str]:
    """Re-validate a finished transcript's causality and custody chains.

    Returns a list of human-readable violations; empty means OK.  Custody is
    replayed from the record stream: a label's first sender is taken as its
    creator, every later transfer must leave the current holder, and every
    measurement must be performed by the holder of both qubits.
    """
    violations: list[str] = []
    holder: dict["QubitLabel", str] = {}
    last_time = float("-inf")
    for rec in transcript.records:
        kind = getattr(rec, "kind", None)
        if kind == "BELL_MEASUREMENT":
            for l in rec.pair:
                h = holder.get(l, rec.agent)
                if h != rec.agent:
                    violations.append(
                        f"measurement by {rec.agent} on {l} held by {h}"
                    )
            continue
        msg = rec.message
        if rec.time < last_time - _TIME_EPS:
            violations.append(f"delivery at t={rec.time} after t={last_time}")
        last_time = max(last_time, rec.time)
        if not causal_ok(msg.send_event, msg.receive_event):
            violations.append(
                f"superluminal message {msg.sender}->{msg.receiver} "
                f"{msg.send_event.coords()} -> {msg.receive_event.coords()}"
            )
        if msg.is_quantum():
            for l in msg.payload:
                h = holder.setdefault(l, msg.sender)
                if h != msg.sender:
                    violations.append(
                        f"transfer of {l} by {msg.sender} while held by {h}"
                    )
                holder[l] = msg.receiver
    return violations
