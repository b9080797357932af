"""Minkowski geometry in a fixed inertial frame, units c = 1.

Events are points (t, x, y, z).  Interval classification, causal-order
checks, commitment-geometry classification and the light-cone arithmetic
for the earliest possible verification event all live here.  Everything
is a pure function of double-precision coordinates.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

# Absolute band on dt^2 - |dx|^2 inside which an interval counts as lightlike.
LIGHTLIKE_TOL = 1e-12


class IntervalClass(Enum):
    TIMELIKE = "TIMELIKE"
    SPACELIKE = "SPACELIKE"
    LIGHTLIKE = "LIGHTLIKE"


class CommitmentClass(Enum):
    """Relation of the unveiling points to the commitment point.

    LC:     every unveiling point lightlike-separated, later in time.
    FFPD:   every unveiling point spacelike-separated, later in the fixed frame.
    TC:     every unveiling point in the timelike future.
    INVALID: mixed classes, or a non-timelike point not later than commitment.
    """

    LC = "LC"
    FFPD = "FFPD"
    TC = "TC"
    INVALID = "INVALID"


class VerifyPolicy(Enum):
    """Where the receiver combines his qubit sets for the final Bell tests."""

    AT_P = "AT_P"
    AT_Q_B = "AT_Q_B"
    MIDPOINT = "MIDPOINT"


@dataclass(frozen=True)
class Event:
    """A point of Minkowski space in the agreed frame."""

    t: float
    x: float
    y: float = 0.0
    z: float = 0.0

    def __post_init__(self):
        for c in (self.t, self.x, self.y, self.z):
            if not math.isfinite(c):
                raise ValueError(f"non-finite event coordinate: {c!r}")

    @property
    def spatial(self) -> tuple[float, float, float]:
        return (self.x, self.y, self.z)

    def coords(self) -> tuple[float, float, float, float]:
        return (self.t, self.x, self.y, self.z)


def spatial_distance(a: Event, b: Event) -> float:
    return math.dist(a.spatial, b.spatial)


def interval_class(a: Event, b: Event) -> IntervalClass:
    """Classify the interval between two events by the sign of dt^2 - |dx|^2."""
    dt = b.t - a.t
    s = dt * dt - sum((u - v) ** 2 for u, v in zip(a.spatial, b.spatial))
    if abs(s) <= LIGHTLIKE_TOL:
        return IntervalClass.LIGHTLIKE
    return IntervalClass.TIMELIKE if s > 0 else IntervalClass.SPACELIKE


def causal_ok(send: Event, receive: Event) -> bool:
    """True iff `receive` lies in the causal future of `send` (dt >= |dx|)."""
    dt = receive.t - send.t
    if dt < 0:
        return False
    s = dt * dt - sum((u - v) ** 2 for u, v in zip(send.spatial, receive.spatial))
    return s >= -LIGHTLIKE_TOL


def classify_commitment(commit_point: Event, unveil_points: list[Event]) -> CommitmentClass:
    """Classify a commitment layout from its commit and unveiling points.

    The label applies only when every unveiling point falls in the same
    class; a mixture, or any non-timelike point that is not strictly later
    than the commitment in the fixed frame, is INVALID.
    """
    if not unveil_points:
        raise ValueError("at least one unveiling point is required")
    kinds = set()
    for q in unveil_points:
        ic = interval_class(commit_point, q)
        later = q.t > commit_point.t
        if ic is IntervalClass.LIGHTLIKE and later:
            kinds.add(CommitmentClass.LC)
        elif ic is IntervalClass.SPACELIKE and later:
            kinds.add(CommitmentClass.FFPD)
        elif ic is IntervalClass.TIMELIKE and later:
            kinds.add(CommitmentClass.TC)
        else:
            return CommitmentClass.INVALID
    if len(kinds) != 1:
        return CommitmentClass.INVALID
    return kinds.pop()


@dataclass(frozen=True)
class CommitmentGeometry:
    """Commit point, unveiling points, and their consistency-checked class."""

    commit_point: Event
    unveil_points: tuple[Event, ...]
    classification: CommitmentClass = field(default=None)  # type: ignore[assignment]

    def __post_init__(self):
        object.__setattr__(self, "unveil_points", tuple(self.unveil_points))
        actual = classify_commitment(self.commit_point, list(self.unveil_points))
        if self.classification is None:
            object.__setattr__(self, "classification", actual)
        elif self.classification is not actual:
            raise ValueError(
                f"stated classification {self.classification} does not match "
                f"computed {actual}"
            )

    def unveil_point(self, bit: int) -> Event:
        return self.unveil_points[bit]


def symmetric_ffpd_geometry(distance: float = 1.0, unveil_time: float = 0.75) -> CommitmentGeometry:
    """Two unveiling points at +-`distance` on the x axis, both at `unveil_time`.

    Requires 0 < unveil_time < distance so the layout is FFPD.
    """
    p = Event(0.0, 0.0, 0.0, 0.0)
    q0 = Event(unveil_time, distance, 0.0, 0.0)
    q1 = Event(unveil_time, -distance, 0.0, 0.0)
    return CommitmentGeometry(p, (q0, q1))


def earliest_verification_event(
    geom: CommitmentGeometry,
    unveiled_bit: int,
    unveil_time: float,
    policy: VerifyPolicy,
) -> Event:
    """Earliest event at the policy location reachable by both qubit sets.

    Purely kinematic light-cone arithmetic: the set held from the commit
    point is treated as available there from t(P), the unveiled set leaves
    the unveiling point's position at `unveil_time`; each travels at light
    speed to the policy location.  A protocol run can only verify at or
    after this event, since in a real run the committed set is dispatched
    only once the receiver learns the claimed bit.
    """
    p = geom.commit_point
    q = geom.unveil_point(unveiled_bit)
    if unveil_time < q.t:
        raise ValueError(f"unveil_time {unveil_time} precedes unveiling point time {q.t}")
    if policy is VerifyPolicy.AT_P:
        loc = p.spatial
    elif policy is VerifyPolicy.AT_Q_B:
        loc = q.spatial
    else:
        loc = tuple((a + b) / 2 for a, b in zip(p.spatial, q.spatial))
    arrive_committed = p.t + math.dist(p.spatial, loc)
    arrive_unveiled = unveil_time + math.dist(q.spatial, loc)
    return Event(max(arrive_committed, arrive_unveiled), *loc)
