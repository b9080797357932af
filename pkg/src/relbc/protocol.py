"""Executable agent state machines for the two commitment protocol variants.

A run wires six pointlike agents (committer-side A_c, A_0, A_1 and
receiver-side B_c, B_0, B_1, plus midpoint verifiers when configured) into
the causal network simulator, plays preparation, commitment, distribution
(randomised variant), unveiling and verification, and returns an auditable
transcript.  All quantum payloads move under custody; all randomness comes
from the run's seeded generator, so a transcript replays byte-for-byte.

Timing model: agents sit at fixed spatial positions in the agreed frame.
Preparation-phase transfers inside the committer's network arrive before
the commitment time on committer-secure channels.  Unveiling happens at the
designated unveiling points; the claimed bit is announced beside the commit
point once the last unveiling is due, and the receiver only then routes his
committed qubits to the verification location, which is why local
verification in the randomised variant finishes strictly earlier.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Iterator

import numpy as np

from . import netsim, noise as noise_mod
from .adversary import AliceStrategy, Directive, StrategyKind, optimal_cheat_state, superposition_commit_state
from .bounds import SubsetPartition, Variant
from .netsim import CustodyViolation, Simulation
from .noise import LossOutcome, NoiseParams, NO_NOISE, required_passes
from .quantum import (
    BellOutcome,
    FactoredState,
    QubitLabel,
    Register,
    StateVector,
    prepare_singlets,
)
from .spacetime import CommitmentGeometry, CommitmentClass, Event, VerifyPolicy, spatial_distance


@dataclass(frozen=True)
class ProtocolParams:
    n: int
    variant: Variant
    epsilon: float
    geometry: CommitmentGeometry
    seed: int
    verify_policy: VerifyPolicy = VerifyPolicy.AT_P
    # the classical bit announcement: who sends it, and whether the
    # randomised variant bothers (it can identify the bit locally without it)
    claim_sender: str = "A_c"
    send_claim: bool = True

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("N must be >= 1")
        if self.variant is Variant.ETRBC and self.n % 2 != 0:
            raise ValueError("the randomised variant requires even N")
        if not 0.0 <= self.epsilon < 1.0:
            raise ValueError("epsilon must lie in [0, 1)")
        if self.claim_sender not in ("A_c", "A_0", "A_1"):
            raise ValueError("claim_sender must be one of A_c, A_0, A_1")
        if len(self.geometry.unveil_points) != 2:
            raise ValueError("exactly two unveiling points are required")


class MessageKind(Enum):
    QUBIT_TRANSFER = "QUBIT_TRANSFER"
    CLASSICAL_BIT = "CLASSICAL_BIT"
    INSTRUCTION = "INSTRUCTION"


@dataclass(frozen=True)
class Message:
    kind: MessageKind
    payload: tuple[QubitLabel, ...] | int | str
    sender: str
    receiver: str
    send_event: Event
    receive_event: Event

    def is_quantum(self) -> bool:
        return self.kind is MessageKind.QUBIT_TRANSFER

    def payload_text(self) -> str:
        if self.kind is MessageKind.QUBIT_TRANSFER:
            return ",".join(str(l) for l in self.payload)
        return str(self.payload)


@dataclass(frozen=True)
class MessageRecord:
    seq: int
    time: float
    kind: str
    message: Message


@dataclass(frozen=True)
class MeasurementRecord:
    time: float
    agent: str
    event: Event
    pair: tuple[QubitLabel, QubitLabel]
    outcome: BellOutcome | None  # None == the tested singlet was lost
    kind: str = "BELL_MEASUREMENT"


class VerdictKind(Enum):
    ACCEPT = "ACCEPT"
    REJECT = "REJECT"
    NO_UNVEIL = "NO_UNVEIL"


@dataclass(frozen=True)
class Verdict:
    kind: VerdictKind
    bit: int | None = None
    claim: int | None = None
    n_tests: int | None = None
    n_pass: int | None = None
    accept_0: bool | None = None
    accept_1: bool | None = None


@dataclass
class Transcript:
    records: list[MessageRecord | MeasurementRecord] = field(default_factory=list)
    verdict: Verdict | None = None


@dataclass(frozen=True)
class VerifyResult:
    accepted: bool
    n_tests: int
    n_pass: int
    outcomes: tuple[BellOutcome | None, ...]


@dataclass(frozen=True)
class Preparation:
    """Everything the committer fixes before the protocol starts."""

    factors: tuple[StateVector, ...]
    handed: tuple[QubitLabel, ...]
    unveil_sets: dict[int, tuple[QubitLabel, ...]]
    singlet_pairs: tuple[tuple[QubitLabel, QubitLabel], ...]


def _unveil_register(bit: int) -> Register:
    return Register.W0Q if bit == 0 else Register.W1Q


def coordinate_unveiling(directive: Directive) -> dict[str, Directive]:
    """Advance instructions: every unveiling agent acts identically."""
    return {"A_c": directive, "A_0": directive, "A_1": directive}


def build_preparation(strategy: AliceStrategy, n: int) -> Preparation:
    """Materialise a strategy into factors, custody sets and noise targets."""
    w = Register
    w0q = tuple(QubitLabel(w.W0Q, j) for j in range(1, n + 1))
    w1q = tuple(QubitLabel(w.W1Q, j) for j in range(1, n + 1))
    unveil_sets = {0: w0q, 1: w1q}
    if strategy.kind is StrategyKind.HONEST:
        factors = []
        pairs = []
        for reg_p, reg_q in ((w.W0P, w.W0Q), (w.W1P, w.W1Q)):
            for j in range(1, n + 1):
                a, b = QubitLabel(reg_p, j), QubitLabel(reg_q, j)
                factors.append(prepare_singlets(1, (a, b)))
                pairs.append((a, b))
        handed_reg = w.W0P if strategy.commit == 0 else w.W1P
        handed = tuple(QubitLabel(handed_reg, j) for j in range(1, n + 1))
        return Preparation(tuple(factors), handed, unveil_sets, tuple(pairs))
    handed = tuple(QubitLabel(w.W0P, j) for j in range(1, n + 1))
    if strategy.kind is StrategyKind.SUPERPOSITION:
        state = superposition_commit_state(n, strategy.alpha, strategy.beta)
        return Preparation((state,), handed, unveil_sets, ())
    if strategy.kind is StrategyKind.OPTIMAL_CHEAT:
        return Preparation((optimal_cheat_state(n),), handed, unveil_sets, ())
    state = strategy.custom_state
    needed = set(handed) | set(w0q) | set(w1q)
    if not needed <= set(state.labels):
        raise ValueError("custom state must span the 3N protocol qubits")
    return Preparation((state,), handed, unveil_sets, ())


def distribute_subsets(params: ProtocolParams, rng: np.random.Generator) -> SubsetPartition:
    """Uniform size-N/2 subset by unbiased partial Fisher-Yates shuffle."""
    if params.variant is not Variant.ETRBC:
        raise ValueError("subset distribution belongs to the randomised variant")
    n = params.n
    if n % 2 != 0:
        raise ValueError("N must be even")
    idx = list(range(1, n + 1))
    half = n // 2
    for i in range(half):
        k = int(rng.integers(i, n))
        idx[i], idx[k] = idx[k], idx[i]
    j0 = frozenset(idx[:half])
    return SubsetPartition(n, j0, frozenset(range(1, n + 1)) - j0)


def verify_commitment(
    state: FactoredState,
    held_pairs: Iterable[tuple[QubitLabel, QubitLabel]],
    claimed_bit: int,
    epsilon: float,
    rng: np.random.Generator,
    loss_l: float = 0.0,
) -> VerifyResult:
    """Bell-test every pair; accept when enough singlet outcomes show up.

    Pairs must match by index (committed qubit j against returned qubit j).
    A lost singlet is recorded as outcome None and counts as a failed test.
    """
    pairs = list(held_pairs)
    for a, b in pairs:
        if a.index != b.index:
            raise ValueError(f"unmatched labels in pair ({a}, {b})")
    outcomes: list[BellOutcome | None] = []
    n_pass = 0
    for a, b in pairs:
        if loss_l > 0.0 and rng.random() < loss_l:
            outcomes.append(None)
            continue
        out = state.bell_measure(a, b, rng)
        outcomes.append(out)
        if out is BellOutcome.PSI_MINUS:
            n_pass += 1
    need = required_passes(len(pairs), epsilon)
    return VerifyResult(n_pass >= need, len(pairs), n_pass, tuple(outcomes))


class _Run:
    """One protocol execution: agents, custody, event loop, verdict."""

    def __init__(self, params: ProtocolParams, strategy: AliceStrategy, noise: NoiseParams):
        self.params = params
        self.strategy = strategy
        self.noise = noise
        self.rng = np.random.default_rng(params.seed)
        self.sim = Simulation()
        self.state = FactoredState()
        self.transcript = Transcript()
        self.claim = strategy.resolved_claim()
        self.prep = build_preparation(strategy, params.n)

        g = params.geometry
        self.t_commit = g.commit_point.t
        self.pos = {"A_c": g.commit_point.spatial, "B_c": g.commit_point.spatial}
        self.unveil_time = {}
        self.dist = {}
        for i in (0, 1):
            q = g.unveil_points[i]
            self.pos[f"A_{i}"] = q.spatial
            self.pos[f"B_{i}"] = q.spatial
            self.pos[f"B_m{i}"] = tuple(
                (a + b) / 2 for a, b in zip(g.commit_point.spatial, q.spatial)
            )
            self.unveil_time[i] = q.t
            self.dist[i] = spatial_distance(g.commit_point, q)
        self.t_claim = max(self.unveil_time.values())

        # per-agent mailboxes; unveiled sets are keyed by their register so
        # the two unveiling agents' sets never collide at a shared verifier
        self.handed_at: dict[str, dict[int, QubitLabel]] = {}
        self.unveiled_at: dict[str, dict[Register, dict[int, QubitLabel]]] = {}
        self.claim_at: dict[str, int] = {}
        self.subset_at: dict[str, frozenset[int]] = {}
        self.results: dict[int, VerifyResult] = {}
        self.verified = False

    # -- helpers -------------------------------------------------------------

    def _event(self, agent: str, t: float) -> Event:
        return Event(t, *self.pos[agent])

    def _send(self, kind: MessageKind, payload, sender: str, receiver: str,
              t_send: float, t_recv: float) -> None:
        msg = Message(
            kind, payload, sender, receiver,
            self._event(sender, t_send), self._event(receiver, t_recv),
        )
        self.sim.schedule(msg)

    def _verifier_name(self, claim: int) -> str:
        policy = self.params.verify_policy
        if policy is VerifyPolicy.AT_P:
            return "B_c"
        if policy is VerifyPolicy.AT_Q_B:
            return f"B_{claim}"
        return f"B_m{claim}"

    # -- setup ---------------------------------------------------------------

    def setup(self) -> None:
        if self.params.geometry.classification is CommitmentClass.INVALID:
            raise ValueError("geometry classification is INVALID")
        if (
            self.params.variant is Variant.ETBC
            and self.strategy.directive is Directive.UNVEIL
            and self.claim is None
        ):
            raise ValueError("the basic variant needs a claimed bit to verify")
        for f in self.prep.factors:
            self.state.add_factor(f)
        self.sim.register_qubits(self.state.labels, "A_c")
        if self.noise.depolarizing_q > 0.0:
            if not self.prep.singlet_pairs:
                raise ValueError(
                    "depolarising noise needs a singlet-structured preparation"
                )
            for pair in self.prep.singlet_pairs:
                noise_mod.apply_depolarizing(
                    self.state, pair, self.noise.depolarizing_q, self.rng
                )

        directives = coordinate_unveiling(self.strategy.directive)
        for i in (0, 1):
            t_u, d = self.unveil_time[i], self.dist[i]
            self._send(
                MessageKind.INSTRUCTION, directives[f"A_{i}"].value,
                "A_c", f"A_{i}", t_u - d, t_u,
            )
            self._send(
                MessageKind.QUBIT_TRANSFER, self.prep.unveil_sets[i],
                "A_c", f"A_{i}", self.t_commit - 1.0 - d, self.t_commit - 1.0,
            )
        self._send(
            MessageKind.QUBIT_TRANSFER, self.prep.handed,
            "A_c", "B_c", self.t_commit, self.t_commit,
        )
        announce = (
            self.strategy.directive is Directive.UNVEIL
            and self.claim is not None
            and (self.params.variant is Variant.ETBC or self.params.send_claim)
        )
        if announce and self.params.claim_sender == "A_c":
            self._send(
                MessageKind.CLASSICAL_BIT, self.claim, "A_c", "B_c",
                self.t_claim, self.t_claim,
            )
        elif announce:
            i = int(self.params.claim_sender[-1])
            t_u = self.unveil_time[i]
            self._send(
                MessageKind.CLASSICAL_BIT, self.claim, f"A_{i}", f"B_{i}", t_u, t_u
            )

    # -- handlers ------------------------------------------------------------

    def handle(self, msg: Message) -> None:
        agent = msg.receiver
        if agent.startswith("A_"):
            self._handle_alice(agent, msg)
        else:
            self._handle_bob(agent, msg)

    def _handle_alice(self, agent: str, msg: Message) -> None:
        if msg.kind is MessageKind.INSTRUCTION and msg.payload == Directive.UNVEIL.value:
            i = int(agent[-1])
            t = msg.receive_event.t
            self._send(
                MessageKind.QUBIT_TRANSFER, self.prep.unveil_sets[i],
                agent, f"B_{i}", t, t,
            )
        # qubit transfers from A_c just park with the agent until instructed

    def _handle_bob(self, agent: str, msg: Message) -> None:
        t = msg.receive_event.t
        if msg.kind is MessageKind.CLASSICAL_BIT:
            self.claim_at[agent] = int(msg.payload)
            if agent == "B_c":
                self._bc_route_committed(t)
            elif agent in ("B_0", "B_1") and msg.sender.startswith("A_"):
                # relay the announcement beside the commit point
                i = int(agent[-1])
                self._send(
                    MessageKind.CLASSICAL_BIT, msg.payload, agent, "B_c",
                    t, t + self.dist[i],
                )
        elif msg.kind is MessageKind.QUBIT_TRANSFER:
            by_index = {l.index: l for l in msg.payload}
            if msg.sender == "A_c" and agent == "B_c":
                self.handed_at[agent] = by_index
                if self.params.variant is Variant.ETRBC:
                    self._bc_distribute(t)
                else:
                    self._bc_route_committed(t)
            elif msg.sender.startswith("A_"):
                self._store_unveiled(agent, msg.payload)
                self._bi_route_unveiled(agent, t)
            elif msg.sender == "B_c":
                self.handed_at[agent] = by_index
                if self.params.variant is Variant.ETRBC:
                    self.subset_at[agent] = frozenset(by_index)
            else:
                # unveiled sets forwarded onwards from the unveiling points
                self._store_unveiled(agent, msg.payload)
        self._try_verify(agent, t)

    def _store_unveiled(self, agent: str, labels: tuple[QubitLabel, ...]) -> None:
        box = self.unveiled_at.setdefault(agent, {})
        for l in labels:
            box.setdefault(l.register, {})[l.index] = l

    def _bc_distribute(self, t: float) -> None:
        part = distribute_subsets(self.params, self.rng)
        handed = self.handed_at["B_c"]
        for i, subset in ((0, part.j0), (1, part.j1)):
            labels = tuple(handed[j] for j in sorted(subset))
            self._send(
                MessageKind.QUBIT_TRANSFER, labels, "B_c", f"B_{i}",
                t, t + self.dist[i],
            )

    def _bc_route_committed(self, t: float) -> None:
        """Send the committed set (and claim) towards the verification site."""
        if self.params.variant is not Variant.ETBC:
            return
        if "B_c" not in self.claim_at or "B_c" not in self.handed_at:
            return
        claim = self.claim_at["B_c"]
        verifier = self._verifier_name(claim)
        if verifier == "B_c":
            return
        handed = self.handed_at.pop("B_c")
        labels = tuple(handed[j] for j in sorted(handed))
        d = spatial_distance(self._event("B_c", 0.0), self._event(verifier, 0.0))
        self._send(MessageKind.QUBIT_TRANSFER, labels, "B_c", verifier, t, t + d)
        self._send(MessageKind.CLASSICAL_BIT, claim, "B_c", verifier, t, t + d)

    def _bi_route_unveiled(self, agent: str, t: float) -> None:
        """Forward a freshly unveiled set per the verification policy."""
        if self.params.variant is not Variant.ETBC:
            return
        policy = self.params.verify_policy
        i = int(agent[-1])
        if policy is VerifyPolicy.AT_Q_B:
            return
        target = "B_c" if policy is VerifyPolicy.AT_P else f"B_m{i}"
        box = self.unveiled_at.pop(agent)
        for reg in sorted(box, key=lambda r: r.value):
            by_index = box[reg]
            labels = tuple(by_index[j] for j in sorted(by_index))
            d = spatial_distance(self._event(agent, 0.0), self._event(target, 0.0))
            self._send(MessageKind.QUBIT_TRANSFER, labels, agent, target, t, t + d)

    # -- verification ---------------------------------------------------------

    def _try_verify(self, agent: str, t: float) -> None:
        if self.params.variant is Variant.ETRBC:
            if agent in ("B_0", "B_1"):
                self._try_verify_local(agent, t)
            return
        if self.verified:
            return
        claim = self.claim_at.get(agent)
        if claim is None or agent != self._verifier_name(claim):
            return
        handed = self.handed_at.get(agent)
        unveiled = self.unveiled_at.get(agent, {}).get(_unveil_register(claim))
        if not handed or not unveiled:
            return
        want = sorted(handed)
        if any(j not in unveiled for j in want):
            return
        pairs = [(handed[j], unveiled[j]) for j in want]
        self._measure(agent, t, claim, pairs)
        self.verified = True

    def _try_verify_local(self, agent: str, t: float) -> None:
        i = int(agent[-1])
        if i in self.results:
            return
        handed = self.handed_at.get(agent)
        unveiled = self.unveiled_at.get(agent, {}).get(_unveil_register(i))
        subset = self.subset_at.get(agent)
        if not handed or not unveiled or subset is None:
            return
        if any(j not in unveiled for j in subset):
            return
        pairs = [(handed[j], unveiled[j]) for j in sorted(subset)]
        self._measure(agent, t, i, pairs)

    def _measure(self, agent: str, t: float, claim: int,
                 pairs: list[tuple[QubitLabel, QubitLabel]]) -> None:
        for a, b in pairs:
            self.sim.require_custody(agent, (a, b))
        event = self._event(agent, t)
        result = verify_commitment(
            self.state, pairs, claim, self.params.epsilon, self.rng,
            self.noise.loss_l,
        )
        for (a, b), out in zip(pairs, result.outcomes):
            self.transcript.records.append(
                MeasurementRecord(t, agent, event, (a, b), out)
            )
        self.results[claim] = result

    # -- driving --------------------------------------------------------------

    def execute(self) -> Transcript:
        self.setup()
        seq = 0
        while (msg := self.sim.step()) is not None:
            self.transcript.records.append(
                MessageRecord(seq, msg.receive_event.t, msg.kind.value, msg)
            )
            seq += 1
            self.handle(msg)
        self.transcript.verdict = self._verdict()
        return self.transcript

    def _verdict(self) -> Verdict:
        if not self.results:
            return Verdict(VerdictKind.NO_UNVEIL)
        a0 = self.results[0].accepted if 0 in self.results else None
        a1 = self.results[1].accepted if 1 in self.results else None
        if self.params.variant is Variant.ETBC:
            res = self.results[self.claim]
            kind = VerdictKind.ACCEPT if res.accepted else VerdictKind.REJECT
            return Verdict(
                kind, self.claim if res.accepted else None, self.claim,
                res.n_tests, res.n_pass, a0, a1,
            )
        if self.claim is not None and self.params.send_claim:
            res = self.results[self.claim]
            kind = VerdictKind.ACCEPT if res.accepted else VerdictKind.REJECT
            return Verdict(
                kind, self.claim if res.accepted else None, self.claim,
                res.n_tests, res.n_pass, a0, a1,
            )
        # no announcement: exactly one local acceptance identifies the bit
        accepted = [i for i in (0, 1) if self.results.get(i) and self.results[i].accepted]
        if len(accepted) == 1:
            b = accepted[0]
            res = self.results[b]
            return Verdict(VerdictKind.ACCEPT, b, None, res.n_tests, res.n_pass, a0, a1)
        return Verdict(VerdictKind.REJECT, None, None, None, None, a0, a1)


def run_protocol(
    params: ProtocolParams,
    strategy: AliceStrategy,
    noise: NoiseParams = NO_NOISE,
) -> Transcript:
    """Execute one full protocol run and return its transcript.

    Honest strategies with zero noise and epsilon = 0 end in ACCEPT of the
    committed bit; causality or custody violations raise, they are never
    silently recorded.
    """
    return _Run(params, strategy, noise).execute()


def rep_seed(base_seed: int, rep: int) -> int:
    """Documented per-repetition stream: spawn key (rep,) off the base seed."""
    ss = np.random.SeedSequence(entropy=base_seed, spawn_key=(rep,))
    return int(ss.generate_state(1, np.uint64)[0])


def iter_runs(
    params: ProtocolParams,
    strategy: AliceStrategy,
    noise: NoiseParams,
    repetitions: int,
    base_seed: int | None = None,
) -> Iterator[Transcript]:
    """Seeded repetitions; repetition i runs with rep_seed(base, i)."""
    if repetitions < 1:
        raise ValueError("repetitions must be >= 1")
    base = params.seed if base_seed is None else base_seed
    for rep in range(repetitions):
        p = ProtocolParams(
            params.n, params.variant, params.epsilon, params.geometry,
            rep_seed(base, rep), params.verify_policy, params.claim_sender,
            params.send_claim,
        )
        yield run_protocol(p, strategy, noise)


# -- transcript serialisation -------------------------------------------------


def _fmt(x: float) -> str:
    return format(float(x), ".12g")


def _event_json(e: Event) -> str:
    return "[" + ",".join(_fmt(c) for c in e.coords()) + "]"


def _digest(text: str) -> str:
    return hashlib.sha256(text.encode()).hexdigest()[:16]


def transcript_lines(transcript: Transcript, rep: int | None = None) -> list[str]:
    """Line-delimited records: one message or measurement per line, verdict trailer.

    Every float prints with 12 significant digits so identical runs produce
    byte-identical files.
    """
    prefix = "" if rep is None else f'"rep":{rep},'
    lines: list[str] = []
    for i, rec in enumerate(transcript.records):
        if isinstance(rec, MessageRecord):
            m = rec.message
            payload = m.payload_text()
            lines.append(
                "{" + prefix + f'"i":{i},"time":{_fmt(rec.time)},'
                f'"kind":"{m.kind.value}","sender":"{m.sender}",'
                f'"receiver":"{m.receiver}","send":{_event_json(m.send_event)},'
                f'"recv":{_event_json(m.receive_event)},"payload":"{payload}",'
                f'"digest":"{_digest(payload)}"' + "}"
            )
        else:
            out = "LOST" if rec.outcome is None else rec.outcome.name
            pair = f"{rec.pair[0]}|{rec.pair[1]}"
            lines.append(
                "{" + prefix + f'"i":{i},"time":{_fmt(rec.time)},'
                f'"kind":"BELL_MEASUREMENT","agent":"{rec.agent}",'
                f'"event":{_event_json(rec.event)},"pair":"{pair}",'
                f'"outcome":"{out}"' + "}"
            )
    v = transcript.verdict
    if v is not None:
        def opt(x):
            if x is None:
                return "null"
            if isinstance(x, bool):
                return "true" if x else "false"
            return str(x)

        lines.append(
            "{" + prefix + f'"kind":"VERDICT","verdict":"{v.kind.value}",'
            f'"bit":{opt(v.bit)},"claim":{opt(v.claim)},"tests":{opt(v.n_tests)},'
            f'"passes":{opt(v.n_pass)},"accept0":{opt(v.accept_0)},'
            f'"accept1":{opt(v.accept_1)}' + "}"
        )
    return lines
