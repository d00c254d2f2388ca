"""
Transmission schemes for cooperative data exchange.

Every scheme returns a Schedule: an ordered list of (sender, coding vector)
broadcasts that verify_schedule can replay and simulate_payloads can decode.

- ie:       greedy information exchange; the client with the largest
            knowledge subspace sends a vector new to everyone else.
- leader:   make one client whole with uncoded sends, then let it serve the rest.
- random:   clients take turns in a given order, each covering what its
            predecessors left open.
- uncoded:  every missing packet sent once, in the clear.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field as dc_field
from fractions import Fraction
from typing import List, Tuple

import numpy as np

from bounds import leader_cost, upper_bound_leader
from errors import (CapacityError, FieldSizeError, ParseError, UsageError)
from field import FieldSpec
from instance import check
from linalg import (Subspace, coding_vector, coordinate_subspace, dot,
                    find_avoiding_vector, solve_packets, unit_vector)

logger = logging.getLogger(__name__)

# 2^9 prefix sets stand in for 9! = 362,880 orderings
EXACT_ENUMERATION_CAP = 9

# "ordering" runners also take a client ordering
SCHEME_TYPES = {
    "ie": {
        "label": "Algorithm IE",
        "runner": "run_ie",
        "command": "ie",
        "ordering": False,
        "description": "Largest-subspace client sends a vector innovative for every other client.",
    },
    "leader": {
        "label": "Two-phase leader",
        "runner": "run_leader",
        "command": "leader",
        "ordering": False,
        "description": "Uncoded sends complete one leader, which then serves everyone with coded sends.",
    },
    "random": {
        "label": "Random ordering",
        "runner": "random_schedule",
        "command": "random-order",
        "ordering": True,
        "description": "Clients take turns in a fixed order, each covering packets no predecessor held.",
    },
    "uncoded": {
        "label": "Uncoded",
        "runner": "run_uncoded",
        "command": "uncoded",
        "ordering": False,
        "description": "Each packet somebody lacks is broadcast once by its lowest-index holder.",
    },
}


def get_scheme_info(tag):
    return SCHEME_TYPES.get(tag)


# ─── TYPES ───────────────────────────────────────────────────────────

@dataclass(frozen=True, eq=False)
class Transmission:
    round: int
    sender: int
    vector: np.ndarray

    def to_dict(self):
        return {"round": self.round, "sender": self.sender + 1, "vector": [int(v) for v in self.vector]}


@dataclass(frozen=True, eq=False)
class Schedule:
    transmissions: Tuple[Transmission, ...]
    field: FieldSpec
    scheme: str

    @property
    def total(self):
        return len(self.transmissions)

    def to_document(self):
        return {
            "scheme": self.scheme,
            "field_q": self.field.q,
            "total": self.total,
            "transmissions": [t.to_dict() for t in self.transmissions],
        }


@dataclass(frozen=True)
class MergeEvent:
    round: int
    survivor: int
    removed: int


@dataclass(frozen=True)
class IERound:
    round: int
    active: Tuple[int, ...]
    dims_before: Tuple[int, ...]
    dims_after: Tuple[int, ...]
    sender: int
    grew_global: bool


@dataclass
class IETranscript:
    rounds: List[IERound] = dc_field(default_factory=list)
    merges: List[MergeEvent] = dc_field(default_factory=list)


@dataclass(frozen=True)
class RandomOrderResult:
    ordering: Tuple[int, ...]
    per_step: Tuple[int, ...]
    total: int


@dataclass(frozen=True)
class MonteCarloEstimate:
    estimate: float
    stderr: float
    samples: int
    totals: Tuple[int, ...]


@dataclass(frozen=True)
class ClientStatus:
    client: int
    final_dim: int
    satisfied: bool


@dataclass(frozen=True)
class VerificationReport:
    clients: Tuple[ClientStatus, ...]
    legal: bool
    illegal_rounds: Tuple[int, ...]
    sender_counts: Tuple[int, ...]
    non_innovative_rounds: Tuple[int, ...]

    @property
    def all_satisfied(self):
        return all(c.satisfied for c in self.clients)

    @property
    def ok(self):
        return self.legal and self.all_satisfied

    def to_dict(self):
        return {
            "ok": self.ok,
            "legal": self.legal,
            "all_satisfied": self.all_satisfied,
            "illegal_rounds": list(self.illegal_rounds),
            "non_innovative_rounds": list(self.non_innovative_rounds),
            "sender_counts": list(self.sender_counts),
            "clients": [
                {"client": c.client + 1, "final_dim": c.final_dim, "satisfied": c.satisfied}
                for c in self.clients
            ],
        }


@dataclass(frozen=True)
class SimulationResult:
    truth: Tuple[int, ...]
    decoded: Tuple[Tuple[int, ...], ...]

    @property
    def all_decoded(self):
        return all(d == self.truth for d in self.decoded)

    def to_dict(self):
        return {
            "all_decoded": self.all_decoded,
            "truth": list(self.truth),
            "clients": [
                {"client": i + 1, "decoded": list(d), "correct": d == self.truth}
                for i, d in enumerate(self.decoded)
            ],
        }


# ─── HELPERS ─────────────────────────────────────────────────────────

def _require_field(inst, field):
    if field.q < inst.k:
        raise FieldSizeError(f"{field} has fewer than k={inst.k} elements")


def initial_spaces(inst, field):
    return [coordinate_subspace(held, inst.n, field) for held in inst.holdings]


def _broadcast(spaces, vec):
    """Add vec to every subspace; returns which ones grew."""
    grew = []
    for i, space in enumerate(spaces):
        spaces[i], g = space.insert(vec)
        grew.append(g)
    return grew


def _check_ordering(inst, ordering):
    ordering = tuple(int(c) for c in ordering)
    if sorted(ordering) != list(range(inst.k)):
        raise UsageError(f"Ordering {ordering} is not a permutation of the {inst.k} clients")
    return ordering


# ─── ALGORITHM IE ────────────────────────────────────────────────────

def run_ie(inst, field):
    """Run the greedy information-exchange algorithm; returns (Schedule, IETranscript)."""
    check(inst)
    _require_field(inst, field)
    n = inst.n
    spaces = initial_spaces(inst, field)
    broadcast_span = Subspace.zero(n, field)
    active = list(range(inst.k))
    transcript = IETranscript()
    transmissions = []

    while any(s.dim < n for s in spaces):
        rnd = len(transmissions) + 1

        # Equal subspaces stay equal from here on; keep the lowest index
        survivors = []
        for i in active:
            twin = next((s for s in survivors if spaces[s].equals(spaces[i])), None)
            if twin is None:
                survivors.append(i)
            else:
                transcript.merges.append(MergeEvent(rnd, twin, i))
                logger.debug(f"IE round {rnd}: merged c{i + 1} into c{twin + 1}")
        active = survivors

        sender = max(active, key=lambda i: (spaces[i].dim, -i))
        obstacles = [spaces[j] for j in active if j != sender]
        b = find_avoiding_vector(spaces[sender], obstacles)

        dims_before = tuple(s.dim for s in spaces)
        _broadcast(spaces, b)
        broadcast_span, grew_global = broadcast_span.insert(b)
        transmissions.append(Transmission(rnd, sender, b))
        transcript.rounds.append(IERound(
            round=rnd,
            active=tuple(active),
            dims_before=dims_before,
            dims_after=tuple(s.dim for s in spaces),
            sender=sender,
            grew_global=grew_global,
        ))
        logger.debug(f"IE round {rnd}: c{sender + 1} sends {b.tolist()}")

    logger.info(f"Algorithm IE: {len(transmissions)} transmissions over {field} (n={n}, k={inst.k})")
    return Schedule(tuple(transmissions), field, "ie"), transcript


# ─── LEADER SCHEME ───────────────────────────────────────────────────

def run_leader(inst, field, leader=None):
    """Phase 1 completes the leader uncoded; phase 2 has the leader serve the rest."""
    check(inst)
    _require_field(inst, field)
    if leader is None:
        _, leader = upper_bound_leader(inst)
    if not 0 <= leader < inst.k:
        raise UsageError(f"Leader index {leader + 1} is not one of the {inst.k} clients")

    n = inst.n
    spaces = initial_spaces(inst, field)
    transmissions = []

    for l in sorted(inst.complements[leader]):
        sender = inst.holders(l)[0]
        vec = unit_vector(l, n, field)
        _broadcast(spaces, vec)
        transmissions.append(Transmission(len(transmissions) + 1, sender, vec))
    phase_one = len(transmissions)

    leader_space = spaces[leader]
    while True:
        deficient = [spaces[j] for j in range(inst.k) if j != leader and spaces[j].dim < n]
        if not deficient:
            break
        b = find_avoiding_vector(leader_space, deficient)
        _broadcast(spaces, b)
        transmissions.append(Transmission(len(transmissions) + 1, leader, b))

    logger.info(
        f"Leader scheme (c{leader + 1}): {phase_one} uncoded + {len(transmissions) - phase_one} coded "
        f"= {len(transmissions)} (bound {leader_cost(inst, leader)})"
    )
    return Schedule(tuple(transmissions), field, "leader")


# ─── UNCODED BASELINE ────────────────────────────────────────────────

def run_uncoded(inst, field=None):
    """Send every packet somebody lacks once, from its lowest-index holder."""
    check(inst)
    field = field or FieldSpec(2)
    transmissions = []
    for l in range(inst.n):
        holders = inst.holders(l)
        if len(holders) == inst.k:
            continue
        transmissions.append(Transmission(len(transmissions) + 1, holders[0], unit_vector(l, inst.n, field)))
    return Schedule(tuple(transmissions), field, "uncoded")


# ─── RANDOM ORDERING ─────────────────────────────────────────────────

def _step_counts(holdings, complements, ordering):
    covered = frozenset()
    per_step = []
    for c in ordering:
        fresh = holdings[c] - covered
        others = [len(fresh & (complements[i] - covered)) for i in range(len(holdings)) if i != c]
        per_step.append(max(others, default=0))
        covered |= holdings[c]
    return per_step


def random_tau(inst, ordering):
    """Per-step and total transmission counts for one client ordering.

    The prefix union covers the clients that came earlier in the ordering,
    not the lowest original labels.
    """
    check(inst)
    ordering = _check_ordering(inst, ordering)
    per_step = _step_counts(inst.holdings, inst.complements, ordering)
    return RandomOrderResult(ordering, tuple(per_step), sum(per_step))


def _popcount(mask):
    return bin(mask).count("1")


def random_average_exact(inst):
    """Exact mean of random_tau over all k! orderings, as a Fraction.

    A step's count depends only on which clients came before, so the sum
    runs over prefix sets S: each (S, c) pair occurs in |S|!(k-|S|-1)!
    orderings.
    """
    check(inst)
    k = inst.k
    if k > EXACT_ENUMERATION_CAP:
        raise CapacityError(
            f"k={k} exceeds the exact-enumeration cap of {EXACT_ENUMERATION_CAP}; "
            f"use random_average_mc instead"
        )
    masks = [sum(1 << l for l in held) for held in inst.holdings]
    everything = (1 << inst.n) - 1

    # covered[S]: packets held by some client in S
    covered = [0] * (1 << k)
    for s in range(1, 1 << k):
        low = (s & -s).bit_length() - 1
        covered[s] = covered[s & (s - 1)] | masks[low]

    total = 0
    # the full set has no client left to step
    for s in range((1 << k) - 1):
        size = _popcount(s)
        weight = math.factorial(size) * math.factorial(k - size - 1)
        still_open = everything & ~covered[s]
        for c in range(k):
            if s >> c & 1:
                continue
            fresh = masks[c] & still_open
            if fresh:
                total += weight * max((_popcount(fresh & ~masks[i]) for i in range(k) if i != c), default=0)
    return Fraction(total, math.factorial(k))


def random_average_mc(inst, samples, seed=None):
    """Monte Carlo estimate of the average over uniformly drawn orderings.

    seed may be an int or a numpy SeedSequence.
    """
    check(inst)
    if samples < 2:
        raise UsageError(f"Monte Carlo needs at least 2 samples, got {samples}")
    rng = np.random.default_rng(seed)
    holdings, complements = inst.holdings, inst.complements
    totals = np.array([sum(_step_counts(holdings, complements, rng.permutation(inst.k))) for _ in range(samples)])
    stderr = float(totals.std(ddof=1) / math.sqrt(samples))
    return MonteCarloEstimate(float(totals.mean()), stderr, samples, tuple(int(t) for t in totals))


def random_schedule(inst, ordering, field):
    """Coded realisation of the random-ordering scheme for one ordering."""
    check(inst)
    _require_field(inst, field)
    ordering = _check_ordering(inst, ordering)
    n = inst.n
    spaces = initial_spaces(inst, field)
    transmissions = []
    covered = frozenset()
    for c in ordering:
        fresh = inst.holdings[c] - covered
        covered |= inst.holdings[c]
        if not fresh:
            continue
        source = coordinate_subspace(fresh, n, field)
        while True:
            obstacles = [s for s in spaces if not source.issubspace(s)]
            if not obstacles:
                break
            b = find_avoiding_vector(source, obstacles)
            _broadcast(spaces, b)
            transmissions.append(Transmission(len(transmissions) + 1, c, b))
    return Schedule(tuple(transmissions), field, "random")


# ─── VERIFICATION & SIMULATION ───────────────────────────────────────

def verify_schedule(inst, schedule):
    """Replay a schedule, checking sender legality and final ranks."""
    n = inst.n
    field = schedule.field
    spaces = initial_spaces(inst, field)
    illegal = []
    idle = []
    sender_counts = [0] * inst.k
    for t in schedule.transmissions:
        vec = np.asarray(t.vector, dtype=np.int64) % field.q
        if vec.shape != (n,):
            raise UsageError(f"Transmission {t.round} has a vector of length {vec.shape[0]}, expected {n}")
        if not 0 <= t.sender < inst.k:
            raise UsageError(f"Transmission {t.round} names sender c{t.sender + 1}, but k={inst.k}")
        sender_counts[t.sender] += 1
        if not vec.any() or not spaces[t.sender].contains(vec):
            illegal.append(t.round)
        grew = _broadcast(spaces, vec)
        if not any(grew):
            idle.append(t.round)
    clients = tuple(ClientStatus(i, s.dim, s.dim == n) for i, s in enumerate(spaces))
    return VerificationReport(
        clients=clients,
        legal=not illegal,
        illegal_rounds=tuple(illegal),
        sender_counts=tuple(sender_counts),
        non_innovative_rounds=tuple(idle),
    )


def simulate_payloads(inst, schedule, seed=None):
    """Send random payloads through the schedule and decode them at every client."""
    field = schedule.field
    n = inst.n
    rng = np.random.default_rng(seed)
    truth = rng.integers(0, field.q, size=n, dtype=np.int64)
    received = [(t.vector, dot(t.vector, truth, field)) for t in schedule.transmissions]
    decoded = []
    for held in inst.holdings:
        rows = [(unit_vector(l, n, field), int(truth[l])) for l in sorted(held)] + received
        decoded.append(tuple(solve_packets(rows, field, n)))
    return SimulationResult(tuple(int(x) for x in truth), tuple(decoded))


# ─── DOCUMENTS ───────────────────────────────────────────────────────

def schedule_from_document(doc, n=None):
    if not isinstance(doc, dict):
        raise ParseError("Schedule document must be a JSON object", "$")
    for key in ("field_q", "transmissions"):
        if key not in doc:
            raise ParseError(f"Missing key '{key}'", "$")
    scheme = doc.get("scheme", "custom")
    try:
        field = FieldSpec(doc["field_q"])
    except UsageError as e:
        raise ParseError(str(e), "field_q")
    if not isinstance(doc["transmissions"], list):
        raise ParseError("'transmissions' must be a list", "transmissions")

    transmissions = []
    for idx, t in enumerate(doc["transmissions"]):
        where = f"transmissions[{idx}]"
        if not isinstance(t, dict) or "sender" not in t or "vector" not in t:
            raise ParseError("Each transmission needs 'sender' and 'vector'", where)
        sender = t["sender"]
        if not isinstance(sender, int) or isinstance(sender, bool) or sender < 1:
            raise ParseError(f"Sender must be a positive integer, got {sender!r}", f"{where}.sender")
        values = t["vector"]
        if not isinstance(values, list) or not all(isinstance(v, int) and not isinstance(v, bool) for v in values):
            raise ParseError("Vector must be a list of integers", f"{where}.vector")
        if n is not None and len(values) != n:
            raise ParseError(f"Vector has length {len(values)}, expected {n}", f"{where}.vector")
        bad = [v for v in values if not 0 <= v < field.q]
        if bad:
            raise ParseError(f"Vector entries must lie in [0, {field.q}), got {bad[0]}", f"{where}.vector")
        transmissions.append(Transmission(t.get("round", idx + 1), sender - 1, coding_vector(values, field)))

    if "total" in doc and doc["total"] != len(transmissions):
        raise ParseError(f"'total' is {doc['total']} but {len(transmissions)} transmissions are listed", "total")
    return Schedule(tuple(transmissions), field, scheme)


def make_schedule(rows, field, scheme="custom"):
    """Build a Schedule from (sender, vector) pairs with 0-based senders."""
    return Schedule(
        tuple(Transmission(r + 1, sender, coding_vector(vec, field)) for r, (sender, vec) in enumerate(rows)),
        field,
        scheme,
    )
