"""
Problem instances: n packets, k clients, and the packet set X_i each client holds.

Packet and client indices are 0-based here; the JSON document uses 1-based
indices to match x_1..x_n and c_1..c_k.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from typing import Dict, FrozenSet, Tuple

import numpy as np

from errors import ParseError, UsageError

logger = logging.getLogger(__name__)

DEFAULT_DENSITY = 0.5


@dataclass(frozen=True)
class Instance:
    n: int
    holdings: Tuple[FrozenSet[int], ...]

    def __post_init__(self):
        object.__setattr__(self, "holdings", tuple(frozenset(h) for h in self.holdings))

    @classmethod
    def from_lists(cls, n, clients):
        return cls(n, tuple(frozenset(c) for c in clients))

    @property
    def k(self):
        return len(self.holdings)

    @property
    def universe(self):
        return frozenset(range(self.n))

    @property
    def sizes(self):
        return [len(h) for h in self.holdings]

    @property
    def n_min(self):
        return min(self.sizes) if self.holdings else 0

    @property
    def n_max(self):
        return max(self.sizes) if self.holdings else 0

    @property
    def complements(self):
        universe = self.universe
        return tuple(universe - h for h in self.holdings)

    def holders(self, packet):
        return [i for i, h in enumerate(self.holdings) if packet in h]

    def __str__(self):
        clients = ", ".join("{" + ",".join(f"x{l + 1}" for l in sorted(h)) + "}" for h in self.holdings)
        return f"Instance(n={self.n}, k={self.k}: {clients})"


@dataclass(frozen=True)
class InstanceStats:
    n_min: int
    n_max: int
    complements: Tuple[FrozenSet[int], ...]


@dataclass(frozen=True)
class NormalizedInstance:
    unique_count: int
    reduced: Instance
    # reduced packet index -> original packet index
    index_map: Dict[int, int]
    # original index of each unique packet -> the client holding it
    unique_owners: Dict[int, int]


# ─── VALIDATION ──────────────────────────────────────────────────────

def validate(inst):
    """List every invariant violation as a dict; an empty list means ok."""
    violations = []
    if inst.n < 1:
        violations.append({
            "category": "empty_universe",
            "client": None,
            "packet": None,
            "detail": f"Instance has n={inst.n}; at least one packet is required.",
        })
    if inst.k < 1:
        violations.append({
            "category": "no_clients",
            "client": None,
            "packet": None,
            "detail": "Instance has no clients.",
        })
    for i, held in enumerate(inst.holdings):
        for l in sorted(held):
            if not 0 <= l < inst.n:
                violations.append({
                    "category": "index_out_of_range",
                    "client": i,
                    "packet": l,
                    "detail": f"Client c{i + 1} holds packet index {l + 1}, outside 1..{inst.n}.",
                })
    covered = frozenset().union(*inst.holdings) if inst.holdings else frozenset()
    for l in sorted(inst.universe - covered):
        violations.append({
            "category": "coverage",
            "client": None,
            "packet": l,
            "detail": f"Packet x{l + 1} is held by no client.",
        })
    return violations


def check(inst):
    """Raise UsageError unless inst is valid; an empty universe is tolerated."""
    problems = [v for v in validate(inst) if v["category"] != "empty_universe"]
    if problems:
        details = "; ".join(v["detail"] for v in problems)
        raise UsageError(f"Invalid instance: {details}")
    return inst


def stats(inst):
    return InstanceStats(inst.n_min, inst.n_max, inst.complements)


# ─── UNIQUE PACKETS ──────────────────────────────────────────────────

def unique_packets(inst):
    """Map each packet held by exactly one client to that client."""
    owners = {}
    for l in range(inst.n):
        holders = inst.holders(l)
        if len(holders) == 1:
            owners[l] = holders[0]
    return owners


def normalize_unique(inst):
    """Broadcast unique packets uncoded up front and drop them from the universe."""
    check(inst)
    owners = unique_packets(inst)
    surviving = [l for l in range(inst.n) if l not in owners]
    renumber = {old: new for new, old in enumerate(surviving)}
    reduced = Instance(
        len(surviving),
        tuple(frozenset(renumber[l] for l in held if l in renumber) for held in inst.holdings),
    )
    if owners:
        logger.debug(f"Normalized {len(owners)} unique packets away: n {inst.n} -> {reduced.n}")
    return NormalizedInstance(
        unique_count=len(owners),
        reduced=reduced,
        index_map={new: old for old, new in renumber.items()},
        unique_owners=owners,
    )


# ─── GENERATION ──────────────────────────────────────────────────────

def random_instance(n, k, density=DEFAULT_DENSITY, seed=None):
    """Independent Bernoulli(density) membership, then repair uncovered packets.

    Each packet nobody holds goes to one uniformly chosen client. The same
    (n, k, density, seed) always yields the same instance.
    """
    if n < 1 or k < 1:
        raise UsageError(f"random_instance needs n >= 1 and k >= 1, got n={n}, k={k}")
    if not 0 < density <= 1:
        raise UsageError(f"Density must lie in (0, 1], got {density}")
    rng = np.random.default_rng(seed)
    membership = rng.random((k, n)) < density
    for l in np.flatnonzero(~membership.any(axis=0)):
        membership[rng.integers(k), l] = True
    return Instance(n, tuple(frozenset(int(l) for l in np.flatnonzero(row)) for row in membership))


# ─── SERIALIZATION ───────────────────────────────────────────────────

def to_document(inst):
    return {"n": inst.n, "clients": [[l + 1 for l in sorted(h)] for h in inst.holdings]}


def serialize(inst):
    return json.dumps(to_document(inst)) + "\n"


def from_document(doc):
    if not isinstance(doc, dict):
        raise ParseError("Instance document must be a JSON object", "$")
    if "n" not in doc:
        raise ParseError("Missing key 'n'", "$")
    if "clients" not in doc:
        raise ParseError("Missing key 'clients'", "$")
    n = doc["n"]
    if not isinstance(n, int) or isinstance(n, bool) or n < 1:
        raise ParseError(f"'n' must be a positive integer, got {n!r}", "n")
    clients = doc["clients"]
    if not isinstance(clients, list) or not clients:
        raise ParseError("'clients' must be a non-empty list", "clients")

    holdings = []
    for i, held in enumerate(clients):
        if not isinstance(held, list):
            raise ParseError("Each client must be a list of packet indices", f"clients[{i}]")
        packets = set()
        for j, l in enumerate(held):
            if not isinstance(l, int) or isinstance(l, bool) or not 1 <= l <= n:
                raise ParseError(f"Packet index must be an integer in 1..{n}, got {l!r}", f"clients[{i}][{j}]")
            packets.add(l - 1)
        holdings.append(frozenset(packets))

    inst = Instance(n, tuple(holdings))
    violations = validate(inst)
    if violations:
        raise ParseError(violations[0]["detail"], "clients")
    return inst


def parse(text):
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise ParseError(f"Invalid JSON: {e.msg}", f"line {e.lineno} column {e.colno}")
    return from_document(doc)
