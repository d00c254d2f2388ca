"""
Exact optimum by exhaustive search over coding matrices.

tau is the least t for which some t-row matrix A, each row supported on the
packets its sender holds, lifts every client's side information to rank n.
The search deepens t from the lower bound and, within a depth, walks sender
multisets in non-decreasing order with one canonical representative per
scalar multiple of each row. Only desk-scale instances finish.
"""

from __future__ import annotations

import itertools
import logging
import os
from dataclasses import dataclass
from typing import Tuple

import numpy as np

from bounds import lower_bound, upper_bound_leader
from errors import CapacityError, UsageError
from field import FieldSpec
from instance import check
from linalg import Subspace, coordinate_subspace

logger = logging.getLogger(__name__)

DEFAULT_BUDGET = int(os.environ.get("CDE_ORACLE_BUDGET", 10_000_000))


@dataclass(frozen=True, eq=False)
class CodingMatrix:
    rows: Tuple[Tuple[int, np.ndarray], ...]
    field: FieldSpec

    @property
    def rank(self):
        n = self.rows[0][1].shape[0] if self.rows else 0
        return Subspace.span((v for _, v in self.rows), n, self.field).dim

    def to_rows(self):
        return [
            {"round": r + 1, "sender": sender + 1, "vector": [int(x) for x in vec]}
            for r, (sender, vec) in enumerate(self.rows)
        ]


@dataclass(frozen=True, eq=False)
class OracleResult:
    tau_star: int
    witness: CodingMatrix
    nodes_explored: int

    def to_document(self):
        return {
            "tau_star": self.tau_star,
            "field_q": self.witness.field.q,
            "witness": self.witness.to_rows(),
            "nodes": self.nodes_explored,
        }


def check_support(A, inst):
    for r, (sender, vec) in enumerate(A.rows):
        if not 0 <= sender < inst.k:
            raise UsageError(f"Row {r + 1} names sender c{sender + 1}, but k={inst.k}")
        vec = np.asarray(vec)
        if vec.shape != (inst.n,):
            raise UsageError(f"Row {r + 1} has length {vec.shape[0]}, expected {inst.n}")
        outside = [l for l in np.flatnonzero(vec % A.field.q) if l not in inst.holdings[sender]]
        if outside:
            raise UsageError(
                f"Row {r + 1} from c{sender + 1} uses packets it does not hold: "
                + ", ".join(f"x{l + 1}" for l in outside)
            )


def feasible(A, inst):
    """True iff rank([A; B_i]) = n for every client i."""
    check_support(A, inst)
    vectors = [v for _, v in A.rows]
    for held in inst.holdings:
        space = coordinate_subspace(held, inst.n, A.field)
        for v in vectors:
            space, _ = space.insert(v)
        if space.dim < inst.n:
            return False
    return True


def support_vectors(held, n, field):
    """Nonzero vectors supported on held whose leading nonzero entry is 1."""
    support = sorted(held)
    vectors = []
    for coeffs in itertools.product(range(field.q), repeat=len(support)):
        lead = next((c for c in coeffs if c), 0)
        if lead != 1:
            continue
        vec = np.zeros(n, dtype=np.int64)
        vec[support] = coeffs
        vectors.append(vec)
    return vectors


class _Search:
    def __init__(self, inst, field, budget):
        self.inst = inst
        self.field = field
        self.budget = budget
        self.nodes = 0
        self.candidates = [support_vectors(h, inst.n, field) for h in inst.holdings]
        self.caps = inst.sizes

    def run(self, t):
        inst = self.inst
        spaces = [coordinate_subspace(h, inst.n, self.field) for h in inst.holdings]
        return self._extend([], spaces, Subspace.zero(inst.n, self.field), 0, 0, [0] * inst.k, t)

    def _extend(self, rows, spaces, span, min_sender, min_vec, counts, t):
        n = self.inst.n
        remaining = t - len(rows)
        deficits = [n - s.dim for s in spaces]
        if max(deficits) == 0:
            return list(rows)
        if remaining == 0 or max(deficits) > remaining:
            return None
        # Clients that need every remaining row to be new to them
        tight = [i for i, d in enumerate(deficits) if d == remaining]

        for sender in range(min_sender, self.inst.k):
            if counts[sender] >= self.caps[sender] or sender in tight:
                continue
            start = min_vec if sender == min_sender else 0
            for vi in range(start, len(self.candidates[sender])):
                self.nodes += 1
                if self.nodes > self.budget:
                    raise CapacityError(f"Oracle budget of {self.budget} nodes exhausted at depth {t}")
                vec = self.candidates[sender][vi]
                new_span, grew = span.insert(vec)
                if not grew:
                    continue
                new_spaces = []
                gains = []
                for s in spaces:
                    s2, g = s.insert(vec)
                    new_spaces.append(s2)
                    gains.append(g)
                # A row nobody learns from could be dropped, so it never appears in an optimum
                if not any(gains) or not all(gains[i] for i in tight):
                    continue
                counts[sender] += 1
                found = self._extend(rows + [(sender, vec)], new_spaces, new_span, sender, vi + 1, counts, t)
                counts[sender] -= 1
                if found is not None:
                    return found
        return None


def optimal_tau(inst, field, budget=None):
    """Smallest number of linear transmissions over field, with a witness.

    Raises CapacityError carrying the (lower, upper_leader) bracket when the
    node budget runs out.
    """
    check(inst)
    budget = DEFAULT_BUDGET if budget is None else budget
    lower = lower_bound(inst)
    search = _Search(inst, field, budget)
    # n uncoded sends always suffice
    for t in range(lower, inst.n + 1):
        try:
            rows = search.run(t)
        except CapacityError as e:
            upper, _ = upper_bound_leader(inst)
            raise CapacityError(str(e), bracket=(lower, upper)) from e
        logger.debug(f"Oracle depth {t}: {search.nodes} nodes so far")
        if rows is not None:
            logger.info(f"Oracle: tau*={t} over {field} after {search.nodes} nodes")
            return OracleResult(t, CodingMatrix(tuple(rows), field), search.nodes)
    # unreachable: depth n always succeeds
    raise CapacityError(f"No feasible matrix found up to depth {inst.n}")
