"""Closed-form bounds on the minimum number of transmissions."""

from __future__ import annotations

from dataclasses import asdict, dataclass

from instance import check


@dataclass(frozen=True)
class BoundsReport:
    lower: int
    upper_leader: int
    ie_guarantee: int
    trivial: int
    best_leader: int

    def to_dict(self):
        doc = asdict(self)
        doc["best_leader"] = self.best_leader + 1
        return doc


def all_sizes_equal(inst):
    return len(set(inst.sizes)) <= 1


def lower_bound(inst):
    """n - n_min, plus one when every client holds the same number n_min < n."""
    check(inst)
    if inst.n == 0:
        return 0
    bound = inst.n - inst.n_min
    if all_sizes_equal(inst) and inst.n_min < inst.n:
        bound += 1
    return bound


def leader_cost(inst, leader):
    """|X̄_i| + max_j |X̄_j ∩ X_i| for leader i (j ranges over every client)."""
    complements = inst.complements
    held = inst.holdings[leader]
    return len(complements[leader]) + max(len(c & held) for c in complements)


def upper_bound_leader(inst):
    """Return (bound, best_leader); ties go to the lowest client index."""
    check(inst)
    costs = [leader_cost(inst, i) for i in range(inst.k)]
    best = min(range(inst.k), key=lambda i: (costs[i], i))
    return costs[best], best


def ie_guarantee(inst):
    check(inst)
    return min(inst.n, 2 * inst.n - inst.n_max - inst.n_min)


def bounds_report(inst):
    upper, best = upper_bound_leader(inst)
    return BoundsReport(
        lower=lower_bound(inst),
        upper_leader=upper,
        ie_guarantee=ie_guarantee(inst),
        trivial=inst.n,
        best_leader=best,
    )
