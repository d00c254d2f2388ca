"""
Coding vectors and knowledge subspaces over GF(q).

A Subspace keeps its basis in reduced row-echelon form, so two subspaces are
equal exactly when their row arrays are equal. Vectors are numpy int64 arrays
with entries in [0, q); every operation returns new arrays and leaves its
inputs alone.
"""

from __future__ import annotations

import logging

import numpy as np

from errors import (CorruptionError, FieldSizeError, InfeasibleError,
                    UnderdeterminedError, UsageError)

logger = logging.getLogger(__name__)


def coding_vector(values, field, n=None):
    """Build a CodingVector (int64 array reduced mod q) from any int sequence."""
    vec = np.asarray(values, dtype=np.int64).reshape(-1) % field.q
    if n is not None and vec.shape[0] != n:
        raise UsageError(f"Coding vector has length {vec.shape[0]}, expected {n}")
    return vec


def unit_vector(index, n, field):
    vec = np.zeros(n, dtype=np.int64)
    vec[index] = 1
    return vec


def dot(u, v, field):
    """Inner product mod q, reducing each product before summing."""
    return int(((u * v) % field.q).sum() % field.q)


def _reduce(rows, pivots, vec, q):
    """Reduce vec against RREF rows; the result is zero iff vec is in their span."""
    vec = vec.copy()
    for row, p in zip(rows, pivots):
        c = vec[p]
        if c:
            vec = (vec - c * row) % q
    return vec


class Subspace:
    """Row-reduced basis of a subspace of GF(q)^n."""

    __slots__ = ("rows", "pivots", "n", "field")

    def __init__(self, rows, pivots, n, field):
        self.rows = rows
        self.pivots = tuple(pivots)
        self.n = n
        self.field = field

    @classmethod
    def zero(cls, n, field):
        return cls(np.zeros((0, n), dtype=np.int64), (), n, field)

    @classmethod
    def full(cls, n, field):
        return cls(np.eye(n, dtype=np.int64), range(n), n, field)

    @classmethod
    def span(cls, vectors, n, field):
        space = cls.zero(n, field)
        for v in vectors:
            space, _ = space.insert(v)
        return space

    @property
    def dim(self):
        return len(self.pivots)

    @property
    def is_full(self):
        return self.dim == self.n

    def _check(self, vec):
        if vec.shape != (self.n,):
            raise UsageError(f"Vector of shape {vec.shape} does not live in GF({self.field.q})^{self.n}")

    def _check_space(self, other):
        if other.n != self.n or other.field != self.field:
            raise UsageError(
                f"Subspaces of GF({self.field.q})^{self.n} and GF({other.field.q})^{other.n} cannot be compared"
            )

    def contains(self, vec):
        vec = np.asarray(vec, dtype=np.int64) % self.field.q
        self._check(vec)
        return not _reduce(self.rows, self.pivots, vec, self.field.q).any()

    def insert(self, vec):
        """Return (span(self + vec), grew)."""
        q = self.field.q
        vec = np.asarray(vec, dtype=np.int64) % q
        self._check(vec)
        residue = _reduce(self.rows, self.pivots, vec, q)
        nonzero = np.flatnonzero(residue)
        if nonzero.size == 0:
            return self, False

        pivot = int(nonzero[0])
        residue = (residue * self.field.inv(int(residue[pivot]))) % q
        # Clear the new pivot column from the existing rows
        rows = self.rows.copy()
        for i in range(rows.shape[0]):
            c = rows[i, pivot]
            if c:
                rows[i] = (rows[i] - c * residue) % q

        at = sum(1 for p in self.pivots if p < pivot)
        rows = np.insert(rows, at, residue, axis=0)
        pivots = self.pivots[:at] + (pivot,) + self.pivots[at:]
        return Subspace(rows, pivots, self.n, self.field), True

    def equals(self, other):
        self._check_space(other)
        return self.pivots == other.pivots and np.array_equal(self.rows, other.rows)

    def __eq__(self, other):
        if not isinstance(other, Subspace):
            return NotImplemented
        return (self.n == other.n and self.field == other.field
                and self.pivots == other.pivots and np.array_equal(self.rows, other.rows))

    def __hash__(self):
        return hash((self.n, self.field.q, self.pivots, self.rows.tobytes()))

    def issubspace(self, other):
        """True iff every basis row of self lies in other."""
        self._check_space(other)
        return all(other.contains(row) for row in self.rows)

    def __repr__(self):
        return f"Subspace(dim={self.dim}, n={self.n}, q={self.field.q}, pivots={self.pivots})"


def insert(space, vec):
    return space.insert(vec)


def contains(space, vec):
    return space.contains(vec)


def equals(space, other):
    return space.equals(other)


def dim(space):
    return space.dim


def coordinate_subspace(indices, n, field):
    """Span of the unit vectors e_l for l in indices (0-based)."""
    indices = sorted(set(indices))
    for l in indices:
        if not 0 <= l < n:
            raise UsageError(f"Packet index {l} is outside 0..{n - 1}")
    rows = np.zeros((len(indices), n), dtype=np.int64)
    for r, l in enumerate(indices):
        rows[r, l] = 1
    return Subspace(rows, indices, n, field)


def find_avoiding_vector(source, obstacles):
    """Pick b in source with b outside every obstacle.

    Deterministic greedy: start from the first basis row of source that the
    first obstacle misses, then for each later obstacle that swallows b, add
    the smallest multiple of a basis row of source that obstacle misses. Each
    earlier obstacle rules out at most one multiplier, so q >= len(obstacles) + 1
    always leaves a choice.
    """
    q = source.field.q
    for obstacle in obstacles:
        source._check_space(obstacle)
    if q < len(obstacles) + 1:
        raise FieldSizeError(
            f"GF({q}) is too small to avoid {len(obstacles)} subspaces (need q >= {len(obstacles) + 1})"
        )
    if source.dim == 0:
        raise InfeasibleError("The zero subspace has no nonzero vector to send")

    escapes = []
    for j, obstacle in enumerate(obstacles):
        w = next((row for row in source.rows if not obstacle.contains(row)), None)
        if w is None:
            raise InfeasibleError(f"Obstacle {j} contains the whole source subspace")
        escapes.append(w)

    if not obstacles:
        return source.rows[0].copy()

    b = escapes[0].copy()
    for j in range(1, len(obstacles)):
        if not obstacles[j].contains(b):
            continue
        w = escapes[j]
        for lam in range(q):
            candidate = (b + lam * w) % q
            if not any(o.contains(candidate) for o in obstacles[:j + 1]):
                b = candidate
                break
        else:
            # unreachable while q >= len(obstacles) + 1
            raise InfeasibleError(f"No multiplier in GF({q}) escapes obstacles 0..{j}")
    return b


def solve_packets(rows, field, n):
    """Decode x in GF(q)^n from (coding vector, payload) pairs.

    Raises UnderdeterminedError when the vectors do not span GF(q)^n and
    CorruptionError when the payloads are inconsistent.
    """
    q = field.q
    if n == 0:
        return []
    if not rows:
        raise UnderdeterminedError(f"No rows to decode {n} packets from")

    aug = np.zeros((len(rows), n + 1), dtype=np.int64)
    for i, (vec, payload) in enumerate(rows):
        vec = np.asarray(vec, dtype=np.int64) % q
        if vec.shape != (n,):
            raise UsageError(f"Row {i} has length {vec.shape[0]}, expected {n}")
        aug[i, :n] = vec
        aug[i, n] = int(payload) % q

    # Gauss-Jordan over the augmented matrix
    r = 0
    pivots = []
    for col in range(n + 1):
        candidates = np.flatnonzero(aug[r:, col]) if r < aug.shape[0] else []
        if len(candidates) == 0:
            continue
        pr = r + int(candidates[0])
        aug[[r, pr]] = aug[[pr, r]]
        aug[r] = (aug[r] * field.inv(int(aug[r, col]))) % q
        for i in range(aug.shape[0]):
            if i != r and aug[i, col]:
                aug[i] = (aug[i] - aug[i, col] * aug[r]) % q
        pivots.append(col)
        r += 1
        if r == aug.shape[0]:
            break

    if n in pivots:
        raise CorruptionError("Payloads are inconsistent with their coding vectors")
    if len(pivots) < n:
        raise UnderdeterminedError(f"Coding vectors have rank {len(pivots)} < {n}")
    return [int(aug[i, n]) for i in range(n)]
