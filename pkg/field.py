"""
Prime-field arithmetic GF(q).

Field elements are plain integers in [0, q) wherever performance matters
(coding vectors are numpy int64 arrays reduced mod q). FieldElem wraps a
single value bound to its FieldSpec for the scalar API.
"""

from __future__ import annotations

import math
import numbers
from dataclasses import dataclass

from errors import UsageError

# q * q must fit in a signed 64-bit integer so numpy products never overflow
MAX_MODULUS = math.isqrt(2**63 - 1)

OPERATIONS = ("add", "sub", "mul")


def is_prime(m):
    """Trial division; fine for word-sized moduli."""
    if m < 2:
        return False
    if m % 2 == 0:
        return m == 2
    for d in range(3, math.isqrt(m) + 1, 2):
        if m % d == 0:
            return False
    return True


def smallest_prime_geq(m):
    """Least prime q with q >= max(m, 2)."""
    if m < 1:
        raise UsageError(f"smallest_prime_geq needs m >= 1, got {m}")
    q = max(m, 2)
    while not is_prime(q):
        q += 1
    return q


@dataclass(frozen=True)
class FieldSpec:
    q: int

    def __post_init__(self):
        if not isinstance(self.q, numbers.Integral) or isinstance(self.q, bool):
            raise UsageError(f"Field modulus must be an integer, got {self.q!r}")
        object.__setattr__(self, "q", int(self.q))
        if self.q > MAX_MODULUS:
            raise UsageError(f"Field modulus {self.q} is too large (max {MAX_MODULUS})")
        if not is_prime(self.q):
            raise UsageError(f"Field modulus {self.q} is not prime")

    def __call__(self, value):
        return FieldElem(value % self.q, self)

    def inv(self, a):
        """Inverse of an integer representative. Raises ZeroDivisionError for 0."""
        a %= self.q
        if a == 0:
            raise ZeroDivisionError(f"0 has no inverse in GF({self.q})")
        return pow(a, -1, self.q)

    def elements(self):
        return [FieldElem(v, self) for v in range(self.q)]

    def __str__(self):
        return f"GF({self.q})"


@dataclass(frozen=True)
class FieldElem:
    value: int
    field: FieldSpec

    def __post_init__(self):
        if not 0 <= self.value < self.field.q:
            raise UsageError(f"{self.value} is not a residue of {self.field}")

    def __add__(self, other):
        return arith(self, other, "add")

    def __sub__(self, other):
        return arith(self, other, "sub")

    def __mul__(self, other):
        return arith(self, other, "mul")

    def __truediv__(self, other):
        return arith(self, inverse(other), "mul")

    def __neg__(self):
        return FieldElem((-self.value) % self.field.q, self.field)

    def __int__(self):
        return self.value

    def __repr__(self):
        return f"{self.value} (mod {self.field.q})"


def arith(a, b, op):
    """Add, subtract or multiply two elements of the same field."""
    if a.field != b.field:
        raise UsageError(f"Cannot combine elements of {a.field} and {b.field}")
    q = a.field.q
    if op == "add":
        value = (a.value + b.value) % q
    elif op == "sub":
        value = (a.value - b.value) % q
    elif op == "mul":
        value = (a.value * b.value) % q
    else:
        raise UsageError(f"Unknown field operation {op!r}; expected one of {OPERATIONS}")
    return FieldElem(value, a.field)


def inverse(a):
    return FieldElem(a.field.inv(a.value), a.field)
