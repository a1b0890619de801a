"""Boolean function algebra: truth tables, multilinear representations and
the decompositions that turn symmetric releases into linear systems.

Truth tables are indexed by the integer encoding of a point, with the first
variable as the least significant bit.  On the plus-minus cube the same index
is used with bit 1 standing for +1 and bit 0 for -1, so a boolean ``f`` and
its relabeling ``g = 2f - 1`` share table positions.
"""

from __future__ import annotations

import itertools
import re
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence, Union

ZERO_ONE = "zero-one"
PLUS_MINUS = "plus-minus"
MAX_ARITY = 16

Number = Union[int, Fraction]


def _check_arity(p: int) -> None:
    if not isinstance(p, int) or p < 1:
        raise ValueError(f"arity must be a positive integer, got {p!r}")
    if p > MAX_ARITY:
        raise ValueError(f"arity {p} exceeds the supported maximum of {MAX_ARITY}")


def point_index(point: Sequence[int], domain: str = ZERO_ONE) -> int:
    """Table index of a cube point (first coordinate = least significant bit)."""
    idx = 0
    for i, v in enumerate(point):
        if domain == ZERO_ONE:
            if v not in (0, 1):
                raise ValueError(f"{v!r} is not in {{0,1}}")
            bit = v
        else:
            if v not in (-1, 1):
                raise ValueError(f"{v!r} is not in {{-1,1}}")
            bit = 1 if v == 1 else 0
        idx |= bit << i
    return idx


def index_point(idx: int, p: int, domain: str = ZERO_ONE) -> tuple[int, ...]:
    bits = tuple((idx >> i) & 1 for i in range(p))
    if domain == ZERO_ONE:
        return bits
    return tuple(2 * b - 1 for b in bits)


@dataclass(frozen=True)
class SignedFunction:
    """A {-1,0,1}-valued function on {0,1}^p or {-1,1}^p given by its table."""

    arity: int
    table: tuple[int, ...]
    domain: str = ZERO_ONE

    def __post_init__(self):
        _check_arity(self.arity)
        if self.domain not in (ZERO_ONE, PLUS_MINUS):
            raise ValueError(f"unknown domain {self.domain!r}")
        table = tuple(int(v) for v in self.table)
        if len(table) != 1 << self.arity:
            raise ValueError(
                f"table length {len(table)} does not match 2^{self.arity}")
        if any(v not in (-1, 0, 1) for v in table):
            raise ValueError("table values must lie in {-1,0,1}")
        object.__setattr__(self, "table", table)

    def __call__(self, *point: int) -> int:
        if len(point) == 1 and isinstance(point[0], (tuple, list)):
            point = tuple(point[0])
        if len(point) != self.arity:
            raise ValueError(f"expected {self.arity} arguments, got {len(point)}")
        return self.table[point_index(point, self.domain)]

    def points(self):
        return (index_point(i, self.arity, self.domain) for i in range(1 << self.arity))


@dataclass(frozen=True)
class BooleanFunction:
    """A function {0,1}^p -> {0,1} stored as a truth table."""

    arity: int
    table: tuple[int, ...]

    def __post_init__(self):
        _check_arity(self.arity)
        table = tuple(int(v) for v in self.table)
        if len(table) != 1 << self.arity:
            raise ValueError(
                f"table length {len(table)} does not match 2^{self.arity}")
        if any(v not in (0, 1) for v in table):
            raise ValueError("boolean table values must be 0 or 1")
        object.__setattr__(self, "table", table)

    @property
    def domain(self) -> str:
        return ZERO_ONE

    def __call__(self, *point: int) -> int:
        if len(point) == 1 and isinstance(point[0], (tuple, list)):
            point = tuple(point[0])
        if len(point) != self.arity:
            raise ValueError(f"expected {self.arity} arguments, got {len(point)}")
        return self.table[point_index(point)]

    def points(self):
        return (index_point(i, self.arity) for i in range(1 << self.arity))

    def serialize(self) -> str:
        return f"p={self.arity};table=" + "".join(str(v) for v in self.table)

    @classmethod
    def parse(cls, text: str) -> "BooleanFunction":
        m = re.fullmatch(r"\s*p=(\d+);table=([01]+)\s*", text)
        if not m:
            raise ValueError(f"cannot parse boolean function {text!r}")
        p = int(m.group(1))
        return cls(p, tuple(int(c) for c in m.group(2)))

    @classmethod
    def from_callable(cls, p: int, fn) -> "BooleanFunction":
        _check_arity(p)
        return cls(p, tuple(int(fn(*index_point(i, p))) for i in range(1 << p)))

    def __str__(self) -> str:
        return self.serialize()


# -- named constructors -----------------------------------------------------

def AND(p: int = 2) -> BooleanFunction:
    return BooleanFunction.from_callable(p, lambda *x: all(x))


def OR(p: int = 2) -> BooleanFunction:
    return BooleanFunction.from_callable(p, lambda *x: any(x))


def NAND(p: int = 2) -> BooleanFunction:
    return BooleanFunction.from_callable(p, lambda *x: not all(x))


def XOR(p: int = 2) -> BooleanFunction:
    return BooleanFunction.from_callable(p, lambda *x: sum(x) % 2)


def MAJORITY(p: int = 3) -> BooleanFunction:
    return BooleanFunction.from_callable(p, lambda *x: 2 * sum(x) > p)


def PARITY(p: int, subset: Iterable[int]) -> BooleanFunction:
    """Parity of the variables in ``subset`` (1-based indices)."""
    idx = [i - 1 for i in subset]
    if any(i < 0 or i >= p for i in idx):
        raise ValueError(f"subset {list(subset)} out of range for arity {p}")
    return BooleanFunction.from_callable(p, lambda *x: sum(x[i] for i in idx) % 2)


NAMED = {"AND": AND, "OR": OR, "NAND": NAND, "XOR": XOR, "MAJORITY": MAJORITY}


def named_function(name: str, p: int) -> BooleanFunction:
    """Resolve ``AND``, ``OR``, ``XOR``, ``NAND``, ``MAJORITY`` or ``PARITY:1,3``."""
    key = name.strip().upper()
    if key.startswith("PARITY:"):
        return PARITY(p, [int(t) for t in key[7:].split(",") if t])
    if key not in NAMED:
        raise ValueError(f"unknown boolean function name {name!r}")
    return NAMED[key](p)


def parse_function(text: str, p: int | None = None) -> BooleanFunction:
    """Parse either the ``p=..;table=..`` form or a named function."""
    if text.strip().startswith("p="):
        f = BooleanFunction.parse(text)
        if p is not None and f.arity != p:
            raise ValueError(f"function arity {f.arity} != expected {p}")
        return f
    if p is None:
        raise ValueError("arity required for a named function")
    return named_function(text, p)


# -- multilinear representation ---------------------------------------------

@dataclass(frozen=True)
class MultilinearPoly:
    """Multilinear polynomial with coefficients indexed by subset bitmask.

    ``coeffs[mask]`` is the coefficient of the monomial over variables whose
    bits are set in ``mask`` (bit i-1 for variable i).
    """

    arity: int
    domain: str
    coeffs: tuple[Number, ...]

    def coeff(self, subset: Iterable[int]) -> Number:
        mask = 0
        for i in subset:
            mask |= 1 << (i - 1)
        return self.coeffs[mask]

    def as_dict(self) -> dict[frozenset, Number]:
        return {
            frozenset(i + 1 for i in range(self.arity) if (mask >> i) & 1): c
            for mask, c in enumerate(self.coeffs)
        }

    @property
    def degree(self) -> int:
        nz = [bin(m).count("1") for m, c in enumerate(self.coeffs) if c != 0]
        return max(nz) if nz else 0

    @property
    def top_coeff(self) -> Number:
        return self.coeffs[-1]

    def __call__(self, *x):
        if len(x) == 1 and isinstance(x[0], (tuple, list)):
            x = tuple(x[0])
        if len(x) != self.arity:
            raise ValueError(f"expected {self.arity} arguments, got {len(x)}")
        total = 0
        for mask, c in enumerate(self.coeffs):
            if c == 0:
                continue
            term = c
            for i in range(self.arity):
                if (mask >> i) & 1:
                    term = term * x[i]
            total = total + term
        return total

    def restrict(self, keep_mask: int) -> "MultilinearPoly":
        """Zero every variable outside ``keep_mask`` (drops those monomials)."""
        return MultilinearPoly(
            self.arity, self.domain,
            tuple(c if (m & ~keep_mask) == 0 else 0 for m, c in enumerate(self.coeffs)))


def _mobius(values: list[int], p: int) -> list[int]:
    a = list(values)
    for i in range(p):
        bit = 1 << i
        for m in range(1 << p):
            if m & bit:
                a[m] -= a[m ^ bit]
    return a


def _walsh(values: list[int], p: int) -> list[int]:
    a = list(values)
    h = 1
    while h < len(a):
        for start in range(0, len(a), 2 * h):
            for j in range(start, start + h):
                lo, hi = a[j], a[j + h]
                # index bit 0 means phi=-1: chi_S(-1) = -1 on the low half
                a[j], a[j + h] = hi + lo, hi - lo
        h *= 2
    return a


def to_multilinear(f: BooleanFunction | SignedFunction) -> MultilinearPoly:
    """Unique multilinear representation of ``f`` on its own cube.

    On {0,1}^p this is the Mobius inversion over subsets (integer
    coefficients).  On {-1,1}^p it is the Walsh expansion, whose coefficients
    are dyadic rationals kept as ``Fraction``.
    """
    p = f.arity
    if f.domain == ZERO_ONE:
        return MultilinearPoly(p, ZERO_ONE, tuple(_mobius(list(f.table), p)))
    raw = _walsh(list(f.table), p)
    scale = 1 << p
    return MultilinearPoly(p, PLUS_MINUS, tuple(Fraction(v, scale) for v in raw))


def is_nondegenerate_by_degree(f: BooleanFunction | SignedFunction) -> bool:
    return to_multilinear(f).top_coeff != 0


def sign_sum(f: BooleanFunction) -> int:
    return sum(
        -1 if (v + bin(i).count("1")) % 2 else 1 for i, v in enumerate(f.table))


def is_nondegenerate_by_sign_sum(f: BooleanFunction) -> bool:
    return sign_sum(f) != 0


def all_functions(p: int):
    """Every boolean function of arity ``p`` in table-integer order."""
    _check_arity(p)
    size = 1 << p
    if size > 16:
        raise ValueError("exhaustive enumeration limited to arity <= 4")
    for code in range(1 << size):
        yield BooleanFunction(p, tuple((code >> i) & 1 for i in range(size)))


# -- decompositions ---------------------------------------------------------

def decompose_last_variable(f: BooleanFunction):
    """Split f(x, s) = f0(x) + f2(x) * s.  Returns ``(f0, f1, f2)``."""
    if f.arity < 2:
        raise ValueError("decomposition needs arity >= 2")
    half = 1 << (f.arity - 1)
    f0 = BooleanFunction(f.arity - 1, f.table[:half])
    f1 = BooleanFunction(f.arity - 1, f.table[half:])
    f2 = SignedFunction(f.arity - 1, tuple(b - a for a, b in zip(f0.table, f1.table)))
    return f0, f1, f2


def to_pm_function(f: BooleanFunction) -> SignedFunction:
    """g(phi) = 2 f((1+phi)/2) - 1 as a ±1-valued table on {-1,1}^p."""
    return SignedFunction(f.arity, tuple(2 * v - 1 for v in f.table), PLUS_MINUS)


def decompose_pm(g: SignedFunction):
    """Split g(phi, t) = g3(phi) + g2(phi) * t on the plus-minus cube.

    Returns ``(g2, g3)``.
    """
    if g.domain != PLUS_MINUS:
        raise ValueError("decompose_pm expects a plus-minus domain function")
    if g.arity < 2:
        raise ValueError("decomposition needs arity >= 2")
    if any(v not in (-1, 1) for v in g.table):
        raise ValueError("g must be ±1-valued")
    half = 1 << (g.arity - 1)
    g_minus, g_plus = g.table[:half], g.table[half:]
    g2 = SignedFunction(g.arity - 1, tuple((a - b) // 2 for a, b in zip(g_plus, g_minus)),
                        PLUS_MINUS)
    g3 = SignedFunction(g.arity - 1, tuple((a + b) // 2 for a, b in zip(g_plus, g_minus)),
                        PLUS_MINUS)
    return g2, g3


def pm_parts(f: BooleanFunction):
    """``(g2, g3)`` for the ±1 relabeling of ``f``."""
    return decompose_pm(to_pm_function(f))


def nondegenerate_count(p: int) -> int:
    return sum(1 for f in all_functions(p) if is_nondegenerate_by_sign_sum(f))


def signed_functions(k: int, domain: str = ZERO_ONE):
    """Every {-1,0,1}-valued table of arity ``k`` (3^(2^k) of them)."""
    for vals in itertools.product((-1, 0, 1), repeat=1 << k):
        yield SignedFunction(k, vals, domain)
