"""Windowed calculus for subsets of the positive integers.

Everything in this module is horizon-materialized: a :class:`WindowedSet`
carries the finite window ``[0, horizon)`` on which its membership list is
exact.  Operations recompute the horizon so downstream predicates cannot
silently claim more than the window supports.  Difference sets are the one
deliberate exception — every listed member is genuine, but absence is only
horizon-relative — and they are flagged ``complete=False`` so that report
layers downgrade would-be refutations accordingly.

The convention throughout is that 0 is *not* a natural number: set rules
describe subsets of {1, 2, ...} even though windows index from 0.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from functools import cached_property
from typing import Iterator, Sequence

import numpy as np

from .errors import CapExceeded, ConfigError, HorizonExhausted

# Membership queries switch from a frozenset to the dense bit array once the
# window is at least this long.
DENSE_CACHE_MIN = 4096

# Maximum nesting depth for composite set rules.
MAX_RULE_DEPTH = 16

# len(members) * horizon guard for the bit-fold difference kernel (~1 GiB of
# word traffic).  Larger requests fail loudly instead of thrashing.
_DIFFERENCE_COST_CAP = 1 << 34

# Moduli probed when deriving congruence structure from a rule.
DEFAULT_MODULI = (2, 3, 4, 5, 6, 8, 12)


# ---------------------------------------------------------------------------
# windowed sets


@dataclass(frozen=True)
class WindowedSet:
    """A finite window onto a subset of the naturals.

    ``members`` lists elements of ``[0, horizon)`` in strictly increasing
    order.  ``complete`` records whether that listing is exhaustive on the
    window; difference sets only promise soundness (every member genuine).
    """

    horizon: int
    members: tuple[int, ...]
    complete: bool = True

    def __post_init__(self) -> None:
        if self.horizon < 1:
            raise ConfigError(f"horizon must be >= 1, got {self.horizon}")
        m = self.members
        if not m:
            return
        if m[0] < 0 or m[-1] >= self.horizon:
            raise ConfigError(
                f"members must lie in [0, {self.horizon}), got range "
                f"[{m[0]}, {m[-1]}]"
            )
        if len(m) > 1024:
            arr = np.fromiter(m, np.int64, len(m))
            if not (np.diff(arr) > 0).all():
                raise ConfigError("members must be strictly increasing")
            self.__dict__["values"] = arr
        elif any(b <= a for a, b in zip(m, m[1:])):
            raise ConfigError("members must be strictly increasing")

    @cached_property
    def values(self) -> np.ndarray:
        return np.fromiter(self.members, np.int64, len(self.members))

    @cached_property
    def mask(self) -> np.ndarray:
        dense = np.zeros(self.horizon, dtype=bool)
        if self.members:
            dense[self.values] = True
        return dense

    @cached_property
    def _member_set(self) -> frozenset[int]:
        return frozenset(self.members)

    @classmethod
    def from_mask(cls, mask: np.ndarray, complete: bool = True) -> "WindowedSet":
        vals = np.flatnonzero(mask)
        out = cls(len(mask), tuple(vals.tolist()), complete)
        out.__dict__["values"] = vals.astype(np.int64)
        out.__dict__["mask"] = mask.astype(bool, copy=False)
        return out

    def __contains__(self, n: object) -> bool:
        if not isinstance(n, int) or n < 0 or n >= self.horizon:
            return False
        if self.horizon >= DENSE_CACHE_MIN:
            return bool(self.mask[n])
        return n in self._member_set

    def __len__(self) -> int:
        return len(self.members)

    def __iter__(self) -> Iterator[int]:
        return iter(self.members)

    def restrict(self, hi: int) -> "WindowedSet":
        """Intersect with [0, hi); ``hi`` must not exceed the horizon."""
        if hi > self.horizon:
            raise HorizonExhausted(f"cannot restrict to {hi} > horizon {self.horizon}")
        vals = self.values
        return WindowedSet(hi, tuple(vals[vals < hi].tolist()), self.complete)


@dataclass(frozen=True)
class SetStats:
    """Window statistics; ``max_internal_gap`` is None when |S| < 2."""

    longest_run: int
    max_internal_gap: int | None
    window_density: float


# ---------------------------------------------------------------------------
# set rules


class SetRule:
    """Algebraic description of an infinite subset of the naturals.

    Subclasses are frozen dataclasses; :func:`materialize` evaluates them
    exactly on a window.  ``preserves_completeness`` is False for rules whose
    window value is only a sound under-approximation (difference sets).
    """

    def _mask(self, h: int) -> np.ndarray:
        raise NotImplementedError

    def depth(self) -> int:
        return 1

    def preserves_completeness(self) -> bool:
        return True

    def residues(self, modulus: int) -> frozenset[int] | None:
        """Residues mod ``modulus`` provably covering the set, or None."""
        return None

    def literal(self) -> str:
        raise NotImplementedError

    def __str__(self) -> str:
        return self.literal()


def _full_residues(modulus: int) -> frozenset[int]:
    return frozenset(range(modulus))


@dataclass(frozen=True)
class Explicit(SetRule):
    values: tuple[int, ...]

    def __post_init__(self) -> None:
        if not self.values:
            raise ConfigError("explicit() needs at least one element")
        if any(v < 1 for v in self.values):
            raise ConfigError("explicit elements must be positive")
        if any(b <= a for a, b in zip(self.values, self.values[1:])):
            raise ConfigError("explicit elements must be strictly increasing")

    def _mask(self, h: int) -> np.ndarray:
        out = np.zeros(h, dtype=bool)
        inside = [v for v in self.values if v < h]
        if inside:
            out[inside] = True
        return out

    def residues(self, modulus: int) -> frozenset[int] | None:
        return frozenset(v % modulus for v in self.values)

    def literal(self) -> str:
        return "explicit(" + ",".join(str(v) for v in self.values) + ")"


@dataclass(frozen=True)
class Range(SetRule):
    lo: int
    hi: int

    def __post_init__(self) -> None:
        if self.lo < 1:
            raise ConfigError("range lower bound must be positive")
        if self.lo > self.hi:
            raise ConfigError(f"range({self.lo},{self.hi}) requires lo <= hi")

    def _mask(self, h: int) -> np.ndarray:
        out = np.zeros(h, dtype=bool)
        out[self.lo : self.hi + 1] = True
        return out

    def residues(self, modulus: int) -> frozenset[int] | None:
        if self.hi - self.lo + 1 >= modulus:
            return _full_residues(modulus)
        return frozenset(v % modulus for v in range(self.lo, self.hi + 1))

    def literal(self) -> str:
        return f"range({self.lo},{self.hi})"


@dataclass(frozen=True)
class ArithmeticProgression(SetRule):
    first: int
    step: int

    def __post_init__(self) -> None:
        if self.first < 1:
            raise ConfigError("progression start must be positive")
        if self.step < 1:
            raise ConfigError("progression step must be >= 1")

    def _mask(self, h: int) -> np.ndarray:
        out = np.zeros(h, dtype=bool)
        if self.first < h:
            out[self.first :: self.step] = True
        return out

    def residues(self, modulus: int) -> frozenset[int] | None:
        return frozenset((self.first + k * self.step) % modulus for k in range(modulus))

    def literal(self) -> str:
        return f"ap({self.first},{self.step})"


@dataclass(frozen=True)
class DyadicBlocks(SetRule):
    """Union of the blocks [2^(2k-1), 2^(2k) - 1] for k >= 1.

    Doubling-free: if n is in a block then 2n falls strictly between that
    block and the next one, so n and 2n are never both members.
    """

    def _mask(self, h: int) -> np.ndarray:
        out = np.zeros(h, dtype=bool)
        k = 1
        while True:
            lo = 1 << (2 * k - 1)
            if lo >= h:
                break
            hi = min((1 << (2 * k)) - 1, h - 1)
            out[lo : hi + 1] = True
            k += 1
        return out

    def literal(self) -> str:
        return "dyadic()"


@dataclass(frozen=True)
class Naturals(SetRule):
    def _mask(self, h: int) -> np.ndarray:
        out = np.ones(h, dtype=bool)
        out[0] = False
        return out

    def residues(self, modulus: int) -> frozenset[int] | None:
        return _full_residues(modulus)

    def literal(self) -> str:
        return "nat()"


@dataclass(frozen=True)
class Union(SetRule):
    rules: tuple[SetRule, ...]

    def __post_init__(self) -> None:
        if not self.rules:
            raise ConfigError("union() needs at least one rule")

    def _mask(self, h: int) -> np.ndarray:
        out = self.rules[0]._mask(h).copy()
        for r in self.rules[1:]:
            out |= r._mask(h)
        return out

    def depth(self) -> int:
        return 1 + max(r.depth() for r in self.rules)

    def preserves_completeness(self) -> bool:
        return all(r.preserves_completeness() for r in self.rules)

    def residues(self, modulus: int) -> frozenset[int] | None:
        acc: set[int] = set()
        for r in self.rules:
            rs = r.residues(modulus)
            if rs is None:
                return None
            acc |= rs
        return frozenset(acc)

    def literal(self) -> str:
        return "union(" + ",".join(r.literal() for r in self.rules) + ")"


@dataclass(frozen=True)
class Intersection(SetRule):
    rules: tuple[SetRule, ...]

    def __post_init__(self) -> None:
        if not self.rules:
            raise ConfigError("inter() needs at least one rule")

    def _mask(self, h: int) -> np.ndarray:
        out = self.rules[0]._mask(h).copy()
        for r in self.rules[1:]:
            out &= r._mask(h)
        return out

    def depth(self) -> int:
        return 1 + max(r.depth() for r in self.rules)

    def preserves_completeness(self) -> bool:
        return all(r.preserves_completeness() for r in self.rules)

    def residues(self, modulus: int) -> frozenset[int] | None:
        # The set is contained in each factor, so any known residue cover of
        # a factor covers the intersection.
        known = [rs for rs in (r.residues(modulus) for r in self.rules) if rs is not None]
        if not known:
            return None
        acc = known[0]
        for rs in known[1:]:
            acc &= rs
        return acc

    def literal(self) -> str:
        return "inter(" + ",".join(r.literal() for r in self.rules) + ")"


@dataclass(frozen=True)
class Translate(SetRule):
    rule: SetRule
    offset: int

    def _mask(self, h: int) -> np.ndarray:
        n = self.offset
        child_h = max(1, h - n) if n >= 0 else h - n
        child = self.rule._mask(child_h)
        out = np.zeros(h, dtype=bool)
        if n >= 0:
            hi = min(child_h, h - n)
            if hi > 0:
                out[n : n + hi] = child[:hi]
        else:
            out[: h] = child[-n : -n + h]
        out[0] = False  # intersect with the naturals
        return out

    def depth(self) -> int:
        return 1 + self.rule.depth()

    def preserves_completeness(self) -> bool:
        return self.rule.preserves_completeness()

    def residues(self, modulus: int) -> frozenset[int] | None:
        rs = self.rule.residues(modulus)
        if rs is None:
            return None
        return frozenset((r + self.offset) % modulus for r in rs)

    def literal(self) -> str:
        return f"shift({self.rule.literal()},{self.offset})"


@dataclass(frozen=True)
class DifferenceOf(SetRule):
    rule: SetRule

    def _mask(self, h: int) -> np.ndarray:
        child = materialize(self.rule, h)
        return difference_set(child).mask

    def depth(self) -> int:
        return 1 + self.rule.depth()

    def preserves_completeness(self) -> bool:
        # Differences of members beyond the window may be small, so the
        # window value is sound but never exhaustive.
        return False

    def residues(self, modulus: int) -> frozenset[int] | None:
        rs = self.rule.residues(modulus)
        if rs is None:
            return None
        return frozenset((a - b) % modulus for a in rs for b in rs)

    def literal(self) -> str:
        return f"diff({self.rule.literal()})"


# ---------------------------------------------------------------------------
# operations


def materialize(rule: SetRule, horizon: int) -> WindowedSet:
    """Evaluate ``rule`` exactly on [0, horizon)."""
    if horizon < 1:
        raise ConfigError(f"horizon must be >= 1, got {horizon}")
    if rule.depth() > MAX_RULE_DEPTH:
        raise CapExceeded(f"rule nesting exceeds {MAX_RULE_DEPTH}")
    return WindowedSet.from_mask(rule._mask(horizon), rule.preserves_completeness())


def _mask_to_int(mask: np.ndarray) -> int:
    return int.from_bytes(np.packbits(mask, bitorder="little").tobytes(), "little")


def _int_to_mask(x: int, h: int) -> np.ndarray:
    buf = x.to_bytes((h + 7) // 8, "little")
    bits = np.unpackbits(np.frombuffer(buf, np.uint8), bitorder="little")
    return bits[:h].astype(bool)


def _shifted_or(base_mask: np.ndarray, shifts: Sequence[int], h: int) -> np.ndarray:
    """Bits d in [0, h) with base_mask[d + s] set for some shift s."""
    acc = 0
    base = _mask_to_int(base_mask)
    for s in shifts:
        acc |= base >> int(s)
    acc &= (1 << h) - 1
    return _int_to_mask(acc, h)


def difference_set(s: WindowedSet) -> WindowedSet:
    """All positive pairwise differences of window members.

    Sound but not complete: members beyond the horizon could contribute
    further small differences, so the result is flagged ``complete=False``.
    """
    if len(s.members) * s.horizon > _DIFFERENCE_COST_CAP:
        raise CapExceeded(
            f"difference set of {len(s.members)} members at horizon "
            f"{s.horizon} exceeds the kernel cost cap"
        )
    out = _shifted_or(s.mask, s.members, s.horizon)
    out[0] = False
    return WindowedSet.from_mask(out, complete=False)


def cross_difference(subtrahend: WindowedSet, minuend: WindowedSet) -> WindowedSet:
    """{b - a : b in minuend, a in subtrahend, b > a}; sound, not complete."""
    h = minuend.horizon
    if len(subtrahend.members) * h > _DIFFERENCE_COST_CAP:
        raise CapExceeded("cross difference exceeds the kernel cost cap")
    out = _shifted_or(minuend.mask, subtrahend.members, h)
    out[0] = False
    return WindowedSet.from_mask(out, complete=False)


def translate(s: WindowedSet, n: int) -> WindowedSet:
    """Shift every member by ``n`` and intersect with the naturals.

    The result's horizon is ``s.horizon + n``: for right shifts knowledge
    extends past the old horizon (everything new there came from known
    members), for left shifts it shrinks by |n|.
    """
    if abs(n) >= s.horizon:
        raise HorizonExhausted(
            f"|{n}| >= horizon {s.horizon}: nothing provable about the result"
        )
    vals = s.values + n
    vals = vals[vals >= 1]
    return WindowedSet(s.horizon + n, tuple(vals.tolist()), s.complete)


def stats(s: WindowedSet) -> SetStats:
    """Longest run, largest internal gap and density of the window."""
    vals = s.values
    if len(vals) == 0:
        return SetStats(0, None, 0.0)
    if len(vals) == 1:
        return SetStats(1, None, 1.0 / s.horizon)
    diffs = np.diff(vals)
    # longest stretch of consecutive members
    longest = 1
    cur = 1
    for d in diffs.tolist():
        cur = cur + 1 if d == 1 else 1
        longest = max(longest, cur)
    return SetStats(longest, int(diffs.max()), len(vals) / s.horizon)


def doubling_conflicts(rule: SetRule, h: int) -> tuple[int, ...]:
    """All n in [1, h] with both n and 2n members of the rule's set."""
    m = materialize(rule, 2 * h + 1).mask
    hits = np.flatnonzero(m[1 : h + 1] & m[2 : 2 * h + 1 : 2]) + 1
    return tuple(hits.tolist())


def doubling_free_certificate(rule: SetRule) -> dict | None:
    """Structural proof that no n and 2n are both members, if available.

    Only the dyadic block rule carries one: doubling the endpoints of the
    block [2^(2k-1), 2^(2k)-1] lands strictly inside the gap before the
    next block, uniformly in k.
    """
    if isinstance(rule, DyadicBlocks):
        # Endpoint arithmetic, checked exactly for a generous range of k.
        for k in range(1, 64):
            lo, hi = 1 << (2 * k - 1), (1 << (2 * k)) - 1
            nxt = 1 << (2 * k + 1)
            if not (2 * lo > hi and 2 * hi < nxt):
                return None
        return {
            "name": "parity-law",
            "statement": "members double into the gap between consecutive blocks,"
            " so n and 2n are never both members",
            "rule": rule.literal(),
        }
    return None


# ---------------------------------------------------------------------------
# congruence structure


@dataclass(frozen=True)
class CongruenceStructure:
    """Proof that the described set is contained in given residues mod m."""

    modulus: int
    residues: frozenset[int]


def congruence_structures(
    rule: SetRule, moduli: Sequence[int] = DEFAULT_MODULI
) -> tuple[CongruenceStructure, ...]:
    """Proper congruence covers derivable from the rule's shape."""
    out = []
    for m in moduli:
        rs = rule.residues(m)
        if rs is not None and len(rs) < m:
            out.append(CongruenceStructure(m, rs))
    return tuple(out)


# ---------------------------------------------------------------------------
# rule grammar
#
#   range(a,b) ap(a,d) dyadic() nat() evens() explicit(n1,...)
#   union(r1,...) inter(r1,...) shift(r,n) diff(r)
#
# Whitespace-insensitive; integers may be negative only where an offset is
# expected (shift).

_TOKEN = re.compile(r"\s*(?:(?P<name>[a-z]+)|(?P<int>-?\d+)|(?P<punct>[(),]))")


class _Tokens:
    def __init__(self, text: str):
        self.text = text
        self.pos = 0

    def peek(self) -> tuple[str, str] | None:
        if self.pos >= len(self.text):
            return None
        m = _TOKEN.match(self.text, self.pos)
        if m is None or not m.group().strip():
            raise ConfigError(f"bad character at position {self.pos} in {self.text!r}")
        kind = m.lastgroup or ""
        return kind, m.group(kind)

    def next(self) -> tuple[str, str]:
        got = self.peek()
        if got is None:
            raise ConfigError(f"unexpected end of input in {self.text!r}")
        m = _TOKEN.match(self.text, self.pos)
        assert m is not None
        self.pos = m.end()
        return got

    def expect(self, value: str) -> None:
        kind, tok = self.next()
        if tok != value:
            raise ConfigError(
                f"expected {value!r} at position {self.pos} in {self.text!r}, got {tok!r}"
            )

    def done(self) -> bool:
        if self.pos >= len(self.text):
            return True
        return self.text[self.pos :].strip() == ""


def _parse_int(toks: _Tokens) -> int:
    kind, tok = toks.next()
    if kind != "int":
        raise ConfigError(f"expected integer in {toks.text!r}, got {tok!r}")
    return int(tok)


def _parse_rule(toks: _Tokens, depth: int) -> SetRule:
    if depth > MAX_RULE_DEPTH:
        raise CapExceeded(f"rule nesting exceeds {MAX_RULE_DEPTH}")
    kind, name = toks.next()
    if kind != "name":
        raise ConfigError(f"expected rule name in {toks.text!r}, got {name!r}")
    toks.expect("(")
    if name == "range":
        lo = _parse_int(toks)
        toks.expect(",")
        hi = _parse_int(toks)
        toks.expect(")")
        return Range(lo, hi)
    if name == "ap":
        first = _parse_int(toks)
        toks.expect(",")
        step = _parse_int(toks)
        toks.expect(")")
        return ArithmeticProgression(first, step)
    if name == "dyadic":
        toks.expect(")")
        return DyadicBlocks()
    if name == "nat":
        toks.expect(")")
        return Naturals()
    if name == "evens":
        toks.expect(")")
        return ArithmeticProgression(2, 2)
    if name == "explicit":
        vals = [_parse_int(toks)]
        while True:
            kind, tok = toks.next()
            if tok == ")":
                break
            if tok != ",":
                raise ConfigError(f"expected ',' or ')' in {toks.text!r}")
            vals.append(_parse_int(toks))
        return Explicit(tuple(vals))
    if name in ("union", "inter"):
        rules = [_parse_rule(toks, depth + 1)]
        while True:
            kind, tok = toks.next()
            if tok == ")":
                break
            if tok != ",":
                raise ConfigError(f"expected ',' or ')' in {toks.text!r}")
            rules.append(_parse_rule(toks, depth + 1))
        return Union(tuple(rules)) if name == "union" else Intersection(tuple(rules))
    if name == "shift":
        inner = _parse_rule(toks, depth + 1)
        toks.expect(",")
        off = _parse_int(toks)
        toks.expect(")")
        return Translate(inner, off)
    if name == "diff":
        inner = _parse_rule(toks, depth + 1)
        toks.expect(")")
        return DifferenceOf(inner)
    raise ConfigError(f"unknown set rule {name!r}")


def parse_set_rule(text: str) -> SetRule:
    toks = _Tokens(text)
    rule = _parse_rule(toks, 1)
    if not toks.done():
        raise ConfigError(f"trailing input at position {toks.pos} in {text!r}")
    return rule
