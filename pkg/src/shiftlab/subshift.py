"""Exact engine for downward-closed binary subshifts.

A shift rule here constrains only the 1-positions of a configuration, through
a predicate on pair gaps and one on consecutive-gap pairs of 1s.  Flipping a
1 to 0 can therefore never break admissibility (downward closure), and that
closure is what makes cylinder questions exactly decidable at a window:

Zero-fill exactness.  For a downward-closed rule, a tuple of shifted
cylinders has a common point iff the superposition that keeps exactly the
forced 1s (every other position 0) is feasible and admissible.  One
direction extends the superposed word by zeros; conversely, zeroing every
non-forced 1 of any witness point stays admissible by downward closure and
still lies in each cylinder.  The hitting kernels below rely on this and are
tested against brute-force enumeration over *all* completions.

The kernels work on 1-positions only.  For a placement of cylinders at
positions ``coef * n`` the cross gaps are affine in ``n``, so past a small
stabilization threshold the admissible ``n`` are computed by slicing the
rule's gap mask; the handful of small ``n`` where spans overlap are checked
directly.
"""

from __future__ import annotations

import itertools
import re
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import CapExceeded, ConfigError, HorizonExhausted, PreconditionError
from .intset import (
    SetRule,
    WindowedSet,
    doubling_free_certificate,
    materialize,
    parse_set_rule,
)

DEFAULT_WORD_CAP = 12

ONE_SIDED = "one-sided"
TWO_SIDED = "two-sided"


# ---------------------------------------------------------------------------
# words and cylinders


@dataclass(frozen=True)
class Word:
    """A finite 0/1 word stored as its length plus the positions of its 1s."""

    length: int
    ones: tuple[int, ...]

    def __post_init__(self) -> None:
        if self.length < 1:
            raise ConfigError("words must have length >= 1")
        o = self.ones
        if o and (o[0] < 0 or o[-1] >= self.length):
            raise ConfigError("1-positions out of range")
        if any(b <= a for a, b in zip(o, o[1:])):
            raise ConfigError("1-positions must be strictly increasing")

    @classmethod
    def from_string(cls, text: str) -> "Word":
        if not text or any(c not in "01" for c in text):
            raise ConfigError(f"word literal must be a non-empty 0/1 string: {text!r}")
        return cls(len(text), tuple(i for i, c in enumerate(text) if c == "1"))

    def __str__(self) -> str:
        bits = ["0"] * self.length
        for i in self.ones:
            bits[i] = "1"
        return "".join(bits)


@dataclass(frozen=True)
class Cylinder:
    """A word pinned at an absolute offset (0 for one-sided shifts)."""

    word: Word
    offset: int = 0

    @property
    def span(self) -> tuple[int, int]:
        return self.offset, self.offset + self.word.length - 1

    @property
    def ones(self) -> tuple[int, ...]:
        return tuple(self.offset + i for i in self.word.ones)


def cyl(text: str, offset: int = 0) -> Cylinder:
    return Cylinder(Word.from_string(text), offset)


# ---------------------------------------------------------------------------
# shift rules


@dataclass(frozen=True)
class ShiftRule:
    """Base for downward-closed rules over {0,1}."""

    @property
    def sidedness(self) -> str:
        return ONE_SIDED

    @property
    def triple_constrained(self) -> bool:
        return False

    def pair_allowed(self, gap: int) -> bool:
        raise NotImplementedError

    def pair_forbidden_gaps(self) -> tuple[int, ...] | None:
        """Finite list of forbidden gaps, or None when mask-based."""
        raise NotImplementedError

    def pair_mask(self, bound: int) -> np.ndarray:
        """allowed[g] for g in [0, bound]; only used by mask-based rules."""
        raise NotImplementedError

    def triple_allowed(self, g1: int, g2: int) -> bool:
        return True

    def literal(self) -> str:
        raise NotImplementedError

    def __str__(self) -> str:
        return self.literal()


@dataclass(frozen=True)
class FullShift(ShiftRule):
    def pair_allowed(self, gap: int) -> bool:
        return True

    def pair_forbidden_gaps(self) -> tuple[int, ...]:
        return ()

    def literal(self) -> str:
        return "full()"


@dataclass(frozen=True)
class Spacing(ShiftRule):
    """1s may only sit at mutual distances drawn from the rule's set."""

    set_rule: SetRule

    def pair_forbidden_gaps(self) -> None:
        return None

    def pair_mask(self, bound: int) -> np.ndarray:
        cached = self.__dict__.get("_gap_mask")
        if cached is None or len(cached) <= bound:
            need = max(2 * len(cached) if cached is not None else 64, bound + 1)
            fresh = materialize(self.set_rule, need).mask
            object.__setattr__(self, "_gap_mask", fresh)
            cached = fresh
        return cached

    def pair_allowed(self, gap: int) -> bool:
        return bool(self.pair_mask(gap)[gap])

    def literal(self) -> str:
        return f"spacing({self.set_rule.literal()})"


@dataclass(frozen=True)
class TripleRatio(ShiftRule):
    """Two-sided rule forbidding adjacent 1s and gap pairs with g2 = (p-1)*g1."""

    p: int

    def __post_init__(self) -> None:
        if self.p <= 2:
            raise ConfigError("tripleratio(p) requires p > 2")

    @property
    def sidedness(self) -> str:
        return TWO_SIDED

    @property
    def triple_constrained(self) -> bool:
        return True

    def pair_allowed(self, gap: int) -> bool:
        return gap != 1

    def pair_forbidden_gaps(self) -> tuple[int, ...]:
        return (1,)

    def triple_allowed(self, g1: int, g2: int) -> bool:
        return g2 != (self.p - 1) * g1

    def literal(self) -> str:
        return f"tripleratio({self.p})"


def parse_shift_rule(text: str) -> ShiftRule:
    s = text.strip()
    if re.fullmatch(r"full\s*\(\s*\)", s):
        return FullShift()
    m = re.fullmatch(r"spacing\s*\((.*)\)", s, re.DOTALL)
    if m:
        return Spacing(parse_set_rule(m.group(1)))
    m = re.fullmatch(r"tripleratio\s*\(\s*(\d+)\s*\)", s)
    if m:
        return TripleRatio(int(m.group(1)))
    raise ConfigError(f"unknown shift rule literal {text!r}")


# ---------------------------------------------------------------------------
# admissibility


def spectrum(w: Word) -> frozenset[int]:
    """All pairwise gaps between 1-positions (0 excluded)."""
    o = w.ones
    return frozenset(b - a for a, b in itertools.combinations(o, 2))


def _positions_admissible(rule: ShiftRule, pos: Sequence[int]) -> bool:
    """Admissibility of a configuration whose 1s sit exactly at ``pos`` (sorted)."""
    m = len(pos)
    if m < 2:
        return True
    big = m > 64
    arr = np.asarray(pos, dtype=np.int64) if big else None
    forbidden = rule.pair_forbidden_gaps()
    if forbidden is None:
        allowed = rule.pair_mask(pos[-1] - pos[0])
        if big:
            for i in range(m - 1):
                if not allowed[arr[i + 1 :] - arr[i]].all():
                    return False
        else:
            for i, j in itertools.combinations(range(m), 2):
                if not allowed[pos[j] - pos[i]]:
                    return False
    elif forbidden:
        bad = set(forbidden)
        if big:
            worst = max(forbidden)
            for i in range(m - 1):
                gaps = arr[i + 1 :] - arr[i]
                for g in gaps[gaps <= worst]:
                    if int(g) in bad:
                        return False
        else:
            for i, j in itertools.combinations(range(m), 2):
                if pos[j] - pos[i] in bad:
                    return False
    if rule.triple_constrained and m >= 3:
        assert isinstance(rule, TripleRatio)
        ratio = rule.p - 1
        if big:
            # (i, j, k) forbidden iff k = j + (p-1)(j - i): search per pair.
            for j in range(1, m):
                targets = arr[j] + ratio * (arr[j] - arr[:j])
                idx = np.searchsorted(arr, targets)
                idx[idx == m] = m - 1
                if (arr[idx] == targets).any():
                    return False
        else:
            have = set(pos)
            for i, j in itertools.combinations(range(m), 2):
                if pos[j] + ratio * (pos[j] - pos[i]) in have:
                    return False
    return True


def is_admissible(rule: ShiftRule, w: Word) -> bool:
    return _positions_admissible(rule, w.ones)


def superpose(constraints: Sequence[Cylinder]) -> Cylinder | None:
    """Combine cylinders into one zero-filled word, or None if they clash.

    A position of the spanned interval is 1 iff some constraint places a 1
    there; the combination is infeasible iff a constraint places a 0 where
    another places a 1.  Uncovered interior positions are zero-filled.
    """
    if not constraints:
        raise PreconditionError("superpose needs at least one cylinder")
    lo = min(c.offset for c in constraints)
    hi = max(c.offset + c.word.length for c in constraints)
    ones: set[int] = set()
    for c in constraints:
        ones.update(c.ones)
    for c in constraints:
        own = set(c.ones)
        for p in range(c.offset, c.offset + c.word.length):
            if p in ones and p not in own:
                return None
    word = Word(hi - lo, tuple(p - lo for p in sorted(ones)))
    return Cylinder(word, lo)


def enumerate_admissible_words(
    rule: ShiftRule, length: int, cap: int = DEFAULT_WORD_CAP
) -> list[Word]:
    """All admissible words of the given length, lexicographic (0 < 1)."""
    if length < 1:
        raise ConfigError("word length must be >= 1")
    if length > cap:
        raise CapExceeded(f"word length {length} exceeds the cap {cap}")
    out: list[Word] = []
    ones: list[int] = []

    forbidden = rule.pair_forbidden_gaps()
    allowed = rule.pair_mask(length) if forbidden is None else None
    ratio = rule.p - 1 if isinstance(rule, TripleRatio) else None

    def can_place(t: int) -> bool:
        for q in ones:
            g = t - q
            if allowed is not None:
                if not allowed[g]:
                    return False
            elif forbidden and g in forbidden:
                return False
        if ratio is not None and len(ones) >= 2:
            have = set(ones)
            for j in ones:
                # adding t as the largest position: forbidden iff t completes
                # a pair (i, j) with t = j + (p-1)(j - i)
                rem = t - j
                if rem > 0 and rem % ratio == 0 and j - rem // ratio in have:
                    return False
        return True

    def walk(t: int) -> None:
        if t == length:
            out.append(Word(length, tuple(ones)))
            return
        walk(t + 1)
        if can_place(t):
            ones.append(t)
            walk(t + 1)
            ones.pop()

    walk(0)
    out.sort(key=lambda w: str(w))
    return out


# ---------------------------------------------------------------------------
# hitting kernels


@dataclass(frozen=True)
class HitAnalysis:
    """What the linear kernel learned beyond the raw window.

    ``pair_constraints`` are (coef, delta) pairs: for every n past the
    stabilization threshold, membership requires gap coef*n + delta to be
    allowed.  ``all_n_triples`` are triple-law exclusions valid for every
    such n; ``constant_violations`` hold at every n >= 1.
    """

    n_star: int
    pair_constraints: tuple[tuple[int, int], ...]
    constant_violations: tuple[str, ...]
    all_n_triples: tuple[tuple[int, ...], ...]


def _validate_placements(
    rule: ShiftRule, placements: Sequence[tuple[int, Cylinder]]
) -> None:
    if not placements:
        raise PreconditionError("at least one placement required")
    for coef, c in placements:
        if coef < 0:
            raise PreconditionError("placement coefficients must be >= 0")
        if rule.sidedness == ONE_SIDED and c.offset != 0:
            raise PreconditionError("one-sided rules require cylinder offset 0")
        if not is_admissible(rule, c.word):
            raise PreconditionError(f"cylinder word {c.word} is not admissible")
    if all(coef == 0 for coef, _ in placements):
        raise PreconditionError("at least one placement must move with n")


def _direct_ok(
    rule: ShiftRule, groups: Sequence[tuple[int, Cylinder]], n: int
) -> bool:
    ones: set[int] = set()
    for coef, c in groups:
        base = coef * n
        ones.update(base + p for p in c.ones)
    for coef, c in groups:
        base = coef * n
        own = {base + p for p in c.ones}
        s_lo, s_hi = c.span
        for p in ones:
            if base + s_lo <= p <= base + s_hi and p not in own:
                return False
    return _positions_admissible(rule, sorted(ones))


def linear_hitting(
    rule: ShiftRule, placements: Sequence[tuple[int, Cylinder]], h: int
) -> tuple[WindowedSet, HitAnalysis]:
    """n in [1, H] such that superposing each cylinder at coef*n is admissible.

    The workhorse behind every hitting-set operation; exact by zero-fill.
    """
    if h < 1:
        raise HorizonExhausted("horizon must be >= 1")
    _validate_placements(rule, placements)
    groups = list(placements)

    # Threshold past which groups with different coefficients are disjoint
    # and ordered by coefficient.
    n_star = 1
    for (ci, a), (cj, b) in itertools.combinations(groups, 2):
        if ci == cj:
            continue
        if ci > cj:
            (ci, a), (cj, b) = (cj, b), (ci, a)
        sep = (a.span[1] - b.span[0]) // (cj - ci) + 1
        n_star = max(n_star, sep)
    n_star = min(n_star, h)

    mask = np.zeros(h + 1, dtype=bool)
    for n in range(1, n_star + 1):
        mask[n] = _direct_ok(rule, groups, n)

    # Merged 1-positions as (coef, offset) pairs; lexicographic order equals
    # position order for every n > n_star.
    cq = sorted({(coef, p) for coef, c in groups for p in c.ones})

    pair_constraints: set[tuple[int, int]] = set()
    constant_violations: list[str] = []
    all_n_triples: list[tuple[int, ...]] = []

    for (c1, q1), (c2, q2) in itertools.combinations(cq, 2):
        if c1 == c2:
            if not rule.pair_allowed(q2 - q1):
                constant_violations.append(
                    f"fixed gap {q2 - q1} between co-moving 1s is forbidden"
                )
        else:
            pair_constraints.add((c2 - c1, q2 - q1))

    # Co-moving zero/one conflicts are n-independent.
    for (ci, a), (cj, b) in itertools.combinations(groups, 2):
        if ci != cj:
            continue
        a_ones, b_ones = set(a.ones), set(b.ones)
        for p in a_ones:
            if b.span[0] <= p <= b.span[1] and p not in b_ones:
                constant_violations.append("co-moving cylinders clash 1-vs-0")
        for p in b_ones:
            if a.span[0] <= p <= a.span[1] and p not in a_ones:
                constant_violations.append("co-moving cylinders clash 1-vs-0")

    point_exclusions: list[int] = []
    if rule.triple_constrained and len(cq) >= 3:
        assert isinstance(rule, TripleRatio)
        ratio = rule.p - 1
        for (c1, q1), (c2, q2), (c3, q3) in itertools.combinations(cq, 3):
            # forbidden iff p3 - p2 = (p-1)(p2 - p1) with affine positions
            slope = (c3 - c2) - ratio * (c2 - c1)
            inter = (q3 - q2) - ratio * (q2 - q1)
            if slope == 0 and inter == 0:
                all_n_triples.append((c1, q1, c2, q2, c3, q3))
            elif slope != 0 and (-inter) % slope == 0:
                point_exclusions.append((-inter) // slope)

    if n_star < h:
        ok = np.ones(h - n_star, dtype=bool)
        if constant_violations or all_n_triples:
            ok[:] = False
        else:
            forbidden = rule.pair_forbidden_gaps()
            if forbidden is None and pair_constraints:
                bound = max(c * h + d for c, d in pair_constraints)
                allowed = rule.pair_mask(bound)
                for c, d in sorted(pair_constraints):
                    lo = c * (n_star + 1) + d
                    ok &= allowed[lo : c * h + d + 1 : c]
            elif forbidden:
                for c, d in pair_constraints:
                    for f in forbidden:
                        if (f - d) % c == 0:
                            n0 = (f - d) // c
                            if n_star < n0 <= h:
                                ok[n0 - n_star - 1] = False
            for n0 in point_exclusions:
                if n_star < n0 <= h:
                    ok[n0 - n_star - 1] = False
        mask[n_star + 1 :] = ok

    if constant_violations:
        mask[:] = False

    analysis = HitAnalysis(
        n_star,
        tuple(sorted(pair_constraints)),
        tuple(constant_violations),
        tuple(all_n_triples),
    )
    return WindowedSet.from_mask(mask), analysis


def hitting_window(rule: ShiftRule, u: Cylinder, v: Cylinder, h: int) -> WindowedSet:
    """N([u],[v]) on [1,H]: times n with U meeting the n-preimage of V."""
    window, _ = linear_hitting(rule, [(0, u), (1, v)], h)
    return window


def multi_hitting_window(
    rule: ShiftRule,
    a: Sequence[int],
    pairs: Sequence[tuple[Cylinder, Cylinder]],
    h: int,
) -> WindowedSet:
    """Product hitting times: n with superpose(U_i at 0, V_i at a_i*n) admissible for all i."""
    window, _ = multi_hitting_analysis(rule, a, pairs, h)
    return window


def multi_hitting_analysis(
    rule: ShiftRule,
    a: Sequence[int],
    pairs: Sequence[tuple[Cylinder, Cylinder]],
    h: int,
) -> tuple[WindowedSet, list[HitAnalysis]]:
    if len(a) != len(pairs):
        raise PreconditionError("need as many pairs as vector entries")
    if any(ai < 1 for ai in a):
        raise PreconditionError("vector entries must be positive")
    mask = np.zeros(h + 1, dtype=bool)
    mask[1:] = True
    analyses = []
    for ai, (u, v) in zip(a, pairs):
        window, analysis = linear_hitting(rule, [(0, u), (ai, v)], h)
        mask &= window.mask
        analyses.append(analysis)
    return WindowedSet.from_mask(mask), analyses


def delta_hitting_window(
    rule: ShiftRule, a: Sequence[int], cylinders: Sequence[Cylinder], h: int
) -> WindowedSet:
    """Diagonal hitting times: n with superpose(U_0 at 0, U_i at a_i*n) admissible."""
    window, _ = delta_hitting_analysis(rule, a, cylinders, h)
    return window


def delta_hitting_analysis(
    rule: ShiftRule, a: Sequence[int], cylinders: Sequence[Cylinder], h: int
) -> tuple[WindowedSet, HitAnalysis]:
    if len(cylinders) != len(a) + 1:
        raise PreconditionError("need r+1 cylinders for a length-r vector")
    if any(ai < 1 for ai in a):
        raise PreconditionError("vector entries must be positive")
    placements = [(0, cylinders[0])] + [
        (ai, c) for ai, c in zip(a, cylinders[1:])
    ]
    return linear_hitting(rule, placements, h)


def emptiness_certificate(
    rule: ShiftRule,
    window: WindowedSet,
    analyses: HitAnalysis | Sequence[HitAnalysis],
    h: int,
) -> dict | None:
    """Upgrade an empty window to a proof of emptiness for every n >= 1.

    Sound when the window is empty, covers the stabilization range, and a
    structural reason excludes all larger n: a doubling pair of necessary
    gaps against a doubling-free spacing set (parity law), an identically
    forbidden gap-pair (triple law), or an n-independent clash.
    """
    if window.members:
        return None
    items = [analyses] if isinstance(analyses, HitAnalysis) else list(analyses)
    if any(a.n_star > h for a in items):
        return None

    for a in items:
        if a.constant_violations:
            return {
                "name": "constant-gap",
                "statement": a.constant_violations[0],
                "checked_horizon": h,
            }
    for a in items:
        if a.all_n_triples:
            assert isinstance(rule, TripleRatio)
            c1, q1, c2, q2, c3, q3 = a.all_n_triples[0]
            return {
                "name": "triple-law",
                "statement": (
                    "the second gap equals "
                    f"{rule.p - 1} times the first at every step n"
                ),
                "positions": [[c1, q1], [c2, q2], [c3, q3]],
                "p": rule.p,
                "checked_horizon": h,
            }
    if isinstance(rule, Spacing):
        base = doubling_free_certificate(rule.set_rule)
        if base is not None:
            combined = {c for a in items for c in a.pair_constraints}
            for c, d in sorted(combined):
                if (2 * c, 2 * d) in combined:
                    return {
                        "name": "parity-law",
                        "statement": (
                            f"gaps {c}n{d:+d} and {2 * c}n{2 * d:+d} are both "
                            "required, but no member of the spacing set has "
                            "its double in the set"
                        ),
                        "gap_pair": [[c, d], [2 * c, 2 * d]],
                        "basis": base["statement"],
                        "checked_horizon": h,
                    }
    return None


# ---------------------------------------------------------------------------
# canonical finite-support construction


def build_rn(u: Word, v: Word, w: Word, n: int, k: int) -> Cylinder:
    """The two-sided word u 0^(n-2k-1) v 0^(n-2k-1) w with u starting at -k.

    Each block has odd length 2k+1; the blocks are centered at 0, n and 2n.
    """
    want = 2 * k + 1
    if not (u.length == v.length == w.length == want):
        raise PreconditionError(f"blocks must all have length 2k+1 = {want}")
    if n <= 2 * k + 1:
        raise PreconditionError(f"n must exceed 2k+1 = {2 * k + 1}, got {n}")
    gap = n - 2 * k - 1
    ones = list(u.ones)
    ones += [want + gap + i for i in v.ones]
    ones += [2 * (want + gap) + i for i in w.ones]
    return Cylinder(Word(3 * want + 2 * gap, tuple(ones)), -k)
