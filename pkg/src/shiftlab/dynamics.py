"""Sweep-based transitivity checkers and windowed verifiers.

Every checker enumerates ordered tuples of admissible words in
length-then-lexicographic order and records the smallest witness per
tuple, so reports are deterministic and stable across runs and across
thread counts.  A FailsOnWindow verdict states only that no witness
exists below the horizon; it is promoted to a refutation nowhere in this
module — callers attach structural emptiness certificates where the
hitting kernel can supply one.
"""

from __future__ import annotations

import itertools
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import ConfigError, PreconditionError
from .families import (
    UNDETERMINED,
    VERDICT_RANK,
    WITNESSED,
    FamilyQuery,
    GridParams,
    WindowReport,
    family_window_report,
    fa_grid_report,
    fsa_grid_report,
    finfty_grid_report,
    nabla_report,
)
from .intset import WindowedSet, cross_difference
from .points import GeneratedPoint, entering_window
from .subshift import (
    Cylinder,
    ShiftRule,
    TWO_SIDED,
    Word,
    delta_hitting_analysis,
    emptiness_certificate,
    enumerate_admissible_words,
    hitting_window,
    linear_hitting,
    multi_hitting_analysis,
)

FAILS_ON_WINDOW = "FailsOnWindow"

_MODE = re.compile(r"plain|thick\((\d+)\)|cofinite_from")


@dataclass(frozen=True)
class SweepOutcome:
    """One enumerated tuple: its words, least witness (or None), extras."""

    words: tuple[str, ...]
    witness: int | None
    detail: dict | None = None


@dataclass(frozen=True)
class SweepReport:
    rule: str
    operation: str
    params: dict
    verdict: str
    outcomes: tuple[SweepOutcome, ...]
    failing: tuple[str, ...] | None
    stats: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.verdict not in (WITNESSED, FAILS_ON_WINDOW, UNDETERMINED):
            raise ConfigError(f"unknown verdict {self.verdict!r}")


def sweep_cylinders(rule: ShiftRule, length: int, cap: int | None = None) -> list[Cylinder]:
    """Admissible length-l cylinders in lex order; centered when two-sided."""
    offset = -((length - 1) // 2) if rule.sidedness == TWO_SIDED else 0
    kwargs = {} if cap is None else {"cap": cap}
    return [Cylinder(w, offset) for w in enumerate_admissible_words(rule, length, **kwargs)]


def _close(
    rule: ShiftRule,
    operation: str,
    params: dict,
    outcomes: list[SweepOutcome],
    extra_stats: dict | None = None,
) -> SweepReport:
    failing = next((o for o in outcomes if o.witness is None), None)
    stats = {"tuples": len(outcomes)}
    witnesses = [o.witness for o in outcomes if o.witness is not None]
    if witnesses:
        stats["max_witness"] = max(witnesses)
    if extra_stats:
        stats.update(extra_stats)
    return SweepReport(
        rule.literal(),
        operation,
        params,
        WITNESSED if failing is None else FAILS_ON_WINDOW,
        tuple(outcomes),
        None if failing is None else failing.words,
        stats,
    )


def _map_ordered(fn: Callable, items: Sequence, threads: int) -> list:
    if threads <= 1 or len(items) < 2:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def _first_run(mask: np.ndarray, run: int) -> int | None:
    """Least n with mask[n : n+run] all true, ignoring index 0."""
    ok = mask.copy()
    ok[0] = False
    for i in range(1, run):
        ok[: mask.size - i] &= mask[i:]
        ok[mask.size - i :] = False
    hits = np.flatnonzero(ok)
    return int(hits[0]) if hits.size else None


def check_transitive(
    rule: ShiftRule, length: int, h: int, mode: str = "plain", threads: int = 1
) -> SweepReport:
    """Sweep ordered pairs of admissible words through the hitting kernel.

    plain demands a nonempty window; thick(L) demands an L-run inside it
    (window evidence for weak mixing); cofinite_from reports the least N0
    with [N0, H] fully inside (window evidence for strong mixing).
    """
    m = _MODE.fullmatch(mode)
    if not m:
        raise ConfigError(f"unknown mode {mode!r}")
    run = int(m.group(1)) if m.group(1) else None
    cylinders = sweep_cylinders(rule, length)
    pairs = list(itertools.product(cylinders, repeat=2))

    def probe(pair: tuple[Cylinder, Cylinder]) -> SweepOutcome:
        u, v = pair
        words = (str(u.word), str(v.word))
        window = hitting_window(rule, u, v, h)
        mask = window.mask
        if mode == "plain":
            members = window.members
            return SweepOutcome(words, members[0] if members else None)
        if run is not None:
            start = _first_run(mask, run)
            detail = {"run_length": run}
            return SweepOutcome(words, start, detail)
        missing = np.flatnonzero(~mask[1:]) + 1
        if missing.size == 0:
            return SweepOutcome(words, 1, {"n0": 1})
        last = int(missing[-1])
        if last >= h:
            return SweepOutcome(words, None, {"last_missing": last})
        return SweepOutcome(words, last + 1, {"n0": last + 1})

    outcomes = _map_ordered(probe, pairs, threads)
    return _close(rule, "check_transitive", {"l": length, "h": h, "mode": mode}, outcomes)


def check_a_transitive(
    rule: ShiftRule, a: Sequence[int], length: int, h: int, threads: int = 1
) -> SweepReport:
    """Multi-transitivity sweep: every r-tuple of cylinder pairs must admit
    a common n with each pair (u_i, v_i) hit at stride a_i."""
    a = tuple(int(x) for x in a)
    if not a or any(x < 1 for x in a):
        raise PreconditionError("vector entries must be >= 1")
    cylinders = sweep_cylinders(rule, length)
    pair_masks: list[dict[tuple[str, str], np.ndarray]] = []
    for ai in a:
        table = {}
        for u, v in itertools.product(cylinders, repeat=2):
            window, _ = linear_hitting(rule, [(0, u), (ai, v)], h)
            table[(str(u.word), str(v.word))] = window.mask
        pair_masks.append(table)

    keys = list(itertools.product(cylinders, repeat=2))

    def probe(tup: tuple) -> SweepOutcome:
        words = tuple(str(c.word) for pair in tup for c in pair)
        combined = pair_masks[0][(words[0], words[1])].copy()
        for i in range(1, len(a)):
            combined &= pair_masks[i][(words[2 * i], words[2 * i + 1])]
        hits = np.flatnonzero(combined)
        if hits.size:
            return SweepOutcome(words, int(hits[0]))
        window, analyses = multi_hitting_analysis(rule, a, list(tup), h)
        cert = emptiness_certificate(rule, window, analyses, h)
        detail = {"certificate": cert} if cert is not None else None
        return SweepOutcome(words, None, detail)

    outcomes = _map_ordered(probe, list(itertools.product(keys, repeat=len(a))), threads)
    return _close(
        rule, "check_a_transitive", {"a": list(a), "l": length, "h": h}, outcomes
    )


def _require_strictly_increasing(a: tuple[int, ...]) -> None:
    if any(y <= x for x, y in zip(a, a[1:])) or (a and a[0] < 1):
        raise PreconditionError(
            "delta vectors must be strictly increasing with positive entries; "
            "a repeated entry, as in (1,1), collapses the diagonal system to "
            "a single point and the sweep would be meaningless"
        )


def check_delta_a_transitive(
    rule: ShiftRule, a: Sequence[int], length: int, h: int, threads: int = 1
) -> SweepReport:
    """Delta-transitivity sweep: every (r+1)-tuple (U_0..U_r) must admit an
    n with U_0 at 0 and U_i at a_i*n jointly admissible.

    Failing tuples carry the kernel's emptiness certificate when one
    exists; without one the verdict stays a window fact.
    """
    a = tuple(int(x) for x in a)
    if not a:
        raise PreconditionError("vector must be nonempty")
    _require_strictly_increasing(a)
    cylinders = sweep_cylinders(rule, length)

    def probe(tup: tuple) -> SweepOutcome:
        words = tuple(str(c.word) for c in tup)
        window, analyses = delta_hitting_analysis(rule, a, list(tup), h)
        members = window.members
        if members:
            return SweepOutcome(words, members[0])
        cert = emptiness_certificate(rule, window, analyses, h)
        detail = {"certificate": cert} if cert is not None else None
        return SweepOutcome(words, None, detail)

    tuples = list(itertools.product(cylinders, repeat=len(a) + 1))
    outcomes = _map_ordered(probe, tuples, threads)
    return _close(
        rule, "check_delta_a_transitive", {"a": list(a), "l": length, "h": h}, outcomes
    )


# ---------------------------------------------------------------------------
# verifiers


@dataclass(frozen=True)
class NuvReport:
    """Comparison of the hitting window with entering-time differences."""

    rule: str
    u: str
    v: str
    h: int
    h_cmp: int
    equal: bool
    mismatches: tuple[int, ...]
    sizes: dict


def _check_scale(rule: ShiftRule, point: GeneratedPoint, scale: int) -> None:
    if scale <= point.scale:
        return
    text = point.prefix_string()
    for w in enumerate_admissible_words(rule, scale, cap=max(scale, 12)):
        if str(w) not in text:
            raise PreconditionError(
                f"prefix is not transitive at scale {scale}: {w} never occurs"
            )


def verify_nuv(
    rule: ShiftRule,
    point: GeneratedPoint,
    u: Word,
    v: Word,
    h: int,
    h_cmp: int | None = None,
) -> NuvReport:
    """Check N(U,V) against N(x,V) - N(x,U) on a truncation-safe window.

    Every difference of entering times is a genuine hitting time, so the
    difference set must embed in the hitting window exactly; the converse
    can miss only through window truncation, and those misses are
    reported.
    """
    if h_cmp is None:
        h_cmp = h // 4
    if h_cmp < 1 or h_cmp > h // 2:
        raise PreconditionError("h_cmp must lie in [1, h/2]")
    if len(point) < h:
        raise PreconditionError(
            f"prefix length {len(point)} is shorter than the horizon {h}"
        )
    _check_scale(rule, point, max(u.length, v.length))
    wu = entering_window(rule, point, u, h - u.length)
    wv = entering_window(rule, point, v, h - v.length)
    diffs = cross_difference(wu, wv).restrict(h_cmp + 1)
    window = hitting_window(rule, Cylinder(u), Cylinder(v), h_cmp)
    b = set(diffs.members) - {0}
    a_set = set(window.members)
    stray = sorted(b - a_set)
    if stray:
        raise AssertionError(
            f"entering-time differences {stray[:8]} missing from the hitting "
            "window; the inclusion is exact and this indicates a kernel bug"
        )
    mismatches = tuple(sorted(a_set - b))
    return NuvReport(
        rule.literal(),
        str(u),
        str(v),
        h,
        h_cmp,
        not mismatches,
        mismatches,
        {"window": len(a_set), "differences": len(b)},
    )


@dataclass(frozen=True)
class OrbitOutcome:
    words: tuple[str, ...]
    lhs: int | None
    rhs: int | None


@dataclass(frozen=True)
class OrbitClosureReport:
    rule: str
    a: tuple[int, ...]
    a_prime: tuple[int, ...]
    length: int
    h: int
    agree: bool
    table: tuple[OrbitOutcome, ...]


def verify_orbit_closure_prop(
    rule: ShiftRule, a: Sequence[int], length: int, h: int, threads: int = 1
) -> OrbitClosureReport:
    """Compare diagonal-orbit density against the reduced delta sweep.

    LHS: some n <= H places U_0..U_r at n*a_1..n*a_{r+1} jointly.  RHS:
    the delta window for a' = (a_2-a_1, ..., a_{r+1}-a_1) is nonempty.
    Both are computed independently; the report records agreement
    tuple-by-tuple.
    """
    a = tuple(int(x) for x in a)
    if len(a) < 2:
        raise PreconditionError("vector must have length >= 2")
    _require_strictly_increasing(a)
    a_prime = tuple(x - a[0] for x in a[1:])
    cylinders = sweep_cylinders(rule, length)

    def probe(tup: tuple) -> OrbitOutcome:
        words = tuple(str(c.word) for c in tup)
        lhs_window, _ = linear_hitting(rule, list(zip(a, tup)), h)
        rhs_window, _ = delta_hitting_analysis(rule, a_prime, list(tup), h)
        lhs = lhs_window.members[0] if lhs_window.members else None
        rhs = rhs_window.members[0] if rhs_window.members else None
        return OrbitOutcome(words, lhs, rhs)

    table = _map_ordered(
        probe, list(itertools.product(cylinders, repeat=len(a))), threads
    )
    agree = all((o.lhs is None) == (o.rhs is None) for o in table)
    return OrbitClosureReport(
        rule.literal(), a, a_prime, length, h, agree, tuple(table)
    )


def verify_delta_product(
    rule: ShiftRule,
    a: Sequence[int],
    n: int,
    length: int,
    h: int,
    threads: int = 1,
) -> SweepReport:
    """Delta-transitivity of the strided product system, swept directly.

    For every coordinate-wise family of (n+1)-tuples of cylinders, some
    m <= H must superpose tuple i along 0, m*a_i, ..., n*m*a_i for every
    coordinate at once.  (Meaningful when the base system passes the
    delta sweep for (1, ..., n*max(a)); that hypothesis is the caller's.)
    """
    a = tuple(int(x) for x in a)
    if not a:
        raise PreconditionError("vector must be nonempty")
    _require_strictly_increasing(a)
    if n < 1:
        raise PreconditionError("n must be >= 1")
    cylinders = sweep_cylinders(rule, length)
    tuples = list(itertools.product(cylinders, repeat=n + 1))

    # per coordinate, deduplicated masks for each (n+1)-tuple
    mask_ids: list[dict[int, int]] = []
    unique_masks: list[np.ndarray] = []
    digests: dict[bytes, int] = {}
    for ai in a:
        ids = {}
        for t_idx, tup in enumerate(tuples):
            placements = [(0, tup[0])] + [(j * ai, tup[j]) for j in range(1, n + 1)]
            window, _ = linear_hitting(rule, placements, h)
            key = window.mask.tobytes()
            if key not in digests:
                digests[key] = len(unique_masks)
                unique_masks.append(window.mask)
            ids[t_idx] = digests[key]
        mask_ids.append(ids)

    witness_cache: dict[tuple[int, ...], int | None] = {}

    def probe(family: tuple[int, ...]) -> SweepOutcome:
        words = tuple(
            str(c.word) for t_idx in family for c in tuples[t_idx]
        )
        key = tuple(mask_ids[i][t_idx] for i, t_idx in enumerate(family))
        if key not in witness_cache:
            combined = unique_masks[key[0]].copy()
            for mid in key[1:]:
                combined &= unique_masks[mid]
            hits = np.flatnonzero(combined)
            witness_cache[key] = int(hits[0]) if hits.size else None
        return SweepOutcome(words, witness_cache[key])

    families = list(itertools.product(range(len(tuples)), repeat=len(a)))
    outcomes = [probe(f) for f in families]
    return _close(
        rule,
        "verify_delta_product",
        {"a": list(a), "n": n, "l": length, "h": h},
        outcomes,
        {"unique_masks": len(unique_masks)},
    )


# ---------------------------------------------------------------------------
# point diagnostics


@dataclass(frozen=True)
class DiagnosticReport:
    rule: str
    query: str
    length: int
    h: int
    verdict: str
    per_cylinder: tuple[tuple[str, WindowReport], ...]


def _dispatch_query(
    s: WindowedSet, query: FamilyQuery
) -> WindowReport:
    if query.kind == "plain":
        return family_window_report(s, query.spec)
    if query.kind == "nabla":
        return nabla_report(s, query.spec)
    if query.kind == "fa":
        return fa_grid_report(s, query.vector, query.grid)
    if query.kind == "fsa":
        return fsa_grid_report(s, query.vector, query.grid)
    if query.kind == "finfty":
        which = "fsa" if query.grid is not None and query.grid.g else "fa"
        return finfty_grid_report(s, query.m_max, query.grid, which=which)
    raise ConfigError(f"unknown query kind {query.kind!r}")


def point_diagnostic(
    rule: ShiftRule,
    point: GeneratedPoint,
    length: int,
    h: int,
    query: FamilyQuery,
    words: Sequence[Word] | None = None,
) -> DiagnosticReport:
    """Apply a family report to each entering window of the point.

    Sweeps every admissible length-l word by default; an explicit word
    list restricts the sweep (useful for periodic points, which are not
    transitive and cannot pass the default scale check).
    """
    if words is None:
        _check_scale(rule, point, length)
        words = list(enumerate_admissible_words(rule, length))
    per: list[tuple[str, WindowReport]] = []
    for w in words:
        s = entering_window(rule, point, w, h)
        per.append((str(w), _dispatch_query(s, query)))
    worst = min(VERDICT_RANK[rep.verdict] for _, rep in per)
    verdict = next(v for v, rank in VERDICT_RANK.items() if rank == worst)
    return DiagnosticReport(
        rule.literal(), query.literal(), length, h, verdict, tuple(per)
    )
