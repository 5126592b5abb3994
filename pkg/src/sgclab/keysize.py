"""Source key size quantities: the recursive count of independent coded
combinations, closed-form achievable/converse values, and the longest-chain
search that drives the assignment-specific lower bound.

All key sizes are exact rationals; nothing here touches floats.
"""

from __future__ import annotations

import itertools
import json
import random
from dataclasses import dataclass
from fractions import Fraction
from math import ceil

from sgclab.instance import Assignment, Branch, scheme1_split, select_branch

EXHAUSTIVE_CHAIN_LIMIT = 14
GREEDY_RESTARTS = 1000


@dataclass(frozen=True)
class HStep:
    branch: str
    n: int
    m_big: int
    value: int


def h_recursive(n: int, m_big: int, m: int):
    """Number of linearly independent combinations transmitted by all
    servers under the combined construction.

    Returns (h, trace). Sub-instances whose branch preconditions fail use
    the cyclic fallback h = N' - M + m and are flagged in the trace.
    """
    branch = select_branch(n, m_big, m)
    if branch is Branch.BASE_ALL:
        value = m
        return value, [HStep(branch.value, n, m_big, value)]
    if branch is Branch.FRACREP:
        value = m * n // m_big
        return value, [HStep(branch.value, n, m_big, value)]
    if branch is Branch.SCHEME1:
        blocks, n_rem = scheme1_split(n, m_big)
        sub, sub_trace = h_recursive(n_rem, m_big, m)
        value = sub + m * blocks
        return value, [HStep(branch.value, n, m_big, value)] + sub_trace
    if branch is Branch.SCHEME2:
        sub, sub_trace = h_recursive(n - m_big, m_big // 2, m)
        value = sub + m
        return value, [HStep(branch.value, n, m_big, value)] + sub_trace
    if branch is Branch.SCHEME3:
        value = n - (3 * m_big - 1) // 2 + 2 * m
        return value, [HStep(branch.value, n, m_big, value)]
    if branch is Branch.SCHEME4:
        sub, sub_trace = h_recursive(m_big, 2 * m_big - n, m)
        return sub, [HStep(branch.value, n, m_big, sub)] + sub_trace
    value = n - m_big + m  # cyclic fallback transmits N_r' independent rows
    return value, [HStep(branch.value, n, m_big, value)]


def fallback_used(trace) -> bool:
    return any(step.branch == Branch.CYCLIC_FALLBACK.value for step in trace)


def eta_achievable(n: int, m_big: int, m: int) -> Fraction:
    h, _ = h_recursive(n, m_big, m)
    return Fraction(h, m) - 1


def eta_converse_closed(n: int, n_r: int, m: int) -> Fraction:
    """ceil(mN / (N - N_r + m)) / m - 1."""
    m_big = n - n_r + m
    return Fraction(ceil(Fraction(m * n, m_big)), m) - 1


def eta_cyclic_closed(n_r: int, m: int) -> Fraction:
    return Fraction(n_r, m) - 1


def eta_fracrep_closed(n: int, m_big: int) -> Fraction:
    return Fraction(n, m_big) - 1


def chain_bound(length: int, m: int) -> Fraction:
    """Key-size lower bound |s|/m - 1 certified by a chain of that length."""
    return Fraction(length, m) - 1


@dataclass(frozen=True)
class ChainResult:
    length: int
    witness: tuple
    exact: bool  # False means greedy search: length is a lower bound only

    def bound(self, m: int) -> Fraction:
        return chain_bound(self.length, m)


def _holder_masks(a: Assignment):
    masks = {}
    for i, zone in enumerate(a.zones):
        for d in zone:
            masks[d] = masks.get(d, 0) | (1 << i)
    return masks


def _valid_chain_mask(mask: int, zones, masks, m: int) -> bool:
    # Every member owns a dataset held by at most m-1 OTHER members. This
    # implies the ordered prefix form of the condition for every ordering
    # of the set, and is the form the counting argument actually certifies;
    # the prefix form alone admits sets that break the achievable key size.
    rest = mask
    while rest:
        bit = rest & -rest
        rest ^= bit
        v = bit.bit_length() - 1
        others = mask ^ bit
        if not any((masks[d] & others).bit_count() <= m - 1 for d in zones[v]):
            return False
    return True


def longest_chain(a: Assignment, m: int) -> ChainResult:
    """Longest server chain: each member owns a dataset held by at most m-1
    of the other members (so any ordering of the witness has each server's
    dataset seen at most m-1 times among its predecessors).

    Exhaustive over all server subsets for N <= 14; seeded greedy restarts
    above that, flagged as a lower bound.
    """
    if a.n <= EXHAUSTIVE_CHAIN_LIMIT:
        return _chain_exhaustive(a, m)
    return _chain_greedy(a, m)


def _chain_exhaustive(a: Assignment, m: int) -> ChainResult:
    n = a.n
    masks = _holder_masks(a)
    zones = a.zones
    best_mask = 0
    for mask in range(1, 1 << n):
        if mask.bit_count() <= best_mask.bit_count():
            continue
        if _valid_chain_mask(mask, zones, masks, m):
            best_mask = mask
    witness = tuple(v + 1 for v in range(n) if best_mask & (1 << v))
    return ChainResult(best_mask.bit_count(), witness, True)


def _chain_greedy(a: Assignment, m: int) -> ChainResult:
    n = a.n
    masks = _holder_masks(a)
    zones = a.zones
    rng = random.Random(0)
    best = ChainResult(0, (), False)
    for _ in range(GREEDY_RESTARTS):
        order = list(range(n))
        rng.shuffle(order)
        mask = 0
        for v in order:
            cand = mask | (1 << v)
            if _valid_chain_mask(cand, zones, masks, m):
                mask = cand
        if mask.bit_count() > best.length:
            witness = tuple(v + 1 for v in range(n) if mask & (1 << v))
            best = ChainResult(mask.bit_count(), witness, False)
    return best


def verify_chain(a: Assignment, m: int, witness) -> bool:
    """Check both chain conditions on a witness: the set form (each member
    owns a dataset held by <= m-1 others) and, as a consequence, the ordered
    prefix form along the witness order."""
    masks = _holder_masks(a)
    mask = 0
    for srv in witness:
        mask |= 1 << (srv - 1)
    if not _valid_chain_mask(mask, a.zones, masks, m):
        return False
    counts = {}
    for srv in witness:
        zone = a.zones[srv - 1]
        if not any(counts.get(d, 0) <= m - 1 for d in zone):
            return False
        for d in zone:
            counts[d] = counts.get(d, 0) + 1
    return True


def min_max_chain_over_assignments(n: int, m_big: int, m: int) -> int:
    """Exhaustively evaluates the min over all valid equal-load assignments
    of the max chain length. Exponential; intended for N <= 8 only."""
    best = None
    zone_choices = list(itertools.combinations(range(1, n + 1), m_big))
    for zones in itertools.product(zone_choices, repeat=n):
        mult = {}
        for z in zones:
            for d in z:
                mult[d] = mult.get(d, 0) + 1
        if any(mult.get(d, 0) != m_big for d in range(1, n + 1)):
            continue
        res = _chain_exhaustive(Assignment(n, m_big, tuple(map(frozenset, zones))), m)
        if best is None or res.length < best:
            best = res.length
    return best


@dataclass
class KeySizeReport:
    """Achievable vs bound key sizes for one parameter point."""

    n: int
    n_r: int
    m: int
    m_big: int
    h_value: int
    eta_achieved: Fraction
    eta_converse: Fraction
    eta_cyclic: Fraction
    eta_fracrep: Fraction | None
    chain_length: int | None
    chain_exact: bool
    fallback_used: bool
    notes: str = ""

    @property
    def chain_bound_value(self) -> Fraction | None:
        if self.chain_length is None:
            return None
        return chain_bound(self.chain_length, self.m)

    def to_json_dict(self) -> dict:
        def frac(x):
            if x is None:
                return None
            return {"num": x.numerator, "den": x.denominator}

        return {
            "n": self.n,
            "n_r": self.n_r,
            "m": self.m,
            "m_big": self.m_big,
            "h": self.h_value,
            "eta_achieved": frac(self.eta_achieved),
            "eta_converse": frac(self.eta_converse),
            "eta_cyclic": frac(self.eta_cyclic),
            "eta_fracrep": frac(self.eta_fracrep),
            "chain_length": self.chain_length,
            "chain_exact": self.chain_exact,
            "chain_bound": frac(self.chain_bound_value),
            "fallback_used": self.fallback_used,
            "notes": self.notes,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict(), sort_keys=True)
