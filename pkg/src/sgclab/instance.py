"""Problem parameters and dataset-to-server assignments.

Servers and datasets are 1-based throughout, matching the wrap-around
convention Mod(b, a) in [1, a]. An assignment stores, per server, the set
of dataset indices it computes; every construction here assigns each
dataset to exactly M servers.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field


class InvalidParamsError(ValueError):
    """Raised for inconsistent (K, N, N_r, m) tuples."""


class NotDivisibleError(ValueError):
    """Raised when a construction needs a divisibility that does not hold."""


def mod1(b: int, a: int) -> int:
    """Modulo with values in [1, a] instead of [0, a-1]."""
    r = b % a
    return a if r == 0 else r


@dataclass(frozen=True)
class Params:
    """System tuple (K, N, N_r, m) with derived computation load M."""

    k: int
    n: int
    n_r: int
    m: int
    l_sub: int = 1

    @property
    def m_big(self) -> int:
        return self.n - self.n_r + self.m

    def validate(self):
        if min(self.k, self.n, self.n_r, self.m, self.l_sub) < 1:
            raise InvalidParamsError("all parameters must be positive integers")
        if self.n_r > self.n:
            raise InvalidParamsError(f"N_r={self.n_r} exceeds N={self.n}")
        if self.m > self.m_big:
            raise InvalidParamsError(
                f"m={self.m} exceeds per-server load M={self.m_big}"
            )
        if self.m_big > self.n:
            raise InvalidParamsError(f"M={self.m_big} exceeds N={self.n}")
        if self.k % self.n != 0:
            raise InvalidParamsError(f"K={self.k} must be a multiple of N={self.n}")
        return self


def derive_params(k: int, n: int, n_r: int, m: int, l_sub: int = 1) -> Params:
    return Params(k, n, n_r, m, l_sub).validate()


@dataclass(frozen=True)
class Assignment:
    """Per-server dataset index sets Z_1..Z_N over [K]."""

    n: int
    m_big: int
    zones: tuple

    def __post_init__(self):
        object.__setattr__(self, "zones", tuple(frozenset(z) for z in self.zones))
        if len(self.zones) != self.n:
            raise InvalidParamsError("zone count must equal server count")

    @property
    def k(self) -> int:
        return max((max(z) for z in self.zones if z), default=0)

    def multiplicity(self, dataset: int) -> int:
        return sum(1 for z in self.zones if dataset in z)

    def to_json_dict(self) -> dict:
        return {
            "n": self.n,
            "m_big": self.m_big,
            "zones": [sorted(z) for z in self.zones],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict(), sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "Assignment":
        d = json.loads(text)
        return cls(d["n"], d["m_big"], tuple(frozenset(z) for z in d["zones"]))


# ---------------------------------------------------------------------------
# Elementary constructions
# ---------------------------------------------------------------------------


def cyclic_assignment(n: int, m_big: int) -> Assignment:
    """Server i holds the M consecutive datasets starting at its own index,
    wrapping around."""
    zones = [
        frozenset(mod1(i + j, n) for j in range(m_big)) for i in range(1, n + 1)
    ]
    return Assignment(n, m_big, tuple(zones))


def fractional_repetition_assignment(n: int, m_big: int) -> Assignment:
    """Servers and datasets split into N/M blocks; whole-block replication."""
    if n % m_big != 0:
        raise NotDivisibleError(f"M={m_big} does not divide N={n}")
    zones = []
    for i in range(1, n + 1):
        block = (i - 1) // m_big
        zones.append(frozenset(range(block * m_big + 1, (block + 1) * m_big + 1)))
    return Assignment(n, m_big, tuple(zones))


def all_hold_all_assignment(n: int) -> Assignment:
    return Assignment(n, n, tuple(frozenset(range(1, n + 1)) for _ in range(n)))


def group_datasets(k: int, n: int) -> dict:
    """Group map for reducing K datasets to N merged messages: dataset k
    belongs to group Mod(k, N)."""
    if k % n != 0:
        raise NotDivisibleError(f"N={n} does not divide K={k}")
    return {dataset: mod1(dataset, n) for dataset in range(1, k + 1)}


# ---------------------------------------------------------------------------
# Combined recursive assignment
# ---------------------------------------------------------------------------


class Branch(enum.Enum):
    BASE_ALL = "base_all"          # N = M: every server holds everything
    FRACREP = "fracrep"            # M | N: fractional repetition
    SCHEME1 = "scheme1"            # N > 2M: repetition blocks + remainder
    SCHEME2 = "scheme2"            # 1.5M <= N < 2M, M even, M >= 2m
    SCHEME3 = "scheme3"            # 1.5M <= N < 2M, M odd, M >= 2m+1
    SCHEME4 = "scheme4"            # M < N < 1.5M, M >= 2m
    CYCLIC_FALLBACK = "cyclic"     # no case applies: cyclic always works


class UnsupportedBranchError(ValueError):
    """Raised only when the cyclic fallback is disabled."""


def select_branch(n: int, m_big: int, m: int) -> Branch:
    """Case split of the combined recursive construction."""
    if m_big > n or m_big < 1 or m < 1:
        raise InvalidParamsError(f"bad sub-instance (N={n}, M={m_big}, m={m})")
    if n == m_big:
        return Branch.BASE_ALL
    if n % m_big == 0:
        return Branch.FRACREP
    if n > 2 * m_big:
        return Branch.SCHEME1
    if 2 * n >= 3 * m_big:  # 1.5M <= N < 2M
        if m_big % 2 == 0 and m_big >= 2 * m:
            return Branch.SCHEME2
        if m_big % 2 == 1 and m_big >= 2 * m + 1:
            return Branch.SCHEME3
        return Branch.CYCLIC_FALLBACK
    if m_big >= 2 * m:  # M < N < 1.5M
        return Branch.SCHEME4
    return Branch.CYCLIC_FALLBACK


def scheme1_split(n: int, m_big: int):
    """Number of repetition blocks and remaining sub-instance size."""
    blocks = (n - m_big) // m_big  # floor(N/M - 1)
    return blocks, n - blocks * m_big


def scheme3_windows(n: int, m_big: int):
    """y, t and per-server cyclic windows over the tail datasets [M+1:N].

    Server y+i holds [1:t] plus the length-(M-t) window starting at slot i;
    server M+i holds [t+1:M] plus the length-t window starting at slot i.
    """
    y = 2 * m_big - n
    t = (m_big - 1) // 2
    tail = n - m_big

    def window(i: int, length: int):
        return frozenset(m_big + mod1(i + j, tail) for j in range(length))

    return y, t, window


def _scheme1_zones(n: int, m_big: int, sub_zones) -> tuple:
    blocks, n_rem = scheme1_split(n, m_big)
    zones = []
    for b in range(blocks):
        block_set = frozenset(range(b * m_big + 1, (b + 1) * m_big + 1))
        zones.extend([block_set] * m_big)
    offset = blocks * m_big
    zones.extend(frozenset(offset + d for d in z) for z in sub_zones)
    return tuple(zones)


def _scheme2_zones(n: int, m_big: int, sub_zones) -> tuple:
    y = 2 * m_big - n
    half = m_big // 2
    zones = []
    zones.extend([frozenset(range(1, m_big + 1))] * half)
    zones.extend(
        [frozenset(range(1, y + 1)) | frozenset(range(m_big + 1, n + 1))] * half
    )
    for z in sub_zones:  # pair p covers datasets y+p and M+p
        zones.append(frozenset(y + p for p in z) | frozenset(m_big + p for p in z))
    return tuple(zones)


def _scheme3_zones(n: int, m_big: int) -> tuple:
    y, t, window = scheme3_windows(n, m_big)
    zones = [frozenset(range(1, m_big + 1))] * y
    head = frozenset(range(1, t + 1))
    mid = frozenset(range(t + 1, m_big + 1))
    for i in range(1, n - m_big + 1):
        zones.append(head | window(i, m_big - t))
    for i in range(1, n - m_big + 1):
        zones.append(mid | window(i, t))
    return tuple(zones)


def _scheme4_zones(n: int, m_big: int, sub_zones) -> tuple:
    shared = frozenset(range(1, n - m_big + 1))
    tail = frozenset(range(n - m_big + 1, n + 1))
    zones = [shared | frozenset(n - m_big + d for d in z) for z in sub_zones]
    zones.extend([tail] * (n - m_big))
    return tuple(zones)


def combined_assignment(p: Params, allow_fallback: bool = True) -> Assignment:
    """Recursive assignment of the combined construction. Requires K = N."""
    p.validate()
    if p.k != p.n:
        raise InvalidParamsError("combined assignment operates at K = N")
    zones, _ = _combined_zones(p.n, p.m_big, p.m, allow_fallback)
    return Assignment(p.n, p.m_big, zones)


def _combined_zones(n: int, m_big: int, m: int, allow_fallback: bool):
    branch = select_branch(n, m_big, m)
    trace = [(branch.value, n, m_big)]
    if branch is Branch.BASE_ALL:
        return all_hold_all_assignment(n).zones, trace
    if branch is Branch.FRACREP:
        return fractional_repetition_assignment(n, m_big).zones, trace
    if branch is Branch.SCHEME1:
        _, n_rem = scheme1_split(n, m_big)
        sub, sub_trace = _combined_zones(n_rem, m_big, m, allow_fallback)
        return _scheme1_zones(n, m_big, sub), trace + sub_trace
    if branch is Branch.SCHEME2:
        sub, sub_trace = _combined_zones(n - m_big, m_big // 2, m, allow_fallback)
        return _scheme2_zones(n, m_big, sub), trace + sub_trace
    if branch is Branch.SCHEME3:
        return _scheme3_zones(n, m_big), trace
    if branch is Branch.SCHEME4:
        sub, sub_trace = _combined_zones(m_big, 2 * m_big - n, m, allow_fallback)
        return _scheme4_zones(n, m_big, sub), trace + sub_trace
    if not allow_fallback:
        raise UnsupportedBranchError(f"no branch applies to (N={n}, M={m_big}, m={m})")
    return cyclic_assignment(n, m_big).zones, trace


# ---------------------------------------------------------------------------
# Validation
# ---------------------------------------------------------------------------


@dataclass
class AssignmentReport:
    m_big: int
    multiplicities: dict
    bad_datasets: list = field(default_factory=list)
    bad_zones: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not self.bad_datasets and not self.bad_zones


def validate_assignment(a: Assignment, p: Params) -> AssignmentReport:
    """Checks every dataset lands in exactly M zones and |Z_n| = M."""
    m_big = p.m_big
    mult = {d: a.multiplicity(d) for d in range(1, p.k + 1)}
    bad_datasets = [d for d, c in mult.items() if c != m_big]
    bad_zones = [i + 1 for i, z in enumerate(a.zones) if len(z) != m_big]
    return AssignmentReport(m_big, mult, bad_datasets, bad_zones)
