"""Independent brute-force oracles used to freeze expected test values.

Everything here is deliberately naive pure Python (no numpy, no shared code
with the library) so the oracles stay independent of the paths they check.
"""

from itertools import combinations


def egcd_inverse(a: int, q: int) -> int:
    """Extended-Euclid modular inverse."""
    old_r, r = a % q, q
    old_s, s = 1, 0
    while r:
        quo = old_r // r
        old_r, r = r, old_r - quo * r
        old_s, s = s, old_s - quo * s
    if old_r != 1:
        raise ValueError(f"{a} not invertible mod {q}")
    return old_s % q


def naive_rank(rows, q: int) -> int:
    """Row rank over F_q via textbook forward elimination on lists."""
    mat = [[x % q for x in row] for row in rows]
    rank = 0
    n_cols = len(mat[0]) if mat else 0
    col = 0
    while rank < len(mat) and col < n_cols:
        pivot = None
        for r in range(rank, len(mat)):
            if mat[r][col] != 0:
                pivot = r
                break
        if pivot is None:
            col += 1
            continue
        mat[rank], mat[pivot] = mat[pivot], mat[rank]
        inv = egcd_inverse(mat[rank][col], q)
        mat[rank] = [(x * inv) % q for x in mat[rank]]
        for r in range(len(mat)):
            if r != rank and mat[r][col]:
                f = mat[r][col]
                mat[r] = [(x - f * y) % q for x, y in zip(mat[r], mat[rank])]
        rank += 1
        col += 1
    return rank


def naive_in_rowspace(target, rows, q: int) -> bool:
    base = naive_rank(rows, q)
    return naive_rank(list(rows) + [target], q) == base


def brute_longest_chain(zones, m: int):
    """Largest server set where every member owns a dataset held by at most
    m-1 of the other members, by exhaustive subset search. Only usable for
    very small server counts.

    zones: list of dataset index sets, one per server (any hashable items).
    """
    n = len(zones)

    def valid(subset):
        for v in subset:
            others = [u for u in subset if u != v]
            ok = False
            for x in zones[v]:
                if sum(1 for u in others if x in zones[u]) <= m - 1:
                    ok = True
                    break
            if not ok:
                return False
        return True

    for size in range(n, 0, -1):
        for combo in combinations(range(n), size):
            if valid(combo):
                return size, combo
    return 0, ()


def prefix_chain_valid(zones, m: int, order) -> bool:
    """The ordered form: each server owns a dataset seen <= m-1 times among
    its predecessors in the given order."""
    for i, srv in enumerate(order):
        counts = {}
        for s in order[:i]:
            for x in zones[s]:
                counts[x] = counts.get(x, 0) + 1
        if not any(counts.get(x, 0) <= m - 1 for x in zones[srv]):
            return False
    return True
