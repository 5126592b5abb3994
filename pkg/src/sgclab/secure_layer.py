"""Non-secure to secure transform and its verification.

Factor the transmission matrix as T = C * B where B is a basis of
rowspace(T) whose first m rows are the demand rows. The trailing columns of
C route r = rank(T) - m independent uniform keys; the secure transmission
is X_n = T_n W + Kc_n K. Any decoding combination c with c T_A = D_j then
has c C_A = e_j, so its key coefficients cancel automatically and securing
never changes decodability.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from sgclab.codegen import TransmissionPlan
from sgclab.ff_linalg import (
    DimensionMismatchError,
    FieldMatrix,
    factor_through_demand,
    solve_against,
)


class DemandNotRecoverableError(ValueError):
    """The plan cannot express some demand row; no key plan exists."""


class TooLargeError(ValueError):
    """Exhaustive enumeration bound exceeded."""


EXHAUSTIVE_STATE_LIMIT = 10**8


@dataclass(frozen=True)
class KeyPlan:
    r: int               # independent keys, = rank(T) - m
    B: FieldMatrix       # rank(T) x (m*K); first m rows equal D
    C: FieldMatrix       # N x rank(T) with T = C B
    Kc: FieldMatrix      # N x r: per-server key coefficients (last cols of C)

    def eta(self, m: int) -> Fraction:
        return Fraction(self.r, m)

    def to_json_dict(self) -> dict:
        return {
            "r": self.r,
            "B": self.B.data.tolist(),
            "C": self.C.data.tolist(),
            "Kc": self.Kc.data.tolist(),
        }


def gen_keys(plan: TransmissionPlan, seed: int = 0) -> KeyPlan:
    """Build the key plan for a transmission plan.

    Deterministic given the plan; the seed names the key-material stream
    used when actual key symbols are sampled (see sample_keys), which is
    kept disjoint from any message sampling.
    """
    try:
        b_mat, c_mat = factor_through_demand(plan.T, plan.D)
    except DimensionMismatchError as exc:
        raise DemandNotRecoverableError(str(exc)) from exc
    m = plan.params.m
    r = b_mat.rows - m
    kc = c_mat.take_cols(range(m, b_mat.rows))
    return KeyPlan(r, b_mat, c_mat, kc)


# Distinct stream tag: key material never shares a generator stream with
# message sampling, matching the independence requirement on the keys.
_KEY_STREAM_TAG = 0x6B6579


def sample_keys(keys: KeyPlan, q: int, l_sub: int, seed: int) -> np.ndarray:
    """r uniform key vectors of length l_sub from a dedicated stream."""
    rng = np.random.default_rng([_KEY_STREAM_TAG, seed])
    return rng.integers(0, q, size=(keys.r, l_sub), dtype=np.int64)


@dataclass
class SecurityVerdict:
    passed: bool
    method: str
    mi_value: Fraction | None = None  # conditional leakage in q-ary symbols
    witness: list | None = None       # offending key-free combination c T
    notes: str = ""

    def to_json_dict(self) -> dict:
        return {
            "passed": self.passed,
            "method": self.method,
            "mi_value": None
            if self.mi_value is None
            else {"num": self.mi_value.numerator, "den": self.mi_value.denominator},
            "witness": self.witness,
            "notes": self.notes,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict(), sort_keys=True)


def check_security_rank(plan: TransmissionPlan, keys: KeyPlan) -> SecurityVerdict:
    """Linear security criterion: every key-free observable combination of
    the transmissions reveals only demand content.

    Passes iff c T lies in rowspace(D) for every basis vector c of the left
    null space of Kc. Works for arbitrary (including adversarial) Kc.
    """
    basis = keys.Kc.left_nullspace()
    for i in range(basis.rows):
        row = (basis.data[i] @ plan.T.data) % plan.T.field.q
        if solve_against(plan.D, FieldMatrix(plan.T.field, row.reshape(1, -1)))[0] is None:
            return SecurityVerdict(
                False,
                "left-null rank criterion",
                witness=row.tolist(),
                notes="key-free combination leaks beyond the demand rows",
            )
    return SecurityVerdict(True, "left-null rank criterion")


def decode_cancellation(plan: TransmissionPlan, keys: KeyPlan, subset) -> bool:
    """True iff every demand row is decodable from the subset with zero net
    key coefficient."""
    idx = [s - 1 for s in subset]
    t_a = plan.T.take_rows(idx)
    kc_a = keys.Kc.data[idx]
    q = plan.T.field.q
    for c in solve_against(t_a, plan.D):
        if c is None:
            return False
        if ((c @ kc_a) % q).any():
            return False
    return True


def _digit_matrix(count: int, digits: int, q: int) -> np.ndarray:
    """All q**digits tuples as rows (least significant digit first)."""
    idx = np.arange(count, dtype=np.int64)
    cols = [(idx // q**d) % q for d in range(digits)]
    return np.stack(cols, axis=1)


def check_security_exhaustive(
    plan: TransmissionPlan, keys: KeyPlan, q_small: int | None = None
) -> SecurityVerdict:
    """Exact conditional leakage I(W; X | sum) by full enumeration of all
    message and key tuples (one symbol per sub-message).

    Every conditional distribution involved is uniform over a coset of a
    fixed subgroup, so the mutual information is an integer number of q-ary
    symbols: log_q |support(X | sum)| - rank(Kc). The enumeration verifies
    the uniformity instead of assuming it.
    """
    q = plan.T.field.q if q_small is None else q_small
    if q != plan.T.field.q:
        raise TooLargeError("plan must be built over the enumeration field")
    p = plan.params
    n_w = p.k * p.m
    r = keys.r
    if q ** (n_w + r) > EXHAUSTIVE_STATE_LIMIT:
        raise TooLargeError(
            f"{q}**{n_w + r} states exceed the {EXHAUSTIVE_STATE_LIMIT} bound"
        )

    w_all = _digit_matrix(q**n_w, n_w, q)            # every message tuple
    s_all = (w_all @ plan.D.data.T) % q               # its demand value
    x_base = (w_all @ plan.T.data.T) % q              # keyless transmissions
    k_all = _digit_matrix(q**r, max(r, 1), q)[:, :r]  # every key tuple
    offsets = (k_all @ keys.Kc.data.T) % q if r else np.zeros((1, p.n), dtype=np.int64)

    pow_s = q ** np.arange(p.m, dtype=np.int64)
    pow_x = q ** np.arange(p.n, dtype=np.int64)
    s_idx = s_all @ pow_s

    rank_kc = keys.Kc.rank()
    mi_per_s = []
    for s_val in range(q**p.m):
        sel = np.nonzero(s_idx == s_val)[0]
        if sel.size == 0:
            return SecurityVerdict(
                False, "exhaustive enumeration", notes="demand value unreachable"
            )
        counts: dict = {}
        for off in offsets:
            x_idx = ((x_base[sel] + off) % q) @ pow_x
            uniq, cnt = np.unique(x_idx, return_counts=True)
            for u, c in zip(uniq.tolist(), cnt.tolist()):
                counts[u] = counts.get(u, 0) + c
        values = set(counts.values())
        support = len(counts)
        if len(values) != 1:
            return SecurityVerdict(
                False,
                "exhaustive enumeration",
                mi_value=None,
                notes="transmission distribution not uniform given the sum",
            )
        exponent = round(math.log(support, q))
        if q**exponent != support:
            return SecurityVerdict(
                False,
                "exhaustive enumeration",
                mi_value=None,
                notes="support size is not a power of the field order",
            )
        mi_per_s.append(exponent - rank_kc)
    if len(set(mi_per_s)) != 1:
        return SecurityVerdict(
            False,
            "exhaustive enumeration",
            notes="leakage varies across demand values",
        )
    mi = Fraction(mi_per_s[0])
    return SecurityVerdict(
        mi == 0,
        "exhaustive enumeration",
        mi_value=mi,
        notes=f"I(W; X | sum) = {mi} q-ary symbols per slice",
    )


def zeroed_keys(keys: KeyPlan) -> KeyPlan:
    """Adversarial variant with all key coefficients removed."""
    zero = FieldMatrix.zeros(keys.Kc.field, keys.Kc.rows, keys.Kc.cols)
    return KeyPlan(keys.r, keys.B, keys.C, zero)
