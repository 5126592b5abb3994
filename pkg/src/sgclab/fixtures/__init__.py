"""Pinned regression matrices for the (12, 7) odd-M instance.

The shipped JSON is a transcription; the identity checks in
``verify_fixture`` are what make it trustworthy (a transcription error
breaks the annihilation identities).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field as dc_field
from fractions import Fraction
from importlib import resources

import numpy as np

from sgclab.ff_linalg import DEFAULT_Q, FieldMatrix, PrimeField

_N, _M_BIG, _M = 12, 7, 2
_TAIL = list(range(8, 13))  # datasets cyclically assigned to the tail servers


def _parse(field: PrimeField, rows) -> FieldMatrix:
    data = [[field.elem(Fraction(cell)) for cell in row] for row in rows]
    return FieldMatrix(field, np.array(data, dtype=np.int64))


@dataclass
class Example1Fixture:
    """Paper-layout matrices: F (6x24, slice-major columns), the alignment
    directions E (5x10) and annihilators S (5x4) for the tail servers."""

    field: PrimeField
    F: FieldMatrix
    E: FieldMatrix
    S: FieldMatrix

    @property
    def tail_cols(self) -> list:
        # slice-major layout: dataset k slice j sits at (j-1)*12 + (k-1)
        return [(j * _N) + (k - 1) for j in range(_M) for k in _TAIL]

    def f_prime(self) -> FieldMatrix:
        """Rows 3..6 of F restricted to the tail-dataset columns."""
        return self.F.take_rows([2, 3, 4, 5]).take_cols(self.tail_cols)

    def tail_missing_positions(self, i: int) -> list:
        """Positions in [1..5] of the tail datasets server 7+i cannot
        compute (it holds the cyclic window of 3 starting at slot i)."""
        held = {(i - 1 + jj) % 5 + 1 for jj in range(3)}
        return sorted(set(range(1, 6)) - held)

    def missing_cols_in_fprime(self, i: int) -> list:
        pos = self.tail_missing_positions(i)
        return [p - 1 for p in pos] + [5 + p - 1 for p in pos]

    def transmissions(self) -> FieldMatrix:
        """The full 12-row plan the pinned matrices induce (paper layout)."""
        f = self.F.data
        q = self.field.q
        first = (f[0] - f[2] + f[1] - f[3]) % q
        second = (f[0] - f[2] - (f[1] - f[3])) % q
        mid_stack = np.vstack([(2 * f[0] - f[2]) % q, (2 * f[1] - f[3]) % q, f[4], f[5]])
        tail_stack = f[2:6]
        rows = [first, second]
        rows += list((self.S.data @ mid_stack) % q)
        rows += list((self.S.data @ tail_stack) % q)
        return FieldMatrix(self.field, np.array(rows))

    def demand(self) -> FieldMatrix:
        return self.F.take_rows([0, 1])


def load_example1(q: int = DEFAULT_Q) -> Example1Fixture:
    field = PrimeField(q)
    raw = json.loads(
        resources.files("sgclab.fixtures").joinpath("example1.json").read_text()
    )
    return Example1Fixture(
        field, _parse(field, raw["F"]), _parse(field, raw["E"]), _parse(field, raw["S"])
    )


@dataclass
class FixtureReport:
    failures: list = dc_field(default_factory=list)

    def check(self, name: str, ok: bool):
        if not ok:
            self.failures.append(name)

    @property
    def passed(self) -> bool:
        return not self.failures


def verify_fixture(fix: Example1Fixture) -> FixtureReport:
    """Identity checks that pin the transcription to the construction."""
    rep = FixtureReport()
    rep.check("rank(F) = 6", fix.F.rank() == 6)
    fp = fix.f_prime()
    rep.check("F'1 E^T = 0 (4x5)", (fp @ fix.E.transpose()).is_zero())
    et = fix.E.transpose()
    rep.check("E^T is 10x5 full rank", et.rows == 10 and et.cols == 5 and et.rank() == 5)
    null = et.left_nullspace()
    rep.check("null space of E^T has dimension 5", null.rows == 5)
    for r in range(4):
        rep.check(
            f"F'1 row {r + 1} lies in the null space of E^T",
            ((FieldMatrix(fix.field, fp.data[r : r + 1]) @ et).is_zero()),
        )
    for i in range(1, 6):
        sub = fp.take_cols(fix.missing_cols_in_fprime(i))
        s_row = FieldMatrix(fix.field, fix.S.data[i - 1 : i, :])
        rep.check(f"s_{i} annihilates server {7 + i}'s missing columns", (s_row @ sub).is_zero())
    for i in range(1, 6):
        e_row = fix.E.data[i - 1]
        support = set(np.nonzero(e_row)[0].tolist())
        expected = set(fix.missing_cols_in_fprime(i))
        rep.check(f"e_{i} supported on server {7 + i}'s missing columns", support <= expected)
    return rep
