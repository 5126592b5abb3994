"""Exact linear algebra over a prime field F_q.

Matrices are dense numpy int64 arrays with entries reduced into [0, q).
All elimination is plain Gaussian elimination; instances are desk-scale,
so there is no attempt at fraction-free or blocked variants.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

DEFAULT_Q = 65537

# Keeps q**2 * n_cols well inside int64 for every matmul/elimination here.
_MAX_Q = 1 << 21


class ZeroInverseError(ZeroDivisionError):
    """Raised when inverting 0 in F_q."""


class DimensionMismatchError(ValueError):
    """Raised when operand shapes are incompatible."""


def _is_prime(n: int) -> bool:
    if n < 2:
        return False
    i = 2
    while i * i <= n:
        if n % i == 0:
            return False
        i += 1
    return True


@dataclass(frozen=True)
class PrimeField:
    """Shared field context; elements are plain ints in [0, q)."""

    q: int = DEFAULT_Q

    def __post_init__(self):
        if self.q < 3 or self.q % 2 == 0 or not _is_prime(self.q):
            raise ValueError(f"q={self.q} must be an odd prime >= 3")
        if self.q >= _MAX_Q:
            raise ValueError(f"q={self.q} too large for int64 arithmetic (max {_MAX_Q - 1})")

    def elem(self, value) -> int:
        """Reduce an int or Fraction-like value into [0, q)."""
        num = getattr(value, "numerator", None)
        if num is not None and getattr(value, "denominator", 1) != 1:
            return self.mul(num % self.q, self.inv(value.denominator % self.q))
        return int(value) % self.q

    def add(self, a: int, b: int) -> int:
        return (a + b) % self.q

    def sub(self, a: int, b: int) -> int:
        return (a - b) % self.q

    def mul(self, a: int, b: int) -> int:
        return (a * b) % self.q

    def neg(self, a: int) -> int:
        return (-a) % self.q

    def inv(self, a: int) -> int:
        """Multiplicative inverse; a * inv(a) = 1 (mod q)."""
        a %= self.q
        if a == 0:
            raise ZeroInverseError("0 has no multiplicative inverse")
        return pow(a, self.q - 2, self.q)

    def rand_nonzero(self, rng, size) -> np.ndarray:
        return rng.integers(1, self.q, size=size, dtype=np.int64)

    def rand(self, rng, size) -> np.ndarray:
        return rng.integers(0, self.q, size=size, dtype=np.int64)


def field_inv(field: PrimeField, a: int) -> int:
    return field.inv(a)


class FieldMatrix:
    """Dense matrix over F_q. Treated as immutable after construction."""

    __slots__ = ("field", "data")

    def __init__(self, field: PrimeField, data):
        arr = np.asarray(data, dtype=np.int64)
        if arr.ndim != 2:
            raise DimensionMismatchError(f"expected 2-D data, got ndim={arr.ndim}")
        self.field = field
        self.data = arr % field.q

    # -- constructors -------------------------------------------------

    @classmethod
    def zeros(cls, field: PrimeField, rows: int, cols: int) -> "FieldMatrix":
        return cls(field, np.zeros((rows, cols), dtype=np.int64))

    @classmethod
    def identity(cls, field: PrimeField, n: int) -> "FieldMatrix":
        return cls(field, np.eye(n, dtype=np.int64))

    @classmethod
    def from_rows(cls, field: PrimeField, rows) -> "FieldMatrix":
        return cls(field, np.array([np.asarray(r, dtype=np.int64) for r in rows]))

    @classmethod
    def random(cls, field: PrimeField, rng, rows: int, cols: int) -> "FieldMatrix":
        return cls(field, field.rand(rng, (rows, cols)))

    # -- basics -------------------------------------------------------

    @property
    def rows(self) -> int:
        return self.data.shape[0]

    @property
    def cols(self) -> int:
        return self.data.shape[1]

    def row(self, i: int) -> np.ndarray:
        return self.data[i].copy()

    def copy(self) -> "FieldMatrix":
        return FieldMatrix(self.field, self.data.copy())

    def transpose(self) -> "FieldMatrix":
        return FieldMatrix(self.field, self.data.T.copy())

    def take_rows(self, idx) -> "FieldMatrix":
        return FieldMatrix(self.field, self.data[list(idx), :])

    def take_cols(self, idx) -> "FieldMatrix":
        return FieldMatrix(self.field, self.data[:, list(idx)])

    def vstack(self, other: "FieldMatrix") -> "FieldMatrix":
        self._check_field(other)
        if self.cols != other.cols:
            raise DimensionMismatchError("vstack column mismatch")
        return FieldMatrix(self.field, np.vstack([self.data, other.data]))

    def _check_field(self, other: "FieldMatrix"):
        if self.field.q != other.field.q:
            raise DimensionMismatchError("field mismatch")

    def __add__(self, other: "FieldMatrix") -> "FieldMatrix":
        self._check_field(other)
        return FieldMatrix(self.field, self.data + other.data)

    def __sub__(self, other: "FieldMatrix") -> "FieldMatrix":
        self._check_field(other)
        return FieldMatrix(self.field, self.data - other.data)

    def __matmul__(self, other: "FieldMatrix") -> "FieldMatrix":
        self._check_field(other)
        if self.cols != other.rows:
            raise DimensionMismatchError(
                f"matmul shapes {self.data.shape} x {other.data.shape}"
            )
        return FieldMatrix(self.field, self.data @ other.data)

    def scale(self, c: int) -> "FieldMatrix":
        return FieldMatrix(self.field, self.data * (c % self.field.q))

    def is_zero(self) -> bool:
        return not self.data.any()

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, FieldMatrix)
            and self.field.q == other.field.q
            and self.data.shape == other.data.shape
            and bool((self.data == other.data).all())
        )

    def __repr__(self) -> str:
        return f"FieldMatrix(q={self.field.q}, {self.data.shape[0]}x{self.data.shape[1]})"

    # -- elimination ---------------------------------------------------

    def rref(self, max_pivot_col: int | None = None):
        """Reduced row echelon form.

        Pivots are restricted to columns < max_pivot_col when given, which
        lets callers treat trailing columns as augmented right-hand sides.
        Returns (reduced ndarray, pivot column list).
        """
        q = self.field.q
        a = self.data.copy()
        n_rows, n_cols = a.shape
        limit = n_cols if max_pivot_col is None else max_pivot_col
        pivots = []
        r = 0
        for c in range(limit):
            if r == n_rows:
                break
            nz = np.nonzero(a[r:, c])[0]
            if nz.size == 0:
                continue
            p = r + nz[0]
            if p != r:
                a[[r, p]] = a[[p, r]]
            a[r] = (a[r] * pow(int(a[r, c]), q - 2, q)) % q
            col = a[:, c].copy()
            col[r] = 0
            rows_nz = np.nonzero(col)[0]
            if rows_nz.size:
                a[rows_nz] = (a[rows_nz] - np.outer(col[rows_nz], a[r])) % q
            pivots.append(c)
            r += 1
        return a, pivots

    def rank(self) -> int:
        """Row rank over F_q via exact elimination."""
        _, pivots = self.rref()
        return len(pivots)

    def row_reduce(self) -> "FieldMatrix":
        """RREF with zero rows dropped: a canonical basis of the rowspace."""
        a, pivots = self.rref()
        return FieldMatrix(self.field, a[: len(pivots)])

    def right_nullspace(self) -> "FieldMatrix":
        """Rows form a basis of {x : M x^T = 0}; row count = cols - rank."""
        a, pivots = self.rref()
        n_cols = self.cols
        free = [c for c in range(n_cols) if c not in set(pivots)]
        basis = np.zeros((len(free), n_cols), dtype=np.int64)
        for i, f in enumerate(free):
            basis[i, f] = 1
            for r, p in enumerate(pivots):
                basis[i, p] = (-a[r, f]) % self.field.q
        return FieldMatrix(self.field, basis)

    def left_nullspace(self) -> "FieldMatrix":
        """Rows form a basis of {c : c M = 0}; row count = rows - rank."""
        return self.transpose().right_nullspace()


def rank(m: FieldMatrix) -> int:
    return m.rank()


def left_nullspace(m: FieldMatrix) -> FieldMatrix:
    return m.left_nullspace()


def solve_against(space: FieldMatrix, targets: FieldMatrix):
    """Solve x * space = t for each row t of targets.

    Returns a list with one entry per target row: the coefficient vector
    (ndarray of length space.rows) when t lies in the rowspace of space,
    else None.
    """
    if space.cols != targets.cols:
        raise DimensionMismatchError("target/space column mismatch")
    n = space.rows
    aug = np.hstack([space.data.T, targets.data.T])
    reduced, pivots = FieldMatrix(space.field, aug).rref(max_pivot_col=n)
    rk = len(pivots)
    out = []
    for j in range(targets.rows):
        col = reduced[:, n + j]
        if col[rk:].any():
            out.append(None)
            continue
        x = np.zeros(n, dtype=np.int64)
        x[pivots] = col[:rk]
        out.append(x)
    return out


def solve_row_membership(target, space: FieldMatrix):
    """Coefficients c with c * space = target, or None if target is outside
    the rowspace."""
    t = np.asarray(target, dtype=np.int64).reshape(1, -1)
    return solve_against(space, FieldMatrix(space.field, t))[0]


def in_rowspace(target, space: FieldMatrix) -> bool:
    return solve_row_membership(target, space) is not None


def factor_through_demand(t_mat: FieldMatrix, d_mat: FieldMatrix):
    """Factor T = C * B where B is a basis of rowspace(T) whose first rows
    equal the demand matrix D.

    B's completion rows are the first rows of T that extend D's span under
    elimination, so the factorization is deterministic for a given plan.
    Raises DimensionMismatchError when some row of D is outside rowspace(T).
    """
    if t_mat.cols != d_mat.cols:
        raise DimensionMismatchError("T/D column mismatch")
    lam = t_mat.rank()
    for c in solve_against(t_mat, d_mat):
        if c is None:
            raise DimensionMismatchError("demand row outside rowspace(T)")
    basis_rows = [d_mat.data[i] for i in range(d_mat.rows)]
    current = FieldMatrix(t_mat.field, np.array(basis_rows))
    rk = current.rank()
    if rk != d_mat.rows:
        raise DimensionMismatchError("demand rows are not linearly independent")
    for i in range(t_mat.rows):
        if rk == lam:
            break
        cand = current.vstack(FieldMatrix(t_mat.field, t_mat.data[i : i + 1]))
        if cand.rank() > rk:
            current = cand
            rk += 1
    if rk != lam:
        raise DimensionMismatchError("failed to complete demand to a basis of rowspace(T)")
    b_mat = current
    coeffs = solve_against(b_mat, t_mat)
    c_mat = FieldMatrix(t_mat.field, np.array(coeffs))
    return b_mat, c_mat
