"""Secure gradient coding laboratory.

Constructs data assignments and finite-field linear coding schemes for the
straggler-tolerant sum-aggregation problem, applies the key-masking
transform, and verifies decodability, communication cost, key size, and
information-theoretic security by exhaustive linear-algebraic checks.
"""

from sgclab.ff_linalg import DEFAULT_Q, FieldMatrix, PrimeField

__all__ = ["DEFAULT_Q", "FieldMatrix", "PrimeField"]
__version__ = "0.1.0"
