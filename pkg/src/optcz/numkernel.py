"""Small dense complex linear algebra: permanents, 2x2 SVD, Hermitian
eigendecomposition and positive-semidefinite projection.

Matrices are plain ``numpy`` arrays of dtype ``complex128``. Every function
here is pure and leaves its inputs untouched.
"""

from itertools import permutations
from typing import NamedTuple

import numpy as np

from .errors import DimensionError, ShapeError, SymmetryError, UnsupportedMultiplicityError

NAIVE_MAX_N = 4
RYSER_MAX_N = 16
HERMITIAN_TOL = 1e-10


class SingularDecomposition(NamedTuple):
    """``m == left @ np.diag(values) @ right`` with ``values`` descending."""

    left: np.ndarray
    values: np.ndarray
    right: np.ndarray


def as_matrix(m, name="matrix"):
    """Return ``m`` as a finite 2-D complex array."""
    a = np.asarray(m, dtype=complex)
    if a.ndim != 2:
        raise DimensionError(f"{name} must be 2-D, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError(f"{name} has non-finite entries")
    return a


def _require_square(a):
    if a.shape[0] != a.shape[1]:
        raise DimensionError(f"expected a square matrix, got shape {a.shape}")


def permanent_naive(m):
    """Permanent as the plain sum over all n! permutations."""
    a = as_matrix(m)
    _require_square(a)
    rows = range(a.shape[0])
    total = 0j
    for perm in permutations(rows):
        total += np.prod(a[rows, perm])
    return complex(total)


def permanent_ryser(m):
    """Ryser's inclusion-exclusion formula walked in Gray-code order.

    Each step toggles one column in the subset and updates the row sums
    in O(n), giving O(2^n n) overall.
    """
    a = as_matrix(m)
    _require_square(a)
    n = a.shape[0]
    if n == 0:
        return 1 + 0j
    row_sums = np.zeros(n, dtype=complex)
    in_subset = np.zeros(n, dtype=bool)
    total = 0j
    size = 0
    for k in range(1, 1 << n):
        j = (k & -k).bit_length() - 1
        if in_subset[j]:
            row_sums -= a[:, j]
        else:
            row_sums += a[:, j]
        in_subset[j] = not in_subset[j]
        size += 1 if in_subset[j] else -1
        total += (-1) ** size * np.prod(row_sums)
    return complex((-1) ** n * total)


def permanent(m):
    """Permanent of a square complex matrix.

    Uses the permutation sum up to 4x4 and Ryser's formula up to 16x16.
    An empty matrix has permanent 1.
    """
    a = as_matrix(m)
    _require_square(a)
    n = a.shape[0]
    if n <= NAIVE_MAX_N:
        return permanent_naive(a)
    if n > RYSER_MAX_N:
        raise DimensionError(f"permanent supports n <= {RYSER_MAX_N}, got {n}")
    return permanent_ryser(a)


def _check_occupation(occ, n_modes, name):
    o = np.asarray(occ)
    if o.ndim != 1 or o.shape[0] != n_modes:
        raise ShapeError(f"{name} must have length {n_modes}, got {o.shape}")
    if np.any(o < 0) or np.any(o != np.round(o)):
        raise ValueError(f"{name} must hold non-negative integers")
    if np.any(o > 1):
        raise UnsupportedMultiplicityError(f"{name} has a mode with more than one photon")
    return o.astype(bool)


def permanent_sub(m, row_occ, col_occ):
    """Permanent of the submatrix keeping rows/columns whose occupation is 1."""
    a = as_matrix(m)
    rows = _check_occupation(row_occ, a.shape[0], "row_occ")
    cols = _check_occupation(col_occ, a.shape[1], "col_occ")
    if rows.sum() != cols.sum():
        raise ShapeError(
            f"photon numbers differ: {int(rows.sum())} in rows, {int(cols.sum())} in columns"
        )
    return permanent(a[np.ix_(rows, cols)])


def svd2(m):
    """Singular value decomposition of a 2x2 complex matrix."""
    a = as_matrix(m)
    if a.shape != (2, 2):
        raise ShapeError(f"svd2 needs a 2x2 matrix, got {a.shape}")
    u, s, vh = np.linalg.svd(a)
    return SingularDecomposition(u, s, vh)


def hermiticity_residual(m):
    """Max-abs entry of the anti-Hermitian part ``(m - m^dagger)/2``."""
    a = as_matrix(m)
    _require_square(a)
    return float(np.max(np.abs(a - a.conj().T)) / 2) if a.size else 0.0


def _hermitian(m):
    a = as_matrix(m)
    _require_square(a)
    res = hermiticity_residual(a)
    if res > HERMITIAN_TOL:
        raise SymmetryError(f"matrix is not Hermitian (residual {res:.3g})")
    return (a + a.conj().T) / 2


def eigh(m):
    """Eigenvalues (ascending) and orthonormal eigenvectors of a Hermitian matrix.

    The input is symmetrized first so round-off in the anti-Hermitian part is
    absorbed.
    """
    a = _hermitian(m)
    if a.shape[0] > RYSER_MAX_N:
        raise DimensionError(f"eigh supports n <= {RYSER_MAX_N}")
    w, v = np.linalg.eigh(a)
    return w, v


def project_psd(m):
    """Nearest positive-semidefinite matrix in Frobenius norm (eigenvalue clipping)."""
    w, v = eigh(m)
    out = (v * np.clip(w, 0.0, None)) @ v.conj().T
    return (out + out.conj().T) / 2


def max_singular_value(m):
    a = as_matrix(m)
    return float(np.linalg.norm(a, 2)) if a.size else 0.0
