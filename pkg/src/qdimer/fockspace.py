"""Truncated occupation basis of the two-site dimer and its operator matrices.

Units are atomic (hbar = m = omega = 1).  The single-site position operator is
``x = (a + a^dagger) / sqrt(2)``; the harmonic part ``c_h (p^2 + x^2)`` is
diagonal in the occupation basis with value ``c_h (2n + 1)`` and is assembled
directly, so momentum never needs an explicit realization.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import ConfigError, DimensionError

DEFAULT_MAX_DIM = 4096


@dataclass(frozen=True)
class BasisSpec:
    """Product basis |n1 n2> with ``levels`` occupation states per site.

    Flat index of (n1, n2) is ``n1 * levels + n2``.
    """

    levels: int
    site_count: int = field(default=2, init=False)

    def __post_init__(self):
        if not isinstance(self.levels, (int, np.integer)) or isinstance(self.levels, bool):
            raise ConfigError(f"levels must be an integer, got {self.levels!r}")
        if self.levels < 1:
            raise ConfigError(f"levels must be >= 1, got {self.levels}")
        object.__setattr__(self, "levels", int(self.levels))

    @property
    def dim(self) -> int:
        return self.levels * self.levels

    def encode(self, n1: int, n2: int) -> int:
        N = self.levels
        if not (0 <= n1 < N and 0 <= n2 < N):
            raise IndexError(f"occupation ({n1}, {n2}) outside 0..{N - 1}")
        return n1 * N + n2

    def decode(self, k: int) -> tuple[int, int]:
        if not 0 <= k < self.dim:
            raise IndexError(f"flat index {k} outside 0..{self.dim - 1}")
        return divmod(int(k), self.levels)

    def occupations(self) -> tuple[np.ndarray, np.ndarray]:
        """Arrays (n1, n2) over all flat indices."""
        return np.divmod(np.arange(self.dim), self.levels)

    def swap_permutation(self) -> np.ndarray:
        """perm[k] is the flat index of the site-swapped state of k."""
        n1, n2 = self.occupations()
        return n2 * self.levels + n1


@dataclass(frozen=True)
class ModelParams:
    c_h: float = 0.5
    c_a: float = 0.0
    c_c: float = 0.0

    def __post_init__(self):
        for name in ("c_h", "c_a", "c_c"):
            value = getattr(self, name)
            if not isinstance(value, (int, float, np.floating, np.integer)) or isinstance(value, bool):
                raise ConfigError(f"{name} must be a real number, got {value!r}")
            if not math.isfinite(value):
                raise ConfigError(f"{name} must be finite, got {value!r}")
            object.__setattr__(self, name, float(value))
        if self.c_a < 0:
            raise ConfigError(f"c_a must be >= 0, got {self.c_a}")


@dataclass(frozen=True, eq=False)
class OperatorMatrix:
    """Dense real matrix of an operator.  ``basis`` is None for single-site operators."""

    entries: np.ndarray
    basis: Optional[BasisSpec] = None

    def __post_init__(self):
        entries = np.array(self.entries, dtype=float)
        if entries.ndim != 2 or entries.shape[0] != entries.shape[1]:
            raise ValueError(f"operator matrix must be square, got shape {entries.shape}")
        if self.basis is not None and entries.shape[0] != self.basis.dim:
            raise ValueError(f"matrix of size {entries.shape[0]} does not fit basis of dim {self.basis.dim}")
        entries.setflags(write=False)
        object.__setattr__(self, "entries", entries)

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    def __matmul__(self, other):
        if isinstance(other, OperatorMatrix):
            return self.entries @ other.entries
        return self.entries @ other

    def is_symmetric(self) -> bool:
        return bool(np.array_equal(self.entries, self.entries.T))

    def nonzeros(self):
        """Yield (row, col, value) for every nonzero entry, row-major."""
        rows, cols = np.nonzero(self.entries)
        for r, c in zip(rows.tolist(), cols.tolist()):
            yield r, c, float(self.entries[r, c])


def _check_levels(N):
    if not isinstance(N, (int, np.integer)) or isinstance(N, bool) or N < 1:
        raise ConfigError(f"number of levels must be a positive integer, got {N!r}")
    return int(N)


def build_annihilation(N: int) -> OperatorMatrix:
    N = _check_levels(N)
    return OperatorMatrix(np.diag(np.sqrt(np.arange(1, N, dtype=float)), 1))


def build_creation(N: int) -> OperatorMatrix:
    return OperatorMatrix(build_annihilation(N).entries.T)


def build_number(N: int) -> OperatorMatrix:
    N = _check_levels(N)
    return OperatorMatrix(np.diag(np.arange(N, dtype=float)))


def build_single_site_position(N: int) -> OperatorMatrix:
    """Tridiagonal x with <n-1|x|n> = <n|x|n-1> = sqrt(n/2)."""
    N = _check_levels(N)
    off = np.sqrt(np.arange(1, N, dtype=float) / 2.0)
    return OperatorMatrix(np.diag(off, 1) + np.diag(off, -1))


def build_single_site_x4(N: int) -> OperatorMatrix:
    """Exact matrix elements of x^4 restricted to the window n, m < N.

    Not the fourth power of the truncated x, which is wrong in the top four rows.
    """
    N = _check_levels(N)
    n = np.arange(N, dtype=float)
    m = np.zeros((N, N))
    m[np.arange(N), np.arange(N)] = 0.75 * (2.0 * n * n + 2.0 * n + 1.0)
    if N > 2:
        k = n[: N - 2]
        v = 0.5 * (2.0 * k + 3.0) * np.sqrt((k + 1.0) * (k + 2.0))
        idx = np.arange(N - 2)
        m[idx, idx + 2] = v
        m[idx + 2, idx] = v
    if N > 4:
        k = n[: N - 4]
        v = 0.25 * np.sqrt((k + 1.0) * (k + 2.0) * (k + 3.0) * (k + 4.0))
        idx = np.arange(N - 4)
        m[idx, idx + 4] = v
        m[idx + 4, idx] = v
    return OperatorMatrix(m)


def build_single_site_hamiltonian(N: int, params: ModelParams) -> OperatorMatrix:
    """c_h (p^2 + x^2) + c_a x^4 for one site (coupling ignored)."""
    N = _check_levels(N)
    h = params.c_h * np.diag(2.0 * np.arange(N, dtype=float) + 1.0)
    if params.c_a != 0.0:
        h = h + params.c_a * build_single_site_x4(N).entries
    return OperatorMatrix(h)


def check_dimension(basis: BasisSpec, max_dim: int = DEFAULT_MAX_DIM) -> None:
    if basis.dim > max_dim:
        raise DimensionError(
            f"product basis dimension {basis.dim} (levels={basis.levels}) exceeds max_dim={max_dim}"
        )


def build_hamiltonian(basis: BasisSpec, params: ModelParams, max_dim: int = DEFAULT_MAX_DIM) -> OperatorMatrix:
    """Dimer Hamiltonian c_h sum(p^2+x^2) + c_a sum(x^4) + c_c x1 x2 in the product basis."""
    check_dimension(basis, max_dim)
    N = basis.levels
    eye = np.eye(N)
    h1 = build_single_site_hamiltonian(N, params).entries
    H = np.kron(h1, eye) + np.kron(eye, h1)
    if params.c_c != 0.0:
        x = build_single_site_position(N).entries
        H = H + params.c_c * np.kron(x, x)
    return OperatorMatrix(H, basis)


def build_exchange_operator(basis: BasisSpec) -> OperatorMatrix:
    """Permutation matrix swapping the two sites."""
    P = np.zeros((basis.dim, basis.dim))
    P[basis.swap_permutation(), np.arange(basis.dim)] = 1.0
    return OperatorMatrix(P, basis)


def build_parity_operator(basis: BasisSpec) -> OperatorMatrix:
    """Total parity (-1)^(n1+n2); conserved because x1 x2 flips both site parities."""
    n1, n2 = basis.occupations()
    return OperatorMatrix(np.diag(np.where((n1 + n2) % 2 == 0, 1.0, -1.0)), basis)


def site_number_diagonals(basis: BasisSpec) -> tuple[np.ndarray, np.ndarray]:
    """Diagonals of n_1 and n_2 in the product basis."""
    n1, n2 = basis.occupations()
    return n1.astype(float), n2.astype(float)


def write_operator_csv(op: OperatorMatrix, path) -> None:
    """Debug dump: one ``row,col,value`` line per nonzero entry."""
    with open(path, "w", newline="") as fh:
        fh.write("row,col,value\n")
        for r, c, v in op.nonzeros():
            fh.write(f"{r},{c},{v:.17g}\n")
