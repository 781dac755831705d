"""Dense symmetric eigendecomposition and truncation-convergence checks."""

from __future__ import annotations

import re
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional, Sequence

import numpy as np
import scipy.linalg

from .errors import BasisMismatchError, ConfigError, DiagonalizationError
from .fockspace import BasisSpec, ModelParams, OperatorMatrix, build_hamiltonian
from .tridiag import eigh_householder_ql

DEGENERACY_RTOL = 1e-9

METHODS = ("lapack", "lapack-qr", "householder-ql")


@dataclass(frozen=True, eq=False)
class EigenSystem:
    """Ascending eigenvalues; column k of ``vectors`` belongs to ``values[k]``.

    ``symmetry`` and ``parity`` hold +1/-1 labels (0 for mixed) once the
    vectors have been rotated onto exchange/parity eigenvectors.
    """

    values: np.ndarray
    vectors: np.ndarray
    basis: Optional[BasisSpec] = None
    params: Optional[ModelParams] = None
    method: str = "lapack"
    symmetry: Optional[np.ndarray] = None
    parity: Optional[np.ndarray] = None

    def __post_init__(self):
        for name in ("values", "vectors", "symmetry", "parity"):
            arr = getattr(self, name)
            if arr is not None:
                arr = np.array(arr)
                arr.setflags(write=False)
                object.__setattr__(self, name, arr)

    @property
    def dim(self) -> int:
        return self.values.shape[0]

    def vector(self, k: int) -> np.ndarray:
        return self.vectors[:, k]

    def orthonormality_error(self) -> float:
        V = self.vectors
        return float(np.max(np.abs(V.T @ V - np.eye(self.dim))))

    def residual_errors(self, H) -> np.ndarray:
        """max_i |(H v_k - E_k v_k)_i| / max(1, |E_k|) for every k."""
        M = H.entries if isinstance(H, OperatorMatrix) else np.asarray(H)
        R = M @ self.vectors - self.vectors * self.values
        return np.max(np.abs(R), axis=0) / np.maximum(1.0, np.abs(self.values))

    def check(self, H, orth_tol=1e-10, residual_tol=1e-9) -> None:
        """Raise DiagonalizationError if any EigenSystem invariant is violated."""
        if np.any(np.diff(self.values) < 0):
            raise DiagonalizationError("eigenvalues are not ascending")
        orth = self.orthonormality_error()
        if orth >= orth_tol:
            raise DiagonalizationError(f"eigenvectors not orthonormal (max deviation {orth:.3g})")
        res = self.residual_errors(H)
        bad = int(np.argmax(res))
        if res[bad] >= residual_tol:
            raise DiagonalizationError(f"residual {res[bad]:.3g} too large at eigenvalue index {bad}", index=bad)


def _lapack_failure_index(exc) -> Optional[int]:
    m = re.search(r"(\d+)", str(exc))
    return int(m.group(1)) if m else None


def diagonalize(H, method: str = "lapack", params: Optional[ModelParams] = None,
                max_iterations: Optional[int] = None) -> EigenSystem:
    """Full spectrum of a real symmetric matrix.

    ``lapack`` uses divide and conquer (dsyevd), ``lapack-qr`` the implicit
    QL/QR routine (dsyev) and ``householder-ql`` the pure-numpy solver.
    """
    if isinstance(H, OperatorMatrix):
        M, basis = H.entries, H.basis
    else:
        M, basis = np.asarray(H, dtype=float), None
    if M.ndim != 2 or M.shape[0] != M.shape[1] or M.shape[0] < 1:
        raise ValueError(f"expected a non-empty square matrix, got shape {M.shape}")
    if not np.array_equal(M, M.T):
        raise ValueError("matrix is not symmetric")
    if method not in METHODS:
        raise ConfigError(f"unknown eigensolver {method!r}; choose from {METHODS}")
    try:
        if method == "householder-ql":
            values, vectors = eigh_householder_ql(M, max_iterations=max_iterations)
        else:
            driver = "evd" if method == "lapack" else "ev"
            values, vectors = scipy.linalg.eigh(M, driver=driver, check_finite=True)
    except np.linalg.LinAlgError as exc:
        idx = _lapack_failure_index(exc)
        raise DiagonalizationError(f"eigensolver failed to converge (index {idx}): {exc}", index=idx) from exc
    return EigenSystem(values, vectors, basis, params, method)


def solve(basis: BasisSpec, params: ModelParams, method: str = "lapack", max_dim: Optional[int] = None) -> EigenSystem:
    """Build and diagonalize the dimer Hamiltonian."""
    kwargs = {} if max_dim is None else {"max_dim": max_dim}
    H = build_hamiltonian(basis, params, **kwargs)
    return diagonalize(H, method=method, params=params)


def degenerate_clusters(values, rtol: float = DEGENERACY_RTOL) -> list[np.ndarray]:
    """Runs of consecutive eigenvalues closer than rtol * max(1, |E|)."""
    values = np.asarray(values)
    if values.size == 0:
        return []
    gaps = np.diff(values)
    tie = gaps <= rtol * np.maximum(1.0, np.abs(values[:-1]))
    clusters, start = [], 0
    for i, t in enumerate(tie):
        if not t:
            clusters.append(np.arange(start, i + 1))
            start = i + 1
    clusters.append(np.arange(start, values.size))
    return clusters


def embed_vectors(vectors: np.ndarray, small: BasisSpec, large: BasisSpec) -> np.ndarray:
    """Map columns over a small product basis into a larger one by occupation."""
    if small.levels > large.levels:
        raise BasisMismatchError("cannot embed a larger basis into a smaller one")
    n1, n2 = small.occupations()
    out = np.zeros((large.dim,) + vectors.shape[1:], dtype=vectors.dtype)
    out[n1 * large.levels + n2] = vectors
    return out


@dataclass
class ConvergenceStep:
    levels_small: int
    levels_large: int
    weighted_shift: float
    bottom_shift: float
    mean_energy_shift: float
    converged: bool


@dataclass
class ConvergenceReport:
    params: ModelParams
    levels: list[int]
    tol: float
    steps: list[ConvergenceStep] = field(default_factory=list)

    @property
    def converged(self) -> bool:
        return bool(self.steps) and self.steps[-1].converged

    def to_dict(self) -> dict:
        return {
            "params": {"c_h": self.params.c_h, "c_a": self.params.c_a, "c_c": self.params.c_c},
            "levels": list(self.levels),
            "tol": self.tol,
            "converged": self.converged,
            "steps": [vars(s).copy() for s in self.steps],
        }


def match_levels(small: EigenSystem, large: EigenSystem) -> np.ndarray:
    """For each eigenvector of the small basis, the index of the large-basis eigenvector it overlaps most."""
    embedded = embed_vectors(small.vectors, small.basis, large.basis)
    overlap = (large.vectors.T @ embedded) ** 2
    return np.argmax(overlap, axis=0)


def convergence_scan(params: ModelParams, state_recipe: Callable, levels: Sequence[int], tol: float = 1e-3,
                     bottom_fraction: float = 0.8, method: str = "lapack") -> ConvergenceReport:
    """Compare spectra between consecutive truncations.

    Levels are matched by maximal eigenvector overlap.  ``weighted_shift`` is
    sum_k I_k |E_k(small) - E_k(large)| with intensities I_k of the state in
    the small basis; ``bottom_shift`` is the largest shift among the lowest
    ``bottom_fraction`` of the small spectrum.
    """
    from .states import spectrum

    levels = [int(n) for n in levels]
    if len(levels) < 2:
        raise ConfigError("convergence scan needs at least two truncations")
    if any(b <= a for a, b in zip(levels, levels[1:])):
        raise ConfigError(f"truncations must be strictly ascending, got {levels}")
    report = ConvergenceReport(params, levels, tol)
    prev = None
    for N in levels:
        basis = BasisSpec(N)
        eigs = solve(basis, params, method=method)
        spec = spectrum(state_recipe(basis), eigs)
        if prev is not None:
            (eigs0, spec0), N0 = prev
            m = match_levels(eigs0, eigs)
            shifts = np.abs(eigs0.values - eigs.values[m])
            weighted = float(np.sum(spec0.intensities * shifts))
            n_bottom = max(1, int(bottom_fraction * eigs0.dim))
            bottom = float(np.max(shifts[:n_bottom]))
            mean_shift = abs(spec0.mean_energy - spec.mean_energy)
            report.steps.append(ConvergenceStep(N0, N, weighted, bottom, mean_shift, weighted < tol))
        prev = ((eigs, spec), N)
    return report


def cache_key(levels: int, params: ModelParams) -> str:
    """Exact bit-pattern key for (N, c_h, c_a, c_c)."""
    bits = "_".join(struct.pack("<d", v).hex() for v in (params.c_h, params.c_a, params.c_c))
    return f"N{int(levels)}_{bits}"


def save_eigensystem(eigs: EigenSystem, directory) -> Path:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    path = directory / f"{cache_key(eigs.basis.levels, eigs.params)}.npz"
    np.savez(path, values=eigs.values, vectors=eigs.vectors, levels=eigs.basis.levels,
             params=np.array([eigs.params.c_h, eigs.params.c_a, eigs.params.c_c]))
    return path


def load_eigensystem(directory, levels: int, params: ModelParams) -> Optional[EigenSystem]:
    path = Path(directory) / f"{cache_key(levels, params)}.npz"
    if not path.exists():
        return None
    with np.load(path) as data:
        return EigenSystem(data["values"], data["vectors"], BasisSpec(int(data["levels"])), params, "cache")
