"""Coherent and product initial states and their projection spectra."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy.special import gammainc, gammaln, i0e

from .errors import BasisMismatchError, ConfigError, TruncationWarning
from .fockspace import BasisSpec, ModelParams, OperatorMatrix

LEAKAGE_WARN = 1e-6

CONVENTIONS = ("standard", "literal")


@dataclass(frozen=True, eq=False)
class StateVector:
    """Complex amplitudes over a product basis.

    ``leakage`` is the probability the untruncated state had outside the
    window, before renormalization.
    """

    amplitudes: np.ndarray
    basis: BasisSpec
    normalized: bool = True
    leakage: float = 0.0

    def __post_init__(self):
        amp = np.array(self.amplitudes, dtype=complex)
        if amp.shape != (self.basis.dim,):
            raise BasisMismatchError(f"amplitude vector of length {amp.shape} does not fit basis dim {self.basis.dim}")
        if self.normalized:
            norm = np.linalg.norm(amp)
            if norm == 0.0:
                raise ValueError("cannot normalize the zero vector")
            amp = amp / norm
        amp.setflags(write=False)
        object.__setattr__(self, "amplitudes", amp)

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def expectation(self, op) -> float:
        M = op.entries if isinstance(op, OperatorMatrix) else np.asarray(op)
        return float(np.real(np.vdot(self.amplitudes, M @ self.amplitudes)))

    def overlap(self, other: "StateVector") -> complex:
        _check_same_basis(self.basis, other.basis)
        return complex(np.vdot(self.amplitudes, other.amplitudes))


def _check_same_basis(a: Optional[BasisSpec], b: Optional[BasisSpec]) -> None:
    if a is None or b is None:
        return
    if a.levels != b.levels:
        raise BasisMismatchError(f"basis mismatch: {a.levels} vs {b.levels} levels per site")


def single_site_coefficients(N: int, x0: float, convention: str = "standard", p0: float = 0.0):
    """Unrenormalized coefficients on 0..N-1 and the leakage outside the window."""
    if not isinstance(N, (int, np.integer)) or N < 1:
        raise ConfigError(f"number of levels must be a positive integer, got {N!r}")
    if convention not in CONVENTIONS:
        raise ConfigError(f"unknown coherent-state convention {convention!r}; choose from {CONVENTIONS}")
    i = np.arange(N, dtype=float)
    if convention == "standard":
        alpha = complex(x0, p0) / math.sqrt(2.0)
        lam = abs(alpha) ** 2
        if lam == 0.0:
            c = np.zeros(N, dtype=complex)
            c[0] = 1.0
            return c, 0.0
        log_mod = -0.5 * lam + i * math.log(abs(alpha)) - 0.5 * gammaln(i + 1.0)
        c = np.exp(log_mod) * np.exp(1j * i * np.angle(alpha))
        # Poisson tail P(n >= N) is the regularized lower incomplete gamma
        return c, float(gammainc(N, lam))
    if p0 != 0.0:
        raise ConfigError("the literal-formula convention has no momentum displacement")
    r = abs(x0)
    if r == 0.0:
        c = np.zeros(N, dtype=complex)
        c[0] = 1.0
        return c, 0.0
    log_w = i * math.log(r) - gammaln(i + 1.0)
    # untruncated sum of squared weights is I0(2r); keep everything in log space
    log_total = math.log(i0e(2.0 * r)) + 2.0 * r
    c = np.exp(log_w - 0.5 * log_total).astype(complex)
    inside = float(np.sum(np.abs(c) ** 2))
    return c, max(0.0, 1.0 - inside)


def coherent_site_state(N: int, x0: float, convention: str = "standard", p0: float = 0.0) -> np.ndarray:
    """Single-site coherent coefficients, renormalized over the truncated window.

    ``standard`` is the Glauber state with alpha = (x0 + i p0)/sqrt(2);
    ``literal`` uses weights |x0|^i / i!.  Warns with TruncationWarning when more
    than 1e-6 of the probability falls outside the window.
    """
    c, leak = single_site_coefficients(N, x0, convention, p0)
    if leak > LEAKAGE_WARN:
        warnings.warn(f"coherent state x0={x0} loses {leak:.3g} probability beyond {N} levels", TruncationWarning,
                      stacklevel=2)
    return c / np.linalg.norm(c)


def product_initial_state(basis: BasisSpec, x0_site1: float, x0_site2: float = 0.0,
                          convention: str = "standard") -> StateVector:
    """Product of two single-site coherent states; (x0, 0) is one-site, (x0, x0) both-site displacement."""
    N = basis.levels
    leaks = []
    factors = []
    for x0 in (x0_site1, x0_site2):
        c, leak = single_site_coefficients(N, x0, convention)
        if leak > LEAKAGE_WARN:
            warnings.warn(f"coherent state x0={x0} loses {leak:.3g} probability beyond {N} levels",
                          TruncationWarning, stacklevel=2)
        factors.append(c / np.linalg.norm(c))
        leaks.append(leak)
    amp = np.outer(factors[0], factors[1]).ravel()
    leakage = 1.0 - (1.0 - leaks[0]) * (1.0 - leaks[1])
    return StateVector(amp, basis, True, leakage)


@dataclass(frozen=True)
class StateRecipe:
    """Callable description of an initial state, independent of truncation."""

    kind: str = "osd"
    x0: float = 1.0
    convention: str = "standard"

    def __post_init__(self):
        if self.kind not in ("osd", "bsd"):
            raise ConfigError(f"state must be 'osd' or 'bsd', got {self.kind!r}")
        if self.convention not in CONVENTIONS:
            raise ConfigError(f"unknown coherent-state convention {self.convention!r}")

    def __call__(self, basis: BasisSpec) -> StateVector:
        second = self.x0 if self.kind == "bsd" else 0.0
        return product_initial_state(basis, self.x0, second, self.convention)


@dataclass(frozen=True)
class SpectrumLine:
    eigen_index: int
    energy: float
    intensity: float


@dataclass(frozen=True, eq=False)
class Spectrum:
    """Projection of a state onto every eigenvector.

    ``leakage`` is 1 - sum of intensities; ``truncation_leakage`` is carried
    over from the state.
    """

    energies: np.ndarray
    intensities: np.ndarray
    overlaps: np.ndarray
    truncation_leakage: float = 0.0

    @property
    def parseval(self) -> float:
        return float(np.sum(self.intensities))

    @property
    def leakage(self) -> float:
        return 1.0 - self.parseval

    @property
    def mean_energy(self) -> float:
        return float(np.sum(self.intensities * self.energies) / self.parseval)

    @property
    def lines(self) -> list[SpectrumLine]:
        return [SpectrumLine(k, float(e), float(w)) for k, (e, w) in enumerate(zip(self.energies, self.intensities))]

    def strongest(self, count: int) -> np.ndarray:
        """Eigen indices of the ``count`` most intense lines, strongest first."""
        order = np.lexsort((np.arange(self.intensities.size), -self.intensities))
        return order[:count]


def spectrum(state: StateVector, eigs) -> Spectrum:
    """Intensities |<psi|e_k>|^2 for all eigenvectors of ``eigs``."""
    _check_same_basis(state.basis, eigs.basis)
    if state.amplitudes.shape[0] != eigs.dim:
        raise BasisMismatchError(f"state of dim {state.amplitudes.shape[0]} vs eigensystem of dim {eigs.dim}")
    overlaps = eigs.vectors.T @ state.amplitudes
    intensities = np.abs(overlaps) ** 2
    return Spectrum(np.array(eigs.values), intensities, overlaps, state.leakage)


def classical_energy(q1: float, q2: float, params: ModelParams, p1: float = 0.0, p2: float = 0.0) -> float:
    """Classical dimer energy at a phase-space point."""
    harmonic = params.c_h * (p1 * p1 + q1 * q1 + p2 * p2 + q2 * q2)
    return harmonic + params.c_a * (q1 ** 4 + q2 ** 4) + params.c_c * q1 * q2


def write_spectrum_csv(spec: Spectrum, path, symmetry: Optional[Sequence] = None,
                       classes: Optional[Sequence] = None) -> None:
    """CSV ``eigen_index,energy_au,intensity,symmetry,class`` ordered by eigen index."""
    n = spec.energies.size
    sym = list(symmetry) if symmetry is not None else [""] * n
    cls = list(classes) if classes is not None else [""] * n
    with open(path, "w", newline="") as fh:
        fh.write("eigen_index,energy_au,intensity,symmetry,class\n")
        for k in range(n):
            fh.write(f"{k},{spec.energies[k]:.17g},{spec.intensities[k]:.17g},{sym[k]},{cls[k]}\n")
