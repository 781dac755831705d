"""Time-domain observables evaluated exactly in the eigenbasis."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import ConfigError
from .fockspace import site_number_diagonals
from .states import StateVector, _check_same_basis, spectrum

CHUNK = 256


@dataclass(frozen=True)
class TimeGrid:
    t_start: float = 0.0
    t_end: float = 200.0
    n_points: int = 4001

    def __post_init__(self):
        if not (math.isfinite(self.t_start) and math.isfinite(self.t_end)):
            raise ConfigError("time grid bounds must be finite")
        if self.t_end <= self.t_start:
            raise ConfigError(f"t_end ({self.t_end}) must exceed t_start ({self.t_start})")
        if int(self.n_points) != self.n_points or self.n_points < 2:
            raise ConfigError(f"n_points must be an integer >= 2, got {self.n_points}")
        object.__setattr__(self, "n_points", int(self.n_points))

    @property
    def times(self) -> np.ndarray:
        return np.linspace(self.t_start, self.t_end, self.n_points)

    @property
    def step(self) -> float:
        return (self.t_end - self.t_start) / (self.n_points - 1)


@dataclass(frozen=True, eq=False)
class AutocorrSeries:
    times: np.ndarray
    values: np.ndarray

    @property
    def abs(self) -> np.ndarray:
        return np.abs(self.values)

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            fh.write("t_au,re,im,abs\n")
            for t, v in zip(self.times, self.values):
                fh.write(f"{t:.17g},{v.real:.17g},{v.imag:.17g},{abs(v):.17g}\n")


@dataclass(frozen=True, eq=False)
class OccupationTrace:
    times: np.ndarray
    n1: np.ndarray
    n2: np.ndarray

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            fh.write("t_au,n1,n2\n")
            for t, a, b in zip(self.times, self.n1, self.n2):
                fh.write(f"{t:.17g},{a:.17g},{b:.17g}\n")


def _phases(energies: np.ndarray, times: np.ndarray) -> np.ndarray:
    return np.exp(-1j * np.outer(times, energies))


def autocorrelation(state: StateVector, eigs, grid: TimeGrid) -> AutocorrSeries:
    """A(t) = sum_k |c_k|^2 exp(-i E_k t) on every grid point."""
    spec = spectrum(state, eigs)
    times = grid.times
    values = np.empty(times.size, dtype=complex)
    for start in range(0, times.size, CHUNK):
        stop = start + CHUNK
        values[start:stop] = _phases(spec.energies, times[start:stop]) @ spec.intensities
    return AutocorrSeries(times, values)


def evolve_state(state: StateVector, eigs, t: float) -> StateVector:
    """exp(-iHt) applied through the eigendecomposition."""
    _check_same_basis(state.basis, eigs.basis)
    coeff = eigs.vectors.T @ state.amplitudes
    amp = eigs.vectors @ (np.exp(-1j * eigs.values * t) * coeff)
    return StateVector(amp, state.basis, normalized=False, leakage=state.leakage)


def site_occupation_trace(state: StateVector, eigs, grid: TimeGrid) -> OccupationTrace:
    """<n_1>(t) and <n_2>(t) from the evolved state."""
    _check_same_basis(state.basis, eigs.basis)
    d1, d2 = site_number_diagonals(state.basis)
    coeff = eigs.vectors.T @ state.amplitudes
    times = grid.times
    n1 = np.empty(times.size)
    n2 = np.empty(times.size)
    V = np.asarray(eigs.vectors)
    for start in range(0, times.size, CHUNK):
        stop = start + CHUNK
        rotated = (_phases(eigs.values, times[start:stop]) * coeff).T
        psi = V @ rotated.real + 1j * (V @ rotated.imag)
        prob = np.abs(psi) ** 2
        n1[start:stop] = d1 @ prob
        n2[start:stop] = d2 @ prob
    return OccupationTrace(times, n1, n2)


def decay_time(series: AutocorrSeries, threshold: float = 0.5, t_min: float = 5.0,
               window: float = 2.0 * math.pi) -> Optional[float]:
    """Earliest t > t_min where the trailing maximum of |A| over [t - window, t] is below ``threshold``.

    The trailing window spans one harmonic period, so the envelope ignores
    the fast oscillation of |A| but still forgets early recurrences.
    Returns None if the envelope never drops below the threshold.
    """
    if window <= 0:
        raise ConfigError("decay window must be positive")
    t = series.times
    a = series.abs
    left = np.searchsorted(t, t - window, side="left")
    for i in np.nonzero(t > t_min)[0]:
        if a[left[i]: i + 1].max() < threshold:
            return float(t[i])
    return None
