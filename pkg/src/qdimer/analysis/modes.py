"""Eigenvector diagnostics: symmetry labels, contour grids and mode classification.

Classification works on the squared components of an eigenvector laid out
on the (n1, n2) grid.  With ``basis="local"`` the grid is expressed in the
product basis of single-site anharmonic eigenstates, which coincides with the
occupation basis when c_a = 0 and keeps quanta counting meaningful when the
quartic term deforms the single-site states.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

from ..errors import ConfigError, SymmetryError
from ..fockspace import BasisSpec, ModelParams, OperatorMatrix, build_single_site_hamiltonian
from ..spectral import DEGENERACY_RTOL, EigenSystem, degenerate_clusters

SYMMETRIC = "symmetric"
ANTISYMMETRIC = "antisymmetric"
MIXED = "mixed"

NON_TUNNELING = "non-tunneling"
TUNNELING = "tunneling"
UNRESOLVED = "unresolved"

LABEL_THRESHOLD = 0.999

ANALYSIS_BASES = ("local", "fock")


@dataclass(frozen=True)
class Thresholds:
    """Classification settings.

    The pair gate demotes tunneling candidates whose nearest opposite-symmetry
    partner in the same quanta group is split by more than
    ``pair_split_ratio * |c_c|``.
    """

    l_tun: float = 0.80
    l_del: float = 0.55
    pair_gate: bool = True
    pair_split_ratio: float = 0.25
    basis: str = "local"

    def __post_init__(self):
        if not (0.0 <= self.l_del <= self.l_tun <= 1.0):
            raise ConfigError(f"need 0 <= l_del <= l_tun <= 1, got l_del={self.l_del}, l_tun={self.l_tun}")
        if self.pair_split_ratio < 0:
            raise ConfigError("pair_split_ratio must be >= 0")
        if self.basis not in ANALYSIS_BASES:
            raise ConfigError(f"analysis basis must be one of {ANALYSIS_BASES}, got {self.basis!r}")


@dataclass(frozen=True, eq=False)
class ContourGrid:
    """Eigenvector k reshaped so that ``values[n1, n2]`` is the component at flat index n1*N + n2."""

    values: np.ndarray
    eigen_index: int
    energy: float

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.ndim != 2 or v.shape[0] != v.shape[1]:
            raise ValueError(f"contour grid must be square, got {v.shape}")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def levels(self) -> int:
        return self.values.shape[0]

    def flatten(self) -> np.ndarray:
        return self.values.ravel()


@dataclass(frozen=True)
class ModeClass:
    localization: float
    axis_distance: int
    mode_class: str
    order: Optional[int]


@dataclass(frozen=True)
class ModeRecord:
    eigen_index: int
    energy: float
    symmetry: str
    parity: int
    quanta_group: int
    axis_distance: int
    localization: float
    mode_class: str
    order: Optional[int] = None
    pair_partner: Optional[int] = None
    splitting: Optional[float] = None
    intensity: Optional[float] = None
    flags: tuple = field(default_factory=tuple)

    @property
    def is_tunneling(self) -> bool:
        return self.mode_class == TUNNELING


def _label(value: float) -> str:
    if value > LABEL_THRESHOLD:
        return SYMMETRIC
    if value < -LABEL_THRESHOLD:
        return ANTISYMMETRIC
    return MIXED


def _sign_fix(vectors: np.ndarray) -> np.ndarray:
    """Make the largest-magnitude component of every column positive (first on ties)."""
    idx = np.argmax(np.abs(vectors), axis=0)
    signs = np.sign(vectors[idx, np.arange(vectors.shape[1])])
    signs[signs == 0] = 1.0
    return vectors * signs


def symmetry_label(eigs: EigenSystem, P: Optional[OperatorMatrix] = None, strict: bool = True,
                   rtol: float = DEGENERACY_RTOL):
    """Rotate degenerate clusters onto exchange and parity eigenvectors.

    Returns ``(labels, eigs_sym)``.  Within a cluster the vectors are ordered
    symmetric before antisymmetric, then even before odd total parity.
    Raises SymmetryError (strict mode) if some vector keeps |<v|P|v>| <= 0.999.
    """
    basis = eigs.basis
    if basis is None:
        raise ConfigError("symmetry labelling needs an eigensystem with a basis")
    if P is None:
        perm = basis.swap_permutation()

        def apply_p(V):
            return V[perm]
    else:
        Pm = P.entries if isinstance(P, OperatorMatrix) else np.asarray(P)

        def apply_p(V):
            return Pm @ V
    n1, n2 = basis.occupations()
    pi_diag = np.where((n1 + n2) % 2 == 0, 1.0, -1.0)

    V = np.array(eigs.vectors, dtype=float)
    values = np.array(eigs.values)
    for idx in degenerate_clusters(values, rtol):
        if idx.size == 1:
            continue
        Vc = V[:, idx]
        # P and total parity commute, so P + 2*parity separates all four sectors
        M = Vc.T @ (apply_p(Vc) + 2.0 * pi_diag[:, None] * Vc)
        M = 0.5 * (M + M.T)
        w, R = np.linalg.eigh(M)
        Vc = Vc @ R
        sym = np.einsum("ij,ij->j", Vc, apply_p(Vc))
        par = np.einsum("ij,ij->j", Vc, pi_diag[:, None] * Vc)
        order = np.lexsort((-np.round(par, 6), -np.round(sym, 6)))
        V[:, idx] = Vc[:, order]
    V = _sign_fix(V)
    sym = np.einsum("ij,ij->j", V, apply_p(V))
    par = np.einsum("ij,ij->j", V, pi_diag[:, None] * V)
    labels = [_label(s) for s in sym]
    if strict:
        bad = [k for k, lab in enumerate(labels) if lab == MIXED]
        if bad:
            raise SymmetryError(f"eigenvector {bad[0]} has exchange expectation {sym[bad[0]]:.6f} "
                                f"after re-symmetrization ({len(bad)} such vectors)")
    sym_code = np.array([1 if lab == SYMMETRIC else (-1 if lab == ANTISYMMETRIC else 0) for lab in labels])
    par_code = np.where(par > LABEL_THRESHOLD, 1, np.where(par < -LABEL_THRESHOLD, -1, 0))
    out = EigenSystem(values, V, basis, eigs.params, eigs.method, sym_code, par_code)
    return labels, out


def symmetrize(eigs: EigenSystem, strict: bool = True) -> EigenSystem:
    """Shorthand for the re-symmetrized eigensystem of :func:`symmetry_label`."""
    if eigs.symmetry is not None:
        return eigs
    return symmetry_label(eigs, strict=strict)[1]


def symmetry_names(eigs: EigenSystem) -> list[str]:
    names = {1: SYMMETRIC, -1: ANTISYMMETRIC, 0: MIXED}
    return [names[int(s)] for s in eigs.symmetry]


def contour_grid(eigs: EigenSystem, k: int) -> ContourGrid:
    if not isinstance(k, (int, np.integer)) or not 0 <= k < eigs.dim:
        raise IndexError(f"eigen index {k} outside 0..{eigs.dim - 1}")
    N = eigs.basis.levels
    return ContourGrid(eigs.vectors[:, k].reshape(N, N), int(k), float(eigs.values[k]))


def local_transform(basis: BasisSpec, params: ModelParams) -> np.ndarray:
    """Single-site anharmonic eigenvectors (columns), sign-fixed."""
    h = build_single_site_hamiltonian(basis.levels, params).entries
    _, u = np.linalg.eigh(h)
    return _sign_fix(u)


def analysis_components(eigs: EigenSystem, basis_mode: str = "local") -> np.ndarray:
    """Eigenvector components in the chosen analysis basis (same layout as ``eigs.vectors``)."""
    if basis_mode == "fock" or eigs.params is None or eigs.params.c_a == 0.0:
        return np.asarray(eigs.vectors)
    if basis_mode != "local":
        raise ConfigError(f"analysis basis must be one of {ANALYSIS_BASES}, got {basis_mode!r}")
    u = local_transform(eigs.basis, eigs.params)
    return np.kron(u, u).T @ eigs.vectors


def quanta_group(grid) -> int:
    """Total quanta s maximizing the anti-diagonal weight; ties go to the smaller s."""
    g = grid.values if isinstance(grid, ContourGrid) else np.asarray(grid)
    N = g.shape[0]
    n1, n2 = np.divmod(np.arange(N * N), N)
    w = np.bincount(n1 + n2, weights=g.ravel() ** 2, minlength=2 * N - 1)
    return int(np.argmax(w))


def _geometry(N: int):
    n1, n2 = np.divmod(np.arange(N * N), N)
    dist = np.abs(n1 - n2) / np.maximum(n1 + n2, 1)
    return n1, n2, dist


def _class_of(L: float, k_star: int, thresholds: Thresholds) -> tuple[str, Optional[int]]:
    if L >= thresholds.l_tun:
        return TUNNELING, k_star + 1
    if L <= thresholds.l_del:
        return NON_TUNNELING, None
    return UNRESOLVED, None


def classify_mode(grid, thresholds: Thresholds = Thresholds()) -> ModeClass:
    """Localization L, dominant axis distance k* and geometric class of one grid."""
    g = grid.values if isinstance(grid, ContourGrid) else np.asarray(grid)
    N = g.shape[0]
    n1, n2, dist = _geometry(N)
    w = g.ravel() ** 2
    L = float(np.clip(w @ dist, 0.0, 1.0))
    k_star = int(np.argmax(np.bincount(np.minimum(n1, n2), weights=w, minlength=N)))
    cls, order = _class_of(L, k_star, thresholds)
    return ModeClass(L, k_star, cls, order)


def _batch_geometry(C: np.ndarray, N: int):
    """L, k* and q for every column of C at once."""
    n1, n2, dist = _geometry(N)
    W = C ** 2
    L = np.clip(dist @ W, 0.0, 1.0)
    mins = np.minimum(n1, n2)
    A = np.zeros((N, N * N))
    A[mins, np.arange(N * N)] = 1.0
    k_star = np.argmax(A @ W, axis=0)
    S = np.zeros((2 * N - 1, N * N))
    S[n1 + n2, np.arange(N * N)] = 1.0
    q = np.argmax(S @ W, axis=0)
    return L, k_star, q


def _apply_pair_gate(records: list[ModeRecord], c_c: float, thresholds: Thresholds) -> list[ModeRecord]:
    """Keep tunneling/unresolved character only for modes with a nearly degenerate opposite-symmetry partner."""
    out = list(records)
    by_group: dict[int, list[int]] = {}
    for i, r in enumerate(records):
        if r.mode_class != NON_TUNNELING:
            by_group.setdefault(r.quanta_group, []).append(i)
    bound = thresholds.pair_split_ratio * abs(c_c)
    for members in by_group.values():
        for i in members:
            r = records[i]
            partners = [records[j] for j in members
                        if records[j].symmetry != r.symmetry and records[j].symmetry != MIXED]
            keep = False
            if r.symmetry != MIXED and partners:
                nearest = min(partners, key=lambda p: (abs(p.energy - r.energy), p.eigen_index))
                tol = DEGENERACY_RTOL * max(1.0, abs(r.energy))
                keep = abs(nearest.energy - r.energy) <= bound + tol
            if not keep:
                out[i] = replace(r, mode_class=NON_TUNNELING, order=None, flags=r.flags + ("gated",))
    return out


def pair_tunneling_modes(records: Sequence[ModeRecord]) -> list[ModeRecord]:
    """Pair symmetric with antisymmetric tunneling modes of equal (quanta group, order).

    Greedy nearest-energy matching, deterministic on ties.  Modes with more
    than one candidate partner are flagged ``ambiguous``; tunneling modes left
    without a partner are downgraded to unresolved and flagged ``unpaired``.
    """
    out = list(records)
    sets: dict[tuple, list[int]] = {}
    for i, r in enumerate(records):
        if r.mode_class == TUNNELING:
            sets.setdefault((r.quanta_group, r.order), []).append(i)
    for members in sets.values():
        sym = [i for i in members if records[i].symmetry == SYMMETRIC]
        anti = [i for i in members if records[i].symmetry == ANTISYMMETRIC]
        candidates = sorted(
            (abs(records[a].energy - records[s].energy), min(s, a), s, a) for s in sym for a in anti
        )
        used: set[int] = set()
        ambiguous = len(sym) > 1 or len(anti) > 1
        for gap, _, s, a in candidates:
            if s in used or a in used:
                continue
            used.update((s, a))
            flags = ("ambiguous",) if ambiguous else ()
            out[s] = replace(out[s], pair_partner=records[a].eigen_index, splitting=float(gap),
                             flags=out[s].flags + flags)
            out[a] = replace(out[a], pair_partner=records[s].eigen_index, splitting=float(gap),
                             flags=out[a].flags + flags)
        for i in members:
            if i not in used:
                out[i] = replace(out[i], mode_class=UNRESOLVED, order=None, flags=out[i].flags + ("unpaired",))
    return out


def analyze_modes(eigs: EigenSystem, thresholds: Thresholds = Thresholds(), intensities=None,
                  indices: Optional[Sequence[int]] = None):
    """Full classification pipeline.

    Returns ``(eigs_sym, records)`` where ``eigs_sym`` is the re-symmetrized
    eigensystem and ``records`` covers every eigenstate (or ``indices`` only,
    filtered after pairing so that partners are still found).
    """
    eigs_sym = symmetrize(eigs)
    N = eigs_sym.basis.levels
    C = analysis_components(eigs_sym, thresholds.basis)
    L, k_star, q = _batch_geometry(C, N)
    names = symmetry_names(eigs_sym)
    records = []
    for k in range(eigs_sym.dim):
        cls, order = _class_of(float(L[k]), int(k_star[k]), thresholds)
        records.append(ModeRecord(
            eigen_index=k,
            energy=float(eigs_sym.values[k]),
            symmetry=names[k],
            parity=int(eigs_sym.parity[k]),
            quanta_group=int(q[k]),
            axis_distance=int(k_star[k]),
            localization=float(L[k]),
            mode_class=cls,
            order=order,
            intensity=None if intensities is None else float(intensities[k]),
        ))
    if thresholds.pair_gate:
        c_c = eigs_sym.params.c_c if eigs_sym.params is not None else 0.0
        records = _apply_pair_gate(records, c_c, thresholds)
    records = pair_tunneling_modes(records)
    if indices is not None:
        records = [records[int(i)] for i in indices]
    return eigs_sym, records


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return f"{value:.17g}"
    return str(value)


MODE_HEADER = "eigen_index,energy_au,symmetry,quanta_group,order,localization,class,pair_partner,splitting_au,intensity"


def write_mode_csv(records: Sequence[ModeRecord], path) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(MODE_HEADER + "\n")
        for r in sorted(records, key=lambda r: r.eigen_index):
            row = (r.eigen_index, r.energy, r.symmetry, r.quanta_group, r.order, r.localization, r.mode_class,
                   r.pair_partner, r.splitting, r.intensity)
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def write_contour(grid: ContourGrid, record: Optional[ModeRecord], csv_path, json_path) -> None:
    """N x N component matrix plus a JSON sidecar describing the mode."""
    with open(csv_path, "w", newline="") as fh:
        for row in grid.values:
            fh.write(",".join(f"{v:.17g}" for v in row) + "\n")
    meta = {"eigen_index": grid.eigen_index, "energy": grid.energy}
    if record is not None:
        meta.update({
            "symmetry": record.symmetry,
            "class": record.mode_class,
            "order": record.order,
            "L": record.localization,
            "k*": record.axis_distance,
            "quanta_group": record.quanta_group,
            "pair_partner": record.pair_partner,
            "splitting": record.splitting,
        })
    with open(json_path, "w") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")
