"""Coupling sweeps with overlap-continued eigenvalue tracks and avoided-crossing detection."""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np
from scipy.optimize import linear_sum_assignment

from ..errors import ConfigError, TrackingError
from ..fockspace import DEFAULT_MAX_DIM, BasisSpec, ModelParams
from ..spectral import EigenSystem, degenerate_clusters, solve
from .modes import ModeRecord, Thresholds, analyze_modes, symmetrize, symmetry_names


@dataclass(frozen=True)
class AvoidedCrossing:
    c_c: float
    track_ids: tuple[int, int]
    energies: tuple[float, float]
    gap: float
    median_gap: float
    symmetry: str
    parity: int
    flank_couplings: tuple[float, float]
    same_overlap: float
    cross_overlap: float
    localization_left: tuple[float, float]
    localization_right: tuple[float, float]

    def to_dict(self) -> dict:
        return {
            "c_c": self.c_c,
            "track_ids": list(self.track_ids),
            "energies": list(self.energies),
            "gap": self.gap,
            "median_gap": self.median_gap,
            "symmetry": self.symmetry,
            "parity": self.parity,
            "flank_couplings": list(self.flank_couplings),
            "same_overlap": self.same_overlap,
            "cross_overlap": self.cross_overlap,
            "localization_left": list(self.localization_left),
            "localization_right": list(self.localization_right),
        }


@dataclass(eq=False)
class SweepResult:
    """Tracks that enter the energy window somewhere on the coupling grid.

    ``energies[i, t]`` is the energy of track ``track_ids[t]`` at ``couplings[i]``
    and ``eigen_indices[i, t]`` its eigen index there.  ``vectors[i]`` holds
    the track eigenvectors (columns ordered like ``track_ids``).
    """

    params: ModelParams
    levels: int
    couplings: np.ndarray
    window: tuple[float, float]
    track_ids: np.ndarray
    energies: np.ndarray
    eigen_indices: np.ndarray
    symmetry: list[str]
    parity: np.ndarray
    records: list[list[ModeRecord]]
    vectors: list[np.ndarray] = field(repr=False, default_factory=list)
    crossings: list[AvoidedCrossing] = field(default_factory=list)

    @property
    def n_tracks(self) -> int:
        return self.track_ids.size

    def localization(self) -> np.ndarray:
        return np.array([[r.localization for r in row] for row in self.records])


def _solve_point(basis, params, max_dim):
    eigs = solve(basis, params, max_dim=max_dim)
    return symmetrize(eigs)


def _sector_keys(eigs: EigenSystem) -> np.ndarray:
    return 3 * eigs.symmetry + eigs.parity


def _match(a: EigenSystem, b: EigenSystem) -> tuple[np.ndarray, np.ndarray]:
    """Maximal-overlap assignment a -> b inside each symmetry sector; returns (perm, matched overlap^2)."""
    ka, kb = _sector_keys(a), _sector_keys(b)
    perm = np.full(a.dim, -1)
    quality = np.zeros(a.dim)
    for key in np.unique(ka):
        ia = np.nonzero(ka == key)[0]
        ib = np.nonzero(kb == key)[0]
        if ia.size != ib.size:
            ia, ib = np.arange(a.dim), np.arange(b.dim)
        O = (a.vectors[:, ia].T @ b.vectors[:, ib]) ** 2
        rows, cols = linear_sum_assignment(-O)
        perm[ia[rows]] = ib[cols]
        quality[ia[rows]] = O[rows, cols]
        if ia.size == a.dim:
            break
    return perm, quality


def _align_degenerate(target: EigenSystem, reference: EigenSystem) -> EigenSystem:
    """Rotate each degenerate cluster of ``target`` (per symmetry sector) towards ``reference``."""
    clusters = [c for c in degenerate_clusters(target.values) if c.size > 1]
    if not clusters:
        return target
    V = np.array(target.vectors)
    keys = _sector_keys(target)
    for cluster in clusters:
        for key in np.unique(keys[cluster]):
            idx = cluster[keys[cluster] == key]
            if idx.size < 2:
                continue
            Vc = V[:, idx]
            proj = Vc.T @ reference.vectors
            # reference vectors that best span this degenerate subspace
            best = np.sort(np.argsort(-np.sum(proj ** 2, axis=0), kind="stable")[: idx.size])
            M = proj[:, best]
            W, _, Zt = np.linalg.svd(M)
            V[:, idx] = Vc @ (W @ Zt)
    return EigenSystem(target.values, V, target.basis, target.params, target.method, target.symmetry, target.parity)


def coupling_sweep(params: ModelParams, couplings: Sequence[float], levels: int,
                   window: tuple[float, float] = (-np.inf, np.inf), thresholds: Thresholds = Thresholds(),
                   workers: Optional[int] = None, overlap_min: float = 0.5, refine_depth: int = 6,
                   max_dim: int = DEFAULT_MAX_DIM, crossing_gap_fraction: float = 1.0) -> SweepResult:
    """Diagonalize along an ascending c_c grid and continue eigenvalues by eigenvector overlap.

    ``params.c_c`` is ignored.  Between adjacent points, states near the
    window whose best matched overlap^2 falls below ``overlap_min`` trigger
    midpoint refinement (up to ``refine_depth`` bisections), after which a
    TrackingError is raised.
    """
    cc = np.asarray(couplings, dtype=float)
    if cc.ndim != 1 or cc.size < 1:
        raise ConfigError("coupling grid must be a non-empty 1-D sequence")
    if np.any(np.diff(cc) <= 0):
        raise ConfigError("coupling grid must be strictly ascending")
    e_lo, e_hi = window
    if e_hi <= e_lo:
        raise ConfigError(f"energy window ({e_lo}, {e_hi}) is empty")
    basis = BasisSpec(int(levels))
    point_params = [replace(params, c_c=float(c)) for c in cc]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        systems = list(pool.map(lambda p: _solve_point(basis, p, max_dim), point_params))
    if len(systems) > 1:
        systems[0] = _align_degenerate(systems[0], systems[1])
        for i in range(1, len(systems)):
            systems[i] = _align_degenerate(systems[i], systems[i - 1])

    margin = 0.1 * (e_hi - e_lo) if np.isfinite(e_hi - e_lo) else 0.0

    def relevant(eigs):
        return (eigs.values >= e_lo - margin) & (eigs.values <= e_hi + margin)

    def link(a: EigenSystem, b: EigenSystem, depth: int) -> np.ndarray:
        perm, quality = _match(a, b)
        watch = relevant(a) | relevant(b)[perm]
        if not np.any(watch) or quality[watch].min() >= overlap_min:
            return perm
        if depth >= refine_depth:
            worst = int(np.nonzero(watch)[0][np.argmin(quality[watch])])
            raise TrackingError(
                f"track matching between c_c={a.params.c_c:.6g} and {b.params.c_c:.6g} stays below overlap "
                f"{overlap_min} (state {worst}, overlap^2 {quality[worst]:.3f}) after {refine_depth} refinements"
            )
        mid = _solve_point(basis, replace(params, c_c=0.5 * (a.params.c_c + b.params.c_c)), max_dim)
        mid = _align_degenerate(mid, a)
        first = link(a, mid, depth + 1)
        second = link(mid, b, depth + 1)
        return second[first]

    dim = basis.dim
    index_of = np.empty((cc.size, dim), dtype=int)
    index_of[0] = np.arange(dim)
    links = [None] * (cc.size - 1)
    if cc.size > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            links = list(pool.map(lambda i: link(systems[i], systems[i + 1], 0), range(cc.size - 1)))
    for i, perm in enumerate(links):
        index_of[i + 1] = perm[index_of[i]]

    all_energies = np.array([systems[i].values[index_of[i]] for i in range(cc.size)])
    inside = np.any((all_energies >= e_lo) & (all_energies <= e_hi), axis=0)
    track_ids = np.nonzero(inside)[0]
    energies = all_energies[:, track_ids]
    eig_idx = index_of[:, track_ids]
    names0 = symmetry_names(systems[0])
    symmetry = [names0[t] for t in track_ids]
    parity = np.array([int(systems[0].parity[t]) for t in track_ids], dtype=int)

    def point_records(i):
        _, recs = analyze_modes(systems[i], thresholds, indices=eig_idx[i])
        return recs

    with ThreadPoolExecutor(max_workers=workers) as pool:
        records = list(pool.map(point_records, range(cc.size)))
    vectors = [np.array(systems[i].vectors[:, eig_idx[i]]) for i in range(cc.size)]
    result = SweepResult(params, basis.levels, cc, (float(e_lo), float(e_hi)), track_ids, energies, eig_idx,
                         symmetry, parity, records, vectors)
    result.crossings = detect_avoided_crossings(result, crossing_gap_fraction)
    return result


def _flanks(c: np.ndarray, g: np.ndarray, i: int) -> Optional[tuple[int, int]]:
    """Grid points at c_i -/+ delta, where delta is the first distance at which the gap doubles.

    Returns None when the gap never reaches twice its minimum on the grid;
    such a minimum is not resolved as a crossing.
    """
    doubled = np.nonzero(g >= 2.0 * g[i])[0]
    if doubled.size == 0:
        return None
    delta = float(np.min(np.abs(c[doubled] - c[i])))
    left = int(np.searchsorted(c, c[i] - delta - 1e-12 * max(1.0, delta), side="left"))
    right = int(np.searchsorted(c, c[i] + delta + 1e-12 * max(1.0, delta), side="right")) - 1
    return max(left, 0), min(right, c.size - 1)


def detect_avoided_crossings(sweep: SweepResult, gap_fraction: float = 1.0) -> list[AvoidedCrossing]:
    """Same-sector track pairs whose gap has an interior minimum with verified character swap.

    For each point, tracks adjacent in energy within one symmetry sector form
    candidate pairs.  A pair whose gap changes sign is an exact crossing and
    is skipped.  A local minimum qualifies when the gap there is below
    ``gap_fraction`` times the median gap of the pair over the sweep and, on
    flanks placed symmetrically where the gap has doubled, the eigenvectors
    overlap more across the two tracks than along them.  For an isolated
    two-level crossing the cross overlap on such flanks is 3/4.
    """
    E = sweep.energies
    n_points = E.shape[0]
    if n_points < 3 or sweep.n_tracks < 2:
        return []
    sector = [(s, int(p)) for s, p in zip(sweep.symmetry, sweep.parity)]
    pairs = set()
    for i in range(n_points):
        order = np.argsort(E[i], kind="stable")
        last = {}
        for t in order:
            key = sector[t]
            if key in last:
                pairs.add((last[key], int(t)) if last[key] < t else (int(t), last[key]))
            last[key] = int(t)
    found = []
    for a, b in sorted(pairs):
        g = E[:, b] - E[:, a]
        if np.any(g > 0) and np.any(g < 0):
            continue
        g = np.abs(g)
        median = float(np.median(g))
        for i in range(1, n_points - 1):
            if not (g[i] < g[i - 1] and g[i] <= g[i + 1]):
                continue
            if g[i] >= gap_fraction * median:
                continue
            lo, hi = min(E[i, a], E[i, b]), max(E[i, a], E[i, b])
            between = [t for t in range(sweep.n_tracks)
                       if t not in (a, b) and sector[t] == sector[a] and lo < E[i, t] < hi]
            if between:
                continue
            flanks = _flanks(sweep.couplings, g, i)
            if flanks is None:
                continue
            left, right = flanks
            VL, VR = sweep.vectors[left], sweep.vectors[right]
            same = (VL[:, a] @ VR[:, a]) ** 2 + (VL[:, b] @ VR[:, b]) ** 2
            cross = (VL[:, a] @ VR[:, b]) ** 2 + (VL[:, b] @ VR[:, a]) ** 2
            if cross <= same:
                continue
            recL, recR = sweep.records[left], sweep.records[right]
            found.append(AvoidedCrossing(
                c_c=float(sweep.couplings[i]),
                track_ids=(int(sweep.track_ids[a]), int(sweep.track_ids[b])),
                energies=(float(E[i, a]), float(E[i, b])),
                gap=float(g[i]),
                median_gap=median,
                symmetry=sector[a][0],
                parity=sector[a][1],
                flank_couplings=(float(sweep.couplings[left]), float(sweep.couplings[right])),
                same_overlap=float(same / 2.0),
                cross_overlap=float(cross / 2.0),
                localization_left=(recL[a].localization, recL[b].localization),
                localization_right=(recR[a].localization, recR[b].localization),
            ))
    found.sort(key=lambda c: (c.c_c, c.track_ids))
    return found


SWEEP_HEADER = "c_c,track_id,energy_au,symmetry,class,localization"


def write_sweep_csv(sweep: SweepResult, path) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(SWEEP_HEADER + "\n")
        for i, c in enumerate(sweep.couplings):
            for t, tid in enumerate(sweep.track_ids):
                r = sweep.records[i][t]
                fh.write(f"{c:.17g},{tid},{sweep.energies[i, t]:.17g},{sweep.symmetry[t]},{r.mode_class},"
                         f"{r.localization:.17g}\n")


def write_crossings_json(sweep: SweepResult, path) -> None:
    with open(path, "w") as fh:
        json.dump([c.to_dict() for c in sweep.crossings], fh, indent=2, sort_keys=True)
        fh.write("\n")
