import json

import numpy as np
import pytest

from oracles import harmonic_normal_modes
from qdimer.analysis import (
    ANTISYMMETRIC,
    MIXED,
    NON_TUNNELING,
    SYMMETRIC,
    TUNNELING,
    UNRESOLVED,
    ModeRecord,
    Thresholds,
    analyze_modes,
    classify_mode,
    contour_grid,
    pair_tunneling_modes,
    quanta_group,
    symmetry_label,
    write_contour,
    write_mode_csv,
)
from qdimer.errors import ConfigError, SymmetryError
from qdimer.fockspace import BasisSpec, ModelParams, build_exchange_operator
from qdimer.spectral import EigenSystem, solve


def test_contour_ground_state_harmonic():
    eigs = solve(BasisSpec(5), ModelParams(0.5, 0.0, 0.0))
    _, sym = symmetry_label(eigs)
    g = contour_grid(sym, 0)
    expected = np.zeros((5, 5))
    expected[0, 0] = 1.0
    assert np.allclose(np.abs(g.values), expected)


def test_contour_lossless_and_normalized(ref_modes):
    eigs, _ = ref_modes
    for k in (0, 93, eigs.dim - 1):
        g = contour_grid(eigs, k)
        assert np.array_equal(g.flatten(), eigs.vectors[:, k])
        assert np.sum(g.values ** 2) == pytest.approx(1.0, abs=1e-10)
        n1, n2 = 3, 7
        assert g.values[n1, n2] == eigs.vectors[n1 * 40 + n2, k]
    with pytest.raises(IndexError):
        contour_grid(eigs, eigs.dim)


def test_tunneling_pair_sits_on_axes(ref_modes):
    eigs, _ = ref_modes
    for k in (93, 94):
        w = contour_grid(eigs, k).values ** 2
        n1, n2 = np.divmod(np.arange(w.size), w.shape[0])
        profile = np.bincount(np.minimum(n1, n2), weights=w.ravel())
        assert int(np.argmax(profile)) == 0


def test_symmetry_counts(ref_modes):
    _, records = ref_modes
    N = 40
    sym = sum(r.symmetry == SYMMETRIC for r in records)
    anti = sum(r.symmetry == ANTISYMMETRIC for r in records)
    assert sym == N * (N + 1) // 2
    assert anti == N * (N - 1) // 2


def test_first_excited_pair_harmonic():
    eigs = solve(BasisSpec(10), ModelParams(0.5, 0.0, 0.2))
    labels, sym = symmetry_label(eigs)
    assert labels[0] == SYMMETRIC
    assert {labels[1], labels[2]} == {SYMMETRIC, ANTISYMMETRIC}
    # |10> - |01> sits below |10> + |01> for positive coupling
    assert labels[1] == ANTISYMMETRIC


def test_degenerate_clusters_are_resymmetrized():
    eigs = solve(BasisSpec(8), ModelParams(0.5, 0.0, 0.0))
    labels, sym = symmetry_label(eigs)
    assert MIXED not in labels
    # symmetric before antisymmetric inside each degenerate level
    values = np.round(sym.values, 9)
    for v in np.unique(values):
        block = [labels[k] for k in np.nonzero(values == v)[0]]
        assert block == sorted(block, key=lambda s: s != SYMMETRIC)
    P = build_exchange_operator(sym.basis).entries
    assert np.allclose(np.einsum("ij,ij->j", sym.vectors, P @ sym.vectors) ** 2, 1.0)


def test_symmetry_failure_is_reported():
    b = BasisSpec(3)
    mixed = np.eye(9)
    eigs = EigenSystem(np.arange(9.0), mixed, b, ModelParams())
    with pytest.raises(SymmetryError):
        symmetry_label(eigs)
    labels, _ = symmetry_label(eigs, strict=False)
    assert MIXED in labels


def test_quanta_group_harmonic_exact():
    eigs = solve(BasisSpec(12), ModelParams(0.5, 0.0, 0.0))
    _, sym = symmetry_label(eigs)
    for k in range(40):
        g = contour_grid(sym, k)
        support = np.nonzero(np.abs(g.values) > 1e-12)
        assert set((support[0] + support[1]).tolist()) == {quanta_group(g)}
        assert quanta_group(g) == round(sym.values[k] - 1.0)


def test_quanta_group_coupled_harmonic_matches_normal_modes():
    eigs = solve(BasisSpec(20), ModelParams(0.5, 0.0, 0.2))
    _, sym = symmetry_label(eigs)
    for E, p, m in harmonic_normal_modes(0.2, 6):
        k = int(np.argmin(np.abs(sym.values - E)))
        assert quanta_group(contour_grid(sym, k)) == p + m


def test_quanta_group_tie_goes_low():
    g = np.zeros((3, 3))
    g[1, 0] = g[1, 1] = np.sqrt(0.5)
    assert quanta_group(g) == 1


def test_quanta_group_shared_by_pair(ref_modes):
    _, records = ref_modes
    assert records[93].quanta_group == records[94].quanta_group


def test_classify_axis_state():
    g = np.zeros((6, 6))
    g[5, 0] = g[0, 5] = np.sqrt(0.5)
    mc = classify_mode(g)
    assert mc.localization == pytest.approx(1.0)
    assert mc.axis_distance == 0
    assert (mc.mode_class, mc.order) == (TUNNELING, 1)
    g = np.zeros((6, 6))
    g[4, 1] = g[1, 4] = np.sqrt(0.5)
    assert classify_mode(g).axis_distance == 1
    assert classify_mode(g).localization == pytest.approx(0.6)
    g = np.zeros((6, 6))
    g[2, 2] = 1.0
    assert classify_mode(g).mode_class == NON_TUNNELING


def test_threshold_validation():
    with pytest.raises(ConfigError):
        Thresholds(l_tun=0.5, l_del=0.6)
    with pytest.raises(ConfigError):
        Thresholds(basis="normal")


def test_uncoupled_anharmonic_top_pairs_tunnel():
    eigs = solve(BasisSpec(16), ModelParams(0.5, 0.02, 0.0))
    _, records = analyze_modes(eigs)
    for q in range(1, 10):
        group = sorted((r for r in records if r.quanta_group == q), key=lambda r: r.energy)
        top = group[-2:]
        for r in top:
            assert r.mode_class == TUNNELING and r.order == 1
            assert r.localization == pytest.approx(1.0, abs=1e-9)
            assert r.splitting == pytest.approx(0.0, abs=1e-9)


def test_harmonic_coupled_all_non_tunneling():
    N = 30
    eigs = solve(BasisSpec(N), ModelParams(0.5, 0.0, 0.2))
    _, records = analyze_modes(eigs)
    below_edge = [r for r in records if r.quanta_group <= N // 2]
    assert below_edge
    assert all(r.mode_class == NON_TUNNELING for r in below_edge)


def test_pair_records_invariants(ref_modes):
    _, records = ref_modes
    by_index = {r.eigen_index: r for r in records}
    tunneling = [r for r in records if r.mode_class == TUNNELING]
    assert tunneling
    for r in tunneling:
        partner = by_index[r.pair_partner]
        assert partner.pair_partner == r.eigen_index
        assert {r.symmetry, partner.symmetry} == {SYMMETRIC, ANTISYMMETRIC}
        assert r.splitting == pytest.approx(abs(r.energy - partner.energy))
        assert r.localization >= 0.80
        assert (r.quanta_group, r.order) == (partner.quanta_group, partner.order)
    for r in records:
        assert 0.0 <= r.localization <= 1.0


def test_sotm_splitting_exceeds_first_order(ref_modes):
    eigs, records = ref_modes
    first = records[93].splitting
    assert abs(records[91].energy - records[90].energy) > first
    assert {records[90].symmetry, records[91].symmetry} == {SYMMETRIC, ANTISYMMETRIC}


def test_higher_order_mode_at_weak_coupling():
    eigs = solve(BasisSpec(20), ModelParams(0.5, 0.02, 0.01))
    _, records = analyze_modes(eigs)
    orders = {r.order for r in records if r.mode_class == TUNNELING and r.quanta_group < 15}
    assert 2 in orders


def test_top_pair_splits_last():
    eigs = solve(BasisSpec(20), ModelParams(0.5, 0.02, 0.01))
    _, records = analyze_modes(eigs)
    for q in (5, 6, 7, 8):
        group = sorted((r for r in records if r.quanta_group == q), key=lambda r: r.energy)
        # consecutive members of a group at weak coupling form +/- pairs from the top down
        pairs = [(group[i - 1], group[i]) for i in range(len(group) - 1, 0, -2)]
        splits = [abs(b.energy - a.energy) for a, b in pairs]
        assert all(splits[0] < s for s in splits[1:-1])


def test_splitting_grows_with_coupling():
    splits = []
    for c in (0.0, 0.02, 0.04, 0.06, 0.08, 0.1):
        eigs = solve(BasisSpec(20), ModelParams(0.5, 0.02, c))
        _, records = analyze_modes(eigs)
        group = sorted((r for r in records if r.quanta_group == 6), key=lambda r: r.energy)
        a, b = group[-2:]
        splits.append(abs(b.energy - a.energy))
    assert splits[0] < 1e-9
    assert all(x < y for x, y in zip(splits, splits[1:]))


def test_pairing_flags():
    def rec(k, e, sym):
        return ModeRecord(k, e, sym, 1, 5, 0, 0.9, TUNNELING, 1)

    out = pair_tunneling_modes([rec(0, 1.0, SYMMETRIC), rec(1, 1.05, ANTISYMMETRIC), rec(2, 1.2, SYMMETRIC)])
    assert out[0].pair_partner == 1 and out[1].pair_partner == 0
    assert "ambiguous" in out[0].flags
    assert out[2].mode_class == UNRESOLVED and "unpaired" in out[2].flags


def test_fock_basis_option_runs(ref_eigs):
    _, records = analyze_modes(ref_eigs, Thresholds(basis="fock"))
    assert records[93].axis_distance == 0


def test_exports(tmp_path, ref_modes):
    eigs, records = ref_modes
    write_mode_csv(records[90:95], tmp_path / "m.csv")
    rows = (tmp_path / "m.csv").read_text().splitlines()
    assert rows[0].split(",") == ["eigen_index", "energy_au", "symmetry", "quanta_group", "order", "localization",
                                  "class", "pair_partner", "splitting_au", "intensity"]
    fields = rows[4].split(",")
    assert int(fields[0]) == 93 and fields[6] == TUNNELING and int(fields[7]) == 94
    assert float(fields[8]) == records[93].splitting
    write_contour(contour_grid(eigs, 93), records[93], tmp_path / "c.csv", tmp_path / "c.json")
    grid = np.loadtxt(tmp_path / "c.csv", delimiter=",")
    assert np.array_equal(grid.ravel(), eigs.vectors[:, 93])
    meta = json.loads((tmp_path / "c.json").read_text())
    assert meta["eigen_index"] == 93 and meta["k*"] == 0 and meta["class"] == TUNNELING
