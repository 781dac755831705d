import numpy as np
import pytest

from oracles import harmonic_normal_modes
from qdimer.analysis import symmetrize
from qdimer.errors import ConfigError, DiagonalizationError
from qdimer.fockspace import BasisSpec, ModelParams, build_exchange_operator, build_hamiltonian
from qdimer.spectral import (
    EigenSystem,
    convergence_scan,
    degenerate_clusters,
    diagonalize,
    load_eigensystem,
    save_eigensystem,
    solve,
)
from qdimer.states import StateRecipe
from qdimer.tridiag import householder_tridiagonalize, tridiagonal_ql


def test_scalar_case():
    eigs = diagonalize(np.array([[2.5]]))
    assert eigs.values.tolist() == [2.5]
    assert abs(eigs.vectors[0, 0]) == 1.0


@pytest.mark.parametrize("method", ["lapack", "lapack-qr", "householder-ql"])
def test_uncoupled_harmonic_multiplicities(method):
    eigs = diagonalize(build_hamiltonian(BasisSpec(4), ModelParams(0.5, 0.0, 0.0)), method=method)
    values = np.round(eigs.values, 10)
    expected = sorted(n1 + n2 + 1.0 for n1 in range(4) for n2 in range(4))
    assert np.allclose(values, expected)


def test_coupled_harmonic_low_levels():
    values = solve(BasisSpec(40), ModelParams(0.5, 0.0, 0.2)).values
    for E, p, m in harmonic_normal_modes(0.2, 20):
        assert np.min(np.abs(values - E)) < 1e-8


@pytest.mark.parametrize("levels", [6, 11])
def test_householder_ql_matches_lapack(levels):
    H = build_hamiltonian(BasisSpec(levels), ModelParams(0.5, 0.04, 0.25))
    ref = diagonalize(H)
    own = diagonalize(H, method="householder-ql")
    assert np.max(np.abs(ref.values - own.values)) < 1e-11
    own.check(H)


def test_tridiagonalization_reconstructs():
    rng = np.random.default_rng(3)
    A = rng.normal(size=(9, 9))
    A = A + A.T
    d, e, Q = householder_tridiagonalize(A)
    T = np.diag(d) + np.diag(e, 1) + np.diag(e, -1)
    assert np.allclose(Q @ T @ Q.T, A, atol=1e-12)
    assert np.allclose(Q.T @ Q, np.eye(9), atol=1e-12)


def test_iteration_cap_names_index():
    d = np.array([1.0, 2.0, 3.0, 4.0])
    e = np.array([1.0, 1.0, 1.0])
    with pytest.raises(DiagonalizationError) as info:
        tridiagonal_ql(d, e, max_iterations=1)
    assert info.value.index is not None
    assert "index" in str(info.value)


def test_invariants_checked():
    H = build_hamiltonian(BasisSpec(12), ModelParams(0.5, 0.02, 0.2))
    eigs = diagonalize(H)
    eigs.check(H)
    assert eigs.orthonormality_error() < 1e-10
    assert np.all(np.diff(eigs.values) >= 0)
    assert abs(eigs.values.sum() - np.trace(H.entries)) < 1e-10 * abs(np.trace(H.entries))


def test_check_detects_bad_vectors():
    H = build_hamiltonian(BasisSpec(4), ModelParams(0.5, 0.02, 0.2))
    eigs = diagonalize(H)
    broken = EigenSystem(eigs.values, np.roll(eigs.vectors, 1, axis=1), eigs.basis)
    with pytest.raises(DiagonalizationError):
        broken.check(H)


def test_rejects_non_symmetric():
    with pytest.raises(ValueError):
        diagonalize(np.array([[1.0, 2.0], [0.0, 1.0]]))
    with pytest.raises(ConfigError):
        diagonalize(np.eye(2), method="jacobi")


def test_eigensystem_immutable():
    eigs = solve(BasisSpec(3), ModelParams())
    with pytest.raises(ValueError):
        eigs.values[0] = 0.0


def test_exchange_expectation_after_symmetrization():
    for params in (ModelParams(0.5, 0.0, 0.0), ModelParams(0.5, 0.02, 0.0), ModelParams(0.5, 0.02, 0.2)):
        eigs = symmetrize(solve(BasisSpec(10), params))
        P = build_exchange_operator(eigs.basis).entries
        expectation = np.einsum("ij,ij->j", eigs.vectors, P @ eigs.vectors)
        assert np.all(np.abs(expectation) > 0.999)


def test_variational_monotonicity():
    params = ModelParams(0.5, 0.02, 0.2)
    previous = None
    for N in (8, 10, 12, 14):
        values = solve(BasisSpec(N), params).values
        if previous is not None:
            half = previous.size // 2
            assert np.all(values[:half] <= previous[:half] + 1e-12)
        previous = values


def test_degenerate_clusters():
    clusters = degenerate_clusters(np.array([1.0, 2.0, 2.0 + 1e-12, 3.0, 3.0, 3.0]))
    assert [c.tolist() for c in clusters] == [[0], [1, 2], [3, 4, 5]]


def test_convergence_harmonic_zero_shift():
    report = convergence_scan(ModelParams(0.5, 0.0, 0.0), StateRecipe("osd", 1.0), (8, 12))
    assert report.steps[0].weighted_shift < 1e-12
    assert report.steps[0].bottom_shift < 1e-12


def test_convergence_monotone_decrease():
    report = convergence_scan(ModelParams(0.5, 0.02, 0.2), StateRecipe("osd", 1.0), (10, 14, 20))
    shifts = [s.weighted_shift for s in report.steps]
    assert shifts[0] > shifts[1]
    assert report.converged


def test_convergence_rejects_bad_list():
    with pytest.raises(ConfigError):
        convergence_scan(ModelParams(), StateRecipe(), (10,))
    with pytest.raises(ConfigError):
        convergence_scan(ModelParams(), StateRecipe(), (10, 8))


def test_cache_roundtrip(tmp_path):
    params = ModelParams(0.5, 0.01, 0.1)
    eigs = solve(BasisSpec(5), params)
    save_eigensystem(eigs, tmp_path)
    back = load_eigensystem(tmp_path, 5, params)
    assert np.array_equal(back.values, eigs.values)
    assert np.array_equal(back.vectors, eigs.vectors)
    # keys compare exact bit patterns
    assert load_eigensystem(tmp_path, 5, ModelParams(0.5, 0.01, np.nextafter(0.1, 1.0))) is None
    assert load_eigensystem(tmp_path, 6, params) is None


@pytest.mark.parametrize("c_a", [1e-4, 1e-3])
def test_quartic_ground_energy_follows_perturbation_series(c_a):
    from oracles import quartic_ground_series
    from qdimer.fockspace import build_single_site_hamiltonian

    e0 = diagonalize(build_single_site_hamiltonian(40, ModelParams(0.5, c_a, 0.0))).values[0]
    # the next term of the series is of order 333 c_a^4
    assert abs(e0 - quartic_ground_series(c_a)) < 10.0 * 333.0 * c_a ** 4 + 1e-13
    assert abs(e0 - (0.5 + 0.75 * c_a)) == pytest.approx(2.625 * c_a ** 2, rel=0.05)
