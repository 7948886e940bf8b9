import itertools

import numpy as np
import pytest

from oracles import sigma_unit_efficiency, z_w_closed_form
from pathwit.bounds import bipartite_bound_from_counts
from pathwit.errors import InvalidArgumentError, InvalidDataError, InvalidParameterError
from pathwit.fock import DensityMatrix, FockSpace, MultiModeOperator, dephase_total_number, expectation, partial_trace
from pathwit.source import SourceParams, click_stats_from_state, model_click_stats
from pathwit.witness import (
    ClickStats,
    MeasurementSetting,
    WitnessSpec,
    build_witness,
    correlator,
    sigma_observable,
    w_state,
    witness_from_counts,
    witness_terms,
    z_w_analytic,
)


def _random_state(dims, seed):
    rng = np.random.default_rng(seed)
    n = int(np.prod(dims))
    g = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    rho = g @ g.conj().T
    return DensityMatrix(FockSpace(dims), rho / np.trace(rho))


def _permute(rho, perm):
    dims = rho.space.dims
    n = len(dims)
    t = rho.matrix.reshape(dims[::-1] * 2)
    # tensor axes are reversed (mode 0 fastest); move mode perm[k] to slot k
    rev = [n - 1 - p for p in perm[::-1]]
    t = t.transpose(rev + [n + r for r in rev])
    new_dims = tuple(dims[p] for p in perm)
    size = int(np.prod(new_dims))
    return DensityMatrix(FockSpace(new_dims), t.reshape(size, size))


def test_setting_rejects_bad_efficiency():
    with pytest.raises(InvalidParameterError):
        MeasurementSetting(0.3, 1.2)
    with pytest.raises(InvalidParameterError):
        MeasurementSetting(0.3, -0.1)


def test_sigma_undisplaced_is_parity_of_vacuum():
    assert np.allclose(sigma_observable(MeasurementSetting(0, 1), 4).matrix, np.diag([1, -1, -1, -1]))
    # restricted to {|0>, |1>} it is the Pauli z matrix
    assert np.allclose(sigma_observable(MeasurementSetting(0, 1), 2).matrix, np.diag([1, -1]))


def test_sigma_displaced_vacuum_value():
    m = sigma_observable(MeasurementSetting(0.83, 1), 20).matrix
    assert m[0, 0].real == pytest.approx(2 * np.exp(-0.6889) - 1, abs=1e-12)
    assert m[0, 0].real == pytest.approx(0.00425, abs=5e-5)


@pytest.mark.parametrize("alpha", [0.3, 0.83, 0.6 - 0.4j])
def test_sigma_matches_coherent_projector(alpha):
    m = sigma_observable(MeasurementSetting(alpha, 1), 8).matrix
    assert np.allclose(m, sigma_unit_efficiency(alpha, 8), atol=1e-12)


@pytest.mark.parametrize("eta", [0.3, 0.6, 1.0])
@pytest.mark.parametrize("alpha", [0, 0.5, 0.83])
def test_sigma_spectrum_in_unit_interval(eta, alpha):
    ev = np.linalg.eigvalsh(sigma_observable(MeasurementSetting(alpha, eta), 20).matrix)
    assert ev.min() >= -1 - 1e-10 and ev.max() <= 1 + 1e-10


def test_sigma_partial_efficiency_on_fock_states():
    m = sigma_observable(MeasurementSetting(0, 0.4), 5).matrix
    assert np.allclose(np.diag(m).real, 2 * 0.6 ** np.arange(5) - 1)


def test_spec_validation():
    with pytest.raises(InvalidArgumentError):
        WitnessSpec(3, 0.8, "bipartite")
    with pytest.raises(InvalidArgumentError):
        WitnessSpec(2, 0.8, "tripartite")
    with pytest.raises(InvalidArgumentError):
        WitnessSpec(1, 0.8)
    with pytest.raises(InvalidArgumentError):
        WitnessSpec(2, 0.8, "other")
    with pytest.raises(InvalidArgumentError):
        build_witness(WitnessSpec(2, 0.8), [3, 3, 3])
    assert WitnessSpec(2, 0.8, "bipartite").normalization == "bipartite"
    assert WitnessSpec(3, 0.8, "tripartite").normalization == "general"


def test_terms_count_distinct_placements():
    terms = witness_terms(WitnessSpec(3, 0.8))
    patterns = [p for _, p in terms]
    assert len(patterns) == len(set(patterns))
    assert sum(1 for p in patterns if p.count("a") == 2) == 3 + 3  # "Iaa" and "0aa" placements
    assert witness_terms(WitnessSpec(2, 0.5, "bipartite")) == [(2.0, "aa"), (-1.0, "00")]


def test_bipartite_at_zero_displacement_is_s0_s0():
    z = build_witness(WitnessSpec(2, 0.0, "bipartite"), [3, 3]).matrix
    s0 = np.diag([1.0, -1, -1])
    expected = dephase_total_number(MultiModeOperator(FockSpace((3, 3)), np.kron(s0, s0))).matrix
    assert np.allclose(z, expected)


def test_witness_is_dephased_and_hermitian():
    for spec, dims in [(WitnessSpec(2, 0.83), (4, 4)), (WitnessSpec(3, 0.7, "tripartite"), (3, 3, 3))]:
        z = build_witness(spec, dims)
        assert np.allclose(z.matrix, z.matrix.conj().T)
        assert np.allclose(dephase_total_number(z).matrix, z.matrix)


def test_general_two_mode_is_twice_bipartite():
    rho = w_state(2, (4, 4))
    general = expectation(build_witness(WitnessSpec(2, 0.83), (4, 4)), rho)
    bip = expectation(build_witness(WitnessSpec(2, 0.83, "bipartite"), (4, 4)), rho)
    assert general == pytest.approx(2 * bip, abs=1e-12)
    rho = _random_state((3, 3), 7)
    general = expectation(build_witness(WitnessSpec(2, 0.6), (3, 3)), rho)
    bip = expectation(build_witness(WitnessSpec(2, 0.6, "bipartite"), (3, 3)), rho)
    assert general == pytest.approx(2 * bip, abs=1e-12)


def test_tripartite_matches_general_three_mode():
    for seed in range(3):
        rho = _random_state((2, 2, 2), seed)
        a = expectation(build_witness(WitnessSpec(3, 0.83, "tripartite"), (2, 2, 2)), rho)
        b = expectation(build_witness(WitnessSpec(3, 0.83), (2, 2, 2)), rho)
        assert a == pytest.approx(b, abs=1e-10)
    rho = w_state(3, (4, 4, 4))
    val = expectation(build_witness(WitnessSpec(3, 0.83, "tripartite"), (4, 4, 4)), rho)
    assert val == pytest.approx(z_w_analytic(3, 0.83), abs=1e-8)


@pytest.mark.parametrize("n", [2, 3])
@pytest.mark.parametrize("alpha", [0.3, 0.7, 0.83, 1.0])
def test_z_w_fock_matches_closed_form(n, alpha):
    dims = (4,) * n
    val = expectation(build_witness(WitnessSpec(n, alpha), dims), w_state(n, dims))
    assert val == pytest.approx(z_w_closed_form(n, alpha), abs=1e-8)
    assert z_w_analytic(n, alpha) == pytest.approx(z_w_closed_form(n, alpha), abs=1e-12)


def test_z_w_examples():
    assert z_w_analytic(2, 0) == pytest.approx(-2)


@pytest.mark.parametrize("n", [2, 3])
def test_permutation_symmetry(n):
    dims = (2, 3, 2)[:n]
    rho = _random_state(dims, 11)
    spec = WitnessSpec(n, 0.83)
    ref = expectation(build_witness(spec, dims), rho)
    for perm in itertools.permutations(range(n)):
        rp = _permute(rho, list(perm))
        assert expectation(build_witness(spec, rp.space.dims), rp) == pytest.approx(ref, abs=1e-10)


def test_permute_helper_agrees_with_partial_trace():
    rho = _random_state((2, 3), 4)
    swapped = _permute(rho, [1, 0])
    assert np.allclose(partial_trace(swapped, [0]).matrix, partial_trace(rho, [1]).matrix)


def test_w_state_examples():
    w2 = w_state(2).matrix
    expected = np.zeros((4, 4))
    expected[1, 1] = expected[1, 2] = expected[2, 1] = expected[2, 2] = 0.5
    assert np.allclose(w2, expected)
    w3 = w_state(3, (3, 3, 3))
    assert np.linalg.matrix_rank(w3.matrix) == 1 and np.trace(w3.matrix).real == pytest.approx(1)
    n_tot = w3.space.total_number()
    assert np.allclose(np.diag(w3.matrix)[n_tot != 1], 0)
    for keep in range(4):
        red = partial_trace(w_state(4), [keep]).matrix
        assert red[1, 1].real == pytest.approx(0.25)
    with pytest.raises(InvalidArgumentError):
        w_state(1)


def test_click_stats_validation():
    with pytest.raises(InvalidDataError):
        ClickStats(2, {"00": 0.5, "0c": 0.2, "c0": 0.2, "cc": 0.2})
    with pytest.raises(InvalidDataError):
        ClickStats(2, {"00": 1.2, "0c": -0.2})
    with pytest.raises(InvalidDataError):
        ClickStats(2, {"00": 1.0, "0x": 0.0})
    with pytest.raises(InvalidDataError):
        ClickStats(2, {"00": 1.0}, pc=(0.6, 0.0))
    with pytest.raises(InvalidDataError):
        ClickStats(2, {"00": 1.0}, {(0, 0): {"00": 1.0}})
    s = ClickStats(2, {"00": 1.0}, {(1, 0): {"cc": 1.0}})
    assert s.p("cc", (0, 1)) == 1.0 and s.pc == (0.0, 0.0)


def test_correlator_marginalizes():
    table = {"00": 0.4, "0c": 0.1, "c0": 0.2, "cc": 0.3}
    assert correlator(table, [0, 1]) == pytest.approx(0.4 + 0.3 - 0.1 - 0.2)
    assert correlator(table, [0]) == pytest.approx(0.5 - 0.5)
    assert correlator(table, [1]) == pytest.approx(0.6 - 0.4)
    assert correlator(table, []) == pytest.approx(1.0)


def test_witness_from_counts_examples():
    spec = WitnessSpec(2, 0.83, "bipartite")
    dark = ClickStats(2, {"00": 1.0}, {(0, 1): {"00": 1.0}})
    assert witness_from_counts(dark, spec) == pytest.approx(1.0)
    ideal = click_stats_from_state(w_state(2), 0.83)
    e_alpha = correlator(ideal.displaced[(0, 1)], [0, 1])
    assert correlator(ideal.undisplaced, [0, 1]) == pytest.approx(-1.0)
    assert witness_from_counts(ideal, spec) == pytest.approx(2 * e_alpha + 1)
    with pytest.raises(InvalidDataError):
        witness_from_counts(ClickStats(2, {"00": 1.0}), spec)
    with pytest.raises(InvalidArgumentError):
        witness_from_counts(dark, WitnessSpec(3, 0.83))


def test_counts_witness_matches_operator_expectation():
    for n, variant in [(2, "bipartite"), (3, "tripartite"), (3, "general")]:
        dims = (3,) * n
        rho = _random_state(dims, 20 + n)
        spec = WitnessSpec(n, 0.7, variant)
        stats = click_stats_from_state(rho, 0.7)
        assert witness_from_counts(stats, spec) == pytest.approx(expectation(build_witness(spec, dims), rho), abs=1e-9)


def test_single_photon_source_reproduces_closed_form():
    stats = model_click_stats(SourceParams(t_g=0.0, eta_total=1.0, alpha=0.83))
    z = witness_from_counts(stats, WitnessSpec(2, 0.83, "bipartite"))
    assert z == pytest.approx(z_w_analytic(2, 0.83) / 2, abs=1e-9)


@pytest.mark.parametrize("alpha", [0.5, 0.83, 1.0])
def test_separable_statistics_stay_below_bound(alpha):
    from pathwit.fock import coherent_ket, thermal_state

    dim = 10
    states = [np.kron(thermal_state(0.2, dim).matrix, thermal_state(0.05, dim).matrix)]
    for b1, b2 in [(0.3, 0.1), (0.5, -0.5j), (0.9, 0.2)]:
        k = np.kron(coherent_ket(b2, dim), coherent_ket(b1, dim))
        k = k / np.linalg.norm(k)
        states.append(np.outer(k, k.conj()))
    spec = WitnessSpec(2, alpha, "bipartite")
    for m in states:
        rho = DensityMatrix(FockSpace((dim, dim)), m / np.trace(m).real)
        stats = click_stats_from_state(rho, alpha)
        bound = bipartite_bound_from_counts(stats, alpha)
        assert witness_from_counts(stats, spec) <= bound.value + 1e-9
