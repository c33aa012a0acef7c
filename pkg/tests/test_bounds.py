"""Tests for the converse bounds and the certified max-entropy solver."""

import math

import numpy as np
import pytest

from qsm.bounds import (
    compare_bounds,
    converse_search,
    converse_simple,
    h_max_conditional,
    qutrit_counterexample_report,
    uniform_resource_majorization,
)
from qsm.errors import ValidationError
from qsm.ki import ki_decompose
from qsm.merge import achievable_cost
from qsm.statespace import (
    Registers,
    TripartiteState,
    catalog,
    max_entangled_counterpart,
    random_state,
)

LOG2_3_HALVES = math.log2(1.5)
# reference optima from an independent high-accuracy solver run
H_MAX_IMPLICATION3 = 0.5431066063
H_MAX_RANDOM_222_SEED42 = [0.5528993882, 0.3062781564, 0.2152305010]
H_TOL = 2e-6


def _spectrum(mat):
    return np.clip(np.linalg.eigvalsh(mat)[::-1], 0.0, None)


def _b_decoupled_state():
    """|mu>^B tensor Bell^{RA} with a non-uniform receiver vector."""
    amps = np.zeros((2, 2, 2), dtype=complex)
    mu = np.array([0.6, 0.8])
    for i in range(2):
        amps[i, i, :] = mu / np.sqrt(2.0)
    return TripartiteState(Registers(2, 2, 2), amps)


# --------------------------------------------------------------------------
# closed-form bound


def test_simple_implication3():
    vals = converse_simple(catalog("implication3"))
    assert vals["catalytic"] == pytest.approx(LOG2_3_HALVES, abs=1e-12)
    assert vals["noncatalytic"] == pytest.approx(1.0, abs=1e-12)


@pytest.mark.parametrize("d", [2, 3, 5])
def test_simple_ghz(d):
    vals = converse_simple(catalog("ghz", d=d))
    assert abs(vals["catalytic"]) <= 1e-9
    assert abs(vals["noncatalytic"]) <= 1e-9


def test_simple_qutrit_choi():
    vals = converse_simple(catalog("qutrit_choi"))
    assert abs(vals["catalytic"]) <= 1e-9
    assert abs(vals["noncatalytic"]) <= 1e-9


def test_simple_substitutes_skewed_spectator():
    rng = np.random.default_rng(5)
    state = random_state(rng, (2, 3, 2))
    counterpart = max_entangled_counterpart(state)
    assert converse_simple(state) == converse_simple(counterpart)
    lam0 = float(_spectrum(counterpart.marginal("B"))[0])
    expected = math.log2(lam0 * 2)
    assert converse_simple(state)["catalytic"] == pytest.approx(expected, abs=1e-12)


# --------------------------------------------------------------------------
# grid search bound


def test_search_implication3():
    report = converse_search(catalog("implication3"))
    assert report.catalytic_bits == pytest.approx(LOG2_3_HALVES, abs=1e-9)
    assert (report.catalytic_K, report.catalytic_L) == (3, 2)
    assert report.noncatalytic_bits == pytest.approx(1.0, abs=1e-12)
    assert report.noncatalytic_K == 2
    assert report.analytic_bits == pytest.approx(LOG2_3_HALVES, abs=1e-9)


def test_search_ghz2():
    report = converse_search(catalog("ghz", d=2))
    assert report.catalytic_bits == 0.0
    assert (report.catalytic_K, report.catalytic_L) == (1, 1)
    assert report.noncatalytic_bits == 0.0
    assert report.noncatalytic_K == 1


def test_search_b_decoupled():
    report = converse_search(_b_decoupled_state())
    assert report.catalytic_bits == pytest.approx(1.0, abs=1e-12)
    assert (report.catalytic_K, report.catalytic_L) == (2, 1)
    assert report.noncatalytic_bits == pytest.approx(1.0, abs=1e-12)


def test_search_caps_recorded_and_validated():
    report = converse_search(catalog("ghz", d=2), K_max=5, L_max=7)
    assert (report.K_max, report.L_max) == (5, 7)
    with pytest.raises(ValidationError):
        converse_search(catalog("ghz", d=2), K_max=0)
    with pytest.raises(ValidationError):
        converse_search(catalog("ghz", d=2), L_max=0)


def test_search_uniform_refinement_monotone():
    # if (K, L) passes the spectra test then so does (c*K, L) for c >= 1
    rng = np.random.default_rng(11)
    for _ in range(5):
        state = random_state(rng, (2, 2, 3))
        eig_b = _spectrum(state.marginal("B"))
        eig_ab = _spectrum(state.marginal("AB"))
        for K in range(1, 7):
            for L in range(1, 5):
                if uniform_resource_majorization(eig_b, eig_ab, K, L):
                    for c in (2, 3):
                        assert uniform_resource_majorization(eig_b, eig_ab, c * K, L)


def test_search_below_achievable_on_corpus():
    cases = [
        ("appendixD", None),
        ("implication2", None),
        ("implication3", None),
        ("ghz", 2),
        ("ghz", 3),
        ("qutrit_choi", None),
    ]
    for name, d in cases:
        state = catalog(name, d=d)
        decomp = ki_decompose(state)
        search = converse_search(state, K_max=16, L_max=16)
        for mode, bits in (
            ("catalytic", search.catalytic_bits),
            ("noncatalytic", search.noncatalytic_bits),
        ):
            cost = achievable_cost(decomp, mode=mode).cost_bits
            assert bits <= cost + 1e-9, (name, mode, bits, cost)


# --------------------------------------------------------------------------
# conditional max-entropy solver


def test_hmax_implication3():
    h = h_max_conditional(catalog("implication3"))
    assert 0.54 < h < 0.5432
    assert h == pytest.approx(H_MAX_IMPLICATION3, abs=H_TOL)


def test_hmax_pure_product():
    amps = np.zeros((1, 2, 2))
    amps[0, 0, 0] = 1.0
    h = h_max_conditional(TripartiteState(Registers(1, 2, 2), amps))
    assert h == pytest.approx(0.0, abs=H_TOL)


@pytest.mark.parametrize("d", [2, 3])
def test_hmax_maximally_entangled(d):
    amps = (np.eye(d) / math.sqrt(d)).reshape(1, d, d)
    h = h_max_conditional(TripartiteState(Registers(1, d, d), amps))
    assert h == pytest.approx(-math.log2(d), abs=H_TOL)


def test_hmax_ghz2():
    assert h_max_conditional(catalog("ghz", d=2)) == pytest.approx(0.0, abs=H_TOL)


def test_hmax_frozen_random_values():
    rng = np.random.default_rng(42)
    for expected in H_MAX_RANDOM_222_SEED42:
        h = h_max_conditional(random_state(rng, (2, 2, 2)))
        assert h == pytest.approx(expected, abs=H_TOL)


def test_hmax_trivial_spectator_law():
    # rank-1 spectator: optimum is the top receiver eigenvalue
    rng = np.random.default_rng(13)
    for _ in range(4):
        state = random_state(rng, (1, 3, 3))
        expected = math.log2(float(_spectrum(state.marginal("B"))[0]))
        assert h_max_conditional(state) == pytest.approx(expected, abs=H_TOL)


def test_hmax_trivial_receiver_law():
    # rank-1 receiver: optimum reduces to the Renyi-1/2 entropy of psi^A
    rng = np.random.default_rng(17)
    for _ in range(4):
        state = random_state(rng, (3, 3, 1))
        lam = _spectrum(state.marginal("A"))
        expected = math.log2(float(np.sqrt(lam).sum() ** 2))
        assert h_max_conditional(state) == pytest.approx(expected, abs=H_TOL)


def test_hmax_dimension_cap():
    with pytest.raises(ValidationError):
        h_max_conditional(catalog("qutrit_choi"))


# --------------------------------------------------------------------------
# bound comparison


def test_compare_implication3():
    report = compare_bounds(catalog("implication3"))
    assert report.applicable
    assert report.gap >= 0.0417
    assert report.simple_catalytic >= report.h_max - 1e-6
    assert report.search_catalytic == pytest.approx(report.simple_catalytic, abs=1e-9)
    assert report.simple_noncatalytic == pytest.approx(1.0, abs=1e-12)
    assert report.search_noncatalytic == pytest.approx(1.0, abs=1e-12)


def test_compare_ghz2():
    report = compare_bounds(catalog("ghz", d=2))
    assert abs(report.simple_catalytic) <= 1e-9
    assert abs(report.h_max) <= H_TOL
    assert abs(report.search_catalytic) <= 1e-9
    assert abs(report.gap) <= H_TOL


def test_compare_random_sweep():
    rng = np.random.default_rng(2026)
    min_gap = math.inf
    for _ in range(100):
        state = random_state(rng, (2, 2, 2))
        report = compare_bounds(state, K_max=8, L_max=8)
        assert report.simple_catalytic >= report.h_max - 1e-6
        assert report.search_catalytic >= report.simple_catalytic - 1e-6
        min_gap = min(min_gap, report.gap)
    assert min_gap >= -1e-6


def test_simple_dominates_hmax_via_feasible_point():
    # the witness behind the ordering: Z = D * psi^{AB} is feasible and has
    # spectral norm D * lambda0^B once the spectator marginal is uniform
    for name, d in (("implication3", None), ("ghz", 3), ("appendixD", None)):
        state = max_entangled_counterpart(catalog(name, d=d))
        dims = state.dims
        dim = int(round(1.0 / float(_spectrum(state.marginal("R"))[0])))
        z = dim * state.marginal("AB")
        psi = state.vector
        gap = np.kron(np.eye(dims[0]), z) - np.outer(psi, psi.conj())
        assert np.linalg.eigvalsh(gap).min() >= -1e-9


# --------------------------------------------------------------------------
# qutrit channel report


def test_qutrit_report_checks():
    report = qutrit_counterexample_report()
    assert report.spectator_uniform
    assert report.receiver_uniform
    assert report.channel_unital
    assert report.channel_trace_preserving
    assert report.channel_completely_positive
    assert report.state_matches_choi
    assert report.choi_rank == 3
    assert report.choi_trace == pytest.approx(3.0, abs=1e-9)
    top = np.sort(report.choi_eigenvalues)[::-1]
    assert np.allclose(top[:3], 1.0, atol=1e-9)
    assert np.allclose(top[3:], 0.0, atol=1e-9)
    assert abs(report.converse_catalytic_bits) <= 1e-9
    assert abs(report.converse_noncatalytic_bits) <= 1e-9
