import numpy as np
import pytest

from qsm import ki, statespace
from qsm.errors import ValidationError
from qsm.numerics import dagger, random_unitary


def _proj(cols):
    return cols @ cols.conj().T


def test_steered_state_examples():
    g2 = statespace.catalog("ghz", 2)
    assert np.allclose(ki.steered_state(g2, np.eye(2)), np.diag([0.5, 0.5]))
    assert np.allclose(ki.steered_state(g2, np.diag([1.0, 0.0])), np.diag([1.0, 0.0]))
    with pytest.raises(ValidationError):
        ki.steered_state(g2, -np.eye(2))
    # steering onto an unpopulated direction
    amps = np.zeros((2, 2, 2), dtype=complex)
    amps[0, 0, 0] = 1.0
    st = statespace.TripartiteState(statespace.Registers(2, 2, 2), amps)
    with pytest.raises(ValidationError):
        ki.steered_state(st, np.diag([0.0, 1.0]))


def test_steering_generators_span():
    for d in (2, 3):
        gens = ki.steering_generators(d)
        assert len(gens) == d * d
        # real span of the generators covers all Hermitian operators
        basis = np.array([g.reshape(-1) for g in gens])
        stacked = np.vstack([basis.real.T, basis.imag.T])
        assert np.linalg.matrix_rank(stacked) == d * d


def test_refinement_index_formula():
    g2 = statespace.catalog("ghz", 2)
    init = ki.initial_structure(g2)
    assert ki.refinement_index(init) == 1
    # S=3, J=2 -> 5 ; S=2, J=2 -> 2
    fake = ki.BlockStructure(
        spaces=(np.zeros((6, 1, 2)), np.zeros((6, 2, 1)))
    )
    assert ki.refinement_index(fake) == 5
    fake2 = ki.BlockStructure(spaces=(np.zeros((2, 1, 1)), np.zeros((2, 1, 1))))
    assert ki.refinement_index(fake2) == 2


def test_l_decompose_step_ghz2():
    g2 = statespace.catalog("ghz", 2)
    init = ki.initial_structure(g2)
    refined = ki.l_decompose_step(g2, init)
    assert refined is not None
    assert refined.J == 2
    assert refined.dims() == [(1, 1), (1, 1)]


def test_l_decompose_step_appendix_d_first_split():
    st = statespace.catalog("appendixD")
    init = ki.initial_structure(st)
    assert init.dims() == [(5, 1)]  # support of psi^A is 5-dimensional
    refined = ki.l_decompose_step(st, init)
    assert refined is not None
    assert refined.J == 2
    # one part spans {|0>_{A1}} (x) A2 = coords {0,1}; the other the rest of the support
    spans = sorted(
        [v.reshape(6, -1) for v in refined.spaces], key=lambda m: m.shape[1]
    )
    p_small = _proj(spans[0])
    expect = np.zeros((6, 6))
    expect[0, 0] = expect[1, 1] = 1.0
    assert np.linalg.norm(p_small - expect) < 1e-8 or np.linalg.norm(
        _proj(spans[1]) - expect
    ) < 1e-8


def test_l_decompose_step_generic():
    st = statespace.random_state(np.random.default_rng(42), (2, 2, 2))
    # the initial structure splits (steered states differ on the full space) ...
    init = ki.initial_structure(st)
    assert ki.l_decompose_step(st, init) is not None
    # ... but the maximal single-quantum-block structure admits no witness
    dec = ki.ki_decompose(st)
    final = ki.BlockStructure(spaces=tuple(b.iso for b in dec.blocks))
    assert ki.l_decompose_step(st, final) is None


def test_r_combine_step_ghz2_none():
    g2 = statespace.catalog("ghz", 2)
    two = ki.l_decompose_step(g2, ki.initial_structure(g2))
    assert ki.r_combine_step(g2, two) is None


def test_r_combine_step_b_decoupled():
    # R-A maximally entangled, B decoupled: combines into one 2-dim quantum block
    amps = np.zeros((2, 2, 2), dtype=complex)
    amps[0, 0, 0] = amps[1, 1, 0] = 1 / np.sqrt(2.0)
    st = statespace.TripartiteState(statespace.Registers(2, 2, 2), amps)
    split = ki.l_decompose_step(st, ki.initial_structure(st))
    assert split is not None and split.J == 2
    combined = ki.r_combine_step(st, split)
    assert combined is not None
    assert combined.dims() == [(1, 2)]


def test_ki_decompose_appendix_d():
    st = statespace.catalog("appendixD")
    dec = ki.ki_decompose(st)
    assert dec.J == 2
    assert (dec.blocks[0].dim_L, dec.blocks[0].dim_R) == (2, 2)
    assert (dec.blocks[1].dim_L, dec.blocks[1].dim_R) == (2, 1)
    assert dec.trajectory == (1, 2, 4, 5)
    assert dec.r == 5
    # printed spans: block 0 = A1 in {0,1} (x) A2 ; block 1 = |2>_{A1} (x) A2
    p0_expect = np.diag([1.0, 1, 1, 1, 0, 0])
    p1_expect = np.diag([0.0, 0, 0, 0, 1, 1])
    assert np.linalg.norm(dec.blocks[0].projector - p0_expect) < 1e-8
    assert np.linalg.norm(dec.blocks[1].projector - p1_expect) < 1e-8
    assert abs(dec.blocks[0].p - 0.5) < 1e-9
    assert abs(dec.blocks[1].p - 0.5) < 1e-9
    # redundant parts: uniform rank-2 omega in block 0, rank-1 in the glued block 1
    assert np.allclose(dec.blocks[0].lambdas, [0.5, 0.5])
    assert np.allclose(dec.blocks[1].lambdas, [1.0])
    assert abs(dec.blocks[0].lambda0_L - 0.5) < 1e-9
    assert abs(dec.blocks[1].lambda0_L - 1.0) < 1e-9


def test_ki_decompose_ghz():
    for d in (2, 3):
        dec = ki.ki_decompose(statespace.catalog("ghz", d))
        assert dec.J == d
        for b in dec.blocks:
            assert (b.dim_L, b.dim_R) == (1, 1)
            assert abs(b.p - 1.0 / d) < 1e-9


def test_ki_decompose_generic_2x2x2():
    st = statespace.random_state(np.random.default_rng(42), (2, 2, 2))
    dec = ki.ki_decompose(st)
    assert dec.J == 1
    assert (dec.blocks[0].dim_L, dec.blocks[0].dim_R) == (1, 2)


def test_ki_decompose_implication2():
    st = statespace.catalog("implication2")
    dec = ki.ki_decompose(st)
    assert dec.J == 2
    dims = [(b.dim_L, b.dim_R) for b in dec.blocks]
    assert dims == [(4, 2), (4, 1)]
    assert abs(dec.blocks[0].p - 2.0 / 3.0) < 1e-9
    assert abs(dec.blocks[1].p - 1.0 / 3.0) < 1e-9
    # block 0 redundant part maximally mixed on 4 dims; block 1 rank 2 glued to 4
    assert np.allclose(dec.blocks[0].lambdas, 0.25)
    assert np.allclose(dec.blocks[1].lambdas, [0.5, 0.5])


def test_ki_decompose_implication3():
    st = statespace.catalog("implication3")
    dec = ki.ki_decompose(st)
    assert dec.J == 1
    assert (dec.blocks[0].dim_L, dec.blocks[0].dim_R) == (1, 2)
    assert abs(dec.blocks[0].lambda0_L - 1.0) < 1e-9


def test_block_invariants():
    for name in ("appendixD", "implication2", "implication3"):
        st = statespace.catalog(name)
        dec = ki.ki_decompose(st)
        total = sum(b.p for b in dec.blocks)
        assert abs(total - 1.0) < 1e-9
        proj_sum = sum(b.projector for b in dec.blocks)
        assert np.linalg.norm(proj_sum - np.eye(st.regs.dim_A)) < 1e-8
        for b in dec.blocks:
            if b.p > 0:
                om = b.omega
                assert abs(np.trace(om).real - 1.0) < 1e-9
                assert np.linalg.eigvalsh(om).min() > -1e-9
                assert abs(np.linalg.norm(b.phi) - 1.0) < 1e-9


def test_local_unitary_invariance():
    rng = np.random.default_rng(202)
    st = statespace.catalog("appendixD")
    dec = ki.ki_decompose(st)
    sig = sorted(
        (b.dim_L, b.dim_R, round(b.p, 8), tuple(np.round(b.lambdas, 8))) for b in dec.blocks
    )
    v_r = random_unitary(rng, 3)
    v_a = random_unitary(rng, 6)
    v_b = random_unitary(rng, 3)
    rotated = np.einsum("xi,ab,yz,iaz->xby", v_r, v_a, v_b, st.amplitudes)
    st2 = statespace.TripartiteState(st.regs, rotated)
    dec2 = ki.ki_decompose(st2)
    sig2 = sorted(
        (b.dim_L, b.dim_R, round(b.p, 8), tuple(np.round(b.lambdas, 8))) for b in dec2.blocks
    )
    assert sig == sig2


def test_steered_states_invariant_under_block_mixed_unitaries():
    from qsm.numerics import canonical_eigh

    rng = np.random.default_rng(7)
    st = statespace.catalog("appendixD")
    dec = ki.ki_decompose(st)
    # CPTP map: on each block, a mixed unitary on a_j^L that preserves omega_j
    # (phase unitaries in the omega eigenbasis), tensored with identity on a_j^R
    krauses = []
    for b in dec.blocks:
        flat = b.iso.reshape(st.regs.dim_A, -1)
        _, basis = canonical_eigh(b.omega)
        for w in (0.3, 0.7):
            phases = np.exp(2j * np.pi * rng.random(b.dim_L))
            u = basis @ np.diag(phases) @ dagger(basis)
            op = flat @ np.kron(u, np.eye(b.dim_R)) @ dagger(flat)
            krauses.append(np.sqrt(w) * op)
    for gen in ki.steering_generators(3):
        rho = ki.steered_state(st, gen + 1e-3 * np.eye(3))
        mapped = sum(k @ rho @ dagger(k) for k in krauses)
        assert np.linalg.norm(mapped - rho) < 1e-7


def test_reconstruction_block_form():
    from qsm.numerics import fidelity

    for name in ("appendixD", "implication2", "qutrit_choi"):
        st = statespace.catalog(name)
        dec = ki.ki_decompose(st)
        transformed = np.einsum("xa,iab,yb->ixy", dec.U_A, st.amplitudes, dec.U_B)
        target = ki.block_form_target(st, dec)
        assert fidelity(transformed.reshape(-1), target.reshape(-1)) > 1 - 1e-8
        # the embeddings are isometries from the physical registers
        assert np.allclose(dagger(dec.U_A) @ dec.U_A, np.eye(st.regs.dim_A), atol=1e-9)
        assert np.allclose(dagger(dec.U_B) @ dec.U_B, np.eye(st.regs.dim_B), atol=1e-9)


def test_ki_decompose_random_states_terminate():
    rng = np.random.default_rng(99)
    for dims in ((2, 2, 2), (3, 2, 2), (2, 3, 2), (2, 4, 3)):
        st = statespace.random_state(rng, dims)
        dec = ki.ki_decompose(st)
        assert sum(b.p for b in dec.blocks) == pytest.approx(1.0, abs=1e-9)


def test_ki_decompose_b_trivial():
    # B-decoupled product: psi = phi^{RA} (x) |0>_B with entangled phi
    amps = np.zeros((2, 2, 1), dtype=complex)
    amps[0, 0, 0] = np.sqrt(0.7)
    amps[1, 1, 0] = np.sqrt(0.3)
    st = statespace.TripartiteState(statespace.Registers(2, 2, 1), amps)
    dec = ki.ki_decompose(st)
    assert dec.J == 1
    assert (dec.blocks[0].dim_L, dec.blocks[0].dim_R) == (1, 2)
