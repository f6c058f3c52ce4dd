"""Purified-dynamics entropies and the decodability floor they imply."""
import numpy as np
import pytest

from dynaqec.codes import protocol_2qubit, repetition_isometry
from dynaqec.infobounds import (
    BoundReport,
    entropy_gap,
    purify,
    random_check_instance as random_instance,
    verify_entropy_bound,
    von_neumann_entropy,
    PurifiedState,
)
from dynaqec.noise import NoiseProcess, ad_kraus, kraus_noise, local_k_noise
from dynaqec.operators import dagger, haar_isometry, random_cptp_kraus, tensor
from dynaqec.recovery import CodespaceProjector, Interrogator, kl_check

X = np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex)


def identity_noise(dim: int, rounds: int) -> NoiseProcess:
    eye = np.eye(dim, dtype=complex)
    return kraus_noise([[eye] for _ in range(rounds)])


def bitflip_two_round(n: int, p: float) -> NoiseProcess:
    ops = [np.sqrt(1 - n * p) * np.eye(2**n, dtype=complex)]
    for i in range(n):
        facs = [np.eye(2, dtype=complex)] * n
        facs[i] = X
        ops.append(np.sqrt(p) * tensor(*facs))
    return kraus_noise([ops, [np.eye(2**n, dtype=complex)]])


# -- purification -------------------------------------------------------------


def test_identity_dynamics_purify_to_a_product():
    t = Interrogator.identity(2)
    states = purify(t, identity_noise(2, 2))
    assert len(states) == 1
    st = states[0]
    assert st.weight == pytest.approx(1.0, abs=1e-12)
    psi = st.tensor()  # (R, A, B, E) = (2, 2, 1, 1)
    want = np.zeros((2, 2, 1, 1), dtype=complex)
    want[0, 0, 0, 0] = want[1, 1, 0, 0] = 1.0 / np.sqrt(2.0)
    np.testing.assert_allclose(psi, want, atol=1e-12)


def test_branch_norms_and_weights():
    rng = np.random.default_rng(11)
    proj, t, noise = random_instance(rng, 2, 2)
    states = purify(t, noise, proj)
    assert sum(st.weight for st in states) == pytest.approx(1.0, abs=1e-10)
    for st in states:
        assert np.linalg.norm(st.vector) == pytest.approx(1.0, abs=1e-10)


def test_purification_reduces_to_the_open_dynamics():
    # mixture over branches on (R, A) == direct evolution of half the
    # entangled input, term by term
    rng = np.random.default_rng(3)
    proj, t, noise = random_instance(rng, 1, 2)
    states = purify(t, noise, proj)
    dl, d = proj.rank, proj.dim
    got = np.zeros((dl * d, dl * d), dtype=complex)
    for st in states:
        psi = st.tensor().reshape(dl * d, -1)
        got += st.weight * (psi @ psi.conj().T)

    from dynaqec.recovery import path_operators

    want = np.zeros_like(got)
    for path in t.paths():
        for b in path_operators(t, noise, path):
            m = (b @ proj.basis) / np.sqrt(dl)  # columns indexed by R
            v = m.T.reshape(-1)  # (R, A) row-major
            want += np.outer(v, v.conj())
    assert np.abs(got - want).max() < 1e-9


def test_single_qubit_damping_branch_matches_channel_action():
    gamma = 0.5
    e0, e1 = ad_kraus(gamma)
    noise = kraus_noise([[e0, e1], [np.eye(2, dtype=complex)]])
    states = purify(Interrogator.identity(2), noise)
    rho_ra = np.zeros((4, 4), dtype=complex)
    for st in states:
        psi = st.tensor().reshape(4, -1)
        rho_ra += st.weight * (psi @ psi.conj().T)
    # oracle: apply the channel to the A half of the entangled state directly
    phi = np.zeros((4, 4), dtype=complex)
    for i in (0, 1):
        for j in (0, 1):
            phi[2 * i + i, 2 * j + j] = 0.5
    want = np.zeros_like(phi)
    for k in (e0, e1):
        big = np.kron(np.eye(2), k)
        want += big @ phi @ dagger(big)
    assert np.abs(rho_ra - want).max() < 1e-12


def test_purify_rejects_dimension_mismatch():
    with pytest.raises(ValueError):
        purify(Interrogator.identity(2), identity_noise(4, 2))
    with pytest.raises(ValueError):
        purify(
            Interrogator.identity(4),
            identity_noise(4, 2),
            CodespaceProjector(np.eye(2, dtype=complex)),
        )


# -- entropies ----------------------------------------------------------------


def test_entropy_closed_forms():
    assert von_neumann_entropy(np.eye(2) / 2) == pytest.approx(1.0, abs=1e-12)
    assert von_neumann_entropy(np.diag([1.0, 0.0])) == pytest.approx(0.0, abs=1e-12)
    p = 0.3
    h = -p * np.log2(p) - (1 - p) * np.log2(1 - p)
    assert von_neumann_entropy(np.diag([p, 1 - p])) == pytest.approx(h, abs=1e-12)


def test_product_state_has_zero_gap():
    report = entropy_gap(purify(Interrogator.identity(2), identity_noise(2, 2)))
    assert report.epsilon == pytest.approx(0.0, abs=1e-9)
    assert report.s_r[0] == pytest.approx(1.0, abs=1e-9)


def test_correctable_instance_has_zero_gap():
    proj = CodespaceProjector(repetition_isometry(3))
    noise = bitflip_two_round(3, 0.05)
    t = Interrogator.identity(8)
    assert kl_check(proj, t, noise).correctable
    report = entropy_gap(purify(t, noise, proj))
    assert all(g <= 1e-9 for g in report.gaps)
    assert all(g >= -1e-9 for g in report.gaps)


def test_uncorrectable_damping_has_large_gap():
    e0, e1 = ad_kraus(0.5)
    noise = kraus_noise([[e0, e1], [np.eye(2, dtype=complex)]])
    report = entropy_gap(purify(Interrogator.identity(2), noise))
    assert report.epsilon > 0.01


def test_gaps_nonnegative_on_random_instances():
    rng = np.random.default_rng(7)
    for _ in range(6):
        proj, t, noise = random_instance(rng, rng.integers(1, 3), 2)
        report = entropy_gap(purify(t, noise, proj))
        assert all(g >= -1e-9 for g in report.gaps)


def test_entropy_is_environment_basis_independent():
    rng = np.random.default_rng(19)
    proj, t, noise = random_instance(rng, 1, 2)
    states = purify(t, noise, proj)
    base = entropy_gap(states)
    u = haar_isometry(rng, states[0].dims[3], states[0].dims[3])
    rotated = [
        PurifiedState(
            np.einsum("rabe,fe->rabf", st.tensor(), u).reshape(-1),
            st.dims,
            st.outcome,
            st.weight,
        )
        for st in states
    ]
    after = entropy_gap(rotated)
    for x, y in zip(base.gaps, after.gaps):
        assert abs(x - y) <= 1e-10


# -- the fidelity floor -------------------------------------------------------


def test_bound_on_a_correctable_instance():
    proj = CodespaceProjector(repetition_isometry(3))
    rep = verify_entropy_bound(Interrogator.identity(8), bitflip_two_round(3, 0.05), proj)
    assert rep.epsilon == pytest.approx(0.0, abs=1e-8)
    assert rep.achieved == pytest.approx(1.0, abs=1e-8)
    assert rep.satisfied and not rep.vacuous


def test_bound_achieved_matches_block_solver_cross_check():
    # the per-path decoder matrices must agree with the production fidelity
    # contraction: compare against the strategic-code decoder objectives
    from dynaqec.codes import StrategicCode, choi_from_kraus, isometry_choi
    from dynaqec.fidelity import (
        mixed_state,
        single_check_decoder_objectives,
    )
    from dynaqec.noise import precompute_tensors
    from dynaqec.sdp import solve_block_sdp

    rng = np.random.default_rng(23)
    n, d = 1, 2
    proj, t, noise = random_instance(rng, n, 2)
    rep = verify_entropy_bound(t, noise, proj, decoder_source="sdp_optimal")

    enc = isometry_choi(proj.basis, (2,), (2,) * n)
    checks = [
        choi_from_kraus([op], (2,) * n, (2,) * n) for op in t.layers[0][()]
    ]
    tensors = precompute_tensors(noise, mixed_state(2))
    mats = single_check_decoder_objectives(enc, checks, tensors)
    want = sum(solve_block_sdp([m], d, 2).objective for m in mats)
    assert rep.achieved == pytest.approx(want, abs=1e-8)


def test_bound_holds_on_random_instances_both_sources():
    rng = np.random.default_rng(1)
    for _ in range(5):
        proj, t, noise = random_instance(rng, int(rng.integers(1, 3)), 2)
        opt = verify_entropy_bound(t, noise, proj, decoder_source="sdp_optimal")
        petz = verify_entropy_bound(t, noise, proj, decoder_source="temporal_petz")
        assert opt.satisfied
        assert petz.satisfied
        # the SDP decoder is optimal, so it can only beat the Petz family
        assert opt.achieved >= petz.achieved - 1e-8


def test_heavy_damping_bound_is_vacuous_but_satisfied():
    e0, e1 = ad_kraus(0.9)
    noise = kraus_noise([[e0, e1], [np.eye(2, dtype=complex)]])
    rep = verify_entropy_bound(Interrogator.identity(2), noise)
    assert rep.vacuous and rep.satisfied
    assert rep.bound < 0.0


def test_bound_report_csv_row():
    rep = BoundReport(0.01, 0.8, 0.9, True, False, "sdp_optimal")
    line = rep.csv_line()
    assert line.split(", ")[3] == "false"
    assert float(line.split(", ")[0]) == pytest.approx(0.01)


def test_unknown_decoder_source_is_rejected():
    with pytest.raises(ValueError):
        verify_entropy_bound(
            Interrogator.identity(2), identity_noise(2, 2), decoder_source="best"
        )
