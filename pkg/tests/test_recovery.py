"""Recovery-map construction, correctability checks, exact-recovery equivalence."""
import numpy as np
import pytest

from dynaqec.codes import (
    StrategicCode,
    StaticCode,
    choi_from_kraus,
    identity_choi,
    leung_4qubit_encoder,
    protocol_2qubit,
    protocol_3qubit,
    repetition_isometry,
)
from dynaqec.fidelity import fidelity_direct, mixed_state, single_check_decoder_objectives, static_decoder_objective
from dynaqec.noise import NoiseProcess, ad_kraus, local_k_noise, precompute_tensors
from dynaqec.operators import dagger, frobenius_distance, tensor
from dynaqec.recovery import (
    CodespaceProjector,
    Interrogator,
    kl_check,
    path_operators,
    perfect_recovery,
    recovery_fidelity,
    static_petz,
    temporal_petz,
    weighted_kraus,
)
from dynaqec.sdp import solve_block_sdp

X = np.array([[0, 1], [1, 0]], dtype=complex)
Z = np.array([[1, 0], [0, -1]], dtype=complex)


def bitflip_ops(n: int, p: float) -> list[np.ndarray]:
    ops = [np.sqrt(1 - n * p) * np.eye(2**n, dtype=complex)]
    for i in range(n):
        facs = [np.eye(2, dtype=complex)] * n
        facs[i] = X
        ops.append(np.sqrt(p) * tensor(*facs))
    return ops


def bitflip_two_round(n: int, p: float) -> NoiseProcess:
    """Bit flips in round 0, nothing in round 1."""
    ops = bitflip_ops(n, p)
    eye = np.eye(2**n, dtype=complex)
    terms = [(1.0, (k, eye)) for k in ops]
    chans = [[(1.0, k) for k in ops], [(1.0, eye)]]
    return NoiseProcess(n, 2, terms, chans)


def bitflip_one_round(n: int, p: float) -> NoiseProcess:
    ops = bitflip_ops(n, p)
    return NoiseProcess(n, 1, [(1.0, (k,)) for k in ops], [[(1.0, k) for k in ops]])


def weight1_ad_one_round(n: int, gamma: float) -> NoiseProcess:
    """Single-round amplitude damping truncated to at most one jump."""
    e0, e1 = ad_kraus(gamma)
    ops = [tensor(*([e0] * n))]
    for i in range(n):
        facs = [e0] * n
        facs[i] = e1
        ops.append(tensor(*facs))
    return NoiseProcess(n, 1, [(1.0, (k,)) for k in ops],
                        [[(1.0, k) for k in ops]], incomplete=True)


def test_codespace_projector_basics():
    proj = CodespaceProjector.from_encoder(protocol_2qubit().encoder)
    assert proj.dim == 4 and proj.rank == 2
    p = proj.matrix
    assert np.abs(p @ p - p).max() < 1e-10
    assert np.abs(p - dagger(p)).max() < 1e-10

    with pytest.raises(ValueError):
        CodespaceProjector(np.array([[1.0, 0.5], [0.0, 1.0]]))
    # a depolarizing-style encoder is not an isometry channel
    mixed_enc = choi_from_kraus(
        [0.5 * np.eye(2), 0.5 * X, 0.5 * Z, 0.5 * (X @ Z)], (2,), (2,))
    with pytest.raises(ValueError):
        CodespaceProjector.from_encoder(mixed_enc)


def test_interrogator_from_fixture_checks():
    t2 = Interrogator.from_code(protocol_2qubit())
    assert t2.paths() == [(0,), (1,)]
    assert t2.tp_residual() < 1e-9
    assert t2.source_paths == {(0,): (0,), (1,): (0,)}

    t3 = Interrogator.from_code(protocol_3qubit("natural"))
    assert len(t3.paths()) == 5  # four stated operators plus the completion
    assert t3.tp_residual() < 1e-9

    with pytest.raises(ValueError):
        Interrogator.from_code(protocol_2qubit(), refine=False)

    # a non-trace-preserving tree is rejected outright
    with pytest.raises(ValueError):
        Interrogator(2, [{(): [0.5 * np.eye(2)]}])


def test_path_operators_weighting():
    noise = local_k_noise(2, 1, 0.3)
    t = Interrogator.identity(4)
    b = path_operators(t, noise, (0,))
    wk = weighted_kraus(noise)
    assert b.shape[0] == len(wk)
    for got, want in zip(b, wk):
        assert frobenius_distance(got, want) < 1e-12
    with pytest.raises(ValueError):
        path_operators(Interrogator.absent(4), noise, ())  # rounds mismatch


def test_static_petz_identity_noise_is_identity():
    proj = CodespaceProjector(np.eye(2))
    fam = static_petz(proj, [np.eye(2, dtype=complex)])
    assert fam.kind == "static_petz"
    assert not fam.completed
    assert len(fam.kraus[0]) == 1
    assert frobenius_distance(fam.kraus[0][0], np.eye(2)) < 1e-12


def test_static_petz_repetition_bitflip_perfect():
    proj = CodespaceProjector(repetition_isometry(3))
    noise = bitflip_one_round(3, 0.05)
    fam = static_petz(proj, weighted_kraus(noise))
    assert fam.tp_residual() < 1e-10
    f = recovery_fidelity(fam, Interrogator.absent(8), noise)
    assert abs(f - 1.0) < 1e-9

    # cross-check the fidelity bookkeeping against the direct route
    code = StaticCode(
        encoder=choi_from_kraus([repetition_isometry(3)], (2,), (2, 2, 2)),
        decoder=fam.as_decoders()[0],
    )
    assert abs(fidelity_direct(code, noise).fidelity - f) < 1e-10


def test_static_petz_dominated_by_sdp_decoder():
    enc = leung_4qubit_encoder()
    proj = CodespaceProjector.from_encoder(enc)
    noise = weight1_ad_one_round(4, 0.1)
    fam = static_petz(proj, weighted_kraus(noise))
    f_petz = recovery_fidelity(fam, Interrogator.absent(16), noise)

    tensors = precompute_tensors(noise, mixed_state(2))
    sol = solve_block_sdp([static_decoder_objective(enc, tensors)], 16, 2)
    assert sol.status == "optimal"
    unencoded = ((1 + np.sqrt(1 - 0.1)) / 2) ** 2
    assert f_petz <= sol.objective + 1e-7
    assert sol.objective >= unencoded - 1e-9
    assert 0.9 < f_petz <= 1.0


def test_temporal_reduces_to_static_on_trivial_check():
    code = protocol_2qubit()
    proj = CodespaceProjector.from_encoder(code.encoder)
    noise = local_k_noise(2, 1, 0.3)
    fam_t = temporal_petz(proj, Interrogator.identity(4), noise, gauge="raw")
    fam_s = static_petz(proj, weighted_kraus(noise))
    assert len(fam_t.kraus) == 1
    assert len(fam_t.kraus[0]) == len(fam_s.kraus[0])
    for a, b in zip(fam_t.kraus[0], fam_s.kraus[0]):
        assert frobenius_distance(a, b) < 1e-10


CORRECTABLE_INSTANCES = {
    "identity-check": lambda: Interrogator.identity(8),
    "logical-flip-check": lambda: Interrogator(8, [{(): [tensor(X, X, X)]}]),
    "parity-instrument": lambda: Interrogator(8, [{(): [
        0.5 * (np.eye(8) + tensor(Z, Z, np.eye(2))),
        0.5 * (np.eye(8) - tensor(Z, Z, np.eye(2))),
    ]}]),
}


@pytest.mark.parametrize("name", sorted(CORRECTABLE_INSTANCES))
def test_exact_recovery_matches_adaptive_petz(name):
    """On correctable instances the adaptive Petz family in the diagonal
    gauge coincides per-Kraus with the exact recovery family, and both
    decode perfectly."""
    proj = CodespaceProjector(repetition_isometry(3))
    t = CORRECTABLE_INSTANCES[name]()
    noise = bitflip_two_round(3, 0.05)

    kl = kl_check(proj, t, noise)
    assert kl.correctable
    assert kl.offdiag_residual < 1e-12
    assert kl.diag_variance_residual < 1e-12

    fam_petz = temporal_petz(proj, t, noise, gauge="diagonal")
    fam_perfect = perfect_recovery(proj, t, noise, kl)
    assert fam_petz.tp_residual() < 1e-8
    assert fam_perfect.tp_residual() < 1e-8
    for ks_a, ks_b in zip(fam_petz.kraus, fam_perfect.kraus):
        assert len(ks_a) == len(ks_b)
        for a, b in zip(ks_a, ks_b):
            assert frobenius_distance(a, b) < 1e-8

    f_petz = recovery_fidelity(fam_petz, t, noise)
    f_perfect = recovery_fidelity(fam_perfect, t, noise)
    assert abs(f_petz - 1.0) < 1e-9
    assert abs(f_perfect - 1.0) < 1e-9

    # the gauge only relabels Kraus operators, never the channel
    f_raw = recovery_fidelity(temporal_petz(proj, t, noise, gauge="raw"), t, noise)
    assert abs(f_raw - f_petz) < 1e-12


def test_kl_check_rejects_unencoded_damping():
    proj = CodespaceProjector(np.eye(2))
    noise = local_k_noise(1, 1, 0.3)
    kl = kl_check(proj, Interrogator.identity(2), noise)
    assert not kl.correctable
    assert kl.offdiag_residual > 1e-3
    with pytest.raises(ValueError):
        perfect_recovery(proj, Interrogator.identity(2), noise, kl)


def test_kl_check_zero_noise_always_correctable():
    noise = local_k_noise(2, 1, 0.0)
    code = protocol_2qubit()
    proj = CodespaceProjector.from_encoder(code.encoder)
    t = Interrogator.identity(4)
    kl = kl_check(proj, t, noise)
    assert kl.correctable
    # one identity term per damped-subset choice, each of weight 1/2
    lam = kl.lambda_matrix((0,))
    assert lam.shape == (2, 2)
    assert np.abs(lam - 0.5).max() < 1e-12

    fam = perfect_recovery(proj, t, noise, kl)
    # sole branch reflects the codespace back onto itself
    assert frobenius_distance(fam.kraus[0][0], proj.matrix) < 1e-10
    assert fam.completed  # complement of the codespace is rerouted
    assert abs(recovery_fidelity(fam, t, noise) - 1.0) < 1e-9


def test_adaptive_petz_dominated_by_optimal_refined_decoder():
    code = protocol_2qubit()
    proj = CodespaceProjector.from_encoder(code.encoder)
    t = Interrogator.from_code(code)
    noise = local_k_noise(2, 1, 0.3)

    fam = temporal_petz(proj, t, noise)
    f_petz = recovery_fidelity(fam, t, noise)

    # assemble the refined protocol and cross-check via the direct route
    refined_checks = [
        choi_from_kraus([t.layers[0][()][m]], (2, 2), (2, 2)) for m in (0, 1)
    ]
    assembled = StrategicCode(code.encoder, refined_checks, fam.as_decoders(),
                              outcome_count=2)
    assert assembled.validate(1e-6).ok
    assert abs(fidelity_direct(assembled, noise).fidelity - f_petz) < 1e-10

    # outcome-wise optimal decoders can only do better
    tensors = precompute_tensors(noise, mixed_state(2))
    blocks = single_check_decoder_objectives(code.encoder, refined_checks, tensors)
    best = 0.0
    for m_block in blocks:
        sol = solve_block_sdp([m_block], 4, 2, tol=1e-9)
        assert sol.status == "optimal"
        best += sol.objective
    assert f_petz <= best + 1e-6
    assert best <= 1.0 + 1e-7


def test_recovery_family_roundtrips_as_decoders():
    proj = CodespaceProjector(repetition_isometry(3))
    noise = bitflip_one_round(3, 0.05)
    fam = static_petz(proj, weighted_kraus(noise))
    dec = fam.as_decoders()[0]
    assert dec.d_in == 8 and dec.d_out == 2
    assert dec.marginal_residual() < 1e-8
    assert dec.min_eigenvalue() > -1e-9
