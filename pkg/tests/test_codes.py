import json

import numpy as np
import pytest

from dynaqec.codes import (
    MultiRoundCode,
    basis_column_channel,
    choi_from_kraus,
    compose_choi,
    deserialize_code,
    identity_choi,
    isometry_choi,
    kraus_from_choi,
    leung_4qubit_encoder,
    load_code,
    protocol_2qubit,
    protocol_3qubit,
    repetition_isometry,
    save_code,
    serialize_code,
    trace_out_choi,
    trivial_code,
    trivial_static_code,
)
from dynaqec.operators import dagger, haar_isometry, partial_trace, random_density


def _rand_c(rng, *shape):
    return rng.normal(size=shape) + 1j * rng.normal(size=shape)


def test_choi_identity_is_pair_projector():
    c = identity_choi((2,))
    phi = np.zeros(4, dtype=complex)
    phi[0] = phi[3] = 1.0  # |00> + |11>
    assert np.abs(c.matrix - np.outer(phi, phi.conj())).max() < 1e-14


def test_choi_reset_channel_marginal():
    # reset-to-|0>: Kraus |0><0|, |0><1|
    k = [np.array([[1, 0], [0, 0]], dtype=complex),
         np.array([[0, 1], [0, 0]], dtype=complex)]
    c = choi_from_kraus(k, (2,), (2,))
    assert np.abs(c.marginal() - np.eye(2)).max() < 1e-14
    out = c.apply(random_density(np.random.default_rng(1), 2))
    assert np.abs(out - np.diag([1.0, 0.0])).max() < 1e-12


def test_choi_isometry_rank_one_and_marginal():
    v = haar_isometry(np.random.default_rng(2), 2, 8)
    c = isometry_choi(v, (2,), (2, 2, 2))
    w = np.linalg.eigvalsh(c.matrix)
    assert w[-1] > 1.0  # single eigenvalue d_in = 2
    assert np.abs(w[:-1]).max() < 1e-10
    assert c.marginal_residual() < 1e-10


def test_kraus_roundtrip_preserves_action():
    rng = np.random.default_rng(3)
    ks = [_rand_c(rng, 3, 2) * 0.4 for _ in range(3)]
    c = choi_from_kraus(ks, (2,), (3,))
    ks2 = kraus_from_choi(c)
    for _ in range(10):
        rho = random_density(rng, 2)
        out1 = sum(k @ rho @ dagger(k) for k in ks)
        out2 = sum(k @ rho @ dagger(k) for k in ks2)
        assert np.abs(out1 - out2).max() < 1e-9


def test_apply_matches_kraus_action():
    rng = np.random.default_rng(4)
    ks = [_rand_c(rng, 2, 4) * 0.3 for _ in range(2)]
    c = choi_from_kraus(ks, (2, 2), (2,))
    rho = random_density(rng, 4)
    ref = sum(k @ rho @ dagger(k) for k in ks)
    assert np.abs(c.apply(rho) - ref).max() < 1e-12


def test_trace_out_choi_is_partial_trace():
    rng = np.random.default_rng(5)
    c = trace_out_choi((2, 2, 2), 1)
    rho = random_density(rng, 8)
    assert np.abs(c.apply(rho) - partial_trace(rho, (2, 2, 2), (0,))).max() < 1e-12


def test_compose_choi_matches_sequential_application():
    rng = np.random.default_rng(6)
    a = choi_from_kraus([_rand_c(rng, 4, 2) * 0.4], (2,), (2, 2))
    b = choi_from_kraus([_rand_c(rng, 2, 4) * 0.4, _rand_c(rng, 2, 4) * 0.2], (2, 2), (2,))
    ab = compose_choi(b, a)
    rho = random_density(rng, 2)
    assert np.abs(ab.apply(rho) - b.apply(a.apply(rho))).max() < 1e-12


def test_basis_column_channel_completion():
    # deficient single column: |0> -> |0>/2, completion must restore TP
    cols = np.zeros((2, 2), dtype=complex)
    cols[0, 0] = 0.5
    cols[1, 1] = 1.0
    kraus, choi = basis_column_channel(cols, (2,), (2,))
    acc = sum(dagger(k) @ k for k in kraus)
    assert np.abs(acc - np.eye(2)).max() < 1e-12
    assert choi.marginal_residual() < 1e-12


def test_basis_column_channel_explicit_groups():
    s2 = 1 / np.sqrt(2)
    cols = np.zeros((2, 2), dtype=complex)
    cols[:, 0] = [s2, s2]
    cols[:, 1] = [s2, -s2]
    kraus, _ = basis_column_channel(cols, (2,), (2,), groups=[(0, 1)])
    assert len(kraus) == 1  # a Hadamard, kept coherent
    with pytest.raises(ValueError):
        # overlapping images cannot share a Kraus operator
        bad = np.zeros((2, 2), dtype=complex)
        bad[0, 0] = 1.0
        bad[0, 1] = 1.0
        basis_column_channel(bad, (2,), (2,), groups=[(0, 1)])
    with pytest.raises(ValueError):
        basis_column_channel(cols, (2,), (2,), groups=[(0,)])  # missing column
    with pytest.raises(ValueError):
        basis_column_channel(cols, (2,), (2,), groups=[(0, 1), (1,)])  # dup


def test_grouping_decides_coherence():
    # same column map, different groups: coherent vs dephased on |+>
    cols = np.eye(2, dtype=complex)
    plus = np.array([1, 1], dtype=complex) / np.sqrt(2)
    rho = np.outer(plus, plus.conj())
    _, coherent = basis_column_channel(cols, (2,), (2,), groups=[(0, 1)])
    _, dephased = basis_column_channel(cols, (2,), (2,), groups=[(0,), (1,)])
    assert np.abs(coherent.apply(rho) - rho).max() < 1e-12
    assert np.abs(dephased.apply(rho) - np.eye(2) / 2).max() < 1e-12


def test_protocol_2qubit_frozen_actions():
    code = protocol_2qubit()
    assert code.validate().ok
    s2 = 1 / np.sqrt(2)
    enc_kraus = kraus_from_choi(code.encoder)
    assert len(enc_kraus) == 1
    v = enc_kraus[0]
    v = v / (v[0, 0] / abs(v[0, 0]))  # Kraus defined up to a global phase
    want0 = s2 * np.array([1, 0, 0, 1], dtype=complex)
    want1 = s2 * np.array([1, 0, 0, -1], dtype=complex)
    assert np.abs(v[:, 0] - want0).max() < 1e-12
    assert np.abs(v[:, 1] - want1).max() < 1e-12

    # the stated check map is not injective: realization needs exactly 2 Kraus
    chk_kraus = kraus_from_choi(code.checks[0])
    assert len(chk_kraus) == 2

    # decoder: |01> -> |-> on the main qubit after discarding the auxiliary
    rho01 = np.zeros((4, 4), dtype=complex)
    rho01[1, 1] = 1.0
    minus = np.array([1, -1], dtype=complex) / np.sqrt(2)
    assert np.abs(code.decoders[0].apply(rho01) - np.outer(minus, minus.conj())).max() < 1e-12


def test_protocol_3qubit_switch_is_mandatory_and_validated():
    with pytest.raises(TypeError):
        protocol_3qubit()  # no default
    with pytest.raises(ValueError):
        protocol_3qubit("something")
    nat = protocol_3qubit("natural")
    lit = protocol_3qubit("literal")
    assert nat.validate().ok
    assert lit.validate().ok
    # literal variant: encoder sends |1> to the same state as |0>
    rho1 = np.diag([0.0, 1.0]).astype(complex)
    rho0 = np.diag([1.0, 0.0]).astype(complex)
    assert np.abs(lit.encoder.apply(rho0) - lit.encoder.apply(rho1)).max() < 1e-12
    out_nat = nat.encoder.apply(rho1)
    psi = np.zeros(8, dtype=complex)
    psi[0], psi[7] = 1 / np.sqrt(2), -1 / np.sqrt(2)
    assert np.abs(out_nat - np.outer(psi, psi.conj())).max() < 1e-12


def test_protocol_3qubit_check_frozen_actions():
    code = protocol_3qubit("natural")
    chk = code.checks[0]
    # |111> -> |100>
    rho = np.zeros((8, 8), dtype=complex)
    rho[7, 7] = 1.0
    out = chk.apply(rho)
    want = np.zeros((8, 8), dtype=complex)
    want[4, 4] = 1.0
    assert np.abs(out - want).max() < 1e-12
    # |000> unchanged
    rho0 = np.zeros((8, 8), dtype=complex)
    rho0[0, 0] = 1.0
    assert np.abs(chk.apply(rho0) - rho0).max() < 1e-12
    # stated 1/2 prefactors force a completion operator: 4 groups + 1
    assert len(kraus_from_choi(chk)) == 5


def test_leung_encoder_marginal_and_codewords():
    c = leung_4qubit_encoder()
    assert c.marginal_residual() < 1e-12
    v = kraus_from_choi(c)[0]
    gram = dagger(v) @ v
    assert np.abs(gram - np.eye(2)).max() < 1e-12


def test_trivial_code_identity_reports():
    rep = trivial_code(1).validate()
    assert rep.ok
    assert all(b.marginal_residual <= 1e-12 for b in rep.blocks.values())
    assert trivial_code(3).validate().ok
    assert trivial_static_code(2).validate().ok


def test_validate_flags_scaled_encoder():
    code = trivial_code(1)
    code.encoder.matrix = 2.0 * code.encoder.matrix
    rep = code.validate()
    assert not rep.ok
    # marginal is 2I, so the residual is ||I||_F = sqrt(2)
    assert abs(rep.blocks["encoder"].marginal_residual - np.sqrt(2.0)) < 1e-12


def test_repetition_isometry():
    v = repetition_isometry(3)
    assert np.abs(dagger(v) @ v - np.eye(2)).max() == 0.0
    assert v[0, 0] == 1.0 and v[7, 1] == 1.0


def test_serialize_roundtrip_bit_identical(tmp_path):
    code = protocol_2qubit()
    path = tmp_path / "code.json"
    save_code(code, path)
    back = load_code(path)
    assert np.array_equal(back.encoder.matrix, code.encoder.matrix)
    assert np.array_equal(back.checks[0].matrix, code.checks[0].matrix)
    assert np.array_equal(back.decoders[0].matrix, code.decoders[0].matrix)
    assert back.encoder.in_dims == (2,) and back.encoder.out_dims == (2, 2)

    st = trivial_static_code(2)
    save_code(st, path)
    back2 = load_code(path)
    assert np.array_equal(back2.decoder.matrix, st.decoder.matrix)


def test_deserialize_rejects_dims_mismatch(tmp_path):
    data = serialize_code(trivial_code(1))
    data["encoder"]["in_dims"] = [3]
    with pytest.raises(ValueError):
        deserialize_code(data)


def test_deserialize_warns_on_non_psd():
    data = serialize_code(trivial_code(1))
    data["encoder"]["matrix"][0][0] = [-1.0, 0.0]
    with pytest.warns(UserWarning):
        deserialize_code(data)


def test_multiround_roundtrip():
    code = protocol_2qubit()
    mr = MultiRoundCode.from_strategic(code)
    assert mr.validate().ok
    assert mr.paths() == [(0,)]
    back = mr.to_strategic()
    assert np.array_equal(back.encoder.matrix, code.encoder.matrix)
