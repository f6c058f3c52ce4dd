import math

import numpy as np
import pytest

from dynaqec.noise import (
    DampingSpec,
    ad_kraus,
    collapse_rounds,
    composite_choi,
    local_k_noise,
    precompute_tensors,
    split_damping,
    weight_k_noise,
)


def _single_round_choi(kraus_weighted):
    d = kraus_weighted[0][1].shape[0]
    out = np.zeros((d * d, d * d), dtype=complex)
    for w, k in kraus_weighted:
        c4 = np.einsum("xi,yj->ixjy", k, k.conj())
        out += w * c4.reshape(d * d, d * d)
    return out


def test_split_damping_frozen_values():
    g0, g1 = split_damping(0.5)
    assert abs(g0 - 0.25) < 1e-15
    assert abs(g1 - 1.0 / 3.0) < 1e-15
    g0, g1 = split_damping(1.0)
    assert (g0, g1) == (0.5, 1.0)


def test_split_damping_composes_back():
    for gamma in np.linspace(0.0, 1.0, 21):
        g0, g1 = split_damping(gamma)
        assert abs((g0 + g1 - g0 * g1) - gamma) <= 1e-12


def test_damping_spec_rejects_inconsistent_split():
    DampingSpec.from_total(0.3)
    with pytest.raises(ValueError):
        DampingSpec(total=0.3, round0=0.15, round1=0.15)


def test_ad_kraus_frozen_entries_and_completeness():
    e0, e1 = ad_kraus(0.36)
    assert np.abs(e0 - np.diag([1.0, 0.8])).max() < 1e-12
    assert abs(e1[0, 1] - 0.6) < 1e-12
    for g in (0.0, 0.2, 0.7, 1.0):
        e0, e1 = ad_kraus(g)
        acc = e0.conj().T @ e0 + e1.conj().T @ e1
        assert np.abs(acc - np.eye(2)).max() < 1e-12


def test_two_round_damping_composes_to_total_rate_channel():
    # the split rounds, composed, must be *exactly* the total-rate channel
    for gamma in (0.1, 0.36, 0.5, 0.8, 1.0):
        noise = local_k_noise(1, 1, gamma)
        composed = composite_choi(noise)
        target = _single_round_choi([(1.0, k) for k in ad_kraus(gamma)])
        assert np.abs(composed - target).max() < 1e-12


def test_local_noise_term_and_channel_counts():
    noise = local_k_noise(3, 1, 0.3)
    assert noise.term_count == 3 * 2 * 2
    assert len(noise.round_channels[0]) == 6
    assert len(noise.round_channels[1]) == 6
    assert noise.validate().ok


def test_local_noise_zero_rate_prunes_jumps():
    noise = local_k_noise(1, 1, 0.0)
    assert noise.term_count == 1
    w, ks = noise.terms[0]
    assert w == 1.0
    assert np.array_equal(ks[0], np.eye(2))
    assert np.array_equal(ks[1], np.eye(2))


def test_weight_noise_counts_and_truncation_flag():
    noise = weight_k_noise(2, 1, 0.4)
    assert len(noise.round_channels[0]) == 3  # 00, 10, 01 jump patterns
    assert noise.term_count == 9
    assert noise.incomplete
    rep = noise.validate()
    assert rep.ok  # truncation allowed: sums stay below identity
    assert rep.composite_residual > 1e-3  # visibly below identity at this rate

    full = weight_k_noise(2, 2, 0.4)
    assert not full.incomplete
    assert full.validate().ok
    assert full.validate().composite_residual < 1e-12


def test_weight_equals_local_at_full_weight():
    for n in (1, 2):
        a = composite_choi(local_k_noise(n, n, 0.35))
        b = composite_choi(weight_k_noise(n, n, 0.35))
        assert np.abs(a - b).max() < 1e-12


def test_collapse_rounds_preserves_channel():
    noise = local_k_noise(2, 1, 0.25)
    flat = collapse_rounds(noise)
    assert flat.rounds == 1
    assert np.abs(composite_choi(flat) - composite_choi(noise)).max() < 1e-13
    assert flat.validate().ok


def test_precompute_hermitian_pairing_invariant():
    noise = local_k_noise(2, 1, 0.3)
    rho = np.eye(2) / 2
    t = precompute_tensors(noise, rho)
    d = noise.dim
    for e in range(t.term_count):
        for a in range(d):
            for b in range(d):
                assert np.abs(t.n0[a, b, e].conj().T - t.n0[b, a, e]).max() < 1e-12
                assert np.abs(t.n1[a, b, e].conj().T - t.n1[b, a, e]).max() < 1e-12


def test_precompute_zero_rate_and_rho_blocks():
    noise = local_k_noise(1, 1, 0.0)
    t = precompute_tensors(noise, np.eye(2) / 2)
    ket = np.zeros((2, 2))
    ket[0, 1] = 1.0
    # single identity term, weight 1: n0[a, b] is exactly |a><b|
    assert np.abs(t.n0[0, 1, 0] - ket).max() < 1e-14
    assert np.abs(t.r[0, 0] - np.diag([0.25, 0.0])).max() < 1e-14


def test_precompute_weight_scaling():
    noise = local_k_noise(3, 1, 0.0)  # three identity terms, weight 1/3 each
    t = precompute_tensors(noise, np.eye(2) / 2)
    assert abs(t.n0[0, 0, 0][0, 0] - 1.0 / 3.0) < 1e-14


def test_precompute_rejects_bad_rho():
    noise = local_k_noise(1, 1, 0.2)
    with pytest.raises(ValueError):
        precompute_tensors(noise, np.eye(2))  # trace 2
    with pytest.raises(ValueError):
        precompute_tensors(noise, np.array([[1.5, 0], [0, -0.5]]))  # not PSD
