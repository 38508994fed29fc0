import numpy as np
import pytest

from beamlink import beamforming as bf
from beamlink import phy
from beamlink.scenario import ChannelRealization, ScenarioConfig, generate_channels
from beamlink.util import crandn, unit_sin_distance


def identity_channels(n_sc=4):
    h = np.zeros((3, 3, n_sc, 2, 2), dtype=complex)
    h[:, :] = np.eye(2)
    return ChannelRealization(h=h)


def layout_for(tx, owner_rx, owner_bs):
    return phy.StreamLayout(tx=np.asarray(tx, dtype=complex), owner_rx=owner_rx, owner_bs=owner_bs)


# ----------------------------------------------------- effective channels


def test_effective_identity_channel_unit_precoder():
    ch = identity_channels()
    tx = np.zeros((4, 1, 2), dtype=complex)
    tx[:, 0, 0] = 1.0  # e1 at base 0
    eff = phy.effective_channels(ch, layout_for(tx, (0,), (0,)))
    # effective vector is the first channel column = e1 at every receiver
    assert np.allclose(eff[0, 0], [1.0, 0.0])
    assert np.allclose(eff[2, 0], [1.0, 0.0])


def test_effective_comp_through_dominant_modes():
    # true channel equal to the reconstructed rank-1 modes: the pseudo-inverse
    # precoder gives exactly zero cross-user effective gain
    rng = np.random.default_rng(0)
    n_sc = 3
    rows = crandn(rng, (n_sc, 3, 6))
    h = np.zeros((3, 3, n_sc, 2, 2), dtype=complex)
    for k in range(3):
        for j in range(3):
            h[k, j] = rows[:, k, None, 2 * j : 2 * j + 2] * np.array([1.0, 0.0])[None, :, None]
    ch = ChannelRealization(h=h)
    big = np.stack([ch.big_h_all(k) for k in range(3)], axis=1)
    w = bf.comp_init(big)
    eff = phy.effective_channels(ch, layout_for(w, (0, 1, 2), None))
    for k in range(3):
        for i in range(3):
            gain = np.linalg.norm(eff[k, i], axis=1)
            if i == k:
                assert np.all(gain > 1e-6)
            else:
                assert np.all(gain <= 1e-9)


def test_effective_matches_direct_product_oracle():
    rng = np.random.default_rng(1)
    ch = generate_channels(ScenarioConfig(seed=5))
    tx = crandn(rng, (38, 3, 2))
    eff = phy.effective_channels(ch, layout_for(tx, (0, 1, 2), (0, 1, 2)))
    for k in range(3):
        for i in range(3):
            for s in (0, 17, 37):
                ref = ch.h[k, i, s] @ tx[s, i]
                assert np.allclose(eff[k, i, s], ref, atol=1e-12)


# ----------------------------------------------------- pilots


def test_pilot_noiseless_exact():
    rng = np.random.default_rng(2)
    eff = crandn(rng, (3, 3, 38, 2))
    est = phy.pilot_estimate(eff, 1e-2, noiseless=True)
    assert np.array_equal(est, eff)


def test_pilot_error_variance():
    rng = np.random.default_rng(3)
    eff = np.zeros((3, 3, 200, 2), dtype=complex)
    sigma_sq = 1e-4  # 40 dB below unit pilot power
    est = phy.pilot_estimate(eff, sigma_sq, rng=rng)
    err_var = np.mean(np.abs(est - eff) ** 2)
    assert err_var == pytest.approx(sigma_sq, rel=0.03)


def test_pilot_shared_noise_array():
    rng = np.random.default_rng(4)
    eff = crandn(rng, (3, 2, 10, 2))
    noise = crandn(rng, eff.shape)
    a = phy.pilot_estimate(eff, 0.01, noise=noise)
    b = phy.pilot_estimate(eff, 0.01, noise=noise)
    assert np.array_equal(a, b)


# ----------------------------------------------------- mmse


def test_mmse_no_interference_matched_filter():
    rng = np.random.default_rng(5)
    sigma_sq = 0.1
    eff = np.zeros((1, 1, 5, 2), dtype=complex)
    eff[0, 0] = crandn(rng, (5, 2))
    u = phy.mmse_combiner(eff, (0,), sigma_sq)
    for s in range(5):
        assert unit_sin_distance(u[0, s], eff[0, 0, s]) <= 1e-10
    sinr = phy.post_sinr(u, eff, (0,), sigma_sq)
    expect = np.linalg.norm(eff[0, 0], axis=1) ** 2 / sigma_sq
    assert np.allclose(sinr[0], expect, rtol=1e-10)


def test_mmse_zero_forcing_limit():
    # sigma -> 0 with one interferer: the combiner nulls it
    rng = np.random.default_rng(6)
    eff = crandn(rng, (1, 2, 8, 2))
    u = phy.mmse_combiner(eff, (0, 0), 1e-12)
    rej = np.abs(np.sum(u[0].conj() * eff[0, 1], axis=1)) / np.linalg.norm(
        eff[0, 1], axis=1
    ) / np.linalg.norm(u[0], axis=1)
    assert rej.max() <= 1e-5


def test_mmse_matches_gaussian_elimination_oracle():
    rng = np.random.default_rng(7)
    sigma_sq = 0.05
    eff = crandn(rng, (2, 3, 6, 2))
    u = phy.mmse_combiner(eff, (0, 1, 0), sigma_sq)
    for i, k in enumerate((0, 1, 0)):
        for s in range(6):
            r = sigma_sq * np.eye(2, dtype=complex)
            for n in range(3):
                x = eff[k, n, s]
                r += np.outer(x, x.conj())
            # manual 2x2 Gaussian elimination
            a, b_, c, d = r[0, 0], r[0, 1], r[1, 0], r[1, 1]
            y = eff[k, i, s]
            factor = c / a
            d2 = d - factor * b_
            y1 = y[1] - factor * y[0]
            x1 = y1 / d2
            x0 = (y[0] - b_ * x1) / a
            assert np.allclose(u[i, s], [x0, x1], atol=1e-10)


# ----------------------------------------------------- distortion


def test_distortion_absent():
    eff = np.ones((3, 2, 4, 2), dtype=complex)
    assert np.array_equal(phy.distortion_noise(None, eff), np.zeros((3, 4)))


def test_distortion_definition():
    eff = np.zeros((1, 2, 1, 2), dtype=complex)
    eff[0, 0, 0] = [1.0, 0.0]  # total received power 1
    d = phy.distortion_noise(-30.0, eff)
    assert d[0, 0] == pytest.approx(1e-3)


def test_distortion_saturates_sinr():
    # transmit SNR -> infinity with -30 dB distortion: post SINR caps near
    # 30 dB (closed form: ||h||^2 / (evm * ||h||^2) for a matched combiner)
    eff = np.zeros((1, 1, 1, 2), dtype=complex)
    eff[0, 0, 0] = [1.0, 0.0]
    dist = phy.distortion_noise(-30.0, eff)
    for sigma_sq in (1e-8, 1e-10, 1e-12):
        u = phy.mmse_combiner(eff, (0,), sigma_sq)
        sinr = phy.post_sinr(u, eff, (0,), sigma_sq, dist)
        assert 10 * np.log10(sinr[0, 0]) == pytest.approx(30.0, abs=0.1)


# ----------------------------------------------------- post sinr


def test_post_sinr_orthogonal_interferer():
    eff = np.zeros((1, 2, 1, 2), dtype=complex)
    eff[0, 0, 0] = [1.0, 0.0]
    eff[0, 1, 0] = [0.0, 1.0]
    u = np.zeros((2, 1, 2), dtype=complex)
    u[0, 0] = [1.0, 0.0]
    u[1, 0] = [0.0, 1.0]
    sinr = phy.post_sinr(u, eff, (0, 0), 1.0)
    assert sinr[0, 0] == pytest.approx(1.0)


def test_post_sinr_scale_invariant():
    rng = np.random.default_rng(8)
    eff = crandn(rng, (1, 3, 4, 2))
    u = phy.mmse_combiner(eff, (0, 0, 0), 0.3)
    base = phy.post_sinr(u, eff, (0, 0, 0), 0.3)
    for c in (1e-3, 7.7, 1e4 * 1j):
        scaled = phy.post_sinr(u * c, eff, (0, 0, 0), 0.3)
        assert np.abs(scaled - base).max() <= 1e-12 * np.abs(base).max()


def test_post_sinr_monotone_in_interference():
    rng = np.random.default_rng(9)
    eff = crandn(rng, (1, 3, 4, 2))
    u = phy.mmse_combiner(eff, (0, 0, 0), 0.3)
    with_all = phy.post_sinr(u, eff, (0, 0, 0), 0.3)
    # removing the third stream cannot decrease stream 0's SINR for fixed u
    eff2 = eff[:, :2].copy()
    without = phy.post_sinr(u[:2], eff2, (0, 0), 0.3)
    assert np.all(without[0] >= with_all[0] - 1e-12)


def test_ia_end_to_end_noiseless_sinr():
    # perfect feedback, no noise, no distortion: alignment pushes SINR
    # beyond 1e8 on well-conditioned channels
    rng = np.random.default_rng(10)
    hits = 0
    for _ in range(50):
        blocks = crandn(rng, (1, 3, 3, 2, 2))
        v, fallback = bf.ia_closed_form(blocks)
        if fallback[0]:
            continue
        h = np.zeros((3, 3, 1, 2, 2), dtype=complex)
        h[:, :, 0] = blocks[0]
        ch = ChannelRealization(h=h)
        eff = phy.effective_channels(ch, layout_for(v, (0, 1, 2), (0, 1, 2)))
        sigma_sq = 1e-12
        est = phy.pilot_estimate(eff, sigma_sq, noiseless=True)
        u = phy.mmse_combiner(est, (0, 1, 2), sigma_sq)
        sinr = phy.post_sinr(u, eff, (0, 1, 2), sigma_sq)
        assert sinr.min() >= 1e8
        hits += 1
    assert hits >= 45


def test_fr_simo_rejects_single_interferer_not_two():
    rng = np.random.default_rng(11)
    # one strong interferer: two receive antennas null it, SINR unbounded
    eff = crandn(rng, (1, 2, 6, 2))
    sigma_sq = 1e-12
    u = phy.mmse_combiner(eff, (0, 0), sigma_sq)
    sinr_one = phy.post_sinr(u, eff, (0, 0), sigma_sq)
    assert sinr_one[0].min() >= 1e6
    # two strong interferers: rejection capacity exhausted, SINR bounded
    eff3 = crandn(rng, (1, 3, 6, 2))
    u3 = phy.mmse_combiner(eff3, (0, 0, 0), sigma_sq)
    sinr_two = phy.post_sinr(u3, eff3, (0, 0, 0), sigma_sq)
    assert sinr_two[0].max() <= 1e4


def test_noiseless_pilots_give_analytic_mmse():
    rng = np.random.default_rng(12)
    ch = generate_channels(ScenarioConfig(seed=9))
    tx = crandn(rng, (38, 3, 2))
    tx /= np.linalg.norm(tx, axis=2, keepdims=True)
    layout = layout_for(tx, (0, 1, 2), (0, 1, 2))
    eff = phy.effective_channels(ch, layout)
    sigma_sq = 1e-3
    est = phy.pilot_estimate(eff, sigma_sq, noiseless=True)
    u = phy.mmse_combiner(est, (0, 1, 2), sigma_sq)
    u_ref = phy.mmse_combiner(eff, (0, 1, 2), sigma_sq)
    assert np.abs(u - u_ref).max() <= 1e-10
