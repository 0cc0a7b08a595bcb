import numpy as np
import pytest

from oobsim.channels import (ChannelModel, discretize, freq_response, gen_los,
                             gen_rayleigh, gen_victim, steering_vector)
from oobsim.signals import make_rrc_pulse, pulse_autocorr
from oobsim.util import conv_along_lags, rng_stream


class TestGenLos:
    def test_broadside_is_uniform(self):
        ch = gen_los([0.0], 16, rng=0)
        taps = ch.taps[0, :, 0]
        assert np.allclose(taps, taps[0])

    def test_thirty_degrees_phase_progression(self):
        ch = gen_los([np.deg2rad(30.0)], 8, spacing_over_wavelength=0.5, rng=3)
        taps = ch.taps[0, :, 0]
        # e^{j pi m / 2} progression once the common carrier phase is removed
        rel = taps / taps[0]
        expected = np.exp(1j * np.pi * np.arange(8) / 2)
        assert np.allclose(rel, expected, atol=1e-12)

    def test_unit_modulus(self):
        ch = gen_los(np.deg2rad([-40.0, 10.0, 55.0]), 32, rng=7)
        assert np.allclose(np.abs(ch.taps), 1.0, atol=1e-12)

    def test_rejects_endfire(self):
        with pytest.raises(ValueError):
            gen_los([np.pi / 2], 4, rng=0)

    def test_reproducible(self):
        a = gen_los([0.3, -0.2], 8, rng=rng_stream(5, "users"))
        b = gen_los([0.3, -0.2], 8, rng=rng_stream(5, "users"))
        assert np.array_equal(a.taps, b.taps)


class TestGenRayleigh:
    def test_single_tap_unit_power(self):
        ch = gen_rayleigh(2000, 1, 1, 5, rng=11)
        power = np.mean(np.abs(ch.taps) ** 2)
        assert power == pytest.approx(1.0, rel=0.05)

    def test_profile_energy_mean_over_realizations(self):
        # 1000 single-link realizations of the 75-tap profile
        rng = np.random.default_rng(21)
        energies = [np.sum(np.abs(gen_rayleigh(1, 1, 75, 5, rng=rng).taps) ** 2)
                    for _ in range(1000)]
        assert 0.97 <= np.mean(energies) <= 1.03

    def test_independent_seeds(self):
        a = gen_rayleigh(100, 100, 1, 5, rng=1).taps.ravel()
        b = gen_rayleigh(100, 100, 1, 5, rng=2).taps.ravel()
        corr = np.abs(np.vdot(a, b)) / (np.linalg.norm(a) * np.linalg.norm(b))
        assert corr < 0.05

    def test_reproducible_bit_identical(self):
        a = gen_rayleigh(4, 3, 75, 5, rng=rng_stream(9, "users", 2))
        b = gen_rayleigh(4, 3, 75, 5, rng=rng_stream(9, "users", 2))
        assert np.array_equal(a.taps, b.taps)

    def test_rejects_no_taps(self):
        with pytest.raises(ValueError):
            gen_rayleigh(4, 1, 0, 5)


class TestDiscretize:
    def test_los_is_nyquist_sampled(self):
        p = make_rrc_pulse(0.22, 32, 5)
        ch = gen_los(np.deg2rad([20.0]), 4, rng=5, sample_spacing=p.sample_spacing)
        hd = discretize(ch, p)
        i0 = np.where(hd.ells == 0)[0][0]
        # H[0] = e^{j phi} sigma * g(0) = the channel tap itself
        assert np.allclose(hd.taps[i0], ch.taps[:, :, 0], atol=1e-6)
        others = np.delete(np.abs(hd.taps), i0, axis=0)
        assert others.max() < 1e-3 * np.abs(hd.taps[i0]).max()

    def test_zero_channel(self):
        p = make_rrc_pulse(0.22, 8, 4)
        ch = ChannelModel(kind="rayleigh", taps=np.zeros((2, 3, 5), dtype=complex),
                          pathloss=1.0, sample_spacing=p.sample_spacing)
        hd = discretize(ch, p)
        assert np.all(hd.taps == 0)

    def test_grid_mismatch_raises(self):
        p = make_rrc_pulse(0.22, 8, 4)
        ch = ChannelModel(kind="rayleigh", taps=np.ones((1, 1, 3), dtype=complex),
                          pathloss=1.0, sample_spacing=0.5)
        with pytest.raises(ValueError):
            discretize(ch, p)

    def test_energy_preserved_through_matched_filtering(self):
        # symbol-rate tap energy vs the fine-grid filtered-channel energy
        p = make_rrc_pulse(0.22, 32, 5)
        g = pulse_autocorr(p)
        for seed in (0, 1, 2):
            ch = gen_rayleigh(3, 2, 75, 5, rng=seed)
            hd = discretize(ch, p)
            disc = np.sum(np.abs(hd.taps) ** 2) * p.symbol_period
            fine = conv_along_lags(np.transpose(ch.taps, (2, 0, 1)), g)
            cont = np.sum(np.abs(fine) ** 2) * p.sample_spacing
            assert disc == pytest.approx(cont, rel=0.02)


class TestFreqResponse:
    def test_los_flat(self):
        ch = gen_los(np.deg2rad([15.0]), 6, rng=2)
        freqs = np.linspace(-2.0, 2.0, 21)
        resp = freq_response(ch, freqs)
        assert np.allclose(np.abs(resp), 1.0, atol=1e-12)
        assert np.allclose(resp, resp[0][None], atol=1e-12)

    def test_single_delayed_tap_linear_phase(self):
        taps = np.zeros((1, 1, 8), dtype=complex)
        taps[0, 0, 5] = 1.0
        ch = ChannelModel(kind="rayleigh", taps=taps, pathloss=1.0, sample_spacing=0.2)
        freqs = np.array([-1.5, -0.4, 0.7, 2.2])
        resp = freq_response(ch, freqs)[:, 0, 0]
        assert np.allclose(resp, np.exp(-2j * np.pi * freqs * 5 * 0.2), atol=1e-12)

    def test_out_of_band_frequency_rejected(self):
        ch = gen_rayleigh(2, 1, 10, 5, rng=0)
        with pytest.raises(ValueError):
            freq_response(ch, [2.6])

    def test_rayleigh_identity_covariance(self):
        m, draws = 8, 1500
        rng = np.random.default_rng(17)
        freqs = np.array([0.0, 0.61, 1.3])
        acc = np.zeros((freqs.size, m, m), dtype=complex)
        for _ in range(draws):
            ch = gen_rayleigh(m, 1, 15, 5, rng=rng)
            h = freq_response(ch, freqs)[:, 0, :]
            acc += h[:, :, None] * np.conj(h[:, None, :])
        acc /= draws
        for i in range(freqs.size):
            assert np.abs(acc[i] - np.eye(m)).max() < 0.13  # ~4 sigma at 1500 draws


class TestGenVictim:
    def test_kinds(self):
        v = gen_victim("los", 8, rng=1, angle_rad=0.2)
        assert v.kind == "los" and v.n_receivers == 1
        v = gen_victim("rayleigh", 8, rng=1, n_taps=75, oversampling=5)
        assert v.kind == "rayleigh" and v.n_taps == 75
        with pytest.raises(ValueError):
            gen_victim("rician", 8, rng=1)

    def test_victim_stream_independent_of_users(self):
        users = gen_rayleigh(64, 1, 10, 5, rng=rng_stream(3, "users"))
        victim = gen_victim("rayleigh", 64, rng=rng_stream(3, "victims"), n_taps=10)
        a, b = users.taps.ravel(), victim.taps.ravel()
        corr = np.abs(np.vdot(a, b)) / (np.linalg.norm(a) * np.linalg.norm(b))
        assert corr < 0.1

    def test_rayleigh_victim_response_norm(self):
        m, draws = 16, 1000
        rng = np.random.default_rng(23)
        norms = []
        for _ in range(draws):
            v = gen_victim("rayleigh", m, rng=rng, n_taps=15, oversampling=5)
            h = freq_response(v, [0.8])[0, 0]
            norms.append(np.sum(np.abs(h) ** 2))
        # E ||h||^2 = M, Var per draw ~ M -> 3 sigma over the draws
        assert np.mean(norms) == pytest.approx(m, abs=3 * np.sqrt(m / draws))


def test_steering_vector_matches_los_phases():
    v = steering_vector(np.deg2rad(30.0), 4, 0.5)
    assert np.allclose(v, np.exp(1j * np.pi * np.arange(4) / 2), atol=1e-12)
