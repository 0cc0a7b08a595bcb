import numpy as np
import pytest

from oobsim.amplifier import (CalibrationError, OperatingPoint, PAModel, amplify,
                              calibrate_1db, compression_point, gaussian_moment,
                              propagate_autocorr, propagate_autocorr_polyphase,
                              propagate_corr, propagate_corr_polyphase)
from oobsim.montecarlo import empirical_corr, moment_oracle
from oobsim.signals import LagCorrelation, SampledSignal, make_rrc_pulse

from conftest import make_hermitian_lag

PAPER_B2 = -0.03491 + 0.005650j
PA_REF = PAModel(coefficients=[1.0, PAPER_B2])


def bisect_compression(b1: complex, b2: complex) -> float:
    f = lambda p: abs(b1 + b2 * p) ** 2 - abs(b1) ** 2 * 10 ** (-0.1)
    lo, hi = 0.0, 1.0
    while f(hi) > 0:
        hi *= 2
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        lo, hi = (mid, hi) if f(mid) > 0 else (lo, mid)
    return 0.5 * (lo + hi)


class TestAmplify:
    def test_linear_when_no_cubic(self, rng):
        x = rng.standard_normal((3, 50)) + 1j * rng.standard_normal((3, 50))
        y = amplify(x, PAModel(coefficients=[2.0 - 1.0j]))
        assert np.array_equal(y, (2.0 - 1.0j) * x)

    def test_constant_envelope_gain(self):
        a = 1.3
        x = a * np.exp(1j * np.linspace(0, 2 * np.pi, 64))[None, :]
        y = amplify(x, PA_REF)
        gains = np.abs(y / x)
        assert np.allclose(gains, abs(1.0 + PAPER_B2 * a**2), atol=1e-12)

    def test_one_db_compression_at_calibrated_power(self):
        p1 = compression_point(PA_REF)
        x = np.sqrt(p1) * np.exp(1j * np.linspace(0, 1, 16))[None, :]
        y = amplify(x, PA_REF)
        gain_db = 20 * np.log10(np.abs(y / x))
        assert np.allclose(gain_db, -1.0, atol=1e-6)

    def test_sampled_signal_roundtrip(self, rng):
        x = SampledSignal(samples=rng.standard_normal((2, 16)) + 0j, sample_rate=5.0)
        y = amplify(x, PA_REF)
        assert isinstance(y, SampledSignal)
        assert y.sample_rate == 5.0

    def test_per_antenna_coefficients(self, rng):
        pa = PAModel(coefficients=np.array([[1.0, 0.0], [2.0, 0.0]]))
        x = rng.standard_normal((2, 20)) + 0j
        y = amplify(x, pa)
        assert np.allclose(y[0], x[0])
        assert np.allclose(y[1], 2 * x[1])

    def test_fir_branch_with_delta_matches_memoryless(self, rng):
        x = rng.standard_normal((1, 40)) + 1j * rng.standard_normal((1, 40))
        fir = PAModel(coefficients=[1.0, PAPER_B2],
                      branch_taps=(np.array([1.0]), np.array([PAPER_B2])))
        assert np.allclose(amplify(x, fir), amplify(x, PA_REF), atol=1e-12)


class TestCalibration:
    def test_real_cubic_closed_form(self):
        pa = PAModel(coefficients=[1.0, -0.1])
        expected = (1.0 - 10 ** (-0.05)) / 0.1
        assert compression_point(pa) == pytest.approx(expected, rel=1e-12)
        assert compression_point(pa) == pytest.approx(bisect_compression(1.0, -0.1), rel=1e-10)

    def test_reference_coefficients(self):
        # frozen from the bisection oracle on |1 + b2 p|^2 = 10^-0.1
        p1 = compression_point(PA_REF)
        assert p1 == pytest.approx(3.1201209977876134, rel=1e-12)
        assert p1 == pytest.approx(bisect_compression(1.0, PAPER_B2), rel=1e-10)

    def test_no_cubic_branch_fails(self):
        with pytest.raises(CalibrationError):
            compression_point(PAModel(coefficients=[1.0]))
        with pytest.raises(CalibrationError):
            compression_point(PAModel(coefficients=[1.0, 0.0]))

    def test_expansive_pa_fails(self):
        with pytest.raises(CalibrationError):
            compression_point(PAModel(coefficients=[1.0, 0.05]))

    def test_global_scaling_hits_average_power(self):
        powers = np.array([0.5, 1.5, 3.0])
        op = calibrate_1db(PA_REF, powers)
        scaled = op.scales(3) ** 2 * powers
        assert scaled.mean() == pytest.approx(op.compression_power, rel=1e-12)

    def test_per_antenna_scaling_hits_every_antenna(self):
        powers = np.array([0.5, 1.5, 3.0])
        op = calibrate_1db(PA_REF, powers, per_antenna=True)
        scaled = op.scales(3) ** 2 * powers
        assert np.allclose(scaled, op.compression_power, rtol=1e-12)

    def test_operating_point_validation(self):
        with pytest.raises(ValueError):
            OperatingPoint(input_scale=0.0)


class TestGaussianMoment:
    def test_uncorrelated_vanishes(self):
        for pa_, pb in [(1, 1), (1, 2), (2, 1), (2, 2)]:
            assert gaussian_moment(0.0, 1.0, 2.0, pa_, pb) == 0.0

    def test_first_order_is_identity(self):
        r = 0.3 - 0.2j
        assert gaussian_moment(r, 1.0, 1.0, 1, 1) == r

    def test_sixth_moment(self):
        s2 = 1.7
        assert gaussian_moment(s2, s2, s2, 2, 2) == pytest.approx(6 * s2**3)

    def test_conjugate_swap_symmetry(self, rng):
        for _ in range(20):
            s2a, s2b = rng.uniform(0.5, 2.0, 2)
            r = np.sqrt(s2a * s2b) * rng.uniform(0, 0.99) * np.exp(2j * np.pi * rng.uniform())
            for pa_, pb in [(1, 1), (1, 2), (2, 1), (2, 2)]:
                lhs = gaussian_moment(r, s2a, s2b, pa_, pb)
                rhs = np.conj(gaussian_moment(np.conj(r), s2b, s2a, pb, pa_))
                assert lhs == pytest.approx(rhs, abs=1e-12)

    def test_infeasible_correlation_rejected(self):
        with pytest.raises(ValueError):
            gaussian_moment(2.0, 1.0, 1.0, 1, 1)

    def test_unsupported_order_rejected(self):
        with pytest.raises(ValueError):
            gaussian_moment(0.1, 1.0, 1.0, 1, 3)

    @pytest.mark.parametrize("pa_,pb", [(1, 1), (1, 2), (2, 1), (2, 2)])
    def test_against_monte_carlo_oracle(self, pa_, pb):
        r, s2a, s2b = 0.6 + 0.4j, 1.0, 2.5
        closed = gaussian_moment(r, s2a, s2b, pa_, pb)
        est = moment_oracle(r, s2a, s2b, pa_, pb, n_samples=1_000_000, seed=42)
        assert abs(est - closed) / abs(closed) < 0.01


def linear_mixture_toy(rng, n_samples: int):
    """Stationary M=2 Gaussian process with exactly known correlation."""
    c0 = np.array([[1.0, 0.4j], [0.2, 0.9]], dtype=complex)
    c1 = np.array([[0.3, 0.0], [0.5j, -0.2]], dtype=complex)
    coeffs = [c0, c1]
    mats = np.zeros((3, 2, 2), dtype=complex)
    # R[v] = sum_i conj(C_i) C_{i+v}^T for x[n] = sum_i C_i w[n-i]
    mats[1] = np.conj(c0) @ c0.T + np.conj(c1) @ c1.T
    mats[2] = np.conj(c0) @ c1.T
    mats[0] = mats[2].conj().T
    rxx = LagCorrelation(lags=np.arange(-1, 2), matrices=mats, lag_spacing=0.2)
    w = (rng.standard_normal((2, n_samples + 1)) + 1j * rng.standard_normal((2, n_samples + 1))) / np.sqrt(2)
    x = c0 @ w[:, 1:] + c1 @ w[:, :-1]
    return rxx, x


class TestPropagateCorr:
    def test_linear_pa_identity(self, rng):
        rxx = make_hermitian_lag(rng, 4, 3, spacing=0.2)
        pa = PAModel(coefficients=[1.5 - 0.5j])
        ryy = propagate_corr(rxx, pa, OperatingPoint.unit())
        assert np.allclose(ryy.matrices, abs(1.5 - 0.5j) ** 2 * rxx.matrices, atol=1e-14)

    def test_diagonal_in_diagonal_out(self, rng):
        n_side, m = 4, 3
        mats = np.zeros((2 * n_side + 1, m, m), dtype=complex)
        for v in range(-n_side, n_side + 1):
            d = 0.5**abs(v) * (rng.standard_normal(m) + 1j * rng.standard_normal(m))
            if v == 0:
                d = np.abs(d)
            mats[n_side + v] = np.diag(d)
            mats[n_side - v] = np.diag(np.conj(d))
        rxx = LagCorrelation(lags=np.arange(-n_side, n_side + 1), matrices=mats, lag_spacing=0.2)
        ryy = propagate_corr(rxx, PA_REF, OperatingPoint.unit())
        mask = ~np.eye(m, dtype=bool)
        assert np.abs(ryy.matrices[:, mask]).max() == 0.0

    def test_hermitian_preserved(self, rng):
        rxx = make_hermitian_lag(rng, 5, 3, spacing=0.2)
        ryy = propagate_corr(rxx, PA_REF, OperatingPoint.unit())
        assert ryy.hermitian_lag_error() < 1e-12

    def test_memory_pa_rejected(self, rng):
        rxx = make_hermitian_lag(rng, 2, 2)
        fir = PAModel(coefficients=[1.0, PAPER_B2],
                      branch_taps=(np.array([1.0]), np.array([0.5, 0.5]) * PAPER_B2))
        with pytest.raises(ValueError):
            propagate_corr(rxx, fir, OperatingPoint.unit())

    def test_matches_monte_carlo_on_stationary_toy(self, rng):
        rxx, x = linear_mixture_toy(rng, 1_000_000)
        op = calibrate_1db(PA_REF, np.real(np.diagonal(rxx.at(0))))
        y = amplify(op.scales(2)[:, None] * x, PA_REF)
        est = empirical_corr(SampledSignal(samples=y, sample_rate=5.0), max_lag=1)
        ryy = propagate_corr(rxx, PA_REF, op)
        scale = np.abs(ryy.matrices).max()
        err = np.abs(est.matrices - ryy.matrices).max() / scale
        assert err < 0.01

    def test_autocorr_fast_path_matches_diagonal(self, rng):
        rxx = make_hermitian_lag(rng, 6, 4, spacing=0.2)
        op = OperatingPoint(input_scale=np.array([1.3]))
        full = propagate_corr(rxx, PA_REF, op)
        diag = propagate_autocorr(np.diagonal(rxx.matrices, axis1=1, axis2=2), PA_REF, op)
        assert np.allclose(diag, np.diagonal(full.matrices, axis1=1, axis2=2), atol=1e-13)


class TestPolyphasePropagation:
    def test_linear_pa_matches_stationary(self, rng):
        from oobsim.signals import discrete_to_continuous_corr

        pulse = make_rrc_pulse(0.22, 8, 5)
        rd = make_hermitian_lag(rng, 3, 2, spacing=1.0)
        pa = PAModel(coefficients=[1.0 + 0.5j])
        op = OperatingPoint.unit()
        cyclo = propagate_corr_polyphase(rd, pulse, pa, op)
        stat = propagate_corr(discrete_to_continuous_corr(rd, pulse), pa, op)
        assert cyclo.lags[-1] == stat.lags[-1]
        assert np.abs(cyclo.matrices - stat.matrices).max() < 1e-12

    def test_diag_variant_matches_full(self, rng):
        pulse = make_rrc_pulse(0.22, 8, 5)
        rd = make_hermitian_lag(rng, 3, 2, spacing=1.0)
        op = OperatingPoint(input_scale=np.array([0.8, 1.2]))
        full = propagate_corr_polyphase(rd, pulse, PA_REF, op)
        diag = propagate_autocorr_polyphase(np.diagonal(rd.matrices, axis1=1, axis2=2),
                                            rd.lags, pulse, PA_REF, op)
        assert np.allclose(diag, np.diagonal(full.matrices, axis1=1, axis2=2), atol=1e-13)

    def test_matches_pam_waveform(self, rng):
        # end-to-end: modulated Gaussian symbols through the PA vs the exact
        # polyphase propagation of the symbol-rate correlation
        from oobsim.channels import DiscreteChannel
        from oobsim.precoding import apply_precoder, mr_precoder, tx_corr_symbol_rate
        from oobsim.signals import modulate

        pulse = make_rrc_pulse(0.22, 8, 5)
        taps = rng.standard_normal((3, 1, 2)) + 1j * rng.standard_normal((3, 1, 2))
        ch = DiscreteChannel(ells=np.arange(-1, 2), taps=taps, symbol_period=1.0)
        w = mr_precoder(ch)
        rd = tx_corr_symbol_rate(w)
        sigma2 = None

        n = 300_000
        s = (rng.standard_normal((1, n)) + 1j * rng.standard_normal((1, n))) / np.sqrt(2)
        x = apply_precoder(w, s)
        wave = modulate(x, pulse).samples[:, 8 * 5 : -8 * 5]

        from oobsim.signals import discrete_to_continuous_corr

        sigma2 = np.real(np.diagonal(discrete_to_continuous_corr(rd, pulse).at(0)))
        op = calibrate_1db(PA_REF, sigma2)
        y = amplify(op.scales(2)[:, None] * wave, PA_REF)
        est = empirical_corr(SampledSignal(samples=y, sample_rate=5.0), max_lag=10)

        ryy = propagate_corr_polyphase(rd, pulse, PA_REF, op)
        i0 = ryy.zero_index
        window = ryy.matrices[i0 - 10 : i0 + 11]
        scale = np.abs(window).max()
        err = np.abs(est.matrices - window).max() / scale
        assert err < 0.02
