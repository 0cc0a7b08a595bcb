"""Composition of the analytical chain: scenario -> channels -> precoder ->
correlations -> operating point -> amplified spectra.

All heavy objects are per channel realization; realizations and victims are
drawn from named, indexed RNG streams so sweeps are reproducible and
parallelizable.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.fft import next_fast_len

from . import amplifier, channels, precoding, signals, spectra
from .scenario import Scenario
from .util import conv_along_lags


def build_pulse(sc: Scenario) -> signals.Pulse:
    return signals.make_rrc_pulse(sc.rolloff, sc.span, sc.oversampling, sc.symbol_period)


def build_pa(sc: Scenario) -> amplifier.PAModel:
    return amplifier.PAModel(coefficients=np.asarray(sc.pa_coefficients))


def draw_user_channel(sc: Scenario, realization: int = 0) -> channels.ChannelModel:
    rng = sc.rng("users", realization)
    if sc.channel_kind == "los":
        return channels.gen_los(sc.resolved_user_angles(), sc.n_antennas,
                                sc.spacing_over_wavelength, rng,
                                sample_spacing=sc.symbol_period / sc.oversampling,
                                pathloss=sc.resolved_pathloss())
    return channels.gen_rayleigh(sc.n_antennas, sc.n_users, sc.channel_taps,
                                 sc.oversampling, rng, symbol_period=sc.symbol_period,
                                 pathloss=sc.resolved_pathloss())


def draw_victims(sc: Scenario, n_victims: int, realization: int = 0,
                 kind: str | None = None) -> channels.ChannelModel:
    """n_victims single-receiver channels stacked along the receiver axis."""
    kind = kind or sc.victim_kind or sc.channel_kind
    rng = sc.rng("victims", realization)
    if kind == "rayleigh":
        return channels.gen_rayleigh(sc.n_antennas, n_victims, sc.channel_taps,
                                     sc.oversampling, rng, symbol_period=sc.symbol_period)
    angles = rng.uniform(-np.pi / 2 * 0.999, np.pi / 2 * 0.999, size=n_victims)
    return channels.gen_los(angles, sc.n_antennas, sc.spacing_over_wavelength, rng,
                            sample_spacing=sc.symbol_period / sc.oversampling)


def operating_point_for(sc: Scenario, pa: amplifier.PAModel, input_power) -> amplifier.OperatingPoint:
    """Operating point per the scenario's mode, given unamplified powers."""
    if sc.operating_point == "compression_1db":
        return amplifier.calibrate_1db(pa, input_power, per_antenna=sc.per_antenna_scaling)
    if sc.operating_point == "explicit_power":
        power = np.atleast_1d(np.asarray(input_power, dtype=float))
        if sc.per_antenna_scaling:
            scale = np.sqrt(sc.input_power / power)
        else:
            scale = np.array([np.sqrt(sc.input_power / power.mean())])
        return amplifier.OperatingPoint(input_scale=scale, target="explicit_power")
    return amplifier.OperatingPoint.unit()


@dataclass
class TransmitAnalysis:
    """Everything the metrics need about one channel realization."""

    pulse: signals.Pulse
    channel: channels.ChannelModel
    precoder: precoding.Precoder
    pa: amplifier.PAModel
    op: amplifier.OperatingPoint
    rd: signals.LagCorrelation  # symbol-rate transmit correlation (unscaled)
    ryy: signals.LagCorrelation  # amplified correlation on the T/kappa grid
    spectrum: spectra.SpectralMatrix

    @property
    def scenario_bandwidth(self) -> float:
        return self.pulse.bandwidth


def symbol_rate_corr(sc: Scenario, channel: channels.ChannelModel, pulse: signals.Pulse):
    """Discrete channel -> MR precoder -> symbol-rate transmit correlation."""
    discrete = channels.discretize(channel, pulse)
    precoder = precoding.mr_precoder(discrete, sc.allocation)
    rd = precoding.tx_corr_symbol_rate(precoder, sc.symbol_period)
    return precoder, rd


def transmit_spectrum(sc: Scenario, channel: channels.ChannelModel | None = None,
                      realization: int = 0, nfft: int | None = None) -> TransmitAnalysis:
    """Full matrix-valued transmit PSD for one channel realization."""
    pulse = build_pulse(sc)
    pa = build_pa(sc)
    if channel is None:
        channel = draw_user_channel(sc, realization)
    precoder, rd = symbol_rate_corr(sc, channel, pulse)
    rxx = signals.discrete_to_continuous_corr(rd, pulse)
    sigma2 = np.real(np.diagonal(rxx.matrices[rxx.zero_index]))
    op = operating_point_for(sc, pa, sigma2)
    ryy = amplifier.propagate_corr(rxx, pa, op)
    spectrum = spectra.corr_to_psd(ryy, nfft or sc.nfft)
    return TransmitAnalysis(pulse=pulse, channel=channel, precoder=precoder, pa=pa,
                            op=op, rd=rd, ryy=ryy, spectrum=spectrum)


def tx_autocorr_diag(precoder: precoding.Precoder):
    """Per-antenna symbol-rate autocorrelation, skipping the crossterms.

    Returns (lags, diag) with diag of shape (n_lags, M); equals the diagonal
    of tx_corr_symbol_rate at a fraction of the cost.
    """
    v = precoder.taps * np.sqrt(precoder.allocation)[None, None, :]
    n = v.shape[0]
    nfft = next_fast_len(2 * n - 1)
    vf = np.fft.fft(v, n=nfft, axis=0)
    power = np.sum(np.abs(vf) ** 2, axis=2)  # (F, M)
    corr = np.fft.ifft(power, axis=0)
    lags = np.arange(-(n - 1), n)
    return lags, corr[lags % nfft]


def diag_input_stats(sc: Scenario, precoder: precoding.Precoder, pulse: signals.Pulse):
    """Per-antenna input statistics and the operating point they imply.

    Returns (lags_d, rd_diag, r_cont, op): symbol-rate per-antenna
    autocorrelations, their oversampled version, and the scenario's operating
    point computed from the unamplified powers.
    """
    pa = build_pa(sc)
    lags_d, rd_diag = tx_autocorr_diag(precoder)
    kappa = pulse.oversampling
    g = signals.pulse_autocorr(pulse)
    up = np.zeros(((lags_d.size - 1) * kappa + 1, rd_diag.shape[1]), dtype=complex)
    up[::kappa] = rd_diag
    r_cont = conv_along_lags(up, g) / pulse.symbol_period
    sigma2 = np.real(r_cont[(r_cont.shape[0] - 1) // 2])
    op = operating_point_for(sc, pa, sigma2)
    return lags_d, rd_diag, r_cont, op


def radiated_spectra(sc: Scenario, channel: channels.ChannelModel | None = None,
                     realization: int = 0, nfft: int | None = None, exact_cyclo: bool = False):
    """Per-antenna radiated PSDs (n_bins, M) via the autocorrelation-only path.

    exact_cyclo=True propagates per polyphase pair (exact for PAM Gaussian
    symbols) instead of using the stationary approximation; the two differ
    only far down the regrowth skirts.
    """
    pulse = build_pulse(sc)
    pa = build_pa(sc)
    if channel is None:
        channel = draw_user_channel(sc, realization)
    precoder, _ = _precoder_only(sc, channel, pulse)
    lags_d, rd_diag, r_cont, op = diag_input_stats(sc, precoder, pulse)
    if exact_cyclo:
        ryy_diag = amplifier.propagate_autocorr_polyphase(rd_diag, lags_d, pulse, pa, op)
    else:
        ryy_diag = amplifier.propagate_autocorr(r_cont, pa, op)
    freqs, psd = spectra.psd_from_autocorr(ryy_diag, pulse.sample_spacing, nfft or sc.nfft)
    return freqs, psd, op


def _precoder_only(sc: Scenario, channel, pulse):
    discrete = channels.discretize(channel, pulse)
    precoder = precoding.mr_precoder(discrete, sc.allocation)
    return precoder, discrete


def user_received_psds(analysis: TransmitAnalysis) -> np.ndarray:
    """Received PSD per served user on the spectrum grid, shape (n_bins, K)."""
    spectrum = analysis.spectrum
    resp = channels.freq_response(analysis.channel, spectrum.freqs)  # (F, K, M)
    beta = analysis.channel.pathloss
    out = np.empty((spectrum.n_bins, resp.shape[1]))
    for k in range(resp.shape[1]):
        out[:, k] = spectra.received_psd(spectrum, resp[:, k, :], pathloss=beta[k])
    return out


def stacked_victim_responses(victims: channels.ChannelModel, freqs: np.ndarray) -> np.ndarray:
    """Victim frequency responses, shape (n_freqs, n_victims, M)."""
    return channels.freq_response(victims, freqs)


def siso_reference_psd(sc: Scenario, nfft: int | None = None):
    """Radiated PSD of the single-antenna baseline: one unit-variance symbol
    stream through the same pulse, PA and operating mode.  Deterministic.

    Returns (freqs, psd) with psd of shape (n_bins,).
    """
    pulse = build_pulse(sc)
    pa = build_pa(sc)
    g = signals.pulse_autocorr(pulse)
    r_cont = (g / pulse.symbol_period)[:, None].astype(complex)
    sigma2 = np.real(r_cont[(r_cont.shape[0] - 1) // 2])
    op = operating_point_for(sc, pa, sigma2)
    ryy_diag = amplifier.propagate_autocorr(r_cont, pa, op)
    freqs, psd = spectra.psd_from_autocorr(ryy_diag, pulse.sample_spacing, nfft or sc.nfft)
    return freqs, psd[:, 0]
