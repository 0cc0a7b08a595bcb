"""Waveform-level Monte-Carlo: the independent oracle for the analytical path.

symbols -> precoder -> pulse -> operating point -> amplifier -> Welch spectra
and time-average correlations.  Everything is reproducible from the scenario
seed and the Monte-Carlo seed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.fft import next_fast_len
from scipy.signal import get_window

from . import amplifier, pipeline, signals
from .scenario import Scenario
from .spectra import SpectralMatrix
from .util import rng_stream


@dataclass(frozen=True)
class McConfig:
    """Monte-Carlo run parameters."""

    n_symbols: int = 200_000
    welch_segment: int = 4096
    welch_overlap: float = 0.5
    symbol_kind: str = "gaussian"
    seed: int = 0

    def __post_init__(self):
        if self.n_symbols < 1:
            raise ValueError("n_symbols must be >= 1")
        if not 0.0 <= self.welch_overlap < 1.0:
            raise ValueError("welch_overlap must lie in [0, 1)")
        if self.welch_segment < 8:
            raise ValueError("welch_segment is too short")
        if self.symbol_kind != "gaussian" and not self.symbol_kind.startswith("qam"):
            raise ValueError("symbol_kind must be 'gaussian' or 'qam<M>'")


def draw_symbols(kind: str, shape, rng: np.random.Generator) -> np.ndarray:
    """Unit-variance i.i.d. symbols: circular Gaussian or a square QAM grid."""
    if kind == "gaussian":
        return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2.0)
    order = int(kind[3:])
    side = int(np.sqrt(order))
    if side * side != order:
        raise ValueError("QAM order must be a perfect square")
    levels = np.arange(-(side - 1), side, 2)
    alphabet = (levels[:, None] + 1j * levels[None, :]).ravel()
    alphabet = alphabet / np.sqrt(np.mean(np.abs(alphabet) ** 2))
    return alphabet[rng.integers(0, order, size=shape)]


def _waveform_chunks(sc: Scenario, mc: McConfig, channel, realization: int,
                     antenna_chunk: int):
    """Yield (antenna_slice, post-PA samples) without holding the full array.

    The symbol streams, precoder and operating point are computed once; each
    chunk of antennas is then mixed, modulated, scaled, amplified and has the
    pulse transient trimmed.
    """
    pulse = pipeline.build_pulse(sc)
    pa = pipeline.build_pa(sc)
    if channel is None:
        channel = pipeline.draw_user_channel(sc, realization)
    precoder, _ = pipeline._precoder_only(sc, channel, pulse)
    # operating point from the analytical input powers so both paths match
    _, _, _, op = pipeline.diag_input_stats(sc, precoder, pulse)
    gamma = op.scales(sc.n_antennas)
    kappa = pulse.oversampling

    rng = rng_stream(sc.seed, "symbols", realization, mc.seed)
    symbols = draw_symbols(mc.symbol_kind, (sc.n_users, mc.n_symbols), rng)

    taps = precoder.taps
    n_ell, m_all = taps.shape[0], sc.n_antennas
    n_out = mc.n_symbols + n_ell - 1
    nfft = next_fast_len(n_out)
    sf = np.fft.fft(np.sqrt(precoder.allocation)[:, None] * symbols, n=nfft, axis=1)
    trim = pulse.span * kappa
    for lo in range(0, m_all, antenna_chunk):
        hi = min(lo + antenna_chunk, m_all)
        tf = np.fft.fft(taps[:, lo:hi, :], n=nfft, axis=0)
        acc = np.einsum("fmk,kf->mf", tf, sf)
        x_sym = np.fft.ifft(acc, axis=1)[:, :n_out]
        x = signals.modulate(x_sym, pulse).samples
        x *= gamma[lo:hi, None]
        y = amplifier.amplify(x[:, trim:-trim], pa)
        yield slice(lo, hi), y


def simulate_waveform(sc: Scenario, mc: McConfig, channel=None, realization: int = 0,
                      antenna_chunk: int = 16) -> signals.SampledSignal:
    """Post-amplifier waveform on the T/kappa grid, pulse transients trimmed."""
    pulse_rate = sc.oversampling / sc.symbol_period
    out = None
    for sl, y in _waveform_chunks(sc, mc, channel, realization, antenna_chunk):
        if out is None:
            out = np.empty((sc.n_antennas, y.shape[1]), dtype=complex)
        out[sl] = y
    return signals.SampledSignal(samples=out, sample_rate=pulse_rate)


def _welch_segments(n_samples: int, nperseg: int, overlap: float):
    step = max(1, int(round(nperseg * (1.0 - overlap))))
    starts = range(0, n_samples - nperseg + 1, step)
    return list(starts), step


def welch_autospectra(samples: np.ndarray, sample_rate: float, nperseg: int = 4096,
                      overlap: float = 0.5):
    """Hann-window Welch PSD per antenna (density scaling, two-sided, shifted).

    Returns (freqs, psd) with psd of shape (n_bins, M); the grid matches
    corr_to_psd with nfft = nperseg.
    """
    samples = np.atleast_2d(samples)
    starts, _ = _welch_segments(samples.shape[1], nperseg, overlap)
    if len(starts) < 2:
        raise ValueError("signal too short for at least two Welch segments")
    win = get_window("hann", nperseg)
    dt = 1.0 / sample_rate
    acc = np.zeros((nperseg, samples.shape[0]))
    for s in starts:
        seg = samples[:, s:s + nperseg] * win[None, :]
        spec = np.fft.fft(seg, axis=1)
        acc += (spec.real**2 + spec.imag**2).T
    scale = dt / (np.sum(win**2) * len(starts))
    freqs = np.fft.fftshift(np.fft.fftfreq(nperseg, d=dt))
    return freqs, np.fft.fftshift(acc, axes=0) * scale


def welch_cross_psd(y: signals.SampledSignal, mc: McConfig, segment_block: int = 16) -> SpectralMatrix:
    """Hann-window Welch estimate of the full M x M cross-spectral matrix.

    Averaged cross-periodograms with density scaling, so the matrix trace
    integrates to the total signal power (Parseval); Hermitian per bin by
    construction.
    """
    samples = y.samples
    nperseg = mc.welch_segment
    starts, _ = _welch_segments(samples.shape[1], nperseg, mc.welch_overlap)
    if len(starts) < 2:
        raise ValueError("signal too short for at least two Welch segments")
    win = get_window("hann", nperseg)
    dt = 1.0 / y.sample_rate
    m = samples.shape[0]
    acc = np.zeros((nperseg, m, m), dtype=complex)
    for blk in range(0, len(starts), segment_block):
        block = starts[blk:blk + segment_block]
        segs = np.stack([samples[:, s:s + nperseg] for s in block])  # (B, M, n)
        spec = np.fft.fft(segs * win[None, None, :], axis=2)
        spec = spec.transpose(2, 1, 0)  # (F, M, B)
        acc += np.matmul(np.conj(spec), spec.transpose(0, 2, 1))
    acc *= dt / (np.sum(win**2) * len(starts))
    freqs = np.fft.fftshift(np.fft.fftfreq(nperseg, d=dt))
    return SpectralMatrix(freqs=freqs, matrices=np.fft.fftshift(acc, axes=0),
                          bin_width=1.0 / (nperseg * dt))


def trace_psd_streaming(sc: Scenario, mc: McConfig, channel=None, realization: int = 0,
                        antenna_chunk: int = 16):
    """Welch per-antenna PSDs of the simulated waveform, antennas streamed.

    Large arrays never materialize the full waveform; returns (freqs, psd)
    with psd of shape (n_bins, M).  The trace over antennas is the
    Monte-Carlo estimate of the radiated PSD.
    """
    psd = None
    freqs = None
    rate = sc.oversampling / sc.symbol_period
    for sl, y in _waveform_chunks(sc, mc, channel, realization, antenna_chunk):
        freqs, part = welch_autospectra(y, rate, mc.welch_segment, mc.welch_overlap)
        if psd is None:
            psd = np.empty((part.shape[0], sc.n_antennas))
        psd[:, sl] = part
    return freqs, psd


def expected_welch_psd(values: np.ndarray, nperseg: int) -> np.ndarray:
    """Expectation of the Welch estimate given the true PSD on the same grid.

    The estimator's mean is the PSD smoothed by the window's squared spectral
    response; values are per-bin on the ascending (shifted) grid with
    n_bins = nperseg, and the circular convolution matches the DFT estimator.
    """
    values = np.asarray(values)
    if values.shape[0] != nperseg:
        raise ValueError("PSD grid must match the Welch segment length")
    win = get_window("hann", nperseg)
    kernel = np.abs(np.fft.fft(win)) ** 2 / (np.sum(win**2) * nperseg)
    flat = np.fft.ifftshift(values, axes=0).reshape(nperseg, -1)
    smooth = np.fft.ifft(np.fft.fft(flat, axis=0) * np.fft.fft(kernel)[:, None], axis=0)
    smooth = np.real(smooth) if not np.iscomplexobj(values) else smooth
    return np.fft.fftshift(smooth, axes=0).reshape(values.shape)


def empirical_corr(y: signals.SampledSignal, max_lag: int) -> signals.LagCorrelation:
    """Biased (1/N) time-average correlation estimate, Hermitian-symmetrized."""
    samples = y.samples
    m, n = samples.shape
    if max_lag >= n:
        raise ValueError("max_lag must be far smaller than the signal length")
    nfft = next_fast_len(n + max_lag)
    spec = np.fft.fft(samples, n=nfft, axis=1)
    out = np.empty((2 * max_lag + 1, m, m), dtype=complex)
    lag_idx = np.arange(-max_lag, max_lag + 1)
    for a in range(m):
        cross = np.fft.ifft(np.conj(spec[a])[None, :] * spec, axis=1) / n  # (M, nfft)
        out[:, a, :] = cross[:, lag_idx % nfft].T
    sym = 0.5 * (out + np.conj(np.transpose(out[::-1], (0, 2, 1))))
    return signals.LagCorrelation(lags=lag_idx, matrices=sym,
                                  lag_spacing=1.0 / y.sample_rate)


def moment_oracle(r: complex, var_a: float, var_b: float, p_a: int, p_b: int,
                  n_samples: int = 1_000_000, seed: int = 0) -> complex:
    """Monte-Carlo estimate of the cross moment gaussian_moment computes.

    Draws correlated circular-Gaussian pairs with E[a* b] = r and averages
    a* b |a|^(2(p_a-1)) |b|^(2(p_b-1)).
    """
    if abs(r) ** 2 > var_a * var_b + 1e-9:
        raise ValueError("|r|^2 exceeds var_a*var_b: infeasible correlation")
    rng = np.random.default_rng(seed)
    u = (rng.standard_normal(n_samples) + 1j * rng.standard_normal(n_samples)) / np.sqrt(2.0)
    v = (rng.standard_normal(n_samples) + 1j * rng.standard_normal(n_samples)) / np.sqrt(2.0)
    a = np.sqrt(var_a) * u
    b = (r / np.sqrt(var_a)) * u + np.sqrt(max(var_b - abs(r) ** 2 / var_a, 0.0)) * v
    term = np.conj(a) * b
    if p_a == 2:
        term = term * np.abs(a) ** 2
    if p_b == 2:
        term = term * np.abs(b) ** 2
    return complex(np.mean(term))
