"""Pulse shaping, pulse-amplitude modulation and lag-correlation containers.

The time grid throughout is T/kappa (kappa-times oversampled symbol period T,
normalized T = 1 by default).  Frequencies are in units of 1/T.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .util import conv_along_lags, conv_upsampled


@dataclass(frozen=True)
class Pulse:
    """Unit-energy transmit pulse sampled on the T/kappa grid.

    Energy is normalized in the continuous-time sense,
    sum |taps|^2 * (T/kappa) = 1, and the taps are even about the center tap.
    """

    taps: np.ndarray
    symbol_period: float
    oversampling: int
    rolloff: float
    span: int

    def __post_init__(self):
        taps = np.asarray(self.taps, dtype=float)
        object.__setattr__(self, "taps", taps)
        if taps.ndim != 1 or taps.size != 2 * self.span * self.oversampling + 1:
            raise ValueError("tap count must be 2*span*oversampling + 1")
        energy = np.sum(taps**2) * self.sample_spacing
        if abs(energy - 1.0) > 1e-9:
            raise ValueError(f"pulse energy {energy} is not 1 within 1e-9")
        if not np.allclose(taps, taps[::-1], atol=1e-12):
            raise ValueError("pulse taps must be symmetric about the center tap")

    @property
    def sample_spacing(self) -> float:
        return self.symbol_period / self.oversampling

    @property
    def sample_rate(self) -> float:
        return self.oversampling / self.symbol_period

    @property
    def bandwidth(self) -> float:
        """Occupied (two-sided) bandwidth B = (1 + rolloff) / T."""
        return (1.0 + self.rolloff) / self.symbol_period


@dataclass
class SampledSignal:
    """Complex baseband samples, one row per antenna, on a uniform grid."""

    samples: np.ndarray
    sample_rate: float

    def __post_init__(self):
        samples = np.atleast_2d(np.asarray(self.samples))
        if samples.ndim != 2:
            raise ValueError("samples must be a (antennas, time) array")
        self.samples = samples

    @property
    def n_antennas(self) -> int:
        return self.samples.shape[0]

    @property
    def n_samples(self) -> int:
        return self.samples.shape[1]


@dataclass
class LagCorrelation:
    """Matrix-valued correlation function on a symmetric integer lag grid.

    matrices[i, m, m'] is E[x_m^*(t) x_m'(t + lags[i]*lag_spacing)], so the
    matrix at lag -v equals the conjugate transpose of the one at lag +v and
    the zero-lag matrix is Hermitian with a nonnegative diagonal.
    """

    lags: np.ndarray
    matrices: np.ndarray
    lag_spacing: float

    def __post_init__(self):
        lags = np.asarray(self.lags, dtype=int)
        matrices = np.asarray(self.matrices, dtype=complex)
        if matrices.ndim != 3 or matrices.shape[1] != matrices.shape[2]:
            raise ValueError("matrices must have shape (n_lags, M, M)")
        if lags.shape != (matrices.shape[0],):
            raise ValueError("lags and matrices disagree on the number of lags")
        if lags.size % 2 == 0 or np.any(lags != -lags[::-1]) or lags[lags.size // 2] != 0:
            raise ValueError("lags must be a symmetric integer range about 0")
        self.lags = lags
        self.matrices = matrices
        self._spot_check_symmetry()

    def _spot_check_symmetry(self, tol: float = 1e-8):
        # Full validation is O(n_lags * M^2); construction checks zero lag and
        # a few sampled lags, tests assert the full property.
        scale = max(np.abs(self.matrices[self.zero_index]).max(), 1e-300)
        picks = {0, int(self.lags[-1]), int(self.lags[-1]) // 2}
        for lag in picks:
            a = self.at(lag)
            b = self.at(-lag)
            if np.abs(a - b.conj().T).max() > tol * scale:
                raise ValueError(f"Hermitian-lag symmetry violated at lag {lag}")

    @property
    def n_antennas(self) -> int:
        return self.matrices.shape[1]

    @property
    def zero_index(self) -> int:
        return self.lags.size // 2

    def at(self, lag: int) -> np.ndarray:
        """Matrix at a signed integer lag."""
        i = self.zero_index + int(lag)
        if not 0 <= i < self.lags.size:
            raise IndexError(f"lag {lag} outside support {self.lags[0]}..{self.lags[-1]}")
        return self.matrices[i]

    def hermitian_lag_error(self) -> float:
        """Max |R[-v] - R[v]^H| over the full support (for assertions)."""
        flipped = self.matrices[::-1].conj().transpose(0, 2, 1)
        return float(np.abs(self.matrices - flipped).max())


def make_rrc_pulse(rolloff: float, span: int, oversampling: int, symbol_period: float = 1.0) -> Pulse:
    """Truncated unit-energy root-raised-cosine pulse.

    Parameters
    ----------
    rolloff : excess-bandwidth factor in [0, 1]; 0 gives the sinc pulse.
    span : truncation, in symbols per side (>= 8 so the stopband floor stays
        far below the nonlinear regrowth under study).
    oversampling : samples per symbol (>= 2).
    symbol_period : T; frequencies elsewhere are reported in units of 1/T.
    """
    if not 0.0 <= rolloff <= 1.0:
        raise ValueError("rolloff must lie in [0, 1]")
    if oversampling < 2 or int(oversampling) != oversampling:
        raise ValueError("oversampling must be an integer >= 2")
    if span < 8 or int(span) != span:
        raise ValueError("span must be an integer >= 8")
    if symbol_period <= 0:
        raise ValueError("symbol_period must be positive")

    kappa = int(oversampling)
    span = int(span)
    t = np.arange(-span * kappa, span * kappa + 1) / kappa  # in symbol periods
    if rolloff == 0.0:
        taps = np.sinc(t)
    else:
        taps = np.empty_like(t)
        # where 1 - (4 beta t)^2 vanishes the closed form is 0/0; use the limit
        singular = np.isclose(np.abs(t), 1.0 / (4.0 * rolloff), rtol=0, atol=1e-9)
        taps[singular] = (rolloff / np.sqrt(2.0)) * (
            (1.0 + 2.0 / np.pi) * np.sin(np.pi / (4.0 * rolloff))
            + (1.0 - 2.0 / np.pi) * np.cos(np.pi / (4.0 * rolloff))
        )
        ts = t[~singular]
        with np.errstate(invalid="ignore", divide="ignore"):
            num = np.sin(np.pi * ts * (1.0 - rolloff)) + 4.0 * rolloff * ts * np.cos(np.pi * ts * (1.0 + rolloff))
            den = np.pi * ts * (1.0 - (4.0 * rolloff * ts) ** 2)
            val = num / den
        val[ts == 0.0] = 1.0 - rolloff + 4.0 * rolloff / np.pi
        taps[~singular] = val

    dt = symbol_period / kappa
    taps = taps / np.sqrt(np.sum(taps**2) * dt)
    return Pulse(taps=taps, symbol_period=float(symbol_period), oversampling=kappa,
                 rolloff=float(rolloff), span=span)


def pulse_autocorr(pulse: Pulse) -> np.ndarray:
    """Deterministic pulse autocorrelation g = (p * p~)(tau) on the T/kappa grid.

    Returns an odd-length array with zero lag at the center; g(0) = 1 by the
    unit-energy normalization, and g(nT) ~ 0 for n != 0 (Nyquist).
    """
    taps = pulse.taps
    return np.convolve(taps, taps[::-1].conj()) * pulse.sample_spacing


def pulse_polyphase_kernels(pulse: Pulse) -> np.ndarray:
    """Per-polyphase pulse correlation kernels q_phi[j] = sum_n p[n*k+phi] p[n*k+phi+j].

    Row phi is the deterministic correlation seen at sampling phase phi of the
    symbol clock; the mean over phases equals pulse_autocorr / T.  Shape is
    (kappa, 2*len(taps) - 1) with zero lag at the center column.
    """
    taps = pulse.taps
    kappa = pulse.oversampling
    n = taps.size
    out = np.empty((kappa, 2 * n - 1))
    for phi in range(kappa):
        comb = np.zeros_like(taps)
        comb[phi::kappa] = taps[phi::kappa]
        # full cross-correlation sum_i comb[i] * taps[i + j]
        out[phi] = np.convolve(taps[::-1], comb)[::-1]
    return out


def modulate(symbols: np.ndarray, pulse: Pulse) -> SampledSignal:
    """Pulse-amplitude modulate symbol-rate sequences onto the T/kappa grid.

    symbols has shape (antennas, N) (a 1-D input is treated as one antenna).
    The output holds the full transient, (N + 2*span)*kappa samples.
    """
    symbols = np.atleast_2d(np.asarray(symbols, dtype=complex))
    m, n_sym = symbols.shape
    kappa = pulse.oversampling
    up = np.zeros((m, n_sym * kappa), dtype=complex)
    up[:, ::kappa] = symbols
    out = conv_along_lags(up.T, pulse.taps).T
    return SampledSignal(samples=out, sample_rate=pulse.sample_rate)


def discrete_to_continuous_corr(rd: LagCorrelation, pulse: Pulse) -> LagCorrelation:
    """Correlation of the modulated waveform from the symbol-rate correlation.

    R(tau) = (1/T) sum_v Rd[v] g(tau - v T) on the T/kappa grid, where g is
    the pulse autocorrelation.  The output support is the symbol-lag support
    stretched by kappa plus the support of g.
    """
    kappa = pulse.oversampling
    g = pulse_autocorr(pulse)
    out = conv_upsampled(rd.matrices, kappa, g) / pulse.symbol_period
    half = (out.shape[0] - 1) // 2
    return LagCorrelation(lags=np.arange(-half, half + 1), matrices=out,
                          lag_spacing=pulse.sample_spacing)
