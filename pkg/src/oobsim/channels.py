"""Line-of-sight and i.i.d. Rayleigh frequency-selective channel generation.

Channel taps are discrete filter coefficients on the T/kappa grid (a single
unit tap is a flat channel), so convolving a sample stream with them needs no
grid-spacing factor.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .signals import Pulse, pulse_autocorr
from .util import conv_along_lags


@dataclass
class ChannelModel:
    """Small-scale fading from M antennas to K receivers.

    taps has shape (K, M, L) with delay axis last, starting at delay 0 on the
    T/kappa grid.  LOS channels have L = 1 and unit-modulus entries.
    """

    kind: str
    taps: np.ndarray
    pathloss: np.ndarray
    sample_spacing: float
    angles: np.ndarray | None = None

    def __post_init__(self):
        taps = np.asarray(self.taps, dtype=complex)
        if taps.ndim != 3:
            raise ValueError("taps must have shape (K, M, L)")
        self.taps = taps
        self.pathloss = np.broadcast_to(np.asarray(self.pathloss, dtype=float), (taps.shape[0],)).copy()
        if np.any(self.pathloss <= 0):
            raise ValueError("pathloss coefficients must be positive")

    @property
    def n_receivers(self) -> int:
        return self.taps.shape[0]

    @property
    def n_antennas(self) -> int:
        return self.taps.shape[1]

    @property
    def n_taps(self) -> int:
        return self.taps.shape[2]


@dataclass
class DiscreteChannel:
    """Symbol-rate channel taps after pulse and matched filtering."""

    ells: np.ndarray
    taps: np.ndarray  # (n_ells, K, M)
    symbol_period: float

    def __post_init__(self):
        if self.taps.ndim != 3 or self.taps.shape[0] != self.ells.size:
            raise ValueError("taps must have shape (n_ells, K, M)")
        if not np.all(np.isfinite(self.taps)):
            raise ValueError("discrete channel taps must be finite")

    @property
    def n_receivers(self) -> int:
        return self.taps.shape[1]

    @property
    def n_antennas(self) -> int:
        return self.taps.shape[2]


def _as_rng(rng) -> np.random.Generator:
    if isinstance(rng, np.random.Generator):
        return rng
    return np.random.default_rng(rng)


def steering_vector(angle_rad: float, n_antennas: int, spacing_over_wavelength: float = 0.5) -> np.ndarray:
    """Uniform-linear-array response e^{j 2 pi m (d/lambda) sin(theta)}, m = 0..M-1."""
    m = np.arange(n_antennas)
    return np.exp(2j * np.pi * m * spacing_over_wavelength * np.sin(angle_rad))


def gen_los(angles, n_antennas: int, spacing_over_wavelength: float = 0.5,
            rng=None, sample_spacing: float = 0.2, pathloss=1.0) -> ChannelModel:
    """Single-path channels to users at the given azimuth angles (radians).

    Each link gets one unit-modulus tap: the steering-vector entry times a
    carrier phase drawn uniformly per user.
    """
    rng = _as_rng(rng)
    angles = np.atleast_1d(np.asarray(angles, dtype=float))
    if np.any(np.abs(angles) >= np.pi / 2):
        raise ValueError("angles must satisfy |theta| < pi/2")
    k = angles.size
    phases = rng.uniform(0.0, 2.0 * np.pi, size=k)
    taps = np.empty((k, n_antennas, 1), dtype=complex)
    for i, (theta, phi) in enumerate(zip(angles, phases)):
        taps[i, :, 0] = np.exp(1j * phi) * steering_vector(theta, n_antennas, spacing_over_wavelength)
    return ChannelModel(kind="los", taps=taps, pathloss=pathloss,
                        sample_spacing=sample_spacing, angles=angles)


def gen_rayleigh(n_antennas: int, n_receivers: int, n_taps: int, oversampling: int,
                 rng=None, symbol_period: float = 1.0, pathloss=1.0) -> ChannelModel:
    """Frequency-selective i.i.d. Rayleigh channels.

    Each link gets n_taps i.i.d. CN(0, 1/n_taps) coefficients on the T/kappa
    grid, so the expected total tap energy per link is 1.
    """
    if n_taps < 1:
        raise ValueError("n_taps must be >= 1")
    rng = _as_rng(rng)
    shape = (n_receivers, n_antennas, n_taps)
    taps = (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2.0 * n_taps)
    return ChannelModel(kind="rayleigh", taps=taps, pathloss=pathloss,
                        sample_spacing=symbol_period / oversampling)


def gen_victim(kind: str, n_antennas: int, rng=None, *, angle_rad: float = 0.0,
               n_taps: int = 75, oversampling: int = 5, symbol_period: float = 1.0,
               spacing_over_wavelength: float = 0.5, pathloss: float = 1.0) -> ChannelModel:
    """Single-receiver channel for an adjacent-band victim, from its own RNG stream."""
    if kind == "los":
        return gen_los([angle_rad], n_antennas, spacing_over_wavelength, rng,
                       sample_spacing=symbol_period / oversampling, pathloss=pathloss)
    if kind == "rayleigh":
        return gen_rayleigh(n_antennas, 1, n_taps, oversampling, rng,
                            symbol_period=symbol_period, pathloss=pathloss)
    raise ValueError(f"unknown channel kind {kind!r}")


def discretize(channel: ChannelModel, pulse: Pulse) -> DiscreteChannel:
    """Symbol-rate taps H[l] = (p * h * p~)(l T).

    The pulse and its matched filter wrap the channel; sampling the result at
    multiples of T gives the discrete-time channel the precoder works with.
    """
    # a single tap is a delta; the grid only matters for true delay spread
    if channel.n_taps > 1 and abs(channel.sample_spacing - pulse.sample_spacing) > 1e-12:
        raise ValueError("channel and pulse sample grids differ")
    g = pulse_autocorr(pulse)
    kappa = pulse.oversampling
    h = np.transpose(channel.taps, (2, 0, 1))  # (L, K, M), delay axis first
    full = conv_along_lags(h.astype(complex), g)
    center = g.size // 2  # index of tau = 0
    ell_min = -(center // kappa)
    ell_max = (full.shape[0] - 1 - center) // kappa
    ells = np.arange(ell_min, ell_max + 1)
    taps = full[center + ells * kappa]
    return DiscreteChannel(ells=ells, taps=taps, symbol_period=pulse.symbol_period)


def freq_response(channel: ChannelModel, freqs: np.ndarray) -> np.ndarray:
    """Channel frequency response per receiver/antenna at the given frequencies.

    Returns shape (n_freqs, K, M).  Frequencies must lie within the sampled
    band [-kappa/(2T), kappa/(2T)].
    """
    freqs = np.atleast_1d(np.asarray(freqs, dtype=float))
    dt = channel.sample_spacing
    if np.any(np.abs(freqs) > 0.5 / dt + 1e-12):
        raise ValueError("frequency outside the sampled band")
    delays = np.arange(channel.n_taps) * dt
    phase = np.exp(-2j * np.pi * freqs[:, None] * delays[None, :])  # (F, L)
    flat = channel.taps.reshape(-1, channel.n_taps)  # (K*M, L)
    out = phase @ flat.T
    return out.reshape(freqs.size, channel.n_receivers, channel.n_antennas)
