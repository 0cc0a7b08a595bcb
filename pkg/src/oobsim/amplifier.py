"""Polynomial power-amplifier model.

Two routes through the nonlinearity are provided and cross-validated:

* waveform amplification for Monte-Carlo simulation (`amplify`), supporting
  odd-order branches with optional FIR memory, and
* analytical propagation of Gaussian signal correlations through the
  memoryless third-order model (`propagate_corr` and friends), built on the
  complex-Gaussian moment kernels in `gaussian_moment`.

`propagate_corr` treats the input as stationary with its polyphase-averaged
correlation.  The `*_polyphase` variants apply the same kernels per sampling
phase of the symbol clock and average afterwards, which is exact for
pulse-amplitude modulated Gaussian symbols; the difference only shows up far
down the regrowth skirts.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.signal import fftconvolve

from .signals import LagCorrelation, Pulse, SampledSignal, pulse_polyphase_kernels
from .util import conv_upsampled


class CalibrationError(ValueError):
    """No valid compression point exists for the amplifier."""


@dataclass(frozen=True)
class PAModel:
    """Odd-order polynomial amplifier y = sum_p b_p x |x|^(2(p-1)).

    coefficients holds the static branch gains, either shape (P,) shared by
    all antennas or (M, P) per antenna; b_1 must be nonzero.  branch_taps, if
    given, replaces the static gains with per-branch FIR filters on the
    sample grid (Monte-Carlo path only; the analytical propagation requires a
    memoryless model).
    """

    coefficients: np.ndarray
    branch_taps: tuple | None = None

    def __post_init__(self):
        coeff = np.atleast_1d(np.asarray(self.coefficients, dtype=complex))
        if coeff.ndim not in (1, 2) or coeff.shape[-1] < 1:
            raise ValueError("coefficients must have shape (P,) or (M, P)")
        if np.any(coeff[..., 0] == 0):
            raise ValueError("the linear branch gain b_1 must be nonzero")
        object.__setattr__(self, "coefficients", coeff)
        if self.branch_taps is not None:
            taps = tuple(np.atleast_1d(np.asarray(t, dtype=complex)) for t in self.branch_taps)
            if len(taps) != coeff.shape[-1]:
                raise ValueError("need one FIR per branch")
            object.__setattr__(self, "branch_taps", taps)

    @property
    def n_branches(self) -> int:
        return self.coefficients.shape[-1]

    @property
    def is_memoryless(self) -> bool:
        return self.branch_taps is None

    def branch_gains(self, n_antennas: int) -> np.ndarray:
        """Static gains broadcast to shape (M, P)."""
        coeff = self.coefficients
        if coeff.ndim == 1:
            return np.broadcast_to(coeff, (n_antennas, coeff.size))
        if coeff.shape[0] != n_antennas:
            raise ValueError(f"per-antenna coefficients are for {coeff.shape[0]} antennas")
        return coeff


@dataclass(frozen=True)
class OperatingPoint:
    """Input scaling applied before the amplifier.

    input_scale is a positive scalar (one scale for all antennas) or a
    per-antenna vector; target records how it was chosen.
    """

    input_scale: np.ndarray
    target: str = "explicit_power"
    compression_power: float | None = None

    def __post_init__(self):
        scale = np.atleast_1d(np.asarray(self.input_scale, dtype=float))
        if np.any(scale <= 0):
            raise ValueError("input_scale must be positive")
        object.__setattr__(self, "input_scale", scale)

    @classmethod
    def unit(cls) -> "OperatingPoint":
        return cls(input_scale=np.ones(1))

    def scales(self, n_antennas: int) -> np.ndarray:
        if self.input_scale.size == 1:
            return np.full(n_antennas, self.input_scale[0])
        if self.input_scale.size != n_antennas:
            raise ValueError("per-antenna scale length mismatch")
        return self.input_scale


def amplify(x, pa: PAModel):
    """Pass a waveform through the amplifier, per antenna.

    Accepts a SampledSignal or a plain (M, N) array and returns the same
    type.  Memoryless: y = sum_p b_p x |x|^(2(p-1)); with branch FIRs each
    power term is causally filtered by its branch response instead.
    """
    signal = isinstance(x, SampledSignal)
    samples = x.samples if signal else np.atleast_2d(np.asarray(x, dtype=complex))
    m, n = samples.shape
    y = np.zeros_like(samples, dtype=complex)
    if pa.is_memoryless:
        gains = pa.branch_gains(m)
        mag2 = np.abs(samples) ** 2 if pa.n_branches > 1 else None
        for p in range(pa.n_branches):
            term = samples if p == 0 else samples * mag2**p
            y += gains[:, p][:, None] * term
    else:
        for p, taps in enumerate(pa.branch_taps):
            term = samples * np.abs(samples) ** (2 * p) if p else samples
            y += fftconvolve(term, taps[None, :], axes=1)[:, :n]
    return SampledSignal(samples=y, sample_rate=x.sample_rate) if signal else y


def compression_point(pa: PAModel) -> float:
    """Input power at which |b_1 + b_2 p| drops 1 dB below |b_1|.

    Returns the smaller positive root of |b_1 + b_2 p|^2 = |b_1|^2 10^-0.1;
    raises CalibrationError when the cubic branch is absent or expansive.
    """
    if not pa.is_memoryless or pa.n_branches > 2:
        raise CalibrationError("compression point is defined for the memoryless third-order model")
    coeff = pa.coefficients.reshape(-1, pa.n_branches)
    if not np.allclose(coeff, coeff[0], atol=0):
        raise CalibrationError("per-antenna coefficient spread needs per-antenna calibration")
    b1 = coeff[0, 0]
    b2 = coeff[0, 1] if pa.n_branches == 2 else 0.0
    if b2 == 0:
        raise CalibrationError("no cubic branch: the amplifier never compresses")
    a = abs(b2) ** 2
    b = 2.0 * np.real(np.conj(b1) * b2)
    c = abs(b1) ** 2 * (1.0 - 10.0 ** (-0.1))
    disc = b * b - 4.0 * a * c
    if b >= 0 or disc <= 0:
        raise CalibrationError("amplifier is expansive: |b1 + b2 p| never drops by 1 dB")
    return (-b - np.sqrt(disc)) / (2.0 * a)


def calibrate_1db(pa: PAModel, input_power, per_antenna: bool = False) -> OperatingPoint:
    """Scale the input so it sits at the amplifier's 1 dB-compression point.

    input_power is the unamplified per-antenna power (scalar or length-M).
    By default one global scalar makes the antenna-averaged input power hit
    the compression point, preserving the precoder's spatial structure;
    per_antenna=True instead puts every antenna individually at the point.
    """
    p1 = compression_point(pa)
    power = np.atleast_1d(np.asarray(input_power, dtype=float))
    if np.any(power <= 0):
        raise ValueError("input powers must be positive")
    if per_antenna:
        scale = np.sqrt(p1 / power)
    else:
        scale = np.array([np.sqrt(p1 / power.mean())])
    return OperatingPoint(input_scale=scale, target="compression_1db", compression_power=float(p1))


def gaussian_moment(r: complex, var_a: float, var_b: float, p_a: int, p_b: int) -> complex:
    """Cross moment E[a* b |a|^(2(p_a-1)) |b|^(2(p_b-1))] for circular Gaussians.

    (a, b) are jointly circularly-symmetric complex Gaussian with
    E[a* b] = r and variances var_a, var_b.  Closed forms exist for the
    orders used by the third-order model:

        (1,1): r
        (1,2): 2 var_b r
        (2,1): 2 var_a r
        (2,2): 2 r (2 var_a var_b + |r|^2)

    and the conjugate-swap symmetry xi(p,p')(a,b) = conj(xi(p',p)(b,a)) holds.
    """
    if p_a not in (1, 2) or p_b not in (1, 2):
        raise ValueError("only branch orders 1 and 2 are supported")
    if var_a < 0 or var_b < 0:
        raise ValueError("variances must be nonnegative")
    if abs(r) ** 2 > var_a * var_b + 1e-9:
        raise ValueError("|r|^2 exceeds var_a*var_b: not a valid correlation")
    if p_a == 1 and p_b == 1:
        return r
    if p_a == 1 and p_b == 2:
        return 2.0 * var_b * r
    if p_a == 2 and p_b == 1:
        return 2.0 * var_a * r
    return 2.0 * r * (2.0 * var_a * var_b + abs(r) ** 2)


def _pair_kernels(pa: PAModel, n_antennas: int):
    """Coefficient products c_pq[m, m'] = conj(b_p,m) b_q,m' for the formula."""
    gains = pa.branch_gains(n_antennas)
    b1 = gains[:, 0]
    b2 = gains[:, 1] if pa.n_branches == 2 else np.zeros_like(b1)
    c11 = np.conj(b1)[:, None] * b1[None, :]
    c12 = np.conj(b1)[:, None] * b2[None, :]
    c21 = np.conj(b2)[:, None] * b1[None, :]
    c22 = np.conj(b2)[:, None] * b2[None, :]
    return c11, c12, c21, c22


def _require_memoryless(pa: PAModel):
    if not pa.is_memoryless or pa.n_branches > 2:
        raise ValueError("analytical propagation supports only the memoryless third-order model; "
                         "use the Monte-Carlo path for branch memory")


def propagate_corr(rxx: LagCorrelation, pa: PAModel, op: OperatingPoint) -> LagCorrelation:
    """Output correlation of the amplifier for stationary Gaussian input.

    The input correlation (oversampled grid) is first scaled by the operating
    point; the third-order moment kernels then give, per lag and antenna pair
    with r = R_x[m,m'](tau), s_m = R_x[m,m](0):

        R_y = c11 r + 2 r (c12 s_m' + c21 s_m + c22 (2 s_m s_m' + |r|^2))

    Hermitian-lag symmetry is preserved exactly.
    """
    _require_memoryless(pa)
    m = rxx.n_antennas
    gamma = op.scales(m)
    scale = (gamma[:, None] * gamma[None, :])[None, :, :]
    sigma2 = np.real(np.diagonal(rxx.matrices[rxx.zero_index])) * gamma**2
    c11, c12, c21, c22 = _pair_kernels(pa, m)
    sa = sigma2[:, None]
    sb = sigma2[None, :]
    base = c11 + 2.0 * (c12 * sb + c21 * sa + 2.0 * c22 * sa * sb)
    out = np.empty_like(rxx.matrices)
    c22x2 = 2.0 * c22[None, :, :]
    chunk = max(1, (1 << 25) // max(m * m * 16, 1))
    for lo in range(0, rxx.lags.size, chunk):
        hi = min(lo + chunk, rxx.lags.size)
        r = rxx.matrices[lo:hi] * scale
        mag2 = r.real**2
        mag2 += r.imag**2
        out[lo:hi] = r * (base[None, :, :] + c22x2 * mag2)
    return LagCorrelation(lags=rxx.lags.copy(), matrices=out, lag_spacing=rxx.lag_spacing)


def propagate_autocorr(r_diag: np.ndarray, pa: PAModel, op: OperatingPoint) -> np.ndarray:
    """Per-antenna-only version of propagate_corr.

    r_diag has shape (n_lags, M) with zero lag at the center row; returns the
    amplified per-antenna autocorrelations (enough for radiated spectra).
    """
    _require_memoryless(pa)
    n_lags, m = r_diag.shape
    gamma = op.scales(m)
    scaled = r_diag * (gamma**2)[None, :]
    sigma2 = np.real(scaled[n_lags // 2])
    c11, c12, c21, c22 = (np.diagonal(c) for c in _pair_kernels(pa, m))
    base = c11 + 2.0 * (c12 + c21) * sigma2 + 4.0 * c22 * sigma2**2
    return scaled * base[None, :] + 2.0 * c22[None, :] * scaled * np.abs(scaled) ** 2


def _polyphase_sigma2(rd_diag: np.ndarray, lags: np.ndarray, kernels: np.ndarray,
                      gamma: np.ndarray) -> np.ndarray:
    """Per-phase per-antenna power sigma^2(phi, m) of the modulated signal."""
    kappa = kernels.shape[0]
    center = (kernels.shape[1] - 1) // 2
    diag = np.real(rd_diag)  # (n_d, M)
    valid = np.abs(lags) * kappa <= center  # q_phi vanishes beyond its support
    weights = kernels[:, center - lags[valid] * kappa]  # (kappa, n_valid): q_phi(-v T)
    return (weights @ diag[valid]) * (gamma**2)[None, :]


def propagate_corr_polyphase(rd: LagCorrelation, pulse: Pulse, pa: PAModel,
                             op: OperatingPoint) -> LagCorrelation:
    """Exact amplified correlation for pulse-amplitude modulated symbols.

    Takes the symbol-rate input correlation, applies the moment kernels per
    polyphase pair of (t, t + tau) and averages the sampling phase out.  This
    removes the stationarity approximation of propagate_corr; for Gaussian
    symbols the result matches waveform Monte-Carlo to estimator noise even
    on the deep regrowth skirts.
    """
    _require_memoryless(pa)
    if abs(rd.lag_spacing - pulse.symbol_period) > 1e-12:
        raise ValueError("expected a symbol-rate input correlation")
    m = rd.n_antennas
    kappa = pulse.oversampling
    gamma = op.scales(m)
    kernels = pulse_polyphase_kernels(pulse)
    rd_diag = np.diagonal(rd.matrices, axis1=1, axis2=2)
    sigma2 = _polyphase_sigma2(rd_diag, rd.lags, kernels, gamma)  # (kappa, M)
    c11, c12, c21, c22 = _pair_kernels(pa, m)

    scaled = rd.matrices * (gamma[:, None] * gamma[None, :])[None, :, :]
    n_out = (rd.lags.size - 1) * kappa + kernels.shape[1]
    half = (n_out - 1) // 2
    lags = np.arange(-half, half + 1)
    acc = np.zeros((n_out, m, m), dtype=complex)
    for phi in range(kappa):
        r_phi = conv_upsampled(scaled, kappa, kernels[phi])
        sa = sigma2[phi][None, :, None]
        sb = sigma2[(phi + lags) % kappa][:, None, :]
        mag2 = r_phi.real**2
        mag2 += r_phi.imag**2
        acc += r_phi * (c11[None] + 2.0 * (c12[None] * sb + c21[None] * sa
                                           + c22[None] * (2.0 * sa * sb + mag2)))
    acc /= kappa
    acc = 0.5 * (acc + np.conj(np.transpose(acc[::-1], (0, 2, 1))))
    return LagCorrelation(lags=lags, matrices=acc, lag_spacing=pulse.sample_spacing)


def propagate_autocorr_polyphase(rd_diag: np.ndarray, lags_d: np.ndarray, pulse: Pulse,
                                 pa: PAModel, op: OperatingPoint) -> np.ndarray:
    """Per-antenna version of propagate_corr_polyphase, shape (n_lags, M).

    rd_diag holds the symbol-rate per-antenna autocorrelations (n_d, M) on
    the integer lag grid lags_d.  The radiated spectrum S_tx only needs the
    autocorrelations, which makes the exact cyclostationary route cheap even
    for large arrays.
    """
    _require_memoryless(pa)
    rd_diag = np.atleast_2d(np.asarray(rd_diag, dtype=complex))
    m = rd_diag.shape[1]
    kappa = pulse.oversampling
    gamma = op.scales(m)
    kernels = pulse_polyphase_kernels(pulse)
    sigma2 = _polyphase_sigma2(rd_diag, lags_d, kernels, gamma)
    c11, c12, c21, c22 = (np.diagonal(c) for c in _pair_kernels(pa, m))

    diag = rd_diag * (gamma**2)[None, :]
    n_out = (lags_d.size - 1) * kappa + kernels.shape[1]
    half = (n_out - 1) // 2
    lags = np.arange(-half, half + 1)
    acc = np.zeros((n_out, m), dtype=complex)
    for phi in range(kappa):
        r_phi = conv_upsampled(diag, kappa, kernels[phi])
        sa = sigma2[phi][None, :]
        sb = sigma2[(phi + lags) % kappa]
        mag2 = r_phi.real**2
        mag2 += r_phi.imag**2
        acc += r_phi * (c11[None] + 2.0 * (c12[None] * sb + c21[None] * sa
                                           + c22[None] * (2.0 * sa * sb + mag2)))
    return acc / kappa
