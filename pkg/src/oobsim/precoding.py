"""Maximum-ratio precoding and the symbol-rate transmit correlation."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.fft import next_fast_len

from .channels import DiscreteChannel
from .signals import LagCorrelation


@dataclass
class Precoder:
    """Linear precoding filter W[l] with per-user power allocation.

    The taps are normalized so that sum_l ||W[l]||_F^2 = K and the allocation
    weights sum to 1.
    """

    ells: np.ndarray
    taps: np.ndarray  # (n_ells, M, K)
    alpha: float
    allocation: np.ndarray

    def __post_init__(self):
        k = self.taps.shape[2]
        total = np.sum(np.abs(self.taps) ** 2)
        if abs(total - k) > 1e-9 * k:
            raise ValueError("precoder taps must satisfy sum ||W[l]||_F^2 = K")
        alloc = np.asarray(self.allocation, dtype=float)
        if alloc.shape != (k,) or np.any(alloc <= 0):
            raise ValueError("allocation must be K positive weights")
        if abs(alloc.sum() - 1.0) > 1e-12:
            raise ValueError("allocation must sum to 1")
        self.allocation = alloc

    @property
    def n_antennas(self) -> int:
        return self.taps.shape[1]

    @property
    def n_users(self) -> int:
        return self.taps.shape[2]


def normalize_allocation(allocation, n_users: int) -> np.ndarray:
    """Positive per-user weights scaled to sum to 1 (None means equal)."""
    if allocation is None:
        return np.full(n_users, 1.0 / n_users)
    alloc = np.asarray(allocation, dtype=float)
    if alloc.shape != (n_users,):
        raise ValueError(f"allocation must have length {n_users}")
    if np.any(alloc <= 0):
        raise ValueError("allocation weights must be positive")
    return alloc / alloc.sum()


def mr_precoder(channel: DiscreteChannel, allocation=None) -> Precoder:
    """Maximum-ratio precoder W[l] = alpha H^H[-l].

    alpha is chosen to meet the Frobenius normalization sum_l ||W[l]||^2 = K.
    """
    k = channel.n_receivers
    taps = np.conj(np.transpose(channel.taps[::-1], (0, 2, 1)))  # (n_ells, M, K)
    ells = -channel.ells[::-1]
    total = np.sum(np.abs(taps) ** 2)
    if total == 0.0:
        raise ValueError("cannot normalize a precoder for an all-zero channel")
    alpha = np.sqrt(k / total)
    return Precoder(ells=ells, taps=alpha * taps, alpha=float(alpha),
                    allocation=normalize_allocation(allocation, k))


def tx_corr_symbol_rate(precoder: Precoder, symbol_period: float = 1.0) -> LagCorrelation:
    """Symbol-rate transmit correlation R[v] = sum_l W*[l] D_xi W^T[v+l].

    Computed in the frequency domain: with V[l] = W[l] D_xi^{1/2}, the lag
    correlation of the matrix sequence V is recovered by an inverse FFT of
    conj(V~(f)) V~(f)^T.
    """
    v = precoder.taps * np.sqrt(precoder.allocation)[None, None, :]
    n = v.shape[0]
    nfft = next_fast_len(2 * n - 1)
    vf = np.fft.fft(v, n=nfft, axis=0)
    spec = np.conj(vf) @ np.transpose(vf, (0, 2, 1))
    corr = np.fft.ifft(spec, axis=0)
    lags = np.arange(-(n - 1), n)
    matrices = corr[lags % nfft]
    # exact Hermitian-lag symmetry (the formula guarantees it up to roundoff)
    matrices = 0.5 * (matrices + np.conj(np.transpose(matrices[::-1], (0, 2, 1))))
    return LagCorrelation(lags=lags, matrices=matrices, lag_spacing=symbol_period)


def apply_precoder(precoder: Precoder, symbols: np.ndarray, antenna_chunk: int = 8) -> np.ndarray:
    """Convolve user symbol streams with the precoding filter.

    symbols has shape (K, N); the output is the full convolution, shape
    (M, N + n_ells - 1), with x[n] = sum_l W[l] D_xi^{1/2} s[n-l].
    """
    symbols = np.atleast_2d(np.asarray(symbols, dtype=complex))
    k, n = symbols.shape
    if k != precoder.n_users:
        raise ValueError(f"expected {precoder.n_users} symbol streams, got {k}")
    taps = precoder.taps
    n_ell, m = taps.shape[0], precoder.n_antennas
    n_out = n + n_ell - 1
    nfft = next_fast_len(n_out)
    sf = np.fft.fft(np.sqrt(precoder.allocation)[:, None] * symbols, n=nfft, axis=1)  # (K, F)
    out = np.empty((m, n_out), dtype=complex)
    for lo in range(0, m, antenna_chunk):
        hi = min(lo + antenna_chunk, m)
        tf = np.fft.fft(taps[:, lo:hi, :], n=nfft, axis=0)  # (F, Mc, K)
        acc = np.einsum("fmk,kf->mf", tf, sf)
        out[lo:hi] = np.fft.ifft(acc, axis=1)[:, :n_out]
    return out
