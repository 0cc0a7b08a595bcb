"""Shared helpers: dB conversion, named RNG streams, chunked FFT convolution."""

from __future__ import annotations

import numpy as np
from scipy.fft import next_fast_len

DB_FLOOR = -120.0


def db10(x, floor_db: float = DB_FLOOR):
    """10*log10 with a floor to keep reports finite when a value is ~0."""
    x = np.asarray(x, dtype=float)
    lin_floor = 10.0 ** (floor_db / 10.0)
    return 10.0 * np.log10(np.maximum(x, lin_floor))


def rng_stream(seed: int, name: str, *indices: int) -> np.random.Generator:
    """Deterministic, independent generator for a named stream.

    The same (seed, name, indices) always yields the same stream; different
    names or indices give statistically independent streams.
    """
    key = int.from_bytes(name.encode("utf-8"), "big")
    ss = np.random.SeedSequence(entropy=int(seed),
                                spawn_key=(key, *(int(i) for i in indices)))
    return np.random.Generator(np.random.PCG64(ss))


def conv_along_lags(arr: np.ndarray, kernel: np.ndarray, chunk_bytes: int = 1 << 26) -> np.ndarray:
    """Full convolution of `arr` with a 1-D `kernel` along axis 0.

    `arr` may have arbitrary trailing dimensions; those are processed in
    chunks to bound the FFT workspace.
    """
    kernel = np.asarray(kernel)
    n_in = arr.shape[0]
    n_out = n_in + kernel.shape[0] - 1
    nfft = next_fast_len(n_out)
    trailing = arr.shape[1:]
    flat = arr.reshape(n_in, -1)
    out = np.empty((n_out, flat.shape[1]), dtype=np.result_type(arr.dtype, kernel.dtype, np.complex128))
    kf = np.fft.fft(kernel.astype(out.dtype), n=nfft)
    cols_per_chunk = max(1, chunk_bytes // (nfft * out.dtype.itemsize))
    for lo in range(0, flat.shape[1], cols_per_chunk):
        hi = min(lo + cols_per_chunk, flat.shape[1])
        # FFT along the contiguous axis of a (cols, nfft) block
        seg = np.fft.fft(np.ascontiguousarray(flat[:, lo:hi].T), n=nfft, axis=1)
        seg *= kf[None, :]
        out[:, lo:hi] = np.fft.ifft(seg, axis=1)[:, :n_out].T
    if not np.iscomplexobj(arr) and not np.iscomplexobj(kernel):
        return out.real.reshape((n_out,) + trailing)
    return out.reshape((n_out,) + trailing)


def conv_upsampled(arr: np.ndarray, upsampling: int, kernel: np.ndarray,
                   chunk_bytes: int = 1 << 26) -> np.ndarray:
    """Convolve a kappa-upsampled (zero-stuffed) sequence with a 1-D kernel.

    Equivalent to conv_along_lags(zero_stuffed(arr), kernel) but runs one
    short convolution per output polyphase, which is much cheaper when only
    every kappa-th input sample is nonzero.
    """
    kappa = int(upsampling)
    kernel = np.asarray(kernel)
    n_d = arr.shape[0]
    n_out = (n_d - 1) * kappa + kernel.shape[0]
    trailing = arr.shape[1:]
    dtype = np.result_type(arr.dtype, kernel.dtype, np.complex128)
    if not np.iscomplexobj(arr) and not np.iscomplexobj(kernel):
        dtype = np.result_type(arr.dtype, kernel.dtype, float)
    out = np.empty((n_out,) + trailing, dtype=dtype)
    for phi in range(kappa):
        sub = kernel[phi::kappa]
        if sub.size == 0:
            out[phi::kappa] = 0.0
            continue
        out[phi::kappa] = conv_along_lags(arr, sub, chunk_bytes)
    return out
