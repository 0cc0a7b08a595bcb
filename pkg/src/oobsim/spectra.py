"""Matrix-valued power spectral densities and radiated/received spectra."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .signals import LagCorrelation

# Eigenvalues slightly negative from roundoff are clamped; anything below
# this fraction of the trace signals a genuinely broken PSD matrix.
EIG_FLOOR_REL = -1e-8


@dataclass
class SpectralMatrix:
    """One Hermitian M x M cross-spectral matrix per frequency bin.

    freqs is a uniform ascending grid over [-kappa/(2T), kappa/(2T)) and
    bin_width its spacing; matrices[i] is S(freqs[i]).
    """

    freqs: np.ndarray
    matrices: np.ndarray
    bin_width: float

    def __post_init__(self):
        if self.matrices.ndim != 3 or self.matrices.shape[1] != self.matrices.shape[2]:
            raise ValueError("matrices must have shape (n_bins, M, M)")
        if self.freqs.shape != (self.matrices.shape[0],):
            raise ValueError("freqs and matrices disagree on the number of bins")
        # spot-check hermitianity; ops symmetrize at construction
        for i in (0, self.freqs.size // 2, self.freqs.size - 1):
            s = self.matrices[i]
            scale = max(np.abs(s).max(), 1e-300)
            if np.abs(s - s.conj().T).max() > 1e-9 * scale:
                raise ValueError(f"bin {i} is not Hermitian")

    @property
    def n_bins(self) -> int:
        return self.freqs.size

    @property
    def n_antennas(self) -> int:
        return self.matrices.shape[1]

    def nearest_bin(self, freq: float) -> int:
        return int(np.argmin(np.abs(self.freqs - freq)))

    def hermitian_error(self) -> float:
        """Max |S - S^H| over all bins (for assertions)."""
        return float(np.abs(self.matrices - self.matrices.conj().transpose(0, 2, 1)).max())


def _chunked_lag_fft(matrices: np.ndarray, lags: np.ndarray, nfft: int,
                     chunk_bytes: int = 1 << 26) -> np.ndarray:
    """FFT over the lag axis, chunked over entries, bins in ascending order.

    The symmetric lag range is placed with wrap-around so lag 0 sits at FFT
    index 0; the output rows come back fftshifted (negative frequencies
    first), matching an ascending frequency grid.
    """
    n_lags = lags.size
    flat = matrices.reshape(n_lags, -1)
    out = np.empty((nfft, flat.shape[1]), dtype=complex)
    cols = max(1, chunk_bytes // (nfft * 16))
    half = n_lags // 2
    shift = nfft // 2
    for lo in range(0, flat.shape[1], cols):
        hi = min(lo + cols, flat.shape[1])
        buf = np.zeros((hi - lo, nfft), dtype=complex)
        buf[:, : half + 1] = flat[half:, lo:hi].T
        buf[:, nfft - half:] = flat[:half, lo:hi].T
        spec = np.fft.fft(buf, axis=1)
        out[shift:, lo:hi] = spec[:, : nfft - shift].T
        out[:shift, lo:hi] = spec[:, nfft - shift:].T
    return out.reshape((nfft,) + matrices.shape[1:])


def corr_to_psd(r: LagCorrelation, nfft: int = 4096) -> SpectralMatrix:
    """Discrete-frequency power spectral density S(f) = FT of R(tau).

    The transform is scaled by the lag spacing so that the PSD integrates to
    R(0) (Parseval); each bin is symmetrized to be exactly Hermitian.
    """
    if nfft < r.lags.size:
        raise ValueError(f"nfft = {nfft} is smaller than the lag support {r.lags.size}")
    dt = r.lag_spacing
    spec = _chunked_lag_fft(r.matrices, r.lags, nfft)
    spec *= dt
    # symmetrize in place, chunked over bins, to avoid another full-size copy
    chunk = max(1, (1 << 25) // max(spec.shape[1] * spec.shape[2] * 16, 1))
    for lo in range(0, nfft, chunk):
        hi = min(lo + chunk, nfft)
        block = spec[lo:hi]
        block += np.conj(np.transpose(block, (0, 2, 1)))
        block *= 0.5
    freqs = np.fft.fftshift(np.fft.fftfreq(nfft, d=dt))
    return SpectralMatrix(freqs=freqs, matrices=spec, bin_width=1.0 / (nfft * dt))


def psd_from_autocorr(r_diag: np.ndarray, lag_spacing: float, nfft: int = 4096):
    """Per-antenna PSDs from per-antenna autocorrelations.

    r_diag has shape (n_lags, M), zero lag at the center row.  Returns
    (freqs, psd) with psd real of shape (n_bins, M); the cheap route to the
    radiated spectrum when cross terms are not needed.
    """
    n_lags = r_diag.shape[0]
    if nfft < n_lags:
        raise ValueError(f"nfft = {nfft} is smaller than the lag support {n_lags}")
    lags = np.arange(-(n_lags // 2), n_lags // 2 + 1)
    spec = _chunked_lag_fft(r_diag, lags, nfft) * lag_spacing
    freqs = np.fft.fftshift(np.fft.fftfreq(nfft, d=lag_spacing))
    return freqs, spec.real


def s_tx(spectrum: SpectralMatrix) -> np.ndarray:
    """Total radiated PSD: the trace per frequency bin."""
    return np.real(np.trace(spectrum.matrices, axis1=1, axis2=2))


def received_psd(spectrum: SpectralMatrix, response: np.ndarray, pathloss: float = 1.0) -> np.ndarray:
    """PSD received through a channel frequency response.

    response is (M,) for a frequency-flat victim or (n_bins, M) evaluated on
    the spectrum's grid; returns beta * h^H S h per bin, a real nonnegative
    quadratic form.
    """
    response = np.asarray(response, dtype=complex)
    if response.ndim == 1:
        response = np.broadcast_to(response, (spectrum.n_bins, response.size))
    if response.shape != (spectrum.n_bins, spectrum.n_antennas):
        raise ValueError("response grid does not match the spectrum")
    tmp = np.matmul(spectrum.matrices, response[:, :, None])[:, :, 0]
    return pathloss * np.real(np.sum(np.conj(response) * tmp, axis=1))


def eigenvalues(spectrum: SpectralMatrix, bins=None) -> np.ndarray:
    """Eigenvalues per bin, descending, clamped at the numerical PSD floor.

    Negative eigenvalues above EIG_FLOOR_REL * trace are set to 0; anything
    below that raises, since it means the matrix is not a PSD up to roundoff.
    """
    mats = spectrum.matrices if bins is None else spectrum.matrices[bins]
    vals = np.linalg.eigvalsh(mats)[..., ::-1]
    traces = vals.sum(axis=-1)
    floor = EIG_FLOOR_REL * np.maximum(np.abs(traces), 1e-300)
    if np.any(vals < floor[..., None]):
        worst = float((vals / np.maximum(np.abs(traces), 1e-300)[..., None]).min())
        raise ValueError(f"eigenvalue at {worst:.3e} of trace: spectral matrix is not PSD")
    return np.maximum(vals, 0.0)


def s_max(spectrum: SpectralMatrix) -> np.ndarray:
    """Worst-case normalized received PSD: the principal eigenvalue per bin."""
    return eigenvalues(spectrum)[:, 0]


def worst_case_ratio(spectrum: SpectralMatrix) -> np.ndarray:
    """10 log10(M * s_max / s_tx) per bin; 0 dB means isotropic radiation."""
    trace = s_tx(spectrum)
    if np.any(trace <= 0):
        raise ValueError("worst-case ratio undefined on a zero-trace bin")
    return 10.0 * np.log10(spectrum.n_antennas * s_max(spectrum) / trace)


def eigen_spectrum(spectrum: SpectralMatrix, freq: float) -> np.ndarray:
    """All M eigenvalues at the bin nearest `freq`, descending.

    Their mean equals s_tx(f)/M at that bin.
    """
    return eigenvalues(spectrum, bins=[spectrum.nearest_bin(freq)])[0]
