"""Adjacent-channel leakage measures, band powers, radiation patterns and
eigenvalue distributions."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.signal import find_peaks

from . import channels, pipeline, spectra
from .scenario import Scenario
from .util import db10


@dataclass
class BandPowers:
    """Powers in the allocated band and the two adjacent bands of equal width."""

    p_in_band: float
    p_ob_left: float
    p_ob_right: float
    bandwidth: float

    @property
    def p_ob(self) -> float:
        return max(self.p_ob_left, self.p_ob_right)


@dataclass
class AclrReport:
    """Leakage measures of a scenario, averaged over channel realizations.

    mimo_aclr is the over-the-air measure from the victim-average route when
    victims were simulated, otherwise from the radiated-spectrum route; both
    routes are reported.
    """

    aclr_per_antenna: np.ndarray  # dB, length M
    mimo_aclr: float  # dB
    aclr_siso_equivalent: float  # dB
    n_realizations: int
    mimo_aclr_tx_route: float = np.nan  # dB, via the average radiated spectrum
    mimo_aclr_victim_route: float = np.nan  # dB, via victim Monte-Carlo
    n_victims: int = 0


def band_edges(freqs: np.ndarray, bandwidth: float):
    """Bin index ranges of the left-adjacent, in-band and right-adjacent bands.

    Band edges are snapped to the nearest bin boundary; the three bands
    partition [-3B/2, 3B/2) without overlap.
    """
    df = freqs[1] - freqs[0]
    edges = np.array([-1.5, -0.5, 0.5, 1.5]) * bandwidth
    idx = np.round((edges - freqs[0]) / df).astype(int)
    if idx[0] < 0 or idx[3] > freqs.size:
        raise ValueError("frequency grid does not cover [-3B/2, 3B/2]")
    return slice(idx[0], idx[1]), slice(idx[1], idx[2]), slice(idx[2], idx[3])


def band_powers(freqs: np.ndarray, psd: np.ndarray, bandwidth: float) -> BandPowers:
    """Midpoint-rule band powers of a real per-bin PSD."""
    left, mid, right = band_edges(freqs, bandwidth)
    df = freqs[1] - freqs[0]
    psd = np.asarray(psd, dtype=float)
    return BandPowers(p_in_band=float(psd[mid].sum() * df),
                      p_ob_left=float(psd[left].sum() * df),
                      p_ob_right=float(psd[right].sum() * df),
                      bandwidth=bandwidth)


def aclr(freqs: np.ndarray, psd: np.ndarray, bandwidth: float) -> float:
    """Adjacent-channel leakage ratio in dB: worse adjacent band over in-band."""
    bp = band_powers(freqs, psd, bandwidth)
    if bp.p_in_band <= 0:
        raise ValueError("in-band power is zero; ACLR undefined")
    return float(db10(bp.p_ob / bp.p_in_band))


def p_ob_max(spectrum: spectra.SpectralMatrix, bandwidth: float) -> float:
    """Upper bound on any victim's adjacent-band power (unit channel norm).

    Integrates the principal eigenvalue over each adjacent band and takes the
    worse one.
    """
    smax = spectra.s_max(spectrum)
    bp = band_powers(spectrum.freqs, smax, bandwidth)
    return bp.p_ob


def siso_baseline_aclr(sc: Scenario, n_realizations: int = 20, nfft: int | None = None) -> float:
    """ACLR of the matched single-antenna system: same channel statistics,
    pulse, amplifier and operating mode at M = K = 1.

    Over a fading channel the single-antenna transmitter still matched-filters
    its own channel, which shapes the expected transmit spectrum the same way
    as each antenna of the array does; a flat-channel reference would sit
    ~1 dB off.  LOS (flat) scenarios are deterministic and need one
    realization.
    """
    sc1 = sc.with_(n_antennas=1, n_users=1, allocation=None, pathloss=None)
    if sc1.channel_kind == "los":
        n_realizations = 1
    mean_psd = None
    freqs = None
    for r in range(n_realizations):
        freqs, psd, _ = pipeline.radiated_spectra(sc1, realization=r, nfft=nfft)
        mean_psd = psd[:, 0] if mean_psd is None else mean_psd + psd[:, 0]
    return aclr(freqs, mean_psd / n_realizations, sc.bandwidth)


def mimo_aclr(sc: Scenario, n_realizations: int = 100, n_victims: int = 100,
              victim_pathloss: float = 1.0, nfft: int | None = None,
              bin_stride: int = 4) -> AclrReport:
    """Over-the-air leakage measure, averaged over fading and victims.

    Two estimates are formed: (a) a victim-Monte-Carlo route averaging the
    received PSD over `n_victims` independent victims per channel
    realization, and (b) a radiated-spectrum route using the average of
    trace S(f) over realizations.  Per-antenna ACLRs and the single-antenna
    baseline come along for free.

    The victim quadratic forms are evaluated on every `bin_stride`-th bin;
    the victim-averaged spectrum is smooth on the victim coherence bandwidth,
    so the coarse midpoint rule is far below the reporting tolerances.
    """
    if n_realizations < 1:
        raise ValueError("need at least one realization")
    nfft = nfft or sc.nfft
    b = sc.bandwidth
    mean_diag = None
    mean_victim = None
    freqs = None
    coarse = slice(None, None, bin_stride)
    for r in range(n_realizations):
        analysis = pipeline.transmit_spectrum(sc, realization=r, nfft=nfft)
        spectrum = analysis.spectrum
        freqs = spectrum.freqs
        diag = np.real(np.diagonal(spectrum.matrices, axis1=1, axis2=2))  # (F, M)
        mean_diag = diag if mean_diag is None else mean_diag + diag
        if n_victims > 0:
            victims = pipeline.draw_victims(sc, n_victims, realization=r)
            resp = channels.freq_response(victims, spectrum.freqs[coarse])  # (Fc, V, M)
            tmp = np.matmul(spectrum.matrices[coarse], resp.transpose(0, 2, 1))  # (Fc, M, V)
            s_theta = victim_pathloss * np.real(np.sum(np.conj(resp.transpose(0, 2, 1)) * tmp, axis=1))
            avg = s_theta.mean(axis=1)
            mean_victim = avg if mean_victim is None else mean_victim + avg
    mean_diag /= n_realizations

    per_antenna = np.array([aclr(freqs, mean_diag[:, m], b) for m in range(sc.n_antennas)])
    tx_route = aclr(freqs, mean_diag.sum(axis=1), b)
    victim_route = np.nan
    if n_victims > 0:
        mean_victim /= n_realizations
        victim_route = aclr(freqs[coarse], mean_victim, b)
    headline = victim_route if n_victims > 0 else tx_route
    return AclrReport(aclr_per_antenna=per_antenna, mimo_aclr=headline,
                      aclr_siso_equivalent=siso_baseline_aclr(sc, n_realizations, nfft=nfft),
                      n_realizations=n_realizations, mimo_aclr_tx_route=tx_route,
                      mimo_aclr_victim_route=victim_route, n_victims=n_victims)


@dataclass
class PatternResult:
    """Angular sweep of received band powers for a line-of-sight array."""

    angles_deg: np.ndarray
    p_in_band: np.ndarray
    p_ob_left: np.ndarray
    p_ob_right: np.ndarray
    user_angles_deg: np.ndarray
    tx_band: BandPowers  # band powers of the radiated spectrum S_tx
    peak_angles_deg: np.ndarray = field(default_factory=lambda: np.empty(0))

    @property
    def p_ob(self) -> np.ndarray:
        return np.maximum(self.p_ob_left, self.p_ob_right)

    def band_powers_at(self, i: int) -> BandPowers:
        return BandPowers(p_in_band=float(self.p_in_band[i]),
                          p_ob_left=float(self.p_ob_left[i]),
                          p_ob_right=float(self.p_ob_right[i]),
                          bandwidth=self.tx_band.bandwidth)


def radiation_pattern(sc: Scenario, angles_deg: np.ndarray | None = None,
                      analysis: pipeline.TransmitAnalysis | None = None) -> PatternResult:
    """Received in-band and adjacent-band power towards each probe direction.

    The probe at angle theta sees the steering-vector channel; with a
    frequency-flat victim the band integrals collapse onto band-integrated
    spectral matrices, so the sweep is a set of quadratic forms.
    """
    if sc.channel_kind != "los":
        raise ValueError("radiation patterns are defined for line-of-sight scenarios")
    if angles_deg is None:
        angles_deg = np.arange(-90.0, 90.0 + 1e-9, sc.pattern_resolution_deg)
    angles_deg = np.asarray(angles_deg, dtype=float)
    if analysis is None:
        analysis = pipeline.transmit_spectrum(sc)
    spectrum = analysis.spectrum
    left, mid, right = band_edges(spectrum.freqs, sc.bandwidth)
    df = spectrum.bin_width
    band_mats = [spectrum.matrices[sl].sum(axis=0) * df for sl in (left, mid, right)]
    steer = np.stack([channels.steering_vector(a, sc.n_antennas, sc.spacing_over_wavelength)
                      for a in np.deg2rad(angles_deg)])  # (A, M)
    powers = []
    for mat in band_mats:
        powers.append(np.real(np.sum(np.conj(steer) * (steer @ mat.T), axis=1)))
    p_left, p_in, p_right = powers

    trace_psd = spectra.s_tx(spectrum)
    tx_band = band_powers(spectrum.freqs, trace_psd, sc.bandwidth)
    p_ob = np.maximum(p_left, p_right)
    pk, _ = find_peaks(db10(p_ob), prominence=1.0)
    order = np.argsort(p_ob[pk])[::-1]
    peak_angles = angles_deg[pk[order]]
    return PatternResult(angles_deg=angles_deg, p_in_band=p_in, p_ob_left=p_left,
                         p_ob_right=p_right,
                         user_angles_deg=np.rad2deg(sc.resolved_user_angles()),
                         tx_band=tx_band, peak_angles_deg=peak_angles)


@dataclass
class CcdfTable:
    """Eigenvalue CCDF at one frequency, in dB relative to the mean eigenvalue."""

    freq: float
    levels_db: np.ndarray  # descending eigenvalues, dB re trace/M
    fraction_at_least: np.ndarray  # fraction of eigenvalues >= the level
    mean_eigenvalue: float

    def ccdf(self, level_db: float) -> float:
        """Fraction of eigenvalues at or above level_db."""
        return float(np.mean(self.levels_db >= level_db))


def eigen_ccdf(spectrum: spectra.SpectralMatrix, freqs) -> list[CcdfTable]:
    """Complementary CDF of the spectral-matrix eigenvalues at given frequencies."""
    tables = []
    for f in np.atleast_1d(freqs):
        i = spectrum.nearest_bin(float(f))
        vals = spectra.eigenvalues(spectrum, bins=[i])[0]
        mean = vals.mean()
        levels = db10(vals / mean)
        m = vals.size
        tables.append(CcdfTable(freq=float(spectrum.freqs[i]), levels_db=levels,
                                fraction_at_least=np.arange(1, m + 1) / m,
                                mean_eigenvalue=float(mean)))
    return tables


def c1_sweep(sc: Scenario, allocations, pathlosses=None, n_realizations: int = 20,
             nfft: int | None = None) -> dict:
    """MIMO-ACLR across power allocations / pathloss profiles.

    Returns per-configuration values and their spread (max - min, dB); the
    radiated-spectrum route is used (the victim route equals it on average).
    No threshold is asserted: the conjecture is recorded, not proven.
    """
    allocations = list(allocations)
    pathlosses = list(pathlosses) if pathlosses is not None else [None] * len(allocations)
    if len(pathlosses) != len(allocations):
        raise ValueError("need one pathloss profile per allocation (or none)")
    values = []
    for alloc, beta in zip(allocations, pathlosses):
        variant = sc.with_(allocation=tuple(alloc) if alloc is not None else None,
                           pathloss=tuple(beta) if beta is not None else None)
        report = mimo_aclr(variant, n_realizations=n_realizations, n_victims=0, nfft=nfft)
        values.append(report.mimo_aclr_tx_route)
    values = np.asarray(values)
    return {"aclr_db": values, "spread_db": float(values.max() - values.min())}
