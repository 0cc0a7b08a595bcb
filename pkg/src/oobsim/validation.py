"""Analytical-vs-Monte-Carlo validation gates.

Each gate computes a measured deviation and compares it to its tolerance;
`run_validation` executes the whole battery for a scenario and is what the
CLI's validate verb (exit code 3 on failure) is built on.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import amplifier, metrics, montecarlo, pipeline, spectra
from .scenario import Scenario
from .signals import LagCorrelation, SampledSignal


@dataclass
class GateResult:
    name: str
    value: float
    tolerance: float
    passed: bool
    detail: str = ""

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return f"{status}  {self.name}: {self.value:.4g} (tol {self.tolerance:g}) {self.detail}"


def _gate(name, value, tolerance, detail="") -> GateResult:
    return GateResult(name=name, value=float(value), tolerance=float(tolerance),
                      passed=bool(value <= tolerance), detail=detail)


def gate_moment_kernels(n_samples: int = 1_000_000, seed: int = 0) -> list[GateResult]:
    """Closed-form Gaussian moment kernels vs the sampling oracle (1% relative)."""
    out = []
    r, va, vb = 0.6 + 0.4j, 1.0, 2.5
    for i, (pa_, pb) in enumerate([(1, 1), (1, 2), (2, 1), (2, 2)]):
        closed = amplifier.gaussian_moment(r, va, vb, pa_, pb)
        est = montecarlo.moment_oracle(r, va, vb, pa_, pb, n_samples, seed + i)
        err = abs(est - closed) / abs(closed)
        out.append(_gate(f"moment kernel ({pa_},{pb})", err, 0.01, "rel err vs oracle"))
    closed = amplifier.gaussian_moment(1.0, 1.0, 1.0, 2, 2)  # sixth moment, 6 sigma^6
    est = montecarlo.moment_oracle(1.0, 1.0, 1.0, 2, 2, n_samples, seed + 17)
    out.append(_gate("moment kernel 6th-moment", abs(est - closed) / 6.0, 0.01,
                     "rel err vs oracle"))
    return out


def gate_toy_corr(sc: Scenario, n_samples: int = 1_000_000, seed: int = 12345,
                  corrupt_b2_sign: bool = False) -> GateResult:
    """Amplified correlation of an M=2 stationary Gaussian toy vs Monte-Carlo.

    The negative control flips the sign of the cubic branch in the analytical
    path only, which must blow the 1% gate.
    """
    rng = np.random.default_rng(seed)
    c0 = np.array([[1.0, 0.4j], [0.2, 0.9]], dtype=complex)
    c1 = np.array([[0.3, 0.0], [0.5j, -0.2]], dtype=complex)
    mats = np.zeros((3, 2, 2), dtype=complex)
    mats[1] = np.conj(c0) @ c0.T + np.conj(c1) @ c1.T
    mats[2] = np.conj(c0) @ c1.T
    mats[0] = mats[2].conj().T
    rxx = LagCorrelation(lags=np.arange(-1, 2), matrices=mats, lag_spacing=0.2)

    pa = pipeline.build_pa(sc)
    op = amplifier.calibrate_1db(pa, np.real(np.diagonal(rxx.at(0))))
    w = (rng.standard_normal((2, n_samples + 1)) + 1j * rng.standard_normal((2, n_samples + 1))) / np.sqrt(2)
    x = c0 @ w[:, 1:] + c1 @ w[:, :-1]
    y = amplifier.amplify(op.scales(2)[:, None] * x, pa)
    est = montecarlo.empirical_corr(SampledSignal(samples=y, sample_rate=5.0), max_lag=1)

    pa_analytic = pa
    if corrupt_b2_sign:
        coeff = np.array(pa.coefficients, dtype=complex)
        coeff[..., 1] = -coeff[..., 1]
        pa_analytic = amplifier.PAModel(coefficients=coeff)
    ryy = amplifier.propagate_corr(rxx, pa_analytic, op)
    err = np.abs(est.matrices - ryy.matrices).max() / np.abs(ryy.matrices).max()
    return _gate("amplified correlation vs waveform (M=2 toy)", err, 0.01,
                 "max entry err / peak")


def gate_trace_psd(sc: Scenario, mc: montecarlo.McConfig, realization: int = 0) -> GateResult:
    """Analytical radiated PSD vs Welch trace over [-3B/2, 3B/2] (0.5 dB).

    The analytical side uses the polyphase-exact propagation (exact for
    modulated Gaussian symbols) smoothed by the Welch window's known spectral
    response, so the comparison is estimate vs estimator expectation; the raw
    unsmoothed deviation is reported alongside.  One bin at each band edge is
    excluded.
    """
    nfft = mc.welch_segment
    channel = pipeline.draw_user_channel(sc, realization)
    freqs, psd, _ = pipeline.radiated_spectra(sc, channel=channel, nfft=nfft,
                                              exact_cyclo=True)
    trace_an = psd.sum(axis=1)
    trace_smooth = montecarlo.expected_welch_psd(trace_an, nfft)
    f_mc, psd_mc = montecarlo.trace_psd_streaming(sc, mc, channel=channel,
                                                  realization=realization)
    trace_mc = psd_mc.sum(axis=1)
    b = sc.bandwidth
    df = freqs[1] - freqs[0]
    mask = np.abs(freqs) <= 1.5 * b + 0.5 * df
    for edge in (-1.5 * b, -0.5 * b, 0.5 * b, 1.5 * b):
        mask &= np.abs(freqs - edge) > 0.5 * df  # one bin out at each edge
    dev = np.abs(10.0 * np.log10(trace_mc[mask] / trace_smooth[mask]))
    raw = np.abs(10.0 * np.log10(trace_mc[mask] / trace_an[mask]))
    worst = freqs[mask][int(np.argmax(dev))]
    return _gate("radiated PSD vs Welch trace", dev.max(), 0.5,
                 f"max |dev| dB at f={worst:.3f}/T (unsmoothed {raw.max():.2f} dB)")


def gate_aclr_consistency(sc: Scenario, n_realizations: int = 8,
                          n_victims: int = 50) -> list[GateResult]:
    """The leakage-measure identities: victim route = radiated route =
    per-antenna mean = single-antenna baseline (0.2/0.3 dB)."""
    report = metrics.mimo_aclr(sc, n_realizations=n_realizations, n_victims=n_victims)
    out = [
        _gate("MIMO-ACLR victim route vs radiated route",
              abs(report.mimo_aclr_victim_route - report.mimo_aclr_tx_route), 0.2, "dB"),
        _gate("MIMO-ACLR vs mean per-antenna",
              abs(report.mimo_aclr - report.aclr_per_antenna.mean()), 0.3, "dB"),
        _gate("MIMO-ACLR vs single-antenna baseline",
              abs(report.mimo_aclr - report.aclr_siso_equivalent), 0.3, "dB"),
    ]
    return out


def gate_linear_floor(sc: Scenario) -> GateResult:
    """With the cubic branch removed the leakage must fall to the truncation floor."""
    linear = sc.with_(pa_coefficients=(sc.pa_coefficients[0],), operating_point="unit")
    value = metrics.siso_baseline_aclr(linear)
    return _gate("linear-amplifier leakage floor", value, -50.0, "dB ACLR")


def gate_scale_invariance(sc: Scenario) -> GateResult:
    freqs, psd = pipeline.siso_reference_psd(sc)
    a = metrics.aclr(freqs, psd, sc.bandwidth)
    b = metrics.aclr(freqs, 4.0 * psd, sc.bandwidth)
    return _gate("ACLR scale invariance", abs(a - b), 1e-9, "dB")


def gate_structural(sc: Scenario, n_victims: int = 100) -> list[GateResult]:
    """Hermitian/PSD invariants and the worst-case bound on random victims."""
    analysis = pipeline.transmit_spectrum(sc)
    s = analysis.spectrum
    herm = s.hermitian_error() / np.abs(s.matrices).max()
    out = [_gate("spectral matrices Hermitian", herm, 1e-10, "rel error")]
    try:
        spectra.eigenvalues(s)
        out.append(_gate("spectral matrices PSD", 0.0, 1.0, "eigenvalue floor"))
    except ValueError as exc:
        out.append(GateResult("spectral matrices PSD", np.inf, 1.0, False, str(exc)))

    smax = spectra.s_max(s)
    victims = pipeline.draw_victims(sc, n_victims)
    resp = pipeline.stacked_victim_responses(victims, s.freqs)  # (F, V, M)
    tmp = np.matmul(s.matrices, resp.transpose(0, 2, 1))
    s_theta = np.real(np.sum(np.conj(resp.transpose(0, 2, 1)) * tmp, axis=1))  # (F, V)
    bound = np.sum(np.abs(resp) ** 2, axis=2) * smax[:, None]
    excess = float((s_theta - bound).max())
    out.append(_gate("worst-case received-PSD bound", excess, 1e-9,
                     f"max excess over {n_victims} victims/bin"))

    # uncorrelated antennas stay uncorrelated through the amplifier
    rng = np.random.default_rng(3)
    diag = np.zeros((5, 3, 3), dtype=complex)
    for v in range(3):
        d = 0.5**v * (rng.standard_normal(3) + 1j * rng.standard_normal(3))
        if v == 0:
            d = np.abs(d)
        diag[2 + v] = np.diag(d)
        diag[2 - v] = np.diag(np.conj(d))
    rxx = LagCorrelation(lags=np.arange(-2, 3), matrices=diag, lag_spacing=0.2)
    ryy = amplifier.propagate_corr(rxx, pipeline.build_pa(sc), amplifier.OperatingPoint.unit())
    mask = ~np.eye(3, dtype=bool)
    out.append(_gate("diagonal input keeps the output diagonal",
                     float(np.abs(ryy.matrices[:, mask]).max()), 0.0, "max |offdiag|"))
    return out


def run_validation(sc: Scenario, mc: montecarlo.McConfig | None = None,
                   n_realizations: int = 8, n_victims: int = 50) -> list[GateResult]:
    """Full gate battery; every gate must pass for a healthy build."""
    mc = mc or montecarlo.McConfig(n_symbols=200_000, welch_segment=sc.nfft)
    gates: list[GateResult] = []
    gates += gate_moment_kernels()
    gates.append(gate_toy_corr(sc))
    gates.append(gate_trace_psd(sc, mc))
    gates += gate_aclr_consistency(sc, n_realizations=n_realizations, n_victims=n_victims)
    gates.append(gate_linear_floor(sc))
    gates.append(gate_scale_invariance(sc))
    gates += gate_structural(sc)
    return gates
