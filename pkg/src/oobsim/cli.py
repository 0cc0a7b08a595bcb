"""Command-line runners for the reference experiments.

Verbs: fig1, fig2, fig3 (the three headline experiments), validate (the
analytical-vs-Monte-Carlo gate battery), aclr (leakage report) and sweep-c1
(power-allocation sensitivity).  Outputs are CSV tables with `#` header
comments (the dB reference is always stated), a key = value summary.txt and
a static SVG figure per run.  Identical scenario + seeds give byte-identical
CSVs.

Exit codes: 0 success, 2 config error, 3 validation-gate failure.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import matplotlib
import numpy as np

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)

from . import metrics, pipeline, spectra, validation
from .montecarlo import McConfig
from .scenario import ConfigError, Scenario, load_scenario
from .util import db10

SVG_METADATA = {"Date": None}  # keep SVG output reproducible


def _write_csv(path: Path, comments: list[str], columns: dict) -> None:
    names = list(columns)
    arrays = [np.atleast_1d(np.asarray(columns[n])) for n in names]
    with open(path, "w", newline="\n") as fh:
        for c in comments:
            fh.write(f"# {c}\n")
        fh.write(",".join(names) + "\n")
        for row in zip(*arrays):
            fh.write(",".join(format(v, ".17g") if isinstance(v, (float, np.floating))
                     else str(v) for v in row) + "\n")


def _write_summary(path: Path, entries: dict) -> None:
    with open(path, "w", newline="\n") as fh:
        for key, value in entries.items():
            if isinstance(value, (float, np.floating)):
                fh.write(f"{key} = {format(value, '.10g')}\n")
            elif isinstance(value, (list, tuple, np.ndarray)):
                fh.write(f"{key} = {', '.join(format(float(v), '.10g') for v in value)}\n")
            else:
                fh.write(f"{key} = {value}\n")


def _outdir(sc: Scenario, override: str | None) -> Path:
    out = Path(override or sc.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def run_fig1(sc: Scenario, out_dir, nfft: int | None = None) -> dict:
    """Radiated, weakest-user, random-victim and worst-case spectra (Rayleigh)."""
    if sc.channel_kind != "rayleigh":
        raise ConfigError("the spectra experiment expects a Rayleigh scenario")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    analysis = pipeline.transmit_spectrum(sc, nfft=nfft)
    s = analysis.spectrum
    b = sc.bandwidth
    f_over_b = s.freqs / b

    trace = spectra.s_tx(s)
    left, mid, right = metrics.band_edges(s.freqs, b)
    ref = trace[mid].mean()  # 0 dB = in-band average of the radiated PSD

    rx_users = pipeline.user_received_psds(analysis)
    p_ib_users = rx_users[mid].sum(axis=0) * s.bin_width
    weakest = int(np.argmin(p_ib_users))

    victim = pipeline.draw_victims(sc, 1)
    resp = pipeline.stacked_victim_responses(victim, s.freqs)[:, 0, :]
    rx_victim = spectra.received_psd(s, resp)

    smax = spectra.s_max(s)
    worst = sc.n_antennas * smax  # E||h||^2 = M for unit-power fading

    tx_band = metrics.band_powers(s.freqs, trace, b)
    weakest_gain = 10.0 * np.log10(p_ib_users[weakest] / tx_band.p_in_band)
    # worst-case adjacent gain: power-weighted over the adjacent band, i.e.
    # the ratio of band integrals (a flat per-bin average would overweight
    # the skirt bins carrying negligible power)
    adjacent = np.r_[np.arange(left.start, left.stop), np.arange(right.start, right.stop)]
    worst_gain = float(10.0 * np.log10(sc.n_antennas * smax[adjacent].sum() / trace[adjacent].sum()))

    ref_comment = "dB reference: in-band average of the radiated PSD S_tx"
    _write_csv(out / "psd_tx.csv", [ref_comment], {
        "freq_over_B": f_over_b, "value_dB": db10(trace / ref)})
    _write_csv(out / "psd_weakest_user.csv",
               [ref_comment, f"weakest user index {weakest} (smallest in-band power)"],
               {"freq_over_B": f_over_b, "value_dB": db10(rx_users[:, weakest] / ref)})
    _write_csv(out / "psd_random_victim.csv", [ref_comment],
               {"freq_over_B": f_over_b, "value_dB": db10(rx_victim / ref)})
    _write_csv(out / "psd_max.csv",
               [ref_comment, "worst case: M * principal eigenvalue of S(f)"],
               {"freq_over_B": f_over_b, "value_dB": db10(worst / ref)})

    summary = {
        "antennas": sc.n_antennas, "users": sc.n_users, "seed": sc.seed,
        "weakest_user_inband_gain_db": float(weakest_gain),
        "worst_case_adjacent_gain_db": float(worst_gain),
        "inband_tx_power": float(tx_band.p_in_band),
        "adjacent_tx_power": float(tx_band.p_ob),
    }
    _write_summary(out / "summary.txt", summary)

    fig, ax = plt.subplots(figsize=(7.5, 4.0))
    ax.plot(f_over_b, db10(trace / ref), "k", label="radiated $S_{tx}$")
    ax.plot(f_over_b, db10(worst / ref), label="worst case $M S_{max}$")
    ax.plot(f_over_b, db10(rx_users[:, weakest] / ref), label="weakest user")
    ax.plot(f_over_b, db10(rx_victim / ref), alpha=0.7, label="random victim")
    ax.set_xlabel("frequency $f/B$")
    ax.set_ylabel("PSD [dB]")
    ax.set_xlim(-1.6, 1.6)
    ax.set_ylim(max(db10(trace / ref).min(), -70) - 5, db10(worst / ref).max() + 5)
    ax.grid(True, alpha=0.3)
    ax.legend(loc="upper right", fontsize=8)
    fig.tight_layout()
    fig.savefig(out / "fig1.svg", metadata=SVG_METADATA)
    plt.close(fig)
    return summary


def run_fig2(sc: Scenario, out_dir) -> dict:
    """Adjacent-band radiation pattern of a line-of-sight array."""
    if sc.channel_kind != "los":
        raise ConfigError("the radiation-pattern experiment expects a LOS scenario")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    analysis = pipeline.transmit_spectrum(sc)
    pattern = metrics.radiation_pattern(sc, analysis=analysis)

    tx_ib = pattern.tx_band.p_in_band
    tx_ob = pattern.tx_band.p_ob
    p_ib_db = db10(pattern.p_in_band / tx_ib)
    p_ob_db = db10(pattern.p_ob / tx_ob)

    k = sc.n_users
    peak_gain = float(p_ob_db.max())
    user_angles = pattern.user_angles_deg
    # in-band gain towards the served users
    at_users = [np.argmin(np.abs(pattern.angles_deg - a)) for a in user_angles]
    inband_gain_at_users = p_ib_db[at_users]

    pobmax = metrics.p_ob_max(analysis.spectrum, sc.bandwidth)
    pobmax_gain = float(10.0 * np.log10(sc.n_antennas * pobmax / tx_ob))

    _write_csv(out / "pattern.csv",
               ["dB references: P_ib vs transmitted in-band power, "
                "P_ob vs transmitted adjacent-band power"],
               {"angle_deg": pattern.angles_deg, "P_ib_dB": p_ib_db, "P_ob_dB": p_ob_db})
    summary = {
        "antennas": sc.n_antennas, "users": sc.n_users, "seed": sc.seed,
        "peak_adjacent_gain_db": peak_gain,
        "pobmax_gain_db": pobmax_gain,
        "peak_angles_deg": pattern.peak_angles_deg[: 2 * k],
        "user_angles_deg": user_angles,
        "inband_gain_at_users_db": inband_gain_at_users,
    }
    _write_summary(out / "summary.txt", summary)

    fig, ax = plt.subplots(figsize=(7.5, 4.0))
    ax.plot(pattern.angles_deg, p_ob_db, label="received adjacent-band power")
    for a in user_angles:
        ax.axvline(a, color="gray", lw=0.6, alpha=0.6)
    ax.axhline(0.0, color="k", lw=0.8, label="transmitted adjacent-band power")
    ax.set_xlabel("angle [deg]")
    ax.set_ylabel("$P_{ob}(\\theta)$ [dB]")
    ax.grid(True, alpha=0.3)
    ax.legend(loc="lower right", fontsize=8)
    fig.tight_layout()
    fig.savefig(out / "fig2.svg", metadata=SVG_METADATA)
    plt.close(fig)
    return summary


def _ccdf_rows(sc: Scenario, spectrum, freqs_over_b):
    tables = metrics.eigen_ccdf(spectrum, [f * sc.bandwidth for f in freqs_over_b])
    rows = {"freq_over_B": [], "eig_index": [], "level_dB": [], "fraction_at_least": []}
    for f_b, table in zip(freqs_over_b, tables):
        m = table.levels_db.size
        rows["freq_over_B"].extend([float(f_b)] * m)
        rows["eig_index"].extend(range(1, m + 1))
        rows["level_dB"].extend(table.levels_db)
        rows["fraction_at_least"].extend(table.fraction_at_least)
    return tables, rows


def run_fig3(sc: Scenario, out_dir, nfft: int | None = None) -> dict:
    """Eigenvalue CCDFs of the cross-spectral matrix, multiuser and single user."""
    if sc.channel_kind != "rayleigh":
        raise ConfigError("the eigenvalue experiment expects a Rayleigh scenario")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    sc_single = sc.with_(n_users=1, allocation=None, pathloss=None)

    multi = pipeline.transmit_spectrum(sc, nfft=nfft)
    single = pipeline.transmit_spectrum(sc_single, nfft=nfft)
    freqs_over_b = sc.ccdf_freqs_over_b

    tables_multi, rows_multi = _ccdf_rows(sc, multi.spectrum, freqs_over_b)
    tables_single, rows_single = _ccdf_rows(sc_single, single.spectrum, freqs_over_b)
    comment = "levels are dB relative to the mean eigenvalue S_tx(f)/M at each frequency"
    _write_csv(out / f"ccdf_K{sc.n_users}.csv", [comment], rows_multi)
    _write_csv(out / "ccdf_K1.csv", [comment], rows_single)

    # headline numbers: user-group separation in-band, edge CCDF and the
    # strongest out-of-band direction of the single-user system
    k = sc.n_users
    inband = tables_multi[0]
    separation = float(inband.levels_db[:k].mean() - inband.levels_db[k:].mean())
    midpoint = 0.5 * (inband.levels_db[:k].mean() + inband.levels_db[k:].mean())
    top_group = int(np.sum(inband.levels_db > midpoint))

    edge = metrics.eigen_ccdf(single.spectrum, [0.5 * sc.bandwidth])[0]
    ccdf_2db = edge.ccdf(2.0)

    ratio = spectra.worst_case_ratio(single.spectrum)
    left, mid, right = metrics.band_edges(single.spectrum.freqs, sc.bandwidth)
    adjacent = np.r_[np.arange(left.start, left.stop), np.arange(right.start, right.stop)]
    single_oob_gain = float(np.mean(ratio[adjacent]))

    summary = {
        "antennas": sc.n_antennas, "users": sc.n_users, "seed": sc.seed,
        "ccdf_freqs_over_B": list(freqs_over_b),
        "inband_user_eigenvalue_count": top_group,
        "inband_user_group_separation_db": separation,
        "single_user_ccdf_2db_at_band_edge": float(ccdf_2db),
        "single_user_adjacent_gain_db": single_oob_gain,
    }
    _write_summary(out / "summary.txt", summary)

    fig, ax = plt.subplots(figsize=(7.5, 4.0))
    for f_b, table in zip(freqs_over_b, tables_multi):
        ax.step(table.levels_db[::-1], table.fraction_at_least[::-1],
                label=f"K={sc.n_users}, f/B={f_b}")
        ax.plot(0.0, table.ccdf(0.0), "o", ms=3, color=ax.lines[-1].get_color())
    for f_b, table in zip(freqs_over_b, tables_single):
        ax.step(table.levels_db[::-1], table.fraction_at_least[::-1], "--",
                label=f"K=1, f/B={f_b}")
        ax.plot(0.0, table.ccdf(0.0), "o", ms=3, color=ax.lines[-1].get_color())
    ax.set_xlabel("eigenvalue relative to the mean [dB]")
    ax.set_ylabel("fraction of eigenvalues at or above")
    ax.set_yscale("log")
    ax.grid(True, alpha=0.3)
    ax.legend(fontsize=7, ncol=2)
    fig.tight_layout()
    fig.savefig(out / "fig3.svg", metadata=SVG_METADATA)
    plt.close(fig)
    return summary


def run_validate(sc: Scenario, out_dir, mc_symbols: int = 200_000,
                 n_realizations: int = 8, n_victims: int = 50) -> int:
    """Run every analytical-vs-Monte-Carlo gate; nonzero exit on failure."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    mc = McConfig(n_symbols=mc_symbols, welch_segment=sc.nfft)
    gates = validation.run_validation(sc, mc, n_realizations=n_realizations,
                                      n_victims=n_victims)
    lines = [g.line() for g in gates]
    for line in lines:
        print(line)
    with open(out / "validation.txt", "w", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")
    return 0 if all(g.passed for g in gates) else 3


def run_aclr(sc: Scenario, out_dir, n_realizations: int = 20, n_victims: int = 100) -> dict:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    report = metrics.mimo_aclr(sc, n_realizations=n_realizations, n_victims=n_victims)
    _write_csv(out / "aclr_per_antenna.csv",
               ["per-antenna adjacent-channel leakage ratio",
                "dB reference: ratio of adjacent-band to in-band power (dimensionless)"],
               {"antenna": np.arange(sc.n_antennas),
                "aclr_dB": report.aclr_per_antenna})
    summary = {
        "mimo_aclr_db": report.mimo_aclr,
        "mimo_aclr_victim_route_db": report.mimo_aclr_victim_route,
        "mimo_aclr_tx_route_db": report.mimo_aclr_tx_route,
        "mean_per_antenna_aclr_db": float(report.aclr_per_antenna.mean()),
        "siso_baseline_aclr_db": report.aclr_siso_equivalent,
        "n_realizations": report.n_realizations,
        "n_victims": report.n_victims,
    }
    _write_summary(out / "summary.txt", summary)
    for key, value in summary.items():
        print(f"{key} = {value}")
    return summary


def run_sweep_c1(sc: Scenario, out_dir, n_realizations: int = 20) -> dict:
    """Leakage sensitivity to power allocation and pathloss profiles."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    k = sc.n_users
    one_strong = [0.5] + [0.5 / (k - 1)] * (k - 1) if k > 1 else [1.0]
    ramp = list(np.arange(1, k + 1, dtype=float))
    allocations = [None, one_strong, ramp]
    labels = ["equal", "one_strong", "ramp"]
    pathlosses = [None, None, None]
    if k > 1:
        allocations.append(None)
        labels.append("equal_beta_ramp")
        pathlosses.append(list(np.linspace(1.0, 4.0, k)))
    result = metrics.c1_sweep(sc, allocations, pathlosses, n_realizations=n_realizations)
    _write_csv(out / "c1_sweep.csv",
               ["MIMO-ACLR (radiated route) per power-allocation/pathloss profile",
                "values in dB; spread quantifies the conjectured insensitivity"],
               {"label": labels, "aclr_dB": result["aclr_db"]})
    summary = {"spread_db": result["spread_db"],
               **{f"aclr_{lab}_db": float(v) for lab, v in zip(labels, result["aclr_db"])}}
    _write_summary(out / "summary.txt", summary)
    print(f"spread_db = {result['spread_db']:.4g}")
    return summary


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="oobsim",
        description="Out-of-band radiation of multi-antenna transmitters: "
                    "analytical spectra, leakage metrics and Monte-Carlo validation.")
    parser.add_argument("--config", type=str, default=None, help="scenario config file")
    parser.add_argument("--seed", type=int, default=None, help="override the scenario seed")
    parser.add_argument("--out", type=str, default=None, help="output directory")
    parser.add_argument("--mc-symbols", type=int, default=200_000,
                        help="symbols per Monte-Carlo run (validate)")
    parser.add_argument("--threads", type=int, default=None,
                        help="cap BLAS/FFT worker threads")
    sub = parser.add_subparsers(dest="verb", required=True)
    sub.add_parser("fig1", help="radiated/received spectra (Rayleigh)")
    sub.add_parser("fig2", help="adjacent-band radiation pattern (LOS)")
    sub.add_parser("fig3", help="eigenvalue CCDFs (Rayleigh)")
    p_val = sub.add_parser("validate", help="analytical-vs-Monte-Carlo gates")
    p_val.add_argument("--realizations", type=int, default=8)
    p_val.add_argument("--victims", type=int, default=50)
    p_aclr = sub.add_parser("aclr", help="MIMO-ACLR report")
    p_aclr.add_argument("--realizations", type=int, default=20)
    p_aclr.add_argument("--victims", type=int, default=100)
    p_c1 = sub.add_parser("sweep-c1", help="allocation/pathloss sensitivity sweep")
    p_c1.add_argument("--realizations", type=int, default=20)
    return parser


def _scenario_for(args) -> Scenario:
    overrides = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.config is not None:
        sc = load_scenario(args.config, overrides)
    else:
        sc = Scenario(**overrides)
    if args.verb == "fig2" and args.config is None:
        sc = sc.with_(channel_kind="los", channel_taps=1)
    return sc


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    if args.threads is not None:
        try:
            import threadpoolctl

            threadpoolctl.threadpool_limits(args.threads)
        except ImportError:
            print("threadpoolctl not installed; --threads ignored", file=sys.stderr)
    try:
        sc = _scenario_for(args)
        out = _outdir(sc, args.out)
        if args.verb == "fig1":
            run_fig1(sc, out)
        elif args.verb == "fig2":
            run_fig2(sc, out)
        elif args.verb == "fig3":
            run_fig3(sc, out)
        elif args.verb == "validate":
            return run_validate(sc, out, mc_symbols=args.mc_symbols,
                                n_realizations=args.realizations,
                                n_victims=args.victims)
        elif args.verb == "aclr":
            run_aclr(sc, out, n_realizations=args.realizations, n_victims=args.victims)
        elif args.verb == "sweep-c1":
            run_sweep_c1(sc, out, n_realizations=args.realizations)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
