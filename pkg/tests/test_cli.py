import numpy as np
import pytest

from oobsim import cli
from oobsim.scenario import Scenario


def write_config(tmp_path, **kw):
    base = dict(antennas=12, users=2, channel="rayleigh", channel_taps=10,
                span=8, nfft=1024, seed=6)
    base.update(kw)
    text = f"""
[system]
antennas = {base['antennas']}
users = {base['users']}
channel = {base['channel']}
channel_taps = {base['channel_taps']}
{f"user_angles_deg = {base['user_angles_deg']}" if 'user_angles_deg' in base else ''}

[pulse]
span = {base['span']}

[seeds]
seed = {base['seed']}

[output]
nfft = {base['nfft']}
"""
    path = tmp_path / "scenario.cfg"
    path.write_text(text)
    return path


class TestFig1:
    def test_outputs_and_determinism(self, tmp_path):
        cfg = write_config(tmp_path)
        out_a, out_b = tmp_path / "a", tmp_path / "b"
        assert cli.main(["--config", str(cfg), "--out", str(out_a), "fig1"]) == 0
        assert cli.main(["--config", str(cfg), "--out", str(out_b), "fig1"]) == 0
        expected = ["psd_tx.csv", "psd_weakest_user.csv", "psd_random_victim.csv",
                    "psd_max.csv", "summary.txt", "fig1.svg"]
        for name in expected:
            assert (out_a / name).exists()
        for name in expected:
            if name.endswith(".csv"):
                assert (out_a / name).read_bytes() == (out_b / name).read_bytes()

    def test_csv_declares_reference(self, tmp_path):
        cfg = write_config(tmp_path)
        out = tmp_path / "o"
        cli.main(["--config", str(cfg), "--out", str(out), "fig1"])
        head = (out / "psd_tx.csv").read_text().splitlines()[0]
        assert head.startswith("#") and "dB reference" in head

    def test_requires_rayleigh(self, tmp_path):
        cfg = write_config(tmp_path, channel="los", channel_taps=1,
                           user_angles_deg="-20, 30")
        assert cli.main(["--config", str(cfg), "--out", str(tmp_path / "x"), "fig1"]) == 2


class TestFig2:
    def test_outputs(self, tmp_path):
        cfg = write_config(tmp_path, channel="los", channel_taps=1,
                           user_angles_deg="-25, 20")
        out = tmp_path / "o"
        assert cli.main(["--config", str(cfg), "--out", str(out), "fig2"]) == 0
        assert (out / "pattern.csv").exists()
        assert (out / "fig2.svg").exists()
        body = (out / "pattern.csv").read_text().splitlines()
        header = next(l for l in body if not l.startswith("#"))
        assert header == "angle_deg,P_ib_dB,P_ob_dB"
        summary = (out / "summary.txt").read_text()
        assert "peak_adjacent_gain_db" in summary


class TestFig3:
    def test_outputs(self, tmp_path):
        cfg = write_config(tmp_path)
        out = tmp_path / "o"
        assert cli.main(["--config", str(cfg), "--out", str(out), "fig3"]) == 0
        assert (out / "ccdf_K2.csv").exists()
        assert (out / "ccdf_K1.csv").exists()
        assert (out / "fig3.svg").exists()


class TestValidateVerb:
    def test_midsize_scenario_passes(self, tmp_path):
        # large enough that the single-antenna-equality property holds
        # (its finite-size gap shrinks like 1/(K L))
        cfg = write_config(tmp_path, antennas=24, users=8, channel_taps=75,
                           span=32, nfft=4096)
        out = tmp_path / "v"
        code = cli.main(["--config", str(cfg), "--out", str(out),
                         "--mc-symbols", "100000", "validate",
                         "--realizations", "8", "--victims", "32"])
        assert code == 0
        text = (out / "validation.txt").read_text()
        assert "FAIL" not in text

    def test_negative_control_fails(self):
        # corrupting the analytical cubic branch must blow the waveform gate
        from oobsim.validation import gate_toy_corr

        sc = Scenario(n_antennas=4, n_users=2, channel_taps=5, span=8, seed=1)
        good = gate_toy_corr(sc, n_samples=200_000)
        bad = gate_toy_corr(sc, n_samples=200_000, corrupt_b2_sign=True)
        assert good.passed
        assert not bad.passed


class TestMisc:
    def test_config_error_exit_code(self, tmp_path):
        path = tmp_path / "bad.cfg"
        path.write_text("[system]\nantennas = -3\nusers = 10\n")
        assert cli.main(["--config", str(path), "fig1"]) == 2

    def test_aclr_verb(self, tmp_path):
        cfg = write_config(tmp_path)
        out = tmp_path / "o"
        code = cli.main(["--config", str(cfg), "--out", str(out), "aclr",
                         "--realizations", "2", "--victims", "8"])
        assert code == 0
        assert (out / "aclr_per_antenna.csv").exists()
        text = (out / "summary.txt").read_text()
        assert "mimo_aclr_db" in text and "siso_baseline_aclr_db" in text

    def test_sweep_c1_verb(self, tmp_path):
        cfg = write_config(tmp_path)
        out = tmp_path / "o"
        code = cli.main(["--config", str(cfg), "--out", str(out), "sweep-c1",
                         "--realizations", "2"])
        assert code == 0
        assert (out / "c1_sweep.csv").exists()
        assert "spread_db" in (out / "summary.txt").read_text()
