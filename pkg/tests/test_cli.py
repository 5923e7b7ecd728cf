import json
import math

import numpy as np
import pytest
import yaml

from pbgladder import cli
from pbgladder.dynamics import Generator
from pbgladder.scenario import ScenarioError, build, list_presets, preset, preset_names, resolve

SMALL = {
    "name": "small",
    "dos": {"kind": "isotropic", "c_upper": 1.0, "c_lower": 1.5},
    "grid": {"strategy": "quadratic", "n_modes": 12, "delta_omega": 9.9 / 144},
    "atom": {"delta_upper": -1.31, "delta_lower": 0.0},
    "run": {"t_end": 10.0, "n_samples": 64},
}


def write_config(tmp_path, data, name="scenario.yaml"):
    path = tmp_path / name
    path.write_text(yaml.safe_dump(data))
    return str(path)


def read_csv(path):
    lines = path.read_text().splitlines()
    assert lines[0].startswith("# pbgladder")
    meta = json.loads(lines[1].removeprefix("# metadata: "))
    assert lines[2] == "t,P1,P2,P3,norm"
    data = np.array([[float(v) for v in line.split(",")] for line in lines[3:]])
    return meta, data


class TestPresets:
    def test_exactly_nine(self):
        assert preset_names() == ["fig2", "fig3a", "fig3b", "fig4a", "fig4b", "fig5a", "fig5b", "fig6", "fig7"]

    def test_each_validates(self):
        for name in preset_names():
            _, res, cfg = build(resolve(preset(name)))
            assert res.n_modes == 150
            assert cfg.upper_frequency < res.band[1]

    def test_caption_values(self):
        u1, u2 = 1.0, 1.5 ** (2 / 3)
        expected = {
            "fig2": (-u2, 0.0),
            "fig3a": (-2 * u2, u1),
            "fig3b": (-2 * u2, u2),
            "fig4a": (u2, -u1),
            "fig4b": (2 * u2, 3 * u1),
            "fig5a": (-2 * u2, 2 * u2),
            "fig5b": (-2 * u1, 2 * u1),
            "fig6": (-2 * u2, 4 * u2),
            "fig7": (0.1, 0.3),
        }
        for row in list_presets():
            d12, d23 = expected[row["name"]]
            assert row["delta_upper"] == pytest.approx(d12, rel=1e-15)
            assert row["delta_lower"] == pytest.approx(d23, rel=1e-15)
        fig7 = resolve(preset("fig7"))
        assert fig7.dos["gamma_upper"] == 0.5 and fig7.dos["half_width"] == 1.0
        assert (fig7.grid["low"], fig7.grid["up"]) == (-20.0, 20.0)
        assert fig7.units == "gamma2"
        assert resolve(preset("fig2")).dos["c_lower"] == 1.5

    def test_cli_lists(self, capsys):
        assert cli.main(["list-presets"]) == cli.EXIT_OK
        out = capsys.readouterr().out.splitlines()
        assert [line.split()[0] for line in out] == preset_names()


class TestScenario:
    def test_unknown_key(self):
        with pytest.raises(ScenarioError, match="unknown"):
            resolve(dict(SMALL, grid={"strategy": "quadratic", "nmodes": 3}))

    def test_modes_override_keeps_band_top(self):
        sc = resolve(preset("fig2"), {"n_modes": 300})
        _, res, _ = build(sc)
        assert res.band[1] == pytest.approx(9.9, rel=1e-12)
        assert res.n_modes == 300

    def test_coupling_ratio(self):
        sc = resolve(dict(SMALL, atom={"delta_upper": -1.0, "delta_lower": 0.0, "coupling_ratio": 2.0}))
        assert sc.dos["c_lower"] == 2.0

    @pytest.mark.parametrize(
        "patch",
        [
            {"dos": {"kind": "cubic"}},
            {"dos": {"kind": "lorentzian", "order": 5}},
            {"atom": {"delta_upper": "x", "delta_lower": 0.0}},
            {"run": {"t_end": -1.0}},
            {"run": {"t_end": 10.0, "tail_window": 1.5}},
            {"grid": {"strategy": "uniform"}},
        ],
    )
    def test_invalid(self, patch):
        with pytest.raises(ScenarioError):
            resolve(dict(SMALL, **patch))


class TestRun:
    def test_csv_outputs(self, tmp_path):
        out = tmp_path / "out"
        code = cli.main(["run", "--config", write_config(tmp_path, SMALL), "--out", str(out)])
        assert code == cli.EXIT_OK
        assert sorted(p.name for p in out.iterdir()) == ["small.csv", "small_report.json"]
        meta, data = read_csv(out / "small.csv")
        assert data.shape == (64, 5)
        np.testing.assert_allclose(data[:, 1:4].sum(axis=1), data[:, 4], atol=1e-12)
        assert meta["reservoir"]["shift_upper"] < 0
        assert meta["norm_drift"] < 1e-6
        assert meta["dynamic_regime_start"] == 5.0
        assert meta["scenario"]["units"] == "C1^(2/3)"
        report = json.loads((out / "small_report.json").read_text())
        assert set(report["trapped"]) == {"1", "2", "3"}

    def test_byte_identical(self, tmp_path):
        cfg = write_config(tmp_path, SMALL)
        cli.main(["run", "--config", cfg, "--out", str(tmp_path / "a")])
        cli.main(["run", "--config", cfg, "--out", str(tmp_path / "b")])
        for name in ("small.csv", "small_report.json"):
            assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()

    def test_rerun_from_metadata(self, tmp_path):
        out = tmp_path / "out"
        cli.main(["run", "--config", write_config(tmp_path, SMALL), "--out", str(out)])
        meta, _ = read_csv(out / "small.csv")
        files = cli.simulate(resolve(meta["scenario"]))
        assert files["small.csv"] == (out / "small.csv").read_text()

    def test_structured(self, tmp_path):
        out = tmp_path / "out"
        code = cli.main(["run", "--config", write_config(tmp_path, SMALL), "--out", str(out), "--format", "structured"])
        assert code == cli.EXIT_OK
        doc = json.loads((out / "small.json").read_text())
        assert set(doc) == {"metadata", "series", "report"}
        assert len(doc["series"]["P1"]) == 64
        again = cli.simulate(resolve(doc["metadata"]["scenario"]))
        assert again["small.json"] == (out / "small.json").read_text()

    def test_spectra_and_overrides(self, tmp_path):
        out = tmp_path / "out"
        cfg = write_config(tmp_path, SMALL)
        code = cli.main(["run", "--config", cfg, "--out", str(out), "--spectra", "--modes", "8", "--t-end", "6"])
        assert code == cli.EXIT_OK
        meta, data = read_csv(out / "small.csv")
        assert meta["reservoir"]["n_modes"] == 8 and data[-1, 0] == 6.0
        lines = (out / "small_spectra.csv").read_text().splitlines()
        assert lines[0] == "t," + ",".join(f"n_{j}" for j in range(1, 9))
        spectra = np.array([[float(v) for v in line.split(",")] for line in lines[1:]])
        np.testing.assert_allclose(spectra[:, 1:].sum(axis=1), data[:, 2] + 2 * data[:, 3], atol=1e-12)

    def test_env_out(self, tmp_path, monkeypatch):
        cfg = write_config(tmp_path, SMALL)
        monkeypatch.setenv(cli.OUT_ENV, str(tmp_path / "env"))
        assert cli.main(["run", "--config", cfg]) == cli.EXIT_OK
        assert (tmp_path / "env" / "small.csv").exists()
        assert cli.main(["run", "--config", cfg, "--out", str(tmp_path / "flag")]) == cli.EXIT_OK
        assert (tmp_path / "flag" / "small.csv").exists()

    def test_batch(self, tmp_path):
        a = write_config(tmp_path, SMALL, "a.yaml")
        b = write_config(tmp_path, dict(SMALL, name="other"), "b.yaml")
        code = cli.main(["run", "--config", a, "--config", b, "--jobs", "2", "--out", str(tmp_path / "out")])
        assert code == cli.EXIT_OK
        assert (tmp_path / "out" / "small.csv").exists() and (tmp_path / "out" / "other.csv").exists()


class TestExitCodes:
    def test_malformed(self, tmp_path):
        path = tmp_path / "bad.yaml"
        path.write_text("dos: [unclosed\n  : :")
        out = tmp_path / "out"
        assert cli.main(["run", "--config", str(path), "--out", str(out)]) == cli.EXIT_PARSE
        assert not out.exists()

    def test_not_a_mapping(self, tmp_path):
        path = tmp_path / "list.yaml"
        path.write_text("- 1\n- 2\n")
        assert cli.main(["run", "--config", str(path)]) == cli.EXIT_PARSE

    def test_validation(self, tmp_path):
        out = tmp_path / "out"
        data = dict(SMALL, atom={"delta_upper": 9.5, "delta_lower": 0.0})
        assert cli.main(["run", "--config", write_config(tmp_path, data), "--out", str(out)]) == cli.EXIT_VALIDATION
        assert not out.exists()
        assert cli.main(["run", "--preset", "fig9"]) == cli.EXIT_VALIDATION

    def test_integration(self, tmp_path):
        data = dict(SMALL, run={"t_end": 10.0, "rtol": 1e-2, "atol": 1e-2, "norm_tolerance": 1e-14})
        out = tmp_path / "out"
        assert cli.main(["run", "--config", write_config(tmp_path, data), "--out", str(out)]) == cli.EXIT_INTEGRATION
        assert not out.exists()

    def test_io(self, tmp_path):
        blocker = tmp_path / "file"
        blocker.write_text("")
        assert cli.main(["run", "--config", write_config(tmp_path, SMALL), "--out", str(blocker)]) == cli.EXIT_IO
        assert cli.main(["run", "--config", str(tmp_path / "missing.yaml")]) == cli.EXIT_IO

    def test_codes_distinct(self):
        codes = {cli.EXIT_PARSE, cli.EXIT_VALIDATION, cli.EXIT_INTEGRATION, cli.EXIT_IO}
        assert len(codes) == 4 and cli.EXIT_OK not in codes


class TestDumpAndVerify:
    def test_dump_reservoir(self, capsys):
        assert cli.main(["dump-reservoir", "--preset", "fig7"]) == cli.EXIT_OK
        lines = capsys.readouterr().out.splitlines()
        header = lines.index("index,omega,G1,G2")
        rows = np.array([[float(v) for v in line.split(",")] for line in lines[header + 1 :]])
        assert rows.shape == (150, 4)
        assert rows[1, 1] - rows[0, 1] == pytest.approx(40 / 150)

    def test_verify_passes(self, capsys):
        assert cli.main(["verify"]) == cli.EXIT_OK
        out = capsys.readouterr().out
        assert "FAIL" not in out
        for line in out.splitlines():
            if line.startswith("PASS  dense equivalence"):
                assert float(line.split("residual=")[1].split()[0]) < 1e-8

    def test_verify_detects_sign_fault(self, monkeypatch, capsys):
        original = Generator._assemble

        def corrupted(self):
            matrix = original(self).tolil()
            matrix[0, 1] = -matrix[0, 1]  # break -g1 / +g1 antisymmetry
            return matrix.tocsr()

        monkeypatch.setattr(Generator, "_assemble", corrupted)
        assert cli.main(["verify"]) == cli.EXIT_VERIFY
        out = capsys.readouterr().out
        assert any(line.startswith("FAIL  anti-hermiticity") for line in out.splitlines())

    def test_verify_residuals(self):
        checks = cli.verify_checks()
        assert all(math.isfinite(r) and r < thr for _, r, thr in checks)
        names = " ".join(name for name, _, _ in checks)
        for key in ("dense equivalence", "rabi", "grid identity", "shift closed form"):
            assert key in names
