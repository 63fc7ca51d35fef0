import json

import numpy as np
import pytest

from qmeas import cli

COMMANDS = ("truncate", "recur", "cascade", "register", "finalstate", "born",
            "reduce", "ambiguity", "dispersionless", "chsh", "feasible",
            "oracle-check", "appc-report")


def run_cli(capsys, *argv):
    code = cli.main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


def strip_version_header(text: str) -> str:
    lines = text.splitlines()
    assert lines[0].startswith("# qmeas ")
    return "\n".join(lines[1:])


class TestConfig:
    def test_ini_roundtrip(self):
        cfg = cli.ExperimentConfig(
            command="truncate",
            sections={"model": {"n": "100", "g": "0.5"}, "grid": {"points": "7"}})
        back = cli.ExperimentConfig.from_ini(cfg.to_ini())
        assert back.command == "truncate"
        assert back.sections == {"model": {"n": "100", "g": "0.5"},
                                 "grid": {"points": "7"}}
        assert back.flat() == {"n": "100", "g": "0.5", "points": "7"}

    def test_bad_ini_rejected(self):
        from qmeas.errors import ValidationError
        with pytest.raises(ValidationError):
            cli.ExperimentConfig.from_ini("not an ini file [ at all")

    def test_config_supplies_defaults(self, capsys, tmp_path):
        path = tmp_path / "run.ini"
        path.write_text("[run]\ncommand = born\n[born]\nr0 = 0,0,0.6\nruns = 50\nseed = 9\n")
        code, out, _ = run_cli(capsys, "--config", str(path))
        assert code == 0
        data = json.loads(out)
        assert data["total"] == 50
        assert data["seed"] == 9
        assert data["p"] == [pytest.approx(0.8), pytest.approx(0.2)]

    def test_flag_overrides_config(self, capsys, tmp_path):
        path = tmp_path / "run.ini"
        path.write_text("[run]\ncommand = born\n[born]\nruns = 50\nseed = 9\n")
        code, out, _ = run_cli(capsys, "born", "--config", str(path), "--runs", "75")
        assert code == 0
        data = json.loads(out)
        assert data["total"] == 75
        assert data["seed"] == 9

    def test_missing_config_is_config_error(self, capsys, tmp_path):
        code, _, err = run_cli(capsys, "born", "--config",
                               str(tmp_path / "absent.ini"))
        assert code == 2
        assert "config" in err


class TestExitCodes:
    def test_validation_maps_to_2(self, capsys):
        code, _, err = run_cli(capsys, "truncate", "--N", "0", "--points", "5")
        assert code == 2
        assert err.startswith("qmeas: config:")

    def test_guard_maps_to_3(self, capsys):
        # dense two-sector representation above 12 spins is refused
        code, _, err = run_cli(capsys, "oracle-check", "--N", "13", "--points", "5")
        assert code == 3
        assert err.startswith("qmeas: guard:")

    def test_unwritable_output_maps_to_2(self, capsys, tmp_path):
        code, _, err = run_cli(capsys, "chsh", "--out",
                               str(tmp_path / "no" / "such" / "dir" / "x.json"))
        assert code == 2
        assert err.startswith("qmeas: io:")


class TestSelftests:
    @pytest.mark.parametrize("command", COMMANDS)
    def test_selftest_passes(self, capsys, command):
        code, out, err = run_cli(capsys, command, "--selftest")
        assert code == 0, err
        assert out.strip() == f"selftest {command}: PASS"


class TestOutputs:
    def test_truncate_csv_shape(self, capsys):
        code, out, _ = run_cli(capsys, "truncate", "--N", "50", "--points", "9",
                               "--tmax-tau", "2.0")
        assert code == 0
        body = strip_version_header(out).splitlines()
        assert body[0] == "t,sx,sy,gaussian_envelope"
        assert len(body) == 1 + 9
        first = [float(v) for v in body[1].split(",")]
        assert first[0] == 0.0
        assert first[1] == pytest.approx(1.0, abs=1e-12)

    def test_csv_determinism_modulo_header(self, capsys):
        _, out1, _ = run_cli(capsys, "truncate", "--N", "50", "--points", "9")
        _, out2, _ = run_cli(capsys, "truncate", "--N", "50", "--points", "9")
        assert strip_version_header(out1) == strip_version_header(out2)

    def test_born_json_payload(self, capsys):
        code, out, _ = run_cli(capsys, "born", "--r0", "0,0,0.6",
                               "--runs", "100000", "--seed", "1")
        assert code == 0
        data = json.loads(out)
        assert data["p"] == [pytest.approx(0.8, abs=1e-12),
                             pytest.approx(0.2, abs=1e-12)]
        assert data["counts"] == [80074, 19926]
        assert data["failed"] == [False, False]
        assert set(data) == {"p", "counts", "total", "seed", "z_scores",
                             "flagged", "failed"}

    def test_chsh_value(self, capsys):
        code, out, _ = run_cli(capsys, "chsh")
        assert code == 0
        data = json.loads(out)
        assert data["c"] == pytest.approx(2.8284271247461903, abs=1e-12)
        assert data["classical_bound"] == 2.0
        assert data["terms"]["e_xv"] == pytest.approx(-np.sqrt(2) / 2, abs=1e-12)

    def test_json_format_flag_on_csv_command(self, capsys):
        code, out, _ = run_cli(capsys, "truncate", "--N", "50", "--points", "5",
                               "--format", "json")
        assert code == 0
        data = json.loads(out)
        assert data["columns"] == ["t", "sx", "sy", "gaussian_envelope"]
        assert len(data["rows"]) == 5

    def test_out_file_written(self, capsys, tmp_path):
        target = tmp_path / "result.json"
        code, out, _ = run_cli(capsys, "feasible", "--correlators", "0,0,0,0",
                               "--out", str(target))
        assert code == 0
        assert out == ""
        data = json.loads(target.read_text())
        assert data["feasible"] is True

    def test_feasible_witness_surfaces(self, capsys):
        code, out, _ = run_cli(capsys, "feasible", "--correlators",
                               "0.8,0.8,0.8,-0.8")
        assert code == 0
        data = json.loads(out)
        assert data["feasible"] is False
        assert data["witness"]["kind"] == "chsh"
        assert data["witness"]["value"] == pytest.approx(3.2, abs=1e-12)

    def test_register_reports_magnetization(self, capsys):
        code, out, _ = run_cli(capsys, "register", "--J", "1.0", "--T", "0.8")
        assert code == 0
        data = json.loads(out)
        assert sorted(data["m"]) == [pytest.approx(-0.7104117834878704, abs=1e-9),
                                     pytest.approx(0.7104117834878704, abs=1e-9)]
        assert data["g_threshold"] == pytest.approx(0.06224413545227514, abs=2e-6)

    def test_version_flag(self, capsys):
        with pytest.raises(SystemExit) as exc:
            cli.main(["--version"])
        assert exc.value.code == 0
        out = capsys.readouterr().out
        assert out.startswith("qmeas ")
