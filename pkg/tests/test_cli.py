import json
import subprocess
import sys

import pytest

from featlink.cli import EXIT_CONFIG, EXIT_GOLDEN, EXIT_IO, EXIT_OK, main

SMALL = ["--height", "64", "--width", "64", "--depth", "1"]


def run(argv, capsys):
    code = main(argv)
    out, err = capsys.readouterr()
    return code, out, err


class TestBer:
    def test_stdout_csv(self, capsys):
        code, out, _ = run(["ber", "--n", "2", "--snr", "0", "5", "--bits", "10000"], capsys)
        assert code == EXIT_OK
        lines = out.splitlines()
        assert lines[0] == "n,snr_db,stream,ber,ci95,bits" and len(lines) == 5

    def test_empty_grid_from_config(self, tmp_path, capsys):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"n_list": []}))
        code, out, _ = run(["ber", "--config", str(cfg)], capsys)
        assert code == EXIT_OK and out == "n,snr_db,stream,ber,ci95,bits\n"

    def test_output_byte_identical_across_runs_and_workers(self, tmp_path, capsys):
        args = ["ber", "--n", "1", "2", "--snr", "0", "10", "--bits", "20000", "--seed", "3"]
        for name, workers in (("a", "1"), ("b", "1"), ("c", "2")):
            assert main(args + ["--workers", workers, "--out", str(tmp_path / name)]) == EXIT_OK
        a, b, c = ((tmp_path / x / "ber.csv").read_bytes() for x in "abc")
        assert a == b == c

    def test_golden_mismatch_exit_code(self, capsys):
        # 1e4 bits is far too few for the 1.99e-5 cell
        code, _, err = run(["ber", "--n", "4", "--snr", "10", "--bits", "10000", "--golden"],
                           capsys)
        assert code == EXIT_GOLDEN
        assert "FAIL" in err

    def test_config_file_and_flag_precedence(self, tmp_path, capsys):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"n_list": [4], "snr_list": [0], "bits_target": 10000}))
        code, out, _ = run(["ber", "--config", str(cfg), "--n", "1"], capsys)
        assert code == EXIT_OK and len(out.splitlines()) == 2


class TestConfigErrors:
    @pytest.mark.parametrize("argv", [
        ["transmit", "--n", "4", "--c", "50"] + SMALL,
        ["transmit", "--height", "100"],
        ["transmit", "--n", "3"] + SMALL,
        ["ber", "--bits", "10"],
        ["ber", "--workers", "0"],
    ])
    def test_invalid_values(self, argv, capsys):
        code, _, err = run(argv, capsys)
        assert code == EXIT_CONFIG and "config error" in err

    def test_unknown_config_key(self, tmp_path, capsys):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"snr": [1.0]}))
        code, _, err = run(["ber", "--config", str(cfg)], capsys)
        assert code == EXIT_CONFIG and "unknown config keys: snr" in err

    def test_malformed_json(self, tmp_path, capsys):
        cfg = tmp_path / "cfg.json"
        cfg.write_text("{")
        assert run(["ber", "--config", str(cfg)], capsys)[0] == EXIT_CONFIG

    def test_unknown_flag(self, capsys):
        with pytest.raises(SystemExit) as exc:
            main(["ber", "--bogus"])
        assert exc.value.code == EXIT_CONFIG

    def test_missing_config_file(self, tmp_path, capsys):
        assert run(["ber", "--config", str(tmp_path / "nope.json")], capsys)[0] == EXIT_IO


class TestSynthAndTransmit:
    def test_synth_is_deterministic(self, tmp_path, capsys):
        args = ["synth", "--what", "all", "--n", "2", "--c", "24", "--seed", "5"] + SMALL
        first = run(args + ["--out", str(tmp_path / "a")], capsys)[1]
        second = run(args + ["--out", str(tmp_path / "b")], capsys)[1]
        assert first == second and first.startswith("pyramid ")
        for name in ("pyramid.bin", "weights_n2_c24.bin", "pyramid.json"):
            assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()

    def test_transmit_noiseless_golden(self, capsys):
        code, out, _ = run(["transmit", "--snr", "300", "--n", "2", "--m", "4", "--c", "48",
                            "--seed", "0"] + SMALL, capsys)
        assert code == EXIT_OK
        (rep,) = json.loads(out)
        assert rep["per_stream_ber"] == [0.0, 0.0]
        assert rep["w_stats"]["max_abs"] <= 2.0 ** -3
        assert rep["total_mse"] == pytest.approx(5.995353015696382, rel=1e-6)

    def test_transmit_with_files(self, tmp_path, capsys):
        base = ["--n", "2", "--c", "24", "--seed", "1"] + SMALL
        assert main(["synth", "--what", "all", "--out", str(tmp_path)] + base) == EXIT_OK
        capsys.readouterr()
        code = main(["transmit", "--snr", "5", "--m", "2", "--out", str(tmp_path),
                     "--pyramid", str(tmp_path / "pyramid.json"),
                     "--weights", str(tmp_path / "weights_n2_c24")] + base)
        assert code == EXIT_OK
        reports = json.loads((tmp_path / "distortion.json").read_text())
        assert len(reports) == 1 and reports[0]["cr"] == "1/128"

    def test_weight_shape_mismatch(self, tmp_path, capsys):
        assert main(["synth", "--what", "weights", "--n", "2", "--c", "24",
                     "--out", str(tmp_path)] + SMALL) == EXIT_OK
        code, _, err = run(["transmit", "--n", "2", "--c", "48",
                            "--weights", str(tmp_path / "weights_n2_c24")] + SMALL, capsys)
        assert code == EXIT_CONFIG and "weight bundle" in err

    def test_corrupt_pyramid(self, tmp_path, capsys):
        main(["synth", "--out", str(tmp_path)] + SMALL)
        (tmp_path / "pyramid.bin").write_bytes(b"\0" * 16)
        code, _, err = run(["transmit", "--n", "1", "--c", "24",
                            "--pyramid", str(tmp_path / "pyramid")] + SMALL, capsys)
        assert code == EXIT_IO and "bad input file" in err


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "featlink", "ber", "--n", "1", "--snr", "0",
                           "--bits", "10000"], capture_output=True, text=True, check=False)
    assert proc.returncode == 0 and proc.stdout.startswith("n,snr_db")
