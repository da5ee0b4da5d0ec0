import json
import math

import numpy as np
import pytest

from resonance_lab.cli import (EXIT_EMPTY, EXIT_INPUT, EXIT_OK, RunConfig, branch_file_residual,
                               build_parser, config_from_args, load_branch_vectors, main,
                               read_table, write_table)
from resonance_lab.model import build_duffing


def run(*argv):
    return main([str(a) for a in argv])


@pytest.fixture(scope="module")
def nfrc_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("nfrc")
    assert run("nfrc", "--f", "0.01,0.25", "--omega", "0.5:2", "--out", out) == EXIT_OK
    return out


@pytest.fixture(scope="module")
def seed_file(tmp_path_factory):
    out = tmp_path_factory.mktemp("seed")
    code = run("seed", "--k", 2, "--f", 1, "--omega", 0.715, "--ic-range", 2, "--grid", 5,
               "--basins", "--out", out)
    assert code == EXIT_OK
    return out / "seed_f1_w0.715_nu1_k2.csv"


class TestTables:
    def test_round_trip(self, tmp_path):
        path = tmp_path / "t.csv"
        write_table(path, {"a": 1, "b": "x"}, ["u", "v"], [[0.1, 2], [1 / 3, -5]])
        meta, cols, rows = read_table(path)
        assert meta == {"a": "1", "b": "x"}
        assert cols == ["u", "v"]
        assert float(rows[1][0]) == 1 / 3  # full precision survives

    def test_missing_comment(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("u,v\n1,2\n")
        assert run("verify", "--branch", path, "--out", tmp_path) == EXIT_INPUT


class TestConfig:
    def test_hash_ignores_output_dir(self):
        a = RunConfig("nfrc", forcing=[0.1], omega=[0.5, 2.0], out="x")
        b = RunConfig("nfrc", forcing=[0.1], omega=[0.5, 2.0], out="y")
        c = RunConfig("nfrc", forcing=[0.2], omega=[0.5, 2.0], out="x")
        assert a.digest() == b.digest() != c.digest()
        assert len(a.digest()) == 12

    def test_settings_overrides(self):
        args = build_parser().parse_args(["nfrc", "--f", "1", "--omega", "1:2", "--ds-max", "0.001"])
        s = config_from_args(args).continuation_settings()
        assert s.ds_max == 0.001 and s.ds_init <= s.ds_max

    @pytest.mark.parametrize("argv", [
        ["nfrc", "--omega", "0.5:2"],
        ["nfrc", "--f", "0.1", "--omega", "2:1"],
        ["seed", "--f", "0.1", "--omega", "1:2"],
        ["nfrc", "--f", "0.1", "--omega", "0.5:2", "--model", "nope"],
        ["prnm", "--k", 2, "--nu", 4, "--f", "0.1", "--omega", "1:2"],
        ["verify"],
    ])
    def test_bad_input(self, argv, tmp_path):
        assert run(*argv, "--out", tmp_path) == EXIT_INPUT


class TestNfrc:
    def test_files(self, nfrc_dir):
        names = sorted(p.name for p in nfrc_dir.iterdir())
        assert names == ["nfrc.json", "nfrc_events.csv", "nfrc_f0.01.csv", "nfrc_f0.25.csv"]
        side = json.loads((nfrc_dir / "nfrc.json").read_text())
        meta, _, _ = read_table(nfrc_dir / "nfrc_f0.01.csv")
        assert side["config_hash"] == meta["config"]
        assert meta["units"].startswith("omega:rad/s")

    def test_rows_revalidate(self, nfrc_dir):
        m = build_duffing()
        for name in ("nfrc_f0.01.csv", "nfrc_f0.25.csv"):
            assert branch_file_residual(nfrc_dir / name, m) < 1e-9

    def test_deterministic(self, nfrc_dir, tmp_path, monkeypatch):
        monkeypatch.setenv("RESONANCE_LAB_THREADS", "1")
        assert run("nfrc", "--f", "0.01,0.25", "--omega", "0.5:2", "--out", tmp_path) == EXIT_OK
        for name in ("nfrc_f0.01.csv", "nfrc_f0.25.csv", "nfrc_events.csv"):
            assert (tmp_path / name).read_bytes() == (nfrc_dir / name).read_bytes()

    def test_events_table(self, nfrc_dir):
        _, cols, rows = read_table(nfrc_dir / "nfrc_events.csv")
        kinds = sorted(r[0] for r in rows)
        assert kinds == ["amplitude_max", "fold", "fold", "phase_target"]
        i = cols.index("phi1")
        (quad,) = [r for r in rows if r[0] == "phase_target"]
        assert float(quad[i]) == pytest.approx(math.pi / 2, abs=1e-12)

    def test_degrees(self, tmp_path):
        assert run("nfrc", "--f", "0.01", "--omega", "0.8:1.5", "--degrees", "--out", tmp_path) == 0
        _, cols, rows = read_table(tmp_path / "nfrc_events.csv")
        (quad,) = [r for r in rows if r[0] == "phase_target"]
        assert float(quad[cols.index("phi1")]) == pytest.approx(90.0)
        # coefficients are untouched by the angle unit
        assert branch_file_residual(tmp_path / "nfrc_f0.01.csv", build_duffing()) < 1e-9


class TestPrnm:
    def test_primary(self, tmp_path):
        assert run("prnm", "--f", "0.01", "--omega", "0.8:1.5", "--out", tmp_path) == EXIT_OK
        meta, cols, rows = read_table(tmp_path / "prnm_1_1.csv")
        assert meta["spec"] == "1:1"
        phi = np.array([float(r[cols.index("phi1")]) for r in rows])
        np.testing.assert_allclose(phi, math.pi / 2, atol=1e-8)
        # stored in the forcing frame: each row is a forced solution at f = f_eq
        assert branch_file_residual(tmp_path / "prnm_1_1.csv", build_duffing()) < 1e-9

    def test_even_needs_seed(self, tmp_path, capsys):
        assert run("prnm", "--k", 2, "--f", 1, "--omega", "0.5:1.5", "--out", tmp_path) == EXIT_EMPTY
        assert "resonance-lab seed" in capsys.readouterr().err

    def test_from_seed(self, seed_file, tmp_path):
        code = run("prnm", "--k", 2, "--seed", seed_file, "--omega", "0.5:1.5",
                   "--max-points", 200, "--out", tmp_path)
        assert code == EXIT_OK
        _, cols, rows = read_table(tmp_path / "prnm_2_1.csv")
        phi = np.array([float(r[cols.index("phi2")]) for r in rows])
        np.testing.assert_allclose(phi, 3 * math.pi / 4, atol=1e-8)

    def test_open_subharmonic_branch(self, tmp_path):
        # at f = 1 the 1:3 branch leaves the window; pi/2 lies behind the seed
        assert run("seed", "--nu", 3, "--f", 1, "--omega", 4, "--grid", 7, "--out", tmp_path) == 0
        code = run("prnm", "--k", 1, "--nu", 3, "--seed", tmp_path / "seed_f1_w4_nu3_k1.csv",
                   "--omega", "2:8", "--feq-max", 2, "--out", tmp_path)
        assert code == EXIT_OK
        _, cols, rows = read_table(tmp_path / "prnm_1_3.csv")
        phi = np.array([float(r[cols.index("phi1")]) for r in rows])
        np.testing.assert_allclose(phi, math.pi / 2, atol=1e-8)

    def test_seed_nu_mismatch(self, seed_file, tmp_path):
        assert run("prnm", "--k", 1, "--nu", 2, "--seed", seed_file, "--omega", "0.5:1.5",
                   "--out", tmp_path) == EXIT_INPUT


class TestSeed:
    def test_seed_table(self, seed_file):
        meta, cols, rows = read_table(seed_file)
        assert len(rows) == 2  # mirror-image pair
        assert {r[cols.index("classification")] for r in rows} == {"period-T"}
        _, points = load_branch_vectors(seed_file, build_duffing())
        assert all(X.grid.nu == 1 for _, _, X in points)

    def test_basins(self, seed_file):
        _, cols, rows = read_table(seed_file.with_name(seed_file.stem + "_basins.csv"))
        assert cols == ["x0", "v0", "label"] and len(rows) == 25
        assert {int(r[2]) for r in rows} <= {-1, 0, 1, 2}

    def test_nothing_found(self, tmp_path):
        code = run("seed", "--nu", 3, "--f", 0.01, "--omega", 1.5, "--grid", 2,
                   "--ic-range", 0.1, "--out", tmp_path)
        assert code == EXIT_EMPTY
        assert read_table(tmp_path / "seed_f0.01_w1.5_nu3_k1.csv")[2] == []


class TestVerifyAndModes:
    def test_verify(self, tmp_path):
        assert run("nfrc", "--f", "0.01", "--omega", "0.5:0.9", "--out", tmp_path) == EXIT_OK
        assert run("verify", "--branch", tmp_path / "nfrc_f0.01.csv", "--out", tmp_path) == EXIT_OK
        _, cols, rows = read_table(tmp_path / "nfrc_f0.01_verify.csv")
        assert {r[cols.index("status")] for r in rows} == {"verified"}

    def test_modes(self, tmp_path, capsys):
        assert run("modes", "--model", "two_dof", "--out", tmp_path) == EXIT_OK
        assert "1.7320508076" in capsys.readouterr().out
        _, _, rows = read_table(tmp_path / "modes.csv")
        assert float(rows[1][1]) == pytest.approx(math.sqrt(3), abs=1e-12)
