"""Exit codes, artifact formats, and determinism of the command-line driver."""

import json

import numpy as np
import pytest

from fracshape.cli import main
from fracshape.geometry import read_csv


def run(*argv):
    return main([str(a) for a in argv])


def load(path):
    return json.loads(path.read_text())


@pytest.fixture(scope="module")
def koch_csv(tmp_path_factory):
    path = tmp_path_factory.mktemp("clouds") / "koch.csv"
    assert run("generate", "--preset", "koch", "--depth", "3", "-o", path) == 0
    return path


@pytest.fixture(scope="module")
def gasket_csv(tmp_path_factory):
    path = tmp_path_factory.mktemp("clouds") / "gasket.csv"
    assert run("generate", "--preset", "sierpinski", "--depth", "3", "-o", path) == 0
    return path


class TestExitCodes:
    def test_success_is_zero(self, tmp_path):
        assert run("generate", "--preset", "cantor", "--depth", "3",
                   "-o", tmp_path / "c.csv") == 0

    def test_check_failure_is_two(self, tmp_path):
        code = run("certify", "--mode", "interval", "--b0", "1.2", "--depth", "2",
                   "--budget", "1500", "--max-delta", "1e-6",
                   "-o", tmp_path / "cert.json")
        assert code == 2

    def test_unknown_subcommand_is_one(self, capsys):
        assert run("bogus") == 1
        assert "usage error" in capsys.readouterr().err

    def test_unknown_flag_is_one(self, tmp_path):
        assert run("generate", "--preset", "cantor", "--frobnicate",
                   "-o", tmp_path / "c.csv") == 1

    def test_missing_required_is_one(self):
        assert run("generate", "--depth", "3") == 1

    def test_missing_input_file_is_one(self, tmp_path):
        assert run("compare", tmp_path / "no.csv", tmp_path / "nope.csv") == 1

    def test_bad_scales_is_one(self, koch_csv, tmp_path):
        assert run("dimension", koch_csv, "--scales", "pow1:2..4",
                   "-o", tmp_path / "d.csv") == 1
        assert run("dimension", koch_csv, "--scales", "pow3:8..2",
                   "-o", tmp_path / "d.csv") == 1
        assert run("dimension", koch_csv, "--scales", "abc",
                   "-o", tmp_path / "d.csv") == 1

    def test_small_budget_is_one(self, koch_csv, gasket_csv, tmp_path):
        assert run("compare", koch_csv, gasket_csv, "--budget", "10",
                   "-o", tmp_path / "c.json") == 1

    def test_bad_jobs_is_one(self, tmp_path):
        assert run("generate", "--preset", "cantor", "--jobs", "0",
                   "-o", tmp_path / "c.csv") == 1

    def test_crystal_without_inputs_is_one(self, tmp_path):
        assert run("crystal", "--lam", "0.1", "-o", tmp_path / "c.json") == 1

    def test_repro_without_all_is_one(self, tmp_path):
        assert run("repro", "--out", tmp_path / "r") == 1


class TestGenerate:
    def test_header_and_roundtrip(self, koch_csv):
        lines = koch_csv.read_text().splitlines()
        assert lines[0].startswith("# dim=2 eta=")
        assert lines[1].startswith("# config=")
        echo = json.loads(lines[1].split("config=", 1)[1])
        assert echo["preset"] == "koch"
        assert echo["seed"] == 0
        cloud = read_csv(koch_csv)
        assert cloud.dim == 2
        assert cloud.n > 1000

    def test_deterministic_bytes(self, tmp_path):
        a = tmp_path / "a.csv"
        b = tmp_path / "b.csv"
        run("generate", "--preset", "koch_hat", "--depth", "2", "--seed", "3", "-o", a)
        run("generate", "--preset", "koch_hat", "--depth", "2", "--seed", "3", "-o", b)
        assert a.read_bytes().replace(b"a.csv", b"") == \
            b.read_bytes().replace(b"b.csv", b"")


class TestCompare:
    def test_report_fields(self, koch_csv, gasket_csv, tmp_path):
        out = tmp_path / "cmp.json"
        assert run("compare", koch_csv, gasket_csv, "--variant", "isometry-radius",
                   "--budget", "1500", "-o", out) == 0
        doc = load(out)
        res = doc["results"]
        assert res["lower"] <= res["upper"]
        assert res["variant"] == "isometry-radius"
        assert res["search_tol"] > 0
        assert len(res["witness"]["ortho"]) == 2
        assert doc["config"]["seed"] == 0
        assert doc["config"]["variant"] == "isometry-radius"

    def test_stdout_mode(self, koch_csv, gasket_csv, capsys):
        assert run("compare", koch_csv, gasket_csv, "--budget", "1500") == 0
        doc = json.loads(capsys.readouterr().out)
        assert "config" in doc and "results" in doc

    def test_deterministic_bytes(self, koch_csv, gasket_csv, tmp_path):
        a = tmp_path / "a.json"
        b = tmp_path / "b.json"
        argv = ["compare", koch_csv, gasket_csv, "--budget", "1500"]
        run(*argv, "-o", a)
        run(*argv, "-o", b)
        assert load(a)["results"] == load(b)["results"]


class TestCertify:
    def test_interval_report(self, tmp_path):
        out = tmp_path / "cert.json"
        assert run("certify", "--mode", "interval", "--b0", "1.2", "--depth", "3",
                   "--budget", "1500", "-o", out) == 0
        res = load(out)["results"]
        assert 0 < res["delta_hat"] < 0.1
        assert res["depth"] == 3
        assert res["consistency"] > 0
        assert res["per_word"]

    def test_exact_system_passes_tight_bound(self, tmp_path):
        out = tmp_path / "cert.json"
        assert run("certify", "--mode", "none", "--system", "cantor", "--depth", "3",
                   "--budget", "1500", "--max-delta", "0.01", "-o", out) == 0


class TestDimension:
    def test_exact_cantor_slope(self, tmp_path):
        cloud = tmp_path / "cantor.csv"
        run("generate", "--preset", "cantor", "--depth", "5", "-o", cloud)
        out = tmp_path / "dim.csv"
        assert run("dimension", cloud, "--scales", "pow3:2..5",
                   "-o", out, "--plot") == 0
        doc = load(tmp_path / "dim.json")
        slope = doc["results"]["fit"]["slope"]
        assert slope == pytest.approx(np.log(2) / np.log(3), abs=1e-9)
        header = out.read_text().splitlines()[0]
        assert header == "scale,count,local_slope"
        svg = (tmp_path / "dim.svg").read_text()
        assert svg.startswith("<svg")

    def test_comma_scales(self, koch_csv, tmp_path):
        out = tmp_path / "dim.csv"
        assert run("dimension", koch_csv, "--scales", "0.3,0.1,0.03,0.01",
                   "-o", out) == 0
        doc = load(tmp_path / "dim.json")
        assert 1.0 < doc["results"]["fit"]["slope"] < 1.5


class TestAtlas:
    def test_exact_cantor_atlas(self, tmp_path):
        out = tmp_path / "atlas.json"
        assert run("atlas", "--system", "cantor", "--depth", "2", "--delta", "0.1",
                   "--budget", "1500", "--plot", "-o", out) == 0
        res = load(out)["results"]
        assert res["approx"]["plain"] < 1e-9
        assert res["spline"]["passed"] is True
        assert res["words"][0] == "0"
        svg = (tmp_path / "atlas.svg").read_text()
        assert svg.startswith("<svg")


class TestTiling:
    def test_wavy_passes_at_amplitude(self, tmp_path):
        out = tmp_path / "til.json"
        assert run("tiling", "--delta", "0.1", "--nx", "4", "--ny", "4",
                   "--margin", "0.85", "--budget", "1500", "-o", out) == 0
        res = load(out)["results"]
        assert res["prototile"]["passed"] is True
        assert res["tiles"] == 16
        for value in res["lambda_hat"].values():
            assert 0 <= value <= 0.5

    def test_tight_budget_fails_with_two(self, tmp_path):
        code = run("tiling", "--delta", "0.1", "--check-delta", "0.005",
                   "--nx", "4", "--ny", "4", "--margin", "0.85",
                   "--budget", "1500", "-o", tmp_path / "til.json")
        assert code == 2


class TestPack:
    def test_collapse_goldens(self, tmp_path):
        out = tmp_path / "pack.json"
        assert run("pack", "--collapse", "--epsilon", "0.2", "-o", out) == 0
        res = load(out)["results"]
        assert res["interlocked"]["density"] == pytest.approx(0.96, abs=1e-9)
        assert res["stacked"]["density"] == pytest.approx(0.63, abs=1e-9)
        assert res["difference"] == pytest.approx(0.33, abs=1e-9)

    def test_single_mode_with_sampling(self, tmp_path):
        out = tmp_path / "pack.json"
        assert run("pack", "--mode", "interlocked", "--epsilon", "0",
                   "--mc", "20000", "-o", out) == 0
        res = load(out)["results"]
        assert res["monte_carlo"]["estimate"] == pytest.approx(0.96, abs=0.02)


class TestCrystal:
    def test_demo_passes_and_fails(self, tmp_path):
        out = tmp_path / "cry.json"
        assert run("crystal", "--demo-jitter", "0.04", "--lam", "0.05",
                   "--budget", "1500", "-o", out) == 0
        res = load(out)["results"]
        assert res["passed"] is True
        assert res["ratio"] <= 0.05 + 1e-3
        assert run("crystal", "--demo-jitter", "0.04", "--lam", "1e-5",
                   "--budget", "1500", "-o", out) == 2


class TestSeedHandling:
    def test_env_override_recorded(self, tmp_path, monkeypatch):
        out = tmp_path / "cert.json"
        monkeypatch.setenv("FRACSHAPE_SEED", "7")
        assert run("certify", "--mode", "interval", "--b0", "1.2", "--depth", "2",
                   "--budget", "1500", "-o", out) == 0
        assert load(out)["config"]["seed"] == 7

    def test_bad_env_seed_is_usage_error(self, tmp_path, monkeypatch):
        monkeypatch.setenv("FRACSHAPE_SEED", "zebra")
        assert run("certify", "--mode", "none", "-o", tmp_path / "c.json") == 1

    def test_seed_changes_randomized_certificate(self, tmp_path):
        outs = []
        for seed in ("0", "5"):
            out = tmp_path / f"cert{seed}.json"
            run("certify", "--mode", "interval", "--b0", "1.2", "--depth", "2",
                "--budget", "1500", "--seed", seed, "-o", out)
            outs.append(load(out)["results"]["delta_hat"])
        assert outs[0] != outs[1]
