import csv

import numpy as np
import pytest

from shapelab import experiments
from shapelab.cli import main
from shapelab.experiments import (
    DEFAULT_EPS_GRID,
    ConfigError,
    EpsGrid,
    default_threads,
    dip_depth,
    make_config,
    read_config_file,
    run_preasymptotic,
)

SMALL = ["--eps-grid", "0.1:10:5:log", "--n-ladder", "20,40", "--m-eval", "500"]


def read_rows(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


class TestEpsGrid:
    def test_parse_default_grid(self):
        g = EpsGrid.parse("1e-3:1e2:101:log")
        assert g == DEFAULT_EPS_GRID
        np.testing.assert_allclose(g.values(), np.logspace(-3, 2, 101))

    def test_linear(self):
        np.testing.assert_allclose(EpsGrid.parse("1:3:3:lin").values(), [1, 2, 3])

    @pytest.mark.parametrize("text", ["1:2", "a:b:3", "1:2:3:cubic"])
    def test_bad_text(self, text):
        with pytest.raises(ConfigError) as exc:
            EpsGrid.parse(text)
        assert exc.value.key == "eps_grid"

    def test_bad_bounds(self):
        with pytest.raises(ConfigError):
            make_config("ex1", {"eps_grid": EpsGrid(2.0, 1.0, 5)})


class TestConfig:
    def test_defaults(self):
        c = make_config("ex1")
        assert c.n_ladder == (100, 196, 387, 762, 1500)
        assert len(c.eps_values) == 101
        assert len(make_config("preasymptotic").eps_values) == 25

    def test_file(self, tmp_path):
        p = tmp_path / "c.cfg"
        p.write_text("# comment\nn_ladder = 10, 20\nm-eval = 300  # trailing\n\ngamma=0\n")
        s = read_config_file(p)
        assert s == {"n_ladder": (10, 20), "m_eval": 300, "gamma": 0.0}

    def test_override_wins(self, tmp_path):
        c = make_config("ex1", {"m_eval": 300}, {"m_eval": 400})
        assert c.m_eval == 400

    @pytest.mark.parametrize("settings,key", [
        ({"n_ladder": (40, 20)}, "n_ladder"),
        ({"kernels": ("k7",)}, "kernels"),
        ({"threads": 0}, "threads"),
        ({"bogus": 1}, "bogus"),
        ({"target": "nope"}, "target"),
    ])
    def test_errors_name_key(self, settings, key):
        with pytest.raises(ConfigError) as exc:
            make_config("ex1", settings)
        assert exc.value.key == key

    def test_threads_env(self, monkeypatch):
        monkeypatch.setenv("SHAPELAB_THREADS", "3")
        assert default_threads() == 3


class TestDipDepth:
    def test_interior_dip(self):
        assert dip_depth([4.0, 2.0, 1.0, 3.0, 2.5]) == pytest.approx(3.0)

    def test_edge_minimum(self):
        assert dip_depth([1.0, 2.0, 5.0, 4.0]) == pytest.approx(5.0)

    def test_flat(self):
        assert dip_depth([1.0]) == 1.0


class TestCLI:
    def test_reproduce_ex1(self, tmp_path, capsys):
        out = tmp_path / "o"
        assert main(["reproduce", "ex1", *SMALL, "--out", str(out), "--kernels", "k1,k3"]) == 0
        names = sorted(p.name for p in out.iterdir())
        assert names == ["ex1_k1.csv", "ex1_k1_loglog.csv", "ex1_k3.csv", "ex1_k3_loglog.csv", "ex1_summary.csv"]
        rows = read_rows(out / "ex1_k1.csv")
        assert rows[0] == ["kernel", "eps", "n", "h", "rmse", "rate_prev", "cond", "dropped_rank", "flat_rmse"]
        assert len(rows) == 1 + 5 * 2
        summary = read_rows(out / "ex1_summary.csv")
        assert summary[1][0] == "k1" and int(summary[1][1]) == 5
        assert "ex1_summary.csv" in capsys.readouterr().out

    def test_default_kernels_give_four_files_per_summary(self, tmp_path):
        out = tmp_path / "o"
        assert main(["reproduce", "ex2", *SMALL, "--out", str(out)]) == 0
        assert len([p for p in out.iterdir() if not p.name.endswith("_loglog.csv")]) == 4

    def test_deterministic_and_thread_independent(self, tmp_path):
        dirs = []
        for i, threads in enumerate(("1", "1", "8")):
            d = tmp_path / f"run{i}"
            assert main(["reproduce", "ex1", *SMALL, "--threads", threads, "--out", str(d)]) == 0
            dirs.append(d)
        for p in dirs[0].iterdir():
            for other in dirs[1:]:
                assert (other / p.name).read_bytes() == p.read_bytes()

    def test_config_file_and_flag(self, tmp_path):
        cfg = tmp_path / "c.cfg"
        cfg.write_text("eps_grid = 0.1:10:3:log\nn_ladder = 20,40\nm_eval = 200\nkernels = k3\n")
        out = tmp_path / "o"
        assert main(["sweep", "--config", str(cfg), "--target", "f2", "--out", str(out)]) == 0
        rows = read_rows(out / "sweep_f2.csv")
        assert rows[0] == ["kernel", "eps", "n", "h", "rmse", "rate_prev", "cond", "dropped_rank"]
        assert len(rows) == 1 + 3 * 2

    def test_nonincreasing_ladder(self, tmp_path, capsys):
        assert main(["reproduce", "ex1", "--n-ladder", "40,20", "--out", str(tmp_path)]) == 1
        assert "n_ladder" in capsys.readouterr().err

    @pytest.mark.parametrize("argv", [
        ["frobnicate"],
        ["reproduce", "ex9"],
        ["sweep", "--no-such-flag", "1"],
        ["sweep", "--m-eval", "many"],
    ])
    def test_config_errors_exit_1(self, argv, tmp_path):
        assert main(argv + ["--out", str(tmp_path)] if argv[0] == "sweep" else argv) == 1

    def test_missing_config_file(self, tmp_path):
        assert main(["sweep", "--config", str(tmp_path / "none.cfg")]) == 1

    def test_numerical_failure_exit_2(self, tmp_path, monkeypatch, capsys):
        def broken(*args, **kwargs):
            raise np.linalg.LinAlgError("boom")

        monkeypatch.setattr(experiments, "fit", broken)
        assert main(["reproduce", "ex1", *SMALL, "--out", str(tmp_path)]) == 2
        assert "kernel=" in capsys.readouterr().err

    def test_rates_from_input(self, tmp_path, capsys):
        out = tmp_path / "o"
        assert main(["sweep", *SMALL, "--target", "f1", "--out", str(out)]) == 0
        assert main(["rates", "--input", str(out / "sweep_f1.csv"), "--target", "f1", "--out", str(out)]) == 0
        text = capsys.readouterr().out
        assert "k3: predicted optimal eps for f1: none" in text
        assert read_rows(out / "rates_k1.csv")[0] == ["eps", "n", "h", "error", "pairwise_rate"]

    def test_rates_missing_input(self, tmp_path):
        assert main(["rates", "--input", str(tmp_path / "x.csv"), "--out", str(tmp_path)]) == 1

    def test_spectrum(self, tmp_path, capsys):
        assert main(["spectrum", "--kernels", "k3", "--mercer-grid", "200", "--out", str(tmp_path)]) == 0
        assert "decay exponent on [5, 20]" in capsys.readouterr().out
        assert (tmp_path / "spectrum_k3_eigvals.csv").exists()

    def test_greedy(self, tmp_path):
        assert main(["greedy", "--mercer-grid", "10", "--greedy-m", "5", "--out", str(tmp_path)]) == 0
        assert len(read_rows(tmp_path / "greedy.csv")) == 6

    def test_greedy_too_many(self, tmp_path):
        assert main(["greedy", "--mercer-grid", "3", "--greedy-m", "10", "--out", str(tmp_path)]) == 1


class TestPreasymptotic:
    @pytest.fixture(scope="class")
    @staticmethod
    def small(tmp_path_factory):
        out = tmp_path_factory.mktemp("pre")
        config = make_config("preasymptotic", {
            "mercer_grid": 40, "greedy_m": 60, "checkpoints": (10, 60),
            "eps_grid": EpsGrid(0.1, 10.0, 7), "output_dir": out,
        })
        return config, run_preasymptotic(config)

    def test_files(self, small):
        config, _ = small
        names = sorted(p.name for p in config.output_dir.iterdir())
        assert names == ["preasymptotic_f1.csv", "preasymptotic_f2.csv",
                         "preasymptotic_greedy.csv", "preasymptotic_summary.csv"]
        rows = read_rows(config.output_dir / "preasymptotic_f1.csv")
        assert rows[0] == ["target", "eps", "n", "rmse", "cond", "dropped_rank"]
        assert len(rows) == 1 + 7 * 2

    def test_shapes(self, small):
        _, r = small
        assert r.errors["f1"].shape == (7, 2)
        assert np.all(r.errors["f1"] > 0)

    def test_zero_gamma_matches_f1(self, tmp_path):
        config = make_config("preasymptotic", {
            "mercer_grid": 40, "greedy_m": 20, "checkpoints": (10, 20), "gamma": 0.0,
            "eps_grid": EpsGrid(0.5, 2.0, 3), "output_dir": tmp_path,
        })
        r = run_preasymptotic(config, write=False)
        np.testing.assert_array_equal(r.errors["f1"], r.errors["f2"])

    def test_small_grid_rejected(self):
        with pytest.raises(ConfigError) as exc:
            make_config("preasymptotic", {"mercer_grid": 30})
        assert exc.value.key == "mercer_grid"
