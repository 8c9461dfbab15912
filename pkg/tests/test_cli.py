import json

import numpy as np
import pytest

from predrisk.cli import demo_dataset_path, load_points, main
from predrisk.config import RunConfig, apply_overrides, config_hash, parse_config
from predrisk.exceptions import ConfigError
from predrisk.results import ResultCell, ResultTable, read_table, write_table
from predrisk.risk import ExperimentSpec, MvnExperiment, estimate_risk
from predrisk.distributions import MvnParams


class TestConfigParsing:
    def test_basic(self):
        cfg = parse_config("seed = 5\nsamples = 1024\nn = 3\nn = 5\npredictor = jeffreys\n",
                           command="mvn-risk")
        assert cfg.seed == 5
        assert cfg.n_samples == 1024
        assert cfg.n_range == (3, 5)
        assert cfg.predictors == ("jeffreys",)

    def test_comments_and_blank_lines(self):
        cfg = parse_config("# a comment\n\nseed = 9  # trailing\n", command="check-invariance")
        assert cfg.seed == 9

    def test_line_number_in_errors(self):
        with pytest.raises(ConfigError, match=":2:"):
            parse_config("seed = 1\nnot a pair\n", command="mvn-risk")

    def test_unknown_key(self):
        with pytest.raises(ConfigError, match="unknown key"):
            parse_config("bogus = 1\n", command="mvn-risk")

    def test_duplicate_scalar_key(self):
        with pytest.raises(ConfigError, match="duplicate"):
            parse_config("seed = 1\nseed = 2\n", command="mvn-risk")

    def test_invalid_value(self):
        with pytest.raises(ConfigError, match="invalid value"):
            parse_config("samples = many\n", command="mvn-risk")

    def test_command_mismatch(self):
        with pytest.raises(ConfigError, match="invoked as"):
            parse_config("command = gp-risk\n", command="mvn-risk")

    def test_command_from_file(self):
        cfg = parse_config("command = gp-risk\nseed = 2\n")
        assert cfg.command == "gp-risk"

    def test_empty_value(self):
        with pytest.raises(ConfigError, match="empty value"):
            parse_config("seed =\n", command="mvn-risk")


class TestConfigHash:
    def test_deterministic(self):
        a = RunConfig(command="mvn-risk", seed=1)
        b = RunConfig(command="mvn-risk", seed=1)
        assert config_hash(a) == config_hash(b)

    def test_semantic_fields_change_hash(self):
        base = RunConfig(command="mvn-risk", seed=1)
        assert config_hash(base) != config_hash(RunConfig(command="mvn-risk", seed=2))
        assert config_hash(base) != config_hash(RunConfig(command="mvn-risk", seed=1,
                                                          n_range=(3,)))
        assert config_hash(base) != config_hash(RunConfig(command="gp-risk", seed=1))

    def test_output_path_does_not_change_hash(self):
        a = RunConfig(command="mvn-risk", seed=1, out="here")
        b = RunConfig(command="mvn-risk", seed=1, out="there")
        assert config_hash(a) == config_hash(b)

    def test_overrides(self):
        cfg = apply_overrides(RunConfig(command="mvn-risk"), seed=9, samples=64, shards=2)
        assert (cfg.seed, cfg.n_samples, cfg.shards) == (9, 64, 2)


class TestResultTableRoundTrip:
    def test_field_for_field(self, tmp_path):
        cells = (
            ResultCell("jeffreys", 3, "ok", mean=0.123456789012345678,
                       std_err=1.5e-3, n_samples=1024, n_undefined=0),
            ResultCell("right-invariant", 2, "undefined"),
        )
        table = ResultTable(cells=cells, metadata={"seed": 1, "config_hash": "abc"})
        path = tmp_path / "t.csv"
        write_table(table, path)
        back = read_table(path)
        assert back == table

    def test_header_check(self, tmp_path):
        path = tmp_path / "t.csv"
        path.write_text("a,b\n1,2\n")
        with pytest.raises(ValueError):
            read_table(path)


class TestCliEndToEnd:
    def test_mvn_risk_matches_library(self, tmp_path):
        cfg = tmp_path / "run.cfg"
        cfg.write_text("seed = 3\nsamples = 16384\nn = 5\npredictor = jeffreys\n")
        out = tmp_path / "table"
        assert main(["mvn-risk", "--config", str(cfg), "--out", str(out)]) == 0
        table = read_table(out.with_suffix(".csv"))
        cell = table.cells[0]
        direct = estimate_risk(ExperimentSpec(
            model=MvnExperiment(MvnParams.standard(2)), predictor="jeffreys",
            n_obs=5, n_samples=16384, seed=3))
        assert cell.mean == direct.mean
        assert cell.std_err == direct.std_err
        assert table.metadata["config_hash"]
        assert table.metadata["versions"]["predrisk"]

    def test_undefined_rows_emitted(self, tmp_path):
        cfg = tmp_path / "run.cfg"
        cfg.write_text("samples = 4096\nn = 2\nn = 5\npredictor = independence-jeffreys\n")
        out = tmp_path / "table"
        assert main(["mvn-risk", "--config", str(cfg), "--out", str(out)]) == 0
        table = read_table(out.with_suffix(".csv"))
        by_n = {c.n: c for c in table.cells}
        assert by_n[2].status == "undefined"
        assert by_n[5].status == "ok"

    def test_seed_override_changes_hash(self, tmp_path):
        cfg = tmp_path / "run.cfg"
        cfg.write_text("samples = 4096\nn = 5\npredictor = jeffreys\n")
        out1, out2 = tmp_path / "a", tmp_path / "b"
        main(["mvn-risk", "--config", str(cfg), "--out", str(out1)])
        main(["mvn-risk", "--config", str(cfg), "--out", str(out2), "--seed", "99"])
        h1 = read_table(out1.with_suffix(".csv")).metadata["config_hash"]
        h2 = read_table(out2.with_suffix(".csv")).metadata["config_hash"]
        assert h1 != h2

    def test_config_error_exit_code(self, tmp_path):
        cfg = tmp_path / "run.cfg"
        cfg.write_text("definitely not = valid =\n")
        assert main(["mvn-risk", "--config", str(cfg)]) == 2

    def test_computation_error_writes_record(self, tmp_path):
        # right-invariant kinds are bivariate only; dim = 3 must abort
        cfg = tmp_path / "run.cfg"
        cfg.write_text("samples = 4096\ndim = 3\nn = 5\npredictor = right-invariant\n")
        out = tmp_path / "boom"
        assert main(["mvn-risk", "--config", str(cfg), "--out", str(out)]) == 1
        record = json.loads(out.with_suffix(".error.json").read_text())
        assert record["error"] == "InvalidSpec"
        assert "bivariate" in record["message"]

    def test_gp_risk_small(self, tmp_path):
        cfg = tmp_path / "run.cfg"
        cfg.write_text("samples = 4096\nn = 6\npredictor = right-invariant\npredictor = jeffreys\n")
        out = tmp_path / "gp"
        assert main(["gp-risk", "--config", str(cfg), "--out", str(out)]) == 0
        table = read_table(out.with_suffix(".csv"))
        means = {c.predictor: c.mean for c in table.cells}
        assert means["right-invariant"] < means["jeffreys"]

    def test_gp_improvement(self, tmp_path):
        out = tmp_path / "imp"
        assert main(["gp-improvement", "--out", str(out)]) == 0
        table = read_table(out.with_suffix(".csv"))
        values = [c.mean for c in sorted(table.cells, key=lambda c: c.n)]
        assert values[0] == 0.0
        assert all(b >= a - 1e-12 for a, b in zip(values, values[1:]))

    def test_check_invariance(self, tmp_path):
        out = tmp_path / "inv"
        assert main(["check-invariance", "--out", str(out)]) == 0
        report = json.loads(out.with_suffix(".json").read_text())
        assert all(p["passed"] for p in report["properties"])


class TestMvnGrid:
    def test_grid_outputs_and_level_sets(self, tmp_path):
        out = tmp_path / "grid"
        assert main(["mvn-grid", "--out", str(out)]) == 0
        meta = json.loads(out.with_suffix(".json").read_text())
        assert set(meta["grid_files"]) == {
            "right-invariant", "right-invariant-swapped", "jeffreys",
            "independence-jeffreys", "plugin-unbiased", "plugin-mle"}
        # the two elliptical posterior predictives share level-set shape
        ij = meta["level_sets"]["independence-jeffreys"]
        j = meta["level_sets"]["jeffreys"]
        for a, b in zip(ij, j):
            assert abs(a["elongation"] - b["elongation"]) / b["elongation"] < 0.05
            assert abs(a["angle_deg"] - b["angle_deg"]) < 2.0
        # the swapped variant produces a genuinely different surface
        def load_grid(kind):
            path = tmp_path / meta["grid_files"][kind]
            vals = np.loadtxt(path, delimiter=",", skiprows=1, usecols=2)
            return vals

        gap = np.abs(load_grid("right-invariant") - load_grid("right-invariant-swapped"))
        assert gap.max() > 0.1

    def test_demo_dataset_loads(self):
        pts = load_points(demo_dataset_path())
        assert pts.shape == (3, 2)
