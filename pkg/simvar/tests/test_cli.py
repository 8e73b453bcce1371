"""Command-line parsing, exit codes and the files each subcommand leaves behind."""
import pytest

from simvar.app.minisim.catalog import CATALOG
from simvar.app.minisim.scenario import write_scenario_file
from simvar.cli import build_parser, config_from_args, dispatch, main

JITTER = ["--inject", "collision_impulse_jitter=0.01", "--inject", "entropy_seed=4242"]


def _run(store, *argv):
    return dispatch(build_parser().parse_args(list(argv)), store=store)


class TestParser:
    @pytest.mark.parametrize(
        "argv",
        [[], ["explode"], ["run", "--inject", "no_equals_sign"], ["run", "--pin", "3-1"], ["analyze"]],
    )
    def test_usage_errors_exit_1(self, argv):
        with pytest.raises(SystemExit) as info:
            build_parser().parse_args(argv)
        assert info.value.code == 1

    def test_version(self, capsys):
        with pytest.raises(SystemExit) as info:
            build_parser().parse_args(["--version"])
        assert info.value.code == 0
        assert "simvar" in capsys.readouterr().out

    def test_campaign_config(self):
        args = build_parser().parse_args(
            ["run", "--scenario", "test2", "--n", "5", "--load", "50", "--pin", "0-1", "--seed-policy", "per-run", *JITTER]
        )
        config = config_from_args(args)
        assert config.scenario_id == "test2"
        assert config.injectors == {"collision_impulse_jitter": 0.01, "entropy_seed": 4242}
        assert config.pinning == (0, 1)
        assert config.load.cpu_percent == 50.0
        assert config.tolerance == 0.01
        assert config.seed_for(3) == 3
        assert config.id == "test2-load50-nice0-pin0_1"

    def test_scenario_file(self, tmp_path):
        spec = CATALOG["test4"]().with_overrides(scenario_id="crossing", max_sim_time=5.0)
        path = write_scenario_file(spec, tmp_path / "crossing.yaml")
        config = config_from_args(build_parser().parse_args(["run", "--scenario", str(path)]))
        assert config.scenario_id == "crossing"
        assert config.scenario_model() == spec


class TestExitCodes:
    def test_invalid_injector_is_a_usage_error(self, store):
        assert _run(store, "run", "--n", "2", "--inject", "cosmic_rays=1") == 1

    def test_too_few_runs(self, store):
        assert _run(store, "run", "--n", "1") == 1

    def test_adapter_without_out_trace(self, store):
        assert _run(store, "run", "--n", "2", "--adapter", "mysim --seed {seed}") == 3

    def test_unknown_campaign(self, store):
        assert _run(store, "analyze", "--campaign", "c-nowhere") == 3

    def test_selftest_subset(self, store, capsys):
        assert _run(store, "selftest", "--check", "hand_value", "--check", "gate_fixture") == 0
        out = capsys.readouterr().out
        assert "PASS hand_value" in out and "PASS gate_fixture" in out

    def test_selftest_without_matching_check(self, store):
        assert _run(store, "selftest", "--check", "no_such_check") == 1

    @pytest.mark.usefixtures("restore_root_logging")
    def test_main(self):
        assert main(["--log-level", "WARNING", "selftest", "--n", "2", "--check", "hand_value"]) == 0


class TestWorkflow:
    @pytest.fixture
    def jittered_campaign(self, store, tmp_path):
        out = tmp_path / "run-out"
        code = _run(store, "run", "--scenario", "test2", "--n", "8", "--campaign", "jit", "--out", str(out), "--gate", *JITTER)
        return code, out

    def test_run_gate_and_outputs(self, capsys, jittered_campaign):
        code, out = jittered_campaign
        assert code == 2
        assert "#simvar-audit v1" in capsys.readouterr().out
        summary = (out / "summary_test2-load0-nice0.txt").read_text(encoding="utf-8")
        assert "campaign_id=jit" in summary
        assert (out / "series_test2-load0-nice0_all.csv").is_file()
        assert (out / "series_test2-load0-nice0_v1.csv").is_file()

    def test_analyze_is_reproducible(self, jittered_campaign, store, tmp_path):
        for name in ("a", "b"):
            assert _run(store, "analyze", "--campaign", "jit", "--out", str(tmp_path / name)) == 0
        first = sorted((tmp_path / "a").iterdir())
        second = sorted((tmp_path / "b").iterdir())
        assert [p.name for p in first] == [p.name for p in second]
        assert [p.read_bytes() for p in first] == [p.read_bytes() for p in second]
        assert _run(store, "analyze", "--campaign", "jit", "--gate") == 2
        assert (store.analysis_dir("jit") / "summary_test2-load0-nice0.txt").is_file()

    def test_report_restricts_post_collision(self, jittered_campaign, store, tmp_path):
        out = tmp_path / "report"
        xlsx = tmp_path / "domain.xlsx"
        assert _run(store, "report", "--campaign", "jit", "--out", str(out), "--xlsx", str(xlsx), "--gate") == 0
        text = (out / "report.txt").read_text(encoding="utf-8")
        assert "domain_verdict_restricted=permissible" in text
        assert xlsx.is_file()
        assert _run(store, "report", "--campaign", "jit", "--out", str(out), "--include-post-collision", "--gate") == 2

    def test_sweep_writes_csv(self, store, tmp_path, capsys):
        out = tmp_path / "sweep"
        assert _run(store, "sweep", "--scenario", "test1", "--n", "2", "--levels", "0", "--out", str(out)) == 0
        assert (out / "sweep.csv").read_text(encoding="utf-8").startswith("level,config_id,")
        assert "domain_boundary=0" in capsys.readouterr().out
