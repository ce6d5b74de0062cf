import io
import json
import math

import numpy as np
import pytest

from fkavg import (AssumptionViolationError, ConfigError, RunConfig,
                   field_from_spec, make_field, make_model, run_converge,
                   run_limit, run_mvt, run_simulate, steps_for)
from fkavg.cli import main, parse_config
from fkavg.harness import convergence_csv, draw_windows, mvt_csv, path_csv
from helpers import const_ebar

Q1 = make_field("const", c=1)
K2 = make_field("const", c=2)
KS = make_field("offset_sin", a=2, b=1)
OU = make_model("ou", theta=1.0, mu=0.0, sigma=math.sqrt(2.0))
FLAT = make_model("constant_state", x0=0.0)


def flat_config(**kw):
    base = dict(model=FLAT, q=Q1, K=K2, dt=0.01, T=100.0, n_paths=1, master_seed=0)
    base.update(kw)
    return RunConfig(**base)


class TestStepsFor:
    def test_integral_ratios_accepted(self):
        assert steps_for(100.0, 0.01) == 10_000
        assert steps_for(1.0, 1e-3) == 1000
        assert steps_for(250.0, 0.01) == 25_000

    def test_non_integral_rejected(self):
        with pytest.raises(ConfigError, match="integral step count"):
            steps_for(1.0, 0.3)


class TestRunLimit:
    def test_constant_case_closed_form(self):
        row = run_limit(flat_config())
        assert row.ebar_mean == pytest.approx(const_ebar(1.0, 2.0, 100.0), rel=1e-9)
        assert row.ebar_stderr == 0.0
        assert row.target == 0.5
        assert row.abs_gap == pytest.approx(0.0025, rel=1e-6)

    def test_deterministic_reruns(self):
        a = run_limit(flat_config(n_paths=3))
        b = run_limit(flat_config(n_paths=3))
        assert a == b

    def test_matched_fields_hit_target_one(self):
        config = RunConfig(model=OU, q=KS, K=KS, dt=0.01, T=50.0, n_paths=4,
                           master_seed=7, x0="stationary")
        row = run_limit(config)
        assert row.target == pytest.approx(1.0, abs=1e-9)
        # q = K: ebar_T = 1 - (1/T) int (1 - e^{-A(T)+A(t)}) dt/... up to O(1/T)
        assert row.abs_gap < 0.05

    def test_assumption_gate(self):
        bad = flat_config(model=OU, K=make_field("offset_sin", a=1, b=1), T=10.0)
        with pytest.raises(AssumptionViolationError):
            run_limit(bad)

    def test_violation_override(self):
        bad = flat_config(model=make_model("constant_state", x0=2.0),
                          K=make_field("offset_sin", a=1, b=1), T=10.0,
                          x0=2.0, allow_violations=True)
        row = run_limit(bad)  # path sits at x=2 where K = 1 + sin 2 > 0
        assert math.isfinite(row.ebar_mean)


class TestRunConverge:
    def test_constant_gaps_match_closed_form(self):
        rows = run_converge(flat_config(T=None, t_ladder=(50.0, 100.0, 200.0)))
        # finite-horizon bias of the flat run: (c/k) (1 - e^{-kT})/(kT)
        for row, expect in zip(rows, (0.005, 0.0025, 0.00125)):
            assert row.abs_gap == pytest.approx(expect, rel=1e-6)
            assert row.target == 0.5

    def test_single_rung_equals_run_limit(self):
        ladder = run_converge(flat_config(T=None, t_ladder=(25.0,)))
        single = run_limit(flat_config(T=25.0))
        assert ladder == [single]

    def test_prefix_reuse_matches_direct_runs(self):
        config = RunConfig(model=OU, q=Q1, K=KS, dt=0.01, t_ladder=(5.0, 10.0),
                           n_paths=2, master_seed=3, x0=0.0)
        rows = run_converge(config)
        short = run_limit(RunConfig(model=OU, q=Q1, K=KS, dt=0.01, T=5.0,
                                    n_paths=2, master_seed=3, x0=0.0))
        assert rows[0].ebar_mean == short.ebar_mean  # bit-identical by prefix property

    def test_zero_source_rows(self):
        rows = run_converge(flat_config(q=make_field("const", c=0), T=None,
                                        t_ladder=(10.0, 20.0)))
        for row in rows:
            assert row.ebar_mean == 0.0
            assert row.abs_gap == 0.0

    def test_ladder_must_increase(self):
        with pytest.raises(ConfigError, match="increasing"):
            run_converge(flat_config(T=None, t_ladder=(100.0, 50.0)))

    def test_worker_count_invariance(self):
        config = RunConfig(model=OU, q=Q1, K=KS, dt=0.01, t_ladder=(2.0, 4.0),
                           n_paths=4, master_seed=9, x0="stationary")
        serial = run_converge(config)
        parallel = run_converge(RunConfig(**{**config.__dict__, "workers": 3}))
        assert serial == parallel


class TestRunMvt:
    def test_matched_fields_all_tiny_residuals(self):
        config = RunConfig(model=OU, q=KS, K=KS, dt=0.01, T=10.0, n_paths=2,
                           master_seed=5, windows=10)
        records, summary = run_mvt(config)
        assert summary["n_records"] == 20
        assert summary["crossing_rate"] == 1.0
        assert summary["max_abs_residual"] <= 1e-12

    def test_windows_respect_minimum(self):
        for lo, hi in draw_windows(500, 50, 11, 0):
            assert hi - lo >= 10
            assert 0 <= lo < hi <= 500

    def test_deterministic_records(self):
        config = RunConfig(model=OU, q=Q1, K=KS, dt=0.01, T=5.0, n_paths=1,
                           master_seed=5, windows=1)
        a, _ = run_mvt(config)
        b, _ = run_mvt(config)
        assert a == b


class TestStationaryStart:
    def test_draws_differ_across_paths_and_reproduce(self):
        config = RunConfig(model=OU, q=Q1, K=KS, dt=0.01, T=1.0, n_paths=4,
                           master_seed=13, x0="stationary")
        paths = run_simulate(config)
        starts = [p.states[0] for p in paths]
        assert len(set(starts)) == 4
        again = [p.states[0] for p in run_simulate(config)]
        assert starts == again

    def test_increments_shared_with_fixed_start(self):
        # draw 0 is reserved for x0 whether or not it is used, so the noise
        # applied after the start is identical for fixed and stationary runs
        fixed = run_simulate(RunConfig(model=OU, q=Q1, K=KS, dt=0.01, T=1.0,
                                       n_paths=1, master_seed=13, x0=0.0))[0]
        stat = run_simulate(RunConfig(model=OU, q=Q1, K=KS, dt=0.01, T=1.0,
                                      n_paths=1, master_seed=13, x0="stationary"))[0]
        inc_fixed = np.diff(fixed.states) + 1.0 * fixed.states[:-1] * 0.01
        inc_stat = np.diff(stat.states) + 1.0 * stat.states[:-1] * 0.01
        np.testing.assert_allclose(inc_fixed, inc_stat, atol=1e-12)


class TestCsvOutput:
    def test_path_csv_format(self):
        path = run_simulate(flat_config(T=0.02, model=make_model("constant_state", x0=1.0),
                                        x0=1.0))[0]
        buf = io.StringIO()
        path_csv(buf, path)
        lines = buf.getvalue().split("\r\n")
        assert lines[0] == "t,x"
        assert lines[1] == "0,1"
        # %.17g trims trailing zeros but keeps every significant digit
        assert lines[2] == "0.01,1"
        assert float(lines[2].split(",")[0]) == path.times[1]

    def test_booleans_lowercase(self):
        config = RunConfig(model=OU, q=KS, K=KS, dt=0.01, T=5.0, n_paths=1,
                           master_seed=5, windows=2)
        records, _ = run_mvt(config)
        buf = io.StringIO()
        mvt_csv(buf, records, config.dt)
        body = buf.getvalue()
        assert "true" in body or "false" in body
        assert "True" not in body and "False" not in body

    def test_seventeen_significant_digits(self):
        row = run_limit(flat_config(T=1.0))
        buf = io.StringIO()
        convergence_csv(buf, [row])
        value = buf.getvalue().split("\r\n")[1].split(",")[1]
        assert value == f"{row.ebar_mean:.17g}"


class TestCli:
    def test_parse_config_example(self):
        cmd, config = parse_config([
            "limit", "--model", "ou(theta=1,mu=0,sigma=1.4142136)", "--q", "const(1)",
            "--K", "offset_sin(a=2,b=1)", "--T", "500", "--dt", "0.01",
            "--paths", "8", "--seed", "42",
        ])
        assert cmd == "limit"
        assert config.n_paths == 8
        assert config.master_seed == 42
        assert config.model.kind == "ou"

    def test_non_integral_grid_exits_2(self, capsys):
        code = main(["limit", "--model", "constant_state(x0=0)", "--q", "const(1)",
                     "--K", "const(2)", "--T", "1", "--dt", "0.3"])
        assert code == 2
        assert "integral step count" in capsys.readouterr().err

    def test_unknown_flag_exits_2(self):
        with pytest.raises(SystemExit) as info:
            main(["limit", "--Q", "const(1)"])
        assert info.value.code == 2

    def test_limit_writes_csv(self, tmp_path, capsys):
        out = tmp_path / "row.csv"
        code = main(["limit", "--model", "constant_state(x0=0)", "--q", "const(1)",
                     "--K", "const(2)", "--T", "100", "--dt", "0.01", "--out", str(out)])
        assert code == 0
        text = out.read_bytes().decode()
        assert text.startswith("T,ebar_mean,ebar_stderr,target,abs_gap,n_paths")
        assert text.split("\r\n")[1].split(",")[3] == "0.5"

    def test_violation_exit_code(self):
        code = main(["limit", "--model", "ou(theta=1,mu=0,sigma=1)", "--q", "const(1)",
                     "--K", "offset_sin(a=1,b=1)", "--T", "1", "--dt", "0.01"])
        assert code == 4

    def test_config_file_merging_and_override(self, tmp_path):
        cfg = tmp_path / "run.json"
        cfg.write_text(json.dumps({
            "model": "constant_state(x0=0)", "q": "const(1)", "K": "const(2)",
            "T": 100, "dt": 0.01, "seed": 1, "paths": 2,
        }))
        cmd, config = parse_config(["limit", "--config", str(cfg), "--seed", "9"])
        assert config.master_seed == 9  # flag wins
        assert config.n_paths == 2      # file fills the rest

    def test_config_file_unknown_key(self, tmp_path, capsys):
        cfg = tmp_path / "run.json"
        cfg.write_text(json.dumps({"modle": "constant_state(x0=0)"}))
        code = main(["limit", "--config", str(cfg)])
        assert code == 2
        assert "modle" in capsys.readouterr().err

    def test_missing_required_key_named(self, capsys):
        code = main(["limit", "--model", "constant_state(x0=0)", "--q", "const(1)",
                     "--K", "const(2)", "--dt", "0.01"])
        assert code == 2
        assert "--T" in capsys.readouterr().err

    def test_simulate_to_stdout(self, capsys):
        code = main(["simulate", "--model", "constant_state(x0=1)", "--q", "const(1)",
                     "--K", "const(2)", "--T", "0.1", "--dt", "0.01"])
        assert code == 0
        out = capsys.readouterr().out
        assert out.startswith("t,x")

    def test_functional_csv_columns(self, tmp_path):
        out = tmp_path / "series.csv"
        code = main(["functional", "--model", "constant_state(x0=0)", "--q", "const(1)",
                     "--K", "const(2)", "--T", "1", "--dt", "0.01", "--out", str(out)])
        assert code == 0
        assert out.read_text().startswith("t,A,Y,ebar")

    def test_multi_path_files(self, tmp_path):
        out = tmp_path / "paths.csv"
        code = main(["simulate", "--model", "ou(theta=1,mu=0,sigma=1)", "--q", "const(1)",
                     "--K", "const(2)", "--T", "0.1", "--dt", "0.01",
                     "--paths", "2", "--out", str(out)])
        assert code == 0
        assert (tmp_path / "paths_p0.csv").exists()
        assert (tmp_path / "paths_p1.csv").exists()

    def test_converge_ladder(self, tmp_path):
        out = tmp_path / "ladder.csv"
        code = main(["converge", "--model", "constant_state(x0=0)", "--q", "const(1)",
                     "--K", "const(2)", "--dt", "0.01", "--T-ladder", "50,100",
                     "--out", str(out)])
        assert code == 0
        assert len(out.read_bytes().decode().strip().split("\r\n")) == 3

    def test_check_assumptions_exit_codes(self, capsys):
        ok = main(["check-assumptions", "--q", "const(1)", "--K", "offset_sin(a=2,b=1)"])
        assert ok == 0
        bad = main(["check-assumptions", "--q", "const(1)", "--K", "offset_sin(a=1,b=1)"])
        assert bad == 4
        assert "violation" in capsys.readouterr().out
