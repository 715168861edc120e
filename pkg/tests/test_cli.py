import json
import os

import numpy as np
import pytest
from click.testing import CliRunner

from lpoa.cli import CSV_HEADER, main
from lpoa.driver import RunConfig, run
from lpoa.trace_io import (SCHEMA_VERSION, TraceFormatError, dumps_trace,
                           load_trace, save_trace, trace_from_dict,
                           trace_to_dict)


@pytest.fixture
def runner():
    return CliRunner()


@pytest.fixture(scope="module")
def small_trace():
    return run(RunConfig(problem_key="ellipse", p=2.0, epsilon=0.05))


class TestTraceIO:
    def test_roundtrip(self, small_trace, tmp_path):
        path = tmp_path / "t.json"
        save_trace(str(path), small_trace, {"created_at": "x"})
        loaded = load_trace(str(path))
        assert loaded.config == small_trace.config
        assert loaded.termination == small_trace.termination
        assert len(loaded.iterations) == len(small_trace.iterations)
        for a, b in zip(loaded.iterations, small_trace.iterations):
            assert np.array_equal(a.farthest_vertex, b.farthest_vertex)
            assert a.residual_norm == b.residual_norm
            assert np.array_equal(a.cut_normal, b.cut_normal)
        assert np.allclose(loaded.final_polytope.vertices(),
                           small_trace.final_polytope.vertices())

    def test_schema_keys(self, small_trace):
        doc = trace_to_dict(small_trace)
        assert set(doc) == {"schema_version", "config",
                            "initial_halfspace_count", "iterations",
                            "termination", "final_polytope", "metadata"}
        assert doc["schema_version"] == SCHEMA_VERSION

    def test_missing_key_rejected(self, small_trace):
        doc = trace_to_dict(small_trace)
        doc.pop("termination")
        with pytest.raises(TraceFormatError):
            trace_from_dict(doc)

    def test_bad_schema_version(self, small_trace):
        doc = trace_to_dict(small_trace)
        doc["schema_version"] = 99
        with pytest.raises(TraceFormatError):
            trace_from_dict(doc)

    def test_bad_termination(self, small_trace):
        doc = trace_to_dict(small_trace)
        doc["termination"] = "exploded"
        with pytest.raises(TraceFormatError):
            trace_from_dict(doc)

    def test_invalid_json(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text("{not json")
        with pytest.raises(TraceFormatError):
            load_trace(str(path))

    def test_deterministic_bytes_excluding_metadata(self, small_trace):
        again = run(small_trace.config)
        assert dumps_trace(small_trace, None) == dumps_trace(again, None)


class TestRunCommand:
    def test_converged_exit_zero(self, runner, tmp_path):
        out = tmp_path / "trace.json"
        res = runner.invoke(main, ["run", "--problem", "ellipse", "--p", "2",
                                   "--eps", "0.05", "--out", str(out)])
        assert res.exit_code == 0, res.output
        assert "converged" in res.output
        trace = load_trace(str(out))
        assert trace.termination == "converged"
        md = json.loads(out.read_text())["metadata"]
        assert "created_at" in md and "wall_seconds" in md

    def test_max_iterations_exit_two(self, runner, tmp_path):
        res = runner.invoke(main, ["run", "--problem", "ellipse", "--p", "2",
                                   "--eps", "1e-6", "--max-iters", "3"])
        assert res.exit_code == 2

    def test_unknown_problem_exit_64(self, runner):
        res = runner.invoke(main, ["run", "--problem", "nope", "--p", "2",
                                   "--eps", "0.1"])
        assert res.exit_code == 64
        assert "unknown problem key" in res.output

    def test_svg_written(self, runner, tmp_path):
        svg = tmp_path / "plot.svg"
        res = runner.invoke(main, ["run", "--problem", "ellipse", "--p", "2",
                                   "--eps", "0.05", "--svg", str(svg)])
        assert res.exit_code == 0
        text = svg.read_text()
        assert text.startswith("<svg") and text.rstrip().endswith("</svg>")

    def test_lpoa_seed_env(self, runner, tmp_path):
        out = tmp_path / "trace.json"
        res = runner.invoke(main, ["run", "--problem", "ellipse", "--p", "2",
                                   "--eps", "0.05", "--out", str(out)],
                            env={"LPOA_SEED": "7"})
        assert res.exit_code == 0
        assert load_trace(str(out)).config.seed == 7

    def test_seed_flag_beats_env(self, runner, tmp_path):
        out = tmp_path / "trace.json"
        res = runner.invoke(main, ["run", "--problem", "ellipse", "--p", "2",
                                   "--eps", "0.05", "--out", str(out),
                                   "--seed", "11"],
                            env={"LPOA_SEED": "7"})
        assert res.exit_code == 0
        assert load_trace(str(out)).config.seed == 11


class TestSweepCommand:
    def test_sweep_csv_and_traces(self, runner, tmp_path):
        res = runner.invoke(main, ["sweep", "--problem", "ellipse",
                                   "--p-list", "2,1.25", "--eps", "0.02",
                                   "--out-dir", str(tmp_path)])
        assert res.exit_code == 0, res.output
        csv_path = tmp_path / "ellipse-summary.csv"
        lines = csv_path.read_text().splitlines()
        assert lines[0] == CSV_HEADER
        assert len(lines) == 3
        # rows sorted by p
        assert lines[1].startswith("1.25,") and lines[2].startswith("2,")
        p_star = float(lines[1].split(",")[1])
        assert p_star == pytest.approx(5.0)
        for name in ("ellipse-p1.25.json", "ellipse-p2.json"):
            assert (tmp_path / name).exists()
            load_trace(str(tmp_path / name))

    def test_sweep_failure_status_column(self, runner, tmp_path):
        res = runner.invoke(main, ["sweep", "--problem", "ellipse",
                                   "--p-list", "2", "--eps", "1e-7",
                                   "--max-iters", "3",
                                   "--out-dir", str(tmp_path)])
        assert res.exit_code == 1
        lines = (tmp_path / "ellipse-summary.csv").read_text().splitlines()
        assert lines[0] == CSV_HEADER + ",status"
        assert lines[1].endswith(",max_iterations")

    def test_sweep_parallel_matches_serial(self, runner, tmp_path):
        d1, d2 = tmp_path / "serial", tmp_path / "par"
        for d, jobs in ((d1, "1"), (d2, "2")):
            res = runner.invoke(main, ["sweep", "--problem", "ellipse",
                                       "--p-list", "2,3", "--eps", "0.02",
                                       "--out-dir", str(d), "--jobs", jobs])
            assert res.exit_code == 0, res.output
        assert ((d1 / "ellipse-summary.csv").read_text()
                == (d2 / "ellipse-summary.csv").read_text())

    def test_sweep_svg(self, runner, tmp_path):
        svg = tmp_path / "sweep.svg"
        res = runner.invoke(main, ["sweep", "--problem", "ellipse",
                                   "--p-list", "2", "--eps", "0.02",
                                   "--out-dir", str(tmp_path),
                                   "--svg", str(svg)])
        assert res.exit_code == 0
        assert "</svg>" in svg.read_text()


class TestVerifyCommand:
    def test_clean_trace(self, runner, tmp_path, small_trace):
        path = tmp_path / "t.json"
        save_trace(str(path), small_trace)
        res = runner.invoke(main, ["verify", "--trace", str(path)])
        assert res.exit_code == 0, res.output
        assert "0 violations" in res.output
        report = json.loads(res.output[: res.output.rfind("}") + 1])
        assert report["total_violations"] == 0

    def test_report_out_file(self, runner, tmp_path, small_trace):
        path = tmp_path / "t.json"
        out = tmp_path / "report.json"
        save_trace(str(path), small_trace)
        res = runner.invoke(main, ["verify", "--trace", str(path),
                                   "--out", str(out)])
        assert res.exit_code == 0
        report = json.loads(out.read_text())
        assert report["pairs"] > 0

    def test_corrupted_trace_flagged(self, runner, tmp_path, small_trace):
        # flip one cut normal: support conditions break, exit code 1
        doc = trace_to_dict(small_trace)
        mid = len(doc["iterations"]) // 2
        doc["iterations"][mid]["cut_normal"] = [
            -v for v in doc["iterations"][mid]["cut_normal"]]
        path = tmp_path / "bad.json"
        path.write_text(json.dumps(doc))
        res = runner.invoke(main, ["verify", "--trace", str(path)])
        assert res.exit_code == 1
        assert "violation" in res.output

    def test_malformed_trace_exit_65(self, runner, tmp_path):
        path = tmp_path / "junk.json"
        path.write_text("{\"schema_version\": 1}")
        res = runner.invoke(main, ["verify", "--trace", str(path)])
        assert res.exit_code == 65
        res2 = runner.invoke(main, ["verify", "--trace",
                                    str(tmp_path / "missing.json")])
        assert res2.exit_code == 65

    def test_usage_error_without_args(self, runner):
        res = runner.invoke(main, ["verify"])
        assert res.exit_code != 0

    def test_self_test(self, runner):
        res = runner.invoke(main, ["verify", "--self-test"])
        assert res.exit_code == 0, res.output
        assert "0 violations" in res.output
