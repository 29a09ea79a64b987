import json
import subprocess
import sys
from pathlib import Path

import jsonschema
import pytest

from deltaquant import catalog
from deltaquant.cli import EXIT_INCONCLUSIVE, EXIT_INVALID, EXIT_OK, JobSpec, emit_plot_data, main, run_job
from deltaquant.serialize import InputError, dumps, pair_to_document, parse_input

DOCS = Path(__file__).resolve().parents[1] / "docs"
REPORT_SCHEMA = json.loads((DOCS / "report.schema.json").read_text())
INPUT_SCHEMA = json.loads((DOCS / "input.schema.json").read_text())


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr().out
    return code, out


def write(tmp_path, doc, name="in.json"):
    path = tmp_path / name
    path.write_text(json.dumps(doc))
    return str(path)


class TestParse:
    def test_catalog_key(self):
        pair = parse_input("P2:O(1)").pair
        assert sorted(pair.polytope.vertices) == [(0, 0), (0, 1), (1, 0)]

    def test_profile_name(self):
        parsed = parse_input("bump", degree=2)
        assert parsed.pair is None and parsed.profile.degree == 2

    @pytest.mark.parametrize("key", catalog.PAIR_KEYS)
    @pytest.mark.parametrize("with_fan", [False, True])
    def test_round_trip(self, tmp_path, key, with_fan):
        pair = catalog.pair(key)
        doc = pair_to_document(pair, include_fan=with_fan)
        jsonschema.validate(doc, INPUT_SCHEMA)
        assert parse_input(write(tmp_path, doc)).pair == pair

    def test_klt_violation(self, tmp_path):
        doc = {"polytope": [[0], [2]], "boundary": [{"ray": [1], "coefficient": 1}]}
        with pytest.raises(InputError, match="klt violated"):
            parse_input(write(tmp_path, doc))

    def test_non_smooth_fan(self, tmp_path):
        doc = {"polytope": [[0, 0], [2, 0], [0, 1]],
               "fan": {"rays": [[1, 0], [0, 1], [-1, -2]], "cones": [[0, 1], [1, 2], [0, 2]]}}
        with pytest.raises(InputError, match="requires smooth cone"):
            parse_input(write(tmp_path, doc))

    def test_inconsistent_fan(self, tmp_path):
        doc = {"polytope": [[0, 0], [1, 0], [0, 1]],
               "fan": {"rays": [[1, 0], [0, 1], [-1, 0], [0, -1]],
                       "cones": [[0, 1], [1, 2], [2, 3], [0, 3]]}}
        with pytest.raises(InputError):
            parse_input(write(tmp_path, doc))

    def test_degenerate_polytope(self, tmp_path):
        with pytest.raises(InputError, match="inconsistent polytope"):
            parse_input(write(tmp_path, {"polytope": [[0, 0], [1, 1], [2, 2]]}))

    def test_non_lattice_vertex(self, tmp_path):
        with pytest.raises(InputError, match="lattice"):
            parse_input(write(tmp_path, {"polytope": [[0], ["1/2"]]}))

    def test_missing_file_and_bad_key(self, tmp_path):
        with pytest.raises(InputError, match="not found"):
            parse_input(str(tmp_path / "nope.json"))
        with pytest.raises(InputError):
            parse_input("P7:O(9)")

    def test_sampled_profile(self, tmp_path):
        import numpy as np
        from deltaquant.metrics import named_profile
        xs = np.linspace(-30, 30, 241)
        vals = named_profile("bump", 1)(xs)
        doc = {"polytope": [[0], [1]], "metric_profile": {"samples": [[float(x), float(v)] for x, v in zip(xs, vals)]}}
        jsonschema.validate(doc, INPUT_SCHEMA)
        parsed = parse_input(write(tmp_path, doc))
        assert parsed.profile_name == "samples"
        assert abs(parsed.profile(np.array([0.3]))[0] - vals[xs.searchsorted(0.25)]) < 0.05


class TestRunJob:
    def test_invariants_p1(self, capsys):
        code, out = run(capsys, "--catalog", "P1:O(1)", "--task", "invariants")
        rep = json.loads(out)
        assert code == EXIT_OK
        assert rep["delta"] == "2/1" and rep["alpha"] == "1/1" and rep["ding_stable"] is True
        jsonschema.validate(rep, REPORT_SCHEMA)

    def test_nef_threshold_square(self):
        rep, code = run_job(JobSpec("P1xP1:O(1,2)", "invariants"))
        assert code == 0 and rep["nef_threshold"] == "1/1"
        assert rep["csck"]["verdict"] is False

    def test_twisted_invariants_skip_csck(self):
        rep, code = run_job(JobSpec("P1:O(2)+1/2[0]", "invariants"))
        assert code == 0 and rep["delta"] == "1/2" and "csck" not in rep

    def test_convergence_p2(self, capsys):
        code, out = run(capsys, "--catalog", "P2:O(1)", "--task", "convergence", "--m-range", "1..10")
        rep = json.loads(out)
        assert code == 0 and len(rep["delta_m"]) == 10
        assert all(r["delta_m"] == "3/1" for r in rep["delta_m"])
        jsonschema.validate(rep, REPORT_SCHEMA)

    def test_quantize_zero(self, capsys):
        code, out = run(capsys, "--catalog", "zero", "--task", "quantize", "--m-range", "4")
        rep = json.loads(out)
        assert code == 0 and rep["levels"][0]["partition_residual"] < 1e-8
        jsonschema.validate(rep, REPORT_SCHEMA)

    def test_quantize_bump_on_pair(self):
        rep, code = run_job(JobSpec("P1:O(2)", "quantize", m_range=(2, 4), profile="bump"))
        assert code == 0 and rep["profile"] == "bump" and rep["degree"] == 2
        assert all(r["max_principle_min_margin"] >= -1e-8 for r in rep["levels"])

    def test_probe(self, capsys):
        code, out = run(capsys, "--catalog", "P1:O(2)+1/2[0]", "--task", "probe", "--lambda-grid", "0.1:1:10")
        rep = json.loads(out)
        assert code == EXIT_OK and rep["reference_ratio"] == "1/2"
        lo, hi = rep["mt_probe"]["interval"]
        assert lo <= 0.5 <= hi
        jsonschema.validate(rep, REPORT_SCHEMA)

    def test_probe_inconclusive_exit_code(self):
        rep, code = run_job(JobSpec("P1:O(2)", "probe", lambda_grid=(0.2, 0.4, 0.6)))
        assert code == EXIT_INCONCLUSIVE and rep["status"] == "inconclusive"
        doc = json.loads(dumps(rep))
        assert doc["mt_probe"]["estimate"] is None
        jsonschema.validate(doc, REPORT_SCHEMA)

    def test_probe_requires_grid(self, capsys):
        code, out = run(capsys, "--catalog", "P1:O(1)", "--task", "probe")
        rep = json.loads(out)
        assert code == EXIT_INVALID and rep["error"]["invariant"] == "lambda grid"

    def test_klt_file_exit_code(self, capsys, tmp_path):
        path = write(tmp_path, {"polytope": [[0], [2]], "boundary": [{"ray": [1], "coefficient": "1"}]})
        code, out = run(capsys, "--input", path)
        rep = json.loads(out)
        assert code == EXIT_INVALID and "klt violated" in rep["error"]["message"]
        assert rep["error"]["module"] == "cli-harness"
        jsonschema.validate(rep, REPORT_SCHEMA)

    def test_module_tag_for_probe_error(self):
        rep, code = run_job(JobSpec("P1:O(2)", "probe", lambda_grid=(0.5, 1.5), kink=3.0))
        assert code == EXIT_INVALID and rep["error"]["module"] == "energy-functionals"

    def test_profile_input_for_pair_task(self):
        rep, code = run_job(JobSpec("bump", "invariants"))
        assert code == EXIT_INVALID and rep["status"] == "error"

    def test_analytic_task_on_surface(self):
        rep, code = run_job(JobSpec("P2:O(1)", "quantize"))
        assert code == EXIT_INVALID

    @pytest.mark.parametrize("kwargs", [{"task": "bogus"}, {"tolerance": 0.0}, {"fmt": "xml"},
                                        {"m_range": (0, 1)}, {"task": "quantize", "epsilon": 1.5}])
    def test_spec_validation(self, kwargs):
        base = {"source": "P1:O(1)", "task": "invariants"}
        base.update(kwargs)
        with pytest.raises(InputError):
            JobSpec(**base)

    def test_determinism(self):
        spec = JobSpec("F1", "invariants", m_range=(1, 2, 3))
        assert dumps(run_job(spec)[0]) == dumps(run_job(spec)[0])
        q = JobSpec("P1:O(1)", "quantize", m_range=(2, 3), profile="asymmetric")
        assert dumps(run_job(q)[0]) == dumps(run_job(q)[0])


class TestPlotData:
    def test_delta_m_series(self):
        rep, _ = run_job(JobSpec("F1", "convergence", m_range=(1, 2, 3)))
        csv = emit_plot_data(rep)["delta_m"].splitlines()
        assert csv[0] == "m,delta_m"
        assert csv[1] == "1,0.777777777778"

    def test_sandwich_series(self):
        rep, _ = run_job(JobSpec("bump", "quantize", m_range=(2, 4)))
        lines = emit_plot_data(rep)["sandwich"].splitlines()
        assert lines[0].startswith("m,lower_margin") and len(lines) == 3

    def test_probe_series(self):
        rep, _ = run_job(JobSpec("P1:O(1)", "probe", lambda_grid=(0.5, 1.0, 3.0)))
        series = emit_plot_data(rep)
        assert series["probe_slopes"].splitlines()[0] == "lambda,slope"
        assert len(series["probe_slopes"].splitlines()) == 4
        assert series["entropy_ratios"].splitlines()[0] == "s,ratio"

    def test_csv_files(self, tmp_path, capsys):
        stem = tmp_path / "run.csv"
        code = main(["--catalog", "P2:O(1)", "--task", "convergence", "--m-range", "1,2",
                     "--format", "csv", "--output", str(stem)])
        assert code == 0
        assert (tmp_path / "run_delta_m.csv").read_text() == "m,delta_m\n1,3\n2,3\n"

    def test_csv_stdout(self, capsys):
        code, out = run(capsys, "--catalog", "P1:O(1)", "--task", "convergence", "--m-range", "1,2",
                        "--format", "csv")
        assert code == 0 and out.startswith("# series: delta_m\nm,delta_m\n")

    def test_no_tabular_section(self):
        assert emit_plot_data({"delta": "1/1"}) == {}


def test_console_entry_point():
    proc = subprocess.run([sys.executable, "-m", "deltaquant.cli", "--catalog", "P2:O(3)"],
                          capture_output=True, text=True, check=False)
    assert proc.returncode == 0
    assert json.loads(proc.stdout)["delta"] == "1/1"


def test_bad_m_range_flag(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["--catalog", "P1:O(1)", "--m-range", "a..b"])
    assert exc.value.code == 2
