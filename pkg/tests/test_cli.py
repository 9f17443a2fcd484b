import json
from pathlib import Path

import pytest

from kinfp import cli


def write_config(tmp_path, body):
    p = tmp_path / "exp.ini"
    p.write_text(body)
    return str(p)


WEAK_HARNACK = """
[experiment]
kind = weak-harnack
seed = 5

[params]
count = 1
"""


class TestConfigParsing:
    def test_unknown_key_rejected(self, tmp_path):
        path = write_config(tmp_path, "[experiment]\nkind = solve\nbogus = 1\n")
        assert cli.run(path, out=str(tmp_path / "out")) == 2
        assert not (tmp_path / "out").exists()  # no partial outputs

    def test_unknown_kind_rejected(self, tmp_path):
        path = write_config(tmp_path, "[experiment]\nkind = nonsense\n")
        assert cli.run(path) == 2

    def test_missing_file(self):
        assert cli.run("/nonexistent/config.ini") == 2

    def test_out_of_range_parameter(self, tmp_path):
        path = write_config(
            tmp_path, "[experiment]\nkind = pop\n\n[params]\neps = 0.7\n")
        assert cli.run(path) == 2

    def test_defaults_loaded(self, tmp_path):
        path = write_config(tmp_path, WEAK_HARNACK)
        cfg = cli.load_config(path)
        assert cfg.kind == "weak-harnack" and cfg.seed == 5
        assert cfg.params["omega"] == 1e-2


class TestRun:
    def test_weak_harnack_constant_row(self, tmp_path):
        path = write_config(tmp_path, WEAK_HARNACK)
        out = tmp_path / "out"
        assert cli.run(path, out=str(out)) == 0
        rows = (out / "summary.csv").read_text().strip().splitlines()
        assert rows[0] == "id,seed,lhs,rhs,fitted_c,pass"
        first = rows[1].split(",")
        assert first[0].startswith("weak-harnack/")
        assert first[-1] == "pass"
        payload = json.loads((out / "report.json").read_text())
        rec = payload["reports"][0]
        assert rec["params"]["expected_c"] == pytest.approx(
            rec["fitted_c"], rel=1e-9)

    def test_determinism_byte_identical(self, tmp_path):
        path = write_config(tmp_path, WEAK_HARNACK)
        a, b = tmp_path / "a", tmp_path / "b"
        assert cli.run(path, out=str(a)) == 0
        assert cli.run(path, out=str(b)) == 0
        assert (a / "summary.csv").read_bytes() == (b / "summary.csv").read_bytes()

    def test_seed_override_changes_rows(self, tmp_path):
        path = write_config(tmp_path, WEAK_HARNACK)
        a, b = tmp_path / "a", tmp_path / "b"
        assert cli.run(path, out=str(a)) == 0
        assert cli.run(path, seed=99, out=str(b)) == 0
        assert (a / "summary.csv").read_bytes() != (b / "summary.csv").read_bytes()

    def test_hypothesis_failure_exit_code(self, tmp_path, monkeypatch):
        from kinfp.harness import HypothesisError

        def boom(cfg):
            raise HypothesisError("zero-set measure below 0.25")

        monkeypatch.setitem(cli._RUNNERS, "weak-harnack", boom)
        path = write_config(tmp_path, WEAK_HARNACK)
        assert cli.run(path, out=str(tmp_path / "out")) == 3
        assert not (tmp_path / "out").exists()

    def test_numerical_abort_exit_code(self, tmp_path, monkeypatch):
        from kinfp.fpsolver import NumericalAbort

        def boom(cfg):
            raise NumericalAbort("non-finite values at step 3")

        monkeypatch.setitem(cli._RUNNERS, "weak-harnack", boom)
        path = write_config(tmp_path, WEAK_HARNACK)
        assert cli.run(path, out=str(tmp_path / "out")) == 4

    def test_threaded_matches_serial(self, tmp_path):
        body = """
[experiment]
kind = inkspots
seed = 2

[params]
count = 2
"""
        path = write_config(tmp_path, body)
        a, b = tmp_path / "a", tmp_path / "b"
        assert cli.run(path, out=str(a), threads=1) == 0
        assert cli.run(path, out=str(b), threads=4) == 0
        assert (a / "summary.csv").read_bytes() == (b / "summary.csv").read_bytes()


class TestReplay:
    def test_fresh_report_replays(self, tmp_path):
        path = write_config(tmp_path, WEAK_HARNACK)
        out = tmp_path / "out"
        assert cli.run(path, out=str(out)) == 0
        assert cli.replay(str(out / "report.json")) is True

    def test_edited_lhs_detected(self, tmp_path):
        path = write_config(tmp_path, WEAK_HARNACK)
        out = tmp_path / "out"
        assert cli.run(path, out=str(out)) == 0
        payload = json.loads((out / "report.json").read_text())
        payload["reports"][0]["lhs"] += 1e-9
        (out / "report.json").write_text(json.dumps(payload))
        assert cli.replay(str(out / "report.json")) is False

    def test_version_mismatch_raises(self, tmp_path):
        path = write_config(tmp_path, WEAK_HARNACK)
        out = tmp_path / "out"
        assert cli.run(path, out=str(out)) == 0
        payload = json.loads((out / "report.json").read_text())
        payload["version"] = "0.0.0"
        (out / "report.json").write_text(json.dumps(payload))
        with pytest.raises(RuntimeError):
            cli.replay(str(out / "report.json"))


class TestMain:
    def test_list_experiments(self, capsys):
        assert cli.main(["--list-experiments"]) == 0
        out = capsys.readouterr().out
        assert "weak-harnack" in out and "inkspots" in out

    def test_requires_config(self):
        with pytest.raises(SystemExit):
            cli.main([])

    def test_end_to_end(self, tmp_path):
        path = write_config(tmp_path, WEAK_HARNACK)
        code = cli.main(["--config", path, "--out", str(tmp_path / "o")])
        assert code == 0
        assert (tmp_path / "o" / "summary.csv").exists()
