import json
import logging
import os

import numpy as np
import pytest

from cli.experiment_manager import ExperimentManager
from utils.lab_logger import LabLogger, create_logger_for_experiment, prune_session_logs
from utils.utils import (create_output_filename, find_written_reports, format_value,
                         get_resume_info, read_csv_rows, write_csv_atomic, write_json_atomic)


class TestFormatValue:
    @pytest.mark.parametrize("value,expected", [
        (None, ""),
        (True, "true"),
        (np.bool_(False), "false"),
        (3, "3"),
        (0.1, "0.1"),
        (1.0 / 3.0, "0.333333333333"),
        (np.float64(2.0), "2.0"),
        (float("nan"), "nan"),
        (float("-inf"), "-inf"),
        ("glue", "glue"),
    ])
    def test_cells(self, value, expected):
        assert format_value(value) == expected


class TestReportFiles:
    def test_output_filename(self, tmp_path):
        path = create_output_filename("sweep-decay", str(tmp_path))
        assert os.path.basename(path) == "sweep-decay_report.csv"
        assert create_output_filename("gh", "out", "json").endswith("gh_report.json")

    def test_csv_rows_are_sorted_and_complete(self, tmp_path):
        path = str(tmp_path / "reports" / "demo_report.csv")
        rows = [{"delta": 0.25, "value": 2.0}, {"delta": 0.125, "value": None, "pass": False}]
        write_csv_atomic(path, rows, ["delta", "value", "pass"], sort_key=["delta"])
        read = read_csv_rows(path)
        assert [r["delta"] for r in read] == ["0.125", "0.25"]
        assert read[0]["value"] == "" and read[0]["pass"] == "false"
        assert read[1]["pass"] == ""
        assert not [name for name in os.listdir(tmp_path / "reports") if name.startswith(".tmp_")]

    def test_json_keys_are_sorted(self, tmp_path):
        path = str(tmp_path / "summary.json")
        write_json_atomic(path, {"b": np.float64(1.5), "a": np.array([1, 2])})
        with open(path, encoding="utf-8") as handle:
            text = handle.read()
        assert text.index('"a"') < text.index('"b"')
        assert json.loads(text) == {"a": [1, 2], "b": 1.5}

    def test_failed_write_keeps_the_old_file(self, tmp_path):
        path = str(tmp_path / "summary.json")
        write_json_atomic(path, {"ok": True})
        with pytest.raises(TypeError):
            write_json_atomic(path, {"bad": object()})
        with open(path, encoding="utf-8") as handle:
            assert json.load(handle) == {"ok": True}

    def test_resume_info(self, tmp_path):
        reports = str(tmp_path)
        write_csv_atomic(create_output_filename("solve", reports), [], ["delta"])
        write_csv_atomic(create_output_filename("solve-fits", reports), [], ["series"])
        assert find_written_reports(reports) == {"solve", "solve-fits"}
        to_run, done = get_resume_info(["verify-identities", "solve", "gh"], reports)
        assert to_run == ["verify-identities", "gh"]
        assert done == ["solve"]

    def test_resume_without_directory(self, tmp_path):
        to_run, done = get_resume_info(["gh"], str(tmp_path / "missing"))
        assert to_run == ["gh"] and done == []


class TestExperimentManager:
    def test_start_creates_layout_and_metadata(self, tmp_path):
        output = tmp_path / "run"
        manager = ExperimentManager(str(output))
        manager.start({"seed": 0}, ["gh"], "1.0.0")
        for name in ("reports", "plots", "logs"):
            assert (output / name).is_dir()
        report = output / "reports" / "gh_report.csv"
        report.write_text("delta\n", encoding="utf-8")
        manager.add_written_file(str(report), "report")
        manager.finish(0)
        metadata = json.loads((output / "run_metadata.json").read_text(encoding="utf-8"))
        assert metadata["exit_status"] == 0
        assert metadata["files_written"] == [{"path": os.path.join("reports", "gh_report.csv"),
                                              "type": "report"}]
        assert metadata["preexisting_output"] is False

    def test_empty_run_is_removed(self, tmp_path):
        output = tmp_path / "run"
        manager = ExperimentManager(str(output))
        manager.start({}, [], "1.0.0")
        assert not manager.has_saved_content()
        manager.cleanup_empty_run()
        assert not output.exists()

    def test_preexisting_output_is_kept(self, tmp_path):
        manager = ExperimentManager(str(tmp_path))
        manager.start({}, [], "1.0.0")
        manager.cleanup_empty_run()
        assert tmp_path.exists()

    def test_paths_before_start(self, tmp_path):
        manager = ExperimentManager(str(tmp_path / "run"))
        assert manager.get_current_log_file_path() is None
        assert manager.get_paths()["reports"] == str(tmp_path / "run" / "reports")


class TestLabLogger:
    def test_package_logs_reach_the_session_file(self, tmp_path):
        path = tmp_path / "logs" / "session_test.log"
        with LabLogger(str(path)) as session:
            session.log_operation_start("sweep", {"deltas": 6})
            logging.getLogger("core.ma_solver").warning("residuo alto")
        text = path.read_text(encoding="utf-8")
        assert "AVVIO sweep [deltas=6]" in text
        assert "residuo alto" in text
        assert not logging.getLogger("core").handlers

    def test_exceptions_are_logged_with_traceback(self, tmp_path):
        path = tmp_path / "session_crash.log"
        with pytest.raises(RuntimeError):
            with LabLogger(str(path)):
                raise RuntimeError("boom")
        text = path.read_text(encoding="utf-8")
        assert "RuntimeError: boom" in text

    def test_only_recent_sessions_are_kept(self, tmp_path):
        for i in range(5):
            path = tmp_path / f"session_{i}.log"
            path.write_text("x", encoding="utf-8")
            os.utime(path, (1000 + i, 1000 + i))
        current = tmp_path / "session_4.log"
        prune_session_logs(tmp_path, 3, current=current)
        assert sorted(p.name for p in tmp_path.iterdir()) == [
            "session_2.log", "session_3.log", "session_4.log"]

    def test_logger_for_experiment(self, tmp_path):
        manager = ExperimentManager(str(tmp_path / "run"))
        assert create_logger_for_experiment(manager) is None
        manager.start({}, [], "1.0.0")
        session = create_logger_for_experiment(manager)
        try:
            assert session.log_file_path.startswith(str(tmp_path / "run" / "logs"))
        finally:
            session.close()
