#!/usr/bin/env python3
"""
Tests for the run record store
"""

import json

import jsonschema
import pytest
from click.testing import CliRunner

try:
    from config_manager import RunConfig, serialize_config
    from run_store import (
        RunRecord,
        cli,
        config_hash,
        load_record,
        record_files,
        store_dir,
        utc_now,
        validate_record,
        write_record,
    )
except ImportError:
    pytest.skip("run_store module not available", allow_module_level=True)


def make_record(status="ok", results=None, started_at=None):
    serialized = serialize_config(RunConfig())
    return RunRecord(
        command="verify",
        config=json.loads(serialized),
        config_hash=config_hash(serialized),
        started_at=started_at or utc_now(),
        finished_at=utc_now(),
        status=status,
        results=results or {"kind": "probe_reports", "reports": [{
            "name": "bracket_positivity", "lhs": 0.1, "rhs": 0.0, "residual": 0.1,
            "passed": True, "tolerance": 0.0, "status": "passed", "details": {},
        }]},
    )


class TestRunRecord:
    """Test cases for records and their schema"""

    def test_config_hash_is_stable(self):
        serialized = serialize_config(RunConfig())
        assert config_hash(serialized) == config_hash(serialize_config(RunConfig()))
        assert len(config_hash(serialized)) == 64
        assert config_hash(serialized) != config_hash(serialized + " ")

    def test_record_validates(self):
        validate_record(make_record().to_dict())

    def test_failure_record_validates(self):
        validate_record(make_record("failed", {"kind": "failure", "error": "NumericError: overflow"}).to_dict())

    def test_unknown_status_rejected(self):
        with pytest.raises(jsonschema.ValidationError):
            validate_record(make_record(status="done").to_dict())

    def test_extra_field_rejected(self):
        data = make_record().to_dict()
        data["host"] = "build-1"
        with pytest.raises(jsonschema.ValidationError):
            validate_record(data)

    def test_results_json_has_no_timestamps(self):
        first = make_record()
        second = make_record()
        assert first.results_json() == second.results_json()
        assert "started_at" not in first.results_json()

    def test_round_trip(self):
        record = make_record()
        assert RunRecord.from_dict(record.to_dict()) == record


class TestWriteRecord:
    """Test cases for write-once persistence"""

    def test_store_dir_from_environment(self, run_store_dir):
        assert store_dir() == run_store_dir
        assert str(store_dir("elsewhere")) == "elsewhere"

    def test_write_and_load(self, run_store_dir):
        record = make_record()
        path = write_record(record)
        assert path.parent == run_store_dir
        assert load_record(path) == record.to_dict()

    def test_never_overwrites(self, run_store_dir):
        """Two records with the same name both survive"""
        started = utc_now()
        first = write_record(make_record(started_at=started))
        second = write_record(make_record(status="failed", started_at=started))
        assert first != second
        assert second.name.endswith("-1.json")
        assert load_record(first)["status"] == "ok"
        assert load_record(second)["status"] == "failed"
        assert record_files() == sorted([first, second])

    def test_empty_store(self, run_store_dir):
        assert record_files() == []


class TestRunsCommands:
    """Test cases for the list and inspect commands"""

    def test_list_empty(self, run_store_dir):
        result = CliRunner().invoke(cli, ["list"])
        assert result.exit_code == 0
        assert "exist" in result.output

    def test_list_records(self, run_store_dir):
        path = write_record(make_record())
        result = CliRunner().invoke(cli, ["list"])
        assert result.exit_code == 0
        assert "verify" in result.output
        assert path.name[:8] in result.output

    def test_inspect_and_validate(self, run_store_dir):
        path = write_record(make_record())
        result = CliRunner().invoke(cli, ["inspect", path.name, "--validate"])
        assert result.exit_code == 0
        assert "bracket_positivity" in result.output
        assert "validates" in result.output

    def test_inspect_invalid_record(self, run_store_dir):
        run_store_dir.mkdir(parents=True)
        bad = run_store_dir / "bad.json"
        bad.write_text(json.dumps({"command": "solve", "status": "ok"}))
        result = CliRunner().invoke(cli, ["inspect", str(bad), "--validate"])
        assert result.exit_code == 1
        assert "Schema validation failed" in result.output

    def test_inspect_missing(self, run_store_dir):
        result = CliRunner().invoke(cli, ["inspect", "nope.json"])
        assert result.exit_code == 1
        assert "not found" in result.output
