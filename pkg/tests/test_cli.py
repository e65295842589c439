import json
import shutil

import pytest

from cpsvuln.cli import main
from cpsvuln.graph import parse_graphml, to_graph
from cpsvuln.modelfmt import example_fcs_text, load_example_fcs
from cpsvuln.vulndb import FIXTURE_DIR

FEED = FIXTURE_DIR / "nvdcve-1.1-fixture.json"


@pytest.fixture
def model_file(tmp_path):
    path = tmp_path / "fcs.model"
    path.write_text(example_fcs_text(), encoding="utf-8")
    return path


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def test_validate_ok(capsys, model_file):
    code, out, _ = run(capsys, "validate", model_file)
    assert code == 0
    assert "valid (12 components, 20 connections)" in out


def test_validate_invalid(capsys, tmp_path):
    bad = tmp_path / "bad.model"
    bad.write_text("[model] m\n[component] a\ndevice_name = A\nentry_points = RF\n", encoding="utf-8")
    code, _, err = run(capsys, "validate", bad)
    assert code == 2
    assert "entry_points not subset of communication" in err


def test_validate_syntax_error(capsys, tmp_path):
    bad = tmp_path / "bad.model"
    bad.write_text("[model] m\n[component] a\nnonsense\n", encoding="utf-8")
    code, _, err = run(capsys, "validate", bad)
    assert code == 1
    assert "line 3" in err


def test_usage_errors(capsys, tmp_path):
    assert run(capsys, "validate", tmp_path / "missing.model")[0] == 1
    assert run(capsys, "frobnicate")[0] == 1
    assert run(capsys, "scan", "--format", "pdf", tmp_path)[0] == 1


def test_scan_json(capsys, model_file):
    code, out, _ = run(capsys, "scan", model_file, "--db", FIXTURE_DIR)
    assert code == 0
    doc = json.loads(out)
    assert [e["vector"]["id"] for e in doc["evidence"]["gps"]] == ["CVE-2016-3801", "CVE-2016-6788"]


def test_scan_markdown_and_output_file(capsys, model_file, tmp_path):
    target = tmp_path / "report.md"
    code, out, _ = run(capsys, "scan", model_file, "--db", FIXTURE_DIR, "--format", "markdown", "-o", target)
    assert code == 0 and out == ""
    assert target.read_text(encoding="utf-8").startswith("# Vulnerability assessment: Flight Control System")


def test_scan_surface_only(capsys, model_file):
    code, out, _ = run(capsys, "scan", model_file, "--db", FIXTURE_DIR, "--surface-only")
    assert code == 0 and json.loads(out)["surface_only"] is True


def test_scan_figures(capsys, model_file, tmp_path):
    code, _, err = run(capsys, "scan", model_file, "--db", FIXTURE_DIR, "--figures", tmp_path / "figs")
    assert code == 0
    assert (tmp_path / "figs" / "evidence.csv").exists()
    assert (tmp_path / "figs" / "system_graph.png").exists()
    assert "wrote" in err


def test_scan_database_error(capsys, model_file, tmp_path):
    code, _, err = run(capsys, "scan", model_file, "--db", tmp_path / "nope")
    assert code == 3 and "database error" in err


def test_scan_needs_db(capsys, model_file):
    assert run(capsys, "scan", model_file)[0] == 1


def test_config_file(capsys, model_file, tmp_path):
    config = tmp_path / "cpsvuln.ini"
    config.write_text(f"[cpsvuln]\ndb = {FIXTURE_DIR}\nformat = markdown\n", encoding="utf-8")
    code, out, _ = run(capsys, "--config", config, "scan", model_file)
    assert code == 0 and out.startswith("# Vulnerability assessment")
    # flags win over the file
    code, out, _ = run(capsys, "--config", config, "scan", model_file, "--format", "json")
    assert json.loads(out)["model"] == "Flight Control System"


def test_bad_config(capsys, model_file, tmp_path):
    config = tmp_path / "bad.ini"
    config.write_text("[cpsvuln]\nformat = pdf\n", encoding="utf-8")
    assert run(capsys, "--config", config, "validate", model_file)[0] == 1
    assert run(capsys, "--config", tmp_path / "absent.ini", "validate", model_file)[0] == 1


def test_export_graphml(capsys, model_file, tmp_path):
    target = tmp_path / "fcs.graphml"
    code, _, _ = run(capsys, "export-graphml", model_file, "-o", target)
    assert code == 0
    assert parse_graphml(target.read_text(encoding="utf-8")) == to_graph(load_example_fcs())


def test_db_ingest_and_query(capsys, tmp_path):
    db = tmp_path / "db"
    code, out, _ = run(capsys, "db", "ingest", FEED, "--db", db)
    assert code == 0 and "ingested 27 records" in out
    assert (db / FEED.name).exists()
    code, out, _ = run(capsys, "db", "query", "MediaTek", "--db", db)
    assert code == 0
    assert [line.split("\t")[0] for line in out.splitlines()] == ["CVE-2016-3801", "CVE-2016-6788"]
    code, out, _ = run(capsys, "db", "query", "zigbee", "--db", db, "--json")
    assert {r["id"] for r in json.loads(out)} == {"CVE-2015-8732", "CVE-2015-6244"}


def test_db_ingest_rejects_bad_feed(capsys, tmp_path):
    feed = tmp_path / "feed.json"
    feed.write_text("{not json", encoding="utf-8")
    code, _, err = run(capsys, "db", "ingest", feed, "--db", tmp_path / "db")
    assert code == 3 and "not valid JSON" in err
    assert not (tmp_path / "db" / "feed.json").exists()


def test_db_query_needs_a_source(capsys):
    assert run(capsys, "db", "query", "x")[0] == 1


def test_remote_requires_url(capsys, tmp_path):
    assert run(capsys, "db", "query", "x", "--remote")[0] == 1


def test_remote_network_failure_is_db_error(capsys):
    code, _, err = run(capsys, "db", "query", "x", "--remote", "http://127.0.0.1:9")
    assert code == 3 and "database error" in err


def test_remote_not_used_without_flag(capsys, tmp_path, monkeypatch):
    import cpsvuln.cli as cli_mod

    def boom(*args, **kwargs):
        raise AssertionError("network used without --remote")

    monkeypatch.setattr(cli_mod, "fetch_remote", boom)
    config = tmp_path / "c.ini"
    shutil.copytree(FIXTURE_DIR, tmp_path / "db")
    config.write_text(f"[cpsvuln]\ndb = {tmp_path / 'db'}\nremote = http://example.invalid\n", encoding="utf-8")
    assert run(capsys, "--config", config, "db", "query", "mediatek")[0] == 0


def test_version(capsys):
    code, out, _ = run(capsys, "--version")
    assert code == 0 and "0.1.0" in out
