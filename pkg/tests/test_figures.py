import csv

import matplotlib.image as mpimg
import pytest

from cpsvuln.figures import CSV_FIELDS, write_evidence_csv, write_figures
from cpsvuln.graph import to_graph
from cpsvuln.modelfmt import SystemModel, load_example_fcs
from cpsvuln.report import assess
from cpsvuln.vulndb import load_fixture_store


@pytest.fixture(scope="module")
def fcs_report():
    model = load_example_fcs()
    return assess(model, load_fixture_store()), to_graph(model)


def test_csv_rows(tmp_path, fcs_report):
    report, _ = fcs_report
    path = write_evidence_csv(report, tmp_path / "e.csv")
    with path.open(newline="", encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    assert tuple(rows[0]) == CSV_FIELDS
    assert [(r["component"], r["vector"]) for r in rows] == [
        ("gps", "CVE-2016-3801"), ("gps", "CVE-2016-6788"),
        ("radio", "CVE-2015-6244"), ("radio", "CVE-2015-8732"),
    ]
    assert rows[0]["cwe"] == "CWE-264"
    assert rows[0]["requires_user_interaction"] == "true"


def test_figures_written(tmp_path, fcs_report):
    report, graph = fcs_report
    paths = write_figures(report, graph, tmp_path / "out")
    assert [p.name for p in paths] == ["evidence.csv", "evidence_by_component.png", "system_graph.png"]
    for p in paths[1:]:
        image = mpimg.imread(p)
        assert image.shape[0] > 100 and image.shape[1] > 100


def test_figures_for_empty_model(tmp_path):
    model = SystemModel("Empty")
    report = assess(model, load_fixture_store())
    paths = write_figures(report, to_graph(model), tmp_path)
    assert all(p.stat().st_size > 0 for p in paths)
