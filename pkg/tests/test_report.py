import json

import pytest

from sdlocal.report import analyze, export_report_json, render_report


def test_single_report(fix_single):
    r = analyze(fix_single)
    text = render_report(r)
    assert "Locally Controllable: true" in text
    assert "Unintended Traces: {}" in text
    assert text.endswith("Coordination Messages: none required\n")
    doc = json.loads(export_report_json(r))
    assert doc["locally_controllable"] is True
    assert doc["valid_traces"] == [["!m@A", "?m@B"]]


def test_notify_report(fix_notify):
    r = analyze(fix_notify)
    assert "Locally Uncheckable Traces: {[!m1@L1, ?m1@L2, !m2@L2]}" in render_report(r)
    doc = json.loads(export_report_json(r))
    assert doc["locally_observable"] is False
    assert ["!m1@L1", "?m1@L2", "!m2@L2"] in doc["locally_uncheckable_traces"]


def test_empty_report(fix_empty):
    r = analyze(fix_empty)
    assert render_report(r) == (
        "Valid Traces: {[]}\n"
        "Locally Controllable: true\n"
        "Unintended Traces: {}\n"
        "Locally Observable: true\n"
        "Locally Uncheckable Traces: {}\n"
        "Coordination Messages: none required\n"
    )
    doc = json.loads(export_report_json(r))
    assert doc["unintended_traces"] == [] and doc["locally_uncheckable_traces"] == []
    assert doc["locally_controllable"] and doc["locally_observable"]


def test_pay_report_layout(fix_pay):
    lines = render_report(analyze(fix_pay), ordering_constraints=True).splitlines()
    assert [line.split(":")[0] for line in lines] == [
        "Valid Traces", "Locally Controllable", "Unintended Traces", "Locally Observable",
        "Locally Uncheckable Traces", "Coordination Messages", "Ordering Constraints"]
    assert lines[1] == "Locally Controllable: false"
    assert lines[2].count("[") == 4
    assert lines[6] == "Ordering Constraints: {?m2@L3 < !m3@L2, ?m1@L2 < !m2@L1}"


def test_json_key_order_and_subset(fix_pay):
    doc = json.loads(export_report_json(analyze(fix_pay)))
    assert list(doc) == ["valid_traces", "locally_controllable", "unintended_traces", "locally_observable",
                         "locally_uncheckable_traces", "coordination_messages"]
    cm = doc["coordination_messages"]
    assert cm["status"] == "synthesized"
    assert cm["messages"][0] == {"name": "Ctrl1", "from": "L3", "to": "L2", "after": "?m2@L3",
                                 "before": "!m3@L2", "ordering_constraint": "?m2@L3 < !m3@L2"}
    only = json.loads(export_report_json(analyze(fix_pay, ["observability"])))
    assert list(only) == ["locally_observable", "locally_uncheckable_traces"]


def test_text_and_json_agree(fix_pay, fix_notify):
    for s in (fix_pay, fix_notify):
        r = analyze(s)
        doc = json.loads(export_report_json(r))
        text = render_report(r)
        valid = "{" + ", ".join("[" + ", ".join(t) + "]" for t in doc["valid_traces"]) + "}"
        assert f"Valid Traces: {valid}" in text


def test_not_found_rendering():
    from sdlocal.dsl import parse_scenario
    s = parse_scenario("scenario s\nlifeline A\nlifeline B\nalt {\n  m1: B -> A\n} else {\n  m2: A -> B\n}\n")
    assert "Coordination Messages: none found within bound 1" in render_report(analyze(s, max_coord=1))


def test_unknown_property(fix_single):
    with pytest.raises(ValueError):
        analyze(fix_single, ["speed"])
