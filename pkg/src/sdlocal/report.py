"""Analysis reports and their text / JSON renderings.

Traces use the ``!m@L`` / ``?m@L`` notation; trace sets print shortlex
ordered between braces, so output is byte-for-byte reproducible.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Iterable, Optional

from .controllability import UnintendedTrace, unintended_traces
from .enforcement import (
    DEFAULT_MAX_COORD,
    DEFAULT_SEARCH_BUDGET,
    Synthesis,
    synthesize_minimal_coordination,
)
from .model import Scenario
from .observability import locally_uncheckable_traces
from .semantics import DEFAULT_BUDGET, DEFAULT_LOOP_CAP, event_strings, render_trace, valid_global_traces

VALID = "valid"
CONTROLLABILITY = "controllability"
OBSERVABILITY = "observability"
COORDINATION = "coordination"
ALL_PROPERTIES = (VALID, CONTROLLABILITY, OBSERVABILITY, COORDINATION)


@dataclass(frozen=True)
class AnalysisReport:
    valid_traces: Optional[tuple] = None
    locally_controllable: Optional[bool] = None
    unintended: Optional[tuple] = None
    locally_observable: Optional[bool] = None
    uncheckable: Optional[tuple] = None
    coordination: Optional[Synthesis] = None

    @property
    def has_violations(self) -> bool:
        return self.locally_controllable is False or self.locally_observable is False


def analyze(s: Scenario, properties: Iterable[str] = ALL_PROPERTIES, loop_cap: int = DEFAULT_LOOP_CAP,
            max_coord: int = DEFAULT_MAX_COORD, budget: int = DEFAULT_BUDGET,
            search_budget: int = DEFAULT_SEARCH_BUDGET) -> AnalysisReport:
    props = set(properties)
    unknown = props - set(ALL_PROPERTIES)
    if unknown:
        raise ValueError(f"unknown properties: {', '.join(sorted(unknown))}")
    valid = valid_global_traces(s, loop_cap, budget) if VALID in props else None
    unintended = uncheckable = None
    if props & {CONTROLLABILITY, COORDINATION}:
        unintended = unintended_traces(s, loop_cap, budget)
    if props & {OBSERVABILITY, COORDINATION}:
        uncheckable = locally_uncheckable_traces(s, loop_cap, budget)
    coordination = None
    if COORDINATION in props:
        coordination = synthesize_minimal_coordination(
            s, loop_cap, max_coord, budget, search_budget, unintended=unintended, uncheckable=uncheckable)
    show_c = CONTROLLABILITY in props
    show_o = OBSERVABILITY in props
    return AnalysisReport(
        valid_traces=valid,
        locally_controllable=(not unintended) if show_c else None,
        unintended=unintended if show_c else None,
        locally_observable=(not uncheckable) if show_o else None,
        uncheckable=uncheckable if show_o else None,
        coordination=coordination,
    )


def _traces_of(items) -> list:
    return [u.trace if isinstance(u, UnintendedTrace) else u for u in items]


def render_trace_set(traces) -> str:
    return "{" + ", ".join(render_trace(t) for t in _traces_of(traces)) + "}"


def _flag(value: bool) -> str:
    return "true" if value else "false"


def render_coordination(syn: Synthesis) -> str:
    if syn.status == "already_satisfied":
        return "none required"
    if syn.status == "not_found":
        return f"none found within bound {syn.bound}"
    return "{" + ", ".join(cm.render() for cm in syn.messages) + "}"


def render_report(r: AnalysisReport, ordering_constraints: bool = False) -> str:
    lines = []
    if r.valid_traces is not None:
        lines.append(f"Valid Traces: {render_trace_set(r.valid_traces)}")
    if r.locally_controllable is not None:
        lines.append(f"Locally Controllable: {_flag(r.locally_controllable)}")
        lines.append(f"Unintended Traces: {render_trace_set(r.unintended)}")
    if r.locally_observable is not None:
        lines.append(f"Locally Observable: {_flag(r.locally_observable)}")
        lines.append(f"Locally Uncheckable Traces: {render_trace_set(r.uncheckable)}")
    if r.coordination is not None:
        lines.append(f"Coordination Messages: {render_coordination(r.coordination)}")
        if ordering_constraints and r.coordination.messages:
            constraints = ", ".join(cm.ordering_constraint() for cm in r.coordination.messages)
            lines.append(f"Ordering Constraints: {{{constraints}}}")
    return "\n".join(lines) + "\n"


def _coordination_json(syn: Synthesis) -> dict:
    return {
        "status": syn.status,
        "bound": syn.bound,
        "messages": [
            {
                "name": cm.name,
                "from": cm.sender,
                "to": cm.receiver,
                "after": str(cm.after),
                "before": str(cm.before) if cm.before is not None else None,
                "ordering_constraint": cm.ordering_constraint(),
            }
            for cm in syn.messages
        ],
    }


def report_to_dict(r: AnalysisReport) -> dict:
    """Report as a plain dict; keys for properties that were not requested are left out."""
    out: dict = {}
    if r.valid_traces is not None:
        out["valid_traces"] = [list(event_strings(t)) for t in r.valid_traces]
    if r.locally_controllable is not None:
        out["locally_controllable"] = r.locally_controllable
        out["unintended_traces"] = [list(event_strings(t)) for t in _traces_of(r.unintended)]
    if r.locally_observable is not None:
        out["locally_observable"] = r.locally_observable
        out["locally_uncheckable_traces"] = [list(event_strings(t)) for t in r.uncheckable]
    if r.coordination is not None:
        out["coordination_messages"] = _coordination_json(r.coordination)
    return out


def export_report_json(r: AnalysisReport) -> str:
    return json.dumps(report_to_dict(r), indent=2, ensure_ascii=False) + "\n"
