"""Local controllability and observability analysis of distributed test scenarios."""

from .controllability import DistributedState, UnintendedTrace, enabled_steps, is_locally_controllable, unintended_traces
from .dsl import parse_scenario, render_scenario
from .enforcement import (
    CoordinationMessage,
    DeviationPoint,
    RefinedScenario,
    Synthesis,
    candidate_coordinations,
    deviation_points,
    insert,
    synthesize_minimal_coordination,
    verify_candidate_set,
)
from .errors import BudgetExceeded, ParseError, PlacementError, XmiImportError
from .model import Alt, Lifeline, Loop, MessageDecl, Msg, Scenario, Seq, erase_coordination, opt, validate_scenario
from .observability import composable_complete_traces, is_locally_observable, locally_uncheckable_traces
from .report import AnalysisReport, analyze, export_report_json, render_report
from .semantics import (
    Event,
    FlatVariant,
    is_valid_prefix,
    parse_event,
    parse_trace,
    project,
    render_trace,
    unfold,
    valid_global_traces,
    valid_local_traces,
)
from .xmi import import_xmi, import_xmi_file

__version__ = "0.1.0"
