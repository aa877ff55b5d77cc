"""Acceptance suite.

Each criterion prints one ``[ACn] PASS|FAIL ...`` line and then asserts.
Run with ``pytest tests/test_acceptance.py -s`` or ``python3 tests/test_acceptance.py``.
"""

from __future__ import annotations

import itertools
import os
import random
import subprocess
import sys
import tempfile
import time
from functools import lru_cache
from pathlib import Path

import pytest

HERE = Path(__file__).resolve().parent
sys.path.insert(0, str(HERE))

import oracles  # noqa: E402
from conftest import (  # noqa: E402
    EMPTY_TEXT,
    NOTIFY_TEXT,
    PAY_TEXT,
    SINGLE_TEXT,
    build_notify,
    build_pay,
)
from corpus import CORPUS_SEED, corpus, random_scenario  # noqa: E402
from sdlocal.cli import main as cli_main  # noqa: E402
from sdlocal.controllability import unintended_traces  # noqa: E402
from sdlocal.dsl import render_scenario  # noqa: E402
from sdlocal.enforcement import synthesize_minimal_coordination, verify_candidate_set  # noqa: E402
from sdlocal.errors import BudgetExceeded, PlacementError  # noqa: E402
from sdlocal.observability import locally_uncheckable_traces  # noqa: E402
from sdlocal.report import analyze, render_report  # noqa: E402
from sdlocal.semantics import DEFAULT_BUDGET, event_strings, parse_event, valid_global_traces  # noqa: E402

# Corpus synthesis runs with a smaller search budget than the CLI default to bound the suite's runtime.
CORPUS_SEARCH_BUDGET = 3_000
ENVELOPE_SEED = 7
ENVELOPE_SIZE = 25


def _emit(n: int, ok: bool, detail: str) -> None:
    print(f"[AC{n}] {'PASS' if ok else 'FAIL'} {detail}", flush=True)


@pytest.fixture
def emit(capsys):
    def out(n, ok, detail):
        with capsys.disabled():
            print()
            _emit(n, ok, detail)

    return out


def _rendered(traces) -> set:
    return {tuple(event_strings(t)) for t in traces}


def _check_exit(s) -> int:
    with tempfile.TemporaryDirectory() as d:
        path = Path(d) / "refined.dco"
        path.write_text(render_scenario(s))
        return cli_main(["check", str(path)])


# ------------------------------------------------------------------ AC1


def criterion_1():
    t = time.perf_counter()
    report = analyze(build_notify())
    elapsed = time.perf_counter() - t
    line = render_report(report).splitlines()[4]
    ok = (report.locally_observable is False
          and line == "Locally Uncheckable Traces: {[!m1@L1, ?m1@L2, !m2@L2]}"
          and elapsed < 1.0)
    return ok, f"FIX-NOTIFY uncheckable line {line!r} in {elapsed:.3f}s (limit 1s)"


def test_ac1_notify_observability(emit):
    ok, detail = criterion_1()
    emit(1, ok, detail)
    assert ok, detail


# ------------------------------------------------------------------ AC2


def criterion_2():
    t = time.perf_counter()
    result = synthesize_minimal_coordination(build_notify())
    elapsed = time.perf_counter() - t
    msgs = result.messages
    shape = (len(msgs) == 1 and msgs[0].sender == "L1" and msgs[0].receiver == "L2"
             and msgs[0].after == parse_event("?m2@L1"))
    code = _check_exit(result.refined.scenario) if result.refined else None
    ok = shape and code == 0 and elapsed < 1.0
    listed = ", ".join(cm.render() for cm in msgs) or "none"
    return ok, f"FIX-NOTIFY synthesis {{{listed}}}, check exit {code}, {elapsed:.3f}s (limit 1s)"


def test_ac2_notify_fix(emit):
    ok, detail = criterion_2()
    emit(2, ok, detail)
    assert ok, detail


# ------------------------------------------------------------------ AC3


def criterion_3():
    s = build_pay()
    t = time.perf_counter()
    report = analyze(s)
    elapsed = time.perf_counter() - t
    witnesses = [tuple(event_strings(w.trace)) for w in report.unintended]
    shape = all(w[-1] == "?m3@L3" and "?m2@L3" not in w for w in witnesses)
    oracle_count = len(oracles.unintended(s))
    syn = report.coordination
    msgs = syn.messages
    one = len(msgs) == 1 and msgs[0].sender == "L3" and msgs[0].receiver == "L2"
    code = _check_exit(syn.refined.scenario) if syn.refined else None
    parts = {
        "not controllable": report.locally_controllable is False,
        "witness shape": shape,
        "4 witnesses = oracle": len(witnesses) == 4 == oracle_count,
        "one L3->L2 message": one,
        "refined passes check": code == 0,
        "under 2s": elapsed < 2.0,
    }
    failed = [k for k, v in parts.items() if not v]
    listed = ", ".join(cm.render() for cm in msgs) or "none"
    detail = (f"FIX-PAY {len(witnesses)} witnesses (oracle {oracle_count}), synthesis {{{listed}}}, "
              f"check exit {code}, {elapsed:.3f}s; failed parts: {', '.join(failed) or 'none'}")
    return not failed, detail


def test_ac3_pay_controllability(emit):
    ok, detail = criterion_3()
    emit(3, ok, detail)
    assert ok, detail


# ------------------------------------------------------------------ AC4


def criterion_4():
    t = time.perf_counter()
    scenarios = corpus()
    mismatches = []
    for i, s in enumerate(scenarios):
        if _rendered(valid_global_traces(s)) != oracles.valid_rendered(s):
            mismatches.append((i, "valid"))
        if _rendered(w.trace for w in unintended_traces(s)) != oracles.unintended(s):
            mismatches.append((i, "unintended"))
        if _rendered(locally_uncheckable_traces(s)) != oracles.uncheckable(s):
            mismatches.append((i, "uncheckable"))
    elapsed = time.perf_counter() - t
    ok = len(scenarios) >= 200 and not mismatches and elapsed < 300
    return ok, (f"{len(scenarios)} corpus scenarios (seed {CORPUS_SEED}), {len(mismatches)} mismatches "
                f"{mismatches[:5]}, {elapsed:.1f}s (limit 300s)")


def test_ac4_oracle_equivalence(emit):
    ok, detail = criterion_4()
    emit(4, ok, detail)
    assert ok, detail


# ------------------------------------------------------------------ AC5 / AC6


@lru_cache(maxsize=1)
def corpus_syntheses():
    out = []
    for s in corpus():
        try:
            out.append((s, synthesize_minimal_coordination(s, search_budget=CORPUS_SEARCH_BUDGET)))
        except BudgetExceeded:
            out.append((s, None))
    return out


def _erase_render(trace, coord) -> tuple:
    return oracles.render(tuple(e for e in trace if e[1] not in coord))


def independently_sound(s, refined) -> list:
    """Failed conditions of a refinement, checked with the brute-force oracles only."""
    coord = {m.name for m in refined.messages if m.is_coordination}
    valid = oracles.valid_traces(refined)
    failed = []
    if oracles.unintended(refined):
        failed.append("controllable")
    if oracles.uncheckable(refined):
        failed.append("observable")
    if not valid:
        failed.append("deadlock-free")
    orig = oracles.valid_traces(s)
    for lid in s.lifeline_ids:
        mine = {_erase_render(tuple(e for e in t if e[3] == lid), coord) for t in valid}
        theirs = {oracles.render(tuple(e for e in t if e[3] == lid)) for t in orig}
        if mine != theirs:
            failed.append(f"projection {lid}")
    return failed


def criterion_5():
    t = time.perf_counter()
    results = corpus_syntheses()
    statuses = {}
    bad = []
    for i, (s, syn) in enumerate(results):
        key = syn.status if syn else "budget"
        statuses[key] = statuses.get(key, 0) + 1
        if syn and syn.status == "synthesized":
            failed = independently_sound(s, syn.refined.scenario)
            if failed:
                bad.append((i, failed))
    elapsed = time.perf_counter() - t
    counts = ", ".join(f"{k} {v}" for k, v in sorted(statuses.items()))
    return not bad, (f"{statuses.get('synthesized', 0)} synthesized refinements re-verified by oracle, "
                     f"{len(bad)} unsound {bad[:3]}; outcomes: {counts}; search budget "
                     f"{CORPUS_SEARCH_BUDGET}, max 4 messages; {elapsed:.1f}s")


def test_ac5_refinement_soundness(emit):
    ok, detail = criterion_5()
    emit(5, ok, detail)
    assert ok, detail


def _verifies(s, subset) -> bool:
    try:
        return verify_candidate_set(s, subset)
    except PlacementError:
        return False


def criterion_6():
    t = time.perf_counter()
    checked = sets = 0
    bad = []
    for i, (s, syn) in enumerate(corpus_syntheses()):
        if not syn or syn.status != "synthesized" or len(syn.messages) > 2:
            continue
        sets += 1
        for k in range(len(syn.messages)):
            for subset in itertools.combinations(syn.pool, k):
                checked += 1
                if _verifies(s, subset):
                    bad.append((i, [cm.describe() for cm in subset]))
    elapsed = time.perf_counter() - t
    return not bad, (f"{sets} coordination sets of size <= 2, {checked} strictly smaller subsets of the "
                     f"full candidate pool re-checked, {len(bad)} verify {bad[:3]}; {elapsed:.1f}s")


def test_ac6_minimality(emit):
    ok, detail = criterion_6()
    emit(6, ok, detail)
    assert ok, detail


# ------------------------------------------------------------------ AC7

FIXTURE_TEXTS = {"empty": EMPTY_TEXT, "single": SINGLE_TEXT, "pay": PAY_TEXT, "notify": NOTIFY_TEXT}


def _cli_output(path: Path, fmt: str, hash_seed: str) -> bytes:
    env = dict(os.environ, PYTHONHASHSEED=hash_seed)
    src = str(HERE.parent / "src")
    env["PYTHONPATH"] = src + os.pathsep + env.get("PYTHONPATH", "")
    proc = subprocess.run([sys.executable, "-m", "sdlocal", "analyze", str(path), "--format", fmt],
                          capture_output=True, env=env, check=False)
    return proc.stdout


def criterion_7():
    with tempfile.TemporaryDirectory() as d:
        paths = []
        for name, text in FIXTURE_TEXTS.items():
            p = Path(d) / f"fix-{name}.dco"
            p.write_text(text)
            paths.append(p)
        paths += sorted((HERE / "data").glob("*.uml"))
        differ = []
        for p in paths:
            for fmt in ("text", "json"):
                first, second = _cli_output(p, fmt, "1"), _cli_output(p, fmt, "2")
                if first != second or not first:
                    differ.append(f"{p.name}/{fmt}")
    return not differ, (f"{len(paths)} fixtures x text/json, two runs each with different hash seeds; "
                        f"differing: {', '.join(differ) or 'none'}")


def test_ac7_determinism(emit):
    ok, detail = criterion_7()
    emit(7, ok, detail)
    assert ok, detail


# ------------------------------------------------------------------ AC8


def envelope_scenarios(size: int = ENVELOPE_SIZE, seed: int = ENVELOPE_SEED):
    """At most 5 lifelines and 8 messages (at least 6), with one alt and one loop at most."""
    rng = random.Random(seed)
    return [random_scenario(rng, i, max_lifelines=5, max_messages=8, min_messages=6) for i in range(size)]


BEYOND_ENVELOPE = "scenario wide\n" + "".join(f"lifeline L{i}\n" for i in range(1, 7)) + "".join(
    f"m{i}: L{(i % 6) + 1} -> L{((i + 2) % 6) + 1}\n" for i in range(1, 13))


def criterion_8():
    slow, wrong = [], []
    outcomes = {}
    worst = 0.0
    for i, s in enumerate(envelope_scenarios()):
        t = time.perf_counter()
        try:
            report = analyze(s)
            what = report.coordination.status
        except BudgetExceeded as exc:
            report, what = None, f"budget {exc.what}"
        elapsed = time.perf_counter() - t
        worst = max(worst, elapsed)
        outcomes[what] = outcomes.get(what, 0) + 1
        if elapsed >= 10.0:
            slow.append((i, round(elapsed, 1)))
        # Independent counts back every answer and every budget error on trace sets.
        valid_n, unintended_n = oracles.count_traces(s)
        if report is not None:
            if (len(report.valid_traces), len(report.unintended)) != (valid_n, unintended_n):
                wrong.append((i, "counts"))
        elif what == "budget valid traces" and valid_n <= DEFAULT_BUDGET:
            wrong.append((i, what))
        elif what == "budget unintended traces" and unintended_n <= DEFAULT_BUDGET:
            wrong.append((i, what))
        elif what not in ("budget valid traces", "budget unintended traces", "budget candidate subsets"):
            wrong.append((i, what))
    with tempfile.TemporaryDirectory() as d:
        path = Path(d) / "wide.dco"
        path.write_text(BEYOND_ENVELOPE)
        t = time.perf_counter()
        beyond = cli_main(["analyze", str(path)])
        beyond_time = time.perf_counter() - t
    ok = not slow and not wrong and beyond == 3
    counts = ", ".join(f"{k} {v}" for k, v in sorted(outcomes.items()))
    return ok, (f"{ENVELOPE_SIZE} envelope scenarios (seed {ENVELOPE_SEED}), worst {worst:.1f}s (limit 10s), "
                f"over limit {slow}, unjustified {wrong}; outcomes: {counts}; "
                f"6 lifelines x 12 messages exits {beyond} in {beyond_time:.1f}s")


def test_ac8_scale_envelope(emit):
    ok, detail = criterion_8()
    emit(8, ok, detail)
    assert ok, detail


CRITERIA = (criterion_1, criterion_2, criterion_3, criterion_4, criterion_5, criterion_6, criterion_7, criterion_8)


if __name__ == "__main__":
    failures = 0
    for n, criterion in enumerate(CRITERIA, start=1):
        ok, detail = criterion()
        _emit(n, ok, detail)
        failures += not ok
    sys.exit(1 if failures else 0)
