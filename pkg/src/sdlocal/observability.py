"""Local observability: invalid complete runs that every local tester accepts.

A local tester flags an error iff its final local history is not one of its
valid complete local traces.  A run escapes detection when each lifeline
independently follows some valid complete local trace (possibly taken from
different variants), sends may be lost, and every receive follows its
matching send.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from math import prod

from .errors import BudgetExceeded
from .model import Scenario
from .semantics import (
    DEFAULT_BUDGET,
    DEFAULT_LOOP_CAP,
    Compiled,
    Trace,
    compile_scenario,
    interleavings,
    sort_traces,
)


@dataclass(frozen=True)
class ComposableTrace:
    trace: Trace
    local_traces: tuple
    lost: tuple  # send events whose receive never happens


def _realizable(chains) -> bool:
    """True when some merge of the chains puts every receive after its send."""
    pos = [0] * len(chains)
    sent = set()
    progress = True
    while progress:
        progress = False
        for i, chain in enumerate(chains):
            while pos[i] < len(chain):
                e = chain[pos[i]]
                if e.is_send:
                    sent.add(e.key)
                elif e.key not in sent:
                    break
                pos[i] += 1
                progress = True
    return all(p == len(ch) for p, ch in zip(pos, chains))


def _local_tuples(c: Compiled):
    """Yield (chains, is_variant) for every realizable tuple of complete local traces."""
    choices = [c.local_complete(i) for i in range(len(c.lifelines))]
    if prod(len(x) for x in choices) > c.budget:
        raise BudgetExceeded("local trace combinations", c.budget)
    for combo in itertools.product(*choices):
        mask = c.all_mask
        for i, chain in enumerate(combo):
            mask &= c.complete_mask[i][chain]
        if mask:
            yield combo, True
        elif _realizable(combo):
            yield combo, False


def is_locally_observable(s: Scenario, loop_cap: int = DEFAULT_LOOP_CAP, budget: int = DEFAULT_BUDGET) -> bool:
    # A realizable tuple that is not some variant's chain tuple has only
    # invalid interleavings, each of them locally uncheckable.
    c = compile_scenario(s, loop_cap, budget)
    return all(is_variant for _, is_variant in _local_tuples(c))


def _collect(c: Compiled, include_valid: bool) -> tuple:
    found = []
    for combo, is_variant in _local_tuples(c):
        if is_variant and not include_valid:
            continue
        for t in interleavings(combo):
            found.append(t)
            if len(found) > c.budget:
                raise BudgetExceeded("composable traces", c.budget)
    return sort_traces(found)


def composable_complete_traces(s: Scenario, loop_cap: int = DEFAULT_LOOP_CAP,
                               budget: int = DEFAULT_BUDGET) -> tuple:
    return _collect(compile_scenario(s, loop_cap, budget), include_valid=True)


def locally_uncheckable_traces(s: Scenario, loop_cap: int = DEFAULT_LOOP_CAP,
                               budget: int = DEFAULT_BUDGET) -> tuple:
    return _collect(compile_scenario(s, loop_cap, budget), include_valid=False)


def composable_details(s: Scenario, loop_cap: int = DEFAULT_LOOP_CAP,
                       budget: int = DEFAULT_BUDGET) -> tuple[ComposableTrace, ...]:
    """Composable complete traces together with their local choices and lost sends."""
    c = compile_scenario(s, loop_cap, budget)
    out = []
    for combo, _ in _local_tuples(c):
        received = {e.key for chain in combo for e in chain if not e.is_send}
        lost = tuple(e for chain in combo for e in chain if e.is_send and e.key not in received)
        for t in interleavings(combo):
            out.append(ComposableTrace(t, combo, lost))
            if len(out) > budget:
                raise BudgetExceeded("composable traces", budget)
    return tuple(out)
