"""Local controllability: unintended traces reachable by locally valid sends.

Operational model: every lifeline decides its next send by looking only at
its own history (the send must extend it to a prefix of one of its valid
local traces); delivery of any in-flight message occurrence can happen at
any time and cannot be refused.  A step that leaves the set of valid global
prefixes yields an unintended trace.

Whether a global history is a valid prefix depends only on the tuple of its
local projections (sends always precede their receives here), so the
reachable state space is explored over projection tuples.  Concrete
histories are only enumerated when witnesses must be reported.
"""

from __future__ import annotations

import sys
from collections import Counter
from dataclasses import dataclass
from typing import Sequence

from .errors import BudgetExceeded
from .model import Scenario
from .semantics import (
    DEFAULT_BUDGET,
    DEFAULT_LOOP_CAP,
    RECEIVE,
    Compiled,
    Event,
    Trace,
    compile_scenario,
    project,
    shortlex_key,
)


@dataclass(frozen=True)
class DistributedState:
    """Global history of a run; local histories and in-flight messages derive from it."""

    history: Trace = ()

    def local_history(self, lifeline: str) -> Trace:
        return project(self.history, lifeline)

    @property
    def in_flight(self) -> Counter:
        sends = Counter(e.key for e in self.history if e.is_send)
        receives = Counter(e.key for e in self.history if not e.is_send)
        return sends - receives


@dataclass(frozen=True)
class UnintendedTrace:
    trace: Trace
    deviation_index: int


def _enabled(c: Compiled, locals_: Sequence[tuple]) -> list[Event]:
    steps = []
    sends: Counter = Counter()
    receives: Counter = Counter()
    for i, h in enumerate(locals_):
        for e in h:
            if e.is_send:
                sends[e.message] += 1
            else:
                receives[e.message] += 1
        for e in c.next_events[i].get(h, ()):
            if e.is_send:
                steps.append(e)
    for name, n in sends.items():
        k = receives[name]
        if k < n:
            steps.append(Event(RECEIVE, name, k + 1, c.receiver_of(name)))
    return steps


def enabled_steps(s: Scenario, st: DistributedState, loop_cap: int = DEFAULT_LOOP_CAP,
                  budget: int = DEFAULT_BUDGET) -> tuple[Event, ...]:
    """Sends each lifeline may locally choose next, plus every pending delivery."""
    c = compile_scenario(s, loop_cap, budget)
    locals_ = tuple(st.local_history(lid) for lid in c.lifelines)
    return tuple(sorted(_enabled(c, locals_), key=str))


def _step(c: Compiled, locals_: tuple, e: Event) -> tuple:
    i = c.index[e.lifeline]
    return locals_[:i] + (locals_[i] + (e,),) + locals_[i + 1:]


class _StateGraph:
    """Memoized exploration of the projection-tuple state graph."""

    def __init__(self, c: Compiled):
        self.c = c
        self.deviates: dict[tuple, bool] = {}

    def can_deviate(self, locals_: tuple) -> bool:
        known = self.deviates.get(locals_)
        if known is not None:
            return known
        if len(self.deviates) >= self.c.budget:
            raise BudgetExceeded("controllability states", self.c.budget)
        result = False
        for e in _enabled(self.c, locals_):
            nxt = _step(self.c, locals_, e)
            if not self.c.prefix_tuple_mask(nxt) or self.can_deviate(nxt):
                result = True
                break
        self.deviates[locals_] = result
        return result


def _initial(c: Compiled) -> tuple:
    return tuple(() for _ in c.lifelines)


def _ensure_recursion_depth(c: Compiled) -> None:
    longest = max((sum(len(ch) for ch in chains) for chains in c.chains), default=0)
    needed = 4 * longest + 200
    if sys.getrecursionlimit() < needed:
        sys.setrecursionlimit(needed)


def is_locally_controllable(s: Scenario, loop_cap: int = DEFAULT_LOOP_CAP, budget: int = DEFAULT_BUDGET) -> bool:
    c = compile_scenario(s, loop_cap, budget)
    _ensure_recursion_depth(c)
    return not _StateGraph(c).can_deviate(_initial(c))


def unintended_traces(s: Scenario, loop_cap: int = DEFAULT_LOOP_CAP,
                      budget: int = DEFAULT_BUDGET) -> tuple[UnintendedTrace, ...]:
    """Minimal deviating histories, shortlex ordered."""
    c = compile_scenario(s, loop_cap, budget)
    _ensure_recursion_depth(c)
    graph = _StateGraph(c)
    found: list[Trace] = []
    history: list[Event] = []

    def walk(locals_):
        for e in _enabled(c, locals_):
            nxt = _step(c, locals_, e)
            if not c.prefix_tuple_mask(nxt):
                found.append(tuple(history) + (e,))
                if len(found) > budget:
                    raise BudgetExceeded("unintended traces", budget)
            elif graph.can_deviate(nxt):
                history.append(e)
                walk(nxt)
                history.pop()

    start = _initial(c)
    if graph.can_deviate(start):
        walk(start)
    found.sort(key=shortlex_key)
    return tuple(UnintendedTrace(t, len(t) - 1) for t in found)
