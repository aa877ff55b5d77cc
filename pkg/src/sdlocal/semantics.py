"""Trace semantics of scenarios.

A scenario is unfolded into flat variants (one per resolution of every alt
and loop).  Each variant is a partial order over send/receive events made of
the per-lifeline event chains plus the send-before-receive edge of every
message occurrence (weak sequencing).  Valid global traces are the linear
extensions of those orders.
"""

from __future__ import annotations

import itertools
import re
from dataclasses import dataclass
from functools import cached_property, lru_cache
from typing import Iterable, Iterator, NamedTuple, Optional, Sequence

from .errors import BudgetExceeded
from .model import Alt, Loop, Msg, Scenario, Seq, check_valid

DEFAULT_LOOP_CAP = 2
DEFAULT_BUDGET = 100_000

SEND = "!"
RECEIVE = "?"


class Event(NamedTuple):
    """One send (``!``) or receive (``?``) of a message occurrence at a lifeline.

    A named tuple rather than a dataclass: events are hashed constantly
    during state exploration.
    """

    direction: str
    message: str
    occurrence: int
    lifeline: str

    @property
    def is_send(self) -> bool:
        return self.direction == SEND

    @property
    def key(self) -> tuple[str, int]:
        """Identity of the message occurrence this event belongs to."""
        return (self.message, self.occurrence)

    def label(self, numbered: bool = False) -> str:
        if numbered:
            return f"{self.direction}{self.message}#{self.occurrence}@{self.lifeline}"
        return f"{self.direction}{self.message}@{self.lifeline}"

    def __str__(self):
        return self.label(self.occurrence > 1)

    def structural(self) -> "Event":
        """The same event with the loop occurrence dropped (diagram position only)."""
        return self if self.occurrence == 1 else Event(self.direction, self.message, 1, self.lifeline)


Trace = tuple  # tuple[Event, ...]

_EVENT_RE = re.compile(r"\s*([!?])([A-Za-z_][A-Za-z0-9_]*)(?:#([1-9][0-9]*))?@([A-Za-z_][A-Za-z0-9_]*)\s*\Z")


def parse_event(text: str) -> Event:
    m = _EVENT_RE.match(text)
    if not m:
        raise ValueError(f"not an event: {text!r}")
    direction, message, occ, lifeline = m.groups()
    return Event(direction, message, int(occ) if occ else 1, lifeline)


def parse_trace(text: str) -> Trace:
    text = text.strip()
    if not (text.startswith("[") and text.endswith("]")):
        raise ValueError(f"not a trace: {text!r}")
    inner = text[1:-1].strip()
    if not inner:
        return ()
    return tuple(parse_event(part) for part in inner.split(","))


def event_strings(trace: Sequence[Event]) -> tuple[str, ...]:
    """Render events in the context of their trace.

    A message that occurs more than once in the trace gets occurrence
    numbers on all of its events (``!m#1@A``); otherwise the plain form
    ``!m@A`` is used.
    """
    repeated = {e.message for e in trace if e.occurrence > 1}
    return tuple(e.label(e.message in repeated) for e in trace)


def render_trace(trace: Sequence[Event]) -> str:
    return "[" + ", ".join(event_strings(trace)) + "]"


def shortlex_key(trace: Sequence[Event]):
    return (len(trace), event_strings(trace))


def sort_traces(traces: Iterable[Trace]) -> tuple[Trace, ...]:
    """Deduplicate and order traces shortlex (length, then event strings)."""
    return tuple(sorted(set(traces), key=shortlex_key))


def project(trace: Sequence[Event], lifeline: str) -> Trace:
    return tuple(e for e in trace if e.lifeline == lifeline)


@dataclass(frozen=True)
class FlatVariant:
    """One alt/loop resolution of a scenario as a labeled partial order."""

    choices: tuple
    chains: tuple  # ((lifeline id, (Event, ...)), ...) in scenario lifeline order

    @property
    def chain_map(self) -> dict[str, tuple]:
        return dict(self.chains)

    @cached_property
    def events(self) -> frozenset:
        return frozenset(e for _, chain in self.chains for e in chain)

    @cached_property
    def edges(self) -> frozenset:
        """Generating edges: consecutive events per lifeline, send before receive."""
        out = set()
        sends = {}
        for _, chain in self.chains:
            out.update(zip(chain, chain[1:]))
            for e in chain:
                if e.is_send:
                    sends[e.key] = e
        for e in self.events:
            if not e.is_send:
                out.add((sends[e.key], e))
        return frozenset(out)

    @cached_property
    def predecessors(self) -> dict:
        """Map every event to the set of events strictly before it."""
        direct: dict = {e: set() for e in self.events}
        for a, b in self.edges:
            direct[b].add(a)
        preds: dict = {}

        def visit(e):
            if e in preds:
                return preds[e]
            acc = set()
            for p in direct[e]:
                acc.add(p)
                acc |= visit(p)
            preds[e] = frozenset(acc)
            return preds[e]

        for e in self.events:
            visit(e)
        return preds

    @cached_property
    def order(self) -> frozenset:
        """The strict partial order as a set of (before, after) pairs."""
        return frozenset((p, e) for e, ps in self.predecessors.items() for p in ps)

    def precedes(self, a: Event, b: Event) -> bool:
        return a in self.predecessors.get(b, ())


def _expand_items(items, cap: int, budget: int) -> list:
    acc = [((), ())]
    for f in items:
        parts = _expand(f, cap, budget)
        if len(acc) * len(parts) > budget:
            raise BudgetExceeded("variants", budget)
        acc = [(c1 + c2, w1 + w2) for c1, w1 in acc for c2, w2 in parts]
    return acc


def _expand(f, cap: int, budget: int) -> list:
    """(choice vector, word of message names) pairs for one fragment."""
    if isinstance(f, Msg):
        return [((), (f.name,))]
    if isinstance(f, Seq):
        return _expand_items(f.items, cap, budget)
    if isinstance(f, Alt):
        out = []
        for i, op in enumerate(f.operands):
            out.extend(((i,) + c, w) for c, w in _expand_items(op, cap, budget))
        if len(out) > budget:
            raise BudgetExceeded("variants", budget)
        return out
    if isinstance(f, Loop):
        body = _expand_items(f.body, cap, budget)
        out = []
        for n in range(f.min, loop_upper(f, cap) + 1):
            if len(body) ** n > budget:
                raise BudgetExceeded("variants", budget)
            for combo in itertools.product(body, repeat=n):
                choices = (n,) + tuple(x for c, _ in combo for x in c)
                word = tuple(x for _, w in combo for x in w)
                out.append((choices, word))
            if len(out) > budget:
                raise BudgetExceeded("variants", budget)
        return out
    raise TypeError(f"unsupported fragment {f!r}")


def loop_upper(loop: Loop, cap: int) -> int:
    """Largest unfolded iteration count; never below the loop's minimum."""
    return max(loop.min, min(loop.max, cap))


def _variant_from_word(s: Scenario, choices, word) -> FlatVariant:
    decls = {m.name: m for m in s.messages}
    chains: dict[str, list] = {lid: [] for lid in s.lifeline_ids}
    counts: dict[str, int] = {}
    for name in word:
        k = counts[name] = counts.get(name, 0) + 1
        decl = decls[name]
        chains[decl.sender].append(Event(SEND, name, k, decl.sender))
        chains[decl.receiver].append(Event(RECEIVE, name, k, decl.receiver))
    return FlatVariant(tuple(choices), tuple((lid, tuple(c)) for lid, c in chains.items()))


def unfold(s: Scenario, loop_cap: int = DEFAULT_LOOP_CAP, budget: int = DEFAULT_BUDGET) -> list[FlatVariant]:
    """One flat variant per combination of alt operands and loop counts."""
    return list(compile_scenario(s, loop_cap, budget).variants)


class Compiled:
    """Per-scenario lookup tables shared by all analyses.

    Variants are identified by bit positions so that "some variant agrees
    with all of these local views" is a single AND of masks.
    """

    def __init__(self, s: Scenario, loop_cap: int, budget: int):
        check_valid(s)
        if loop_cap < 1:
            raise ValueError("loop cap must be positive")
        self.scenario = s
        self.loop_cap = loop_cap
        self.budget = budget
        self.lifelines = s.lifeline_ids
        self.index = {lid: i for i, lid in enumerate(self.lifelines)}
        self.decls = {m.name: m for m in s.messages}
        self.variants = tuple(
            _variant_from_word(s, c, w) for c, w in _expand_items(s.body.items, loop_cap, budget)
        )
        self.all_mask = (1 << len(self.variants)) - 1
        # chains[v][i]: chain of lifeline i in variant v
        self.chains = tuple(tuple(c for _, c in v.chains) for v in self.variants)
        self.prefix_mask: list[dict] = [dict() for _ in self.lifelines]
        self.complete_mask: list[dict] = [dict() for _ in self.lifelines]
        self.next_events: list[dict] = [dict() for _ in self.lifelines]
        for v, chains in enumerate(self.chains):
            bit = 1 << v
            for i, chain in enumerate(chains):
                pm, nx = self.prefix_mask[i], self.next_events[i]
                for n in range(len(chain) + 1):
                    p = chain[:n]
                    pm[p] = pm.get(p, 0) | bit
                    if n < len(chain):
                        nx.setdefault(p, set()).add(chain[n])
                cm = self.complete_mask[i]
                cm[chain] = cm.get(chain, 0) | bit
        self.distinct_chains = tuple(dict.fromkeys(self.chains))

    def local_complete(self, i: int) -> tuple:
        return tuple(self.complete_mask[i])

    def receiver_of(self, message: str) -> str:
        return self.decls[message].receiver

    def sender_of(self, message: str) -> str:
        return self.decls[message].sender

    def prefix_tuple_mask(self, locals_: Sequence[tuple]) -> int:
        mask = self.all_mask
        for i, h in enumerate(locals_):
            mask &= self.prefix_mask[i].get(h, 0)
            if not mask:
                return 0
        return mask

    def is_valid_prefix(self, trace: Sequence[Event]) -> bool:
        seen = set()
        locals_ = [[] for _ in self.lifelines]
        for e in trace:
            if e in seen or e.lifeline not in self.index:
                return False
            if not e.is_send and Event(SEND, e.message, e.occurrence, self.sender_of_safe(e.message)) not in seen:
                return False
            seen.add(e)
            locals_[self.index[e.lifeline]].append(e)
        return bool(self.prefix_tuple_mask([tuple(h) for h in locals_]))

    def sender_of_safe(self, message: str) -> Optional[str]:
        decl = self.decls.get(message)
        return decl.sender if decl else None

    @cached_property
    def valid_traces(self) -> tuple:
        found: set = set()
        for chains in self.distinct_chains:
            for t in interleavings(chains):
                found.add(t)
                if len(found) > self.budget:
                    raise BudgetExceeded("valid traces", self.budget)
        return sort_traces(found)

    def variants_with_prefix(self, trace: Sequence[Event]) -> list[int]:
        """Indices of variants in which ``trace`` is a prefix of some linear extension."""
        if not self.is_valid_prefix(trace):
            return []
        locals_ = [project(trace, lid) for lid in self.lifelines]
        mask = self.prefix_tuple_mask(locals_)
        return [v for v in range(len(self.variants)) if mask >> v & 1]


@lru_cache(maxsize=512)
def compile_scenario(s: Scenario, loop_cap: int = DEFAULT_LOOP_CAP, budget: int = DEFAULT_BUDGET) -> Compiled:
    return Compiled(s, loop_cap, budget)


def interleavings(chains: Sequence[tuple]) -> Iterator[Trace]:
    """Every merge of the chains in which each receive follows its matching send.

    Receives whose send never occurs block, so such chain tuples yield nothing
    complete.  Lifelines are tried in index order, giving a deterministic
    enumeration order.
    """
    chains = [c for c in chains if c]
    total = sum(len(c) for c in chains)
    pos = [0] * len(chains)
    sent: set = set()
    trace: list = []

    def rec():
        if len(trace) == total:
            yield tuple(trace)
            return
        for i, chain in enumerate(chains):
            p = pos[i]
            if p == len(chain):
                continue
            e = chain[p]
            if e.is_send:
                sent.add(e.key)
            elif e.key not in sent:
                continue
            pos[i] = p + 1
            trace.append(e)
            yield from rec()
            trace.pop()
            pos[i] = p
            if e.is_send:
                sent.discard(e.key)

    return rec()


def valid_global_traces(s: Scenario, loop_cap: int = DEFAULT_LOOP_CAP, budget: int = DEFAULT_BUDGET) -> tuple:
    return compile_scenario(s, loop_cap, budget).valid_traces


def valid_local_traces(s: Scenario, lifeline: str, loop_cap: int = DEFAULT_LOOP_CAP,
                       budget: int = DEFAULT_BUDGET) -> tuple:
    # Every variant has at least one linear extension, so the projections of
    # the valid traces onto a lifeline are exactly its chains.
    c = compile_scenario(s, loop_cap, budget)
    return sort_traces(c.complete_mask[c.index[lifeline]])


def is_valid_prefix(s: Scenario, trace: Sequence[Event], loop_cap: int = DEFAULT_LOOP_CAP,
                    budget: int = DEFAULT_BUDGET) -> bool:
    return compile_scenario(s, loop_cap, budget).is_valid_prefix(trace)
