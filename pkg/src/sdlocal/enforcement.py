"""Synthesis of coordination messages that restore both local properties.

Violations are turned into deviation points (where a witness leaves the
valid behaviour and which events it was missing).  Those points suggest
candidate coordination messages; subsets of candidates are then tried in
increasing size and each subset is accepted only after the refined scenario
is fully re-verified.
"""

from __future__ import annotations

import functools
import itertools
import operator
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

from .controllability import UnintendedTrace, is_locally_controllable, unintended_traces
from .errors import (
    AnchorNotFound,
    AnchorsInDifferentOperands,
    BudgetExceeded,
    CycleIntroduced,
    NoAdjacentPosition,
    PlacementError,
)
from .model import (
    Alt,
    Loop,
    MessageDecl,
    Msg,
    Scenario,
    Seq,
    check_valid,
    child_lists,
    iter_msgs,
)
from .observability import is_locally_observable, locally_uncheckable_traces
from .semantics import (
    DEFAULT_BUDGET,
    DEFAULT_LOOP_CAP,
    RECEIVE,
    SEND,
    Compiled,
    Event,
    Trace,
    compile_scenario,
    interleavings,
    sort_traces,
)

DEFAULT_MAX_COORD = 4
DEFAULT_SEARCH_BUDGET = 5_000
# Witnesses (shortlex first) used for candidate hints and for the blocking filter.
HINT_WITNESSES = 500
FILTER_WITNESSES = 2_000

CONTROLLABILITY = "controllability"
OBSERVABILITY = "observability"


@dataclass(frozen=True)
class CoordinationMessage:
    """A message from ``sender`` to ``receiver``.

    The send goes right after ``after`` on the sender; the receive goes
    right before ``before`` on the receiver, or after the receiver's last
    event in the anchor's scope when ``before`` is None.
    """

    sender: str
    after: Event
    receiver: str
    before: Optional[Event] = None
    name: Optional[str] = None

    @property
    def before_label(self) -> str:
        return str(self.before) if self.before is not None else f"end@{self.receiver}"

    def describe(self) -> str:
        return f"{self.sender} -> {self.receiver} after {self.after} before {self.before_label}"

    def render(self) -> str:
        return f"{self.name}: {self.describe()}" if self.name else self.describe()

    def ordering_constraint(self) -> str:
        return f"{self.after} < {self.before_label}"

    def unnamed(self) -> "CoordinationMessage":
        return CoordinationMessage(self.sender, self.after, self.receiver, self.before)


@dataclass(frozen=True)
class DeviationPoint:
    kind: str
    witness: Trace
    offending: Optional[Event]
    missing: tuple = ()
    premature: bool = False
    lost: tuple = ()


@dataclass(frozen=True)
class RefinedScenario:
    scenario: Scenario
    added: tuple


@dataclass(frozen=True)
class Synthesis:
    """Outcome of the subset search.

    ``pool`` is the candidate list searched when the answer was found; no
    strictly smaller subset of it verifies.
    """

    status: str  # "synthesized" | "already_satisfied" | "not_found"
    refined: Optional[RefinedScenario] = None
    pool: tuple = ()
    bound: int = DEFAULT_MAX_COORD
    checked: int = 0

    @property
    def messages(self) -> tuple:
        return self.refined.added if self.refined else ()


# ---------------------------------------------------------------- deviation


def _missing_before(c: Compiled, prefix: Sequence[Event], e: Event) -> tuple:
    # In every linear extension that starts with the prefix, the events before
    # e are exactly pred(e) united with the prefix; intersect over variants.
    done = set(prefix)
    acc = None
    for v in c.variants_with_prefix(prefix):
        variant = c.variants[v]
        if e not in variant.events:
            continue
        preds = variant.predecessors[e] - done
        acc = set(preds) if acc is None else acc & preds
    return tuple(sorted(acc or (), key=str))


def _missing_after(c: Compiled, prefix: Sequence[Event]) -> tuple:
    done = set(prefix)
    acc = None
    nexts = set()
    for v in c.variants_with_prefix(prefix):
        rest = c.variants[v].events - done
        acc = set(rest) if acc is None else acc & rest
    if not acc:
        # No event is common to every completion; fall back to the possible next steps.
        for v in c.variants_with_prefix(prefix):
            variant = c.variants[v]
            nexts |= {x for x in variant.events - done if variant.predecessors[x] <= done}
        return tuple(sorted(nexts, key=str))
    return tuple(sorted(acc, key=str))


def _lost_sends(trace: Sequence[Event]) -> tuple:
    received = {e.key for e in trace if not e.is_send}
    return tuple(e for e in trace if e.is_send and e.key not in received)


def _first_invalid(c: Compiled, u: Trace) -> Optional[int]:
    """Index of the event that first leaves the valid prefixes (they are prefix-closed)."""
    if c.is_valid_prefix(u):
        return None
    lo, hi = 0, len(u) - 1
    while lo < hi:
        mid = (lo + hi) // 2
        if c.is_valid_prefix(u[: mid + 1]):
            lo = mid + 1
        else:
            hi = mid
    return lo


def deviation_points(s: Scenario, unintended: Iterable, uncheckable: Iterable,
                     loop_cap: int = DEFAULT_LOOP_CAP, budget: int = DEFAULT_BUDGET) -> list[DeviationPoint]:
    """One deviation point per violation witness, controllability first."""
    c = compile_scenario(s, loop_cap, budget)
    points = []
    for w in unintended:
        trace = w.trace if isinstance(w, UnintendedTrace) else tuple(w)
        prefix, e = trace[:-1], trace[-1]
        points.append(DeviationPoint(CONTROLLABILITY, trace, e, _missing_before(c, prefix, e)))
    for u in uncheckable:
        u = tuple(u)
        lost = _lost_sends(u)
        cut = _first_invalid(c, u)
        if cut is not None:
            e = u[cut]
            points.append(DeviationPoint(OBSERVABILITY, u, e, _missing_before(c, u[:cut], e), False, lost))
        else:
            offending = lost[0] if lost else None
            points.append(DeviationPoint(OBSERVABILITY, u, offending, _missing_after(c, u), True, lost))
    return points


# ---------------------------------------------------------------- tree edits


def _locate(items: tuple, name: str, path=()):
    """(path to the owning fragment list, index in it) of message ``name``."""
    for i, f in enumerate(items):
        if isinstance(f, Msg):
            if f.name == name:
                return path, i
        else:
            for j, sub in enumerate(child_lists(f)):
                found = _locate(sub, name, path + ((i, j),))
                if found:
                    return found
    return None


def _get_list(items: tuple, path) -> tuple:
    for i, j in path:
        items = list(child_lists(items[i]))[j]
    return items


def _with_child_list(f, j: int, new_items: tuple):
    if isinstance(f, Seq):
        return Seq(new_items)
    if isinstance(f, Alt):
        ops = list(f.operands)
        ops[j] = new_items
        return Alt(tuple(ops))
    if isinstance(f, Loop):
        return Loop(f.min, f.max, new_items)
    raise TypeError(f)


def _set_list(items: tuple, path, new_items: tuple) -> tuple:
    if not path:
        return new_items
    (i, j), rest = path[0], path[1:]
    inner = list(child_lists(items[i]))[j]
    replaced = _with_child_list(items[i], j, _set_list(inner, rest, new_items))
    return items[:i] + (replaced,) + items[i + 1:]


def _involves(f, lifeline: str, decls: dict) -> bool:
    """Does fragment ``f`` hold an event of ``lifeline`` (coordination messages ignored)?"""
    for name in iter_msgs((f,)):
        d = decls[name]
        if not d.is_coordination and lifeline in (d.sender, d.receiver):
            return True
    return False


def _anchor_owner(decls: dict, anchor: Event) -> MessageDecl:
    d = decls.get(anchor.message)
    if d is None:
        raise AnchorNotFound(f"no message {anchor.message} for anchor {anchor}")
    expected = d.sender if anchor.is_send else d.receiver
    if anchor.lifeline != expected:
        raise AnchorNotFound(f"anchor {anchor} is not an event of {anchor.lifeline}")
    return d


def _descent(items: tuple, outer: tuple, inner: tuple):
    """Fragment lists from ``outer`` down to ``inner`` with the entry index at
    each level, or None when the nesting passes through a loop body."""
    lists = [_get_list(items, outer)]
    entries = []
    for i, j in inner[len(outer):]:
        f = lists[-1][i]
        if not isinstance(f, Alt):
            return None
        entries.append(i)
        lists.append(f.operands[j])
    return lists, entries


def _placement(s: Scenario, cm: CoordinationMessage):
    """(path, index) at which a Msg for ``cm`` satisfies both anchors.

    The send must be the next sender event after ``after`` and the receive
    the last receiver event before ``before``.  Anchors may sit at different
    nesting depths when the deeper one is reached through alt operands only;
    the message is then placed in the deeper operand.
    """
    decls = {m.name: m for m in s.messages}
    if cm.sender == cm.receiver:
        raise PlacementError("coordination message sender equals receiver")
    if cm.sender not in s.lifeline_ids or cm.receiver not in s.lifeline_ids:
        raise AnchorNotFound("coordination endpoints must be declared lifelines")
    if cm.after.lifeline != cm.sender:
        raise AnchorNotFound(f"after-anchor {cm.after} is not on {cm.sender}")
    _anchor_owner(decls, cm.after)
    path_a, i_a = _locate(s.body.items, cm.after.message)
    if cm.before is None:
        path_b, i_b = path_a, len(_get_list(s.body.items, path_a))
    else:
        if cm.before.lifeline != cm.receiver:
            raise AnchorNotFound(f"before-anchor {cm.before} is not on {cm.receiver}")
        _anchor_owner(decls, cm.before)
        path_b, i_b = _locate(s.body.items, cm.before.message)

    def quiet(fragments, lifeline):
        return not any(_involves(f, lifeline, decls) for f in fragments)

    if path_b[:len(path_a)] == path_a:
        descent = _descent(s.body.items, path_a, path_b)
        if descent is None:
            raise AnchorsInDifferentOperands(f"{cm.before} is inside a loop that does not hold {cm.after}")
        lists, entries = descent
        first = entries[0] if entries else i_b
        if first <= i_a:
            if _before_precedes_after(s, cm):
                raise CycleIntroduced(f"{cm.before} precedes {cm.after}; the message would close a cycle")
            raise NoAdjacentPosition(f"{cm.before} is not after {cm.after} in diagram order")
        gap = list(lists[0][i_a + 1:first])
        for level, k in zip(lists[1:], entries[1:]):
            gap += level[:k]
        if not quiet(gap, cm.sender):
            raise NoAdjacentPosition(f"no position puts {cm.render()} next to both anchors")
        items = lists[-1]
        start = i_a + 1 if not entries else 0
        for p in range(start, i_b + 1):
            if not quiet(items[start:p], cm.sender):
                break
            if quiet(items[p:i_b], cm.receiver):
                return path_b, p
        raise NoAdjacentPosition(f"no position puts {cm.render()} next to both anchors")

    if path_a[:len(path_b)] == path_b:
        descent = _descent(s.body.items, path_b, path_a)
        if descent is None:
            raise AnchorsInDifferentOperands(f"{cm.after} is inside a loop that does not hold {cm.before}")
        lists, entries = descent
        if entries[0] >= i_b:
            if _before_precedes_after(s, cm):
                raise CycleIntroduced(f"{cm.before} precedes {cm.after}; the message would close a cycle")
            raise NoAdjacentPosition(f"{cm.before} is not after {cm.after} in diagram order")
        gap = list(lists[0][entries[0] + 1:i_b])
        for level, k in zip(lists[1:-1], entries[1:]):
            gap += level[k + 1:]
        if not quiet(gap, cm.receiver):
            raise NoAdjacentPosition(f"no position puts {cm.render()} next to both anchors")
        items = lists[-1]
        for p in range(i_a + 1, len(items) + 1):
            if not quiet(items[i_a + 1:p], cm.sender):
                break
            if quiet(items[p:], cm.receiver):
                return path_a, p
        raise NoAdjacentPosition(f"no position puts {cm.render()} next to both anchors")

    raise AnchorsInDifferentOperands(f"anchors {cm.after} and {cm.before} are not in nested fragment scopes")


def _before_precedes_after(s: Scenario, cm: CoordinationMessage) -> bool:
    for v in compile_scenario(s).variants:
        if cm.before in v.events and cm.after in v.events and v.precedes(cm.before, cm.after):
            return True
    return False


def _fresh_names(s: Scenario, count: int) -> list[str]:
    used = {m.name for m in s.messages}
    names, k = [], 1
    while len(names) < count:
        if f"Ctrl{k}" not in used:
            names.append(f"Ctrl{k}")
        k += 1
    return names


def insert(s: Scenario, coordination: Sequence[CoordinationMessage]) -> Scenario:
    """Place coordination messages into the scenario, in the given order.

    Unnamed messages receive the next free ``Ctrl<k>`` names.
    """
    return insert_named(s, coordination)[0]


def insert_named(s: Scenario, coordination: Sequence[CoordinationMessage]) -> tuple[Scenario, tuple]:
    check_valid(s)
    unnamed = [cm for cm in coordination if not cm.name]
    fresh = iter(_fresh_names(s, len(unnamed)))
    placed = []
    current = s
    for cm in coordination:
        if not cm.name:
            cm = CoordinationMessage(cm.sender, cm.after, cm.receiver, cm.before, next(fresh))
        if any(m.name == cm.name for m in current.messages):
            raise PlacementError(f"message name {cm.name} already in use")
        path, p = _placement(current, cm)
        items = _get_list(current.body.items, path)
        body = _set_list(current.body.items, path, items[:p] + (Msg(cm.name),) + items[p:])
        decls = {m.name: m for m in current.messages}
        decls[cm.name] = MessageDecl(cm.name, cm.sender, cm.receiver, True)
        current = Scenario(current.name, current.lifelines,
                           tuple(decls[n] for n in iter_msgs(body)), Seq(body))
        placed.append(cm)
    return current, tuple(placed)


def is_placeable(s: Scenario, cm: CoordinationMessage) -> bool:
    try:
        _placement(s, cm)
    except PlacementError:
        return False
    return True


# ---------------------------------------------------------------- candidates


def _structural_events(s: Scenario) -> list[Event]:
    out = []
    for d in s.messages:
        if not d.is_coordination:
            out.append(Event(SEND, d.name, 1, d.sender))
            out.append(Event(RECEIVE, d.name, 1, d.receiver))
    return out


def _successor_on(s: Scenario, message: str, lifeline: str) -> Optional[Event]:
    """Next event of ``lifeline`` after ``message`` within its fragment list."""
    decls = {m.name: m for m in s.messages}
    path, i = _locate(s.body.items, message)
    items = _get_list(s.body.items, path)
    for f in items[i + 1:]:
        for name in iter_msgs((f,)):
            d = decls[name]
            if d.is_coordination:
                continue
            if d.sender == lifeline:
                return Event(SEND, name, 1, lifeline)
            if d.receiver == lifeline:
                return Event(RECEIVE, name, 1, lifeline)
    return None


def _tier1(s: Scenario, points: Sequence[DeviationPoint]) -> list[CoordinationMessage]:
    out = []
    for pt in points:
        e = pt.offending
        if e is not None and not (pt.premature and e in pt.lost):
            producer = e if e.is_send else Event(SEND, e.message, e.occurrence, s.message(e.message).sender)
            for f in pt.missing:
                if f.lifeline != producer.lifeline:
                    out.append(CoordinationMessage(f.lifeline, f.structural(), producer.lifeline,
                                                   producer.structural()))
        for lost in pt.lost:
            d = s.message(lost.message)
            out.append(CoordinationMessage(d.receiver, Event(RECEIVE, d.name, 1, d.receiver), d.sender,
                                           _successor_on(s, d.name, d.sender)))
    return out


def _order(candidates: Iterable[CoordinationMessage]) -> list[CoordinationMessage]:
    unique = {cm.unnamed() for cm in candidates}
    return sorted(unique, key=lambda cm: (len(cm.describe()), cm.describe()))


def candidate_coordinations(s: Scenario, points: Sequence[DeviationPoint],
                            fallback: bool = False) -> list[CoordinationMessage]:
    """Hint-derived candidates (tier 1), optionally followed by every other
    placeable cross-lifeline anchor pair (tier 2).  Unplaceable candidates are dropped."""
    tier1 = [cm for cm in _order(_tier1(s, points)) if is_placeable(s, cm)]
    if not fallback:
        return tier1
    return tier1 + exhaustive_candidates(s, exclude=tier1)


def exhaustive_candidates(s: Scenario, exclude: Iterable[CoordinationMessage] = ()) -> list[CoordinationMessage]:
    skip = set(exclude)
    events = _structural_events(s)
    out = []
    for a in events:
        for b in events + [None]:
            targets = [b.lifeline] if b is not None else [l for l in s.lifeline_ids if l != a.lifeline]
            for target in targets:
                if target == a.lifeline:
                    continue
                cm = CoordinationMessage(a.lifeline, a, target, b)
                if cm not in skip and is_placeable(s, cm):
                    out.append(cm)
    return _order(out)


# ---------------------------------------------------------------- verification


def _erase_events(trace: Trace, coord: set) -> Trace:
    return tuple(e for e in trace if e.message not in coord)


def verify_candidate_set(s: Scenario, coordination: Sequence[CoordinationMessage],
                         loop_cap: int = DEFAULT_LOOP_CAP, budget: int = DEFAULT_BUDGET) -> bool:
    """Refine ``s`` with the messages and check controllability, observability,
    absence of deadlock and preservation of every lifeline's valid local traces."""
    refined = insert(s, coordination)
    return _refined_ok(s, refined, loop_cap, budget)


def _refined_ok(s: Scenario, refined: Scenario, loop_cap: int, budget: int) -> bool:
    if not is_locally_controllable(refined, loop_cap, budget):
        return False
    if not is_locally_observable(refined, loop_cap, budget):
        return False
    c = compile_scenario(refined, loop_cap, budget)
    if not any(next(interleavings(chains), None) is not None for chains in c.distinct_chains):
        return False
    orig = compile_scenario(s, loop_cap, budget)
    coord = {m.name for m in refined.messages if m.is_coordination}
    for i in range(len(c.lifelines)):
        erased = {_erase_events(t, coord) for t in c.local_complete(i)}
        if erased != set(orig.local_complete(i)):
            return False
    return True


# ---------------------------------------------------------------- search


class _WitnessView:
    """Per-lifeline events of a run up to that lifeline's last send."""

    def __init__(self, witness: Sequence[Event]):
        self.index = {e: i for i, e in enumerate(witness)}
        locals_: dict = {}
        for e in witness:
            locals_.setdefault(e.lifeline, []).append(e)
        self.upto = {}
        for lifeline, local in locals_.items():
            last = max((i for i, e in enumerate(local) if e.is_send), default=-1)
            self.upto[lifeline] = local[:last + 1]


def can_block(cm: CoordinationMessage, witness, plain: Optional[dict] = None) -> bool:
    """Could ``cm`` hold back some send of ``witness``?

    Only sends are decisions, so a refinement stops an unintended run only
    by making a lifeline wait for a coordination receive before one of the
    run's sends.  The receive sits right before ``cm.before``; it precedes a
    send of the run exactly when that anchor is one of the receiver's events
    in the run up to its last send there.

    ``plain`` maps messages outside loops to their fragment list.  When both
    anchors share such a list, the coordination message exists wherever they
    do; if the run already performed ``cm.after`` (within the sender's sends)
    before that anchor, it can be sent and received in time and blocks
    nothing.
    """
    view = witness if isinstance(witness, _WitnessView) else _WitnessView(witness)
    local = view.upto.get(cm.receiver)
    if not local:
        return False
    if cm.before is None:
        return True
    hit = next((e for e in local if e.structural() == cm.before), None)
    if hit is None:
        return False
    scope = plain or {}
    if cm.after.message not in scope or scope.get(cm.before.message) != scope[cm.after.message]:
        return True
    if cm.after not in view.upto.get(cm.sender, ()):
        return True
    return view.index[cm.after] > view.index[hit]


def _plain_scopes(items, path=(), looped: bool = False) -> dict:
    """Message name to the path of its fragment list, for messages outside loops."""
    out = {}
    for i, f in enumerate(items):
        if isinstance(f, Msg):
            if not looped:
                out[f.name] = path
        else:
            for j, sub in enumerate(child_lists(f)):
                out.update(_plain_scopes(sub, path + ((i, j),), looped or isinstance(f, Loop)))
    return out


def _block_masks(s: Scenario, pool: Sequence[CoordinationMessage], witnesses: Sequence) -> dict:
    plain = _plain_scopes(s.body.items)
    views = [_WitnessView(w) for w in witnesses]
    masks = {}
    for cm in pool:
        m = 0
        for i, w in enumerate(views):
            if can_block(cm, w, plain):
                m |= 1 << i
        masks[cm] = m
    return masks


def synthesize_minimal_coordination(s: Scenario, loop_cap: int = DEFAULT_LOOP_CAP,
                                    max_size: int = DEFAULT_MAX_COORD, budget: int = DEFAULT_BUDGET,
                                    search_budget: int = DEFAULT_SEARCH_BUDGET,
                                    unintended: Optional[Sequence] = None,
                                    uncheckable: Optional[Sequence] = None) -> Synthesis:
    """Smallest verifying subset of the candidate pool, searched breadth-first.

    For each size k, tier 1 (hint-derived) subsets are tried first, then the
    size-k subsets that use at least one tier 2 candidate.  The first subset
    that verifies is returned, so no strictly smaller subset of the whole pool
    verifies.  Previously computed violation sets may be passed in to avoid
    recomputation.
    """
    check_valid(s)
    if not s.is_coordination_free:
        raise ValueError("synthesis expects a scenario without coordination messages")
    if is_locally_controllable(s, loop_cap, budget) and is_locally_observable(s, loop_cap, budget):
        return Synthesis("already_satisfied", bound=max_size)
    if unintended is None:
        unintended = unintended_traces(s, loop_cap, budget)
    if uncheckable is None:
        uncheckable = locally_uncheckable_traces(s, loop_cap, budget)
    points = deviation_points(s, unintended[:HINT_WITNESSES], uncheckable[:HINT_WITNESSES], loop_cap, budget)
    tier1 = candidate_coordinations(s, points)
    full = tier1 + exhaustive_candidates(s, exclude=tier1)
    # Subsets that cannot block every (sampled) unintended run are never verified.
    witnesses = [w.trace if isinstance(w, UnintendedTrace) else tuple(w) for w in unintended[:FILTER_WITNESSES]]
    need = (1 << len(witnesses)) - 1
    masks = _block_masks(s, full, witnesses)
    checked = 0
    if need and functools.reduce(operator.or_, masks.values(), 0) != need:
        return Synthesis("not_found", pool=tuple(full), bound=max_size, checked=0)

    def attempt(subset):
        nonlocal checked
        if functools.reduce(operator.or_, (masks[cm] for cm in subset), 0) != need:
            return None
        checked += 1
        if checked > search_budget:
            raise BudgetExceeded("candidate subsets", search_budget)
        try:
            refined, named = insert_named(s, subset)
        except PlacementError:
            return None
        return RefinedScenario(refined, named) if _refined_ok(s, refined, loop_cap, budget) else None

    tier1_set = set(tier1)
    for k in range(1, max_size + 1):
        for subset in itertools.combinations(tier1, k):
            found = attempt(subset)
            if found:
                return Synthesis("synthesized", found, tuple(full), max_size, checked)
        for subset in itertools.combinations(full, k):
            if all(cm in tier1_set for cm in subset):
                continue
            found = attempt(subset)
            if found:
                return Synthesis("synthesized", found, tuple(full), max_size, checked)
    return Synthesis("not_found", pool=tuple(full), bound=max_size, checked=checked)

