"""Scenario data model: lifelines, messages and the combined-fragment tree.

All values are frozen dataclasses built from tuples, so scenarios are hashable
and can be shared freely between analyses (and used as cache keys).
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Iterator, Optional, Union

IDENT_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_]*\Z")
COORD_NAME_RE = re.compile(r"Ctrl[1-9][0-9]*\Z")


def _tuple(value) -> tuple:
    return value if isinstance(value, tuple) else tuple(value)


@dataclass(frozen=True)
class Lifeline:
    id: str
    display_name: Optional[str] = None


@dataclass(frozen=True)
class MessageDecl:
    name: str
    sender: str
    receiver: str
    is_coordination: bool = False


@dataclass(frozen=True)
class Msg:
    name: str


@dataclass(frozen=True)
class Seq:
    items: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "items", _tuple(self.items))


@dataclass(frozen=True)
class Alt:
    """Choice between operands; an empty last operand is how ``opt`` is encoded."""

    operands: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "operands", tuple(_tuple(op) for op in self.operands))


@dataclass(frozen=True)
class Loop:
    min: int
    max: int
    body: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "body", _tuple(self.body))


Fragment = Union[Msg, Seq, Alt, Loop]


def opt(*items: Fragment) -> Alt:
    return Alt((items, ()))


@dataclass(frozen=True)
class Scenario:
    name: str
    lifelines: tuple = ()
    messages: tuple = ()
    body: Seq = field(default_factory=Seq)

    def __post_init__(self):
        object.__setattr__(self, "lifelines", _tuple(self.lifelines))
        object.__setattr__(self, "messages", _tuple(self.messages))
        if not isinstance(self.body, Seq):
            object.__setattr__(self, "body", Seq(self.body))

    @property
    def lifeline_ids(self) -> tuple[str, ...]:
        return tuple(l.id for l in self.lifelines)

    def message(self, name: str) -> MessageDecl:
        for decl in self.messages:
            if decl.name == name:
                return decl
        raise KeyError(name)

    @property
    def is_coordination_free(self) -> bool:
        return not any(m.is_coordination for m in self.messages)


def child_lists(fragment: Fragment) -> Iterator[tuple]:
    """Yield the fragment lists directly owned by ``fragment``."""
    if isinstance(fragment, Seq):
        yield fragment.items
    elif isinstance(fragment, Alt):
        yield from fragment.operands
    elif isinstance(fragment, Loop):
        yield fragment.body


def iter_msgs(fragments) -> Iterator[str]:
    """Message names in depth-first diagram order."""
    for f in fragments:
        if isinstance(f, Msg):
            yield f.name
        else:
            for items in child_lists(f):
                yield from iter_msgs(items)


@dataclass(frozen=True)
class Diagnostic:
    code: str
    element: str
    message: str

    def __str__(self):
        return self.message


def validate_scenario(s: Scenario) -> list[Diagnostic]:
    """Return one diagnostic per violated structural rule; ``[]`` means valid."""
    diags: list[Diagnostic] = []

    def add(code, element, message):
        diags.append(Diagnostic(code, element, message))

    seen_ids: set[str] = set()
    for lifeline in s.lifelines:
        if not lifeline.id:
            add("empty-id", "", "lifeline with empty id")
        elif not IDENT_RE.match(lifeline.id):
            add("bad-identifier", lifeline.id, f"lifeline id {lifeline.id!r} is not an identifier")
        if lifeline.id in seen_ids:
            add("duplicate-lifeline", lifeline.id, f"duplicate lifeline {lifeline.id}")
        seen_ids.add(lifeline.id)

    declared: dict[str, MessageDecl] = {}
    for decl in s.messages:
        if not IDENT_RE.match(decl.name or ""):
            add("bad-identifier", decl.name, f"message name {decl.name!r} is not an identifier")
        if decl.name in declared:
            add("duplicate-message", decl.name, f"duplicate message {decl.name}")
        declared[decl.name] = decl
        for role, ref in (("sender", decl.sender), ("receiver", decl.receiver)):
            if ref not in seen_ids:
                add("undeclared-lifeline", decl.name,
                    f"{role} {ref} of {decl.name} is not a declared lifeline")
        if decl.sender == decl.receiver:
            add("self-message", decl.name, f"sender equals receiver for {decl.name}")
        if decl.is_coordination and not COORD_NAME_RE.match(decl.name):
            add("bad-coordination-name", decl.name,
                f"coordination message {decl.name} must be named Ctrl<k>")

    placed: dict[str, int] = {}

    def walk(items, top):
        for f in items:
            if isinstance(f, Msg):
                placed[f.name] = placed.get(f.name, 0) + 1
                if f.name not in declared:
                    add("undeclared-message", f.name, f"message {f.name} is not declared")
            elif isinstance(f, Seq):
                add("nested-seq", "seq", "nested sequence fragment; inline its items")
                walk(f.items, False)
            elif isinstance(f, Alt):
                if not f.operands:
                    add("empty-alt", "alt", "alt fragment without operands")
                for op in f.operands:
                    walk(op, False)
            elif isinstance(f, Loop):
                if not (isinstance(f.min, int) and isinstance(f.max, int)) or f.min < 0 or f.max < 0:
                    add("bad-loop-bounds", "loop", f"loop bounds ({f.min},{f.max}) must be nonnegative integers")
                elif f.min > f.max:
                    add("bad-loop-bounds", "loop", f"loop bounds ({f.min},{f.max}) have min > max")
                walk(f.body, False)
            else:
                add("unsupported-fragment", type(f).__name__, f"unsupported fragment {type(f).__name__}")

    walk(s.body.items, True)
    for name, count in placed.items():
        if count > 1:
            add("repeated-message", name, f"message {name} appears {count} times in the fragment tree")
    for name in declared:
        if name not in placed:
            add("unplaced-message", name, f"message {name} is declared but never placed")
    return diags


@lru_cache(maxsize=1024)
def _cached_diagnostics(s: Scenario) -> tuple:
    return tuple(validate_scenario(s))


def check_valid(s: Scenario) -> None:
    """Raise InvalidScenario unless ``s`` is structurally valid."""
    from .errors import InvalidScenario

    diags = _cached_diagnostics(s)
    if diags:
        raise InvalidScenario(diags)


def _erase_items(items, drop: set[str]) -> tuple:
    out = []
    for f in items:
        if isinstance(f, Msg):
            if f.name not in drop:
                out.append(f)
        elif isinstance(f, Seq):
            out.append(Seq(_erase_items(f.items, drop)))
        elif isinstance(f, Alt):
            out.append(Alt(tuple(_erase_items(op, drop) for op in f.operands)))
        elif isinstance(f, Loop):
            out.append(Loop(f.min, f.max, _erase_items(f.body, drop)))
        else:
            out.append(f)
    return tuple(out)


def erase_coordination(s: Scenario) -> Scenario:
    """Drop every coordination message declaration and its placement."""
    drop = {m.name for m in s.messages if m.is_coordination}
    if not drop:
        return s
    return Scenario(
        s.name,
        s.lifelines,
        tuple(m for m in s.messages if not m.is_coordination),
        Seq(_erase_items(s.body.items, drop)),
    )
