"""Import of UML2 interactions from XMI (``.uml`` / ``.xmi``) files.

Only the subset needed by the analyses is accepted: lifelines, asynchronous
messages with both occurrence ends, and ``alt`` / ``opt`` / ``loop`` combined
fragments.  Execution specifications, guard expressions and time or duration
constraints are dropped with an :class:`XmiImportWarning`; any other element
kind is rejected.
"""

from __future__ import annotations

import re
import warnings
import xml.etree.ElementTree as ET
from typing import Optional

from .errors import XmiImportError, XmiImportWarning
from .model import IDENT_RE, Alt, Lifeline, Loop, MessageDecl, Msg, Scenario, Seq, validate_scenario
from .semantics import DEFAULT_LOOP_CAP

ASYNC_SORTS = {"asynchCall", "asynchSignal"}
SUPPORTED_OPERATORS = {"alt", "opt", "loop"}
IGNORED_FRAGMENTS = {
    "BehaviorExecutionSpecification",
    "ActionExecutionSpecification",
    "ExecutionOccurrenceSpecification",
}
IGNORED_CHILDREN = {"eAnnotations", "ownedComment", "ownedAttribute", "ownedParameter", "name"}


def _local(tag: str) -> str:
    return tag.rsplit("}", 1)[-1]


def _xmi_attr(el: ET.Element, name: str) -> Optional[str]:
    for key, value in el.attrib.items():
        if key == f"xmi:{name}":
            return value
        if key.startswith("{") and key.endswith("}" + name) and "xmi" in key.lower():
            return value
    return None


def _kind(el: ET.Element) -> str:
    """UML metaclass of an element, from ``xmi:type`` or the tag itself."""
    t = _xmi_attr(el, "type")
    if t:
        return t.split(":", 1)[-1]
    return _local(el.tag)


def _ref(el: ET.Element, name: str) -> Optional[str]:
    """An id reference given as attribute or as a child with ``xmi:idref``/``href``."""
    value = el.get(name)
    if value:
        return value.split()[0]
    for child in el:
        if _local(child.tag) == name:
            ref = _xmi_attr(child, "idref") or child.get("href", "").rsplit("#", 1)[-1]
            if ref:
                return ref
    return None


def _warn(message: str) -> None:
    warnings.warn(message, XmiImportWarning, stacklevel=3)


class _Importer:
    def __init__(self, loop_cap: int):
        self.loop_cap = loop_cap
        self.errors: list[str] = []
        self.lifeline_names: dict[str, str] = {}
        self.messages: dict[str, ET.Element] = {}
        self.occurrences: dict[str, ET.Element] = {}
        self.placed: list[str] = []
        self.unplaceable: set[str] = set()

    def run(self, root: ET.Element) -> Scenario:
        interaction = next((el for el in root.iter() if _kind(el) == "Interaction"), None)
        if interaction is None:
            raise XmiImportError(["no uml:Interaction element found"])
        lifelines = []
        fragments = []
        for child in interaction:
            tag = _local(child.tag)
            if tag == "lifeline":
                lid = _xmi_attr(child, "id")
                name = child.get("name", "")
                if not IDENT_RE.match(name):
                    self.errors.append(f"lifeline name {name!r} is not an identifier")
                self.lifeline_names[lid] = name
                lifelines.append(Lifeline(name))
            elif tag == "message":
                self.messages[_xmi_attr(child, "id")] = child
            elif tag == "fragment":
                fragments.append(child)
            elif tag == "ownedRule":
                _warn(f"ignored constraint {_kind(child)} {child.get('name', '')}".rstrip())
            elif tag in IGNORED_CHILDREN:
                continue
            else:
                self.errors.append(f"unsupported element {tag} ({_kind(child)})")
        self._index_occurrences(fragments)
        body = self._fragments(fragments)
        decls = self._declarations()
        for mid, msg in self.messages.items():
            if msg.get("name") not in self.placed and mid not in self.unplaceable:
                self.errors.append(f"message {msg.get('name')!r} has no occurrence ends in the interaction")
        if self.errors:
            raise XmiImportError(list(dict.fromkeys(self.errors)))
        name = re.sub(r"[^A-Za-z0-9_]", "_", interaction.get("name") or "interaction")
        if not IDENT_RE.match(name):
            name = "_" + name
        order = {n: i for i, n in enumerate(self.placed)}
        s = Scenario(name, lifelines, tuple(sorted(decls, key=lambda d: order[d.name])), Seq(body))
        diags = validate_scenario(s)
        if diags:
            raise XmiImportError([str(d) for d in diags])
        return s

    def _index_occurrences(self, fragments) -> None:
        for f in fragments:
            kind = _kind(f)
            if kind == "MessageOccurrenceSpecification":
                self.occurrences[_xmi_attr(f, "id")] = f
            elif kind == "CombinedFragment":
                for op in f:
                    if _local(op.tag) == "operand":
                        self._index_occurrences([x for x in op if _local(x.tag) == "fragment"])

    def _message_ends(self, mid: str):
        msg = self.messages.get(mid)
        if msg is None:
            self.errors.append(f"occurrence refers to unknown message {mid!r}")
            return None
        sort = msg.get("messageSort", "synchCall")
        name = msg.get("name", "")
        if sort not in ASYNC_SORTS:
            self.errors.append(f"message {name!r} has messageSort {sort}; only asynchronous messages are "
                               "supported, remodel call/reply pairs as two asynchronous messages")
            return None
        send, receive = msg.get("sendEvent"), msg.get("receiveEvent")
        if not send or not receive or send not in self.occurrences or receive not in self.occurrences:
            self.errors.append(f"message {name!r} lacks a send or receive occurrence")
            return None
        return msg, send, receive

    def _fragments(self, fragments) -> tuple:
        ids_here = {_xmi_attr(f, "id") for f in fragments}
        items = []
        for f in fragments:
            kind = _kind(f)
            if kind == "MessageOccurrenceSpecification":
                fid = _xmi_attr(f, "id")
                mid = f.get("message") or _ref(f, "message")
                ends = self._message_ends(mid)
                if ends is None:
                    self.unplaceable.add(mid)
                    continue
                msg, send, receive = ends
                if fid == send:
                    if receive not in ids_here:
                        self.errors.append(f"message {msg.get('name')!r} has its ends in different operands")
                        self.unplaceable.add(mid)
                        continue
                    name = msg.get("name", "")
                    if name in self.placed:
                        self.errors.append(f"duplicate message name {name!r}")
                        continue
                    self.placed.append(name)
                    items.append(Msg(name))
            elif kind == "CombinedFragment":
                frag = self._combined(f)
                if frag is not None:
                    items.append(frag)
            elif kind in IGNORED_FRAGMENTS:
                _warn(f"ignored {kind}")
            else:
                self.errors.append(f"unsupported element {kind}")
        return tuple(items)

    def _combined(self, f: ET.Element):
        op_name = f.get("interactionOperator", "seq")
        if op_name not in SUPPORTED_OPERATORS:
            self.errors.append(f"unsupported element CombinedFragment({op_name})")
            for el in f.iter():
                mid = el.get("message")
                if mid:
                    self.unplaceable.add(mid)
            return None
        operands = []
        guards = []
        for child in f:
            tag = _local(child.tag)
            if tag == "operand":
                inner = [x for x in child if _local(x.tag) == "fragment"]
                guard = next((x for x in child if _local(x.tag) == "guard"), None)
                guards.append(guard)
                operands.append(self._fragments(inner))
            elif tag in ("cfragmentGate", "gate"):
                self.errors.append("unsupported element gate")
            elif tag not in IGNORED_CHILDREN and tag != "covered":
                self.errors.append(f"unsupported element {tag} in CombinedFragment")
        for g in guards:
            if g is not None and any(_local(x.tag) == "specification" for x in g):
                _warn("ignored guard expression")
        if op_name == "alt":
            if not operands:
                self.errors.append("alt fragment without operands")
                return None
            return Alt(tuple(operands))
        if len(operands) != 1:
            self.errors.append(f"{op_name} fragment must have exactly one operand")
            return None
        if op_name == "opt":
            return Alt((operands[0], ()))
        lo, hi = self._loop_bounds(guards[0])
        return Loop(lo, hi, operands[0]) if lo is not None else None

    def _loop_bounds(self, guard):
        def literal(tag):
            if guard is None:
                return None
            el = next((x for x in guard if _local(x.tag) == tag), None)
            if el is None:
                return None
            value = el.get("value")
            if value is None:
                return 0 if _kind(el) == "LiteralInteger" else "*"
            return value.strip()

        raw_min, raw_max = literal("minint"), literal("maxint")
        try:
            lo = int(raw_min) if raw_min is not None else 0
            if raw_max is None:
                hi = lo if raw_min is not None else max(lo, self.loop_cap)
            elif raw_max == "*" or raw_max == "-1":
                hi = max(lo, self.loop_cap)
            else:
                hi = int(raw_max)
        except ValueError:
            self.errors.append(f"loop bounds ({raw_min},{raw_max}) are not integers")
            return None, None
        if lo < 0 or hi < lo:
            self.errors.append(f"invalid loop bounds ({lo},{hi})")
            return None, None
        return lo, hi

    def _declarations(self) -> list[MessageDecl]:
        decls = []
        for mid, msg in self.messages.items():
            name = msg.get("name", "")
            if name not in self.placed:
                continue
            send = self.occurrences[msg.get("sendEvent")]
            receive = self.occurrences[msg.get("receiveEvent")]
            sender = self.lifeline_names.get(_ref(send, "covered"))
            receiver = self.lifeline_names.get(_ref(receive, "covered"))
            if sender is None or receiver is None:
                self.errors.append(f"message {name!r} has an end not covering a declared lifeline")
                continue
            decls.append(MessageDecl(name, sender, receiver))
        return decls


def import_xmi(doc, loop_cap: int = DEFAULT_LOOP_CAP) -> Scenario:
    """Build a scenario from an XMI document given as text or bytes."""
    try:
        root = ET.fromstring(doc)
    except ET.ParseError as exc:
        raise XmiImportError([f"malformed XML: {exc}"]) from None
    return _Importer(loop_cap).run(root)


def import_xmi_file(path, loop_cap: int = DEFAULT_LOOP_CAP) -> Scenario:
    with open(path, "rb") as fh:
        return import_xmi(fh.read(), loop_cap)
