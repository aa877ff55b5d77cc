"""Reader and writer for the line-oriented ``.dco`` scenario format.

    scenario payment
    lifeline L1 "Driver APP"
    lifeline L2
    m1: L1 -> L2
    opt {
      m2: L2 -> L1
    }
    loop(0,2) {
      m3: L1 -> L2
    }
    alt { m4: L1 -> L2 } else { m5: L2 -> L1 }
    coord Ctrl1: L2 -> L1

``#`` starts a comment.  A message line both declares and places the message.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from typing import Optional

from .errors import ParseError
from .model import (
    COORD_NAME_RE,
    Alt,
    Lifeline,
    Loop,
    MessageDecl,
    Msg,
    Scenario,
    Seq,
    validate_scenario,
)

UNSUPPORTED_FRAGMENTS = frozenset(
    {"par", "strict", "seq", "neg", "break", "critical", "ignore", "consider", "assert", "region"}
)

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>[ \t\r\f]+)
  | (?P<nl>\n)
  | (?P<comment>\#[^\n]*)
  | (?P<arrow>->)
  | (?P<punct>[{}(),:])
  | (?P<int>[0-9]+)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<string>"(?:[^"\\\n]|\\.)*")
    """,
    re.VERBOSE,
)


@dataclass(frozen=True)
class SourceSpan:
    line: int
    column: int
    length: int


@dataclass(frozen=True)
class ParseIssue:
    code: str
    message: str
    span: SourceSpan

    def __str__(self):
        return f"{self.span.line}:{self.span.column}: {self.message}"


@dataclass(frozen=True)
class _Tok:
    kind: str
    text: str
    span: SourceSpan


def _tokenize(text: str) -> tuple[list[_Tok], list[ParseIssue]]:
    toks, issues = [], []
    line, line_start, pos = 1, 0, 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        col = pos - line_start + 1
        if not m:
            issues.append(ParseIssue("lexical", f"unexpected character {text[pos]!r}", SourceSpan(line, col, 1)))
            pos += 1
            continue
        kind = m.lastgroup
        if kind == "nl":
            line, line_start = line + 1, m.end()
        elif kind not in ("ws", "comment"):
            toks.append(_Tok(kind, m.group(), SourceSpan(line, col, m.end() - pos)))
        pos = m.end()
    toks.append(_Tok("eof", "", SourceSpan(line, pos - line_start + 1, 0)))
    return toks, issues


class _Syntax(Exception):
    pass


class _Parser:
    def __init__(self, toks: list[_Tok]):
        self.toks = toks
        self.i = 0
        self.issues: list[ParseIssue] = []
        self.lifelines: list[Lifeline] = []
        self.decls: dict[str, MessageDecl] = {}
        self.decl_spans: dict[str, SourceSpan] = {}

    @property
    def tok(self) -> _Tok:
        return self.toks[self.i]

    def peek(self, n: int = 1) -> _Tok:
        return self.toks[min(self.i + n, len(self.toks) - 1)]

    def fail(self, message: str, tok: Optional[_Tok] = None):
        tok = tok or self.tok
        self.issues.append(ParseIssue("syntax", message, tok.span))
        raise _Syntax

    def expect(self, kind: str, text: Optional[str] = None) -> _Tok:
        tok = self.tok
        if tok.kind != kind or (text is not None and tok.text != text):
            want = repr(text) if text else kind
            got = repr(tok.text) if tok.kind != "eof" else "end of input"
            self.fail(f"expected {want}, found {got}")
        self.i += 1
        return tok

    def at(self, text: str) -> bool:
        return self.tok.kind in ("ident", "punct", "arrow") and self.tok.text == text

    def parse(self) -> Scenario:
        self.expect("ident", "scenario")
        name = self.expect("ident").text
        ids: set[str] = set()
        while self.at("lifeline") and self.peek().kind == "ident":
            self.i += 1
            ident = self.expect("ident")
            display = None
            if self.tok.kind == "string":
                try:
                    display = json.loads(self.tok.text)
                except ValueError:
                    self.fail("invalid escape in display name")
                self.i += 1
            if ident.text in ids:
                self.issues.append(ParseIssue("duplicate-name", f"duplicate lifeline {ident.text}", ident.span))
            else:
                ids.add(ident.text)
                self.lifelines.append(Lifeline(ident.text, display))
        items = self.body(top=True)
        self.expect("eof")
        return Scenario(name, self.lifelines, tuple(self.decls.values()), Seq(items))

    def body(self, top: bool = False) -> tuple:
        items = []
        while True:
            tok = self.tok
            if tok.kind == "eof" or (tok.kind == "punct" and tok.text == "}"):
                if tok.kind == "punct" and top:
                    self.fail("unmatched '}'")
                return tuple(items)
            items.append(self.item())

    def block(self) -> tuple:
        self.expect("punct", "{")
        items = self.body()
        self.expect("punct", "}")
        return items

    def item(self):
        tok = self.tok
        if tok.kind != "ident":
            self.fail(f"unexpected {tok.text or 'end of input'!r}")
        nxt = self.peek()
        is_message = nxt.kind == "punct" and nxt.text == ":"
        if tok.text == "coord" and nxt.kind == "ident":
            self.i += 1
            return self.message(coordination=True)
        if is_message:
            return self.message(coordination=False)
        if tok.text == "alt":
            self.i += 1
            operands = [self.block()]
            while self.at("else"):
                self.i += 1
                operands.append(self.block())
            return Alt(tuple(operands))
        if tok.text == "opt":
            self.i += 1
            return Alt((self.block(), ()))
        if tok.text == "loop":
            self.i += 1
            self.expect("punct", "(")
            lo = int(self.expect("int").text)
            self.expect("punct", ",")
            hi_tok = self.expect("int")
            hi = int(hi_tok.text)
            self.expect("punct", ")")
            if lo > hi:
                self.issues.append(ParseIssue("syntax", f"loop bounds ({lo},{hi}) have min > max", hi_tok.span))
            return Loop(lo, hi, self.block())
        if tok.text in UNSUPPORTED_FRAGMENTS and nxt.kind == "punct" and nxt.text in "{(":
            self.issues.append(ParseIssue("unsupported-fragment",
                                          f"unsupported fragment {tok.text!r}; only alt, opt and loop are supported",
                                          tok.span))
            raise _Syntax
        self.fail(f"expected a message, alt, opt or loop, found {tok.text!r}")

    def message(self, coordination: bool) -> Msg:
        name_tok = self.expect("ident")
        self.expect("punct", ":")
        sender = self.expect("ident")
        self.expect("arrow")
        receiver = self.expect("ident")
        known = {l.id for l in self.lifelines}
        for ref in (sender, receiver):
            if ref.text not in known:
                self.issues.append(ParseIssue("undeclared-lifeline", f"undeclared lifeline {ref.text}", ref.span))
        name = name_tok.text
        if name in self.decls:
            self.issues.append(ParseIssue("duplicate-name", f"duplicate message {name}", name_tok.span))
        else:
            self.decls[name] = MessageDecl(name, sender.text, receiver.text, coordination)
            self.decl_spans[name] = name_tok.span
        if coordination and not COORD_NAME_RE.match(name):
            self.issues.append(ParseIssue("syntax", f"coordination message {name} must be named Ctrl<k>",
                                          name_tok.span))
        return Msg(name)


def parse_scenario(text: str) -> Scenario:
    """Parse ``.dco`` text; raises :class:`ParseError` with spans on failure."""
    toks, issues = _tokenize(text)
    if issues:
        raise ParseError(issues)
    parser = _Parser(toks)
    try:
        s = parser.parse()
    except _Syntax:
        raise ParseError(parser.issues) from None
    if parser.issues:
        raise ParseError(parser.issues)
    leftovers = []
    for d in validate_scenario(s):
        span = parser.decl_spans.get(d.element, SourceSpan(1, 1, 0))
        leftovers.append(ParseIssue(d.code, d.message, span))
    if leftovers:
        raise ParseError(leftovers)
    return s


def _render_items(items, depth: int, out: list[str], decls: dict) -> None:
    pad = "  " * depth
    for f in items:
        if isinstance(f, Msg):
            d = decls[f.name]
            prefix = "coord " if d.is_coordination else ""
            out.append(f"{pad}{prefix}{d.name}: {d.sender} -> {d.receiver}")
        elif isinstance(f, Alt):
            if len(f.operands) == 2 and not f.operands[1]:
                out.append(f"{pad}opt {{")
                _render_items(f.operands[0], depth + 1, out, decls)
            else:
                for k, op in enumerate(f.operands):
                    out.append(f"{pad}alt {{" if k == 0 else f"{pad}}} else {{")
                    _render_items(op, depth + 1, out, decls)
            out.append(f"{pad}}}")
        elif isinstance(f, Loop):
            out.append(f"{pad}loop({f.min},{f.max}) {{")
            _render_items(f.body, depth + 1, out, decls)
            out.append(f"{pad}}}")
        elif isinstance(f, Seq):
            _render_items(f.items, depth, out, decls)
        else:
            raise TypeError(f"cannot render fragment {f!r}")


def render_scenario(s: Scenario) -> str:
    out = [f"scenario {s.name}"]
    for l in s.lifelines:
        if l.display_name is None:
            out.append(f"lifeline {l.id}")
        else:
            out.append(f"lifeline {l.id} {json.dumps(l.display_name, ensure_ascii=False)}")
    _render_items(s.body.items, 0, out, {m.name: m for m in s.messages})
    return "\n".join(out) + "\n"
