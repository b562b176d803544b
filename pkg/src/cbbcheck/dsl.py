"""Text formats for formulas, programs and contexts.

Formulas::

    phi := atom | "!" phi | "X" phi | "F" phi | "G" phi
         | "K[" id "]" phi | "B[" id "]" phi
         | phi "&" phi | phi "|" phi | phi "->" phi
         | "do(" id "," id ")" ">" phi | "(" phi ")"
    atom := "true" | "false" | id | id "=" value
          | "do(" id "," id ")" | "last(" id "," id ")"

Prefix operators bind tightest, then ``&``, ``|``, ``->`` and finally the
counterfactual ``>``.  Binary operators associate to the right.

Programs (``.cbp``)::

    program Pgbt_gt cbb
    agent S
      if B[S] (do(S,skip) > F recbit) do skip else sendbit

``else`` adds a second clause guarded by the negated test.

Contexts (``.cbc``) are ``key=value`` pairs such as
``kind=gamma1 horizon=8 max_delay=5``; ``kind=random seed=3`` describes a
generated random context.  ``#`` starts a comment everywhere.
"""
from __future__ import annotations

import re
from dataclasses import dataclass, fields
from typing import Any, Iterable, Mapping, Union

from .bittrans import BitContextSpec, make_context
from .logic import (
    Always,
    And,
    Believe,
    Const,
    Counterfactual,
    DoAtom,
    Eventually,
    Formula,
    Implies,
    Know,
    Last,
    Next,
    Not,
    Or,
    Prop,
)
from .model import Context, UnknownAction as _ModelUnknownAction, random_context
from .programs import Clause, InvalidProgram, KINDS, Program

__all__ = [
    "DslError",
    "PositionedError",
    "SyntaxError",
    "UnknownAgent",
    "UnknownAction",
    "SourceText",
    "RandomContextSpec",
    "parse_formula",
    "parse_program",
    "parse_context",
    "format_formula",
    "format_program",
    "format_context",
    "to_text",
    "build_context",
    "load_program",
    "load_context",
    "RESERVED",
]


class DslError(Exception):
    """Base class of text-format errors."""


class PositionedError(DslError):
    """An error tied to a place in the input; carries the tokens that would have fit."""

    def __init__(
        self,
        message: str,
        *,
        offset: int,
        line: int,
        column: int,
        expected: Iterable[str] = (),
        origin: str = "<inline>",
    ):
        self.message = message
        self.offset = offset
        self.line = line
        self.column = column
        self.expected = frozenset(expected)
        self.origin = origin
        text = f"{origin}:{line}:{column}: {message}"
        if self.expected:
            text += " (expected " + ", ".join(sorted(self.expected)) + ")"
        super().__init__(text)


class SyntaxError(PositionedError):  # noqa: A001
    """Malformed input."""


class UnknownAgent(PositionedError):
    """An agent name that the active context does not declare."""


class UnknownAction(PositionedError, _ModelUnknownAction):
    """An action the named agent cannot perform in the active context."""


@dataclass(frozen=True)
class SourceText:
    text: str
    origin: str = "<inline>"

    @classmethod
    def from_file(cls, path: str) -> "SourceText":
        with open(path, encoding="utf-8") as fh:
            return cls(fh.read(), str(path))


Source = Union[str, SourceText]

RESERVED = frozenset(
    {"true", "false", "do", "last", "X", "F", "G", "K", "B", "if", "else", "program", "agent"}
)

# ---------------------------------------------------------------------------
# Lexer

_TOKEN = re.compile(
    r"""
    (?P<ws>[ \t\r\n]+|\#[^\n]*)
  | (?P<arrow>->)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_']*(?:-[A-Za-z_][A-Za-z0-9_']*)*)
  | (?P<number>[0-9]+)
  | (?P<string>"[^"\n]*")
  | (?P<punct>[()\[\],!&|>=:])
    """,
    re.VERBOSE,
)

_IDENT = re.compile(r"[A-Za-z_][A-Za-z0-9_']*(?:-[A-Za-z_][A-Za-z0-9_']*)*\Z")
_VALUE = re.compile(r"(?:[A-Za-z_][A-Za-z0-9_']*(?:-[A-Za-z_][A-Za-z0-9_']*)*|[0-9]+)\Z")


@dataclass(frozen=True)
class _Tok:
    kind: str  # "ident", "number", "string", "->", one punctuation char, or "eof"
    text: str
    offset: int


def _describe(tok: _Tok) -> str:
    if tok.kind == "eof":
        return "end of input"
    return repr(tok.text)


class _Parser:
    def __init__(self, src: Source, agents=None, actions=None):
        if isinstance(src, SourceText):
            self.text, self.origin = src.text, src.origin
        else:
            self.text, self.origin = src, "<inline>"
        self.agents = None if agents is None else frozenset(agents)
        self.actions = actions
        self.toks = self._lex()
        self.i = 0

    # -- positions and errors

    def _position(self, offset: int) -> tuple[int, int]:
        line = self.text.count("\n", 0, offset) + 1
        start = self.text.rfind("\n", 0, offset) + 1
        return line, offset - start + 1

    def error(
        self,
        message: str,
        tok: _Tok | None = None,
        expected: Iterable[str] = (),
        cls: type[PositionedError] = SyntaxError,
    ) -> PositionedError:
        tok = tok or self.peek()
        line, col = self._position(tok.offset)
        return cls(
            message, offset=tok.offset, line=line, column=col, expected=expected, origin=self.origin
        )

    def _lex(self) -> list[_Tok]:
        out = []
        pos = 0
        text = self.text
        while pos < len(text):
            m = _TOKEN.match(text, pos)
            if m is None:
                line, col = self._position(pos)
                raise SyntaxError(
                    f"unexpected character {text[pos]!r}",
                    offset=pos,
                    line=line,
                    column=col,
                    origin=self.origin,
                )
            kind = m.lastgroup
            if kind != "ws":
                if kind == "punct":
                    kind = m.group()
                elif kind == "arrow":
                    kind = "->"
                out.append(_Tok(kind, m.group(), pos))
            pos = m.end()
        out.append(_Tok("eof", "", len(text)))
        return out

    # -- token helpers

    def peek(self, k: int = 0) -> _Tok:
        return self.toks[min(self.i + k, len(self.toks) - 1)]

    def advance(self) -> _Tok:
        tok = self.peek()
        if tok.kind != "eof":
            self.i += 1
        return tok

    def at(self, kind: str, text: str | None = None, k: int = 0) -> bool:
        tok = self.peek(k)
        return tok.kind == kind and (text is None or tok.text == text)

    def expect(self, kind: str, what: str | None = None) -> _Tok:
        tok = self.peek()
        if tok.kind != kind:
            label = what or repr(kind)
            raise self.error(f"unexpected {_describe(tok)}", tok, {label})
        return self.advance()

    def keyword(self, word: str) -> _Tok:
        tok = self.peek()
        if tok.kind != "ident" or tok.text != word:
            raise self.error(f"unexpected {_describe(tok)}", tok, {repr(word)})
        return self.advance()

    def name(self, what: str = "identifier") -> _Tok:
        tok = self.peek()
        if tok.kind != "ident" or tok.text in RESERVED:
            raise self.error(f"unexpected {_describe(tok)}", tok, {what})
        return self.advance()

    def end(self) -> None:
        tok = self.peek()
        if tok.kind != "eof":
            raise self.error(f"unexpected {_describe(tok)}", tok, {"end of input"})

    # -- context checks

    def check_agent(self, tok: _Tok) -> str:
        if self.agents is not None and tok.text not in self.agents:
            raise self.error(f"unknown agent {tok.text!r}", tok, sorted(self.agents), UnknownAgent)
        return tok.text

    def check_action(self, agent: str, tok: _Tok) -> str:
        if self.actions is not None:
            allowed = self.actions.get(agent)
            if allowed is None or tok.text not in allowed:
                raise self.error(
                    f"{agent} has no action {tok.text!r}", tok, sorted(allowed or ()), UnknownAction
                )
        return tok.text

    # -- formulas

    _FORMULA_START = frozenset(
        {"'!'", "'('", "identifier", "'true'", "'false'", "'do'", "'last'",
         "'X'", "'F'", "'G'", "'K'", "'B'"}
    )

    def formula(self) -> Formula:
        start = self.peek()
        left = self.implication()
        if self.at(">"):
            if not isinstance(left, DoAtom):
                raise self.error(
                    "the left side of '>' must be a do(agent,action) atom", start
                )
            self.advance()
            return Counterfactual(left, self.formula())
        return left

    def implication(self) -> Formula:
        left = self.disjunction()
        if self.at("->"):
            self.advance()
            return Implies(left, self.implication())
        return left

    def disjunction(self) -> Formula:
        left = self.conjunction()
        if self.at("|"):
            self.advance()
            return Or(left, self.disjunction())
        return left

    def conjunction(self) -> Formula:
        left = self.unary()
        if self.at("&"):
            self.advance()
            return And(left, self.conjunction())
        return left

    def unary(self) -> Formula:
        tok = self.peek()
        if tok.kind == "!":
            self.advance()
            return Not(self.unary())
        if tok.kind == "ident":
            if tok.text in ("X", "F", "G"):
                self.advance()
                sub = self.unary()
                return {"X": Next, "F": Eventually, "G": Always}[tok.text](sub)
            if tok.text in ("K", "B") and self.at("[", k=1):
                self.advance()
                self.advance()
                agent = self.check_agent(self.name("agent name"))
                self.expect("]", "']'")
                sub = self.unary()
                return Know(agent, sub) if tok.text == "K" else Believe(agent, sub)
        return self.atom()

    def atom(self) -> Formula:
        tok = self.peek()
        if tok.kind == "(":
            self.advance()
            inner = self.formula()
            self.expect(")", "')'")
            return inner
        if tok.kind != "ident":
            raise self.error(f"unexpected {_describe(tok)}", tok, self._FORMULA_START)
        if tok.text in ("true", "false"):
            self.advance()
            return Const(tok.text == "true")
        if tok.text in ("do", "last"):
            self.advance()
            self.expect("(", "'('")
            agent = self.check_agent(self.name("agent name"))
            self.expect(",", "','")
            action = self.check_action(agent, self.name("action name"))
            self.expect(")", "')'")
            return DoAtom(agent, action) if tok.text == "do" else Last(agent, action)
        if tok.text in RESERVED:
            raise self.error(f"unexpected {_describe(tok)}", tok, self._FORMULA_START)
        self.advance()
        if self.at("="):
            self.advance()
            val = self.peek()
            if val.kind not in ("ident", "number"):
                raise self.error(f"unexpected {_describe(val)}", val, {"value"})
            self.advance()
            return Prop(f"{tok.text}={val.text}")
        return Prop(tok.text)

    # -- programs

    def program(self) -> Program:
        self.keyword("program")
        name_tok = self.peek()
        if name_tok.kind == "string":
            self.advance()
            name = name_tok.text[1:-1]
        else:
            name = self.name("program name").text
        kind_tok = self.peek()
        if kind_tok.kind != "ident" or kind_tok.text not in KINDS:
            raise self.error(
                f"unexpected {_describe(kind_tok)}", kind_tok, {repr(k) for k in KINDS}
            )
        self.advance()
        blocks: list[tuple[str, tuple[Clause, ...]]] = []
        while self.at("ident", "agent"):
            self.advance()
            agent = self.check_agent(self.name("agent name"))
            clauses: list[Clause] = []
            while self.at("ident", "if"):
                self.advance()
                test = self.formula()
                self.keyword("do")
                action = self.check_action(agent, self.name("action name"))
                clauses.append(Clause(test, action))
                if self.at("ident", "else"):
                    self.advance()
                    other = self.check_action(agent, self.name("action name"))
                    clauses.append(Clause(Not(test), other))
            blocks.append((agent, tuple(clauses)))
        tok = self.peek()
        if tok.kind != "eof":
            raise self.error(f"unexpected {_describe(tok)}", tok, {"'agent'", "'if'", "end of input"})
        try:
            return Program(name, kind_tok.text, tuple(blocks))
        except InvalidProgram as exc:
            raise self.error(str(exc), name_tok) from exc

    # -- contexts

    def pairs(self) -> list[tuple[_Tok, str]]:
        out = []
        while not self.at("eof"):
            key = self.name("key")
            self.expect("=", "'='")
            val = self.peek()
            if val.kind not in ("ident", "number"):
                raise self.error(f"unexpected {_describe(val)}", val, {"value"})
            self.advance()
            out.append((key, val.text))
        return out


# ---------------------------------------------------------------------------
# Public parsers


def parse_formula(
    src: Source,
    *,
    agents: Iterable[str] | None = None,
    actions: Mapping[str, Iterable[str]] | None = None,
) -> Formula:
    """Parse a formula.

    With ``agents`` (and ``actions``, a map from agent to its actions)
    names are checked against a context declaration.
    """
    p = _Parser(src, agents, actions)
    if p.at("eof"):
        raise p.error("empty formula", expected=_Parser._FORMULA_START)
    phi = p.formula()
    p.end()
    return phi


def parse_program(src: Source, ctx: Context | None = None) -> Program:
    """Parse a program; with ``ctx`` agent and action names are checked."""
    agents = actions = None
    if ctx is not None:
        agents = ctx.agents
        actions = {a: frozenset(s) for a, s in ctx.action_sets.items()}
    return _Parser(src, agents, actions).program()


@dataclass(frozen=True)
class RandomContextSpec:
    """A generated random context (see :func:`cbbcheck.model.random_context`)."""

    seed: int = 0
    max_agents: int = 3
    max_actions: int = 3
    max_horizon: int = 4
    max_runs: int = 2000

    def build(self) -> Context:
        return random_context(
            self.seed,
            max_agents=self.max_agents,
            max_actions=self.max_actions,
            max_horizon=self.max_horizon,
            max_runs=self.max_runs,
        )


_INT_KEYS = {
    "horizon", "max_delay", "slack", "fairness",
    "seed", "max_agents", "max_actions", "max_horizon", "max_runs",
}


def parse_context(src: Source) -> BitContextSpec | RandomContextSpec:
    """Parse ``key=value`` pairs into a context description."""
    p = _Parser(src)
    pairs = p.pairs()
    values: dict[str, Any] = {}
    for key, raw in pairs:
        if key.text in values:
            raise p.error(f"duplicate key {key.text!r}", key)
        if key.text in _INT_KEYS:
            if not raw.isdigit():
                raise p.error(f"{key.text} needs an integer", key, {"integer"})
            values[key.text] = int(raw)
        else:
            values[key.text] = raw
    kind = values.pop("kind", "gamma1")
    target = RandomContextSpec if kind == "random" else BitContextSpec
    allowed = {f.name for f in fields(target)} - {"kind"}
    for key, _ in pairs:
        if key.text != "kind" and key.text not in allowed:
            raise p.error(f"unknown key {key.text!r} for kind {kind}", key, set(allowed) | {"kind"})
    if target is RandomContextSpec:
        return RandomContextSpec(**values)
    spec = BitContextSpec(kind=kind, **values)
    spec.validate()
    return spec


def build_context(spec: BitContextSpec | RandomContextSpec) -> Context:
    if isinstance(spec, RandomContextSpec):
        return spec.build()
    return make_context(spec)


def load_program(path: str, ctx: Context | None = None) -> Program:
    return parse_program(SourceText.from_file(path), ctx)


def load_context(path: str) -> BitContextSpec | RandomContextSpec:
    return parse_context(SourceText.from_file(path))


# ---------------------------------------------------------------------------
# Printing

_PREC_CF, _PREC_IMP, _PREC_OR, _PREC_AND, _PREC_UNARY, _PREC_ATOM = range(6)


def _check_name(text: str, what: str) -> str:
    if not _IDENT.match(text) or text in RESERVED:
        raise DslError(f"{what} {text!r} cannot be written in the surface syntax")
    return text


def _prop_text(name: str) -> str:
    key, eq, value = name.partition("=")
    _check_name(key, "proposition")
    if eq:
        if not _VALUE.match(value):
            raise DslError(f"proposition {name!r} cannot be written in the surface syntax")
        return f"{key}={value}"
    return key


def _fmt(phi: Formula) -> tuple[str, int]:
    if isinstance(phi, Const):
        return ("true" if phi.value else "false"), _PREC_ATOM
    if isinstance(phi, Prop):
        return _prop_text(phi.name), _PREC_ATOM
    if isinstance(phi, (DoAtom, Last)):
        word = "do" if isinstance(phi, DoAtom) else "last"
        return (
            f"{word}({_check_name(phi.agent, 'agent')},{_check_name(phi.action, 'action')})",
            _PREC_ATOM,
        )
    if isinstance(phi, Not):
        return "!" + _wrap(phi.sub, _PREC_UNARY), _PREC_UNARY
    if isinstance(phi, (Next, Eventually, Always)):
        op = {Next: "X", Eventually: "F", Always: "G"}[type(phi)]
        return f"{op} {_wrap(phi.sub, _PREC_UNARY)}", _PREC_UNARY
    if isinstance(phi, (Know, Believe)):
        op = "K" if isinstance(phi, Know) else "B"
        return f"{op}[{_check_name(phi.agent, 'agent')}] {_wrap(phi.sub, _PREC_UNARY)}", _PREC_UNARY
    if isinstance(phi, (And, Or, Implies)):
        op, prec = {And: ("&", _PREC_AND), Or: ("|", _PREC_OR), Implies: ("->", _PREC_IMP)}[
            type(phi)
        ]
        return f"{_wrap(phi.left, prec + 1)} {op} {_wrap(phi.right, prec)}", prec
    if isinstance(phi, Counterfactual):
        if not isinstance(phi.antecedent, DoAtom):
            raise DslError("only do(agent,action) antecedents can be written")
        ante, _ = _fmt(phi.antecedent)
        return f"{ante} > {_wrap(phi.consequent, _PREC_CF)}", _PREC_CF
    raise DslError(f"cannot print {phi!r}")


def _wrap(phi: Formula, need: int) -> str:
    text, prec = _fmt(phi)
    return text if prec >= need else f"({text})"


def format_formula(phi: Formula) -> str:
    """Canonical one-line text with as few parentheses as the grammar allows."""
    return _fmt(phi)[0]


def _program_name(name: str) -> str:
    if _IDENT.match(name) and name not in RESERVED:
        return name
    if '"' in name or "\n" in name:
        raise DslError(f"program name {name!r} cannot be written in the surface syntax")
    return f'"{name}"'


def format_program(program: Program) -> str:
    lines = [f"program {_program_name(program.name)} {program.kind}"]
    for agent, clauses in program.clauses:
        lines.append(f"agent {_check_name(agent, 'agent')}")
        i = 0
        while i < len(clauses):
            c = clauses[i]
            line = f"  if {format_formula(c.test)} do {_check_name(c.action, 'action')}"
            nxt = clauses[i + 1] if i + 1 < len(clauses) else None
            if nxt is not None and nxt.test == Not(c.test):
                line += f" else {_check_name(nxt.action, 'action')}"
                i += 1
            lines.append(line)
            i += 1
    return "\n".join(lines) + "\n"


def format_context(spec: BitContextSpec | RandomContextSpec) -> str:
    if isinstance(spec, RandomContextSpec):
        parts = ["kind=random"] + [f"{f.name}={getattr(spec, f.name)}" for f in fields(spec)]
        return " ".join(parts) + "\n"
    parts = [f"kind={spec.kind}", f"horizon={spec.horizon}"]
    if spec.kind == "gamma1":
        parts.append(f"max_delay={spec.max_delay}")
    else:
        parts.append(f"slack={spec.slack}")
    if spec.kind == "gamma3":
        parts.append(f"fairness={spec.fairness}")
    if spec.delivery != "batch":
        parts.append(f"delivery={spec.delivery}")
    return " ".join(parts) + "\n"


def to_text(obj: Formula | Program | BitContextSpec | RandomContextSpec) -> str:
    """Canonical text of a formula, program or context description."""
    if isinstance(obj, Formula):
        return format_formula(obj)
    if isinstance(obj, Program):
        return format_program(obj)
    if isinstance(obj, (BitContextSpec, RandomContextSpec)):
        return format_context(obj)
    raise DslError(f"cannot print {type(obj).__name__}")


print = to_text  # noqa: A001
