"""Text format for programs and queries, plus bulk fact loading.

Surface syntax::

    % a comment runs to the end of the line
    r(a,b).                                   % fact
    r(X,Y) -> exists Z. r(Y,Z).               % existential rule
    r(X,Y), r(Y,Z) -> s(X,Y,Z).               % plain rule

Constants start lowercase or are double-quoted; variables start
uppercase.  A rule head may list several atoms; such rules are
normalized at load time: head atoms that share no existential variable
are split into one rule each, and heads whose existential variables
span several atoms are routed through a fresh auxiliary predicate plus
projection rules.

Queries use the form ``?(X,Y) <- p(X,Z), q(Z,Y).``; a Boolean query has
an empty variable list.
"""

from __future__ import annotations

import csv
import re
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Set, Tuple

from .model import (
    Atom,
    Const,
    ConjunctiveQuery,
    Program,
    Rule,
    Term,
    Var,
    make_program,
)


@dataclass(frozen=True)
class SourceSpan:
    line: int
    column: int
    length: int


@dataclass(frozen=True)
class Diagnostic:
    message: str
    span: SourceSpan

    def __str__(self) -> str:
        return f"{self.span.line}:{self.span.column}: {self.message}"


class ParseError(Exception):
    def __init__(self, diagnostics: Sequence[Diagnostic]):
        self.diagnostics = list(diagnostics)
        super().__init__("; ".join(str(d) for d in diagnostics))


class AnswerVarNotInBody(ParseError):
    pass


class RowArityMismatch(Exception):
    def __init__(self, line: int, expected: int, got: int):
        self.line = line
        self.expected = expected
        self.got = got
        super().__init__(f"line {line}: expected {expected} fields, got {got}")


class IoFailure(Exception):
    pass


# ---------------------------------------------------------------------------
# Tokenizer
# ---------------------------------------------------------------------------

_NAME = "name"       # lowercase identifier or quoted constant
_VAR = "variable"
_PUNCT = "punct"     # ( ) , . -> <- ?
_EOF = "eof"

_IDENT_RE = re.compile(r"[A-Za-z][A-Za-z0-9_]*")


@dataclass(frozen=True)
class _Token:
    kind: str
    value: str
    span: SourceSpan
    quoted: bool = False


def _tokenize(text: str) -> List[_Token]:
    tokens: List[_Token] = []
    diags: List[Diagnostic] = []
    line, col, i = 1, 1, 0
    n = len(text)

    def span(length: int) -> SourceSpan:
        return SourceSpan(line, col, length)

    while i < n:
        ch = text[i]
        if ch == "\n":
            i += 1
            line += 1
            col = 1
            continue
        if ch in " \t\r":
            i += 1
            col += 1
            continue
        if ch == "%":
            while i < n and text[i] != "\n":
                i += 1
            continue
        if text.startswith("->", i):
            tokens.append(_Token(_PUNCT, "->", span(2)))
            i += 2
            col += 2
            continue
        if text.startswith("<-", i):
            tokens.append(_Token(_PUNCT, "<-", span(2)))
            i += 2
            col += 2
            continue
        if ch in "(),.?":
            tokens.append(_Token(_PUNCT, ch, span(1)))
            i += 1
            col += 1
            continue
        if ch == '"':
            j = i + 1
            buf = []
            closed = False
            while j < n:
                if text[j] == "\\" and j + 1 < n:
                    buf.append(text[j + 1])
                    j += 2
                    continue
                if text[j] == '"':
                    closed = True
                    break
                if text[j] == "\n":
                    break
                buf.append(text[j])
                j += 1
            if not closed:
                diags.append(Diagnostic("unterminated quoted constant", span(j - i)))
                raise ParseError(diags)
            length = j + 1 - i
            tokens.append(_Token(_NAME, "".join(buf), span(length), quoted=True))
            i = j + 1
            col += length
            continue
        m = _IDENT_RE.match(text, i)
        if m:
            word = m.group(0)
            kind = _VAR if word[0].isupper() else _NAME
            tokens.append(_Token(kind, word, span(len(word))))
            i += len(word)
            col += len(word)
            continue
        diags.append(Diagnostic(f"unexpected character {ch!r}", span(1)))
        raise ParseError(diags)

    tokens.append(_Token(_EOF, "", SourceSpan(line, col, 0)))
    return tokens


# ---------------------------------------------------------------------------
# Recursive-descent parser
# ---------------------------------------------------------------------------

class _Parser:
    def __init__(self, text: str):
        self.tokens = _tokenize(text)
        self.pos = 0

    def peek(self) -> _Token:
        return self.tokens[self.pos]

    def take(self) -> _Token:
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def expect(self, value: str) -> _Token:
        tok = self.peek()
        if tok.kind == _PUNCT and tok.value == value:
            return self.take()
        self.fail(f"expected {value!r}", tok)

    def fail(self, message: str, tok: Optional[_Token] = None) -> None:
        tok = tok or self.peek()
        shown = tok.value if tok.kind != _EOF else "end of input"
        raise ParseError([Diagnostic(f"{message}, found {shown!r}", tok.span)])

    def at_punct(self, value: str) -> bool:
        tok = self.peek()
        return tok.kind == _PUNCT and tok.value == value

    def parse_atom(self) -> Tuple[Atom, SourceSpan]:
        tok = self.peek()
        if tok.kind != _NAME:
            self.fail("expected a predicate name", tok)
        name = self.take()
        args: List[Term] = []
        if self.at_punct("("):
            self.take()
            if not self.at_punct(")"):
                while True:
                    args.append(self.parse_term())
                    if self.at_punct(","):
                        self.take()
                        continue
                    break
            self.expect(")")
        return Atom(name.value, tuple(args)), name.span

    def parse_term(self) -> Term:
        tok = self.peek()
        if tok.kind == _NAME:
            return Const(self.take().value)
        if tok.kind == _VAR:
            return Var(self.take().value)
        self.fail("expected a constant or variable", tok)

    def parse_atom_list(self) -> List[Tuple[Atom, SourceSpan]]:
        atoms = [self.parse_atom()]
        while self.at_punct(","):
            self.take()
            atoms.append(self.parse_atom())
        return atoms


@dataclass
class _RawRule:
    body: List[Tuple[Atom, SourceSpan]]
    exists_vars: List[str]
    head: List[Tuple[Atom, SourceSpan]]
    span: SourceSpan


def _parse_statements(text: str) -> Tuple[List[Tuple[Atom, SourceSpan]], List[_RawRule]]:
    p = _Parser(text)
    facts: List[Tuple[Atom, SourceSpan]] = []
    rules: List[_RawRule] = []
    while p.peek().kind != _EOF:
        start = p.peek().span
        atoms = p.parse_atom_list()
        if p.at_punct("->"):
            p.take()
            exists_vars: List[str] = []
            tok = p.peek()
            if tok.kind == _NAME and not tok.quoted and tok.value == "exists":
                p.take()
                while True:
                    vt = p.peek()
                    if vt.kind != _VAR:
                        p.fail("expected a variable after 'exists'", vt)
                    exists_vars.append(p.take().value)
                    if p.at_punct(","):
                        p.take()
                        continue
                    break
                p.expect(".")
            head = p.parse_atom_list()
            p.expect(".")
            rules.append(_RawRule(atoms, exists_vars, head, start))
        else:
            p.expect(".")
            if len(atoms) != 1:
                raise ParseError(
                    [Diagnostic("a fact must be a single atom", start)]
                )
            facts.append(atoms[0])
    return facts, rules


def _normalize_rules(
    raw_rules: List[_RawRule], taken_predicates: Set[str]
) -> Tuple[List[Tuple[Rule, SourceSpan]], List[Diagnostic]]:
    """Turn raw (possibly multi-head) rules into single-head rules."""
    diags: List[Diagnostic] = []
    rules: List[Tuple[Rule, SourceSpan]] = []
    next_id = 1

    def fresh_predicate(base: str) -> str:
        name = base
        k = 0
        while name in taken_predicates:
            k += 1
            name = f"{base}_{k}"
        taken_predicates.add(name)
        return name

    for raw in raw_rules:
        body = tuple(a for a, _ in raw.body)
        body_vars = set()
        for a in body:
            body_vars.update(a.variables())
        declared = list(raw.exists_vars)
        for v in declared:
            if v in body_vars:
                diags.append(
                    Diagnostic(
                        f"existential variable {v!r} also occurs in the rule body",
                        raw.span,
                    )
                )

        head_atoms = [a for a, _ in raw.head]
        source_id = next_id

        if len(head_atoms) == 1:
            rules.append(
                (
                    Rule(
                        id=next_id,
                        body=body,
                        head=head_atoms[0],
                        existential_vars=frozenset(declared),
                    ),
                    raw.span,
                )
            )
            next_id += 1
            continue

        # Which existential variables are shared by several head atoms?
        shared = False
        for v in declared:
            hits = sum(1 for a in head_atoms if v in a.variables())
            if hits > 1:
                shared = True
                break

        if not shared:
            for a in head_atoms:
                local_exists = frozenset(v for v in declared if v in a.variables())
                rules.append(
                    (
                        Rule(
                            id=next_id,
                            body=body,
                            head=a,
                            existential_vars=local_exists,
                            note=f"from rule {source_id}",
                        ),
                        raw.span,
                    )
                )
                next_id += 1
            continue

        # Shared existential variables: route through one auxiliary atom.
        head_vars: List[str] = []
        for a in head_atoms:
            for v in a.variables():
                if v not in head_vars:
                    head_vars.append(v)
        aux = fresh_predicate(f"head{source_id}_aux")
        aux_atom = Atom(aux, tuple(Var(v) for v in head_vars))
        rules.append(
            (
                Rule(
                    id=next_id,
                    body=body,
                    head=aux_atom,
                    existential_vars=frozenset(declared),
                    note=f"from rule {source_id}",
                ),
                raw.span,
            )
        )
        next_id += 1
        for a in head_atoms:
            rules.append(
                (
                    Rule(
                        id=next_id,
                        body=(aux_atom,),
                        head=a,
                        existential_vars=frozenset(),
                        note=f"from rule {source_id}",
                    ),
                    raw.span,
                )
            )
            next_id += 1

    return rules, diags


def parse_program(text: str) -> Program:
    """Parse program text; raises ParseError carrying diagnostics."""
    facts_spanned, raw_rules = _parse_statements(text)
    diags: List[Diagnostic] = []

    taken: Set[str] = set()
    for a, _ in facts_spanned:
        taken.add(a.predicate)
    for raw in raw_rules:
        for a, _ in raw.body:
            taken.add(a.predicate)
        for a, _ in raw.head:
            taken.add(a.predicate)

    spanned_rules, norm_diags = _normalize_rules(raw_rules, taken)
    rules = [r for r, _ in spanned_rules]
    diags.extend(norm_diags)

    # Arity and groundness checks with source positions.
    arities: Dict[str, Tuple[int, SourceSpan]] = {}

    def check(atom: Atom, span: SourceSpan) -> None:
        seen = arities.get(atom.predicate)
        if seen is None:
            arities[atom.predicate] = (len(atom.args), span)
        elif seen[0] != len(atom.args):
            diags.append(
                Diagnostic(
                    f"predicate {atom.predicate!r} used with arity {len(atom.args)}"
                    f" but previously with {seen[0]}",
                    span,
                )
            )

    for atom, span in facts_spanned:
        check(atom, span)
        if atom.variables():
            diags.append(Diagnostic("a fact must not contain variables", span))
    for raw in raw_rules:
        for atom, span in raw.body:
            check(atom, span)
        for atom, span in raw.head:
            check(atom, span)

    for rule, span in spanned_rules:
        body_vars = set(rule.body_variables())
        for name in rule.head_variables():
            if name not in body_vars and name not in rule.existential_vars:
                diags.append(
                    Diagnostic(
                        f"head variable {name!r} is neither a body variable nor "
                        "declared existential",
                        span,
                    )
                )

    if diags:
        raise ParseError(diags)
    return make_program(rules, [a for a, _ in facts_spanned])


def parse_query(text: str) -> ConjunctiveQuery:
    """Parse ``?(X,...) <- body.``; Boolean queries use ``?()``."""
    p = _Parser(text)
    p.expect("?")
    p.expect("(")
    answer_vars: List[str] = []
    if not p.at_punct(")"):
        while True:
            tok = p.peek()
            if tok.kind != _VAR:
                p.fail("expected an answer variable", tok)
            answer_vars.append(p.take().value)
            if p.at_punct(","):
                p.take()
                continue
            break
    p.expect(")")
    p.expect("<-")
    body = p.parse_atom_list()
    p.expect(".")
    if p.peek().kind != _EOF:
        p.fail("trailing input after query")

    body_atoms = tuple(a for a, _ in body)
    body_vars = set()
    for a in body_atoms:
        body_vars.update(a.variables())
    for v in answer_vars:
        if v not in body_vars:
            raise AnswerVarNotInBody(
                [
                    Diagnostic(
                        f"answer variable {v!r} does not occur in the query body",
                        body[0][1],
                    )
                ]
            )
    return ConjunctiveQuery(name="q", answer_vars=tuple(answer_vars), body=body_atoms)


# ---------------------------------------------------------------------------
# Rendering
# ---------------------------------------------------------------------------

_PLAIN_CONST = re.compile(r"^[a-z][A-Za-z0-9_]*$")
_PLAIN_VAR = re.compile(r"^[A-Z][A-Za-z0-9_]*$")


def _render_const(name: str) -> str:
    if _PLAIN_CONST.match(name) and name != "exists":
        return name
    escaped = name.replace("\\", "\\\\").replace('"', '\\"')
    return f'"{escaped}"'


def _render_atom(atom: Atom, var_names: Dict[str, str]) -> str:
    if not atom.args:
        return atom.predicate
    parts = []
    for t in atom.args:
        if isinstance(t, Const):
            parts.append(_render_const(t.name))
        elif isinstance(t, Var):
            parts.append(var_names.get(t.name, t.name))
        else:
            raise ValueError(f"cannot render null {t} in program text")
    return f"{atom.predicate}({','.join(parts)})"


def _rule_var_names(rule: Rule) -> Dict[str, str]:
    """Sanitize variable names so the output re-parses; renaming is
    consistent within one rule."""
    names: Dict[str, str] = {}
    used: Set[str] = set()
    order: List[str] = []
    for atom in rule.body + (rule.head,):
        for v in atom.variables():
            if v not in order:
                order.append(v)
    for v in order:
        if _PLAIN_VAR.match(v) and v not in used:
            names[v] = v
            used.add(v)
        else:
            k = 0
            while f"V{k}" in used:
                k += 1
            names[v] = f"V{k}"
            used.add(f"V{k}")
    return names


def render_rule(rule: Rule) -> str:
    names = _rule_var_names(rule)
    body = ", ".join(_render_atom(a, names) for a in rule.body)
    exists = ""
    if rule.existential_vars:
        order = [v for v in rule.head_variables() if v in rule.existential_vars]
        exists = "exists " + ", ".join(names.get(v, v) for v in order) + ". "
    return f"{body} -> {exists}{_render_atom(rule.head, names)}."


def render_query(query: ConjunctiveQuery) -> str:
    head = ",".join(query.answer_vars)
    body = ", ".join(_render_atom(a, {}) for a in query.body)
    return f"?({head}) <- {body}."


def render_program(program: Program) -> str:
    lines: List[str] = []
    for fact in program.facts:
        lines.append(_render_atom(fact, {}) + ".")
    for rule in program.rules:
        if rule.note:
            lines.append(f"% {rule.note}")
        lines.append(render_rule(rule))
    return "\n".join(lines) + ("\n" if lines else "")


# ---------------------------------------------------------------------------
# Delimited fact files
# ---------------------------------------------------------------------------

def load_facts_delimited(
    path: str, predicate: str, arity: int, delimiter: str = ","
) -> Set[Atom]:
    """Read one atom per row from a delimited file; every field is a
    constant.  Quoted fields may contain the delimiter."""
    facts: Set[Atom] = set()
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            reader = csv.reader(fh, delimiter=delimiter, quotechar='"')
            for line_no, row in enumerate(reader, start=1):
                if not row:
                    continue
                if len(row) != arity:
                    raise RowArityMismatch(line_no, arity, len(row))
                facts.add(Atom(predicate, tuple(Const(f) for f in row)))
    except OSError as exc:
        raise IoFailure(str(exc)) from exc
    return facts
