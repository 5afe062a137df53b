"""Core data model for existential-rule programs.

Terms, atoms, rules, programs, queries, and instances, plus the primitive
matching operations (assignment application, homomorphism search, atom
isomorphism) that the chase, the classifier, and the query engines share.

All types are immutable values after construction except ``Instance``,
which is single-writer: one thread may add atoms while others only read
fully-built instances.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, Iterable, Iterator, List, Optional, Sequence, Set, Tuple, Union


class ModelError(Exception):
    """Base class for model-level validation failures."""


class ArityConflict(ModelError):
    def __init__(self, predicate: str, seen: int, conflicting: int):
        self.predicate = predicate
        self.seen = seen
        self.conflicting = conflicting
        super().__init__(
            f"predicate {predicate!r} used with arity {conflicting} but declared with {seen}"
        )


class NonGroundFact(ModelError):
    def __init__(self, atom: "Atom"):
        self.atom = atom
        super().__init__(f"fact {atom} contains a variable or null")


class UnsafeHeadVariable(ModelError):
    def __init__(self, rule_id: int, variable: str):
        self.rule_id = rule_id
        self.variable = variable
        super().__init__(
            f"rule {rule_id}: head variable {variable!r} is neither a body variable "
            "nor declared existential"
        )


class UnboundVariable(ModelError):
    def __init__(self, variable: str):
        self.variable = variable
        super().__init__(f"assignment does not bind variable {variable!r}")


class ProgramValidationError(ModelError):
    """Aggregates every validation failure found while building a program."""

    def __init__(self, errors: Sequence[ModelError]):
        self.errors = list(errors)
        super().__init__("; ".join(str(e) for e in errors))


# ---------------------------------------------------------------------------
# Terms
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Const:
    name: str


@dataclass(frozen=True)
class Null:
    """A labeled null.  Identity is the id alone; the frozen flag marks a
    null that has been promoted to constant-like status and is excluded
    from renamings when comparing atoms."""

    id: int
    frozen: bool = field(default=False, compare=False)


@dataclass(frozen=True)
class Var:
    name: str


Term = Union[Const, Null, Var]


def const(name: str) -> Const:
    return Const(name)


def var(name: str) -> Var:
    return Var(name)


class NullFactory:
    """Monotone per-run counter for fresh null ids."""

    def __init__(self, start: int = 1):
        self._next = start

    def fresh(self) -> Null:
        n = Null(self._next)
        self._next += 1
        return n

    @property
    def next_id(self) -> int:
        return self._next


# ---------------------------------------------------------------------------
# Atoms and positions
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Atom:
    predicate: str
    args: Tuple[Term, ...] = ()

    def variables(self) -> List[str]:
        return [t.name for t in self.args if isinstance(t, Var)]

    def is_ground(self) -> bool:
        return not any(isinstance(t, Var) for t in self.args)

    def has_null(self) -> bool:
        return any(isinstance(t, Null) for t in self.args)

    def __str__(self) -> str:  # debugging aid; canonical text lives in parsing
        if not self.args:
            return self.predicate
        return f"{self.predicate}({', '.join(map(_term_str, self.args))})"


def _term_str(t: Term) -> str:
    if isinstance(t, Const):
        return t.name
    if isinstance(t, Null):
        return f"ζ{t.id}"
    return t.name


@dataclass(frozen=True, order=True)
class Position:
    """One argument slot of a predicate; indexes are 1-based."""

    predicate: str
    index: int

    def __str__(self) -> str:
        return f"{self.predicate}[{self.index}]"


def atom_positions(atom: Atom) -> List[Position]:
    return [Position(atom.predicate, i + 1) for i in range(len(atom.args))]


# ---------------------------------------------------------------------------
# Rules, queries, programs
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Rule:
    """A single-head existential rule.

    ``existential_vars`` lists the head variables that are existentially
    quantified; every other head variable must occur in the body.
    """

    id: int
    body: Tuple[Atom, ...]
    head: Atom
    existential_vars: frozenset = frozenset()
    note: Optional[str] = field(default=None, compare=False)

    def body_variables(self) -> List[str]:
        seen: List[str] = []
        for atom in self.body:
            for name in atom.variables():
                if name not in seen:
                    seen.append(name)
        return seen

    def head_variables(self) -> List[str]:
        seen: List[str] = []
        for name in self.head.variables():
            if name not in seen:
                seen.append(name)
        return seen

    def body_positions_of(self, variable: str) -> List[Position]:
        out = []
        for atom in self.body:
            for i, t in enumerate(atom.args):
                if isinstance(t, Var) and t.name == variable:
                    out.append(Position(atom.predicate, i + 1))
        return out

    def head_positions_of(self, variable: str) -> List[Position]:
        return [
            Position(self.head.predicate, i + 1)
            for i, t in enumerate(self.head.args)
            if isinstance(t, Var) and t.name == variable
        ]

    def body_occurrence_count(self, variable: str) -> int:
        return sum(
            1
            for atom in self.body
            for t in atom.args
            if isinstance(t, Var) and t.name == variable
        )


@dataclass(frozen=True)
class ConjunctiveQuery:
    name: str
    answer_vars: Tuple[str, ...]
    body: Tuple[Atom, ...]

    @property
    def is_boolean(self) -> bool:
        return not self.answer_vars

    def variables(self) -> List[str]:
        seen: List[str] = []
        for atom in self.body:
            for name in atom.variables():
                if name not in seen:
                    seen.append(name)
        return seen


def _fact_sort_key(atom: Atom) -> Tuple:
    return (atom.predicate, tuple(_term_str(t) for t in atom.args))


@dataclass(frozen=True)
class Program:
    rules: Tuple[Rule, ...]
    facts: Tuple[Atom, ...]
    schema: Tuple[Tuple[str, int], ...]

    def arity(self, predicate: str) -> int:
        return dict(self.schema)[predicate]

    def predicates(self) -> List[str]:
        return [p for p, _ in self.schema]

    def facts_for(self, predicate: str) -> List[Atom]:
        return [f for f in self.facts if f.predicate == predicate]

    def rule_by_id(self, rule_id: int) -> Rule:
        for r in self.rules:
            if r.id == rule_id:
                return r
        raise KeyError(rule_id)


def make_program(rules: Iterable[Rule], facts: Iterable[Atom]) -> Program:
    """Validate rules and facts and infer the schema.

    Raises ``ProgramValidationError`` collecting every arity conflict,
    non-ground fact, and unsafe head variable found.
    """
    rules = tuple(rules)
    errors: List[ModelError] = []
    schema: Dict[str, int] = {}

    def record(atom: Atom) -> None:
        arity = len(atom.args)
        seen = schema.get(atom.predicate)
        if seen is None:
            schema[atom.predicate] = arity
        elif seen != arity:
            errors.append(ArityConflict(atom.predicate, seen, arity))

    dedup: Dict[Atom, None] = {}
    for fact in facts:
        record(fact)
        if not fact.is_ground() or fact.has_null():
            errors.append(NonGroundFact(fact))
        dedup[fact] = None

    for rule in rules:
        for atom in rule.body:
            record(atom)
        record(rule.head)
        body_vars = set(rule.body_variables())
        for name in rule.head_variables():
            if name not in body_vars and name not in rule.existential_vars:
                errors.append(UnsafeHeadVariable(rule.id, name))

    if errors:
        raise ProgramValidationError(errors)

    canonical_facts = tuple(sorted(dedup, key=_fact_sort_key))
    return Program(rules=rules, facts=canonical_facts, schema=tuple(schema.items()))


# ---------------------------------------------------------------------------
# Instances
# ---------------------------------------------------------------------------

class Instance:
    """A deduplicated set of ground atoms with a per-predicate index.

    Atoms iterate in insertion order, which keeps every downstream
    procedure deterministic.
    """

    def __init__(self, atoms: Iterable[Atom] = ()):
        self._atoms: Dict[Atom, int] = {}
        self._by_pred: Dict[str, List[Atom]] = {}
        for atom in atoms:
            self.add(atom)

    def add(self, atom: Atom) -> bool:
        """Insert ``atom``; returns False if it was already present."""
        if atom in self._atoms:
            return False
        self._atoms[atom] = len(self._atoms)
        self._by_pred.setdefault(atom.predicate, []).append(atom)
        return True

    def __contains__(self, atom: Atom) -> bool:
        return atom in self._atoms

    def __len__(self) -> int:
        return len(self._atoms)

    def __iter__(self) -> Iterator[Atom]:
        return iter(self._atoms)

    def atoms(self) -> List[Atom]:
        return list(self._atoms)

    def by_predicate(self, predicate: str) -> Sequence[Atom]:
        return self._by_pred.get(predicate, ())

    def null_ids(self) -> List[int]:
        """Distinct null ids, in first-appearance order."""
        seen: Dict[int, None] = {}
        for atom in self._atoms:
            for t in atom.args:
                if isinstance(t, Null):
                    seen.setdefault(t.id, None)
        return list(seen)


# ---------------------------------------------------------------------------
# Assignments and matching
# ---------------------------------------------------------------------------

Assignment = Dict[str, Term]


def apply_assignment(atom: Atom, assignment: Assignment) -> Atom:
    """Replace every variable in ``atom`` by its image; constants and
    nulls pass through unchanged."""
    args: List[Term] = []
    for t in atom.args:
        if isinstance(t, Var):
            try:
                args.append(assignment[t.name])
            except KeyError:
                raise UnboundVariable(t.name) from None
        else:
            args.append(t)
    return Atom(atom.predicate, tuple(args))


def find_homomorphisms(
    conjunction: Sequence[Atom],
    instance: Instance,
    partial: Optional[Assignment] = None,
) -> Iterator[Assignment]:
    """Enumerate every assignment mapping the conjunction into the instance.

    Constants and nulls must match literally; variables bind consistently
    across conjuncts.  Conjuncts are processed left to right and candidate
    atoms are tried in instance insertion order, so enumeration is
    deterministic.
    """
    binding: Assignment = dict(partial) if partial else {}

    def extend(index: int) -> Iterator[Assignment]:
        if index == len(conjunction):
            yield dict(binding)
            return
        pattern = conjunction[index]
        for cand in instance.by_predicate(pattern.predicate):
            if len(cand.args) != len(pattern.args):
                continue
            touched: List[str] = []
            ok = True
            for p, c in zip(pattern.args, cand.args):
                if isinstance(p, Var):
                    bound = binding.get(p.name)
                    if bound is None:
                        binding[p.name] = c
                        touched.append(p.name)
                    elif bound != c:
                        ok = False
                        break
                elif p != c:
                    ok = False
                    break
            if ok:
                yield from extend(index + 1)
            for name in touched:
                del binding[name]

    return extend(0)


def atoms_isomorphic(a: Atom, b: Atom, frozen_aware: bool = True) -> bool:
    """Decide whether two ground atoms are equal up to a renaming of nulls.

    The renaming must be a bijection on null ids and the identity on
    constants.  With ``frozen_aware`` set, frozen nulls behave like
    constants: they only match the very same null.  The relation is an
    equivalence for any fixed set of frozen ids.
    """
    if a.predicate != b.predicate or len(a.args) != len(b.args):
        return False
    fwd: Dict[int, int] = {}
    bwd: Dict[int, int] = {}
    for x, y in zip(a.args, b.args):
        if isinstance(x, Const):
            if x != y:
                return False
        elif isinstance(x, Null):
            if not isinstance(y, Null):
                return False
            if frozen_aware and (x.frozen or y.frozen):
                if x.id != y.id or x.frozen != y.frozen:
                    return False
                continue
            if fwd.setdefault(x.id, y.id) != y.id:
                return False
            if bwd.setdefault(y.id, x.id) != x.id:
                return False
        else:
            raise ModelError(f"atom {a} is not ground")
    return True
