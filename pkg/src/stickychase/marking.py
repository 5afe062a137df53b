"""Body-variable marking and the syntactic program classes.

The marking procedure runs in two stages.  The preliminary stage marks
every body occurrence of a variable that the rule head drops.  The
propagation stage is a least fixpoint: whenever a marked body occurrence
sits at position pi, every rule whose head carries a body variable at pi
gets that variable marked in all of its body occurrences.  The fixpoint
is unique, so the worklist order does not matter.

On top of the marking sit the class tests:

* sticky: no marked variable occurs twice in one body;
* weakly sticky: a marked repeated variable must touch a finite-rank
  position;
* jointly weakly sticky (jws): same, with finite-existential positions.

Selection functions map a rule set to a set of positions guaranteed to
host finitely many values: the empty set, the finite-rank positions, or
the finite-existential positions.  A selection returning every finite
position of a concrete program exists in principle but is not
computable, so it is not provided.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Dict, FrozenSet, List, Sequence, Set, Tuple

from .graphs import (
    all_positions,
    build_dependency_graph,
    finite_existential_positions,
    finite_rank_positions,
)
from .model import Position, Program, Rule, Var


class UnknownSelection(Exception):
    pass


class SelectionFunctionId(enum.Enum):
    BOTTOM = "bottom"
    RANK = "rank"
    EXISTENTIAL = "existential"


@dataclass(frozen=True)
class MarkingResult:
    """Marked body occurrences as (rule id, body atom index, argument
    index), both 1-based, plus the per-variable summary."""

    occurrences: FrozenSet[Tuple[int, int, int]]
    variables: FrozenSet[Tuple[int, str]]

    def is_marked(self, rule_id: int, variable: str) -> bool:
        return (rule_id, variable) in self.variables


def mark_variables(rules: Sequence[Rule]) -> MarkingResult:
    marked: Set[Tuple[int, str]] = set()

    # Preliminary: body variables missing from the head.
    for rule in rules:
        head_vars = set(rule.head_variables())
        for v in rule.body_variables():
            if v not in head_vars:
                marked.add((rule.id, v))

    # Propagation to fixpoint over marked positions.
    worklist: List[Tuple[int, str]] = sorted(marked)
    while worklist:
        rule_id, v = worklist.pop()
        rule = next(r for r in rules if r.id == rule_id)
        for pos in rule.body_positions_of(v):
            for other in rules:
                for i, t in enumerate(other.head.args):
                    if (
                        isinstance(t, Var)
                        and t.name not in other.existential_vars
                        and other.head.predicate == pos.predicate
                        and i + 1 == pos.index
                        and t.name in other.body_variables()
                    ):
                        key = (other.id, t.name)
                        if key not in marked:
                            marked.add(key)
                            worklist.append(key)

    occurrences: Set[Tuple[int, int, int]] = set()
    for rule in rules:
        for ai, atom in enumerate(rule.body):
            for ti, t in enumerate(atom.args):
                if isinstance(t, Var) and (rule.id, t.name) in marked:
                    occurrences.add((rule.id, ai + 1, ti + 1))
    return MarkingResult(
        occurrences=frozenset(occurrences), variables=frozenset(marked)
    )


@dataclass(frozen=True)
class ClassWitness:
    class_name: str
    rule_id: int
    variable: str
    reason: str


Witness = Tuple[int, str]


def _repeated_marked(
    rules: Sequence[Rule], marking: MarkingResult
) -> List[Tuple[Rule, str]]:
    found = []
    for rule in rules:
        for v in rule.body_variables():
            if rule.body_occurrence_count(v) >= 2 and marking.is_marked(rule.id, v):
                found.append((rule, v))
    return found


def is_sticky(rules: Sequence[Rule]) -> Tuple[bool, List[Witness]]:
    marking = mark_variables(rules)
    witnesses = [(r.id, v) for r, v in _repeated_marked(rules, marking)]
    return (not witnesses, witnesses)


def _is_restricted_sticky(
    rules: Sequence[Rule], allowed: Set[Position]
) -> Tuple[bool, List[Witness]]:
    marking = mark_variables(rules)
    witnesses = []
    for rule, v in _repeated_marked(rules, marking):
        if not any(p in allowed for p in rule.body_positions_of(v)):
            witnesses.append((rule.id, v))
    return (not witnesses, witnesses)


def is_weakly_sticky(rules: Sequence[Rule]) -> Tuple[bool, List[Witness]]:
    table = finite_rank_positions(build_dependency_graph(rules))
    return _is_restricted_sticky(rules, table.finite_positions())


def is_jws(rules: Sequence[Rule]) -> Tuple[bool, List[Witness]]:
    return _is_restricted_sticky(rules, finite_existential_positions(rules))


def selection(rules: Sequence[Rule], sel: SelectionFunctionId) -> Set[Position]:
    if sel is SelectionFunctionId.BOTTOM:
        return set()
    if sel is SelectionFunctionId.RANK:
        return finite_rank_positions(build_dependency_graph(rules)).finite_positions()
    if sel is SelectionFunctionId.EXISTENTIAL:
        return finite_existential_positions(rules)
    raise UnknownSelection(str(sel))


@dataclass(frozen=True)
class ClassificationReport:
    sticky: bool
    weakly_acyclic: bool
    weakly_sticky: bool
    jws: bool
    finite_rank_positions: FrozenSet[Position]
    finite_existential_positions: FrozenSet[Position]
    witnesses: Tuple[ClassWitness, ...]

    def to_json_dict(self) -> Dict:
        return {
            "sticky": self.sticky,
            "weakly_acyclic": self.weakly_acyclic,
            "weakly_sticky": self.weakly_sticky,
            "jws": self.jws,
            "finite_rank_positions": [str(p) for p in sorted(self.finite_rank_positions)],
            "finite_existential_positions": [
                str(p) for p in sorted(self.finite_existential_positions)
            ],
            "witnesses": [
                {
                    "class": w.class_name,
                    "rule": w.rule_id,
                    "variable": w.variable,
                    "reason": w.reason,
                }
                for w in self.witnesses
            ],
        }


def classify(program: Program) -> ClassificationReport:
    """Run every class test and collect witnesses for the failures."""
    rules = program.rules
    table = finite_rank_positions(build_dependency_graph(rules))
    finite_rank = table.finite_positions()
    finite_exist = finite_existential_positions(rules)

    sticky_ok, sticky_w = is_sticky(rules)
    wa_ok = table.is_weakly_acyclic()
    marking = mark_variables(rules)
    ws_w = [
        (r.id, v)
        for r, v in _repeated_marked(rules, marking)
        if not any(p in finite_rank for p in r.body_positions_of(v))
    ]
    jws_w = [
        (r.id, v)
        for r, v in _repeated_marked(rules, marking)
        if not any(p in finite_exist for p in r.body_positions_of(v))
    ]

    witnesses: List[ClassWitness] = []
    for rid, v in sorted(sticky_w):
        witnesses.append(
            ClassWitness("sticky", rid, v, "marked variable occurs more than once in the body")
        )
    if not wa_ok:
        infinite = sorted(p for p, r in table.ranks.items() if r == float("inf"))
        for p in infinite[:1]:
            witnesses.append(
                ClassWitness("weakly_acyclic", 0, "", f"position {p} has infinite rank")
            )
    for rid, v in sorted(ws_w):
        witnesses.append(
            ClassWitness(
                "weakly_sticky",
                rid,
                v,
                "marked repeated variable occurs only at infinite-rank positions",
            )
        )
    for rid, v in sorted(jws_w):
        witnesses.append(
            ClassWitness(
                "jws",
                rid,
                v,
                "marked repeated variable occurs only at non-finite-existential positions",
            )
        )

    return ClassificationReport(
        sticky=sticky_ok,
        weakly_acyclic=wa_ok,
        weakly_sticky=not ws_w,
        jws=not jws_w,
        finite_rank_positions=frozenset(finite_rank),
        finite_existential_positions=frozenset(finite_exist),
        witnesses=tuple(witnesses),
    )
