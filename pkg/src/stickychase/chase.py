"""Budgeted chase materialization and derived diagnostics.

The chase enforces rules on an instance: whenever an assignment makes a
rule body true but no extension of it makes the head true, the head is
added with fresh nulls for the existential variables.  Applicable pairs
are dispatched level-saturating (pairs whose premises have smaller
maximum level fire first), first-in-first-out within a level, and each
pair fires at most once, so runs are fully deterministic.

The chase need not terminate; budgets on applied steps and instance
size turn it into a usable oracle.  A trace records every step together
with atom levels; the derivation relation and the bounded
stickiness-violation detector are computed from the trace.
"""

from __future__ import annotations

import enum
import heapq
import json
from dataclasses import dataclass, field
from typing import Dict, FrozenSet, Iterable, List, Optional, Sequence, Set, Tuple

from .marking import SelectionFunctionId, selection
from .model import (
    Assignment,
    Atom,
    Instance,
    NullFactory,
    Program,
    Rule,
    Term,
    Var,
    apply_assignment,
    find_homomorphisms,
)


class InvalidBudget(Exception):
    pass


class InvalidBound(Exception):
    pass


@dataclass(frozen=True)
class Budget:
    max_steps: int
    max_atoms: int

    def __post_init__(self):
        if self.max_steps < 1 or self.max_atoms < 1:
            raise InvalidBudget("budget components must be positive")


class ChaseStatus(str, enum.Enum):
    TERMINATED = "terminated"
    BUDGET_EXHAUSTED = "budget_exhausted"


@dataclass(frozen=True)
class ChaseStep:
    index: int
    rule_id: int
    assignment: Dict[str, Term]
    atom: Atom
    level: int
    premises: Tuple[Atom, ...]


@dataclass
class ChaseTrace:
    steps: List[ChaseStep] = field(default_factory=list)
    levels: Dict[Atom, int] = field(default_factory=dict)


@dataclass
class ChaseResult:
    instance: Instance
    status: ChaseStatus
    trace: ChaseTrace


def _assignment_key(rule: Rule, theta: Assignment) -> Tuple:
    return (rule.id, tuple(theta[v] for v in rule.body_variables()))


def _head_satisfied(rule: Rule, theta: Assignment, instance: Instance) -> bool:
    """True when some extension of theta maps the head into the instance;
    existential variables may take any value, consistently per variable."""
    head = rule.head
    for cand in instance.by_predicate(head.predicate):
        if len(cand.args) != len(head.args):
            continue
        binding: Dict[str, Term] = {}
        ok = True
        for h, c in zip(head.args, cand.args):
            if isinstance(h, Var) and h.name in rule.existential_vars:
                prev = binding.setdefault(h.name, c)
                if prev != c:
                    ok = False
                    break
            else:
                want = theta[h.name] if isinstance(h, Var) else h
                if want != c:
                    ok = False
                    break
        if ok:
            return True
    return False


def _premises(rule: Rule, theta: Assignment) -> Tuple[Atom, ...]:
    return tuple(apply_assignment(a, theta) for a in rule.body)


def _pair_level(premises: Iterable[Atom], levels: Dict[Atom, int]) -> int:
    return max((levels.get(a, 0) for a in premises), default=0)


def _discover_with_atom(
    rule: Rule, new_atom: Atom, instance: Instance
) -> List[Assignment]:
    """Body homomorphisms that use ``new_atom`` for at least one conjunct."""
    out: List[Assignment] = []
    seen: Set[Tuple] = set()
    for idx, pattern in enumerate(rule.body):
        if pattern.predicate != new_atom.predicate:
            continue
        if len(pattern.args) != len(new_atom.args):
            continue
        partial: Assignment = {}
        ok = True
        for p, c in zip(pattern.args, new_atom.args):
            if isinstance(p, Var):
                prev = partial.setdefault(p.name, c)
                if prev != c:
                    ok = False
                    break
            elif p != c:
                ok = False
                break
        if not ok:
            continue
        rest = rule.body[:idx] + rule.body[idx + 1 :]
        for theta in find_homomorphisms(rest, instance, partial=partial):
            key = tuple(theta[v] for v in rule.body_variables())
            if key not in seen:
                seen.add(key)
                out.append(theta)
    return out


def chase(program: Program, budget: Budget) -> ChaseResult:
    """Run the chase under a budget; stops at fixpoint or when either the
    applied-step count or the instance size is exceeded."""
    instance = Instance(program.facts)
    trace = ChaseTrace()
    nulls = NullFactory()

    heap: List[Tuple[int, int, int, Assignment]] = []  # (level, seq, rule_id, theta)
    seen: Set[Tuple] = set()
    seq = 0
    rules_by_id = {r.id: r for r in program.rules}

    def enqueue(rule: Rule, theta: Assignment) -> None:
        nonlocal seq
        key = _assignment_key(rule, theta)
        if key in seen:
            return
        seen.add(key)
        level = _pair_level(_premises(rule, theta), trace.levels)
        heapq.heappush(heap, (level, seq, rule.id, theta))
        seq += 1

    for rule in program.rules:
        for theta in find_homomorphisms(rule.body, instance):
            enqueue(rule, theta)

    applied = 0
    status = ChaseStatus.TERMINATED
    while heap:
        if applied >= budget.max_steps:
            status = ChaseStatus.BUDGET_EXHAUSTED
            break
        level, _, rule_id, theta = heapq.heappop(heap)
        rule = rules_by_id[rule_id]
        if _head_satisfied(rule, theta, instance):
            continue
        extension = dict(theta)
        for v in sorted(rule.existential_vars):
            extension[v] = nulls.fresh()
        atom = apply_assignment(rule.head, extension)
        instance.add(atom)
        applied += 1
        premises = _premises(rule, theta)
        atom_level = 1 + _pair_level(premises, trace.levels)
        trace.levels[atom] = atom_level
        trace.steps.append(
            ChaseStep(
                index=len(trace.steps) + 1,
                rule_id=rule.id,
                assignment=dict(theta),
                atom=atom,
                level=atom_level,
                premises=premises,
            )
        )
        if len(instance) > budget.max_atoms:
            status = ChaseStatus.BUDGET_EXHAUSTED
            break
        for r in program.rules:
            for new_theta in _discover_with_atom(r, atom, instance):
                enqueue(r, new_theta)

    for fact in program.facts:
        trace.levels.setdefault(fact, 0)
    return ChaseResult(instance=instance, status=status, trace=trace)


def certain_answers_via_chase(
    program: Program, query, budget: Budget
) -> Tuple[Set[Tuple[str, ...]], ChaseStatus]:
    """Evaluate the query over the budgeted chase, discarding tuples with
    nulls.  A Boolean query answers {()} for yes and the empty set for no.
    Answers are complete only when the status is ``TERMINATED``."""
    from .model import Const

    result = chase(program, budget)
    answers: Set[Tuple[str, ...]] = set()
    for theta in find_homomorphisms(query.body, result.instance):
        values = tuple(theta[v] for v in query.answer_vars)
        if all(isinstance(v, Const) for v in values):
            answers.add(tuple(v.name for v in values))
    return answers, result.status


# ---------------------------------------------------------------------------
# Derivation relation
# ---------------------------------------------------------------------------

@dataclass
class DerivationRelation:
    direct: FrozenSet[Tuple[Atom, Atom]]
    _closure: Optional[FrozenSet[Tuple[Atom, Atom]]] = None

    def closure(self) -> FrozenSet[Tuple[Atom, Atom]]:
        if self._closure is None:
            succ: Dict[Atom, Set[Atom]] = {}
            for a, b in self.direct:
                succ.setdefault(a, set()).add(b)
            closed: Set[Tuple[Atom, Atom]] = set()
            for start in succ:
                stack = list(succ[start])
                reached: Set[Atom] = set()
                while stack:
                    n = stack.pop()
                    if n in reached:
                        continue
                    reached.add(n)
                    stack.extend(succ.get(n, ()))
                closed.update((start, n) for n in reached)
            self._closure = frozenset(closed)
        return self._closure

    def descendants(self, atom: Atom) -> Set[Atom]:
        return {b for a, b in self.closure() if a == atom}


def derivation_relation(trace: ChaseTrace) -> DerivationRelation:
    direct: Set[Tuple[Atom, Atom]] = set()
    for step in trace.steps:
        for premise in step.premises:
            direct.add((premise, step.atom))
    return DerivationRelation(direct=frozenset(direct))


# ---------------------------------------------------------------------------
# Bounded stickiness-of-the-chase diagnostics
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class StickinessViolation:
    step_index: int
    rule_id: int
    variable: str
    value: Term
    missing_atom: Atom


@dataclass(frozen=True)
class StickinessVerdict:
    """Outcome of the bounded check.  A violation is a proof that the
    program lies outside the selected stickiness class; no violation
    within the bound is inconclusive."""

    steps_checked: int
    violation: Optional[StickinessViolation] = None

    @property
    def ok_up_to_bound(self) -> bool:
        return self.violation is None


def check_stickiness_bounded(
    program: Program, k: int, sel: SelectionFunctionId
) -> StickinessVerdict:
    """Chase for at most ``k`` steps; for every step whose rule repeats a
    body variable with no occurrence at a selected position, require the
    variable's value to reappear in the produced atom and in each of its
    descendants inside the bounded trace."""
    if k < 1:
        raise InvalidBound("the step bound must be positive")
    result = chase(program, Budget(max_steps=k, max_atoms=10 ** 9))
    selected = selection(program.rules, sel)
    relation = derivation_relation(result.trace)
    rules_by_id = {r.id: r for r in program.rules}

    for step in result.trace.steps:
        rule = rules_by_id[step.rule_id]
        for v in rule.body_variables():
            if rule.body_occurrence_count(v) < 2:
                continue
            if any(p in selected for p in rule.body_positions_of(v)):
                continue
            value = step.assignment[v]
            if value not in step.atom.args:
                return StickinessVerdict(
                    steps_checked=len(result.trace.steps),
                    violation=StickinessViolation(
                        step.index, rule.id, v, value, step.atom
                    ),
                )
            for descendant in sorted(
                relation.descendants(step.atom), key=lambda a: result.trace.levels.get(a, 0)
            ):
                if value not in descendant.args:
                    return StickinessVerdict(
                        steps_checked=len(result.trace.steps),
                        violation=StickinessViolation(
                            step.index, rule.id, v, value, descendant
                        ),
                    )
    return StickinessVerdict(steps_checked=len(result.trace.steps))


# ---------------------------------------------------------------------------
# Trace export
# ---------------------------------------------------------------------------

def trace_to_jsonl(trace: ChaseTrace) -> str:
    """One JSON record per chase step."""
    from .render import null_names_for, render_ground_atom, render_term_str

    names = null_names_for(step.atom for step in trace.steps)
    lines = []
    for step in trace.steps:
        record = {
            "step": step.index,
            "rule": step.rule_id,
            "assignment": {
                v: render_term_str(t, names) for v, t in sorted(step.assignment.items())
            },
            "atom": render_ground_atom(step.atom, names),
            "level": step.level,
        }
        lines.append(json.dumps(record, sort_keys=True))
    return "\n".join(lines) + ("\n" if lines else "")
