"""Bottom-up certain-answer evaluation with isomorphism-guarded rule
application, null freezing, and resumptions.

The engine saturates an instance like the chase, but a rule-assignment
pair applies only when the atom it would add (existential variables
instantiated with fresh nulls) cannot be re-embedded into an atom that
is already present.  The embedding keeps constants and frozen nulls
fixed and may rename the remaining nulls injectively, so structurally
redundant atoms are skipped and saturation stays finite.

Freezing promotes a null to constant-like status: nulls landing in a
selected position are frozen at once, and a resumption freezes every
null in the instance and re-runs saturation, which unblocks pairs that
an embedding previously suppressed.  Running the saturation with as
many resumptions as the query has variables is enough to recover every
certain answer for programs whose chase propagates repeated-variable
values through all selected-position-free joins.

For Boolean queries saturation stops as soon as the query holds; the
instance only ever grows, so the answer cannot be retracted.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass, field
from typing import Callable, Dict, FrozenSet, List, Optional, Sequence, Set, Tuple

from .marking import SelectionFunctionId, is_jws, is_weakly_sticky, selection
from .model import (
    Assignment,
    Atom,
    Const,
    ConjunctiveQuery,
    Instance,
    Null,
    NullFactory,
    Position,
    Program,
    Rule,
    Term,
    Var,
    apply_assignment,
    find_homomorphisms,
)

LogFn = Callable[[dict], None]


class SelectionPreconditionError(Exception):
    """The program fails the syntactic class check matching the selection."""

    def __init__(self, sel: SelectionFunctionId, witnesses):
        self.sel = sel
        self.witnesses = witnesses
        super().__init__(
            f"program is outside the syntactic class required for selection "
            f"{sel.value!r}; witnesses: {witnesses}"
        )


@dataclass(frozen=True)
class AnswerSet:
    tuples: FrozenSet[Tuple[str, ...]]
    boolean: Optional[bool]
    resumptions_used: int


@dataclass
class SaturationState:
    """Mutable single-writer engine state; snapshots may be read between
    steps from other threads."""

    instance: Instance
    frozen: Set[int]
    applied: Set[Tuple]
    resumptions_done: int
    selection_positions: FrozenSet[Position]
    nulls: NullFactory = field(default_factory=NullFactory)
    _heap: List[Tuple[int, int, Assignment]] = field(default_factory=list)
    _blocked: List[Tuple[int, int, Assignment]] = field(default_factory=list)
    _seen: Set[Tuple] = field(default_factory=set)
    _seq: int = 0

    def atoms_with_frozen_flags(self) -> List[Atom]:
        """Instance atoms with null terms carrying the current frozen set."""
        out = []
        for atom in self.instance:
            args = tuple(
                Null(t.id, t.id in self.frozen) if isinstance(t, Null) else t
                for t in atom.args
            )
            out.append(Atom(atom.predicate, args))
        return out


def _pair_key(rule: Rule, theta: Assignment) -> Tuple:
    return (rule.id, tuple(theta[v] for v in rule.body_variables()))


def _embeds_into(candidate: Atom, target: Atom, frozen: Set[int]) -> bool:
    """Positionwise embedding: constants and frozen nulls must match
    themselves; the candidate's other nulls map injectively to arbitrary
    target terms."""
    if candidate.predicate != target.predicate:
        return False
    if len(candidate.args) != len(target.args):
        return False
    fwd: Dict[Term, Term] = {}
    images: Dict[Term, Term] = {}
    for c, t in zip(candidate.args, target.args):
        if isinstance(c, Const) or (isinstance(c, Null) and c.id in frozen):
            if c != t:
                return False
            continue
        prev = fwd.setdefault(c, t)
        if prev != t:
            return False
        owner = images.setdefault(t, c)
        if owner != c:
            return False
    # a renamed null may not collide with a fixed argument's image
    for c, t in zip(candidate.args, target.args):
        if isinstance(c, Const) or (isinstance(c, Null) and c.id in frozen):
            owner = images.setdefault(t, c)
            if owner != c:
                return False
    return True


def _blocked_by(candidate: Atom, instance: Instance, frozen: Set[int]) -> bool:
    return any(
        _embeds_into(candidate, target, frozen)
        for target in instance.by_predicate(candidate.predicate)
    )


def _candidate_head(rule: Rule, theta: Assignment) -> Atom:
    """Head with placeholder fresh nulls, used only for the guard check."""
    extension = dict(theta)
    placeholder = -1
    for v in sorted(rule.existential_vars):
        extension[v] = Null(placeholder)
        placeholder -= 1
    return apply_assignment(rule.head, extension)


def _discover_with_atom(rule: Rule, new_atom: Atom, instance: Instance) -> List[Assignment]:
    out: List[Assignment] = []
    seen: Set[Tuple] = set()
    for idx, pattern in enumerate(rule.body):
        if pattern.predicate != new_atom.predicate or len(pattern.args) != len(new_atom.args):
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


def _enqueue(state: SaturationState, rule: Rule, theta: Assignment) -> None:
    key = _pair_key(rule, theta)
    if key in state._seen:
        return
    state._seen.add(key)
    heapq.heappush(state._heap, (state._seq, rule.id, theta))
    state._seq += 1


def _unblock_all(state: SaturationState) -> None:
    for entry in state._blocked:
        heapq.heappush(state._heap, entry)
    state._blocked = []


def _freeze_new_atom(state: SaturationState, atom: Atom, log: Optional[LogFn]) -> bool:
    """Step-3 freezing: nulls placed at a selected position freeze at once."""
    froze = False
    for i, t in enumerate(atom.args):
        if isinstance(t, Null) and t.id not in state.frozen:
            if Position(atom.predicate, i + 1) in state.selection_positions:
                state.frozen.add(t.id)
                froze = True
                if log:
                    log({"event": "freeze", "null": t.id, "where": str(Position(atom.predicate, i + 1))})
    return froze


def _query_holds_with(query: ConjunctiveQuery, new_atom: Atom, instance: Instance) -> bool:
    """Does some query-body match use the newly added atom?"""
    for idx, pattern in enumerate(query.body):
        if pattern.predicate != new_atom.predicate or len(pattern.args) != len(new_atom.args):
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
        rest = query.body[:idx] + query.body[idx + 1 :]
        for _ in find_homomorphisms(rest, instance, partial=partial):
            return True
    return False


def _saturate(
    state: SaturationState,
    rules: Sequence[Rule],
    stop_query: Optional[ConjunctiveQuery] = None,
    log: Optional[LogFn] = None,
) -> bool:
    """Exhaust applicable pairs in discovery order; returns True when the
    Boolean stop query became satisfied and saturation ended early."""
    rules_by_id = {r.id: r for r in rules}
    while state._heap:
        entry = heapq.heappop(state._heap)
        seq, rule_id, theta = entry
        rule = rules_by_id[rule_id]
        key = _pair_key(rule, theta)
        if key in state.applied:
            continue
        candidate = _candidate_head(rule, theta)
        if _blocked_by(candidate, state.instance, state.frozen):
            state._blocked.append(entry)
            if log:
                log({"event": "blocked", "rule": rule_id, "seq": seq})
            continue
        extension = dict(theta)
        for v in sorted(rule.existential_vars):
            extension[v] = state.nulls.fresh()
        atom = apply_assignment(rule.head, extension)
        state.instance.add(atom)
        state.applied.add(key)
        if log:
            log({"event": "apply", "rule": rule_id, "atom": str(atom)})
        if _freeze_new_atom(state, atom, log):
            _unblock_all(state)
        for r in rules:
            for new_theta in _discover_with_atom(r, atom, state.instance):
                _enqueue(state, r, new_theta)
        if stop_query is not None and _query_holds_with(stop_query, atom, state.instance):
            return True
    return False


def initial_state(program: Program, sel: SelectionFunctionId) -> SaturationState:
    state = SaturationState(
        instance=Instance(program.facts),
        frozen=set(),
        applied=set(),
        resumptions_done=0,
        selection_positions=frozenset(selection(program.rules, sel)),
    )
    for rule in program.rules:
        for theta in find_homomorphisms(rule.body, state.instance):
            _enqueue(state, rule, theta)
    return state


def applicable_pairs(
    state: SaturationState, rules: Sequence[Rule]
) -> List[Tuple[int, Assignment]]:
    """Currently applicable rule-assignment pairs, in discovery order:
    the body must match the instance, the pair must not have fired yet,
    and the instantiated head must not embed into an existing atom."""
    out: List[Tuple[int, Assignment]] = []
    for rule in rules:
        for theta in find_homomorphisms(rule.body, state.instance):
            if _pair_key(rule, theta) in state.applied:
                continue
            candidate = _candidate_head(rule, theta)
            if _blocked_by(candidate, state.instance, state.frozen):
                continue
            out.append((rule.id, theta))
    return out


def _freeze_everything(state: SaturationState, log: Optional[LogFn]) -> None:
    for null_id in state.instance.null_ids():
        state.frozen.add(null_id)
    _unblock_all(state)
    if log:
        log({"event": "resumption", "count": state.resumptions_done + 1})


def _evaluate(query: ConjunctiveQuery, instance: Instance) -> Tuple[FrozenSet, Optional[bool]]:
    tuples: Set[Tuple[str, ...]] = set()
    satisfied = False
    for theta in find_homomorphisms(query.body, instance):
        satisfied = True
        values = tuple(theta[v] for v in query.answer_vars)
        if all(isinstance(v, Const) for v in values):
            tuples.add(tuple(v.name for v in values))
        if query.is_boolean:
            break
    if query.is_boolean:
        return frozenset({()} if satisfied else set()), satisfied
    return frozenset(tuples), None


def answer_query(
    program: Program,
    query: ConjunctiveQuery,
    sel: SelectionFunctionId = SelectionFunctionId.EXISTENTIAL,
    resumptions_override: Optional[int] = None,
    force: bool = False,
    log: Optional[LogFn] = None,
) -> Tuple[AnswerSet, SaturationState]:
    """Saturate, resume once per query variable (unless overridden), and
    evaluate the query, discarding answer tuples that contain nulls.

    Answers are sound for any program; completeness requires the program
    to lie in the stickiness class matching the selection, which is
    checked syntactically (rank -> weakly sticky, existential -> jws)
    unless ``force`` is set.
    """
    if not force:
        if sel is SelectionFunctionId.RANK:
            ok, witnesses = is_weakly_sticky(program.rules)
            if not ok:
                raise SelectionPreconditionError(sel, witnesses)
        elif sel is SelectionFunctionId.EXISTENTIAL:
            ok, witnesses = is_jws(program.rules)
            if not ok:
                raise SelectionPreconditionError(sel, witnesses)

    state = initial_state(program, sel)
    resumptions = (
        resumptions_override
        if resumptions_override is not None
        else len(query.variables())
    )

    stop_query = query if query.is_boolean else None
    done = False
    if stop_query is not None and any(find_homomorphisms(query.body, state.instance)):
        done = True
    if not done:
        done = _saturate(state, program.rules, stop_query, log)
    for _ in range(resumptions):
        if done:
            break
        state.resumptions_done += 1
        _freeze_everything(state, log)
        done = _saturate(state, program.rules, stop_query, log)

    tuples, boolean = _evaluate(query, state.instance)
    answers = AnswerSet(
        tuples=tuples, boolean=boolean, resumptions_used=state.resumptions_done
    )
    return answers, state


def resume(
    state: SaturationState,
    rules: Sequence[Rule],
    additional: int,
    log: Optional[LogFn] = None,
) -> SaturationState:
    """Run ``additional`` more resumptions on an existing state.  The
    result matches a fresh run that used the larger resumption count from
    the start."""
    if additional < 1:
        raise ValueError("additional must be at least 1")
    for _ in range(additional):
        state.resumptions_done += 1
        _freeze_everything(state, log)
        _saturate(state, rules, None, log)
    return state
