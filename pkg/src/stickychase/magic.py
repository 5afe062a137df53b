"""Query-directed magic-sets rewriting for existential rules.

The rewriting adorns predicates with bound/free argument patterns
starting from the query, prefixes every adorned rule with a magic guard
atom, derives magic predicates that collect the relevant bindings, and
adds loading rules that pull extensional tuples of adorned predicates
into their adorned versions.  Two points are specific to existential
rules and mixed extensional/intensional predicates:

* a head position holding an existential variable can never be bound,
  so head adornments that would bind one produce no adorned rule;
* predicates that have both rules and stored facts get a loading rule
  ``mg(bound vars), p(all vars) -> p_adorned(all vars)`` per adornment.

Sideways information passing is full and left-to-right: a body argument
is bound when it is a constant, bound in the head, or occurs in an
earlier body atom.

Magic rules chain through the body: the first adorned body occurrence
is guarded by the rule's own magic atom, each later one by the magic
atom and atom of its predecessor; every adorned occurrence gets a
defining magic rule, including occurrences whose predicate is defined
by a loading rule alone, since the loading guard must be derivable.

With ``merge_equivalent_magic`` the magic predicates of one base
predicate collapse into a single predicate when they agree on arity;
entry rules then degenerate to tautologies and are dropped, and one
sideways propagation rule per adorned variant replaces them.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, FrozenSet, List, Optional, Sequence, Set, Tuple

from .chase import Budget, ChaseStatus, certain_answers_via_chase
from .model import (
    Atom,
    Const,
    ConjunctiveQuery,
    Position,
    Program,
    Rule,
    Term,
    Var,
    make_program,
)


class ExistentialBoundRejected(Exception):
    def __init__(self, rule_id: int, variable: str):
        self.rule_id = rule_id
        self.variable = variable
        super().__init__(
            f"rule {rule_id}: adornment binds existential variable {variable!r}"
        )


@dataclass(frozen=True)
class Adornment:
    flags: Tuple[bool, ...]  # True = bound

    @staticmethod
    def from_string(text: str) -> "Adornment":
        return Adornment(tuple(c == "b" for c in text))

    def to_string(self) -> str:
        return "".join("b" if f else "f" for f in self.flags)

    @property
    def bound_count(self) -> int:
        return sum(self.flags)

    def bound_indexes(self) -> List[int]:
        return [i for i, f in enumerate(self.flags) if f]

    def free_indexes(self) -> List[int]:
        return [i for i, f in enumerate(self.flags) if not f]


@dataclass(frozen=True)
class Sips:
    """Full left-to-right sideways information passing for one rule and
    head adornment: the head precedes every body atom and body atoms keep
    their written order."""

    head_adornment: Adornment
    body_adornments: Tuple[Adornment, ...]

    def atom_adornments(self, rule: Rule) -> Dict[Atom, Adornment]:
        out = {rule.head: self.head_adornment}
        for atom, ad in zip(rule.body, self.body_adornments):
            out[atom] = ad
        return out


def full_sips(rule: Rule, head_adornment: Adornment) -> Sips:
    if len(head_adornment.flags) != len(rule.head.args):
        raise ValueError("adornment length does not match head arity")
    for i in head_adornment.bound_indexes():
        t = rule.head.args[i]
        if isinstance(t, Var) and t.name in rule.existential_vars:
            raise ExistentialBoundRejected(rule.id, t.name)

    bound: Set[str] = set()
    for i in head_adornment.bound_indexes():
        t = rule.head.args[i]
        if isinstance(t, Var):
            bound.add(t.name)

    body_adornments: List[Adornment] = []
    for atom in rule.body:
        flags = []
        for t in atom.args:
            if isinstance(t, Const):
                flags.append(True)
            elif isinstance(t, Var):
                flags.append(t.name in bound)
            else:
                flags.append(True)
        body_adornments.append(Adornment(tuple(flags)))
        for t in atom.args:
            if isinstance(t, Var):
                bound.add(t.name)
    return Sips(head_adornment=head_adornment, body_adornments=tuple(body_adornments))


@dataclass
class AdornedProgram:
    adorned_rules: List[Rule]
    magic_rules: List[Rule]
    loading_rules: List[Rule]
    seeds: List[Atom]
    adorned_query: ConjunctiveQuery
    predicate_map: Dict[str, Tuple[str, Adornment]]
    magic_map: Dict[str, Tuple[str, Optional[Adornment]]]
    base_program: Program

    def all_rules(self) -> List[Rule]:
        renumbered = []
        next_id = 1
        for rule in self.adorned_rules + self.magic_rules + self.loading_rules:
            renumbered.append(
                Rule(
                    id=next_id,
                    body=rule.body,
                    head=rule.head,
                    existential_vars=rule.existential_vars,
                    note=rule.note,
                )
            )
            next_id += 1
        return renumbered

    def as_program(self) -> Program:
        facts = list(self.base_program.facts) + list(self.seeds)
        return make_program(self.all_rules(), facts)

    def bound_positions(self) -> Set[Position]:
        """Bound positions of the rewritten program: the bound slots of
        every adorned predicate plus every magic-predicate slot."""
        out: Set[Position] = set()
        for name, (_, adornment) in self.predicate_map.items():
            for i in adornment.bound_indexes():
                out.add(Position(name, i + 1))
        program = self.as_program()
        schema = dict(program.schema)
        for name in self.magic_map:
            for i in range(schema.get(name, 0)):
                out.add(Position(name, i + 1))
        return out


def _canonical_rule(rule: Rule) -> Tuple:
    """Structure of a rule with variables renamed by first occurrence."""
    names: Dict[str, str] = {}

    def term_key(t: Term):
        if isinstance(t, Var):
            if t.name not in names:
                names[t.name] = f"V{len(names)}"
            return ("v", names[t.name])
        if isinstance(t, Const):
            return ("c", t.name)
        raise ValueError("rules cannot contain nulls")

    body = tuple(
        (a.predicate, tuple(term_key(t) for t in a.args)) for a in rule.body
    )
    head = (rule.head.predicate, tuple(term_key(t) for t in rule.head.args))
    exist = tuple(sorted(names.get(v, v) for v in rule.existential_vars))
    return (body, head, exist)


class _Rewriter:
    def __init__(self, program: Program, query: ConjunctiveQuery, merge: bool):
        self.program = program
        self.query = query
        self.merge = merge
        self.intensional = {r.head.predicate for r in program.rules}
        self.taken: Set[str] = {p for p, _ in program.schema}
        self._adorned_names: Dict[Tuple[str, Adornment], str] = {}
        self._magic_names: Dict[Tuple[str, Adornment], str] = {}
        self.predicate_map: Dict[str, Tuple[str, Adornment]] = {}
        self.magic_map: Dict[str, Tuple[str, Optional[Adornment]]] = {}

    def _fresh(self, base: str) -> str:
        name = base
        while name in self.taken:
            name += "_x"
        self.taken.add(name)
        return name

    def adorned_name(self, pred: str, ad: Adornment) -> str:
        key = (pred, ad)
        if key not in self._adorned_names:
            name = self._fresh(f"{pred}__{ad.to_string()}")
            self._adorned_names[key] = name
            self.predicate_map[name] = (pred, ad)
        return self._adorned_names[key]

    def magic_name(self, pred: str, ad: Adornment) -> str:
        key = (pred, ad)
        if key not in self._magic_names:
            name = self._fresh(f"mg_{pred}__{ad.to_string()}")
            self._magic_names[key] = name
            self.magic_map[name] = (pred, ad)
        return self._magic_names[key]

    def magic_atom(self, pred: str, ad: Adornment, args: Sequence[Term]) -> Atom:
        bound_args = tuple(args[i] for i in ad.bound_indexes())
        return Atom(self.magic_name(pred, ad), bound_args)

    # -- main pipeline ----------------------------------------------------

    def run(self) -> AdornedProgram:
        adorned_query, query_occurrences = self._adorn_query()

        worklist: List[Tuple[str, Adornment]] = []
        queued: Set[Tuple[str, Adornment]] = set()

        def want(pred: str, ad: Adornment) -> None:
            if (pred, ad) not in queued:
                queued.add((pred, ad))
                worklist.append((pred, ad))

        for pred, ad, _atom in query_occurrences:
            want(pred, ad)

        adorned_rules: List[Rule] = []
        # (adorned rule, list of (base,, adornment) or None per body atom)
        rule_occurrences: List[Tuple[Rule, List[Optional[Tuple[str, Adornment]]]]] = []
        next_id = 1
        while worklist:
            pred, ad = worklist.pop(0)
            for rule in self.program.rules:
                if rule.head.predicate != pred:
                    continue
                try:
                    sips = full_sips(rule, ad)
                except ExistentialBoundRejected:
                    continue
                body_atoms: List[Atom] = []
                occs: List[Optional[Tuple[str, Adornment]]] = []
                for atom, atom_ad in zip(rule.body, sips.body_adornments):
                    if atom.predicate in self.intensional:
                        body_atoms.append(Atom(self.adorned_name(atom.predicate, atom_ad), atom.args))
                        occs.append((atom.predicate, atom_ad))
                        want(atom.predicate, atom_ad)
                    else:
                        body_atoms.append(atom)
                        occs.append(None)
                head = Atom(self.adorned_name(pred, ad), rule.head.args)
                guard = self.magic_atom(pred, ad, rule.head.args)
                adorned = Rule(
                    id=next_id,
                    body=(guard,) + tuple(body_atoms),
                    head=head,
                    existential_vars=rule.existential_vars,
                )
                next_id += 1
                adorned_rules.append(adorned)
                rule_occurrences.append((adorned, occs))

        has_rules = {
            self.predicate_map[r.head.predicate] for r in adorned_rules
        }

        magic_rules, seeds = self._magic_layer(rule_occurrences, query_occurrences)
        loading_rules = self._loading_rules(
            sorted(queued, key=lambda x: (x[0], x[1].to_string()))
        )

        if self.merge:
            magic_rules, loading_rules, adorned_rules, seeds = self._merge(
                magic_rules, loading_rules, adorned_rules, seeds, has_rules
            )

        return AdornedProgram(
            adorned_rules=adorned_rules,
            magic_rules=magic_rules,
            loading_rules=loading_rules,
            seeds=seeds,
            adorned_query=adorned_query,
            predicate_map=dict(self.predicate_map),
            magic_map=dict(self.magic_map),
            base_program=self.program,
        )

    def _adorn_query(self):
        bound: Set[str] = set()
        body: List[Atom] = []
        occurrences: List[Tuple[str, Adornment, Atom]] = []
        for atom in self.query.body:
            flags = []
            for t in atom.args:
                if isinstance(t, Const):
                    flags.append(True)
                elif isinstance(t, Var):
                    flags.append(t.name in bound)
                else:
                    flags.append(True)
            ad = Adornment(tuple(flags))
            adorned = Atom(self.adorned_name(atom.predicate, ad), atom.args)
            body.append(adorned)
            occurrences.append((atom.predicate, ad, atom))
            for t in atom.args:
                if isinstance(t, Var):
                    bound.add(t.name)
        adorned_query = ConjunctiveQuery(
            name=self.query.name,
            answer_vars=self.query.answer_vars,
            body=tuple(body),
        )
        return adorned_query, occurrences

    def _magic_layer(self, rule_occurrences, query_occurrences):
        magic_rules: List[Rule] = []
        seeds: List[Atom] = []
        seen_shapes: Set[Tuple] = set()
        next_id = 1

        def emit(body: Sequence[Atom], head: Atom) -> None:
            nonlocal next_id
            if not body:
                if head not in seeds:
                    seeds.append(head)
                return
            rule = Rule(
                id=next_id, body=tuple(body), head=head, existential_vars=frozenset()
            )
            shape = _canonical_rule(rule)
            if shape in seen_shapes:
                return
            seen_shapes.add(shape)
            magic_rules.append(rule)
            next_id += 1

        def is_safe(body: Sequence[Atom], head: Atom) -> bool:
            have: Set[str] = set()
            for a in body:
                have.update(a.variables())
            return all(v in have for v in head.variables())

        # Seeds and binding passing inside the query body.  Query
        # occurrences always contribute: they drive evaluation even when
        # the predicate is defined by a loading rule alone.
        chain: List[Atom] = []
        preceding: List[Atom] = []
        for pred, ad, atom in query_occurrences:
            head = self.magic_atom(pred, ad, atom.args)
            body = list(chain)
            if not is_safe(body, head):
                body = list(preceding)
            emit(body, head)
            adorned_atom = Atom(self.adorned_name(pred, ad), atom.args)
            chain = [head, adorned_atom]
            preceding.append(adorned_atom)

        # Chained magic rules inside each adorned rule.  When a chained
        # body would drop a needed binding the full prefix of the rule
        # body is used instead.
        for adorned, occs in rule_occurrences:
            guard = adorned.body[0]
            context: List[Atom] = [guard]
            prefix: List[Atom] = [guard]
            for atom, occ in zip(adorned.body[1:], occs):
                if occ is not None:
                    pred, ad = occ
                    head = self.magic_atom(pred, ad, atom.args)
                    body = list(context)
                    if not is_safe(body, head):
                        body = list(prefix)
                    emit(body, head)
                    context = [head, atom]
                else:
                    context.append(atom)
                prefix.append(atom)
        return magic_rules, seeds

    def _loading_rules(self, adorned_preds) -> List[Rule]:
        loading: List[Rule] = []
        next_id = 1
        facts_preds = {f.predicate for f in self.program.facts}
        for pred, ad in adorned_preds:
            if pred not in facts_preds:
                continue
            arity = len(ad.flags)
            args = tuple(Var(f"V{i+1}") for i in range(arity))
            guard = self.magic_atom(pred, ad, args)
            loading.append(
                Rule(
                    id=next_id,
                    body=(guard, Atom(pred, args)),
                    head=Atom(self.adorned_name(pred, ad), args),
                    existential_vars=frozenset(),
                )
            )
            next_id += 1
        return loading

    def _merge(self, magic_rules, loading_rules, adorned_rules, seeds, has_rules):
        """Collapse the magic predicates of a base predicate into one when
        their arities agree; drop the tautologies this creates and add one
        sideways propagation rule per adorned variant."""
        by_base: Dict[str, List[Tuple[str, Adornment]]] = {}
        for name, (base, ad) in self.magic_map.items():
            if ad is not None:
                by_base.setdefault(base, []).append((name, ad))

        rename: Dict[str, str] = {}
        merged_bases: List[str] = []
        for base, variants in sorted(by_base.items()):
            if len(variants) < 2:
                continue
            arities = {ad.bound_count for _, ad in variants}
            if len(arities) != 1:
                continue
            merged = self._fresh(f"mg_{base}")
            self.magic_map[merged] = (base, None)
            for name, _ in variants:
                rename[name] = merged
                del self.magic_map[name]
            merged_bases.append(base)

        if not rename:
            return magic_rules, loading_rules, adorned_rules, seeds

        def rn_atom(atom: Atom) -> Atom:
            return Atom(rename.get(atom.predicate, atom.predicate), atom.args)

        def rn_rule(rule: Rule) -> Rule:
            return Rule(
                id=rule.id,
                body=tuple(rn_atom(a) for a in rule.body),
                head=rn_atom(rule.head),
                existential_vars=rule.existential_vars,
                note=rule.note,
            )

        adorned_rules = [rn_rule(r) for r in adorned_rules]
        loading_rules = [rn_rule(r) for r in loading_rules]
        seeds = [rn_atom(a) for a in seeds]

        kept: List[Rule] = []
        seen_shapes: Set[Tuple] = set()
        for rule in (rn_rule(r) for r in magic_rules):
            if rule.head in rule.body:
                continue
            shape = _canonical_rule(rule)
            if shape in seen_shapes:
                continue
            seen_shapes.add(shape)
            kept.append(rule)

        # Sideways propagation for merged variants that have defining
        # rules; meaningful when the merged magic predicate is unary.
        sideways: List[Rule] = []
        for base in merged_bases:
            variants = sorted(
                (
                    (pred, ad)
                    for (pred, ad) in has_rules
                    if pred == base
                ),
                key=lambda x: x[1].to_string(),
            )
            for pred, ad in variants:
                if ad.bound_count != 1:
                    continue
                arity = len(ad.flags)
                args = tuple(Var(f"V{i+1}") for i in range(arity))
                guard = self.magic_atom(pred, ad, args)
                guard = rn_atom(guard)
                occurrence = Atom(self.adorned_name(pred, ad), args)
                for j in ad.free_indexes():
                    rule = Rule(
                        id=0,
                        body=(guard, occurrence),
                        head=Atom(guard.predicate, (args[j],)),
                        existential_vars=frozenset(),
                    )
                    shape = _canonical_rule(rule)
                    if shape not in seen_shapes:
                        seen_shapes.add(shape)
                        sideways.append(rule)

        magic = [
            Rule(id=i + 1, body=r.body, head=r.head, existential_vars=frozenset())
            for i, r in enumerate(kept + sideways)
        ]
        return magic, loading_rules, adorned_rules, seeds


def magic_rewrite(
    program: Program,
    query: ConjunctiveQuery,
    merge_equivalent_magic: bool = False,
) -> AdornedProgram:
    """Rewrite ``program`` for evaluating ``query`` bottom-up; the result
    bundles the adorned, magic, and loading rules, the seed facts, and the
    adorned query."""
    return _Rewriter(program, query, merge_equivalent_magic).run()


# ---------------------------------------------------------------------------
# Oracle-based preservation check
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PreservationReport:
    preserved: Optional[bool]  # None when either chase ran out of budget
    original_answers: FrozenSet[Tuple[str, ...]]
    rewritten_answers: FrozenSet[Tuple[str, ...]]
    original_status: ChaseStatus
    rewritten_status: ChaseStatus
    counterexample: Optional[Tuple[str, ...]] = None


def answers_preserved_check(
    program: Program, query: ConjunctiveQuery, budget: Budget
) -> PreservationReport:
    """Compare certain answers before and after the rewriting, both via
    the budgeted chase; inconclusive unless both chases terminate."""
    rewriting = magic_rewrite(program, query)
    original, status_a = certain_answers_via_chase(program, query, budget)
    rewritten, status_b = certain_answers_via_chase(
        rewriting.as_program(), rewriting.adorned_query, budget
    )
    if status_a is not ChaseStatus.TERMINATED or status_b is not ChaseStatus.TERMINATED:
        return PreservationReport(
            preserved=None,
            original_answers=frozenset(original),
            rewritten_answers=frozenset(rewritten),
            original_status=status_a,
            rewritten_status=status_b,
        )
    diff = sorted(original.symmetric_difference(rewritten))
    return PreservationReport(
        preserved=not diff,
        original_answers=frozenset(original),
        rewritten_answers=frozenset(rewritten),
        original_status=status_a,
        rewritten_status=status_b,
        counterexample=diff[0] if diff else None,
    )
