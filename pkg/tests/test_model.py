import itertools
import random

import pytest

from stickychase import (
    Atom,
    Const,
    Instance,
    Null,
    Position,
    Rule,
    Var,
    apply_assignment,
    atoms_isomorphic,
    find_homomorphisms,
    make_program,
)
from stickychase.model import (
    ArityConflict,
    NonGroundFact,
    ProgramValidationError,
    UnboundVariable,
    UnsafeHeadVariable,
)

from randprog import random_program


def test_make_program_infers_positions(ex1):
    preds = dict(ex1.schema)
    assert preds == {"r": 2, "s": 3}
    positions = {
        Position("r", 1),
        Position("r", 2),
        Position("s", 1),
        Position("s", 2),
        Position("s", 3),
    }
    got = {
        Position(p, i + 1) for p, arity in ex1.schema for i in range(arity)
    }
    assert got == positions


def test_make_program_no_rules():
    program = make_program([], [Atom("p", (Const("a"),))])
    assert program.rules == ()
    assert program.facts == (Atom("p", (Const("a"),)),)


def test_make_program_rejects_unsafe_head_variable():
    rule = Rule(id=1, body=(Atom("r", (Var("X"),)),), head=Atom("q", (Var("Y"),)))
    with pytest.raises(ProgramValidationError) as err:
        make_program([rule], [])
    assert any(isinstance(e, UnsafeHeadVariable) for e in err.value.errors)


def test_make_program_rejects_arity_conflict_and_nonground_fact():
    rule = Rule(id=1, body=(Atom("p", (Var("X"),)),), head=Atom("q", (Var("X"),)))
    bad_fact = Atom("p", (Const("a"), Const("b")))
    with pytest.raises(ProgramValidationError) as err:
        make_program([rule], [bad_fact, Atom("q", (Var("X"),))])
    kinds = {type(e) for e in err.value.errors}
    assert ArityConflict in kinds
    assert NonGroundFact in kinds


def test_apply_assignment_substitutes():
    atom = Atom("s", (Var("X"), Var("Y"), Var("Z")))
    theta = {"X": Const("a"), "Y": Const("b"), "Z": Null(1)}
    assert apply_assignment(atom, theta) == Atom("s", (Const("a"), Const("b"), Null(1)))


def test_apply_assignment_ground_fixed_point():
    atom = Atom("p", (Const("a"),))
    assert apply_assignment(atom, {}) == atom


def test_apply_assignment_repeated_variable():
    atom = Atom("r", (Var("X"), Var("X")))
    assert apply_assignment(atom, {"X": Null(2)}) == Atom("r", (Null(2), Null(2)))


def test_apply_assignment_unbound():
    with pytest.raises(UnboundVariable):
        apply_assignment(Atom("p", (Var("X"),)), {})


def test_apply_assignment_commutes_with_null_renaming():
    atom = Atom("s", (Var("X"), Var("Y"), Var("X")))
    theta = {"X": Null(1), "Y": Const("a")}
    renaming = {1: 9}

    def rename(a):
        return Atom(
            a.predicate,
            tuple(
                Null(renaming[t.id]) if isinstance(t, Null) else t for t in a.args
            ),
        )

    composed = {
        v: (Null(renaming[t.id]) if isinstance(t, Null) else t)
        for v, t in theta.items()
    }
    assert rename(apply_assignment(atom, theta)) == apply_assignment(atom, composed)


def test_find_homomorphisms_join(ex1):
    body = ex1.rules[1].body  # r(X,Y), r(Y,Z)
    instance = Instance(
        [Atom("r", (Const("a"), Const("b"))), Atom("r", (Const("b"), Null(1)))]
    )
    homs = list(find_homomorphisms(body, instance))
    assert homs == [{"X": Const("a"), "Y": Const("b"), "Z": Null(1)}]


def test_find_homomorphisms_empty_instance():
    assert list(find_homomorphisms([Atom("p", (Var("X"),))], Instance())) == []


def test_find_homomorphisms_enumerates_all_matches():
    instance = Instance(
        [Atom("r", (Const("a"), Const("b"))), Atom("r", (Const("b"), Const("c")))]
    )
    homs = list(find_homomorphisms([Atom("r", (Var("X"), Var("Y")))], instance))
    assert len(homs) == 2


def brute_force_homs(conjunction, instance):
    """Independent oracle: try every total assignment over the active domain."""
    variables = sorted({v for a in conjunction for v in a.variables()})
    adom = []
    for atom in instance:
        for t in atom.args:
            if t not in adom:
                adom.append(t)
    found = []
    for combo in itertools.product(adom, repeat=len(variables)):
        theta = dict(zip(variables, combo))
        if all(apply_assignment(a, theta) in instance for a in conjunction):
            found.append(theta)
    return found


def test_find_homomorphisms_matches_brute_force():
    rng = random.Random(7)
    for _ in range(40):
        program = random_program(rng, max_rules=3)
        instance = Instance(program.facts)
        if len(instance) > 20 or len(instance) == 0:
            continue
        rule = rng.choice(program.rules) if program.rules else None
        if rule is None:
            continue
        conj = rule.body
        got = list(find_homomorphisms(conj, instance))
        expected = brute_force_homs(conj, instance)
        key = lambda t: sorted((k, repr(v)) for k, v in t.items())
        assert sorted(map(key, got)) == sorted(map(key, expected))


def test_atoms_isomorphic_unfrozen_nulls_rename():
    a = Atom("s", (Const("c"), Null(1), Null(4)))
    b = Atom("s", (Const("c"), Null(2), Null(3)))
    assert atoms_isomorphic(a, b, frozen_aware=True)


def test_atoms_isomorphic_frozen_nulls_are_rigid():
    a = Atom("s", (Const("c"), Null(1, frozen=True), Null(4, frozen=True)))
    b = Atom("s", (Const("c"), Null(2, frozen=True), Null(3, frozen=True)))
    assert not atoms_isomorphic(a, b, frozen_aware=True)
    # ignoring freezing they are isomorphic again
    assert atoms_isomorphic(a, b, frozen_aware=False)


def test_atoms_isomorphic_identity():
    a = Atom("p", (Const("a"),))
    assert atoms_isomorphic(a, a, frozen_aware=True)


def test_atoms_isomorphic_respects_equality_pattern():
    assert not atoms_isomorphic(
        Atom("r", (Null(1), Null(1))), Atom("r", (Null(2), Null(3)))
    )
    assert atoms_isomorphic(
        Atom("r", (Null(1), Null(1))), Atom("r", (Null(5), Null(5)))
    )


def random_ground_atom(rng, frozen_ids):
    arity = rng.randint(1, 3)
    args = []
    for _ in range(arity):
        if rng.random() < 0.4:
            args.append(Const(rng.choice("ab")))
        else:
            nid = rng.randint(1, 4)
            args.append(Null(nid, frozen=nid in frozen_ids))
    return Atom("p", tuple(args))


def test_atoms_isomorphic_is_equivalence_relation():
    rng = random.Random(11)
    frozen_ids = {2, 3}
    atoms = [random_ground_atom(rng, frozen_ids) for _ in range(60)]
    for a in atoms[:20]:
        assert atoms_isomorphic(a, a)
    for a, b in itertools.product(atoms[:25], repeat=2):
        assert atoms_isomorphic(a, b) == atoms_isomorphic(b, a)
    for a, b, c in zip(atoms, atoms[20:], atoms[40:]):
        if atoms_isomorphic(a, b) and atoms_isomorphic(b, c):
            assert atoms_isomorphic(a, c)


def test_instance_deduplicates_and_preserves_order():
    instance = Instance()
    assert instance.add(Atom("p", (Const("a"),)))
    assert not instance.add(Atom("p", (Const("a"),)))
    assert instance.add(Atom("q", (Const("b"),)))
    assert instance.atoms() == [Atom("p", (Const("a"),)), Atom("q", (Const("b"),))]
    assert len(instance) == 2
