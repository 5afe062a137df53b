import random

import pytest

from stickychase import (
    Adornment,
    Atom,
    Budget,
    Const,
    ExistentialBoundRejected,
    Var,
    answers_preserved_check,
    classify,
    full_sips,
    magic_rewrite,
    parse_program,
    parse_query,
    render_program,
)

from randprog import (
    canonical_rule,
    programs_equal_up_to_renaming,
    random_atomic_query,
    random_jws_program,
    rule_multiset,
)


def test_adorn_query_with_constant(ex10, ex10_query):
    rewriting = magic_rewrite(ex10, ex10_query)
    assert rewriting.adorned_query.body == (
        Atom("p__bf", (Const("a"), Var("Y"))),
    )
    assert rewriting.seeds == [Atom("mg_p__bf", (Const("a"),))]


def test_adorn_query_all_free_gives_zero_ary_seed():
    program = parse_program("e(a,b). e(X,Y) -> w(X,Y).")
    query = parse_query("?(X,Y) <- w(X,Y).")
    rewriting = magic_rewrite(program, query)
    assert rewriting.seeds == [Atom("mg_w__ff", ())]


def test_adorn_query_example_13(ex13, ex13_query):
    rewriting = magic_rewrite(ex13, ex13_query, merge_equivalent_magic=True)
    assert rewriting.adorned_query.body == (Atom("r__fb", (Var("Y"), Const("a"))),)
    assert rewriting.seeds == [Atom("mg_r", (Const("a"),))]


def test_full_sips_join_rule():
    program = parse_program("r(X,Y), r(Y,Z) -> p(X,Z).")
    sips = full_sips(program.rules[0], Adornment.from_string("bf"))
    assert [a.to_string() for a in sips.body_adornments] == ["bf", "bf"]


def test_full_sips_binding_flows_from_head(ex10):
    rule = ex10.rules[0]  # u(Y), r(X,Y) -> exists Z. r(Y,Z)
    sips = full_sips(rule, Adornment.from_string("bf"))
    assert [a.to_string() for a in sips.body_adornments] == ["b", "fb"]


def test_full_sips_all_free():
    program = parse_program("e(X) -> w(X).")
    sips = full_sips(program.rules[0], Adornment.from_string("f"))
    assert [a.to_string() for a in sips.body_adornments] == ["f"]


def test_full_sips_rejects_bound_existential(ex10):
    rule = ex10.rules[0]
    with pytest.raises(ExistentialBoundRejected):
        full_sips(rule, Adornment.from_string("fb"))


EXPECTED_EX10 = """
mg_p__bf(X), r__bf(X,Y), r__bf(Y,Z) -> p__bf(X,Z).
mg_r__bf(Y), u(Y), r__fb(X,Y) -> exists Z. r__bf(Y,Z).
mg_p__bf(X) -> mg_r__bf(X).
mg_r__bf(X), r__bf(X,Y) -> mg_r__bf(Y).
mg_r__bf(Y), u(Y) -> mg_r__fb(Y).
mg_r__bf(X), r(X,Y) -> r__bf(X,Y).
mg_r__fb(Y), r(X,Y) -> r__fb(X,Y).
"""


def test_rewriting_example_10_rule_multiset(ex10, ex10_query):
    rewriting = magic_rewrite(ex10, ex10_query)
    expected = parse_program(EXPECTED_EX10)
    got = rewriting.all_rules()
    assert rule_multiset(got) == rule_multiset(expected.rules)
    assert rewriting.seeds == [Atom("mg_p__bf", (Const("a"),))]
    assert len(rewriting.loading_rules) == 2


def test_rewriting_extensional_only_query():
    program = parse_program("e(a,b).")
    query = parse_query("?(Y) <- e(a,Y).")
    rewriting = magic_rewrite(program, query)
    assert rewriting.adorned_rules == []
    assert rewriting.magic_rules == []
    assert len(rewriting.loading_rules) == 1
    assert rewriting.seeds == [Atom("mg_e__bf", (Const("a"),))]


EXPECTED_EX13 = """
mg_r(X), r__bf(X,Y) -> exists Z. r__fb(Z,X).
mg_r(X), r__bf(X,Y), r__bf(Y,Z), v(Y) -> r__fb(Y,X).
mg_r(Y), r__fb(X,Y) -> exists Z. r__bf(Y,Z).
mg_r(Y), r__fb(X,Y), r__bf(Y,Z), v(Y) -> r__bf(Y,X).
mg_r(X), r__bf(X,Y) -> mg_r(Y).
mg_r(Y), r__fb(X,Y) -> mg_r(X).
mg_r(X), r(X,Y) -> r__bf(X,Y).
mg_r(Y), r(X,Y) -> r__fb(X,Y).
"""


def test_rewriting_example_13_merged(ex13, ex13_query):
    rewriting = magic_rewrite(ex13, ex13_query, merge_equivalent_magic=True)
    expected = parse_program(EXPECTED_EX13)
    assert rule_multiset(rewriting.all_rules()) == rule_multiset(expected.rules)
    assert len(rewriting.adorned_rules) == 4
    assert len(rewriting.magic_rules) == 2
    assert len(rewriting.loading_rules) == 2
    assert rewriting.seeds == [Atom("mg_r", (Const("a"),))]


def test_rewriting_example_13_classifications(ex13, ex13_query):
    rewriting = magic_rewrite(ex13, ex13_query, merge_equivalent_magic=True)
    report = classify(rewriting.as_program())
    assert report.weakly_sticky is False
    assert report.jws is True


def test_rewritten_program_round_trips(ex10, ex10_query):
    rewriting = magic_rewrite(ex10, ex10_query)
    program = rewriting.as_program()
    again = parse_program(render_program(program))
    assert programs_equal_up_to_renaming(again, program)


def test_no_existential_position_is_bound(ex13, ex13_query):
    rewriting = magic_rewrite(ex13, ex13_query)
    for rule in rewriting.adorned_rules:
        base, adornment = rewriting.predicate_map[rule.head.predicate]
        for i in adornment.bound_indexes():
            t = rule.head.args[i]
            assert not (isinstance(t, Var) and t.name in rule.existential_vars)


def test_answers_preserved_example_10(ex10, ex10_query):
    report = answers_preserved_check(ex10, ex10_query, Budget(500, 500))
    assert report.preserved is True
    assert report.original_answers == report.rewritten_answers


def test_answers_preserved_trivial_empty():
    program = parse_program("p(X,Y) -> q(X).")
    query = parse_query("?(X) <- q(X).")
    report = answers_preserved_check(program, query, Budget(100, 100))
    assert report.preserved is True
    assert report.original_answers == frozenset()


def test_answers_preserved_random_smoke():
    rng = random.Random(61)
    conclusive = 0
    for _ in range(15):
        program = random_jws_program(rng)
        query = random_atomic_query(rng, program)
        report = answers_preserved_check(program, query, Budget(3000, 3000))
        if report.preserved is None:
            continue
        assert report.preserved is True, (
            render_program(program),
            query,
            report.counterexample,
        )
        conclusive += 1
    assert conclusive >= 5
