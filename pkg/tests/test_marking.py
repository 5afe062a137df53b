import random

from stickychase import (
    Position,
    Rule,
    SelectionFunctionId,
    classify,
    is_jws,
    is_sticky,
    is_weakly_sticky,
    make_program,
    mark_variables,
    parse_program,
    selection,
)

from randprog import random_program, random_rules


def test_marking_example_rules(ex5):
    marking = mark_variables(ex5.rules)
    assert set(marking.variables) == {(1, "X"), (1, "Z"), (2, "X"), (2, "Z")}
    # occurrence level: rule 1 body r(X,Y), p(X,Z)
    assert (1, 1, 1) in marking.occurrences  # X in r[1]
    assert (1, 2, 1) in marking.occurrences  # X in p[1]
    assert (1, 2, 2) in marking.occurrences  # Z in p[2]
    assert (1, 1, 2) not in marking.occurrences  # Y stays unmarked


def test_marking_nothing_marked_when_head_keeps_all():
    program = parse_program("p(X,Y) -> q(X,Y).")
    marking = mark_variables(program.rules)
    assert not marking.variables


def test_marking_preliminary_step():
    program = parse_program("p(X,Y) -> q(X).")
    marking = mark_variables(program.rules)
    assert set(marking.variables) == {(1, "Y")}


def test_marking_is_order_independent():
    rng = random.Random(3)
    for _ in range(40):
        rules = random_rules(rng, max_rules=5)
        shuffled = list(rules)
        rng.shuffle(shuffled)
        assert mark_variables(rules) == mark_variables(shuffled)


def test_sticky_example_witness(ex5):
    ok, witnesses = is_sticky(ex5.rules)
    assert not ok
    assert witnesses == [(1, "X")]


def test_sticky_without_repeated_variables():
    program = parse_program("p(X,Y) -> q(X).")
    assert is_sticky(program.rules) == (True, [])


def test_sticky_false_for_guarded_join_rules(ex9):
    ok, witnesses = is_sticky(ex9.rules)
    assert not ok
    assert (3, "X") in witnesses


def test_weakly_sticky_examples(ex5, ex8):
    assert is_weakly_sticky(ex5.rules)[0] is True
    ok, witnesses = is_weakly_sticky(ex8.rules)
    assert not ok
    assert witnesses == [(2, "Y")]


def test_weakly_sticky_no_repeats():
    program = parse_program("p(X,Y) -> exists Z. q(X,Z).")
    assert is_weakly_sticky(program.rules)[0] is True


def test_jws_examples(ex8, ex13):
    assert is_jws(ex8.rules)[0] is True
    assert is_jws(ex13.rules)[0] is True


def test_jws_contains_sticky_random():
    rng = random.Random(13)
    found = 0
    for _ in range(120):
        rules = random_rules(rng)
        if is_sticky(rules)[0]:
            found += 1
            assert is_jws(rules)[0] is True
    assert found >= 10


def test_selection_functions(ex8, ex9):
    assert selection(ex9.rules, SelectionFunctionId.BOTTOM) == set()
    rank = selection(ex9.rules, SelectionFunctionId.RANK)
    assert Position("v", 1) in rank
    exist = selection(ex8.rules, SelectionFunctionId.EXISTENTIAL)
    assert exist == {
        Position("u", 1),
        Position("r", 1),
        Position("r", 2),
        Position("p", 1),
        Position("p", 2),
    }


def test_classify_example_13_input(ex13):
    report = classify(ex13)
    assert report.sticky is False
    assert report.weakly_acyclic is False
    assert report.weakly_sticky is True
    assert report.jws is True


def test_classify_empty_rules():
    program = make_program([], [])
    report = classify(program)
    assert report.sticky and report.weakly_acyclic
    assert report.weakly_sticky and report.jws
    assert not report.finite_rank_positions


def test_hierarchy_on_random_rule_sets():
    rng = random.Random(29)
    for _ in range(300):
        rules = random_rules(rng)
        sticky_ok, _ = is_sticky(rules)
        ws_ok, _ = is_weakly_sticky(rules)
        jws_ok, _ = is_jws(rules)
        program = make_program(rules, [])
        wa_ok = classify(program).weakly_acyclic
        if sticky_ok:
            assert ws_ok
        if wa_ok:
            assert ws_ok
        if ws_ok:
            assert jws_ok


def test_witnesses_are_marked_and_repeated():
    rng = random.Random(31)
    for _ in range(80):
        rules = random_rules(rng)
        marking = mark_variables(rules)
        for check in (is_sticky, is_weakly_sticky, is_jws):
            _, witnesses = check(rules)
            for rule_id, v in witnesses:
                rule = next(r for r in rules if r.id == rule_id)
                assert marking.is_marked(rule_id, v)
                assert rule.body_occurrence_count(v) >= 2
