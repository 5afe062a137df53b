from pathlib import Path

import pytest

from stickychase import parse_program, parse_query

FIXTURES = Path(__file__).parent / "fixtures"


def load(name):
    return parse_program((FIXTURES / name).read_text())


@pytest.fixture
def ex1():
    return load("ex1.dlp")


@pytest.fixture
def ex4_p1():
    return load("ex4_p1.dlp")


@pytest.fixture
def ex4_p2():
    return load("ex4_p2.dlp")


@pytest.fixture
def ex5():
    return load("ex5.dlp")


@pytest.fixture
def ex8():
    return load("ex8.dlp")


@pytest.fixture
def ex9():
    return load("ex9.dlp")


@pytest.fixture
def ex9_query():
    return parse_query("?() <- p(c,Y).")


@pytest.fixture
def ex10():
    return load("ex10.dlp")


@pytest.fixture
def ex10_query():
    return parse_query("?() <- p(a,Y).")


@pytest.fixture
def ex13():
    return load("ex13.dlp")


@pytest.fixture
def ex13_query():
    return parse_query("?() <- r(Y,a).")
