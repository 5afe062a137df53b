"""Rendering of ground atoms for reports and traces.

Nulls print as ζ1, ζ2, ... numbered by first appearance in the
rendered collection, which keeps textual output stable across runs.
"""

from __future__ import annotations

from typing import Dict, Iterable, Sequence

from .model import Atom, Const, Null, Term, Var


def null_names_for(atoms: Iterable[Atom]) -> Dict[int, int]:
    names: Dict[int, int] = {}
    for atom in atoms:
        for t in atom.args:
            if isinstance(t, Null) and t.id not in names:
                names[t.id] = len(names) + 1
    return names


def render_term_str(term: Term, names: Dict[int, int] | None = None) -> str:
    if isinstance(term, Const):
        return term.name
    if isinstance(term, Null):
        k = names.get(term.id, term.id) if names is not None else term.id
        return f"ζ{k}"
    if isinstance(term, Var):
        return term.name
    raise TypeError(term)


def render_ground_atom(atom: Atom, names: Dict[int, int] | None = None) -> str:
    if not atom.args:
        return atom.predicate
    return f"{atom.predicate}({','.join(render_term_str(t, names) for t in atom.args)})"


def render_instance_lines(atoms: Sequence[Atom]) -> list[str]:
    names = null_names_for(atoms)
    return [render_ground_atom(a, names) + "." for a in atoms]
