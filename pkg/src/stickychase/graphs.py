"""Position-level dependency analyses.

Two graphs drive the program classification:

* the dependency graph over predicate positions, whose special edges
  record where existential values are invented; a position has infinite
  rank when some path ending there can cross unboundedly many special
  edges, which happens exactly when it is reachable from a cycle through
  a special edge;
* the existential dependency graph over existential variables, where an
  edge from Z to Z' says that values invented by Z can re-trigger the
  rule of Z'.  The target set of an existential variable collects every
  position its invented values can reach.

Both analyses are pure functions of the rule set.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Dict, FrozenSet, Iterable, List, Sequence, Set, Tuple

from .model import Position, Rule, Var

INFINITE = math.inf


@dataclass(frozen=True)
class DependencyEdge:
    src: Position
    dst: Position
    special: bool


@dataclass(frozen=True)
class DependencyGraph:
    nodes: FrozenSet[Position]
    edges: FrozenSet[DependencyEdge]


@dataclass(frozen=True)
class RankTable:
    """Per-position rank; ``INFINITE`` for positions fed by a special cycle."""

    ranks: Dict[Position, float]

    def finite_positions(self) -> Set[Position]:
        return {p for p, r in self.ranks.items() if r != INFINITE}

    def is_weakly_acyclic(self) -> bool:
        return all(r != INFINITE for r in self.ranks.values())


def all_positions(rules: Sequence[Rule]) -> Set[Position]:
    positions: Set[Position] = set()
    for rule in rules:
        for atom in rule.body + (rule.head,):
            for i in range(len(atom.args)):
                positions.add(Position(atom.predicate, i + 1))
    return positions


def build_dependency_graph(rules: Sequence[Rule]) -> DependencyGraph:
    """Copy edges run from each body position of a head-occurring
    universal variable to each of its head positions.  Special edges run
    from every body-variable position to every head position holding an
    existential variable of the rule: firing the rule on values seen in
    any body position can trigger an invention there, and drawing the
    edge from non-exported variables as well keeps the finite-rank
    positions inside the finite-existential ones."""
    edges: Set[DependencyEdge] = set()
    for rule in rules:
        exist_positions = [
            Position(rule.head.predicate, i + 1)
            for i, t in enumerate(rule.head.args)
            if isinstance(t, Var) and t.name in rule.existential_vars
        ]
        for v in rule.head_variables():
            if v in rule.existential_vars:
                continue
            for src in rule.body_positions_of(v):
                for dst in rule.head_positions_of(v):
                    edges.add(DependencyEdge(src, dst, special=False))
        for v in rule.body_variables():
            for src in rule.body_positions_of(v):
                for dst in exist_positions:
                    edges.add(DependencyEdge(src, dst, special=True))
    return DependencyGraph(nodes=frozenset(all_positions(rules)), edges=frozenset(edges))


def _strongly_connected_components(
    nodes: Sequence[Position], adj: Dict[Position, List[Position]]
) -> List[List[Position]]:
    """Iterative Tarjan; components come out in reverse topological order."""
    index: Dict[Position, int] = {}
    low: Dict[Position, int] = {}
    on_stack: Set[Position] = set()
    stack: List[Position] = []
    components: List[List[Position]] = []
    counter = [0]

    for root in nodes:
        if root in index:
            continue
        work: List[Tuple[Position, int]] = [(root, 0)]
        while work:
            node, child_idx = work.pop()
            if child_idx == 0:
                index[node] = low[node] = counter[0]
                counter[0] += 1
                stack.append(node)
                on_stack.add(node)
            advanced = False
            neighbors = adj.get(node, [])
            for i in range(child_idx, len(neighbors)):
                nxt = neighbors[i]
                if nxt not in index:
                    work.append((node, i + 1))
                    work.append((nxt, 0))
                    advanced = True
                    break
                if nxt in on_stack:
                    low[node] = min(low[node], index[nxt])
            if advanced:
                continue
            if work and low[node] < low[work[-1][0]]:
                low[work[-1][0]] = low[node]
            if low[node] == index[node]:
                comp = []
                while True:
                    w = stack.pop()
                    on_stack.discard(w)
                    comp.append(w)
                    if w == node:
                        break
                components.append(comp)
    return components


def finite_rank_positions(graph: DependencyGraph) -> RankTable:
    """Rank every position.

    A strongly connected component that contains a special edge makes
    every position reachable from it infinite; ranks of the remaining
    positions are longest paths over the condensation with special edges
    weighted one.
    """
    nodes = sorted(graph.nodes)
    adj: Dict[Position, List[Position]] = {n: [] for n in nodes}
    for e in sorted(graph.edges, key=lambda e: (e.src, e.dst, e.special)):
        adj[e.src].append(e.dst)

    components = _strongly_connected_components(nodes, adj)
    comp_of: Dict[Position, int] = {}
    for ci, comp in enumerate(components):
        for n in comp:
            comp_of[n] = ci

    infinite_comp = [False] * len(components)
    for e in graph.edges:
        if e.special and comp_of[e.src] == comp_of[e.dst]:
            infinite_comp[comp_of[e.src]] = True

    # Condensation edges; Tarjan emits components in reverse topological
    # order, so iterating components in reverse order is topological.
    comp_edges: Dict[int, Set[Tuple[int, int]]] = {}
    for e in graph.edges:
        a, b = comp_of[e.src], comp_of[e.dst]
        if a != b:
            comp_edges.setdefault(a, set()).add((b, 1 if e.special else 0))

    comp_rank: List[float] = [0.0] * len(components)
    order = list(range(len(components) - 1, -1, -1))
    for ci in order:
        if infinite_comp[ci]:
            comp_rank[ci] = INFINITE
    for ci in order:
        for dst, w in sorted(comp_edges.get(ci, ())):
            if comp_rank[ci] == INFINITE:
                comp_rank[dst] = INFINITE
            elif comp_rank[dst] != INFINITE:
                comp_rank[dst] = max(comp_rank[dst], comp_rank[ci] + w)

    ranks = {n: comp_rank[comp_of[n]] for n in nodes}
    return RankTable(ranks=ranks)


# ---------------------------------------------------------------------------
# Existential dependency graph
# ---------------------------------------------------------------------------

@dataclass(frozen=True, order=True)
class ExistentialVar:
    """An existential variable, identified by its rule; rule scoping makes
    explicit standardization apart unnecessary."""

    rule_id: int
    name: str

    def __str__(self) -> str:
        return f"{self.name}@{self.rule_id}"


@dataclass(frozen=True)
class ExistentialDependencyGraph:
    nodes: FrozenSet[ExistentialVar]
    edges: FrozenSet[Tuple[ExistentialVar, ExistentialVar]]
    targets: Dict[ExistentialVar, FrozenSet[Position]]

    def cyclic_nodes(self) -> Set[ExistentialVar]:
        """Existential variables lying on some cycle (self-loops included)."""
        adj: Dict[ExistentialVar, Set[ExistentialVar]] = {}
        for a, b in self.edges:
            adj.setdefault(a, set()).add(b)
        cyclic: Set[ExistentialVar] = set()
        for start in self.nodes:
            # depth-first reachability from each successor back to start
            stack = sorted(adj.get(start, ()))
            seen: Set[ExistentialVar] = set()
            while stack:
                n = stack.pop()
                if n == start:
                    cyclic.add(start)
                    break
                if n in seen:
                    continue
                seen.add(n)
                stack.extend(sorted(adj.get(n, ())))
        return cyclic


def _target_set(ev: ExistentialVar, rules: Sequence[Rule]) -> FrozenSet[Position]:
    """Least fixpoint: head positions of the existential variable, then the
    head positions of any universal variable whose body positions all lie
    inside the set."""
    rule = next(r for r in rules if r.id == ev.rule_id)
    targets: Set[Position] = set(rule.head_positions_of(ev.name))
    changed = True
    while changed:
        changed = False
        for r in rules:
            for v in r.body_variables():
                b = set(r.body_positions_of(v))
                if b and b <= targets:
                    h = set(r.head_positions_of(v))
                    if not h <= targets:
                        targets |= h
                        changed = True
    return frozenset(targets)


def build_edg(rules: Sequence[Rule]) -> ExistentialDependencyGraph:
    evs: List[ExistentialVar] = []
    for rule in rules:
        for name in sorted(rule.existential_vars):
            if rule.head_positions_of(name):
                evs.append(ExistentialVar(rule.id, name))

    targets = {ev: _target_set(ev, rules) for ev in evs}

    edges: Set[Tuple[ExistentialVar, ExistentialVar]] = set()
    for src in evs:
        for dst in evs:
            rule = next(r for r in rules if r.id == dst.rule_id)
            for v in rule.body_variables():
                b = set(rule.body_positions_of(v))
                if b and b <= targets[src]:
                    edges.add((src, dst))
                    break
    return ExistentialDependencyGraph(
        nodes=frozenset(evs), edges=frozenset(edges), targets=targets
    )


def finite_existential_positions(rules: Sequence[Rule]) -> Set[Position]:
    """Positions untouched by any existential variable lying on a cycle of
    the existential dependency graph."""
    edg = build_edg(rules)
    excluded: Set[Position] = set()
    for ev in edg.cyclic_nodes():
        excluded |= edg.targets[ev]
    return all_positions(rules) - excluded


# ---------------------------------------------------------------------------
# DOT export
# ---------------------------------------------------------------------------

def dependency_graph_to_dot(graph: DependencyGraph) -> str:
    lines = ["digraph positions {"]
    for node in sorted(graph.nodes):
        lines.append(f'  "{node}";')
    for e in sorted(graph.edges, key=lambda e: (e.src, e.dst, e.special)):
        style = ' [style=dashed]' if e.special else ""
        lines.append(f'  "{e.src}" -> "{e.dst}"{style};')
    lines.append("}")
    return "\n".join(lines) + "\n"


def edg_to_dot(edg: ExistentialDependencyGraph) -> str:
    lines = ["digraph existentials {"]
    for node in sorted(edg.nodes):
        lines.append(f'  "{node}";')
    for a, b in sorted(edg.edges):
        lines.append(f'  "{a}" -> "{b}";')
    lines.append("}")
    return "\n".join(lines) + "\n"
