"""Reasoning toolkit for existential-rule programs: program classification
on the sticky / weakly-sticky / jws hierarchy, budgeted chase
materialization, certain-answer query evaluation with freezing and
resumptions, and magic-sets rewriting."""

from .answering import (
    AnswerSet,
    SaturationState,
    SelectionPreconditionError,
    answer_query,
    applicable_pairs,
    resume,
)
from .chase import (
    Budget,
    ChaseResult,
    ChaseStatus,
    ChaseTrace,
    certain_answers_via_chase,
    chase,
    check_stickiness_bounded,
    derivation_relation,
)
from .graphs import (
    DependencyGraph,
    ExistentialDependencyGraph,
    INFINITE,
    RankTable,
    build_dependency_graph,
    build_edg,
    finite_existential_positions,
    finite_rank_positions,
)
from .magic import (
    Adornment,
    AdornedProgram,
    ExistentialBoundRejected,
    answers_preserved_check,
    full_sips,
    magic_rewrite,
)
from .marking import (
    ClassificationReport,
    MarkingResult,
    SelectionFunctionId,
    classify,
    is_jws,
    is_sticky,
    is_weakly_sticky,
    mark_variables,
    selection,
)
from .model import (
    Assignment,
    Atom,
    Const,
    ConjunctiveQuery,
    Instance,
    Null,
    Position,
    Program,
    Rule,
    Var,
    apply_assignment,
    atoms_isomorphic,
    find_homomorphisms,
    make_program,
)
from .parsing import (
    ParseError,
    load_facts_delimited,
    parse_program,
    parse_query,
    render_program,
    render_query,
)

__all__ = [name for name in dir() if not name.startswith("_")]
