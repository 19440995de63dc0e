"""Executable recursive Abstract State Machines."""
from .parser import ParseError, ParseErrorList, parse, parse_file
from .printer import pretty_print
from .runtime import (
    InterleavingRandom,
    RandomSubset,
    Script,
    SynchronousAll,
    assert_postulates,
    init_run,
    run_program,
    run_to_quiescence,
    step,
)
from .semantics import Env, delta, eval_term, witness_check
from .state import (
    Isomorphism,
    Location,
    State,
    Update,
    apply_isomorphism,
    apply_updates,
    diff_states,
)
from .values import UNDEF, AgentId, Sym

__all__ = [
    "AgentId", "Env", "InterleavingRandom", "Isomorphism", "Location", "ParseError",
    "ParseErrorList", "RandomSubset", "Script", "State", "Sym", "SynchronousAll", "UNDEF",
    "Update", "apply_isomorphism", "apply_updates", "assert_postulates", "delta",
    "diff_states", "eval_term", "init_run", "parse", "parse_file", "pretty_print",
    "run_program", "run_to_quiescence", "step", "witness_check",
]
