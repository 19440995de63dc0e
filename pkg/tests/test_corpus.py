import random

import pytest

from recasm import corpus
from recasm.runtime import assert_postulates, make_policy, run_program

SORTS = ["mergesort", "quicksort", "mergesort_parallel", "quicksort_parallel"]


@pytest.mark.parametrize("name", SORTS)
def test_sorts_match_oracle(name):
    entry = corpus.ENTRIES[name]
    rng = random.Random(name)
    prog = entry.program
    for i in range(50):
        xs = entry.make_input(rng)
        policy = ("synchronous", "interleaving", "random-subset")[i % 3]
        run, trace = run_program(prog, {entry.input_symbol: xs}, make_policy(policy), i, 20_000)
        assert run.status == entry.expected_status
        assert run.output(entry.output_symbol) == tuple(entry.oracle(xs))
        if i % 10 == 0:
            assert assert_postulates(trace).ok


def test_sieve_matches_oracle():
    entry = corpus.ENTRIES["sieve"]
    run, _ = run_program(entry.program, {}, make_policy("synchronous"), 0, 60)
    got = list(run.streams[entry.output_symbol])
    assert len(got) >= 50
    assert got == entry.oracle(len(got))


@pytest.mark.parametrize("name", corpus.names())
def test_every_corpus_program_parses(name):
    assert corpus.load(name).rules
