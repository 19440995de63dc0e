"""Sort a list with the recursive mergesort and show who did what.

    python3 demos/sort_walkthrough.py 5 3 9 1
"""
import sys

from recasm import corpus
from recasm.runtime import InterleavingRandom, SynchronousAll, assert_postulates, run_program


def show(xs, policy, seed=0):
    run, trace = run_program(corpus.load("mergesort"), {"unsorted_list": xs}, policy, seed)
    print(f"{type(policy).__name__}: {run.step_index} steps, "
          f"{len(run.registry.agents)} agents, result {list(run.output('sorted_list'))}")
    for rec in trace.steps[:6]:
        movers = [m["agent"]["agent"] for m in rec["moves"]]
        spawned = sum(len(m["spawned"]) for m in rec["moves"])
        print(f"  step {rec['step']:>2}: moved {movers}, spawned {spawned}, finished {len(rec['terminated'])}")
    if len(trace.steps) > 6:
        print(f"  ... {len(trace.steps) - 6} more steps")
    print(f"  call discipline held: {assert_postulates(trace).ok}")


if __name__ == "__main__":
    xs = [int(a) for a in sys.argv[1:]] or [5, 3, 9, 1, 7, 2]
    show(xs, SynchronousAll())
    # one agent at a time: longer, same answer
    show(xs, InterleavingRandom(), seed=11)
