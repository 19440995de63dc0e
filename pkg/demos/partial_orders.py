"""Run a sort as a concurrent program with stale reads and check the resulting
partial order of moves.

    python3 demos/partial_orders.py
"""
from recasm import corpus
from recasm.concurrency import Exhaustive, check_po_run, extract_po_run, run_concurrent, wrap_recursive_as_concurrent
from recasm.runtime import RandomSubset

cp = wrap_recursive_as_concurrent(corpus.load("quicksort"))
for lag in (0, 2):
    run, trace = run_concurrent(cp, {"unsorted_list": [4, 8, 1, 3]}, RandomSubset(), seed=5,
                                max_steps=300, max_read_lag=lag)
    po = extract_po_run(trace)
    rep = check_po_run(po, Exhaustive(12))
    stale = sum(m.read_index < m.write_index for m in po.moves)
    print(f"lag {lag}: {len(po.moves)} moves, {stale} stale reads, "
          f"{len(po.order_pairs())} ordered pairs, coherent={rep.ok}, "
          f"result {list(run.output('sorted_list'))}")

print("\nfirst lines of the DOT rendering:")
print("\n".join(po.to_dot().splitlines()[:6]))
