"""Two views of the same static system: one-step delegates replayed eagerly,
and a single nondeterministic rule whose runs are enumerated.

    python3 demos/delegates_and_flattening.py
"""
from recasm import corpus
from recasm.concurrency import ConcurrentProgram, delegate_transform, eager_replay, enumerate_runs, flatten_static
from recasm.printer import pretty_print
from recasm.runtime import RandomSubset

cp = ConcurrentProgram.from_program(corpus.load("shared3"))

rec = delegate_transform(cp)
print(pretty_print(rec).split("rule OneStep_double")[0].rstrip())
rep = eager_replay(cp, rec, {}, RandomSubset(), seed=3, max_steps=8)
print(f"\neager replay: {rep.steps} concurrent steps -> {rep.recursive_steps} recursive steps, ok={rep.ok}")

flat = flatten_static(cp)
for depth in range(4):
    a, b = enumerate_runs(cp, depth), enumerate_runs(flat, depth)
    print(f"depth {depth}: {len(a.runs)} runs concurrently, {len(b.runs)} flattened, equal={a == b}")
