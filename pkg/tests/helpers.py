"""Shared generators and trace fault injection for the test suite."""
from __future__ import annotations

import copy
import random
from typing import Iterator

from recasm import corpus
from recasm.runtime import Registry, Trace
from recasm.semantics import Env
from recasm.state import Location, State, Update, apply_updates
from recasm.syntax import Const, Program, walk_rules, walk_terms, rule_terms, symbols_of
from recasm.values import UNDEF, AgentId, Sym, from_python, to_json

SYMS = tuple(Sym(n) for n in ("a", "b", "c", "heads", "tails"))
AGENTS = tuple(AgentId(n) for n in range(6))
AMBIENT = AgentId(0)


def random_value(rng: random.Random, exotic: float = 0.15, depth: int = 0):
    """Mostly small ints and int lists, with some symbols, agents and bools."""
    r = rng.random()
    if r < exotic:
        return rng.choice([UNDEF, True, False, rng.choice(SYMS), rng.choice(AGENTS)])
    if r < 0.45 or depth > 1:
        return rng.randint(-3, 5)
    n = rng.randint(0, 4)
    return tuple(random_value(rng, exotic / 2, depth + 1) for _ in range(n))


def random_index(rng: random.Random) -> tuple:
    return tuple(rng.randint(0, 2) for _ in range(rng.randint(0, 2)))


def random_update_set(rng: random.Random, locs: list, n: int) -> frozenset:
    """A consistent update set over ``locs`` (at most one value per location)."""
    chosen = rng.sample(locs, min(n, len(locs)))
    return frozenset(
        Update(l, UNDEF if rng.random() < 0.2 else random_value(rng)) for l in chosen
    )


def location_pool(rng: random.Random, n: int) -> list:
    symbols = ["f", "g", "h", "out"]
    pool = set()
    while len(pool) < n:
        amb = rng.choice((None,) + AGENTS[:3])
        args = () if rng.random() < 0.5 else (rng.randint(0, 3),)
        pool.add(Location(amb, rng.choice(symbols), args))
    return sorted(pool)


def random_state(rng: random.Random, locs: list, fill: float = 0.6) -> State:
    store = {l: random_value(rng) for l in locs if rng.random() < fill}
    return State(store)


# --- corpus rules ------------------------------------------------------------


def corpus_rules() -> list[tuple[str, str, Program]]:
    out = []
    for name in corpus.names():
        prog = corpus.load(name)
        for rname, decl in sorted(prog.rules.items()):
            out.append((name, rname, prog))
    return out


def rule_constants(prog: Program, rname: str) -> set:
    """Symbol constants occurring in a rule; renamings must fix these."""
    out = set()
    for r in walk_rules(prog.rules[rname].body):
        for t in rule_terms(r):
            for s in walk_terms(t):
                if isinstance(s, Const) and isinstance(s.value, (Sym, AgentId)):
                    out.add(s.value)
    return out


def rule_state(rng: random.Random, prog: Program, rname: str, agent: AgentId = AMBIENT,
               exotic: float = 0.15) -> State:
    """Random values for the rule's symbols around ``agent`` plus unrelated noise."""
    decl = prog.rules[rname]
    syms = set(symbols_of(decl.body)) | set(decl.params)
    if decl.output:
        syms.add(decl.output)
    store = {}
    for s in sorted(syms):
        if s not in prog.signature:
            continue
        amb = None if prog.signature.kind(s) == "shared" else agent
        if prog.signature.arity(s) == 0:
            if rng.random() < 0.7:
                store[Location(amb, s, ())] = random_value(rng, exotic)
        else:
            for _ in range(rng.randint(0, 4)):
                store[Location(amb, s, (random_index(rng),))] = random_value(rng, exotic)
    for _ in range(rng.randint(0, 3)):
        other = rng.choice(AGENTS[1:])
        s = rng.choice(sorted(syms) or ["noise"])
        store[Location(other, s, ())] = random_value(rng, exotic)
    return State(store, {}, prog.signature)


def perturb(rng: random.Random, state: State, rate: float = 0.3) -> State:
    """Change, drop or add a few locations; the alias table is kept."""
    ups = []
    locs = sorted(state.store)
    for l in locs:
        if rng.random() < rate:
            ups.append(Update(l, UNDEF if rng.random() < 0.3 else random_value(rng)))
    for _ in range(rng.randint(0, 3)):
        amb = rng.choice(AGENTS)
        sym = rng.choice([l.symbol for l in locs] or ["noise"])
        ups.append(Update(Location(amb, sym, ()), random_value(rng)))
    seen = {}
    for u in ups:
        seen[u.loc] = u
    return apply_updates(state, seen.values())


def rule_env(prog: Program, agent: AgentId = AMBIENT) -> Env:
    reg = Registry()
    for n in range(agent.n + 1):
        reg, _ = reg.add(next(iter(prog.rules)), None)
    return Env(agent, {}, reg, agent)


def random_renaming(rng: random.Random, fixed: set) -> dict:
    """A random permutation of the non-fixed symbols and agents."""
    syms = [s for s in SYMS if s not in fixed]
    agents = list(AGENTS)
    m = {}
    for pool in (syms, agents):
        img = pool[:]
        rng.shuffle(img)
        m.update({a: b for a, b in zip(pool, img) if a != b})
    return m


# --- fault injection -----------------------------------------------------------


def _copy(trace: Trace) -> Trace:
    return Trace(copy.deepcopy(trace.header), copy.deepcopy(trace.steps))


def _agent(x) -> AgentId:
    return from_python(x)


def inject_waiting_step(trace: Trace) -> Trace:
    """Step the main agent while its first callees are still running."""
    t = _copy(trace)
    rec = t.steps[1]
    a0 = {"agent": 0}
    assert a0 not in rec["selected"]
    rec["selected"].append(a0)
    rec["moves"].append({
        "agent": a0, "read_index": 1, "write_index": 1, "choice": 0, "family_size": 1,
        "updates": [], "calls": [], "spawned": [],
    })
    return t


def inject_callee_write(trace: Trace) -> Trace:
    """The main agent's merge-calling move also writes a local of its first callee."""
    t = _copy(trace)
    a0 = {"agent": 0}
    moves = [mv for rec in t.steps for mv in rec["moves"] if mv["agent"] == a0]
    first_child = next(mv["spawned"][0]["agent"] for mv in moves if mv["spawned"])
    for mv in moves:
        if any(c[0] == "merge" for c in mv["calls"]):
            loc = Location(_agent(first_child), "sorted_list_1", ())
            mv["updates"].append(Update(loc, ()).to_json())
            return t
    raise AssertionError("trace has no merge-calling move of the main agent")


def inject_extra_spawns(trace: Trace) -> Trace:
    """Give the last step's first move one callee more than the static bound."""
    t = _copy(trace)
    m = t.header["branching_bound"]
    rec = t.steps[-1]
    mv = rec["moves"][0]
    used = {from_python(a["agent"]).n for a in t.header["agents"]}
    for r in t.steps:
        for x in r["moves"]:
            used |= {from_python(s["agent"]).n for s in x["spawned"]}
    nxt = max(used) + 1
    while len(mv["spawned"]) < m + 1:
        c = AgentId(nxt)
        nxt += 1
        mv["spawned"].append({
            "agent": to_json(c), "rule": "merge", "caller": mv["agent"], "delegate": False,
            "inits": [], "alias": [],
        })
    return t


def iter_corpus_traces() -> Iterator[tuple[str, str, Trace]]:
    """Recursive traces of every corpus program under the three policies."""
    from recasm.runtime import InterleavingRandom, RandomSubset, SynchronousAll, run_program

    rng = random.Random(11)
    for name in corpus.names():
        prog = corpus.load(name)
        entry = corpus.ENTRIES.get(name)
        for pol in (SynchronousAll(), InterleavingRandom(), RandomSubset()):
            if entry is not None and entry.input_symbol:
                inputs = {entry.input_symbol: corpus.random_list(rng, 10)}
            else:
                inputs = {}
            _, tr = run_program(prog, inputs, pol, seed=3, max_steps=60)
            yield name, pol.name, tr
