"""Concurrent runs, partial-order runs and the program transformations.

* :func:`wrap_recursive_as_concurrent` guards every rule by
  ``active and not waiting`` so that a concurrent scheduler reproduces the
  recursive runs.
* :func:`extract_po_run` / :func:`check_po_run` build the partial order of a
  recorded concurrent run and check it.
* :func:`delegate_transform` turns a concurrent program into a recursive one
  in which every step of an agent is carried out by a one-step delegate.
* :func:`flatten_static` turns a static system into a single nd-seq rule;
  :func:`enumerate_runs` is the run-set oracle relating the two.
"""
from __future__ import annotations

import itertools
import random
import warnings
from dataclasses import dataclass, field, replace
from typing import Any, Iterable, Optional, Union

from .parser import build_program
from .printer import term_text
from .runtime import (
    ConfigError,
    Policy,
    RunState,
    SynchronousAll,
    Trace,
    agent_env,
    agent_family,
    init_run,
    run_to_quiescence,
    step,
    trace_states,
)
from .semantics import Effect, delta, family_sorted
from .state import (
    InconsistentUpdates,
    Location,
    State,
    apply_updates,
    clashes,
    dumps,
    update_set_from_json,
)
from .syntax import (
    AmbCaller,
    App,
    Assign,
    Call,
    Choose,
    Const,
    If,
    ListLit,
    Op,
    Par,
    Program,
    RegPred,
    RuleDecl,
    count_calls,
    is_ground,
    rule_terms,
    read_terms_of,
    symbols_of,
    walk_rules,
    walk_terms,
)
from .values import AgentId, Sym, from_python, to_json, vkey


class TransformError(ValueError):
    pass


class FormatError(ValueError):
    pass


# --- concurrent programs ---------------------------------------------------


@dataclass(frozen=True)
class ConcurrentProgram:
    """A program base plus its initial agents.

    ``dynamic`` systems may create agents through calls; static ones run a
    fixed set of agents declared with ``agent NAME runs RULE``.
    """

    program: Program
    dynamic: bool

    @property
    def agents(self) -> tuple:
        if self.program.agents:
            return tuple(self.program.agents)
        return (("main", self.program.main),)

    @classmethod
    def from_program(cls, program: Program) -> "ConcurrentProgram":
        dynamic = any(count_calls(d.body) for d in program.rules.values())
        return cls(program, dynamic)


GUARD = Op("and", (RegPred("active"), Op("not", (RegPred("waiting"),))))


def wrap_recursive_as_concurrent(program: Program) -> ConcurrentProgram:
    rules = {
        name: RuleDecl(d.name, d.params, d.output, If(GUARD, d.body), d.span)
        for name, d in program.rules.items()
    }
    wrapped = build_program(rules, program.main, program.shared, program.observe, program.agents)
    return ConcurrentProgram(wrapped, True)


def concurrent_candidates(run: RunState) -> list[AgentId]:
    """Live agents that have a non-trivial move available."""
    out = []
    for a in run.registry.live():
        fam = agent_family(run, run.state, run.registry, a)
        if any(not e.is_trivial_in(run.state) for e in fam):
            out.append(a)
    return out


def _lagged_read(lag: int):
    def read(run: RunState, agent: AgentId, rng: random.Random) -> int:
        i = run.step_index
        lo = max(0, i - lag)
        if agent in run.last_write:
            lo = max(lo, run.last_write[agent] + 1)
        return rng.randint(lo, i) if lo < i else i

    return read


def start_concurrent(cp: ConcurrentProgram, inputs=None, seed: int = 0,
                     on_inconsistency: str = "halt", max_read_lag: int = 0) -> RunState:
    if max_read_lag < 0:
        raise ConfigError("max_read_lag must be non-negative")
    run = init_run(cp.program, inputs, seed, on_inconsistency)
    return replace(run, history_len=max_read_lag + 1)


def concurrent_step(run: RunState, policy: Policy, max_read_lag: int = 0):
    reader = _lagged_read(max_read_lag) if max_read_lag else None
    return step(run, policy, concurrent_candidates, reader)


def run_concurrent(
    cp: ConcurrentProgram,
    inputs=None,
    policy: Policy | None = None,
    seed: int = 0,
    max_steps: int = 1000,
    max_read_lag: int = 0,
    on_inconsistency: str = "halt",
) -> tuple[RunState, Trace]:
    """A concurrent run; every move records the state index it read from."""
    run = start_concurrent(cp, inputs, seed, on_inconsistency, max_read_lag)
    policy = policy or SynchronousAll()
    reader = _lagged_read(max_read_lag) if max_read_lag else None
    run, trace = run_to_quiescence(run, policy, max_steps, eligible=concurrent_candidates,
                                   read_state=reader)
    trace.header["semantics"] = "concurrent"
    trace.header["max_read_lag"] = max_read_lag
    return run, trace


# --- partial-order runs ----------------------------------------------------


@dataclass(frozen=True)
class PoMove:
    id: int
    agent: AgentId
    read_index: int
    write_index: int
    updates: frozenset
    aliases: tuple = ()  # ((agent, symbol, Location), ...)

    def apply(self, state: State) -> State:
        if self.aliases:
            state = state.with_aliases({(a, s): l for a, s, l in self.aliases})
        return apply_updates(state, self.updates)

    def to_json(self) -> dict:
        return {
            "id": self.id,
            "agent": to_json(self.agent),
            "read_index": self.read_index,
            "write_index": self.write_index,
            "updates": [u.to_json() for u in sorted(self.updates)],
        }


@dataclass
class PartialOrderRun:
    """Moves ordered by ``m < m'`` iff ``write_index(m) < read_index(m')``."""

    moves: list
    initial: State
    observed: Optional[list] = None  # S_0, S_1, ... of the source run

    def less(self, a: PoMove, b: PoMove) -> bool:
        return a.write_index < b.read_index

    def order_pairs(self) -> list[tuple[int, int]]:
        return [(a.id, b.id) for a in self.moves for b in self.moves if self.less(a, b)]

    def covering(self) -> list[tuple[int, int]]:
        out = []
        for a in self.moves:
            for b in self.moves:
                if self.less(a, b) and not any(
                    self.less(a, c) and self.less(c, b) for c in self.moves
                ):
                    out.append((a.id, b.id))
        return out

    def to_json(self) -> dict:
        return {
            "format": 1,
            "moves": [m.to_json() for m in self.moves],
            "order": [list(p) for p in self.order_pairs()],
        }

    def to_dot(self) -> str:
        agents = sorted({m.agent for m in self.moves})
        colour = {a: (i % 12) + 1 for i, a in enumerate(agents)}
        lines = ["digraph porun {", "  node [style=filled, colorscheme=set312];"]
        for m in self.moves:
            lines.append(
                f'  m{m.id} [label="{m.agent!r} r{m.read_index} w{m.write_index}", '
                f"fillcolor={colour[m.agent]}];"
            )
        for a, b in self.covering():
            lines.append(f"  m{a} -> m{b};")
        lines.append("}")
        return "\n".join(lines) + "\n"


def extract_po_run(trace: Trace, initial: State | None = None) -> PartialOrderRun:
    if initial is None:
        initial = State.from_json(trace.header["initial_state"])
    moves = []
    for rec in trace.steps:
        if rec.get("inconsistent"):
            continue
        for mv in rec["moves"]:
            if "read_index" not in mv or "write_index" not in mv:
                raise FormatError(f"step {rec.get('step')}: move without read/write indices")
            ups = set(update_set_from_json(mv["updates"]))
            aliases = []
            for sp in mv.get("spawned", []):
                ups |= update_set_from_json(sp["inits"])
                c = from_python(sp["agent"])
                for sym, loc in sp.get("alias", []):
                    aliases.append((c, sym, Location.from_json(loc)))
            moves.append(
                PoMove(len(moves), from_python(mv["agent"]), mv["read_index"],
                       mv["write_index"], frozenset(ups), tuple(aliases))
            )
    observed = list(trace.states) if trace.states else trace_states(trace)
    return PartialOrderRun(moves, initial, observed)


@dataclass(frozen=True)
class Exhaustive:
    limit: int = 12
    max_segments: int = 200_000


@dataclass(frozen=True)
class Sampled:
    n: int = 1000
    seed: int = 0


@dataclass
class CoherenceReport:
    finite_history: bool = True
    sequentiality: bool = True
    coherence: bool = True
    observed_states: bool = True
    mode: str = ""
    segments_checked: int = 0
    counterexample: Optional[dict] = None
    warnings: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return self.finite_history and self.sequentiality and self.coherence and self.observed_states

    def to_json(self) -> dict:
        return {
            "format": 1,
            "ok": self.ok,
            "finite_history": self.finite_history,
            "sequentiality": self.sequentiality,
            "coherence": self.coherence,
            "observed_states": self.observed_states,
            "mode": self.mode,
            "segments_checked": self.segments_checked,
            "counterexample": self.counterexample,
            "warnings": self.warnings,
        }


class _Sigma:
    """State of an initial segment, applying its moves in index order."""

    def __init__(self, po: PartialOrderRun):
        self.po = po
        self.cache: dict[int, State] = {0: po.initial}

    def __call__(self, mask: int) -> State:
        pending = []
        m = mask
        while m not in self.cache:
            top = m.bit_length() - 1
            pending.append((m, top))
            m &= ~(1 << top)
        st = self.cache[m]
        for m, top in reversed(pending):
            st = self.po.moves[top].apply(st)
            self.cache[m] = st
        return st


def _segments_exhaustive(preds: list[int], limit: int, cap: int):
    n = len(preds)
    level = {0}
    seen = 1
    yield 0
    for _ in range(min(limit, n)):
        nxt = set()
        for d in level:
            for i in range(n):
                if not d >> i & 1 and preds[i] & ~d == 0:
                    nxt.add(d | 1 << i)
        seen += len(nxt)
        if seen > cap:
            raise OverflowError
        yield from sorted(nxt)
        level = nxt


def _segments_sampled(preds: list[int], n: int, seed: int):
    rng = random.Random(seed)
    size = len(preds)
    for _ in range(n):
        d = 0
        target = rng.randint(0, size)
        for _ in range(target):
            ready = [i for i in range(size) if not d >> i & 1 and preds[i] & ~d == 0]
            if not ready:
                break
            d |= 1 << rng.choice(ready)
        yield d


def check_po_run(po: PartialOrderRun, mode: Union[Exhaustive, Sampled] = Exhaustive()) -> CoherenceReport:
    """Check finite history, agent sequentiality and coherence.

    Coherence is checked on initial segments: for every maximal move ``m``
    of a segment ``M``, ``sigma(M)`` must equal ``m`` applied to
    ``sigma(M - {m})``.  When the run records its own states, ``sigma`` of
    each prefix ``M_i`` must also equal the observed ``S_i``.
    """
    rep = CoherenceReport()
    moves = po.moves
    n = len(moves)
    for m in moves:
        if m.read_index > m.write_index or m.read_index < 0:
            rep.finite_history = False
            rep.counterexample = {"move": m.id, "reason": "read after write"}
    preds = [0] * n
    for a in moves:
        for b in moves:
            if po.less(a, b):
                preds[b.id] |= 1 << a.id
    for a, b in itertools.combinations(moves, 2):
        if a.agent == b.agent and not (po.less(a, b) or po.less(b, a)):
            rep.sequentiality = False
            rep.counterexample = rep.counterexample or {
                "moves": [a.id, b.id], "reason": "moves of one agent are incomparable"
            }
    sigma = _Sigma(po)

    def check(mask: int) -> bool:
        st = sigma(mask)
        for i in range(n):
            if not mask >> i & 1:
                continue
            if any(mask >> j & 1 and preds[j] >> i & 1 for j in range(n)):
                continue  # i is not maximal
            rest = mask & ~(1 << i)
            try:
                alt = moves[i].apply(sigma(rest))
            except InconsistentUpdates:
                alt = None
            if alt != st:
                rep.coherence = False
                rep.counterexample = {
                    "segment": [j for j in range(n) if mask >> j & 1],
                    "move": i,
                    "reason": "sigma(M) differs from m applied to sigma(M - m)",
                }
                return False
        return True

    if isinstance(mode, Exhaustive):
        rep.mode = f"exhaustive({mode.limit})"
        try:
            for d in _segments_exhaustive(preds, mode.limit, mode.max_segments):
                rep.segments_checked += 1
                if not check(d):
                    break
        except OverflowError:
            msg = (f"more than {mode.max_segments} initial segments within size {mode.limit}; "
                   "falling back to sampling")
            warnings.warn(msg)
            rep.warnings.append(msg)
            mode = Sampled(1000, 0)
    if isinstance(mode, Sampled):
        rep.mode = rep.mode + "+sampled" if rep.mode else f"sampled({mode.n})"
        for d in _segments_sampled(preds, mode.n, mode.seed):
            rep.segments_checked += 1
            if not check(d):
                break
    if po.observed:
        for i, s_i in enumerate(po.observed):
            mask = sum(1 << m.id for m in moves if m.write_index < i)
            if _project_store(sigma(mask)) != _project_store(s_i):
                rep.observed_states = False
                rep.counterexample = rep.counterexample or {
                    "prefix": i, "reason": "sigma(M_i) differs from the observed state S_i"
                }
                break
    return rep


def _project_store(s: State) -> tuple:
    return s.canonical()


def commuting_pairs(po: PartialOrderRun) -> list[tuple[int, int]]:
    """Incomparable pairs whose application order matters (should be empty)."""
    bad = []
    sigma = _Sigma(po)
    preds = [0] * len(po.moves)
    for a in po.moves:
        for b in po.moves:
            if po.less(a, b):
                preds[b.id] |= 1 << a.id
    for a, b in itertools.combinations(po.moves, 2):
        if po.less(a, b) or po.less(b, a):
            continue
        base = _downset(preds, preds[a.id] | preds[b.id])
        s = sigma(base)
        if b.apply(a.apply(s)) != a.apply(b.apply(s)):
            bad.append((a.id, b.id))
    return bad


def _downset(preds: list[int], mask: int) -> int:
    out = mask
    changed = True
    while changed:
        changed = False
        for i in range(len(preds)):
            if out >> i & 1 and preds[i] & ~out:
                out |= preds[i]
                changed = True
    return out


# --- delegates -------------------------------------------------------------

ONESTEP_IN = "onestep_in"
ONESTEP_OUT = "onestep_out"


def onestep_name(rule: str) -> str:
    return f"OneStep_{rule}"


def ret_name(rule: str) -> str:
    return f"onestep_ret_{rule}"


def witness_terms(body) -> list:
    """Ground read terms of ``body`` in a stable order."""
    terms = [t for t in read_terms_of(body) if is_ground(t) and not isinstance(t, Const)]
    return sorted(terms, key=term_text)


def write_symbols(body) -> list[str]:
    out = set()
    for r in walk_rules(body):
        if isinstance(r, Assign):
            out.add(r.target.symbol)
        elif isinstance(r, Call) and r.output is not None:
            out.add(r.output.symbol)
    return sorted(out)


def delegate_transform(cp: ConcurrentProgram) -> Program:
    """Recursive program simulating ``cp`` with one-step delegates.

    Each base rule ``N`` keeps its parameters and output but its body becomes
    a call of ``OneStep_N``, passing the values of ``N``'s ground witness
    terms as ``[[0, t0], [1, t1], ...]``.  The delegate performs one step of
    ``N`` in its caller's ambient, reports the written symbols and sets its
    ``terminated`` flag.
    """
    prog = cp.program
    if any(prog.is_delegate(n) for n in prog.rules):
        raise TransformError("program already contains one-step delegates")
    if not cp.dynamic and any(count_calls(d.body) for d in prog.rules.values()):
        raise TransformError("base rules of a static system must be nd-seq rules without calls")
    rules: dict[str, RuleDecl] = {}
    for name, d in prog.rules.items():
        if name.startswith("OneStep_") or onestep_name(name) in prog.rules:
            raise TransformError(f"rule name {name} clashes with generated delegate names")
        pack = ListLit(tuple(ListLit((Const(i), t)) for i, t in enumerate(witness_terms(d.body))))
        rules[name] = RuleDecl(name, d.params, d.output,
                               Call(App(ret_name(name)), onestep_name(name), (pack,)))
    for name, d in prog.rules.items():
        outs = ListLit(tuple(Const(Sym(s)) for s in write_symbols(d.body)))
        body = Par((
            AmbCaller(d.body),
            Assign(App(ONESTEP_OUT), outs),
            Assign(App("terminated"), Const(True)),
        ))
        rules[onestep_name(name)] = RuleDecl(onestep_name(name), (ONESTEP_IN,), ONESTEP_OUT, body)
    return build_program(rules, prog.main, prog.shared, prog.observe, prog.agents)


class _Fixed(Policy):
    name = "eager"

    def __init__(self, agents, choices=None):
        self.agents = list(agents)
        self.choices = dict(choices or {})

    def select(self, eligible, rng, step, registry):
        missing = [a for a in self.agents if a not in eligible]
        if missing:
            raise ConfigError(f"eager schedule cannot fire {missing}: not eligible")
        return sorted(self.agents)

    def choice(self, agent, size, rng, step, registry):
        return self.choices.get(agent, 0)


def _delegate_noise(loc: Location) -> bool:
    return (
        (loc.ambient is not None and loc.ambient.ns == "d")
        or loc.symbol.startswith("onestep_")
        or loc.symbol == "terminated"
    )


def project_delegates(s: State) -> tuple:
    """Canonical state with delegate bookkeeping removed."""
    store = tuple(sorted(
        (l.key(), vkey(v)) for l, v in s.store.items() if not _delegate_noise(l)
    ))
    aliases = tuple(sorted(
        ((vkey(a), sym), l.key()) for (a, sym), l in s.aliases.items()
        if a.ns != "d" and not sym.startswith("onestep_")
    ))
    return store, aliases


def _calls_canon(calls: Iterable) -> list:
    return sorted(calls, key=dumps)


def _request_json(effect: Effect) -> list:
    return _calls_canon(
        [c.rule, [to_json(v) for v in c.args], None if c.output is None else c.output.to_json()]
        for c in effect.calls
    )


@dataclass
class EagerReport:
    steps: int = 0
    recursive_steps: int = 0
    mismatches: list = field(default_factory=list)
    concurrent_states: list = field(default_factory=list)
    recursive_states: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.mismatches


def eager_replay(cp: ConcurrentProgram, program: Program, inputs=None, policy: Policy | None = None,
                 seed: int = 0, max_steps: int = 100) -> EagerReport:
    """Replay a concurrent run of ``cp`` with the delegate program, eagerly.

    Concurrent step ``k`` becomes recursive steps ``2k+1`` (the selected
    agents call their delegates) and ``2k+2`` (all pending delegates fire,
    each choosing the move its caller made in the concurrent run).
    """
    crun, ctrace = run_concurrent(cp, inputs, policy, seed, max_steps)
    rrun = init_run(program, inputs, seed)
    rep = EagerReport()
    rep.concurrent_states.append(project_delegates(ctrace.states[0]))
    rep.recursive_states.append(project_delegates(rrun.state))
    for k, crec in enumerate(ctrace.steps):
        if crec.get("inconsistent"):
            break
        sel = [from_python(a) for a in crec["selected"]]
        rrun, _ = step(rrun, _Fixed(sel))
        pending = sorted(
            a for a in rrun.registry.eligible() if rrun.registry.agents[a].delegate
        )
        wanted = {from_python(m["agent"]): m for m in crec["moves"]}
        choices = {}
        for d in pending:
            caller = rrun.registry.caller(d)
            want = wanted[caller]
            want_ups = update_set_from_json(want["updates"])
            want_calls = _calls_canon(want["calls"])
            fam = agent_family(rrun, rrun.state, rrun.registry, d)
            for idx, e in enumerate(fam):
                ups = frozenset(u for u in e.updates if not _delegate_noise(u.loc))
                if ups == want_ups and _request_json(e) == want_calls:
                    choices[d] = idx
                    break
            else:
                rep.mismatches.append({"step": k, "agent": repr(caller), "reason": "no matching delegate move"})
                return rep
        rrun, _ = step(rrun, _Fixed(pending, choices))
        rep.steps += 1
        rep.recursive_steps = rrun.step_index
        c_state = project_delegates(ctrace.states[k + 1])
        r_state = project_delegates(rrun.state)
        rep.concurrent_states.append(c_state)
        rep.recursive_states.append(r_state)
        if c_state != r_state:
            rep.mismatches.append({"step": k, "reason": "states differ"})
            return rep
    return rep


# --- static systems --------------------------------------------------------


def _check_static(cp: ConcurrentProgram, what: str) -> None:
    prog = cp.program
    if cp.dynamic or not prog.agents:
        raise TransformError(f"{what} requires a static finite system of agents without calls")
    for name, rule in prog.agents:
        body = prog.rules[rule].body
        for r in walk_rules(body):
            if isinstance(r, (Call, AmbCaller)):
                raise TransformError(f"{what}: rule {rule} of agent {name} creates or delegates agents")
        local = sorted(s for s in symbols_of(body) if s not in prog.shared)
        if local:
            raise TransformError(
                f"{what}: rule {rule} uses agent-local symbols {local}; static systems must "
                "communicate through shared symbols"
            )
        for r in walk_rules(body):
            for t in rule_terms(r):
                if any(isinstance(s, RegPred) for s in walk_terms(t)):
                    raise TransformError(f"{what}: rule {rule} reads the agent registry")


def flatten_static(cp: ConcurrentProgram, name: str = "flattened") -> Program:
    """One nd-seq rule choosing a non-empty subset of agents to fire together."""
    _check_static(cp, "flatten")
    prog = cp.program
    bodies = [prog.rules[rule].body for _, rule in prog.agents]
    n = len(bodies)
    branches = []
    for mask in range(1, 1 << n):
        branches.append(Par(tuple(bodies[j] for j in range(n) if mask >> j & 1)))
    decl = RuleDecl(name, (), None, Choose(tuple(branches)))
    return build_program({name: decl}, name, prog.shared, prog.observe)


@dataclass
class RunSet:
    runs: frozenset
    complete: bool = True
    terminated_branches: int = 0

    def __eq__(self, other: object) -> bool:
        return isinstance(other, RunSet) and self.runs == other.runs


def _successors_program(program: Program):
    run = init_run(program)
    reg, a0 = run.registry, run.main_agent
    body = program.rules[program.main].body
    if count_calls(body):
        raise TransformError("enumerate_runs needs an nd-seq program without calls")

    def succ(s: State):
        nxt, stop = [], False
        for e in family_sorted(delta(body, s, agent_env(reg, a0))):
            if clashes(e.updates):
                stop = True
            else:
                nxt.append(apply_updates(s, e.updates))
        return nxt, stop

    return run.state, succ


def _successors_static(cp: ConcurrentProgram):
    run = init_run(cp.program)
    reg = run.registry
    agents = list(reg.roots)

    def succ(s: State):
        fams = [family_sorted(agent_family(cp.program, s, reg, a)) for a in agents]
        nxt, stop = [], False
        for mask in range(1, 1 << len(agents)):
            chosen = [fams[j] for j in range(len(agents)) if mask >> j & 1]
            for combo in itertools.product(*chosen):
                ups = frozenset().union(*(e.updates for e in combo))
                if clashes(ups):
                    stop = True
                else:
                    nxt.append(apply_updates(s, ups))
        return nxt, stop

    return run.state, succ


def enumerate_runs(target: Union[Program, ConcurrentProgram], depth: int,
                   max_runs: int = 200_000) -> RunSet:
    """All run prefixes of length ``depth`` as canonical state sequences.

    A branch whose step would apply an inconsistent update set ends in the
    state it had reached.  For a static concurrent system a step fires any
    non-empty subset of agents, each with any member of its family.
    """
    if depth < 0:
        raise ConfigError("depth must be non-negative")
    if isinstance(target, ConcurrentProgram):
        _check_static(target, "enumerate_runs")
        s0, succ = _successors_static(target)
    else:
        s0, succ = _successors_program(target)
    states = {s0.canonical(): s0}
    cache: dict[tuple, tuple] = {}
    frontier = {(s0.canonical(),)}
    ended: set = set()
    complete = True
    for _ in range(depth):
        nxt = set()
        for seq in frontier:
            key = seq[-1]
            if key not in cache:
                ss, stop = succ(states[key])
                keys = []
                for st in ss:
                    c = st.canonical()
                    states.setdefault(c, st)
                    keys.append(c)
                cache[key] = (tuple(dict.fromkeys(keys)), stop)
            keys, stop = cache[key]
            if stop:
                ended.add(seq)
            for c in keys:
                nxt.add(seq + (c,))
        frontier = nxt
        if len(frontier) + len(ended) > max_runs:
            complete = False
            break
    return RunSet(frozenset(ended | frontier), complete, len(ended))
