"""Recursive runs: agent registry, scheduling, termination and traces."""
from __future__ import annotations

import hashlib
import json
import random
from dataclasses import dataclass, field, replace
from typing import Any, Callable, Iterable, Mapping, Optional, Sequence

from .printer import pretty_print
from .semantics import Effect, Env, call_updates, delta, family_sorted
from .state import (
    InconsistentUpdates,
    Location,
    State,
    Update,
    apply_updates,
    clashes,
    dumps,
    state_digest,
    update_set_from_json,
    update_set_to_json,
)
from .syntax import Program
from .values import AgentId, from_python, to_json, vkey

TERMINATED = "terminated"


class ConfigError(ValueError):
    pass


class ContractViolation(RuntimeError):
    """A caller of the engine broke a documented precondition."""


class SchedulerContractViolation(ContractViolation):
    pass


# --- registry --------------------------------------------------------------


@dataclass(frozen=True)
class AgentInfo:
    rule: str
    caller: Optional[AgentId] = None
    children: tuple = ()
    terminated: bool = False
    delegate: bool = False
    name: Optional[str] = None


@dataclass(frozen=True)
class Registry:
    """Call forest of a run.  Terminated agents stay registered."""

    agents: Mapping[AgentId, AgentInfo] = field(default_factory=dict)
    roots: tuple = ()
    next_id: int = 0
    next_delegate: int = 0
    alive: frozenset = None  # derived from ``agents`` when omitted

    def __post_init__(self) -> None:
        if self.alive is None:
            live = frozenset(a for a, i in self.agents.items() if not i.terminated)
            object.__setattr__(self, "alive", live)

    def info(self, a: AgentId) -> AgentInfo:
        try:
            return self.agents[a]
        except KeyError:
            raise ContractViolation(f"unknown agent {a!r}") from None

    def active(self, a: AgentId) -> bool:
        return not self.info(a).terminated

    def waiting(self, a: AgentId) -> bool:
        alive = self.alive
        return any(c in alive for c in self.info(a).children)

    def waiting_concurrent(self, a: AgentId) -> bool:
        """Waiting on ordinary callees only; one-step delegates do not count."""
        alive = self.alive
        return any(c in alive and not self.agents[c].delegate for c in self.info(a).children)

    def caller(self, a: AgentId) -> Optional[AgentId]:
        return self.info(a).caller

    def live(self) -> list[AgentId]:
        return sorted(self.alive)

    def eligible(self) -> list[AgentId]:
        return [a for a in self.live() if not self.waiting(a)]

    def any_eligible(self) -> bool:
        return any(not self.waiting(a) for a in self.alive)

    def by_name(self, name: str) -> AgentId:
        for a, i in self.agents.items():
            if i.name == name:
                return a
        raise ContractViolation(f"no agent named {name!r}")

    def add(self, rule: str, caller: Optional[AgentId], delegate: bool = False,
            name: Optional[str] = None) -> tuple["Registry", AgentId]:
        agents = dict(self.agents)
        if delegate:
            a = AgentId(self.next_delegate, "d")
            nid, nd = self.next_id, self.next_delegate + 1
        else:
            a = AgentId(self.next_id)
            nid, nd = self.next_id + 1, self.next_delegate
        agents[a] = AgentInfo(rule, caller, (), False, delegate, name)
        roots = self.roots
        if caller is None:
            roots = roots + (a,)
        else:
            p = agents[caller]
            agents[caller] = replace(p, children=p.children + (a,))
        return Registry(agents, roots, nid, nd, self.alive | {a}), a

    def terminate(self, a: AgentId) -> "Registry":
        agents = dict(self.agents)
        agents[a] = replace(agents[a], terminated=True)
        return Registry(agents, self.roots, self.next_id, self.next_delegate, self.alive - {a})

    def to_json(self) -> list:
        return [
            {
                "agent": to_json(a),
                "rule": i.rule,
                "caller": None if i.caller is None else to_json(i.caller),
                "terminated": i.terminated,
                "delegate": i.delegate,
                "name": i.name,
            }
            for a, i in sorted(self.agents.items())
        ]


# --- policies --------------------------------------------------------------


class Policy:
    name = "policy"

    def select(self, eligible: list[AgentId], rng: random.Random, step: int,
               registry: Registry) -> Optional[list[AgentId]]:
        raise NotImplementedError

    def choice(self, agent: AgentId, size: int, rng: random.Random, step: int,
               registry: Registry) -> int:
        return rng.randrange(size) if size > 1 else 0

    def describe(self) -> dict:
        return {"name": self.name}


class SynchronousAll(Policy):
    name = "synchronous"

    def select(self, eligible, rng, step, registry):
        return list(eligible)


class InterleavingRandom(Policy):
    name = "interleaving"

    def select(self, eligible, rng, step, registry):
        return [rng.choice(eligible)] if eligible else []


class RandomSubset(Policy):
    name = "random-subset"

    def select(self, eligible, rng, step, registry):
        if not eligible:
            return []
        picked = [a for a in eligible if rng.random() < 0.5]
        return picked or [rng.choice(eligible)]


def _agent_ref(ref: Any, registry: Registry) -> AgentId:
    if isinstance(ref, AgentId):
        return ref
    if isinstance(ref, int):
        return AgentId(ref)
    if isinstance(ref, str):
        return registry.by_name(ref)
    if isinstance(ref, dict):
        return from_python(ref)
    raise ContractViolation(f"bad agent reference {ref!r}")


class Script(Policy):
    """Explicit agent sets per step, with optional pinned family indices.

    ``steps[i]`` lists agents by id, :class:`AgentId` or name; ``choices[i]``
    optionally maps the same references to indices into the sorted family.
    The run stops when the script is exhausted.
    """

    name = "script"

    def __init__(self, steps: Sequence[Iterable[Any]], choices: Sequence[Mapping] | None = None):
        self.steps = [list(s) for s in steps]
        self.choices = list(choices or [])

    def select(self, eligible, rng, step, registry):
        if step >= len(self.steps):
            return None
        chosen = sorted({_agent_ref(r, registry) for r in self.steps[step]})
        bad = [a for a in chosen if a not in eligible]
        if bad:
            raise SchedulerContractViolation(
                f"step {step}: scheduled agents not active-and-not-waiting: {bad}"
            )
        return chosen

    def choice(self, agent, size, rng, step, registry):
        if step < len(self.choices):
            for ref, idx in self.choices[step].items():
                if _agent_ref(ref, registry) == agent:
                    if not 0 <= idx < size:
                        raise SchedulerContractViolation(f"choice {idx} out of range for {agent!r}")
                    return idx
        return super().choice(agent, size, rng, step, registry)

    def describe(self) -> dict:
        return {"name": self.name, "steps": len(self.steps)}


POLICIES = {p.name: p for p in (SynchronousAll, InterleavingRandom, RandomSubset)}


def make_policy(name: str) -> Policy:
    try:
        return POLICIES[name]()
    except KeyError:
        raise ConfigError(f"unknown policy {name!r}; one of {sorted(POLICIES)}") from None


# --- runs ------------------------------------------------------------------


@dataclass(frozen=True)
class RunState:
    program: Program
    state: State
    registry: Registry
    step_index: int = 0
    status: str = "running"  # running | halted | quiescent
    reason: str = ""
    rng_state: Any = None
    streams: Mapping[str, tuple] = field(default_factory=dict)
    on_inconsistency: str = "halt"
    seed: int = 0
    history: tuple = ()  # ((index, state), ...) of recent states, for stale reads
    history_len: int = 1
    last_write: Mapping[AgentId, int] = field(default_factory=dict)
    settle_cache: Mapping[AgentId, Any] = field(default_factory=dict, compare=False, repr=False)

    @property
    def main_agent(self) -> AgentId:
        return self.registry.roots[0]

    def output(self, symbol: str, agent: AgentId | None = None) -> Any:
        a = self.main_agent if agent is None else agent
        amb = None if symbol in self.program.shared else a
        return self.state.lookup(amb, symbol)

    def observed(self) -> tuple:
        if self.program.observe:
            return self.program.observe
        decl = self.program.rules.get(self.program.main) if self.program.main else None
        return (decl.output,) if decl is not None and decl.output else ()


def program_hash(program: Program) -> str:
    return hashlib.sha256(pretty_print(program).encode()).hexdigest()


def init_run(
    program: Program,
    inputs: Mapping[str, Any] | None = None,
    seed: int = 0,
    on_inconsistency: str = "halt",
) -> RunState:
    """Initial state: the root agent(s) registered, inputs in the root ambient."""
    if on_inconsistency not in ("halt", "skip"):
        raise ConfigError(f"on_inconsistency must be halt or skip, not {on_inconsistency!r}")
    inputs = dict(inputs or {})
    reg = Registry()
    store: dict[Location, Any] = {}
    if program.agents:
        for name, rule in program.agents:
            reg, _ = reg.add(rule, None, program.is_delegate(rule), name)
        for k, v in inputs.items():
            if k not in program.shared:
                raise ConfigError(f"{k} is not a shared symbol of this system")
            store[Location(None, k, ())] = from_python(v)
    else:
        if program.main is None:
            raise ConfigError("program has no main rule")
        reg, a0 = reg.add(program.main, None, False, "main")
        params = program.rules[program.main].params
        for k, v in inputs.items():
            if k not in params:
                raise ConfigError(f"{k} is not an input symbol of {program.main}")
            store[Location(a0, k, ())] = from_python(v)
    state = State(store, {}, program.signature)
    return RunState(
        program, state, reg, 0, "running", "", random.Random(seed).getstate(), {},
        on_inconsistency, seed, history=((0, state),),
    )


def active(agent: AgentId, run: RunState) -> bool:
    return run.registry.active(agent)


def waiting(agent: AgentId, run: RunState) -> bool:
    return run.registry.waiting(agent)


def agent_env(registry: Registry, agent: AgentId) -> Env:
    return Env(agent, {}, registry, agent)


def agent_family(run_or_prog, state: State, registry: Registry, agent: AgentId) -> list[Effect]:
    program = run_or_prog.program if isinstance(run_or_prog, RunState) else run_or_prog
    body = program.rules[registry.info(agent).rule].body
    return family_sorted(delta(body, state, agent_env(registry, agent)))


@dataclass
class Move:
    agent: AgentId
    effect: Effect
    choice: int
    family_size: int
    read_index: int


class _Reads:
    """State view that records which locations a family computation reads."""

    def __init__(self, state: State):
        self._state = state
        self.signature = state.signature
        self.aliases = state.aliases
        self.locs: set = set()
        self.scanned = False

    def get(self, loc: Location):
        self.locs.add(loc)
        return self._state.get(loc)

    def resolve(self, ambient, symbol, args=()):
        return self._state.resolve(ambient, symbol, args)

    def lookup(self, ambient, symbol, args=()):
        return self.get(self.resolve(ambient, symbol, args))

    @property
    def store(self):
        self.scanned = True
        return self._state.store


def settle(program: Program, state: State, registry: Registry,
           written: Optional[set] = None, cache: Optional[dict] = None) -> tuple[Registry, list]:
    """Recompute termination after a commit.

    An agent terminates when its ``terminated`` flag is true, or when it has
    no active callee and every member of its family is trivial.

    ``cache`` maps agents already known to have a non-trivial family to
    ``(reads, family)``: the locations that family depended on (``None``
    after a store scan) and the family itself (``None`` when judged through a
    delegate).  Entries touched by ``written`` are dropped; the rest are
    skipped.  For a live, non-waiting agent the registry predicates are
    constant, so the family is a function of the recorded reads alone.
    """
    done: list[AgentId] = []
    if cache is not None and written is not None:
        for a in [a for a, (reads, _) in cache.items()
                  if reads is None or not reads.isdisjoint(written)
                  or a not in registry.alive or registry.waiting(a)]:
            del cache[a]
        check_flags = any(loc.symbol == TERMINATED for loc in written)
    else:
        cache = {}
        check_flags = True
    if check_flags:
        for a in registry.live():
            if state.lookup(a, TERMINATED) is True:
                registry = registry.terminate(a)
                cache.pop(a, None)
                done.append(a)
    # a termination can only free the terminated agent's caller
    pending = sorted(a for a in registry.alive if a not in cache)
    # pending delegates may still write what a delegate-judged caller reads
    in_flight = any(registry.agents[a].delegate for a in registry.alive)
    while pending:
        freed = set()
        for a in pending:
            info = registry.agents[a]
            if info.terminated or info.delegate or a in cache or registry.waiting(a):
                continue
            body, via = program.effective_body(info.rule)
            if via and in_flight:
                continue
            view = _Reads(state)
            fam = delta(body, view, agent_env(registry, a))
            if all(e.is_trivial_in(view) for e in fam):
                registry = registry.terminate(a)
                done.append(a)
                if info.caller is not None and info.caller in registry.alive:
                    freed.add(info.caller)
            else:
                cache[a] = (None if view.scanned else frozenset(view.locs), None if via else fam)
        pending = sorted(freed)
    return registry, sorted(done)


def _loc_json(loc: Location) -> dict:
    return loc.to_json()


def commit(run: RunState, selected: list[AgentId], moves: list[Move],
           rng: random.Random) -> tuple[RunState, dict]:
    """Apply the chosen effects of one step atomically and record it."""
    program, state, reg = run.program, run.state, run.registry
    i = run.step_index
    combined = set()
    for m in moves:
        combined |= m.effect.updates
    record: dict[str, Any] = {
        "kind": "step",
        "step": i,
        "selected": [to_json(a) for a in selected],
        "moves": [],
    }
    bad = clashes(combined)
    requests = sorted(
        ((m.agent, c) for m in moves for c in m.effect.calls),
        key=lambda mc: (vkey(mc[1].caller), mc[1].key()),
    )
    spawned: dict[AgentId, list] = {m.agent: [] for m in moves}
    aliases: dict = {}
    inits: set = set()
    if not bad:
        for issuer, req in requests:
            decl = program.rules[req.rule]
            deleg = program.is_delegate(req.rule)
            reg, c = reg.add(req.rule, req.caller, deleg)
            ups, al = call_updates(req, decl.params, decl.output, c)
            if deleg:
                ups = ups | {Update(Location(c, TERMINATED, ()), False)}
            inits |= ups
            aliases.update(al)
            spawned[issuer].append(
                {
                    "agent": to_json(c),
                    "rule": req.rule,
                    "caller": None if req.caller is None else to_json(req.caller),
                    "delegate": deleg,
                    "inits": update_set_to_json(ups),
                    "alias": [[decl.output, al[(c, decl.output)].to_json()]] if al else [],
                }
            )
    for m in moves:
        record["moves"].append(
            {
                "agent": to_json(m.agent),
                "read_index": m.read_index,
                "write_index": i,
                "choice": m.choice,
                "family_size": m.family_size,
                "updates": update_set_to_json(m.effect.updates),
                "calls": [
                    [c.rule, [to_json(v) for v in c.args],
                     None if c.output is None else c.output.to_json()]
                    for c in m.effect.calls
                ],
                "spawned": spawned[m.agent],
            }
        )
    record["combined"] = update_set_to_json(combined | inits)
    record["inconsistent"] = bool(bad)
    record["clashes"] = [l.to_json() for l in bad]
    status, reason = run.status, run.reason
    streams = dict(run.streams)
    streamed: dict[str, list] = {}
    last_write = dict(run.last_write)
    if bad:
        if run.on_inconsistency == "halt":
            status, reason = "halted", str(InconsistentUpdates(bad))
        new_state = state
        done: list = []
    else:
        new_state = apply_updates(state.with_aliases(aliases), combined | inits)
        for u in sorted(combined):
            if u.loc.symbol in program.observe:
                streams[u.loc.symbol] = streams.get(u.loc.symbol, ()) + (u.val,)
                streamed.setdefault(u.loc.symbol, []).append(to_json(u.val))
        for m in moves:
            last_write[m.agent] = i
            for sp in spawned[m.agent]:
                last_write[from_python(sp["agent"])] = i
        cache = dict(run.settle_cache)
        written = {u.loc for u in combined} | {u.loc for u in inits}
        reg, done = settle(program, new_state, reg, written, cache)
    record["terminated"] = [to_json(a) for a in done]
    if status == "running" and not reg.any_eligible():
        status = "quiescent"
    record["status"] = status
    record["streamed"] = streamed
    record["state_digest"] = state_digest(new_state)
    history = (run.history + ((i + 1, new_state),))[-max(1, run.history_len):]
    out = replace(
        run,
        state=new_state,
        registry=reg,
        step_index=i + 1,
        status=status,
        reason=reason,
        rng_state=rng.getstate(),
        streams=streams,
        history=history,
        last_write=last_write,
        settle_cache=cache if not bad else run.settle_cache,
    )
    return out, record


def state_at(run: RunState, j: int) -> State:
    for idx, st in run.history:
        if idx == j:
            return st
    if j == run.step_index:
        return run.state
    raise ContractViolation(f"state {j} is no longer retained (history_len={run.history_len})")


Eligibility = Callable[[RunState], list]


def recursive_eligible(run: RunState) -> list[AgentId]:
    return run.registry.eligible()


def step(
    run: RunState,
    policy: Policy,
    eligible: Eligibility = recursive_eligible,
    read_state: Callable[[RunState, AgentId, random.Random], int] | None = None,
) -> tuple[RunState, Optional[dict]]:
    """One run step; returns the new run and its trace record.

    A run that is no longer running, or whose script is exhausted, is
    returned unchanged with no record.
    """
    if run.status != "running":
        return run, None
    rng = random.Random(0)
    rng.setstate(run.rng_state)
    cands = eligible(run)
    if not cands:
        return replace(run, status="quiescent"), None
    selected = policy.select(cands, rng, run.step_index, run.registry)
    if selected is None:
        return run, None
    for a in selected:
        if a not in cands:
            raise SchedulerContractViolation(f"agent {a!r} is not eligible at step {run.step_index}")
    moves = []
    for a in selected:
        j = run.step_index if read_state is None else read_state(run, a, rng)
        cached = run.settle_cache.get(a) if j == run.step_index else None
        if cached is not None and cached[1] is not None:
            fam = family_sorted(cached[1])
        else:
            fam = agent_family(run, state_at(run, j), run.registry, a)
        k = policy.choice(a, len(fam), rng, run.step_index, run.registry)
        moves.append(Move(a, fam[k], k, len(fam), j))
    return commit(run, selected, moves, rng)


@dataclass
class Trace:
    header: dict
    steps: list = field(default_factory=list)
    states: list = field(default_factory=list)  # in-memory only

    def lines(self) -> list[str]:
        return [dumps(self.header)] + [dumps(r) for r in self.steps]

    def dump(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            for line in self.lines():
                fh.write(line + "\n")

    @classmethod
    def load(cls, path) -> "Trace":
        with open(path, encoding="utf-8") as fh:
            rows = [json.loads(l) for l in fh if l.strip()]
        return cls.from_rows(rows)

    @classmethod
    def from_rows(cls, rows: list) -> "Trace":
        if not rows or rows[0].get("kind") != "header" or rows[0].get("format") != 1:
            raise ValueError("trace must start with a format-1 header record")
        for r in rows[1:]:
            if r.get("kind") != "step" or "moves" not in r:
                raise ValueError(f"malformed step record: {str(r)[:80]}")
        return cls(rows[0], rows[1:])


def trace_states(trace: Trace) -> list[State]:
    """States S_0, S_1, ... rebuilt from a trace's records."""
    st = State.from_json(trace.header["initial_state"])
    out = [st]
    for rec in trace.steps:
        if not rec.get("inconsistent"):
            aliases = {}
            for mv in rec["moves"]:
                for sp in mv.get("spawned", []):
                    for sym, loc in sp.get("alias", []):
                        aliases[(from_python(sp["agent"]), sym)] = Location.from_json(loc)
            st = apply_updates(st.with_aliases(aliases), update_set_from_json(rec["combined"]))
        out.append(st)
    return out


def trace_header(run: RunState, policy: Policy) -> dict:
    return {
        "kind": "header",
        "format": 1,
        "program_hash": program_hash(run.program),
        "seed": run.seed,
        "policy": policy.describe(),
        "on_inconsistency": run.on_inconsistency,
        "branching_bound": run.program.branching_bound,
        "agents": run.registry.to_json(),
        "initial_state": run.state.to_json(),
    }


def run_to_quiescence(
    run: RunState, policy: Policy, max_steps: int = 1000, **step_kw
) -> tuple[RunState, Trace]:
    """Step until quiescent, halted, script exhausted or out of budget."""
    if max_steps <= 0:
        raise ConfigError("max_steps must be positive")
    trace = Trace(trace_header(run, policy), [], [run.state])
    for _ in range(max_steps):
        run, rec = step(run, policy, **step_kw)
        if rec is None:
            break
        trace.steps.append(rec)
        trace.states.append(run.state)
        if run.status != "running":
            break
    return run, trace


def run_program(program: Program, inputs=None, policy: Policy | None = None, seed: int = 0,
                max_steps: int = 1000, on_inconsistency: str = "halt") -> tuple[RunState, Trace]:
    run = init_run(program, inputs, seed, on_inconsistency)
    return run_to_quiescence(run, policy or SynchronousAll(), max_steps)


def replay(program: Program, trace: Trace, inputs=None) -> tuple[RunState, Trace]:
    """Re-execute a trace's selections and choices."""
    steps = [[from_python(a) for a in r["selected"]] for r in trace.steps]
    choices = [{from_python(m["agent"]): m["choice"] for m in r["moves"]} for r in trace.steps]
    run = init_run(program, inputs, trace.header.get("seed", 0),
                   trace.header.get("on_inconsistency", "halt"))
    s0 = State.from_json(trace.header["initial_state"], program.signature)
    run = replace(run, state=s0, history=((0, s0),))
    return run_to_quiescence(run, Script(steps, choices), max(1, len(steps)))


# --- postulate assertions --------------------------------------------------


@dataclass(frozen=True)
class Violation:
    step: int
    kind: str
    agent: Any
    detail: str

    def to_json(self) -> dict:
        return {"step": self.step, "kind": self.kind, "agent": self.agent, "detail": self.detail}


@dataclass
class AssertionReport:
    violations: list

    @property
    def ok(self) -> bool:
        return not self.violations

    def kinds(self) -> list[str]:
        return [v.kind for v in self.violations]

    def to_json(self) -> dict:
        return {"format": 1, "ok": self.ok, "violations": [v.to_json() for v in self.violations]}


def assert_postulates(trace: Trace) -> AssertionReport:
    """Check call-step discipline over a recorded trace.

    Per step: no selected agent is terminated, nor waiting unless the trace
    was recorded under concurrent semantics; every update of a
    move lies in the mover's ambient, in a shared location, at the mover's
    output alias, or (for a one-step delegate) in its caller's space; callee
    inputs are written only when the callee is spawned; a move spawns at
    most the static branching bound of callees.
    """
    out: list[Violation] = []
    m_bound = trace.header.get("branching_bound", 1)
    callers_wait = trace.header.get("semantics") != "concurrent"
    info: dict[tuple, dict] = {}
    alias: dict[tuple, set] = {}

    def k(a) -> tuple:
        return vkey(from_python(a))

    for a in trace.header.get("agents", []):
        info[k(a["agent"])] = {
            "caller": a["caller"], "children": [], "terminated": a["terminated"],
            "delegate": a["delegate"],
        }
    for a in trace.header.get("agents", []):
        if a["caller"] is not None:
            info[k(a["caller"])]["children"].append(k(a["agent"]))

    def is_active(key) -> bool:
        return key in info and not info[key]["terminated"]

    def is_waiting(key) -> bool:
        return any(is_active(c) for c in info[key]["children"])

    def descendant(key, of) -> bool:
        seen = list(info.get(of, {}).get("children", []))
        while seen:
            c = seen.pop()
            if c == key:
                return True
            seen.extend(info.get(c, {}).get("children", []))
        return False

    def allowed(mover, loc: Location) -> Optional[str]:
        if loc.ambient is None:
            return None
        amb = vkey(loc.ambient)
        if amb == mover or loc.key() in alias.get(mover, set()):
            return None
        meta = info.get(mover, {})
        if meta.get("delegate") and meta.get("caller") is not None:
            ck = k(meta["caller"])
            if amb == ck or loc.key() in alias.get(ck, set()):
                return None
        if descendant(amb, mover):
            return "caller-writes-callee-local"
        return "foreign-ambient-write"

    for rec in trace.steps:
        i = rec["step"]
        for a in rec["selected"]:
            key = k(a)
            if key not in info:
                out.append(Violation(i, "unknown-agent", a, "selected agent was never created"))
            elif not is_active(key):
                out.append(Violation(i, "terminated-agent-stepped", a, "agent already terminated"))
            elif callers_wait and is_waiting(key):
                out.append(Violation(i, "waiting-agent-stepped", a, "agent stepped while a callee is active"))
        for mv in rec["moves"]:
            mover = k(mv["agent"])
            for u in mv["updates"]:
                loc = Location.from_json(u[0])
                kind = allowed(mover, loc)
                if kind:
                    out.append(Violation(i, kind, mv["agent"], f"update of {loc!r}"))
            if len(mv["spawned"]) > m_bound:
                out.append(
                    Violation(i, "branching", mv["agent"],
                              f"{len(mv['spawned'])} callees in one step, bound is {m_bound}")
                )
        if rec.get("inconsistent"):
            continue
        for mv in rec["moves"]:
            for sp in mv["spawned"]:
                c = k(sp["agent"])
                caller = sp["caller"]
                info[c] = {"caller": caller, "children": [], "terminated": False,
                           "delegate": sp.get("delegate", False)}
                if caller is not None:
                    info.setdefault(k(caller), {"caller": None, "children": [], "terminated": False,
                                               "delegate": False})["children"].append(c)
                for _sym, loc in sp.get("alias", []):
                    alias.setdefault(c, set()).add(Location.from_json(loc).key())
                for u in sp["inits"]:
                    loc = Location.from_json(u[0])
                    if loc.ambient is None or vkey(loc.ambient) != c:
                        out.append(Violation(i, "foreign-ambient-write", mv["agent"],
                                             f"call initialisation of {loc!r}"))
        for a in rec.get("terminated", []):
            if k(a) in info:
                info[k(a)]["terminated"] = True
    return AssertionReport(out)
