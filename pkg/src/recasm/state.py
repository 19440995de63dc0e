"""Signatures, locations, states, update sets and isomorphisms."""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from typing import Any, Iterable, Iterator, Mapping

from .values import (
    BACKGROUND,
    UNDEF,
    AgentId,
    Sym,
    Value,
    from_python,
    same,
    to_json,
    vkey,
)

KINDS = ("input", "local", "output", "shared")


class SignatureError(ValueError):
    pass


@dataclass(frozen=True)
class Signature:
    """Function symbols with arity and kind.

    Kinds ``input``/``local``/``output`` partition the program symbols; ``shared``
    marks ambient-free symbols used by static concurrent systems.
    """

    symbols: Mapping[str, tuple[int, str]] = field(default_factory=dict)

    def __post_init__(self) -> None:
        for name, (arity, kind) in self.symbols.items():
            if name in BACKGROUND:
                raise SignatureError(f"{name} is a background operation")
            if kind not in KINDS:
                raise SignatureError(f"unknown kind {kind!r} for {name}")
            if arity < 0:
                raise SignatureError(f"negative arity for {name}")

    def arity(self, name: str) -> int:
        return self.symbols[name][0]

    def kind(self, name: str) -> str:
        return self.symbols[name][1]

    def __contains__(self, name: object) -> bool:
        return name in self.symbols

    def of_kind(self, kind: str) -> frozenset[str]:
        return frozenset(n for n, (_, k) in self.symbols.items() if k == kind)

    @property
    def shared(self) -> frozenset[str]:
        out = self.__dict__.get("_shared")
        if out is None:
            out = self.of_kind("shared")
            object.__setattr__(self, "_shared", out)
        return out


@dataclass(frozen=True, eq=False)
class Location:
    ambient: AgentId | None
    symbol: str
    args: tuple = ()

    def __post_init__(self) -> None:
        amb = None if self.ambient is None else vkey(self.ambient)
        k = (amb is None, amb or (), self.symbol, tuple(vkey(a) for a in self.args))
        object.__setattr__(self, "_key", k)
        object.__setattr__(self, "_hash", hash(k))

    def key(self) -> tuple:
        return self._key

    def __eq__(self, other: object) -> bool:
        return isinstance(other, Location) and self._key == other._key

    def __hash__(self) -> int:
        return self._hash

    def __lt__(self, other: "Location") -> bool:
        return self.key() < other.key()

    def __repr__(self) -> str:
        from .values import show

        args = ", ".join(show(a) for a in self.args)
        where = "" if self.ambient is None else f"{self.ambient!r}."
        return f"{where}{self.symbol}({args})"

    def to_json(self) -> dict:
        return {
            "ambient": None if self.ambient is None else to_json(self.ambient),
            "symbol": self.symbol,
            "args": [to_json(a) for a in self.args],
        }

    @classmethod
    def from_json(cls, obj: Mapping[str, Any]) -> "Location":
        amb = obj.get("ambient")
        return cls(
            None if amb is None else from_python(amb),
            obj["symbol"],
            tuple(from_python(a) for a in obj.get("args", [])),
        )


@dataclass(frozen=True, eq=False)
class Update:
    loc: Location
    val: Value

    def __post_init__(self) -> None:
        k = (self.loc.key(), vkey(self.val))
        object.__setattr__(self, "_key", k)
        object.__setattr__(self, "_hash", hash(k))

    def key(self) -> tuple:
        return self._key

    def __eq__(self, other: object) -> bool:
        return isinstance(other, Update) and self._key == other._key

    def __hash__(self) -> int:
        return self._hash

    def __lt__(self, other: "Update") -> bool:
        return self.key() < other.key()

    def __repr__(self) -> str:
        from .values import show

        return f"{self.loc!r} := {show(self.val)}"

    def to_json(self) -> list:
        return [self.loc.to_json(), to_json(self.val)]

    @classmethod
    def from_json(cls, obj: list) -> "Update":
        return cls(Location.from_json(obj[0]), from_python(obj[1]))


_NULLARY: dict = {}


def nullary(ambient: AgentId | None, symbol: str) -> Location:
    """Interned ``Location(ambient, symbol, ())``."""
    key = (ambient, symbol)
    loc = _NULLARY.get(key)
    if loc is None:
        if len(_NULLARY) > 200_000:
            _NULLARY.clear()
        loc = _NULLARY[key] = Location(ambient, symbol, ())
    return loc


UpdateSet = frozenset  # frozenset[Update]


def update_set(pairs: Iterable[tuple[Location, Value]] | Iterable[Update]) -> frozenset:
    out = []
    for p in pairs:
        out.append(p if isinstance(p, Update) else Update(p[0], p[1]))
    return frozenset(out)


def clashes(delta: Iterable[Update]) -> list[Location]:
    """Locations receiving two different values in ``delta``."""
    seen: dict[Location, tuple] = {}
    bad: set[Location] = set()
    for u in delta:
        k = vkey(u.val)
        if u.loc in seen and seen[u.loc] != k:
            bad.add(u.loc)
        seen.setdefault(u.loc, k)
    return sorted(bad)


def is_consistent(delta: Iterable[Update]) -> bool:
    return not clashes(delta)


class InconsistentUpdates(Exception):
    """Raised when an inconsistent update set is applied under the halt policy."""

    def __init__(self, locations: list[Location]):
        self.locations = locations
        super().__init__("inconsistent update set at " + ", ".join(map(repr, locations)))


@dataclass(frozen=True, eq=False)
class State:
    """A sparse structure: absent locations read ``UNDEF``.

    ``aliases`` maps ``(agent, symbol)`` to the canonical location the symbol
    denotes inside that agent's ambient (the output slot of a callee).
    """

    store: Mapping[Location, Value] = field(default_factory=dict)
    aliases: Mapping[tuple[AgentId, str], Location] = field(default_factory=dict)
    signature: Signature = field(default_factory=Signature)

    def __post_init__(self) -> None:
        if any(v is UNDEF for v in self.store.values()):
            object.__setattr__(
                self, "store", {l: v for l, v in self.store.items() if v is not UNDEF}
            )

    @classmethod
    def _trusted(cls, store, aliases, signature) -> "State":
        """Construct without the undef scan; ``store`` must hold no undef."""
        out = object.__new__(cls)
        object.__setattr__(out, "store", store)
        object.__setattr__(out, "aliases", aliases)
        object.__setattr__(out, "signature", signature)
        return out

    def get(self, loc: Location) -> Value:
        return self.store.get(loc, UNDEF)

    def resolve(self, ambient: AgentId | None, symbol: str, args: tuple = ()) -> Location:
        """Canonical location of ``symbol(args)`` seen from ``ambient``."""
        if not args:
            if ambient is not None:
                target = self.aliases.get((ambient, symbol))
                if target is not None:
                    return target
            return nullary(ambient, symbol)
        return Location(ambient, symbol, tuple(args))

    def lookup(self, ambient: AgentId | None, symbol: str, args: tuple = ()) -> Value:
        return self.get(self.resolve(ambient, symbol, args))

    def locations(self) -> Iterator[Location]:
        return iter(self.store)

    def with_aliases(self, extra: Mapping[tuple[AgentId, str], Location]) -> "State":
        if not extra:
            return self
        merged = dict(self.aliases)
        merged.update(extra)
        out = State._trusted(self.store, merged, self.signature)
        acc = self.__dict__.get("_acc")
        if acc is not None:
            for (a, s), loc in extra.items():
                old = self.aliases.get((a, s))
                if old is not None:
                    acc -= _alias_hash(a, s, old)
                acc += _alias_hash(a, s, loc)
            object.__setattr__(out, "_acc", acc % _MOD)
        return out

    def digest_acc(self) -> int:
        """Order-independent sum of entry hashes, carried along by updates."""
        acc = self.__dict__.get("_acc")
        if acc is None:
            acc = sum(_entry_hash(l, v) for l, v in self.store.items())
            acc += sum(_alias_hash(a, s, l) for (a, s), l in self.aliases.items())
            acc %= _MOD
            object.__setattr__(self, "_acc", acc)
        return acc

    def canonical(self) -> tuple:
        store = tuple(sorted((l.key(), vkey(v)) for l, v in self.store.items()))
        aliases = tuple(
            sorted(((vkey(a), s), l.key()) for (a, s), l in self.aliases.items())
        )
        return (store, aliases)

    def __eq__(self, other: object) -> bool:
        return isinstance(other, State) and self.canonical() == other.canonical()

    def __hash__(self) -> int:
        return hash(self.canonical())

    def to_json(self) -> dict:
        store = sorted(self.store.items(), key=lambda kv: kv[0].key())
        aliases = sorted(self.aliases.items(), key=lambda kv: (vkey(kv[0][0]), kv[0][1]))
        return {
            "format": 1,
            "store": [[l.to_json(), to_json(v)] for l, v in store],
            "aliases": [
                [to_json(a), s, l.to_json()] for (a, s), l in aliases
            ],
        }

    @classmethod
    def from_json(cls, obj: Mapping[str, Any], signature: Signature | None = None) -> "State":
        store = {Location.from_json(l): from_python(v) for l, v in obj.get("store", [])}
        aliases = {
            (from_python(a), s): Location.from_json(l) for a, s, l in obj.get("aliases", [])
        }
        return cls(store, aliases, signature or Signature())


def dumps(obj: Any) -> str:
    """Byte-stable JSON text."""
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def state_bytes(state: State) -> bytes:
    return dumps(state.to_json()).encode()


_MOD = 1 << 256


def _h(x) -> int:
    return int.from_bytes(hashlib.sha256(repr(x).encode()).digest(), "big")


def _entry_hash(loc: Location, v: Value) -> int:
    return _h(("s", loc.key(), vkey(v)))


def _alias_hash(a: AgentId, s: str, loc: Location) -> int:
    return _h(("a", vkey(a), s, loc.key()))


def state_digest(state: State) -> str:
    """Stable content digest, updated incrementally along a run."""
    return format(state.digest_acc(), "064x")


def update_set_to_json(delta: Iterable[Update]) -> list:
    return [u.to_json() for u in sorted(delta)]


def update_set_from_json(obj: list) -> frozenset:
    return frozenset(Update.from_json(u) for u in obj)


def apply_updates(state: State, delta: Iterable[Update], on_inconsistency: str = "halt") -> State:
    """Return ``state + delta``.

    An inconsistent ``delta`` raises :class:`InconsistentUpdates` under the
    ``"halt"`` policy and leaves the state unchanged under ``"skip"``.
    """
    delta = list(delta)
    if not delta:
        return state
    bad = clashes(delta)
    if bad:
        if on_inconsistency == "skip":
            return state
        raise InconsistentUpdates(bad)
    store = dict(state.store)
    acc = state.__dict__.get("_acc")
    for u in delta:
        if acc is not None:
            old = store.get(u.loc, UNDEF)
            if old is not UNDEF:
                acc -= _entry_hash(u.loc, old)
            if u.val is not UNDEF:
                acc += _entry_hash(u.loc, u.val)
        if u.val is UNDEF:
            store.pop(u.loc, None)
        else:
            store[u.loc] = u.val
    out = State._trusted(store, state.aliases, state.signature)
    if acc is not None:
        object.__setattr__(out, "_acc", acc % _MOD)
    return out


def diff_states(s1: State, s2: State) -> frozenset:
    """The unique minimal consistent update set turning ``s1`` into ``s2``."""
    out = []
    for loc in set(s1.store) | set(s2.store):
        v2 = s2.get(loc)
        if vkey(s1.get(loc)) != vkey(v2):
            out.append(Update(loc, v2))
    return frozenset(out)


def is_trivial(state: State, u: Update) -> bool:
    return same(state.get(u.loc), u.val)


def nontrivial(state: State, delta: Iterable[Update]) -> frozenset:
    return frozenset(u for u in delta if not is_trivial(state, u))


# --- isomorphisms ----------------------------------------------------------


class InvalidIsomorphism(ValueError):
    pass


class Isomorphism:
    """A bijective renaming of symbols and agent ids, identity elsewhere.

    Undef, truth values, integers and lists over fixed elements are fixed;
    lists are mapped elementwise.
    """

    def __init__(self, mapping: Mapping[Any, Any] | None = None):
        mapping = dict(mapping or {})
        for k, v in mapping.items():
            if not isinstance(k, (Sym, AgentId)) or not isinstance(v, (Sym, AgentId)):
                raise InvalidIsomorphism(f"only symbols and agent ids may be renamed: {k!r}")
            if type(k) is not type(v):
                raise InvalidIsomorphism(f"renaming must preserve sort: {k!r} -> {v!r}")
        if len({vkey(v) for v in mapping.values()}) != len(mapping):
            raise InvalidIsomorphism("mapping is not injective")
        # complete to a bijection: images outside the domain map back along the cycle
        full = dict(mapping)
        for v in mapping.values():
            if v in full:
                continue
            back = v
            while back in mapping.values():
                back = next(k for k, w in mapping.items() if w == back)
            full[v] = back
        self.mapping = full

    def inverse(self) -> "Isomorphism":
        return Isomorphism({v: k for k, v in self.mapping.items()})

    def value(self, v: Value) -> Value:
        if isinstance(v, (Sym, AgentId)):
            return self.mapping.get(v, v)
        if isinstance(v, tuple):
            return tuple(self.value(x) for x in v)
        return v

    def location(self, loc: Location) -> Location:
        amb = None if loc.ambient is None else self.value(loc.ambient)
        return Location(amb, loc.symbol, tuple(self.value(a) for a in loc.args))

    def update(self, u: Update) -> Update:
        return Update(self.location(u.loc), self.value(u.val))

    def update_set(self, delta: Iterable[Update]) -> frozenset:
        return frozenset(self.update(u) for u in delta)

    def state(self, state: State) -> State:
        store = {self.location(l): self.value(v) for l, v in state.store.items()}
        aliases = {
            (self.value(a), s): self.location(l) for (a, s), l in state.aliases.items()
        }
        return State(store, aliases, state.signature)


def apply_isomorphism(iso: Isomorphism, state: State) -> State:
    return iso.state(state)
