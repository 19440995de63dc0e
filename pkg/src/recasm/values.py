"""Base-set values and the background structure.

Values are plain Python objects: ``UNDEF``, ``bool``, ``int``, ``tuple`` (finite
lists), :class:`Sym` and :class:`AgentId`.  Because ``True == 1`` in Python, all
equality and hashing that must respect the value sorts goes through
:func:`vkey`, which produces a tagged, hashable canonical form.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Callable, Union


class _Undef:
    __slots__ = ()
    _instance: "_Undef | None" = None

    def __new__(cls) -> "_Undef":
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self) -> str:
        return "undef"

    def __reduce__(self):
        return (_Undef, ())


UNDEF = _Undef()


@dataclass(frozen=True, order=True)
class Sym:
    """An uninterpreted symbol constant."""

    name: str

    def __post_init__(self) -> None:
        object.__setattr__(self, "_h", hash(("S", self.name)))

    def __hash__(self) -> int:
        return self._h

    def __repr__(self) -> str:
        return f"#{self.name}"


@dataclass(frozen=True, order=True)
class AgentId:
    """Opaque agent identity.  ``ns`` separates delegate ids from ordinary ones."""

    n: int
    ns: str = ""

    def __post_init__(self) -> None:
        object.__setattr__(self, "_h", hash(("A", self.ns, self.n)))

    def __hash__(self) -> int:
        return self._h

    def __repr__(self) -> str:
        return f"@{self.ns}{self.n}"


Value = Union[_Undef, bool, int, tuple, Sym, AgentId]


def vkey(v: Any) -> tuple:
    """Sort-respecting canonical key of a value."""
    if v is UNDEF:
        return ("U",)
    if isinstance(v, bool):
        return ("B", v)
    if isinstance(v, int):
        return ("I", v)
    if isinstance(v, tuple):
        return ("L", tuple(vkey(x) for x in v))
    if isinstance(v, Sym):
        return ("S", v.name)
    if isinstance(v, AgentId):
        return ("A", v.ns, v.n)
    raise TypeError(f"not a base-set value: {v!r}")


def same(a: Any, b: Any) -> bool:
    """Sort-respecting equality (``True`` and ``1`` differ)."""
    if a is b:
        return True
    t = type(a)
    if t is not type(b):
        return False
    if t is tuple:
        return len(a) == len(b) and all(same(x, y) for x, y in zip(a, b))
    return a == b


def is_value(v: Any) -> bool:
    try:
        vkey(v)
    except TypeError:
        return False
    return True


def from_python(obj: Any) -> Value:
    """Convert JSON-ish Python data (lists, ints, bools, None) to a value."""
    if obj is None:
        return UNDEF
    if isinstance(obj, (bool, int, Sym, AgentId)) or obj is UNDEF:
        return obj
    if isinstance(obj, (list, tuple)):
        return tuple(from_python(x) for x in obj)
    if isinstance(obj, dict):
        if "sym" in obj:
            return Sym(obj["sym"])
        if "agent" in obj:
            return AgentId(obj["agent"], obj.get("ns", ""))
        if obj.get("undef"):
            return UNDEF
    raise ValueError(f"cannot convert {obj!r} to a value")


def to_json(v: Value) -> Any:
    if v is UNDEF:
        return None
    if isinstance(v, (bool, int)):
        return v
    if isinstance(v, tuple):
        return [to_json(x) for x in v]
    if isinstance(v, Sym):
        return {"sym": v.name}
    if isinstance(v, AgentId):
        return {"agent": v.n, "ns": v.ns} if v.ns else {"agent": v.n}
    raise TypeError(f"not a base-set value: {v!r}")


def to_python(v: Value) -> Any:
    """Like :func:`to_json` but keeps lists as Python lists of plain data."""
    return to_json(v)


def show(v: Value) -> str:
    if v is UNDEF:
        return "undef"
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, tuple):
        return "[" + ", ".join(show(x) for x in v) + "]"
    return repr(v)


# --- background operations -------------------------------------------------
# Every operation is total: ill-typed applications yield UNDEF.


def _is_int(v: Any) -> bool:
    return isinstance(v, int) and not isinstance(v, bool)


def _is_list(v: Any) -> bool:
    return isinstance(v, tuple)


def _ints(fn: Callable[[int, int], Any]) -> Callable[..., Value]:
    def op(a, b):
        if _is_int(a) and _is_int(b):
            return fn(a, b)
        return UNDEF

    return op


def _div(a: int, b: int) -> Value:
    return UNDEF if b == 0 else a // b


def _mod(a: int, b: int) -> Value:
    return UNDEF if b == 0 else a % b


def _and(a, b):
    if isinstance(a, bool) and isinstance(b, bool):
        return a and b
    return UNDEF


def _or(a, b):
    if isinstance(a, bool) and isinstance(b, bool):
        return a or b
    return UNDEF


def _not(a):
    return (not a) if isinstance(a, bool) else UNDEF


def _length(xs):
    return len(xs) if _is_list(xs) else UNDEF


def _head(xs):
    return xs[0] if _is_list(xs) and xs else UNDEF


def _tail(xs):
    return xs[1:] if _is_list(xs) and xs else UNDEF


def _concat(xs, ys):
    if _is_list(xs) and _is_list(ys):
        return xs + ys
    return UNDEF


def _cons(x, xs):
    if x is not UNDEF and _is_list(xs):
        return (x,) + xs
    return UNDEF


def _take(xs, n):
    if _is_list(xs) and _is_int(n) and n >= 0:
        return xs[:n]
    return UNDEF


def _drop(xs, n):
    if _is_list(xs) and _is_int(n) and n >= 0:
        return xs[n:]
    return UNDEF


def _nth(xs, i):
    if _is_list(xs) and _is_int(i) and 0 <= i < len(xs):
        return xs[i]
    return UNDEF


def _filter(pred: Callable[[int, int], bool]) -> Callable[..., Value]:
    def op(xs, x):
        if not (_is_list(xs) and _is_int(x)) or not all(_is_int(y) for y in xs):
            return UNDEF
        return tuple(y for y in xs if pred(y, x))

    return op


def _member(x, xs):
    if not _is_list(xs) or x is UNDEF:
        return UNDEF
    k = vkey(x)
    return any(vkey(y) == k for y in xs)


def _min_undivided(divisors, start):
    """Smallest integer >= start not divisible by any member of ``divisors``.

    This inspects an initial segment of the sieve {start, start+1, ...} only.
    """
    if not (_is_list(divisors) and _is_int(start)):
        return UNDEF
    if not all(_is_int(d) and d >= 2 for d in divisors) or start < 2:
        return UNDEF
    x = start
    while any(x % d == 0 for d in divisors):
        x += 1
    return x


def _eq(a, b):
    return same(a, b)


def _neq(a, b):
    return not same(a, b)


def _is_undef(a):
    return a is UNDEF


# name -> (arity, implementation)
BACKGROUND: dict[str, tuple[int, Callable[..., Value]]] = {
    "and": (2, _and),
    "or": (2, _or),
    "not": (1, _not),
    "eq": (2, _eq),
    "neq": (2, _neq),
    "lt": (2, _ints(lambda a, b: a < b)),
    "le": (2, _ints(lambda a, b: a <= b)),
    "gt": (2, _ints(lambda a, b: a > b)),
    "ge": (2, _ints(lambda a, b: a >= b)),
    "plus": (2, _ints(lambda a, b: a + b)),
    "minus": (2, _ints(lambda a, b: a - b)),
    "times": (2, _ints(lambda a, b: a * b)),
    "div": (2, _ints(_div)),
    "mod": (2, _ints(_mod)),
    "length": (1, _length),
    "head": (1, _head),
    "tail": (1, _tail),
    "concat": (2, _concat),
    "cons": (2, _cons),
    "take": (2, _take),
    "drop": (2, _drop),
    "nth": (2, _nth),
    "filter_lt": (2, _filter(lambda y, x: y < x)),
    "filter_le": (2, _filter(lambda y, x: y <= x)),
    "filter_gt": (2, _filter(lambda y, x: y > x)),
    "filter_ge": (2, _filter(lambda y, x: y >= x)),
    "member": (2, _member),
    "min_undivided": (2, _min_undivided),
    "is_undef": (1, _is_undef),
}

# binary infix operator spelling -> background name
INFIX = {
    "and": "and",
    "or": "or",
    "=": "eq",
    "!=": "neq",
    "<": "lt",
    "<=": "le",
    ">": "gt",
    ">=": "ge",
    "+": "plus",
    "-": "minus",
    "*": "times",
    "div": "div",
    "mod": "mod",
}
INFIX_NAME = {v: k for k, v in INFIX.items()}


def apply_background(name: str, args: list[Value]) -> Value:
    arity, fn = BACKGROUND[name]
    if len(args) != arity:
        raise ValueError(f"{name} expects {arity} arguments, got {len(args)}")
    return fn(*args)
