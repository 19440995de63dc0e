"""Example programs with independent reference oracles."""
from __future__ import annotations

import random
from dataclasses import dataclass
from importlib import resources
from typing import Any, Callable, Optional

from ..parser import parse
from ..syntax import Program


def source(name: str) -> str:
    return resources.files(__package__).joinpath(f"{name}.recasm").read_text(encoding="utf-8")


def path(name: str) -> str:
    return str(resources.files(__package__).joinpath(f"{name}.recasm"))


def load(name: str) -> Program:
    return parse(source(name))


def names() -> list[str]:
    return sorted(
        p.name[: -len(".recasm")]
        for p in resources.files(__package__).iterdir()
        if p.name.endswith(".recasm")
    )


def random_list(rng: random.Random, max_len: int = 32, lo: int = -1000, hi: int = 1000) -> list[int]:
    return [rng.randint(lo, hi) for _ in range(rng.randint(0, max_len))]


def primes(count: int) -> list[int]:
    """First ``count`` primes by trial division."""
    out: list[int] = []
    n = 2
    while len(out) < count:
        if all(n % d for d in range(2, int(n**0.5) + 1)):
            out.append(n)
        n += 1
    return out


@dataclass(frozen=True)
class CorpusEntry:
    name: str
    input_symbol: Optional[str]
    output_symbol: str
    oracle: Callable[[Any], Any]
    expected_status: str  # quiescent | non-terminating
    make_input: Callable[[random.Random], Any] = random_list

    @property
    def program(self) -> Program:
        return load(self.name)

    @property
    def path(self) -> str:
        return path(self.name)


ENTRIES = {
    "mergesort": CorpusEntry("mergesort", "unsorted_list", "sorted_list", sorted, "quiescent"),
    "quicksort": CorpusEntry("quicksort", "unsorted_list", "sorted_list", sorted, "quiescent"),
    "mergesort_parallel": CorpusEntry("mergesort_parallel", "input", "result", sorted, "quiescent"),
    "quicksort_parallel": CorpusEntry("quicksort_parallel", "input", "result", sorted, "quiescent"),
    "sieve": CorpusEntry("sieve", None, "out_prime", primes, "non-terminating", lambda rng: None),
}

STATIC_SYSTEMS = ("counters", "shared3", "conflict")
