import os
import sys

from hypothesis import settings, strategies as st

sys.path.insert(0, os.path.dirname(__file__))

from recasm.state import Location, State, Update  # noqa: E402
from recasm.values import UNDEF, AgentId, Sym  # noqa: E402

settings.register_profile("default", max_examples=100, deadline=None)
settings.load_profile("default")

atoms = st.one_of(
    st.integers(-20, 20),
    st.booleans(),
    st.sampled_from([Sym("a"), Sym("b"), Sym("c")]),
    st.builds(AgentId, st.integers(0, 4)),
)
values = st.recursive(atoms, lambda inner: st.lists(inner, max_size=4).map(tuple), max_leaves=8)
values_or_undef = st.one_of(st.just(UNDEF), values)

agents = st.builds(AgentId, st.integers(0, 3))
locations = st.builds(
    Location,
    st.one_of(st.none(), agents),
    st.sampled_from(["f", "g", "out"]),
    st.one_of(st.just(()), st.tuples(st.integers(0, 2))),
)


@st.composite
def states(draw, max_size: int = 8) -> State:
    store = draw(st.dictionaries(locations, values, max_size=max_size))
    return State(store)


@st.composite
def consistent_updates(draw, max_size: int = 6) -> frozenset:
    pairs = draw(st.dictionaries(locations, values_or_undef, max_size=max_size))
    return frozenset(Update(l, v) for l, v in pairs.items())
