import pytest
from hypothesis import given, strategies as st

from conftest import agents, consistent_updates, locations, states, values, values_or_undef
from recasm.state import (
    InconsistentUpdates,
    InvalidIsomorphism,
    Isomorphism,
    Location,
    State,
    Update,
    apply_updates,
    clashes,
    diff_states,
    nontrivial,
    state_digest,
)
from recasm.values import (
    UNDEF,
    AgentId,
    Sym,
    apply_background,
    from_python,
    same,
    to_json,
    vkey,
)


def test_bool_and_int_are_different_values():
    assert not same(True, 1)
    assert not same((0,), (False,))
    assert vkey(True) != vkey(1)
    assert Location(None, "f", (True,)) != Location(None, "f", (1,))


@given(values_or_undef)
def test_json_round_trip(v):
    assert same(from_python(to_json(v)), v)


@given(values_or_undef, values_or_undef)
def test_same_agrees_with_vkey(a, b):
    assert same(a, b) == (vkey(a) == vkey(b))


@pytest.mark.parametrize("op,args,want", [
    ("plus", [2, 3], 5),
    ("plus", [True, 1], UNDEF),
    ("div", [7, 0], UNDEF),
    ("div", [-7, 2], -4),
    ("head", [()], UNDEF),
    ("take", [(1, 2, 3), 2], (1, 2)),
    ("drop", [(1, 2, 3), -1], UNDEF),
    ("filter_lt", [(3, 1, 2), 2], (1,)),
    ("filter_ge", [(3, 1, 2), 2], (3, 2)),
    ("filter_lt", [(3, Sym("x")), 2], UNDEF),
    ("min_undivided", [(2, 3), 5], 5),
    ("min_undivided", [(2, 3, 5), 8], 11),
    ("min_undivided", [(1,), 5], UNDEF),
    ("member", [AgentId(1), (AgentId(1),)], True),
    ("eq", [(1, True), (1, True)], True),
    ("eq", [UNDEF, ()], False),
])
def test_background(op, args, want):
    assert same(apply_background(op, args), want)


def test_background_arity_checked():
    with pytest.raises(ValueError):
        apply_background("plus", [1])


def test_undef_is_absence():
    loc = Location(AgentId(0), "x")
    s = apply_updates(State(), [Update(loc, 4)])
    assert s.get(loc) == 4
    s = apply_updates(s, [Update(loc, UNDEF)])
    assert loc not in s.store and s == State()


def test_inconsistent_updates_halt_or_skip():
    loc = Location(None, "x")
    ups = [Update(loc, 1), Update(loc, 2)]
    assert clashes(ups) == [loc]
    with pytest.raises(InconsistentUpdates):
        apply_updates(State(), ups)
    assert apply_updates(State(), ups, "skip") == State()
    # the same value twice is fine
    assert not clashes([Update(loc, 1), Update(loc, 1)])


@given(states(), consistent_updates())
def test_diff_reconstructs_and_is_minimal(s1, delta):
    s2 = apply_updates(s1, delta)
    d = diff_states(s1, s2)
    assert apply_updates(s1, d) == s2
    assert d == nontrivial(s1, d)
    for u in d:
        assert apply_updates(s1, d - {u}) != s2


@given(states(), states())
def test_diff_between_arbitrary_states(s1, s2):
    assert apply_updates(s1, diff_states(s1, s2)) == s2


@given(states(), consistent_updates())
def test_incremental_digest_matches_fresh(s1, delta):
    state_digest(s1)  # start carrying the digest
    s2 = apply_updates(s1, delta).with_aliases({(AgentId(9), "out"): Location(None, "g")})
    fresh = State(dict(s2.store), dict(s2.aliases))
    assert state_digest(s2) == state_digest(fresh)


@given(states())
def test_state_json_round_trip(s):
    assert State.from_json(s.to_json()) == s


def test_aliases_redirect_nullary_reads():
    out = Location(AgentId(0), "result")
    s = State({out: 3}, {(AgentId(1), "merged"): out})
    assert s.resolve(AgentId(1), "merged") == out
    assert s.lookup(AgentId(1), "merged") == 3
    assert s.resolve(AgentId(2), "merged") == Location(AgentId(2), "merged")


@given(states(), st.permutations([AgentId(n) for n in range(4)]),
       st.permutations([Sym("a"), Sym("b"), Sym("c")]))
def test_isomorphism_round_trip(s, perm_a, perm_s):
    m = dict(zip([AgentId(n) for n in range(4)], perm_a))
    m.update(zip([Sym("a"), Sym("b"), Sym("c")], perm_s))
    iso = Isomorphism(m)
    assert iso.inverse().state(iso.state(s)) == s
    assert len(iso.state(s).store) == len(s.store)


@given(states(), consistent_updates())
def test_isomorphism_commutes_with_updates(s, delta):
    iso = Isomorphism({AgentId(0): AgentId(1), AgentId(1): AgentId(0), Sym("a"): Sym("c")})
    assert iso.state(apply_updates(s, delta)) == apply_updates(iso.state(s), iso.update_set(delta))


def test_isomorphism_is_completed_to_a_bijection():
    iso = Isomorphism({AgentId(0): AgentId(1)})
    assert iso.value(AgentId(1)) == AgentId(0)


@pytest.mark.parametrize("mapping", [
    {1: 2},
    {AgentId(0): Sym("a")},
    {AgentId(0): AgentId(2), AgentId(1): AgentId(2)},
])
def test_invalid_isomorphisms(mapping):
    with pytest.raises(InvalidIsomorphism):
        Isomorphism(mapping)


@given(locations, values)
def test_update_json_round_trip(loc, v):
    u = Update(loc, v)
    assert Update.from_json(u.to_json()) == u


@given(agents)
def test_agent_hash_stable(a):
    assert hash(a) == hash(AgentId(a.n, a.ns))
