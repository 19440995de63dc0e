import random

import pytest
from hypothesis import given, strategies as st

import helpers
from recasm import corpus
from recasm.parser import parse
from recasm.runtime import Registry
from recasm.semantics import (
    NOOP_FAMILY,
    CallRequest,
    Effect,
    Env,
    SpecificationError,
    call_updates,
    coincide,
    delta,
    eval_term,
    family_sorted,
    rename_family,
    witness_check,
)
from recasm.state import Isomorphism, Location, State, Update
from recasm.syntax import App, Var
from recasm.values import UNDEF, AgentId, Sym

A0 = AgentId(0)


def body(src: str, name: str = "r"):
    return parse(src).rules[name].body


def env(agent=A0):
    return Env(agent, {}, None, agent)


def test_assign_reads_ambient_and_shared():
    prog = parse("shared s/0\nmain rule r(a) -> o { o := a + s }")
    st_ = State({Location(A0, "a"): 2, Location(None, "s"): 5}, {}, prog.signature)
    fam = delta(prog.rules["r"].body, st_, env())
    assert fam == frozenset({Effect(frozenset({Update(Location(A0, "o"), 7)}))})


def test_if_needs_true_not_truthy():
    b = body("main rule r(a) -> o { if a then o := 1 }")
    for v, fires in [(True, True), (1, False), (UNDEF, False), ((), False)]:
        fam = delta(b, State({Location(A0, "a"): v}), env())
        assert (fam != NOOP_FAMILY) == fires


def test_par_combines_pointwise_and_choose_unions():
    b = body("main rule r() -> o { choose { x := 1 | x := 2 }  choose { y := 1 | y := 2 } }")
    fam = delta(b, State(), env())
    assert len(fam) == 4
    assert all(len(e.updates) == 2 for e in fam)


def test_par_keeps_inconsistent_unions():
    b = body("main rule r() { x := 1  x := 2 }")
    (e,) = delta(b, State(), env())
    assert len(e.updates) == 2


def test_empty_choose_is_noop():
    from recasm.syntax import Choose

    assert delta(Choose(()), State(), env()) == NOOP_FAMILY


def test_forall_over_range_and_list():
    b = body("main rule r(xs) { forall i in range(1, 3) do f(i) := i * 2  forall x in xs do g(x) := true }")
    st_ = State({Location(A0, "xs"): (5, 5, 6)})
    (e,) = delta(b, st_, env())
    got = {(u.loc.symbol, u.loc.args, u.val) for u in e.updates}
    assert got == {("f", (1,), 2), ("f", (2,), 4), ("f", (3,), 6), ("g", (5,), True), ("g", (6,), True)}


def test_forall_over_relevant_indices():
    b = body("main rule r() { forall i in relevant_indices(f) do g(i) := f(i) }")
    st_ = State({Location(A0, "f", (2,)): 7, Location(A0, "f", (0,)): 1, Location(AgentId(1), "f", (9,)): 0})
    (e,) = delta(b, st_, env())
    assert {(u.loc.args, u.val) for u in e.updates} == {((0,), 1), ((2,), 7)}


def test_call_produces_request_not_agent():
    b = body("main rule r(a) -> o { call o <- r(a + 1) }")
    (e,) = delta(b, State({Location(A0, "a"): 1}), env())
    assert not e.updates
    (req,) = e.calls
    assert req == CallRequest("r", (2,), Location(A0, "o"), A0)


def test_call_output_follows_alias():
    b = body("main rule r(a) -> o { call o <- r(a) }")
    st_ = State({}, {(A0, "o"): Location(AgentId(5), "res")})
    (e,) = delta(b, st_, env())
    assert e.calls[0].output == Location(AgentId(5), "res")


def test_as_caller_evaluates_in_caller_ambient():
    prog = parse("""
        main rule m() -> o { call d() }
        rule d() { as caller { x := y + 1 } }
    """)
    reg = Registry()
    reg, a0 = reg.add("m", None)
    reg, d = reg.add("d", a0)
    st_ = State({Location(a0, "y"): 4, Location(d, "y"): 100})
    (e,) = delta(prog.rules["d"].body, st_, Env(d, {}, reg, d))
    assert e.updates == frozenset({Update(Location(a0, "x"), 5)})


def test_registry_predicates_need_registry():
    b = body("main rule r() { if active then x := 1 }")
    with pytest.raises(SpecificationError):
        delta(b, State(), env())


def test_unbound_variable():
    with pytest.raises(SpecificationError):
        eval_term(State(), A0, Var("nope"))


def test_eval_term_default_env():
    st_ = State({Location(A0, "x"): 3})
    assert eval_term(st_, A0, App("x", ())) == 3
    assert eval_term(st_, AgentId(1), App("x", ())) is UNDEF


def test_family_sorted_is_deterministic():
    b = body("main rule r() { choose { x := 3 | x := 1 | x := 2 } }")
    a = family_sorted(delta(b, State(), env()))
    b2 = family_sorted(set(delta(b, State(), env())))
    assert a == b2
    assert [next(iter(e.updates)).val for e in a] == [1, 2, 3]


def test_effect_equality_is_sort_aware():
    loc = Location(A0, "x")
    assert Effect(frozenset({Update(loc, True)})) != Effect(frozenset({Update(loc, 1)}))


def test_call_updates_initialise_inputs_and_alias_output():
    req = CallRequest("sort", ((3, 1),), Location(A0, "sorted_list_1"), A0)
    ups, al = call_updates(req, ("unsorted_list",), "sorted_list", AgentId(4))
    assert ups == frozenset({Update(Location(AgentId(4), "unsorted_list"), (3, 1))})
    assert al == {(AgentId(4), "sorted_list"): Location(A0, "sorted_list_1")}


def test_coincide_and_witness_check():
    b = body("main rule r(a) -> o { if a > 0 then o := a }")
    s1 = State({Location(A0, "a"): 1, Location(A0, "zz"): 1})
    s2 = State({Location(A0, "a"): 1, Location(A0, "zz"): 2})
    s3 = State({Location(A0, "a"): 2})
    assert coincide(b, s1, s2, env())
    assert not coincide(b, s1, s3, env())
    assert witness_check(b, s1, s2, env())


def test_coincidence_follows_forall_bindings():
    b = body("main rule r() { forall i in relevant_indices(f) do g(i) := f(i) + 1 }")
    f = lambda i: Location(A0, "f", (i,))
    s1 = State({f(1): 1, f(2): 2})
    assert not coincide(b, s1, State({f(1): 1, f(2): 5}), env())
    assert not coincide(b, s1, State({f(1): 1}), env())
    # state outside the bound instances is free to differ
    assert coincide(b, s1, State({f(1): 1, f(2): 2, Location(A0, "g", (7,)): 0}), env())


rules = helpers.corpus_rules()


@pytest.mark.parametrize("name,rname,prog", rules, ids=[f"{n}.{r}" for n, r, _ in rules])
@given(seed=st.integers(0, 10_000))
def test_families_never_empty(name, rname, prog, seed):
    s = helpers.rule_state(random.Random(seed), prog, rname)
    assert delta(prog.rules[rname].body, s, helpers.rule_env(prog))


@pytest.mark.parametrize("name,rname,prog", rules, ids=[f"{n}.{r}" for n, r, _ in rules])
@given(seed=st.integers(0, 10_000))
def test_equivariance(name, rname, prog, seed):
    rng = random.Random(seed)
    s = helpers.rule_state(rng, prog, rname, exotic=0.5)
    iso = Isomorphism(helpers.random_renaming(rng, helpers.rule_constants(prog, rname)))
    b = iso.value(helpers.AMBIENT)
    r = prog.rules[rname].body
    assert delta(r, iso.state(s), env(b)) == rename_family(iso, delta(r, s, env()))


def test_renaming_a_rule_constant_breaks_equivariance():
    # the coin rule names #heads; moving it is not an admissible renaming
    prog = corpus.load("shared3")
    r = prog.rules["flip"].body
    iso = Isomorphism({Sym("heads"): Sym("a")})
    assert delta(r, State(), env()) != rename_family(iso, delta(r, State(), env()))
