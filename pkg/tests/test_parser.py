import pytest
from hypothesis import given, strategies as st

from recasm import corpus
from recasm.parser import ParseErrorList, parse
from recasm.printer import pretty_print, term_text
from recasm.syntax import App, Call, Choose, Const, Forall, If, ListLit, Op, Par, Var, read_terms_of
from recasm.values import UNDEF, Sym


@pytest.mark.parametrize("name", corpus.names())
def test_corpus_round_trips(name):
    prog = corpus.load(name)
    text = pretty_print(prog)
    again = parse(text)
    assert again == prog
    assert pretty_print(again) == text


def test_precedence_and_sugar():
    prog = parse("""
        main rule r(a) -> o {
          if a + 1 * 2 = 3 and not a < 0 or false then o := -a else o := [a, #x, undef]
        }
    """)
    body = prog.rules["r"].body
    assert isinstance(body, Par) and len(body.rules) == 2
    cond = body.rules[0].cond
    assert term_text(cond) == "((((a + (1 * 2)) = 3) and not ((a < 0))) or false)"
    assert cond.name == "or"
    assert body.rules[0].then.value == Op("minus", (Const(0), App("a", ())))
    neg = body.rules[1]
    assert isinstance(neg, If) and neg.cond.name == "not"
    lst = neg.then.value
    assert isinstance(lst, ListLit) and lst.items[1] == Const(Sym("x"))
    assert lst.items[2] == Const(UNDEF)


def test_keywords_case_insensitive_and_comments():
    prog = parse("MAIN RULE r() -> o { // hi\n  IF TRUE THEN o := 1 }")
    assert prog.main == "r"


def test_variables_and_locations():
    prog = parse("""
        main rule r(xs) -> o {
          let n = length(xs) in forall i in range(0, n) do seen(i) := nth(xs, i)
          o := 1
        }
    """)
    forall = prog.rules["r"].body.rules[0].body
    assert isinstance(forall, Forall)
    assign = forall.body
    assert assign.target == App("seen", (Var("i"),))
    assert prog.arities["seen"] == 1


def test_calls_and_choose():
    prog = parse("""
        main rule r(x) -> o {
          choose { call o <- r(x) | o := x | skip }
        }
    """)
    ch = prog.rules["r"].body
    assert isinstance(ch, Choose) and isinstance(ch.rules[0], Call)
    assert ch.rules[0].output == App("o", ())


@pytest.mark.parametrize("src,line,col,fragment", [
    ("main rule r() {\n  x := \n}", 3, 1, ""),
    ("main rule r() {\n  x = 1\n}", 3, 1, "expected ':='"),
    ("main rule r( {}", 1, 14, ""),
    ("rule r() { skip }\nrule r() { skip }\nmain rule m() { skip }", 2, 1, "declared twice"),
])
def test_syntax_errors_have_positions(src, line, col, fragment):
    with pytest.raises(ParseErrorList) as e:
        parse(src)
    err = e.value.errors[0]
    assert (err.line, err.col) == (line, col)
    assert fragment in err.message
    assert e.value.format("prog.recasm").startswith(f"prog.recasm:{line}:{col}: ")


@pytest.mark.parametrize("src,fragment", [
    ("main rule r(a) { a := 1 }", "input symbol a"),
    ("main rule r() { call q(1) }", "undeclared rule q"),
    ("main rule r() { call r(1) }", "expected 0"),
    ("main rule r() { f(1) := 1  f := 2 }", "arity mismatch for f"),
    ("main rule r(x) { forall i in range(1, 2) do call r(i) }", "call inside forall"),
    ("main rule r(x) { call x <- r(1) }", "is an input symbol"),
    ("main rule r() { head := 1 }", "background operation"),
    ("observe nowhere\nmain rule r() { skip }", "observed symbol nowhere"),
])
def test_static_errors(src, fragment):
    with pytest.raises(ParseErrorList) as e:
        parse(src)
    assert fragment in str(e.value)


def test_all_static_errors_reported_together():
    with pytest.raises(ParseErrorList) as e:
        parse("main rule r(a) { a := 1  call q() }")
    assert len(e.value.errors) == 2


alphabet = st.sampled_from(
    list("(){}[],|=<>+-*#:") + [" ", "\n", "rule", "main", "x", "1", ":=", "<-", "->", "if",
                               "then", "call", "let", "in", "forall", "do", "choose", "par"]
)


@given(st.lists(alphabet, max_size=40).map("".join))
def test_parser_is_total(src):
    try:
        parse(src)
    except ParseErrorList as e:
        assert all(err.line >= 0 and err.col >= 0 for err in e.errors)


@given(st.text(max_size=60))
def test_parser_total_on_arbitrary_text(src):
    try:
        parse(src)
    except ParseErrorList:
        pass


def test_read_terms_expand_lets():
    prog = corpus.load("quicksort")
    reads = {term_text(t) for t in read_terms_of(prog.rules["qsort"].body)}
    assert "unsorted_list" in reads
    assert "filter_lt(tail(unsorted_list), head(unsorted_list))" in reads
    assert "sorted_list_1" in reads
    # let-bound names never survive as free reads
    assert "x" not in reads


def test_read_terms_include_guards_not_assign_targets():
    prog = parse("main rule r(a) -> o { if a > 0 then o := a + 1 }")
    reads = {term_text(t) for t in read_terms_of(prog.rules["r"].body)}
    assert {"a", "(a > 0)", "(a + 1)"} <= reads
    assert "o" not in reads
