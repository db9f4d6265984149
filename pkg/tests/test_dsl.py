import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from daecontract import dsl
from daecontract.dsl import (
    Binary,
    Const,
    DimensionMismatch,
    DslSyntaxError,
    EvalError,
    Num,
    Unary,
    Var,
    eval_dual,
    evaluate,
    parse_expr,
    parse_model,
    pretty,
)

N, M = 3, 2

leaves = st.one_of(
    st.floats(0, 1e6, allow_nan=False, allow_infinity=False).map(Num),
    st.sampled_from(["pi", "e"]).map(Const),
    st.just(Var("t")),
    st.integers(1, N).map(lambda k: Var("w", k)),
    st.integers(1, M).map(lambda k: Var("z", k)),
)


def _extend(children):
    return st.one_of(
        st.builds(Unary, st.sampled_from(("neg",) + dsl.UNARY_FUNCS), children),
        st.builds(Binary, st.sampled_from("+-*/^"), children, children),
    )


asts = st.recursive(leaves, _extend, max_leaves=40)


def depth(node):
    if isinstance(node, Unary):
        return 1 + depth(node.arg)
    if isinstance(node, Binary):
        return 1 + max(depth(node.left), depth(node.right))
    return 0


@settings(max_examples=500, deadline=None)
@given(asts)
def test_round_trip(node):
    if depth(node) > 6:
        return
    assert parse_expr(pretty(node), N, M) == node


def test_round_trip_seeded_500():
    rng = np.random.default_rng(0)

    def gen(d):
        if d == 0 or rng.random() < 0.25:
            kind = rng.integers(4)
            if kind == 0:
                return Num(float(rng.choice([0.0, 1.0, 2.5, 1e-5, 3e8])))
            if kind == 1:
                return Var("t")
            if kind == 2:
                return Var("w", int(rng.integers(1, N + 1)))
            return Var("z", int(rng.integers(1, M + 1)))
        if rng.random() < 0.3:
            return Unary(str(rng.choice(("neg",) + dsl.UNARY_FUNCS)), gen(d - 1))
        return Binary(str(rng.choice(list("+-*/^"))), gen(d - 1), gen(d - 1))

    for _ in range(500):
        node = gen(6)
        assert parse_expr(pretty(node), N, M) == node


# --- precedence ----------------------------------------------------------------

@pytest.mark.parametrize("text,value", [
    ("1+2*3^2", 19.0),
    ("-2^2", -4.0),
    ("2^3^2", 512.0),
    ("(1+2)*3", 9.0),
    ("8/4/2", 1.0),
    ("1-2-3", -4.0),
    ("2^-1", 0.5),
    ("-(2)^2", -4.0),
    ("(-2)^2", 4.0),
    ("2*-3", -6.0),
])
def test_precedence(text, value):
    assert evaluate(parse_expr(text), 0.0, [], []) == value


# --- evaluation ----------------------------------------------------------------

def test_eval_examples():
    assert evaluate(parse_expr("exp(3*t)*w1+z1", 1, 1), 0.0, [1.0], [-1.0]) == 0.0
    assert evaluate(parse_expr("sin(t)"), 0.0, [], []) == 0.0
    with pytest.raises(EvalError) as exc:
        evaluate(parse_expr("w1/z1", 1, 1), 0.0, [1.0], [0.0])
    assert exc.value.kind == "DivideByZero"


@pytest.mark.parametrize("text,kind", [
    ("ln(-1)", "DomainError"),
    ("ln(0)", "DomainError"),
    ("sqrt(-1)", "DomainError"),
    ("(-8)^(1/3)", "DomainError"),
    ("0^-1", "DivideByZero"),
    ("exp(1000)", "Overflow"),
])
def test_eval_errors(text, kind):
    with pytest.raises(EvalError) as exc:
        evaluate(parse_expr(text), 0.0, [], [])
    assert exc.value.kind == kind


def test_negative_base_integer_exponent():
    assert evaluate(parse_expr("(-2)^3"), 0.0, [], []) == -8.0


def test_dual_examples():
    node = parse_expr("exp(3*t)*w1", 1, 0)
    assert eval_dual(node, 0.0, [2.0], [], ("w", 1)) == (2.0, 1.0)
    assert eval_dual(parse_expr("4*z1 + 0.5*sin(z1)", 0, 1), 0.0, [], [0.0], ("z", 1)) == (0.0, 4.5)
    assert eval_dual(parse_expr("t^2"), 3.0, [], [], "t") == (9.0, 6.0)


def test_dual_constant_seed():
    assert eval_dual(parse_expr("w1 + 1", 2, 0), 0.0, [1.0, 2.0], [], ("w", 2)) == (2.0, 0.0)


# Random expressions built only from operations that are smooth everywhere.
def _safe(rng, d):
    if d == 0 or rng.random() < 0.2:
        kind = rng.integers(3)
        if kind == 0:
            return Num(float(rng.uniform(0.1, 2)))
        if kind == 1:
            return Var("t")
        return Var(str(rng.choice(["w", "z"])), int(rng.integers(1, 3)))
    r = rng.random()
    a = _safe(rng, d - 1)
    if r < 0.3:
        op = str(rng.choice(["neg", "sin", "cos", "tanh"]))
        return Unary(op, a)
    if r < 0.4:
        pos = Binary("+", Num(1.0), Binary("*", a, a))
        return Unary(str(rng.choice(["ln", "sqrt"])), pos)
    if r < 0.45:
        return Unary("exp", Unary("sin", a))
    b = _safe(rng, d - 1)
    if r < 0.55:
        return Binary("/", a, Binary("+", Num(2.0), Binary("*", b, b)))
    if r < 0.6:
        return Binary("^", a, Num(2.0))
    return Binary(str(rng.choice(list("+-*"))), a, b)


def test_dual_matches_central_difference():
    rng = np.random.default_rng(42)
    h = 1e-6
    checked = 0
    for _ in range(300):
        node = _safe(rng, 5)
        t = float(rng.uniform(-1, 1))
        w = list(rng.uniform(-1, 1, 2))
        z = list(rng.uniform(-1, 1, 2))
        for seed in ["t", ("w", 1), ("w", 2), ("z", 1), ("z", 2)]:
            val, der = eval_dual(node, t, w, z, seed)
            assert val == pytest.approx(evaluate(node, t, w, z), rel=1e-14, abs=1e-14)

            def at(s):
                tt, ww, zz = t, list(w), list(z)
                if seed == "t":
                    tt += s
                elif seed[0] == "w":
                    ww[seed[1] - 1] += s
                else:
                    zz[seed[1] - 1] += s
                return evaluate(node, tt, ww, zz)

            fd = (at(h) - at(-h)) / (2 * h)
            assert der == pytest.approx(fd, rel=1e-5, abs=1e-6)
            checked += 1
    assert checked == 1500


# --- model files ---------------------------------------------------------------

def test_parse_exam1_model():
    mf = parse_model("n=1 m=1 f1 = -w1 + exp(-3*t)*z1 ; g1 = exp(3*t)*w1 + z1")
    assert (mf.n, mf.m) == (1, 1)
    t, w, z = 0.7, [1.3], [-0.4]
    assert evaluate(mf.f[0], t, w, z) == pytest.approx(-1.3 + math.exp(-2.1) * -0.4, rel=1e-15)
    assert evaluate(mf.g[0], t, w, z) == pytest.approx(math.exp(2.1) * 1.3 - 0.4, rel=1e-15)


def test_parse_constant_system():
    mf = parse_model("n=1 m=0 f1 = 0")
    assert mf.m == 0 and mf.f == (Num(0.0),) and mf.g == ()


def test_dimension_mismatch():
    with pytest.raises(DimensionMismatch):
        parse_model("n=1 m=1 f1 = w2")


def test_unknown_identifier_position():
    with pytest.raises(DslSyntaxError) as exc:
        parse_model("n=1 m=0\nf1 = 2*foo")
    assert (exc.value.line, exc.value.col) == (2, 8)


@pytest.mark.parametrize("text", [
    "n=1 m=1 f1 = w1",  # missing g1
    "n=1 m=0 f1 = w1 ; f1 = 2",  # duplicate
    "n=1 m=0 f2 = w1",  # out of range
    "n=1 m=0 f1 = (w1",  # unbalanced
    "m=1 n=1 f1 = w1",  # header order
    "n=1 m=0 f1 = w1 w1",  # trailing tokens
    "n=1 m=0 param w1 = 2\nf1 = w1",  # reserved name
    "n=1 m=0 param a = w1\nf1 = a",  # non-constant param
])
def test_model_errors(text):
    with pytest.raises(DslSyntaxError):
        parse_model(text)


def test_params_and_overrides():
    text = "# comment\nn=1 m=1\nparam a = 0.5\nparam b = 2*a\nf1 = -a*w1\ng1 = z1 - b*w1\n"
    mf = parse_model(text)
    assert mf.params == {"a": 0.5, "b": 1.0}
    assert evaluate(mf.f[0], 0.0, [2.0], [0.0]) == -1.0
    mf2 = parse_model(text, {"a": 3.0})
    assert evaluate(mf2.f[0], 0.0, [2.0], [0.0]) == -6.0
    with pytest.raises(DslSyntaxError):
        parse_model(text, {"nope": 1.0})


def test_multiline_parentheses():
    mf = parse_model("n=1 m=0\nf1 = (w1 +\n  2)\n")
    assert evaluate(mf.f[0], 0.0, [1.0], []) == 3.0


def test_variables():
    node = parse_expr("w1*sin(t) + z2", 2, 2)
    assert dsl.variables(node) == {Var("w", 1), Var("t"), Var("z", 2)}
