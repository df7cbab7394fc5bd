import math
import time

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from contactqi.expr import (BinOp, Const, DomainError, ExprSyntaxError, Func, Neg,
                            UnknownIdentifierError, Var, add, differentiate, evaluate, mul, parse,
                            simplify, to_text, variables_of)

XYZ = ("x", "y", "z")


def P(text):
    return parse(text, XYZ)


@pytest.mark.parametrize("text, point, expected", [
    ("(y^2+1)/4", (0, 2, 0), 1.25),
    ("1/(2*sqrt(y))", (0, 4, 0), 0.25),
    ("-y/4", (0, 3, 0), -0.75),
    ("2*y*z^2", (0, 1.5, 2), 12.0),
    ("cos(pi)", (0, 0, 0), -1.0),
    ("exp(log(x))", (3, 0, 0), 3.0),
    ("1e-3*x", (2, 0, 0), 0.002),
])
def test_evaluate_examples(text, point, expected):
    assert evaluate(P(text), point) == pytest.approx(expected, rel=1e-14)


def test_tree_shape():
    e = P("(y^2+1)/4")
    assert e == BinOp("/", BinOp("+", BinOp("^", Var("y", 1), Const(2.0)), Const(1.0)), Const(4.0))


@pytest.mark.parametrize("text, expected", [
    ("-x^2", -9.0),          # exponent binds tighter than unary minus
    ("2^3^2", 512.0),        # right associative
    ("2^-1", 0.5),
    ("-2*-x", 6.0),
    ("x-1-1", 1.0),
    ("x/3/3", 1 / 3),
])
def test_precedence(text, expected):
    assert evaluate(P(text), (3, 0, 0)) == pytest.approx(expected)


def test_unknown_identifier():
    with pytest.raises(UnknownIdentifierError) as info:
        P("q+1")
    assert "q" in str(info.value)


@pytest.mark.parametrize("text, pos", [("x+*y", 2), ("(x+1", 4), ("x $ y", 2), ("sin x", 4), ("", 0)])
def test_syntax_errors_report_position(text, pos):
    with pytest.raises(ExprSyntaxError) as info:
        P(text)
    assert info.value.position == pos


@pytest.mark.parametrize("text, point", [
    ("1/z", (0, 0, 0)), ("log(x)", (-1, 0, 0)), ("sqrt(x)", (-1, 0, 0)),
    ("x^0.5", (-4, 0, 0)), ("z^-1", (0, 0, 0)), ("exp(exp(x))", (10, 0, 0)),
])
def test_domain_errors(text, point):
    with pytest.raises(DomainError):
        evaluate(P(text), point)


def test_domain_error_names_point_in_batch():
    pts = np.array([[1.0, 1.0, 1.0], [1.0, 1.0, 0.0]])
    with pytest.raises(DomainError, match="0.0"):
        evaluate(P("1/z"), pts)


def test_vectorised_matches_pointwise():
    e = P("sin(x)*y^2 - exp(z)/(1+x^2)")
    pts = np.random.default_rng(0).uniform(-2, 2, size=(50, 3))
    batch = evaluate(e, pts)
    assert batch.shape == (50,)
    assert np.allclose(batch, [evaluate(e, p) for p in pts], rtol=0, atol=1e-15)
    assert evaluate(P("3"), pts).shape == (50,)


@pytest.mark.parametrize("text, var, point, expected", [
    ("(y^2+1)/4", "y", (0, 3, 0), 1.5),
    ("1/sqrt(y)", "y", (0, 1, 0), -0.5),
    ("x^y", "y", (2, 3, 0), 8 * math.log(2)),
    ("sin(x*y)", "x", (1, 2, 0), 2 * math.cos(2)),
    ("log(z)", "z", (0, 0, 4), 0.25),
    ("x", "y", (1, 1, 1), 0.0),
])
def test_differentiate_examples(text, var, point, expected):
    assert evaluate(differentiate(P(text), var), point) == pytest.approx(expected, rel=1e-13, abs=1e-15)


@pytest.mark.parametrize("text", ["(y^2+1)/4", "-x^2", "2^-1", "x-(y-z)", "x/(y*z)", "(-x)^2",
                                  "-(x+y)", "sqrt(1/(2*sqrt(y)))", "2*y*z^2", "cos(pi*x)", "1.5e-07*x"])
def test_print_parse_round_trip(text):
    e = P(text)
    printed = to_text(e)
    assert to_text(P(printed)) == printed
    pt = (0.7, 1.3, 0.4)
    assert evaluate(P(printed), pt) == pytest.approx(evaluate(e, pt), rel=1e-15)


def test_simplify_folds_constants_and_identities():
    assert simplify(P("0*x + 1*y + (2+3)")) == P("y + 5")
    assert simplify(P("x^1 - 0")) == Var("x", 0)
    assert add(Const(2.0), Const(3.0)) == Const(5.0)
    assert mul(Const(0.0), Var("z", 2)) == Const(0.0)
    assert to_text(simplify(P("--x"))) == "x"


def test_variables_of():
    assert {v.name for v in variables_of(P("x*sin(z)+1"))} == {"x", "z"}


# -- property-based round trip -------------------------------------------------

leaves = st.one_of(
    st.sampled_from([Var(n, i) for i, n in enumerate(XYZ)]),
    st.integers(0, 20).map(lambda k: Const(float(k))),
    st.sampled_from([Const(0.5), Const(2.25), Const(1e-3), Const(math.pi)]),
)


def _extend(children):
    return st.one_of(
        st.tuples(st.sampled_from("+-*/^"), children, children).map(lambda t: BinOp(*t)),
        children.map(Neg),
        st.tuples(st.sampled_from(["sin", "cos", "exp", "sqrt", "log"]), children).map(lambda t: Func(*t)),
    )


exprs = st.recursive(leaves, _extend, max_leaves=12)


@settings(max_examples=300, deadline=None)
@given(exprs)
def test_round_trip_is_a_fixed_point(e):
    once = to_text(e)
    again = to_text(P(once))
    assert again == once
    pt = (0.3, 1.7, 0.9)
    try:
        a = evaluate(e, pt)
    except DomainError:
        with pytest.raises(DomainError):
            evaluate(P(once), pt)
        return
    assert evaluate(P(once), pt) == pytest.approx(a, rel=1e-12, abs=1e-12)


@settings(max_examples=200, deadline=None)
@given(exprs)
def test_simplify_preserves_value(e):
    pt = (0.3, 1.7, 0.9)
    try:
        a = evaluate(e, pt)
    except DomainError:
        return
    try:
        b = evaluate(simplify(e), pt)
    except DomainError:  # simplification may only remove domain errors, never add them
        pytest.fail("simplify introduced a domain error")
    assert b == pytest.approx(a, rel=1e-9, abs=1e-9)


# -- symbolic vs finite differences ------------------------------------------------


def random_expr(rng, depth):
    if depth == 0 or rng.random() < 0.2:
        if rng.random() < 0.7:
            k = int(rng.integers(3))
            return Var(XYZ[k], k)
        return Const(float(rng.choice([0.5, 1.0, 2.0, 3.0, 0.25])))
    r = rng.random()
    a = random_expr(rng, depth - 1)
    if r < 0.55:
        b = random_expr(rng, depth - 1)
        op = str(rng.choice(["+", "-", "*", "/"]))
        if op == "/":
            b = BinOp("+", Const(1.5), BinOp("*", b, b))  # keep denominators away from 0
        return BinOp(op, a, b)
    if r < 0.7:
        exponent = float(rng.choice([2.0, 3.0, -1.0, 0.5]))
        if exponent < 1:
            a = BinOp("+", Const(0.5), BinOp("*", a, a))
        return BinOp("^", a, Const(exponent))
    if r < 0.8:
        return Neg(a)
    name = str(rng.choice(["sin", "cos", "exp", "sqrt", "log"]))
    if name in ("sqrt", "log"):
        a = BinOp("+", Const(1.0), BinOp("*", a, a))
    if name == "exp":
        a = Func("sin", a)
    return Func(name, a)


def fd(e, point, k, h=1e-3):
    total = 0.0
    for step, w in ((-2, 1.0), (-1, -8.0), (1, 8.0), (2, -1.0)):
        q = np.array(point, dtype=float)
        q[k] += step * h
        total += w * evaluate(e, q)
    return total / (12 * h)


def test_symbolic_derivatives_match_finite_differences_10k_probes():
    rng = np.random.default_rng(20240611)
    start = time.perf_counter()
    probes = checked = 0
    worst = 0.0
    while probes < 10_000:
        e = random_expr(rng, 4)
        k = int(rng.integers(3))
        d = differentiate(e, XYZ[k])
        for point in rng.uniform(-1.5, 1.5, size=(5, 3)):
            probes += 1
            try:
                sym = evaluate(d, point)
                num = fd(e, point, k)
                # the finite difference itself is unreliable where two step sizes disagree
                if abs(num - fd(e, point, k, 5e-4)) > 1e-7 * max(1.0, abs(num)):
                    continue
            except DomainError:
                continue
            checked += 1
            err = abs(sym - num) / max(1.0, abs(sym))
            worst = max(worst, err)
    elapsed = time.perf_counter() - start
    assert checked > 9_000
    assert worst <= 1e-5, worst
    assert elapsed <= 60.0
