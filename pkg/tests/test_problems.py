import json
import math
import zlib

import numpy as np
import pytest

from dbvp.exceptions import (
    EvaluationError,
    ExpressionSyntaxError,
    ProblemFormatError,
    UnknownIdentifierError,
)
from dbvp.monotone import NonlinearProblem, is_lower_solution, is_upper_solution
from dbvp.problems import (
    BinOp,
    Neg,
    Num,
    ProblemDocument,
    Var,
    builtin,
    evaluate,
    magnitude,
    parse,
    parse_linear_document,
    pretty,
    reference_M,
)

# safe on t in [0.5, 10], y in [-2, 2], T in [1, 25]; exp((T+1)^2) overflows beyond
CORPUS = [
    "3.5",
    "y",
    "t",
    "T",
    "-y",
    "--y",
    "t + y",
    "t - y - T",
    "t * y / T",
    "t / (y^2 + 1) / 3",
    "2^3^2",
    "-2^2",
    "-t^2",
    "(-t)^2",
    "t^-1",
    "2^-y",
    "exp(y)/exp((T+1)^2)",
    "exp(t) - exp(y)",
    "(T+1)*t - t^2/2",
    "sin(t)*cos(y)",
    "sin(t)^2 + cos(t)^2",
    "log(t)",
    "log(1 + y^2)",
    "sqrt(t)",
    "sqrt(abs(y))",
    "abs(y - 1) * abs(t - 5)",
    "exp(-t*t/T)",
    "1e-3*y^3 - 2.5E2*t",
    "0.5*(1 + sin(t)/2) + 0.1*sin(y) - 0.01*y^3 - 0.3*y",
    "((((t))))",
    "t*(T+1-t)/2",
    "exp(sin(cos(y)))",
    "abs(y)^0.5",
    "t^y",
    "(t + 1)^(y - 1)",
    "-(-(-t))",
    "1/(1 + exp(-y))",
    "log(exp(t))",
    "sqrt(t^2 + y^2)",
    "cos(T*t)/(2 + sin(y))",
    "t - -y",
    "t * -y",
    "-t * y",
    "t/2/2",
    "t - 1 - 2",
    "2*3 + 4*5 - 6/3",
    "exp(y) * (t - T) ^ 2",
    "abs(-3)",
    ".5 + 5. + 1.25e+1",
    "T^2 - 2*T*t + t^2",
]


def _python_eval(source, t, y, T):
    # Python's ** has the same precedence and associativity as ^ here
    env = {"t": t, "y": y, "T": T, "exp": math.exp, "sin": math.sin, "cos": math.cos,
           "log": math.log, "sqrt": math.sqrt, "abs": abs}
    return eval(source.replace("^", "**"), {"__builtins__": {}}, env)


def test_corpus_size():
    assert len(CORPUS) == 50
    assert len(set(CORPUS)) == 50


@pytest.mark.parametrize("source", CORPUS)
def test_pretty_round_trip(source):
    e = parse(source)
    assert parse(pretty(e)) == e
    assert parse(str(e)) == e


@pytest.mark.parametrize("source", CORPUS)
def test_evaluate_matches_python_arithmetic(source):
    e = parse(source)
    rng = np.random.default_rng(zlib.crc32(source.encode()))
    for _ in range(100):
        t = float(rng.uniform(0.5, 10))
        y = float(rng.uniform(-2, 2))
        T = int(rng.integers(1, 26))
        got = evaluate(e, t, y, T)
        want = _python_eval(source, t, y, T)
        # libm and numpy may differ by an ulp inside a subtraction, so the
        # error is measured against the expression's magnitude bound
        scale = max(abs(want), float(magnitude(e, t, y, T)))
        assert abs(got - want) <= 1e-14 * scale, (t, y, T, got, want)


def test_vectorized_evaluation_matches_scalar():
    e = parse("exp(t) - exp(y) + t*y^2")
    t = np.arange(1.0, 6.0)
    y = np.linspace(-1, 1, 5)
    vec = evaluate(e, t, y, 4)
    for i in range(5):
        assert vec[i] == evaluate(e, t[i], y[i], 4)
    np.testing.assert_array_equal(evaluate(parse("2"), t, y), np.full(5, 2.0))


def test_precedence_and_associativity():
    assert parse("-2^2")(0) == -4.0
    assert parse("2^3^2")(0) == 512.0
    assert parse("8/4/2")(0) == 1.0
    assert parse("1 - 2 - 3")(0) == -4.0
    assert parse("2*-3")(0) == -6.0
    assert parse("-2^2") == Neg(BinOp("^", Num(2.0), Num(2.0)))
    assert parse("  t\t+\ny ") == BinOp("+", Var("t"), Var("y"))


@pytest.mark.parametrize(
    "source, t, y, T, expected",
    [
        ("exp(y)/exp((T+1)^2)", 0.0, 0.0, 3, math.exp(-16)),
        ("exp(t) - exp(y)", 1.0, 0.0, 3, math.e - 1),
        ("(T+1)*t - t^2/2", 2.0, 0.0, 3, 6.0),
        ("3.5", 7.0, -1.0, 9, 3.5),
        ("y", 0.0, -2.0, 0, -2.0),
    ],
)
def test_worked_values(source, t, y, T, expected):
    assert evaluate(parse(source), t, y, T) == pytest.approx(expected, rel=1e-15)


@pytest.mark.parametrize(
    "source, position",
    [("t +", 3), ("(t", 2), ("t)", 1), ("2 3", 2), ("t $ y", 2), ("", 0), ("exp t", 4), ("1..2", 2)],
)
def test_syntax_errors_carry_position(source, position):
    with pytest.raises(ExpressionSyntaxError) as err:
        parse(source)
    assert err.value.position == position


@pytest.mark.parametrize("name", ["x", "tan", "Y", "pi"])
def test_unknown_identifier(name):
    with pytest.raises(UnknownIdentifierError) as err:
        parse(f"1 + {name}(t)" if name == "tan" else f"1 + {name}")
    assert err.value.name == name


@pytest.mark.parametrize(
    "source, t, y, piece",
    [
        ("1/(t-1)", 1.0, 0.0, "division by zero"),
        ("log(y)", 1.0, 0.0, "log"),
        ("log(y)", 1.0, -1.0, "log"),
        ("sqrt(y)", 1.0, -1.0, "sqrt"),
        ("exp(y)", 1.0, 1000.0, "non-finite"),
        ("y^0.5", 1.0, -4.0, "negative base"),
        ("0^-1", 1.0, 0.0, "zero to a negative power"),
    ],
)
def test_domain_faults_are_reported(source, t, y, piece):
    with pytest.raises(EvaluationError) as err:
        evaluate(parse(source), t, y, 3)
    assert piece in str(err.value)
    assert err.value.subexpression


def test_vector_fault_names_offending_node():
    with pytest.raises(EvaluationError) as err:
        evaluate(parse("1/(t-3)"), np.arange(1.0, 5.0), np.zeros(4))
    assert err.value.t == 3.0


def test_builtins():
    d = builtin("example1", 3)
    assert d.f == "exp(y)/exp((T+1)^2)"
    assert evaluate(parse(d.upper), 4, 0, 3) == 8.0
    d = builtin("example2", 3)
    assert (d.f, d.lower, d.upper) == ("exp(t) - exp(y)", "0", "t")
    assert evaluate(parse(d.upper), 0, 0, 3) == 0.0
    assert builtin("example1").T is None
    with pytest.raises(ProblemFormatError):
        builtin("example3")
    assert reference_M("example1", 3) == pytest.approx(math.exp(-16))


@pytest.mark.parametrize("name", ["example1", "example2"])
@pytest.mark.parametrize("T", range(1, 26))
def test_builtin_brackets_validate(name, T):
    p = NonlinearProblem.from_document(builtin(name, T))
    b = p.bracket()
    assert is_lower_solution(p, b.alpha)
    assert is_upper_solution(p, b.beta)


def test_document_json_round_trip():
    text = json.dumps({"T": 4, "f": "exp(t) - exp(y)", "lower": "0", "upper": "t",
                       "lambda": -0.5, "M": 1.0, "tol": 1e-9, "max_iter": 50})
    d = ProblemDocument.from_json(text)
    assert d.lam == -0.5
    assert d.to_dict() == json.loads(text)
    assert d.with_T(9).T == 9


@pytest.mark.parametrize(
    "data",
    [
        {"T": 3, "f": "y", "lower": "0"},
        {"T": 3, "f": "y", "lower": "0", "upper": "t", "extra": 1},
        {"T": 0, "f": "y", "lower": "0", "upper": "t"},
        {"T": 3, "f": "y", "lower": "y", "upper": "t"},
        {"T": 3, "f": "y +", "lower": "0", "upper": "t"},
        {"T": 3, "f": "y", "lower": "0", "upper": "t", "tol": -1},
        {"T": 3, "f": "y", "lower": "0", "upper": "t", "max_iter": 2.5},
        {"T": 3, "f": 5, "lower": "0", "upper": "t"},
        [1, 2],
    ],
)
def test_bad_documents_rejected(data):
    with pytest.raises((ProblemFormatError, ExpressionSyntaxError)):
        ProblemDocument.from_dict(data)


def test_malformed_json():
    with pytest.raises(ProblemFormatError):
        ProblemDocument.from_json("{not json")


def test_linear_document():
    p = parse_linear_document({"T": 3, "lambda": 0.0, "h": [1, 2, 3], "B": 1.5})
    assert p.B == 1.5 and p.h.values.tolist() == [0.0, 1.0, 2.0, 3.0, 0.0]
    for bad in ({"T": 3, "lambda": 0.0}, {"T": 3, "lambda": 0.0, "h": "x"},
                {"T": 3, "lambda": 0.0, "h": [1], "C": 2}):
        with pytest.raises(ProblemFormatError):
            parse_linear_document(bad)
