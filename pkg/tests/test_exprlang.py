import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from symplectic_fluid.exprlang import ExpressionError, free_names, parse_expression
from symplectic_fluid.geometry import expr as ex

POINT = {"t": 0.3, "x": 1.1, "y": -0.7, "z": 2.4}


def at_point(node, pt=POINT):
    coords = tuple(np.asarray(pt[k]) for k in ("t", "x", "y", "z"))
    return float(np.asarray(ex.evaluate_many([node], coords)[0]))


leaves = st.sampled_from(["t", "x", "y", "z", "pi", "2", "0.5", "1.5e-1"])


def _combine(children):
    unary = st.builds(lambda f, a: f"{f}({a})", st.sampled_from(["sin", "cos"]), children)
    binary = st.builds(lambda a, op, b: f"({a} {op} {b})", children, st.sampled_from(["+", "-", "*"]), children)
    power = st.builds(lambda a, k: f"({a})^{k}", children, st.integers(0, 3))
    neg = st.builds(lambda a: f"-{a}", children)
    return unary | binary | power | neg


expressions = st.recursive(leaves, _combine, max_leaves=8)


class TestParse:
    @pytest.mark.parametrize(
        "text, expected",
        [
            ("sin(y)", math.sin(-0.7)),
            ("2*x + 3", 2 * 1.1 + 3),
            ("-x^2", -(1.1 ** 2)),
            ("2^3^2", 2.0 ** 9),
            ("x**2 / 4", 1.1 ** 2 / 4),
            ("exp(t) * cos(z)", math.exp(0.3) * math.cos(2.4)),
            ("pi", math.pi),
            ("(x + y) * (x - y)", 1.1 ** 2 - 0.49),
            (".5e1", 5.0),
        ],
    )
    def test_examples(self, text, expected):
        assert at_point(parse_expression(text)) == pytest.approx(expected, rel=1e-14)

    @pytest.mark.parametrize(
        "text, position",
        [
            ("sin(y", 5),
            ("x +", 3),
            ("foo(x)", 0),
            ("x $ y", 2),
            ("x^0.5", 1),
            ("x / 0", 2),
            ("(x))", 3),
            ("", 0),
        ],
    )
    def test_errors_report_position(self, text, position):
        with pytest.raises(ExpressionError) as info:
            parse_expression(text)
        assert info.value.position == position
        assert f"position {position}" in str(info.value)

    def test_rejects_non_string(self):
        with pytest.raises(TypeError):
            parse_expression(3.0)

    def test_free_names(self):
        assert free_names(parse_expression("sin(y) + t*z")) == {"t", "y", "z"}
        assert free_names(parse_expression("2*pi")) == set()

    @given(text=expressions)
    @settings(max_examples=80, deadline=None)
    def test_agrees_with_python_evaluation(self, text):
        namespace = {"sin": math.sin, "cos": math.cos, "pi": math.pi, **POINT}
        expected = eval(text.replace("^", "**"), {"__builtins__": {}}, namespace)
        got = at_point(parse_expression(text))
        assert got == pytest.approx(expected, rel=1e-9, abs=1e-9)

    @given(text=expressions)
    @settings(max_examples=40, deadline=None)
    def test_derivative_matches_central_difference(self, text):
        node = parse_expression(text)
        h = 1e-5
        for axis, name in enumerate(("t", "x", "y", "z")):
            up = dict(POINT, **{name: POINT[name] + h})
            down = dict(POINT, **{name: POINT[name] - h})
            fd = (at_point(node, up) - at_point(node, down)) / (2 * h)
            exact = at_point(node.diff(axis))
            assert exact == pytest.approx(fd, rel=1e-4, abs=1e-4 * (1 + abs(at_point(node))))
