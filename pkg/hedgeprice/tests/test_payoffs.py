import math

import numpy as np
import pytest

from hedgeprice.errors import BadParams, EvaluationFailure, NotSeparable, ValidationFailed
from hedgeprice.payoffs import (
    CATALOG,
    CONVEX,
    SCALING_SQRT_N,
    SEPARABLE,
    Payoff,
    SeparablePartition,
    evaluate,
    make_payoff,
    separable_decompose,
)
from hedgeprice.submodular import MODULAR, SUBMODULAR, SUPERMODULAR


def test_catalog_values():
    S = np.array([[1.0, 2.0], [-1.0, 0.5], [0.0, -3.0]])
    assert make_payoff("max_option", {"K": 1})(S).tolist() == [1.0, 0.0, 0.0]
    assert make_payoff("min_option", {"K": 0})(S).tolist() == [1.0, 0.0, 0.0]
    assert make_payoff("call", {"K": 0.5})(S).tolist() == [0.5, 0.0, 0.0]
    assert make_payoff("linear", {"weights": [1, -1], "offset": 2})(S).tolist() == [1.0, 0.5, 5.0]
    assert make_payoff("abs_sum", {"d": 2})(S).tolist() == [3.0, 1.5, 3.0]
    assert make_payoff("quadratic", {"matrix": [[1, 0], [0, 1]]})(S).tolist() == pytest.approx([5.0, 1.25, 9.0])


def test_butterfly_tent():
    p = make_payoff("butterfly")
    x = np.array([[-1.0], [-0.5], [0.0], [0.5], [1.0], [1.5], [2.0]])
    assert p(x) == pytest.approx([0.0, 0.0, 0.5, 1.0, 0.5, 0.0, 0.0])
    with pytest.raises(BadParams):
        make_payoff("butterfly", {"breakpoints": [1, 0, 2]})


def test_cone_peak_and_support():
    p = make_payoff("cone")
    assert p([0.5, 0.0]) == pytest.approx(1.0)
    assert p([-0.5, 0.0]) == 0.0
    assert p([0.5, 1.0]) == 0.0
    with pytest.raises(BadParams):
        make_payoff("cone", {"height": 0})


def test_catalog_structures():
    assert make_payoff("max_option").structure == {SUBMODULAR, CONVEX}
    assert make_payoff("min_option").structure == {SUPERMODULAR}
    assert make_payoff("double_butterfly").structure == {SEPARABLE, MODULAR}
    assert make_payoff("cone").structure == frozenset()
    assert make_payoff("max_option").declared_modularity == SUBMODULAR
    assert make_payoff("linear", {"weights": [1, 2]}).declared_modularity == MODULAR
    assert SUPERMODULAR in make_payoff("quadratic", {"matrix": [[1, 1], [1, 1]]}).structure
    assert SUBMODULAR in make_payoff("ridge", {"weights": [1, -1]}).structure


def test_declared_structure_replaces_catalog():
    p = make_payoff("cone", declared_structure=["supermodular"])
    assert p.structure == {SUPERMODULAR}
    with pytest.raises(BadParams):
        make_payoff("cone", declared_structure=["smooth"])


def test_unknown_kind_and_bad_params():
    with pytest.raises(BadParams):
        make_payoff("asian")
    with pytest.raises(BadParams):
        make_payoff("max_option", {"K": "strike"})
    with pytest.raises(BadParams):
        make_payoff("linear")
    with pytest.raises(BadParams):
        make_payoff("max_option", scaling="log")
    assert "max_option" in CATALOG


def test_sqrt_n_scaling():
    p = make_payoff("max_option", {"K": 0}, scaling=SCALING_SQRT_N)
    assert evaluate(p, [4.0, -2.0], N=4) == pytest.approx(2.0)
    assert p([[3.0, 3.0]], 9).tolist() == pytest.approx([1.0])
    with pytest.raises(BadParams):
        evaluate(p, [1.0, 1.0])


def test_non_finite_output_is_an_evaluation_failure():
    p = Payoff(kind="blowup", fn=lambda S: np.full(len(S), np.inf))
    with pytest.raises(EvaluationFailure):
        p([1.0, 2.0])
    table = make_payoff("table", {"axes": [[0.0, 1.0]], "values": [0.0, math.nan]})
    with pytest.raises(EvaluationFailure):
        table([0.5])


def test_table_interpolates():
    p = make_payoff("table", {"axes": [[0.0, 1.0], [0.0, 2.0]], "values": [[0.0, 2.0], [1.0, 3.0]]})
    assert p([0.5, 1.0]) == pytest.approx(1.5)
    with pytest.raises(BadParams):
        make_payoff("table", {"axes": [[1.0, 0.0]], "values": [0.0, 1.0]})


def test_separable_decompose():
    p = make_payoff("double_butterfly")
    part = separable_decompose(p)
    assert part.blocks == ((0,), (1,))
    S = np.array([[0.5, 0.0], [1.0, -2.0]])
    assert part.evaluate(S) == pytest.approx(p(S))
    with pytest.raises(NotSeparable):
        separable_decompose(make_payoff("max_option"))


def test_separable_from_components():
    p = make_payoff(
        "separable",
        {"components": [{"kind": "call", "K": 0}, {"kind": "max_option", "K": 0}], "blocks": [[1], [0, 2]]},
    )
    S = np.array([[1.0, 2.0, -1.0]])
    assert p(S).tolist() == [2.0 + 1.0]
    assert SEPARABLE in p.structure and MODULAR not in p.structure
    with pytest.raises(BadParams):
        make_payoff("separable", {"components": [{"kind": "call"}], "blocks": [[0, 1]]})


def test_bad_partition_is_caught():
    wrong = SeparablePartition(blocks=((0,), (1,)), components=(make_payoff("call"), make_payoff("call")))
    p = Payoff(kind="max", fn=lambda S: S.max(axis=1), structure=frozenset({SEPARABLE}), partition=wrong)
    with pytest.raises(ValidationFailed):
        separable_decompose(p)
    with pytest.raises(BadParams):
        SeparablePartition(blocks=((0,), (0,)), components=(make_payoff("call"), make_payoff("call")))


def test_negated_and_shifted():
    p = make_payoff("max_option", {"K": 0})
    n = p.negated()
    assert n.structure == {SUPERMODULAR}
    assert n([1.0, -1.0]) == -1.0
    s = p.shifted(2.5)
    assert s([1.0, -1.0]) == 3.5
    db = make_payoff("double_butterfly").negated()
    assert separable_decompose(db).evaluate(np.array([[0.5, 0.5]])) == pytest.approx([-2.0])
