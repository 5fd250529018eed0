import math

import numpy as np
import pytest

from riskmeter.core import (DimensionError, LinearFunctional, Position,
                            RiskValue, ScenarioSpace, is_order_unit,
                            is_strictly_positive_element, pair)


def test_pair_examples():
    assert pair([1.0, 0.0], [3.0, 7.0]) == 3.0
    assert pair([0.0, 0.0], [5.0, -2.0]) == 0.0
    assert pair([0.5, 0.5], [-2.0, 4.0]) == 1.0


def test_pair_length_mismatch():
    with pytest.raises(DimensionError):
        pair([1.0, 2.0], [1.0, 2.0, 3.0])


def test_pair_bilinear():
    rng = np.random.default_rng(0)
    for _ in range(200):
        n = rng.integers(1, 12)
        w1, w2 = rng.normal(size=n), rng.normal(size=n)
        x = rng.normal(size=n)
        a, b = rng.normal(), rng.normal()
        lhs = pair(a * w1 + b * w2, x)
        rhs = a * pair(w1, x) + b * pair(w2, x)
        assert lhs == pytest.approx(rhs, rel=1e-12, abs=1e-12)


def test_positive_functional_pairs_nonnegatively():
    rng = np.random.default_rng(1)
    for _ in range(200):
        n = rng.integers(1, 10)
        w = np.abs(rng.normal(size=n))
        x = np.abs(rng.normal(size=n))
        assert pair(w, x) >= 0.0


def test_strict_positivity_and_order_units():
    assert is_strictly_positive_element([1.0, 2.0])
    assert not is_strictly_positive_element([0.0, 1.0])
    assert not is_strictly_positive_element([-1.0, 1.0])
    # identical on a finite scenario space
    for x in ([1.0, 2.0], [0.0, 1.0], [-1.0, 1.0]):
        assert is_order_unit(x) == is_strictly_positive_element(x)


def test_scenario_space_validation():
    with pytest.raises(ValueError):
        ScenarioSpace(np.array([0.5, 0.0, 0.5]))
    with pytest.raises(ValueError):
        ScenarioSpace(np.array([0.5, 0.4]))
    sp = ScenarioSpace.uniform(4)
    assert sp.n == 4
    with pytest.raises(DimensionError):
        sp.check_length(np.zeros(3))


def test_functional_views():
    psi = LinearFunctional([0.2, 0.6])
    assert psi.is_positive()
    assert np.allclose(psi.as_measure(), [0.25, 0.75])
    assert not LinearFunctional([-0.1, 1.0]).is_positive()


def test_risk_value_invariants():
    v = RiskValue.finite(1.5, certificate=np.array([1.0]))
    assert v.is_finite and v.value == 1.5
    assert RiskValue.plus_inf().value == math.inf
    assert RiskValue.minus_inf().value == -math.inf
    with pytest.raises(ValueError):
        RiskValue("plus_inf", certificate=np.array([1.0]))
    with pytest.raises(ValueError):
        RiskValue("finite", math.inf)


def test_position_immutable():
    x = Position([1.0, 2.0])
    with pytest.raises(ValueError):
        x.x[0] = 5.0
