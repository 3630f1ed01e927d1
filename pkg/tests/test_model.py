import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from costly_recognition import catalog
from costly_recognition.model import (
    AgentSpec,
    DomainError,
    Equilibrium,
    GameSpec,
    InfeasibleTarget,
    Kinked,
    Linear,
    ModelError,
    ObjectiveSpec,
    Power,
    eval_function,
    invert_effective_impact,
    is_concave,
    is_convex,
    left_derivative,
    recognition_probabilities,
)


def test_linear_value_derivative_inverse():
    f = Linear(0.2)
    assert eval_function(f, 0.9375) == pytest.approx(0.1875, abs=1e-15)
    assert eval_function(f, 3.0, "derivative") == 0.2
    assert f.inverse(0.1875) == pytest.approx(0.9375, abs=1e-15)


def test_power_value_and_derivative():
    c = Power(1.0, 2.0)
    assert eval_function(c, 0.5) == pytest.approx(0.25)
    assert eval_function(c, 0.5, "derivative") == pytest.approx(1.0)
    # concave impact has an infinite slope at zero
    assert Power(1.0, 0.5).derivative(0.0) == math.inf


def test_kinked_one_sided_derivatives():
    c = Kinked(Power(1.0, 2.0), threshold=0.5, outer_slope=10.0)
    assert c.value(0.5) == pytest.approx(0.25)
    assert c.value(0.6) == pytest.approx(0.25 + 1.0)
    assert left_derivative(c, 0.5) == pytest.approx(1.0)
    assert eval_function(c, 0.5, "derivative") == pytest.approx(10.0)
    assert c.inverse(c.value(0.7)) == pytest.approx(0.7)
    assert is_convex(c)


def test_kinked_with_falling_slope_is_not_convex():
    assert not is_convex(Kinked(Power(1.0, 2.0), threshold=1.0, outer_slope=0.5))
    assert is_concave(Power(2.0, 0.5))


@pytest.mark.parametrize(
    "make",
    [
        lambda: Linear(0.0),
        lambda: Power(-1.0, 2.0),
        lambda: Power(1.0, 0.0),
        lambda: Kinked(Linear(1.0), threshold=0.0, outer_slope=1.0),
        lambda: Kinked(Kinked(Linear(1.0), 1.0, 2.0), 2.0, 3.0),
    ],
)
def test_invalid_functions_are_rejected(make):
    with pytest.raises(ModelError):
        make()


def test_negative_effort_is_outside_the_domain():
    with pytest.raises(DomainError):
        eval_function(Linear(1.0), -1e-3)


def test_agent_validation():
    with pytest.raises(ModelError):
        AgentSpec(Linear(1.0), Linear(1.0), delta=1.0)
    with pytest.raises(ModelError):
        AgentSpec(Power(1.0, 1.5), Linear(1.0), delta=0.5)  # convex impact
    with pytest.raises(ModelError):
        AgentSpec(Linear(1.0), Power(1.0, 0.5), delta=0.5)  # concave cost
    with pytest.raises(ModelError):
        AgentSpec(Linear(1.0), Linear(1.0), delta=0.5, alpha=-1.0)


def test_game_validation():
    a = AgentSpec(Linear(1.0), Linear(1.0), 0.5)
    with pytest.raises(ModelError):
        GameSpec([a], 1)
    with pytest.raises(ModelError):
        GameSpec([a, a], 3)
    with pytest.raises(ModelError):
        GameSpec([a.with_mechanism(0, 0), a.with_mechanism(0, 0)], 1)


def test_recognition_probabilities_of_published_k1_profile():
    g = catalog.example1(1)
    p = recognition_probabilities([3 / 16, 15 / 16, 15 / 16, 15 / 16], g.agents)
    np.testing.assert_allclose(p, 0.25, atol=1e-15)


def test_recognition_probabilities_with_no_output_are_uniform():
    a = AgentSpec(Linear(1.0), Linear(1.0), 0.5)
    np.testing.assert_allclose(recognition_probabilities([0.0, 0.0], [a, a]), 0.5)


def test_invert_effective_impact_with_headstart():
    a = AgentSpec(Linear(1.0), Linear(1.0), 0.5, alpha=2.0, beta=0.1)
    assert invert_effective_impact(a, 0.5) == pytest.approx(0.2)
    assert invert_effective_impact(a, 0.1) == 0.0
    with pytest.raises(InfeasibleTarget):
        invert_effective_impact(a, 0.05)
    idle = a.with_mechanism(0.0, 0.3)
    with pytest.raises(InfeasibleTarget):
        invert_effective_impact(idle, 0.4)


@settings(max_examples=200, deadline=None)
@given(
    a=st.floats(0.3, 2.0),
    r=st.floats(0.3, 1.0),
    alpha=st.floats(0.1, 3.0),
    beta=st.floats(0.0, 1.0),
    x=st.floats(0.0, 50.0),
)
def test_invert_effective_impact_round_trips(a, r, alpha, beta, x):
    agent = AgentSpec(Power(a, r), Linear(1.0), 0.5, alpha, beta)
    target = agent.output(x)
    back = invert_effective_impact(agent, target)
    assert agent.output(back) == pytest.approx(target, rel=1e-10, abs=1e-12)


def test_objective_forms():
    assert ObjectiveSpec().form == "total_effort"
    with pytest.raises(ModelError):
        ObjectiveSpec("most_effort")
    with pytest.raises(ModelError):
        ObjectiveSpec("fairness_penalized", lam=-1.0)
    with pytest.raises(ModelError):
        ObjectiveSpec("fairness_penalized", target=(0.5, 0.6))
    with pytest.raises(ModelError):
        ObjectiveSpec("weighted_effort")
    np.testing.assert_allclose(ObjectiveSpec().target_for(4), 0.25)


def test_equilibrium_is_read_only_and_reports_coalitions():
    psi = np.array([[0, 1, 0], [1, 0, 0], [1, 0, 0]], float)
    eq = Equilibrium(np.ones(3), np.full(3, 1 / 3), np.array([2 / 3, 1 / 3, 0]), psi, np.ones(3), 1.0, 0.1, 0.8, (2, 2, 3))
    with pytest.raises(ValueError):
        eq.x[0] = 2.0
    assert eq.coalitions() == [[1, 2], [1, 2], [1, 3]]
    assert eq.members(2) == [0, 1]
    assert eq.total_effort() == 3.0
