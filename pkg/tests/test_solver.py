import dataclasses

import numpy as np
import pytest
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st

from costly_recognition import catalog
from costly_recognition.design import mechanism_for_profile
from costly_recognition.model import AgentSpec, GameSpec, Linear, Power
from costly_recognition.solver import (
    BracketError,
    SolverConfig,
    coalition_fill,
    fixed_profile_values,
    solve,
    solve_all,
    step_i_pointwise,
    step_ii_solve_y,
    step_iii_solve_vdelta,
    step_iv_solve_vl,
    verify_equilibrium,
)

# --- pointwise levels ------------------------------------------------------


def test_recognition_of_identity_agent_under_full_spread():
    # with spread one, c = f = identity gives Y = 1 - p
    agent = AgentSpec(Linear(1.0), Linear(1.0), 0.5)
    p, mu = step_i_pointwise(agent, 0.75, 0.0, 1.0)
    assert p == pytest.approx(0.25, abs=1e-12)
    assert mu == 0.0


def test_recognition_below_headstart_is_rejected():
    agent = AgentSpec(Linear(1.0), Linear(1.0), 0.5, beta=0.5)
    with pytest.raises(BracketError):
        step_i_pointwise(agent, 0.25, 0.0, 1.0)


def test_aggregate_output_of_dictatorial_four_agent_game():
    assert step_ii_solve_y(0.0, 1.0, catalog.example1(1)) == pytest.approx(0.75, abs=1e-10)


def test_vote_price_of_four_agent_game_at_published_surplus():
    assert step_iii_solve_vdelta(0.9600, catalog.example1(2)) == pytest.approx(0.0342, abs=5e-4)


def test_vote_price_of_three_agent_construction_is_exact():
    assert step_iii_solve_vdelta(105 / 124, catalog.example2()) == pytest.approx(3 / 31, abs=1e-9)


def test_residual_surplus_root_of_four_agent_game():
    roots = step_iv_solve_vl(catalog.example1(2))
    assert max(roots) == pytest.approx(0.9600, abs=5e-4)


# --- frozen equilibria ------------------------------------------------------

# (p1, p2-4, x1, x2-4, total) solved at bisect_tol 1e-11; k = 3 differs from
# the published column, see test_published_k3_column_is_not_an_equilibrium
FOUR_AGENT = {
    1: (0.25, 0.25, 0.1875, 0.9375, 3.0),
    2: (0.23217312, 0.25594229, 0.17114188, 0.94331430, 3.00108477),
    3: (0.23864418, 0.25378527, 0.16560095, 0.88053861, 2.80721679),
    4: (0.25, 0.25, 0.15697674, 0.78488372, 2.51162791),
}


@pytest.mark.parametrize("k", [1, 2, 3, 4])
def test_four_agent_game_frozen_values(k):
    g = catalog.example1(k)
    eq = solve(g)
    got = (eq.p[0], eq.p[1], eq.x[0], eq.x[1], eq.total_effort())
    np.testing.assert_allclose(got, FOUR_AGENT[k], atol=1e-8)
    np.testing.assert_allclose(eq.p[1:], eq.p[1])
    assert verify_equilibrium(g, eq).passed


def test_four_agent_game_published_columns():
    for k in (1, 2, 4):
        eq = solve(catalog.example1(k))
        p, x = catalog.table1_profile(k)
        np.testing.assert_allclose(eq.p, p, atol=5e-4)
        np.testing.assert_allclose(eq.x, x, atol=5e-4)
        assert eq.total_effort() == pytest.approx(catalog.TABLE1[k][4], abs=5e-4)


def test_published_k3_column_is_not_an_equilibrium():
    # the published k = 3 profile matches the lottery to rounding but misses
    # the first-order conditions by two orders of magnitude more than the
    # other columns do
    eta, d = np.array([1, 0.2, 0.2, 0.2]), np.array([0.1, 0.5, 0.5, 0.5])
    gaps = {}
    for k in (2, 3, 4):
        p, x = catalog.table1_profile(k)
        Y = float(eta @ x)
        assert np.max(np.abs(eta * x / Y - p)) < 1e-4
        VL, VD, mu = fixed_profile_values(p, eta * x, d, k)
        gaps[k] = float(np.max(np.abs(Y - ((1 - p) * (VL + VD) - mu * VD))))
    assert gaps[2] < 2e-4 and gaps[4] < 2e-4
    assert gaps[3] > 5e-3


def test_four_agent_k2_aggregates():
    eq = solve(catalog.example1(2))
    agg = catalog.TABLE1_K2_AGGREGATES
    assert eq.VL == pytest.approx(agg["VL"], abs=5e-4)
    assert eq.VDelta == pytest.approx(agg["VDelta"], abs=5e-4)
    np.testing.assert_allclose(eq.mu, agg["mu"], atol=5e-4)


def test_three_agent_construction_is_exact():
    g = catalog.example2(0.01)
    eq = solve(g)
    ref = catalog.example2_expected(0.01)
    for key in ("x", "p", "v"):
        np.testing.assert_allclose(getattr(eq, key), ref[key], rtol=1e-12, atol=1e-13)
    assert eq.VL == pytest.approx(105 / 124, abs=1e-12)
    assert eq.VDelta == pytest.approx(3 / 31, abs=1e-12)
    assert eq.coalitions() == [[1, 2], [1, 2], [1, 3]]
    # delta * v = (0.0565, 3/31, 3/31): agent 1 below the vote price, 2 and 3 at it
    assert eq.partition == (1, 2, 2)


def test_three_agent_construction_is_scale_free():
    a = solve(catalog.example2(0.01, scale=1.0))
    b = solve(catalog.example2(0.01, scale=7.5))
    np.testing.assert_allclose(a.x, b.x, atol=1e-11)


def test_seven_agent_kinked_game_under_both_rules():
    p, x = catalog.example3_targets()
    agents = catalog.example3(5).agents
    m5 = mechanism_for_profile(agents, x, p, 5)
    for k in (5, 4):
        g = GameSpec(agents, k).with_mechanism(m5.alpha, m5.beta)
        eq = solve(g)
        rep = verify_equilibrium(g, eq)
        assert rep.passed, rep.residuals
        if k == 5:
            np.testing.assert_allclose(eq.x, x, atol=1e-10)
            np.testing.assert_allclose(eq.p, p, atol=1e-10)


# --- structure --------------------------------------------------------------


def test_dictatorial_rule_has_no_coalitions():
    eq = solve(catalog.example1(1))
    assert eq.VL + eq.VDelta == pytest.approx(1.0, abs=1e-10)
    assert not eq.mu.any()
    assert not eq.psi.any()


def test_unanimity_includes_everyone():
    eq = solve(catalog.example1(4))
    np.testing.assert_allclose(eq.psi, 1.0 - np.eye(4))
    np.testing.assert_allclose(eq.mu, 1.0 - eq.p, atol=1e-12)


def test_coalition_fill_matches_marginals():
    p = np.full(3, 1 / 3)
    mu = np.array([2 / 3, 1 / 3, 0.0])
    psi = coalition_fill(p, mu, (2, 2, 3), 2)
    np.testing.assert_allclose(psi.sum(axis=1), 1.0, atol=1e-9)
    np.testing.assert_allclose(p @ psi, mu, atol=1e-9)
    assert np.all(np.diag(psi) == 0)


def test_dictatorial_root_is_unique_on_random_games():
    rng = np.random.default_rng(5)
    for _ in range(10):
        g = GameSpec(catalog.random_game(rng).agents, 1)
        assert len(solve_all(g)) == 1


# --- verification -------------------------------------------------------------


def test_verifier_rejects_perturbed_efforts():
    g = catalog.example1(2)
    eq = solve(g)
    bad = dataclasses.replace(eq, x=eq.x * np.array([1 + 1e-4, 1, 1, 1]))
    rep = verify_equilibrium(g, bad)
    assert not rep.passed
    assert rep.residuals["recognition"] > 1e-7


def test_verifier_rejects_wrong_inclusion():
    g = catalog.example2(0.01)
    eq = solve(g)
    bad = dataclasses.replace(eq, mu=eq.mu[::-1])
    assert not verify_equilibrium(g, bad).passed


def test_verifier_flags_effort_below_double_precision():
    # an impact exponent this close to one pushes the true effort of the
    # last agent to ~1e-857; the solver returns the corner, which has an
    # infinite marginal return, and the verifier must say so
    agents = [
        AgentSpec(Power(0.9106887640105334, 0.5564543590250729), Power(0.6508023165483092, 2.3733619370396815),
                  0.26830228279743323, 0.9201266802110784),
        AgentSpec(Power(1.8723527248171803, 0.8572008842744924), Power(0.5941170502852022, 1.3383230216077409),
                  0.8816819566591289, 1.318833643481439),
        AgentSpec(Linear(0.732003309724524), Linear(1.3251608531513983), 0.38225156254731757, 1.8796028433844876),
        AgentSpec(Power(0.34347093427143727, 0.999225846563911), Linear(1.0865768285427233),
                  0.8008208024440263, 1.0589903423455913),
    ]
    g = GameSpec(agents, 3)
    eq = solve(g)
    rep = verify_equilibrium(g, eq)
    assert not rep.passed
    assert rep.worst == "foc"


def test_tiny_recognition_above_headstart_is_resolved():
    # recognition 1e-62 of which most is headstart: the effort behind the
    # small remainder must still satisfy its first-order condition
    strong = AgentSpec(Linear(1.0), Linear(1.0), 0.5)
    weak = AgentSpec(Linear(1.9933670965566652), Power(1.803256447548344, 1.0115319648274115), 0.838,
                     0.17899794065032043, 5.459667260668483e-62)
    g = GameSpec([strong, strong, weak], 1)
    eq = solve(g)
    assert eq.x[2] > 0
    assert eq.p[2] > weak.beta / eq.Y
    assert verify_equilibrium(g, eq).passed


def test_solver_config_validation():
    for bad in ({"bisect_tol": 0}, {"grid_points": 4}, {"bracket_growth": 1.0}, {"root_selection": "first"}):
        with pytest.raises(ValueError):
            SolverConfig(**bad)


def test_coarser_grid_finds_the_same_root():
    g = catalog.example1(2)
    a = solve(g)
    b = solve(g, SolverConfig(grid_points=64))
    assert a.VL == pytest.approx(b.VL, abs=1e-9)


@settings(max_examples=12, deadline=None, suppress_health_check=[HealthCheck.too_slow])
@given(seed=st.integers(1, 2**31))
def test_random_games_verify(seed):
    g = catalog.random_game(np.random.default_rng(seed))
    eq = solve(g)
    rep = verify_equilibrium(g, eq)
    assert rep.passed, (seed, rep.residuals)
    assert eq.p.sum() == pytest.approx(1.0, abs=1e-9)
    assert eq.mu.sum() == pytest.approx(g.k - 1, abs=1e-7)


def test_aggregate_output_matches_a_fine_grid_scan():
    g = catalog.example1(2)
    VD, VL = 0.0342, 0.96
    Y = step_ii_solve_y(VD, VL, g)
    grid = np.linspace(0.3, 1.5, 241)
    total = np.array([sum(step_i_pointwise(a, y, VD, VL)[0] for a in g.agents) for y in grid])
    # strictly falling while anyone is still recognised, zero beyond
    live = total > 0
    assert np.all(np.diff(total)[live[1:]] < 0)
    assert not live[-1]
    j = int(np.flatnonzero(total < 1.0)[0])
    assert grid[j - 1] <= Y <= grid[j]
