"""Bundled reproductions: the worked examples and the two design properties.

Each reproduction returns a list of :class:`Check` records; the CLI prints
one line per record and succeeds iff every non-informational record passes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import catalog
from .design import (
    DesignProblem,
    evaluate_objective,
    k_sensitivity,
    mechanism_for_profile,
    optimize_biases_k1,
    prize_spreads_fixed,
    reduce_to_dictatorship,
)
from .model import GameSpec, ObjectiveSpec, eval_function
from .solver import SolverConfig, solve, verify_equilibrium


@dataclass(frozen=True)
class Check:
    """One assertion of a reproduction.

    Attributes:
        name: short identifier.
        passed: outcome; ``None`` marks an informational line.
        value: measured quantity (deviation, residual, ...).
        tol: threshold the value is compared with.
        detail: free text.
    """

    name: str
    passed: object
    value: float = math.nan
    tol: float = math.nan
    detail: str = ""

    def line(self, rid: str) -> str:
        status = "INFO" if self.passed is None else ("PASS" if self.passed else "FAIL")
        parts = [f"CHECK {rid} {self.name} {status}"]
        if not math.isnan(self.value):
            parts.append(f"value={self.value:.10g}")
        if not math.isnan(self.tol):
            parts.append(f"tol={self.tol:.3g}")
        if self.detail:
            parts.append(self.detail)
        return " ".join(parts)


def _close(name, got, want, tol, detail=""):
    dev = float(np.max(np.abs(np.asarray(got, float) - np.asarray(want, float))))
    return Check(name, dev <= tol, dev, tol, detail)


# ---------------------------------------------------------------------------


def example1_checks(cfg: SolverConfig = None, tol: float = 5e-4):
    """Table of the four-agent game for ``k = 1..4`` (neutral mechanism)."""
    out = []
    for k in (1, 2, 3, 4):
        g = catalog.example1(k)
        eq = solve(g, cfg)
        p1, p2, x1, x2, total = catalog.TABLE1[k]
        got = (eq.p[0], eq.p[1:].max(), eq.x[0], eq.x[1:].max(), eq.total_effort())
        dev = np.abs(np.array(got) - np.array([p1, p2, x1, x2, total]))
        detail = "p1={:.4f} p2-4={:.4f} x1={:.4f} x2-4={:.4f} total={:.4f}".format(*got)
        out.append(Check(f"table_k{k}", bool(dev.max() <= tol), float(dev.max()), tol, detail))
        res = verify_equilibrium(g, eq).max_residual
        out.append(Check(f"residual_k{k}", res <= 1e-7, res, 1e-7))
    g = catalog.example1(2)
    eq = solve(g, cfg)
    agg = catalog.TABLE1_K2_AGGREGATES
    out.append(_close("k2_aggregates", [eq.VL, eq.VDelta, *eq.mu], [agg["VL"], agg["VDelta"], *agg["mu"]], tol))
    return out


def example2_checks(cfg: SolverConfig = None, c: float = 0.01, tol: float = 1e-8):
    """Three-agent game with the tuned bias/headstart at ``k = 2``."""
    g = catalog.example2(c)
    eq = solve(g, cfg)
    ref = catalog.example2_expected(c)
    out = [
        _close("x", eq.x, ref["x"], tol),
        _close("p", eq.p, ref["p"], tol),
        _close("v", eq.v, ref["v"], tol),
        _close("VL", eq.VL, ref["VL"], tol),
        _close("VDelta", eq.VDelta, ref["VDelta"], tol),
        Check("coalitions", eq.coalitions() == ref["coalitions"], detail=str(eq.coalitions())),
    ]
    res = verify_equilibrium(g, eq).max_residual
    out.append(Check("residual", res <= 1e-7, res, 1e-7))
    obj = ObjectiveSpec("fairness_penalized", lam=1.0 / c**2)
    lam2 = evaluate_objective(obj, eq.x, eq.p)
    out.append(_close("objective_k2", lam2, ref["objective"], 1e-6))
    # the dictatorial counterpart with the designer also choosing k
    best1 = optimize_biases_k1(DesignProblem(g.agents, obj), cfg=cfg)
    out.append(
        Check(
            "k1_counterpart",
            None,
            best1.lambda_value,
            detail=f"k=1 optimum {best1.lambda_value:.10g} vs k=2 construction {lam2:.10g}",
        )
    )
    return out


def example3_checks(cfg: SolverConfig = None, tol: float = 5e-4, full_solve: bool = True):
    """Seven-agent game where ``k = 5`` beats ``k = 4`` at a fixed profile."""
    out = []
    p, x = catalog.example3_targets()
    agents = catalog.example3(5).agents
    m5 = mechanism_for_profile(agents, x, p, 5)
    m4 = mechanism_for_profile(agents, x, p, 4)
    pub = catalog.EXAMPLE3_PUBLISHED
    out.append(_close("spread_k5", m5.VL + m5.VDelta, pub["spread_k5"], tol, f"VL={m5.VL:.6f} VDelta={m5.VDelta:.6f}"))
    out.append(_close("values_k4", [m4.VL, m4.VDelta], [pub["VL_k4"], pub["VDelta_k4"]], tol))
    out.append(_close("low_effort_rounded", x[0], catalog.EXAMPLE3_X_ROUNDED[0], 5e-5, f"x1-3={x[0]:.8f}"))
    out.append(Check("k5_profile_feasible", m5.feasible, float(m5.slack.min()), 0.0, "min slack"))
    out.append(Check("k4_profile_infeasible", not m4.feasible, float(m4.slack[6]), 0.0, "agent 7 slack"))
    # best agent-7 effort at k = 4 with the recognition profile held fixed
    r = catalog.example3_exponent()
    s4 = m4.spreads[6]
    x7_k4 = (s4 * p[6] * (1 - p[6]) / r) ** (1.0 / r)
    lam5 = float(x.sum())
    lam4 = lam5 - (x[6] - x7_k4)
    out.append(Check("k5_beats_k4", lam5 > lam4, lam5 - lam4, 0.0, f"effort k5={lam5:.6f} k4<={lam4:.6f}"))
    # the literal 1e-4 kink level does not separate the two rules
    p_, x_ = catalog.example3_targets(kink_level=1e-4)
    lit4 = mechanism_for_profile(catalog.example3(4, kink_level=1e-4).agents, x_, p_, 4)
    out.append(
        Check("kink_level_1e-4", None, float(lit4.slack[6]), detail=f"x7={x_[6]:.8f}; agent 7 slack at k=4 (>=0 means no separation)")
    )
    if full_solve:
        g = GameSpec(agents, 5).with_mechanism(m5.alpha, m5.beta)
        eq = solve(g, cfg)
        out.append(_close("k5_solve_reproduces_x", eq.x, x, 1e-6))
        out.append(_close("k5_solve_reproduces_p", eq.p, p, 1e-6))
        res = verify_equilibrium(g, eq).max_residual
        out.append(Check("k5_residual", res <= 1e-7, res, 1e-7))
    return out


def roundtrip_checks(cfg: SolverConfig = None, games: int = 50, seed: int = 2024, tol: float = 1e-6):
    """Reduce random ``k >= 2`` equilibria to dictatorship and re-solve."""
    rng = np.random.default_rng(seed)
    worst, worst_theta, fails, res = 0.0, math.inf, 0, 0.0
    for _ in range(games):
        g = catalog.random_game(rng)
        eq = solve(g, cfg)
        a, b, theta = reduce_to_dictatorship(g, eq)
        worst_theta = min(worst_theta, float(theta.min()))
        g1 = GameSpec(g.agents, 1).with_mechanism(a, b)
        e1 = solve(g1, cfg)
        res = max(res, verify_equilibrium(g, eq).max_residual, verify_equilibrium(g1, e1).max_residual)
        dev = max(float(np.max(np.abs(e1.x - eq.x))), float(np.max(np.abs(e1.p - eq.p))))
        worst = max(worst, dev)
        fails += dev > tol
    return [
        Check("reproduces_x_p", fails == 0, worst, tol, f"{games} games, {fails} failures"),
        Check("theta_nonnegative", worst_theta >= -1e-9, worst_theta, -1e-9),
        Check("max_residual", res <= 1e-7, res, 1e-7, f"{2 * games} solves"),
    ]


def monotonicity_checks(cfg: SolverConfig = None, games: int = 20, seed: int = 7, tol: float = 1e-9):
    """Derivative signs and fixed-profile spreads for patient-free games."""
    rng = np.random.default_rng(seed)
    sign_fail = spread_fail = 0
    worst_rise, res = 0.0, 0.0
    for _ in range(games):
        g = catalog.random_game(rng, delta_range=(0.05, 0.5))
        eq = solve(g, cfg)
        res = max(res, verify_equilibrium(g, eq).max_residual)
        if not k_sensitivity(g, eq).signs_hold(tol):
            sign_fail += 1
        cost = [eval_function(a.cost, float(xi)) for a, xi in zip(g.agents, eq.x)]
        spreads = np.array([prize_spreads_fixed(eq.p, cost, g.delta, k) for k in range(1, g.n + 1)])
        rise = float(np.max(np.diff(spreads, axis=0))) if g.n > 1 else 0.0
        worst_rise = max(worst_rise, rise)
        spread_fail += rise > tol
    return [
        Check("derivative_signs", sign_fail == 0, float(sign_fail), 0.0, f"{games} games"),
        Check("spreads_decreasing_in_k", spread_fail == 0, worst_rise, tol, "largest increase across adjacent k"),
        Check("max_residual", res <= 1e-7, res, 1e-7, f"{games} solves"),
    ]


REPRODUCTIONS = {
    "ex1": example1_checks,
    "ex2": example2_checks,
    "ex3": example3_checks,
    "thm2-roundtrip": roundtrip_checks,
    "thm3-signs": monotonicity_checks,
}
