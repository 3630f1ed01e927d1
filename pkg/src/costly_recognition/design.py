"""The designer's problem: choosing bias, headstart and voting rule.

Main entry points:

* :func:`evaluate_objective` - designer payoff of an effort/recognition profile.
* :func:`reduce_to_dictatorship` - mechanism that reproduces an equilibrium
  under the dictatorial rule ``k = 1``.
* :func:`mechanism_for_profile` - mechanism that induces a given ``(x, p)``
  under an arbitrary rule ``k`` (when one exists).
* :func:`optimize_biases_k1` / :func:`heuristic_biases_k` - searches over
  mechanisms for ``k = 1`` and ``k >= 2``.
* :func:`k_sensitivity` - comparative statics of ``(VL, VDelta)`` in ``k``.
* :func:`sweep_k` - best objective per voting rule.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.optimize import brentq, minimize, minimize_scalar

from .model import (
    N1,
    N2,
    AgentSpec,
    Equilibrium,
    GameSpec,
    ModelError,
    ObjectiveSpec,
    eval_function,
    left_derivative,
)
from .solver import (
    SolverConfig,
    SolverError,
    fixed_profile_values,
    solve,
    verify_equilibrium,
)

log = logging.getLogger(__name__)

THETA_TOL = 1e-9
P_CLIP = 1e-6


class DesignError(RuntimeError):
    """Inconsistent input to a design routine."""


@dataclass(frozen=True)
class DesignProblem:
    """Agents whose mechanism is to be chosen, plus the objective.

    Attributes:
        base_agents: agents; their ``alpha``/``beta`` are ignored unless the
            mechanism is locked.
        objective: designer objective.
        k_candidates: voting rules to compare.
        locked: keep the agents' own ``(alpha, beta)`` instead of optimising.
    """

    base_agents: tuple
    objective: ObjectiveSpec = field(default_factory=ObjectiveSpec)
    k_candidates: tuple = None
    locked: bool = False

    def __post_init__(self):
        object.__setattr__(self, "base_agents", tuple(self.base_agents))
        n = len(self.base_agents)
        if n < 2:
            raise ModelError("a design problem needs at least two agents")
        ks = tuple(range(1, n + 1)) if self.k_candidates is None else tuple(int(k) for k in self.k_candidates)
        if not ks or any(not 1 <= k <= n for k in ks):
            raise ModelError(f"k candidates must be a nonempty subset of 1..{n}")
        object.__setattr__(self, "k_candidates", ks)

    @property
    def n(self) -> int:
        return len(self.base_agents)

    def game(self, k: int, alpha=None, beta=None) -> GameSpec:
        g = GameSpec(self.base_agents, k)
        if alpha is None:
            return g
        return g.with_mechanism(alpha, beta)


@dataclass(frozen=True)
class DesignResult:
    """A mechanism, its equilibrium and the designer's payoff."""

    k: int
    alpha: np.ndarray
    beta: np.ndarray
    equilibrium: Equilibrium
    lambda_value: float
    heuristic: bool = False
    verified: bool = True
    note: str = ""


# ---------------------------------------------------------------------------
# objective
# ---------------------------------------------------------------------------


def evaluate_objective(obj: ObjectiveSpec, x, p) -> float:
    """Designer payoff of effort profile ``x`` and recognition profile ``p``."""
    x = np.asarray(x, float)
    p = np.asarray(p, float)
    n = len(x)
    if obj.form == "total_effort":
        return float(x.sum())
    if obj.form == "expected_winner_effort":
        return float(p @ x)
    penalty = obj.lam * float(np.abs(p - obj.target_for(n)).sum())
    if obj.form == "fairness_penalized":
        return float(x.sum()) - penalty
    return float(np.asarray(obj.weights) @ x) - penalty


# ---------------------------------------------------------------------------
# mechanisms that induce a given profile
# ---------------------------------------------------------------------------


def reduce_to_dictatorship(game: GameSpec, eq: Equilibrium, tol: float = THETA_TOL):
    """Mechanism under which the ``k = 1`` game reproduces ``eq``'s ``(x, p)``.

    For each agent with positive effort, ``theta = p(1-p) f'(x) / c'(x) - f(x)``,
    ``alpha = p / (f(x) + theta)`` and ``beta = alpha * theta``.  Agents with
    zero effort get ``(0, p)``.

    Returns:
        ``(alpha_hat, beta_hat, theta)`` arrays.

    Raises:
        DesignError: some ``theta`` is below ``-tol``.
    """
    n = game.n
    a_hat = np.zeros(n)
    b_hat = np.zeros(n)
    theta = np.zeros(n)
    for i, agent in enumerate(game.agents):
        x, p = float(eq.x[i]), float(eq.p[i])
        if x <= 0.0:
            b_hat[i] = p
            continue
        f = eval_function(agent.impact, x)
        fd = eval_function(agent.impact, x, "derivative")
        cd = left_derivative(agent.cost, x)
        th = p * (1.0 - p) * fd / cd - f
        if th < -tol * max(1.0, f):
            raise DesignError(f"agent {i + 1}: theta = {th:.3e} < 0; equilibrium inconsistent")
        th = max(th, 0.0)
        theta[i] = th
        a_hat[i] = p / (f + th)
        b_hat[i] = a_hat[i] * th
    return a_hat, b_hat, theta


def prize_spreads_fixed(p, cost, delta, k: int) -> np.ndarray:
    """Effective prize spread of each agent when ``(x, p)`` is held fixed."""
    p = np.asarray(p, float)
    VL, VD, mu = fixed_profile_values(p, cost, delta, k)
    with np.errstate(divide="ignore", invalid="ignore"):
        frac = np.where(p < 1, (1.0 - p - mu) / (1.0 - p), 1.0)
    return VL + frac * VD


@dataclass(frozen=True)
class ProfileMechanism:
    """Outcome of :func:`mechanism_for_profile`."""

    k: int
    alpha: np.ndarray
    beta: np.ndarray
    spreads: np.ndarray
    VL: float
    VDelta: float
    slack: np.ndarray  # per agent, >= 0 iff the headstart is non-negative

    @property
    def feasible(self) -> bool:
        return bool(np.all(self.slack >= -1e-12))


def mechanism_for_profile(agents: Sequence[AgentSpec], x, p, k: int) -> ProfileMechanism:
    """Mechanism inducing efforts ``x`` and recognition ``p`` under rule ``k``.

    With ``(x, p)`` held fixed the prize spreads ``s_i`` follow from the
    inclusion/budget conditions alone.  Normalising aggregate output to one,
    the first-order condition ``c'(x) = alpha f'(x) (1 - p) s`` fixes
    ``alpha`` and ``beta = p - alpha f(x)``; the mechanism exists iff every
    ``beta >= 0``, i.e. ``c'(x) f(x) / f'(x) <= p (1 - p) s`` (left
    derivative at a kink).  The returned ``slack`` is the difference of the
    two sides.
    """
    x = np.asarray(x, float)
    p = np.asarray(p, float)
    delta = np.array([a.delta for a in agents])
    cost = np.array([eval_function(a.cost, float(xi)) for a, xi in zip(agents, x)])
    VL, VD, mu = fixed_profile_values(p, cost, delta, k)
    with np.errstate(divide="ignore", invalid="ignore"):
        frac = np.where(p < 1, (1.0 - p - mu) / (1.0 - p), 1.0)
    s = VL + frac * VD
    n = len(x)
    alpha = np.zeros(n)
    beta = np.zeros(n)
    slack = np.zeros(n)
    for i, a in enumerate(agents):
        if x[i] <= 0:
            beta[i] = p[i]
            continue
        f = eval_function(a.impact, float(x[i]))
        fd = eval_function(a.impact, float(x[i]), "derivative")
        cd = left_derivative(a.cost, float(x[i]))
        need = cd * f / fd
        have = p[i] * (1 - p[i]) * s[i]
        slack[i] = have - need
        alpha[i] = cd / (fd * (1 - p[i]) * s[i])
        beta[i] = max(0.0, p[i] - alpha[i] * f)
    return ProfileMechanism(k, alpha, beta, s, VL, VD, slack)


# ---------------------------------------------------------------------------
# k = 1 search
# ---------------------------------------------------------------------------


def effort_for_probability(agent: AgentSpec, q: float) -> float:
    """Effort ``x`` solving ``c'(x) f(x) / f'(x) = q`` (``q = p(1-p)``).

    The left side increases from zero; at a cost kink the root may sit on
    the jump, in which case the threshold is returned.
    """
    if q <= 0:
        return 0.0

    def h(x):
        return eval_function(agent.cost, x, "derivative") * eval_function(agent.impact, x) / eval_function(
            agent.impact, x, "derivative"
        ) - q

    hi = 1.0
    while h(hi) < 0:
        hi *= 2.0
        if hi > 1e12:
            raise DesignError("effort bracket diverged")
    lo = hi / 2.0
    while lo > 1e-300 and h(lo) > 0:
        lo /= 2.0
    return brentq(h, lo, hi, xtol=1e-15, rtol=1e-14)


def _softmax(z):
    e = np.exp(np.concatenate([[0.0], z]) - max(0.0, np.max(z)))
    return e / e.sum()


def _clip_simplex(p):
    p = np.clip(p, P_CLIP, None)
    return p / p.sum()


def optimize_biases_k1(
    problem: DesignProblem,
    starts: int = 8,
    seed: int = 1,
    cfg: SolverConfig = None,
) -> DesignResult:
    """Best bias vector under the dictatorial rule, with zero headstart.

    Searches over recognition profiles ``p`` on the interior simplex (each
    implying efforts via :func:`effort_for_probability`), using Nelder-Mead
    in softmax coordinates from ``starts`` spread points followed by a
    pairwise-exchange polish.  The bias is recovered as ``alpha = p / f(x)``
    (aggregate output normalised to one) and the ``k = 1`` game is re-solved
    and verified.
    """
    n = problem.n
    agents = problem.base_agents
    obj = problem.objective

    def value(p):
        p = _clip_simplex(p)
        x = np.array([effort_for_probability(a, pi * (1 - pi)) for a, pi in zip(agents, p)])
        return evaluate_objective(obj, x, p)

    rng = np.random.default_rng(seed)
    candidates = [np.full(n, 1.0 / n)]
    if obj.form in ("fairness_penalized", "weighted_effort"):
        candidates.append(obj.target_for(n))
    while len(candidates) < starts:
        candidates.append(rng.dirichlet(np.ones(n)))

    best_p, best_v = None, -math.inf
    for p0 in candidates:
        p0 = _clip_simplex(p0)
        v0 = value(p0)
        if v0 > best_v:
            best_p, best_v = p0, v0
        z0 = np.log(p0[1:] / p0[0])
        res = minimize(lambda z: -value(_softmax(z)), z0, method="Nelder-Mead",
                       options={"xatol": 1e-10, "fatol": 1e-13, "maxiter": 4000})
        p1 = _clip_simplex(_softmax(res.x))
        if -res.fun > best_v:
            best_p, best_v = p1, -res.fun

    best_p, best_v = _exchange_polish(value, best_p, best_v)
    x = np.array([effort_for_probability(a, pi * (1 - pi)) for a, pi in zip(agents, best_p)])
    f = np.array([eval_function(a.impact, float(xi)) for a, xi in zip(agents, x)])
    alpha = best_p / f
    beta = np.zeros(n)
    return _finish(problem, 1, alpha, beta, cfg, heuristic=False)


def _exchange_polish(value, p, v, rounds: int = 6):
    """Move probability mass between pairs of agents while it helps."""
    n = len(p)
    for _ in range(rounds):
        improved = False
        for i in range(n):
            for j in range(i + 1, n):
                lo = -(p[i] - P_CLIP)
                hi = p[j] - P_CLIP

                def shifted(t):
                    q = p.copy()
                    q[i] += t
                    q[j] -= t
                    return q

                res = minimize_scalar(lambda t: -value(shifted(t)), bounds=(lo, hi), method="bounded",
                                      options={"xatol": 1e-13})
                if -res.fun > v + 1e-15:
                    p, v = _clip_simplex(shifted(res.x)), -res.fun
                    improved = True
        if not improved:
            break
    return p, v


def _finish(problem, k, alpha, beta, cfg, heuristic, note=""):
    game = problem.game(k, alpha, beta)
    eq = solve(game, cfg)
    rep = verify_equilibrium(game, eq)
    lam = evaluate_objective(problem.objective, eq.x, eq.p)
    return DesignResult(k, np.asarray(alpha, float), np.asarray(beta, float), eq, lam,
                        heuristic=heuristic, verified=rep.passed, note=note)


# ---------------------------------------------------------------------------
# k >= 2 local search
# ---------------------------------------------------------------------------


def heuristic_biases_k(
    problem: DesignProblem,
    k: int,
    init=None,
    step: float = 0.25,
    min_step: float = 1e-3,
    max_probes: int = 200,
    cfg: SolverConfig = None,
) -> DesignResult:
    """HEURISTIC local search over ``(log alpha, beta)`` at a fixed ``k``.

    Coordinate ascent with the full equilibrium solver in the loop: each
    coordinate is moved up and down by ``step`` (log-units for ``alpha``,
    ``step`` times the mean output share for ``beta``), improvements are
    accepted, and the step halves when no move helps.  Probes whose solve
    fails are skipped.  The result is a local optimum at best.

    Args:
        problem: design problem.
        k: voting rule (``>= 2``).
        init: starting ``(alpha, beta)``; neutral when omitted.
        step: initial step.
        min_step: stop once the step falls below this.
        max_probes: cap on equilibrium solves.
        cfg: solver settings.
    """
    if k < 2:
        raise DesignError("heuristic search is for k >= 2; use optimize_biases_k1")
    n = problem.n
    if init is None:
        alpha, beta = np.ones(n), np.zeros(n)
    else:
        alpha, beta = np.array(init[0], float), np.array(init[1], float)

    def score(a, b):
        try:
            game = problem.game(k, a, b)
            eq = solve(game, cfg)
        except (SolverError, ModelError) as exc:
            log.info("probe skipped: %s", exc)
            return -math.inf
        return evaluate_objective(problem.objective, eq.x, eq.p)

    best = score(alpha, beta)
    probes = 1
    beta_unit = max(float(np.mean(alpha)), 1e-12) / n
    while step >= min_step and probes < max_probes:
        improved = False
        for coord in range(2 * n):
            for sign in (1.0, -1.0):
                a, b = alpha.copy(), beta.copy()
                i = coord % n
                if coord < n:
                    a[i] *= math.exp(sign * step)
                else:
                    b[i] += sign * step * beta_unit
                    if b[i] < 0:
                        continue
                if np.all(a == 0) and np.all(b == 0):
                    continue
                val = score(a, b)
                probes += 1
                if val > best + 1e-12:
                    alpha, beta, best = a, b, val
                    improved = True
                    break
                if probes >= max_probes:
                    break
            if probes >= max_probes:
                break
        if not improved:
            step /= 2.0
    return _finish(problem, k, alpha, beta, cfg, heuristic=True, note=f"HEURISTIC local search, {probes} probes")


# ---------------------------------------------------------------------------
# comparative statics in k
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class KSensitivity:
    """Derivatives of ``(VL, VDelta)`` with respect to ``k`` at fixed ``(x, p)``."""

    A: float
    B: float
    C: float
    D: float
    dVL_dk: float
    dVDelta_dk: float

    def signs_hold(self, tol: float = 1e-12) -> bool:
        """``A, B, C, D > 0``-type positivity and ``dVL/dk <= 0 <= dVDelta/dk``."""
        return (
            self.A > 0
            and self.B > 0
            and self.C >= -tol
            and self.D >= -tol
            and self.A * self.D + self.B * self.C > 0
            and self.dVL_dk <= tol
            and self.dVDelta_dk >= -tol
        )


def k_sensitivity(game: GameSpec, eq: Equilibrium) -> KSensitivity:
    """Comparative statics of the budget and inclusion conditions in ``k``.

    ``A = 1 + sum_{N1} p d / (1 - d)``, ``B = k - |N1|``, ``C = sum_{N2} p``,
    ``D = sum_{N1} (1 - p) + sum_{N2} (1/d - p) - (k - 1)``, and
    ``dVL/dk = -(B + D) VDelta / (AD + BC)``,
    ``dVDelta/dk = -(C - A) VDelta / (AD + BC)``.
    """
    part = np.asarray(eq.partition)
    p, d = eq.p, game.delta
    low, mid = part == N1, part == N2
    A = 1.0 + float(np.sum(p[low] * d[low] / (1 - d[low])))
    B = float(game.k - low.sum())
    C = float(np.sum(p[mid]))
    D = float(np.sum(1 - p[low]) + np.sum(1 / d[mid] - p[mid]) - (game.k - 1))
    den = A * D + B * C
    VD = eq.VDelta
    return KSensitivity(A, B, C, D, -(B + D) * VD / den, -(C - A) * VD / den)


# ---------------------------------------------------------------------------
# sweep over k
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SweepRow:
    k: int
    lambda_value: float
    result: Optional[DesignResult]
    error: str = ""


@dataclass(frozen=True)
class SweepResult:
    rows: tuple
    best_k: int
    dictatorship_dominates: Optional[bool]
    locked: bool

    def values(self) -> dict:
        return {r.k: r.lambda_value for r in self.rows}


def sweep_k(
    problem: DesignProblem,
    cfg: SolverConfig = None,
    tol: float = 1e-5,
    heuristic_probes: int = 60,
) -> SweepResult:
    """Best objective value per voting rule.

    With a locked mechanism each ``k`` is simply solved.  Otherwise ``k = 1``
    uses :func:`optimize_biases_k1` and larger ``k`` the heuristic search;
    every ``k >= 2`` optimum is then reduced to a ``k = 1`` mechanism, which
    competes for the ``k = 1`` record.  ``dictatorship_dominates`` reports
    whether ``best(k=1) >= best(k) - tol`` for every ``k``.
    """
    rows = []
    for k in problem.k_candidates:
        try:
            if problem.locked:
                game = problem.game(k)
                eq = solve(game, cfg)
                lam = evaluate_objective(problem.objective, eq.x, eq.p)
                res = DesignResult(k, game.alpha, game.beta, eq, lam, verified=verify_equilibrium(game, eq).passed)
            elif k == 1:
                res = optimize_biases_k1(problem, cfg=cfg)
            else:
                res = heuristic_biases_k(problem, k, max_probes=heuristic_probes, cfg=cfg)
            rows.append(SweepRow(k, res.lambda_value, res))
        except (SolverError, DesignError, ModelError) as exc:
            log.warning("k=%d failed: %s", k, exc)
            rows.append(SweepRow(k, -math.inf, None, str(exc)))

    dominates = None
    if not problem.locked and 1 in problem.k_candidates:
        i1 = [r.k for r in rows].index(1)
        record = rows[i1]
        for r in rows:
            if r.k == 1 or r.result is None:
                continue
            try:
                a_hat, b_hat, _ = reduce_to_dictatorship(problem.game(r.k, r.result.alpha, r.result.beta), r.result.equilibrium)
                seeded = _finish(problem, 1, a_hat, b_hat, cfg, heuristic=False, note=f"reduced from k={r.k}")
            except (SolverError, DesignError, ModelError) as exc:
                log.warning("reduction of k=%d failed: %s", r.k, exc)
                continue
            if seeded.lambda_value > record.lambda_value:
                record = SweepRow(1, seeded.lambda_value, seeded)
        rows[i1] = record
        dominates = all(record.lambda_value >= r.lambda_value - tol for r in rows)
    finite = [r for r in rows if math.isfinite(r.lambda_value)]
    best_k = max(finite, key=lambda r: (r.lambda_value, -r.k)).k if finite else 0
    return SweepResult(tuple(rows), best_k, dominates, problem.locked)


# ---------------------------------------------------------------------------
# headstart redundancy under the dictatorial rule
# ---------------------------------------------------------------------------


def zero_headstart_counterpart(game: GameSpec, eq: Equilibrium):
    """For a ``k = 1`` game, the ``beta = 0`` mechanism with the same ``p``.

    Keeps ``p`` and replaces efforts by the zero-headstart first-order
    solution ``c'(x) f(x)/f'(x) = p(1 - p)``; since any headstart lowers
    effort at a given ``p``, the returned efforts weakly exceed ``eq.x``.

    Returns:
        ``(alpha, beta, x)`` with ``beta = 0``.
    """
    if game.k != 1:
        raise DesignError("headstart redundancy is a k = 1 statement")
    x = np.array([effort_for_probability(a, pi * (1 - pi)) for a, pi in zip(game.agents, eq.p)])
    f = np.array([eval_function(a.impact, float(xi)) for a, xi in zip(game.agents, x)])
    with np.errstate(divide="ignore", invalid="ignore"):
        alpha = np.where(f > 0, eq.p / f, 0.0)
    return alpha, np.zeros(game.n), x
