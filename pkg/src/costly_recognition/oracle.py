"""Independent checks of solved equilibria.

Nothing here calls the nested solver:

* :func:`best_response_grid` evaluates one agent's period payoff over an
  effort grid with everybody else held at equilibrium.
* :func:`static_contest_fixed_point` solves the dictatorial game as an
  ordinary biased contest by damped best-response iteration.
* :func:`simulate_bargaining` plays the stationary strategies forward with
  Monte Carlo draws and reports empirical recognition, inclusion and payoff
  frequencies.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .model import Equilibrium, GameSpec, eval_function, left_derivative


class OracleError(RuntimeError):
    """The oracle could not produce a result (e.g. no convergence)."""


# ---------------------------------------------------------------------------
# best response on a grid
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DeviationReport:
    """Best unilateral effort deviation of one agent.

    Attributes:
        agent: zero-based agent index.
        best_deviation: effort attaining the grid maximum.
        gain: payoff at the best grid point minus payoff at equilibrium.
        grid: ``(lo, hi, points)`` of the evaluated grid.
    """

    agent: int
    best_deviation: float
    gain: float
    grid: tuple


def deviation_payoff(game: GameSpec, eq: Equilibrium, agent: int, xs) -> np.ndarray:
    """Period payoff of ``agent`` choosing each effort in ``xs``.

    Opponents keep their efforts, their coalition rows ``psi`` and all
    continuation values.  Recognition moves with the deviation, and so does
    the probability of being bought into someone else's coalition:
    ``U(x) = p_i(x) (1 - w_i) + sum_j p_j(x) psi_ji delta_i v_i - c_i(x)``,
    where ``w_i = sum_j psi_ij delta_j v_j`` is what ``i`` pays as proposer.
    """
    i = agent
    xs = np.atleast_1d(np.asarray(xs, float))
    agents = game.agents
    out = np.array([a.output(float(x)) for a, x in zip(agents, eq.x)])
    others = out.sum() - out[i]
    me = agents[i]
    own = np.array([me.output(float(x)) for x in xs])
    cost = np.array([eval_function(me.cost, float(x)) for x in xs])
    total = own + others
    dv = game.delta * eq.v
    psi = np.array(eq.psi, float)
    np.fill_diagonal(psi, 0.0)
    w = psi[i] @ dv
    # weighted output of proposers who would include agent i
    buyers = float(np.delete(out * psi[:, i], i).sum())
    with np.errstate(invalid="ignore", divide="ignore"):
        p_own = np.where(total > 0, own / total, 1.0 / game.n)
        p_buy = np.where(total > 0, buyers / total, float(np.delete(psi[:, i], i).sum()) / game.n)
    return p_own * (1.0 - w) + p_buy * dv[i] - cost


def best_response_grid(game: GameSpec, eq: Equilibrium, agent: int, grid=None) -> DeviationReport:
    """Largest payoff gain of ``agent`` over an effort grid.

    Args:
        game: the game.
        eq: equilibrium supplying opponents' play and continuation values.
        agent: zero-based agent index.
        grid: ``(lo, hi, points)``; defaults to ``(0, 2 * max(x), 4001)``.
            The equilibrium effort is always added to the grid, so the gain
            is non-negative up to rounding.
    """
    if grid is None:
        hi = 2.0 * float(np.max(eq.x))
        grid = (0.0, hi if hi > 0 else 1.0, 4001)
    lo, hi, points = grid
    xs = np.union1d(np.linspace(lo, hi, int(points)), [float(eq.x[agent])])
    u = deviation_payoff(game, eq, agent, xs)
    u_eq = float(deviation_payoff(game, eq, agent, [eq.x[agent]])[0])
    j = int(np.argmax(u))
    return DeviationReport(agent, float(xs[j]), float(u[j] - u_eq), (lo, hi, int(points)))


def max_deviation_gain(game: GameSpec, eq: Equilibrium, points: int = 4001) -> float:
    """Largest grid deviation gain over all agents on ``[0, 2 max(x)]``."""
    hi = 2.0 * float(np.max(eq.x))
    grid = (0.0, hi if hi > 0 else 1.0, points)
    return max(best_response_grid(game, eq, i, grid).gain for i in range(game.n))


# ---------------------------------------------------------------------------
# static contest at k = 1
# ---------------------------------------------------------------------------


def _contest_best_response(agent, background: float) -> float:
    """Effort maximising ``f~(x) / (f~(x) + S) - c(x)`` against ``S``."""
    if agent.alpha == 0:
        return 0.0

    def marginal(x):
        own = agent.output(x)
        fd = agent.alpha * agent.impact.derivative(x)
        return fd * background / (own + background) ** 2

    def g_right(x):
        return marginal(x) - agent.cost.derivative(x)

    def g_left(x):
        return marginal(x) - left_derivative(agent.cost, x)

    if background <= 0:
        raise OracleError("contest against zero background has no best response")
    tiny = 1e-300
    # concave impact, convex cost: the marginal gain only falls from here
    if g_right(tiny) <= 0:
        return 0.0
    hi = 1.0
    while g_right(hi) > 0:
        hi *= 2.0
        if hi > 1e12:
            raise OracleError("best response diverged")
    lo = hi / 2.0
    while g_right(lo) <= 0 and lo > 1e-300:
        lo /= 2.0
    x = brentq(g_right, lo, hi, xtol=1e-15, rtol=1e-14)
    # a convex kink can hold the best response at its threshold
    if g_left(x) > 0 and hasattr(agent.cost, "threshold"):
        x = float(agent.cost.threshold)
    return x


def static_contest_fixed_point(
    game: GameSpec,
    damping: float = 0.5,
    tol: float = 1e-13,
    max_iter: int = 5000,
    x0=None,
) -> np.ndarray:
    """Equilibrium efforts of the dictatorial game as a one-shot contest.

    Under ``k = 1`` the prize spread is one, so each agent maximises
    ``f~_i(x) / Y - c_i(x)``.  Best responses are computed against the
    current background and mixed in with weight ``1 - damping``.

    Raises:
        OracleError: no convergence within ``max_iter`` sweeps.
    """
    if game.k != 1:
        raise OracleError("the static contest describes the k = 1 game only")
    agents = game.agents
    n = game.n
    x = np.full(n, 0.25) if x0 is None else np.asarray(x0, float).copy()
    for _ in range(max_iter):
        out = np.array([a.output(float(xi)) for a, xi in zip(agents, x)])
        br = np.array([_contest_best_response(a, out.sum() - out[i]) for i, a in enumerate(agents)])
        new = damping * x + (1.0 - damping) * br
        if np.max(np.abs(new - x)) <= tol * max(1.0, float(np.max(np.abs(x)))):
            return new
        x = new
    raise OracleError(f"no convergence after {max_iter} iterations")


# ---------------------------------------------------------------------------
# Monte Carlo play of the bargaining protocol
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SimulationStats:
    """Empirical frequencies from :func:`simulate_bargaining`.

    Attributes:
        rounds: number of simulated games.
        agreement_histogram: counts of the period in which agreement occurred.
        p_hat, p_se: proposer frequency and its standard error.
        mu_hat, mu_se: frequency of being bought into another's coalition.
        v_hat, v_se: mean realised payoff (share minus effort cost).
    """

    rounds: int
    agreement_histogram: dict
    p_hat: np.ndarray
    p_se: np.ndarray
    mu_hat: np.ndarray
    mu_se: np.ndarray
    v_hat: np.ndarray
    v_se: np.ndarray

    @property
    def immediate_agreement_share(self) -> float:
        return self.agreement_histogram.get(0, 0) / self.rounds

    def within(self, eq: Equilibrium, z: float = 3.0) -> dict:
        """Whether each empirical mean lies within ``z`` standard errors."""

        def ok(hat, se, ref):
            return bool(np.all(np.abs(hat - ref) <= z * se + 1e-12))

        return {
            "p": ok(self.p_hat, self.p_se, eq.p),
            "mu": ok(self.mu_hat, self.mu_se, eq.mu),
            "v": ok(self.v_hat, self.v_se, eq.v),
        }

    def write_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            wr = csv.writer(fh)
            wr.writerow(["agent", "p_hat", "p_se", "mu_hat", "mu_se", "v_hat", "v_se"])
            for i in range(len(self.p_hat)):
                wr.writerow(
                    [i + 1]
                    + [f"{val:.10g}" for val in (self.p_hat[i], self.p_se[i], self.mu_hat[i], self.mu_se[i], self.v_hat[i], self.v_se[i])]
                )


def systematic_subset(weights: np.ndarray, u: float) -> np.ndarray:
    """Subset with inclusion probabilities ``weights`` (which sum to an integer).

    Item ``j`` occupies ``[a_j, b_j)`` of the cumulative sum and is selected
    when a point of ``u + Z`` falls inside, i.e.
    ``ceil(b_j - u) - ceil(a_j - u) = 1``.
    """
    b = np.cumsum(weights)
    a = b - weights
    return (np.ceil(b - u) - np.ceil(a - u)) > 0.5


def simulate_bargaining(
    game: GameSpec,
    eq: Equilibrium,
    rounds: int = 1_000_000,
    seed: int = 1,
    block: int = 65536,
    max_periods: int = 1000,
) -> SimulationStats:
    """Play the stationary strategy profile ``rounds`` times.

    Each round: efforts are sunk, a proposer is drawn from ``p``, draws a
    coalition of ``k - 1`` peers by systematic sampling of its ``psi`` row and
    offers each member ``delta_j v_j``, keeping the rest.  A responder
    accepts iff the offer is at least its discounted continuation value
    (voting as if pivotal).  On rejection a new period starts with the same
    strategy.  Randomness is drawn per block from ``SeedSequence([seed,
    block_index])`` so results do not depend on how blocks are scheduled.

    Raises:
        ValueError: ``seed == 0`` (reserved) or ``rounds < 2``.
    """
    if seed == 0:
        raise ValueError("seed 0 is reserved; use a positive seed")
    if rounds < 2:
        raise ValueError("need at least two rounds for standard errors")
    n, k = game.n, game.k
    p = np.asarray(eq.p, float)
    dv = game.delta * eq.v
    cost = np.array([eval_function(a.cost, float(xi)) for a, xi in zip(game.agents, eq.x)])
    psi = np.array(eq.psi, float)
    np.fill_diagonal(psi, 0.0)
    psi = np.where(np.abs(psi) <= 1e-12, 0.0, np.where(np.abs(psi - 1.0) <= 1e-12, 1.0, psi))
    # renormalise rows so systematic sampling draws exactly k - 1 members
    for i in range(n):
        s = psi[i].sum()
        if k > 1 and s > 0:
            psi[i] *= (k - 1) / s

    cum_p = np.cumsum(p)
    cum_p[-1] = 1.0
    sum_prop = np.zeros(n)
    sum_incl = np.zeros(n)
    sum_pay = np.zeros(n)
    sq_pay = np.zeros(n)
    hist: dict = {}

    for b, start in enumerate(range(0, rounds, block)):
        m = min(block, rounds - start)
        rng = np.random.default_rng(np.random.SeedSequence([seed, b]))
        period = np.zeros(m, dtype=np.int64)
        done = np.zeros(m, dtype=bool)
        proposer = np.zeros(m, dtype=np.int64)
        members = np.zeros((m, n), dtype=bool)
        while not done.all():
            live = np.flatnonzero(~done)
            prop = np.searchsorted(cum_p, rng.random(len(live)), side="right")
            prop = np.minimum(prop, n - 1)
            u = rng.random(len(live))
            coal = np.zeros((len(live), n), dtype=bool)
            for i in range(n):
                sel = prop == i
                if sel.any() and k > 1:
                    coal[sel] = systematic_subset(psi[i], u[sel][:, None])
            # offers equal each member's discounted value, so every member accepts
            offers = np.where(coal, dv[None, :], 0.0)
            accepted = (offers >= dv[None, :] - 1e-15) & coal
            yes = accepted.sum(axis=1) + 1
            passed = yes >= k
            idx = live[passed]
            proposer[idx] = prop[passed]
            members[idx] = coal[passed]
            done[idx] = True
            period[live[~passed]] += 1
            if period.max() > max_periods:
                raise RuntimeError("no agreement within the period cap")
        for t, cnt in zip(*np.unique(period, return_counts=True)):
            hist[int(t)] = hist.get(int(t), 0) + int(cnt)
        disc = game.delta[None, :] ** period[:, None]
        share = np.where(members, dv[None, :], 0.0)
        share[np.arange(m), proposer] = 1.0 - (members * dv[None, :]).sum(axis=1)
        pay = disc * share - cost[None, :]
        sum_prop += np.bincount(proposer, minlength=n)
        sum_incl += members.sum(axis=0)
        sum_pay += pay.sum(axis=0)
        sq_pay += (pay**2).sum(axis=0)

    R = float(rounds)
    p_hat = sum_prop / R
    mu_hat = sum_incl / R
    v_hat = sum_pay / R
    var_v = np.maximum(sq_pay / R - v_hat**2, 0.0) * R / (R - 1)
    return SimulationStats(
        rounds=rounds,
        agreement_histogram=dict(sorted(hist.items())),
        p_hat=p_hat,
        p_se=np.sqrt(p_hat * (1 - p_hat) / (R - 1)),
        mu_hat=mu_hat,
        mu_se=np.sqrt(mu_hat * (1 - mu_hat) / (R - 1)),
        v_hat=v_hat,
        v_se=np.sqrt(var_v / R),
    )
