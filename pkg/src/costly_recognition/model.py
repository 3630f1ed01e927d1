"""Domain types for bargaining games with contested proposer recognition.

A game is a list of agents plus a voting threshold ``k``.  Each agent carries
an impact function ``f`` and a cost function ``c`` drawn from three parametric
families (linear, power, kinked), a discount factor and the designer's bias
``alpha`` and headstart ``beta``.  The effective output entering the lottery
is ``alpha * f(x) + beta``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence, Union

import numpy as np


class ModelError(ValueError):
    """Invalid primitives (bad parameters, violated regularity)."""


class DomainError(ModelError):
    """Function evaluated outside its domain."""


class InfeasibleTarget(ModelError):
    """No effort level produces the requested effective output."""


# ---------------------------------------------------------------------------
# function families
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Linear:
    slope: float

    def __post_init__(self):
        if not (self.slope > 0 and math.isfinite(self.slope)):
            raise ModelError(f"linear slope must be positive, got {self.slope}")

    def value(self, x: float) -> float:
        return self.slope * x

    def derivative(self, x: float) -> float:
        return self.slope

    def inverse(self, y: float) -> float:
        return y / self.slope

    @property
    def exponent(self) -> float:
        return 1.0

    @property
    def coefficient(self) -> float:
        return self.slope


@dataclass(frozen=True)
class Power:
    a: float
    r: float

    def __post_init__(self):
        if not (self.a > 0 and math.isfinite(self.a)):
            raise ModelError(f"power coefficient must be positive, got {self.a}")
        if not (self.r > 0 and math.isfinite(self.r)):
            raise ModelError(f"power exponent must be positive, got {self.r}")

    def value(self, x: float) -> float:
        return self.a * x**self.r

    def derivative(self, x: float) -> float:
        if x == 0.0:
            if self.r < 1:
                return math.inf
            return self.a if self.r == 1 else 0.0
        return self.a * self.r * x ** (self.r - 1.0)

    def inverse(self, y: float) -> float:
        return (y / self.a) ** (1.0 / self.r)

    @property
    def exponent(self) -> float:
        return self.r

    @property
    def coefficient(self) -> float:
        return self.a


@dataclass(frozen=True)
class Kinked:
    """``inner`` up to ``threshold``, then a straight line of slope ``outer_slope``.

    At the threshold itself the derivative is the outer (right) slope.
    """

    inner: Union[Linear, Power]
    threshold: float
    outer_slope: float

    def __post_init__(self):
        if isinstance(self.inner, Kinked):
            raise ModelError("kinked functions cannot be nested")
        if not (self.threshold > 0 and math.isfinite(self.threshold)):
            raise ModelError(f"kink threshold must be positive, got {self.threshold}")
        if not (self.outer_slope > 0 and math.isfinite(self.outer_slope)):
            raise ModelError(f"outer slope must be positive, got {self.outer_slope}")

    @property
    def level(self) -> float:
        return self.inner.value(self.threshold)

    def value(self, x: float) -> float:
        if x <= self.threshold:
            return self.inner.value(x)
        return self.level + self.outer_slope * (x - self.threshold)

    def derivative(self, x: float) -> float:
        if x < self.threshold:
            return self.inner.derivative(x)
        return self.outer_slope

    def left_derivative(self, x: float) -> float:
        if x <= self.threshold:
            return self.inner.derivative(x)
        return self.outer_slope

    def inverse(self, y: float) -> float:
        if y <= self.level:
            return self.inner.inverse(y)
        return self.threshold + (y - self.level) / self.outer_slope

    @property
    def inner_slope_at_kink(self) -> float:
        return self.inner.derivative(self.threshold)


FunctionSpec = Union[Linear, Power, Kinked]


def eval_function(spec: FunctionSpec, x: float, order: str = "value") -> float:
    """Evaluate ``spec`` or its derivative at ``x >= 0``.

    Kinked functions return the right derivative at their threshold.
    """
    if not x >= 0:
        raise DomainError(f"functions are defined on x >= 0, got {x}")
    if order == "value":
        out = spec.value(x)
    elif order == "derivative":
        out = spec.derivative(x)
        if x > 0 and not out > 0:
            raise DomainError(f"non-positive derivative {out} at x={x}")
    else:
        raise ValueError(f"unknown order {order!r}")
    if math.isnan(out) or (order == "value" and math.isinf(out)):
        raise ArithmeticError(f"non-finite value {out} at x={x}")
    return float(out)


def left_derivative(spec: FunctionSpec, x: float) -> float:
    if isinstance(spec, Kinked):
        return spec.left_derivative(x)
    return spec.derivative(x)


def is_concave(spec: FunctionSpec) -> bool:
    if isinstance(spec, Linear):
        return True
    if isinstance(spec, Power):
        return spec.r <= 1
    return is_concave(spec.inner) and spec.outer_slope <= spec.inner_slope_at_kink


def is_convex(spec: FunctionSpec) -> bool:
    if isinstance(spec, Linear):
        return True
    if isinstance(spec, Power):
        return spec.r >= 1
    return is_convex(spec.inner) and spec.outer_slope >= spec.inner_slope_at_kink


def check_impact(spec: FunctionSpec) -> None:
    if not is_concave(spec):
        raise ModelError(f"impact function must be concave: {spec}")


def check_cost(spec: FunctionSpec) -> None:
    # strict monotonicity holds for every family; convexity is only recorded
    base = spec.inner if isinstance(spec, Kinked) else spec
    if isinstance(base, Power) and base.r < 1:
        raise ModelError(f"cost pieces must be convex (exponent >= 1): {spec}")


# ---------------------------------------------------------------------------
# agents and games
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class AgentSpec:
    impact: FunctionSpec
    cost: FunctionSpec
    delta: float
    alpha: float = 1.0
    beta: float = 0.0

    def __post_init__(self):
        if not 0.0 < self.delta < 1.0:
            raise ModelError(f"discount factor must lie in (0, 1), got {self.delta}")
        if not (self.alpha >= 0 and math.isfinite(self.alpha)):
            raise ModelError(f"alpha must be >= 0, got {self.alpha}")
        if not (self.beta >= 0 and math.isfinite(self.beta)):
            raise ModelError(f"beta must be >= 0, got {self.beta}")
        check_impact(self.impact)
        check_cost(self.cost)

    @property
    def convex_cost(self) -> bool:
        return is_convex(self.cost)

    def output(self, x: float) -> float:
        """Effective output ``alpha * f(x) + beta``."""
        return self.alpha * eval_function(self.impact, x) + self.beta

    def with_mechanism(self, alpha: float, beta: float) -> "AgentSpec":
        return AgentSpec(self.impact, self.cost, self.delta, float(alpha), float(beta))


@dataclass(frozen=True)
class GameSpec:
    agents: tuple
    k: int

    def __post_init__(self):
        object.__setattr__(self, "agents", tuple(self.agents))
        n = len(self.agents)
        if n < 2:
            raise ModelError("a game needs at least two agents")
        if not (isinstance(self.k, (int, np.integer)) and 1 <= self.k <= n):
            raise ModelError(f"voting threshold k must be an integer in [1, {n}], got {self.k}")
        object.__setattr__(self, "k", int(self.k))
        if all(a.alpha == 0 and a.beta == 0 for a in self.agents):
            raise ModelError("at least one agent needs alpha > 0 or beta > 0")

    @property
    def n(self) -> int:
        return len(self.agents)

    @property
    def alpha(self) -> np.ndarray:
        return np.array([a.alpha for a in self.agents])

    @property
    def beta(self) -> np.ndarray:
        return np.array([a.beta for a in self.agents])

    @property
    def delta(self) -> np.ndarray:
        return np.array([a.delta for a in self.agents])

    @property
    def convex_costs(self) -> bool:
        return all(a.convex_cost for a in self.agents)

    def with_k(self, k: int) -> "GameSpec":
        return GameSpec(self.agents, k)

    def with_mechanism(self, alpha: Sequence[float], beta: Sequence[float]) -> "GameSpec":
        agents = [a.with_mechanism(al, be) for a, al, be in zip(self.agents, alpha, beta)]
        return GameSpec(agents, self.k)


N1, N2, N3 = 1, 2, 3


def _frozen(a) -> np.ndarray:
    arr = np.array(a, dtype=float)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class Equilibrium:
    """A stationary equilibrium of a :class:`GameSpec`.

    ``partition[i]`` is 1, 2 or 3 depending on whether agent ``i``'s
    discounted value lies below, at or above the marginal vote price
    ``VDelta``.
    """

    x: np.ndarray
    p: np.ndarray
    mu: np.ndarray
    psi: np.ndarray
    v: np.ndarray
    Y: float
    VDelta: float
    VL: float
    partition: tuple
    residuals: dict = field(default_factory=dict)

    def __post_init__(self):
        for name in ("x", "p", "mu", "psi", "v"):
            object.__setattr__(self, name, _frozen(getattr(self, name)))
        object.__setattr__(self, "partition", tuple(int(g) for g in self.partition))
        for name in ("Y", "VDelta", "VL"):
            object.__setattr__(self, name, float(getattr(self, name)))

    @property
    def n(self) -> int:
        return len(self.x)

    def members(self, group: int) -> list:
        return [i for i, g in enumerate(self.partition) if g == group]

    def prize_spreads(self) -> np.ndarray:
        """Effective winner-minus-loser payoff differential per agent."""
        one_minus_p = 1.0 - self.p
        with np.errstate(divide="ignore", invalid="ignore"):
            frac = np.where(one_minus_p > 0, (one_minus_p - self.mu) / one_minus_p, 1.0)
        return self.VL + frac * self.VDelta

    def coalitions(self, threshold: float = 0.5) -> list:
        """Winning coalition of each proposer (proposer included), 1-based."""
        out = []
        for i in range(self.n):
            members = {i + 1} | {j + 1 for j in range(self.n) if self.psi[i, j] > threshold}
            out.append(sorted(members))
        return out

    def total_effort(self) -> float:
        return float(np.sum(self.x))


# ---------------------------------------------------------------------------
# objectives
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ObjectiveSpec:
    """Designer objective.

    ``form`` is one of ``total_effort``, ``fairness_penalized``,
    ``expected_winner_effort`` or ``weighted_effort``.
    """

    form: str = "total_effort"
    lam: float = 0.0
    target: tuple = None
    weights: tuple = None

    FORMS = ("total_effort", "fairness_penalized", "expected_winner_effort", "weighted_effort")

    def __post_init__(self):
        if self.form not in self.FORMS:
            raise ModelError(f"unknown objective form {self.form!r}")
        if self.lam < 0:
            raise ModelError("penalty weight must be >= 0")
        if self.target is not None:
            t = tuple(float(v) for v in self.target)
            if any(v < 0 for v in t) or abs(sum(t) - 1.0) > 1e-9:
                raise ModelError("target profile must lie on the simplex")
            object.__setattr__(self, "target", t)
        if self.weights is not None:
            w = tuple(float(v) for v in self.weights)
            if any(v < 0 for v in w):
                raise ModelError("effort weights must be >= 0")
            object.__setattr__(self, "weights", w)
        if self.form == "weighted_effort" and self.weights is None:
            raise ModelError("weighted_effort needs weights")

    def target_for(self, n: int) -> np.ndarray:
        if self.target is None:
            return np.full(n, 1.0 / n)
        if len(self.target) != n:
            raise ModelError(f"target has {len(self.target)} entries for {n} agents")
        return np.asarray(self.target)


# ---------------------------------------------------------------------------
# primitive maps
# ---------------------------------------------------------------------------

INV_TOL_CLOSED = 1e-12
INV_TOL_BISECT = 1e-10


def invert_effective_impact(agent: AgentSpec, target: float) -> float:
    """Effort ``x >= 0`` with ``alpha * f(x) + beta == target``."""
    base = agent.beta
    if agent.alpha == 0:
        if abs(target - base) <= INV_TOL_CLOSED * max(1.0, base):
            return 0.0
        raise InfeasibleTarget(f"agent with alpha=0 only produces {base}, asked for {target}")
    if target < base:
        if base - target <= INV_TOL_CLOSED * max(1.0, base):
            return 0.0
        raise InfeasibleTarget(f"target {target} below headstart {base}")
    return float(agent.impact.inverse((target - base) / agent.alpha))


def recognition_probabilities(xs: Sequence[float], agents: Sequence[AgentSpec]) -> np.ndarray:
    """Lottery recognition probabilities for effort profile ``xs``."""
    if len(xs) != len(agents):
        raise ModelError("effort profile and agent list differ in length")
    out = np.array([a.output(float(x)) for a, x in zip(agents, xs)])
    total = out.sum()
    if total > 0:
        return out / total
    return np.full(len(agents), 1.0 / len(agents))
