"""Stationary equilibrium solver.

The solve is a four-level nested root search (see :mod:`._kernels`):
recognition/inclusion probabilities per agent, aggregate output ``Y``,
vote price ``VDelta`` and finally the residual surplus ``VL`` that closes
the budget identity.  Roots of the outermost residual are bracketed on a
grid and refined with Brent's method; everything beneath runs compiled.

Typical use::

    eq = solve(game)
    report = verify_equilibrium(game, eq, tol=1e-7)
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.optimize import linprog

from . import _kernels as K
from .model import (
    N1,
    N2,
    N3,
    AgentSpec,
    Equilibrium,
    GameSpec,
    Kinked,
    Linear,
    Power,
    eval_function,
    left_derivative,
)

log = logging.getLogger(__name__)


class SolverError(RuntimeError):
    """The nested solve could not produce a candidate."""


class BracketError(SolverError):
    """An inner root is not bracketed (inconsistent outer state)."""


class NoCrossingError(SolverError):
    """A level found no sign change of its residual."""


class DivergenceError(SolverError):
    """Bracket growth exceeded the hard cap."""


class ResolutionError(SolverError):
    """No root of the budget residual on the grid, even after refinement."""


class ClassificationError(SolverError):
    """Agent partition is inconsistent with the voting rule."""


class FillError(SolverError):
    """No coalition matrix matches the inclusion probabilities."""


@dataclass(frozen=True)
class SolverConfig:
    """Numerical settings.

    Attributes:
        bisect_tol: target accuracy of every scalar root.
        grid_points: nodes of the ``VL`` scan on ``(0, 1]``.
        bracket_growth: geometric factor when growing the ``Y`` bracket.
        partition_tol: band around ``VDelta`` that counts as "at the price".
        max_iter: iteration cap per scalar root.
        root_selection: ``"largest"`` keeps the largest ``VL`` root,
            ``"all"`` keeps every root.
        vdelta_scan: nodes of the downward ``VDelta`` scan.
        vdelta_decades: orders of magnitude that scan covers.
    """

    bisect_tol: float = 1e-11
    grid_points: int = 512
    bracket_growth: float = 2.0
    partition_tol: float = 1e-8
    max_iter: int = 200
    root_selection: str = "largest"
    vdelta_scan: int = 96
    vdelta_decades: float = 12.0

    def __post_init__(self):
        for name in ("bisect_tol", "partition_tol"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.bracket_growth <= 1.0:
            raise ValueError("bracket_growth must exceed 1")
        if self.grid_points < 16:
            raise ValueError("grid_points must be at least 16")
        if self.max_iter < 1 or self.vdelta_scan < 4:
            raise ValueError("iteration counts must be positive")
        if self.root_selection not in ("largest", "all"):
            raise ValueError("root_selection must be 'largest' or 'all'")

    # tolerances handed to the compiled kernel; tighter than bisect_tol so
    # that the composed error of four nested levels stays below it
    @property
    def _ptol(self) -> float:
        return self.bisect_tol * 1e-3

    @property
    def _ytol(self) -> float:
        return self.bisect_tol * 1e-3

    @property
    def _vtol(self) -> float:
        return self.bisect_tol * 1e-3

    @property
    def _ltol(self) -> float:
        return self.bisect_tol * 1e-2


@dataclass(frozen=True)
class InnerCandidate:
    """Everything the inner three levels produce for one ``VL``."""

    VL: float
    VDelta: float
    Y: float
    p: np.ndarray
    mu: np.ndarray
    x: np.ndarray
    cost: np.ndarray
    residual: float


# ---------------------------------------------------------------------------
# packing
# ---------------------------------------------------------------------------


def _pack_function(spec) -> list:
    if isinstance(spec, Kinked):
        row = _pack_function(spec.inner)
        row[2] = 1.0
        row[3] = spec.threshold
        row[4] = spec.outer_slope
        return row
    if isinstance(spec, Linear):
        return [spec.slope, 1.0, 0.0, 0.0, 0.0]
    if isinstance(spec, Power):
        return [spec.a, spec.r, 0.0, 0.0, 0.0]
    raise TypeError(f"unsupported function spec {spec!r}")


@dataclass(frozen=True)
class _Packed:
    imp: np.ndarray
    cst: np.ndarray
    alpha: np.ndarray
    beta: np.ndarray
    delta: np.ndarray
    k: int


def _pack(game: GameSpec) -> _Packed:
    imp = np.array([_pack_function(a.impact) for a in game.agents], dtype=float)
    cst = np.array([_pack_function(a.cost) for a in game.agents], dtype=float)
    return _Packed(imp, cst, game.alpha, game.beta, game.delta, game.k)


def _inner_args(pk: _Packed, cfg: SolverConfig) -> tuple:
    return (
        cfg.bracket_growth,
        cfg._ytol,
        cfg._ptol,
        cfg._vtol,
        cfg.vdelta_scan,
        cfg.vdelta_decades,
    )


# ---------------------------------------------------------------------------
# the four levels
# ---------------------------------------------------------------------------


def step_i_pointwise(agent: AgentSpec, Y: float, VDelta: float, VL: float, cfg: SolverConfig = None):
    """Recognition and inclusion probability of one agent.

    Args:
        agent: the agent.
        Y: aggregate effective output, at least the agent's headstart.
        VDelta: vote price, ``>= 0``.
        VL: residual surplus in ``[0, 1]``.
        cfg: solver settings.

    Returns:
        ``(p, mu)``.

    Raises:
        BracketError: the first-order condition has no root in ``[beta/Y, 1]``.
    """
    cfg = cfg or SolverConfig()
    if Y < agent.beta or Y <= 0:
        raise BracketError(f"Y={Y} below the agent's headstart {agent.beta}")
    imp = np.array([_pack_function(agent.impact)])
    cst = np.array([_pack_function(agent.cost)])
    p, mu, _, _, capped = K.step1(
        imp, cst, np.array([agent.alpha]), np.array([agent.beta]), np.array([agent.delta]),
        0, float(Y), float(VDelta), float(VL), cfg._ptol,
    )
    if capped:
        raise BracketError("first-order condition still negative at p = 1")
    return float(p), float(mu)


def step_ii_solve_y(VDelta: float, VL: float, game: GameSpec, cfg: SolverConfig = None, y_guess: float = 1.0) -> float:
    """Aggregate output ``Y`` at which recognition probabilities sum to one.

    Raises:
        NoCrossingError: probabilities already sum below one at the lower boundary.
        DivergenceError: no upper bracket below ``1e30``.
    """
    cfg = cfg or SolverConfig()
    pk = _pack(game)
    Y, status = K.step2(
        pk.imp, pk.cst, pk.alpha, pk.beta, pk.delta, float(VDelta), float(VL),
        cfg.bracket_growth, cfg._ytol, cfg._ptol, float(y_guess),
    )
    if status == K.NO_CROSSING:
        raise NoCrossingError(f"sum of p below 1 already at Y={Y:g}")
    if status == K.DIVERGED:
        raise DivergenceError("Y bracket exceeded 1e30")
    return float(Y)


def step_iii_solve_vdelta(VL: float, game: GameSpec, cfg: SolverConfig = None) -> float:
    """Largest vote price with inclusion probabilities summing to ``k - 1``.

    Raises:
        NoCrossingError: no crossing on the scan.
    """
    cfg = cfg or SolverConfig()
    pk = _pack(game)
    VD, status = K.step3(
        pk.imp, pk.cst, pk.alpha, pk.beta, pk.delta, pk.k, float(VL),
        cfg.bracket_growth, cfg._ytol, cfg._ptol, cfg._vtol, cfg.vdelta_scan,
        cfg.vdelta_decades, np.ones(1),
    )
    if status != K.OK:
        raise NoCrossingError(f"no vote price found for VL={VL}")
    return float(VD)


def inner_candidate(VL: float, game: GameSpec, cfg: SolverConfig = None) -> InnerCandidate:
    """Run levels 1-3 at ``VL`` and evaluate the budget residual."""
    cfg = cfg or SolverConfig()
    pk = _pack(game)
    VD, Y, p, mu, x, c, R, status = K.inner_state(
        pk.imp, pk.cst, pk.alpha, pk.beta, pk.delta, pk.k, float(VL),
        cfg.bracket_growth, cfg._ytol, cfg._ptol, cfg._vtol, cfg.vdelta_scan,
        cfg.vdelta_decades, np.ones(1),
    )
    if status != K.OK:
        raise NoCrossingError(f"inner levels failed at VL={VL} (status {status})")
    return InnerCandidate(float(VL), float(VD), float(Y), p, mu, x, c, float(R))


#: inner tolerance used while scanning the VL grid for sign changes; the
#: residual only needs the right sign there, and brackets are re-checked at
#: full accuracy before refinement
SCAN_TOL = 1e-9


def _tight_residual(pk: _Packed, cfg: SolverConfig, vl: float) -> float:
    growth, ytol, ptol, vtol, scan, decades = _inner_args(pk, cfg)
    return float(K.inner_state(pk.imp, pk.cst, pk.alpha, pk.beta, pk.delta, pk.k, float(vl),
                               growth, ytol, ptol, vtol, scan, decades, np.ones(1))[6])


def _scan_roots(pk: _Packed, cfg: SolverConfig, points: int) -> list:
    grid = np.arange(1, points + 1) / points
    growth, ytol, ptol, vtol, scan, decades = _inner_args(pk, cfg)
    loose = max(SCAN_TOL, ytol)
    R = K.residual_grid(pk.imp, pk.cst, pk.alpha, pk.beta, pk.delta, pk.k, grid,
                        growth, loose, loose, loose, scan, decades)
    # candidates: nodes that nearly satisfy the identity and sign changes;
    # both are re-evaluated at full accuracy
    near = np.flatnonzero(np.abs(R) <= 1e3 * loose)
    tight = {int(j): _tight_residual(pk, cfg, grid[j]) for j in near}
    roots = [float(grid[j]) for j, r in tight.items() if abs(r) <= cfg._ltol]
    for j in range(points - 1):
        if not R[j] * R[j + 1] < 0.0 and not (j in tight or j + 1 in tight):
            continue
        rlo = tight.get(j)
        rhi = tight.get(j + 1)
        if rlo is None:
            rlo = _tight_residual(pk, cfg, grid[j])
        if rhi is None:
            rhi = _tight_residual(pk, cfg, grid[j + 1])
        if abs(rlo) <= cfg._ltol or abs(rhi) <= cfg._ltol or not rlo * rhi < 0.0:
            continue
        vl = K.refine_vl(pk.imp, pk.cst, pk.alpha, pk.beta, pk.delta, pk.k,
                         grid[j], grid[j + 1], rlo, rhi,
                         growth, ytol, ptol, vtol, scan, decades, cfg._ltol)
        roots.append(float(vl))
    return roots


def step_iv_solve_vl(game: GameSpec, cfg: SolverConfig = None) -> list:
    """Roots ``VL`` of the budget identity, largest first.

    Sign changes produced by jumps of the residual (rather than genuine
    roots) are discarded by re-evaluating the residual at the refined point.

    Raises:
        ResolutionError: no root at ``grid_points`` nor at four times that.
    """
    cfg = cfg or SolverConfig()
    pk = _pack(game)
    accept = max(1e3 * cfg.bisect_tol, 1e-9)
    for points in (cfg.grid_points, 4 * cfg.grid_points):
        roots = []
        for vl in _scan_roots(pk, cfg, points):
            try:
                cand = inner_candidate(vl, game, cfg)
            except SolverError:
                continue
            if abs(cand.residual) <= accept:
                roots.append(vl)
        if roots:
            roots = sorted(set(roots), reverse=True)
            return roots if cfg.root_selection == "all" else roots[:1]
        log.info("no budget root on %d-point grid; refining", points)
    raise ResolutionError("budget residual has no root on [0, 1]")


# ---------------------------------------------------------------------------
# assembly
# ---------------------------------------------------------------------------


def coalition_fill(p, mu, partition, k: int) -> np.ndarray:
    """Coalition matrix ``psi[i, j]``: probability proposer ``i`` buys ``j``.

    Columns of agents below the vote price are all ones, columns above it all
    zeros; the remaining block is a transportation problem (row totals equal
    the open seats, column totals weighted by ``p`` equal ``mu``) solved as a
    linear program that minimises the column mismatch.

    Raises:
        FillError: no matrix with matching marginals exists.
    """
    p = np.asarray(p, dtype=float)
    mu = np.asarray(mu, dtype=float)
    n = len(p)
    psi = np.zeros((n, n))
    if k == 1:
        return psi
    part = np.asarray(partition)
    low = np.flatnonzero(part == N1)
    mid = np.flatnonzero(part == N2)
    for j in low:
        psi[:, j] = 1.0
        psi[j, j] = 0.0
    seats = np.array([k - 1 - np.sum(low != i) for i in range(n)])
    if np.any(seats < 0):
        raise FillError("more agents below the vote price than open seats")
    cells = [(i, j) for j in mid for i in range(n) if i != j]
    if not cells:
        if np.any(seats != 0):
            raise FillError("open seats but nobody at the vote price")
        return psi
    nv = len(cells)
    nm = len(mid)
    # variables: psi cells, then positive and negative column slacks
    A_eq = np.zeros((n + nm, nv + 2 * nm))
    b_eq = np.zeros(n + nm)
    col_of = {j: c for c, j in enumerate(mid)}
    for v, (i, j) in enumerate(cells):
        A_eq[i, v] = 1.0
        A_eq[n + col_of[j], v] = p[i]
    for c, j in enumerate(mid):
        A_eq[n + c, nv + c] = 1.0
        A_eq[n + c, nv + nm + c] = -1.0
        b_eq[n + c] = mu[j]
    b_eq[:n] = seats
    cost = np.concatenate([np.zeros(nv), np.ones(2 * nm)])
    bounds = [(0.0, 1.0)] * nv + [(0.0, None)] * (2 * nm)
    res = linprog(cost, A_eq=A_eq, b_eq=b_eq, bounds=bounds, method="highs")
    if res.status != 0:
        raise FillError(f"coalition transportation problem failed: {res.message}")
    for v, (i, j) in enumerate(cells):
        psi[i, j] = min(1.0, max(0.0, res.x[v]))
    return psi


def assemble_equilibrium(game: GameSpec, VL: float, cfg: SolverConfig = None) -> Equilibrium:
    """Build the full equilibrium object at a budget root ``VL``.

    Raises:
        ClassificationError: more than ``k - 1`` agents strictly below the price.
    """
    cfg = cfg or SolverConfig()
    cand = inner_candidate(VL, game, cfg)
    n, k = game.n, game.k
    if 1 < k and abs(cand.mu.sum() - (k - 1)) > 1e-6 and cand.VDelta <= ZERO_PRICE:
        return _assemble_zero_price(game, VL, cfg)
    p, c, VD = cand.p.copy(), cand.cost, cand.VDelta
    delta = game.delta
    mu = cand.mu.copy()
    # at k = 1 and k = n the inclusion probabilities sit on their plateaus
    if k == 1:
        mu[:] = 0.0
    elif k == n:
        mu = 1.0 - p
    spread = VL + VD
    v = np.empty(n)
    part = np.empty(n, dtype=int)
    for i in range(n):
        if k == 1:
            v[i] = p[i] - c[i]
        elif VD > 0 and mu[i] >= (1.0 - p[i]) * (1.0 - 1e-12):
            v[i] = (p[i] * VL - c[i]) / (1.0 - delta[i])
        elif mu[i] <= 1e-14:
            v[i] = p[i] * spread - c[i]
        else:
            v[i] = VD / delta[i]
        gap = delta[i] * v[i] - VD
        if abs(gap) <= cfg.partition_tol:
            part[i] = N2
        elif gap < 0:
            part[i] = N1
        else:
            part[i] = N3
    if np.sum(part == N1) > k - 1:
        raise ClassificationError(f"{int(np.sum(part == N1))} agents below the vote price with k={k}")
    psi = coalition_fill(p, mu, part, k)
    return Equilibrium(cand.x, p, mu, psi, v, cand.Y, VD, VL, tuple(part))


#: vote prices below this count as zero when the inclusion sum jumps there
ZERO_PRICE = 1e-9


def _assemble_zero_price(game: GameSpec, VL: float, cfg: SolverConfig) -> Equilibrium:
    """Equilibrium whose vote price is zero.

    When at least ``k`` agents are worth nothing (no recognition, no cost),
    every positive price buys all of them, so the inclusion sum jumps past
    ``k - 1`` and the price root collapses to zero.  At a zero price the
    median condition holds for any inclusion probability; seats are spread
    evenly over the worthless agents and ``mu`` is read off the coalition
    matrix.
    """
    pk = _pack(game)
    n, k = game.n, game.k
    Y, status = K.step2(pk.imp, pk.cst, pk.alpha, pk.beta, pk.delta, 0.0, float(VL),
                        cfg.bracket_growth, cfg._ytol, cfg._ptol, 1.0)
    if status != K.OK:
        raise NoCrossingError(f"no aggregate output at zero vote price (status {status})")
    p, _, x, c, _ = K.profile(pk.imp, pk.cst, pk.alpha, pk.beta, pk.delta, Y, 0.0, float(VL), cfg._ptol)
    v = p * VL - c
    free = np.flatnonzero(game.delta * v <= cfg.partition_tol)
    if len(free) < k:
        raise ClassificationError(f"zero vote price with only {len(free)} worthless agents for k={k}")
    psi = np.zeros((n, n))
    for i in range(n):
        cols = free[free != i]
        psi[i, cols] = (k - 1) / len(cols)
    mu = (psi * p[:, None]).sum(axis=0)
    part = tuple(N2 if j in free else N3 for j in range(n))
    return Equilibrium(x, p, mu, psi, v, Y, 0.0, VL, part)


def solve_all(game: GameSpec, cfg: SolverConfig = None) -> list:
    """Every equilibrium found on the ``VL`` grid, largest ``VL`` first."""
    cfg = cfg or SolverConfig()
    roots = step_iv_solve_vl(game, replace(cfg, root_selection="all"))
    out = []
    for vl in roots:
        eq = assemble_equilibrium(game, vl, cfg)
        rep = verify_equilibrium(game, eq)
        out.append(replace(eq, residuals=rep.residuals))
    return out


def solve(game: GameSpec, cfg: SolverConfig = None) -> Equilibrium:
    """Canonical (largest ``VL``) equilibrium of ``game``.

    The returned object carries the verifier's per-condition residuals.
    """
    cfg = cfg or SolverConfig()
    roots = step_iv_solve_vl(game, replace(cfg, root_selection="largest"))
    eq = assemble_equilibrium(game, roots[0], cfg)
    rep = verify_equilibrium(game, eq)
    return replace(eq, residuals=rep.residuals)


# ---------------------------------------------------------------------------
# verification
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class VerificationReport:
    residuals: dict
    tol: float
    max_residual: float = field(init=False)
    passed: bool = field(init=False)

    def __post_init__(self):
        m = max(self.residuals.values()) if self.residuals else 0.0
        if not math.isfinite(m):
            m = math.inf
        object.__setattr__(self, "max_residual", float(m))
        object.__setattr__(self, "passed", bool(m <= self.tol))

    @property
    def worst(self) -> str:
        return max(self.residuals, key=self.residuals.get)


def _at_kink(spec, x: float) -> bool:
    return isinstance(spec, Kinked) and abs(x - spec.threshold) <= 1e-9 * max(1.0, spec.threshold)


def _foc_slack(agent: AgentSpec, x: float, Y: float, rhs: float, left: bool) -> float:
    d = left_derivative if left else (lambda s, t: eval_function(s, t, "derivative"))
    fd = agent.alpha * d(agent.impact, x)
    if math.isinf(fd):
        return -rhs
    return Y * d(agent.cost, x) / fd - rhs


def verify_equilibrium(game: GameSpec, eq: Equilibrium, tol: float = 1e-7) -> VerificationReport:
    """Residual of every equilibrium condition, evaluated from scratch.

    Conditions: probabilities sum to one and match the lottery, inclusion
    probabilities sum to ``k - 1`` and obey the median rule, first-order
    conditions (one-sided at corners, subgradient at kinks), the budget
    identity, coalition marginals and structure, the Bellman equation,
    partition consistency and non-negative values.
    """
    n, k = game.n, game.k
    if eq.n != n or eq.psi.shape != (n, n):
        return VerificationReport({"shape": math.inf}, tol)
    x, p, mu, psi, v = eq.x, eq.p, eq.mu, eq.psi, eq.v
    VL, VD = eq.VL, eq.VDelta
    delta = game.delta
    part = np.asarray(eq.partition)
    agents = game.agents
    out_ = np.array([a.output(float(xi)) for a, xi in zip(agents, x)])
    Y = float(out_.sum())
    cost = np.array([eval_function(a.cost, float(xi)) for a, xi in zip(agents, x)])
    r = {}
    r["sum_p"] = abs(p.sum() - 1.0)
    r["recognition"] = float(np.max(np.abs(p - out_ / Y))) if Y > 0 else math.inf
    r["aggregate_output"] = abs(Y - eq.Y) / max(1.0, Y)
    r["sum_mu"] = abs(mu.sum() - (k - 1))
    r["mu_bounds"] = float(max(0.0, np.max(-mu), np.max(mu - (1.0 - p))))

    foc = 0.0
    for i, a in enumerate(agents):
        if a.alpha == 0:
            continue
        rhs = (1.0 - p[i]) * (VL + VD) - mu[i] * VD
        right = _foc_slack(a, float(x[i]), Y, rhs, left=False)
        if x[i] <= 0.0:
            foc = max(foc, -right)
        elif _at_kink(a.cost, float(x[i])) or _at_kink(a.impact, float(x[i])):
            # snap onto the threshold so the one-sided derivatives differ
            spec = a.cost if _at_kink(a.cost, float(x[i])) else a.impact
            right = _foc_slack(a, spec.threshold, Y, rhs, left=False)
            leftv = _foc_slack(a, spec.threshold, Y, rhs, left=True)
            lo, hi = min(leftv, right), max(leftv, right)
            foc = max(foc, lo, -hi)
        else:
            foc = max(foc, abs(right))
    r["foc"] = foc

    if VD > 0:
        t = VD / delta - p * (VL + VD) + cost
        med = np.median(np.vstack([np.zeros(n), VD * (1.0 - p), t]), axis=0) / VD
        r["median"] = float(np.max(np.abs(mu - med)))
    else:
        # a zero price satisfies the median identity for any mu; agents
        # above it must stay out of coalitions
        above = delta * v > tol
        r["median"] = float(np.max(np.abs(mu[above]), initial=0.0))

    low = part == N1
    r["budget"] = abs(VL + np.sum(delta[low] * v[low]) + (k - low.sum()) * VD - 1.0)

    off = ~np.eye(n, dtype=bool)
    r["psi_rows"] = float(np.max(np.abs((psi * off).sum(axis=1) - (k - 1))))
    r["psi_cols"] = float(np.max(np.abs(((psi * off) * p[:, None]).sum(axis=0) - mu)))
    structure = max(0.0, float(np.max(-psi)), float(np.max(psi - 1.0)), float(np.max(np.abs(np.diag(psi)))))
    for j in range(n):
        col = np.delete(psi[:, j], j)
        if part[j] == N1:
            structure = max(structure, float(np.max(np.abs(col - 1.0))))
        elif part[j] == N3:
            structure = max(structure, float(np.max(np.abs(col))))
    r["psi_structure"] = structure

    w = (psi * off) @ (delta * v)
    r["bellman"] = float(np.max(np.abs(v - (p * (1.0 - w) + mu * delta * v - cost))))

    dv = delta * v
    pres = 0.0
    for i in range(n):
        if part[i] == N1:
            pres = max(pres, dv[i] - VD)
        elif part[i] == N3:
            pres = max(pres, VD - dv[i])
        else:
            pres = max(pres, abs(dv[i] - VD))
    if low.sum() > k - 1:
        pres = math.inf
    r["partition"] = max(0.0, pres)
    r["vote_price"] = abs(np.sort(dv)[k - 1] - VD)
    r["nonnegative_v"] = float(max(0.0, np.max(-v)))
    return VerificationReport(r, tol)


# ---------------------------------------------------------------------------
# fixed-profile values
# ---------------------------------------------------------------------------


def fixed_profile_values(p, cost, delta, k: int, grid_points: int = 256):
    """``(VL, VDelta, mu)`` for a fixed recognition profile and effort costs.

    Holds ``(x, p)`` fixed and solves only the inclusion / budget part of
    the equilibrium conditions (the largest budget root, as in :func:`solve`).
    Used to compare voting rules while the designer re-tunes the mechanism to
    keep efforts unchanged.

    Args:
        p: recognition probabilities.
        cost: effort cost of each agent.
        delta: discount factors.
        k: voting threshold.
        grid_points: nodes of the ``VL`` scan.

    Returns:
        Tuple ``(VL, VDelta, mu)``.

    Raises:
        ResolutionError: the budget identity has no root.
    """
    from scipy.optimize import brentq

    p = np.asarray(p, float)
    c = np.asarray(cost, float)
    d = np.asarray(delta, float)
    n = len(p)
    if k == 1:
        # VL + VDelta = 1 and VDelta is the lowest discounted value p - c
        vd = float(np.min(d * (p - c)))
        return 1.0 - vd, vd, np.zeros(n)

    def excess(VL, vd):
        # vectorised over vd; same sign convention as the compiled solver
        vd = np.atleast_1d(vd)[:, None]
        t = (vd / d - p * (VL + vd) + c) / vd
        if k == n:
            return np.min(t - (1.0 - p), axis=1)
        return np.clip(t, 0.0, 1.0 - p).sum(axis=1) - (k - 1)

    ratios = np.logspace(0.0, -12.0, 97)

    def vd_of(VL):
        top = VL * np.max(d / (1 - d)) * (1 + 1e-9) + 1e-300
        nodes = top * ratios
        g = excess(VL, nodes)
        below = np.flatnonzero(g <= 0)
        if len(below) == 0 or below[0] == 0:
            return 0.0
        j = below[0]
        f = lambda v: float(excess(VL, v)[0])
        return brentq(f, nodes[j], nodes[j - 1], xtol=1e-17, rtol=1e-15)

    def resid(VL):
        VD = vd_of(VL)
        return VL + k * VD + np.sum(np.minimum(0.0, d / (1 - d) * (p * VL - c) - VD)) - 1.0

    grid = np.arange(1, grid_points + 1) / grid_points
    R = np.array([resid(v) for v in grid])
    idx = np.flatnonzero(R[:-1] * R[1:] <= 0)
    if len(idx) == 0:
        raise ResolutionError("no fixed-profile budget root")
    j = idx[-1]
    VL = brentq(resid, grid[j], grid[j + 1], xtol=1e-15, rtol=1e-15)
    VD = vd_of(VL)
    if VD > 0:
        t = (VD / d - p * (VL + VD) + c) / VD
        mu = np.clip(t, 0.0, 1.0 - p)
    else:
        mu = np.zeros(n)
    if k == n:
        mu = 1.0 - p
    return float(VL), float(VD), mu
