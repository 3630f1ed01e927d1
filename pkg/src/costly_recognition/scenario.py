"""Scenario files: strict JSON descriptions of a game and what to do with it.

Layout::

    {
      "agents": [
        {"impact": {"family": "linear", "slope": 1.0},
         "cost":   {"family": "power", "a": 1.0, "r": 2.0},
         "delta": 0.5, "alpha": 1.0, "beta": 0.0},
        ...
      ],
      "k": 2,
      "objective": {"form": "total_effort", "lam": 0.0, "target": [...], "weights": [...]},
      "solver": {"bisect_tol": 1e-11, "grid_points": 512, ...},
      "design": {"k_candidates": [1, 2, 3], "locked": false},
      "simulate": {"rounds": 1000000, "seed": 1}
    }

Function records are tagged by ``family``: ``linear`` (``slope``),
``power`` (``a``, ``r``) and ``kinked`` (``inner``, ``threshold``,
``outer_slope``).  Unknown keys anywhere are errors, reported with the line
on which they appear.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field, fields

from .model import AgentSpec, GameSpec, Kinked, Linear, ModelError, ObjectiveSpec, Power
from .solver import SolverConfig


class ScenarioError(ValueError):
    """Malformed scenario; the message carries ``path:line:`` when known."""


@dataclass(frozen=True)
class DesignOptions:
    k_candidates: tuple = None
    locked: bool = False


@dataclass(frozen=True)
class SimulateOptions:
    rounds: int = 1_000_000
    seed: int = 1


@dataclass(frozen=True)
class Scenario:
    """A parsed scenario file."""

    game: GameSpec
    objective: ObjectiveSpec = field(default_factory=ObjectiveSpec)
    solver: SolverConfig = field(default_factory=SolverConfig)
    design: DesignOptions = field(default_factory=DesignOptions)
    simulate: SimulateOptions = field(default_factory=SimulateOptions)
    source: str = "<string>"


_TOP = {"agents", "k", "objective", "solver", "design", "simulate", "description"}
_AGENT = {"impact", "cost", "delta", "alpha", "beta"}
_FAMILIES = {
    "linear": {"slope"},
    "power": {"a", "r"},
    "kinked": {"inner", "threshold", "outer_slope"},
}
_OBJECTIVE = {"form", "lam", "target", "weights"}
_SOLVER = {f.name for f in fields(SolverConfig)}
_DESIGN = {f.name for f in fields(DesignOptions)}
_SIMULATE = {f.name for f in fields(SimulateOptions)}


class _Parser:
    def __init__(self, text: str, source: str):
        self.text = text
        self.source = source

    def line_of(self, key: str) -> int:
        m = re.search(r'"%s"\s*:' % re.escape(key), self.text)
        return self.text.count("\n", 0, m.start()) + 1 if m else 0

    def fail(self, msg: str, key: str = None):
        line = self.line_of(key) if key else 0
        where = f"{self.source}:{line}: " if line else f"{self.source}: "
        raise ScenarioError(where + msg)

    def check_keys(self, obj, allowed: set, context: str, required=()):
        if not isinstance(obj, dict):
            self.fail(f"{context} must be an object")
        for key in obj:
            if key not in allowed:
                self.fail(f"unknown key {key!r} in {context} (allowed: {', '.join(sorted(allowed))})", key)
        for key in required:
            if key not in obj:
                self.fail(f"{context} is missing required key {key!r}")

    def number(self, obj, key, context, default=None, integer=False):
        if key not in obj:
            if default is None:
                self.fail(f"{context} is missing required key {key!r}")
            return default
        val = obj[key]
        ok = isinstance(val, int) if integer else isinstance(val, (int, float))
        if isinstance(val, bool) or not ok:
            kind = "an integer" if integer else "a number"
            self.fail(f"{context}.{key} must be {kind}, got {val!r}", key)
        return int(val) if integer else float(val)

    def function(self, obj, context):
        if not isinstance(obj, dict) or "family" not in obj:
            self.fail(f"{context} must be an object with a 'family' tag")
        fam = obj["family"]
        if fam not in _FAMILIES:
            self.fail(f"{context}: unknown family {fam!r} (use linear, power or kinked)", "family")
        self.check_keys(obj, _FAMILIES[fam] | {"family"}, context, required=tuple(_FAMILIES[fam]))
        try:
            if fam == "linear":
                return Linear(self.number(obj, "slope", context))
            if fam == "power":
                return Power(self.number(obj, "a", context), self.number(obj, "r", context))
            return Kinked(
                self.function(obj["inner"], context + ".inner"),
                self.number(obj, "threshold", context),
                self.number(obj, "outer_slope", context),
            )
        except ModelError as exc:
            self.fail(f"{context}: {exc}")

    def parse(self) -> Scenario:
        try:
            doc = json.loads(self.text)
        except json.JSONDecodeError as exc:
            raise ScenarioError(f"{self.source}:{exc.lineno}: invalid JSON: {exc.msg}") from None
        self.check_keys(doc, _TOP, "scenario", required=("agents", "k"))
        raw_agents = doc["agents"]
        if not isinstance(raw_agents, list) or len(raw_agents) < 2:
            self.fail("'agents' must be a list of at least two agents", "agents")
        agents = []
        for i, raw in enumerate(raw_agents, start=1):
            ctx = f"agents[{i}]"
            self.check_keys(raw, _AGENT, ctx, required=("impact", "cost", "delta"))
            try:
                agents.append(
                    AgentSpec(
                        self.function(raw["impact"], ctx + ".impact"),
                        self.function(raw["cost"], ctx + ".cost"),
                        self.number(raw, "delta", ctx),
                        self.number(raw, "alpha", ctx, 1.0),
                        self.number(raw, "beta", ctx, 0.0),
                    )
                )
            except ModelError as exc:
                self.fail(f"{ctx}: {exc}")
        k = self.number(doc, "k", "scenario", integer=True)
        try:
            game = GameSpec(agents, k)
        except ModelError as exc:
            self.fail(str(exc), "k")

        objective = ObjectiveSpec()
        if "objective" in doc:
            o = doc["objective"]
            self.check_keys(o, _OBJECTIVE, "objective")
            try:
                objective = ObjectiveSpec(
                    o.get("form", "total_effort"),
                    self.number(o, "lam", "objective", 0.0),
                    o.get("target"),
                    o.get("weights"),
                )
                objective.target_for(game.n)
                if objective.weights is not None and len(objective.weights) != game.n:
                    raise ModelError(f"weights have {len(objective.weights)} entries for {game.n} agents")
            except (ModelError, TypeError) as exc:
                self.fail(f"objective: {exc}", "objective")

        solver = SolverConfig()
        if "solver" in doc:
            self.check_keys(doc["solver"], _SOLVER, "solver")
            try:
                solver = SolverConfig(**doc["solver"])
            except (ValueError, TypeError) as exc:
                self.fail(f"solver: {exc}", "solver")

        design = DesignOptions()
        if "design" in doc:
            d = doc["design"]
            self.check_keys(d, _DESIGN, "design")
            ks = d.get("k_candidates")
            if ks is not None and (
                not isinstance(ks, list) or not ks or any(not isinstance(v, int) or not 1 <= v <= game.n for v in ks)
            ):
                self.fail(f"design.k_candidates must list integers in 1..{game.n}", "k_candidates")
            locked = d.get("locked", False)
            if not isinstance(locked, bool):
                self.fail("design.locked must be true or false", "locked")
            design = DesignOptions(tuple(ks) if ks else None, locked)

        simulate = SimulateOptions()
        if "simulate" in doc:
            s = doc["simulate"]
            self.check_keys(s, _SIMULATE, "simulate")
            simulate = SimulateOptions(
                self.number(s, "rounds", "simulate", 1_000_000, integer=True),
                self.number(s, "seed", "simulate", 1, integer=True),
            )
        return Scenario(game, objective, solver, design, simulate, self.source)


def parse_scenario(text: str, source: str = "<string>") -> Scenario:
    """Parse scenario text.

    Raises:
        ScenarioError: syntax error, unknown key, or invalid value.
    """
    return _Parser(text, source).parse()


def load_scenario(path) -> Scenario:
    """Read and parse a scenario file."""
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ScenarioError(f"{path}: cannot read: {exc.strerror}") from None
    return parse_scenario(text, str(path))


def function_to_dict(spec) -> dict:
    """Inverse of the function-record parser."""
    if isinstance(spec, Linear):
        return {"family": "linear", "slope": spec.slope}
    if isinstance(spec, Power):
        return {"family": "power", "a": spec.a, "r": spec.r}
    return {
        "family": "kinked",
        "inner": function_to_dict(spec.inner),
        "threshold": spec.threshold,
        "outer_slope": spec.outer_slope,
    }


def game_to_dict(game: GameSpec) -> dict:
    """Scenario document (agents and k) describing ``game``."""
    return {
        "agents": [
            {
                "impact": function_to_dict(a.impact),
                "cost": function_to_dict(a.cost),
                "delta": a.delta,
                "alpha": a.alpha,
                "beta": a.beta,
            }
            for a in game.agents
        ],
        "k": game.k,
    }
