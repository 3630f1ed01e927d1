import json
from pathlib import Path

import pytest

from costly_recognition import catalog
from costly_recognition.model import Kinked, Linear, Power
from costly_recognition.scenario import ScenarioError, game_to_dict, load_scenario, parse_scenario

SCENARIOS = Path(__file__).resolve().parents[1] / "scenarios"


@pytest.mark.parametrize("path", sorted(SCENARIOS.glob("*.json")), ids=lambda p: p.stem)
def test_bundled_scenarios_parse(path):
    sc = load_scenario(path)
    assert sc.game.n >= 2
    assert sc.source == str(path)


def test_four_agent_scenarios_match_catalog():
    for k in (1, 2, 3, 4):
        sc = load_scenario(SCENARIOS / f"example1_k{k}.json")
        assert sc.game == catalog.example1(k)


def test_three_agent_scenario_matches_catalog():
    sc = load_scenario(SCENARIOS / "example2.json")
    for a, b in zip(sc.game.agents, catalog.example2(0.01).agents):
        assert a.alpha == pytest.approx(b.alpha, rel=1e-15)
        assert a.beta == pytest.approx(b.beta, rel=1e-15)
    assert sc.objective.form == "fairness_penalized"
    assert sc.simulate.seed == 1


def test_seven_agent_scenario_is_locked_and_kinked():
    sc = load_scenario(SCENARIOS / "example3.json")
    assert sc.design.locked
    assert sc.design.k_candidates == (4, 5)
    assert all(isinstance(a.cost, Kinked) for a in sc.game.agents)


def test_game_round_trips_through_a_document():
    g = catalog.example3(5)
    sc = parse_scenario(json.dumps(game_to_dict(g)))
    assert sc.game == g


def _doc(**extra):
    doc = {
        "agents": [
            {"impact": {"family": "linear", "slope": 1.0}, "cost": {"family": "power", "a": 1.0, "r": 2.0}, "delta": 0.5},
            {"impact": {"family": "linear", "slope": 1.0}, "cost": {"family": "linear", "slope": 1.0}, "delta": 0.5},
        ],
        "k": 2,
    }
    doc.update(extra)
    return doc


def test_minimal_document_uses_defaults():
    sc = parse_scenario(json.dumps(_doc()))
    assert isinstance(sc.game.agents[0].cost, Power)
    assert isinstance(sc.game.agents[1].cost, Linear)
    assert sc.game.agents[0].alpha == 1.0 and sc.game.agents[0].beta == 0.0
    assert sc.solver.grid_points == 512
    assert sc.simulate.rounds == 1_000_000


def test_unknown_key_reports_its_line():
    text = json.dumps(_doc(), indent=2).replace('"delta": 0.5', '"delta": 0.5, "detla": 0.5', 1)
    with pytest.raises(ScenarioError) as err:
        parse_scenario(text, "game.json")
    line = next(i for i, s in enumerate(text.splitlines(), start=1) if '"detla"' in s)
    assert str(err.value).startswith(f"game.json:{line}:")
    assert "detla" in str(err.value)


def test_invalid_json_reports_its_line():
    with pytest.raises(ScenarioError, match=r"^x.json:3: invalid JSON"):
        parse_scenario('{\n"k": 2,\n"agents": [,]\n}', "x.json")


@pytest.mark.parametrize(
    "mutate, message",
    [
        (lambda d: d.update(k=3), "voting threshold"),
        (lambda d: d.update(k=1.5), "integer"),
        (lambda d: d["agents"][0].update(delta=1.2), "discount"),
        (lambda d: d["agents"][0]["impact"].update(family="cubic"), "unknown family"),
        (lambda d: d["agents"][0]["cost"].pop("r"), "missing required key 'r'"),
        (lambda d: d.update(objective={"form": "fairness_penalized", "target": [0.2, 0.2]}), "simplex"),
        (lambda d: d.update(solver={"grid_points": 2}), "grid_points"),
        (lambda d: d.update(design={"k_candidates": [0]}), "k_candidates"),
        (lambda d: d.update(design={"locked": "yes"}), "locked"),
        (lambda d: d.update(simulate={"seed": "one"}), "integer"),
        (lambda d: d.pop("agents"), "missing required key 'agents'"),
    ],
)
def test_invalid_documents(mutate, message):
    doc = _doc()
    mutate(doc)
    with pytest.raises(ScenarioError, match=message):
        parse_scenario(json.dumps(doc))


def test_missing_file():
    with pytest.raises(ScenarioError, match="cannot read"):
        load_scenario(SCENARIOS / "nope.json")
