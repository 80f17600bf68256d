"""Smoke tests for the _beliefmarket extension module."""

import json
import math
import os

import pytest

import _beliefmarket as bm

FIXTURES = os.environ.get("BM_FIXTURES", os.path.join(os.path.dirname(__file__), "..", "fixtures"))


def coin():
    return bm.SampleSpace(["A", "nA"])


def test_sample_space_and_events():
    space = coin()
    assert len(space) == 2
    assert space.labels == ["A", "nA"]
    assert space.index("nA") == 1
    assert space.index("zz") is None

    event = bm.Event(space, [0])
    assert event.atoms == [0]
    assert event.complement().atoms == [1]

    with pytest.raises(ValueError):
        bm.SampleSpace(["dup", "dup"])


def test_belief_and_probability():
    space = coin()
    belief = bm.JointBelief(space, [0.8, 0.2])
    assert bm.event_probability(belief, bm.Event(space, [0])) == pytest.approx(0.8)

    clamped, warned = bm.JointBelief.clamped(space, [1.0, 0.0])
    assert warned
    assert clamped.mass[1] > 0.0


def test_demand_closed_forms():
    assert bm.demand_single(0.8, 1.0, 0.5) == pytest.approx(math.log(4.0))
    assert bm.demand_single(0.5, 2.0, 0.5) == 0.0

    space = coin()
    agent = bm.CaraAgent(bm.JointBelief(space, [0.8, 0.2]), 1.0)
    sec = bm.SecuritySet([bm.Event(space, [0])], [0.5])
    sol = bm.demand_general(agent, sec)
    assert sol["bundle"][0] == pytest.approx(math.log(4.0), abs=1e-9)
    assert sol["trace"]["converged"]

    assert bm.expected_utility(agent, sec, [0.0]) == -1.0


def test_consistency_and_arbitrage():
    space = coin()
    ev = bm.Event(space, [0])
    good = bm.check_consistency(bm.SecuritySet([ev], [0.4]))
    assert good["consistent"]

    bad = bm.check_consistency(bm.SecuritySet([ev, ev], [0.7, 0.3]))
    assert not bad["consistent"]
    d = bad["direction"]
    assert d[0] / d[1] == pytest.approx(-1.0)

    agent = bm.CaraAgent(bm.JointBelief(space, [0.5, 0.5]), 1.0)
    with pytest.raises(bm.ArbitrageError):
        bm.demand_general(agent, bm.SecuritySet([ev, ev], [0.7, 0.3]))


def test_pooling():
    assert bm.risk_weights([1.0, 2.0]) == pytest.approx([2 / 3, 1 / 3])
    assert bm.logop_unnormalized([0.9, 0.4], [0.5, 0.5]) == pytest.approx(0.6)
    assert bm.logop_normalized([0.9, 0.4], [0.5, 0.5]) == pytest.approx(
        0.7101020514433644
    )
    assert bm.disagreement([0.9, 0.4], [0.5, 0.5]) == pytest.approx(
        0.1550510257216822
    )
    assert bm.equilibrium_single([0.9, 0.4], [1.0, 1.0]) == pytest.approx(
        bm.logop_normalized([0.9, 0.4], [0.5, 0.5])
    )


def test_equilibrium_solver():
    space = coin()
    agents = [
        bm.CaraAgent(bm.JointBelief(space, [0.9, 0.1]), 1.0),
        bm.CaraAgent(bm.JointBelief(space, [0.4, 0.6]), 1.0),
    ]
    result = bm.solve_equilibrium([a for a in agents], [bm.Event(space, [0])])
    assert result["prices"][0] == pytest.approx(0.7101020514433644, abs=1e-6)
    assert abs(sum(d[0] for d in result["demands"])) < 1e-7


def test_run_scenario_roundtrip():
    with open(os.path.join(FIXTURES, "single_security_pair.json")) as f:
        text = f.read()
    out = bm.run_scenario(text)
    machine = json.loads(out["machine"])
    assert machine["task"] == "equilibrium"
    assert machine["results"]["prices"][0] == pytest.approx(0.710102, abs=1e-5)
    assert "clearing prices" in out["human"]

    # Determinism: identical text, identical machine report.
    assert bm.run_scenario(text)["machine"] == out["machine"]

    with pytest.raises(ValueError):
        bm.run_scenario("{bad json")


def test_verify_subset():
    results = bm.verify(seed=11)
    assert results and all(r["passed"] for r in results)
