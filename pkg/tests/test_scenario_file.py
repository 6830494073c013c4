import copy

import pytest
import yaml

from deadzone_platoon.controller import EDGE_DEADZONE, NODE_DEADZONE, PROPORTIONAL
from deadzone_platoon.disturbance import UniformRandom
from deadzone_platoon.scenario_file import (
    PRESETS,
    dumps,
    input_hash,
    load,
    loads,
    preset,
    scenario_from_dict,
    scenario_to_dict,
)
from deadzone_platoon.simulate import ScenarioError

TRIANGLE = {
    "graph": {"type": "edges", "n": 3, "edges": [[1, 2], [2, 3], [1, 3]]},
    "offsets": [[2, 1, 1.0], [3, 2, 1.0], [3, 1, 2.0]],
    "initial": {"x0": [0.0, 0.8, 2.3]},
    "disturbances": [{"edge": [2, 1], "kind": "constant", "value": 0.02}],
    "controller": {"kind": "node-deadzone", "gain": 1.0, "w_bar": 0.05, "threshold": {"kind": "hard"}},
    "integration": {"dt": 0.001, "horizon": 10.0},
    "detection": {"window": 5.0, "tol": 0.001},
}


@pytest.mark.parametrize("name", sorted(PRESETS))
def test_preset_round_trip(name):
    s = preset(name)
    assert loads(dumps(s)) == s


def test_preset_controllers():
    assert preset("fig2").controller.kind == NODE_DEADZONE
    assert preset("fig1").controller.kind == EDGE_DEADZONE
    drift = preset("two-agent-drift")
    assert drift.controller.kind == PROPORTIONAL
    assert drift.offsets[(2, 1)] == 1.0


def test_unknown_preset():
    with pytest.raises(KeyError):
        preset("fig3")


def test_explicit_edges(tmp_path):
    path = tmp_path / "tri.yaml"
    path.write_text(yaml.safe_dump(TRIANGLE))
    s = load(path)
    assert s.graph.n == 3 and len(s.graph.edges) == 3
    assert s.disturbances[(2, 1)].value == 0.02
    assert scenario_from_dict(scenario_to_dict(s)) == s


def test_hash_is_stable_and_sensitive():
    a = scenario_from_dict(TRIANGLE)
    assert input_hash(a) == input_hash(scenario_from_dict(copy.deepcopy(TRIANGLE)))
    doc = copy.deepcopy(TRIANGLE)
    doc["controller"]["gain"] = 2.0
    assert input_hash(a) != input_hash(scenario_from_dict(doc))


def test_seed_derivation():
    doc = copy.deepcopy(TRIANGLE)
    doc["seed"] = 11
    doc["disturbances"] = [{"edge": [2, 1], "kind": "uniform_random", "amplitude": 0.05, "hold_time": 0.5}]
    s = scenario_from_dict(doc)
    spec = s.disturbances[(2, 1)]
    assert isinstance(spec, UniformRandom)
    assert spec == scenario_from_dict(copy.deepcopy(doc)).disturbances[(2, 1)]
    doc["seed"] = 12
    assert scenario_from_dict(doc).disturbances[(2, 1)].seed != spec.seed


def mutate(path, value):
    doc = copy.deepcopy(TRIANGLE)
    *head, last = path
    target = doc
    for k in head:
        target = target[k]
    if value is KeyError:
        del target[last]
    else:
        target[last] = value
    return doc


@pytest.mark.parametrize(
    "path,value,field",
    [
        (("graph", "type"), "ring", "graph.type"),
        (("graph", "n"), "three", "graph.n"),
        (("offsets",), {"a": 1}, "offsets"),
        (("offsets", 2), [3, 1, 3.0], "offsets"),
        (("initial", "x0"), [0.0, 1.0], "x0"),
        (("controller", "kind"), "pid", "controller"),
        (("controller", "gain"), KeyError, "controller.gain"),
        (("controller", "threshold"), {"kind": "ramp", "w": 0.2, "delta_w": 0.01}, "controller.threshold.w"),
        (("integration", "dt"), -1.0, "dt"),
        (("integration",), KeyError, "integration"),
        (("disturbances", 0, "edge"), [1, 1], "disturbances"),
        (("disturbances", 0, "kind"), "gaussian", "disturbances[0]"),
        (("telemetry",), {}, "telemetry"),
    ],
)
def test_field_level_errors(path, value, field):
    with pytest.raises(ScenarioError) as info:
        scenario_from_dict(mutate(path, value))
    assert field in str(info.value)


def test_unseeded_random_needs_seed():
    doc = copy.deepcopy(TRIANGLE)
    doc["disturbances"] = [{"edge": [2, 1], "kind": "uniform_random", "amplitude": 0.05, "hold_time": 0.5}]
    with pytest.raises(ScenarioError, match="seed"):
        scenario_from_dict(doc)


def test_yaml_syntax_error_has_location():
    with pytest.raises(ScenarioError, match=r"line \d+, column \d+"):
        loads("graph: {type: chain, n: 2}\noffsets: [[2, 1, 1.0]\n")


def test_weighted_graph_rejected():
    doc = copy.deepcopy(TRIANGLE)
    doc["graph"]["weights"] = [1.0, 2.0, 1.0]
    with pytest.raises(ScenarioError):
        scenario_from_dict(doc)
