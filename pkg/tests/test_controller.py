import numpy as np
import pytest

from deadzone_platoon.controller import (
    EDGE_DEADZONE,
    NODE_DEADZONE,
    PROPORTIONAL,
    ClosedLoop,
    ControllerSpec,
    Measurement,
    agent_control,
    edge_deadzone_control,
    measure_all,
    node_deadzone_control,
    proportional_control,
)
from deadzone_platoon.deadzone import HARD, RAMP, ThresholdSpec
from deadzone_platoon.disturbance import Constant, EdgeDisturbanceMap
from deadzone_platoon.graph import DesiredOffsets, chain_graph, laplacian, solve_reference_positions

TWO = chain_graph(2)
D_TWO = DesiredOffsets(TWO, {(2, 1): 1.0})


def hard(kind, gain, w_bar):
    return ControllerSpec(kind, gain, w_bar, ThresholdSpec(HARD, w_bar))


def one_measurement(value):
    return [Measurement(1, 2, value)]


def test_measure_all_without_disturbance():
    meas = {(m.target, m.observer): m.value for m in measure_all([0, 1], TWO, EdgeDisturbanceMap(TWO), 0.0)}
    assert meas == {(2, 1): 1.0, (1, 2): -1.0}


def test_measure_all_with_disturbance():
    dist = EdgeDisturbanceMap(TWO, {(2, 1): Constant(0.01)})
    meas = {(m.target, m.observer): m.value for m in measure_all([0, 1], TWO, dist, 0.0)}
    assert meas[(2, 1)] == pytest.approx(1.01)
    assert meas[(1, 2)] == pytest.approx(-1.0)


class TestNodeDeadzone:
    def test_inside_deadzone(self):
        assert node_deadzone_control(1, one_measurement(1.05), D_TWO, hard(NODE_DEADZONE, 3, 0.1), TWO) == 0.0

    def test_outside_deadzone(self):
        u = node_deadzone_control(1, one_measurement(1.25), D_TWO, hard(NODE_DEADZONE, 3, 0.1), TWO)
        assert u == pytest.approx(0.75)

    def test_at_reference_is_still(self):
        g = chain_graph(5)
        D = DesiredOffsets.uniform_spacing(g, 1.0)
        p = solve_reference_positions(g, D)
        meas = measure_all(p, g, EdgeDisturbanceMap(g), 0.0)
        spec = ControllerSpec(NODE_DEADZONE, 3, 0.1, ThresholdSpec(RAMP, 0.1, 0.02))
        assert all(node_deadzone_control(i, meas, D, spec, g) == 0.0 for i in range(1, 6))

    def test_width_scales_with_degree(self):
        g = chain_graph(3)
        D = DesiredOffsets.uniform_spacing(g, 1.0)
        # agent 2 sees errors 0.15 and 0.0: aggregate 0.15 <= 2 * 0.1
        meas = [Measurement(2, 3, 1.15), Measurement(2, 1, -1.0)]
        assert node_deadzone_control(2, meas, D, hard(NODE_DEADZONE, 1, 0.1), g) == 0.0


class TestEdgeDeadzone:
    def test_inside(self):
        assert edge_deadzone_control(1, one_measurement(1.05), D_TWO, hard(EDGE_DEADZONE, 3, 0.1)) == 0.0

    def test_interior_sum(self):
        g = chain_graph(3)
        D = DesiredOffsets.uniform_spacing(g, 1.0)
        meas = [Measurement(2, 3, 1.15), Measurement(2, 1, -1.0 + 0.15)]
        assert edge_deadzone_control(2, meas, D, hard(EDGE_DEADZONE, 1, 0.1), g) == pytest.approx(0.30)

    def test_zero_errors(self):
        assert edge_deadzone_control(1, one_measurement(1.0), D_TWO, hard(EDGE_DEADZONE, 3, 0.1)) == 0.0


class TestProportional:
    def test_two_agent_drift_rate(self):
        dist = EdgeDisturbanceMap(TWO, {(2, 1): Constant(0.01)})
        spec = ControllerSpec(PROPORTIONAL, 1.7)
        rng = np.random.default_rng(0)
        for _ in range(20):
            meas = measure_all(rng.normal(size=2), TWO, dist, 0.0)
            total = sum(proportional_control(i, meas, D_TWO, spec) for i in (1, 2))
            assert total == pytest.approx(0.01 * 1.7, abs=1e-12)

    def test_at_reference(self):
        assert proportional_control(1, one_measurement(1.0), D_TWO, ControllerSpec(PROPORTIONAL, 1.0)) == 0.0

    def test_gain(self):
        assert proportional_control(1, one_measurement(1.5), D_TWO, ControllerSpec(PROPORTIONAL, 2.0)) == 1.0


def test_spec_validation():
    with pytest.raises(ValueError):
        ControllerSpec("pid", 1.0)
    with pytest.raises(ValueError):
        ControllerSpec(NODE_DEADZONE, 0.0)
    with pytest.raises(ValueError):
        ControllerSpec(NODE_DEADZONE, 1.0, -0.1)


@pytest.mark.parametrize("kind", [NODE_DEADZONE, EDGE_DEADZONE, PROPORTIONAL])
def test_closed_loop_matches_per_agent(kind):
    g = chain_graph(6)
    D = DesiredOffsets.uniform_spacing(g, 1.0)
    spec = ControllerSpec(kind, 3.0, 0.1, ThresholdSpec(RAMP, 0.1, 0.02))
    loop = ClosedLoop(g, D, spec)
    rng = np.random.default_rng(1)
    for _ in range(25):
        x = np.arange(6) + rng.normal(scale=0.3, size=6)
        w = rng.uniform(-0.1, 0.1, len(loop.edge_order))
        dist = EdgeDisturbanceMap(g, {e: Constant(float(v)) for e, v in zip(loop.edge_order, w)})
        meas = measure_all(x, g, dist, 0.0)
        expected = [agent_control(i, meas, D, spec, g) for i in range(1, 7)]
        np.testing.assert_allclose(loop.control(x, w), expected, atol=1e-12)


def test_change_of_variables_identity():
    g = chain_graph(5)
    D = DesiredOffsets.uniform_spacing(g, 1.3)
    p = solve_reference_positions(g, D)
    L = laplacian(g)
    spec = hard(NODE_DEADZONE, 2.0, 0.1)
    loop = ClosedLoop(g, D, spec)
    rng = np.random.default_rng(2)
    for _ in range(50):
        y = rng.normal(scale=0.5, size=5)
        w = rng.uniform(-0.1, 0.1, len(loop.edge_order))
        w_i = loop.aggregate_disturbance(w)
        expected = -spec.gain * np.where(np.abs(L @ y - w_i) > loop.node_width, L @ y - w_i, 0.0)
        np.testing.assert_allclose(loop.control(p + y, w), expected, atol=1e-12)
