"""YAML scenario files and the built-in presets.

A scenario file has the sections ``graph``, ``offsets``, ``initial``,
``disturbances``, ``controller``, ``integration``, ``detection`` and an
optional top-level ``seed``; lengths are in meters and times in seconds::

    graph: {type: chain, n: 6}          # or {type: edges, n: 3, edges: [[1, 2], [2, 3]]}
    offsets: [[2, 1, 1.0], ...]          # (j, i, D_ji) once per edge
    initial: {x0: [0.0, 0.5, ...]}
    disturbances:                        # (j, i) = agent i measuring agent j
      - {edge: [1, 2], kind: pulse, magnitude: 0.1, bias: -0.09, period: 2.0, pulse_width: 1.0}
    controller: {kind: node-deadzone, gain: 3.0, w_bar: 0.1, threshold: {kind: ramp, delta_w: 0.02}}
    integration: {dt: 0.001, horizon: 30.0}
    detection: {window: 20.0, tol: 0.001}

Edges missing from ``disturbances`` get zero disturbance. ``uniform_random``
entries without a ``seed`` derive one from the top-level seed and the edge.
"""

from __future__ import annotations

import hashlib
import json
from pathlib import Path
from typing import Any

import numpy as np
import yaml

from . import disturbance as dist
from .controller import EDGE_DEADZONE, NODE_DEADZONE, PROPORTIONAL, ControllerSpec
from .deadzone import HARD, RAMP, ThresholdSpec
from .graph import DesiredOffsets, GraphError, NotRealizableError, SensingGraph, chain_graph, is_chain
from .simulate import Detection, Scenario, ScenarioError

BENCH_X0 = (0.0, 0.5, 1.4, 2.2, 3.1, 4.1)
BENCH_GAIN = 3.0
BENCH_W_BAR = 0.1
BENCH_DELTA_W = 0.02


def _require(d: dict, key: str, where: str):
    if not isinstance(d, dict):
        raise ScenarioError(where, "expected a mapping")
    if key not in d:
        raise ScenarioError(f"{where}.{key}" if where else key, "missing")
    return d[key]


def _number(v, where: str) -> float:
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ScenarioError(where, f"expected a number, got {v!r}")
    return float(v)


def _int(v, where: str) -> int:
    if isinstance(v, bool) or not isinstance(v, int):
        raise ScenarioError(where, f"expected an integer, got {v!r}")
    return v


def derived_seed(seed: int, edge: tuple[int, int]) -> int:
    return int(np.random.SeedSequence([seed, edge[0], edge[1]]).generate_state(1)[0])


def scenario_from_dict(doc: Any) -> Scenario:
    if not isinstance(doc, dict):
        raise ScenarioError("<root>", "scenario must be a mapping")
    known = {"graph", "offsets", "initial", "disturbances", "controller", "integration", "detection", "seed"}
    extra = set(doc) - known
    if extra:
        raise ScenarioError(sorted(extra)[0], "unknown section")

    g = _require(doc, "graph", "")
    gtype = _require(g, "type", "graph")
    n = _int(_require(g, "n", "graph"), "graph.n")
    try:
        if gtype == "chain":
            graph = chain_graph(n)
        elif gtype == "edges":
            raw = _require(g, "edges", "graph")
            if not isinstance(raw, list) or not all(isinstance(e, list) and len(e) == 2 for e in raw):
                raise ScenarioError("graph.edges", "expected a list of [i, j] pairs")
            weights = g.get("weights")
            graph = SensingGraph(n, tuple(tuple(_int(v, "graph.edges") for v in e) for e in raw),
                                 tuple(weights) if weights else ())
        else:
            raise ScenarioError("graph.type", f"expected 'chain' or 'edges', got {gtype!r}")
    except GraphError as exc:
        raise ScenarioError("graph", str(exc)) from None

    raw_off = _require(doc, "offsets", "")
    if not isinstance(raw_off, list):
        raise ScenarioError("offsets", "expected a list of [j, i, D_ji] entries")
    entries = {}
    for k, e in enumerate(raw_off):
        if not isinstance(e, list) or len(e) != 3:
            raise ScenarioError(f"offsets[{k}]", "expected [j, i, D_ji]")
        entries[(_int(e[0], f"offsets[{k}]"), _int(e[1], f"offsets[{k}]"))] = _number(e[2], f"offsets[{k}]")
    try:
        offsets = DesiredOffsets(graph, entries)
    except GraphError as exc:
        raise ScenarioError("offsets", str(exc)) from None

    x0 = _require(_require(doc, "initial", ""), "x0", "initial")
    if not isinstance(x0, list):
        raise ScenarioError("initial.x0", "expected a list of positions")
    x0 = [_number(v, f"initial.x0[{k}]") for k, v in enumerate(x0)]

    seed = doc.get("seed")
    if seed is not None:
        seed = _int(seed, "seed")
    specs = {}
    for k, e in enumerate(doc.get("disturbances") or []):
        where = f"disturbances[{k}]"
        if not isinstance(e, dict):
            raise ScenarioError(where, "expected a mapping")
        e = dict(e)
        edge = e.pop("edge", None)
        if not isinstance(edge, list) or len(edge) != 2:
            raise ScenarioError(f"{where}.edge", "expected [j, i]")
        key = (_int(edge[0], f"{where}.edge"), _int(edge[1], f"{where}.edge"))
        if key in specs:
            raise ScenarioError(f"{where}.edge", f"duplicate entry for {key}")
        if e.get("kind") == "uniform_random" and "seed" not in e:
            if seed is None:
                raise ScenarioError(f"{where}.seed", "uniform_random needs a seed (or a top-level seed)")
            e["seed"] = derived_seed(seed, key)
        try:
            specs[key] = dist.from_dict(e)
        except KeyError:
            raise ScenarioError(f"{where}.kind", "missing") from None
        except (TypeError, ValueError) as exc:
            raise ScenarioError(where, str(exc)) from None
    try:
        disturbances = dist.EdgeDisturbanceMap(graph, specs)
    except ValueError as exc:
        raise ScenarioError("disturbances", str(exc)) from None

    c = _require(doc, "controller", "")
    w_bar = _number(c.get("w_bar", 0.0), "controller.w_bar")
    th = c.get("threshold") or {"kind": HARD}
    if not isinstance(th, dict):
        raise ScenarioError("controller.threshold", "expected a mapping")
    if "w" in th and _number(th["w"], "controller.threshold.w") != w_bar:
        raise ScenarioError("controller.threshold.w", "deadzone widths derive from w_bar; omit w or set it equal")
    try:
        threshold = ThresholdSpec(
            th.get("kind", HARD), w_bar,
            _number(th["delta_w"], "controller.threshold.delta_w") if "delta_w" in th else None,
        )
        controller = ControllerSpec(
            _require(c, "kind", "controller"), _number(_require(c, "gain", "controller"), "controller.gain"),
            w_bar, threshold,
        )
    except ValueError as exc:
        if isinstance(exc, ScenarioError):
            raise
        raise ScenarioError("controller", str(exc)) from None

    integ = _require(doc, "integration", "")
    det = doc.get("detection") or {}
    if not isinstance(det, dict):
        raise ScenarioError("detection", "expected a mapping")
    detection = Detection(
        _number(det.get("window", Detection.window), "detection.window"),
        _number(det.get("tol", Detection.tol), "detection.tol"),
    )
    try:
        return Scenario(
            graph, offsets, x0, disturbances, controller,
            _number(_require(integ, "dt", "integration"), "integration.dt"),
            _number(_require(integ, "horizon", "integration"), "integration.horizon"),
            detection, seed,
        )
    except NotRealizableError as exc:
        raise ScenarioError("offsets", str(exc)) from None


def scenario_to_dict(s: Scenario) -> dict:
    g = s.graph
    graph = {"type": "chain", "n": g.n} if is_chain(g) else {
        "type": "edges", "n": g.n, "edges": [list(e) for e in g.edges]}
    doc = {
        "graph": graph,
        "offsets": [[j, i, D] for j, i, D in s.offsets.canonical()],
        "initial": {"x0": list(s.x0)},
        "disturbances": [
            {"edge": [j, i], **dist.to_dict(spec)}
            for (j, i), spec in s.disturbances.items()
            if not isinstance(spec, dist.Zero)
        ],
        "controller": s.controller.to_dict(),
        "integration": {"dt": s.dt, "horizon": s.horizon},
        "detection": {"window": s.detection.window, "tol": s.detection.tol},
    }
    if s.seed is not None:
        doc["seed"] = s.seed
    return doc


def dumps(s: Scenario) -> str:
    return yaml.safe_dump(scenario_to_dict(s), sort_keys=False, default_flow_style=None)


def loads(text: str) -> Scenario:
    try:
        doc = yaml.safe_load(text)
    except yaml.MarkedYAMLError as exc:
        mark = exc.problem_mark
        where = f"line {mark.line + 1}, column {mark.column + 1}" if mark else "<yaml>"
        raise ScenarioError(where, exc.problem or str(exc)) from None
    except yaml.YAMLError as exc:
        raise ScenarioError("<yaml>", str(exc)) from None
    return scenario_from_dict(doc)


def load(path) -> Scenario:
    return loads(Path(path).read_text())


def input_hash(s: Scenario) -> str:
    canon = json.dumps(scenario_to_dict(s), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode()).hexdigest()


# ---------------------------------------------------------------------------
# presets


def _benchmark_chain(kind: str, horizon: float, levels: str, clip: float | None) -> Scenario:
    graph = chain_graph(6)
    return Scenario(
        graph=graph,
        offsets=DesiredOffsets.uniform_spacing(graph, 1.0),
        x0=BENCH_X0,
        disturbances=dist.benchmark_disturbances(graph, levels=levels, clip=clip),
        controller=ControllerSpec(kind, BENCH_GAIN, BENCH_W_BAR, ThresholdSpec(RAMP, BENCH_W_BAR, BENCH_DELTA_W)),
        dt=1e-3,
        horizon=horizon,
        detection=Detection(20.0, 1e-3),
    )


def two_agent_drift() -> Scenario:
    graph = chain_graph(2)
    return Scenario(
        graph=graph,
        offsets=DesiredOffsets(graph, {(2, 1): 1.0}),
        x0=(0.0, 1.0),
        disturbances=dist.EdgeDisturbanceMap(graph, {(2, 1): dist.Constant(0.01)}),
        controller=ControllerSpec(PROPORTIONAL, 1.0, 0.01, ThresholdSpec(HARD, 0.01)),
        dt=1e-3,
        horizon=10.0,
        detection=Detection(5.0, 1e-3),
    )


PRESETS = {
    "fig1": lambda: _benchmark_chain(EDGE_DEADZONE, 60.0, dist.SYMMETRIC, BENCH_W_BAR),
    "fig2": lambda: _benchmark_chain(NODE_DEADZONE, 30.0, dist.SYMMETRIC, BENCH_W_BAR),
    "two-agent-drift": two_agent_drift,
    # literal bias / bias+magnitude pulses; the second family peaks at 0.11 > w_bar
    "fig1-additive": lambda: _benchmark_chain(EDGE_DEADZONE, 60.0, dist.ADDITIVE, None),
    "fig2-additive": lambda: _benchmark_chain(NODE_DEADZONE, 30.0, dist.ADDITIVE, None),
}


def preset(name: str) -> Scenario:
    try:
        return PRESETS[name]()
    except KeyError:
        raise KeyError(f"unknown preset {name!r}; available: {', '.join(PRESETS)}") from None
