"""Decentralized control laws driven by noisy relative measurements.

Agent ``i`` senses ``meas_ji = x_j - x_i + w_ji`` for each neighbour ``j`` and
compares it with the desired offset ``D_ji``. The three laws differ in where
the deadzone sits:

* ``node-deadzone``: ``u_i = k T_{d(i) w_bar}( sum_j (meas_ji - D_ji) )``
* ``edge-deadzone``: ``u_i = k sum_j T_{w_bar}(meas_ji - D_ji)``
* ``proportional``: ``u_i = k sum_j (meas_ji - D_ji)`` (no deadzone; unstable
  under inconsistent measurements, kept for the two-agent drift demo)

The per-agent functions follow the measurement-list form directly;
:class:`ClosedLoop` is the vectorized equivalent used by the integrator.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping

import numpy as np

from . import deadzone
from .deadzone import ThresholdSpec
from .disturbance import EdgeDisturbanceMap
from .graph import DesiredOffsets, SensingGraph, degree, degrees

NODE_DEADZONE = "node-deadzone"
EDGE_DEADZONE = "edge-deadzone"
PROPORTIONAL = "proportional"
KINDS = (NODE_DEADZONE, EDGE_DEADZONE, PROPORTIONAL)


@dataclass(frozen=True)
class Measurement:
    observer: int
    target: int
    value: float


@dataclass(frozen=True)
class ControllerSpec:
    """Control law parameters.

    ``threshold`` only contributes its shape (kind and ``delta_w``); deadzone
    widths always come from ``w_bar``: ``d(i) * w_bar`` per node for the
    node law, ``w_bar`` per edge for the edge law.
    """

    kind: str
    gain: float
    w_bar: float = 0.0
    threshold: ThresholdSpec = field(default_factory=ThresholdSpec)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown controller kind {self.kind!r}; expected one of {KINDS}")
        if not self.gain > 0:
            raise ValueError(f"gain must be positive, got {self.gain}")
        if not self.w_bar >= 0:
            raise ValueError(f"w_bar must be nonnegative, got {self.w_bar}")

    def to_dict(self) -> dict:
        th = {k: v for k, v in self.threshold.to_dict().items() if k != "w"}
        return {"kind": self.kind, "gain": self.gain, "w_bar": self.w_bar, "threshold": th}


def measure_all(x, g: SensingGraph, dist: EdgeDisturbanceMap, t: float) -> list[Measurement]:
    x = np.asarray(x, dtype=float)
    return [
        Measurement(i, j, float(x[j - 1] - x[i - 1] + dist[(j, i)].sample(t)))
        for j, i in g.directed_edges()
    ]


def _edge_errors(i: int, meas: Iterable[Measurement], D: Mapping) -> list[float]:
    return [m.value - D[(m.target, i)] for m in meas if m.observer == i]


def node_deadzone_control(i: int, meas, D: DesiredOffsets, spec: ControllerSpec, g: SensingGraph) -> float:
    total = sum(_edge_errors(i, meas, D))
    width = degree(g, i) * spec.w_bar
    return spec.gain * float(spec.threshold.scaled(width)(total))


def edge_deadzone_control(i: int, meas, D: DesiredOffsets, spec: ControllerSpec, g: SensingGraph | None = None) -> float:
    th = spec.threshold.scaled(spec.w_bar)
    return spec.gain * sum(float(th(e)) for e in _edge_errors(i, meas, D))


def proportional_control(i: int, meas, D: DesiredOffsets, spec: ControllerSpec) -> float:
    return spec.gain * sum(_edge_errors(i, meas, D))


def agent_control(i: int, meas, D: DesiredOffsets, spec: ControllerSpec, g: SensingGraph) -> float:
    if spec.kind == NODE_DEADZONE:
        return node_deadzone_control(i, meas, D, spec, g)
    if spec.kind == EDGE_DEADZONE:
        return edge_deadzone_control(i, meas, D, spec, g)
    return proportional_control(i, meas, D, spec)


class ClosedLoop:
    """Array form of a control law on a fixed graph.

    ``edge_order`` lists the directed edges ``(j, i)`` in the column order
    expected for disturbance samples passed to :meth:`control`.
    """

    def __init__(self, g: SensingGraph, D: DesiredOffsets, spec: ControllerSpec):
        self.graph = g
        self.spec = spec
        self.edge_order = g.directed_edges()
        self.observer = np.array([i - 1 for _, i in self.edge_order], dtype=int)
        self.target = np.array([j - 1 for j, _ in self.edge_order], dtype=int)
        self.offset = np.array([D[e] for e in self.edge_order], dtype=float)
        self.node_width = degrees(g) * spec.w_bar

    def edge_errors(self, x: np.ndarray, w: np.ndarray) -> np.ndarray:
        return x[self.target] - x[self.observer] + w - self.offset

    def control(self, x, w) -> np.ndarray:
        """Velocities of all agents for state ``x`` and edge disturbances ``w``."""
        x = np.asarray(x, dtype=float)
        return self._apply(self.edge_errors(x, np.asarray(w, dtype=float)))

    def disagreement_control(self, y, w) -> np.ndarray:
        """Same law written in shifted coordinates ``y = x - p`` for realizable offsets.

        The edge error becomes ``y_j - y_i + w_ji`` with no large positions to
        cancel, so a disturbance sitting exactly on the deadzone edge stays inside it.
        """
        y = np.asarray(y, dtype=float)
        return self._apply(y[self.target] - y[self.observer] + np.asarray(w, dtype=float))

    def _apply(self, err: np.ndarray) -> np.ndarray:
        n = self.graph.n
        spec = self.spec
        th = spec.threshold
        if spec.kind == NODE_DEADZONE:
            agg = np.bincount(self.observer, weights=err, minlength=n)
            return spec.gain * deadzone.evaluate(th.kind, self.node_width, agg, th.delta_w)
        if spec.kind == EDGE_DEADZONE:
            per_edge = deadzone.evaluate(th.kind, spec.w_bar, err, th.delta_w)
            return spec.gain * np.bincount(self.observer, weights=per_edge, minlength=n)
        return spec.gain * np.bincount(self.observer, weights=err, minlength=n)

    def aggregate_disturbance(self, w) -> np.ndarray:
        """``w_i = sum_j w_ji`` for every agent."""
        return np.bincount(self.observer, weights=np.asarray(w, dtype=float), minlength=self.graph.n)
