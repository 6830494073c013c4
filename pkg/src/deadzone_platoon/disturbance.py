"""Bounded measurement disturbances ``w_ji(t)`` on directed sensing edges.

Every signal is a pure function of ``(spec, t)``; ``sample`` accepts scalars
or numpy arrays of times. Keys of an edge map are ordered pairs ``(j, i)``,
meaning "agent ``i`` measuring agent ``j``".
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Mapping

import numpy as np

from .graph import SensingGraph

ADDITIVE = "additive"
SYMMETRIC = "symmetric"


@dataclass(frozen=True)
class Zero:
    kind = "zero"

    def sample(self, t):
        return _shape_like(t, 0.0)

    def bound(self) -> float:
        return 0.0

    def params(self) -> dict:
        return {}


@dataclass(frozen=True)
class Constant:
    value: float
    kind = "constant"

    def sample(self, t):
        return _shape_like(t, float(self.value))

    def bound(self) -> float:
        return abs(float(self.value))

    def params(self) -> dict:
        return {"value": self.value}


@dataclass(frozen=True)
class Pulse:
    """Periodic two-level pulse.

    With ``levels="additive"`` the signal is ``bias + magnitude`` while the pulse
    is on and ``bias`` otherwise. With ``levels="symmetric"`` it is
    ``bias + magnitude`` on and ``bias - magnitude`` off (a square wave about the
    bias). The pulse is on when ``(t - phase_delay) mod period`` lies in
    ``[0, pulse_width)``; before ``phase_delay`` the periodic pattern is simply
    extended backwards. If ``clip`` is set, values are clamped to
    ``[-clip, clip]``.
    """

    magnitude: float
    bias: float
    period: float
    pulse_width: float
    phase_delay: float = 0.0
    levels: str = ADDITIVE
    clip: float | None = None
    kind = "pulse"

    def __post_init__(self):
        if not self.period > 0 or not self.pulse_width > 0:
            raise ValueError("pulse period and width must be positive")
        if self.pulse_width > self.period:
            raise ValueError("pulse width cannot exceed the period")
        if self.phase_delay < 0:
            raise ValueError("phase delay must be nonnegative")
        if self.levels not in (ADDITIVE, SYMMETRIC):
            raise ValueError(f"unknown pulse levels {self.levels!r}")
        if self.clip is not None and not self.clip >= 0:
            raise ValueError("clip bound must be nonnegative")

    def _levels(self) -> tuple[float, float]:
        on = self.bias + self.magnitude
        off = self.bias - self.magnitude if self.levels == SYMMETRIC else self.bias
        if self.clip is not None:
            on, off = (min(max(v, -self.clip), self.clip) for v in (on, off))
        return on, off

    def sample(self, t):
        on, off = self._levels()
        phase = np.mod(np.asarray(t, dtype=float) - self.phase_delay, self.period)
        out = np.where(phase < self.pulse_width, on, off)
        return out if out.ndim else float(out)

    def bound(self) -> float:
        on, off = self._levels()
        if self.pulse_width == self.period:
            return abs(on)
        return max(abs(on), abs(off))

    def params(self) -> dict:
        d = {
            "magnitude": self.magnitude,
            "bias": self.bias,
            "period": self.period,
            "pulse_width": self.pulse_width,
            "phase_delay": self.phase_delay,
        }
        if self.levels != ADDITIVE:
            d["levels"] = self.levels
        if self.clip is not None:
            d["clip"] = self.clip
        return d


@lru_cache(maxsize=64)
def _held_draws(seed: int, count: int) -> np.ndarray:
    # numpy generates uniforms sequentially, so longer draws extend shorter ones
    draws = np.random.default_rng(seed).uniform(-1.0, 1.0, size=count)
    draws.setflags(write=False)
    return draws


@dataclass(frozen=True)
class UniformRandom:
    """Piecewise-constant noise: a fresh ``U(-amplitude, amplitude)`` value every ``hold_time`` seconds."""

    amplitude: float
    seed: int
    hold_time: float
    kind = "uniform_random"

    def __post_init__(self):
        if self.amplitude < 0:
            raise ValueError("amplitude must be nonnegative")
        if not self.hold_time > 0:
            raise ValueError("hold time must be positive")

    def sample(self, t):
        idx = np.floor(np.asarray(t, dtype=float) / self.hold_time).astype(np.int64)
        if np.any(idx < 0):
            raise ValueError("disturbances are defined for t >= 0")
        top = int(np.max(idx, initial=0)) + 1
        count = 1 << max(top - 1, 1).bit_length()
        out = self.amplitude * _held_draws(int(self.seed), count)[idx]
        return out if out.ndim else float(out)

    def bound(self) -> float:
        return float(self.amplitude)

    def params(self) -> dict:
        return {"amplitude": self.amplitude, "seed": self.seed, "hold_time": self.hold_time}


DisturbanceSpec = Zero | Constant | Pulse | UniformRandom
KINDS = {cls.kind: cls for cls in (Zero, Constant, Pulse, UniformRandom)}


def _shape_like(t, value: float):
    t = np.asarray(t, dtype=float)
    return np.full(t.shape, value) if t.ndim else value


def sample(spec: DisturbanceSpec, t):
    return spec.sample(t)


def max_abs_bound(spec: DisturbanceSpec) -> float:
    """Exact supremum of ``|w(t)|`` over ``t >= 0``."""
    return spec.bound()


def from_dict(d: Mapping) -> DisturbanceSpec:
    d = dict(d)
    kind = d.pop("kind")
    if kind not in KINDS:
        raise ValueError(f"unknown disturbance kind {kind!r}; expected one of {sorted(KINDS)}")
    return KINDS[kind](**d)


def to_dict(spec: DisturbanceSpec) -> dict:
    return {"kind": spec.kind, **spec.params()}


class EdgeDisturbanceMap(Mapping):
    """Disturbance spec for every directed edge of a graph; unspecified edges are :class:`Zero`."""

    def __init__(self, graph: SensingGraph, entries: Mapping[tuple[int, int], DisturbanceSpec] | None = None):
        self.graph = graph
        keys = graph.directed_edges()
        valid = set(keys)
        self._specs: dict[tuple[int, int], DisturbanceSpec] = {k: Zero() for k in keys}
        for (j, i), spec in (entries or {}).items():
            if (j, i) not in valid:
                raise ValueError(f"disturbance given for ({j}, {i}), which is not a sensing edge")
            self._specs[(j, i)] = spec

    def __getitem__(self, key):
        return self._specs[tuple(key)]

    def __iter__(self):
        return iter(self._specs)

    def __len__(self):
        return len(self._specs)

    def __eq__(self, other):
        if not isinstance(other, EdgeDisturbanceMap):
            return NotImplemented
        return self.graph == other.graph and self._specs == other._specs

    def __repr__(self):
        nonzero = {k: v for k, v in self._specs.items() if not isinstance(v, Zero)}
        return f"EdgeDisturbanceMap({nonzero})"

    def sample_matrix(self, times, order: list[tuple[int, int]]) -> np.ndarray:
        """Samples with shape ``(len(times), len(order))``."""
        times = np.asarray(times, dtype=float)
        out = np.empty((times.size, len(order)))
        for col, key in enumerate(order):
            out[:, col] = self._specs[key].sample(times)
        return out

    def exceedances(self, w_bar: float) -> list[tuple[tuple[int, int], float]]:
        """Edges whose exact bound exceeds ``w_bar``."""
        return [(k, s.bound()) for k, s in self._specs.items() if s.bound() > w_bar + 1e-12]


def benchmark_disturbances(
    graph: SensingGraph | None = None, levels: str = SYMMETRIC, clip: float | None = 0.1
) -> EdgeDisturbanceMap:
    """Pulse disturbances of the six-agent chain experiment.

    ``w_21 = w_56 = 0``; ``w_12, w_23, w_34, w_45`` pulse with magnitude 0.1 and
    bias -0.09; ``w_43, w_54, w_65`` pulse with magnitude 0.1 and bias 0.01;
    ``w_32`` is ``w_43`` delayed by one second. All pulses have period 2 s and
    width 1 s.

    How the published "magnitude" and "bias" combine is not pinned down. The
    default here is a square wave ``bias +/- magnitude`` clamped to the
    disturbance bound 0.1; it keeps every signal within the bound and reproduces
    both the sustained oscillation of the per-edge law and the convergence of
    the per-node law. ``levels="additive", clip=None`` gives the literal
    ``bias`` / ``bias + magnitude`` reading instead.
    """
    from .graph import chain_graph

    graph = graph or chain_graph(6)
    if graph != chain_graph(6):
        raise ValueError("the published disturbances are defined on the 6-agent chain")

    def pulse(bias, delay=0.0):
        return Pulse(0.1, bias, 2.0, 1.0, delay, levels=levels, clip=clip)

    entries: dict[tuple[int, int], DisturbanceSpec] = {(2, 1): Zero(), (5, 6): Zero()}
    for key in [(1, 2), (2, 3), (3, 4), (4, 5)]:
        entries[key] = pulse(-0.09)
    for key in [(4, 3), (5, 4), (6, 5)]:
        entries[key] = pulse(0.01)
    entries[(3, 2)] = pulse(0.01, delay=1.0)
    return EdgeDisturbanceMap(graph, entries)
