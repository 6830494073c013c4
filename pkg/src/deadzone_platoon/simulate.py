"""Closed-loop integration, trajectory recording and convergence detection.

The closed loop has a right-hand side that is discontinuous in the state
(deadzones) and in time (pulse disturbances), so integration is plain
fixed-step forward Euler: ``x[k+1] = x[k] + dt * u(t_k, x[k])`` with
disturbances sampled at the left end of each step.
"""

from __future__ import annotations

import csv
import io
import logging
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np

from .controller import ClosedLoop, ControllerSpec
from .disturbance import EdgeDisturbanceMap
from .graph import (
    DesiredOffsets,
    SensingGraph,
    is_connected,
    laplacian,
    solve_reference_positions,
)

log = logging.getLogger(__name__)

CONVERGED = "converged"
OSCILLATING = "oscillating"
UNDECIDED = "undecided"

DEFAULT_DT = 1e-3
DEFAULT_WINDOW = 20.0
DEFAULT_TOL = 1e-3
MIN_CROSSINGS = 4


class ScenarioError(ValueError):
    """A scenario is inconsistent; ``field`` names the offending entry."""

    def __init__(self, field: str, message: str):
        self.field = field
        super().__init__(f"{field}: {message}")


class DivergedError(RuntimeError):
    def __init__(self, step: int, time: float):
        self.step = step
        self.time = time
        super().__init__(f"state became non-finite at step {step} (t={time:g} s)")


@dataclass(frozen=True)
class Detection:
    window: float = DEFAULT_WINDOW
    tol: float = DEFAULT_TOL


@dataclass(frozen=True, eq=False)
class Scenario:
    graph: SensingGraph
    offsets: DesiredOffsets
    x0: tuple[float, ...]
    disturbances: EdgeDisturbanceMap
    controller: ControllerSpec
    dt: float = DEFAULT_DT
    horizon: float = 30.0
    detection: Detection = field(default_factory=Detection)
    seed: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "x0", tuple(float(v) for v in self.x0))
        if len(self.x0) != self.graph.n:
            raise ScenarioError("initial.x0", f"expected {self.graph.n} positions, got {len(self.x0)}")
        if not self.dt > 0:
            raise ScenarioError("integration.dt", "must be positive")
        if not self.detection.window > 0:
            raise ScenarioError("detection.window", "must be positive")
        if not self.detection.tol >= 0:
            raise ScenarioError("detection.tol", "must be nonnegative")
        if not self.horizon >= self.detection.window:
            raise ScenarioError("integration.horizon", "must be at least the detection window")
        if self.offsets.graph != self.graph:
            raise ScenarioError("offsets", "defined on a different graph")
        if self.disturbances.graph != self.graph:
            raise ScenarioError("disturbances", "defined on a different graph")
        if not self.graph.is_unweighted:
            raise ScenarioError("graph.weights", "the control laws are defined on unweighted sensing graphs")
        if not is_connected(self.graph):
            raise ScenarioError("graph", "sensing graph must be connected")
        # raises NotRealizableError early
        _ = self.reference_positions

    def __eq__(self, other):
        if not isinstance(other, Scenario):
            return NotImplemented
        return all(
            getattr(self, f) == getattr(other, f)
            for f in ("graph", "offsets", "x0", "disturbances", "controller", "dt", "horizon", "detection", "seed")
        )

    @cached_property
    def reference_positions(self) -> np.ndarray:
        return solve_reference_positions(self.graph, self.offsets)

    @cached_property
    def laplacian(self) -> np.ndarray:
        return laplacian(self.graph)

    @property
    def steps(self) -> int:
        return int(round(self.horizon / self.dt))

    def bound_warnings(self) -> list[str]:
        """Disturbances whose exact bound exceeds the declared ``w_bar``."""
        w_bar = self.controller.w_bar
        return [
            f"disturbance w_{j}{i} reaches {b:.6g} > w_bar={w_bar:g}"
            for (j, i), b in self.disturbances.exceedances(w_bar)
        ]

    def with_overrides(self, dt: float | None = None, horizon: float | None = None) -> "Scenario":
        return Scenario(
            self.graph, self.offsets, self.x0, self.disturbances, self.controller,
            dt if dt is not None else self.dt,
            horizon if horizon is not None else self.horizon,
            self.detection, self.seed,
        )


@dataclass(eq=False)
class Trajectory:
    """Sampled trajectory. ``controls`` are the velocities applied at each sample."""

    times: np.ndarray
    states: np.ndarray
    controls: np.ndarray | None = None
    energy: np.ndarray | None = None

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.states = np.atleast_2d(np.asarray(self.states, dtype=float))
        m = self.times.shape[0]
        if self.states.shape[0] != m:
            raise ValueError("times and states differ in length")
        if self.controls is not None:
            self.controls = np.asarray(self.controls, dtype=float)
            if self.controls.shape != self.states.shape:
                raise ValueError("controls must match states in shape")
        if self.energy is not None:
            self.energy = np.asarray(self.energy, dtype=float)
            if self.energy.shape != (m,):
                raise ValueError("one energy value per sample required")

    @property
    def n(self) -> int:
        return self.states.shape[1]

    @property
    def duration(self) -> float:
        return float(self.times[-1] - self.times[0])

    def velocities(self) -> tuple[np.ndarray, bool]:
        """Velocities at the first ``m - 1`` samples and whether they were recorded.

        Falls back to forward differences when no controls were recorded.
        """
        if self.controls is not None:
            return self.controls[:-1], True
        if len(self.times) < 2:
            raise ValueError("need at least two samples")
        return np.diff(self.states, axis=0) / np.diff(self.times)[:, None], False

    def shifted(self, offset) -> "Trajectory":
        return Trajectory(self.times, self.states - np.asarray(offset, dtype=float), self.controls, self.energy)

    def to_csv(self, path=None) -> str:
        """Write the standard CSV (``t,x_1..x_n,u_1..u_n,V``), 9 significant digits."""
        n = self.n
        header = ["t"] + [f"x_{i}" for i in range(1, n + 1)]
        cols = [self.times[:, None], self.states]
        if self.controls is not None:
            header += [f"u_{i}" for i in range(1, n + 1)]
            cols.append(self.controls)
        if self.energy is not None:
            header.append("V")
            cols.append(self.energy[:, None])
        data = np.hstack(cols)
        buf = io.StringIO()
        buf.write(",".join(header) + "\n")
        for row in data:
            buf.write(",".join(f"{v:.9g}" for v in row) + "\n")
        text = buf.getvalue()
        if path is not None:
            Path(path).write_text(text)
        return text

    @classmethod
    def from_csv(cls, path) -> "Trajectory":
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            try:
                header = next(reader)
            except StopIteration:
                raise ValueError(f"{path}: empty file") from None
            rows = [r for r in reader if r]
        header = [h.strip() for h in header]
        if not header or header[0] != "t":
            raise ValueError(f"{path}: first column must be 't'")
        xs = [k for k, h in enumerate(header) if h.startswith("x_")]
        us = [k for k, h in enumerate(header) if h.startswith("u_")]
        if not xs:
            raise ValueError(f"{path}: no x_i columns")
        if us and len(us) != len(xs):
            raise ValueError(f"{path}: {len(xs)} state columns but {len(us)} control columns")
        for cols, prefix in ((xs, "x_"), (us, "u_")):
            if [header[k] for k in cols] != [f"{prefix}{i}" for i in range(1, len(cols) + 1)]:
                raise ValueError(f"{path}: {prefix}i columns must be numbered 1..n in order")
        try:
            data = np.array([[float(v) for v in r] for r in rows])
        except ValueError as exc:
            raise ValueError(f"{path}: {exc}") from None
        if data.ndim != 2 or data.shape[1] != len(header):
            raise ValueError(f"{path}: ragged rows")
        energy = data[:, header.index("V")] if "V" in header else None
        return cls(data[:, 0], data[:, xs], data[:, us] if us else None, energy)


@dataclass(frozen=True)
class ConvergenceVerdict:
    status: str
    x_star: np.ndarray | None
    tail_variation: float
    oscillation_amplitude: float = 0.0
    crossings: int = 0


def integrate(s: Scenario) -> Trajectory:
    """Forward-Euler integration of the closed loop over ``[0, horizon]``."""
    loop = ClosedLoop(s.graph, s.offsets, s.controller)
    N = s.steps
    times = np.arange(N + 1) * s.dt
    W = s.disturbances.sample_matrix(times, loop.edge_order)
    n = s.graph.n
    p = s.reference_positions
    # integrate the shifted state y = x - p; see ClosedLoop.disagreement_control
    ys = np.empty((N + 1, n))
    controls = np.empty((N + 1, n))
    y = np.asarray(s.x0, dtype=float) - p
    dt = s.dt
    # overflow is reported as DivergedError, not as a numpy warning
    with np.errstate(over="ignore", invalid="ignore"):
        for k in range(N + 1):
            u = loop.disagreement_control(y, W[k])
            ys[k] = y
            controls[k] = u
            if k < N:
                y = y + dt * u
                if not np.all(np.isfinite(y)):
                    raise DivergedError(k + 1, float(times[k + 1]))
    states = ys + p
    states[0] = s.x0
    energy = 0.5 * np.einsum("ki,ij,kj->k", ys, s.laplacian, ys)
    return Trajectory(times, states, controls, energy)


def _mean_crossings(sig: np.ndarray, mean: float) -> int:
    signs = np.sign(sig - mean)
    signs = signs[signs != 0]
    return int(np.count_nonzero(signs[1:] != signs[:-1]))


def _persistent_crossings(sig: np.ndarray) -> tuple[int, int]:
    """Total crossings of the window mean and the smaller count of the two half-windows."""
    m = float(sig.mean())
    half = len(sig) // 2
    return _mean_crossings(sig, m), min(_mean_crossings(sig[:half], m), _mean_crossings(sig[half:], m))


def detect(traj: Trajectory, window: float = DEFAULT_WINDOW, tol: float = DEFAULT_TOL) -> ConvergenceVerdict:
    """Classify the last ``window`` seconds of ``traj``.

    ``converged`` if every coordinate varies by at most ``tol`` over the window.
    Otherwise ``oscillating`` if some coordinate crosses its window mean at least
    four times, with two or more crossings in each half of the window, either as is or relative to the
    agents' mean position (so that an oscillating formation riding on a common
    drift still counts), and ``undecided`` if not. Requiring crossings in both
    halves keeps a short burst of back-and-forth moves inside a slow creep
    from passing as an oscillation.
    """
    if window > traj.duration + 1e-12:
        raise ValueError(f"window {window} s longer than trajectory ({traj.duration} s)")
    t_end = traj.times[-1]
    tail = traj.states[traj.times >= t_end - window - 1e-9 * max(1.0, abs(t_end))]
    spread = np.ptp(tail, axis=0)
    tail_var = float(spread.max())
    if tail_var <= tol:
        return ConvergenceVerdict(CONVERGED, traj.states[-1].copy(), tail_var)
    best_cross, amplitude, oscillating = 0, 0.0, False
    signals = [tail]
    if tail.shape[1] > 1:
        signals.append(tail - tail.mean(axis=1, keepdims=True))
    for sig in signals:
        for i in range(sig.shape[1]):
            total, per_half = _persistent_crossings(sig[:, i])
            if total >= MIN_CROSSINGS and per_half >= MIN_CROSSINGS // 2:
                oscillating = True
                amplitude = max(amplitude, float(np.ptp(sig[:, i])) / 2)
            best_cross = max(best_cross, total)
    if oscillating:
        return ConvergenceVerdict(OSCILLATING, None, tail_var, amplitude, best_cross)
    return ConvergenceVerdict(UNDECIDED, None, tail_var, 0.0, best_cross)


@dataclass
class SimulationResult:
    scenario: Scenario
    trajectory: Trajectory
    verdict: ConvergenceVerdict
    report: "CertificationReport"
    warnings: list[str] = field(default_factory=list)

    def summary_lines(self, input_hash: str | None = None) -> list[str]:
        v = self.verdict
        lines = []
        if input_hash:
            lines.append(f"input_hash={input_hash}")
        lines += [
            f"controller={self.scenario.controller.kind}",
            f"n={self.scenario.graph.n}",
            f"dt={self.scenario.dt:.9g}",
            f"horizon={self.scenario.horizon:.9g}",
            f"verdict={v.status}",
            f"tail_variation={v.tail_variation:.9g}",
            f"oscillation_amplitude={v.oscillation_amplitude:.9g}",
        ]
        if v.x_star is not None:
            lines.append("x_star=" + ",".join(f"{c:.9g}" for c in v.x_star))
        lines += self.report.summary_lines()
        lines.append(f"warnings={len(self.warnings)}")
        lines += [f"warning.{k}={w}" for k, w in enumerate(self.warnings)]
        return lines


def run(s: Scenario) -> SimulationResult:
    """Integrate, detect, then certify."""
    from .certify import certify_run

    warnings = s.bound_warnings()
    for w in warnings:
        log.warning(w)
    traj = integrate(s)
    verdict = detect(traj, s.detection.window, s.detection.tol)
    report = certify_run(s, traj, verdict)
    return SimulationResult(s, traj, verdict, report, warnings)
