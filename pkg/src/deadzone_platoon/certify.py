"""Post-hoc checks of convergence guarantees on recorded trajectories.

Each check returns a :class:`CheckResult` whose ``worst_margin`` is the
largest observed value of the quantity that must stay nonpositive (or below
a bound); the check passes iff ``worst_margin <= tolerance``. Tolerances for
path-wise checks absorb the O(dt) overshoot of Euler steps.

Path-wise guarantees (sign condition, monotone energy, monotone extremes,
hull containment) hold for the node-deadzone law when every disturbance
respects the declared bound ``w_bar``. For other laws, or when a disturbance
exceeds ``w_bar``, the checks still run but are flagged as not applicable
and do not affect the overall verdict.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .controller import NODE_DEADZONE
from .graph import DesiredOffsets, SensingGraph, degrees, is_chain, laplacian
from .simulate import CONVERGED, ConvergenceVerdict, Scenario, Trajectory

PATH_TOL = 1e-6
SIGN_TOL = 1e-12

SIGN_CONDITION = "sign-condition"
ENERGY_MONOTONE = "energy-monotone"
MINMAX_MONOTONE = "minmax-monotone"
HULL_CONTAINMENT = "hull-containment"
RESIDUAL_BOUNDS = "residual-bounds"
CHAIN_BOUNDS = "chain-bounds"


class ConvergenceRequired(ValueError):
    """A limit-state check was requested without a converged limit."""


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    worst_margin: float
    tolerance: float
    worst_time: float | None = None
    worst_index: int | None = None
    applicable: bool = True
    note: str = ""

    def summary_lines(self) -> list[str]:
        p = f"check.{self.name}"
        out = [
            f"{p}.pass={'true' if self.passed else 'false'}",
            f"{p}.applicable={'true' if self.applicable else 'false'}",
            f"{p}.worst_margin={self.worst_margin:.9g}",
            f"{p}.tolerance={self.tolerance:.9g}",
        ]
        if self.worst_time is not None:
            out.append(f"{p}.worst_time={self.worst_time:.9g}")
        if self.worst_index is not None:
            out.append(f"{p}.worst_index={self.worst_index}")
        if self.note:
            out.append(f"{p}.note={self.note}")
        return out


@dataclass
class CertificationReport:
    checks: list[CheckResult] = field(default_factory=list)
    skipped: dict[str, str] = field(default_factory=dict)
    notes: list[str] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks if c.applicable)

    def __getitem__(self, name: str) -> CheckResult:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def __contains__(self, name: str) -> bool:
        return any(c.name == name for c in self.checks)

    def summary_lines(self) -> list[str]:
        lines = [f"certification={'pass' if self.passed else 'fail'}"]
        for c in self.checks:
            lines += c.summary_lines()
        for name, why in self.skipped.items():
            lines.append(f"check.{name}.skipped={why}")
        lines += [f"note.{k}={n}" for k, n in enumerate(self.notes)]
        return lines


def _argmax2(a: np.ndarray) -> tuple[float, int, int]:
    k, i = np.unravel_index(int(np.argmax(a)), a.shape)
    return float(a[k, i]), int(k), int(i)


def to_disagreement(traj: Trajectory, p) -> Trajectory:
    """Same trajectory in shifted coordinates ``y = x - p``."""
    p = np.asarray(p, dtype=float)
    if p.shape != (traj.n,):
        raise ValueError(f"reference positions have shape {p.shape}, expected ({traj.n},)")
    return traj.shifted(p)


def check_sign_condition(traj: Trajectory, A, tol: float = SIGN_TOL) -> CheckResult:
    """Largest ``xdot_i * (A x)_i`` over samples and coordinates."""
    A = np.asarray(A, dtype=float)
    if traj.controls is not None:
        states, vel, note = traj.states, traj.controls, ""
    else:
        if len(traj.times) < 2:
            raise ValueError("need at least two samples")
        vel, _ = traj.velocities()
        states, note = traj.states[:-1], "finite-difference velocities"
    prod = vel * (states @ A.T)
    worst, k, i = _argmax2(prod)
    return CheckResult(SIGN_CONDITION, worst <= tol, worst, tol, float(traj.times[k]), i + 1, note=note)


def check_energy_monotone(traj: Trajectory, A, tol: float) -> CheckResult:
    """Largest one-step increase of ``x^T A x / 2``."""
    if len(traj.times) < 2:
        raise ValueError("need at least two samples")
    A = np.asarray(A, dtype=float)
    V = 0.5 * np.einsum("ki,ij,kj->k", traj.states, A, traj.states)
    inc = np.diff(V)
    k = int(np.argmax(inc))
    worst = float(inc[k])
    return CheckResult(ENERGY_MONOTONE, worst <= tol, worst, tol, float(traj.times[k + 1]))


def check_minmax_monotone(traj: Trajectory, tol: float = PATH_TOL) -> CheckResult:
    """The largest coordinate must never increase and the smallest never decrease."""
    if len(traj.times) < 2:
        return CheckResult(MINMAX_MONOTONE, True, 0.0, tol)
    up = np.diff(traj.states.max(axis=1))
    down = -np.diff(traj.states.min(axis=1))
    k_up, k_down = int(np.argmax(up)), int(np.argmax(down))
    if up[k_up] >= down[k_down]:
        worst, k = float(up[k_up]), k_up
        i = int(np.argmax(traj.states[k + 1]))
    else:
        worst, k = float(down[k_down]), k_down
        i = int(np.argmin(traj.states[k + 1]))
    return CheckResult(MINMAX_MONOTONE, worst <= tol, worst, tol, float(traj.times[k + 1]), i + 1)


def check_hull_containment(traj: Trajectory, p, tol: float = PATH_TOL) -> CheckResult:
    """``p_i + min_j(x_j(0) - p_j) <= x_i(t) <= p_i + max_j(x_j(0) - p_j)`` at every sample."""
    p = np.asarray(p, dtype=float)
    y0 = traj.states[0] - p
    lo = p + y0.min()
    hi = p + y0.max()
    excess = np.maximum(lo - traj.states, traj.states - hi)
    worst, k, i = _argmax2(excess)
    return CheckResult(HULL_CONTAINMENT, worst <= tol, worst, tol, float(traj.times[k]), i + 1)


def residuals(x_star, g: SensingGraph, D: DesiredOffsets) -> np.ndarray:
    """``|sum_j (x*_j - x*_i - D_ji)|`` for every agent."""
    x = np.asarray(x_star, dtype=float)
    r = np.zeros(g.n)
    for j, i in g.directed_edges():
        r[i - 1] += x[j - 1] - x[i - 1] - D[(j, i)]
    return np.abs(r)


def check_residual_bounds(x_star, g: SensingGraph, D: DesiredOffsets, w_bar: float, slack: float) -> CheckResult:
    """Limit residual of every agent within ``2 d(i) w_bar``."""
    if x_star is None:
        raise ConvergenceRequired("residual bounds need a converged limit state")
    excess = residuals(x_star, g, D) - 2 * degrees(g) * w_bar
    i = int(np.argmax(excess))
    worst = float(excess[i])
    return CheckResult(RESIDUAL_BOUNDS, worst <= slack, worst, slack, worst_index=i + 1)


def chain_error_bounds(n: int, w_bar: float) -> np.ndarray:
    """Per-edge limit error bound on an n-agent chain, for edges l = 2..n.

    Unrolling the node residual bound from the head of the platoon gives
    ``(4l - 6) w_bar`` for edge ``(l-1, l)``; unrolling from the tail gives
    ``(4(n - l) + 2) w_bar``. The bound is the smaller of the two.
    """
    if n < 2:
        raise ValueError("a chain needs at least 2 agents")
    if w_bar < 0:
        raise ValueError("w_bar must be nonnegative")
    ell = np.arange(2, n + 1)
    return np.minimum(4 * ell - 6, 4 * (n - ell) + 2) * float(w_bar)


def chain_errors(states, D: DesiredOffsets) -> np.ndarray:
    """Spacing errors ``x_l - x_{l-1} - D_{l(l-1)}`` (last axis has length n-1)."""
    states = np.asarray(states, dtype=float)
    n = states.shape[-1]
    target = np.array([D[(l, l - 1)] for l in range(2, n + 1)])
    return np.diff(states, axis=-1) - target


def check_chain_errors(x_star, g: SensingGraph, D: DesiredOffsets, w_bar: float, slack: float) -> CheckResult:
    if not is_chain(g):
        raise ValueError("chain error bounds apply to chain graphs only")
    if x_star is None:
        raise ConvergenceRequired("chain bounds need a converged limit state")
    excess = np.abs(chain_errors(x_star, D)) - chain_error_bounds(g.n, w_bar)
    k = int(np.argmax(excess))
    worst = float(excess[k])
    # worst_index is the trailing agent l of edge (l-1, l)
    return CheckResult(CHAIN_BOUNDS, worst <= slack, worst, slack, worst_index=k + 2)


def energy_tolerance(s: Scenario) -> float:
    """Euler second-order allowance ``10 k^2 n dt^2 ||L|| V(y(0))``."""
    L = laplacian(s.graph)
    y0 = np.asarray(s.x0) - s.reference_positions
    V0 = 0.5 * float(y0 @ L @ y0)
    return 10 * s.controller.gain**2 * s.graph.n * s.dt**2 * float(np.linalg.norm(L, 2)) * V0


def certify_run(s: Scenario, traj: Trajectory, verdict: ConvergenceVerdict) -> CertificationReport:
    """Run every applicable check for a scenario's trajectory."""
    report = CertificationReport()
    p = s.reference_positions
    L = s.laplacian
    y = to_disagreement(traj, p)
    guaranteed = s.controller.kind == NODE_DEADZONE and not s.disturbances.exceedances(s.controller.w_bar)
    if not guaranteed:
        report.notes.append(
            "path-wise guarantees need the node-deadzone law with disturbances within w_bar; "
            "margins are reported for information only"
        )
    if traj.controls is None:
        report.notes.append("no recorded controls; velocities from finite differences")

    def add(check: CheckResult, applicable: bool = True):
        if not applicable:
            check = replace(check, applicable=False)
        report.checks.append(check)

    # on finite-difference velocities the sign products pick up O(dt) noise
    sign_tol = SIGN_TOL if traj.controls is not None else PATH_TOL
    add(check_sign_condition(y, L, sign_tol), guaranteed)
    add(check_energy_monotone(y, L, energy_tolerance(s)), guaranteed)
    add(check_minmax_monotone(y, PATH_TOL), guaranteed)
    add(check_hull_containment(traj, p, PATH_TOL), guaranteed)

    if verdict.status == CONVERGED:
        slack = s.detection.tol
        add(check_residual_bounds(verdict.x_star, s.graph, s.offsets, s.controller.w_bar, slack), guaranteed)
        if is_chain(s.graph):
            add(check_chain_errors(verdict.x_star, s.graph, s.offsets, s.controller.w_bar, slack), guaranteed)
        else:
            report.skipped[CHAIN_BOUNDS] = "not a chain graph"
    else:
        report.skipped[RESIDUAL_BOUNDS] = f"verdict {verdict.status}"
        if is_chain(s.graph):
            report.skipped[CHAIN_BOUNDS] = f"verdict {verdict.status}"
    return report
