"""Synthetic trajectories obeying the coordinate-wise sign condition.

Given a PSD matrix ``A``, the synthesizer moves each coordinate only against
the corresponding gradient entry: ``xdot_i * (A x)_i <= 0`` holds exactly at
every step. Several policies choose *how much* each coordinate moves, which
lets the search probe whether such trajectories can diverge or accumulate at
several points for matrices outside the classes where convergence is known.

Euler guard: a coordinate only moves while ``|(A x)_i|`` exceeds a deadband of
``rate * dt * max_i A_ii`` (the most a single step can change it), so steps
never jump across the zero of their own gradient entry.
"""

from __future__ import annotations

import logging
from collections import Counter
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from .energy import POSITIVE_DEFINITE, QuadraticEnergy
from .simulate import CONVERGED, Trajectory, detect

log = logging.getLogger(__name__)

GRADIENT_OPPOSED = "gradient-opposed"
RANDOM_FEASIBLE = "random-feasible"
AXIS_SWITCHING = "axis-switching"
STALL = "stall"
POLICIES = (GRADIENT_OPPOSED, RANDOM_FEASIBLE, AXIS_SWITCHING, STALL)

FAMILY_PD = "positive-definite"
FAMILY_ZERO_FREE = "psd-zero-free-kernel"
FAMILY_WITH_ZEROS = "psd-kernel-with-zeros"
FAMILY_LAPLACIAN = "laplacian"
FAMILIES = (FAMILY_PD, FAMILY_ZERO_FREE, FAMILY_WITH_ZEROS, FAMILY_LAPLACIAN)

IN_KERNEL = "converged-in-kernel"
OFF_KERNEL = "converged-off-kernel"
MULTI_CLUSTER = "multi-cluster"
DIVERGING = "diverging"
UNDECIDED = "undecided"
OUTCOMES = (IN_KERNEL, OFF_KERNEL, MULTI_CLUSTER, DIVERGING, UNDECIDED)


class InvariantError(AssertionError):
    """A policy produced a velocity violating the sign condition (a bug)."""


@dataclass(frozen=True)
class SynthesisPolicy:
    """How coordinates move.

    ``gradient-opposed``: every coordinate moves at ``rate`` against its
    gradient entry. ``random-feasible``: speeds drawn uniformly from
    ``[0, rate]`` each step, zero with probability ``zero_prob``.
    ``axis-switching``: only ``axes`` coordinates (cycling) move during each
    ``switch_interval``. ``stall``: gradient-opposed until ``stop_time``, then
    frozen.
    """

    kind: str = GRADIENT_OPPOSED
    rate: float = 1.0
    seed: int = 0
    zero_prob: float = 0.2
    switch_interval: float = 0.5
    axes: int = 1
    stop_time: float = 0.0
    deadband: float | None = None

    def __post_init__(self):
        if self.kind not in POLICIES:
            raise ValueError(f"unknown policy {self.kind!r}; expected one of {POLICIES}")
        if not self.rate > 0:
            raise ValueError("rate must be positive")


def default_deadband(A: np.ndarray, policy: SynthesisPolicy, dt: float) -> float:
    if policy.deadband is not None:
        return policy.deadband
    return policy.rate * dt * float(np.max(np.diag(A)))


def _speed_schedule(policy: SynthesisPolicy, times: np.ndarray, n: int) -> np.ndarray:
    """Nonnegative speed of every coordinate at every sample."""
    shape = (len(times), n)
    if policy.kind == RANDOM_FEASIBLE:
        rng = np.random.default_rng(policy.seed)
        speed = policy.rate * rng.uniform(0.0, 1.0, shape)
        speed[rng.uniform(size=shape) < policy.zero_prob] = 0.0
        return speed
    if policy.kind == AXIS_SWITCHING:
        m = (times // policy.switch_interval).astype(int)
        speed = np.zeros(shape)
        for r in range(policy.axes):
            speed[np.arange(len(times)), (m * policy.axes + r) % n] = policy.rate
        return speed
    speed = np.full(shape, policy.rate)
    if policy.kind == STALL:
        speed[times >= policy.stop_time] = 0.0
    return speed


def synthesize(A, x0, policy: SynthesisPolicy, dt: float, horizon: float) -> Trajectory:
    """Euler trajectory whose recorded velocity satisfies the sign condition at every sample."""
    A = np.asarray(A, dtype=float)
    x = np.array(x0, dtype=float)
    n = x.size
    if A.shape != (n, n):
        raise ValueError("matrix and initial state dimensions differ")
    N = int(round(horizon / dt))
    times = np.arange(N + 1) * dt
    band = default_deadband(A, policy, dt)
    speed = _speed_schedule(policy, times, n)
    states = np.empty((N + 1, n))
    controls = np.empty((N + 1, n))
    for k in range(N + 1):
        g = A @ x
        u = -np.sign(g) * (np.abs(g) > band) * speed[k]
        states[k] = x
        controls[k] = u
        x = x + dt * u
    bad = np.flatnonzero(np.any(controls * (states @ A.T) > 0, axis=1))
    if bad.size:
        raise InvariantError(f"policy {policy.kind} violated the sign condition at t={times[bad[0]]}")
    energy = 0.5 * np.einsum("ki,ij,kj->k", states, A, states)
    return Trajectory(times, states, controls, energy)


@dataclass
class AccumulationEstimate:
    centers: np.ndarray
    radii: np.ndarray
    counts: np.ndarray
    truncated: bool = False
    revisits: int = 0

    def __len__(self):
        return len(self.counts)

    @property
    def recurrent(self) -> bool:
        """True if the tail returns to a cluster it has left; a one-way creep is not."""
        return self.revisits > 0


def estimate_accumulation(traj, tail_fraction: float = 0.25, radius: float = 1e-2,
                          max_clusters: int = 1000) -> AccumulationEstimate:
    """Greedy leader clustering of the last ``tail_fraction`` of samples.

    ``traj`` is a :class:`Trajectory` or an array of samples (rows). A sample
    joins the first center within ``radius``; otherwise it becomes a new
    center. Centers are sorted by decreasing count. ``revisits`` counts the
    times a sample rejoins an earlier cluster after leaving it.
    """
    if not 0 < tail_fraction <= 1:
        raise ValueError("tail_fraction must be in (0, 1]")
    pts = traj.states if isinstance(traj, Trajectory) else np.atleast_2d(np.asarray(traj, dtype=float))
    start = int(np.floor(len(pts) * (1 - tail_fraction)))
    tail = pts[start:]
    if len(tail) == 0:
        raise ValueError("empty tail")
    centers: list[np.ndarray] = []
    radii: list[float] = []
    counts: list[int] = []
    last = -1
    truncated = False
    revisits = 0
    for p in tail:
        if last >= 0:
            d = float(np.linalg.norm(p - centers[last]))
            if d <= radius:
                counts[last] += 1
                radii[last] = max(radii[last], d)
                continue
        if centers:
            dist = np.linalg.norm(np.asarray(centers) - p, axis=1)
            hit = np.flatnonzero(dist <= radius)
            if hit.size:
                revisits += 1
                last = int(hit[0])
                counts[last] += 1
                radii[last] = max(radii[last], float(dist[last]))
                continue
        if len(centers) >= max_clusters:
            truncated = True
            continue
        centers.append(p.copy())
        radii.append(0.0)
        counts.append(1)
        last = len(centers) - 1
    order = np.argsort(-np.asarray(counts), kind="stable")
    return AccumulationEstimate(
        np.asarray(centers)[order], np.asarray(radii)[order], np.asarray(counts)[order], truncated, revisits
    )


def kernel_distance(E: QuadraticEnergy, point) -> float:
    return E.kernel_distance(point)


# ---------------------------------------------------------------------------
# random matrices


def random_orthogonal(n: int, rng: np.random.Generator, first=None) -> np.ndarray:
    """Random orthogonal matrix; if ``first`` is given, column 0 is ``first / ||first||``."""
    M = rng.standard_normal((n, n))
    if first is not None:
        M[:, 0] = first
    Q, R = np.linalg.qr(M)
    Q = Q * np.sign(np.diag(R))
    return Q


def random_pd(n: int, rng: np.random.Generator, spectrum=(0.5, 2.0)) -> np.ndarray:
    Q = random_orthogonal(n, rng)
    lam = rng.uniform(*spectrum, n)
    return (Q * lam) @ Q.T


def random_psd_with_kernel(kernel, rng: np.random.Generator, spectrum=(0.5, 2.0)) -> np.ndarray:
    """Rank n-1 PSD matrix whose kernel is exactly ``span(kernel)``."""
    kernel = np.asarray(kernel, dtype=float)
    n = kernel.size
    Q = random_orthogonal(n, rng, first=kernel)
    B = Q[:, 1:]
    lam = rng.uniform(*spectrum, n - 1)
    return (B * lam) @ B.T


def random_kernel_vector(n: int, rng: np.random.Generator, zero_free: bool) -> np.ndarray:
    v = rng.uniform(0.3, 1.0, n) * rng.choice([-1.0, 1.0], n)
    if not zero_free:
        zeros = rng.choice(n, size=int(rng.integers(1, n)), replace=False)
        v[zeros] = 0.0
    return v / np.linalg.norm(v)


def random_connected_laplacian(n: int, rng: np.random.Generator) -> np.ndarray:
    L = np.zeros((n, n))

    def connect(i, j):
        w = rng.uniform(0.5, 2.0)
        L[i, j] -= w
        L[j, i] -= w
        L[i, i] += w
        L[j, j] += w

    for k in range(1, n):
        connect(k, int(rng.integers(0, k)))
    for i in range(n):
        for j in range(i + 2, n):
            if L[i, j] == 0 and rng.uniform() < 0.2:
                connect(i, j)
    return L


def random_matrix(family: str, n: int, rng: np.random.Generator) -> np.ndarray:
    if family == FAMILY_PD:
        return random_pd(n, rng)
    if family == FAMILY_ZERO_FREE:
        return random_psd_with_kernel(random_kernel_vector(n, rng, True), rng)
    if family == FAMILY_WITH_ZEROS:
        return random_psd_with_kernel(random_kernel_vector(n, rng, False), rng)
    if family == FAMILY_LAPLACIAN:
        return random_connected_laplacian(n, rng)
    raise ValueError(f"unknown matrix family {family!r}; expected one of {FAMILIES}")


def random_policy(rng: np.random.Generator, rate: float, kinds=POLICIES, horizon: float = 1.0) -> SynthesisPolicy:
    kind = str(rng.choice(list(kinds)))
    return SynthesisPolicy(
        kind=kind,
        rate=rate,
        seed=int(rng.integers(2**31)),
        zero_prob=float(rng.uniform(0.0, 0.5)),
        switch_interval=float(rng.uniform(0.1, 1.0)),
        axes=1,
        stop_time=float(rng.uniform(0.0, horizon / 4)),
    )


# ---------------------------------------------------------------------------
# search


@dataclass(frozen=True)
class SearchConfig:
    family: str
    trials: int = 100
    seed: int = 0
    n_range: tuple[int, int] = (2, 8)
    dt: float = 1e-3
    horizon: float = 30.0
    rate: float = 0.5
    window: float = 10.0
    tol: float = 1e-3
    radius: float = 1e-2
    tail_fraction: float = 0.25
    policies: tuple[str, ...] = POLICIES
    workers: int = 1

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown matrix family {self.family!r}; expected one of {FAMILIES}")
        if self.trials < 1:
            raise ValueError("trials must be at least 1")


@dataclass
class TrialResult:
    index: int
    family: str
    A: np.ndarray
    x0: np.ndarray
    policy: SynthesisPolicy
    outcome: str
    kernel_tol: float
    x_star: np.ndarray | None = None
    kernel_distance: float | None = None
    clusters: np.ndarray | None = None
    cluster_kernel_distance: list[float] = field(default_factory=list)
    sign_margin: float = 0.0
    contradiction: str = ""
    trajectory: Trajectory | None = None

    def to_dict(self) -> dict:
        d = {
            "index": self.index,
            "family": self.family,
            "outcome": self.outcome,
            "A": self.A.tolist(),
            "x0": self.x0.tolist(),
            "policy": asdict(self.policy),
            "kernel_tol": float(self.kernel_tol),
            "sign_margin": float(self.sign_margin),
        }
        if self.x_star is not None:
            d["x_star"] = self.x_star.tolist()
            d["kernel_distance"] = float(self.kernel_distance)
        if self.clusters is not None:
            d["clusters"] = self.clusters.tolist()
            d["cluster_kernel_distance"] = [float(v) for v in self.cluster_kernel_distance]
        if self.contradiction:
            d["contradiction"] = self.contradiction
        return d


@dataclass
class SearchReport:
    config: SearchConfig
    trials: list[TrialResult]

    @property
    def tallies(self) -> dict[str, int]:
        c = Counter(t.outcome for t in self.trials)
        return {o: c.get(o, 0) for o in OUTCOMES}

    @property
    def contradictions(self) -> list[TrialResult]:
        return [t for t in self.trials if t.contradiction]

    def interesting(self, limit: int = 10) -> list[TrialResult]:
        """Contradictions first, then multi-cluster, diverging, off-kernel and undecided trials."""
        rank = {MULTI_CLUSTER: 1, DIVERGING: 1, UNDECIDED: 2, OFF_KERNEL: 3}
        picked = [t for t in self.trials if t.contradiction or t.outcome in rank]
        picked.sort(key=lambda t: (0 if t.contradiction else rank.get(t.outcome, 9), t.index))
        return picked[:limit]

    def summary_lines(self) -> list[str]:
        cfg = self.config
        lines = [
            f"family={cfg.family}",
            f"trials={cfg.trials}",
            f"seed={cfg.seed}",
            f"dt={cfg.dt:.9g}",
            f"horizon={cfg.horizon:.9g}",
            f"radius={cfg.radius:.9g}",
        ]
        lines += [f"tally.{k}={v}" for k, v in self.tallies.items()]
        lines.append(f"contradictions={len(self.contradictions)}")
        lines += [f"contradiction.{t.index}={t.contradiction}" for t in self.contradictions]
        return lines


def _kernel_tol(E: QuadraticEnergy, band: float, radius: float) -> float:
    # a trajectory stopped by the deadband has |(Ax)_i| <= band for all i
    evals = np.linalg.eigvalsh(E.A)
    pos = evals[evals > 1e-9 * max(E.norm, 1e-300)]
    if pos.size == 0:
        return radius
    return radius + np.sqrt(E.n) * band / float(pos.min())


def run_trial(cfg: SearchConfig, index: int, keep_trajectory: bool = False) -> TrialResult:
    rng = np.random.default_rng([cfg.seed, index])
    n = int(rng.integers(cfg.n_range[0], cfg.n_range[1] + 1))
    A = random_matrix(cfg.family, n, rng)
    E = QuadraticEnergy.from_matrix(A)
    x0 = rng.uniform(-1.0, 1.0, n)
    policy = random_policy(rng, cfg.rate, cfg.policies, cfg.horizon)
    traj = synthesize(E.A, x0, policy, cfg.dt, cfg.horizon)
    band = default_deadband(E.A, policy, cfg.dt)
    ktol = _kernel_tol(E, band, cfg.radius)
    sign_margin = float(np.max(traj.controls * (traj.states @ E.A)))
    res = TrialResult(index, cfg.family, E.A.copy(), x0, policy, UNDECIDED, ktol, sign_margin=sign_margin)

    limit = 1e3 * np.linalg.norm(x0) + 1e3
    verdict = detect(traj, cfg.window, cfg.tol)
    if np.max(np.linalg.norm(traj.states, axis=1)) > limit:
        res.outcome = DIVERGING
    elif verdict.status == CONVERGED:
        res.x_star = verdict.x_star
        res.kernel_distance = E.kernel_distance(verdict.x_star)
        res.outcome = IN_KERNEL if res.kernel_distance <= ktol else OFF_KERNEL
    else:
        est = estimate_accumulation(traj, cfg.tail_fraction, cfg.radius)
        if len(est) > 1 and est.recurrent:
            res.outcome = MULTI_CLUSTER
            res.clusters = est.centers
            res.cluster_kernel_distance = [E.kernel_distance(c) for c in est.centers]

    res.contradiction = _contradiction(res, E, x0)
    if keep_trajectory or res.contradiction or res.outcome in (MULTI_CLUSTER, DIVERGING, UNDECIDED):
        res.trajectory = traj
    return res


def replay(cfg: SearchConfig, res: TrialResult) -> Trajectory:
    """Re-synthesize a trial's trajectory from its recorded matrix, start and policy."""
    return res.trajectory if res.trajectory is not None else synthesize(res.A, res.x0, res.policy, cfg.dt, cfg.horizon)


def _contradiction(res: TrialResult, E: QuadraticEnergy, x0: np.ndarray) -> str:
    if res.sign_margin > 0:
        return f"sign condition violated by {res.sign_margin:.3g}"
    if res.family == FAMILY_PD and res.outcome in (MULTI_CLUSTER, DIVERGING):
        return f"positive definite matrix but trajectory is {res.outcome}"
    if res.family == FAMILY_LAPLACIAN:
        if res.outcome == DIVERGING:
            return "connected Laplacian but trajectory diverges"
        if res.x_star is not None:
            excess = max(float(np.max(res.x_star - x0.max())), float(np.max(x0.min() - res.x_star)))
            if excess > 1e-6:
                return f"limit leaves the initial hull by {excess:.3g}"
    if res.outcome == MULTI_CLUSTER and E.classification != POSITIVE_DEFINITE and E.kernel_is_zero_free():
        far = max(res.cluster_kernel_distance)
        if far > res.kernel_tol:
            return f"accumulation point at distance {far:.3g} from ker A"
    return ""


def search_counterexample(cfg: SearchConfig, keep_trajectories: bool = False) -> SearchReport:
    """Run ``cfg.trials`` independent random trials; trial ``k`` is seeded from ``(seed, k)``."""
    idx = range(cfg.trials)
    if cfg.workers > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            trials = list(pool.map(run_trial, [cfg] * cfg.trials, idx, [keep_trajectories] * cfg.trials))
    else:
        trials = [run_trial(cfg, k, keep_trajectories) for k in idx]
    for t in trials:
        if t.contradiction:
            log.error("trial %d: %s", t.index, t.contradiction)
    return SearchReport(cfg, trials)
