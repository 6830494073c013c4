"""Threshold (deadzone) nonlinearities ``T_w`` and a sampling-based validity checker.

Three kinds are provided:

``hard``
    ``T_w(x) = x`` if ``|x| > w`` else 0.
``ramp``
    The three-branch ramp used in the platoon experiments, implemented exactly
    as published: ``x`` beyond ``w + delta_w``, zero inside ``[-w, w]``, and
    ``(|x| - w) sgn(x) / delta_w`` in between. For ``w + delta_w < 1`` the middle
    branch reaches 1 at the outer boundary while the outer branch restarts at
    ``w + delta_w``, so the function is neither continuous nor monotone there;
    :func:`check_threshold_validity` reports it.
``ramp-continuous``
    Not part of the published law: the middle branch rescaled by
    ``(w + delta_w)`` so it joins the outer branch continuously. Use it when a
    threshold that really is nondecreasing is needed.

All kinds are odd and map ``|x| <= w`` to exactly zero.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

HARD = "hard"
RAMP = "ramp"
RAMP_CONTINUOUS = "ramp-continuous"
KINDS = (HARD, RAMP, RAMP_CONTINUOUS)

MONOTONE_TOL = 1e-12
ZERO_TOL = 1e-12


@dataclass(frozen=True)
class ThresholdSpec:
    kind: str = HARD
    w: float = 0.0
    delta_w: float | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown threshold kind {self.kind!r}; expected one of {KINDS}")
        if not self.w >= 0:
            raise ValueError(f"threshold width must be nonnegative, got {self.w}")
        if self.kind == HARD:
            if self.delta_w is not None:
                raise ValueError("hard threshold takes no delta_w")
        elif self.delta_w is None or not self.delta_w > 0:
            raise ValueError(f"{self.kind} threshold needs delta_w > 0")

    def scaled(self, width: float) -> "ThresholdSpec":
        """Same shape with deadzone half-width ``width`` (``delta_w`` is kept)."""
        return replace(self, w=float(width))

    def __call__(self, x):
        return evaluate(self.kind, self.w, x, self.delta_w)

    def to_dict(self) -> dict:
        d = {"kind": self.kind, "w": self.w}
        if self.delta_w is not None:
            d["delta_w"] = self.delta_w
        return d


def eval_hard(w, x):
    x = np.asarray(x, dtype=float)
    out = np.where(np.abs(x) > w, x, 0.0)
    return out if out.ndim else float(out)


def eval_ramp(w, delta_w, x):
    x = np.asarray(x, dtype=float)
    a = np.abs(x)
    mid = (a - w) * np.sign(x) / delta_w
    out = np.where(a > w + delta_w, x, np.where(a <= w, 0.0, mid))
    return out if out.ndim else float(out)


def eval_ramp_continuous(w, delta_w, x):
    x = np.asarray(x, dtype=float)
    a = np.abs(x)
    mid = (a - w) * np.sign(x) * (w + delta_w) / delta_w
    out = np.where(a > w + delta_w, x, np.where(a <= w, 0.0, mid))
    return out if out.ndim else float(out)


def evaluate(kind: str, w, x, delta_w=None):
    """Evaluate a threshold of the given kind; ``w`` may be an array broadcast against ``x``."""
    if kind == HARD:
        return eval_hard(w, x)
    if kind == RAMP:
        return eval_ramp(w, delta_w, x)
    if kind == RAMP_CONTINUOUS:
        return eval_ramp_continuous(w, delta_w, x)
    raise ValueError(f"unknown threshold kind {kind!r}")


@dataclass(frozen=True)
class Violation:
    x: float
    magnitude: float


@dataclass(frozen=True)
class ValidityReport:
    spec: ThresholdSpec
    monotonicity: Violation | None
    zero_set: Violation | None
    monotonicity_count: int
    zero_set_count: int

    @property
    def valid(self) -> bool:
        return self.monotonicity is None and self.zero_set is None

    def summary(self) -> str:
        if self.valid:
            return "valid"
        parts = []
        if self.monotonicity:
            parts.append(
                f"monotonicity violated {self.monotonicity_count}x, worst drop "
                f"{self.monotonicity.magnitude:.3g} at x={self.monotonicity.x:.6g}"
            )
        if self.zero_set:
            parts.append(
                f"zero set violated {self.zero_set_count}x, worst {self.zero_set.magnitude:.3g} "
                f"at x={self.zero_set.x:.6g}"
            )
        return "; ".join(parts)


def check_threshold_validity(spec: ThresholdSpec, samples: int = 20001, range_: float = 1.0) -> ValidityReport:
    """Sample ``spec`` on a uniform grid over ``[-range_, range_]``.

    Looks for drops between consecutive samples (the function must be
    nondecreasing) and for points where ``T_w(x) = 0`` fails to coincide with
    ``|x| <= w``. Violations are report content, never exceptions.
    """
    if samples < 2:
        raise ValueError("need at least two samples")
    xs = np.linspace(-range_, range_, samples)
    fs = np.asarray(spec(xs), dtype=float)

    drops = fs[:-1] - fs[1:]
    bad = np.flatnonzero(drops > MONOTONE_TOL)
    mono = None
    if bad.size:
        k = bad[np.argmax(drops[bad])]
        mono = Violation(float((xs[k] + xs[k + 1]) / 2), float(drops[k]))

    inside = np.abs(xs) <= spec.w
    # Points within rounding distance of the boundary are ambiguous; skip them.
    outside = np.abs(xs) > spec.w * (1 + 1e-9) + 1e-15
    mag = np.where(inside, np.abs(fs), 0.0)
    mag = np.where(outside & (fs == 0.0), np.abs(xs), mag)
    offenders = np.flatnonzero((inside & (np.abs(fs) > ZERO_TOL)) | (outside & (fs == 0.0)))
    zero = None
    if offenders.size:
        k = offenders[np.argmax(mag[offenders])]
        zero = Violation(float(xs[k]), float(mag[k]))

    return ValidityReport(spec, mono, zero, int(bad.size), int(offenders.size))
