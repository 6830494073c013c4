import numpy as np
import pytest

from deadzone_platoon.deadzone import (
    HARD,
    RAMP,
    RAMP_CONTINUOUS,
    ThresholdSpec,
    check_threshold_validity,
    eval_hard,
    eval_ramp,
    eval_ramp_continuous,
)


@pytest.mark.parametrize("w,x,expected", [(0.1, 0.05, 0.0), (0.1, -0.2, -0.2), (0.0, 7.0, 7.0), (0.1, 0.1, 0.0)])
def test_hard(w, x, expected):
    assert eval_hard(w, x) == pytest.approx(expected)


@pytest.mark.parametrize("x,expected", [(0.08, 0.0), (0.11, 0.5), (0.2, 0.2), (-0.11, -0.5), (0.1, 0.0)])
def test_ramp_values(x, expected):
    assert eval_ramp(0.1, 0.02, x) == pytest.approx(expected)


def test_ramp_continuous_meets_identity_at_boundary():
    assert eval_ramp_continuous(0.1, 0.02, 0.12) == pytest.approx(0.12)
    assert eval_ramp_continuous(0.1, 0.02, 0.11) == pytest.approx(0.06)


def test_vectorized_width():
    out = eval_hard(np.array([0.1, 0.3]), np.array([0.2, 0.2]))
    np.testing.assert_allclose(out, [0.2, 0.0])


def test_ramp_approaches_hard():
    xs = np.array([-0.5, -0.2, -0.105, 0.05, 0.1005, 0.15, 0.4])
    gaps = [np.abs(eval_ramp(0.1, d, xs) - eval_hard(0.1, xs)).max() for d in (1e-2, 1e-4, 1e-6)]
    assert gaps[0] > 0
    assert gaps == sorted(gaps, reverse=True)
    assert gaps[-1] == 0.0


def test_spec_validation():
    with pytest.raises(ValueError):
        ThresholdSpec(RAMP, 0.1)
    with pytest.raises(ValueError):
        ThresholdSpec(HARD, 0.1, 0.02)
    with pytest.raises(ValueError):
        ThresholdSpec("soft", 0.1)
    with pytest.raises(ValueError):
        ThresholdSpec(HARD, -0.1)


def test_scaled_keeps_shape():
    spec = ThresholdSpec(RAMP, 0.1, 0.02).scaled(0.3)
    assert (spec.kind, spec.w, spec.delta_w) == (RAMP, 0.3, 0.02)


class TestValidity:
    def test_hard_valid(self):
        assert check_threshold_validity(ThresholdSpec(HARD, 0.1), range_=1.0).valid

    def test_verbatim_ramp_jump(self):
        report = check_threshold_validity(ThresholdSpec(RAMP, 0.1, 0.02), range_=1.0)
        assert not report.valid
        assert report.monotonicity is not None
        assert abs(report.monotonicity.x) == pytest.approx(0.12, abs=1e-3)
        assert report.monotonicity.magnitude == pytest.approx(0.88, abs=1e-3)
        assert "monotonicity" in report.summary()

    def test_ramp_with_unit_boundary_is_valid(self):
        assert check_threshold_validity(ThresholdSpec(RAMP, 0.5, 0.5), range_=2.0).valid

    def test_continuous_ramp_valid(self):
        assert check_threshold_validity(ThresholdSpec(RAMP_CONTINUOUS, 0.1, 0.02)).valid

    def test_zero_width_hard_is_identity(self):
        assert check_threshold_validity(ThresholdSpec(HARD, 0.0)).valid
