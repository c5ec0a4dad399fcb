import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from app.constants import RESONANCE_THRESHOLD, SQRT2_OVER_2
from app.errors import InputError
from app.examples import (
    BRANCH_BAND,
    BRANCH_LEFT,
    BRANCH_RIGHT,
    ResonanceModel,
    TwoByTwoFamily,
    band_edge_values,
    discrete_point_spectrum,
    eigenvalue_scan,
    evaluate_secular,
    example2x2,
    overlap_decay,
    rescale_instance,
    resonance_operators,
    resonance_threshold,
    secular,
    secular_quadrature,
    sharpness_sweep,
    v_norm_closed,
    v_norm_expansion,
)
from app.intervals import IntervalUnion


def test_example2x2_closed_form():
    for epsilon, v_norm, pq_norm in [
        (0.25, 0.3535534, 0.3826834),
        (0.1, 0.430116, 0.482430),
    ]:
        record = example2x2(epsilon)
        assert record.v_norm_numeric == pytest.approx(v_norm, abs=1e-6)
        assert record.pq_norm_numeric == pytest.approx(pq_norm, abs=1e-6)
        assert record.max_mismatch <= 1e-10


def test_example2x2_acceptance_sweep():
    for epsilon in [0.01, 0.1, 0.25, 0.5, 0.7]:
        record = example2x2(epsilon)
        assert record.max_mismatch <= 1e-10
        assert record.pq_norm_numeric < SQRT2_OVER_2
        assert record.report.violations == ()
        row = record.to_row()
        assert row["regime"] == "subordinated"
        assert row["epsilon"] == epsilon


def test_closed_forms_on_random_epsilons():
    rng = np.random.default_rng(50)
    for epsilon in rng.uniform(1e-3, 0.749, size=50):
        record = example2x2(float(epsilon))
        assert record.max_mismatch <= 1e-10
        assert record.pq_norm_numeric < SQRT2_OVER_2
        assert record.report.violations == ()


def test_family_rejects_epsilon_outside_range():
    for epsilon in [0.0, -0.1, 0.75, 1.0]:
        with pytest.raises(InputError):
            TwoByTwoFamily(epsilon)


def test_refined_bound_is_attained():
    for epsilon, attained in [
        (0.01, True),
        (0.1, True),
        (0.25, True),
        (0.5, True),
        (0.6, False),
        (0.7, False),
    ]:
        record = example2x2(epsilon)
        refined = record.report.bound("tan2theta_refined")
        assert refined.applicable
        if attained:
            assert abs(refined.value - record.pq_norm_numeric) <= 1e-9
        else:
            assert record.pq_norm_numeric < refined.value - 1e-3


def test_sharpness_sweep():
    rows = sharpness_sweep([1e-2, 1e-4, 1e-6])
    assert [row.epsilon for row in rows] == [1e-2, 1e-4, 1e-6]
    gaps = [row.gap for row in rows]
    assert gaps == sorted(gaps, reverse=True)
    assert all(gap > 0 for gap in gaps)
    assert rows[-1].gap == pytest.approx(7.07e-4, rel=1e-2)
    for row in rows[1:]:
        assert row.gap == pytest.approx(row.series, rel=1e-2)


# ----------------------------
# Resonance model
# ----------------------------


def test_eigenvalue_scan_root_counts():
    for epsilon, expected in [
        (0.1, 0),
        (0.2, 0),
        (0.3, 0),
        (0.39, 0),
        (0.41, 1),
        (0.5, 1),
        (0.7, 1),
    ]:
        scan = eigenvalue_scan(epsilon)
        assert scan.root_count == expected
        assert len(scan.roots) == expected


def test_root_above_threshold():
    (root,) = eigenvalue_scan(0.5).roots
    assert root == pytest.approx(0.149, abs=1e-3)
    assert abs(secular(0.5, root)) <= 1e-9
    assert evaluate_secular(0.5, root).branch == BRANCH_RIGHT


def test_eigenvalue_scan_errors():
    for epsilon in [RESONANCE_THRESHOLD, 0.0, -1.0]:
        with pytest.raises(InputError):
            eigenvalue_scan(epsilon)


def test_resonance_threshold():
    assert resonance_threshold() == pytest.approx(0.4, abs=1e-6)
    with pytest.raises(InputError):
        resonance_threshold(0.1, 0.2)


def test_secular_branches():
    for epsilon, lam, branch in [
        (0.3, 0.5, BRANCH_RIGHT),
        (0.3, -1.0, BRANCH_LEFT),
        (0.3, 0.0, BRANCH_BAND),
        (0.3, 0.1, BRANCH_BAND),
    ]:
        if branch == BRANCH_BAND:
            with pytest.raises(InputError):
                secular(epsilon, lam)
        else:
            assert evaluate_secular(epsilon, lam).branch == branch


def test_secular_matches_quadrature():
    for epsilon, lam in [(0.3, 0.5), (0.5, 0.149), (0.3, -1.0), (0.5, -2.0), (0.41, 0.1)]:
        assert secular(epsilon, lam) == pytest.approx(
            secular_quadrature(epsilon, lam), abs=1e-9
        )


def test_band_edge_values():
    for epsilon in [0.1, 0.3, 0.5]:
        left, right = band_edge_values(epsilon)
        assert secular(epsilon, -0.5 - epsilon - 1e-9) == pytest.approx(left, abs=1e-6)
        assert secular(epsilon, 0.5 - epsilon + 1e-9) == pytest.approx(right, abs=1e-6)


def test_secular_one_ulp_past_the_band():
    for epsilon in [0.05, 0.1, 0.25, 0.3, 0.5, 0.7]:
        left, right = band_edge_values(epsilon)
        for lam, expected in [
            (math.nextafter(-0.5 - epsilon, -math.inf), left),
            (math.nextafter(0.5 - epsilon, math.inf), right),
        ]:
            assert math.isfinite(secular(epsilon, lam))
            assert secular(epsilon, lam) == pytest.approx(expected, abs=1e-9)


def test_discretised_norm():
    epsilon = 0.3
    for grid_size in [50, 100, 1000]:
        _, v = resonance_operators(ResonanceModel(epsilon, grid_size))
        assert abs(v.norm() - v_norm_closed(epsilon)) <= 1 / grid_size
    _, v = resonance_operators(ResonanceModel(epsilon, 1000))
    assert v.norm() == pytest.approx(v_norm_closed(epsilon), abs=1e-6)


def test_norm_expansion():
    for epsilon in [1e-3, 0.01, 0.05, 0.1]:
        assert abs(v_norm_closed(epsilon) - v_norm_expansion(epsilon)) <= 0.5 * epsilon**2


def test_resonance_model_validation():
    for epsilon, grid_size in [(0.0, 10), (-0.3, 10), (0.3, 1)]:
        with pytest.raises(InputError):
            ResonanceModel(epsilon, grid_size)


def test_overlap_decay_below_threshold():
    rows = overlap_decay(0.3, [100, 200, 400, 800])
    assert [n for n, _ in rows] == [100, 200, 400, 800]
    overlaps = [value for _, value in rows]
    assert all(x > y for x, y in zip(overlaps, overlaps[1:]))
    assert overlaps[2] / overlaps[0] <= 0.7


def test_overlap_persists_above_threshold():
    overlaps = [value for _, value in overlap_decay(0.5, [100, 200, 400, 800])]
    assert all(value > 0.8 for value in overlaps)
    assert min(overlaps) / max(overlaps) >= 0.95


def test_discrete_point_spectrum():
    assert discrete_point_spectrum(0.3, 400) == []
    (root,) = eigenvalue_scan(0.5).roots
    assert any(abs(x - root) <= 1e-2 for x in discrete_point_spectrum(0.5, 400))


def test_rescale_instance():
    a, v, sigma = rescale_instance(
        np.diag([0.0, 2.0]), np.diag([0.1, 0.0]), IntervalUnion.from_points([0.0]), 1.0
    )
    np.testing.assert_allclose(a.matrix, np.diag([0.0, 1.0]))
    np.testing.assert_allclose(v.matrix, np.diag([0.05, 0.0]))
    assert sigma == IntervalUnion.from_points([0.0])
    with pytest.raises(InputError):
        rescale_instance(np.diag([0.0, 2.0]), np.zeros((2, 2)), sigma, 0.0)


epsilons = st.floats(min_value=0.05, max_value=0.7)
offsets = st.floats(min_value=1e-4, max_value=5.0)
separations = st.floats(min_value=1e-3, max_value=5.0)


@settings(max_examples=100, deadline=None)
@given(epsilons, offsets, separations)
def test_secular_increases_on_each_branch(epsilon, offset, separation):
    right = 0.5 - epsilon + offset
    assert secular(epsilon, right) < secular(epsilon, right + separation)
    left = -0.5 - epsilon - offset
    assert secular(epsilon, left - separation) < secular(epsilon, left)
    assert secular(epsilon, left) < -1.5 * epsilon
    assert not math.isnan(secular(epsilon, right))
