import math

import numpy as np
import pytest

from app.bounds import (
    apriori_bounds,
    bound_report,
    classify_ratio,
    davis_kahan_certificate,
    find_violations,
    gap_nonclosing_check,
    regime_classify,
    split_diag_offdiag,
    split_spectrum,
)
from app.constants import (
    HULL_NONE,
    HULL_SIGMA_FREE,
    HULL_SIGMA_REST_FREE,
    HULL_SUBORDINATED,
    NO_CEILING_ASSERTED,
    REGIME_OPEN_WINDOW,
    REGIME_OVERCRITICAL,
    REGIME_SUBORDINATED,
    REGIME_THEOREM1_I,
    REGIME_THEOREM1_II,
    THEOREM1_RATIO,
)
from app.errors import GapError, InputError
from app.examples import EXAMPLE_SIGMA, TwoByTwoFamily
from app.intervals import IntervalUnion
from app.spectral import CornerNorms, eigh, spectral_projection


def test_classify_ratio():
    for ratio, hull, expected in [
        (0.5, HULL_SUBORDINATED, REGIME_OVERCRITICAL),
        (0.7, HULL_NONE, REGIME_OVERCRITICAL),
        (0.45, HULL_SUBORDINATED, REGIME_SUBORDINATED),
        (0.1, HULL_SUBORDINATED, REGIME_SUBORDINATED),
        (0.3, HULL_NONE, REGIME_THEOREM1_I),
        (0.388, HULL_SIGMA_REST_FREE, REGIME_THEOREM1_I),
        (0.389, HULL_SIGMA_FREE, REGIME_THEOREM1_II),
        (0.45, HULL_SIGMA_REST_FREE, REGIME_THEOREM1_II),
        (0.389, HULL_NONE, REGIME_OPEN_WINDOW),
        (0.45, HULL_NONE, REGIME_OPEN_WINDOW),
    ]:
        assert classify_ratio(ratio, hull) == expected


def test_regime_classify():
    family = TwoByTwoFamily(0.25)
    assert regime_classify(family.a, family.v, EXAMPLE_SIGMA) == REGIME_SUBORDINATED
    a = np.diag([0.0, 1.0, 2.0, 3.0])
    sigma = IntervalUnion.from_points([0.0, 2.0])
    for scale, expected in [
        (0.1, REGIME_THEOREM1_I),
        (0.45, REGIME_OPEN_WINDOW),
        (0.6, REGIME_OVERCRITICAL),
    ]:
        v = scale * np.diag([1.0, -1.0, 1.0, -1.0])
        assert regime_classify(a, v, sigma) == expected


def test_regime_flips_at_threshold():
    a = np.diag([0.0, 1.0, 2.0, 3.0])
    for sigma, below, above in [
        (IntervalUnion.from_points([0.0, 2.0]), REGIME_THEOREM1_I, REGIME_OPEN_WINDOW),
        (IntervalUnion.from_points([1.0]), REGIME_THEOREM1_I, REGIME_THEOREM1_II),
    ]:
        lo, hi = 0.3, 0.45
        for _ in range(60):
            mid = (lo + hi) / 2
            v = mid * np.diag([1.0, -1.0, 1.0, -1.0])
            if regime_classify(a, v, sigma) == below:
                lo = mid
            else:
                assert regime_classify(a, v, sigma) == above
                hi = mid
        assert lo == pytest.approx(THEOREM1_RATIO, abs=1e-12)
        assert hi == pytest.approx(THEOREM1_RATIO, abs=1e-12)
    for hull, above in [(HULL_NONE, REGIME_OPEN_WINDOW), (HULL_SIGMA_FREE, REGIME_THEOREM1_II)]:
        assert classify_ratio(math.nextafter(THEOREM1_RATIO, 0.0), hull) == REGIME_THEOREM1_I
        assert classify_ratio(THEOREM1_RATIO, hull) == above


def test_split_spectrum_errors():
    system = eigh(np.diag([0.0, 1.0]))
    for sigma, declared in [
        (IntervalUnion.from_points([5.0]), None),
        (IntervalUnion.closed(-1.0, 2.0), None),
        (IntervalUnion.from_points([0.0]), 2.0),
    ]:
        with pytest.raises(GapError):
            split_spectrum(system, sigma, d_declared=declared)
    split = split_spectrum(system, IntervalUnion.from_points([0.0]), d_declared=1.0)
    assert split.gap == pytest.approx(1.0)


def test_apriori_bounds_values():
    bounds = {
        b.name: b
        for b in apriori_bounds(1.0, 0.3, 0.0, 0.3, REGIME_SUBORDINATED, hull=HULL_SUBORDINATED)
    }
    for name, expected in [
        ("corner_generic", (math.pi / 2) * 0.3 / 0.7),
        ("corner_hull", 0.3 / 0.7),
        ("tan2theta_offdiag", 0.266934),
        ("tan2theta_refined", 0.266934),
        ("tan2theta_general", 0.471858),
        ("sqrt2_ceiling", math.sqrt(2) / 2),
        ("unit_ceiling", 1.0),
    ]:
        assert bounds[name].applicable
        assert not bounds[name].vacuous
        assert bounds[name].value == pytest.approx(expected, rel=1e-5)


def test_apriori_bounds_applicability():
    for d, v_norm, regime, hull, applicable in [
        (
            1.0,
            0.45,
            REGIME_OPEN_WINDOW,
            HULL_NONE,
            {"corner_generic"},
        ),
        (
            1.0,
            0.45,
            REGIME_THEOREM1_II,
            HULL_SIGMA_FREE,
            {"corner_generic", "corner_hull", "unit_ceiling"},
        ),
        (
            1.0,
            0.6,
            REGIME_OVERCRITICAL,
            HULL_SUBORDINATED,
            {"corner_generic", "corner_hull"},
        ),
        (1.0, 1.2, REGIME_OVERCRITICAL, HULL_NONE, set()),
    ]:
        bounds = apriori_bounds(d, v_norm, v_norm, v_norm, regime, hull=hull)
        assert {b.name for b in bounds if b.applicable} == applicable
        assert all(b.value is None for b in bounds if not b.applicable)


def test_vacuous_bounds():
    bounds = {
        b.name: b for b in apriori_bounds(1.0, 0.45, 0.45, 0.45, REGIME_OPEN_WINDOW, hull=HULL_NONE)
    }
    assert bounds["corner_generic"].vacuous
    assert bounds["corner_generic"].value == pytest.approx((math.pi / 2) * 0.45 / 0.55)


def test_apriori_bounds_rejects_zero_gap():
    with pytest.raises(GapError):
        apriori_bounds(0.0, 0.1, 0.0, 0.1, REGIME_SUBORDINATED)


def test_find_violations():
    bounds = apriori_bounds(1.0, 0.3, 0.0, 0.3, REGIME_SUBORDINATED, hull=HULL_SUBORDINATED)
    for measured, expected in [
        (CornerNorms(0.1, 0.1, 0.1), []),
        (CornerNorms(0.2, 0.3, 0.3), ["tan2theta_offdiag", "tan2theta_refined"]),
        (
            CornerNorms(0.5, 0.5, 0.5),
            ["corner_hull", "tan2theta_offdiag", "tan2theta_refined", "tan2theta_general"],
        ),
        (
            CornerNorms(1.0, 1.0, 1.0),
            [
                "corner_generic",
                "corner_hull",
                "tan2theta_offdiag",
                "tan2theta_refined",
                "tan2theta_general",
                "sqrt2_ceiling",
                "unit_ceiling",
            ],
        ),
    ]:
        violations = find_violations(bounds, measured)
        assert [v.split(":")[0] for v in violations] == expected


def test_example_report():
    family = TwoByTwoFamily(0.25)
    report = bound_report(family.a, family.v, EXAMPLE_SIGMA)
    assert report.regime == REGIME_SUBORDINATED
    assert report.hull == HULL_SUBORDINATED
    assert report.d == pytest.approx(1.0)
    assert report.v_norm == pytest.approx(0.3535534, abs=1e-7)
    assert report.measured.difference == pytest.approx(0.3826834, abs=1e-7)
    assert report.violations == ()
    assert report.rank_p == report.rank_q == 1
    assert report.v_diag_norm == pytest.approx(0.25)
    assert report.v_off_norm == pytest.approx(0.25)
    refined = report.bound("tan2theta_refined")
    assert abs(refined.value - report.measured.difference) <= 1e-9

    document = report.to_dict()
    assert document["measured"]["p_minus_q"] == report.measured.difference
    assert document["sigma_eigs"] == [0.0]
    assert document["Sigma_eigs"] == [1.0]
    assert "bnd" in document["tolerances"]


def test_zero_perturbation_report():
    report = bound_report(np.diag([0.0, 1.0]), np.zeros((2, 2)), EXAMPLE_SIGMA)
    assert tuple(report.measured) == (0.0, 0.0, 0.0)
    assert report.v_norm == 0.0
    assert report.violations == ()


def test_open_window_report():
    a = np.diag([0.0, 1.0, 2.0, 3.0])
    v = 0.45 * np.diag([1.0, -1.0, 1.0, -1.0])
    report = bound_report(a, v, IntervalUnion.from_points([0.0, 2.0]))
    assert report.regime == REGIME_OPEN_WINDOW
    assert NO_CEILING_ASSERTED in report.notes
    assert not report.bound("unit_ceiling").applicable
    assert report.measured.difference == pytest.approx(0.0, abs=1e-12)


def test_dimension_mismatch():
    with pytest.raises(InputError):
        bound_report(np.eye(2), np.zeros((3, 3)), EXAMPLE_SIGMA)


def test_davis_kahan_certificate():
    family = TwoByTwoFamily(0.25)
    b = family.a + family.v
    certificate = davis_kahan_certificate(
        family.a, b, IntervalUnion.closed(-0.2, 0.2), IntervalUnion.closed(0.8, 2.0)
    )
    assert certificate.variant == "hull-separated"
    assert certificate.measured == pytest.approx(0.3826834, abs=1e-7)
    assert certificate.bound == pytest.approx(0.3535534 / 0.6, abs=1e-6)
    assert certificate.measured <= certificate.bound

    with pytest.raises(InputError):
        davis_kahan_certificate(
            family.a, b, IntervalUnion.closed(0, 1), IntervalUnion.closed(1, 2)
        )


def test_split_diag_offdiag():
    family = TwoByTwoFamily(0.1)
    p = bound_report(family.a, family.v, EXAMPLE_SIGMA)
    projection = eigh(family.a)
    diag, off = split_diag_offdiag(family.v, spectral_projection(projection, EXAMPLE_SIGMA))
    np.testing.assert_allclose(diag.matrix + off.matrix, family.v.matrix, atol=1e-14)
    np.testing.assert_allclose(diag.matrix, np.diag([0.4, -0.4]), atol=1e-14)
    assert off.norm() == pytest.approx(p.v_off_norm)


def test_gap_nonclosing_check():
    family = TwoByTwoFamily(0.25)
    check = gap_nonclosing_check(
        family.a, family.v, 0.0, 1.0, np.linspace(-1.0, 1.0, 21)
    )
    assert check.passed
    assert check.window == pytest.approx((0.3535534, 0.6464466), abs=1e-6)
    for lo, hi, s_grid in [
        (0.0, 0.5, [0.5]),
        (-0.5, 1.0, [0.5]),
        (0.0, 1.0, [1.5]),
    ]:
        with pytest.raises(InputError):
            gap_nonclosing_check(family.a, family.v, lo, hi, s_grid)
