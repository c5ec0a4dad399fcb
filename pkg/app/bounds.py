import logging
import math
from dataclasses import dataclass, field
from typing import Dict, List, NamedTuple, Optional, Sequence, Tuple

import numpy as np

from app.constants import (
    ASSERTED_REGIMES,
    CRITICAL_RATIO,
    HULL_NONE,
    HULL_SUBORDINATED,
    NO_CEILING_ASSERTED,
    REGIME_OPEN_WINDOW,
    REGIME_OVERCRITICAL,
    REGIME_SUBORDINATED,
    REGIME_THEOREM1_I,
    REGIME_THEOREM1_II,
    SQRT2_OVER_2,
    THEOREM1_RATIO,
)
from app.errors import GapError, InputError
from app.intervals import IntervalUnion
from app.spectral import (
    CornerNorms,
    EigenSystem,
    HermitianOperator,
    OperatorLike,
    OrthogonalProjection,
    as_operator,
    convex_hull_disjoint,
    corner_norms,
    eigh,
    membership_mask,
    operator_norm,
    spectral_projection,
)
from app.tolerances import DEFAULT_TOLERANCES, Tolerances

logger = logging.getLogger(__name__)

# Bounds compared against ‖P−Q‖ as strict ceilings rather than ≤ estimates
CEILING_BOUNDS = ("unit_ceiling", "sqrt2_ceiling")


class BoundValue(NamedTuple):
    name: str
    value: Optional[float]
    applicable: bool
    vacuous: bool = False


class DavisKahanCertificate(NamedTuple):
    measured: float
    bound: float
    variant: str


class SpectrumSplit(NamedTuple):
    sigma: IntervalUnion
    rest: IntervalUnion
    gap: float
    system: EigenSystem


class GapCheck(NamedTuple):
    passed: bool
    window: Tuple[float, float]
    witnesses: Tuple[Tuple[float, float], ...]


@dataclass(frozen=True)
class BoundReport:
    d: float
    v_norm: float
    regime: str
    hull: str
    bounds: Tuple[BoundValue, ...]
    measured: CornerNorms
    violations: Tuple[str, ...] = ()
    rank_p: int = 0
    rank_q: int = 0
    v_diag_norm: float = 0.0
    v_off_norm: float = 0.0
    sigma_eigs: Tuple[float, ...] = ()
    rest_eigs: Tuple[float, ...] = ()
    notes: Tuple[str, ...] = ()
    tolerances: Dict[str, float] = field(default_factory=dict)

    @property
    def ratio(self) -> float:
        return self.v_norm / self.d

    def bound(self, name: str) -> Optional[BoundValue]:
        for b in self.bounds:
            if b.name == name:
                return b
        return None

    def to_dict(self) -> dict:
        return {
            "d": self.d,
            "v_norm": self.v_norm,
            "ratio": self.ratio,
            "regime": self.regime,
            "hull": self.hull,
            "rank_p": self.rank_p,
            "rank_q": self.rank_q,
            "v_diag_norm": self.v_diag_norm,
            "v_off_norm": self.v_off_norm,
            "sigma_eigs": list(self.sigma_eigs),
            "Sigma_eigs": list(self.rest_eigs),
            "measured": {
                "pq_perp": self.measured.p_qperp,
                "pperp_q": self.measured.pperp_q,
                "p_minus_q": self.measured.difference,
            },
            "bounds": [b._asdict() for b in self.bounds],
            "violations": list(self.violations),
            "notes": list(self.notes),
            "tolerances": dict(self.tolerances),
        }


# ----------------------------
# Spectrum bookkeeping
# ----------------------------


def split_spectrum(
    system: EigenSystem,
    sigma: IntervalUnion,
    *,
    d_declared: Optional[float] = None,
    tolerances: Tolerances = DEFAULT_TOLERANCES,
) -> SpectrumSplit:
    """Σ = spec(A) \\ σ, with the measured gap d = dist(σ, Σ)."""
    mask, warnings = membership_mask(system, sigma, tolerances=tolerances)
    for warning in warnings:
        logger.warning(warning)
    inside = system.eigenvalues[mask]
    outside = system.eigenvalues[~mask]
    if inside.size == 0:
        raise GapError("No eigenvalue of A lies in σ")
    if outside.size == 0:
        raise GapError("σ contains the whole spectrum of A; Σ is empty")
    sigma_points = IntervalUnion.from_points(inside)
    rest_points = IntervalUnion.from_points(outside)
    gap = sigma_points.distance(rest_points)
    if gap <= tolerances.bnd * max(1.0, system.norm):
        raise GapError(f"Spectral gap d = {gap:.3e} is zero")
    if d_declared is not None and gap < d_declared * (1 - 1e-12):
        raise GapError(f"Measured gap d = {gap!r} is below the declared gap {d_declared!r}")
    return SpectrumSplit(sigma_points, rest_points, gap, system)


def perturbed_projection(
    v: OperatorLike,
    split: SpectrumSplit,
    a: HermitianOperator,
    *,
    s: float = 1.0,
    tolerances: Tolerances = DEFAULT_TOLERANCES,
) -> OrthogonalProjection:
    """E_{A+sV}(U_{d/2}(σ))"""
    v = as_operator(v, tolerances=tolerances)
    perturbed = eigh(HermitianOperator(a.matrix + s * v.matrix), tolerances=tolerances)
    return spectral_projection(
        perturbed, split.sigma.neighborhood(split.gap / 2), tolerances=tolerances
    )


# ----------------------------
# Regimes
# ----------------------------


def classify_ratio(ratio: float, hull: str) -> str:
    if ratio >= CRITICAL_RATIO:
        return REGIME_OVERCRITICAL
    if hull == HULL_SUBORDINATED:
        return REGIME_SUBORDINATED
    if ratio < THEOREM1_RATIO:
        return REGIME_THEOREM1_I
    if hull != HULL_NONE:
        return REGIME_THEOREM1_II
    return REGIME_OPEN_WINDOW


def regime_classify(
    a: OperatorLike,
    v: OperatorLike,
    sigma: IntervalUnion,
    *,
    tolerances: Tolerances = DEFAULT_TOLERANCES,
) -> str:
    a = as_operator(a, tolerances=tolerances)
    v = as_operator(v, tolerances=tolerances)
    split = split_spectrum(eigh(a, tolerances=tolerances), sigma, tolerances=tolerances)
    hull = convex_hull_disjoint(split.sigma, split.rest)
    return classify_ratio(v.norm() / split.gap, hull)


# ----------------------------
# Certificates
# ----------------------------


def _tan2theta(numerator: float, denominator: float) -> float:
    return math.sin(0.5 * math.atan2(numerator, denominator))


def apriori_bounds(
    d: float,
    v_norm: float,
    v_diag_norm: float,
    v_off_norm: float,
    regime: str,
    *,
    hull: Optional[str] = None,
) -> List[BoundValue]:
    if not d > 0:
        raise GapError(f"Gap d must be positive, got {d}")
    if hull is None:
        if regime == REGIME_SUBORDINATED:
            hull = HULL_SUBORDINATED
        elif regime == REGIME_THEOREM1_II:
            hull = "hull-condition"
        else:
            hull = HULL_NONE
    hull_holds = hull != HULL_NONE
    subordinated = hull == HULL_SUBORDINATED
    below_half = 2 * v_norm < d
    off_diagonal = v_diag_norm <= 1e-12 * max(1.0, v_norm)

    candidates = [
        ("corner_generic", v_norm < d, lambda: (math.pi / 2) * v_norm / (d - v_norm)),
        ("corner_hull", v_norm < d and hull_holds, lambda: v_norm / (d - v_norm)),
        (
            "tan2theta_offdiag",
            subordinated and below_half and off_diagonal,
            lambda: _tan2theta(2 * v_norm, d),
        ),
        (
            "tan2theta_refined",
            subordinated and below_half and d - 2 * v_diag_norm > 0,
            lambda: _tan2theta(2 * v_off_norm, d - 2 * v_diag_norm),
        ),
        (
            "tan2theta_general",
            subordinated and below_half,
            lambda: _tan2theta(2 * v_norm, d - 2 * v_norm),
        ),
        ("sqrt2_ceiling", subordinated and below_half, lambda: SQRT2_OVER_2),
        ("unit_ceiling", regime in ASSERTED_REGIMES, lambda: 1.0),
    ]
    bounds = []
    for name, applicable, evaluate in candidates:
        if not applicable:
            bounds.append(BoundValue(name, None, False))
            continue
        value = float(evaluate())
        bounds.append(BoundValue(name, value, True, name not in CEILING_BOUNDS and value >= 1))
    return bounds


def find_violations(
    bounds: Sequence[BoundValue],
    measured: CornerNorms,
    *,
    tolerances: Tolerances = DEFAULT_TOLERANCES,
) -> List[str]:
    slack = tolerances.bound_slack
    violations = []
    for b in bounds:
        if not b.applicable:
            continue
        if b.name == "unit_ceiling":
            failed = measured.difference >= b.value - slack
        elif b.name == "sqrt2_ceiling":
            failed = measured.difference >= b.value + slack
        else:
            failed = max(measured.p_qperp, measured.pperp_q) > b.value + slack
        if failed:
            violations.append(
                f"{b.name}: measured ‖P−Q‖ = {measured.difference!r} vs bound {b.value!r}"
            )
    return violations


def davis_kahan_certificate(
    a: OperatorLike,
    b: OperatorLike,
    delta: IntervalUnion,
    big_delta: IntervalUnion,
    *,
    tolerances: Tolerances = DEFAULT_TOLERANCES,
) -> DavisKahanCertificate:
    """dist(δ, Δ)·‖E_A(δ)E_B(Δ)‖ ≤ (π/2)‖A−B‖, or ≤ ‖A−B‖ under a hull condition."""
    a = as_operator(a, tolerances=tolerances)
    b = as_operator(b, tolerances=tolerances)
    distance = delta.distance(big_delta)
    if distance <= 0:
        raise InputError("dist(δ, Δ) = 0 makes the certificate vacuous")
    e_a = spectral_projection(eigh(a, tolerances=tolerances), delta, tolerances=tolerances)
    e_b = spectral_projection(eigh(b, tolerances=tolerances), big_delta, tolerances=tolerances)
    measured = operator_norm(e_a.matrix @ e_b.matrix)
    difference = operator_norm(a.matrix - b.matrix)
    if convex_hull_disjoint(delta, big_delta) == HULL_NONE:
        return DavisKahanCertificate(measured, (math.pi / 2) * difference / distance, "generic")
    return DavisKahanCertificate(measured, difference / distance, "hull-separated")


def split_diag_offdiag(
    v: OperatorLike, p: OrthogonalProjection
) -> Tuple[HermitianOperator, HermitianOperator]:
    """V_diag = PVP + P⊥VP⊥, V_off = PVP⊥ + P⊥VP"""
    v = as_operator(v)
    if v.dim != p.dim:
        raise InputError(f"Dimension mismatch: V is {v.dim}, P is {p.dim}")
    pm = p.matrix
    perp = np.eye(p.dim) - pm
    diag = pm @ v.matrix @ pm + perp @ v.matrix @ perp
    diag = (diag + diag.conj().T) / 2
    return HermitianOperator(diag), HermitianOperator(v.matrix - diag)


def gap_nonclosing_check(
    a: OperatorLike,
    v: OperatorLike,
    lo: float,
    hi: float,
    s_grid: Sequence[float],
    *,
    tolerances: Tolerances = DEFAULT_TOLERANCES,
) -> GapCheck:
    """No eigenvalue of A+sV in (a + ‖V‖, b − ‖V‖) for s in the grid."""
    a = as_operator(a, tolerances=tolerances)
    v = as_operator(v, tolerances=tolerances)
    v_norm = v.norm()
    if not 2 * v_norm < hi - lo:
        raise InputError(f"2‖V‖ = {2 * v_norm:.6g} is not below b − a = {hi - lo:.6g}")
    unperturbed = eigh(a, tolerances=tolerances).eigenvalues
    inside = unperturbed[(unperturbed > lo) & (unperturbed < hi)]
    if inside.size:
        raise InputError(f"(a, b) = ({lo}, {hi}) contains eigenvalues of A: {inside.tolist()}")
    if any(s < -1 or s > 1 for s in s_grid):
        raise InputError("s-grid must lie in [-1, 1]")
    window = (lo + v_norm, hi - v_norm)
    witnesses = []
    for s in s_grid:
        values = eigh(
            HermitianOperator(a.matrix + s * v.matrix), tolerances=tolerances
        ).eigenvalues
        for value in values[(values > window[0]) & (values < window[1])]:
            witnesses.append((float(s), float(value)))
    return GapCheck(not witnesses, window, tuple(witnesses))


# ----------------------------
# Full pipeline
# ----------------------------


def bound_report(
    a: OperatorLike,
    v: OperatorLike,
    sigma: IntervalUnion,
    *,
    d_declared: Optional[float] = None,
    tolerances: Tolerances = DEFAULT_TOLERANCES,
) -> BoundReport:
    a = as_operator(a, tolerances=tolerances)
    v = as_operator(v, tolerances=tolerances)
    if a.dim != v.dim:
        raise InputError(f"Dimension mismatch: A is {a.dim}, V is {v.dim}")
    split = split_spectrum(
        eigh(a, tolerances=tolerances), sigma, d_declared=d_declared, tolerances=tolerances
    )
    p = spectral_projection(split.system, sigma, tolerances=tolerances)
    q = perturbed_projection(v, split, a, tolerances=tolerances)
    measured = corner_norms(p, q)
    hull = convex_hull_disjoint(split.sigma, split.rest)
    v_norm = v.norm()
    regime = classify_ratio(v_norm / split.gap, hull)
    v_diag, v_off = split_diag_offdiag(v, p)
    v_diag_norm, v_off_norm = v_diag.norm(), v_off.norm()
    bounds = apriori_bounds(
        split.gap, v_norm, v_diag_norm, v_off_norm, regime, hull=hull
    )
    violations = find_violations(bounds, measured, tolerances=tolerances)
    notes = list(q.warnings)
    if regime not in ASSERTED_REGIMES:
        notes.append(NO_CEILING_ASSERTED)
    for b in bounds:
        if b.vacuous:
            notes.append(f"{b.name} is vacuous ({b.value:.6g} ≥ 1)")
    for violation in violations:
        logger.warning(f"Bound violation: {violation}")
    return BoundReport(
        d=split.gap,
        v_norm=v_norm,
        regime=regime,
        hull=hull,
        bounds=tuple(bounds),
        measured=measured,
        violations=tuple(violations),
        rank_p=p.rank,
        rank_q=q.rank,
        v_diag_norm=v_diag_norm,
        v_off_norm=v_off_norm,
        sigma_eigs=tuple(float(x) for x in split.system.eigenvalues if split.sigma.contains(x)),
        rest_eigs=tuple(float(x) for x in split.system.eigenvalues if split.rest.contains(x)),
        notes=tuple(notes),
        tolerances=tolerances.as_dict(),
    )
