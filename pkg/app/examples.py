import logging
import math
from dataclasses import dataclass
from functools import cached_property
from typing import List, NamedTuple, Sequence, Tuple

import numpy as np
from scipy import integrate, optimize, special

from app.bounds import BoundReport, bound_report, split_spectrum
from app.constants import EXAMPLE_EPS_MAX, RESONANCE_THRESHOLD, SQRT2_OVER_2
from app.errors import InputError, ToleranceError
from app.intervals import IntervalUnion
from app.spectral import (
    HermitianOperator,
    OperatorLike,
    as_operator,
    eigh,
    spectral_projection,
)
from app.tolerances import DEFAULT_TOLERANCES, Tolerances

logger = logging.getLogger(__name__)

BRANCH_LEFT = "left"
BRANCH_RIGHT = "right"
BRANCH_BAND = "band"

EXAMPLE_SIGMA = IntervalUnion.from_points([0.0])
RESONANCE_SIGMA = IntervalUnion.from_points([-1.0])

CLOSED_FORM_TOL = 1e-10


# ----------------------------
# The sharp 2×2 family
# ----------------------------


@dataclass(frozen=True)
class TwoByTwoFamily:
    """A = diag(0, 1), V = [[1/2−ε, √ε/2], [√ε/2, −1/2+ε]], σ = {0}, Σ = {1}."""

    epsilon: float

    def __post_init__(self):
        if not 0 < self.epsilon < EXAMPLE_EPS_MAX:
            raise InputError(f"ε must lie in (0, 3/4), got {self.epsilon}")

    @property
    def a(self) -> HermitianOperator:
        return HermitianOperator(np.diag([0.0, 1.0]))

    @property
    def v(self) -> HermitianOperator:
        eps = self.epsilon
        coupling = math.sqrt(eps) / 2
        return HermitianOperator(np.array([[0.5 - eps, coupling], [coupling, -0.5 + eps]]))

    @property
    def _k(self) -> float:
        return 2 * math.sqrt(self.epsilon) + math.sqrt(1 + 4 * self.epsilon)

    @property
    def v_norm_closed(self) -> float:
        eps = self.epsilon
        return 0.5 * math.sqrt(1 - 3 * eps + 4 * eps * eps)

    @property
    def pq_norm_closed(self) -> float:
        return (1 + self._k**2) ** -0.5

    @property
    def q_closed(self) -> np.ndarray:
        k = self._k
        return np.array([[k * k, -k], [-k, 1.0]]) / (1 + k * k)


class Example2x2Record(NamedTuple):
    epsilon: float
    v_norm_closed: float
    v_norm_numeric: float
    pq_norm_closed: float
    pq_norm_numeric: float
    q_closed: np.ndarray
    q_numeric: np.ndarray
    q_mismatch: float
    report: BoundReport

    @property
    def max_mismatch(self) -> float:
        return max(
            abs(self.v_norm_closed - self.v_norm_numeric),
            abs(self.pq_norm_closed - self.pq_norm_numeric),
            self.q_mismatch,
        )

    def to_row(self) -> dict:
        return {
            "epsilon": self.epsilon,
            "v_norm_closed": self.v_norm_closed,
            "v_norm_numeric": self.v_norm_numeric,
            "pq_norm_closed": self.pq_norm_closed,
            "pq_norm_numeric": self.pq_norm_numeric,
            "q_mismatch": self.q_mismatch,
            "regime": self.report.regime,
            "max_mismatch": self.max_mismatch,
        }


def example2x2(
    epsilon: float, *, tolerances: Tolerances = DEFAULT_TOLERANCES
) -> Example2x2Record:
    family = TwoByTwoFamily(epsilon)
    report = bound_report(family.a, family.v, EXAMPLE_SIGMA, tolerances=tolerances)
    perturbed = eigh(family.a + family.v, tolerances=tolerances)
    q_numeric = spectral_projection(
        perturbed, IntervalUnion.open(-0.5, 0.5), tolerances=tolerances
    ).matrix.real
    q_closed = family.q_closed
    record = Example2x2Record(
        epsilon=epsilon,
        v_norm_closed=family.v_norm_closed,
        v_norm_numeric=report.v_norm,
        pq_norm_closed=family.pq_norm_closed,
        pq_norm_numeric=report.measured.difference,
        q_closed=q_closed,
        q_numeric=q_numeric,
        q_mismatch=float(np.max(np.abs(q_closed - q_numeric))),
        report=report,
    )
    if record.max_mismatch > CLOSED_FORM_TOL:
        raise ToleranceError(
            f"Closed form and numeric pipeline disagree at ε = {epsilon}: "
            f"{record.max_mismatch:.3e}",
            achieved=record.max_mismatch,
            tolerance=CLOSED_FORM_TOL,
        )
    return record


class SharpnessRow(NamedTuple):
    epsilon: float
    gap: float
    series: float


def sharpness_sweep(
    epsilons: Sequence[float], *, tolerances: Tolerances = DEFAULT_TOLERANCES
) -> List[SharpnessRow]:
    """√2/2 − ‖P−Q‖ as ε ↓ 0, next to its leading term √(ε/2)."""
    rows = []
    for eps in epsilons:
        record = example2x2(eps, tolerances=tolerances)
        rows.append(
            SharpnessRow(eps, SQRT2_OVER_2 - record.pq_norm_numeric, math.sqrt(eps / 2))
        )
    return rows


# ----------------------------
# The resonance model on L²(0,1) ⊕ ℂ
# ----------------------------


@dataclass(frozen=True)
class ResonanceModel:
    """Midpoint discretisation μ_k = (k − 1/2)/N with weights 1/N."""

    epsilon: float
    grid_size: int

    def __post_init__(self):
        if not self.epsilon > 0:
            raise InputError(f"ε must be positive, got {self.epsilon}")
        if self.grid_size < 2:
            raise InputError(f"grid size must be at least 2, got {self.grid_size}")

    @cached_property
    def grid(self) -> np.ndarray:
        n = self.grid_size
        return (np.arange(1, n + 1) - 0.5) / n

    @cached_property
    def coupling(self) -> np.ndarray:
        """√ε·w(μ_k)/√N, so that ‖coupling‖² → ε∫w² = ε/6."""
        mu = self.grid
        return math.sqrt(self.epsilon) * np.sqrt(mu * (1 - mu)) / math.sqrt(self.grid_size)


def resonance_operators(
    model: ResonanceModel,
) -> Tuple[HermitianOperator, HermitianOperator]:
    n = model.grid_size
    shift = 0.5 + model.epsilon
    a = np.diag(np.append(model.grid, -1.0))
    v = np.zeros((n + 1, n + 1))
    v[:n, :n] = -shift * np.eye(n)
    v[n, n] = shift
    v[:n, n] = model.coupling
    v[n, :n] = model.coupling
    return HermitianOperator(a), HermitianOperator(v)


def v_norm_closed(epsilon: float) -> float:
    """Continuum ‖V‖ = √((1/2 + ε)² + ε/6)"""
    return math.sqrt((0.5 + epsilon) ** 2 + epsilon / 6)


def v_norm_expansion(epsilon: float) -> float:
    return 0.5 + 7 * epsilon / 6


def secular_branch(epsilon: float, lam: float) -> str:
    if lam < -0.5 - epsilon:
        return BRANCH_LEFT
    if lam > 0.5 - epsilon:
        return BRANCH_RIGHT
    return BRANCH_BAND


class SecularEvaluation(NamedTuple):
    epsilon: float
    lam: float
    value: float
    branch: str


def _check_off_band(epsilon: float, lam: float):
    if secular_branch(epsilon, lam) == BRANCH_BAND:
        raise InputError(
            f"λ = {lam} lies in the band [{-0.5 - epsilon}, {0.5 - epsilon}] "
            "where the eigenvalue condition does not apply"
        )


def secular(epsilon: float, lam: float) -> float:
    """λ + 1/2 − ε + ε∫₀¹ μ(1−μ)/(μ − 1/2 − ε − λ) dμ, via the exact antiderivative."""
    _check_off_band(epsilon, lam)
    c = 0.5 + epsilon + lam
    # c(1−c)·log|(1−c)/c|, which tends to 0 as c rounds onto 0 or 1
    integral = (0.5 - c) + c * special.xlogy(1 - c, abs(1 - c)) - (1 - c) * special.xlogy(c, abs(c))
    return lam + 0.5 - epsilon + epsilon * integral


def secular_quadrature(epsilon: float, lam: float) -> float:
    _check_off_band(epsilon, lam)
    c = 0.5 + epsilon + lam
    integral, _ = integrate.quad(
        lambda mu: mu * (1 - mu) / (mu - c), 0.0, 1.0, epsabs=1e-13, epsrel=1e-12, limit=200
    )
    return lam + 0.5 - epsilon + epsilon * integral


def evaluate_secular(epsilon: float, lam: float) -> SecularEvaluation:
    return SecularEvaluation(epsilon, lam, secular(epsilon, lam), secular_branch(epsilon, lam))


def band_edge_values(epsilon: float) -> Tuple[float, float]:
    """Limits of the secular function at −1/2−ε (from the left) and 1/2−ε (from the right)."""
    return -1.5 * epsilon, 1 - 2.5 * epsilon


class RootScan(NamedTuple):
    root_count: int
    roots: Tuple[float, ...]


def eigenvalue_scan(epsilon: float) -> RootScan:
    """Point spectrum of the continuum model from the secular function.

    The function increases strictly on each branch. The left branch stays
    below −3ε/2, and the right branch crosses zero iff 1 − 5ε/2 < 0.
    """
    if not epsilon > 0:
        raise InputError(f"ε must be positive, got {epsilon}")
    if epsilon == RESONANCE_THRESHOLD:
        raise InputError("ε = 2/5 is the degenerate threshold")
    right_edge = band_edge_values(epsilon)[1]
    if right_edge >= 0:
        return RootScan(0, ())
    lo = 0.5 - epsilon + 1e-12
    if secular(epsilon, lo) >= 0:
        return RootScan(1, (lo,))
    hi = lo + 1.0
    while secular(epsilon, hi) <= 0:
        hi = lo + 2 * (hi - lo)
    root = optimize.bisect(lambda lam: secular(epsilon, lam), lo, hi, xtol=1e-12)
    return RootScan(1, (float(root),))


def resonance_threshold(lo: float = 0.31, hi: float = 0.53, tol: float = 1e-7) -> float:
    """Bisects on ε for the change of the secular root count."""
    if eigenvalue_scan(lo).root_count != 0 or eigenvalue_scan(hi).root_count != 1:
        raise InputError(f"Root count does not change on [{lo}, {hi}]")
    while hi - lo > tol:
        mid = (lo + hi) / 2
        if mid == RESONANCE_THRESHOLD:
            return mid
        if eigenvalue_scan(mid).root_count == 0:
            lo = mid
        else:
            hi = mid
    return (lo + hi) / 2


def discrete_point_spectrum(epsilon: float, grid_size: int) -> List[float]:
    """Eigenvalues of A_N + V_N more than one grid spacing outside [−1/2−ε, 1/2−ε].

    A_N + V_N always has one eigenvalue just past each end of the discretised
    band, within O(1/N²) of it. Those are dropped.
    """
    model = ResonanceModel(epsilon, grid_size)
    a, v = resonance_operators(model)
    values = eigh(a + v).eigenvalues
    margin = 1.0 / grid_size
    band_lo = -0.5 - epsilon - margin
    band_hi = 0.5 - epsilon + margin
    return [float(x) for x in values if x < band_lo or x > band_hi]


def overlap_decay(epsilon: float, grid_sizes: Sequence[int]) -> List[Tuple[int, float]]:
    """max_k |⟨e, q_k⟩| per grid size, e the ℂ-block basis vector."""
    if epsilon >= RESONANCE_THRESHOLD:
        logger.warning(f"ε = {epsilon} ≥ 2/5: an eigenvalue exists and overlaps need not decay")
    rows = []
    for n in grid_sizes:
        a, v = resonance_operators(ResonanceModel(epsilon, n))
        vectors = eigh(a + v).eigenvectors
        rows.append((n, float(np.max(np.abs(vectors[-1, :])))))
    return rows


def rescale_instance(
    a: OperatorLike,
    v: OperatorLike,
    sigma: IntervalUnion,
    target_d: float,
    *,
    tolerances: Tolerances = DEFAULT_TOLERANCES,
) -> Tuple[HermitianOperator, HermitianOperator, IntervalUnion]:
    """t ↦ (target_d/d)·t applied to A, V and σ."""
    if not target_d > 0:
        raise InputError(f"target gap must be positive, got {target_d}")
    a = as_operator(a, tolerances=tolerances)
    v = as_operator(v, tolerances=tolerances)
    split = split_spectrum(eigh(a, tolerances=tolerances), sigma, tolerances=tolerances)
    factor = target_d / split.gap
    return a.scaled(factor), v.scaled(factor), sigma.scaled(factor)
