from dataclasses import dataclass, field
from functools import cached_property
from typing import NamedTuple, Tuple, Union

import numpy as np
import scipy.linalg

from app.constants import (
    HULL_NONE,
    HULL_SIGMA_FREE,
    HULL_SIGMA_REST_FREE,
    HULL_SUBORDINATED,
    NOT_HERMITIAN_MESSAGE,
)
from app.errors import ConvergenceError, InputError, NotHermitianError, ToleranceError
from app.intervals import IntervalUnion
from app.tolerances import DEFAULT_TOLERANCES, Tolerances


def _frozen(matrix: np.ndarray) -> np.ndarray:
    copy = np.array(matrix, dtype=complex, copy=True)
    copy.setflags(write=False)
    return copy


# ----------------------------
# Domain types
# ----------------------------


@dataclass(frozen=True, eq=False)
class HermitianOperator:
    matrix: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.matrix)
        if m.ndim != 2 or m.shape[0] != m.shape[1] or m.shape[0] == 0:
            raise InputError(f"Operator must be a nonempty square matrix, got {m.shape}")
        if not np.all(np.isfinite(m)):
            raise InputError("Operator has non-finite entries")
        object.__setattr__(self, "matrix", _frozen(m))

    @classmethod
    def from_matrix(
        cls, matrix, *, tolerances: Tolerances = DEFAULT_TOLERANCES
    ) -> "HermitianOperator":
        m = np.asarray(matrix, dtype=complex)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise InputError(f"Operator must be a square matrix, got {m.shape}")
        scale = max(1.0, float(np.max(np.abs(m)))) if m.size else 1.0
        deviation = float(np.max(np.abs(m - m.conj().T))) if m.size else 0.0
        if deviation > tolerances.hermiticity * scale:
            raise NotHermitianError(
                NOT_HERMITIAN_MESSAGE.format(deviation=deviation, tol=tolerances.hermiticity)
            )
        # Store the exactly Hermitian part
        return cls((m + m.conj().T) / 2)

    @classmethod
    def zeros(cls, dim: int) -> "HermitianOperator":
        return cls(np.zeros((dim, dim), dtype=complex))

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def __add__(self, other: "HermitianOperator") -> "HermitianOperator":
        return HermitianOperator(self.matrix + other.matrix)

    def __sub__(self, other: "HermitianOperator") -> "HermitianOperator":
        return HermitianOperator(self.matrix - other.matrix)

    def scaled(self, factor: float) -> "HermitianOperator":
        return HermitianOperator(float(factor) * self.matrix)

    def norm(self) -> float:
        return operator_norm(self.matrix)


OperatorLike = Union[HermitianOperator, np.ndarray]


def as_operator(
    value: OperatorLike, *, tolerances: Tolerances = DEFAULT_TOLERANCES
) -> HermitianOperator:
    if isinstance(value, HermitianOperator):
        return value
    return HermitianOperator.from_matrix(value, tolerances=tolerances)


@dataclass(frozen=True, eq=False)
class EigenSystem:
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    residual: float = 0.0

    def __post_init__(self):
        values = np.array(self.eigenvalues, dtype=float, copy=True)
        values.setflags(write=False)
        object.__setattr__(self, "eigenvalues", values)
        object.__setattr__(self, "eigenvectors", _frozen(self.eigenvectors))

    @property
    def dim(self) -> int:
        return self.eigenvalues.shape[0]

    @property
    def norm(self) -> float:
        return float(np.max(np.abs(self.eigenvalues))) if self.dim else 0.0

    def spectrum(self) -> IntervalUnion:
        return IntervalUnion.from_points(self.eigenvalues)


@dataclass(frozen=True, eq=False)
class OrthogonalProjection:
    matrix: np.ndarray
    rank: int = -1
    warnings: Tuple[str, ...] = field(default=())

    def __post_init__(self):
        m = np.asarray(self.matrix)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise InputError(f"Projection must be a square matrix, got {m.shape}")
        object.__setattr__(self, "matrix", _frozen(m))
        if self.rank < 0:
            object.__setattr__(self, "rank", int(round(float(np.trace(m).real))))

    @classmethod
    def from_basis(cls, basis: np.ndarray, warnings: Tuple[str, ...] = ()):
        basis = np.asarray(basis, dtype=complex)
        projection = cls(basis @ basis.conj().T, basis.shape[1], warnings)
        # Seed the cached basis so kernel and angle computations reuse it
        projection.__dict__["basis"] = _frozen(basis)
        return projection

    @classmethod
    def from_matrix(
        cls, matrix, *, tolerances: Tolerances = DEFAULT_TOLERANCES
    ) -> "OrthogonalProjection":
        projection = cls(np.asarray(matrix, dtype=complex))
        idempotency, symmetry = projection.law_residuals()
        if idempotency > tolerances.proj or symmetry > tolerances.proj:
            raise InputError(
                f"Not an orthogonal projection: ‖Π²−Π‖ = {idempotency:.3e}, "
                f"‖Π−Π*‖ = {symmetry:.3e}"
            )
        trace = float(np.trace(projection.matrix).real)
        if abs(trace - projection.rank) > 1e-8:
            raise InputError(f"Projection trace {trace} is not an integer")
        return projection

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @cached_property
    def basis(self) -> np.ndarray:
        values, vectors = scipy.linalg.eigh(self.matrix)
        return _frozen(vectors[:, values > 0.5])

    def complement(self) -> "OrthogonalProjection":
        return OrthogonalProjection(np.eye(self.dim) - self.matrix, self.dim - self.rank)

    def law_residuals(self) -> Tuple[float, float]:
        m = self.matrix
        return operator_norm(m @ m - m), operator_norm(m - m.conj().T)


class CornerNorms(NamedTuple):
    p_qperp: float
    pperp_q: float
    difference: float


class KernelDims(NamedTuple):
    p_qperp: int
    pperp_q: int
    index: int


# ----------------------------
# Operations
# ----------------------------


def operator_norm(matrix) -> float:
    m = np.asarray(matrix)
    if m.size == 0:
        return 0.0
    return float(np.linalg.norm(m, 2))


def eigh(
    operator: OperatorLike, *, tolerances: Tolerances = DEFAULT_TOLERANCES
) -> EigenSystem:
    a = as_operator(operator, tolerances=tolerances)
    try:
        values, vectors = scipy.linalg.eigh(a.matrix)
    except np.linalg.LinAlgError as e:
        raise ConvergenceError(f"Hermitian eigensolver did not converge: {e}")
    scale = max(1.0, operator_norm(a.matrix))
    reconstructed = (vectors * values) @ vectors.conj().T
    residual = operator_norm(a.matrix - reconstructed)
    orthogonality = operator_norm(vectors.conj().T @ vectors - np.eye(a.dim))
    if residual > tolerances.proj * scale or orthogonality > tolerances.proj:
        raise ConvergenceError(
            f"Eigendecomposition inaccurate: ‖A − UΛU*‖ = {residual:.3e}, "
            f"‖U*U − I‖ = {orthogonality:.3e}",
            residual=residual,
        )
    return EigenSystem(values, vectors, residual)


def membership_mask(
    system: EigenSystem,
    region: IntervalUnion,
    *,
    tolerances: Tolerances = DEFAULT_TOLERANCES,
) -> Tuple[np.ndarray, Tuple[str, ...]]:
    tol = tolerances.bnd * max(1.0, system.norm)
    mask = np.zeros(system.dim, dtype=bool)
    warnings = []
    for k, value in enumerate(system.eigenvalues):
        inside, ambiguous = region.membership(float(value), tol)
        mask[k] = inside
        if ambiguous:
            warnings.append(
                f"eigenvalue {value:.12g} lies within {tol:.1e} of a boundary of the set"
            )
    return mask, tuple(warnings)


def spectral_projection(
    system: EigenSystem,
    region: IntervalUnion,
    *,
    tolerances: Tolerances = DEFAULT_TOLERANCES,
) -> OrthogonalProjection:
    """Π = Σ_{λ_k ∈ S} u_k u_k*"""
    mask, warnings = membership_mask(system, region, tolerances=tolerances)
    return OrthogonalProjection.from_basis(system.eigenvectors[:, mask], warnings)


def set_distance(first: IntervalUnion, second: IntervalUnion) -> float:
    return first.distance(second)


def neighborhood(region: IntervalUnion, eps: float) -> IntervalUnion:
    return region.neighborhood(eps)


def hull_conditions(sigma: IntervalUnion, rest: IntervalUnion) -> Tuple[bool, bool, bool]:
    """(conv.hull(σ)∩Σ = ∅, conv.hull(Σ)∩σ = ∅, hulls disjoint)"""
    sigma_free = not sigma.hull_intersects(rest)
    rest_free = not rest.hull_intersects(sigma)
    hull_a, hull_b = sigma.hull(), rest.hull()
    disjoint = hull_a is None or hull_b is None or not hull_a.intersects(hull_b)
    return sigma_free, rest_free, disjoint


def convex_hull_disjoint(sigma: IntervalUnion, rest: IntervalUnion) -> str:
    if sigma.intersects(rest):
        raise InputError("Hull classification needs disjoint sets")
    sigma_free, rest_free, disjoint = hull_conditions(sigma, rest)
    if disjoint:
        return HULL_SUBORDINATED
    if sigma_free:
        return HULL_SIGMA_FREE
    if rest_free:
        return HULL_SIGMA_REST_FREE
    return HULL_NONE


def _check_same_dim(p: OrthogonalProjection, q: OrthogonalProjection):
    if p.dim != q.dim:
        raise InputError(f"Projection dimensions differ: {p.dim} vs {q.dim}")


def corner_norms(p: OrthogonalProjection, q: OrthogonalProjection) -> CornerNorms:
    """(‖PQ⊥‖, ‖P⊥Q‖, ‖P−Q‖), with ‖P−Q‖ computed on its own."""
    _check_same_dim(p, q)
    identity = np.eye(p.dim)
    p_qperp = operator_norm(p.matrix @ (identity - q.matrix))
    pperp_q = operator_norm((identity - p.matrix) @ q.matrix)
    difference = operator_norm(p.matrix - q.matrix)
    mismatch = abs(difference - max(p_qperp, pperp_q))
    if mismatch > 1e-10:
        raise ToleranceError(
            f"‖P−Q‖ = {difference!r} disagrees with the larger corner norm "
            f"{max(p_qperp, pperp_q)!r}",
            achieved=mismatch,
            tolerance=1e-10,
        )
    return CornerNorms(p_qperp, pperp_q, difference)


def numeric_rank(
    matrix: np.ndarray,
    *,
    scale: float = 0.0,
    tolerances: Tolerances = DEFAULT_TOLERANCES,
) -> int:
    """Singular values above dim·rank_tol·max(scale, s₀).

    Pass the operands' norm as scale when the product itself may be pure roundoff.
    """
    m = np.asarray(matrix)
    if m.size == 0:
        return 0
    singular = scipy.linalg.svdvals(m)
    if singular[0] == 0:
        return 0
    threshold = max(m.shape) * tolerances.rank * max(scale, singular[0])
    return int(np.sum(singular > threshold))


def kernel_dims(
    p: OrthogonalProjection,
    q: OrthogonalProjection,
    *,
    tolerances: Tolerances = DEFAULT_TOLERANCES,
) -> KernelDims:
    """(dim Ker(PQ⊥−I), dim Ker(P⊥Q−I), rank P − rank Q)

    Ker(PQ⊥−I) = Ran P ∩ Ker Q, found as the null space of Q restricted to Ran P.
    """
    _check_same_dim(p, q)
    p_basis, q_basis = p.basis, q.basis
    p_in_ker_q = p_basis.shape[1] - numeric_rank(q.matrix @ p_basis, scale=1.0, tolerances=tolerances)
    q_in_ker_p = q_basis.shape[1] - numeric_rank(p.matrix @ q_basis, scale=1.0, tolerances=tolerances)
    return KernelDims(p_in_ker_q, q_in_ker_p, p.rank - q.rank)


def principal_angles(p: OrthogonalProjection, q: OrthogonalProjection) -> np.ndarray:
    """Principal angles between Ran P and Ran Q, largest first."""
    _check_same_dim(p, q)
    if p.rank == 0 or q.rank == 0:
        return np.zeros(0)
    return scipy.linalg.subspace_angles(p.basis, q.basis)
