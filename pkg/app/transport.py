import logging
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import List, NamedTuple, Optional, Sequence, Tuple

import numpy as np
import scipy.linalg
from scipy import special

from app.bounds import SpectrumSplit, split_spectrum
from app.constants import CONTOUR_TOO_CLOSE_MESSAGE, RANK_CHANGE_MESSAGE
from app.env import CONTOUR_NODES, TRANSPORT_SCHEME
from app.errors import ContourError, InputError, RankChangeError, ToleranceError
from app.intervals import IntervalUnion
from app.spectral import (
    EigenSystem,
    HermitianOperator,
    OperatorLike,
    OrthogonalProjection,
    as_operator,
    eigh,
    membership_mask,
    operator_norm,
    spectral_projection,
)
from app.tolerances import DEFAULT_TOLERANCES, Tolerances

logger = logging.getLogger(__name__)

METHOD_SPECTRAL = "spectral"
METHOD_CONTOUR = "contour"

SCHEME_MIDPOINT = "midpoint"
SCHEME_MAGNUS4 = "magnus4"

_GAUSS_OFFSET = math.sqrt(3.0) / 6.0


# ----------------------------
# Path and contour
# ----------------------------


@dataclass(frozen=True, eq=False)
class ProjectorPath:
    """P(s) = E_{A+sV}(U_{d/2}(σ)) for s ∈ [0, 1]."""

    base: HermitianOperator
    perturbation: HermitianOperator
    split: SpectrumSplit
    tolerances: Tolerances = field(default=DEFAULT_TOLERANCES)

    @classmethod
    def build(
        cls,
        a: OperatorLike,
        v: OperatorLike,
        sigma: IntervalUnion,
        *,
        tolerances: Tolerances = DEFAULT_TOLERANCES,
    ) -> "ProjectorPath":
        a = as_operator(a, tolerances=tolerances)
        v = as_operator(v, tolerances=tolerances)
        if a.dim != v.dim:
            raise InputError(f"Dimension mismatch: A is {a.dim}, V is {v.dim}")
        split = split_spectrum(eigh(a, tolerances=tolerances), sigma, tolerances=tolerances)
        v_norm = v.norm()
        if not v_norm < split.gap / 2:
            raise InputError(
                f"‖V‖ = {v_norm:.6g} violates ‖V‖ < d/2 = {split.gap / 2:.6g}"
            )
        return cls(a, v, split, tolerances)

    @property
    def dim(self) -> int:
        return self.base.dim

    @property
    def gap(self) -> float:
        return self.split.gap

    @cached_property
    def v_norm(self) -> float:
        return self.perturbation.norm()

    @cached_property
    def region(self) -> IntervalUnion:
        return self.split.sigma.neighborhood(self.gap / 2)

    @cached_property
    def rank(self) -> int:
        mask = membership_mask(self.split.system, self.region, tolerances=self.tolerances)[0]
        return int(np.sum(mask))

    def operator_at(self, s: float) -> np.ndarray:
        return self.base.matrix + s * self.perturbation.matrix

    def eigensystem(self, s: float) -> EigenSystem:
        _check_s(s)
        return eigh(HermitianOperator(self.operator_at(s)), tolerances=self.tolerances)


def _check_s(s: float):
    if not 0.0 <= s <= 1.0:
        raise InputError(f"s must lie in [0, 1], got {s}")


@dataclass(frozen=True, eq=False)
class Contour:
    """Counterclockwise rectangles, one per component of U_{d/2}(σ).

    Each edge is split into Gauss-Legendre panels of half-length at most
    ``panel_half_length``.
    """

    rectangles: Tuple[Tuple[float, float, float], ...]
    nodes_per_panel: int = CONTOUR_NODES
    panel_half_length: float = 1.0

    @classmethod
    def around(cls, path: ProjectorPath, nodes_per_panel: int = CONTOUR_NODES) -> "Contour":
        if nodes_per_panel < 1:
            raise InputError(f"nodes per panel must be positive, got {nodes_per_panel}")
        half_height = path.gap / 2
        clearance = path.gap / 2 - path.v_norm
        rectangles = tuple((i.lo, i.hi, half_height) for i in path.region.intervals)
        return cls(rectangles, nodes_per_panel, min(half_height, clearance))

    @cached_property
    def quadrature(self) -> Tuple[np.ndarray, np.ndarray]:
        """(nodes z_k, weights ω_k) with ∮ f dz ≈ Σ ω_k f(z_k)."""
        x, w = special.roots_legendre(self.nodes_per_panel)
        nodes: List[np.ndarray] = []
        weights: List[np.ndarray] = []
        for lo, hi, height in self.rectangles:
            corners = [
                complex(lo, -height),
                complex(hi, -height),
                complex(hi, height),
                complex(lo, height),
            ]
            for start, end in zip(corners, corners[1:] + corners[:1]):
                panels = max(1, math.ceil(abs(end - start) / (2 * self.panel_half_length)))
                for k in range(panels):
                    a = start + (end - start) * k / panels
                    b = start + (end - start) * (k + 1) / panels
                    nodes.append(a + (b - a) * (x + 1) / 2)
                    weights.append(w * (b - a) / 2)
        return np.concatenate(nodes), np.concatenate(weights)

    @property
    def node_count(self) -> int:
        return self.quadrature[0].shape[0]


# ----------------------------
# Projector, derivative, generator
# ----------------------------


def path_projection(path: ProjectorPath, s: float) -> OrthogonalProjection:
    system = path.eigensystem(s)
    projection = spectral_projection(system, path.region, tolerances=path.tolerances)
    if projection.rank != path.rank:
        raise RankChangeError(
            RANK_CHANGE_MESSAGE.format(expected=path.rank, actual=projection.rank, s=s), s
        )
    return projection


def _spectral_derivative(path: ProjectorPath, s: float) -> np.ndarray:
    system = path.eigensystem(s)
    chi = membership_mask(system, path.region, tolerances=path.tolerances)[0].astype(float)
    values, vectors = system.eigenvalues, system.eigenvectors
    jumps = chi[:, None] - chi[None, :]
    spacing = values[:, None] - values[None, :]
    # Same-side pairs (including degenerate ones) contribute nothing
    quotient = np.divide(jumps, spacing, out=np.zeros_like(spacing), where=jumps != 0)
    rotated = vectors.conj().T @ path.perturbation.matrix @ vectors
    return vectors @ (rotated * quotient) @ vectors.conj().T


def _contour_derivative(path: ProjectorPath, s: float, contour: Contour) -> np.ndarray:
    nodes, weights = contour.quadrature
    operator = path.operator_at(s)
    values = path.eigensystem(s).eigenvalues
    distances = np.abs(nodes[:, None] - values[None, :])
    closest = np.unravel_index(np.argmin(distances), distances.shape)
    threshold = 1e-8 * max(1.0, path.base.norm())
    if distances[closest] < threshold:
        raise ContourError(
            CONTOUR_TOO_CLOSE_MESSAGE.format(
                z=nodes[closest[0]], distance=distances[closest], s=s
            )
        )
    shifted = operator[None, :, :] - nodes[:, None, None] * np.eye(path.dim)[None, :, :]
    resolvents = np.linalg.inv(shifted)
    integrand = resolvents @ path.perturbation.matrix @ resolvents
    derivative = np.einsum("k,kij->ij", weights, integrand) / (2j * math.pi)
    return derivative


def projector_derivative(
    path: ProjectorPath,
    s: float,
    method: str = METHOD_SPECTRAL,
    *,
    contour: Optional[Contour] = None,
) -> np.ndarray:
    """P′(s), by divided differences in the eigenbasis or by the resolvent integral

    P′(s) = (1/2πi) ∮ (A + sV − z)⁻¹ V (A + sV − z)⁻¹ dz.
    """
    _check_s(s)
    if method == METHOD_SPECTRAL:
        derivative = _spectral_derivative(path, s)
    elif method == METHOD_CONTOUR:
        derivative = _contour_derivative(path, s, contour or Contour.around(path))
    else:
        raise InputError(f"Unknown derivative method: {method}")
    return (derivative + derivative.conj().T) / 2


def kato_generator(
    path: ProjectorPath,
    s: float,
    method: str = METHOD_SPECTRAL,
    *,
    contour: Optional[Contour] = None,
) -> np.ndarray:
    """H(s) = P′(s)P(s) − P(s)P′(s)"""
    derivative = projector_derivative(path, s, method, contour=contour)
    projection = path_projection(path, s).matrix
    generator = derivative @ projection - projection @ derivative
    return (generator - generator.conj().T) / 2


# ----------------------------
# Transport
# ----------------------------


class StepRecord(NamedTuple):
    s: float
    generator_norm: float
    step_residual: float


class TransportResult(NamedTuple):
    w: np.ndarray
    residual: float
    unitarity: float
    max_path_residual: float
    steps: int
    scheme: str
    trace: Tuple[StepRecord, ...]


def _step_exponent(
    path: ProjectorPath,
    s: float,
    h: float,
    scheme: str,
    method: str,
    contour: Contour,
) -> Tuple[np.ndarray, float]:
    if scheme == SCHEME_MIDPOINT:
        generator = kato_generator(path, s + h / 2, method, contour=contour)
        return h * generator, operator_norm(generator)
    if scheme == SCHEME_MAGNUS4:
        first = kato_generator(path, s + h * (0.5 - _GAUSS_OFFSET), method, contour=contour)
        second = kato_generator(path, s + h * (0.5 + _GAUSS_OFFSET), method, contour=contour)
        commutator = second @ first - first @ second
        exponent = (h / 2) * (first + second) + (math.sqrt(3.0) / 12) * h * h * commutator
        return exponent, max(operator_norm(first), operator_norm(second))
    raise InputError(f"Unknown transport scheme: {scheme}")


def enforce_tolerances(result: TransportResult, tolerances: Tolerances = DEFAULT_TOLERANCES):
    if result.unitarity > tolerances.unit:
        raise ToleranceError(
            f"‖W*W − I‖ = {result.unitarity:.3e} exceeds {tolerances.unit:.1e}",
            achieved=result.unitarity,
            tolerance=tolerances.unit,
        )
    if result.residual > tolerances.transport:
        raise ToleranceError(
            f"‖Q − WPW*‖ = {result.residual:.3e} exceeds {tolerances.transport:.1e} "
            f"at {result.steps} steps; raise the step count",
            achieved=result.residual,
            tolerance=tolerances.transport,
        )
    if result.max_path_residual > tolerances.path:
        raise ToleranceError(
            f"‖P(s) − X(s)PX(s)*‖ reached {result.max_path_residual:.3e} along the path",
            achieved=result.max_path_residual,
            tolerance=tolerances.path,
        )


def transport_unitary(
    path: ProjectorPath,
    steps: int,
    *,
    scheme: str = TRANSPORT_SCHEME,
    method: str = METHOD_SPECTRAL,
    contour: Optional[Contour] = None,
    enforce: bool = True,
    logger: logging.Logger = logger,
) -> TransportResult:
    """Integrates X′ = H(s)X, X(0) = I over [0, 1]; W = X(1) satisfies Q = WPW*."""
    if steps < 1:
        raise InputError(f"steps must be at least 1, got {steps}")
    if method == METHOD_CONTOUR and contour is None:
        contour = Contour.around(path)
    tolerances = path.tolerances
    p0 = path_projection(path, 0.0).matrix
    w = np.eye(path.dim, dtype=complex)
    h = 1.0 / steps
    trace = []
    max_path_residual = 0.0
    for k in range(steps):
        s = k * h
        exponent, generator_norm = _step_exponent(path, s, h, scheme, method, contour)
        # Exponent is skew-Hermitian, so the update is unitary
        w = scipy.linalg.expm(exponent) @ w
        s_next = 1.0 if k == steps - 1 else (k + 1) * h
        target = path_projection(path, s_next).matrix
        step_residual = operator_norm(target - w @ p0 @ w.conj().T)
        max_path_residual = max(max_path_residual, step_residual)
        trace.append(StepRecord(s_next, generator_norm, step_residual))
        logger.debug(f"s={s_next:.4f} ‖H‖={generator_norm:.3e} residual={step_residual:.3e}")

    residual = trace[-1].step_residual
    unitarity = operator_norm(w.conj().T @ w - np.eye(path.dim))
    logger.info(
        f"Transport with {steps} {scheme} steps: ‖Q−WPW*‖ = {residual:.3e}, "
        f"‖W*W−I‖ = {unitarity:.3e}"
    )
    result = TransportResult(
        w, residual, unitarity, max_path_residual, steps, scheme, tuple(trace)
    )
    if enforce:
        enforce_tolerances(result, tolerances)
    return result


def derivative_cross_check(
    path: ProjectorPath,
    s_values: Sequence[float],
    *,
    contour: Optional[Contour] = None,
) -> float:
    """Largest ‖P′_spectral(s) − P′_contour(s)‖ over the given s-values."""
    contour = contour or Contour.around(path)
    worst = 0.0
    for s in s_values:
        spectral = projector_derivative(path, s, METHOD_SPECTRAL)
        integral = projector_derivative(path, s, METHOD_CONTOUR, contour=contour)
        worst = max(worst, operator_norm(spectral - integral))
    return worst


def convergence_order(
    path: ProjectorPath,
    steps_list: Sequence[int],
    *,
    scheme: str = TRANSPORT_SCHEME,
) -> List[Tuple[int, float, float]]:
    """(steps, endpoint residual, observed order against the previous entry)"""
    rows = []
    previous = None
    for steps in steps_list:
        result = transport_unitary(path, steps, scheme=scheme, enforce=False)
        order = math.nan
        if previous is not None and result.residual > 0 and previous[1] > 0:
            order = math.log(previous[1] / result.residual) / math.log(steps / previous[0])
        rows.append((steps, result.residual, order))
        previous = (steps, result.residual)
    return rows
