import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from typing import Dict, List, NamedTuple, Optional, Sequence, Tuple

import numpy as np
import scipy.linalg

from app.bounds import BoundReport, bound_report, perturbed_projection, split_spectrum
from app.constants import (
    CRITICAL_RATIO,
    REGIME_OPEN_WINDOW,
    REGIME_SUBORDINATED,
    SQRT2_OVER_2,
    VIOLATION_CANDIDATE,
)
from app.env import MAX_DIM, SEARCH_ITERS
from app.errors import BoundViolationError, InputError
from app.intervals import IntervalUnion
from app.spectral import (
    HermitianOperator,
    OperatorLike,
    as_operator,
    convex_hull_disjoint,
    eigh,
    operator_norm,
    principal_angles,
    spectral_projection,
)
from app.tolerances import DEFAULT_TOLERANCES, Tolerances

logger = logging.getLogger(__name__)

LAYOUT_SUBORDINATED = "subordinated"
LAYOUT_SIGMA_FREE = "sigma-hull-free"
LAYOUT_SIGMA_REST_FREE = "Sigma-hull-free"
LAYOUT_INTERLEAVED = "interleaved"

# Block pattern along the real line: True for σ, False for Σ
LAYOUT_BLOCKS = {
    LAYOUT_SUBORDINATED: (True, False),
    LAYOUT_SIGMA_FREE: (False, True, False),
    LAYOUT_SIGMA_REST_FREE: (True, False, True),
    LAYOUT_INTERLEAVED: (True, False, True, False),
}

CEILING_MARGIN = 1e-6
MIN_STEP = 1e-10


# ----------------------------
# Instances
# ----------------------------


@dataclass(frozen=True)
class InstanceSpec:
    dim: int
    sigma_eigs: Tuple[float, ...]
    rest_eigs: Tuple[float, ...]
    d: float
    v_ratio: float
    seed: int
    layout: str = ""

    def __post_init__(self):
        object.__setattr__(self, "sigma_eigs", tuple(float(x) for x in self.sigma_eigs))
        object.__setattr__(self, "rest_eigs", tuple(float(x) for x in self.rest_eigs))
        if len(self.sigma_eigs) + len(self.rest_eigs) != self.dim:
            raise InputError(
                f"dim = {self.dim} but {len(self.sigma_eigs)} + {len(self.rest_eigs)} "
                "eigenvalues were given"
            )
        if not self.sigma_eigs or not self.rest_eigs:
            raise InputError("Both σ and Σ need at least one eigenvalue")
        if self.dim > MAX_DIM:
            raise InputError(f"dim = {self.dim} exceeds the ceiling {MAX_DIM}")
        if not self.d > 0 or self.v_ratio < 0:
            raise InputError(f"Need d > 0 and v_ratio ≥ 0, got d = {self.d}, {self.v_ratio}")
        if self.measured_gap < self.d * (1 - 1e-12):
            raise InputError(
                f"σ and Σ are {self.measured_gap!r} apart, below the declared gap {self.d!r}"
            )

    @property
    def measured_gap(self) -> float:
        return self.sigma.distance(self.rest)

    @property
    def sigma(self) -> IntervalUnion:
        return IntervalUnion.from_points(self.sigma_eigs)

    @property
    def rest(self) -> IntervalUnion:
        return IntervalUnion.from_points(self.rest_eigs)

    def to_dict(self) -> dict:
        data = asdict(self)
        data["Sigma_eigs"] = data.pop("rest_eigs")
        return data


def haar_unitary(dim: int, rng: np.random.Generator) -> np.ndarray:
    """QR of a complex Ginibre matrix with the phases of R's diagonal fixed."""
    z = (rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))) / math.sqrt(2)
    q, r = scipy.linalg.qr(z)
    phases = np.diagonal(r) / np.abs(np.diagonal(r))
    return q * phases


def random_hermitian(dim: int, rng: np.random.Generator) -> np.ndarray:
    z = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
    return (z + z.conj().T) / 2


def _on_sphere(matrix: np.ndarray, radius: float) -> np.ndarray:
    norm = operator_norm(matrix)
    if radius == 0 or norm == 0:
        return np.zeros_like(matrix)
    return matrix * (radius / norm)


def random_instance(spec: InstanceSpec) -> Tuple[HermitianOperator, HermitianOperator]:
    rng = np.random.default_rng(spec.seed)
    u = haar_unitary(spec.dim, rng)
    values = np.array(spec.sigma_eigs + spec.rest_eigs)
    a = (u * values) @ u.conj().T
    v = _on_sphere(random_hermitian(spec.dim, rng), spec.v_ratio * spec.d)
    return HermitianOperator((a + a.conj().T) / 2), HermitianOperator(v)


def sample_instance_spec(
    dim: int, ratio: float, layout: str, seed: int, *, d: float = 1.0
) -> InstanceSpec:
    """Blocks alternate between σ and Σ per the layout; neighbours are exactly d apart."""
    if layout not in LAYOUT_BLOCKS:
        raise InputError(f"Unknown layout: {layout}")
    blocks = LAYOUT_BLOCKS[layout]
    if dim < len(blocks):
        raise InputError(f"Layout {layout} needs dim ≥ {len(blocks)}, got {dim}")
    rng = np.random.default_rng(seed)
    counts = np.ones(len(blocks), dtype=int)
    for index in rng.integers(0, len(blocks), size=dim - len(blocks)):
        counts[index] += 1
    sigma, rest = [], []
    start = 0.0
    for is_sigma, count in zip(blocks, counts):
        width = float(rng.uniform(0, 2 * d)) if count > 1 else 0.0
        inner = np.sort(rng.uniform(start, start + width, size=count))
        inner[0] = start
        if count > 1:
            inner[-1] = start + width
        (sigma if is_sigma else rest).extend(inner.tolist())
        start += width + d
    return InstanceSpec(dim, tuple(sigma), tuple(rest), d, ratio, seed, layout)


# ----------------------------
# Trial records
# ----------------------------


@dataclass(frozen=True)
class TrialRecord:
    spec: InstanceSpec
    regime: str
    pq_norm: float
    pq_perp: float
    pperp_q: float
    bounds: Dict[str, Optional[float]] = field(default_factory=dict)
    violations: Tuple[str, ...] = ()
    flags: Tuple[str, ...] = ()
    best_iterate: bool = False
    wall_time: float = 0.0
    trace: Tuple[float, ...] = ()

    def to_dict(self) -> dict:
        data = asdict(self)
        data["spec"] = self.spec.to_dict()
        data["trace"] = list(self.trace)
        return data

    def to_row(self) -> dict:
        """Flat sweep row: seed, dim, d, v_norm, regime, measured_pq, one column per bound, violation_count."""
        row = {
            "seed": self.spec.seed,
            "dim": self.spec.dim,
            "d": self.spec.d,
            "v_norm": self.spec.v_ratio * self.spec.d,
            "regime": self.regime,
            "measured_pq": self.pq_norm,
        }
        row.update(self.bounds)
        row["violation_count"] = len(self.violations)
        return row


def _record_from_report(
    spec: InstanceSpec, report: BoundReport, started: float, **kwargs
) -> TrialRecord:
    return TrialRecord(
        spec=spec,
        regime=report.regime,
        pq_norm=report.measured.difference,
        pq_perp=report.measured.p_qperp,
        pperp_q=report.measured.pperp_q,
        bounds={b.name: b.value for b in report.bounds if b.applicable},
        violations=report.violations,
        wall_time=time.perf_counter() - started,
        **kwargs,
    )


def run_trial(spec: InstanceSpec, *, tolerances: Tolerances = DEFAULT_TOLERANCES) -> TrialRecord:
    started = time.perf_counter()
    a, v = random_instance(spec)
    report = bound_report(a, v, spec.sigma, d_declared=spec.d, tolerances=tolerances)
    return _record_from_report(spec, report, started)


def reverify_pq_norm(
    a: OperatorLike,
    v: OperatorLike,
    sigma: IntervalUnion,
    *,
    tolerances: Tolerances = DEFAULT_TOLERANCES,
) -> float:
    """‖P−Q‖ through principal angles at tightened tolerances."""
    tight = tolerances.tightened()
    a = as_operator(a, tolerances=tight)
    split = split_spectrum(eigh(a, tolerances=tight), sigma, tolerances=tight)
    p = spectral_projection(split.system, sigma, tolerances=tight)
    q = perturbed_projection(v, split, a, tolerances=tight)
    if p.rank != q.rank:
        return 1.0
    angles = principal_angles(p, q)
    return float(np.sin(angles[0])) if angles.size else 0.0


# ----------------------------
# Extremal search
# ----------------------------


def _objective(a: np.ndarray, v: np.ndarray, spec: InstanceSpec, tolerances: Tolerances) -> float:
    report = bound_report(
        HermitianOperator(a), HermitianOperator(v), spec.sigma, tolerances=tolerances
    )
    return report.measured.difference


def _moved_spec(spec: InstanceSpec, rng: np.random.Generator, scale: float) -> Optional[InstanceSpec]:
    """Jitters eigenvalue placements; None when the gap or the hull layout breaks."""
    sigma = np.array(spec.sigma_eigs) + scale * spec.d * rng.standard_normal(len(spec.sigma_eigs))
    rest = np.array(spec.rest_eigs) + scale * spec.d * rng.standard_normal(len(spec.rest_eigs))
    try:
        moved = replace(spec, sigma_eigs=tuple(sigma), rest_eigs=tuple(rest))
    except InputError:
        return None
    if convex_hull_disjoint(moved.sigma, moved.rest) != convex_hull_disjoint(spec.sigma, spec.rest):
        return None
    return moved


def maximize_pq_norm(
    spec: InstanceSpec,
    iters: int = SEARCH_ITERS,
    *,
    step: float = 0.3,
    patience: int = 8,
    move_eigenvalues: bool = False,
    tolerances: Tolerances = DEFAULT_TOLERANCES,
    logger: logging.Logger = logger,
) -> TrialRecord:
    """Random-direction hill climbing on {V Hermitian : ‖V‖ = v_ratio·d}.

    The step doubles on an accepted proposal (capped at its starting value) and halves
    after `patience` rejections in a row. Below MIN_STEP it restarts at the starting value.
    """
    if spec.v_ratio >= CRITICAL_RATIO:
        raise InputError(f"v_ratio = {spec.v_ratio} must stay below 1/2")
    started = time.perf_counter()
    rng = np.random.default_rng(np.random.SeedSequence([spec.seed, 1]))
    a, v = random_instance(spec)
    current_spec = spec
    current_a, current_v = a.matrix, v.matrix
    best = _objective(current_a, current_v, spec, tolerances)
    trace = [best]
    unitary = haar_unitary(spec.dim, np.random.default_rng(spec.seed))
    radius = spec.v_ratio * spec.d
    current_step, rejections = step, 0
    for iteration in range(iters):
        if radius == 0:
            trace.append(best)
            continue
        candidate_spec = current_spec
        candidate_a = current_a
        if move_eigenvalues and rng.random() < 0.25:
            moved = _moved_spec(current_spec, rng, 0.05 * current_step / step)
            if moved is not None:
                candidate_spec = moved
                values = np.array(moved.sigma_eigs + moved.rest_eigs)
                candidate_a = (unitary * values) @ unitary.conj().T
                candidate_a = (candidate_a + candidate_a.conj().T) / 2
        direction = _on_sphere(random_hermitian(spec.dim, rng), radius)
        candidate_v = _on_sphere(current_v + current_step * direction, radius)
        value = _objective(candidate_a, candidate_v, candidate_spec, tolerances)
        if value > best:
            best = value
            current_spec, current_a, current_v = candidate_spec, candidate_a, candidate_v
            current_step, rejections = min(2 * current_step, step), 0
            logger.debug(f"iteration {iteration}: ‖P−Q‖ = {best:.10f}")
        else:
            rejections += 1
            if rejections >= patience:
                current_step, rejections = current_step / 2, 0
                if current_step < MIN_STEP:
                    current_step = step
        trace.append(best)

    report = bound_report(
        HermitianOperator(current_a),
        HermitianOperator(current_v),
        current_spec.sigma,
        tolerances=tolerances,
    )
    flags = []
    ceilings = [1.0] + ([SQRT2_OVER_2] if report.regime == REGIME_SUBORDINATED else [])
    if any(best >= ceiling - CEILING_MARGIN for ceiling in ceilings):
        verified = reverify_pq_norm(
            current_a, current_v, current_spec.sigma, tolerances=tolerances
        )
        logger.warning(f"Candidate near a ceiling: ‖P−Q‖ = {best!r}, re-verified {verified!r}")
        if any(verified >= ceiling - tolerances.bound_slack for ceiling in ceilings):
            flags.append(VIOLATION_CANDIDATE)
    return _record_from_report(
        current_spec,
        report,
        started,
        flags=tuple(flags),
        best_iterate=True,
        trace=tuple(trace),
    )


# ----------------------------
# Scans
# ----------------------------


def derive_seed(*entropy: int) -> int:
    return int(np.random.SeedSequence(list(entropy)).generate_state(1, dtype=np.uint64)[0])


class CellSummary(NamedTuple):
    dim: int
    ratio: float
    layout: str
    cell_seed: int
    trials: int
    regimes: Dict[str, int]
    violation_count: int
    max_pq_norm: float
    argmax_seed: int
    worst_slack: Dict[str, float]
    skipped: str = ""


@dataclass(frozen=True)
class ScanSummary:
    master_seed: int
    cells: Tuple[CellSummary, ...]
    records: Tuple[TrialRecord, ...]
    violations: Tuple[Tuple[int, str], ...]

    @property
    def violation_count(self) -> int:
        return len(self.violations)

    def manifest(self) -> dict:
        return {
            "master_seed": self.master_seed,
            "cells": [
                {
                    "dim": c.dim,
                    "ratio": c.ratio,
                    "layout": c.layout,
                    "cell_seed": c.cell_seed,
                    "trial_seeds": [
                        r.spec.seed
                        for r in self.records
                        if (r.spec.dim, r.spec.v_ratio, r.spec.layout) == (c.dim, c.ratio, c.layout)
                    ],
                }
                for c in self.cells
            ],
        }

    def maxima_by_dim(self, regime: str = REGIME_OPEN_WINDOW) -> Dict[int, float]:
        maxima: Dict[int, float] = {}
        for r in self.records:
            if r.regime == regime:
                maxima[r.spec.dim] = max(maxima.get(r.spec.dim, 0.0), r.pq_norm)
        return maxima


def _cell_summary(
    dim: int, ratio: float, layout: str, cell_seed: int, records: Sequence[TrialRecord]
) -> CellSummary:
    regimes: Dict[str, int] = {}
    worst_slack: Dict[str, float] = {}
    for r in records:
        regimes[r.regime] = regimes.get(r.regime, 0) + 1
        for name, value in r.bounds.items():
            slack = value - r.pq_norm
            worst_slack[name] = min(worst_slack.get(name, math.inf), slack)
    best = max(records, key=lambda r: r.pq_norm)
    return CellSummary(
        dim,
        ratio,
        layout,
        cell_seed,
        len(records),
        regimes,
        sum(1 for r in records if r.violations),
        best.pq_norm,
        best.spec.seed,
        worst_slack,
    )


def bound_violation_scan(
    n_trials: int,
    dims: Sequence[int],
    ratios: Sequence[float],
    master_seed: int,
    *,
    layouts: Sequence[str] = tuple(LAYOUT_BLOCKS),
    jobs: int = 1,
    fail: bool = True,
    tolerances: Tolerances = DEFAULT_TOLERANCES,
    logger: logging.Logger = logger,
) -> ScanSummary:
    """Runs n_trials per (dim, ratio, layout) cell and checks every applicable bound."""
    cells: List[CellSummary] = []
    records: List[TrialRecord] = []
    violations: List[Tuple[int, str]] = []
    cell_index = 0
    for dim in dims:
        for ratio in ratios:
            for layout in layouts:
                cell_seed = derive_seed(master_seed, cell_index)
                cell_index += 1
                if dim < len(LAYOUT_BLOCKS.get(layout, ())) or dim > MAX_DIM:
                    reason = f"layout {layout} infeasible at dim {dim}"
                    logger.warning(f"Skipping cell: {reason}")
                    cells.append(
                        CellSummary(dim, ratio, layout, cell_seed, 0, {}, 0, 0.0, 0, {}, reason)
                    )
                    continue
                specs = [
                    sample_instance_spec(dim, ratio, layout, derive_seed(cell_seed, t))
                    for t in range(n_trials)
                ]
                with ThreadPoolExecutor(max_workers=max(1, jobs)) as pool:
                    cell_records = list(pool.map(lambda s: run_trial(s, tolerances=tolerances), specs))
                for r in cell_records:
                    for violation in r.violations:
                        violations.append((r.spec.seed, violation))
                records.extend(cell_records)
                summary = _cell_summary(dim, ratio, layout, cell_seed, cell_records)
                cells.append(summary)
                logger.info(
                    f"cell dim={dim} ratio={ratio} layout={layout}: "
                    f"max ‖P−Q‖ = {summary.max_pq_norm:.6f}, violations = {summary.violation_count}"
                )
    result = ScanSummary(master_seed, tuple(cells), tuple(records), tuple(violations))
    if violations and fail:
        seed, message = violations[0]
        raise BoundViolationError(
            f"{len(violations)} bound violation(s); first at seed {seed}: {message}", seed=seed
        )
    return result


# ----------------------------
# Overcritical probe
# ----------------------------


class WindowScan(NamedTuple):
    min_norm: float
    argmin_window: Tuple[int, int]
    windows: int


def window_scan(
    a: OperatorLike,
    v: OperatorLike,
    sigma: IntervalUnion,
    *,
    tolerances: Tolerances = DEFAULT_TOLERANCES,
) -> WindowScan:
    """min over contiguous eigenvalue windows Δ of ‖E_A(σ) − E_{A+V}(Δ)‖.

    With C = Y*U_Δ (Y a basis of Ran P) and G = CC*, ‖PQ⊥‖² = 1 − λ_min(G), and
    ‖P⊥Q‖² = 1 − σ_min(C)² when |Δ| ≤ rank P, else 1.
    """
    a = as_operator(a, tolerances=tolerances)
    v = as_operator(v, tolerances=tolerances)
    p = spectral_projection(eigh(a, tolerances=tolerances), sigma, tolerances=tolerances)
    vectors = eigh(a + v, tolerances=tolerances).eigenvectors
    n, r = vectors.shape[0], p.rank
    if r == 0:
        raise InputError("σ captures no eigenvalue of A")
    overlaps = p.basis.conj().T @ vectors
    outer = np.einsum("ik,jk->kij", overlaps, overlaps.conj())
    prefix = np.concatenate([np.zeros((1, r, r), dtype=complex), np.cumsum(outer, axis=0)])
    starts, ends = np.triu_indices(n + 1, k=1)
    grams = prefix[ends] - prefix[starts]
    grams = (grams + np.conj(np.swapaxes(grams, 1, 2))) / 2
    eigenvalues = np.clip(np.linalg.eigvalsh(grams), 0.0, 1.0)
    sizes = ends - starts
    smallest = eigenvalues[:, 0]
    p_qperp = np.where(sizes >= r, 1 - smallest, 1.0)
    # The |Δ| largest eigenvalues of G are C's squared singular values
    kth = eigenvalues[np.arange(len(sizes)), np.clip(r - sizes, 0, r - 1)]
    pperp_q = np.where(sizes <= r, 1 - kth, 1.0)
    norms = np.sqrt(np.clip(np.maximum(p_qperp, pperp_q), 0.0, 1.0))
    best = int(np.argmin(norms))
    return WindowScan(float(norms[best]), (int(starts[best]), int(ends[best])), len(sizes))


def overcritical_probe(
    spec: InstanceSpec,
    *,
    tolerances: Tolerances = DEFAULT_TOLERANCES,
    logger: logging.Logger = logger,
) -> TrialRecord:
    if spec.v_ratio < CRITICAL_RATIO:
        raise InputError(f"v_ratio = {spec.v_ratio} is not overcritical (needs ≥ 1/2)")
    started = time.perf_counter()
    a, v = random_instance(spec)
    report = bound_report(a, v, spec.sigma, d_declared=spec.d, tolerances=tolerances)
    scan = window_scan(a, v, spec.sigma, tolerances=tolerances)
    logger.info(
        f"Overcritical probe seed={spec.seed}: min over {scan.windows} windows of "
        f"‖P − E(Δ)‖ = {scan.min_norm:.6f}"
    )
    record = _record_from_report(spec, report, started)
    return replace(record, bounds={**record.bounds, "min_window_norm": scan.min_norm})
