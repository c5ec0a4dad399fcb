import argparse
import logging
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

from app.bounds import BoundReport, bound_report
from app.constants import (
    EXIT_ASSERTION,
    EXIT_OK,
    EXIT_USAGE,
    REGIME_SUBORDINATED,
    RESONANCE_THRESHOLD,
    SQRT2_OVER_2,
)
from app.env import (
    MASTER_SEED,
    SEARCH_ITERS,
    SPECGAP_JOBS,
    SPECGAP_OUT_DIR,
    STEPS,
    TRANSPORT_SCHEME,
)
from app.errors import BoundViolationError, InputError, SpecGapError, ToleranceError
from app.examples import (
    EXAMPLE_SIGMA,
    TwoByTwoFamily,
    discrete_point_spectrum,
    eigenvalue_scan,
    example2x2,
    overlap_decay,
    resonance_operators,
    resonance_threshold,
    sharpness_sweep,
    ResonanceModel,
    v_norm_closed,
)
from app.explorer import (
    LAYOUT_BLOCKS,
    LAYOUT_INTERLEAVED,
    LAYOUT_SUBORDINATED,
    bound_violation_scan,
    derive_seed,
    maximize_pq_norm,
    random_instance,
    sample_instance_spec,
)
from app.io_formats import (
    Instance,
    append_jsonl,
    dump_instance,
    load_instance,
    read_json,
    write_csv,
    write_json,
)
from app.tolerances import DEFAULT_TOLERANCES, Tolerances
from app.transport import ProjectorPath, enforce_tolerances, transport_unitary

logger = logging.getLogger(__name__)

TRIAL_COLUMNS = ["seed", "dim", "d", "v_norm", "regime", "measured_pq"]


# ----------------------------
# Run configuration
# ----------------------------


@dataclass(frozen=True)
class RunConfig:
    subcommand: str = ""
    out_dir: str = SPECGAP_OUT_DIR
    seed: int = MASTER_SEED
    steps: int = STEPS
    jobs: int = SPECGAP_JOBS
    scheme: str = TRANSPORT_SCHEME
    tolerances: Dict[str, float] = field(default_factory=dict)
    instance: Optional[str] = None
    # Seeded instance for bounds/transport when no file is given
    dim: int = 4
    ratio: float = 0.3
    layout: str = LAYOUT_SUBORDINATED
    epsilons: Tuple[float, ...] = (0.01, 0.1, 0.25, 0.5, 0.7)
    grid_sizes: Tuple[int, ...] = (100, 200, 400, 800)
    resonance_epsilons: Tuple[float, ...] = (0.1, 0.2, 0.3, 0.39, 0.41, 0.5)
    trials: int = 200
    dims: Tuple[int, ...] = (4, 8, 16)
    ratios: Tuple[float, ...] = (0.1, 0.3, 0.388)
    layouts: Tuple[str, ...] = tuple(LAYOUT_BLOCKS)
    search_dims: Tuple[int, ...] = (4, 8)
    search_ratio: float = 0.45
    search_runs: int = 4
    search_iters: int = SEARCH_ITERS

    def __post_init__(self):
        for name in ("epsilons", "grid_sizes", "resonance_epsilons", "dims", "ratios", "layouts", "search_dims"):
            value = getattr(self, name)
            if not isinstance(value, (list, tuple)):
                raise InputError(f"config field {name!r} must be a list, got {value!r}")
            object.__setattr__(self, name, tuple(value))
        if not isinstance(self.tolerances, dict):
            raise InputError(f"config field 'tolerances' must be an object, got {self.tolerances!r}")
        unknown_layouts = [x for x in self.layouts + (self.layout,) if x not in LAYOUT_BLOCKS]
        if unknown_layouts:
            raise InputError(f"Unknown layouts: {', '.join(unknown_layouts)}")
        if self.steps < 1 or self.jobs < 1:
            raise InputError(f"steps and jobs must be positive, got {self.steps}, {self.jobs}")

    @property
    def effective_tolerances(self) -> Tolerances:
        return DEFAULT_TOLERANCES.override(self.tolerances)

    @property
    def out_path(self) -> Path:
        return Path(self.out_dir)


def load_run_config(path: str) -> dict:
    document = read_json(path)
    if not isinstance(document, dict):
        raise InputError(f"{path}: config must be a JSON object")
    known = {f.name for f in fields(RunConfig)}
    unknown = sorted(set(document) - known)
    if unknown:
        raise InputError(f"{path}: unknown config fields: {', '.join(unknown)}")
    return document


# ----------------------------
# Argument parsing
# ----------------------------


class ArgumentParser(argparse.ArgumentParser):
    """Raises InputError instead of exiting with argparse's own status code."""

    def error(self, message):
        raise InputError(f"{self.prog}: {message}")


def _float_list(text: str) -> List[float]:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _int_list(text: str) -> List[int]:
    try:
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def build_parser() -> ArgumentParser:
    common = ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON document with RunConfig fields")
    common.add_argument("--out", dest="out_dir", help="output directory (SPECGAP_OUT_DIR)")
    common.add_argument("--seed", type=int)
    common.add_argument("--steps", type=int)
    common.add_argument("--jobs", type=int)
    for f in fields(Tolerances):
        common.add_argument(f"--tol.{f.name}", dest=f"tol_{f.name}", type=float, metavar="TOL")

    parser = ArgumentParser(prog="specgap", description="Spectral subspace perturbation lab")
    subparsers = parser.add_subparsers(dest="subcommand", required=True)

    sub = subparsers.add_parser("example2x2", parents=[common], help="closed-form 2×2 family")
    sub.add_argument("--eps", dest="epsilons", type=_float_list)

    for name, text in (("bounds", "bound report"), ("transport", "Kato transport unitary")):
        sub = subparsers.add_parser(name, parents=[common], help=text)
        sub.add_argument("--instance", help="instance JSON file")
        sub.add_argument("--dim", type=int)
        sub.add_argument("--ratio", type=float)
        sub.add_argument("--layout", choices=list(LAYOUT_BLOCKS))
        if name == "transport":
            sub.add_argument("--scheme", choices=["midpoint", "magnus4"])

    sub = subparsers.add_parser("resonance", parents=[common], help="rank-one resonance model")
    sub.add_argument("--eps", dest="resonance_epsilons", type=_float_list)
    sub.add_argument("--grid", dest="grid_sizes", type=_int_list)

    sub = subparsers.add_parser("search", parents=[common], help="bound scan and extremal search")
    sub.add_argument("--trials", type=int)
    sub.add_argument("--dims", type=_int_list)
    sub.add_argument("--ratios", type=_float_list)
    sub.add_argument("--iters", dest="search_iters", type=int)

    subparsers.add_parser("report", parents=[common], help="reproduction checks")
    return parser


def parse_config(argv: Optional[Sequence[str]] = None) -> RunConfig:
    """Command-line flags override the config file, which overrides app/env.py."""
    args = vars(build_parser().parse_args(argv))
    values = load_run_config(args.pop("config")) if args.get("config") else {}
    values = dict(values)
    tolerances = values.get("tolerances", {})
    if not isinstance(tolerances, dict):
        raise InputError(f"config field 'tolerances' must be an object, got {tolerances!r}")
    tolerances = dict(tolerances)
    for name in list(args):
        if name.startswith("tol_"):
            value = args.pop(name)
            if value is not None:
                tolerances[name[len("tol_"):]] = value
    values.update({k: v for k, v in args.items() if v is not None})
    # Unknown tolerance names fail here, before any work starts
    DEFAULT_TOLERANCES.override(tolerances)
    values["tolerances"] = tolerances
    return RunConfig(**values)


# ----------------------------
# Helpers
# ----------------------------


def _seeded_instance(config: RunConfig, seed: int) -> Instance:
    spec = sample_instance_spec(config.dim, config.ratio, config.layout, seed)
    a, v = random_instance(spec)
    return Instance(a, v, spec.sigma)


def _instance(config: RunConfig) -> Tuple[Instance, Optional[int]]:
    tolerances = config.effective_tolerances
    if config.instance:
        return load_instance(config.instance, tolerances=tolerances), None
    instance = _seeded_instance(config, config.seed)
    dump_instance(config.out_path / "instance.json", instance.a, instance.v, instance.sigma)
    return instance, config.seed


def _report_document(report: BoundReport, seed: Optional[int]) -> dict:
    document = report.to_dict()
    document["seed"] = seed
    return document


# ----------------------------
# Subcommands
# ----------------------------


def cmd_example2x2(config: RunConfig, *, logger: logging.Logger = logger) -> List[dict]:
    if not config.epsilons:
        raise InputError("example2x2 needs at least one ε")
    for eps in config.epsilons:
        TwoByTwoFamily(eps)
    tolerances = config.effective_tolerances
    rows, failures = [], []
    for eps in config.epsilons:
        try:
            record = example2x2(eps, tolerances=tolerances)
        except ToleranceError as e:
            failures.append(e)
            rows.append({"epsilon": eps, "max_mismatch": e.achieved})
            continue
        rows.append(record.to_row())
        write_json(
            config.out_path / f"example2x2_eps{eps:g}.json",
            _report_document(record.report, None),
        )
        logger.info(
            f"ε = {eps:g}: ‖V‖ = {record.v_norm_numeric:.10f}, "
            f"‖P−Q‖ = {record.pq_norm_numeric:.10f}, mismatch = {record.max_mismatch:.2e}"
        )
    write_csv(config.out_path / "example2x2.csv", rows)
    if failures:
        raise failures[0]
    return rows


def cmd_bounds(config: RunConfig, *, logger: logging.Logger = logger) -> BoundReport:
    tolerances = config.effective_tolerances
    instance, seed = _instance(config)
    report = bound_report(instance.a, instance.v, instance.sigma, tolerances=tolerances)
    write_json(config.out_path / "bounds.json", _report_document(report, seed))
    logger.info(
        f"regime = {report.regime}, ‖V‖/d = {report.ratio:.6f}, "
        f"‖P−Q‖ = {report.measured.difference:.10f}"
    )
    for note in report.notes:
        logger.info(note)
    if report.violations:
        raise BoundViolationError(
            f"{len(report.violations)} bound violation(s): {report.violations[0]}", seed=seed
        )
    return report


def cmd_transport(config: RunConfig, *, logger: logging.Logger = logger):
    tolerances = config.effective_tolerances
    instance, seed = _instance(config)
    path = ProjectorPath.build(instance.a, instance.v, instance.sigma, tolerances=tolerances)
    result = transport_unitary(
        path, config.steps, scheme=config.scheme, enforce=False, logger=logger
    )
    out = config.out_path
    write_json(
        out / "transport.json",
        {
            "seed": seed,
            "steps": result.steps,
            "scheme": result.scheme,
            "residual": result.residual,
            "unitarity": result.unitarity,
            "max_path_residual": result.max_path_residual,
            "W": [[[float(x.real), float(x.imag)] for x in row] for row in result.w],
            "tolerances": tolerances.as_dict(),
        },
    )
    write_csv(out / "transport_trace.csv", [r._asdict() for r in result.trace])
    enforce_tolerances(result, tolerances)
    return result


def cmd_resonance(config: RunConfig, *, logger: logging.Logger = logger) -> List[dict]:
    if not config.resonance_epsilons or not config.grid_sizes:
        raise InputError("resonance needs at least one ε and one grid size")
    for eps in config.resonance_epsilons:
        if eps == RESONANCE_THRESHOLD:
            raise InputError("ε = 2/5 is the degenerate threshold")
        if not eps > 0:
            raise InputError(f"ε must be positive, got {eps}")
    rows = []
    for eps in config.resonance_epsilons:
        scan = eigenvalue_scan(eps)
        overlaps = dict(overlap_decay(eps, config.grid_sizes))
        for n in config.grid_sizes:
            a, v = resonance_operators(ResonanceModel(eps, n))
            rows.append(
                {
                    "epsilon": eps,
                    "N": n,
                    "v_norm": v.norm(),
                    "v_norm_closed": v_norm_closed(eps),
                    "overlap": overlaps[n],
                    "root_count": scan.root_count,
                    "roots": ";".join(f"{x:.12g}" for x in scan.roots),
                    "discrete_eigenvalues": ";".join(
                        f"{x:.12g}" for x in discrete_point_spectrum(eps, n)
                    ),
                }
            )
        logger.info(f"ε = {eps:g}: {scan.root_count} secular root(s) {list(scan.roots)}")
    write_csv(config.out_path / "resonance.csv", rows)
    write_json(
        config.out_path / "resonance.json",
        {
            "threshold": resonance_threshold(),
            "tolerances": config.effective_tolerances.as_dict(),
        },
    )
    return rows


def cmd_search(config: RunConfig, *, logger: logging.Logger = logger):
    """Bound scan over the configured matrix, then extremal searches in open-window cells."""
    tolerances = config.effective_tolerances
    out = config.out_path
    summary = bound_violation_scan(
        config.trials,
        config.dims,
        config.ratios,
        config.seed,
        layouts=config.layouts,
        jobs=config.jobs,
        fail=False,
        tolerances=tolerances,
        logger=logger,
    )
    append_jsonl(out / "trials.jsonl", (r.to_dict() for r in summary.records))
    bound_names = dict.fromkeys(name for r in summary.records for name in r.bounds)
    write_csv(
        out / "trials.csv",
        [r.to_row() for r in summary.records],
        fieldnames=TRIAL_COLUMNS + list(bound_names) + ["violation_count"],
    )
    write_csv(
        out / "scan_summary.csv",
        [
            {
                "dim": c.dim,
                "ratio": c.ratio,
                "layout": c.layout,
                "cell_seed": c.cell_seed,
                "trials": c.trials,
                "violation_count": c.violation_count,
                "max_pq_norm": c.max_pq_norm,
                "argmax_seed": c.argmax_seed,
                "regimes": ";".join(f"{k}={v}" for k, v in sorted(c.regimes.items())),
                "skipped": c.skipped,
            }
            for c in summary.cells
        ],
    )

    searches = []
    for dim in config.search_dims:
        for run in range(config.search_runs):
            seed = derive_seed(config.seed, dim, run)
            try:
                spec = sample_instance_spec(dim, config.search_ratio, LAYOUT_INTERLEAVED, seed)
            except InputError as e:
                logger.warning(f"Skipping search at dim {dim}: {e}")
                continue
            searches.append(
                maximize_pq_norm(spec, config.search_iters, tolerances=tolerances, logger=logger)
            )
    append_jsonl(out / "search.jsonl", (r.to_dict() for r in searches))
    maxima: Dict[int, float] = {}
    for r in searches:
        maxima[r.spec.dim] = max(maxima.get(r.spec.dim, 0.0), r.pq_norm)
    write_csv(
        out / "search_summary.csv",
        [{"dim": dim, "max_pq_norm": value} for dim, value in sorted(maxima.items())],
    )
    manifest = summary.manifest()
    manifest["searches"] = [
        {
            "seed": r.spec.seed,
            "dim": r.spec.dim,
            "ratio": r.spec.v_ratio,
            "layout": r.spec.layout,
            "iters": config.search_iters,
        }
        for r in searches
    ]
    manifest["tolerances"] = tolerances.as_dict()
    write_json(out / "manifest.json", manifest)

    if summary.violations:
        seed, message = summary.violations[0]
        raise BoundViolationError(
            f"{summary.violation_count} bound violation(s); first at seed {seed}: {message}",
            seed=seed,
        )
    return summary, searches


def _check(name: str, passed: bool, value, expected) -> dict:
    return {"name": name, "passed": bool(passed), "value": value, "expected": expected}


def cmd_report(config: RunConfig, *, logger: logging.Logger = logger) -> dict:
    tolerances = config.effective_tolerances
    checks = []

    records = [example2x2(eps, tolerances=tolerances) for eps in (0.01, 0.1, 0.25, 0.5, 0.7)]
    checks.append(
        _check(
            "example2x2 closed forms",
            all(r.max_mismatch <= 1e-10 for r in records),
            max(r.max_mismatch for r in records),
            "≤ 1e-10",
        )
    )
    checks.append(
        _check(
            "example2x2 below √2/2",
            all(r.pq_norm_numeric < SQRT2_OVER_2 for r in records),
            max(r.pq_norm_numeric for r in records),
            f"< {SQRT2_OVER_2}",
        )
    )

    sweep = sharpness_sweep((1e-2, 1e-4, 1e-6), tolerances=tolerances)
    gaps = [row.gap for row in sweep]
    checks.append(
        _check(
            "sharpness approach",
            all(g > 0 for g in gaps)
            and all(x > y for x, y in zip(gaps, gaps[1:]))
            and gaps[-1] < 2e-3
            and all(0.5 <= row.gap / row.series <= 2 for row in sweep),
            gaps,
            "positive, decreasing, below 2e-3, within factor 2 of √(ε/2)",
        )
    )

    quarter = TwoByTwoFamily(0.25)
    report = bound_report(quarter.a, quarter.v, EXAMPLE_SIGMA, tolerances=tolerances)
    checks.append(
        _check(
            "example bounds",
            report.regime == REGIME_SUBORDINATED and not report.violations,
            {"regime": report.regime, "violations": list(report.violations)},
            "subordinated, no violations",
        )
    )

    path = ProjectorPath.build(quarter.a, quarter.v, EXAMPLE_SIGMA, tolerances=tolerances)
    result = transport_unitary(path, config.steps, scheme=config.scheme, enforce=False, logger=logger)
    checks.append(
        _check(
            "example transport",
            result.residual <= 1e-8 and result.unitarity <= tolerances.unit,
            {"residual": result.residual, "unitarity": result.unitarity},
            "residual ≤ 1e-8",
        )
    )

    counts = {eps: eigenvalue_scan(eps).root_count for eps in (0.1, 0.2, 0.3, 0.39, 0.41, 0.5)}
    checks.append(
        _check(
            "secular root counts",
            all(count == (1 if eps > RESONANCE_THRESHOLD else 0) for eps, count in counts.items()),
            {f"{eps:g}": count for eps, count in counts.items()},
            "0 below 2/5, 1 above",
        )
    )
    threshold = resonance_threshold()
    checks.append(
        _check(
            "resonance threshold",
            abs(threshold - RESONANCE_THRESHOLD) <= 1e-6,
            threshold,
            RESONANCE_THRESHOLD,
        )
    )
    errors = {}
    for eps in (0.1, 0.3):
        _, v = resonance_operators(ResonanceModel(eps, 1000))
        errors[f"{eps:g}"] = abs(v.norm() - v_norm_closed(eps))
    checks.append(
        _check("‖V_N‖ at N = 1000", max(errors.values()) <= 1e-3, errors, "≤ 1e-3")
    )
    overlaps = [value for _, value in overlap_decay(0.3, (100, 200, 400, 800))]
    checks.append(
        _check(
            "overlap decay",
            all(x > y for x, y in zip(overlaps, overlaps[1:])),
            overlaps,
            "strictly decreasing",
        )
    )

    document = {
        "passed": all(c["passed"] for c in checks),
        "checks": checks,
        "tolerances": tolerances.as_dict(),
    }
    write_json(config.out_path / "report.json", document)
    for c in checks:
        (logger.info if c["passed"] else logger.error)(
            f"{'PASS' if c['passed'] else 'FAIL'} {c['name']}: {c['value']}"
        )
    if not document["passed"]:
        failed = [c["name"] for c in checks if not c["passed"]]
        raise ToleranceError(
            f"Reproduction checks failed: {', '.join(failed)}", achieved=len(failed), tolerance=0
        )
    return document


COMMANDS = {
    "example2x2": cmd_example2x2,
    "bounds": cmd_bounds,
    "transport": cmd_transport,
    "resonance": cmd_resonance,
    "search": cmd_search,
    "report": cmd_report,
}


def run(argv: Optional[Sequence[str]] = None, *, logger: logging.Logger = logger) -> int:
    """Exit codes: 0 passed, 1 usage or config error, 2 assertion failure."""
    try:
        config = parse_config(argv)
        config.out_path.mkdir(parents=True, exist_ok=True)
        COMMANDS[config.subcommand](config, logger=logger)
        return EXIT_OK
    except (ToleranceError, BoundViolationError) as e:
        seed = getattr(e, "seed", None)
        logger.error(f"{e}" + (f" (reproduce with --seed {seed})" if seed is not None else ""))
        return EXIT_ASSERTION
    except InputError as e:
        logger.error(f"{e}")
        return EXIT_USAGE
    except SpecGapError as e:
        logger.error(f"{e}")
        return EXIT_USAGE
    except Exception as e:
        logger.exception(f"Unexpected failure: {e}")
        return EXIT_USAGE
