import csv
import json
from pathlib import Path
from typing import Any, Dict, Iterable, List, NamedTuple, Sequence, Union

import numpy as np

from app.errors import InputError
from app.intervals import IntervalUnion
from app.spectral import HermitianOperator, OperatorLike, as_operator
from app.tolerances import DEFAULT_TOLERANCES, Tolerances

PathLike = Union[str, Path]

INSTANCE_FIELDS = ("dim", "A", "V", "sigma")


class Instance(NamedTuple):
    a: HermitianOperator
    v: HermitianOperator
    sigma: IntervalUnion

    @property
    def dim(self) -> int:
        return self.a.dim


# ----------------------------
# JSON helpers
# ----------------------------


def _jsonable(value: Any) -> Any:
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, (set, frozenset)):
        return sorted(value)
    raise TypeError(f"Object of type {type(value).__name__} is not JSON serializable")


def dumps(payload: Any) -> str:
    return json.dumps(payload, ensure_ascii=False, sort_keys=True, default=_jsonable)


def write_json(path: PathLike, payload: Any) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_text(
        json.dumps(payload, ensure_ascii=False, indent=2, sort_keys=True, default=_jsonable)
        + "\n",
        encoding="utf-8",
    )
    tmp.replace(path)
    return path


def read_json(path: PathLike) -> Any:
    path = Path(path)
    try:
        return json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise InputError(f"File not found: {path}")
    except json.JSONDecodeError as e:
        raise InputError(f"{path}: malformed JSON at line {e.lineno}, column {e.colno}: {e.msg}")


def append_jsonl(path: PathLike, records: Iterable[dict]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("a", encoding="utf-8") as f:
        for record in records:
            f.write(dumps(record) + "\n")
    return path


def read_jsonl(path: PathLike) -> List[dict]:
    records = []
    with Path(path).open("r", encoding="utf-8") as f:
        for line_number, line in enumerate(f, start=1):
            if not line.strip():
                continue
            try:
                records.append(json.loads(line))
            except json.JSONDecodeError as e:
                raise InputError(f"{path}: line {line_number} is not a JSON record: {e.msg}")
    return records


def write_csv(path: PathLike, rows: Sequence[Dict[str, Any]], *, fieldnames: Sequence[str] = ()) -> Path:
    """Columns default to the union of row keys in first-seen order."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    if not fieldnames:
        fieldnames = list(dict.fromkeys(key for row in rows for key in row))
    with path.open("w", encoding="utf-8", newline="") as f:
        w = csv.DictWriter(f, fieldnames=list(fieldnames), extrasaction="ignore", lineterminator="\n")
        w.writeheader()
        for row in rows:
            w.writerow({k: row.get(k, "") for k in fieldnames})
    return path


def read_csv(path: PathLike) -> List[Dict[str, str]]:
    with Path(path).open("r", encoding="utf-8", newline="") as f:
        return list(csv.DictReader(f))


# ----------------------------
# Instance files
# ----------------------------


def _parse_entry(value: Any, field: str, row: int, column: int) -> complex:
    if isinstance(value, bool):
        raise InputError(f"field {field!r}, row {row}, column {column}: booleans are not numbers")
    if isinstance(value, (int, float)):
        return complex(value)
    if isinstance(value, list) and len(value) == 2 and all(
        isinstance(x, (int, float)) and not isinstance(x, bool) for x in value
    ):
        return complex(value[0], value[1])
    raise InputError(
        f"field {field!r}, row {row}, column {column}: expected a number or [re, im], got {value!r}"
    )


def _parse_matrix(document: dict, field: str, dim: int) -> np.ndarray:
    rows = document[field]
    if not isinstance(rows, list) or len(rows) != dim:
        raise InputError(f"field {field!r}: expected {dim} rows")
    matrix = np.zeros((dim, dim), dtype=complex)
    for i, row in enumerate(rows):
        if not isinstance(row, list) or len(row) != dim:
            raise InputError(f"field {field!r}, row {i}: expected {dim} entries")
        for j, value in enumerate(row):
            matrix[i, j] = _parse_entry(value, field, i, j)
    return matrix


def parse_instance(
    document: Any, *, tolerances: Tolerances = DEFAULT_TOLERANCES
) -> Instance:
    if not isinstance(document, dict):
        raise InputError("Instance document must be a JSON object")
    missing = [name for name in INSTANCE_FIELDS if name not in document]
    if missing:
        raise InputError(f"Instance document is missing fields: {', '.join(missing)}")
    unknown = sorted(set(document) - set(INSTANCE_FIELDS))
    if unknown:
        raise InputError(f"Instance document has unknown fields: {', '.join(unknown)}")
    dim = document["dim"]
    if isinstance(dim, bool) or not isinstance(dim, int) or dim < 1:
        raise InputError(f"field 'dim': expected a positive integer, got {dim!r}")
    a = HermitianOperator.from_matrix(_parse_matrix(document, "A", dim), tolerances=tolerances)
    v = HermitianOperator.from_matrix(_parse_matrix(document, "V", dim), tolerances=tolerances)
    try:
        sigma = IntervalUnion.from_list(document["sigma"])
    except InputError as e:
        raise InputError(f"field 'sigma': {e}")
    return Instance(a, v, sigma)


def load_instance(path: PathLike, *, tolerances: Tolerances = DEFAULT_TOLERANCES) -> Instance:
    try:
        return parse_instance(read_json(path), tolerances=tolerances)
    except InputError as e:
        if str(path) in str(e):
            raise
        # Same exception type, path prefixed
        raise type(e)(f"{path}: {e}") from e


def _matrix_to_rows(matrix: np.ndarray) -> List[List[List[float]]]:
    return [[[float(x.real), float(x.imag)] for x in row] for row in np.asarray(matrix, dtype=complex)]


def instance_document(a: OperatorLike, v: OperatorLike, sigma: IntervalUnion) -> dict:
    a, v = as_operator(a), as_operator(v)
    if a.dim != v.dim:
        raise InputError(f"Dimension mismatch: A is {a.dim}, V is {v.dim}")
    return {
        "dim": a.dim,
        "A": _matrix_to_rows(a.matrix),
        "V": _matrix_to_rows(v.matrix),
        "sigma": sigma.to_list(),
    }


def dump_instance(path: PathLike, a: OperatorLike, v: OperatorLike, sigma: IntervalUnion) -> Path:
    return write_json(path, instance_document(a, v, sigma))
