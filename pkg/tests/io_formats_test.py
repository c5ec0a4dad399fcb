import json

import numpy as np
import pytest

from app.errors import InputError, NotHermitianError
from app.examples import EXAMPLE_SIGMA, TwoByTwoFamily
from app.intervals import IntervalUnion
from app.io_formats import (
    append_jsonl,
    dump_instance,
    dumps,
    instance_document,
    load_instance,
    parse_instance,
    read_csv,
    read_json,
    read_jsonl,
    write_csv,
    write_json,
)


def _document(**overrides) -> dict:
    document = {
        "dim": 2,
        "A": [[0, 0], [0, 1]],
        "V": [[0.25, [0.25, 0]], [0.25, -0.25]],
        "sigma": [[0, 0, True, True]],
    }
    document.update(overrides)
    return document


def test_parse_instance():
    instance = parse_instance(_document())
    assert instance.dim == 2
    np.testing.assert_allclose(instance.v.matrix, [[0.25, 0.25], [0.25, -0.25]])
    assert instance.sigma == EXAMPLE_SIGMA

    complex_v = parse_instance(_document(V=[[0, [0, 0.1]], [[0, -0.1], 0]]))
    assert complex_v.v.matrix[0, 1] == 0.1j


def test_parse_instance_errors():
    for document, message in [
        ([1, 2], "JSON object"),
        ({"dim": 2, "A": [], "V": []}, "missing fields: sigma"),
        (_document(extra=1), "unknown fields: extra"),
        (_document(dim=0), "field 'dim'"),
        (_document(dim=True), "field 'dim'"),
        (_document(A=[[0, 0]]), "field 'A': expected 2 rows"),
        (_document(A=[[0, 0], [0]]), "field 'A', row 1"),
        (_document(V=[[0, "x"], [0, 0]]), "field 'V', row 0, column 1"),
        (_document(V=[[0, [1, 2, 3]], [0, 0]]), "field 'V', row 0, column 1"),
        (_document(A=[[False, 0], [0, 1]]), "field 'A', row 0, column 0"),
        (_document(sigma=[[1, 0, True, True]]), "field 'sigma'"),
        (_document(sigma="all"), "field 'sigma'"),
    ]:
        with pytest.raises(InputError) as e:
            parse_instance(document)
        assert message in str(e.value)


def test_parse_instance_not_hermitian():
    with pytest.raises(NotHermitianError):
        parse_instance(_document(V=[[0, 1], [0, 0]]))


def test_load_instance(tmp_path):
    family = TwoByTwoFamily(0.25)
    path = dump_instance(tmp_path / "instance.json", family.a, family.v, EXAMPLE_SIGMA)
    instance = load_instance(path)
    np.testing.assert_allclose(instance.a.matrix, family.a.matrix)
    np.testing.assert_allclose(instance.v.matrix, family.v.matrix)
    assert instance.sigma == EXAMPLE_SIGMA
    assert not (tmp_path / "instance.json.tmp").exists()


def test_load_instance_errors(tmp_path):
    missing = tmp_path / "missing.json"
    with pytest.raises(InputError) as e:
        load_instance(missing)
    assert str(missing) in str(e.value)

    broken = tmp_path / "broken.json"
    broken.write_text('{"dim": 2,\n  "A": [[0, 0]', encoding="utf-8")
    with pytest.raises(InputError) as e:
        load_instance(broken)
    assert "line 2" in str(e.value)

    skewed = tmp_path / "skewed.json"
    skewed.write_text(json.dumps(_document(A=[[0, 1], [0, 0]])), encoding="utf-8")
    with pytest.raises(NotHermitianError) as e:
        load_instance(skewed)
    assert str(e.value).startswith(str(skewed))


def test_instance_document_dimension_mismatch():
    with pytest.raises(InputError):
        instance_document(np.eye(2), np.eye(3), EXAMPLE_SIGMA)


def test_json_helpers(tmp_path):
    payload = {"values": np.array([1.0, 2.0]), "count": np.int64(3), "names": {"b", "a"}}
    assert json.loads(dumps(payload)) == {"values": [1.0, 2.0], "count": 3, "names": ["a", "b"]}
    path = write_json(tmp_path / "nested" / "out.json", payload)
    assert read_json(path)["count"] == 3
    with pytest.raises(TypeError):
        dumps({"sigma": IntervalUnion.closed(0, 1)})


def test_jsonl(tmp_path):
    path = tmp_path / "trials.jsonl"
    append_jsonl(path, [{"seed": 1}, {"seed": 2}])
    append_jsonl(path, [{"seed": 3}])
    assert [r["seed"] for r in read_jsonl(path)] == [1, 2, 3]

    path.write_text('{"seed": 1}\nnot json\n', encoding="utf-8")
    with pytest.raises(InputError) as e:
        read_jsonl(path)
    assert "line 2" in str(e.value)


def test_csv(tmp_path):
    rows = [{"epsilon": 0.1, "gap": 0.5}, {"epsilon": 0.2, "note": "x"}]
    path = write_csv(tmp_path / "rows.csv", rows)
    assert path.read_text(encoding="utf-8").splitlines()[0] == "epsilon,gap,note"
    assert read_csv(path) == [
        {"epsilon": "0.1", "gap": "0.5", "note": ""},
        {"epsilon": "0.2", "gap": "", "note": "x"},
    ]
    path = write_csv(tmp_path / "fixed.csv", rows, fieldnames=["note"])
    assert read_csv(path) == [{"note": ""}, {"note": "x"}]
