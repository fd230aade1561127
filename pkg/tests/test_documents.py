# tests/test_documents.py
import json

import numpy as np
import pytest

from core.errors import ParseError
from db.documents import (
    DenseDoc,
    InstanceDoc,
    MatrixDoc,
    SimplicityFlags,
    SolutionDoc,
    dump_document,
    load_document,
    save_document,
    write_spectrum_csv,
)


def test_matrix_documents(rng):
    A = rng.standard_normal((4, 4))
    A = A + A.T
    doc = MatrixDoc.of(A)
    assert len(doc.upper) == 10
    assert np.array_equal(doc.to_array(), A)

    with pytest.raises(ParseError):
        MatrixDoc(n=3, upper=[1.0, 2.0]).to_array()

    R = rng.standard_normal((2, 3))
    assert np.array_equal(DenseDoc.of(R).to_array(), R)
    with pytest.raises(ParseError):
        DenseDoc(rows=2, cols=2, data=[1.0]).to_array()


def test_instance_document_on_disk(tmp_path, simple_instance):
    path = save_document(simple_instance.to_document(), tmp_path / "inst.json")
    raw = json.loads(path.read_text())
    assert raw["schema"] == 1
    assert raw["kind"] == "instance"

    doc = load_document(path, InstanceDoc)
    assert doc.label == simple_instance.label
    assert doc.m == simple_instance.sdp.m


def test_documents_differ_only_in_timestamp(simple_instance):
    first = json.loads(dump_document(simple_instance.to_document()))
    second = json.loads(dump_document(simple_instance.to_document()))
    first.pop("created_at")
    second.pop("created_at")
    assert first == second


def test_load_rejects_bad_documents(tmp_path, simple_instance):
    path = save_document(simple_instance.to_document(), tmp_path / "inst.json")
    with pytest.raises(ParseError):
        load_document(path, SolutionDoc)

    raw = json.loads(path.read_text())
    raw["schema"] = 2
    versioned = tmp_path / "v2.json"
    versioned.write_text(json.dumps(raw))
    with pytest.raises(ParseError):
        load_document(versioned)

    raw["schema"] = 1
    raw["kind"] = "spreadsheet"
    unknown = tmp_path / "unknown.json"
    unknown.write_text(json.dumps(raw))
    with pytest.raises(ParseError):
        load_document(unknown)

    raw["kind"] = "instance"
    del raw["C"]
    incomplete = tmp_path / "incomplete.json"
    incomplete.write_text(json.dumps(raw))
    with pytest.raises(ParseError):
        load_document(incomplete)

    broken = tmp_path / "broken.json"
    broken.write_text('{\n  "schema": 1,\n  oops\n}')
    with pytest.raises(ParseError) as excinfo:
        load_document(broken)
    assert excinfo.value.line == 3

    with pytest.raises(ParseError):
        load_document(tmp_path / "missing.json")


def test_simplicity_flags_are_computed():
    flags = SimplicityFlags(
        surjective=True,
        strong_duality=True,
        strict_complementarity=True,
        primal_unique=True,
        dual_unique=False,
    )
    assert flags.primal_simple
    assert not flags.simple
    assert flags.model_dump()["primal_simple"] is True


def test_spectrum_csv(tmp_path):
    path = write_spectrum_csv(tmp_path / "spectrum.csv", np.array([2.0, 0.5]))
    lines = path.read_text().splitlines()
    assert lines[0] == "index,eigenvalue"
    assert lines[1] == "1,2.0"
    assert lines[2] == "2,0.5"
