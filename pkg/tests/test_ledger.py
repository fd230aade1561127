# tests/test_ledger.py
import pytest
from sqlmodel import Session

from core.ledger_service import LedgerService
from db.models import RunKind
from sdp.certifier import certify
from sdp.solver import solve


def test_record_and_list_runs(session: Session):
    ledger = LedgerService(session)

    # Step 1: Record two runs
    first = ledger.record_run(RunKind.SOLVE, "a", 1, {"status": "converged"})
    second = ledger.record_run(RunKind.BM, "b", 2)

    # Step 2: Read them back
    assert ledger.get_run(first.id).summary == {"status": "converged"}
    assert [run.id for run in ledger.list_runs()] == [second.id, first.id]
    assert [run.label for run in ledger.list_runs(RunKind.BM)] == ["b"]
    assert len(ledger.list_runs(limit=1)) == 1
    assert [run.id for run in ledger.list_runs(skip=1)] == [first.id]


def test_missing_run_raises(session: Session):
    with pytest.raises(ValueError):
        LedgerService(session).get_run(999)


def test_record_certification(session: Session, simple_instance):
    report = certify(simple_instance.sdp, solve(simple_instance.sdp))
    ledger = LedgerService(session)

    record = ledger.record_certification(report, seed=3)

    assert record.rank_p == report.rank_p
    assert record.simple == report.flags.simple
    run = ledger.get_run(record.run_id)
    assert run.kind == RunKind.CERTIFY
    assert run.seed == 3
    assert run.certifications[0].id == record.id
    assert [c.id for c in ledger.list_certifications(report.label)] == [record.id]
    assert ledger.list_certifications("other") == []
