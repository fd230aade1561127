import logging
from typing import Any, Sequence

from sqlmodel import Session, select

from db.documents import SimplicityReport
from db.models import CertificationRecord, RunKind, RunRecord

logger = logging.getLogger(__name__)


class LedgerService:
    """
    Records runs and certification outcomes.
    Handles all database interactions.
    """

    def __init__(self, db: Session):
        self.db = db

    #
    # Run operations
    #

    def record_run(
        self,
        kind: RunKind,
        label: str = "",
        seed: int | None = None,
        summary: dict[str, Any] | None = None,
    ) -> RunRecord:
        """Store one finished run."""
        run = RunRecord(kind=kind, label=label, seed=seed, summary=summary or {})
        self.db.add(run)
        self.db.commit()
        self.db.refresh(run)
        logger.debug(f"Recorded {kind.value} run {run.id} ({label})")
        return run

    def get_run(self, run_id: int) -> RunRecord:
        """Get a run by ID."""
        run = self.db.get(RunRecord, run_id)
        if not run:
            raise ValueError(f"Run {run_id} not found")
        return run

    def list_runs(
        self, kind: RunKind | None = None, skip: int = 0, limit: int = 20
    ) -> Sequence[RunRecord]:
        """List runs, newest first."""
        query = select(RunRecord)
        if kind is not None:
            query = query.where(RunRecord.kind == kind)
        query = query.order_by(RunRecord.id.desc()).offset(skip).limit(limit)
        return self.db.exec(query).all()

    #
    # Certification operations
    #

    def record_certification(
        self, report: SimplicityReport, label: str | None = None, seed: int | None = None
    ) -> CertificationRecord:
        """Store a report together with the run that produced it."""
        label = label if label is not None else report.label
        run = self.record_run(
            RunKind.CERTIFY,
            label,
            seed,
            {
                "flags": report.flags.model_dump(),
                "warnings": report.warnings,
                "input_hashes": report.input_hashes,
            },
        )
        record = CertificationRecord(
            run_id=run.id,
            label=label,
            n=report.n,
            m=report.m,
            rank_p=report.rank_p,
            rank_d=report.rank_d,
            kappa_X=report.kappa_X,
            kappa_Z=report.kappa_Z,
            kappa_AZ=report.kappa_AZ,
            kappa_AX=report.kappa_AX,
            gap=report.gap,
            simple=report.flags.simple,
            primal_simple=report.flags.primal_simple,
        )
        self.db.add(record)
        self.db.commit()
        self.db.refresh(record)
        return record

    def list_certifications(
        self, label: str | None = None, limit: int = 20
    ) -> Sequence[CertificationRecord]:
        query = select(CertificationRecord)
        if label is not None:
            query = query.where(CertificationRecord.label == label)
        query = query.order_by(CertificationRecord.id.desc()).limit(limit)
        return self.db.exec(query).all()
