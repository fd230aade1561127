from datetime import datetime
from enum import Enum
from typing import Any

from sqlmodel import JSON, Column, Field, Relationship, SQLModel


class RunKind(str, Enum):
    """
    What a recorded run did.

    SOLVE: splitting solver on one instance
    CERTIFY: simplicity verification of a solved instance
    BM: factorized multi-start run
    GOLFING: golfing-scheme certificate sweep
    DEMO: dual multiplicity experiment
    TABLE1: certification sweep over MaxCut graphs
    PROBE: sensitivity or error-bound probe
    """

    SOLVE = "solve"
    CERTIFY = "certify"
    BM = "bm"
    GOLFING = "golfing"
    DEMO = "demo"
    TABLE1 = "table1"
    PROBE = "probe"


class RunRecord(SQLModel, table=True):
    """
    Database model for runs.
    One row per CLI command that produced a result.
    """

    id: int = Field(default=None, primary_key=True)
    kind: RunKind
    label: str = ""
    seed: int | None = None
    created_at: datetime = Field(default_factory=datetime.now)
    summary: dict[str, Any] = Field(default={}, sa_column=Column(JSON))
    certifications: list["CertificationRecord"] = Relationship(
        back_populates="run",
        cascade_delete=True,
        sa_relationship_kwargs={"lazy": "selectin"},
    )


class CertificationRecord(SQLModel, table=True):
    """
    Database model for certification outcomes.
    Mirrors one row of the summary table.
    """

    id: int = Field(default=None, primary_key=True)
    run_id: int = Field(foreign_key="runrecord.id", ondelete="CASCADE")
    run: RunRecord = Relationship(back_populates="certifications")
    label: str = ""
    n: int
    m: int
    rank_p: int
    rank_d: int
    kappa_X: float | None = None
    kappa_Z: float | None = None
    kappa_AZ: float | None = None
    kappa_AX: float | None = None
    gap: float
    simple: bool
    primal_simple: bool
    created_at: datetime = Field(default_factory=datetime.now)
