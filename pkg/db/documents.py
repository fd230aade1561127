"""
Versioned JSON documents exchanged between CLI commands.

Every document carries "schema": 1, a "kind" tag and a created_at timestamp,
which is the only field that differs between two runs with the same
arguments and seed. Symmetric matrices are stored as {n, upper} with the upper
triangle in row-major order; rectangular ones as {rows, cols, data}.
"""

import csv
import json
import logging
from datetime import datetime
from pathlib import Path
from typing import Any, Literal

import numpy as np
from numpy.typing import NDArray
from pydantic import BaseModel, ConfigDict, Field, ValidationError, computed_field

from core.errors import ParseError

logger = logging.getLogger(__name__)

SCHEMA_VERSION = 1


class Document(BaseModel):
    """
    Base model for every JSON document.
    """

    model_config = ConfigDict(populate_by_name=True)

    schema_version: int = Field(default=SCHEMA_VERSION, alias="schema")
    created_at: datetime = Field(default_factory=datetime.now)


class MatrixDoc(BaseModel):
    n: int
    upper: list[float]

    @classmethod
    def of(cls, A: NDArray) -> "MatrixDoc":
        rows, cols = np.triu_indices(A.shape[0])
        return cls(n=A.shape[0], upper=A[rows, cols].tolist())

    def to_array(self) -> NDArray:
        rows, cols = np.triu_indices(self.n)
        if len(self.upper) != len(rows):
            raise ParseError(f"matrix of order {self.n} needs {len(rows)} upper entries")
        A = np.zeros((self.n, self.n))
        A[rows, cols] = self.upper
        A[cols, rows] = self.upper
        return A


class DenseDoc(BaseModel):
    rows: int
    cols: int
    data: list[float]

    @classmethod
    def of(cls, A: NDArray) -> "DenseDoc":
        A = np.atleast_2d(A)
        return cls(rows=A.shape[0], cols=A.shape[1], data=A.ravel().tolist())

    def to_array(self) -> NDArray:
        if len(self.data) != self.rows * self.cols:
            raise ParseError(f"dense matrix needs {self.rows * self.cols} entries")
        return np.asarray(self.data, dtype=np.float64).reshape(self.rows, self.cols)


#
# Instances and solutions
#


class TruthDoc(BaseModel):
    X_star: MatrixDoc
    y_star: list[float] | None = None
    rank_star: int


class SignalDoc(BaseModel):
    z: list[float] | None = None
    X_natural: DenseDoc | None = None
    U: DenseDoc | None = None
    sigma: list[float] | None = None
    V: DenseDoc | None = None
    omega: list[tuple[int, int]] | None = None
    p: float | None = None
    mu: float | None = None


class CertificateDoc(BaseModel):
    valid: bool
    lambda_min: float
    lambda_n_minus_1: float


class InstanceDoc(Document):
    kind: Literal["instance"] = "instance"
    label: str
    family: str
    seed: int | None = None
    params: dict[str, Any] = {}
    n: int
    m: int
    C: MatrixDoc
    constraints: list[tuple[int, int, int, float]]
    b: list[float]
    truth: TruthDoc | None = None
    signal: SignalDoc | None = None
    certificate: CertificateDoc | None = None


class ResidualsDoc(BaseModel):
    primal_infeas: float
    dual_infeas: float
    cone_infeas: float
    gap: float


class SolutionDoc(Document):
    kind: Literal["solution"] = "solution"
    label: str
    n: int
    m: int
    X: MatrixDoc
    y: list[float]
    status: str
    converged: bool
    iterations: int
    primal_obj: float
    dual_obj: float
    residuals: ResidualsDoc
    instance_hash: str


#
# Certification
#


class SimplicityFlags(BaseModel):
    surjective: bool
    strong_duality: bool
    strict_complementarity: bool
    primal_unique: bool
    dual_unique: bool

    @computed_field
    @property
    def primal_simple(self) -> bool:
        return (
            self.surjective
            and self.strong_duality
            and self.strict_complementarity
            and self.primal_unique
        )

    @computed_field
    @property
    def simple(self) -> bool:
        return self.primal_simple and self.dual_unique


class SimplicityReport(Document):
    """
    Outcome of the verification protocol for one solved instance; one row of
    the summary table.
    """

    kind: Literal["report"] = "report"
    label: str = ""
    n: int
    m: int
    eps: float
    rank_p: int
    rank_d: int
    lambda_minpos_X: float | None
    lambda_minpos_Z: float | None
    kappa_X: float | None
    kappa_Z: float | None
    sigma_min_AZ: float | None
    sigma_max_AZ: float | None
    kappa_AZ: float | None
    sigma_min_AX: float | None
    sigma_max_AX: float | None
    kappa_AX: float | None
    gap: float
    primal_obj: float
    dual_obj: float
    residuals: ResidualsDoc
    flags: SimplicityFlags
    warnings: list[str] = []
    input_hashes: dict[str, str] = {}


#
# Experiment outputs
#


class BmStartDoc(BaseModel):
    seed: int
    objective: float | None = None
    grad_norm: float | None = None
    hess_min_eig: float | None = None
    sosp: bool = False
    gap_to_dual: float | None = None
    iterations: int = 0
    escapes: int = 0
    spurious: bool = False
    error: str | None = None


class BmSummaryDoc(Document):
    kind: Literal["bm"] = "bm"
    label: str
    manifold: str
    r: int
    starts: list[BmStartDoc]
    thresholds: dict[str, Any]
    dual_bound: float | None = None
    failure_witnesses: list[int] = []


class GolfingDoc(Document):
    kind: Literal["golfing"] = "golfing"
    label: str
    trials: list[dict[str, Any]]
    pass_rate: float


class DemoDoc(Document):
    kind: Literal["demo"] = "demo"
    label: str
    report: dict[str, Any]


class ProbeDoc(Document):
    kind: Literal["probe"] = "probe"
    label: str
    probe: str
    table: dict[str, Any]


_KINDS: dict[str, type[Document]] = {
    "instance": InstanceDoc,
    "solution": SolutionDoc,
    "report": SimplicityReport,
    "bm": BmSummaryDoc,
    "golfing": GolfingDoc,
    "demo": DemoDoc,
    "probe": ProbeDoc,
}


def dump_document(doc: Document) -> str:
    return doc.model_dump_json(by_alias=True, indent=2)


def save_document(doc: Document, path: str | Path) -> Path:
    path = Path(path)
    path.write_text(dump_document(doc) + "\n")
    logger.info(f"Wrote {getattr(doc, 'kind', 'document')} document to {path}")
    return path


def load_document(path: str | Path, expected: type[Document] | None = None) -> Document:
    """Read a document, dispatching on its kind tag."""
    path = Path(path)
    try:
        raw = json.loads(path.read_text())
    except FileNotFoundError as e:
        raise ParseError(f"{path} does not exist") from e
    except json.JSONDecodeError as e:
        raise ParseError(f"{path}: {e.msg}", line=e.lineno) from e

    if raw.get("schema") != SCHEMA_VERSION:
        raise ParseError(f"{path}: unsupported schema version {raw.get('schema')!r}")
    model = _KINDS.get(raw.get("kind", ""))
    if model is None:
        raise ParseError(f"{path}: unknown document kind {raw.get('kind')!r}")
    if expected is not None and model is not expected:
        raise ParseError(f"{path}: expected a {expected.__name__}, found kind {raw['kind']!r}")
    try:
        return model.model_validate(raw)
    except ValidationError as e:
        raise ParseError(f"{path}: {e.error_count()} schema violations: {e.errors()[0]['msg']}") from e


def write_spectrum_csv(path: str | Path, values: NDArray) -> Path:
    path = Path(path)
    with path.open("w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["index", "eigenvalue"])
        for index, value in enumerate(np.asarray(values).tolist(), start=1):
            writer.writerow([index, repr(float(value))])
    return path
