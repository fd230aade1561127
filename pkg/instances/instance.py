import logging
from dataclasses import dataclass, field
from typing import Any

import numpy as np
from numpy.typing import NDArray

from db.documents import (
    CertificateDoc,
    DenseDoc,
    InstanceDoc,
    MatrixDoc,
    SignalDoc,
    TruthDoc,
)
from sdp.model import StandardFormSDP

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class GroundTruth:
    """
    Known optimal primal matrix, and the dual vector when a closed form exists.
    """

    X_star: NDArray
    y_star: NDArray | None
    rank_star: int


@dataclass(frozen=True, eq=False)
class Signal:
    """
    Planted object behind an instance: a sign vector z, or a low-rank matrix
    with its SVD factors and observation pattern.
    """

    z: NDArray | None = None
    X_natural: NDArray | None = None
    U: NDArray | None = None
    sigma: NDArray | None = None
    V: NDArray | None = None
    omega: list[tuple[int, int]] | None = None
    p: float | None = None
    mu: float | None = None


@dataclass(frozen=True)
class CertificateInfo:
    valid: bool
    lambda_min: float
    lambda_n_minus_1: float


@dataclass(frozen=True, eq=False)
class Instance:
    sdp: StandardFormSDP
    family: str
    params: dict[str, Any] = field(default_factory=dict)
    seed: int | None = None
    truth: GroundTruth | None = None
    signal: Signal | None = None
    certificate: CertificateInfo | None = None

    @property
    def label(self) -> str:
        return self.sdp.label

    def to_document(self) -> InstanceDoc:
        sdp = self.sdp
        truth = None
        if self.truth is not None:
            truth = TruthDoc(
                X_star=MatrixDoc.of(self.truth.X_star),
                y_star=None if self.truth.y_star is None else self.truth.y_star.tolist(),
                rank_star=self.truth.rank_star,
            )
        signal = None
        if self.signal is not None:
            s = self.signal
            signal = SignalDoc(
                z=None if s.z is None else s.z.tolist(),
                X_natural=None if s.X_natural is None else DenseDoc.of(s.X_natural),
                U=None if s.U is None else DenseDoc.of(s.U),
                sigma=None if s.sigma is None else s.sigma.tolist(),
                V=None if s.V is None else DenseDoc.of(s.V),
                omega=None if s.omega is None else sorted(s.omega),
                p=s.p,
                mu=s.mu,
            )
        certificate = None
        if self.certificate is not None:
            certificate = CertificateDoc(
                valid=self.certificate.valid,
                lambda_min=self.certificate.lambda_min,
                lambda_n_minus_1=self.certificate.lambda_n_minus_1,
            )
        return InstanceDoc(
            label=sdp.label,
            family=self.family,
            seed=self.seed,
            params=self.params,
            n=sdp.n,
            m=sdp.m,
            C=MatrixDoc.of(sdp.C),
            constraints=list(sdp.triplets()),
            b=sdp.b.tolist(),
            truth=truth,
            signal=signal,
            certificate=certificate,
        )

    @classmethod
    def from_document(cls, doc: InstanceDoc) -> "Instance":
        sdp = StandardFormSDP.from_triplets(
            doc.C.to_array(), doc.constraints, doc.b, m=doc.m, label=doc.label
        )
        truth = None
        if doc.truth is not None:
            truth = GroundTruth(
                X_star=doc.truth.X_star.to_array(),
                y_star=None if doc.truth.y_star is None else np.asarray(doc.truth.y_star),
                rank_star=doc.truth.rank_star,
            )
        signal = None
        if doc.signal is not None:
            s = doc.signal
            signal = Signal(
                z=None if s.z is None else np.asarray(s.z),
                X_natural=None if s.X_natural is None else s.X_natural.to_array(),
                U=None if s.U is None else s.U.to_array(),
                sigma=None if s.sigma is None else np.asarray(s.sigma),
                V=None if s.V is None else s.V.to_array(),
                omega=None if s.omega is None else [tuple(e) for e in s.omega],
                p=s.p,
                mu=s.mu,
            )
        certificate = None
        if doc.certificate is not None:
            certificate = CertificateInfo(
                doc.certificate.valid,
                doc.certificate.lambda_min,
                doc.certificate.lambda_n_minus_1,
            )
        return cls(sdp, doc.family, dict(doc.params), doc.seed, truth, signal, certificate)
