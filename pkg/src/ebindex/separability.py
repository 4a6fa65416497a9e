"""Entanglement-breaking verdicts for channels, separability for two-qubit states."""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from .channels import (
    BlochRep,
    Channel,
    LinearMap,
    bloch_from_channel,
    kraus_from_choi,
    max_ent_state,
)
from .exceptions import InvalidArgumentError
from .matlin import as_matrix, maxabs, min_eigenvalue, partial_transpose, schatten_norm
from .zoo import GAD, Depolarizing, FamilyTag, Werner, gad_threshold

NEG_TOL = 1e-9
BOUNDARY_TOL = 1e-9
RECOGNITION_TOL = 1e-10


class Verdict(str, enum.Enum):
    EB = "EB"
    NOT_EB = "NOT_EB"
    UNDECIDED = "UNDECIDED"


class Criterion(str, enum.Enum):
    PPT_2x2 = "PPT_2x2"
    PPT_VIOLATION = "PPT_VIOLATION"
    UNITAL_QUBIT_TRACE_NORM = "UNITAL_QUBIT_TRACE_NORM"
    SUFFICIENT_QUBIT = "SUFFICIENT_QUBIT"
    WERNER_CLOSED_FORM = "WERNER_CLOSED_FORM"
    DEPOLARIZING_CLOSED_FORM = "DEPOLARIZING_CLOSED_FORM"
    HOLEVO_FORM_WITNESS = "HOLEVO_FORM_WITNESS"


@dataclass(frozen=True)
class EbVerdict:
    """Three-valued verdict plus the criterion that produced it.

    ``margin`` is the signed distance to the criterion's threshold (positive
    on the entanglement-breaking side).
    """

    value: Verdict
    criterion: Optional[Criterion]
    margin: float

    @property
    def is_eb(self) -> bool:
        return self.value is Verdict.EB

    @property
    def is_not_eb(self) -> bool:
        return self.value is Verdict.NOT_EB

    def to_dict(self) -> dict:
        return {
            "value": self.value.value,
            "criterion": None if self.criterion is None else self.criterion.value,
            "margin": float(self.margin),
        }


def neg_threshold(choi: np.ndarray) -> float:
    return -NEG_TOL * (1.0 + maxabs(choi))


def pt_min_eigenvalue(choi: np.ndarray, dims: Tuple[int, int]) -> float:
    return min_eigenvalue(partial_transpose(choi, dims, "second"))


def _check_psd_choi(m: LinearMap) -> None:
    if isinstance(m, Channel):
        return
    lam = min_eigenvalue(m.choi)
    if lam < neg_threshold(m.choi):
        raise InvalidArgumentError(f"Choi matrix is not PSD (min eigenvalue {lam:.3e})")


def recognize_family(m: LinearMap) -> Optional[FamilyTag]:
    """Identify ``m`` as a depolarizing or Werner channel from its Choi matrix.

    The parameter is read off from one overlap and the full Choi matrix is
    then compared against the reconstruction, so a match is exact up to
    ``RECOGNITION_TOL``.
    """
    if not m.is_square:
        return None
    d = m.dim_in
    j = m.choi
    n = d * d
    eps = max_ent_state(d)
    lam = (float(np.real(np.vdot(eps.reshape(-1), j.reshape(-1)))) - 1.0 / n) / (1.0 - 1.0 / n)
    rec = lam * eps + (1 - lam) * np.eye(n) / n
    if maxabs(rec - j) <= RECOGNITION_TOL:
        if lam >= -1.0 / (n - 1) - 1e-12:
            return Depolarizing(lam, d)
    swap = np.eye(n).reshape(d, d, d, d).transpose(0, 1, 3, 2).reshape(n, n)
    tr_jf = float(np.real(np.trace(j @ swap)))
    eta = (tr_jf - 1.0 / d) / (1.0 / d - d)
    rec = -eta * swap / d + (1 + eta) * np.eye(n) / n
    if maxabs(rec - j) <= RECOGNITION_TOL:
        if -1.0 / (d + 1) - 1e-12 <= eta <= 1.0 / (d - 1) + 1e-12:
            return Werner(eta, d)
    return None


def closed_form_eb(tag: FamilyTag) -> EbVerdict:
    """Exact verdict for depolarizing, Werner and GAD family members."""
    if isinstance(tag, Depolarizing):
        d = tag.d
        margin = min(1.0 / (d + 1) - tag.lam, tag.lam + 1.0 / (d * d - 1))
        crit = Criterion.DEPOLARIZING_CLOSED_FORM
    elif isinstance(tag, Werner):
        d = tag.d
        margin = min(1.0 / (d * d - 1) - tag.eta, tag.eta + 1.0 / (d + 1))
        crit = Criterion.WERNER_CLOSED_FORM
    elif isinstance(tag, GAD):
        margin = gad_threshold(tag.gamma) - tag.p
        # no dedicated enum member: the GAD threshold is the PPT boundary of a 2x2 Choi state
        crit = Criterion.PPT_2x2
    else:
        raise InvalidArgumentError(f"no closed-form EB criterion for family {tag.family!r}")
    value = Verdict.EB if margin >= -1e-12 else Verdict.NOT_EB
    return EbVerdict(value, crit, float(margin))


def ppt_verdict(ch: LinearMap) -> EbVerdict:
    """PPT test on the Choi matrix.

    Negative partial transpose means NOT_EB in every dimension. A positive
    partial transpose decides EB only for qubits; for ``d >= 3`` the verdict
    is UNDECIDED unless the channel is recognised as a depolarizing or
    Werner channel, in which case the closed form decides.
    """
    if not ch.is_square:
        raise InvalidArgumentError("EB verdicts need dim_in == dim_out")
    _check_psd_choi(ch)
    d = ch.dim_in
    lam = pt_min_eigenvalue(ch.choi, (d, d))
    if lam < neg_threshold(ch.choi):
        return EbVerdict(Verdict.NOT_EB, Criterion.PPT_VIOLATION, lam)
    if d == 2:
        return EbVerdict(Verdict.EB, Criterion.PPT_2x2, lam)
    tag = recognize_family(ch)
    if tag is not None:
        return closed_form_eb(tag)
    return EbVerdict(Verdict.UNDECIDED, None, lam)


def eb_verdict(ch: LinearMap) -> EbVerdict:
    """Best available verdict: PPT/closed forms, then the Holevo-form witness."""
    v = ppt_verdict(ch)
    if v.value is Verdict.UNDECIDED:
        w = holevo_verdict(ch)
        if w.is_eb:
            return w
    return v


def eb_unital_qubit(b: BlochRep) -> EbVerdict:
    """Unital qubit channels break entanglement iff the trace norm of M is at most 1."""
    if np.linalg.norm(b.c) > 1e-12:
        raise InvalidArgumentError("eb_unital_qubit needs a unital channel (c = 0)")
    margin = 1.0 - schatten_norm(b.M, 1)
    value = Verdict.EB if margin >= -BOUNDARY_TOL else Verdict.NOT_EB
    return EbVerdict(value, Criterion.UNITAL_QUBIT_TRACE_NORM, margin)


def eb_sufficient_qubit(b: BlochRep) -> EbVerdict:
    """EB when ``||M||_1 + |c| <= 1``; otherwise UNDECIDED (the test is only sufficient)."""
    margin = 1.0 - schatten_norm(b.M, 1) - float(np.linalg.norm(b.c))
    value = Verdict.EB if margin >= -BOUNDARY_TOL else Verdict.UNDECIDED
    return EbVerdict(value, Criterion.SUFFICIENT_QUBIT, margin)


def holevo_form(ch: LinearMap, tol: float = 1e-9):
    """Measure-and-prepare decomposition read off a rank-one Kraus set.

    Returns ``(states, effects)`` with ``ch(X) = sum_k states[k] Tr[effects[k] X]``,
    or ``None`` when some minimal Kraus operator has rank above one.
    """
    states, effects = [], []
    for k in kraus_from_choi(ch).operators:
        u, s, vh = np.linalg.svd(k)
        if s.size > 1 and s[1] > tol * max(1.0, s[0]):
            return None
        a = u[:, 0]
        b = vh[0].conj() * s[0]
        states.append(np.outer(a, a.conj()))
        effects.append(np.outer(b, b.conj()))
    return states, effects


def holevo_verdict(ch: LinearMap) -> EbVerdict:
    form = holevo_form(ch)
    if form is None:
        return EbVerdict(Verdict.UNDECIDED, None, 0.0)
    return EbVerdict(Verdict.EB, Criterion.HOLEVO_FORM_WITNESS, 0.0)


def state_separable_2x2(rho) -> str:
    """``"separable"`` or ``"entangled"`` for a two-qubit density matrix."""
    rho = as_matrix(rho, "rho")
    if rho.shape != (4, 4):
        raise InvalidArgumentError("expected a 4x4 two-qubit density matrix")
    if maxabs(rho - rho.conj().T) > 1e-10 or abs(np.trace(rho) - 1) > 1e-9:
        raise InvalidArgumentError("rho must be Hermitian with unit trace")
    if min_eigenvalue(rho) < neg_threshold(rho):
        raise InvalidArgumentError("rho is not positive semidefinite")
    lam = pt_min_eigenvalue(rho, (2, 2))
    return "entangled" if lam < neg_threshold(rho) else "separable"


def is_eb(ch: LinearMap) -> bool:
    return eb_verdict(ch).is_eb

