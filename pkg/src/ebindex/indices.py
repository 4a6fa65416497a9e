"""Entanglement-breaking indices: iterated, closed-form and Schatten-based.

``n(f)`` is the least number of serial applications of ``f`` whose
composition breaks entanglement. Closed forms are provided for the
generalized amplitude damping, depolarizing and generalized depolarizing
families, and the unitarily filtered index of unital qubit channels is read
off the Schatten norms of the Bloch matrix.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import brentq

from .channels import (
    BlochRep,
    Channel,
    LinearMap,
    as_channel,
    bloch_from_channel,
    compose,
    mix,
)
from .exceptions import InvalidArgumentError
from .matlin import maxabs
from .separability import Verdict, eb_verdict, ppt_verdict
from .zoo import GAD, Depolarizing, FamilyTag, GenDepolarizing, depolarizing, gad_threshold, gen_depolarizing

DEFAULT_CAP = 64
CEIL_TOL = 1e-9
SCHATTEN_TOL = 1e-9
PURE_TOL = 1e-9
DIVERGENCE_TOL = 1e-7
MU_BISECTION_STEPS = 60


class CertificateKind(str, enum.Enum):
    ITERATED_PPT = "ITERATED_PPT"
    CLOSED_FORM = "CLOSED_FORM"
    SCHATTEN_SEQUENCE = "SCHATTEN_SEQUENCE"
    PURE_STATE_IN_IMAGE = "PURE_STATE_IN_IMAGE"


@dataclass(frozen=True)
class Certificate:
    """Why an index has the value it has.

    Only the fields relevant to ``kind`` are populated: ``family`` for closed
    forms, ``direction`` for pure-state certificates, ``norms`` for Schatten
    sequences. ``candidates`` lists both adjacent indices when the input sat
    within tolerance of a jump.
    """

    kind: CertificateKind
    family: Optional[FamilyTag] = None
    direction: Optional[Tuple[float, ...]] = None
    norms: Optional[Tuple[float, ...]] = None
    candidates: Optional[Tuple[int, ...]] = None
    note: str = ""

    def to_dict(self) -> dict:
        out: dict = {"kind": self.kind.value}
        if self.family is not None:
            out["family"] = self.family.to_dict()
        if self.direction is not None:
            out["direction"] = [float(x) for x in self.direction]
        if self.norms is not None:
            out["norms"] = [float(x) for x in self.norms]
        if self.candidates is not None:
            out["candidates"] = list(self.candidates)
        if self.note:
            out["note"] = self.note
        return out


@dataclass(frozen=True)
class IndexResult:
    """``finite`` (with ``n``), ``infinite`` or ``undecided`` (with ``cap``)."""

    value: str
    certificate: Certificate
    n: Optional[int] = None
    cap: Optional[int] = None

    @classmethod
    def finite(cls, n: int, certificate: Certificate) -> "IndexResult":
        return cls("finite", certificate, n=int(n))

    @classmethod
    def infinite(cls, certificate: Certificate) -> "IndexResult":
        return cls("infinite", certificate)

    @classmethod
    def undecided(cls, cap: int, certificate: Certificate) -> "IndexResult":
        return cls("undecided", certificate, cap=int(cap))

    @property
    def is_finite(self) -> bool:
        return self.value == "finite"

    @property
    def is_infinite(self) -> bool:
        return self.value == "infinite"

    @property
    def is_undecided(self) -> bool:
        return self.value == "undecided"

    def as_number(self) -> float:
        """``n`` as a float, ``inf`` for infinite; raises when undecided."""
        if self.is_finite:
            return float(self.n)
        if self.is_infinite:
            return math.inf
        raise ValueError("undecided index has no numeric value")

    def to_dict(self) -> dict:
        out: dict = {"value": self.value, "certificate": self.certificate.to_dict()}
        if self.n is not None:
            out["n"] = self.n
        if self.cap is not None:
            out["cap"] = self.cap
        return out


# -- canonical form ----------------------------------------------------------

@dataclass(frozen=True)
class CanonicalForm:
    """``M = O1 @ diag(L) @ O2`` with ``O1, O2`` in SO(3) and ``t = O1.T @ c``."""

    L: np.ndarray
    t: np.ndarray
    O1: np.ndarray
    O2: np.ndarray

    def reconstruct(self) -> np.ndarray:
        return self.O1 @ np.diag(self.L) @ self.O2


def special_svd(M, c=None) -> CanonicalForm:
    """Singular value decomposition with both rotations in SO(3).

    The sign of det M is pushed onto the smallest entry of ``L``, so
    ``l1 >= l2 >= |l3|``. Passing the translation ``c`` of a Bloch form
    also returns its rotated copy ``t``.
    """
    M = np.asarray(M, dtype=float)
    if M.shape != (3, 3):
        raise InvalidArgumentError("special_svd expects a 3x3 real matrix")
    u, s, vt = np.linalg.svd(M)
    s = s.copy()
    if np.linalg.det(u) < 0:
        u[:, 2] *= -1
        s[2] *= -1
    if np.linalg.det(vt) < 0:
        vt[2, :] *= -1
        s[2] *= -1
    c = np.zeros(3) if c is None else np.asarray(c, dtype=float)
    return CanonicalForm(s, u.T @ c, u, vt)


# -- helpers -----------------------------------------------------------------

def _ceil_inclusive(x: float) -> Tuple[int, Optional[Tuple[int, int]]]:
    """Ceiling that resolves values within ``CEIL_TOL`` of an integer downward."""
    k = max(1, math.ceil(x - CEIL_TOL))
    near = round(x)
    if near >= 1 and abs(x - near) <= CEIL_TOL:
        return k, (int(near), int(near) + 1)
    return k, None


def _pure_fixed_point(b: BlochRep, tol: float = PURE_TOL) -> Optional[np.ndarray]:
    """A unit vector ``r`` with ``M r + c = r``, if one exists."""
    a = b.M - np.eye(3)
    r0, *_ = np.linalg.lstsq(a, -b.c, rcond=None)
    if np.linalg.norm(a @ r0 + b.c) > tol:
        return None
    _, s, vt = np.linalg.svd(a)
    null = vt[s <= tol * 10]
    n0 = float(np.linalg.norm(r0))
    if null.shape[0] == 0:
        return r0 / n0 if abs(n0 - 1.0) <= 1e-7 else None
    if n0 > 1.0 + 1e-7:
        return None
    # the minimum-norm solution is orthogonal to the null space
    return r0 + math.sqrt(max(0.0, 1.0 - n0 * n0)) * null[0]


def _check_cap(cap: int) -> int:
    if int(cap) != cap or cap < 1:
        raise InvalidArgumentError(f"cap must be a positive integer, got {cap}")
    return int(cap)


# -- direct index ------------------------------------------------------------

def n_index(ch: LinearMap, cap: int = DEFAULT_CAP) -> IndexResult:
    """Iterate ``ch`` and return the first power with an EB verdict.

    For qubits, a non-EB ``ch`` or ``ch**2`` that fixes a pure state can
    never become entanglement breaking; that is reported as infinite.
    Any UNDECIDED iterate makes the result undecided, never a guess.
    """
    cap = _check_cap(cap)
    ch = ch if isinstance(ch, Channel) else as_channel(ch)
    if not ch.is_square:
        raise InvalidArgumentError("n_index needs dim_in == dim_out")
    qubit = ch.dim_in == 2
    undecided_seen = False
    cur = ch
    for k in range(1, cap + 1):
        if k > 1:
            cur = compose(cur, ch)
        v = eb_verdict(cur)
        if v.value is Verdict.EB:
            if undecided_seen:
                return IndexResult.undecided(cap, Certificate(
                    CertificateKind.ITERATED_PPT, candidates=tuple(range(1, k + 1)),
                    note=f"power {k} is EB but an earlier power was undecided"))
            return IndexResult.finite(k, Certificate(CertificateKind.ITERATED_PPT))
        if v.value is Verdict.UNDECIDED:
            undecided_seen = True
        elif qubit and k <= 2:
            r = _pure_fixed_point(bloch_from_channel(cur))
            if r is not None:
                return IndexResult.infinite(Certificate(
                    CertificateKind.PURE_STATE_IN_IMAGE, direction=tuple(r),
                    note=f"power {k} fixes a pure state and is not EB"))
    return IndexResult.undecided(cap, Certificate(CertificateKind.ITERATED_PPT))


def n_gad_closed(p: float, gamma: float) -> IndexResult:
    """``ceil(log f(gamma) / log p)``, inclusive at the threshold."""
    if not (0.0 <= p <= 1.0 and 0.0 <= gamma <= 1.0):
        raise InvalidArgumentError(f"GAD parameters out of range: p={p}, gamma={gamma}")
    tag = GAD(float(p), float(gamma))
    f = gad_threshold(gamma)
    if p == 0.0 or p <= f:
        return IndexResult.finite(1, Certificate(CertificateKind.CLOSED_FORM, family=tag))
    if f <= 0.0 or p >= 1.0:
        return IndexResult.infinite(Certificate(CertificateKind.CLOSED_FORM, family=tag))
    n, cands = _ceil_inclusive(math.log(f) / math.log(p))
    return IndexResult.finite(n, Certificate(CertificateKind.CLOSED_FORM, family=tag, candidates=cands))


def n_depolarizing_closed(lam: float, d: int = 2) -> IndexResult:
    """``ceil(log(d+1) / log(1/lam))``; 1 for ``lam <= 1/(d+1)``, infinite at ``lam = 1``."""
    if d < 2:
        raise InvalidArgumentError("d must be >= 2")
    if not (-1.0 / (d * d - 1) - 1e-12 <= lam <= 1.0):
        raise InvalidArgumentError(f"lambda={lam} outside the CP range for d={d}")
    tag = Depolarizing(float(lam), int(d))
    if lam <= 1.0 / (d + 1):
        return IndexResult.finite(1, Certificate(CertificateKind.CLOSED_FORM, family=tag))
    if lam >= 1.0:
        return IndexResult.infinite(Certificate(CertificateKind.CLOSED_FORM, family=tag))
    n, cands = _ceil_inclusive(math.log(d + 1) / math.log(1.0 / lam))
    return IndexResult.finite(n, Certificate(CertificateKind.CLOSED_FORM, family=tag, candidates=cands))


def depolarizing_jumps(d: int, kmax: int) -> np.ndarray:
    """Values of ``lam`` at which the depolarizing index steps from k to k+1."""
    return np.array([(d + 1.0) ** (-1.0 / k) for k in range(1, kmax + 1)])


def _gen_dep_verdict(a: float, rho0: np.ndarray) -> Verdict:
    return ppt_verdict(gen_depolarizing(a, rho0)).value


def gen_depolarizing_mu(rho0, steps: int = MU_BISECTION_STEPS) -> Tuple[Optional[float], Optional[float]]:
    """Bracket ``(lo, hi)`` of the largest ``a`` with an EB generalized depolarizing map.

    ``lo`` is EB and ``hi`` is not (``hi`` is None when ``a = 1`` is EB).
    Returns ``(None, None)`` when some probe is undecided.
    """
    rho0 = np.asarray(rho0, dtype=complex)
    if np.linalg.eigvalsh(rho0)[-1] >= 1.0 - 1e-12:
        # pure rho0 is fixed by every member; the PPT margin vanishes only
        # quadratically in a, so bisection would stall at sqrt(tolerance)
        return 0.0, 0.0
    v1 = _gen_dep_verdict(1.0, rho0)
    if v1 is Verdict.UNDECIDED:
        return None, None
    if v1 is Verdict.EB:
        return 1.0, None
    lo, hi = 0.0, 1.0
    for _ in range(steps):
        mid = 0.5 * (lo + hi)
        v = _gen_dep_verdict(mid, rho0)
        if v is Verdict.UNDECIDED:
            return None, None
        if v is Verdict.EB:
            lo = mid
        else:
            hi = mid
    return lo, hi


def n_gen_depolarizing(lam: float, rho0) -> IndexResult:
    """Index of ``lam * id + (1 - lam) rho0 Tr`` through its EB threshold ``mu``.

    Powers stay in the family (``lam -> lam**n``), so ``n = ceil(log mu / log lam)``.
    Candidates near a jump are decided by a direct PPT test of the power.
    """
    rho0 = np.asarray(rho0, dtype=complex)
    ch = gen_depolarizing(lam, rho0)
    tag = GenDepolarizing(float(lam), rho0)
    d = rho0.shape[0]
    if lam < 0.0:
        return n_index(ch)
    lo, hi = gen_depolarizing_mu(rho0)
    if lo is None:
        return IndexResult.undecided(0, Certificate(
            CertificateKind.CLOSED_FORM, family=tag, note=f"PPT is inconclusive for d={d}"))
    if hi is None:
        # every member of the family is EB
        return IndexResult.finite(1, Certificate(CertificateKind.CLOSED_FORM, family=tag))
    if lam <= lo:
        return IndexResult.finite(1, Certificate(CertificateKind.CLOSED_FORM, family=tag))
    if lam >= 1.0:
        return IndexResult.infinite(Certificate(CertificateKind.CLOSED_FORM, family=tag))
    if lo <= 1e-8:
        # no EB member beyond the completely depolarizing one: iterate instead
        return n_index(ch)
    k_lo = max(1, math.ceil(math.log(hi) / math.log(lam) - CEIL_TOL))
    k_hi = max(1, math.ceil(math.log(lo) / math.log(lam) + CEIL_TOL))
    for k in range(k_lo, k_hi + 1):
        v = _gen_dep_verdict(lam ** k, rho0)
        if v is Verdict.EB:
            cands = (k_lo, k_hi) if k_hi > k_lo else None
            return IndexResult.finite(k, Certificate(CertificateKind.CLOSED_FORM, family=tag, candidates=cands))
    return IndexResult.finite(k_hi, Certificate(
        CertificateKind.CLOSED_FORM, family=tag, candidates=(k_lo, k_hi),
        note="no candidate power passed the direct test"))


# -- unital qubit channels ---------------------------------------------------

def nu_unital_qubit(b: BlochRep, max_n: int = 10_000) -> IndexResult:
    """Unitarily filtered index of a unital qubit channel: least n with ``||M||_n <= 1``."""
    if np.linalg.norm(b.c) > 1e-12:
        raise InvalidArgumentError("nu_unital_qubit needs a unital channel (c = 0)")
    s = np.linalg.svd(b.M, compute_uv=False)
    if s[0] >= 1.0 - 1e-12:
        if np.sum(s) <= 1.0 + SCHATTEN_TOL:
            return IndexResult.finite(1, Certificate(CertificateKind.SCHATTEN_SEQUENCE, norms=(float(np.sum(s)),)))
        _, _, vt = np.linalg.svd(b.M)
        return IndexResult.infinite(Certificate(
            CertificateKind.PURE_STATE_IN_IMAGE, direction=tuple(vt[0]),
            note="unit singular value"))
    norms = []
    for n in range(1, max_n + 1):
        val = float(np.sum(s ** n))
        norms.append(val)
        if val <= 1.0 + SCHATTEN_TOL:
            return IndexResult.finite(n, Certificate(CertificateKind.SCHATTEN_SEQUENCE, norms=tuple(norms)))
    return IndexResult.undecided(max_n, Certificate(CertificateKind.SCHATTEN_SEQUENCE))


def sphere_image_max(b: BlochRep) -> Tuple[float, np.ndarray]:
    """Maximum of ``|M r + c|`` over unit vectors ``r``, and a maximiser.

    Stationary points satisfy ``(M^T M - nu) r = -M^T c``; the maximum has
    ``nu`` above the top eigenvalue of ``M^T M`` and the secular equation is
    solved there by bracketing. When ``M^T c`` has no component on the top
    eigenspace the boundary case ``nu = a_max`` is checked first.
    """
    M, c = b.M, b.c
    a, q = np.linalg.eigh(M.T @ M)
    h = q.T @ (M.T @ c)
    amax = a[-1]
    top = a >= amax - 1e-12 * max(1.0, amax)
    h_top = float(np.linalg.norm(h[top]))
    h_all = float(np.linalg.norm(h))

    def r_of(nu):
        return q @ (h / (nu - a))

    if h_top <= 1e-14:
        y = np.zeros(3)
        rest = ~top
        y[rest] = h[rest] / (amax - a[rest])
        ny = float(np.linalg.norm(y))
        if ny <= 1.0 + 1e-12:
            slack = 1.0 - ny * ny
            y[np.argmax(top)] = math.sqrt(slack) if slack > 1e-12 else 0.0
            r = q @ y
            return float(np.linalg.norm(M @ r + c)), r
        lo = amax + 1e-300
    else:
        lo = amax + h_top
    hi = amax + h_all

    def secular(nu):
        return float(np.sum((h / (nu - a)) ** 2)) - 1.0

    if hi <= lo or secular(hi) >= 0.0:
        nu = hi
    else:
        if secular(lo) <= 0.0:
            lo = amax + 0.5 * h_top
        nu = brentq(secular, lo, hi, xtol=1e-15, rtol=1e-15, maxiter=500)
    r = r_of(nu)
    r = r / np.linalg.norm(r)
    return float(np.linalg.norm(M @ r + c)), r


@dataclass(frozen=True)
class DivergenceResult:
    certified: bool
    image_max: float
    witness: Optional[np.ndarray] = field(default=None, compare=False)

    def to_dict(self) -> dict:
        out = {"certified": self.certified, "image_max": float(self.image_max)}
        if self.witness is not None:
            out["witness"] = [float(x) for x in self.witness]
        return out


def divergence_check(ch: LinearMap) -> DivergenceResult:
    """Certify divergent filtered indices of a qubit channel.

    Certified when the image of the Bloch sphere reaches a pure state and the
    channel is not entanglement breaking. The witness is the input direction
    whose image is pure.
    """
    if ch.dim_in != 2 or ch.dim_out != 2:
        raise InvalidArgumentError("divergence_check is defined for qubit channels")
    val, r = sphere_image_max(bloch_from_channel(ch))
    if val >= 1.0 - DIVERGENCE_TOL and ppt_verdict(ch).value is Verdict.NOT_EB:
        return DivergenceResult(True, val, r)
    return DivergenceResult(False, val, None)


# -- depolarizing chains -----------------------------------------------------

@dataclass(frozen=True)
class FutilityReport:
    """Outcome of checking a filtered depolarizing chain.

    ``eb`` holds when the convex reconstruction reproduces the chain (every
    term contains an EB depolarizing factor) and, for qubits, PPT agrees.
    """

    eb: bool
    weights: Tuple[float, ...]
    reconstruction_error: float
    ppt: Optional[str]

    def to_dict(self) -> dict:
        return {"eb": self.eb, "weights": list(self.weights),
                "reconstruction_error": self.reconstruction_error, "ppt": self.ppt}


def depolarizing_chain(lam: float, d: int, filters: Sequence[LinearMap]) -> LinearMap:
    """``D f1 D f2 ... f_{n-1} D`` with ``D`` the depolarizing channel."""
    dep = depolarizing(lam, d)
    parts = [dep]
    for f in filters:
        parts += [f, dep]
    return compose(*parts)


def depolarizing_decomposition(lam: float, d: int, filters: Sequence[LinearMap]):
    """Weights and terms ``f1..fi D_{lam^n} f_{i+1}..f_{n-1}`` for i = 0..n-1."""
    n = len(filters) + 1
    ln = lam ** n
    dn = depolarizing(ln, d)
    weights, terms = [], []
    for i in range(n):
        weights.append(lam ** i * (1 - lam) / (1 - ln))
        terms.append(compose(*filters[:i], dn, *filters[i:]))
    return weights, terms


def depolarizing_filter_futility(lam: float, d: int, filters: Sequence[LinearMap],
                                 atol: float = 1e-9) -> FutilityReport:
    """Check that a depolarizing chain with ``lam**n <= 1/(d+1)`` breaks entanglement."""
    filters = [f if isinstance(f, Channel) else as_channel(f) for f in filters]
    n = len(filters) + 1
    if not (0.0 <= lam < 1.0):
        raise InvalidArgumentError(f"lambda must lie in [0, 1), got {lam}")
    if lam ** n > 1.0 / (d + 1) + 1e-12:
        raise InvalidArgumentError(f"lambda**n = {lam ** n:.6g} exceeds 1/(d+1) = {1.0 / (d + 1):.6g}")
    if any(f.dim_in != d or f.dim_out != d for f in filters):
        raise InvalidArgumentError("filters must act on the same dimension as the noise")
    chain = depolarizing_chain(lam, d, filters)
    weights, terms = depolarizing_decomposition(lam, d, filters)
    err = maxabs(mix(weights, terms).choi - chain.choi)
    ppt = None
    ok = err <= atol
    if d == 2:
        v = ppt_verdict(chain).value
        ppt = v.value
        ok = ok and v is Verdict.EB
    return FutilityReport(bool(ok), tuple(float(w) for w in weights), float(err), ppt)
