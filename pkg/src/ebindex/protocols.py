"""Two-qubit protocols: Stinespring dilation of filters, depolarizing-chain
decompositions, entanglement-annihilation probes and majorization.
"""

from __future__ import annotations

import enum
import hashlib
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import minimize
from scipy.spatial.transform import Rotation

from .channels import (
    Channel,
    KrausSet,
    LinearMap,
    as_channel,
    choi_from_kraus,
    compose,
    conjugate_by,
    identity_map,
    max_ent_state,
    mix,
    tensor,
)
from .exceptions import InvalidArgumentError
from .filters import isometry_from_channel
from .matlin import as_matrix, maxabs, orthonormal_completion, partial_trace
from .zoo import completely_depolarizing_to, depolarizing, random_isometry, reduction_map

WEIGHT_DROP = 1e-15
STINESPRING_TOL = 1e-8


# -- Stinespring dilation ----------------------------------------------------

def stinespring_unitary(ch: LinearMap, env_dim: Optional[int] = None) -> np.ndarray:
    """Unitary ``U`` on system (x) environment with ``U(x (x) |0>) = V x``.

    ``V`` is the Kraus isometry of ``ch``; the remaining columns are an
    orthonormal completion, interleaved so the environment index runs fastest.
    """
    d = ch.dim_in
    env = d * d if env_dim is None else env_dim
    v = isometry_from_channel(ch, env)
    full = orthonormal_completion(v)
    n = d * env
    u = np.zeros((n, n), dtype=complex)
    slots = [j * env for j in range(d)]
    rest = [i for i in range(n) if i not in set(slots)]
    u[:, slots] = full[:, :d]
    u[:, rest] = full[:, d:]
    return u


@dataclass(frozen=True)
class StinespringCheck:
    max_error: float
    unitarity_error: float

    @property
    def holds(self) -> bool:
        return self.max_error <= STINESPRING_TOL and self.unitarity_error <= 1e-10

    def to_dict(self) -> dict:
        return {"max_error": self.max_error, "unitarity_error": self.unitarity_error,
                "holds": self.holds}


def stinespring_identity_check(noise: LinearMap, filters: Sequence[LinearMap]) -> StinespringCheck:
    """Compare ``(chain) (x) D0`` with the chain of ``noise (x) D0`` and dilated filters.

    ``D0`` prepares the environment (dimension ``d**2``) in ``|0>``.
    """
    d = noise.dim_in
    env = d * d
    d0 = completely_depolarizing_to(0, env)
    big = tensor(noise, d0)
    lhs_parts, rhs_parts = [noise], [big]
    uerr = 0.0
    for f in filters:
        u = stinespring_unitary(f, env)
        uerr = max(uerr, maxabs(u.conj().T @ u - np.eye(u.shape[0])))
        lhs_parts += [f, noise]
        rhs_parts += [conjugate_by(u), big]
    lhs = tensor(compose(*lhs_parts), d0)
    rhs = compose(*rhs_parts)
    return StinespringCheck(float(maxabs(lhs.choi - rhs.choi)), float(uerr))


# -- depolarizing chain decomposition ----------------------------------------

class Shape(str, enum.Enum):
    PLAIN = "PLAIN"
    P_CONJUGATED = "P_CONJUGATED"
    RIGHT_DEGENERATE = "RIGHT_DEGENERATE"
    LEFT_DEGENERATE = "LEFT_DEGENERATE"


@dataclass(frozen=True)
class DecompositionTerm:
    """``weight * left... (D_Lambda (x) I) right...``.

    ``left`` holds ``(index, conjugated)`` pairs naming the filters before
    the depolarizing factor (``conjugated`` means ``P Psi P``); ``right``
    holds the plain filter indices after it.
    """

    weight: float
    map: LinearMap
    shape: Shape
    left: Tuple[Tuple[int, bool], ...] = ()
    right: Tuple[int, ...] = ()

    def to_dict(self) -> dict:
        digest = hashlib.sha256(np.round(self.map.choi, 10).tobytes()).hexdigest()[:16]
        return {"weight": self.weight, "shape": self.shape.value, "choi_digest": digest}


def _dep_local(x: float) -> LinearMap:
    return tensor(depolarizing(x, 2, check=False), identity_map(2))


def dpd_weights(lam: float, mu: float) -> Tuple[float, float, float]:
    """Weights of ``Psi D``, ``P Psi P D`` and ``D Psi`` (``D = D_{lam mu} (x) I``)."""
    lm = lam * mu
    a = (1 + lam) * (1 - mu) / (2 * (1 - lm))
    b = (1 - lam) * (1 - mu) / (2 * (1 + lm))
    c = mu * (1 - lam * lam) / (1 - lm * lm)
    return a, b, c


def _check_unit(x: float, name: str) -> float:
    if not 0.0 <= x <= 1.0:
        raise InvalidArgumentError(f"{name} must lie in [0, 1], got {x}")
    return float(x)


def _shape(left: Sequence[Tuple[int, bool]], n_filters: int) -> Shape:
    if any(c for _, c in left):
        return Shape.P_CONJUGATED
    if not left and n_filters > 0:
        return Shape.LEFT_DEGENERATE
    if len(left) == n_filters and n_filters > 0:
        return Shape.RIGHT_DEGENERATE
    return Shape.PLAIN


def _build(left, right, lam_prod, psis, p_map) -> LinearMap:
    parts = []
    for j, conj in left:
        parts += [p_map, psis[j], p_map] if conj else [psis[j]]
    parts.append(_dep_local(lam_prod))
    parts += [psis[j] for j in right]
    return compose(*parts)


def decompose_chain(lams: Sequence[float], psis: Sequence[LinearMap]) -> List[DecompositionTerm]:
    """Convex decomposition of ``(D_{l1} (x) I) Psi_1 ... Psi_{n-1} (D_{ln} (x) I)``.

    Each step absorbs one more ``Psi_k (D_{l_{k+1}} (x) I)`` into every term
    by the two-factor identity; weights below ``1e-15`` are dropped.
    """
    lams = [_check_unit(x, "lambda") for x in lams]
    if len(psis) != len(lams) - 1 or not lams:
        raise InvalidArgumentError("need n lambdas and n - 1 maps")
    if any(p.dim_in != 4 or p.dim_out != 4 for p in psis):
        raise InvalidArgumentError("maps must act on two qubits")
    p_map = reduction_map()
    # (weight, left, Lambda, right)
    terms = [(1.0, (), lams[0], ())]
    for k, psi in enumerate(psis):
        mu = lams[k + 1]
        nxt = []
        for w, left, big, right in terms:
            block = tuple(right) + (k,)
            if big * mu >= 1.0:
                nxt.append((w, left + tuple((j, False) for j in block), 1.0, ()))
                continue
            a, b, c = dpd_weights(big, mu)
            nxt.append((w * a, left + tuple((j, False) for j in block), big * mu, ()))
            nxt.append((w * b, left + tuple((j, True) for j in block), big * mu, ()))
            nxt.append((w * c, left, big * mu, block))
        terms = [t for t in nxt if t[0] >= WEIGHT_DROP]
    nf = len(psis)
    out = []
    for w, left, big, right in terms:
        shape = _shape(left, nf)
        if len(terms) == 1:
            shape = Shape.PLAIN
        out.append(DecompositionTerm(float(w), _build(left, right, big, psis, p_map), shape, left, right))
    return out


def decompose_dpd(lam: float, mu: float, psi: LinearMap) -> List[DecompositionTerm]:
    """The three-term identity for ``(D_lam (x) I) Psi (D_mu (x) I)``.

    Returns a single PLAIN term when ``lam * mu = 1``; otherwise always the
    three terms in the order ``Psi D``, ``P Psi P D``, ``D Psi`` (zero
    weights included).
    """
    lam = _check_unit(lam, "lambda")
    mu = _check_unit(mu, "mu")
    if psi.dim_in != 4 or psi.dim_out != 4:
        raise InvalidArgumentError("psi must act on two qubits")
    if lam * mu >= 1.0:
        return [DecompositionTerm(1.0, psi, Shape.PLAIN, ((0, False),), ())]
    p_map = reduction_map()
    a, b, c = dpd_weights(lam, mu)
    dep = _dep_local(lam * mu)
    return [
        DecompositionTerm(a, compose(psi, dep), Shape.RIGHT_DEGENERATE, ((0, False),), ()),
        DecompositionTerm(b, compose(p_map, psi, p_map, dep), Shape.P_CONJUGATED, ((0, True),), ()),
        DecompositionTerm(c, compose(dep, psi), Shape.LEFT_DEGENERATE, (), (0,)),
    ]


def local_depolarizing_chain(lams: Sequence[float], psis: Sequence[LinearMap]) -> LinearMap:
    """``(D_{l1} (x) I) Psi_1 (D_{l2} (x) I) ... Psi_{n-1} (D_{ln} (x) I)``."""
    parts = [_dep_local(lams[0])]
    for lam, psi in zip(lams[1:], psis):
        parts += [psi, _dep_local(lam)]
    return compose(*parts)


def reconstruct(terms: Sequence[DecompositionTerm]) -> LinearMap:
    return mix([t.weight for t in terms], [t.map for t in terms])


def decomposition_report(terms: Sequence[DecompositionTerm]) -> list:
    return [t.to_dict() for t in terms]


# -- separable maps ----------------------------------------------------------

def separable_map(pairs: Sequence[Tuple[np.ndarray, np.ndarray]]) -> LinearMap:
    """Map with Kraus operators ``A_i (x) B_i``."""
    ops = tuple(np.kron(as_matrix(a, "A"), as_matrix(b, "B")) for a, b in pairs)
    m = choi_from_kraus(KrausSet(ops))
    ks = KrausSet(ops)
    return as_channel(m) if ks.is_trace_preserving() else m


def random_separable_map(seed=None, trace_preserving: bool = True, outcomes: Optional[int] = None) -> LinearMap:
    """Random two-qubit separable map with product Kraus operators.

    Alice measures a random instrument and Bob applies a random instrument
    that depends on her outcome, so ``sum K^dagger K = 1``. Without trace
    preservation a random non-empty subset of the branches is kept, which
    models a post-selected record.
    """
    rng = np.random.default_rng(seed)
    m = int(rng.integers(1, 4)) if outcomes is None else int(outcomes)
    va = random_isometry(2, 2 * m, rng).reshape(2, m, 2)
    pairs = []
    for i in range(m):
        mb = int(rng.integers(1, 4))
        vb = random_isometry(2, 2 * mb, rng).reshape(2, mb, 2)
        for j in range(mb):
            pairs.append((va[:, i, :], vb[:, j, :]))
    if not trace_preserving:
        keep = rng.random(len(pairs)) < 0.5
        if not keep.any():
            keep[int(rng.integers(len(pairs)))] = True
        pairs = [p for p, k in zip(pairs, keep) if k]
    return separable_map(pairs)


# -- entanglement-annihilation probe -----------------------------------------

@dataclass(frozen=True)
class EAReport:
    passed: bool
    samples: int
    skipped: int = 0
    witness: Optional[np.ndarray] = None
    witness_index: Optional[int] = None
    diagnostic: Optional[str] = None

    def to_dict(self) -> dict:
        out = {"pass": self.passed, "samples": self.samples, "skipped": self.skipped}
        if self.witness is not None:
            out["witness"] = {"index": self.witness_index,
                              "re": self.witness.real.tolist(), "im": self.witness.imag.tolist()}
        if self.diagnostic:
            out["diagnostic"] = self.diagnostic
        return out


def _probe_state(kind: str, rng: np.random.Generator, exact: bool = False) -> np.ndarray:
    if kind == "pure":
        v = rng.standard_normal(4) + 1j * rng.standard_normal(4)
        v /= np.linalg.norm(v)
        return np.outer(v, v.conj())
    if kind == "mixed":
        g = rng.standard_normal((4, 4)) + 1j * rng.standard_normal((4, 4))
        r = g @ g.conj().T
        return r / np.trace(r).real
    eps = max_ent_state(2)
    if exact:
        return eps
    t = 0.05 * rng.random()
    return (1 - t) * eps + t * _probe_state("mixed", rng)


def probe_states(samples: int, seed=0) -> np.ndarray:
    """Inputs for :func:`ea_probe`: 50% pure, 30% Wishart mixed, 20% near ``|e><e|``.

    Sample ``i`` draws from its own generator seeded by ``(seed, i)``; sample
    0 is exactly the maximally entangled state.
    """
    out = np.empty((samples, 4, 4), dtype=complex)
    for i in range(samples):
        rng = np.random.default_rng([int(seed), i])
        slot = i % 10
        kind = "near" if slot < 2 else ("pure" if slot < 7 else "mixed")
        out[i] = _probe_state(kind, rng, exact=(i == 0))
    return out


def ea_probe(m: LinearMap, samples: int = 100, seed=0, states: Optional[np.ndarray] = None) -> EAReport:
    """Apply ``m`` to sampled two-qubit states and PPT-test every output.

    Outputs are renormalised; outputs with trace below ``1e-12`` are skipped.
    FAIL carries the first entangled output's input state as witness; a
    non-positive output is reported as a diagnostic naming the input.
    """
    if m.dim_in != 4 or m.dim_out != 4:
        raise InvalidArgumentError("ea_probe expects a two-qubit map")
    rhos = probe_states(samples, seed) if states is None else np.asarray(states, dtype=complex)
    outs = np.einsum("ij,nj->ni", m.superop, rhos.reshape(len(rhos), 16)).reshape(-1, 4, 4)
    outs = 0.5 * (outs + np.conj(np.transpose(outs, (0, 2, 1))))
    tr = np.real(np.einsum("nii->n", outs))
    live = tr >= 1e-12
    skipped = int(np.sum(~live))
    outs = outs[live] / tr[live, None, None]
    idx = np.flatnonzero(live)
    w = np.linalg.eigvalsh(outs)[:, 0]
    pts = outs.reshape(-1, 2, 2, 2, 2).transpose(0, 1, 4, 3, 2).reshape(-1, 4, 4)
    wpt = np.linalg.eigvalsh(pts)[:, 0]
    scale = np.max(np.abs(outs.reshape(len(outs), -1)), axis=1)
    thr = -1e-9 * (1.0 + scale)
    for k in range(len(outs)):
        if w[k] < thr[k]:
            i = int(idx[k])
            return EAReport(False, len(rhos), skipped, rhos[i], i,
                            f"output for input #{i} is not positive (min eigenvalue {w[k]:.3e})")
        if wpt[k] < thr[k]:
            i = int(idx[k])
            return EAReport(False, len(rhos), skipped, rhos[i], i)
    return EAReport(True, len(rhos), skipped)


# -- majorization ------------------------------------------------------------

def majorizes(p, q, tol: float = 1e-12) -> bool:
    """``p`` is majorized by ``q`` (``p < q``): q is at least as ordered as p.

    Equivalently every partial sum of the ascending-sorted ``p`` is at least
    the matching partial sum of ``q``, with equal totals.
    """
    p = np.asarray(p, dtype=float).reshape(-1)
    q = np.asarray(q, dtype=float).reshape(-1)
    if p.shape != q.shape:
        raise InvalidArgumentError("majorization needs vectors of equal length")
    if abs(p.sum() - q.sum()) > tol:
        return False
    cp = np.cumsum(np.sort(p))
    cq = np.cumsum(np.sort(q))
    return bool(np.all(cp >= cq - tol))


def _reduced_spectrum(psi, dims: Optional[Tuple[int, int]]) -> np.ndarray:
    psi = np.asarray(psi, dtype=complex)
    if psi.ndim == 1:
        n = psi.size
        rho = np.outer(psi, psi.conj())
    else:
        rho = as_matrix(psi, "state")
        n = rho.shape[0]
        if abs(np.trace(rho) - 1) > 1e-10 or maxabs(rho @ rho - rho) > 1e-10:
            raise InvalidArgumentError("state must be pure")
    if dims is None:
        d = int(round(np.sqrt(n)))
        dims = (d, n // d)
    if dims[0] * dims[1] != n:
        raise InvalidArgumentError(f"dims {dims} do not match a state of dimension {n}")
    if psi.ndim == 1 and abs(np.vdot(psi, psi) - 1) > 1e-10:
        raise InvalidArgumentError("state vector must be normalised")
    red = partial_trace(rho, dims, "first")
    return np.clip(np.linalg.eigvalsh(0.5 * (red + red.conj().T)), 0.0, None)


def nielsen_transformable(alpha, beta, dims: Optional[Tuple[int, int]] = None) -> bool:
    """Whether LOCC can turn pure ``alpha`` into pure ``beta`` exactly.

    True iff the reduced spectrum of ``alpha`` is majorized by that of
    ``beta``; states are vectors or rank-one density matrices.
    """
    a = _reduced_spectrum(alpha, dims)
    b = _reduced_spectrum(beta, dims)
    return majorizes(a, b, tol=1e-10)


# -- rotation aligning a vector with matrix rows ------------------------------

def row_norm_rotation(v, A, seed=0, restarts: int = 8) -> Tuple[np.ndarray, float]:
    """Search SO(3) for ``O`` with ``|(O v)_i| = |(O A)_i|`` row by row.

    ``v`` and ``A`` are first scaled to unit norm. Returns the best rotation
    and the residual ``max_i ||(O v)_i| - |(O A)_i||``; this is a numerical
    existence check only.
    """
    v = np.asarray(v, dtype=float).reshape(3)
    A = np.asarray(A, dtype=float).reshape(3, 3)
    v = v / np.linalg.norm(v)
    A = A / np.linalg.norm(A)

    def resid(x):
        o = Rotation.from_rotvec(x).as_matrix()
        return np.abs(o @ v) - np.linalg.norm(o @ A, axis=1)

    rng = np.random.default_rng(seed)
    best, best_x = np.inf, np.zeros(3)
    for _ in range(restarts):
        res = minimize(lambda x: float(np.sum(resid(x) ** 2)), rng.normal(scale=2.0, size=3),
                       method="Nelder-Mead", options={"xatol": 1e-12, "fatol": 1e-16, "maxfev": 4000})
        r = float(np.max(np.abs(resid(res.x))))
        if r < best:
            best, best_x = r, res.x
        if best < 1e-9:
            break
    return Rotation.from_rotvec(best_x).as_matrix(), best
