"""Filter strategies: chains, negativity-driven searches and the d >= 3 counterexample.

A filter chain interleaves ``n`` applications of a noise channel with
``n - 1`` filters. The searches maximise the negativity of the chain's Choi
matrix; any strictly positive value is a certificate that some filtering
strategy keeps entanglement alive, so the results are lower-bound evidence
on the filtered indices and never a proof of optimality.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy.linalg import expm
from scipy.optimize import minimize
from scipy.spatial.transform import Rotation
from sklearn.base import BaseEstimator

from .channels import (
    Channel,
    LinearMap,
    as_channel,
    bloch_from_channel,
    compose,
    conjugate_by,
    kraus_from_choi,
)
from .exceptions import InvalidArgumentError
from .indices import (
    Certificate,
    CertificateKind,
    IndexResult,
    divergence_check,
    n_index,
    special_svd,
)
from .matlin import as_matrix, maxabs, partial_transpose, random_unitary_matrix
from .separability import Verdict, neg_threshold, recognize_family
from .zoo import Werner, cex_filter, depolarizing, transposition, unitary_from_rotation, werner

NOT_EB_THRESHOLD = 1e-7
COUNTEREVIDENCE_MARGIN = 1e-6
MINOR_TOL = 1e-10


# -- objective ---------------------------------------------------------------

def _pt_eigvals(rho: np.ndarray) -> np.ndarray:
    d = int(round(math.sqrt(rho.shape[0])))
    pt = partial_transpose(rho, (d, d), "second")
    return np.linalg.eigvalsh(0.5 * (pt + pt.conj().T))


def negativity(rho) -> float:
    """Sum of the magnitudes of the negative eigenvalues of the partial transpose.

    Eigenvalues above the PPT threshold used by the EB verdicts count as
    zero, so ``negativity(choi) > 0`` exactly when the PPT test fails.
    """
    rho = as_matrix(rho, "rho")
    n = rho.shape[0]
    d = int(round(math.sqrt(n)))
    if rho.shape != (n, n) or d * d != n:
        raise InvalidArgumentError("negativity expects a d^2 x d^2 bipartite state")
    scale = 1.0 + maxabs(rho)
    if maxabs(rho - rho.conj().T) > 1e-10 * scale or abs(np.trace(rho) - 1.0) > 1e-9:
        raise InvalidArgumentError("rho must be Hermitian with unit trace")
    if np.linalg.eigvalsh(0.5 * (rho + rho.conj().T))[0] < neg_threshold(rho):
        raise InvalidArgumentError("rho is not positive semidefinite")
    w = _pt_eigvals(rho)
    if w[0] >= neg_threshold(rho):
        return 0.0
    return float(-np.sum(w[w < 0]))


def _raw_negativity(choi: np.ndarray) -> float:
    w = _pt_eigvals(choi)
    return float(-np.sum(w[w < 0]))


# -- chains ------------------------------------------------------------------

@dataclass(frozen=True)
class FilterChain:
    """``noise f1 noise f2 ... f_{n-1} noise`` (rightmost acts first)."""

    noise: LinearMap
    filters: Tuple[LinearMap, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "filters", tuple(self.filters))
        d = self.noise.dim_in
        if not self.noise.is_square or any(f.dim_in != d or f.dim_out != d for f in self.filters):
            raise InvalidArgumentError("noise and filters must act on one common dimension")

    @property
    def chain_length(self) -> int:
        return len(self.filters) + 1

    def factors(self) -> List[LinearMap]:
        out = [self.noise]
        for f in self.filters:
            out += [f, self.noise]
        return out

    @cached_property
    def composed(self) -> LinearMap:
        return compose(*self.factors())

    def recompute(self) -> LinearMap:
        return compose(*self.factors())


# -- parameterisations -------------------------------------------------------

def gell_mann_basis(d: int) -> np.ndarray:
    """The ``d**2 - 1`` generalized Gell-Mann matrices, shape ``(d*d - 1, d, d)``."""
    mats = []
    for j in range(d):
        for k in range(j + 1, d):
            m = np.zeros((d, d), dtype=complex)
            m[j, k] = m[k, j] = 1.0
            mats.append(m)
            m = np.zeros((d, d), dtype=complex)
            m[j, k], m[k, j] = -1j, 1j
            mats.append(m)
    for l in range(1, d):
        diag = np.zeros(d)
        diag[:l] = 1.0
        diag[l] = -l
        mats.append(np.diag(diag * math.sqrt(2.0 / (l * (l + 1)))).astype(complex))
    return np.array(mats)


def unitary_from_angles(theta, basis: np.ndarray) -> np.ndarray:
    """``exp(i sum_k theta_k G_k)``."""
    h = np.tensordot(np.asarray(theta, dtype=float), basis, axes=1)
    return expm(1j * h)


def _unitary_superop(u: np.ndarray) -> np.ndarray:
    return np.kron(u, u.conj())


def isometry_from_params(x, d: int, env_dim: int) -> np.ndarray:
    """Polar part of a free complex ``(d*env_dim) x d`` matrix."""
    x = np.asarray(x, dtype=float)
    m = d * env_dim * d
    z = (x[:m] + 1j * x[m:]).reshape(d * env_dim, d)
    u, _, vh = np.linalg.svd(z, full_matrices=False)
    return u @ vh


def params_from_isometry(v: np.ndarray) -> np.ndarray:
    flat = np.asarray(v, dtype=complex).reshape(-1)
    return np.concatenate([flat.real, flat.imag])


def _isometry_superop(v: np.ndarray, d: int, env_dim: int) -> np.ndarray:
    t = v.reshape(d, env_dim, d)
    return sum(np.kron(t[:, k, :], t[:, k, :].conj()) for k in range(env_dim))


def isometry_from_channel(ch: LinearMap, env_dim: Optional[int] = None) -> np.ndarray:
    """Stinespring isometry ``|j> -> sum_k K_k|j> (x) |k>`` (system first)."""
    d = ch.dim_in
    env_dim = d * d if env_dim is None else env_dim
    ops = list(kraus_from_choi(ch).operators)
    if len(ops) > env_dim:
        raise InvalidArgumentError(f"{len(ops)} Kraus operators do not fit an environment of dim {env_dim}")
    ops += [np.zeros((ch.dim_out, d), dtype=complex)] * (env_dim - len(ops))
    v = np.zeros((ch.dim_out * env_dim, d), dtype=complex)
    for k, op in enumerate(ops):
        v[k::env_dim, :] = op
    return v


def _chain_superop(noise_sup: np.ndarray, filter_sups: Sequence[np.ndarray]) -> np.ndarray:
    s = noise_sup
    for f in filter_sups:
        s = noise_sup @ f @ s
    return s


def _choi_of_superop(sup: np.ndarray, d: int) -> np.ndarray:
    return sup.reshape(d, d, d, d).transpose(0, 2, 1, 3).reshape(d * d, d * d) / d


# -- reports -----------------------------------------------------------------

@dataclass(frozen=True)
class SearchReport:
    """Best negativity found by a filter search (lower-bound evidence only)."""

    kind: str
    n: int
    best_objective: float
    best_parameters: Tuple[float, ...]
    restarts: int
    evaluations: int
    seed: int
    dim: int
    flag_conjecture_counterevidence: Optional[bool] = None
    unitary_best_objective: Optional[float] = None

    @property
    def flag_not_eb(self) -> bool:
        return self.best_objective > NOT_EB_THRESHOLD

    @property
    def evidence(self) -> str:
        """``not_eb_found``; otherwise ``no_violation_found`` (qubits) or ``undecided``."""
        if self.flag_not_eb:
            return "not_eb_found"
        return "no_violation_found" if self.dim == 2 else "undecided"

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "n": self.n,
            "best_objective": self.best_objective,
            "best_parameters": list(self.best_parameters),
            "restarts": self.restarts,
            "evaluations": self.evaluations,
            "seed": self.seed,
            "flag_not_eb": self.flag_not_eb,
            "flag_conjecture_counterevidence": self.flag_conjecture_counterevidence,
            "unitary_best_objective": self.unitary_best_objective,
            "evidence": self.evidence,
            "lower_bound_only": True,
        }


# -- searches ----------------------------------------------------------------

def _multistart(objective, dim: int, restarts: int, max_evals: int, seed: int,
                init_scale: float, starts: Sequence[np.ndarray] = ()):
    """Maximise ``objective`` by Nelder-Mead from seeded random starts.

    Restart ``r`` draws from its own generator seeded by ``(seed, r)``; the
    explicit ``starts`` replace the first draws. Ties keep the lowest index.
    """
    best_val, best_x, evals = -np.inf, None, 0
    for r in range(restarts):
        rng = np.random.default_rng([seed, r])
        x0 = np.asarray(starts[r], dtype=float) if r < len(starts) else rng.normal(scale=init_scale, size=dim)
        res = minimize(lambda x: -objective(x), x0, method="Nelder-Mead",
                       options={"maxfev": max_evals, "xatol": 1e-10, "fatol": 1e-10})
        evals += int(res.nfev)
        val = -float(res.fun)
        f0 = objective(x0)
        evals += 1
        if f0 > val:
            val, res.x = f0, x0
        if val > best_val:
            best_val, best_x = val, np.array(res.x, dtype=float)
    return (best_val if best_val > 0 else 0.0), best_x, evals


class UnitaryFilterSearch(BaseEstimator):
    """Search unitary filters maximising the Choi negativity of a chain of length ``n``.

    Parameters
    ----------
    n : int
        Number of noise applications (``n - 1`` filters).
    restarts : int
        Independent Nelder-Mead runs.
    max_evals : int
        Function evaluations per run.
    seed : int
        Base seed; restart ``r`` uses ``(seed, r)``.

    Attributes
    ----------
    report_ : SearchReport
    best_objective_ : float
    best_filters_ : list of Channel
    """

    def __init__(self, n: int = 2, restarts: int = 32, max_evals: int = 2000, seed: int = 0):
        self.n = n
        self.restarts = restarts
        self.max_evals = max_evals
        self.seed = seed

    def _check(self, noise: LinearMap) -> Channel:
        if self.n < 2:
            raise InvalidArgumentError("filter searches need n >= 2")
        if self.restarts < 1 or self.max_evals < 1:
            raise InvalidArgumentError("restarts and max_evals must be positive")
        noise = noise if isinstance(noise, Channel) else as_channel(noise)
        if not noise.is_square:
            raise InvalidArgumentError("noise must have dim_in == dim_out")
        return noise

    def fit(self, noise: LinearMap, y=None):
        noise = self._check(noise)
        d = noise.dim_in
        basis = gell_mann_basis(d)
        k = basis.shape[0]
        nf = self.n - 1
        sup = np.asarray(noise.superop)

        def objective(x):
            fs = [_unitary_superop(unitary_from_angles(x[i * k:(i + 1) * k], basis)) for i in range(nf)]
            return _raw_negativity(_choi_of_superop(_chain_superop(sup, fs), d))

        best, x, evals = _multistart(objective, k * nf, self.restarts, self.max_evals,
                                     self.seed, init_scale=math.pi)
        self.best_filters_ = [conjugate_by(unitary_from_angles(x[i * k:(i + 1) * k], basis))
                              for i in range(nf)]
        self.best_objective_ = best
        self.report_ = SearchReport("unitary", self.n, best, tuple(float(v) for v in x),
                                    self.restarts, evals, self.seed, d)
        return self


class GeneralFilterSearch(BaseEstimator):
    """Search arbitrary channel filters, parameterised by Stinespring isometries.

    ``init_filters`` (one channel per slot) seeds the first restart. For
    qubit noise a unitary search with the same budget is also run and
    ``flag_conjecture_counterevidence`` records whether the general optimum
    beats it by more than ``1e-6``.
    """

    def __init__(self, n: int = 2, restarts: int = 32, max_evals: int = 2000, seed: int = 0,
                 env_dim: Optional[int] = None, init_filters: Optional[Sequence[LinearMap]] = None,
                 compare_unitary: bool = True):
        self.n = n
        self.restarts = restarts
        self.max_evals = max_evals
        self.seed = seed
        self.env_dim = env_dim
        self.init_filters = init_filters
        self.compare_unitary = compare_unitary

    def fit(self, noise: LinearMap, y=None):
        noise = UnitaryFilterSearch._check(self, noise)
        d = noise.dim_in
        env = d * d if self.env_dim is None else int(self.env_dim)
        nf = self.n - 1
        k = 2 * d * env * d
        sup = np.asarray(noise.superop)

        def filters_of(x):
            return [isometry_from_params(x[i * k:(i + 1) * k], d, env) for i in range(nf)]

        def objective(x):
            fs = [_isometry_superop(v, d, env) for v in filters_of(x)]
            return _raw_negativity(_choi_of_superop(_chain_superop(sup, fs), d))

        starts = []
        if self.init_filters is not None:
            if len(self.init_filters) != nf:
                raise InvalidArgumentError(f"init_filters needs {nf} channels")
            starts.append(np.concatenate([params_from_isometry(isometry_from_channel(f, env))
                                          for f in self.init_filters]))
        best, x, evals = _multistart(objective, k * nf, self.restarts, self.max_evals,
                                     self.seed, init_scale=1.0, starts=starts)
        self.best_filters_ = [as_channel(LinearMap.from_superop(_isometry_superop(v, d, env), d, d))
                              for v in filters_of(x)]
        self.best_objective_ = best
        flag, ubest = None, None
        if d == 2 and self.compare_unitary:
            u = UnitaryFilterSearch(self.n, self.restarts, self.max_evals, self.seed).fit(noise)
            ubest = u.best_objective_
            flag = bool(best > ubest + COUNTEREVIDENCE_MARGIN)
        self.report_ = SearchReport("general", self.n, best, tuple(float(v) for v in x),
                                    self.restarts, evals, self.seed, d,
                                    flag_conjecture_counterevidence=flag,
                                    unitary_best_objective=ubest)
        return self


def unitary_filter_search(noise: LinearMap, n: int, restarts: int = 32, seed: int = 0,
                          max_evals: int = 2000) -> SearchReport:
    return UnitaryFilterSearch(n, restarts, max_evals, seed).fit(noise).report_


def general_filter_search(noise: LinearMap, n: int, restarts: int = 32, seed: int = 0,
                          max_evals: int = 2000, init_filters=None,
                          compare_unitary: bool = True) -> SearchReport:
    return GeneralFilterSearch(n, restarts, max_evals, seed, init_filters=init_filters,
                               compare_unitary=compare_unitary).fit(noise).report_


# -- single repeated unitary -------------------------------------------------

def _euler_grid(steps: int):
    a = np.linspace(0.0, 2 * math.pi, steps, endpoint=False)
    b = np.linspace(0.0, math.pi, steps)
    for x, y, z in itertools.product(a, b, a):
        yield _rot_zyz(x, y, z)


def _rot_zyz(a: float, b: float, c: float) -> np.ndarray:
    def rz(t):
        return np.array([[math.cos(t), -math.sin(t), 0], [math.sin(t), math.cos(t), 0], [0, 0, 1]])

    def ry(t):
        return np.array([[math.cos(t), 0, math.sin(t)], [0, 1, 0], [-math.sin(t), 0, math.cos(t)]])

    return rz(a) @ ry(b) @ rz(c)


def _rotated(noise: LinearMap, o: np.ndarray) -> Channel:
    return compose(conjugate_by(unitary_from_rotation(o)), noise)


def single_unitary_index_max(noise: LinearMap, grid: int = 6, cap: int = 64,
                             refine: int = 4, seed: int = 0) -> IndexResult:
    """Largest ``n(U noise)`` found over qubit unitaries ``U`` (a lower bound on the maximum).

    Infinite when the image of the Bloch sphere reaches a pure state and the
    noise is not EB. Otherwise the Euler-angle grid, plus the rotation that
    aligns the special SVD factors, is scanned and the best few points are
    refined by maximising the negativity of ``(U noise)**n_best``.
    """
    noise = noise if isinstance(noise, Channel) else as_channel(noise)
    if noise.dim_in != 2 or noise.dim_out != 2:
        raise InvalidArgumentError("single_unitary_index_max is defined for qubit noise")
    div = divergence_check(noise)
    if div.certified:
        return IndexResult.infinite(Certificate(CertificateKind.PURE_STATE_IN_IMAGE,
                                                direction=tuple(div.witness)))
    b = bloch_from_channel(noise)
    cf = special_svd(b.M, b.c)
    candidates = [cf.O2.T @ cf.O1.T, np.eye(3)] + list(_euler_grid(grid))
    scored = []
    for o in candidates:
        r = n_index(_rotated(noise, o), cap)
        if r.is_undecided:
            return IndexResult.undecided(cap, Certificate(CertificateKind.ITERATED_PPT,
                                                          note="some rotated power reached the cap"))
        scored.append((r.n, o))
    n_best = max(s[0] for s in scored)
    top = [o for s, o in scored if s == n_best][:refine]
    rng = np.random.default_rng(seed)

    def objective(rv):
        o = Rotation.from_rotvec(rv).as_matrix()
        return _raw_negativity((_rotated(noise, o) ** n_best).choi)

    for o in top:
        x0 = Rotation.from_matrix(o).as_rotvec() + rng.normal(scale=1e-3, size=3)
        res = minimize(lambda x: -objective(x), x0, method="Nelder-Mead",
                       options={"maxfev": 400, "xatol": 1e-10, "fatol": 1e-12})
        if -res.fun > NOT_EB_THRESHOLD:
            r = n_index(_rotated(noise, Rotation.from_rotvec(res.x).as_matrix()), cap)
            if r.is_undecided:
                return IndexResult.undecided(cap, Certificate(CertificateKind.ITERATED_PPT))
            n_best = max(n_best, r.n)
    return IndexResult.finite(n_best, Certificate(CertificateKind.ITERATED_PPT,
                                                  note="maximum over sampled unitaries (lower bound)"))


# -- the d >= 3 counterexample ------------------------------------------------

def counterexample_chain(d: int, k: int) -> FilterChain:
    """``V psi V ... psi V`` with ``2k + 1`` Werner factors at ``eta = 1/(d-1)``."""
    if d < 3:
        raise InvalidArgumentError("counterexample requires d >= 3")
    if k < 0:
        raise InvalidArgumentError("k must be >= 0")
    v = werner(1.0 / (d - 1), d)
    psi = cex_filter(d)
    return FilterChain(v, (psi,) * (2 * k))


@dataclass(frozen=True)
class MinorCheck:
    entry00: complex
    entry0011: complex
    expected0011: float
    matches: bool
    verdict: Verdict

    def to_dict(self) -> dict:
        return {"entry00": [self.entry00.real, self.entry00.imag],
                "entry0011": [self.entry0011.real, self.entry0011.imag],
                "expected0011": self.expected0011, "matches": self.matches,
                "verdict": self.verdict.value}


def choi_minor_check(chain: FilterChain) -> MinorCheck:
    """Read the ``{|00>, |11>}`` block of the Choi matrix of ``T o chain``.

    A zero diagonal entry next to a nonzero off-diagonal one makes the
    partial transpose of the chain's Choi matrix indefinite, hence NOT_EB.
    """
    d = chain.noise.dim_in
    tag = recognize_family(chain.noise)
    if d < 3 or not isinstance(tag, Werner) or abs(tag.eta - 1.0 / (d - 1)) > 1e-10:
        raise InvalidArgumentError("chain noise must be the Werner channel at eta = 1/(d-1), d >= 3")
    psi = cex_filter(d)
    if len(chain.filters) % 2 or any(not f.close_to(psi) for f in chain.filters):
        raise InvalidArgumentError("chain filters must be an even number of counterexample filters")
    k = len(chain.filters) // 2
    r = compose(transposition(d), chain.composed).choi
    e00 = complex(r[0, 0])
    e0011 = complex(r[0, d + 1])
    expected = -1.0 / (d * (d - 1) ** (2 * k + 1))
    ok = abs(e00) <= MINOR_TOL and abs(e0011 - expected) <= MINOR_TOL
    verdict = Verdict.NOT_EB if abs(e00) <= MINOR_TOL and abs(e0011) > MINOR_TOL else Verdict.UNDECIDED
    return MinorCheck(e00, e0011, expected, bool(ok), verdict)


@dataclass(frozen=True)
class WernerFutility:
    identity_error: float
    max_error: float
    samples: int
    eb: bool

    @property
    def holds(self) -> bool:
        return self.max_error <= 1e-10 and self.identity_error <= 1e-10

    def to_dict(self) -> dict:
        return {"identity_error": self.identity_error, "max_error": self.max_error,
                "samples": self.samples, "eb": self.eb, "holds": self.holds}


def werner_unitary_futility(eta: float, d: int, samples: int = 100, seed: int = 0) -> WernerFutility:
    """Check ``V U V = conj(U) D_{eta^2}`` on sampled unitaries, and the EB closed form."""
    if d < 3:
        raise InvalidArgumentError("werner_unitary_futility requires d >= 3")
    v = werner(eta, d)
    dep = depolarizing(eta * eta, d)
    id_err = maxabs(compose(v, v).choi - dep.choi)
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(samples):
        u = random_unitary_matrix(d, rng)
        lhs = compose(v, conjugate_by(u), v)
        rhs = compose(conjugate_by(u.conj()), dep)
        worst = max(worst, maxabs(lhs.choi - rhs.choi))
    eb = eta * eta <= 1.0 / (d + 1) + 1e-12
    return WernerFutility(float(id_err), float(worst), samples, bool(eb))


# -- conjecture harness ------------------------------------------------------

@dataclass(frozen=True)
class ConjectureEvidence:
    samples: int
    counterevidence: Tuple[int, ...] = field(default=())
    max_gap: float = 0.0

    def to_dict(self) -> dict:
        return {"samples": self.samples, "counterevidence": list(self.counterevidence),
                "max_gap": self.max_gap}


def conjecture_harness(channels: Sequence[LinearMap], n: int = 2, restarts: int = 2,
                       max_evals: int = 300, seed: int = 0) -> ConjectureEvidence:
    """Compare general and unitary filter searches on qubit channels.

    Indices of channels where the general optimum beats the unitary one by
    more than ``1e-6`` are collected; they are evidence, not failures.
    """
    flagged, gap = [], 0.0
    for i, ch in enumerate(channels):
        rep = general_filter_search(ch, n, restarts, seed + i, max_evals)
        g = rep.best_objective - (rep.unitary_best_objective or 0.0)
        gap = max(gap, g)
        if rep.flag_conjecture_counterevidence:
            flagged.append(i)
    return ConjectureEvidence(len(channels), tuple(flagged), float(gap))
