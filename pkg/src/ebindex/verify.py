"""Named property suites used by ``ebindex verify``.

Each check returns a :class:`CheckResult`; a suite passes when all of its
checks do. The suites are small, seeded re-runs of the module invariants.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Dict, List

import numpy as np

from . import channels as ch
from . import zoo
from .exceptions import InvalidArgumentError
from .filters import (
    choi_minor_check,
    counterexample_chain,
    negativity,
    unitary_filter_search,
    werner_unitary_futility,
)
from .indices import (
    n_depolarizing_closed,
    n_gad_closed,
    n_index,
    nu_unital_qubit,
    special_svd,
)
from .matlin import herm_eig, jacobi_eigh, maxabs, partial_trace, schatten_norm
from .protocols import (
    decompose_chain,
    decompose_dpd,
    ea_probe,
    local_depolarizing_chain,
    majorizes,
    random_separable_map,
    reconstruct,
    stinespring_identity_check,
)
from .separability import Verdict, eb_sufficient_qubit, eb_unital_qubit, ppt_verdict


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    detail: str = ""

    def to_dict(self) -> dict:
        return {"name": self.name, "passed": self.passed, "detail": self.detail}


def _check(name: str, ok, detail: str = "") -> CheckResult:
    return CheckResult(name, bool(ok), detail)


# -- suites --------------------------------------------------------------------

def suite_algebra(seed: int) -> List[CheckResult]:
    rng = np.random.default_rng(seed)
    out = []
    a, b, c = (zoo.random_channel(2, seed=rng) for _ in range(3))
    err = maxabs(ch.compose(ch.compose(a, b), c).choi - ch.compose(a, ch.compose(b, c)).choi)
    out.append(_check("algebra.compose_associative", err < 1e-12, f"{err:.2e}"))
    k = ch.kraus_from_choi(a)
    err = maxabs(ch.choi_from_kraus(k).choi - a.choi)
    out.append(_check("algebra.kraus_round_trip", err < 1e-10, f"{err:.2e}"))
    bl = ch.bloch_from_channel(a)
    err = maxabs(ch.fano_choi(bl.M, bl.c) - a.choi)
    out.append(_check("algebra.bloch_round_trip", err < 1e-12, f"{err:.2e}"))
    err = maxabs(partial_trace(a.choi, (2, 2), "first") - np.eye(2) / 2)
    out.append(_check("algebra.choi_trace_preserving", err < 1e-12, f"{err:.2e}"))
    t = ch.tensor(a, b)
    err = maxabs(partial_trace(t.choi, (4, 4), "first") - np.eye(4) / 4)
    out.append(_check("algebra.tensor_trace_preserving", err < 1e-12, f"{err:.2e}"))
    err = maxabs(ch.compose(zoo.depolarizing(0.5), zoo.depolarizing(0.6)).choi - zoo.depolarizing(0.3).choi)
    out.append(_check("algebra.depolarizing_composition", err < 1e-14, f"{err:.2e}"))
    p = zoo.reduction_map()
    err = maxabs(ch.compose(p, p).choi - ch.identity_map(4).choi)
    out.append(_check("algebra.reduction_involution", err < 1e-14, f"{err:.2e}"))
    h = rng.standard_normal((6, 6)) + 1j * rng.standard_normal((6, 6))
    h = h + h.conj().T
    err = maxabs(jacobi_eigh(h).eigenvalues - herm_eig(h).eigenvalues)
    out.append(_check("algebra.jacobi_matches_eigh", err < 1e-10, f"{err:.2e}"))
    return out


def suite_eb_criteria(seed: int) -> List[CheckResult]:
    rng = np.random.default_rng(seed)
    mismatch, unital_bad, suff_bad, final_bad = 0, 0, 0, 0
    for _ in range(50):
        c = zoo.random_channel(2, env_dim=int(rng.integers(1, 5)), seed=rng)
        if (negativity(c.choi) > 0) != (ppt_verdict(c).value is Verdict.NOT_EB):
            mismatch += 1
        u = zoo.random_unital_qubit(rng)
        if eb_unital_qubit(ch.bloch_from_channel(u)).value is not ppt_verdict(u).value:
            unital_bad += 1
        b = ch.bloch_from_channel(c)
        if eb_sufficient_qubit(b).is_eb and not ppt_verdict(c).is_eb:
            suff_bad += 1
        k = rng.standard_normal((3, 3))
        slack = np.linalg.norm(k) - np.linalg.norm(k @ b.c) - np.linalg.norm(k @ b.M)
        final_bad += slack < -1e-9
    return [
        _check("eb.negativity_matches_ppt", mismatch == 0, f"{mismatch} mismatches"),
        _check("eb.unital_trace_norm_matches_ppt", unital_bad == 0, f"{unital_bad} mismatches"),
        _check("eb.sufficient_criterion_sound", suff_bad == 0, f"{suff_bad} violations"),
        _check("eb.norm_bound", final_bad == 0, f"{final_bad} violations"),
        _check("eb.werner_closed_form", ppt_verdict(zoo.werner(1 / 8, 3)).is_eb
               and ppt_verdict(zoo.werner(0.5, 3)).is_not_eb),
    ]


def suite_indices(seed: int) -> List[CheckResult]:
    rng = np.random.default_rng(seed)
    out = []
    bad = 0
    for _ in range(20):
        p, g = rng.random(), rng.random()
        o, cf = n_index(zoo.gad(p, g), 32), n_gad_closed(p, g)
        if o.is_finite and cf.is_finite and o.n != cf.n and cf.certificate.candidates is None:
            bad += 1
    out.append(_check("indices.gad_closed_vs_oracle", bad == 0, f"{bad} mismatches"))
    bad = 0
    for lam in rng.uniform(0, 0.95, 20):
        d = int(rng.integers(2, 5))
        if n_index(zoo.depolarizing(lam, d)).n != n_depolarizing_closed(lam, d).n:
            bad += 1
    out.append(_check("indices.depolarizing_closed_vs_oracle", bad == 0, f"{bad} mismatches"))
    bad = 0
    for _ in range(20):
        u = zoo.random_unital_qubit(rng)
        nu, n = nu_unital_qubit(ch.bloch_from_channel(u)), n_index(u)
        if nu.is_finite and n.is_finite and nu.n < n.n:
            bad += 1
    out.append(_check("indices.nu_upper_bounds_n", bad == 0, f"{bad} violations"))
    m = rng.standard_normal((3, 3))
    cf = special_svd(m)
    err = maxabs(cf.reconstruct() - m)
    dets = (np.linalg.det(cf.O1), np.linalg.det(cf.O2))
    out.append(_check("indices.special_svd", err < 1e-10 and max(abs(x - 1) for x in dets) < 1e-12,
                      f"{err:.2e}"))
    bad = 0
    for _ in range(50):
        L = zoo.random_pauli_diagonal(rng)
        k = int(rng.integers(1, 5))
        prod = np.diag(L)
        for _ in range(k):
            prod = prod @ zoo.random_so3(rng) @ np.diag(L)
        bad += schatten_norm(prod, 1) > schatten_norm(np.diag(L ** (k + 1)), 1) + 1e-9
    out.append(_check("indices.chain_norm_bound", bad == 0, f"{bad} violations"))
    return out


def suite_filters(seed: int) -> List[CheckResult]:
    out = []
    for d, k in [(3, 0), (3, 1), (3, 2), (4, 1)]:
        r = choi_minor_check(counterexample_chain(d, k))
        out.append(_check(f"filters.counterexample_minor_d{d}_k{k}", r.matches and r.verdict is Verdict.NOT_EB,
                          f"{r.entry0011.real:.6g}"))
    w = werner_unitary_futility(0.5, 3, samples=10, seed=seed)
    out.append(_check("filters.werner_unitary_futility", w.holds and w.eb, f"{w.max_error:.2e}"))
    rep = unitary_filter_search(zoo.depolarizing(0.6), 3, restarts=2, seed=seed, max_evals=200)
    out.append(_check("filters.depolarizing_search_finds_nothing", not rep.flag_not_eb,
                      f"{rep.best_objective:.2e}"))
    return out


def suite_protocols(seed: int) -> List[CheckResult]:
    rng = np.random.default_rng(seed)
    out = []
    lam, mu = rng.random(2)
    psi = random_separable_map(rng)
    terms = decompose_dpd(lam, mu, psi)
    err = maxabs(reconstruct(terms).choi - local_depolarizing_chain([lam, mu], [psi]).choi)
    wsum = sum(t.weight for t in terms)
    out.append(_check("protocols.dpd_reconstruction", err < 1e-10 and abs(wsum - 1) < 1e-12, f"{err:.2e}"))
    lams = list(rng.random(3))
    psis = [random_separable_map(rng), random_separable_map(rng, trace_preserving=False)]
    err = maxabs(reconstruct(decompose_chain(lams, psis)).choi - local_depolarizing_chain(lams, psis).choi)
    out.append(_check("protocols.chain_reconstruction", err < 1e-9, f"{err:.2e}"))
    lam = 3 ** (-1 / 3)
    chain = local_depolarizing_chain([lam] * 3, [random_separable_map(rng, False) for _ in range(2)])
    r = ea_probe(chain, 50, seed)
    out.append(_check("protocols.ea_probe_chain", r.passed))
    s = stinespring_identity_check(zoo.random_channel(2, seed=rng), [zoo.random_channel(2, seed=rng)])
    out.append(_check("protocols.stinespring_identity", s.holds, f"{s.max_error:.2e}"))
    out.append(_check("protocols.majorization", majorizes([0.5, 0.5], [1, 0]) and not majorizes([1, 0], [0.5, 0.5])))
    return out


SUITES: Dict[str, Callable[[int], List[CheckResult]]] = {
    "algebra": suite_algebra,
    "eb-criteria": suite_eb_criteria,
    "indices": suite_indices,
    "filters": suite_filters,
    "protocols": suite_protocols,
}


def run_suite(name: str, seed: int = 0) -> List[CheckResult]:
    if name == "all":
        return [r for key in SUITES for r in SUITES[key](seed)]
    if name not in SUITES:
        raise InvalidArgumentError(f"unknown suite {name!r}; choose from {sorted(SUITES) + ['all']}")
    return SUITES[name](seed)


def check_channel(m: ch.LinearMap) -> List[CheckResult]:
    """Channel invariants for a user-supplied map (Hermitian, CP, TP Choi matrix)."""
    j = m.choi
    herm = maxabs(j - j.conj().T)
    out = [_check("channel.hermitian_choi", herm <= 1e-10, f"{herm:.2e}")]
    lam = float(np.linalg.eigvalsh(0.5 * (j + j.conj().T))[0])
    out.append(_check("channel.completely_positive", lam >= -ch.CP_TOL * (1 + maxabs(j)), f"{lam:.2e}"))
    tp = maxabs(partial_trace(j, (m.dim_out, m.dim_in), "first") - np.eye(m.dim_in) / m.dim_in)
    out.append(_check("channel.trace_preserving", tp <= ch.TP_TOL, f"{tp:.2e}"))
    return out
