import math

import numpy as np
import pytest
from hypothesis import assume, given, strategies as st

from ebindex import zoo
from ebindex.channels import (
    BlochRep,
    bloch_from_channel,
    channel_from_bloch,
    compose,
    conjugate_by,
    identity_map,
    kraus_from_choi,
    mix,
)
from ebindex.exceptions import InvalidArgumentError
from ebindex.indices import (
    CertificateKind,
    IndexResult,
    depolarizing_chain,
    depolarizing_decomposition,
    depolarizing_filter_futility,
    depolarizing_jumps,
    divergence_check,
    gen_depolarizing_mu,
    n_depolarizing_closed,
    n_gad_closed,
    n_gen_depolarizing,
    n_index,
    nu_unital_qubit,
    special_svd,
    sphere_image_max,
)
from ebindex.matlin import maxabs, schatten_norm
from ebindex.separability import ppt_verdict

from strategies import seeds, unit

# frozen oracles
NU_DIAG_987_NORMS = (2.4, 1.94, 1.584, 1.3058, 1.08624, 0.911234)
GAD_HALF_RATIO = math.log(1 - 2 / (1 + math.sqrt(2))) / math.log(0.5)  # 2.5431...


# -- direct index ---------------------------------------------------------------

def test_n_index_depolarizing_06():
    r = n_index(zoo.depolarizing(0.6))
    assert r.is_finite and r.n == 3
    assert r.certificate.kind is CertificateKind.ITERATED_PPT


def test_n_index_amplitude_damping_is_infinite():
    r = n_index(zoo.gad(0.5, 1.0))
    assert r.is_infinite
    assert r.certificate.kind is CertificateKind.PURE_STATE_IN_IMAGE
    assert np.allclose(r.certificate.direction, [0, 0, 1], atol=1e-9)


def test_n_index_identity_is_infinite():
    assert n_index(identity_map(2)).is_infinite


@given(lam=st.floats(-1 / 3, 1 / 3))
def test_n_index_of_eb_channel_is_one(lam):
    assert n_index(zoo.depolarizing(lam)).n == 1


def test_n_index_flipped_amplitude_damping_is_finite():
    # X after amplitude damping reaches a pure state but has no pure fixed point
    x = conjugate_by(np.array([[0, 1], [1, 0]]))
    ch = compose(x, zoo.gad(0.5, 1.0))
    r = n_index(ch)
    assert r.is_finite and r.n == 3
    assert ppt_verdict(ch ** 2).is_not_eb and ppt_verdict(ch ** 3).is_eb
    assert divergence_check(ch).certified


def test_n_index_undecided_for_qutrit(rng):
    # a PPT qutrit power outside the recognised families never gets a verdict
    ch = mix([0.5, 0.5], [zoo.depolarizing(0.2, 3), zoo.completely_depolarizing_to(0, 3)])
    r = n_index(ch, cap=3)
    assert r.is_undecided and r.cap == 3
    with pytest.raises(ValueError):
        r.as_number()


def test_n_index_cap_reached():
    r = n_index(zoo.depolarizing(0.99), cap=4)
    assert r.is_undecided


def test_n_index_bad_cap():
    with pytest.raises(InvalidArgumentError):
        n_index(zoo.depolarizing(0.5), cap=0)


@given(seed=seeds)
def test_n_index_unitary_invariance(seed):
    rng = np.random.default_rng(seed)
    ch = zoo.random_channel(2, env_dim=2, seed=rng)
    n = n_index(ch, cap=6)
    assume(n.is_finite)
    u = zoo.random_unitary(2, seed=rng)
    u_dag = conjugate_by(np.linalg.inv(_unitary(u)))
    assert n_index(compose(u, ch, u_dag), cap=6).n == n.n


def _unitary(ch):
    return kraus_from_choi(ch).operators[0]


def test_index_result_api():
    f = IndexResult.finite(3, n_index(zoo.depolarizing(0.6)).certificate)
    assert f.as_number() == 3.0
    assert f.to_dict()["n"] == 3
    inf = n_index(zoo.gad(0.5, 1.0))
    assert inf.as_number() == math.inf
    assert inf.to_dict()["certificate"]["kind"] == "PURE_STATE_IN_IMAGE"


# -- closed forms ---------------------------------------------------------------

def test_gad_closed_examples():
    assert n_gad_closed(0.5, 0.5).n == 3
    assert GAD_HALF_RATIO == pytest.approx(2.5431, abs=1e-4)
    assert n_gad_closed(0.7, 1.0).is_infinite
    assert n_gad_closed(0.1, 0.5).n == 1
    assert n_gad_closed(0.0, 1.0).n == 1


def test_gad_closed_boundary_candidates():
    f = zoo.gad_threshold(0.5)
    r = n_gad_closed(math.sqrt(f), 0.5)  # ratio exactly 2
    assert r.n == 2
    assert r.certificate.candidates == (2, 3)


# parameters at denormal scale sit below every PPT tolerance, so keep away from them
gad_p = st.just(0.0) | st.floats(1e-4, 0.97)
gad_gamma = st.sampled_from([0.0, 1.0]) | st.floats(1e-4, 1 - 1e-4)


@given(p=gad_p, gamma=gad_gamma)
def test_gad_closed_matches_oracle(p, gamma):
    cf = n_gad_closed(p, gamma)
    o = n_index(zoo.gad(p, gamma), cap=64)
    assume(not o.is_undecided)
    if cf.is_infinite or o.is_infinite:
        assert cf.value == o.value
        return
    accepted = {cf.n} | set(cf.certificate.candidates or ())
    assert o.n in accepted


def test_gad_closed_range():
    with pytest.raises(InvalidArgumentError):
        n_gad_closed(1.2, 0.5)


def test_depolarizing_closed_examples():
    assert n_depolarizing_closed(0.6, 2).n == 3
    r = n_depolarizing_closed(0.5, 3)
    assert r.n == 2 and r.certificate.candidates == (2, 3)
    assert n_depolarizing_closed(1.0, 2).is_infinite
    assert n_depolarizing_closed(-1 / 3, 2).n == 1


@given(lam=st.floats(-1 / 15, 0.95), d=st.integers(2, 4))
def test_depolarizing_closed_matches_oracle(lam, d):
    assume(lam >= -1 / (d * d - 1))
    cf = n_depolarizing_closed(lam, d)
    o = n_index(zoo.depolarizing(lam, d), cap=64)
    accepted = {cf.n} | set(cf.certificate.candidates or ())
    assert o.n in accepted


def test_depolarizing_jumps():
    j = depolarizing_jumps(2, 3)
    assert np.allclose(j, [1 / 3, 3 ** -0.5, 3 ** (-1 / 3)], atol=1e-15)


def test_gen_depolarizing_mu_maximally_mixed():
    lo, hi = gen_depolarizing_mu(np.eye(2) / 2)
    assert lo == pytest.approx(1 / 3, abs=1e-8)
    assert hi == pytest.approx(1 / 3, abs=1e-8)


def test_gen_depolarizing_below_mu():
    assert n_gen_depolarizing(0.2, np.eye(2) / 2).n == 1


@pytest.mark.parametrize("lam", [0.3, 0.5, 0.8])
def test_gen_depolarizing_pure_matches_oracle(lam):
    rho0 = np.diag([1.0, 0.0])
    r = n_gen_depolarizing(lam, rho0)
    o = n_index(zoo.gen_depolarizing(lam, rho0))
    assert r.value == o.value and r.n == o.n


@given(lam=st.floats(0.0, 0.9), w=st.floats(0.55, 0.95))
def test_gen_depolarizing_mixed_matches_oracle(lam, w):
    rho0 = np.diag([w, 1 - w])
    r = n_gen_depolarizing(lam, rho0)
    o = n_index(zoo.gen_depolarizing(lam, rho0), cap=64)
    assume(o.is_finite)
    accepted = {r.n} | set(r.certificate.candidates or ())
    assert o.n in accepted


# -- unital qubit channels -----------------------------------------------------

def test_nu_diag_example():
    r = nu_unital_qubit(BlochRep(np.diag([0.9, 0.8, 0.7])))
    assert r.n == 6
    assert np.allclose(r.certificate.norms, NU_DIAG_987_NORMS, atol=1e-12)


@given(lam=st.floats(-1 / 3, 0.95))
def test_nu_of_depolarizing_is_closed_form(lam):
    r = nu_unital_qubit(BlochRep(lam * np.eye(3)))
    cf = n_depolarizing_closed(lam, 2)
    assert r.n in {cf.n} | set(cf.certificate.candidates or ())


def test_nu_unit_singular_value_infinite():
    r = nu_unital_qubit(BlochRep(np.diag([1.0, 0.5, 0.5])))
    assert r.is_infinite


def test_nu_rejects_non_unital():
    with pytest.raises(InvalidArgumentError):
        nu_unital_qubit(BlochRep(np.eye(3) * 0.5, [0, 0, 0.1]))


@given(seed=seeds)
def test_nu_upper_bounds_n(seed):
    ch = zoo.random_unital_qubit(seed)
    nu = nu_unital_qubit(bloch_from_channel(ch))
    n = n_index(ch, cap=64)
    assume(nu.is_finite and n.is_finite)
    assert nu.n >= n.n


@given(seed=seeds, k=st.integers(1, 4))
def test_chain_norm_bound(seed, k):
    rng = np.random.default_rng(seed)
    L = np.diag(zoo.random_pauli_diagonal(rng))
    prod = L
    for _ in range(k):
        prod = prod @ zoo.random_so3(rng) @ L
    assert schatten_norm(prod, 1) <= schatten_norm(np.linalg.matrix_power(L, k + 1), 1) + 1e-9


@given(seed=seeds, transpose=st.booleans())
def test_norm_bound(seed, transpose):
    rng = np.random.default_rng(seed)
    b = bloch_from_channel(zoo.random_channel(2, env_dim=int(rng.integers(1, 5)), seed=rng))
    M = b.M @ np.diag([1, -1, 1]) if transpose else b.M  # positive, maybe not CP
    K = rng.standard_normal((3, 3))
    lhs = np.linalg.norm(K @ b.c) + np.linalg.norm(K @ M)
    assert lhs <= np.linalg.norm(K) + 1e-9


@given(seed=seeds)
def test_nu_two_means_filtered_chains_break(seed):
    rng = np.random.default_rng(seed)
    L = zoo.random_pauli_diagonal(rng)
    assume(np.sum(np.abs(L)) > 1 + 1e-6 and np.sum(L ** 2) <= 1 - 1e-6)
    M = zoo.random_so3(rng) @ np.diag(L) @ zoo.random_so3(rng)
    phi = channel_from_bloch(M)
    assert nu_unital_qubit(bloch_from_channel(phi)).n == 2
    psi = zoo.random_channel(2, seed=rng)
    assert ppt_verdict(compose(phi, psi, phi)).is_eb


# -- canonical form ------------------------------------------------------------

def test_special_svd_identity():
    cf = special_svd(np.eye(3))
    assert np.allclose(cf.L, 1.0)
    assert maxabs(cf.reconstruct() - np.eye(3)) <= 1e-15


def test_special_svd_negative_determinant():
    cf = special_svd(np.diag([1.0, 1.0, -1.0]))
    assert np.allclose(cf.L, [1, 1, -1])


@given(seed=seeds)
def test_special_svd_round_trip(seed):
    rng = np.random.default_rng(seed)
    M = rng.standard_normal((3, 3))
    c = rng.standard_normal(3)
    cf = special_svd(M, c)
    assert maxabs(cf.reconstruct() - M) <= 1e-10
    assert np.linalg.det(cf.O1) == pytest.approx(1, abs=1e-12)
    assert np.linalg.det(cf.O2) == pytest.approx(1, abs=1e-12)
    assert cf.L[0] >= cf.L[1] >= abs(cf.L[2]) - 1e-15
    assert maxabs(cf.O1 @ cf.t - c) <= 1e-12


def test_special_svd_shape():
    with pytest.raises(InvalidArgumentError):
        special_svd(np.eye(2))


# -- divergence ----------------------------------------------------------------

def test_sphere_image_max_examples():
    assert sphere_image_max(BlochRep(np.eye(3)))[0] == pytest.approx(1.0)
    assert sphere_image_max(BlochRep(np.zeros((3, 3)), [0, 0, 0.3]))[0] == pytest.approx(0.3)
    val, r = sphere_image_max(bloch_from_channel(zoo.gad(0.5, 1.0)))
    assert val == pytest.approx(1.0, abs=1e-12)
    assert np.allclose(r, [0, 0, 1], atol=1e-9)


@given(seed=seeds)
def test_sphere_image_max_beats_sampling(seed):
    rng = np.random.default_rng(seed)
    b = bloch_from_channel(zoo.random_channel(2, env_dim=int(rng.integers(1, 5)), seed=rng))
    val, r = sphere_image_max(b)
    assert abs(np.linalg.norm(r) - 1) <= 1e-12
    assert np.linalg.norm(b.M @ r + b.c) == pytest.approx(val, abs=1e-12)
    pts = rng.standard_normal((2000, 3))
    pts /= np.linalg.norm(pts, axis=1, keepdims=True)
    sampled = np.max(np.linalg.norm(pts @ b.M.T + b.c, axis=1))
    assert val >= sampled - 1e-12


def test_divergence_examples(rng):
    d = divergence_check(zoo.gad(0.5, 1.0))
    assert d.certified and np.allclose(d.witness, [0, 0, 1], atol=1e-9)
    d = divergence_check(zoo.depolarizing(0.9))
    assert not d.certified and d.image_max == pytest.approx(0.9, abs=1e-12)
    assert divergence_check(zoo.random_unitary(2, seed=rng)).certified


def test_divergence_eb_channel_not_certified():
    # constant map onto a pure state: pure image, but EB
    assert not divergence_check(zoo.completely_depolarizing_to(0, 2)).certified


# -- depolarizing futility -----------------------------------------------------

def test_futility_qubit_example(rng):
    fs = [zoo.random_channel(2, seed=rng) for _ in range(2)]
    rep = depolarizing_filter_futility(0.6, 2, fs)
    assert rep.eb and rep.ppt == "EB"
    lam, n = 0.6, 3
    expected = [lam ** i * (1 - lam) / (1 - lam ** n) for i in range(n)]
    assert np.allclose(rep.weights, expected, atol=1e-15)
    assert sum(rep.weights) == pytest.approx(1.0, abs=1e-15)


def test_futility_qutrit_example(rng):
    rep = depolarizing_filter_futility(0.5, 3, [zoo.random_channel(3, seed=rng)])
    assert rep.eb and rep.reconstruction_error <= 1e-9


def test_futility_identity_filters():
    chain = depolarizing_chain(0.7, 2, [identity_map(2)] * 3)
    assert maxabs(chain.choi - zoo.depolarizing(0.7 ** 4).choi) <= 1e-10


def test_futility_rejects_short_chain(rng):
    with pytest.raises(InvalidArgumentError):
        depolarizing_filter_futility(0.8, 2, [zoo.random_channel(2, seed=rng)])


@given(seed=seeds, lam=st.floats(0.05, 0.95))
def test_decomposition_reconstructs(seed, lam):
    rng = np.random.default_rng(seed)
    fs = [zoo.random_channel(2, seed=rng) for _ in range(int(rng.integers(1, 4)))]
    w, terms = depolarizing_decomposition(lam, 2, fs)
    assert maxabs(mix(w, terms).choi - depolarizing_chain(lam, 2, fs).choi) <= 1e-10
