"""Named channel families and seeded random generators."""

from __future__ import annotations

from dataclasses import dataclass
from typing import ClassVar, Dict, Optional, Type

import numpy as np
from scipy.spatial.transform import Rotation

from .channels import (
    PAULI_Y,
    PAULIS,
    Channel,
    Diagnostic,
    KrausSet,
    LinearMap,
    as_channel,
    choi_from_kraus,
    conjugate_by,
    map_from_function,
    validate,
)
from .exceptions import InvalidArgumentError, NotCompletelyPositiveError
from .matlin import as_matrix, random_unitary_matrix

RANGE_TOL = 1e-12


def _in_range(x: float, lo: float, hi: float) -> bool:
    return lo - RANGE_TOL <= x <= hi + RANGE_TOL


def _superop_channel(sup: np.ndarray, d: int, check: bool) -> LinearMap:
    m = LinearMap.from_superop(sup, d, d)
    return as_channel(m) if check else m


def _completely_mixing_superop(rho0: np.ndarray) -> np.ndarray:
    d = rho0.shape[0]
    return np.outer(rho0.reshape(-1), np.eye(d).reshape(-1))


def _transpose_superop(d: int) -> np.ndarray:
    return np.eye(d * d).reshape(d, d, d, d).transpose(0, 1, 3, 2).reshape(d * d, d * d)


# -- families ----------------------------------------------------------------

def gad(p: float, gamma: float) -> Channel:
    """Generalized amplitude damping with strength ``p`` and temperature ``gamma``."""
    if not (_in_range(p, 0.0, 1.0) and _in_range(gamma, 0.0, 1.0)):
        raise InvalidArgumentError(f"GAD parameters out of range: p={p}, gamma={gamma}")

    def act(x):
        a, b, bc, c = x[0, 0], x[0, 1], x[1, 0], x[1, 1]
        return np.array([
            [p * a + gamma * (1 - p) * (a + c), np.sqrt(p) * b],
            [np.sqrt(p) * bc, -p * a + (1 - (1 - p) * gamma) * (a + c)],
        ])

    return map_from_function(act, 2, channel=True)


def gad_threshold(gamma: float) -> float:
    """Largest ``p`` for which ``GAD(p, gamma)`` breaks entanglement."""
    return 1.0 - 2.0 / (1.0 + np.sqrt(1.0 + 4.0 * gamma * (1.0 - gamma)))


def depolarizing(lam: float, d: int = 2, check: bool = True) -> LinearMap:
    """``lam * id + (1 - lam) * (1/d) Tr``.

    With ``check=False`` the parameter range is not enforced and a plain
    :class:`LinearMap` may come back.
    """
    if d < 2:
        raise InvalidArgumentError("d must be >= 2")
    if check and not _in_range(lam, -1.0 / (d * d - 1), 1.0):
        raise InvalidArgumentError(f"lambda={lam} outside the CP range for d={d}")
    sup = lam * np.eye(d * d) + (1 - lam) * _completely_mixing_superop(np.eye(d) / d)
    return _superop_channel(sup, d, check)


def gen_depolarizing(lam: float, rho0) -> Channel:
    """``lam * id + (1 - lam) * rho0 Tr``; validated after construction."""
    rho0 = as_matrix(rho0, "rho0")
    d = rho0.shape[0]
    if rho0.shape != (d, d) or abs(np.trace(rho0) - 1) > 1e-10:
        raise InvalidArgumentError("rho0 must be a square matrix of unit trace")
    sup = lam * np.eye(d * d) + (1 - lam) * _completely_mixing_superop(rho0)
    out = validate(LinearMap.from_superop(sup, d, d))
    if isinstance(out, Diagnostic):
        raise NotCompletelyPositiveError(
            f"generalized depolarizing map fails {out.violated} (magnitude {out.magnitude:.3e})")
    return out


def werner(eta: float, d: int, check: bool = True) -> LinearMap:
    """Werner channel ``-eta T + (1 + eta) (1/d) Tr``; its Choi matrix is a Werner state."""
    if d < 2:
        raise InvalidArgumentError("d must be >= 2")
    if check and not _in_range(eta, -1.0 / (d + 1), 1.0 / (d - 1)):
        raise InvalidArgumentError(f"eta={eta} outside the CP range for d={d}")
    sup = -eta * _transpose_superop(d) + (1 + eta) * _completely_mixing_superop(np.eye(d) / d)
    return _superop_channel(sup, d, check)


def cex_filter(d: int) -> Channel:
    """Filter that swaps |0>,|1> on the top block and dumps the rest into |0>."""
    if d < 3:
        raise InvalidArgumentError("the counterexample filter needs d >= 3")
    ops = []
    k = np.zeros((d, d), dtype=complex)
    k[0, 1] = k[1, 0] = 1.0
    ops.append(k)
    for i in range(2, d):
        k = np.zeros((d, d), dtype=complex)
        k[0, i] = 1.0
        ops.append(k)
    return as_channel(choi_from_kraus(KrausSet(tuple(ops))))


def transposition(d: int) -> LinearMap:
    return LinearMap.from_superop(_transpose_superop(d), d, d)


def reduction_map() -> LinearMap:
    """Two-qubit map ``X -> 1 (x) Tr_1 X - X``."""
    def act(x):
        t = x.reshape(2, 2, 2, 2)
        red = np.einsum("ijik->jk", t)
        return np.kron(np.eye(2), red) - x

    return map_from_function(act, 4)


def completely_depolarizing_to(index: int, d: int) -> Channel:
    """``X -> |index><index| Tr X``."""
    if not 0 <= index < d:
        raise InvalidArgumentError("basis index out of range")
    ket = np.zeros((d, d))
    ket[index, index] = 1.0
    return as_channel(LinearMap.from_superop(_completely_mixing_superop(ket), d, d))


def unitary_channel(u) -> Channel:
    return conjugate_by(u)


def y_conjugation() -> Channel:
    return conjugate_by(PAULI_Y)


# -- random generators -------------------------------------------------------

def _rng(seed) -> np.random.Generator:
    return seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)


def random_isometry(d_in: int, d_out: int, seed=None) -> np.ndarray:
    """Column-orthonormalised complex Gaussian ``d_out x d_in`` matrix."""
    rng = _rng(seed)
    z = rng.standard_normal((d_out, d_in)) + 1j * rng.standard_normal((d_out, d_in))
    q, r = np.linalg.qr(z)
    return q * (np.diag(r) / np.abs(np.diag(r)))


def kraus_from_isometry(v: np.ndarray, d: int, env_dim: int) -> KrausSet:
    """Split an isometry ``C^d -> C^d (x) C^E`` (system first) into Kraus operators."""
    t = v.reshape(d, env_dim, v.shape[1])
    return KrausSet(tuple(t[:, k, :] for k in range(env_dim)))


def random_channel(d: int, env_dim: Optional[int] = None, seed=None) -> Channel:
    """Random channel from a random isometry into system (x) environment."""
    env_dim = d * d if env_dim is None else env_dim
    if env_dim < 1:
        raise InvalidArgumentError("env_dim must be >= 1")
    v = random_isometry(d, d * env_dim, seed)
    return Channel.from_superop(
        choi_from_kraus(kraus_from_isometry(v, d, env_dim)).superop, d, d)


def random_unitary(d: int, seed=None) -> Channel:
    return conjugate_by(random_unitary_matrix(d, _rng(seed)))


def random_so3(seed=None) -> np.ndarray:
    return Rotation.random(random_state=_rng(seed)).as_matrix()


def random_pauli_diagonal(seed=None) -> np.ndarray:
    """Diagonal Bloch matrix of a random Pauli channel (always CPTP)."""
    p = _rng(seed).dirichlet(np.ones(4))
    return np.array([p[0] + p[1] - p[2] - p[3],
                     p[0] - p[1] + p[2] - p[3],
                     p[0] - p[1] - p[2] + p[3]])


def random_unital_qubit(seed=None) -> Channel:
    """Random Pauli channel sandwiched between two random unitary channels."""
    from .channels import channel_from_bloch

    rng = _rng(seed)
    L = random_pauli_diagonal(rng)
    M = random_so3(rng) @ np.diag(L) @ random_so3(rng)
    return as_channel(channel_from_bloch(M, np.zeros(3)))


def rotation_from_unitary(u) -> np.ndarray:
    """SO(3) matrix of the qubit unitary channel ``X -> U X U^dagger``."""
    u = as_matrix(u, "U")
    return np.array([[0.5 * np.trace(si @ u @ sj @ u.conj().T).real for sj in PAULIS]
                     for si in PAULIS])


def unitary_from_rotation(o) -> np.ndarray:
    """A qubit unitary whose conjugation action on Bloch vectors is ``o``."""
    rv = Rotation.from_matrix(np.asarray(o, dtype=float)).as_rotvec()
    theta = np.linalg.norm(rv)
    if theta < 1e-300:
        return np.eye(2, dtype=complex)
    n = rv / theta
    gen = sum(n[i] * PAULIS[i] for i in range(3))
    return np.cos(theta / 2) * np.eye(2) - 1j * np.sin(theta / 2) * gen


# -- family tags -------------------------------------------------------------

@dataclass(frozen=True)
class FamilyTag:
    """Serializable description of a channel family member."""

    family: ClassVar[str] = ""
    registry: ClassVar[Dict[str, Type["FamilyTag"]]] = {}

    def __init_subclass__(cls, **kw):
        super().__init_subclass__(**kw)
        if cls.family:
            FamilyTag.registry[cls.family] = cls

    def build(self) -> LinearMap:
        raise NotImplementedError

    def to_dict(self) -> dict:
        out = {"family": self.family}
        out.update(self._params())
        return out

    def _params(self) -> dict:
        return dict(self.__dict__)

    @staticmethod
    def from_dict(obj: dict) -> "FamilyTag":
        obj = dict(obj)
        name = obj.pop("family", None)
        cls = FamilyTag.registry.get(name)
        if cls is None:
            raise InvalidArgumentError(f"unknown channel family {name!r}")
        try:
            return cls._from_params(obj)
        except (KeyError, TypeError, ValueError) as exc:
            raise InvalidArgumentError(f"bad parameters for family {name!r}: {exc}") from exc

    @classmethod
    def _from_params(cls, obj: dict) -> "FamilyTag":
        return cls(**obj)


@dataclass(frozen=True)
class GAD(FamilyTag):
    family: ClassVar[str] = "gad"
    p: float
    gamma: float

    def build(self) -> Channel:
        return gad(self.p, self.gamma)


@dataclass(frozen=True)
class Depolarizing(FamilyTag):
    family: ClassVar[str] = "depolarizing"
    lam: float
    d: int = 2

    def build(self) -> LinearMap:
        return depolarizing(self.lam, self.d)

    def _params(self) -> dict:
        return {"lambda": self.lam, "d": self.d}

    @classmethod
    def _from_params(cls, obj):
        return cls(lam=float(obj["lambda"]), d=int(obj.get("d", 2)))


@dataclass(frozen=True)
class GenDepolarizing(FamilyTag):
    family: ClassVar[str] = "gen_depolarizing"
    lam: float
    rho0: tuple  # nested tuple of complex entries

    def build(self) -> Channel:
        return gen_depolarizing(self.lam, np.array(self.rho0, dtype=complex))

    def _params(self) -> dict:
        r = np.array(self.rho0, dtype=complex)
        return {"lambda": self.lam, "rho0_re": r.real.tolist(), "rho0_im": r.imag.tolist()}

    @classmethod
    def _from_params(cls, obj):
        r = np.asarray(obj["rho0_re"], dtype=float) + 1j * np.asarray(obj.get("rho0_im", 0.0))
        return cls(lam=float(obj["lambda"]), rho0=tuple(map(tuple, r)))


@dataclass(frozen=True)
class Werner(FamilyTag):
    family: ClassVar[str] = "werner"
    eta: float
    d: int

    def build(self) -> LinearMap:
        return werner(self.eta, self.d)


@dataclass(frozen=True)
class CexFilter(FamilyTag):
    family: ClassVar[str] = "cex_filter"
    d: int

    def build(self) -> Channel:
        return cex_filter(self.d)


@dataclass(frozen=True)
class Reduction(FamilyTag):
    family: ClassVar[str] = "reduction"

    def build(self) -> LinearMap:
        return reduction_map()


@dataclass(frozen=True)
class Transposition(FamilyTag):
    family: ClassVar[str] = "transposition"
    d: int

    def build(self) -> LinearMap:
        return transposition(self.d)


@dataclass(frozen=True)
class Unitary(FamilyTag):
    family: ClassVar[str] = "unitary"
    u: tuple

    def build(self) -> Channel:
        return unitary_channel(np.array(self.u, dtype=complex))

    def _params(self) -> dict:
        u = np.array(self.u, dtype=complex)
        return {"u_re": u.real.tolist(), "u_im": u.imag.tolist()}

    @classmethod
    def _from_params(cls, obj):
        u = np.asarray(obj["u_re"], dtype=float) + 1j * np.asarray(obj.get("u_im", 0.0))
        return cls(u=tuple(map(tuple, u)))


@dataclass(frozen=True)
class Random(FamilyTag):
    family: ClassVar[str] = "random"
    seed: int
    d: int = 2
    env_dim: Optional[int] = None

    def build(self) -> Channel:
        return random_channel(self.d, self.env_dim, self.seed)
