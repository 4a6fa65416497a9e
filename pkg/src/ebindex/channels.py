"""Linear maps on matrices, stored by their Choi matrix.

Conventions
-----------
The Choi matrix of a map ``f`` acting on ``d``-dimensional inputs is the
trace-one state ``(f (x) id)(|e><e|)`` with ``|e> = sum_i |ii> / sqrt(d)``.
The *output* factor comes first, so for a channel ``Tr_first(choi) = 1/d``.

Internally maps are composed through their superoperator (row-major
vectorisation, ``vec(X)[a*d + b] = X[a, b]``), which is cached per instance.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import FrozenSet, Iterable, Optional, Sequence, Tuple, Union

import numpy as np

from .exceptions import InvalidArgumentError, NotCompletelyPositiveError
from .matlin import as_matrix, herm_eig, maxabs, min_eigenvalue, partial_trace

CP_TOL = 1e-9
TP_TOL = 1e-9
KRAUS_CUTOFF = 1e-10

IDENTITY_2 = np.eye(2, dtype=complex)
PAULI_X = np.array([[0, 1], [1, 0]], dtype=complex)
PAULI_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
PAULI_Z = np.array([[1, 0], [0, -1]], dtype=complex)
PAULIS = (PAULI_X, PAULI_Y, PAULI_Z)


def _choi_to_superop(choi: np.ndarray, din: int, dout: int) -> np.ndarray:
    t = choi.reshape(dout, din, dout, din).transpose(0, 2, 1, 3)
    return din * t.reshape(dout * dout, din * din)


def _superop_to_choi(sup: np.ndarray, din: int, dout: int) -> np.ndarray:
    t = sup.reshape(dout, dout, din, din).transpose(0, 2, 1, 3)
    return t.reshape(dout * din, dout * din) / din


class LinearMap:
    """A linear map from ``dim_in x dim_in`` to ``dim_out x dim_out`` matrices.

    Not necessarily completely positive or trace preserving. ``flags`` carries
    free-form markers such as ``"NOT_CP"``.
    """

    def __init__(self, choi, dim_in: Optional[int] = None, dim_out: Optional[int] = None,
                 flags: Iterable[str] = ()):
        choi = as_matrix(choi, "choi")
        n = choi.shape[0]
        if choi.shape[1] != n:
            raise InvalidArgumentError("Choi matrix must be square")
        if dim_in is None and dim_out is None:
            d = int(round(np.sqrt(n)))
            if d * d != n:
                raise InvalidArgumentError(f"cannot infer dimensions from Choi of size {n}")
            dim_in = dim_out = d
        elif dim_in is None:
            dim_in = n // dim_out
        elif dim_out is None:
            dim_out = n // dim_in
        if dim_in < 1 or dim_out < 1 or dim_in * dim_out != n:
            raise InvalidArgumentError(f"dims ({dim_in}, {dim_out}) inconsistent with Choi size {n}")
        choi = choi.copy()
        choi.setflags(write=False)
        self._choi = choi
        self.dim_in = int(dim_in)
        self.dim_out = int(dim_out)
        self.flags: FrozenSet[str] = frozenset(flags)

    @property
    def choi(self) -> np.ndarray:
        return self._choi

    @cached_property
    def superop(self) -> np.ndarray:
        s = _choi_to_superop(self._choi, self.dim_in, self.dim_out)
        s.setflags(write=False)
        return s

    @classmethod
    def from_superop(cls, sup, dim_in: int, dim_out: Optional[int] = None, **kw):
        dim_out = dim_in if dim_out is None else dim_out
        sup = np.asarray(sup, dtype=complex)
        if sup.shape != (dim_out * dim_out, dim_in * dim_in):
            raise InvalidArgumentError(f"superoperator shape {sup.shape} does not match dims")
        obj = cls(_superop_to_choi(sup, dim_in, dim_out), dim_in, dim_out, **kw)
        sup = sup.copy()
        sup.setflags(write=False)
        obj.__dict__["superop"] = sup
        return obj

    @property
    def is_square(self) -> bool:
        return self.dim_in == self.dim_out

    def __call__(self, rho) -> np.ndarray:
        return apply(self, rho)

    def __matmul__(self, other: "LinearMap") -> "LinearMap":
        return compose(self, other)

    def __pow__(self, n: int) -> "LinearMap":
        return power(self, n)

    def close_to(self, other: "LinearMap", atol: float = 1e-10) -> bool:
        return (self.dim_in, self.dim_out) == (other.dim_in, other.dim_out) and \
            maxabs(self.choi - other.choi) <= atol

    def to_dict(self) -> dict:
        return {
            "dim_in": self.dim_in,
            "dim_out": self.dim_out,
            "choi_re": self.choi.real.tolist(),
            "choi_im": self.choi.imag.tolist(),
        }

    def __repr__(self) -> str:
        return f"{type(self).__name__}(dim_in={self.dim_in}, dim_out={self.dim_out})"


class Channel(LinearMap):
    """A completely positive, trace-preserving :class:`LinearMap`.

    Instances are produced by :func:`validate` / :func:`as_channel` or by
    operations that preserve CPTP-ness (composition, tensoring). The
    validation record is computed lazily.
    """

    @cached_property
    def min_choi_eigenvalue(self) -> float:
        return min_eigenvalue(self.choi)

    @cached_property
    def tp_defect(self) -> float:
        return _tp_defect(self)


def _tp_defect(m: LinearMap) -> float:
    red = partial_trace(m.choi, (m.dim_out, m.dim_in), "first")
    return maxabs(red - np.eye(m.dim_in) / m.dim_in)


def _cp_scale(m: LinearMap) -> float:
    return CP_TOL * (1.0 + maxabs(m.choi))


@dataclass(frozen=True)
class Diagnostic:
    """Why a linear map failed validation as a channel."""

    violated: str  # "NOT_CP" or "NOT_TP"
    magnitude: float
    min_choi_eigenvalue: float
    tp_defect: float

    def __bool__(self) -> bool:
        return False


def validate(m: LinearMap) -> Union[Channel, Diagnostic]:
    """Return a :class:`Channel` if ``m`` is CPTP within tolerance, else a :class:`Diagnostic`."""
    lam = min_eigenvalue(m.choi)
    tp = _tp_defect(m)
    if lam < -_cp_scale(m):
        return Diagnostic("NOT_CP", -lam, lam, tp)
    if tp > TP_TOL:
        return Diagnostic("NOT_TP", tp, lam, tp)
    ch = Channel(m.choi, m.dim_in, m.dim_out, flags=m.flags - {"NOT_CP"})
    ch.__dict__["min_choi_eigenvalue"] = lam
    ch.__dict__["tp_defect"] = tp
    return ch


def as_channel(m: LinearMap) -> Channel:
    """Like :func:`validate` but raises on failure."""
    if isinstance(m, Channel):
        return m
    out = validate(m)
    if isinstance(out, Diagnostic):
        if out.violated == "NOT_CP":
            raise NotCompletelyPositiveError(
                f"map is not completely positive: min Choi eigenvalue {out.min_choi_eigenvalue:.3e}")
        raise InvalidArgumentError(f"map is not trace preserving: defect {out.tp_defect:.3e}")
    return out


def _wrap(choi_or_sup, din, dout, trusted: bool, superop: bool = False) -> LinearMap:
    cls = Channel if trusted else LinearMap
    if superop:
        return cls.from_superop(choi_or_sup, din, dout)
    return cls(choi_or_sup, din, dout)


# -- basic constructors ------------------------------------------------------

def max_ent_state(d: int) -> np.ndarray:
    """``|e><e|`` for ``|e> = sum_i |ii> / sqrt(d)``."""
    if d < 2:
        raise InvalidArgumentError("d must be >= 2")
    v = np.eye(d, dtype=complex).reshape(d * d) / np.sqrt(d)
    return np.outer(v, v.conj())


def identity_map(d: int) -> Channel:
    return Channel.from_superop(np.eye(d * d, dtype=complex), d, d)


def map_from_function(func, dim_in: int, dim_out: Optional[int] = None,
                      channel: bool = False) -> LinearMap:
    """Build a map from a Python callable by evaluating it on matrix units."""
    dim_out = dim_in if dim_out is None else dim_out
    sup = np.zeros((dim_out * dim_out, dim_in * dim_in), dtype=complex)
    for i in range(dim_in):
        for j in range(dim_in):
            e = np.zeros((dim_in, dim_in), dtype=complex)
            e[i, j] = 1.0
            sup[:, i * dim_in + j] = np.asarray(func(e), dtype=complex).reshape(-1)
    m = LinearMap.from_superop(sup, dim_in, dim_out)
    return as_channel(m) if channel else m


# -- algebra -----------------------------------------------------------------

def compose(*maps: LinearMap) -> LinearMap:
    """``compose(f, g, h)`` acts as ``f(g(h(X)))``.

    The result is a :class:`Channel` whenever every factor is one.
    """
    if not maps:
        raise InvalidArgumentError("compose needs at least one map")
    sup = maps[-1].superop
    din = maps[-1].dim_in
    dout = maps[-1].dim_out
    for f in reversed(maps[:-1]):
        if f.dim_in != dout:
            raise InvalidArgumentError(f"cannot compose: {f.dim_in} != {dout}")
        sup = f.superop @ sup
        dout = f.dim_out
    trusted = all(isinstance(f, Channel) for f in maps)
    return _wrap(sup, din, dout, trusted, superop=True)


def power(f: LinearMap, n: int) -> LinearMap:
    if not f.is_square:
        raise InvalidArgumentError("power requires a square map")
    if n < 0:
        raise InvalidArgumentError("power requires n >= 0")
    sup = np.linalg.matrix_power(f.superop, n)
    return _wrap(sup, f.dim_in, f.dim_out, isinstance(f, Channel), superop=True)


def tensor(f: LinearMap, g: LinearMap) -> LinearMap:
    """``f (x) g`` acting on the composite system, ``f``'s factor first."""
    a, b = f.dim_in, g.dim_in
    c, e = f.dim_out, g.dim_out
    sf = f.superop.reshape(c, c, a, a)
    sg = g.superop.reshape(e, e, b, b)
    s = np.einsum("pqij,rskl->prqsikjl", sf, sg).reshape((c * e) ** 2, (a * b) ** 2)
    trusted = isinstance(f, Channel) and isinstance(g, Channel)
    return _wrap(s, a * b, c * e, trusted, superop=True)


def apply(f: LinearMap, rho) -> np.ndarray:
    rho = as_matrix(rho, "rho")
    if rho.shape != (f.dim_in, f.dim_in):
        raise InvalidArgumentError(f"input of shape {rho.shape} does not match dim_in={f.dim_in}")
    return (f.superop @ rho.reshape(-1)).reshape(f.dim_out, f.dim_out)


def mix(weights: Sequence[float], maps: Sequence[LinearMap]) -> LinearMap:
    """Weighted sum of maps with equal dimensions (a convex mixture when weights are)."""
    if len(weights) != len(maps) or not maps:
        raise InvalidArgumentError("weights and maps must be non-empty and of equal length")
    dims = {(m.dim_in, m.dim_out) for m in maps}
    if len(dims) != 1:
        raise InvalidArgumentError("maps in a mixture must share dimensions")
    din, dout = dims.pop()
    choi = sum(w * m.choi for w, m in zip(weights, maps))
    convex = all(w >= 0 for w in weights) and abs(sum(weights) - 1.0) < 1e-12
    trusted = convex and all(isinstance(m, Channel) for m in maps)
    return _wrap(choi, din, dout, trusted)


def conjugate_by(u) -> Channel:
    """The unitary channel ``X -> U X U^dagger``."""
    u = as_matrix(u, "U")
    if u.shape[0] != u.shape[1]:
        raise InvalidArgumentError("conjugating matrix must be square")
    return as_channel(choi_from_kraus(KrausSet((u,))))


# -- Kraus form --------------------------------------------------------------

@dataclass(frozen=True)
class KrausSet:
    operators: Tuple[np.ndarray, ...]

    def __post_init__(self):
        ops = tuple(as_matrix(k, "Kraus operator") for k in self.operators)
        if not ops:
            raise InvalidArgumentError("a Kraus set needs at least one operator")
        if len({k.shape for k in ops}) != 1:
            raise InvalidArgumentError("Kraus operators must share a shape")
        object.__setattr__(self, "operators", ops)

    def __len__(self) -> int:
        return len(self.operators)

    def completeness(self) -> np.ndarray:
        return sum(k.conj().T @ k for k in self.operators)

    def is_trace_preserving(self, tol: float = 1e-9) -> bool:
        c = self.completeness()
        return maxabs(c - np.eye(c.shape[0])) <= tol


def choi_from_kraus(k: Union[KrausSet, Sequence[np.ndarray]]) -> LinearMap:
    if not isinstance(k, KrausSet):
        k = KrausSet(tuple(k))
    dout, din = k.operators[0].shape
    sup = sum(np.kron(a, a.conj()) for a in k.operators)
    m = LinearMap.from_superop(sup, din, dout)
    if k.is_trace_preserving():
        return Channel.from_superop(m.superop, din, dout)
    return m


def kraus_from_choi(m: LinearMap) -> KrausSet:
    """Minimal Kraus set from the Choi eigendecomposition."""
    spec = herm_eig(m.choi)
    if spec.eigenvalues[-1] < -_cp_scale(m):
        raise NotCompletelyPositiveError(
            f"Choi matrix has negative eigenvalue {spec.eigenvalues[-1]:.3e}")
    ops = []
    for lam, vec in zip(spec.eigenvalues, spec.eigenvectors.T):
        if lam > KRAUS_CUTOFF:
            ops.append(np.sqrt(m.dim_in * lam) * vec.reshape(m.dim_out, m.dim_in))
    if not ops:
        ops.append(np.zeros((m.dim_out, m.dim_in), dtype=complex))
    return KrausSet(tuple(ops))


# -- qubit Bloch form --------------------------------------------------------

@dataclass(frozen=True)
class BlochRep:
    """Affine action ``r -> M r + c`` of a qubit map on Bloch vectors."""

    M: np.ndarray
    c: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        M = np.asarray(self.M, dtype=float)
        c = np.asarray(self.c, dtype=float).reshape(-1)
        if M.shape != (3, 3) or c.shape != (3,):
            raise InvalidArgumentError("Bloch form needs a 3x3 matrix and a 3-vector")
        object.__setattr__(self, "M", M)
        object.__setattr__(self, "c", c)

    @property
    def is_unital(self) -> bool:
        return bool(np.linalg.norm(self.c) <= 1e-12)

    def compose(self, other: "BlochRep") -> "BlochRep":
        """Bloch form of ``self`` applied after ``other``."""
        return BlochRep(self.M @ other.M, self.M @ other.c + self.c)

    def __matmul__(self, other: "BlochRep") -> "BlochRep":
        return self.compose(other)


def bloch_from_channel(ch: LinearMap) -> BlochRep:
    if ch.dim_in != 2 or ch.dim_out != 2:
        raise InvalidArgumentError("Bloch representation is defined for qubit maps only")
    M = np.empty((3, 3))
    c = np.empty(3)
    one = apply(ch, IDENTITY_2)
    for i, si in enumerate(PAULIS):
        c[i] = 0.5 * np.trace(si @ one).real
        for j, sj in enumerate(PAULIS):
            M[i, j] = 0.5 * np.trace(si @ apply(ch, sj)).real
    return BlochRep(M, c)


def fano_choi(M, c) -> np.ndarray:
    """Choi matrix of the qubit map with Bloch form ``(M, c)``."""
    M = np.asarray(M, dtype=float)
    c = np.asarray(c, dtype=float)
    r = np.eye(4, dtype=complex)
    for i, si in enumerate(PAULIS):
        r = r + c[i] * np.kron(si, IDENTITY_2)
        for j, sj in enumerate(PAULIS):
            r = r + M[i, j] * np.kron(si, sj.T)
    return r / 4.0


def channel_from_bloch(M, c=None) -> LinearMap:
    """Qubit map from its Bloch form.

    Returns a :class:`Channel` when the result is completely positive; else a
    plain :class:`LinearMap` flagged ``"NOT_CP"``.
    """
    b = BlochRep(M, np.zeros(3) if c is None else c)
    m = LinearMap(fano_choi(b.M, b.c), 2, 2)
    out = validate(m)
    if isinstance(out, Diagnostic):
        return LinearMap(m.choi, 2, 2, flags={out.violated})
    return out


# -- serialisation -----------------------------------------------------------

def map_from_dict(obj: dict) -> LinearMap:
    try:
        din = int(obj["dim_in"])
        dout = int(obj["dim_out"])
        choi = np.asarray(obj["choi_re"], dtype=float) + 1j * np.asarray(obj["choi_im"], dtype=float)
    except (KeyError, TypeError, ValueError) as exc:
        raise InvalidArgumentError(f"malformed map description: {exc}") from exc
    return LinearMap(choi, din, dout)


def save_map(m: LinearMap, path: Union[str, Path]) -> None:
    Path(path).write_text(json.dumps(m.to_dict()))


def load_map(path: Union[str, Path]) -> LinearMap:
    try:
        obj = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise InvalidArgumentError(f"cannot read channel file {path}: {exc}") from exc
    if not isinstance(obj, dict):
        raise InvalidArgumentError("channel file must hold a JSON object")
    return map_from_dict(obj)
