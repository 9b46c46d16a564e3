"""Dense linear algebra on truncated multimode Fock spaces.

Index convention: row-major over modes, mode 0 slowest. A two-mode basis
state |n0, n1> with dims (d0, d1) sits at flat index ``n0 * d1 + n1``.

Quadrature convention: ``x_theta = (a e^{-i theta} + a^dag e^{i theta}) / sqrt(2)``,
so the vacuum variance is 1/2 and 3 dB of squeezing corresponds to 1/4.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence, Union

import numpy as np

TAIL_TOL = 1e-6
HERMITIAN_TOL = 1e-10


class TruncationError(ValueError):
    """Raised when more than ``TAIL_TOL`` of the norm falls above a cutoff."""


def check_tail(mass: float, what: str, tol: float = TAIL_TOL) -> None:
    if mass > tol:
        raise TruncationError(
            f"{what}: {mass:.3g} of the norm lies above the Fock cutoff "
            f"(limit {tol:g}); increase the cutoff"
        )


@dataclass(frozen=True)
class ModeShape:
    dims: tuple[int, ...]

    def __post_init__(self):
        dims = tuple(int(d) for d in np.atleast_1d(self.dims))
        if not dims:
            raise ValueError("a ModeShape needs at least one mode")
        if any(d < 2 for d in dims):
            raise ValueError(f"every mode needs dimension >= 2, got {dims}")
        object.__setattr__(self, "dims", dims)

    @property
    def n_modes(self) -> int:
        return len(self.dims)

    @property
    def size(self) -> int:
        return int(np.prod(self.dims))

    def index(self, levels: Sequence[int]) -> int:
        return int(np.ravel_multi_index(tuple(levels), self.dims))

    def levels(self, index: int) -> tuple[int, ...]:
        return tuple(int(i) for i in np.unravel_index(index, self.dims))

    def __add__(self, other: "ModeShape") -> "ModeShape":
        return ModeShape(self.dims + other.dims)

    def without(self, modes: Sequence[int]) -> "ModeShape":
        drop = set(modes)
        return ModeShape(tuple(d for i, d in enumerate(self.dims) if i not in drop))


def _as_shape(dims) -> ModeShape:
    return dims if isinstance(dims, ModeShape) else ModeShape(tuple(np.atleast_1d(dims)))


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=np.complex128, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class StateVector:
    """Pure state amplitudes over a truncated multimode Fock basis."""

    shape: ModeShape
    amps: np.ndarray = field(repr=False)

    def __post_init__(self):
        object.__setattr__(self, "shape", _as_shape(self.shape))
        amps = _frozen(np.ravel(self.amps))
        if amps.size != self.shape.size:
            raise ValueError(f"{amps.size} amplitudes for shape {self.shape.dims}")
        object.__setattr__(self, "amps", amps)

    @property
    def dims(self) -> tuple[int, ...]:
        return self.shape.dims

    def norm(self) -> float:
        return float(np.linalg.norm(self.amps))

    def normalize(self) -> "StateVector":
        n = self.norm()
        if n == 0:
            raise ValueError("cannot normalize the zero vector")
        return StateVector(self.shape, self.amps / n)

    def tensor_view(self) -> np.ndarray:
        return self.amps.reshape(self.dims)

    def dm(self) -> "ModeOperator":
        return ModeOperator(self.shape, np.outer(self.amps, self.amps.conj()), hermitian=True)

    def expect(self, op: "ModeOperator") -> complex:
        return complex(self.amps.conj() @ op.matrix @ self.amps)


@dataclass(frozen=True)
class ModeOperator:
    """Square matrix on a multimode Fock space.

    Density operators are the Hermitian, unit-trace, positive special case.
    Reduced blocks <k|rho|l> with k != l are non-Hermitian instances.
    ``hermitian`` is inferred from the matrix when not given.
    """

    shape: ModeShape
    matrix: np.ndarray = field(repr=False)
    hermitian: bool | None = None

    def __post_init__(self):
        object.__setattr__(self, "shape", _as_shape(self.shape))
        m = _frozen(self.matrix)
        n = self.shape.size
        if m.shape != (n, n):
            raise ValueError(f"matrix {m.shape} does not match shape {self.shape.dims}")
        object.__setattr__(self, "matrix", m)
        if self.hermitian is None:
            herm = bool(np.max(np.abs(m - m.conj().T), initial=0.0) <= HERMITIAN_TOL)
            object.__setattr__(self, "hermitian", herm)

    @property
    def dims(self) -> tuple[int, ...]:
        return self.shape.dims

    def trace(self) -> complex:
        return complex(np.trace(self.matrix))

    def dag(self) -> "ModeOperator":
        return ModeOperator(self.shape, self.matrix.conj().T, hermitian=self.hermitian)

    def tensor_view(self) -> np.ndarray:
        return self.matrix.reshape(self.dims + self.dims)

    def normalized(self) -> "ModeOperator":
        tr = self.trace()
        if abs(tr) == 0:
            raise ValueError("cannot trace-normalize an operator with zero trace")
        if self.hermitian:
            tr = tr.real
        return ModeOperator(self.shape, self.matrix / tr, hermitian=self.hermitian)

    def hermitize(self) -> "ModeOperator":
        m = 0.5 * (self.matrix + self.matrix.conj().T)
        return ModeOperator(self.shape, m, hermitian=True)

    def min_eigenvalue(self) -> float:
        return float(np.linalg.eigvalsh(0.5 * (self.matrix + self.matrix.conj().T))[0])

    def is_density(self, tol: float = 1e-9) -> bool:
        m = self.matrix
        return (
            np.max(np.abs(m - m.conj().T)) <= HERMITIAN_TOL
            and abs(np.trace(m) - 1) <= HERMITIAN_TOL
            and self.min_eigenvalue() >= -tol
        )


State = Union[StateVector, ModeOperator]


def as_operator(obj: State) -> ModeOperator:
    return obj.dm() if isinstance(obj, StateVector) else obj


def basis(levels: Sequence[int] | int, dims: Sequence[int] | int) -> StateVector:
    """Fock basis state |n0, n1, ...>."""
    shape = _as_shape(dims)
    levels = tuple(np.atleast_1d(levels))
    amps = np.zeros(shape.size, dtype=complex)
    amps[shape.index(levels)] = 1.0
    return StateVector(shape, amps)


def tensor(a: State, b: State) -> State:
    """Kronecker product; the modes of ``a`` come first."""
    if isinstance(a, StateVector) and isinstance(b, StateVector):
        return StateVector(a.shape + b.shape, np.kron(a.amps, b.amps))
    if isinstance(a, ModeOperator) and isinstance(b, ModeOperator):
        herm = bool(a.hermitian and b.hermitian)
        return ModeOperator(a.shape + b.shape, np.kron(a.matrix, b.matrix), hermitian=herm)
    raise TypeError("tensor needs two StateVectors or two ModeOperators")


def _check_modes(shape: ModeShape, modes: Sequence[int]) -> tuple[int, ...]:
    modes = tuple(int(m) for m in np.atleast_1d(modes))
    if len(set(modes)) != len(modes):
        raise ValueError(f"repeated mode indices {modes}")
    for m in modes:
        if not 0 <= m < shape.n_modes:
            raise IndexError(f"mode {m} out of range for {shape.n_modes} modes")
    return modes


def partial_trace(rho: State, discard: Sequence[int] | int) -> ModeOperator:
    rho = as_operator(rho)
    discard = _check_modes(rho.shape, discard)
    keep = [i for i in range(rho.shape.n_modes) if i not in discard]
    if not keep:
        raise ValueError("cannot trace out every mode")
    n = rho.shape.n_modes
    t = rho.tensor_view()
    # einsum subscripts: ket axes 0..n-1, bra axes n..2n-1, traced pairs share a label
    ket = list(range(n))
    bra = [n + i if i in keep else i for i in range(n)]
    out = [i for i in keep] + [n + i for i in keep]
    reduced = np.einsum(t, ket + bra, out)
    shape = rho.shape.without(discard)
    return ModeOperator(shape, reduced.reshape(shape.size, shape.size), hermitian=rho.hermitian)


def partial_transpose(rho: ModeOperator, mode: int = 0) -> ModeOperator:
    """Swap the bra and ket indices of one mode."""
    if rho.shape.n_modes < 2:
        raise ValueError("partial transpose needs at least two modes")
    (mode,) = _check_modes(rho.shape, mode)
    n = rho.shape.n_modes
    axes = list(range(2 * n))
    axes[mode], axes[n + mode] = axes[n + mode], axes[mode]
    m = rho.tensor_view().transpose(axes).reshape(rho.matrix.shape)
    return ModeOperator(rho.shape, m, hermitian=rho.hermitian)


def trace_norm(op: ModeOperator | np.ndarray) -> float:
    m = op.matrix if isinstance(op, ModeOperator) else np.asarray(op)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError("trace norm needs a square matrix")
    return float(np.sum(np.linalg.svd(m, compute_uv=False)))


def destroy(dim: int) -> ModeOperator:
    if dim < 2:
        raise ValueError("dim must be >= 2")
    return ModeOperator(ModeShape((dim,)), np.diag(np.sqrt(np.arange(1, dim)), 1), hermitian=False)


def number(dim: int) -> ModeOperator:
    return ModeOperator(ModeShape((dim,)), np.diag(np.arange(dim, dtype=float)), hermitian=True)


def quadrature(dim: int, theta: float = 0.0) -> ModeOperator:
    a = destroy(dim).matrix
    x = (a * np.exp(-1j * theta) + a.conj().T * np.exp(1j * theta)) / np.sqrt(2)
    return ModeOperator(ModeShape((dim,)), x, hermitian=True)


def lift(op: ModeOperator, mode: int, shape: ModeShape) -> ModeOperator:
    """Embed a single-mode operator as ``I x ... x op x ... x I``."""
    (mode,) = _check_modes(shape, mode)
    if op.dims != (shape.dims[mode],):
        raise ValueError(f"operator dims {op.dims} do not fit mode {mode} of {shape.dims}")
    left = int(np.prod(shape.dims[:mode], dtype=int))
    right = int(np.prod(shape.dims[mode + 1:], dtype=int))
    m = np.kron(np.kron(np.eye(left), op.matrix), np.eye(right))
    return ModeOperator(shape, m, hermitian=op.hermitian)


def apply_local(state: State, op: np.ndarray, mode: int) -> State:
    """Act with a (not necessarily square) matrix on one mode.

    For a StateVector this is ``op |psi>``; for a ModeOperator it is
    ``op rho op^dag``. A rectangular ``op`` changes that mode's dimension.
    """
    op = np.asarray(op)
    (mode,) = _check_modes(state.shape, mode)
    dims = list(state.dims)
    if op.shape[1] != dims[mode]:
        raise ValueError("operator does not match the mode dimension")
    new_dims = dims.copy()
    new_dims[mode] = op.shape[0]
    shape = ModeShape(tuple(new_dims))
    if isinstance(state, StateVector):
        t = np.moveaxis(np.tensordot(op, state.tensor_view(), axes=(1, mode)), 0, mode)
        return StateVector(shape, t.ravel())
    n = state.shape.n_modes
    t = np.moveaxis(np.tensordot(op, state.tensor_view(), axes=(1, mode)), 0, mode)
    t = np.moveaxis(np.tensordot(op.conj(), t, axes=(1, n + mode)), 0, n + mode)
    return ModeOperator(shape, t.reshape(shape.size, shape.size), hermitian=state.hermitian)


def fidelity(pure: StateVector, rho: State) -> float:
    """<psi|rho|psi> for a pure reference state."""
    if pure.dims != rho.dims:
        raise ValueError(f"shape mismatch {pure.dims} vs {rho.dims}")
    if isinstance(rho, StateVector):
        return float(abs(np.vdot(pure.amps, rho.amps)) ** 2)
    return float(np.real(pure.amps.conj() @ rho.matrix @ pure.amps))


def _psd_sqrt(m: np.ndarray) -> np.ndarray:
    w, v = np.linalg.eigh(0.5 * (m + m.conj().T))
    return (v * np.sqrt(np.clip(w, 0, None))) @ v.conj().T


def state_fidelity(rho: State, sigma: State) -> float:
    """Uhlmann fidelity (tr sqrt(sqrt(rho) sigma sqrt(rho)))^2 between mixed states."""
    if rho.dims != sigma.dims:
        raise ValueError(f"shape mismatch {rho.dims} vs {sigma.dims}")
    if isinstance(rho, StateVector):
        return fidelity(rho, sigma)
    if isinstance(sigma, StateVector):
        return fidelity(sigma, rho)
    s = _psd_sqrt(rho.matrix)
    w = np.linalg.eigvalsh(s @ sigma.matrix @ s)
    return float(np.sum(np.sqrt(np.clip(w, 0, None))) ** 2)


def truncate(state: State, dims: Sequence[int]) -> State:
    """Project onto smaller per-mode cutoffs (no renormalization)."""
    dims = tuple(int(d) for d in dims)
    if len(dims) != state.shape.n_modes or any(d > o for d, o in zip(dims, state.dims)):
        raise ValueError(f"cannot truncate {state.dims} to {dims}")
    sl = tuple(slice(0, d) for d in dims)
    shape = ModeShape(dims)
    if isinstance(state, StateVector):
        return StateVector(shape, state.tensor_view()[sl].ravel())
    t = state.tensor_view()[sl + sl]
    return ModeOperator(shape, t.reshape(shape.size, shape.size), hermitian=state.hermitian)
