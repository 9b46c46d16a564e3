"""Beamsplitters, loss, and heralded (conditional) measurements."""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from itertools import product
from typing import Literal, Sequence

import numpy as np
from scipy.linalg import expm
from scipy.special import gammaln

from .fock import (
    ModeOperator,
    State,
    StateVector,
    _check_modes,
    apply_local,
    basis,
    check_tail,
    partial_trace,
    tensor,
)


class HeraldError(ValueError):
    """The conditioning event has zero probability."""


@dataclass(frozen=True)
class BeamsplitterSpec:
    """Power transmissivity ``t`` and a phase ``theta`` picked up on reflection.

    The unitary is ``exp[phi_bs (e^{i theta} a b^dag - e^{-i theta} a^dag b)]`` with
    ``cos^2 phi_bs = t``, so ``a^dag -> sqrt(t) a^dag + e^{i theta} sqrt(1-t) b^dag``.
    """

    t: float
    theta: float = 0.0

    def __post_init__(self):
        if not 0 <= self.t <= 1:
            raise ValueError(f"beamsplitter transmissivity must lie in [0, 1], got {self.t}")


@dataclass(frozen=True)
class HeraldModel:
    """``projector_1``: exactly one photon. ``on_off``: any nonzero number (I - |0><0|)."""

    kind: Literal["projector_1", "on_off"] = "projector_1"

    def __post_init__(self):
        if self.kind not in ("projector_1", "on_off"):
            raise ValueError(f"unknown herald model {self.kind!r}")

    def accepts(self, counts: Sequence[int]) -> bool:
        total = sum(counts)
        return total == 1 if self.kind == "projector_1" else total >= 1

    def povm(self, dims: Sequence[int]) -> np.ndarray:
        """Diagonal of the click POVM element on the detector modes."""
        return np.array([float(self.accepts(c)) for c in product(*(range(d) for d in dims))])


@lru_cache(maxsize=256)
def _bs_matrix(da: int, db: int, t: float, theta: float) -> np.ndarray:
    """Beamsplitter on inputs (da, db), outputs on (da+db-1)^2 so nothing is lost.

    Built block by block in total photon number, where the generator is exact.
    """
    big = da + db - 1
    phi = np.arccos(np.sqrt(t))
    u = np.zeros((big * big, da * db), dtype=complex)
    for total in range(da + db - 1):
        k = np.arange(total + 1)
        g = np.zeros((total + 1, total + 1), dtype=complex)
        # a b^dag |k, N-k> = sqrt(k (N-k+1)) |k-1, N-k+1>
        amp = np.sqrt(k[1:] * (total - k[1:] + 1))
        g[k[1:] - 1, k[1:]] += phi * np.exp(1j * theta) * amp
        g[k[1:], k[1:] - 1] -= phi * np.exp(-1j * theta) * amp
        block = expm(g)
        cols = [(j, total - j) for j in k if j < da and total - j < db]
        if not cols:
            continue
        src = np.array([c[0] for c in cols])
        out_idx = k * big + (total - k)
        in_idx = np.array([a * db + b for a, b in cols])
        u[np.ix_(out_idx, in_idx)] = block[:, src]
    u.setflags(write=False)
    return u


def _apply_pair(t: np.ndarray, u: np.ndarray, i: int, j: int) -> np.ndarray:
    """Contract a two-mode matrix into tensor axes (i, j); output axes stay in place."""
    di, dj = t.shape[i], t.shape[j]
    big = int(round(np.sqrt(u.shape[0])))
    t = np.moveaxis(t, [i, j], [0, 1])
    rest = t.shape[2:]
    out = (u @ t.reshape(di * dj, -1)).reshape((big, big) + rest)
    return np.moveaxis(out, [0, 1], [i, j])


def apply_beamsplitter(state: State, mode_a: int, mode_b: int, spec: BeamsplitterSpec) -> State:
    """Unitary beamsplitter on two modes; raises if more than 1e-6 of the norm overflows the cutoffs."""
    mode_a, mode_b = _check_modes(state.shape, (mode_a, mode_b))
    da, db = state.dims[mode_a], state.dims[mode_b]
    u = _bs_matrix(da, db, float(spec.t), float(spec.theta))
    n = state.shape.n_modes

    if isinstance(state, StateVector):
        out = _apply_pair(state.tensor_view(), u, mode_a, mode_b)
        sl = [slice(None)] * n
        sl[mode_a], sl[mode_b] = slice(0, da), slice(0, db)
        kept = out[tuple(sl)]
        check_tail(state.norm() ** 2 - float(np.sum(np.abs(kept) ** 2)), "beamsplitter output")
        return StateVector(state.shape, kept.ravel())

    out = _apply_pair(state.tensor_view(), u, mode_a, mode_b)
    out = _apply_pair(out, u.conj(), n + mode_a, n + mode_b)
    sl = [slice(None)] * (2 * n)
    for off in (0, n):
        sl[off + mode_a], sl[off + mode_b] = slice(0, da), slice(0, db)
    kept = out[tuple(sl)].reshape(state.shape.size, state.shape.size)
    result = ModeOperator(state.shape, kept, hermitian=state.hermitian)
    check_tail(state.trace().real - result.trace().real, "beamsplitter output")
    return result


def phase_shift(state: State, mode: int, angle: float) -> State:
    """exp(i angle n) on one mode."""
    d = state.dims[mode]
    return apply_local(state, np.diag(np.exp(1j * angle * np.arange(d))), mode)


def loss_kraus(dim: int, eta: float) -> list[np.ndarray]:
    """Kraus operators A_k = sum_n sqrt(C(n,k) eta^(n-k) (1-eta)^k) |n-k><n|."""
    if not 0 <= eta <= 1:
        raise ValueError(f"efficiency must lie in [0, 1], got {eta}")
    n = np.arange(dim)
    ops = []
    for k in range(dim):
        a = np.zeros((dim, dim))
        m = n[k:]
        logc = gammaln(m + 1) - gammaln(k + 1) - gammaln(m - k + 1)
        with np.errstate(divide="ignore"):
            w = np.exp(logc) * np.power(eta, m - k) * np.power(1 - eta, k)
        a[m - k, m] = np.sqrt(w)
        ops.append(a)
    return ops


def loss_channel(state: State, mode: int, eta: float, method: str = "kraus") -> ModeOperator:
    """Pure-loss channel of transmission ``eta`` on one mode.

    ``method="kraus"`` sums the Kraus operators directly; ``"ancilla"`` mixes the
    mode with vacuum on a beamsplitter of transmissivity ``eta`` and traces the
    ancilla out. The two agree to machine precision.
    """
    if not 0 <= eta <= 1:
        raise ValueError(f"efficiency must lie in [0, 1], got {eta}")
    (mode,) = _check_modes(state.shape, mode)
    rho = state.dm() if isinstance(state, StateVector) else state
    if eta == 1:
        return rho
    d = rho.dims[mode]
    if method == "kraus":
        out = np.zeros_like(rho.matrix)
        for k in loss_kraus(d, eta):
            out = out + apply_local(rho, k, mode).matrix
        return ModeOperator(rho.shape, out, hermitian=rho.hermitian)
    if method == "ancilla":
        joint = tensor(rho, basis(0, d).dm())
        anc = rho.shape.n_modes
        joint = apply_beamsplitter(joint, mode, anc, BeamsplitterSpec(eta))
        return partial_trace(joint, anc)
    raise ValueError(f"unknown loss method {method!r}")


def herald(state: State, modes: int | Sequence[int], model: HeraldModel = HeraldModel()) -> tuple[ModeOperator, float]:
    """Condition on a detector click and remove the detector modes.

    Returns the normalized conditional state Tr_det[Pi rho Pi] / p and p = Tr[Pi rho].
    Both detector models are diagonal Fock-basis projectors.
    """
    modes = _check_modes(state.shape, modes)
    n = state.shape.n_modes
    if len(modes) == n:
        raise ValueError("cannot herald on every mode")
    det_dims = [state.dims[m] for m in modes]
    shape = state.shape.without(modes)
    clicks = [c for c in product(*(range(d) for d in det_dims)) if model.accepts(c)]

    if isinstance(state, StateVector):
        t = np.moveaxis(state.tensor_view(), list(modes), list(range(len(modes))))
        branches = np.stack([t[c].ravel() for c in clicks]) if clicks else np.zeros((0, shape.size))
        p = float(np.sum(np.abs(branches) ** 2))
        if p < 1e-14:
            raise HeraldError(f"herald probability {p:.3g} is zero")
        rho = branches.T @ branches.conj() / p
        return ModeOperator(shape, rho, hermitian=True), p

    t = state.tensor_view()
    axes = list(modes) + [n + m for m in modes]
    t = np.moveaxis(t, axes, list(range(2 * len(modes))))
    acc = np.zeros((shape.size, shape.size), dtype=complex)
    for c in clicks:
        acc += t[c + c].reshape(shape.size, shape.size)
    p = float(np.trace(acc).real)
    if p < 1e-14:
        raise HeraldError(f"herald probability {p:.3g} is zero")
    return ModeOperator(shape, acc / p, hermitian=state.hermitian), p


def photon_subtract(state: State, mode: int) -> tuple[State, float]:
    """Apply the annihilation operator and renormalize; weight is <n> of the input."""
    (mode,) = _check_modes(state.shape, mode)
    d = state.dims[mode]
    a = np.diag(np.sqrt(np.arange(1, d)), 1)
    out = apply_local(state, a, mode)
    if isinstance(out, StateVector):
        w = out.norm() ** 2
        if w < 1e-14:
            raise ValueError("photon subtraction from vacuum")
        return out.normalize(), float(w)
    w = out.trace().real
    if w < 1e-14:
        raise ValueError("photon subtraction from vacuum")
    return out.normalized(), float(w)
