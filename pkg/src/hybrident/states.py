"""Named states in the truncated Fock basis.

Every constructor checks how much norm the truncation throws away (the
untruncated norm is known in closed form) and raises ``TruncationError``
above ``fock.TAIL_TOL``; the returned vector is renormalized.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Literal

import numpy as np
from scipy.optimize import minimize_scalar
from scipy.special import gammaln

from .fock import (
    ModeOperator,
    ModeShape,
    State,
    StateVector,
    as_operator,
    check_tail,
)

Parity = Literal["even", "odd"]


@dataclass(frozen=True)
class SqueezingSpec:
    """Single-mode squeezing; ``db`` is the noise reduction below shot noise (positive)."""

    r: float

    def __post_init__(self):
        if self.r < 0:
            raise ValueError(f"squeezing parameter must be >= 0, got {self.r}")

    @classmethod
    def from_db(cls, db: float) -> "SqueezingSpec":
        if db < 0:
            raise ValueError("noise reduction in dB must be >= 0")
        return cls(db * np.log(10) / 20)

    @property
    def db(self) -> float:
        # variance factor e^{-2r}
        return float(-10 * np.log10(np.exp(-2 * self.r)))


@dataclass(frozen=True)
class HybridTargetSpec:
    """Target two-mode state, discrete mode A first.

    ``basis="number"``:  |0>|cat-> + e^{i phi} |1>|cat+>  (cats normalized, equal weights)
    ``basis="rotated"``: |+>|alpha> + e^{i phi} |->|-alpha>

    A negative ``alpha`` is allowed; in the rotated basis it swaps which
    coherent state accompanies |+>.
    """

    alpha: float
    phi: float = np.pi
    basis: Literal["number", "rotated"] = "number"

    def __post_init__(self):
        if not np.isreal(self.alpha) or self.alpha == 0:
            raise ValueError("alpha must be a nonzero real number")
        if self.basis not in ("number", "rotated"):
            raise ValueError(f"unknown basis {self.basis!r}")


def _coherent_amps(alpha: complex, dim: int) -> np.ndarray:
    n = np.arange(dim)
    mag = np.abs(alpha)
    if mag == 0:
        out = np.zeros(dim, dtype=complex)
        out[0] = 1
        return out
    logmag = -0.5 * mag**2 + n * np.log(mag) - 0.5 * gammaln(n + 1)
    return np.exp(logmag) * np.exp(1j * n * np.angle(alpha))


def coherent(alpha: complex, dim: int) -> StateVector:
    amps = _coherent_amps(alpha, dim)
    check_tail(1 - float(np.sum(np.abs(amps) ** 2)), f"coherent(alpha={alpha})")
    return StateVector(ModeShape((dim,)), amps).normalize()


def squeezed_vacuum(spec: SqueezingSpec, dim: int, angle: float = 0.0) -> StateVector:
    """Squeezed vacuum whose reduced-noise quadrature is ``x_angle``.

    With ``angle=0`` the amplitudes are
    ``(-tanh r)^m sqrt((2m)!) / (2^m m!) / sqrt(cosh r)`` on |2m>.
    """
    r = spec.r
    amps = np.zeros(dim, dtype=complex)
    m = np.arange((dim + 1) // 2)
    if r == 0:
        amps[0] = 1
        return StateVector(ModeShape((dim,)), amps)
    t = np.tanh(r)
    logmag = m * np.log(t) + 0.5 * gammaln(2 * m + 1) - m * np.log(2) - gammaln(m + 1)
    logmag -= 0.5 * np.log(np.cosh(r))
    amps[2 * m] = (-1.0) ** m * np.exp(logmag) * np.exp(2j * m * angle)
    check_tail(1 - float(np.sum(np.abs(amps) ** 2)), f"squeezed_vacuum(r={r:.4g})")
    return StateVector(ModeShape((dim,)), amps).normalize()


def two_mode_squeezed(lam: float, dims: tuple[int, int] = (5, 5)) -> StateVector:
    """sqrt(1 - lam^2) * sum_n lam^n |n, n>."""
    if not 0 <= lam < 1:
        raise ValueError(f"lambda must lie in [0, 1), got {lam}")
    shape = ModeShape(tuple(dims))
    if shape.n_modes != 2:
        raise ValueError("two_mode_squeezed needs two mode dimensions")
    n = np.arange(min(shape.dims))
    t = np.zeros(shape.dims, dtype=complex)
    t[n, n] = np.sqrt(1 - lam**2) * lam**n
    check_tail(1 - float(np.sum(np.abs(t) ** 2)), f"two_mode_squeezed(lambda={lam})")
    return StateVector(shape, t.ravel()).normalize()


def cat_norm_sq(alpha: complex, parity: Parity) -> float:
    """Squared norm of |alpha> +/- |-alpha> before normalization."""
    a2 = abs(alpha) ** 2
    if parity == "even":
        return 2 * (1 + np.exp(-2 * a2))
    return -2 * np.expm1(-2 * a2)


def _cat_amps(alpha: complex, parity: Parity, dim: int) -> np.ndarray:
    """Unnormalized |alpha> +/- |-alpha> amplitudes, built parity-filtered."""
    amps = 2 * _coherent_amps(alpha, dim)
    keep = 0 if parity == "even" else 1
    amps[np.arange(dim) % 2 != keep] = 0
    return amps


def cat(alpha: complex, parity: Parity, dim: int) -> StateVector:
    if parity not in ("even", "odd"):
        raise ValueError(f"parity must be 'even' or 'odd', got {parity!r}")
    if alpha == 0 and parity == "odd":
        raise ValueError("odd cat state with alpha=0 is the zero vector")
    amps = _cat_amps(alpha, parity, dim)
    kept = float(np.sum(np.abs(amps) ** 2)) / cat_norm_sq(alpha, parity)
    check_tail(1 - kept, f"cat(alpha={alpha}, {parity})")
    return StateVector(ModeShape((dim,)), amps).normalize()


_PLUS = np.array([1, 1]) / np.sqrt(2)
_MINUS = np.array([1, -1]) / np.sqrt(2)


def hybrid_target(spec: HybridTargetSpec, dims: tuple[int, int] = (5, 15)) -> StateVector:
    da, db = dims
    if da < 2:
        raise ValueError("the discrete mode needs dimension >= 2")
    phase = np.exp(1j * spec.phi)
    t = np.zeros((da, db), dtype=complex)
    if spec.basis == "number":
        t[0] = cat(spec.alpha, "odd", db).amps
        t[1] = phase * cat(spec.alpha, "even", db).amps
    else:
        pos = coherent(spec.alpha, db).amps
        neg = coherent(-spec.alpha, db).amps
        t[:2] = np.outer(_PLUS, pos) + phase * np.outer(_MINUS, neg)
    return StateVector(ModeShape((da, db)), t.ravel()).normalize()


@dataclass(frozen=True)
class CatFit:
    alpha: float
    fidelity: float
    parity: Parity
    phase: float = 0.0
    at_boundary: bool = False


def _cat_fidelities(rho: np.ndarray, alphas: np.ndarray, parity: Parity, phases: np.ndarray) -> np.ndarray:
    """Fidelity grid (len(phases), len(alphas)) of rho with normalized cats."""
    dim = rho.shape[0]
    n = np.arange(dim)
    base = np.stack([_cat_amps(a, parity, dim) for a in alphas])
    base /= np.linalg.norm(base, axis=1, keepdims=True)
    rot = np.exp(1j * np.outer(phases, n))
    vecs = rot[:, None, :] * base[None, :, :]
    return np.einsum("pai,ij,paj->pa", vecs.conj(), rho, vecs).real


def best_cat_amplitude(
    state: State,
    parity: Parity | Literal["auto"] = "auto",
    phase: float | None = 0.0,
    alpha_max: float = 2.0,
    n_grid: int = 200,
) -> CatFit:
    """Fit the cat state closest to a single-mode state.

    Scans |alpha| on a grid in (0, alpha_max], then refines with golden-section
    search. ``phase`` fixes the cat orientation (alpha = |alpha| e^{i phase});
    ``None`` also optimizes the orientation. ``parity="auto"`` tries both.
    """
    op = as_operator(state)
    if op.shape.n_modes != 1:
        raise ValueError("best_cat_amplitude needs a single-mode state")
    rho = op.matrix / op.trace().real
    parities = ("even", "odd") if parity == "auto" else (parity,)
    alphas = np.linspace(alpha_max / n_grid, alpha_max, n_grid)
    phases = np.array([0.0]) if phase is not None else np.linspace(0, np.pi, 36, endpoint=False)
    offset = phase if phase is not None else 0.0

    best = None
    for par in parities:
        grid = _cat_fidelities(rho, alphas, par, phases + offset)
        ip, ia = np.unravel_index(np.argmax(grid), grid.shape)
        if best is None or grid[ip, ia] > best[0]:
            best = (grid[ip, ia], par, ia, phases[ip] + offset)
    _, par, ia, ph = best

    def neg_f(a, p):
        return -_cat_fidelities(rho, np.array([a]), par, np.array([p]))[0, 0]

    if ia == 0:
        a_best = alphas[0]
        return CatFit(float(a_best), float(-neg_f(a_best, ph)), par, float(ph), True)

    lo, hi = alphas[ia - 1], alphas[min(ia + 1, n_grid - 1)]
    bracket = (lo, alphas[ia], hi) if ia < n_grid - 1 else None

    def refine_alpha(p):
        if bracket is None:
            return alphas[ia]
        res = minimize_scalar(neg_f, bracket=bracket, args=(p,), method="golden", tol=1e-10)
        return float(np.clip(res.x, lo, hi))

    a_best = refine_alpha(ph)
    at_edge = ia == n_grid - 1
    if phase is None:
        dp = np.pi / 36
        res = minimize_scalar(
            lambda p: neg_f(a_best, p), bounds=(ph - dp, ph + dp), method="bounded",
            options={"xatol": 1e-10},
        )
        ph = float(res.x) % np.pi
        a_best = refine_alpha(ph)
    return CatFit(float(a_best), float(-neg_f(a_best, ph)), par, float(ph), bool(at_edge))


def max_fidelity_in_span(rho: ModeOperator, vectors: list[StateVector]) -> float:
    """Largest <psi|rho|psi> over normalized psi in the span of orthonormal ``vectors``."""
    v = np.stack([s.amps for s in vectors], axis=1)
    return float(np.linalg.eigvalsh(v.conj().T @ rho.matrix @ v)[-1])
