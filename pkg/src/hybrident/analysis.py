"""Wigner functions, negativity and the scalar diagnostics for heralded states.

Wigner kernels use the x = (a + a^dag)/sqrt(2) convention. Under the
``one_over_pi`` convention the vacuum peaks at 1/pi; ``normalized_parity``
multiplies by pi so that W(0, 0) equals the parity expectation (vacuum +1,
single photon -1).
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from typing import Literal

import numpy as np
from scipy.optimize import minimize_scalar
from scipy.special import gammaln

from .fock import (
    ModeOperator,
    State,
    StateVector,
    as_operator,
    fidelity,
    partial_transpose,
)
from .protocol import reduced_block
from .states import HybridTargetSpec, _cat_amps, hybrid_target, max_fidelity_in_span

Convention = Literal["normalized_parity", "one_over_pi"]
MAX_SPACING = 0.5


def _fmt(v: float) -> str:
    return format(float(v), ".17g")


@dataclass(frozen=True)
class WignerGrid:
    """W(x_i, p_j) stored as ``values[i, j]``."""

    x: np.ndarray
    p: np.ndarray
    values: np.ndarray = field(repr=False)
    convention: Convention = "normalized_parity"

    def integral(self) -> complex:
        """Riemann sum; equals the trace under the one_over_pi convention."""
        dx = self.x[1] - self.x[0]
        dp = self.p[1] - self.p[0]
        total = np.sum(self.values) * dx * dp
        return complex(total / np.pi if self.convention == "normalized_parity" else total)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["x", "p", "re", "im"])
        for i, xv in enumerate(self.x):
            for j, pv in enumerate(self.p):
                v = self.values[i, j]
                w.writerow([_fmt(xv), _fmt(pv), _fmt(v.real), _fmt(v.imag)])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str, convention: Convention = "normalized_parity") -> "WignerGrid":
        rows = list(csv.reader(io.StringIO(text)))
        if rows[0] != ["x", "p", "re", "im"]:
            raise ValueError(f"unexpected header {rows[0]}")
        data = np.array(rows[1:], dtype=float)
        x = np.unique(data[:, 0])
        p = np.unique(data[:, 1])
        vals = (data[:, 2] + 1j * data[:, 3]).reshape(len(x), len(p))
        return cls(x, p, vals, convention)

    def to_json(self) -> str:
        payload = {
            "convention": self.convention,
            "x": [float(_fmt(v)) for v in self.x],
            "p": [float(_fmt(v)) for v in self.p],
            "re": self.values.real.tolist(),
            "im": self.values.imag.tolist(),
        }
        return json.dumps(payload)

    @classmethod
    def from_json(cls, text: str) -> "WignerGrid":
        d = json.loads(text)
        vals = np.array(d["re"]) + 1j * np.array(d["im"])
        return cls(np.array(d["x"]), np.array(d["p"]), vals, d["convention"])


def _check_grid(v: np.ndarray, name: str) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    if v.ndim != 1 or v.size < 2:
        raise ValueError(f"{name} grid needs at least two points")
    step = np.diff(v)
    if not np.allclose(step, step[0], rtol=1e-9, atol=1e-12):
        raise ValueError(f"{name} grid must be uniform")
    if step[0] > MAX_SPACING:
        raise ValueError(
            f"{name} grid spacing {step[0]:.3g} exceeds {MAX_SPACING}; "
            f"use e.g. np.linspace(-5, 5, 101) to resolve Fock structure"
        )
    return v


def _wigner_values(m: np.ndarray, x: np.ndarray, p: np.ndarray) -> np.ndarray:
    """sum_{mn} m[m, n] W_{|m><n|}(x, p) in the 1/pi convention.

    For m >= n, W_{|m><n|} = (-1)^n / pi sqrt(n!/m!) (sqrt2 (x - ip))^{m-n}
    e^{-(x^2+p^2)} L_n^{(m-n)}(2(x^2+p^2)); the Laguerre polynomials come from
    the three-term recurrence and the factorial ratio from log-gamma.
    """
    d = m.shape[0]
    X, P = np.meshgrid(x, p, indexing="ij")
    r2 = X**2 + P**2
    z = 2 * r2
    ang = np.angle(X - 1j * P)
    logr = 0.5 * np.log(np.where(z > 0, z, 1.0))
    out = np.zeros(X.shape, dtype=complex)
    for k in range(d):
        nmax = d - k
        lag_prev = np.ones_like(z)
        lag = 1 + k - z
        s_low = np.zeros(X.shape, dtype=complex)  # coefficients m[n+k, n]
        s_up = np.zeros(X.shape, dtype=complex)  # coefficients m[n, n+k]
        for n in range(nmax):
            if n == 0:
                L = lag_prev
            elif n == 1:
                L = lag
            else:
                L = ((2 * n - 1 + k - z) * lag - (n - 1 + k) * lag_prev) / n
                lag_prev, lag = lag, L
            c = (-1) ** n * np.exp(0.5 * (gammaln(n + 1) - gammaln(n + k + 1)))
            s_low += m[n + k, n] * c * L
            if k > 0:
                s_up += m[n, n + k] * c * L
        if k == 0:
            radial = np.exp(-r2)
            out += radial * s_low
            continue
        radial = np.where(z > 0, np.exp(k * logr - r2), 0.0)
        out += radial * (np.exp(1j * k * ang) * s_low + np.exp(-1j * k * ang) * s_up)
    return out / np.pi


def wigner(op: State, x, p, convention: Convention = "normalized_parity") -> WignerGrid:
    """Wigner function of a single-mode operator on a uniform (x, p) grid."""
    op = as_operator(op)
    if op.shape.n_modes != 1:
        raise ValueError("wigner needs a single-mode operator")
    if convention not in ("normalized_parity", "one_over_pi"):
        raise ValueError(f"unknown convention {convention!r}")
    x = _check_grid(x, "x")
    p = _check_grid(p, "p")
    vals = _wigner_values(op.matrix, x, p)
    if convention == "normalized_parity":
        vals = vals * np.pi
    if op.hermitian:
        vals = vals.real.astype(complex)
    return WignerGrid(x, p, vals, convention)


def wigner_origin(op: State, normalize: bool = False) -> complex:
    """Normalized-parity W(0, 0) = sum_n (-1)^n op[n, n].

    ``normalize`` divides by the trace (for reduced blocks like <0|rho|0>).
    """
    op = as_operator(op)
    if op.shape.n_modes != 1:
        raise ValueError("wigner_origin needs a single-mode operator")
    diag = np.diag(op.matrix)
    w = complex(np.sum((-1.0) ** np.arange(diag.size) * diag))
    if normalize:
        w /= complex(np.sum(diag))
    return w.real if op.hermitian else w


def negativity(rho: ModeOperator, mode: int = 0, return_raw: bool = False):
    """(||rho^{T_mode}||_1 - 1) / 2, clamped at zero.

    With ``return_raw`` the unclamped value is returned as a second element.
    """
    pt = partial_transpose(rho, mode)
    m = pt.matrix
    ev = np.linalg.eigvalsh(0.5 * (m + m.conj().T))
    raw = float((np.sum(np.abs(ev)) - 1) / 2)
    clamped = max(raw, 0.0)
    return (clamped, raw) if return_raw else clamped


def qubit_leakage(rho_ab: ModeOperator) -> float:
    """Population of the discrete mode above |1>."""
    pops = np.real(np.diag(rho_ab.matrix)).reshape(rho_ab.dims).sum(axis=1)
    return float(np.sum(pops[2:]))


def max_target_fidelity(
    rho_ab: ModeOperator, alpha_bounds: tuple[float, float] = (0.05, 2.0), n_grid: int = 80
) -> tuple[float, float]:
    """Best fidelity with a|0>|cat-(alpha)> + b|1>|cat+(alpha)>, maximized over alpha and (a, b)."""
    da, db = rho_ab.dims

    def f(alpha):
        v0 = np.zeros((da, db), dtype=complex)
        v1 = np.zeros((da, db), dtype=complex)
        # scan range may exceed the cutoff's comfort zone; fidelity there is ~0 anyway
        odd, even = _cat_amps(alpha, "odd", db), _cat_amps(alpha, "even", db)
        v0[0] = odd / np.linalg.norm(odd)
        v1[1] = even / np.linalg.norm(even)
        vecs = [StateVector((da, db), v0.ravel()), StateVector((da, db), v1.ravel())]
        return max_fidelity_in_span(rho_ab, vecs)

    grid = np.linspace(*alpha_bounds, n_grid)
    vals = [f(a) for a in grid]
    i = int(np.argmax(vals))
    lo, hi = grid[max(i - 1, 0)], grid[min(i + 1, n_grid - 1)]
    res = minimize_scalar(lambda a: -f(a), bounds=(lo, hi), method="bounded", options={"xatol": 1e-8})
    if -res.fun >= vals[i]:
        return float(res.x), float(-res.fun)
    return float(grid[i]), float(vals[i])


@dataclass(frozen=True)
class Metrics:
    fidelity: float
    negativity: float
    negativity_raw: float
    w0_blocks: dict
    qubit_leakage: float

    def to_dict(self) -> dict:
        return {
            "fidelity": self.fidelity,
            "negativity": self.negativity,
            "negativity_raw": self.negativity_raw,
            "w0_blocks": {k: v for k, v in self.w0_blocks.items()},
            "qubit_leakage": self.qubit_leakage,
        }


def report_metrics(rho_ab: ModeOperator, target: HybridTargetSpec) -> Metrics:
    """Fidelity with the target, negativity, trace-normalized W(0,0) of the
    diagonal blocks (number and rotated bases), and qubit leakage."""
    target_vec = hybrid_target(target, rho_ab.dims)
    n, raw = negativity(rho_ab, return_raw=True)
    da = rho_ab.dims[0]
    w0 = {}
    for k in range(min(da, 3)):
        block = reduced_block(rho_ab, k, k)
        w0[str(k)] = float(np.real(wigner_origin(block, normalize=True))) if block.trace().real > 1e-14 else float("nan")
    for k in ("+", "-"):
        w0[k] = float(np.real(wigner_origin(reduced_block(rho_ab, k, k, "rotated"), normalize=True)))
    return Metrics(fidelity(target_vec, rho_ab), n, raw, w0, qubit_leakage(rho_ab))


def block_grids(
    rho_ab: ModeOperator, x, p, basis: str = "number", convention: Convention = "normalized_parity"
) -> dict:
    """Wigner grids of every reduced block <k|rho|l> (k, l in {0,1,2} or {+,-})."""
    keys = list(range(min(rho_ab.dims[0], 3))) if basis == "number" else ["+", "-"]
    return {(k, l): wigner(reduced_block(rho_ab, k, l, basis), x, p, convention) for k in keys for l in keys}

