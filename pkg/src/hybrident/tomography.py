"""Two-mode homodyne acquisition and maximum-likelihood reconstruction.

Quadratures follow x_theta = (a e^{-i theta} + a^dag e^{i theta}) / sqrt(2), so
<n|x_theta> = e^{i n theta} psi_n(x) with psi_n the Hermite functions. Data are
binned per phase pair; every bin's POVM element is a tensor product of two
single-mode bin operators, which keeps probabilities and the R operator cheap
(one small matrix sandwich per phase pair).
"""

from __future__ import annotations

import csv
import io
import json
import logging
from dataclasses import dataclass, field
from functools import lru_cache
from itertools import product
from typing import Iterator, Sequence

import numpy as np

from .channels import loss_channel, loss_kraus
from .fock import ModeOperator, ModeShape, State, as_operator, check_tail, partial_trace

log = logging.getLogger(__name__)

_GL_NODES = 8
_TAIL_NODES = 120
_TAIL_SPAN = 10.0


def quad_wavefunctions(dim: int, x) -> np.ndarray:
    """psi_n(x) for n < dim as a (dim, len(x)) array.

    Uses the normalized recurrence
    psi_{n+1} = sqrt(2/(n+1)) x psi_n - sqrt(n/(n+1)) psi_{n-1},
    which stays stable for |x| <= 10 at dim <= 30 (and well beyond).
    """
    x = np.asarray(x, dtype=float)
    out = np.empty((dim,) + x.shape)
    out[0] = np.pi**-0.25 * np.exp(-0.5 * x**2)
    if dim > 1:
        out[1] = np.sqrt(2.0) * x * out[0]
    for n in range(1, dim - 1):
        out[n + 1] = np.sqrt(2.0 / (n + 1)) * x * out[n] - np.sqrt(n / (n + 1)) * out[n - 1]
    return out


def _rotated(dim: int, theta: float, x) -> np.ndarray:
    """<x_theta|n> as a (len(x), dim) array."""
    psi = quad_wavefunctions(dim, x)
    return (psi * np.exp(-1j * theta * np.arange(dim))[:, None]).T


def homodyne_pdf(rho: State, theta_a: float, theta_b: float, xa, xb) -> np.ndarray:
    """Joint density P(x_a, x_b) at quadrature angles (theta_a, theta_b), shape (len(xa), len(xb))."""
    rho = as_operator(rho)
    if rho.shape.n_modes != 2:
        raise ValueError("homodyne_pdf needs a two-mode state")
    da, db = rho.dims
    va = _rotated(da, theta_a, xa)
    vb = _rotated(db, theta_b, xb)
    t = rho.tensor_view()
    # P = sum va[x,m] vb[y,p] rho[m,p,n,q] conj(va[x,n]) conj(vb[y,q])
    left = np.einsum("xm,mpnq,xn->xpq", va, t, va.conj(), optimize=True)
    return np.einsum("yp,xpq,yq->xy", vb, left, vb.conj(), optimize=True).real


@dataclass(frozen=True)
class BinSpec:
    """Uniform bins on [-x_max, x_max]; the edge bins also absorb the tails."""

    n_bins: int = 200
    x_max: float = 6.0

    def __post_init__(self):
        if self.n_bins < 2 or self.x_max <= 0:
            raise ValueError("need n_bins >= 2 and x_max > 0")

    @property
    def edges(self) -> np.ndarray:
        return np.linspace(-self.x_max, self.x_max, self.n_bins + 1)

    def index(self, x: np.ndarray) -> np.ndarray:
        i = np.floor((np.asarray(x) + self.x_max) / (2 * self.x_max) * self.n_bins).astype(int)
        return np.clip(i, 0, self.n_bins - 1)


@lru_cache(maxsize=64)
def _bin_gram(dim: int, bins: BinSpec) -> tuple[np.ndarray, np.ndarray]:
    """Unrotated bin operators G_j[m, n] = int_bin psi_m psi_n, plus the two tails.

    Returns (interior of shape (n_bins, dim, dim), tails of shape (2, dim, dim)).
    """
    edges = bins.edges
    u, w = np.polynomial.legendre.leggauss(_GL_NODES)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[1:] + edges[:-1])
    xs = mid[:, None] + half[:, None] * u[None, :]
    ws = half[:, None] * w[None, :]
    psi = quad_wavefunctions(dim, xs)  # (dim, n_bins, nodes)
    interior = np.einsum("mbk,nbk,bk->bmn", psi, psi, ws)

    ut, wt = np.polynomial.legendre.leggauss(_TAIL_NODES)
    h = 0.5 * _TAIL_SPAN
    xt = bins.x_max + h + h * ut
    psi_t = quad_wavefunctions(dim, xt)
    upper = np.einsum("mk,nk,k->mn", psi_t, psi_t, h * wt)
    # psi_m(-x) = (-1)^m psi_m(x)
    sign = (-1.0) ** np.arange(dim)
    lower = upper * np.outer(sign, sign)
    tails = np.stack([lower, upper])
    interior.setflags(write=False)
    tails.setflags(write=False)
    return interior, tails


def bin_povm(dim: int, theta: float, bins: BinSpec = BinSpec(), eta: float = 1.0) -> np.ndarray:
    """Single-mode POVM elements (n_bins, dim, dim) for quadrature x_theta.

    ``eta < 1`` smears each element through the adjoint loss channel, so that
    Tr[rho Pi_eta] equals Tr[L_eta(rho) Pi] for a detector of efficiency eta.
    """
    interior, tails = _bin_gram(dim, bins)
    g = interior.copy()
    g[0] += tails[0]
    g[-1] += tails[1]
    ph = np.exp(1j * theta * np.arange(dim))
    povm = g * np.outer(ph, ph.conj())[None]
    if eta < 1:
        ks = loss_kraus(dim, eta)
        povm = sum(np.einsum("ji,bjk,kl->bil", k, povm, k) for k in ks)
    return povm


def _tail_mass(rho: ModeOperator, pairs, bins: BinSpec) -> float:
    """Largest probability, over the phase pairs, that either quadrature leaves [-x_max, x_max]."""
    marg = [partial_trace(rho, 1).matrix, partial_trace(rho, 0).matrix]
    worst = 0.0
    for ta, tb in pairs:
        mass = 0.0
        for m, th in zip(marg, (ta, tb)):
            d = m.shape[0]
            _, tails = _bin_gram(d, bins)
            ph = np.exp(1j * th * np.arange(d))
            t = (tails[0] + tails[1]) * np.outer(ph, ph.conj())
            mass += float(np.real(np.trace(m @ t)))
        worst = max(worst, mass)
    return worst


@dataclass(frozen=True)
class QuadratureRecord:
    theta_a: float
    theta_b: float
    x_a: float
    x_b: float


@dataclass(frozen=True)
class TomographySchedule:
    """Phase settings per mode (Cartesian product), total sample count and binning."""

    phases_a: tuple[float, ...] = tuple(k * np.pi / 6 for k in range(6))
    phases_b: tuple[float, ...] = tuple(k * np.pi / 6 for k in range(6))
    n_total: int = 200_000
    bins: BinSpec = BinSpec()

    def __post_init__(self):
        for ph in (*self.phases_a, *self.phases_b):
            if not (0 <= ph < np.pi) or not np.isfinite(ph):
                raise ValueError(f"phases must lie in [0, pi), got {ph}")
        if not self.phases_a or not self.phases_b:
            raise ValueError("each mode needs at least one phase")
        if self.n_total < 1:
            raise ValueError("n_total must be positive")

    @property
    def pairs(self) -> list[tuple[float, float]]:
        return list(product(self.phases_a, self.phases_b))

    def counts(self) -> np.ndarray:
        """Samples per pair; the remainder goes to the first pairs so the sum is exact."""
        k = len(self.pairs)
        base, extra = divmod(self.n_total, k)
        return np.array([base + (i < extra) for i in range(k)])


@dataclass
class QuadratureRecords:
    """Column store of homodyne outcomes; iterates as ``QuadratureRecord``."""

    theta_a: np.ndarray
    theta_b: np.ndarray
    x_a: np.ndarray
    x_b: np.ndarray

    def __post_init__(self):
        cols = [np.asarray(c, dtype=float) for c in (self.theta_a, self.theta_b, self.x_a, self.x_b)]
        if len({c.shape for c in cols}) != 1 or cols[0].ndim != 1:
            raise ValueError("record columns must be 1-d and of equal length")
        if not all(np.all(np.isfinite(c)) for c in cols):
            raise ValueError("records must be finite")
        self.theta_a, self.theta_b, self.x_a, self.x_b = cols

    def __len__(self) -> int:
        return self.x_a.size

    def __iter__(self) -> Iterator[QuadratureRecord]:
        for row in zip(self.theta_a, self.theta_b, self.x_a, self.x_b):
            yield QuadratureRecord(*map(float, row))

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["theta_a", "theta_b", "x_a", "x_b"])
        for row in zip(self.theta_a, self.theta_b, self.x_a, self.x_b):
            w.writerow([format(float(v), ".17g") for v in row])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "QuadratureRecords":
        lines = text.splitlines()
        if not lines or lines[0].strip() != "theta_a,theta_b,x_a,x_b":
            raise ValueError("missing header theta_a,theta_b,x_a,x_b")
        data = np.loadtxt(lines[1:], delimiter=",", ndmin=2) if len(lines) > 1 else np.zeros((0, 4))
        return cls(*data.T)

    def histograms(self, bins: BinSpec) -> dict[tuple[float, float], np.ndarray]:
        """Counts per phase pair on a (n_bins, n_bins) grid; out-of-range samples go to edge bins."""
        out = {}
        keys = np.stack([self.theta_a, self.theta_b], axis=1)
        uniq, inv = np.unique(keys, axis=0, return_inverse=True)
        inv = inv.ravel()
        ia = bins.index(self.x_a)
        ib = bins.index(self.x_b)
        for k, (ta, tb) in enumerate(uniq):
            sel = inv == k
            h = np.zeros((bins.n_bins, bins.n_bins))
            np.add.at(h, (ia[sel], ib[sel]), 1.0)
            out[(float(ta), float(tb))] = h
        return out


def _pair_probs(rho_t: np.ndarray, pa: np.ndarray, pb: np.ndarray) -> np.ndarray:
    """Tr[rho (Pa_i x Pb_j)] for all bins; rho_t has shape (da, db, da, db)."""
    da, db = rho_t.shape[:2]
    # m[(n,m'),(q,p')] = rho[m',p',n,q] so that p_ij = sum Pa_i[n,m'] Pb_j[q,p'] rho[m',p',n,q]
    m = rho_t.transpose(2, 0, 3, 1).reshape(da * da, db * db)
    return (pa.reshape(len(pa), -1) @ m @ pb.reshape(len(pb), -1).T).real


def _pair_r(w: np.ndarray, pa: np.ndarray, pb: np.ndarray) -> np.ndarray:
    """sum_ij w_ij Pa_i x Pb_j as a (da*db, da*db) matrix."""
    da, db = pa.shape[1], pb.shape[1]
    r = pa.reshape(len(pa), -1).T @ w @ pb.reshape(len(pb), -1)  # ((m,n),(p,q))
    return r.reshape(da, da, db, db).transpose(0, 2, 1, 3).reshape(da * db, da * db)


def sample(rho: State, schedule: TomographySchedule = TomographySchedule(), eta_hom: float = 1.0,
           seed: int | None = 0) -> QuadratureRecords:
    """Simulate homodyne records from a two-mode state.

    Loss ``eta_hom`` is applied to both modes first. For every phase pair the
    binned joint distribution is computed exactly and sampled by inverse CDF;
    within a bin the value is uniform. Deterministic for a given seed.
    """
    rho = as_operator(rho)
    if rho.shape.n_modes != 2:
        raise ValueError("sample needs a two-mode state")
    for mode in (0, 1):
        rho = loss_channel(rho, mode, eta_hom)
    bins = schedule.bins
    check_tail(_tail_mass(rho, schedule.pairs, bins), "homodyne binning range")
    rng = np.random.default_rng(seed)
    da, db = rho.dims
    t = rho.tensor_view()
    edges = bins.edges
    width = edges[1] - edges[0]
    cols: list[list[np.ndarray]] = [[], [], [], []]
    for (ta, tb), n in zip(schedule.pairs, schedule.counts()):
        probs = _pair_probs(t, bin_povm(da, ta, bins), bin_povm(db, tb, bins))
        cdf = np.cumsum(np.clip(probs, 0, None).ravel())
        cdf /= cdf[-1]
        cell = np.minimum(np.searchsorted(cdf, rng.random(n), side="right"), cdf.size - 1)
        i, j = np.divmod(cell, bins.n_bins)
        jitter = rng.random((2, n))
        cols[0].append(np.full(n, ta))
        cols[1].append(np.full(n, tb))
        cols[2].append(edges[i] + width * jitter[0])
        cols[3].append(edges[j] + width * jitter[1])
    return QuadratureRecords(*(np.concatenate(c) for c in cols))


@dataclass(frozen=True)
class MLEOptions:
    """Stopping rule and step control for the R rho R iteration.

    ``dilution`` in (0, 1] mixes the update operator with identity,
    (1 - d) I + d R/N; 1 is the plain iteration. It is halved automatically
    whenever the log-likelihood would drop.
    """

    max_iter: int = 500
    tol: float = 1e-10
    dilution: float = 1.0
    bins: BinSpec = BinSpec()
    p_floor: float = 1e-300

    def __post_init__(self):
        if not 0 < self.dilution <= 1:
            raise ValueError("dilution must lie in (0, 1]")
        if self.max_iter < 1:
            raise ValueError("max_iter must be positive")


@dataclass
class MLEResult:
    rho: ModeOperator
    iterations: int
    log_likelihood: float
    converged: bool
    informationally_complete: bool
    condition: float
    history: list[dict] = field(default_factory=list, repr=False)

    def to_json(self) -> str:
        m = self.rho.matrix
        return json.dumps({
            "dims": list(self.rho.dims),
            "matrix": [[[float(format(v.real, ".17g")), float(format(v.imag, ".17g"))] for v in row] for row in m],
            "iterations": self.iterations,
            "log_likelihood": self.log_likelihood,
            "converged": self.converged,
            "informationally_complete": self.informationally_complete,
        })

    @staticmethod
    def matrix_from_json(text: str) -> ModeOperator:
        d = json.loads(text)
        arr = np.array(d["matrix"])
        return ModeOperator(ModeShape(tuple(d["dims"])), arr[..., 0] + 1j * arr[..., 1])


def completeness(dims: Sequence[int], pairs: Sequence[tuple[float, float]], bins: BinSpec = BinSpec(),
                 rtol: float = 1e-9) -> tuple[bool, float]:
    """Whether the binned POVMs of the measured phase pairs span all operators.

    Returns (complete, condition) where condition is the ratio of the smallest to
    the largest singular value of the measurement map on the full operator space
    (0 when rank deficient).
    """
    da, db = dims
    blocks = []
    for mode_dim, thetas in ((da, {p[0] for p in pairs}), (db, {p[1] for p in pairs})):
        basis = {}
        for th in thetas:
            v = bin_povm(mode_dim, th, bins).reshape(bins.n_bins, -1).T
            u, s, _ = np.linalg.svd(v, full_matrices=False)
            basis[th] = u[:, s > rtol * s[0]]
        blocks.append(basis)
    cols = [np.kron(blocks[0][ta], blocks[1][tb]) for ta, tb in set(pairs)]
    s = np.linalg.svd(np.concatenate(cols, axis=1), compute_uv=False)
    full = (da * db) ** 2
    rank = int(np.sum(s > rtol * s[0]))
    cond = float(s[full - 1] / s[0]) if rank >= full else 0.0
    return rank >= full, cond


def mle_reconstruct(records: QuadratureRecords, dims: Sequence[int] = (3, 10), eta_hom: float = 1.0,
                    opts: MLEOptions = MLEOptions()) -> MLEResult:
    """Iterative maximum-likelihood estimate rho <- N[R rho R] from binned records.

    POVMs have the detector efficiency folded in, so the estimate is the
    loss-corrected state. Returns the best iterate; ``converged`` is False when
    ``max_iter`` ran out first.
    """
    if len(records) == 0:
        raise ValueError("no records to reconstruct from")
    da, db = (int(d) for d in dims)
    shape = ModeShape((da, db))
    bins = opts.bins
    hists = records.histograms(bins)
    n_total = float(len(records))
    # only occupied bins enter the likelihood, so keep them in sparse form
    data = []
    for (ta, tb), f in hists.items():
        ia, ib = np.nonzero(f)
        pa = bin_povm(da, ta, bins, eta_hom).reshape(bins.n_bins, -1)
        pb = bin_povm(db, tb, bins, eta_hom).reshape(bins.n_bins, -1)
        data.append((ia, ib, f[ia, ib], pa, pb))
    complete, cond = completeness((da, db), list(hists), bins)
    if not complete:
        log.warning("measured phase pairs are not informationally complete at dims %s", (da, db))

    dim = da * db
    eye = np.eye(dim)

    def loglik_and_r(rho: np.ndarray):
        # m[(n,m'),(q,p')] = rho[m',p',n,q], see _pair_probs
        m = rho.reshape(da, db, da, db).transpose(2, 0, 3, 1).reshape(da * da, db * db)
        ll = 0.0
        r = np.zeros((da * da, db * db), dtype=complex)
        for ia, ib, f, pa, pb in data:
            left = pa @ m
            p = np.maximum(np.einsum("kx,kx->k", left[ia], pb[ib]).real, opts.p_floor)
            ll += float(np.sum(f * np.log(p)))
            w = np.zeros((bins.n_bins, bins.n_bins))
            w[ia, ib] = f / p
            r += pa.T @ w @ pb
        r = r.reshape(da, da, db, db).transpose(0, 2, 1, 3).reshape(dim, dim)
        return ll / n_total, r / n_total

    def step(rho: np.ndarray, r: np.ndarray, d: float) -> np.ndarray:
        g = (1 - d) * eye + d * r
        new = g @ rho @ g.conj().T
        new = 0.5 * (new + new.conj().T)
        return new / np.trace(new).real

    rho = eye / dim
    ll, r = loglik_and_r(rho)
    history = [{"iteration": 0, "log_likelihood": ll, "dilution": opts.dilution,
                "trace": 1.0, "min_eigenvalue": float(1 / dim)}]
    d = opts.dilution
    converged = False
    best = (ll, rho)
    it = 0
    for it in range(1, opts.max_iter + 1):
        while True:
            cand = step(rho, r, d)
            ll_new, r_new = loglik_and_r(cand)
            if ll_new >= ll - 1e-12 or d < 1e-6:
                break
            d *= 0.5
            log.info("log-likelihood dropped at iteration %d; dilution -> %g", it, d)
        gain = ll_new - ll
        rho, ll, r = cand, ll_new, r_new
        if ll >= best[0]:
            best = (ll, rho)
        history.append({"iteration": it, "log_likelihood": ll, "dilution": d,
                        "trace": float(np.trace(rho).real),
                        "min_eigenvalue": float(np.linalg.eigvalsh(rho)[0])})
        if abs(gain) < opts.tol:
            converged = True
            break
    ll, rho = best
    return MLEResult(ModeOperator(shape, rho, hermitian=True), it, ll, converged, complete, cond, history)
