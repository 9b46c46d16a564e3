"""Heralded hybrid entanglement between a photon-number qubit and a cat-like mode.

Mode layout before heralding: ``[s, i, b, tap]``

* ``s``, ``i``: signal and idler of Alice's weak two-mode squeezed vacuum
* ``b``: Bob's squeezed vacuum, squeezed along ``x_{pi/2}`` so that it
  resembles an even cat with real amplitude
* ``tap``: the fraction ``tap_r`` split off Bob's beam

The router mixes ``i`` and ``tap`` on a beamsplitter of transmissivity
``router_t``; the transmitted-idler port is watched by the herald detector,
the other port is traced out. The phase reference is chosen so the ideal
output is ``|0>|cat-> + e^{i phi} |1>|cat+>``.
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from typing import Sequence

import numpy as np
from scipy.optimize import brentq

from .channels import (
    BeamsplitterSpec,
    HeraldError,
    HeraldModel,
    apply_beamsplitter,
    herald,
    loss_channel,
)
from .fock import ModeOperator, ModeShape, StateVector, partial_trace, tensor
from .states import SqueezingSpec, squeezed_vacuum, two_mode_squeezed

log = logging.getLogger(__name__)

S, I, B, TAP = range(4)


@dataclass(frozen=True)
class ExperimentConfig:
    """All protocol parameters.

    ``eta_a`` and ``eta_b`` are effective local efficiencies. With
    ``eta_includes_homodyne`` (the default) they already contain the homodyne
    efficiency, so the loss-corrected state sees ``eta / eta_hom`` and the raw
    measured state sees ``eta``. ``router_t=None`` means "balance the two
    herald pathways".
    """

    lam: float = 0.1
    squeeze_db: float = 3.0
    tap_r: float = 0.03
    router_t: float | None = None
    phi: float = float(np.pi)
    eta_a: float = 0.76
    eta_b: float = 0.71
    eta_hom: float = 0.85
    eta_includes_homodyne: bool = True
    escape: tuple[float, float] | None = None
    herald: str = "projector_1"
    cond_eff: float = 0.03
    visibility: float = 1.0
    cutoff_a: int = 5
    cutoff_b: int = 15
    cutoff_idler: int = 5
    cutoff_tap: int = 5
    seed: int = 0

    def __post_init__(self):
        unit = ["tap_r", "eta_a", "eta_b", "eta_hom", "cond_eff", "visibility"]
        if self.router_t is not None:
            unit.append("router_t")
        for key in unit:
            v = getattr(self, key)
            if not 0 <= v <= 1:
                raise ValueError(f"{key} must lie in [0, 1], got {v}")
        if not 0 <= self.lam < 1:
            raise ValueError(f"lam must lie in [0, 1), got {self.lam}")
        if self.squeeze_db < 0:
            raise ValueError(f"squeeze_db must be >= 0, got {self.squeeze_db}")
        if self.eta_hom == 0:
            raise ValueError("eta_hom must be > 0")
        for key in ("cutoff_a", "cutoff_b", "cutoff_idler", "cutoff_tap"):
            if getattr(self, key) < 2:
                raise ValueError(f"{key} must be >= 2")
        if self.escape is not None:
            t, l = self.escape
            if t <= 0 or l < 0:
                raise ValueError(f"escape needs T > 0 and L >= 0, got {self.escape}")
            object.__setattr__(self, "escape", (float(t), float(l)))
        HeraldModel(self.herald)
        for key in ("local_eta_a", "local_eta_b"):
            v = getattr(self, key)
            if v > 1 + 1e-12:
                name = key.replace("local_", "")
                raise ValueError(
                    f"{name} / eta_hom = {v:.4g} exceeds 1; {name} includes the homodyne efficiency"
                )

    @classmethod
    def lossless(cls, **kw) -> "ExperimentConfig":
        kw = {"eta_a": 1.0, "eta_b": 1.0, "eta_hom": 1.0, **kw}
        return cls(**kw)

    @property
    def squeeze(self) -> SqueezingSpec:
        return SqueezingSpec.from_db(self.squeeze_db)

    @property
    def herald_model(self) -> HeraldModel:
        return HeraldModel(self.herald)

    @property
    def escape_factor(self) -> float:
        if self.escape is None:
            return 1.0
        t, l = self.escape
        return t / (t + l)

    def _local(self, eta: float) -> float:
        eta = eta * self.escape_factor
        return eta / self.eta_hom if self.eta_includes_homodyne else eta

    @property
    def local_eta_a(self) -> float:
        return self._local(self.eta_a)

    @property
    def local_eta_b(self) -> float:
        return self._local(self.eta_b)

    @property
    def dims(self) -> ModeShape:
        return ModeShape((self.cutoff_a, self.cutoff_idler, self.cutoff_b, self.cutoff_tap))

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class HeraldResult:
    rho_ab: ModeOperator
    p_herald: float
    router_t: float
    eta_hom: float
    diagnostics: dict = field(default_factory=dict)

    @property
    def rho_uncorrected(self) -> ModeOperator:
        """The state as seen through the homodyne detectors (efficiency ``eta_hom`` on both modes)."""
        rho = loss_channel(self.rho_ab, 0, self.eta_hom)
        return loss_channel(rho, 1, self.eta_hom)


def prepare_router_state(cfg: ExperimentConfig, router_t: float, lam=None, squeeze_db=None) -> StateVector:
    """Pure four-mode state ``[s, i, b, tap]`` just before the herald detector."""
    lam = cfg.lam if lam is None else lam
    db = cfg.squeeze_db if squeeze_db is None else squeeze_db
    tmsv = two_mode_squeezed(lam, (cfg.cutoff_a, cfg.cutoff_idler))
    bob = squeezed_vacuum(SqueezingSpec.from_db(db), cfg.cutoff_b, angle=np.pi / 2)
    vac = np.zeros(cfg.cutoff_tap, dtype=complex)
    vac[0] = 1
    psi = tensor(tensor(tmsv, bob), StateVector((cfg.cutoff_tap,), vac))
    psi = apply_beamsplitter(psi, B, TAP, BeamsplitterSpec(1 - cfg.tap_r))
    # the extra pi absorbs the reflection sign so that phi matches the target state's phase
    return apply_beamsplitter(psi, I, TAP, BeamsplitterSpec(router_t, cfg.phi + np.pi))


def _herald_and_trace(psi: StateVector, det: Sequence[int], traced: Sequence[int], model: HeraldModel):
    cond, p = herald(psi, det, model)
    remaining = [m for m in range(psi.shape.n_modes) if m not in det]
    drop = [remaining.index(m) for m in traced]
    return partial_trace(cond, drop), p


def _distinguishable(cfg: ExperimentConfig, router_t: float) -> tuple[ModeOperator, float]:
    """Herald when idler and tap photons occupy orthogonal temporal modes (no interference)."""
    lam, db = cfg.lam, cfg.squeeze_db
    tmsv = two_mode_squeezed(lam, (cfg.cutoff_a, cfg.cutoff_idler))
    bob = squeezed_vacuum(SqueezingSpec.from_db(db), cfg.cutoff_b, angle=np.pi / 2)

    def vac(d):
        v = np.zeros(d, dtype=complex)
        v[0] = 1
        return StateVector((d,), v)

    # modes: s, i, b, tap, v_i (idler's partner), v_t (tap's partner)
    psi = tensor(tensor(tensor(tmsv, bob), vac(cfg.cutoff_tap)), tensor(vac(cfg.cutoff_idler), vac(cfg.cutoff_tap)))
    psi = apply_beamsplitter(psi, 2, 3, BeamsplitterSpec(1 - cfg.tap_r))
    spec = BeamsplitterSpec(router_t, cfg.phi + np.pi)
    psi = apply_beamsplitter(psi, 1, 4, spec)
    psi = apply_beamsplitter(psi, 5, 3, spec)
    t = np.moveaxis(psi.tensor_view(), [1, 5], [0, 1])
    model = cfg.herald_model
    rho = np.zeros((cfg.cutoff_a * cfg.cutoff_b,) * 2, dtype=complex)
    p = 0.0
    for ci in range(t.shape[0]):
        for ct in range(t.shape[1]):
            if not model.accepts((ci, ct)):
                continue
            branch = t[ci, ct]  # s, b, tap, v_i
            p += float(np.sum(np.abs(branch) ** 2))
            m = branch.reshape(cfg.cutoff_a * cfg.cutoff_b, -1)
            rho += m @ m.conj().T
    if p < 1e-14:
        raise HeraldError("distinguishable-mode herald probability is zero")
    return ModeOperator((cfg.cutoff_a, cfg.cutoff_b), rho / p, hermitian=True), p


def pathway_probabilities(cfg: ExperimentConfig, router_t: float) -> tuple[float, float]:
    """Herald probabilities with only Alice's source on, and with only Bob's."""

    def prob(**kw):
        psi = prepare_router_state(cfg, router_t, **kw)
        mass = cfg.herald_model.povm((psi.dims[I],))
        t = np.moveaxis(psi.tensor_view(), I, 0)
        return float(np.sum(mass[:, None] * np.abs(t.reshape(t.shape[0], -1)) ** 2))

    return prob(squeeze_db=0.0), prob(lam=0.0)


def balance_router(cfg: ExperimentConfig, tol: float = 1e-12) -> float:
    """Find the ``router_t`` at which both pathways herald with equal probability."""

    def diff(t):
        pa, pb = pathway_probabilities(cfg, t)
        return pa - pb

    flo, fhi = diff(0.0), diff(1.0)
    if not (flo < 0 < fhi):
        raise ValueError(
            f"no balanced router setting in (0, 1): pathway difference {flo:.3g} at t=0, {fhi:.3g} at t=1"
        )
    return float(brentq(diff, 0.0, 1.0, xtol=tol))


def run_protocol(cfg: ExperimentConfig) -> HeraldResult:
    """Herald the two-mode state on (A=s, B=b), with local losses applied."""
    t = balance_router(cfg) if cfg.router_t is None else cfg.router_t
    psi = prepare_router_state(cfg, t)
    rho, p = _herald_and_trace(psi, [I], [TAP], cfg.herald_model)
    if cfg.visibility < 1:
        rho_d, p_d = _distinguishable(cfg, t)
        v = cfg.visibility
        mixed = v * p * rho.matrix + (1 - v) * p_d * rho_d.matrix
        p = v * p + (1 - v) * p_d
        rho = ModeOperator(rho.shape, mixed / p, hermitian=True)

    populations = np.real(np.diag(rho.matrix)).reshape(rho.dims).sum(axis=1)
    rho = loss_channel(rho, 0, cfg.local_eta_a)
    rho = loss_channel(rho, 1, cfg.local_eta_b)

    pa, pb = pathway_probabilities(cfg, t)
    diagnostics = {
        "p_alice": pa,
        "p_bob": pb,
        "weight_alice": pa / (pa + pb) if pa + pb > 0 else float("nan"),
        "weight_bob": pb / (pa + pb) if pa + pb > 0 else float("nan"),
        "p_herald_lossless_path": p,
        # A-mode populations of the conditional state before local losses
        "population_a0": float(populations[0]),
        "population_a1": float(populations[1]),
    }
    log.debug("router_t=%.6g p=%.4g diagnostics=%s", t, p, diagnostics)
    return HeraldResult(rho, p * cfg.cond_eff, t, cfg.eta_hom, diagnostics)


_ROTATED = {
    "+": np.array([1, 1]) / np.sqrt(2),
    "-": np.array([1, -1]) / np.sqrt(2),
}


def _qubit_vector(k, dim: int, basis: str) -> np.ndarray:
    v = np.zeros(dim, dtype=complex)
    if basis == "number":
        if not isinstance(k, (int, np.integer)) or not 0 <= k < dim:
            raise IndexError(f"number-basis index {k!r} outside 0..{dim - 1}")
        v[k] = 1
    elif basis == "rotated":
        key = {"−": "-"}.get(k, k)
        if key not in _ROTATED:
            raise IndexError(f"rotated-basis index must be '+' or '-', got {k!r}")
        v[:2] = _ROTATED[key]
    else:
        raise ValueError(f"unknown basis {basis!r}")
    return v


def reduced_block(rho_ab: ModeOperator, k, l, basis: str = "number") -> ModeOperator:
    """Operator (<k|_A x I) rho (|l>_A x I) on mode B."""
    if rho_ab.shape.n_modes != 2:
        raise ValueError("reduced_block needs a two-mode operator")
    da, db = rho_ab.dims
    ek = _qubit_vector(k, da, basis)
    el = _qubit_vector(l, da, basis)
    block = np.einsum("i,ibjc,j->bc", ek.conj(), rho_ab.tensor_view(), el)
    return ModeOperator((db,), block, hermitian=bool(k == l and rho_ab.hermitian))


@dataclass(frozen=True)
class SweepPoint:
    router_t: float
    negativity: float
    blocks: dict
    p_herald: float


class SweepError(RuntimeError):
    pass


def _sweep_one(cfg: ExperimentConfig, t: float) -> SweepPoint:
    from .analysis import negativity

    try:
        res = run_protocol(replace(cfg, router_t=float(t)))
    except Exception as exc:
        raise SweepError(f"router_t={t}: {exc}") from exc
    blocks = {(k, l): reduced_block(res.rho_ab, k, l) for k in (0, 1) for l in (0, 1)}
    return SweepPoint(float(t), negativity(res.rho_ab), blocks, res.p_herald)


def sweep_router(cfg: ExperimentConfig, ts: Sequence[float], workers: int = 1) -> list[SweepPoint]:
    """Run the protocol at each router transmissivity; results keep the input order."""
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            return list(pool.map(lambda t: _sweep_one(cfg, t), ts))
    return [_sweep_one(cfg, t) for t in ts]
