import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from numpy.testing import assert_allclose
from scipy.optimize import minimize_scalar

from hybrident.channels import photon_subtract
from hybrident.fock import ModeOperator, TruncationError, fidelity, partial_trace, quadrature
from hybrident.states import (
    HybridTargetSpec,
    SqueezingSpec,
    best_cat_amplitude,
    cat,
    cat_norm_sq,
    coherent,
    hybrid_target,
    max_fidelity_in_span,
    squeezed_vacuum,
    two_mode_squeezed,
)


def variance(psi, theta):
    x = quadrature(psi.dims[0], theta).matrix
    mean = psi.amps.conj() @ x @ psi.amps
    return float((psi.amps.conj() @ x @ x @ psi.amps - mean**2).real)


def test_coherent_overlap_at_alpha_one():
    d = 40
    ov = abs(np.vdot(coherent(1.0, d).amps, coherent(-1.0, d).amps)) ** 2
    assert abs(ov - np.exp(-4)) < 1e-12


@given(a=st.floats(-2, 2), b=st.floats(-2, 2))
def test_coherent_overlap_formula(a, b):
    ov = abs(np.vdot(coherent(a, 50).amps, coherent(b, 50).amps)) ** 2
    assert abs(ov - np.exp(-abs(a - b) ** 2)) < 1e-9


def test_coherent_mean_field():
    psi = coherent(0.8 + 0.3j, 30)
    a = np.diag(np.sqrt(np.arange(1, 30)), 1)
    assert abs(psi.amps.conj() @ a @ psi.amps - (0.8 + 0.3j)) < 1e-10


def test_truncation_error_when_cutoff_too_small():
    with pytest.raises(TruncationError):
        coherent(3.0, 10)
    with pytest.raises(TruncationError):
        squeezed_vacuum(SqueezingSpec.from_db(15), 10)


def test_squeezing_db_round_trip():
    spec = SqueezingSpec.from_db(3.0)
    assert spec.db == pytest.approx(3.0)
    assert spec.r == pytest.approx(3 * np.log(10) / 20)
    with pytest.raises(ValueError):
        SqueezingSpec(-0.1)


def test_squeezed_vacuum_quadrature_variances():
    spec = SqueezingSpec.from_db(3.0)
    psi = squeezed_vacuum(spec, 30)
    assert variance(psi, 0) == pytest.approx(0.5 * np.exp(-2 * spec.r), abs=1e-10)
    assert variance(psi, np.pi / 2) == pytest.approx(0.5 * np.exp(2 * spec.r), abs=1e-10)
    rot = squeezed_vacuum(spec, 30, angle=np.pi / 2)
    assert variance(rot, np.pi / 2) == pytest.approx(0.5 * np.exp(-2 * spec.r), abs=1e-10)


def test_squeezed_vacuum_is_even():
    psi = squeezed_vacuum(SqueezingSpec(0.5), 20)
    assert np.all(psi.amps[1::2] == 0)


def test_two_mode_squeezed_marginal_is_thermal():
    lam = 0.3
    psi = two_mode_squeezed(lam, (12, 12))
    rho = partial_trace(psi.dm(), 1)
    n = np.arange(12)
    assert_allclose(np.diag(rho.matrix).real, (1 - lam**2) * lam ** (2 * n), atol=1e-6)
    with pytest.raises(ValueError):
        two_mode_squeezed(1.0)


@settings(max_examples=25, deadline=None)
@given(alpha=st.floats(0.1, 2.0), parity=st.sampled_from(["even", "odd"]))
def test_cat_parity_and_norm(alpha, parity):
    psi = cat(alpha, parity, 30)
    assert psi.norm() == pytest.approx(1)
    wrong = psi.amps[1::2] if parity == "even" else psi.amps[0::2]
    assert np.all(wrong == 0)
    # closed-form norm agrees with the explicit superposition
    raw = coherent(alpha, 30).amps + (1 if parity == "even" else -1) * coherent(-alpha, 30).amps
    assert np.sum(np.abs(raw) ** 2) == pytest.approx(cat_norm_sq(alpha, parity), rel=1e-6)


def test_cat_errors():
    with pytest.raises(ValueError):
        cat(0, "odd", 10)
    with pytest.raises(ValueError):
        cat(1, "neither", 10)


def test_hybrid_target_number_basis_structure():
    psi = hybrid_target(HybridTargetSpec(0.9), (3, 15))
    t = psi.tensor_view()
    assert np.allclose(t[2], 0)
    assert_allclose(np.abs(t[0]), np.abs(cat(0.9, "odd", 15).amps) / np.sqrt(2), atol=1e-12)
    # e^{i pi} = -1 on the |1>|cat+> branch
    assert_allclose(t[1], -cat(0.9, "even", 15).amps / np.sqrt(2), atol=1e-12)


def test_hybrid_target_rotated_basis_matches_number_basis_form():
    """|+>|-a> - |->|a> expands to cat-norm-weighted |0>|cat-> - |1>|cat+>.

    The equal-weight number-basis target then overlaps it with
    (sqrt(N_odd) + sqrt(N_even))^2 / (2 (N_odd + N_even)).
    """
    a = 1.0
    num = hybrid_target(HybridTargetSpec(a, np.pi), (2, 30))
    rot = hybrid_target(HybridTargetSpec(-a, np.pi, basis="rotated"), (2, 30))
    plus, minus = coherent(a, 30).amps, coherent(-a, 30).amps
    # unnormalized number-basis form of the rotated state
    v0 = (minus + -plus) / 2
    v1 = (minus - -plus) / 2
    manual = np.concatenate([v0, v1])
    manual /= np.linalg.norm(manual)
    assert abs(np.vdot(manual, rot.amps)) == pytest.approx(1, abs=1e-12)
    # frozen from the explicit expansion: equal-weight vs cat-norm-weighted branches
    n_odd, n_even = cat_norm_sq(a, "odd"), cat_norm_sq(a, "even")
    expected = (np.sqrt(n_odd) + np.sqrt(n_even)) ** 2 / (2 * (n_odd + n_even))
    assert fidelity(num, rot.dm()) == pytest.approx(expected, abs=1e-10)
    assert expected == pytest.approx(0.995400, abs=1e-6)


def test_hybrid_target_validation():
    with pytest.raises(ValueError):
        HybridTargetSpec(0.0)
    with pytest.raises(ValueError):
        HybridTargetSpec(1.0, basis="bogus")
    with pytest.raises(ValueError):
        hybrid_target(HybridTargetSpec(1.0), (1, 10))


def _squeezed_cat_oracle(db):
    """Closed form: |<cat+(i a)|S(r)0>|^2 = 2 e^{-a^2 (1 - tanh r)} / (cosh r (1 + e^{-2a^2}))."""
    r = SqueezingSpec.from_db(db).r
    t = np.tanh(r)
    f = lambda a: 2 * np.exp(-a * a * (1 - t)) / (np.cosh(r) * (1 + np.exp(-2 * a * a)))
    res = minimize_scalar(lambda a: -f(a), bounds=(0.05, 2), method="bounded", options={"xatol": 1e-12})
    return res.x, -res.fun


def _subtracted_cat_oracle(db):
    """Closed form for a S|0>: overlap with |a> is prop. to a e^{-a^2/2} e^{tanh(r) a^2 / 2}."""
    r = SqueezingSpec.from_db(db).r
    t = np.tanh(r)
    f = lambda a: 2 * t * t * a * a * np.exp(-a * a * (1 - t)) / (np.cosh(r) * np.sinh(r) ** 2 * (1 - np.exp(-2 * a * a)))
    res = minimize_scalar(lambda a: -f(a), bounds=(0.05, 2), method="bounded", options={"xatol": 1e-12})
    return res.x, -res.fun


def test_best_cat_for_squeezed_vacuum_matches_closed_form():
    a_ref, f_ref = _squeezed_cat_oracle(3.0)
    assert a_ref == pytest.approx(0.587697, abs=1e-6)  # frozen oracle value
    psi = squeezed_vacuum(SqueezingSpec.from_db(3.0), 30, angle=np.pi / 2)
    fit = best_cat_amplitude(psi)
    assert fit.parity == "even" and not fit.at_boundary
    assert fit.alpha == pytest.approx(a_ref, abs=1e-6)
    assert fit.fidelity == pytest.approx(f_ref, abs=1e-10)


def test_best_cat_finds_orientation():
    a_ref, _ = _squeezed_cat_oracle(3.0)
    fit = best_cat_amplitude(squeezed_vacuum(SqueezingSpec.from_db(3.0), 30), phase=None)
    assert fit.alpha == pytest.approx(a_ref, abs=1e-6)
    assert fit.phase == pytest.approx(np.pi / 2, abs=1e-6)


def test_best_cat_for_photon_subtracted_squeezed_vacuum():
    a_ref, f_ref = _subtracted_cat_oracle(3.0)
    assert a_ref == pytest.approx(1.034717, abs=1e-6)
    psi, w = photon_subtract(squeezed_vacuum(SqueezingSpec.from_db(3.0), 30, angle=np.pi / 2), 0)
    assert w == pytest.approx(np.sinh(SqueezingSpec.from_db(3.0).r) ** 2, rel=1e-8)
    fit = best_cat_amplitude(psi)
    assert fit.parity == "odd"
    assert fit.alpha == pytest.approx(a_ref, abs=1e-6)
    assert fit.fidelity == pytest.approx(f_ref, abs=1e-10)


def test_best_cat_boundary_flags():
    vac = np.zeros(10)
    vac[0] = 1
    fit = best_cat_amplitude(ModeOperator((10,), np.outer(vac, vac)), parity="even")
    assert fit.at_boundary and isinstance(fit.at_boundary, bool)
    big = cat(2.5, "even", 40)
    assert best_cat_amplitude(big, alpha_max=1.0).at_boundary


def test_max_fidelity_in_span():
    e = [cat(1.0, "even", 20), cat(1.0, "odd", 20)]
    psi = coherent(1.0, 20)
    # |alpha> lies in the span of the two cats
    assert max_fidelity_in_span(psi.dm(), e) == pytest.approx(1, abs=1e-6)
