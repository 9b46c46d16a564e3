import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from numpy.testing import assert_allclose
from scipy.linalg import expm

from hybrident.channels import (
    BeamsplitterSpec,
    HeraldError,
    HeraldModel,
    apply_beamsplitter,
    herald,
    loss_channel,
    loss_kraus,
    phase_shift,
    photon_subtract,
)
from hybrident.fock import ModeOperator, StateVector, TruncationError, basis, tensor
from hybrident.states import coherent, two_mode_squeezed


def dense_bs(d, t, theta, big=14):
    """expm of the generator on a generously truncated space, restricted to d x d inputs.

    Truncating the generator is only accurate far from the cutoff, so the
    oracle works at ``big`` and we compare low photon numbers.
    """
    a = np.diag(np.sqrt(np.arange(1, big)), 1)
    eye = np.eye(big)
    A, B = np.kron(a, eye), np.kron(eye, a)
    phi = np.arccos(np.sqrt(t))
    g = phi * (np.exp(1j * theta) * A @ B.conj().T - np.exp(-1j * theta) * A.conj().T @ B)
    return expm(g)


def embed(psi, big):
    da, db = psi.dims
    t = np.zeros((big, big), dtype=complex)
    t[:da, :db] = psi.tensor_view()
    return t.ravel()


@settings(max_examples=20, deadline=None)
@given(t=st.floats(0, 1), theta=st.floats(0, 2 * np.pi), seed=st.integers(0, 1000))
def test_beamsplitter_matches_dense_expm(t, theta, seed):
    rng = np.random.default_rng(seed)
    d = 3
    v = rng.normal(size=d * d) + 1j * rng.normal(size=d * d)
    psi = StateVector((d, d), v).normalize()
    # widen the output so no norm overflows
    wide = StateVector((2 * d - 1, 2 * d - 1), embed(psi, 2 * d - 1))
    out = apply_beamsplitter(wide, 0, 1, BeamsplitterSpec(t, theta))
    ref = (dense_bs(d, t, theta) @ embed(psi, 14)).reshape(14, 14)[: 2 * d - 1, : 2 * d - 1]
    assert_allclose(out.tensor_view(), ref, atol=1e-10)


def test_creation_operator_transform():
    t, theta = 0.3, 0.7
    out = apply_beamsplitter(basis([1, 0], [3, 3]), 0, 1, BeamsplitterSpec(t, theta))
    v = out.tensor_view()
    assert v[1, 0] == pytest.approx(np.sqrt(t))
    assert v[0, 1] == pytest.approx(np.exp(1j * theta) * np.sqrt(1 - t))


def test_hong_ou_mandel_dip():
    out = apply_beamsplitter(basis([1, 1], [3, 3]), 0, 1, BeamsplitterSpec(0.5))
    v = out.tensor_view()
    assert abs(v[1, 1]) < 1e-14
    assert abs(v[2, 0]) ** 2 == pytest.approx(0.5)
    assert abs(v[0, 2]) ** 2 == pytest.approx(0.5)


def test_beamsplitter_on_density_matches_pure():
    psi = tensor(coherent(0.5, 8), coherent(0.3j, 8))
    spec = BeamsplitterSpec(0.4, 1.1)
    a = apply_beamsplitter(psi, 0, 1, spec).dm()
    b = apply_beamsplitter(psi.dm(), 0, 1, spec)
    assert_allclose(a.matrix, b.matrix, atol=1e-12)


def test_coherent_states_split_as_classical_fields():
    psi = tensor(coherent(1.0, 20), basis(0, 20))
    out = apply_beamsplitter(psi, 0, 1, BeamsplitterSpec(0.36, 0.5))
    ref = tensor(coherent(0.6, 20), coherent(np.exp(0.5j) * 0.8, 20))
    assert abs(np.vdot(ref.amps, out.amps)) == pytest.approx(1, abs=1e-9)


def test_beamsplitter_overflow_raises():
    with pytest.raises(TruncationError):
        apply_beamsplitter(basis([2, 2], [3, 3]), 0, 1, BeamsplitterSpec(0.5))


def test_beamsplitter_spec_validation():
    with pytest.raises(ValueError):
        BeamsplitterSpec(1.2)


def rand_rho(d, seed):
    rng = np.random.default_rng(seed)
    g = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    m = g @ g.conj().T
    return ModeOperator((d,), m / np.trace(m))


@settings(max_examples=30, deadline=None)
@given(eta=st.floats(0, 1), seed=st.integers(0, 1000), d=st.integers(2, 7))
def test_loss_kraus_matches_ancilla(eta, seed, d):
    rho = rand_rho(d, seed)
    k = loss_channel(rho, 0, eta, method="kraus")
    a = loss_channel(rho, 0, eta, method="ancilla")
    assert_allclose(k.matrix, a.matrix, atol=1e-12)


@given(eta=st.floats(0, 1), d=st.integers(2, 10))
def test_loss_kraus_completeness(eta, d):
    s = sum(k.T @ k for k in loss_kraus(d, eta))
    assert_allclose(s, np.eye(d), atol=1e-12)


def test_loss_on_coherent_state_shrinks_amplitude():
    rho = loss_channel(coherent(1.2, 25), 0, 0.64)
    ref = coherent(1.2 * 0.8, 25)
    assert ref.expect(rho) == pytest.approx(1, abs=1e-10)


def test_loss_on_single_photon():
    rho = loss_channel(basis(1, 3), 0, 0.7)
    assert_allclose(np.diag(rho.matrix).real, [0.3, 0.7, 0.0], atol=1e-14)


def test_loss_validation():
    with pytest.raises(ValueError):
        loss_channel(basis(0, 3), 0, 1.5)
    with pytest.raises(ValueError):
        loss_channel(basis(0, 3), 0, 0.5, method="magic")


def test_phase_shift():
    out = phase_shift(basis(2, 3), 0, 0.3)
    assert out.amps[2] == pytest.approx(np.exp(0.6j))


def test_herald_single_photon_on_tmsv():
    lam = 0.2
    psi = two_mode_squeezed(lam, (8, 8))
    rho, p = herald(psi, 1, HeraldModel("projector_1"))
    assert p == pytest.approx((1 - lam**2) * lam**2, rel=1e-12)
    assert_allclose(rho.matrix, basis(1, 8).dm().matrix, atol=1e-12)
    _, p_on = herald(psi, 1, HeraldModel("on_off"))
    assert p_on == pytest.approx(lam**2, rel=1e-6)


def test_herald_pure_and_mixed_agree():
    psi = two_mode_squeezed(0.3, (6, 6))
    r1, p1 = herald(psi, [1], HeraldModel("on_off"))
    r2, p2 = herald(psi.dm(), [1], HeraldModel("on_off"))
    assert p1 == pytest.approx(p2)
    assert_allclose(r1.matrix, r2.matrix, atol=1e-13)


def test_herald_errors():
    with pytest.raises(HeraldError):
        herald(tensor(basis(0, 3), basis(0, 3)), 1)
    with pytest.raises(ValueError):
        herald(basis([0, 0], [2, 2]), [0, 1])
    with pytest.raises(ValueError):
        HeraldModel("pnr")


def test_herald_model_povm():
    assert HeraldModel("projector_1").povm([3]).tolist() == [0, 1, 0]
    assert HeraldModel("on_off").povm([3]).tolist() == [0, 1, 1]
    assert HeraldModel("projector_1").povm([2, 2]).tolist() == [0, 1, 1, 0]


def test_photon_subtract_from_fock_state():
    out, w = photon_subtract(basis(3, 5), 0)
    assert w == pytest.approx(3)
    assert_allclose(np.abs(out.amps), basis(2, 5).amps)
    with pytest.raises(ValueError):
        photon_subtract(basis(0, 5), 0)
