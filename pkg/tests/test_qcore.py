import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from qpvlab import bounds, qcore
from qpvlab.montecarlo import wilson_interval, z_for
from qpvlab.qcore import DensityMatrix, DimensionError, InvalidStateError, Operator, Povm

seeds = st.integers(min_value=0, max_value=2**32 - 1)
dims_lists = st.lists(st.integers(min_value=1, max_value=3), min_size=1, max_size=3)


def _state(seed, dims, rank=None):
    return qcore.random_density_matrix(dims, np.random.default_rng(seed), rank=rank)


# --- Operator / DensityMatrix construction -------------------------------------------------


def test_operator_validates_shape_and_dims():
    with pytest.raises(DimensionError):
        Operator(np.zeros((2, 3)))
    with pytest.raises(DimensionError):
        Operator(np.eye(4), (2, 3))
    with pytest.raises(DimensionError):
        Operator(np.eye(2), (0, 2))
    with pytest.raises(DimensionError):
        Operator(np.eye(65))


def test_operator_is_immutable():
    op = Operator(np.eye(2))
    with pytest.raises(AttributeError):
        op.dims = (1, 2)
    with pytest.raises(ValueError):
        op.data[0, 0] = 5


def test_density_matrix_rejects_invalid():
    with pytest.raises(InvalidStateError):
        DensityMatrix(np.diag([0.7, 0.7]))
    with pytest.raises(InvalidStateError):
        DensityMatrix(np.diag([1.2, -0.2]))
    with pytest.raises(InvalidStateError):
        DensityMatrix(np.array([[0.5, 0.5], [0.0, 0.5]]))


def test_operator_json_roundtrip(rng):
    rho = qcore.random_density_matrix((2, 2), rng)
    back = Operator.from_dict(rho.to_dict())
    assert back.dims == (2, 2)
    assert back.allclose(rho, 0)
    assert set(rho.to_dict()) == {"dims", "re", "im"}


# --- kron / partial trace / partial transpose -----------------------------------------------


def test_kron_examples(rng):
    i2 = Operator(np.eye(2))
    assert qcore.kron(i2, i2).allclose(Operator(np.eye(4)))
    x = Operator(qcore.PAULI_X)
    xx = qcore.kron(x, x).data
    assert np.allclose(xx @ np.array([1, 0, 0, 0]), [0, 0, 0, 1])
    a = rng.standard_normal((3, 3))
    b = rng.standard_normal((2, 2))
    a, b = Operator(a + a.T), Operator(b + b.T)
    assert qcore.kron(a, b).trace() == pytest.approx(a.trace() * b.trace())
    assert qcore.kron(a, b).dims == (3, 2)


def test_partial_trace_examples(rng):
    phi = qcore.bell_state(qcore.PHI_PLUS)
    assert qcore.partial_trace(phi, [0]).allclose(Operator(np.eye(2) / 2), 1e-14)
    rho = qcore.random_density_matrix((2,), rng)
    sigma = qcore.random_density_matrix((3,), rng)
    assert qcore.partial_trace(qcore.kron(rho, sigma), [0]).allclose(rho, 1e-12)
    with pytest.raises(DimensionError):
        qcore.partial_trace(phi, [2])


def test_partial_transpose_examples(rng):
    phi = qcore.bell_state(qcore.PHI_PLUS)
    ev = np.linalg.eigvalsh(qcore.partial_transpose(phi, 1).data)
    assert np.allclose(ev, [-0.5, 0.5, 0.5, 0.5], atol=1e-14)
    rho = qcore.random_density_matrix((2,), rng)
    sigma = qcore.random_density_matrix((3,), rng)
    pt = qcore.partial_transpose(qcore.kron(rho, sigma), 1)
    assert pt.allclose(qcore.kron(rho, Operator(sigma.data.T)), 1e-14)
    assert qcore.is_psd(pt)
    with pytest.raises(DimensionError):
        qcore.partial_transpose(phi, 5)


@given(seeds, dims_lists)
def test_partial_trace_preserves_trace(seed, dims):
    rho = _state(seed, dims)
    for keep in range(len(dims)):
        assert abs(qcore.partial_trace(rho, [keep]).trace() - 1) <= 1e-12


@given(seeds, dims_lists, st.data())
def test_partial_transpose_involution_and_hermiticity(seed, dims, data):
    rho = _state(seed, dims)
    sys = data.draw(st.integers(0, len(dims) - 1))
    once = qcore.partial_transpose(rho, sys)
    assert once.is_hermitian()
    assert qcore.partial_transpose(once, sys).allclose(rho, 1e-14)


@given(seeds)
def test_kron_associative(seed):
    rng = np.random.default_rng(seed)
    a, b, c = (qcore.random_density_matrix((d,), rng) for d in (2, 3, 2))
    left = qcore.kron(qcore.kron(a, b), c)
    right = qcore.kron(a, qcore.kron(b, c))
    assert left.dims == right.dims == (2, 3, 2)
    assert left.allclose(right, 1e-14)


def test_permute_swaps_factors(rng):
    a = qcore.random_density_matrix((2,), rng)
    b = qcore.random_density_matrix((3,), rng)
    assert qcore.permute(qcore.kron(a, b), [1, 0]).allclose(qcore.kron(b, a), 1e-14)


# --- eigen / entropy -----------------------------------------------------------------------------


def test_hermitian_eigen_examples():
    w, _ = qcore.hermitian_eigen(Operator(np.eye(5)))
    assert np.allclose(w, 1)
    w, _ = qcore.hermitian_eigen(Operator(qcore.PAULI_Z))
    assert np.allclose(w, [-1, 1])
    with pytest.raises(ValueError):
        qcore.hermitian_eigen(Operator(np.array([[0, 1], [0, 0]])))


@given(seeds, st.integers(min_value=1, max_value=24))
def test_hermitian_eigen_reconstructs(seed, n):
    rng = np.random.default_rng(seed)
    g = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    h = (g + g.conj().T) / 2
    w, v = qcore.hermitian_eigen(Operator(h))
    assert np.all(np.diff(w) >= -1e-12)
    assert np.max(np.abs(h - (v * w) @ v.conj().T)) <= 1e-9 * np.linalg.norm(h)
    assert np.allclose(v.conj().T @ v, np.eye(n), atol=1e-10)


def test_entropy_examples():
    assert qcore.von_neumann_entropy(qcore.bell_state(0)) == pytest.approx(0, abs=1e-12)
    assert qcore.von_neumann_entropy(qcore.maximally_mixed((2, 2))) == pytest.approx(2, abs=1e-12)
    # frozen from closed-form eigenvalues evaluated with mpmath
    assert qcore.von_neumann_entropy(qcore.werner_state(0.902)) == pytest.approx(0.49534601179535750694, abs=1e-12)


@given(seeds, dims_lists)
def test_entropy_bounds_and_unitary_invariance(seed, dims):
    rho = _state(seed, dims)
    n = rho.dim
    s = qcore.von_neumann_entropy(rho)
    assert -1e-12 <= s <= math.log2(n) + 1e-12
    if n >= 2:
        u = qcore.random_local_unitary(n, np.random.default_rng(seed + 1))
        rotated = qcore.conjugate(rho, u)
        assert qcore.von_neumann_entropy(rotated) == pytest.approx(s, abs=1e-8)


# --- Bell states / twirl / fractions ------------------------------------------------------------


def test_bell_states():
    kets = [qcore.bell_ket(i) for i in range(4)]
    assert np.allclose(np.array(kets).conj() @ np.array(kets).T, np.eye(4))
    assert abs(np.vdot(kets[qcore.PHI_PLUS], kets[qcore.PSI_MINUS])) < 1e-15
    for i in range(4):
        b = qcore.bell_state(i)
        assert b.trace() == pytest.approx(1)
        assert np.linalg.matrix_rank(b.data) == 1
        assert qcore.partial_trace(b, [0]).allclose(Operator(np.eye(2) / 2), 1e-14)
        rotated = np.kron(np.eye(2), qcore.BELL_CORRECTIONS[i]) @ kets[qcore.PHI_PLUS]
        assert abs(abs(np.vdot(rotated, kets[i])) - 1) < 1e-14
    with pytest.raises(ValueError):
        qcore.bell_state(4)


def test_twirl_examples():
    pm = qcore.bell_state(qcore.PSI_MINUS)
    assert qcore.werner_twirl(pm).allclose(pm, 1e-14)
    mixed = qcore.maximally_mixed((2, 2))
    assert qcore.werner_twirl(mixed).allclose(mixed, 1e-14)
    expect = (np.eye(4) - pm.data) / 3
    assert np.allclose(qcore.werner_twirl(qcore.bell_state(qcore.PHI_PLUS)).data, expect, atol=1e-14)
    with pytest.raises(DimensionError):
        qcore.werner_twirl(qcore.maximally_mixed((4,)))


@given(seeds)
def test_twirl_covariance_idempotence(seed):
    rng = np.random.default_rng(seed)
    rho = qcore.random_density_matrix((2, 2), rng)
    tw = qcore.werner_twirl(rho)
    assert qcore.werner_twirl(tw).allclose(tw, 1e-10)
    pm = qcore.bell_state(qcore.PSI_MINUS).data
    assert np.trace(pm @ tw.data).real == pytest.approx(np.trace(pm @ rho.data).real, abs=1e-12)
    u = qcore.random_local_unitary(2, rng).data
    uu = np.kron(u, u)
    moved = DensityMatrix.from_operator(Operator(uu @ rho.data @ uu.conj().T, (2, 2)))
    assert qcore.werner_twirl(moved).allclose(tw, 1e-8)


def test_twirl_commutes_with_100_haar_samples(rng):
    tw = qcore.werner_twirl(qcore.random_density_matrix((2, 2), rng)).data
    worst = 0.0
    for _ in range(100):
        u = qcore.random_local_unitary(2, rng).data
        uu = np.kron(u, u)
        worst = max(worst, np.linalg.norm(uu @ tw - tw @ uu))
    assert worst <= 1e-7


def test_werner_state_form():
    w = qcore.werner_state(0.3)
    expect = 0.3 * qcore.bell_state(qcore.PSI_MINUS).data + 0.7 * np.eye(4) / 4
    assert np.allclose(w.data, expect)
    assert qcore.werner_twirl(w).allclose(w, 1e-14)


def test_entangled_fraction_examples():
    for d in (2, 3):
        phi = qcore.ket_to_dm(qcore.maximally_entangled_ket(d), (d, d))
        assert qcore.entangled_fraction(phi, d) == pytest.approx(1)
        assert qcore.entangled_fraction(qcore.maximally_mixed((d, d)), d) == pytest.approx(1 / d**2)
    assert qcore.entangled_fraction(qcore.bell_state(qcore.PSI_MINUS), 2) == pytest.approx(0, abs=1e-15)
    with pytest.raises(DimensionError):
        qcore.entangled_fraction(qcore.bell_state(0), 3)


def test_coherent_information_examples():
    assert qcore.coherent_information(qcore.bell_state(0)) == pytest.approx(1, abs=1e-12)
    prod = qcore.ket_to_dm(np.kron([1, 0], [0, 1]), (2, 2))
    assert qcore.coherent_information(prod) == pytest.approx(0, abs=1e-12)
    a = bounds.hashing_alpha_root(0.5)
    assert qcore.coherent_information(qcore.werner_state(a)) == pytest.approx(0.5, abs=1e-6)


@given(seeds, st.integers(2, 3), st.integers(2, 3))
def test_coherent_information_properties(seed, da, db):
    rho = _state(seed, (da, db))
    ab = qcore.coherent_information(rho)
    ba = qcore.coherent_information(qcore.permute(rho, [1, 0]))
    assert ab <= math.log2(da) + 1e-9
    s_a = qcore.von_neumann_entropy(qcore.partial_trace(rho, [0]))
    s_b = qcore.von_neumann_entropy(qcore.partial_trace(rho, [1]))
    # the two directions differ by exactly S(B) - S(A)
    assert ab - ba == pytest.approx(s_b - s_a, abs=1e-9)
    assert (abs(ab - ba) <= 1e-9) == (abs(s_a - s_b) <= 1e-9)


def test_coherent_information_equal_marginals():
    rho = qcore.werner_state(0.6)
    assert qcore.coherent_information(rho) == pytest.approx(
        qcore.coherent_information(qcore.permute(rho, [1, 0])), abs=1e-12
    )


# --- support orthogonality / POVMs / sampling -----------------------------------------------


def test_supports_orthogonal_examples(rng):
    assert qcore.supports_orthogonal(qcore.bell_state(qcore.PHI_PLUS), qcore.bell_state(qcore.PSI_MINUS))
    rho = qcore.random_density_matrix((2, 2), rng, rank=1)
    assert not qcore.supports_orthogonal(rho, rho)
    with pytest.raises(DimensionError):
        qcore.supports_orthogonal(rho, qcore.maximally_mixed((2,)))


def test_povm_validation():
    with pytest.raises(ValueError):
        Povm((Operator(np.eye(2)), Operator(np.eye(2))))
    with pytest.raises(ValueError):
        Povm((Operator(np.diag([2.0, 1.0])), Operator(np.diag([-1.0, 0.0]))))
    assert len(qcore.bell_povm()) == 4


def test_sample_povm_examples(rng):
    comp = qcore.computational_povm((2,))
    zero = qcore.ket_to_dm([1, 0])
    assert all(qcore.sample_povm(zero, comp, rng) == 0 for _ in range(200))
    plus = qcore.ket_to_dm(np.array([1, 1]) / math.sqrt(2))
    n = 100_000
    ones = sum(qcore.sample_povm(plus, comp, rng) for _ in range(n))
    lo, hi = wilson_interval(ones, n, z_for(0.99))
    assert lo <= 0.5 <= hi
    bell = qcore.bell_povm()
    for i in range(4):
        assert all(qcore.sample_povm(qcore.bell_state(i), bell, rng) == i for _ in range(20))


def test_sample_povm_rejects_bad_probabilities(rng):
    bad = Operator(np.diag([0.7, 0.7]))
    with pytest.raises(ValueError):
        qcore.sample_povm(bad, qcore.computational_povm((2,)), rng)


@pytest.mark.slow
def test_sample_povm_frequencies_million(rng):
    rho = qcore.random_density_matrix((2, 2), rng)
    povm = qcore.bell_povm()
    probs = povm.probabilities(rho)
    n = 1_000_000
    counts = np.bincount([qcore.sample_povm(rho, povm, rng) for _ in range(n)], minlength=4)
    for p, c in zip(probs, counts):
        lo, hi = wilson_interval(int(c), n)
        assert lo <= p <= hi


def test_random_local_unitary(rng):
    for d in (2, 3, 5):
        u = qcore.random_local_unitary(d, rng).data
        assert np.allclose(u.conj().T @ u, np.eye(d), atol=1e-10)
        assert abs(abs(np.linalg.det(u)) - 1) <= 1e-8
    with pytest.raises(ValueError):
        qcore.random_local_unitary(1, rng)
