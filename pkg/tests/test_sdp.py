import time
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from qpvlab import protocols, qcore, sdp
from qpvlab.qcore import DimensionError, Operator
from qpvlab.sdp import DualCertificate


@pytest.fixture(scope="module")
def problems():
    return {
        "single": sdp.build(protocols.sym_antisym_protocol()),
        "two_round": sdp.build(protocols.sym_antisym_two_round()),
        "bell": sdp.build(protocols.bell_protocol()),
    }


@pytest.fixture(scope="module")
def solutions(problems):
    return {k: sdp.solve(p) for k, p in problems.items()}


def test_build(problems):
    p = problems["single"]
    assert p.m == 2 and p.n == 4 and p.priors == (0.5, 0.5)
    p2 = problems["two_round"]
    rho0, rho1 = protocols.sym_antisym_states()
    assert p2.n == 16
    assert np.allclose(p2.states[0].data, np.kron(rho0.data, rho0.data))
    assert problems["bell"].m == 4
    with pytest.raises(protocols.AbstractSpecError):
        sdp.build(protocols.generic_qpv(2, 2, 1))


@pytest.mark.parametrize("key,target,tol", [("single", 5 / 6, 1e-5), ("two_round", 17 / 18, 1e-5), ("bell", 0.5, 1e-5)])
def test_solve_values(solutions, problems, key, target, tol):
    sol = solutions[key]
    assert sol.converged
    assert sol.value == pytest.approx(target, abs=tol)
    assert sol.value <= sol.dual_bound + 1e-9
    feasible, value = sdp.verify_primal(problems[key], sol.povm, tol=1e-7)
    assert feasible
    assert value == pytest.approx(sol.value, abs=1e-9)


def test_solve_matches_certificates(solutions):
    assert solutions["single"].value == pytest.approx(5 / 6, abs=1e-5)
    assert solutions["two_round"].value == pytest.approx(17 / 18, abs=1e-5)


def test_solver_certificate_is_dual_feasible(problems, solutions):
    for key in ("single", "bell"):
        check = sdp.verify_dual(problems[key], solutions[key].certificate, tol=1e-6)
        assert check.valid
        assert check.bound >= solutions[key].value - 1e-9


def test_solve_is_deterministic(problems):
    a = sdp.solve(problems["single"])
    b = sdp.solve(problems["single"])
    assert a.value == b.value and a.iterations == b.iterations
    assert all(np.array_equal(x.data, y.data) for x, y in zip(a.povm, b.povm))


def test_solve_runtime(problems):
    t = time.perf_counter()
    sdp.solve(problems["two_round"])
    assert time.perf_counter() - t < 60


def test_non_convergence_reported(problems):
    with pytest.raises(sdp.ConvergenceError) as info:
        sdp.solve(problems["two_round"], tol=1e-12, max_iter=50)
    assert not info.value.solution.converged
    assert set(info.value.solution.residuals) >= {"completeness", "psd", "ppt"}
    sol = sdp.solve(problems["two_round"], tol=1e-12, max_iter=50, raise_on_failure=False)
    assert sol.iterations <= 50


def test_verify_primal_examples(problems):
    p = problems["single"]
    pi0 = np.diag([1, 0, 0, 1]).astype(complex)
    pi1 = np.diag([0, 1, 1, 0]).astype(complex)
    feasible, value = sdp.verify_primal(p, [pi0, pi1])
    assert feasible and value == pytest.approx(5 / 6, abs=1e-15)
    feasible, value = sdp.verify_primal(p, [np.eye(4), np.zeros((4, 4))])
    assert feasible and value == pytest.approx(0.5)
    feasible, _ = sdp.verify_primal(p, [2 * np.eye(4), np.zeros((4, 4))])
    assert not feasible
    # projector onto psi- is PSD and complete with its complement but not PPT
    pm = qcore.bell_state(qcore.PSI_MINUS).data
    feasible, _ = sdp.verify_primal(p, [np.eye(4) - pm, pm])
    assert not feasible
    with pytest.raises(DimensionError):
        sdp.verify_primal(p, [np.eye(4)])


def test_certificate_single_exact(problems):
    cert = sdp.appendix_certificates("single")
    assert sdp.exact_trace(cert.exact_y) == Fraction(5, 6)
    diag = [cert.exact_y[i, i] for i in range(4)]
    assert diag == [Fraction(1, 6), Fraction(1, 4), Fraction(1, 4), Fraction(1, 6)]
    assert cert.exact_y[1, 2] == Fraction(-1, 12)
    check = sdp.verify_dual(problems["single"], cert)
    assert check.valid and check.exact and check.exact_bound == Fraction(5, 6)
    valid, bound = check
    assert valid and bound == Fraction(5, 6)


def test_certificate_two_round_exact(problems):
    cert = sdp.appendix_certificates("two_round")
    rho0, rho1 = sdp.exact_sym_antisym()
    r00, r11 = sdp._okron(rho0, rho0), sdp._okron(rho1, rho1)
    q1_tb = sdp.exact_partial_transpose(cert.exact_q[1], (2, 2, 2, 2), [1, 3])
    assert np.all(cert.exact_y - q1_tb - r11 * Fraction(1, 2) == 0)
    assert np.all(cert.exact_y - r00 * Fraction(1, 2) == r11 * Fraction(4, 9))
    check = sdp.verify_dual(problems["two_round"], cert)
    assert check.valid and check.exact_bound == Fraction(17, 18)


def test_q1_spectrum():
    cert = sdp.appendix_certificates("two_round")
    w, _ = qcore.hermitian_eigen(cert.q[1])
    for x in w:
        assert min(abs(x - t) for t in (0, 1 / 18, 1 / 9)) <= 1e-9


def test_perturbed_certificate_rejected(problems):
    p = problems["single"]
    cert = sdp.appendix_certificates("single")
    shifted = DualCertificate(cert.y - Operator(1e-3 * np.eye(4), (2, 2)), cert.q)
    assert not sdp.verify_dual(p, shifted).valid
    exact_shift = cert.exact_y - np.diag([Fraction(1, 1000)] * 4)
    assert not sdp.verify_dual(p, DualCertificate.from_exact(exact_shift, cert.exact_q, (2, 2))).valid
    # the float path accepts the unperturbed matrices too
    assert sdp.verify_dual(p, DualCertificate(cert.y, cert.q)).valid


def test_verify_dual_dims(problems):
    cert = sdp.appendix_certificates("single")
    with pytest.raises(DimensionError):
        sdp.verify_dual(problems["two_round"], cert)
    with pytest.raises(ValueError):
        sdp.appendix_certificates("three")


def test_weak_duality_random_povms(problems):
    rng = np.random.default_rng(5)
    p = problems["single"]
    _, bound = sdp.verify_dual(p, sdp.appendix_certificates("single"))
    for _ in range(20):
        # product-basis measurements are PPT; random local bases then coarse-grained
        ua = qcore.random_local_unitary(2, rng).data
        ub = qcore.random_local_unitary(2, rng).data
        u = np.kron(ua, ub)
        projs = [u @ np.diag(np.eye(4)[i]) @ u.conj().T for i in range(4)]
        split = rng.integers(0, 2, size=4)
        povm = [sum((projs[i] for i in range(4) if split[i] == lab), np.zeros((4, 4))) for lab in (0, 1)]
        feasible, value = sdp.verify_primal(p, povm)
        assert feasible
        assert value <= float(bound) + 1e-9


def test_exact_psd():
    assert sdp.exact_is_psd(np.array([[Fraction(1), Fraction(1)], [Fraction(1), Fraction(1)]], dtype=object))
    assert not sdp.exact_is_psd(np.array([[Fraction(0), Fraction(1)], [Fraction(1), Fraction(0)]], dtype=object))
    assert not sdp.exact_is_psd(np.array([[Fraction(1), Fraction(2)], [Fraction(2), Fraction(1)]], dtype=object))


@given(st.integers(0, 2**32 - 1))
def test_exact_psd_agrees_with_eigenvalues(seed):
    rng = np.random.default_rng(seed)
    a = rng.integers(-3, 4, size=(4, 4))
    m = a + a.T
    exact = sdp.exact_is_psd(np.vectorize(Fraction, otypes=[object])(m))
    w = np.linalg.eigvalsh(m.astype(float))
    if abs(w.min()) > 1e-9:
        assert exact == (w.min() > 0)


def test_rationalize():
    r = sdp.rationalize(np.array([[1 / 6, 1 / 36], [0.5, 1.0]]))
    assert r[0, 0] == Fraction(1, 6) and r[0, 1] == Fraction(1, 36)
    assert sdp.rationalize(np.array([[np.pi]])) is None
    assert sdp.rationalize(np.array([[1j]])) is None


def test_loss_bell_constant(problems):
    for eta in (0.25, 0.5, 0.75, 1.0):
        res = sdp.solve_with_loss(problems["bell"], eta)
        assert res.conditional_value == pytest.approx(0.5, abs=1e-4)
        assert "reconstruct" in res.note


def test_loss_eta_one_matches_solve(problems, solutions):
    for key in ("single", "bell"):
        res = sdp.solve_with_loss(problems[key], 1.0)
        assert res.conditional_value == pytest.approx(solutions[key].value, abs=1e-6)


def test_loss_sym_antisym_not_tolerant(problems):
    # below eta = 1/3 a never-wrong answer on equal computational outcomes is possible
    res = sdp.solve_with_loss(problems["single"], 0.25)
    assert res.conditional_value == pytest.approx(1.0, abs=1e-5)


def test_loss_rejects_bad_eta(problems):
    with pytest.raises(ValueError):
        sdp.solve_with_loss(problems["bell"], 0.0)
    with pytest.raises(ValueError):
        sdp.solve_with_loss(problems["bell"], 1.5)


def test_serialization(problems, solutions):
    d = solutions["single"].to_dict()
    assert "value" in d and "residuals" in d
    assert problems["single"].to_dict()["name"] == "sym-antisym"
    cd = sdp.appendix_certificates("single").to_dict()
    assert cd["exact_trace_y"] == "5/6"
