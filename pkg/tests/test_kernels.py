import os
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from qpvlab import _backend, _pykernels

BACKENDS = [_backend.get(n) for n in _backend.available()]


def _herm_stack(seed, m, n):
    rng = np.random.default_rng(seed)
    g = rng.standard_normal((m, n, n)) + 1j * rng.standard_normal((m, n, n))
    return (g + g.conj().transpose(0, 2, 1)) / 2


def test_compiled_backend_present():
    # the wheel ships the extension; the fallback exists for source checkouts without a compiler
    assert "python" in _backend.available()
    assert _backend.NAME in _backend.available()


@pytest.mark.parametrize("k", BACKENDS, ids=lambda k: k.NAME)
@given(st.integers(0, 2**32 - 1), st.sampled_from([1, 2, 4, 7, 16, 33, 64]))
def test_eigh_reconstruction(k, seed, n):
    h = _herm_stack(seed, 1, n)[0]
    w, v = k.eigh(h)
    assert np.all(np.diff(w) >= -1e-12)
    scale = max(1.0, np.linalg.norm(h))
    assert np.max(np.abs(h - (v * w) @ v.conj().T)) <= 1e-9 * scale
    assert np.allclose(v.conj().T @ v, np.eye(n), atol=1e-10)
    assert np.allclose(w, np.linalg.eigvalsh(h), atol=1e-10 * scale)


@pytest.mark.parametrize("k", BACKENDS, ids=lambda k: k.NAME)
def test_psd_project_and_min_eig(k):
    stack = _herm_stack(1, 5, 6)
    proj = k.psd_project(stack)
    ref = _pykernels.psd_project(stack)
    assert np.allclose(proj, ref, atol=1e-10)
    assert np.all(np.linalg.eigvalsh(proj) >= -1e-10)
    assert np.allclose(k.min_eigvals(stack), np.linalg.eigvalsh(stack)[:, 0], atol=1e-10)


@pytest.mark.parametrize("k", BACKENDS, ids=lambda k: k.NAME)
def test_tally_rounds_parity(k):
    rng = np.random.default_rng(7)
    n_h, n_oa, n_ob, n_r = 3, 4, 5, 3
    prior_cdf = np.cumsum([0.2, 0.3, 0.5])
    joint = rng.random((n_h, n_oa * n_ob))
    joint_cdf = np.cumsum(joint / joint.sum(axis=1, keepdims=True), axis=1)
    joint_cdf[:, -1] = 1.0
    rule_a = rng.integers(-1, 3, size=(n_oa, n_r)).astype(np.int64)
    rule_b = rng.integers(-1, 3, size=(n_ob, n_r)).astype(np.int64)
    labels = np.array([0, 1, 2], dtype=np.int64)
    u = rng.random((50_000, 3))
    u[:10] = [[0.0, 0.0, 0.0]] * 10
    u[10:20] = [[1 - 1e-17, 1 - 1e-17, 1 - 1e-17]] * 10
    got = np.asarray(k.tally_rounds(u, prior_cdf, joint_cdf, n_ob, rule_a, rule_b, labels))
    want = _pykernels.tally_rounds(u, prior_cdf, joint_cdf, n_ob, rule_a, rule_b, labels)
    assert np.array_equal(got, want)
    # scalar reference for the same rounds
    h = np.minimum(np.searchsorted(prior_cdf, u[:, 0], side="right"), n_h - 1)
    ok = 0
    for i in range(len(u)):
        j = min(np.searchsorted(joint_cdf[h[i]], u[i, 1], side="right"), n_oa * n_ob - 1)
        r = min(int(u[i, 2] * n_r), n_r - 1)
        la, lb = rule_a[j // n_ob, r], rule_b[j % n_ob, r]
        ok += la >= 0 and la == lb == labels[h[i]]
    assert got[2] == ok


def test_pure_env_selects_fallback():
    env = dict(os.environ, QPV_LAB_PURE="1")
    out = subprocess.run([sys.executable, "-c", "import qpvlab; print(qpvlab.BACKEND)"],
                         capture_output=True, text=True, env=env, check=True)
    assert out.stdout.strip() == "python"


def test_unknown_backend():
    with pytest.raises(ValueError):
        _backend.get("fortran")
