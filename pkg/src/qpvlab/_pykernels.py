"""Pure numpy implementations of the hot kernels.

Selected by :mod:`qpvlab._backend` when the compiled extension is missing
or when ``QPV_LAB_PURE=1`` is set.  Every function here has a twin with the
same signature in ``_ckernels.pyx``.
"""

import numpy as np

NAME = "python"


def eigh(h):
    """Eigenvalues (ascending) and eigenvectors of a Hermitian matrix."""
    w, v = np.linalg.eigh(np.asarray(h, dtype=np.complex128))
    return w, v


def psd_project(stack):
    """Project each matrix of a (m, n, n) Hermitian stack onto the PSD cone."""
    w, v = np.linalg.eigh(stack)
    np.maximum(w, 0.0, out=w)
    return np.einsum("mij,mj,mkj->mik", v, w, v.conj())


def min_eigvals(stack):
    return np.linalg.eigvalsh(stack)[:, 0]


def tally_rounds(uniforms, prior_cdf, joint_cdf, n_ob, rule_a, rule_b, labels):
    """Tally one block of simulated rounds.

    ``uniforms`` has shape (N, 3): column 0 picks the hypothesis, column 1
    the joint attacker outcome, column 2 the shared random value.

    Returns int64 counts ``[total, conclusive, success, agree,
    answered_a, answered_b, local_a, local_b]``.
    """
    n_h = prior_cdf.shape[0]
    n_j = joint_cdf.shape[1]
    n_r = rule_a.shape[1]

    h = np.searchsorted(prior_cdf, uniforms[:, 0], side="right")
    np.minimum(h, n_h - 1, out=h)

    j = np.empty_like(h)
    for hyp in range(n_h):
        mask = h == hyp
        if mask.any():
            j[mask] = np.searchsorted(joint_cdf[hyp], uniforms[mask, 1], side="right")
    np.minimum(j, n_j - 1, out=j)

    r = (uniforms[:, 2] * n_r).astype(np.int64)
    np.minimum(r, n_r - 1, out=r)

    la = rule_a[j // n_ob, r]
    lb = rule_b[j % n_ob, r]
    lab = labels[h]

    ans_a = la >= 0
    ans_b = lb >= 0
    conclusive = ans_a & ans_b
    agree = conclusive & (la == lb)
    success = agree & (la == lab)
    return np.array(
        [
            uniforms.shape[0],
            conclusive.sum(),
            success.sum(),
            agree.sum(),
            ans_a.sum(),
            ans_b.sum(),
            (la == lab).sum(),
            (lb == lab).sum(),
        ],
        dtype=np.int64,
    )
