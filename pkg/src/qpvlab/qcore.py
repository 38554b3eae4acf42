"""Dense complex linear algebra and quantum-information primitives.

All objects are small (total dimension at most :data:`MAX_DIM`) and
immutable.  An :class:`Operator` is a square complex matrix together with the
dimensions of its tensor factors; factor 0 is the most significant index.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import reduce
from typing import Iterable, Sequence

import numpy as np

from ._backend import kernels

MAX_DIM = 64
HERM_TOL = 1e-12
TRACE_TOL = 1e-10
POVM_TOL = 1e-10
ENTROPY_CUTOFF = 1e-12


class DimensionError(ValueError):
    """Raised when tensor-factor bookkeeping does not line up."""


class InvalidStateError(ValueError):
    """Raised when a matrix fails density-matrix or POVM validation."""


def _frozen(arr):
    arr = np.array(arr, dtype=np.complex128, copy=True)
    arr.setflags(write=False)
    return arr


class Operator:
    """Square complex matrix with labelled tensor-factor dimensions."""

    __slots__ = ("data", "dims")

    def __init__(self, data, dims: Sequence[int] | None = None):
        data = np.asarray(data, dtype=np.complex128)
        if data.ndim != 2 or data.shape[0] != data.shape[1]:
            raise DimensionError(f"operator must be square, got shape {data.shape}")
        if dims is None:
            dims = (data.shape[0],)
        dims = tuple(int(d) for d in dims)
        if not dims or any(d < 1 for d in dims):
            raise DimensionError(f"invalid factor dimensions {dims}")
        if math.prod(dims) != data.shape[0]:
            raise DimensionError(f"dims {dims} do not multiply to side {data.shape[0]}")
        if data.shape[0] > MAX_DIM:
            raise DimensionError(f"total dimension {data.shape[0]} exceeds cap {MAX_DIM}")
        object.__setattr__(self, "data", _frozen(data))
        object.__setattr__(self, "dims", dims)

    def __setattr__(self, name, value):
        raise AttributeError("Operator is immutable")

    def __repr__(self):
        return f"{type(self).__name__}(dims={list(self.dims)})"

    @property
    def dim(self) -> int:
        return self.data.shape[0]

    def _coerce(self, other):
        if isinstance(other, Operator):
            if other.dims != self.dims:
                raise DimensionError(f"dims mismatch {self.dims} vs {other.dims}")
            return other.data
        return other

    def __add__(self, other):
        return Operator(self.data + self._coerce(other), self.dims)

    def __sub__(self, other):
        return Operator(self.data - self._coerce(other), self.dims)

    def __neg__(self):
        return Operator(-self.data, self.dims)

    def __mul__(self, scalar):
        return Operator(self.data * scalar, self.dims)

    __rmul__ = __mul__

    def __truediv__(self, scalar):
        return Operator(self.data / scalar, self.dims)

    def __matmul__(self, other):
        return Operator(self.data @ self._coerce(other), self.dims)

    def dag(self) -> "Operator":
        return Operator(self.data.conj().T, self.dims)

    def trace(self) -> complex:
        return complex(np.trace(self.data))

    def is_hermitian(self, tol: float = HERM_TOL) -> bool:
        return bool(np.max(np.abs(self.data - self.data.conj().T), initial=0.0) <= tol)

    def allclose(self, other, atol: float = 1e-10) -> bool:
        other = other.data if isinstance(other, Operator) else np.asarray(other)
        return bool(np.allclose(self.data, other, rtol=0.0, atol=atol))

    def to_dict(self) -> dict:
        """JSON-ready ``{dims, re, im}`` form."""
        return {
            "dims": list(self.dims),
            "re": self.data.real.tolist(),
            "im": self.data.imag.tolist(),
        }

    @classmethod
    def from_dict(cls, obj: dict) -> "Operator":
        data = np.asarray(obj["re"], dtype=float) + 1j * np.asarray(obj["im"], dtype=float)
        return cls(data, obj["dims"])


class DensityMatrix(Operator):
    """An :class:`Operator` that is Hermitian, unit-trace and PSD."""

    __slots__ = ()

    def __init__(self, data, dims: Sequence[int] | None = None):
        super().__init__(data, dims)
        m = self.data
        if not self.is_hermitian(HERM_TOL):
            raise InvalidStateError("density matrix is not Hermitian")
        tr = np.trace(m).real
        if abs(tr - 1.0) > TRACE_TOL:
            raise InvalidStateError(f"density matrix has trace {tr}")
        w = np.linalg.eigvalsh(m)
        if w[0] < -1e-9 * max(1.0, w[-1]):
            raise InvalidStateError(f"density matrix has eigenvalue {w[0]}")

    @classmethod
    def from_operator(cls, op: Operator) -> "DensityMatrix":
        # symmetrize away rounding before validating
        return cls((op.data + op.data.conj().T) / 2, op.dims)


def is_psd(op, tol: float = 1e-9) -> bool:
    """PSD test with tolerance ``lambda_min >= -tol * max(1, lambda_max)``."""
    m = op.data if isinstance(op, Operator) else np.asarray(op)
    w = np.linalg.eigvalsh((m + m.conj().T) / 2)
    return bool(w[0] >= -tol * max(1.0, w[-1]))


@dataclass(frozen=True)
class Povm:
    """Measurement given by PSD elements summing to the identity.

    When ``has_inconclusive`` is set the last element is the inconclusive
    (loss) outcome.
    """

    elements: tuple
    has_inconclusive: bool = False

    def __post_init__(self):
        elements = tuple(self.elements)
        object.__setattr__(self, "elements", elements)
        if not elements:
            raise InvalidStateError("POVM needs at least one element")
        dims = elements[0].dims
        total = np.zeros_like(elements[0].data)
        for e in elements:
            if e.dims != dims:
                raise DimensionError("POVM elements with different dims")
            if not e.is_hermitian(1e-10) or not is_psd(e):
                raise InvalidStateError("POVM element is not PSD")
            total = total + e.data
        if np.max(np.abs(total - np.eye(total.shape[0]))) > POVM_TOL:
            raise InvalidStateError("POVM elements do not sum to identity")

    @property
    def dims(self):
        return self.elements[0].dims

    def __len__(self):
        return len(self.elements)

    def probabilities(self, rho: Operator) -> np.ndarray:
        if rho.dims != self.dims:
            raise DimensionError(f"state dims {rho.dims} vs POVM dims {self.dims}")
        return np.array([np.real(np.vdot(e.data.conj().T, rho.data)) for e in self.elements])


# ---------------------------------------------------------------------------
# tensor bookkeeping


def kron(a: Operator, b: Operator) -> Operator:
    return Operator(np.kron(a.data, b.data), a.dims + b.dims)


def kron_all(ops: Iterable[Operator]) -> Operator:
    return reduce(kron, ops)


def _check_factor(dims, idx):
    if not 0 <= idx < len(dims):
        raise DimensionError(f"factor index {idx} out of range for dims {list(dims)}")


def partial_trace(rho: Operator, keep) -> Operator:
    """Trace out every factor not listed in ``keep``; kept order is preserved."""
    keep = sorted({int(k) for k in keep})
    if not keep:
        raise DimensionError("keep must name at least one factor")
    for k in keep:
        _check_factor(rho.dims, k)
    dims = rho.dims
    n = len(dims)
    t = rho.data.reshape(dims + dims)
    traced = [i for i in range(n) if i not in keep]
    # einsum labels: row i -> i, column i -> n+i, traced columns reuse row label
    letters = [chr(ord("a") + i) for i in range(2 * n)]
    cols = [letters[i] if i in traced else letters[n + i] for i in range(n)]
    out = [letters[i] for i in keep] + [letters[n + i] for i in keep]
    spec = "".join(letters[:n]) + "".join(cols) + "->" + "".join(out)
    kd = tuple(dims[i] for i in keep)
    side = math.prod(kd)
    return Operator(np.einsum(spec, t).reshape(side, side), kd)


def permute(rho: Operator, order: Sequence[int]) -> Operator:
    """Reorder tensor factors so that new factor ``i`` is old factor ``order[i]``."""
    order = [int(o) for o in order]
    if sorted(order) != list(range(len(rho.dims))):
        raise DimensionError(f"{order} is not a permutation of the factors")
    n = len(rho.dims)
    t = rho.data.reshape(rho.dims + rho.dims)
    t = t.transpose(order + [n + o for o in order])
    dims = tuple(rho.dims[o] for o in order)
    return Operator(t.reshape(rho.dim, rho.dim), dims)


def partial_transpose_indices(dims: Sequence[int], systems) -> np.ndarray:
    """Flat gather index ``g`` with ``pt(M).ravel() == M.ravel()[g]``."""
    dims = tuple(dims)
    n = len(dims)
    side = math.prod(dims)
    axes = list(range(2 * n))
    for s in systems:
        axes[s], axes[n + s] = axes[n + s], axes[s]
    idx = np.arange(side * side).reshape(dims + dims).transpose(axes)
    return np.ascontiguousarray(idx).reshape(-1)


def partial_transpose(rho: Operator, sys) -> Operator:
    """Transpose the factor(s) ``sys`` (an index or an iterable of indices)."""
    systems = [sys] if isinstance(sys, (int, np.integer)) else list(sys)
    for s in systems:
        _check_factor(rho.dims, s)
    g = partial_transpose_indices(rho.dims, systems)
    return Operator(rho.data.reshape(-1)[g].reshape(rho.dim, rho.dim), rho.dims)


def hermitian_eigen(h) -> tuple[np.ndarray, np.ndarray]:
    """Ascending eigenvalues and orthonormal eigenvectors (as columns)."""
    m = h.data if isinstance(h, Operator) else np.asarray(h, dtype=np.complex128)
    scale = max(1.0, float(np.max(np.abs(m), initial=0.0)))
    if np.max(np.abs(m - m.conj().T), initial=0.0) > 1e-10 * scale:
        raise InvalidStateError("hermitian_eigen called on a non-Hermitian matrix")
    return kernels.eigh((m + m.conj().T) / 2)


def von_neumann_entropy(rho: Operator) -> float:
    """Entropy in bits."""
    if not isinstance(rho, DensityMatrix):
        rho = DensityMatrix(rho.data, rho.dims)
    w, _ = hermitian_eigen(rho)
    w = w[w > ENTROPY_CUTOFF]
    return max(0.0, float(-np.sum(w * np.log2(w))))


# ---------------------------------------------------------------------------
# named states and gates

PAULI_I = np.eye(2, dtype=complex)
PAULI_X = np.array([[0, 1], [1, 0]], dtype=complex)
PAULI_Z = np.array([[1, 0], [0, -1]], dtype=complex)
PAULI_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)

BELL_NAMES = ("phi+", "phi-", "psi+", "psi-")
PHI_PLUS, PHI_MINUS, PSI_PLUS, PSI_MINUS = range(4)

_S = 1 / math.sqrt(2)
_BELL_KETS = np.array(
    [
        [_S, 0, 0, _S],
        [_S, 0, 0, -_S],
        [0, _S, _S, 0],
        [0, _S, -_S, 0],
    ],
    dtype=complex,
)
# (I (x) U_i)|phi+> = |bell_i>
BELL_CORRECTIONS = (PAULI_I, PAULI_Z, PAULI_X, PAULI_X @ PAULI_Z)


def bell_ket(label: int) -> np.ndarray:
    if label not in range(4):
        raise ValueError(f"Bell label must be in 0..3, got {label}")
    return _BELL_KETS[label].copy()


def bell_state(label: int) -> DensityMatrix:
    k = bell_ket(label)
    return DensityMatrix(np.outer(k, k.conj()), (2, 2))


def ket_to_dm(ket, dims=None) -> DensityMatrix:
    ket = np.asarray(ket, dtype=complex)
    ket = ket / np.linalg.norm(ket)
    return DensityMatrix(np.outer(ket, ket.conj()), dims)


def maximally_entangled_ket(d: int) -> np.ndarray:
    ket = np.zeros(d * d, dtype=complex)
    ket[:: d + 1] = 1 / math.sqrt(d)
    return ket


def maximally_mixed(dims: Sequence[int]) -> DensityMatrix:
    n = math.prod(dims)
    return DensityMatrix(np.eye(n) / n, dims)


def swap_operator(d: int = 2) -> Operator:
    s = np.zeros((d * d, d * d), dtype=complex)
    for i in range(d):
        for j in range(d):
            s[j * d + i, i * d + j] = 1
    return Operator(s, (d, d))


def bell_povm() -> Povm:
    return Povm(tuple(Operator(bell_state(i).data, (2, 2)) for i in range(4)))


def computational_povm(dims: Sequence[int]) -> Povm:
    n = math.prod(dims)
    return Povm(tuple(Operator(np.diag(np.eye(n)[i]).astype(complex), dims) for i in range(n)))


# ---------------------------------------------------------------------------
# channels and figures of merit


def werner_twirl(rho: Operator) -> DensityMatrix:
    """U (x) U twirl of a two-qubit state, via its projector form."""
    if tuple(rho.dims) != (2, 2):
        raise DimensionError(f"Werner twirl needs dims [2, 2], got {list(rho.dims)}")
    p_minus = bell_state(PSI_MINUS).data
    a = float(np.real(np.vdot(p_minus, rho.data)))
    out = a * p_minus + (1 - a) * (np.eye(4) - p_minus) / 3
    return DensityMatrix(out, (2, 2))


def werner_state(alpha: float) -> DensityMatrix:
    """``alpha |psi-><psi-| + (1 - alpha) I/4``."""
    return DensityMatrix(alpha * bell_state(PSI_MINUS).data + (1 - alpha) * np.eye(4) / 4, (2, 2))


def entangled_fraction(rho: Operator, d: int) -> float:
    if tuple(rho.dims) != (d, d):
        raise DimensionError(f"expected dims [{d}, {d}], got {list(rho.dims)}")
    phi = maximally_entangled_ket(d)
    return float(np.real(phi.conj() @ rho.data @ phi))


def coherent_information(rho: Operator) -> float:
    """``S(B) - S(AB)`` for a bipartite state on dims ``[d_A, d_B]``."""
    if len(rho.dims) != 2:
        raise DimensionError("coherent information needs a bipartite state")
    rho = DensityMatrix.from_operator(rho)
    return von_neumann_entropy(DensityMatrix.from_operator(partial_trace(rho, [1]))) - von_neumann_entropy(rho)


def supports_orthogonal(rho: Operator, sigma: Operator, tol: float = 1e-10) -> bool:
    """True iff the two PSD operators have orthogonal supports.

    Equivalent to the pair being perfectly and unambiguously distinguishable
    without ever answering inconclusive.
    """
    if rho.dims != sigma.dims:
        raise DimensionError(f"dims mismatch {rho.dims} vs {sigma.dims}")
    return bool(np.real(np.vdot(rho.data.conj().T, sigma.data)) <= tol)


def sample_povm(rho: Operator, m: Povm, rng: np.random.Generator) -> int:
    probs = m.probabilities(rho)
    total = probs.sum()
    if abs(total - 1.0) > 1e-8 or probs.min() < -1e-8:
        raise InvalidStateError(f"outcome probabilities do not form a distribution: {probs}")
    probs = np.clip(probs, 0.0, None)
    probs /= probs.sum()
    return int(rng.choice(len(probs), p=probs))


def random_local_unitary(d: int, rng: np.random.Generator) -> Operator:
    """Haar-random ``d x d`` unitary (QR of a Ginibre matrix, phase-fixed)."""
    if d < 2:
        raise ValueError("d must be at least 2")
    z = (rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))) / math.sqrt(2)
    q, r = np.linalg.qr(z)
    ph = np.diag(r) / np.abs(np.diag(r))
    return Operator(q * ph, (d,))


def random_density_matrix(dims: Sequence[int], rng: np.random.Generator, rank: int | None = None) -> DensityMatrix:
    n = math.prod(dims)
    k = rank or n
    g = rng.standard_normal((n, k)) + 1j * rng.standard_normal((n, k))
    m = g @ g.conj().T
    return DensityMatrix(m / np.trace(m).real, dims)


def conjugate(rho: Operator, u: Operator) -> Operator:
    return Operator(u.data @ rho.data @ u.data.conj().T, rho.dims)
