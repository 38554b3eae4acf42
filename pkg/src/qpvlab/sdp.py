"""PPT-constrained state discrimination: build, solve and certify.

The primal problem is

    maximize    sum_i p_i Tr[Pi_i rho_i]
    subject to  sum_i Pi_i = I,  Pi_i >= 0,  Pi_i^{T_B} >= 0

and its dual is

    minimize    Tr[Y]
    subject to  Y - Q_i^{T_B} - p_i rho_i >= 0,  Q_i >= 0.

Any feasible dual pair bounds every PPT (hence every LOCC) strategy from
above.  :func:`solve` runs a two-block ADMM (affine block against the
PSD/PPT cone block) and reads a certified dual bound off the scaled
multipliers, so the reported gap is always an honest upper-minus-lower
bracket.

Certificates whose entries are small-denominator rationals are checked in
exact arithmetic with :class:`fractions.Fraction`; anything else falls back
to floating-point eigenvalue tests.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from . import qcore
from ._backend import kernels
from .protocols import AbstractSpecError, ProtocolSpec
from .qcore import DimensionError, Operator

MAX_DENOMINATOR = 36
FEAS_TOL = 1e-7
DUAL_TOL = 1e-9


class ConvergenceError(RuntimeError):
    """The solver hit its iteration budget before the gap closed."""

    def __init__(self, message, solution):
        super().__init__(message)
        self.solution = solution


# ---------------------------------------------------------------------------
# exact rational helpers


def rationalize(m, max_den: int = MAX_DENOMINATOR, tol: float = 1e-13):
    """Object array of :class:`Fraction` equal to ``m``, or ``None`` when an
    entry is complex or not a rational with denominator ``<= max_den``."""
    m = np.asarray(m)
    if np.iscomplexobj(m):
        if np.max(np.abs(m.imag), initial=0.0) > tol:
            return None
        m = m.real
    out = np.empty(m.shape, dtype=object)
    for idx, x in np.ndenumerate(m):
        f = Fraction(float(x)).limit_denominator(max_den)
        if abs(float(f) - x) > tol:
            return None
        out[idx] = f
    return out


def exact_is_psd(m) -> bool:
    """Exact PSD test for a symmetric rational matrix (symmetric elimination).

    A zero pivot forces its whole row to vanish; a negative pivot refutes.
    """
    a = [[Fraction(x) for x in row] for row in np.asarray(m, dtype=object)]
    n = len(a)
    for i in range(n):
        for j in range(n):
            if a[i][j] != a[j][i]:
                return False
    for k in range(n):
        piv = a[k][k]
        if piv < 0:
            return False
        if piv == 0:
            if any(a[k][j] != 0 for j in range(k + 1, n)):
                return False
            continue
        for i in range(k + 1, n):
            if a[i][k] == 0:
                continue
            f = a[i][k] / piv
            for j in range(k + 1, n):
                a[i][j] -= f * a[k][j]
            a[i][k] = Fraction(0)
    return True


def exact_trace(m) -> Fraction:
    return sum((m[i, i] for i in range(m.shape[0])), Fraction(0))


def exact_partial_transpose(m, dims, systems):
    g = qcore.partial_transpose_indices(dims, systems)
    n = m.shape[0]
    return m.reshape(-1)[g].reshape(n, n)


def fraction_str(f: Fraction) -> str:
    return f"{f.numerator}/{f.denominator}" if f.denominator != 1 else str(f.numerator)


# ---------------------------------------------------------------------------
# problem data


@dataclass(frozen=True)
class SdpProblem:
    """Weighted hypotheses plus the A|B cut that defines PPT."""

    name: str
    priors: tuple
    states: tuple
    a_factors: tuple
    b_factors: tuple
    labels: tuple = ()
    exact_priors: tuple | None = None
    exact_states: tuple | None = None

    def __post_init__(self):
        if abs(sum(self.priors) - 1.0) > 1e-12:
            raise ValueError("priors must sum to 1")
        dims = self.states[0].dims
        if any(s.dims != dims for s in self.states):
            raise DimensionError("hypothesis states with different dims")
        if math.prod(dims) > qcore.MAX_DIM:
            raise DimensionError("problem exceeds the dimension cap")
        if not self.labels:
            object.__setattr__(self, "labels", tuple(range(len(self.states))))

    @property
    def dims(self):
        return self.states[0].dims

    @property
    def n(self) -> int:
        return math.prod(self.dims)

    @property
    def m(self) -> int:
        return len(self.states)

    def objective(self) -> np.ndarray:
        return np.stack([p * s.data for p, s in zip(self.priors, self.states)])

    def average_state(self) -> np.ndarray:
        return sum(p * s.data for p, s in zip(self.priors, self.states))

    def gamma(self, stack: np.ndarray) -> np.ndarray:
        """Partial transpose on the B side, applied to a stack or a matrix."""
        g = qcore.partial_transpose_indices(self.dims, self.b_factors)
        n = self.n
        flat = stack.reshape(-1, n * n)[:, g]
        return flat.reshape(stack.shape)

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "dims": list(self.dims),
            "a_factors": list(self.a_factors),
            "b_factors": list(self.b_factors),
            "priors": list(self.priors),
            "states": [s.to_dict() for s in self.states],
        }


def build(spec) -> SdpProblem:
    """One PPT POVM element per hypothesis label of a concrete protocol."""
    if not isinstance(spec, ProtocolSpec):
        raise AbstractSpecError(f"{getattr(spec, 'name', spec)!r} is abstract; nothing to optimize")
    priors = tuple(h.prior for h in spec.hypotheses)
    states = tuple(h.state for h in spec.hypotheses)
    exact_states = tuple(rationalize(s.data) for s in states)
    exact_priors = tuple(Fraction(p).limit_denominator(MAX_DENOMINATOR) for p in priors)
    exact_ok = all(s is not None for s in exact_states) and all(
        abs(float(f) - p) < 1e-15 for f, p in zip(exact_priors, priors)
    )
    return SdpProblem(
        name=spec.name,
        priors=priors,
        states=states,
        a_factors=spec.a_factors,
        b_factors=spec.b_factors,
        labels=tuple(h.label for h in spec.hypotheses),
        exact_priors=exact_priors if exact_ok else None,
        exact_states=exact_states if exact_ok else None,
    )


@dataclass(frozen=True)
class DualCertificate:
    y: Operator
    q: tuple
    exact_y: np.ndarray | None = None
    exact_q: tuple | None = None

    @classmethod
    def from_exact(cls, y, q, dims):
        f = np.vectorize(float, otypes=[float])
        return cls(
            Operator(f(y), dims),
            tuple(Operator(f(qi), dims) for qi in q),
            exact_y=y,
            exact_q=tuple(q),
        )

    def to_dict(self) -> dict:
        out = {"y": self.y.to_dict(), "q": [qi.to_dict() for qi in self.q]}
        if self.exact_y is not None:
            out["exact_trace_y"] = fraction_str(exact_trace(self.exact_y))
        return out


@dataclass(frozen=True)
class DualCheck:
    valid: bool
    bound: float
    exact: bool
    exact_bound: Fraction | None = None
    min_eigenvalues: tuple = ()

    def __iter__(self):
        yield self.valid
        yield self.exact_bound if self.exact_bound is not None else self.bound


@dataclass
class PrimalSolution:
    povm: list
    value: float
    residuals: dict
    dual_bound: float
    certificate: DualCertificate | None
    iterations: int
    converged: bool
    extra: dict = field(default_factory=dict)

    @property
    def gap(self) -> float:
        return self.dual_bound - self.value

    def to_dict(self) -> dict:
        return {
            "value": self.value,
            "dual_bound": self.dual_bound,
            "gap": self.gap,
            "residuals": dict(self.residuals),
            "iterations": self.iterations,
            "converged": self.converged,
        }


# ---------------------------------------------------------------------------
# verification


def _check_povm_dims(p: SdpProblem, povm):
    if len(povm) != p.m:
        raise DimensionError(f"expected {p.m} POVM elements, got {len(povm)}")
    arrs = []
    for e in povm:
        a = e.data if isinstance(e, Operator) else np.asarray(e, dtype=complex)
        if a.shape != (p.n, p.n):
            raise DimensionError(f"POVM element shape {a.shape}, expected {(p.n, p.n)}")
        arrs.append(a)
    return np.stack(arrs)


def primal_residuals(p: SdpProblem, stack: np.ndarray) -> dict:
    herm = (stack + stack.conj().transpose(0, 2, 1)) / 2
    comp = float(np.max(np.abs(stack.sum(axis=0) - np.eye(p.n))))
    psd = float(max(0.0, -np.min(np.linalg.eigvalsh(herm))))
    ppt = float(max(0.0, -np.min(np.linalg.eigvalsh(p.gamma(herm)))))
    herm_err = float(np.max(np.abs(stack - herm)))
    return {"completeness": comp, "psd": psd, "ppt": ppt, "hermiticity": herm_err}


def verify_primal(p: SdpProblem, povm, tol: float = FEAS_TOL) -> tuple[bool, float]:
    """Feasibility (completeness, PSD, PPT within ``tol``) and objective value."""
    stack = _check_povm_dims(p, povm)
    res = primal_residuals(p, stack)
    feasible = all(v <= tol for v in res.values())
    value = float(np.real(np.einsum("mij,mji->", p.objective(), stack)))
    return feasible, value


def verify_dual(p: SdpProblem, c: DualCertificate, tol: float = DUAL_TOL) -> DualCheck:
    """Check every dual constraint; the bound ``Tr Y`` is valid when ``valid``.

    Uses exact rational arithmetic when both the certificate and the problem
    carry exact data, floating-point eigenvalues otherwise.
    """
    if len(c.q) != p.m:
        raise DimensionError(f"certificate has {len(c.q)} Q matrices for {p.m} hypotheses")
    if c.y.dim != p.n or any(q.dim != p.n for q in c.q):
        raise DimensionError("certificate matrices do not match the problem dimension")
    if c.exact_y is not None and p.exact_states is not None:
        ok = all(exact_is_psd(q) for q in c.exact_q)
        ok = ok and all(c.exact_y[i, j] == c.exact_y[j, i] for i in range(p.n) for j in range(p.n))
        for prior, rho, q in zip(p.exact_priors, p.exact_states, c.exact_q):
            slack = c.exact_y - exact_partial_transpose(q, p.dims, p.b_factors) - rho * prior
            ok = ok and exact_is_psd(slack)
        tr = exact_trace(c.exact_y)
        return DualCheck(ok, float(tr), True, exact_bound=tr)

    y = c.y.data
    qs = np.stack([q.data for q in c.q])
    ok = c.y.is_hermitian(tol)
    q_min = kernels.min_eigvals((qs + qs.conj().transpose(0, 2, 1)) / 2)
    slack = y[None] - p.gamma(qs) - p.objective()
    s_min = kernels.min_eigvals((slack + slack.conj().transpose(0, 2, 1)) / 2)
    ok = ok and bool(np.all(q_min >= -tol)) and bool(np.all(s_min >= -tol))
    return DualCheck(ok, float(np.trace(y).real), False, min_eigenvalues=tuple(float(x) for x in s_min))


# ---------------------------------------------------------------------------
# closed-form optimal certificates


def _exact_bell(i):
    half = Fraction(1, 2)
    m = np.full((4, 4), Fraction(0), dtype=object)
    if i in (0, 1):
        s = 1 if i == 0 else -1
        m[0, 0] = m[3, 3] = half
        m[0, 3] = m[3, 0] = half * s
    else:
        s = 1 if i == 2 else -1
        m[1, 1] = m[2, 2] = half
        m[1, 2] = m[2, 1] = half * s
    return m


def exact_sym_antisym():
    """Exact ``(rho_0, rho_1)`` as object arrays of :class:`Fraction`."""
    rho0 = (_exact_bell(0) + _exact_bell(1) + _exact_bell(2)) * Fraction(1, 3)
    rho1 = _exact_bell(3)
    return rho0, rho1


def _okron(a, b):
    n, m = a.shape[0], b.shape[0]
    out = np.empty((n * m, n * m), dtype=object)
    for i in range(n):
        for j in range(n):
            out[i * m:(i + 1) * m, j * m:(j + 1) * m] = a[i, j] * b
    return out


def appendix_certificates(which: str) -> DualCertificate:
    """The optimal dual solutions for the sym/antisym problems, exactly."""
    rho0, rho1 = exact_sym_antisym()
    if which == "single":
        y = np.array(
            [
                [Fraction(1, 6), 0, 0, 0],
                [0, Fraction(1, 4), Fraction(-1, 12), 0],
                [0, Fraction(-1, 12), Fraction(1, 4), 0],
                [0, 0, 0, Fraction(1, 6)],
            ],
            dtype=object,
        )
        y = np.vectorize(Fraction, otypes=[object])(y)
        q0 = np.full((4, 4), Fraction(0), dtype=object)
        q1 = _exact_bell(0) * Fraction(1, 3)
        return DualCertificate.from_exact(y, (q0, q1), (2, 2))
    if which == "two_round":
        dims = (2, 2)
        y = (_okron(rho0, rho0) * 9 + _okron(rho1, rho1) * 8) * Fraction(1, 18)
        r0t = exact_partial_transpose(rho0, dims, [1]) * 3
        r1t = exact_partial_transpose(rho1, dims, [1])
        q1 = (_okron(r0t, r0t) - _okron(r1t, r1t)) * Fraction(1, 18)
        q0 = np.full((16, 16), Fraction(0), dtype=object)
        return DualCertificate.from_exact(y, (q0, q1), (2, 2, 2, 2))
    raise ValueError(f"unknown certificate {which!r}; use 'single' or 'two_round'")


# ---------------------------------------------------------------------------
# solver


def _hermitize(stack):
    return (stack + stack.conj().transpose(0, 2, 1)) / 2


def _admm(p: SdpProblem, objective, tol, max_iter, extra=None, check_every=25, rho=1.0):
    """Two-block ADMM over the POVM element stack.

    ``objective`` is the (m, n, n) stack of weight matrices ``C_i``.
    ``extra = (j, R, b)`` adds the equality ``Tr[X_j R] = b``.
    """
    m, n = objective.shape[0], p.n
    eye = np.eye(n, dtype=complex)
    x = np.repeat(eye[None] / m, m, axis=0)
    a = x.copy()
    b = x.copy()
    u = np.zeros_like(x)
    v = np.zeros_like(x)
    if extra is not None:
        j, rmat, bval = extra
        rmat = np.asarray(rmat, dtype=complex)
        rr = float(np.vdot(rmat, rmat).real)
    lam = np.zeros((n, n), dtype=complex)
    mu = 0.0
    best = None
    it = 0
    for it in range(1, max_iter + 1):
        mm = (a - u + b - v) / 2 + objective / (2 * rho)
        s = mm.sum(axis=0)
        if extra is None:
            shift = (s - eye) / m
            x = mm - shift[None]
        else:
            num = np.vdot(rmat, mm[j] - (s - eye) / m).real - bval
            mu_s = num / (rr * (1 - 1 / m))
            shift = (s - eye - mu_s * rmat) / m
            x = mm - shift[None]
            x[j] -= mu_s * rmat
            mu = 2 * rho * mu_s
        lam = 2 * rho * shift
        a_prev, b_prev = a, b
        a = kernels.psd_project(_hermitize(x + u))
        b = p.gamma(kernels.psd_project(p.gamma(_hermitize(x + v))))
        u += x - a
        v += x - b

        if it % check_every and it != max_iter:
            continue
        r_prim = max(np.linalg.norm(x - a), np.linalg.norm(x - b))
        r_dual = rho * (np.linalg.norm(a - a_prev) + np.linalg.norm(b - b_prev))
        cert = _certified_bound(p, objective, x, lam, v, rho, extra, mu)
        value = float(np.real(np.einsum("mij,mji->", objective, x)))
        res = primal_residuals(p, x)
        feas = max(res["psd"], res["ppt"], res["completeness"])
        best = (x.copy(), value, cert, res, it)
        if cert[0] - value <= tol and feas <= tol:
            return best, True
        if it % (4 * check_every) == 0:
            # residual balancing; scaled duals follow rho
            if r_prim > 10 * r_dual:
                rho *= 2.0
                u /= 2.0
                v /= 2.0
            elif r_dual > 10 * r_prim:
                rho /= 2.0
                u *= 2.0
                v *= 2.0
    return best, False


def _certified_bound(p, objective, x, lam, v, rho, extra, mu):
    """A valid dual bound from the current multipliers.

    ``Q_i`` is the PSD part of ``-rho * Gamma(V_i)``; ``Y`` is the affine
    multiplier shifted by the smallest multiple of the identity that makes
    every slack PSD.
    """
    n = p.n
    q = kernels.psd_project(_hermitize(-rho * p.gamma(v)))
    y0 = (lam + lam.conj().T) / 2
    slack = y0[None] - p.gamma(q) - objective
    if extra is not None:
        j, rmat, bval = extra
        slack[j] += mu * rmat
    t = max(0.0, -float(np.min(kernels.min_eigvals(_hermitize(slack)))))
    y = y0 + t * np.eye(n)
    bound = float(np.trace(y).real) + (mu * extra[2] if extra is not None else 0.0)
    return bound, y, q, mu


def solve(p: SdpProblem, tol: float = 1e-7, max_iter: int = 200_000, raise_on_failure: bool = True) -> PrimalSolution:
    """PPT-optimal discrimination value with a certified dual bound.

    Converges when the certified gap and every primal residual are at most
    ``tol``.  Deterministic for fixed arguments and kernel backend.
    """
    objective = p.objective()
    (x, value, cert, res, it), ok = _admm(p, objective, tol, max_iter)
    bound, y, q, _ = cert
    dims = p.dims
    sol = PrimalSolution(
        povm=[Operator(xi, dims) for xi in _hermitize(x)],
        value=value,
        residuals=res,
        dual_bound=bound,
        certificate=DualCertificate(Operator(y, dims), tuple(Operator(qi, dims) for qi in q)),
        iterations=it,
        converged=ok,
    )
    if not ok and raise_on_failure:
        raise ConvergenceError(
            f"{p.name}: no convergence in {max_iter} iterations (gap {sol.gap:.3e}, residuals {res})", sol
        )
    return sol


@dataclass
class LossPoint:
    conclusive: float
    value: float
    bound: float
    iterations: int

    @property
    def conditional(self) -> float:
        return self.value / self.conclusive

    @property
    def conditional_bound(self) -> float:
        return self.bound / self.conclusive


@dataclass
class LossResult:
    eta: float
    conditional_value: float
    conditional_bound: float
    points: list
    note: str = "reconstructed loss formulation: sweep of the conclusive probability a over [eta, 1]"

    def to_dict(self) -> dict:
        return {
            "eta": self.eta,
            "conditional_value": self.conditional_value,
            "conditional_bound": self.conditional_bound,
            "points": [
                {"conclusive": pt.conclusive, "value": pt.value, "bound": pt.bound,
                 "conditional": pt.conditional}
                for pt in self.points
            ],
            "note": self.note,
        }


def solve_fixed_conclusive(p: SdpProblem, a: float, tol: float = 1e-7, max_iter: int = 200_000) -> LossPoint:
    """Best success with an extra inconclusive element answered with
    probability exactly ``1 - a`` (averaged over the hypotheses)."""
    if not 0 < a <= 1:
        raise ValueError("conclusive probability must lie in (0, 1]")
    objective = np.concatenate([p.objective(), np.zeros((1, p.n, p.n), dtype=complex)])
    extra = (p.m, p.average_state(), 1.0 - a)
    (x, value, cert, res, it), ok = _admm(p, objective, tol, max_iter, extra=extra)
    if not ok:
        raise ConvergenceError(f"{p.name}: loss SDP at a={a} did not converge", None)
    return LossPoint(a, value, cert[0], it)


def solve_with_loss(p: SdpProblem, eta: float, tol: float = 1e-7, grid: int = 5,
                    max_iter: int = 200_000) -> LossResult:
    """Maximal conditional success ``value(a) / a`` over ``a`` in ``[eta, 1]``.

    ``a`` runs over ``grid`` evenly spaced points (the endpoints included).
    """
    if not 0 < eta <= 1:
        raise ValueError(f"eta must lie in (0, 1], got {eta}")
    grid_pts = np.unique(np.linspace(eta, 1.0, max(grid, 1) if eta < 1 else 1))
    points = [solve_fixed_conclusive(p, float(a), tol, max_iter) for a in grid_pts]
    best = max(points, key=lambda pt: pt.conditional)
    return LossResult(
        eta=float(eta),
        conditional_value=best.conditional,
        conditional_bound=max(pt.conditional_bound for pt in points),
        points=points,
    )
