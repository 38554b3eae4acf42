"""QPV protocols as input ensembles with an honest measurement.

A :class:`ProtocolSpec` lists the joint input states the two verifiers may
send, which tensor factors travel from the A side and which from the B side,
and the measurement an honest prover performs.  Attack strategies and the SDP
module consume these specs.

The purified form of the Bell protocol (verifiers keep EPR halves and check
by a final Bell measurement) induces the same prover-side task, so it shares
the :func:`bell_protocol` spec; :mod:`qpvlab.bounds` builds the purified
states explicitly where they are needed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import qcore
from .qcore import DensityMatrix, Operator, Povm

SYMMETRIC, ANTISYMMETRIC = 0, 1


class AbstractSpecError(ValueError):
    """Raised when a concrete operation is requested from an abstract spec."""


@dataclass(frozen=True)
class Hypothesis:
    label: int
    prior: float
    state: DensityMatrix


@dataclass(frozen=True)
class PureEnsembleMember:
    label: int
    prior: float
    ket: np.ndarray

    def __post_init__(self):
        if abs(np.linalg.norm(self.ket) - 1.0) > 1e-12:
            raise ValueError("ensemble ket is not normalized")


@dataclass(frozen=True)
class ProtocolSpec:
    """Concrete protocol: input ensemble plus honest prover measurement.

    ``a_factors`` and ``b_factors`` partition the tensor factors of the
    hypothesis states into the registers sent by verifier A and verifier B.
    ``answer_map[i]`` is the label the honest prover announces on outcome
    ``i`` of ``honest_measurement`` (``None`` for an inconclusive outcome).
    """

    name: str
    hypotheses: tuple
    a_factors: tuple
    b_factors: tuple
    honest_measurement: Povm
    answer_map: tuple
    labels: tuple = ()
    notes: str = ""
    honest_value: float = field(init=False, default=float("nan"))

    def __post_init__(self):
        hyps = tuple(self.hypotheses)
        object.__setattr__(self, "hypotheses", hyps)
        total = sum(h.prior for h in hyps)
        if abs(total - 1.0) > 1e-12:
            raise ValueError(f"priors sum to {total}")
        dims = hyps[0].state.dims
        if any(h.state.dims != dims for h in hyps):
            raise qcore.DimensionError("hypothesis states have different dims")
        cut = sorted(self.a_factors + self.b_factors)
        if cut != list(range(len(dims))) or not self.a_factors or not self.b_factors:
            raise qcore.DimensionError(f"{self.a_factors}|{self.b_factors} is not a cut of {dims}")
        if len(self.answer_map) != len(self.honest_measurement):
            raise ValueError("answer_map must cover every honest outcome")
        if self.honest_measurement.dims != dims:
            raise qcore.DimensionError("honest measurement dims differ from input dims")
        if not self.labels:
            object.__setattr__(self, "labels", tuple(sorted({h.label for h in hyps})))
        object.__setattr__(self, "honest_value", honest_success(self))

    @property
    def dims(self):
        return self.hypotheses[0].state.dims

    @property
    def a_dims(self):
        return tuple(self.dims[i] for i in self.a_factors)

    @property
    def b_dims(self):
        return tuple(self.dims[i] for i in self.b_factors)

    def average_state(self) -> DensityMatrix:
        avg = sum(h.prior * h.state.data for h in self.hypotheses)
        return DensityMatrix.from_operator(Operator(avg, self.dims))

    def priors(self) -> np.ndarray:
        return np.array([h.prior for h in self.hypotheses])

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "dims": list(self.dims),
            "a_factors": list(self.a_factors),
            "b_factors": list(self.b_factors),
            "priors": [h.prior for h in self.hypotheses],
            "labels": [h.label for h in self.hypotheses],
            "states": [h.state.to_dict() for h in self.hypotheses],
            "honest_success": self.honest_value,
        }


@dataclass(frozen=True)
class GenericQpv:
    """Abstract ``QPV(d_A, d_B, f)``: only the input dimensions and
    ``k = |Im f|`` are modelled.  The value of ``f`` is a uniformly random
    label in ``0..k-1``; ``d_a == 1`` or ``d_b == 1`` stands for purely
    classical input from that side.
    """

    d_a: int
    d_b: int
    k: int
    name: str = "qpv-generic"

    def __post_init__(self):
        if min(self.d_a, self.d_b, self.k) < 1:
            raise ValueError("d_a, d_b and k must all be positive")

    @property
    def d(self) -> int:
        return max(self.d_a, self.d_b)

    @property
    def labels(self):
        return tuple(range(self.k))

    def priors(self) -> np.ndarray:
        return np.full(self.k, 1.0 / self.k)

    def to_dict(self) -> dict:
        return {"name": self.name, "d_a": self.d_a, "d_b": self.d_b, "d": self.d, "k": self.k}


def honest_success(spec) -> float:
    """Success probability of the honest prover's measurement."""
    if not isinstance(spec, ProtocolSpec):
        raise AbstractSpecError(f"{getattr(spec, 'name', spec)!r} has no concrete honest measurement")
    total = 0.0
    for h in spec.hypotheses:
        probs = spec.honest_measurement.probabilities(h.state)
        total += h.prior * sum(p for p, lab in zip(probs, spec.answer_map) if lab == h.label)
    return float(total)


def _dm(m, dims):
    return DensityMatrix.from_operator(Operator(m, dims))


def sym_antisym_states() -> tuple[DensityMatrix, DensityMatrix]:
    """Uniform mixture of the three symmetric Bell states, and ``psi-``."""
    rho0 = sum(qcore.bell_state(i).data for i in (qcore.PHI_PLUS, qcore.PHI_MINUS, qcore.PSI_PLUS)) / 3
    rho1 = qcore.bell_state(qcore.PSI_MINUS).data
    return _dm(rho0, (2, 2)), _dm(rho1, (2, 2))


def swap_test_povm(n_pairs: int = 1, pair: int = 0) -> Povm:
    """``{(I + SWAP)/2, (I - SWAP)/2}`` on qubit pair ``pair`` of ``n_pairs``."""
    sw = qcore.swap_operator(2).data
    plus = (np.eye(4) + sw) / 2
    minus = (np.eye(4) - sw) / 2
    dims = (2, 2) * n_pairs
    rest = np.eye(4 ** (n_pairs - 1))
    out = []
    for e in (plus, minus):
        m = np.kron(e, rest)
        op = Operator(m, (4, 4 ** (n_pairs - 1)) if n_pairs > 1 else (4,))
        out.append(Operator(op.data, dims))
    if pair:
        order = list(range(2 * n_pairs))
        order[0:2], order[2 * pair : 2 * pair + 2] = order[2 * pair : 2 * pair + 2], order[0:2]
        out = [qcore.permute(e, order) for e in out]
    return Povm(tuple(out))


def bell_protocol() -> ProtocolSpec:
    hyps = tuple(Hypothesis(i, 0.25, qcore.bell_state(i)) for i in range(4))
    return ProtocolSpec(
        name="bell",
        hypotheses=hyps,
        a_factors=(0,),
        b_factors=(1,),
        honest_measurement=qcore.bell_povm(),
        answer_map=(0, 1, 2, 3),
        notes="purified form (verifiers keep EPR halves) shares this spec",
    )


def sym_antisym_protocol() -> ProtocolSpec:
    rho0, rho1 = sym_antisym_states()
    return ProtocolSpec(
        name="sym-antisym",
        hypotheses=(Hypothesis(SYMMETRIC, 0.5, rho0), Hypothesis(ANTISYMMETRIC, 0.5, rho1)),
        a_factors=(0,),
        b_factors=(1,),
        honest_measurement=swap_test_povm(),
        answer_map=(SYMMETRIC, ANTISYMMETRIC),
    )


def sym_antisym_two_round() -> ProtocolSpec:
    """Two parallel pairs, both symmetric (drawn independently) or both ``psi-``.

    Factor order is ``(A1, B1, A2, B2)``: pair 1 then pair 2.
    """
    rho0, rho1 = sym_antisym_states()
    s0 = _dm(np.kron(rho0.data, rho0.data), (2, 2, 2, 2))
    s1 = _dm(np.kron(rho1.data, rho1.data), (2, 2, 2, 2))
    return ProtocolSpec(
        name="sym-antisym-2",
        hypotheses=(Hypothesis(SYMMETRIC, 0.5, s0), Hypothesis(ANTISYMMETRIC, 0.5, s1)),
        a_factors=(0, 2),
        b_factors=(1, 3),
        honest_measurement=swap_test_povm(n_pairs=2, pair=0),
        answer_map=(SYMMETRIC, ANTISYMMETRIC),
    )


def generic_qpv(d_a: int, d_b: int, k: int) -> GenericQpv:
    return GenericQpv(int(d_a), int(d_b), int(k))


def two_round_sym_ensemble() -> list[PureEnsembleMember]:
    """Pure-state decomposition of the symmetric two-round hypothesis."""
    sym = (qcore.PHI_PLUS, qcore.PHI_MINUS, qcore.PSI_PLUS)
    return [
        PureEnsembleMember(SYMMETRIC, 1 / 9, np.kron(qcore.bell_ket(i), qcore.bell_ket(j)))
        for i in sym
        for j in sym
    ]


REGISTRY = {
    "bell": bell_protocol,
    "sym-antisym": sym_antisym_protocol,
    "sym-antisym-2": sym_antisym_two_round,
    "qpv-generic": generic_qpv,
}


def get(name: str, **params):
    """Look up a protocol by registry name; ``qpv-generic`` takes ``d``/``k``
    (or ``d_a``/``d_b``/``k``)."""
    try:
        factory = REGISTRY[name]
    except KeyError:
        raise KeyError(f"unknown protocol {name!r}; choose from {sorted(REGISTRY)}") from None
    if name == "qpv-generic":
        d = params.get("d", 2)
        return generic_qpv(params.get("d_a", d), params.get("d_b", d), params.get("k", 1))
    return factory()


def total_dim(spec) -> int:
    return math.prod(spec.dims)
