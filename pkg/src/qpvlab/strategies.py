"""Honest-prover and attacker behaviours.

Every strategy reduces a protocol to a joint distribution over the two
attackers' final measurement outcomes (one table per hypothesis) plus two
answer rules mapping ``(own outcome, shared random value)`` to a label, or
to :data:`LOSS` for the inconclusive answer.  Exact evaluation and the Monte
Carlo sampler both work from these tables.

Attackers follow the one-exchange model: each splits its input into a kept
and a sent register, the sent registers are swapped simultaneously, and each
attacker then measures ``kept ⊗ received`` once.  There is no second round.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from . import qcore
from .protocols import ANTISYMMETRIC, SYMMETRIC, GenericQpv, ProtocolSpec, swap_test_povm
from .qcore import DimensionError, Operator, Povm

LOSS = -1
CLASSICAL_TOL = 1e-10


class ClassicalityError(ValueError):
    """A strategy flagged ``classical_only`` sends a non-classical register."""


@dataclass(frozen=True)
class SplitChannel:
    """Local channel ``input -> kept ⊗ sent`` given by Kraus operators.

    Each Kraus operator has shape ``(kept_dim * sent_dim, in_dim)``.
    """

    kraus: tuple
    in_dim: int
    kept_dim: int
    sent_dim: int

    def __post_init__(self):
        ks = tuple(np.asarray(k, dtype=complex) for k in self.kraus)
        object.__setattr__(self, "kraus", ks)
        out = self.kept_dim * self.sent_dim
        acc = np.zeros((self.in_dim, self.in_dim), dtype=complex)
        for k in ks:
            if k.shape != (out, self.in_dim):
                raise DimensionError(f"Kraus shape {k.shape}, expected {(out, self.in_dim)}")
            acc += k.conj().T @ k
        if np.max(np.abs(acc - np.eye(self.in_dim))) > 1e-10:
            raise ValueError("split channel is not trace preserving")

    def is_classical_sender(self, tol: float = CLASSICAL_TOL) -> bool:
        """True when the sent register of every Kraus image is diagonal.

        Test inputs are the computational basis plus ``|i> + |j>`` and
        ``|i> + i|j>`` for every pair, which together span all operators.
        """
        d = self.in_dim
        basis = np.eye(d, dtype=complex)
        tests = list(basis)
        for i, j in itertools.combinations(range(d), 2):
            tests.append((basis[i] + basis[j]) / math.sqrt(2))
            tests.append((basis[i] + 1j * basis[j]) / math.sqrt(2))
        for k in self.kraus:
            for psi in tests:
                out = (k @ psi).reshape(self.kept_dim, self.sent_dim)
                sent = out.T @ out.conj()
                off = sent - np.diag(np.diag(sent))
                if np.sum(np.abs(off) ** 2) > tol:
                    return False
        return True

    @classmethod
    def identity(cls, in_dims, kept, sent):
        """Route input factors unchanged; ``kept``/``sent`` index ``in_dims``."""
        in_dims = tuple(in_dims)
        n = math.prod(in_dims)
        order = list(kept) + list(sent)
        k_dim = math.prod(in_dims[i] for i in kept)
        s_dim = math.prod(in_dims[i] for i in sent)
        perm = np.arange(n).reshape(in_dims).transpose(order).reshape(-1)
        m = np.zeros((n, n), dtype=complex)
        m[np.arange(n), perm] = 1.0
        return cls((m,), n, k_dim, s_dim)

    @classmethod
    def measure_and_copy(cls, d):
        """Computational-basis measurement; outcome kept and sent."""
        ks = []
        for j in range(d):
            k = np.zeros((d * d, d), dtype=complex)
            k[j * d + j, j] = 1.0
            ks.append(k)
        return cls(tuple(ks), d, d, d)


@dataclass(frozen=True)
class Evaluation:
    success: float
    conclusive: float
    conditional: float
    agreement: float
    local_a: float
    local_b: float

    def as_tuple(self):
        return self.success, self.conclusive, self.conditional


@dataclass(frozen=True)
class StrategyOutcome:
    label_a: int
    label_b: int

    @property
    def agree(self) -> bool:
        return self.label_a == self.label_b and self.label_a != LOSS


class Strategy:
    """Common interface: outcome tables plus answer rules."""

    name: str
    classical_only: bool = False
    params: dict = {}
    rule_a: np.ndarray
    rule_b: np.ndarray

    @property
    def n_shared(self) -> int:
        return self.rule_a.shape[1]

    def joint_table(self, spec) -> np.ndarray:
        """Array ``P[h, o_a, o_b]`` of joint outcome probabilities."""
        raise NotImplementedError

    def answer(self, o_a: int, o_b: int, r: int) -> StrategyOutcome:
        return StrategyOutcome(int(self.rule_a[o_a, r]), int(self.rule_b[o_b, r]))

    def to_dict(self) -> dict:
        return {"name": self.name, "classical_only": self.classical_only, "params": dict(self.params)}


def _check_rules(rule_a, rule_b, n_a, n_b):
    rule_a = np.asarray(rule_a, dtype=np.int64)
    rule_b = np.asarray(rule_b, dtype=np.int64)
    if rule_a.ndim != 2 or rule_b.ndim != 2 or rule_a.shape[1] != rule_b.shape[1]:
        raise ValueError("answer rules must be 2-d with a common shared-randomness axis")
    if rule_a.shape[0] != n_a or rule_b.shape[0] != n_b:
        raise ValueError("answer_rule is not total over the final outcomes")
    return rule_a, rule_b


class AttackStrategy(Strategy):
    """Two attackers, one simultaneous exchange, final local POVMs.

    ``final_a`` acts on ``kept_a ⊗ sent_b`` and ``final_b`` on
    ``sent_a ⊗ kept_b``.  ``rule_a[o, r]`` is attacker A's answer on outcome
    ``o`` with shared random value ``r`` (uniform over the second axis).
    """

    def __init__(self, name, split_a, split_b, final_a, final_b, rule_a, rule_b,
                 classical_only=False, params=None):
        self.name = name
        self.split_a = split_a
        self.split_b = split_b
        self.final_a = final_a
        self.final_b = final_b
        self.classical_only = classical_only
        self.params = dict(params or {})
        if final_a.dims != (split_a.kept_dim, split_b.sent_dim):
            raise DimensionError(f"final_a dims {final_a.dims} do not match kept_a ⊗ sent_b")
        if final_b.dims != (split_a.sent_dim, split_b.kept_dim):
            raise DimensionError(f"final_b dims {final_b.dims} do not match sent_a ⊗ kept_b")
        self.rule_a, self.rule_b = _check_rules(rule_a, rule_b, len(final_a), len(final_b))
        if classical_only:
            self.validate_classical()

    def validate_classical(self):
        for side, ch in (("A", self.split_a), ("B", self.split_b)):
            if not ch.is_classical_sender():
                raise ClassicalityError(f"{self.name}: attacker {side} sends a quantum register")

    def _input_tensor(self, spec, h):
        if not isinstance(spec, ProtocolSpec):
            raise DimensionError(f"{self.name} needs a concrete protocol")
        d_a = math.prod(spec.a_dims)
        d_b = math.prod(spec.b_dims)
        if (d_a, d_b) != (self.split_a.in_dim, self.split_b.in_dim):
            raise DimensionError(
                f"{self.name} expects inputs ({self.split_a.in_dim}, {self.split_b.in_dim}), "
                f"protocol {spec.name} sends ({d_a}, {d_b})"
            )
        rho = qcore.permute(spec.hypotheses[h].state, spec.a_factors + spec.b_factors)
        return rho.data

    def exchanged_state(self, spec, h) -> np.ndarray:
        """State on ``(kept_a, sent_b) ⊗ (sent_a, kept_b)`` after the exchange."""
        rho = self._input_tensor(spec, h)
        ka, sa = self.split_a.kept_dim, self.split_a.sent_dim
        kb, sb = self.split_b.kept_dim, self.split_b.sent_dim
        n = ka * sa * kb * sb
        out = np.zeros((n, n), dtype=complex)
        for ma in self.split_a.kraus:
            for mb in self.split_b.kraus:
                m = np.kron(ma, mb)
                out += m @ rho @ m.conj().T
        t = out.reshape(ka, sa, kb, sb, ka, sa, kb, sb)
        t = t.transpose(0, 3, 1, 2, 4, 7, 5, 6)
        return t.reshape(n, n)

    def post_exchange_states(self, spec, h) -> tuple[Operator, Operator]:
        """Reduced states held by attacker A and attacker B before measuring."""
        ka, sa = self.split_a.kept_dim, self.split_a.sent_dim
        kb, sb = self.split_b.kept_dim, self.split_b.sent_dim
        t = self.exchanged_state(spec, h).reshape(ka * sb, sa * kb, ka * sb, sa * kb)
        sig_a = np.einsum("xyzy->xz", t)
        sig_b = np.einsum("xyxz->yz", t)
        return Operator(sig_a, (ka, sb)), Operator(sig_b, (sa, kb))

    def joint_table(self, spec) -> np.ndarray:
        ea = np.stack([e.data for e in self.final_a.elements])
        eb = np.stack([e.data for e in self.final_b.elements])
        dx, dy = ea.shape[1], eb.shape[1]
        tables = []
        for h in range(len(spec.hypotheses)):
            sig = self.exchanged_state(spec, h).reshape(dx, dy, dx, dy)
            p = np.einsum("oij,pkl,jlik->op", ea, eb, sig).real
            tables.append(np.clip(p, 0.0, None))
        return np.stack(tables)


class ProverStrategy(Strategy):
    """A single prover measuring the joint input and announcing to both sides."""

    def __init__(self, name, povm: Povm, answer_map, params=None):
        self.name = name
        self.povm = povm
        self.answer_map = tuple(answer_map)
        self.params = dict(params or {})
        rule = np.array([[LOSS if a is None else a] for a in self.answer_map], dtype=np.int64)
        self.rule_a, self.rule_b = _check_rules(rule, rule, len(povm), len(povm))

    def joint_table(self, spec) -> np.ndarray:
        if not isinstance(spec, ProtocolSpec):
            raise DimensionError(f"{self.name} needs a concrete protocol")
        if spec.dims != self.povm.dims:
            raise DimensionError(f"{self.name} acts on {self.povm.dims}, protocol sends {spec.dims}")
        n = len(self.povm)
        out = np.zeros((len(spec.hypotheses), n, n))
        for h, hyp in enumerate(spec.hypotheses):
            out[h][np.diag_indices(n)] = np.clip(self.povm.probabilities(hyp.state), 0.0, None)
        return out


class TeleportGuessAttack(Strategy):
    """Lossy attack on ``QPV(d_A, d_B, f)`` using one shared ``d``-dimensional
    maximally entangled pair per round.

    A teleports her input to B and announces the correction index together
    with her classical input; B guesses ``f`` (the shared random value).  Both
    answer only when no correction is needed and the guess was right, in
    which case B holds the actual inputs and can run the honest operation.
    The correction index is uniform over ``d**2`` for a maximally entangled
    resource, so it is sampled directly instead of simulating the circuit.
    """

    lossy = True

    def __init__(self, d: int, k: int):
        if d < 1 or k < 1:
            raise ValueError("d and k must be positive")
        self.name = "teleport-guess"
        self.d = int(d)
        self.k = int(k)
        self.params = {"d": self.d, "k": self.k}
        n = self.d * self.d * self.k
        rule = np.full((n, self.k), LOSS, dtype=np.int64)
        for f in range(self.k):
            # outcome index = correction * k + f ; correction 0 needs no fix-up
            rule[f, f] = f
        self.rule_a, self.rule_b = _check_rules(rule, rule, n, n)

    def joint_table(self, spec) -> np.ndarray:
        if not isinstance(spec, GenericQpv):
            raise DimensionError("teleport-guess attacks the generic QPV(d_A, d_B, f) model")
        if spec.k != self.k or spec.d != self.d:
            raise DimensionError(f"attack built for (d, k) = ({self.d}, {self.k}), protocol has ({spec.d}, {spec.k})")
        n = self.d * self.d * self.k
        out = np.zeros((self.k, n, n))
        for f in range(self.k):
            for c in range(self.d * self.d):
                o = c * self.k + f
                out[f, o, o] = 1.0 / (self.d * self.d)
        return out

    @property
    def entanglement_per_round(self) -> float:
        return math.log2(self.d)


# ---------------------------------------------------------------------------
# evaluation


def _labels_of(spec):
    if isinstance(spec, GenericQpv):
        return np.arange(spec.k, dtype=np.int64)
    return np.array([h.label for h in spec.hypotheses], dtype=np.int64)


def evaluate_strategy_exact(spec, s: Strategy) -> Evaluation:
    """Exact success, conclusive and conditional rates by enumeration."""
    table = s.joint_table(spec)
    priors = spec.priors()
    labels = _labels_of(spec)
    la = s.rule_a[:, None, :]  # (Oa, 1, R)
    lb = s.rule_b[None, :, :]  # (1, Ob, R)
    conclusive_mask = ((la >= 0) & (lb >= 0)).mean(axis=2)
    agree_mask = ((la >= 0) & (la == lb)).mean(axis=2)
    succ = conc = agree = loc_a = loc_b = 0.0
    for h, p in enumerate(priors):
        t = table[h]
        lab = labels[h]
        good = ((la == lab) & (lb == lab)).mean(axis=2)
        succ += p * float(np.sum(t * good))
        conc += p * float(np.sum(t * conclusive_mask))
        agree += p * float(np.sum(t * agree_mask))
        loc_a += p * float(np.sum(t.sum(axis=1)[:, None] * (s.rule_a == lab)) / s.n_shared)
        loc_b += p * float(np.sum(t.sum(axis=0)[:, None] * (s.rule_b == lab)) / s.n_shared)
    cond = succ / conc if conc > 0 else 0.0
    return Evaluation(*(float(x) for x in (succ, conc, cond, agree, loc_a, loc_b)))


# ---------------------------------------------------------------------------
# shipped strategies


def _xor_rule(n_bits: int):
    """Outcome ``o = (a, b)`` with ``a, b`` of ``n_bits`` each; answer
    antisymmetric iff every pair of bits differs."""
    size = 1 << (2 * n_bits)
    rule = np.empty((size, 1), dtype=np.int64)
    for o in range(size):
        a, b = o >> n_bits, o & ((1 << n_bits) - 1)
        differs = all(((a >> i) & 1) != ((b >> i) & 1) for i in range(n_bits))
        rule[o, 0] = ANTISYMMETRIC if differs else SYMMETRIC
    return rule


def honest_bell_measurement() -> ProverStrategy:
    return ProverStrategy("honest-bell", qcore.bell_povm(), (0, 1, 2, 3))


def honest_swap_test(n_pairs: int = 1) -> ProverStrategy:
    return ProverStrategy(
        "honest-swap" if n_pairs == 1 else f"honest-swap-{n_pairs}",
        swap_test_povm(n_pairs=n_pairs),
        (SYMMETRIC, ANTISYMMETRIC),
        params={"n_pairs": n_pairs},
    )


def honest(spec: ProtocolSpec) -> ProverStrategy:
    return ProverStrategy("honest", spec.honest_measurement, spec.answer_map)


def locc_xor() -> AttackStrategy:
    split = SplitChannel.measure_and_copy(2)
    final = qcore.computational_povm((2, 2))
    rule = _xor_rule(1)
    return AttackStrategy("locc-xor", split, split, final, final, rule, rule, classical_only=True)


def locc_xor_two_round() -> AttackStrategy:
    split = SplitChannel.measure_and_copy(4)
    final = qcore.computational_povm((4, 4))
    rule = _xor_rule(2)
    return AttackStrategy("locc-xor-2", split, split, final, final, rule, rule, classical_only=True)


def locc_bell_computational_guess() -> AttackStrategy:
    """Computational-basis measurement; the parity fixes the class
    ``{phi+, phi-}`` or ``{psi+, psi-}`` and a shared random bit picks one."""
    split = SplitChannel.measure_and_copy(2)
    final = qcore.computational_povm((2, 2))
    rule = np.empty((4, 2), dtype=np.int64)
    for o in range(4):
        parity = (o >> 1) ^ (o & 1)
        for r in range(2):
            rule[o, r] = 2 * parity + r
    return AttackStrategy("locc-bell-guess", split, split, final, final, rule, rule, classical_only=True)


def _sym_antisym_povm() -> Povm:
    p_minus = qcore.bell_state(qcore.PSI_MINUS).data
    return Povm((Operator(np.eye(4) - p_minus, (2, 2)), Operator(p_minus, (2, 2))))


def loqc_exchange(classical_only: bool = False) -> AttackStrategy:
    """A keeps her pair-1 qubit and sends pair 2; B keeps pair 2 and sends
    pair 1.  Each then holds a whole Bell pair and measures it locally."""
    split_a = SplitChannel.identity((2, 2), kept=[0], sent=[1])
    split_b = SplitChannel.identity((2, 2), kept=[1], sent=[0])
    final = _sym_antisym_povm()
    rule = np.array([[SYMMETRIC], [ANTISYMMETRIC]], dtype=np.int64)
    return AttackStrategy("loqc-exchange", split_a, split_b, final, final, rule, rule,
                          classical_only=classical_only)


def loqc_bell_forward() -> AttackStrategy:
    """A forwards her qubit to B, who Bell-measures; A can only guess.

    Locally B always succeeds while A succeeds with 1/4, so the pair agrees
    on the right label with probability 1/4.
    """
    split_a = SplitChannel.identity((2,), kept=[], sent=[0])
    split_b = SplitChannel.identity((2,), kept=[0], sent=[])
    final_a = Povm((Operator(np.eye(1), (1, 1)),))
    final_b = qcore.bell_povm()
    rule_a = np.array([[0, 1, 2, 3]], dtype=np.int64)
    rule_b = np.repeat(np.arange(4, dtype=np.int64)[:, None], 4, axis=1)
    return AttackStrategy("loqc-bell-forward", split_a, split_b, final_a, final_b, rule_a, rule_b)


def teleport_guess_attack(d: int, k: int) -> TeleportGuessAttack:
    return TeleportGuessAttack(d, k)


def teleport_circuit(psi: np.ndarray):
    """Full qubit teleportation with a ``phi+`` resource.

    Returns Bell-outcome probabilities on (input, A's resource half) and B's
    normalized uncorrected state for each outcome.
    """
    psi = np.asarray(psi, dtype=complex)
    psi = psi / np.linalg.norm(psi)
    state = np.kron(psi, qcore.maximally_entangled_ket(2))  # (in, R_A, R_B)
    probs, outs = [], []
    for i in range(4):
        proj = np.kron(qcore.bell_ket(i).conj(), np.eye(2))  # <bell_i| (x) I on R_B
        rem = proj @ state
        p = float(np.vdot(rem, rem).real)
        probs.append(p)
        outs.append(rem / math.sqrt(p))
    return np.array(probs), outs


@dataclass(frozen=True)
class _Entry:
    factory: object
    protocols: tuple
    needs_params: bool = False


REGISTRY = {
    "honest": _Entry(None, ("bell", "sym-antisym", "sym-antisym-2")),
    "honest-bell": _Entry(honest_bell_measurement, ("bell",)),
    "honest-swap": _Entry(honest_swap_test, ("sym-antisym",)),
    "locc-xor": _Entry(locc_xor, ("sym-antisym",)),
    "locc-xor-2": _Entry(locc_xor_two_round, ("sym-antisym-2",)),
    "locc-bell-guess": _Entry(locc_bell_computational_guess, ("bell",)),
    "loqc-exchange": _Entry(loqc_exchange, ("sym-antisym-2",)),
    "loqc-bell-forward": _Entry(loqc_bell_forward, ("bell",)),
    "teleport-guess": _Entry(teleport_guess_attack, ("qpv-generic",), needs_params=True),
}


def get(name: str, spec=None, **params) -> Strategy:
    """Instantiate a registered strategy, for ``spec`` where parameters are needed."""
    try:
        entry = REGISTRY[name]
    except KeyError:
        raise KeyError(f"unknown strategy {name!r}; choose from {sorted(REGISTRY)}") from None
    if name == "honest":
        if not isinstance(spec, ProtocolSpec):
            raise ValueError("the honest strategy needs a concrete protocol")
        return honest(spec)
    if entry.needs_params:
        if isinstance(spec, GenericQpv):
            return entry.factory(spec.d, spec.k)
        return entry.factory(params.get("d", 2), params.get("k", 1))
    return entry.factory()


def shipped_pairs():
    """Every (protocol name, strategy name) combination the registries support."""
    return [(p, s) for s, e in REGISTRY.items() for p in e.protocols]
