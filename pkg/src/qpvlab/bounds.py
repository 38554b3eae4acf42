"""Closed-form security bounds and the root-finding behind them."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from . import qcore
from .qcore import DensityMatrix, Operator

UPPER_BOUND = "upper_bound_on_attack"
THRESHOLD = "threshold"
FIDELITY = "fidelity"

# hashing root for e_target = 1/2, frozen from an independent mpmath solve
ALPHA_STAR_HALF = 0.9008138660412951
REFERENCE_ALPHA = 0.902
REFERENCE_QC_UPPER = 0.926


@dataclass(frozen=True)
class BoundReport:
    name: str
    parameters: dict
    value: float
    kind: str
    provenance: str
    exact: Fraction | None = None
    notes: str = ""

    def to_dict(self) -> dict:
        out = {
            "name": self.name,
            "parameters": dict(self.parameters),
            "value": float(self.value),
            "kind": self.kind,
            "provenance": self.provenance,
        }
        if self.exact is not None:
            out["exact"] = f"{self.exact.numerator}/{self.exact.denominator}"
        if self.notes:
            out["notes"] = self.notes
        return out


@dataclass(frozen=True)
class WernerState:
    alpha: float

    def __post_init__(self):
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError(f"alpha must lie in [0, 1], got {self.alpha}")

    def density_matrix(self) -> DensityMatrix:
        return qcore.werner_state(self.alpha)

    def eigenvalues(self) -> tuple[float, float]:
        """Singlet weight and the threefold-degenerate weight."""
        return self.alpha + (1 - self.alpha) / 4, (1 - self.alpha) / 4


def _check_unit(name, x):
    if not 0.0 <= x <= 1.0:
        raise ValueError(f"{name} must lie in [0, 1], got {x}")


def werner_entropy(alpha: float) -> float:
    """Entropy (bits) of ``alpha |psi-><psi-| + (1 - alpha) I/4``."""
    top, rest = WernerState(alpha).eigenvalues()
    s = 0.0
    if top > 0:
        s -= top * math.log2(top)
    if rest > 0:
        s -= 3 * rest * math.log2(rest)
    return max(0.0, s)


def hashing_alpha_root(e_target: float = 0.5, tol: float = 1e-15) -> float:
    """Largest Werner weight compatible with ``1 - S(AB) <= e_target``.

    ``1 - werner_entropy`` increases strictly on ``(1/4, 1]`` so plain
    bisection finds the unique crossing.
    """
    lo, hi = 0.25, 1.0
    f_lo = 1 - werner_entropy(lo)
    if not 0 < e_target <= 1 or e_target < f_lo:
        raise ValueError(f"target {e_target} outside achievable range [{f_lo:.6f}, 1]")
    if e_target == 1:
        return 1.0
    for _ in range(200):
        mid = (lo + hi) / 2
        if 1 - werner_entropy(mid) < e_target:
            lo = mid
        else:
            hi = mid
        if hi - lo <= tol:
            break
    return (lo + hi) / 2


def qc_success_upper(alpha: float) -> float:
    """Singlet overlap ``alpha + (1 - alpha)/4`` of the twirled verifier state."""
    _check_unit("alpha", alpha)
    return alpha + (1 - alpha) / 4


def teleport_fidelity(f_ent, d: int):
    """Average teleportation fidelity ``(F d + 1)/(d + 1)``; exact for
    rational ``f_ent``."""
    if d < 1:
        raise ValueError("d must be at least 1")
    _check_unit("f_ent", float(f_ent))
    if isinstance(f_ent, (int, Fraction)):
        return (Fraction(f_ent) * d + 1) / (d + 1)
    return (f_ent * d + 1) / (d + 1)


def cloning_bound(d: int) -> Fraction:
    """``5/6 - 1/(6d)``: mean entangled fraction allowed by optimal
    asymmetric 1 -> 2 cloning, hence an upper bound on unentangled
    quantum-communication attacks on d-dimensional Bell discrimination."""
    if d < 2:
        raise ValueError("cloning bound needs d >= 2")
    return Fraction(5, 6) - Fraction(1, 6 * d)


def cloning_mean_inequality_check(rho_vavb: Operator, rho_vavc: Operator, d: int) -> bool:
    f_b = qcore.entangled_fraction(rho_vavb, d)
    f_c = qcore.entangled_fraction(rho_vavc, d)
    return (f_b + f_c) / 2 <= float(cloning_bound(d)) + 1e-9


def loss_attack_threshold(d: int, k: int) -> Fraction:
    """Transmission rate ``1/(k d^2)`` at or below which the teleport-and-guess
    attack succeeds on every answered round."""
    if d < 1 or k < 1:
        raise ValueError("d and k must be positive")
    return Fraction(1, k * d * d)


def entanglement_cost(n_rounds: int, d: int) -> float:
    """EPR pairs (ebits) consumed by the teleport attack over ``n_rounds``."""
    if n_rounds < 0 or d < 1:
        raise ValueError("need n_rounds >= 0 and d >= 1")
    return n_rounds * math.log2(d)


# ---------------------------------------------------------------------------
# purified Bell protocol: verifier-side states prepared by an attack


def _split_with_reference(channel) -> np.ndarray:
    """``(I ⊗ split)`` applied to ``phi+``; factors ``(V, kept, sent)``."""
    phi = qcore.maximally_entangled_ket(2)
    n = 2 * channel.kept_dim * channel.sent_dim
    out = np.zeros((n, n), dtype=complex)
    for k in channel.kraus:
        v = np.kron(np.eye(2), k) @ phi
        out += np.outer(v, v.conj())
    return out.reshape((2, channel.kept_dim, channel.sent_dim) * 2)


def _corrected_pair(omega_a, omega_b, povm, rule) -> DensityMatrix:
    """Verifier pair state after the measurement, with each outcome's
    announced Bell label rotated back to ``phi+``.

    ``omega_a`` lives on ``(V_A, X)``, ``omega_b`` on ``(V', Y)`` and the
    POVM on ``(X, Y)``.
    """
    dx, dy = omega_a.shape[1], omega_b.shape[1]
    joint = np.einsum("axby,czdw->acxzbdyw", omega_a, omega_b)  # (VA,V',X,Y | ...)
    joint = joint.reshape(4 * dx * dy, 4 * dx * dy)
    n_r = rule.shape[1]
    total = np.zeros((4, 4), dtype=complex)
    for o, e in enumerate(povm.elements):
        m = np.kron(np.eye(4), e.data) @ joint
        tau = np.einsum("aibi->ab", m.reshape(4, dx * dy, 4, dx * dy))
        for r in range(n_r):
            label = int(rule[o, r])
            if label < 0:
                raise ValueError("remote preparation needs an attack that always answers")
            u = np.kron(np.eye(2), qcore.BELL_CORRECTIONS[label])
            total += u.conj().T @ tau @ u / n_r
    return DensityMatrix.from_operator(Operator(total, (2, 2)))


def remote_prepared_states(strategy) -> tuple[DensityMatrix, DensityMatrix]:
    """``(rho_VAVB, rho_VAVC)`` for an attack on the qubit Bell protocol.

    The verifiers hold EPR halves ``V_A, V_B``; a third verifier ``V_C``
    feeds B's split a fresh EPR half.  Attacker A's measurement on
    ``kept_a ⊗ sent_b`` steers ``V_A V_B``; attacker B's measurement on
    ``sent_a ⊗ kept_c`` steers ``V_A V_C``.  Each state is corrected by the
    announced label, so its ``phi+`` overlap is that attacker's local
    success probability.
    """
    sa, sb = strategy.split_a, strategy.split_b
    if sa.in_dim != 2 or sb.in_dim != 2:
        raise qcore.DimensionError("remote preparation is defined for qubit Bell inputs")
    wa = _split_with_reference(sa)  # (V, kept, sent | ...)
    wb = _split_with_reference(sb)
    # V_A with A's kept part, and V_B with B's sent part
    wa_kept = np.einsum("aksbls->akbl", wa)
    wb_sent = np.einsum("aksbkt->asbt", wb)
    rho_ab = _corrected_pair(wa_kept, wb_sent, strategy.final_a, strategy.rule_a)
    # V_A with A's sent part, and V_C with C's kept part
    wa_sent = np.einsum("aksbkt->asbt", wa)
    wc_kept = np.einsum("aksbls->akbl", wb)
    rho_ac = _corrected_pair(wa_sent, wc_kept, strategy.final_b, strategy.rule_b)
    return rho_ab, rho_ac


# ---------------------------------------------------------------------------
# report


@dataclass
class BoundsSummary:
    d: int
    k: int
    reports: list = field(default_factory=list)

    def by_name(self) -> dict:
        return {r.name: r for r in self.reports}

    def to_list(self) -> list:
        return [r.to_dict() for r in self.reports]


def all_reports(d: int = 2, k: int = 1) -> BoundsSummary:
    """Every bound for one ``(d, k)`` choice, plus the fixed qubit chain.

    The cloning bound is omitted for ``d = 1`` where it is undefined.
    """
    if d < 1 or k < 1:
        raise ValueError("d and k must be positive")
    alpha = hashing_alpha_root(0.5)
    out = BoundsSummary(d, k)
    out.reports.append(BoundReport(
        "hashing_alpha_root", {"e_target": 0.5}, alpha, THRESHOLD,
        "Werner weight where 1 - S(AB) = 1/2; reference figure alpha <= 0.902",
        notes=f"alpha* <= {REFERENCE_ALPHA}: {alpha <= REFERENCE_ALPHA}",
    ))
    out.reports.append(BoundReport(
        "qc_upper", {"alpha": alpha}, qc_success_upper(alpha), UPPER_BOUND,
        "monogamy plus hashing bound on unentangled quantum-communication attacks; reference figure 0.926",
    ))
    out.reports.append(BoundReport(
        "qc_upper_at_0.902", {"alpha": REFERENCE_ALPHA}, qc_success_upper(REFERENCE_ALPHA), UPPER_BOUND,
        "same bound evaluated at the rounded weight 0.902",
        notes="exceeds 0.926; the reference figure matches the unrounded root",
    ))
    if d >= 2:
        cb = cloning_bound(d)
        out.reports.append(BoundReport(
            "cloning_bound", {"d": d}, float(cb), UPPER_BOUND,
            "5/6 - 1/(6d) from optimal asymmetric cloning", exact=cb,
        ))
    tf = teleport_fidelity(Fraction(1, d * d), d)
    out.reports.append(BoundReport(
        "teleport_fidelity_classical", {"f_ent": f"1/{d * d}", "d": d}, float(tf), FIDELITY,
        "(F d + 1)/(d + 1) at the product-state entangled fraction", exact=Fraction(tf),
    ))
    lt = loss_attack_threshold(d, k)
    out.reports.append(BoundReport(
        "loss_threshold", {"d": d, "k": k}, float(lt), THRESHOLD,
        "teleport-and-guess attack is perfect when eta <= 1/(k d^2)", exact=lt,
    ))
    out.reports.append(BoundReport(
        "entanglement_cost_per_round", {"d": d}, entanglement_cost(1, d), THRESHOLD,
        "ebits per round of the teleport attack (n log2 d over n rounds)",
    ))
    return out
