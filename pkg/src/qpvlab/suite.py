"""The reference battery run by ``qpv-lab paper-suite``.

Each check returns a :class:`CheckResult` carrying its measured values, so a
report can show what was compared and not just the verdict.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from . import bounds, montecarlo, protocols, qcore, sdp, strategies


@dataclass
class CheckResult:
    key: str
    title: str
    passed: bool
    measured: dict = field(default_factory=dict)
    # wall-clock figures stay out of serialized reports so reruns match byte for byte
    seconds: float | None = None

    def line(self) -> str:
        extra = f" ({self.seconds:.2f} s)" if self.seconds is not None else ""
        return f"{'PASS' if self.passed else 'FAIL'} {self.key}: {self.title}{extra}"

    def to_dict(self) -> dict:
        return {"name": self.key, "title": self.title, "passed": self.passed, "measured": self.measured}


def _timed(fn, *args, **kw):
    t = time.perf_counter()
    out = fn(*args, **kw)
    return out, time.perf_counter() - t


def _eig_near(values, targets, tol):
    return all(min(abs(v - t) for t in targets) <= tol for v in values)


def check_single_round(tol: float = 1e-7) -> CheckResult:
    p = sdp.build(protocols.sym_antisym_protocol())
    sol, secs = _timed(sdp.solve, p, tol)
    valid, bound = sdp.verify_dual(p, sdp.appendix_certificates("single"))
    ok = abs(sol.value - 5 / 6) <= 1e-5 and valid and bound == Fraction(5, 6) and secs < 5
    return CheckResult("c1", "single-round PPT optimum 5/6 with exact certificate", ok, {
        "value": sol.value, "certificate_valid": valid, "certificate_bound": bound,
    }, secs)


def check_two_round(tol: float = 1e-7) -> CheckResult:
    p = sdp.build(protocols.sym_antisym_two_round())
    sol, secs = _timed(sdp.solve, p, tol)
    cert = sdp.appendix_certificates("two_round")
    valid, bound = sdp.verify_dual(p, cert)
    q1 = np.linalg.eigvalsh(cert.q[1].data)
    spectrum_ok = _eig_near(q1, (0.0, 1 / 18, 1 / 9), 1e-9)
    ok = abs(sol.value - 17 / 18) <= 1e-5 and valid and bound == Fraction(17, 18) and spectrum_ok and secs < 60
    return CheckResult("c2", "two-round PPT optimum 17/18 with exact certificate", ok, {
        "value": sol.value, "certificate_valid": valid, "certificate_bound": bound,
        "q1_spectrum": sorted({round(float(v), 12) for v in q1}),
    }, secs)


def check_bell(tol: float = 1e-7, etas=(0.25, 0.5, 0.75, 1.0)) -> CheckResult:
    p = sdp.build(protocols.bell_protocol())
    sol = sdp.solve(p, tol)
    sweep = {str(eta): sdp.solve_with_loss(p, eta, tol).conditional_value for eta in etas}
    ok = abs(sol.value - 0.5) <= 1e-4 and all(abs(v - 0.5) <= 1e-3 for v in sweep.values())
    return CheckResult("c3", "Bell PPT optimum 1/2, flat under loss", ok, {"value": sol.value, "loss_sweep": sweep})


def check_strategies() -> CheckResult:
    sa, sa2, bell = (protocols.sym_antisym_protocol(), protocols.sym_antisym_two_round(),
                     protocols.bell_protocol())
    ev = strategies.evaluate_strategy_exact
    got = {
        "locc_xor": (ev(sa, strategies.locc_xor()).success, 5 / 6),
        "locc_xor_two_round": (ev(sa2, strategies.locc_xor_two_round()).success, 17 / 18),
        "locc_bell_computational_guess": (ev(bell, strategies.locc_bell_computational_guess()).success, 0.5),
        "loqc_exchange": (ev(sa2, strategies.loqc_exchange()).success, 1.0),
    }
    sep = got["loqc_exchange"][0] - got["locc_xor_two_round"][0]
    ok = all(abs(v - t) <= 1e-12 for v, t in got.values()) and abs(sep - 1 / 18) <= 1e-12
    measured = {k: v for k, (v, _) in got.items()}
    measured["loqc_locc_separation"] = sep
    return CheckResult("c4", "exact strategy values and the 1/18 separation", ok, measured)


def check_monte_carlo(rounds: int, seed: int, chunks: int = 4) -> CheckResult:
    flags, rates = [], {}
    t = time.perf_counter()
    for prot, strat in strategies.shipped_pairs():
        cfg = montecarlo.RunConfig(prot, strat, rounds, seed, chunks, d=2, k=2)
        cc = montecarlo.cross_check(cfg)
        rates[f"{prot}/{strat}"] = cc.stats.success_rate
        flags += [f"{prot}/{strat} {f}" for f in cc.flags]
    secs = time.perf_counter() - t
    return CheckResult("c5", "Monte Carlo agrees with exact evaluation", not flags and secs < 120, {
        "rounds": rounds, "success_rates": rates, "flags": flags,
    }, secs)


def check_hashing() -> CheckResult:
    a = bounds.hashing_alpha_root(0.5)
    resid = abs(1 - bounds.werner_entropy(a) - 0.5)
    qc = bounds.qc_success_upper(a)
    ok = resid <= 1e-8 and a <= 0.902 and 0.925 <= qc <= 0.926
    return CheckResult("c6", "hashing-bound chain", ok, {"alpha_star": a, "residual": resid, "qc_upper": qc})


def check_cloning() -> CheckResult:
    ok = bounds.cloning_bound(2) == Fraction(3, 4)
    for d in (2, 3, 4):
        ok &= bounds.teleport_fidelity(1, d) == 1
        ok &= bounds.teleport_fidelity(Fraction(1, d * d), d) == Fraction(1, d)
    return CheckResult("c7", "cloning and teleport-fidelity chain", bool(ok), {
        "cloning_bound_2": bounds.cloning_bound(2),
        "teleport_fidelity_product": {d: bounds.teleport_fidelity(Fraction(1, d * d), d) for d in (2, 3, 4)},
    })


def check_loss_attack(rounds: int, seed: int) -> CheckResult:
    ok, measured = True, {}
    for d, k in ((2, 1), (2, 2), (3, 2)):
        spec = protocols.generic_qpv(d, d, k)
        exact = strategies.evaluate_strategy_exact(spec, strategies.teleport_guess_attack(d, k))
        stats = montecarlo.simulate(montecarlo.RunConfig("qpv-generic", "teleport-guess", rounds, seed, 4, d, k))
        target = float(bounds.loss_attack_threshold(d, k))
        inside = montecarlo._inside(target, stats.wilson_99["conclusive_rate"])
        ok &= abs(exact.conditional - 1) <= 1e-12 and inside and stats.successes == stats.conclusive
        measured[f"d={d},k={k}"] = {
            "exact_conditional": exact.conditional, "mc_conclusive": stats.conclusive_rate,
            "threshold": bounds.loss_attack_threshold(d, k),
        }
    ok &= all(bounds.entanglement_cost(n, 2) == n for n in range(0, 50))
    return CheckResult("c8", "teleport-and-guess loss attack", bool(ok), measured)


def check_qcore(seed: int) -> CheckResult:
    rng = np.random.default_rng(seed)
    out = {}
    rho = qcore.random_density_matrix((2, 3), rng)
    out["pt_involution"] = rho.allclose(qcore.partial_transpose(qcore.partial_transpose(rho, 1), 1), 1e-12)
    big = qcore.random_density_matrix((2, 2, 3), rng)
    out["trace_preserving"] = abs(qcore.partial_trace(big, [0, 2]).trace() - 1) <= 1e-12
    w = qcore.random_density_matrix((2, 2), rng)
    tw = qcore.werner_twirl(w)
    inv = True
    for _ in range(100):
        u = qcore.random_local_unitary(2, rng).data
        uu = np.kron(u, u)
        inv &= np.allclose(uu @ tw.data @ uu.conj().T, tw.data, atol=1e-12)
    out["twirl_invariant"] = bool(inv)
    ent = [qcore.von_neumann_entropy(qcore.random_density_matrix((4,), rng)) for _ in range(20)]
    out["entropy_bounds"] = all(-1e-12 <= s <= 2 + 1e-12 for s in ent)
    povm = qcore.bell_povm()
    probs = povm.probabilities(w)
    n = 20000
    counts = np.bincount([qcore.sample_povm(w, povm, rng) for _ in range(n)], minlength=4)
    out["povm_frequencies"] = all(
        montecarlo._inside(p, montecarlo.wilson_interval(int(c), n)) for p, c in zip(probs, counts)
    )
    two = protocols.sym_antisym_two_round()
    _, post = strategies.loqc_exchange().post_exchange_states(two, protocols.ANTISYMMETRIC)
    prod = qcore.kron(qcore.partial_trace(post, [0]), qcore.partial_trace(post, [1]))
    out["orthogonal_examples"] = (
        qcore.supports_orthogonal(qcore.bell_state(qcore.PHI_PLUS), qcore.bell_state(qcore.PSI_MINUS))
        and not qcore.supports_orthogonal(w, w)
        and not qcore.supports_orthogonal(post, prod)
    )
    return CheckResult("c9", "qcore invariants and support orthogonality", all(out.values()),
                       {k: bool(v) for k, v in out.items()})


def check_reproducible(seed: int, rounds: int) -> CheckResult:
    """Re-run the seeded parts and compare serialized bytes."""
    def render():
        cfg = montecarlo.RunConfig("sym-antisym", "locc-xor", rounds, seed, 3)
        return json.dumps({
            "mc": montecarlo.simulate(cfg).to_dict(),
            "bounds": bounds.all_reports(2, 1).to_list(),
        }, sort_keys=True)
    a, b = render(), render()
    return CheckResult("c10", "seeded reruns are byte-identical", a == b, {"bytes": len(a)})


def run(seed: int = 0, quick: bool = False, tol: float = 1e-7, on_result=None) -> list[CheckResult]:
    rounds = 10_000 if quick else 1_000_000
    steps = [
        lambda: check_single_round(tol),
        lambda: check_two_round(tol),
        lambda: check_bell(tol),
        check_strategies,
        lambda: check_monte_carlo(rounds, seed),
        check_hashing,
        check_cloning,
        lambda: check_loss_attack(rounds, seed),
        lambda: check_qcore(seed),
        lambda: check_reproducible(seed, min(rounds, 100_000)),
    ]
    out = []
    for step in steps:
        r = step()
        out.append(r)
        if on_result:
            on_result(r)
    return out
