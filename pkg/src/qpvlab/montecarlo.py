"""Seeded round-by-round simulation of attacks, with Wilson intervals.

Each round draws three uniforms from a counter-based Philox stream: one
selects the hypothesis from the priors, one the joint attacker outcome from
the strategy's exact outcome table, and one the shared random value.  Rounds
are split into ``thread_chunks`` contiguous chunks; chunk ``c`` uses the
stream seeded by ``mix_seed(seed, c)``, so the chunk policy alone fixes the
random numbers and threads only change wall-clock time.
"""

from __future__ import annotations

import csv
import hashlib
import json
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from statistics import NormalDist

import numpy as np

from . import protocols, strategies
from ._backend import kernels
from .strategies import Evaluation, Strategy

MASK64 = (1 << 64) - 1
BLOCK = 1 << 16
LEVEL = 0.999
CSV_COLUMNS = (
    "config_hash", "protocol", "strategy", "rounds", "seed",
    "success_rate", "conclusive_rate", "conditional_rate", "wilson_lo", "wilson_hi",
)


def z_for(level: float) -> float:
    """Two-sided normal quantile for a confidence ``level``."""
    return NormalDist().inv_cdf(0.5 + level / 2)


Z999 = z_for(LEVEL)


def mix_seed(seed: int, chunk: int) -> int:
    """splitmix64 finalizer applied to ``seed + (chunk + 1) * golden``."""
    z = (seed + (chunk + 1) * 0x9E3779B97F4A7C15) & MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def wilson_interval(successes: int, total: int, z: float = Z999) -> tuple[float, float]:
    if total < 1 or not 0 <= successes <= total:
        raise ValueError(f"need 0 <= successes <= total and total >= 1, got {successes}/{total}")
    p = successes / total
    z2 = z * z
    denom = 1 + z2 / total
    centre = (p + z2 / (2 * total)) / denom
    half = z * np.sqrt(p * (1 - p) / total + z2 / (4 * total * total)) / denom
    lo = 0.0 if successes == 0 else max(0.0, float(centre - half))
    hi = 1.0 if successes == total else min(1.0, float(centre + half))
    return lo, hi


@dataclass(frozen=True)
class RunConfig:
    protocol: str
    strategy: str
    rounds: int
    seed: int = 0
    thread_chunks: int = 1
    d: int = 2
    k: int = 1

    def __post_init__(self):
        if self.rounds < 1:
            raise ValueError("rounds must be at least 1")
        if self.thread_chunks < 1:
            raise ValueError("thread_chunks must be at least 1")
        if not 0 <= self.seed <= MASK64:
            raise ValueError("seed must be an unsigned 64-bit integer")

    def to_dict(self) -> dict:
        return asdict(self)

    def config_hash(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]

    def chunk_sizes(self) -> list[int]:
        base, extra = divmod(self.rounds, self.thread_chunks)
        return [base + (c < extra) for c in range(self.thread_chunks)]


@dataclass(frozen=True)
class TrialStats:
    total: int
    conclusive: int
    successes: int
    agree: int = 0
    answered_a: int = 0
    answered_b: int = 0
    local_a: int = 0
    local_b: int = 0
    level: float = LEVEL
    wilson_99: dict = field(init=False, compare=False)

    def __post_init__(self):
        if not 0 <= self.successes <= self.conclusive <= self.total or self.total < 1:
            raise ValueError("need successes <= conclusive <= total")
        z = z_for(self.level)
        iv = {
            "success_rate": wilson_interval(self.successes, self.total, z),
            "conclusive_rate": wilson_interval(self.conclusive, self.total, z),
            "conditional_rate": (
                wilson_interval(self.successes, self.conclusive, z) if self.conclusive else (0.0, 1.0)
            ),
            "local_a_rate": wilson_interval(self.local_a, self.total, z),
            "local_b_rate": wilson_interval(self.local_b, self.total, z),
        }
        object.__setattr__(self, "wilson_99", iv)

    @classmethod
    def from_counts(cls, counts, level: float = LEVEL) -> TrialStats:
        c = [int(x) for x in counts]
        return cls(c[0], c[1], c[2], c[3], c[4], c[5], c[6], c[7], level)

    @property
    def success_rate(self) -> float:
        return self.successes / self.total

    @property
    def conclusive_rate(self) -> float:
        return self.conclusive / self.total

    @property
    def conditional_rate(self) -> float:
        return self.successes / self.conclusive if self.conclusive else 0.0

    @property
    def local_a_rate(self) -> float:
        return self.local_a / self.total

    @property
    def local_b_rate(self) -> float:
        return self.local_b / self.total

    def local_only(self) -> dict:
        """Per-attacker rates, ignoring agreement; ``min`` is the relaxed figure."""
        return {
            "local_a_rate": self.local_a_rate,
            "local_b_rate": self.local_b_rate,
            "min": min(self.local_a_rate, self.local_b_rate),
        }

    def rate(self, name: str) -> float:
        return getattr(self, name)

    def to_dict(self) -> dict:
        return {
            "total": self.total,
            "conclusive": self.conclusive,
            "successes": self.successes,
            "agree": self.agree,
            "answered_a": self.answered_a,
            "answered_b": self.answered_b,
            "local_a": self.local_a,
            "local_b": self.local_b,
            "success_rate": self.success_rate,
            "conclusive_rate": self.conclusive_rate,
            "conditional_rate": self.conditional_rate,
            "local_only": self.local_only(),
            "wilson_level": self.level,
            "wilson": {k: list(v) for k, v in self.wilson_99.items()},
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


# ---------------------------------------------------------------------------
# sampling


@dataclass(frozen=True)
class _Tables:
    prior_cdf: np.ndarray
    joint_cdf: np.ndarray
    n_ob: int
    rule_a: np.ndarray
    rule_b: np.ndarray
    labels: np.ndarray


def _cdf(p: np.ndarray) -> np.ndarray:
    p = np.clip(p, 0.0, None)
    c = np.cumsum(p, axis=-1)
    c /= c[..., -1:]
    c[..., -1] = 1.0
    return np.ascontiguousarray(c)


def _tables(spec, s: Strategy) -> _Tables:
    table = s.joint_table(spec)
    n_h, n_oa, n_ob = table.shape
    if n_h != len(spec.priors()) or n_oa != s.rule_a.shape[0] or n_ob != s.rule_b.shape[0]:
        raise protocols.qcore.DimensionError("strategy tables do not match the protocol")
    return _Tables(
        prior_cdf=_cdf(np.asarray(spec.priors(), dtype=float)),
        joint_cdf=_cdf(table.reshape(n_h, n_oa * n_ob)),
        n_ob=n_ob,
        rule_a=np.ascontiguousarray(s.rule_a, dtype=np.int64),
        rule_b=np.ascontiguousarray(s.rule_b, dtype=np.int64),
        labels=np.ascontiguousarray(strategies._labels_of(spec), dtype=np.int64),
    )


def _run_chunk(t: _Tables, seed: int, rounds: int, kern) -> np.ndarray:
    gen = np.random.Generator(np.random.Philox(seed))
    counts = np.zeros(8, dtype=np.int64)
    left = rounds
    while left:
        n = min(left, BLOCK)
        u = gen.random((n, 3))
        counts += np.asarray(
            kern.tally_rounds(u, t.prior_cdf, t.joint_cdf, t.n_ob, t.rule_a, t.rule_b, t.labels)
        )
        left -= n
    return counts


def resolve(cfg: RunConfig):
    """``(spec, strategy)`` for a config; raises on unknown or mismatched names."""
    spec = protocols.get(cfg.protocol, d=cfg.d, k=cfg.k)
    entry = strategies.REGISTRY.get(cfg.strategy)
    if entry is not None and cfg.protocol not in entry.protocols:
        raise protocols.qcore.DimensionError(
            f"strategy {cfg.strategy!r} is defined for {entry.protocols}, not {cfg.protocol!r}"
        )
    return spec, strategies.get(cfg.strategy, spec, d=cfg.d, k=cfg.k)


def simulate(cfg: RunConfig, strategy: Strategy | None = None, workers: int | None = None,
             kern=None) -> TrialStats:
    """Simulate ``cfg.rounds`` rounds; ``strategy`` overrides the registry lookup."""
    spec, s = resolve(cfg) if strategy is None else (protocols.get(cfg.protocol, d=cfg.d, k=cfg.k), strategy)
    t = _tables(spec, s)
    kern = kern or kernels
    sizes = cfg.chunk_sizes()
    seeds = [mix_seed(cfg.seed, c) for c in range(cfg.thread_chunks)]
    jobs = [(sd, n) for sd, n in zip(seeds, sizes) if n]
    workers = workers or min(len(jobs), os.cpu_count() or 1)
    if workers <= 1:
        parts = [_run_chunk(t, sd, n, kern) for sd, n in jobs]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(lambda job: _run_chunk(t, job[0], job[1], kern), jobs))
    return TrialStats.from_counts(np.sum(parts, axis=0))


# ---------------------------------------------------------------------------
# cross-checks


def _inside(x: float, iv, slack: float = 1e-12) -> bool:
    return iv[0] - slack <= x <= iv[1] + slack


@dataclass
class CrossCheck:
    config: RunConfig
    stats: TrialStats
    exact: Evaluation
    flags: list

    @property
    def ok(self) -> bool:
        return not self.flags

    def to_dict(self) -> dict:
        return {
            "config": self.config.to_dict(),
            "stats": self.stats.to_dict(),
            "exact": asdict(self.exact),
            "flags": list(self.flags),
            "ok": self.ok,
        }


def cross_check(cfg: RunConfig, reference: Evaluation | None = None,
                strategy: Strategy | None = None) -> CrossCheck:
    """Simulate and compare to exact evaluation (or to ``reference``).

    A flag is raised for every rate whose exact value lies outside its
    Wilson interval.
    """
    spec, s = resolve(cfg) if strategy is None else (protocols.get(cfg.protocol, d=cfg.d, k=cfg.k), strategy)
    stats = simulate(cfg, strategy=s)
    exact = reference if reference is not None else strategies.evaluate_strategy_exact(spec, s)
    flags = []
    pairs = [
        ("success_rate", exact.success),
        ("conclusive_rate", exact.conclusive),
        ("local_a_rate", exact.local_a),
        ("local_b_rate", exact.local_b),
    ]
    if stats.conclusive and exact.conclusive > 0:
        pairs.append(("conditional_rate", exact.conditional))
    for name, value in pairs:
        iv = stats.wilson_99[name]
        if not _inside(value, iv):
            flags.append(f"{name}: exact {value:.12g} outside [{iv[0]:.12g}, {iv[1]:.12g}]")
    return CrossCheck(cfg, stats, exact, flags)


# ---------------------------------------------------------------------------
# output


def csv_row(cfg: RunConfig, stats: TrialStats) -> dict:
    lo, hi = stats.wilson_99["success_rate"]
    return {
        "config_hash": cfg.config_hash(),
        "protocol": cfg.protocol,
        "strategy": cfg.strategy,
        "rounds": cfg.rounds,
        "seed": cfg.seed,
        "success_rate": f"{stats.success_rate:.12g}",
        "conclusive_rate": f"{stats.conclusive_rate:.12g}",
        "conditional_rate": f"{stats.conditional_rate:.12g}",
        "wilson_lo": f"{lo:.12g}",
        "wilson_hi": f"{hi:.12g}",
    }


def append_csv(path, cfg: RunConfig, stats: TrialStats) -> Path:
    """Append one row, writing the header when the file is new."""
    path = Path(path)
    new = not path.exists() or path.stat().st_size == 0
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("a", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=CSV_COLUMNS)
        if new:
            w.writeheader()
        w.writerow(csv_row(cfg, stats))
    return path
