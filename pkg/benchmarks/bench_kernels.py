"""Compare the compiled and numpy kernel backends.

    python3 benchmarks/bench_kernels.py [--repeat N]
"""

import argparse
import timeit

import numpy as np

from qpvlab import _backend, montecarlo, protocols, sdp


def herm_stack(m, n, seed=0):
    rng = np.random.default_rng(seed)
    g = rng.standard_normal((m, n, n)) + 1j * rng.standard_normal((m, n, n))
    return (g + g.conj().transpose(0, 2, 1)) / 2


def cases(k):
    small, large = herm_stack(64, 4), herm_stack(8, 16)
    cfg = montecarlo.RunConfig("qpv-generic", "teleport-guess", montecarlo.BLOCK, d=2, k=2)
    t = montecarlo._tables(*montecarlo.resolve(cfg))
    targs = (t.prior_cdf, t.joint_cdf, t.n_ob, t.rule_a, t.rule_b, t.labels)
    rng = np.random.default_rng(1)
    u = rng.random((montecarlo.BLOCK, 3))
    problem = sdp.build(protocols.sym_antisym_two_round())

    def solve():
        saved = sdp.kernels
        sdp.kernels = k
        try:
            sdp.solve(problem)
        finally:
            sdp.kernels = saved

    return {
        "eigh 16x16": lambda: k.eigh(large[0]),
        "psd_project 64x(4x4)": lambda: k.psd_project(small),
        "psd_project 8x(16x16)": lambda: k.psd_project(large),
        "tally_rounds 65536": lambda: k.tally_rounds(u, *targs),
        "sdp solve two-round": solve,
    }


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)
    names = _backend.available()
    rows = {}
    for name in names:
        for label, fn in cases(_backend.get(name)).items():
            number = 1 if label.startswith("sdp") else 20
            best = min(timeit.repeat(fn, number=number, repeat=args.repeat)) / number
            rows.setdefault(label, {})[name] = best
    print(f"{'kernel':<24}" + "".join(f"{n:>14}" for n in names) + ("       speedup" if len(names) > 1 else ""))
    for label, t in rows.items():
        line = f"{label:<24}" + "".join(f"{t[n] * 1e3:>11.3f} ms" for n in names)
        if len(names) > 1:
            line += f"{t['python'] / t[names[0]]:>13.2f}x"
        print(line)


if __name__ == "__main__":
    main()
