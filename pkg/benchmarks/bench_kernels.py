"""Compare the compiled and numpy kernel backends.

Usage: python benchmarks/bench_kernels.py [--repeat N] [--json PATH]
"""
import argparse
import json
import timeit

import numpy as np

from ditrotter.kernels import backends


def hermitian_stack(n, d, rng):
    a = rng.normal(size=(n, d, d)) + 1j * rng.normal(size=(n, d, d))
    return 0.5 * (a + np.conj(np.swapaxes(a, 1, 2)))


def cases(rng):
    for d, n in ((2, 1 << 16), (8, 1 << 13), (16, 1 << 11)):
        H = hermitian_stack(n, d, rng)
        U = backends()["python"].expm_herm_stack(H, 1e-3)
        psi = np.zeros(d, dtype=complex)
        psi[0] = 1.0
        yield f"expm_herm_stack d={d} n={n}", lambda k, H=H: k.expm_herm_stack(H, 1e-3)
        yield f"group_products d={d} n={n} g=16", lambda k, U=U: k.group_products(U, 16)
        yield f"propagate d={d} n={n}", lambda k, U=U, psi=psi: k.propagate(U, psi)


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--repeat", type=int, default=5)
    p.add_argument("--json", help="write timings here")
    args = p.parse_args()
    rng = np.random.default_rng(0)
    impls = backends()
    rows = []
    for name, fn in cases(rng):
        t = {b: min(timeit.repeat(lambda: fn(k), number=1, repeat=args.repeat)) for b, k in impls.items()}
        speedup = t["python"] / t["cython"] if "cython" in t else float("nan")
        rows.append({"case": name, **t, "speedup": speedup})
        print(f"{name:36s} " + " ".join(f"{b}={v * 1e3:9.2f} ms" for b, v in t.items())
              + f"  x{speedup:.1f}")
    if args.json:
        with open(args.json, "w") as fh:
            json.dump(rows, fh, indent=2)


if __name__ == "__main__":
    main()
