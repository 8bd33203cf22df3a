"""Time the compiled kernels against the numpy fallback.

Usage::

    python3 benchmarks/bench_kernels.py [--repeat 5] [--particles 4096]

Both backends run on identical inputs and their outputs are compared, so a
speedup is only reported next to a parity check.
"""
import argparse
import sys
import time

import numpy as np

from storagesml import kernels
from storagesml.model import preset_params
from storagesml.moments import gauss_hermite_nodes
from storagesml.solver import build_weight_matrix, solve_price_function


def best_time(fn, repeat):
    best = np.inf
    out = None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def cases(n_particles, sweeps):
    prm = preset_params("monthly")
    table = solve_price_function(prm)
    g = table.grid
    rng = np.random.default_rng(0)
    p = rng.uniform(0.2, 3.0, n_particles)
    z = rng.normal(0, 4, n_particles)
    gn, gw = gauss_hermite_nodes(16)
    W = build_weight_matrix(g.z_nodes, prm.rho)
    f0 = np.repeat(np.maximum(prm.a + prm.b * g.x_nodes, 0)[:, None], g.mz, axis=1)
    pts = rng.normal(0, 3, n_particles)
    w = rng.dirichlet(np.ones(n_particles))
    edges = np.linspace(-25, 25, 1025)
    cdf = np.concatenate([[0.0], np.cumsum(rng.random(1024))])
    cdf /= cdf[-1]
    u = (np.arange(n_particles) + rng.random(n_particles)) / n_particles

    def solve(impl):
        f = np.ascontiguousarray(f0.copy())
        impl.solve_table(f, g.x_nodes, g.mx1, g.z_nodes, W, prm.a, prm.b, prm.delta, prm.beta,
                         sweeps)
        return f

    return {
        f"solve_table ({sweeps} sweeps, default grid)": solve,
        "bilinear": lambda k: k.bilinear(*table.kargs, p * 5, z),
        "invert_state": lambda k: k.invert_state(*table.kargs, p, z),
        "predictive_moments": lambda k: k.predictive_moments(
            *table.kargs, prm.a, prm.b, prm.delta, prm.rho, p, z, gn, gw),
        "linear_bin": lambda k: k.linear_bin(pts, w, -25.0, 50.0 / 1023, 1024),
        "inverse_cdf": lambda k: k.inverse_cdf(edges, cdf, u),
    }


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.split("\n\n")[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--particles", type=int, default=4096)
    ap.add_argument("--sweeps", type=int, default=20,
                    help="price-function sweeps timed (a full solve runs 400)")
    args = ap.parse_args(argv)
    if kernels.compiled is None:
        print("compiled kernels are not built; nothing to compare", file=sys.stderr)
        return 1
    print(f"{'kernel':<44}{'cython [ms]':>12}{'numpy [ms]':>12}{'speedup':>9}{'max diff':>11}")
    for name, fn in cases(args.particles, args.sweeps).items():
        tc, oc = best_time(lambda: fn(kernels.compiled), args.repeat)
        tp, op = best_time(lambda: fn(kernels.pure), max(1, args.repeat // 2))
        diff = float(np.max(np.abs(np.asarray(oc) - np.asarray(op))))
        print(f"{name:<44}{tc * 1e3:>12.3f}{tp * 1e3:>12.3f}{tp / tc:>9.1f}{diff:>11.1e}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
