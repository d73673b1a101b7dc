"""Compare the compiled and numpy kernel backends.

    python3 benchmarks/bench_kernels.py [--grid 12] [--dim 2] [--repeat 5]

Times the two pointwise kernels in isolation and one full RK4 flow step with
each backend, and checks that both backends agree.
"""

import argparse
import timeit

import numpy as np

from pcflow import backend, _kernels_py
from pcflow.chern import metric_derivatives
from pcflow.field import TorusChart
from pcflow.flow import FlowState, stable_dt, step_rk4
from pcflow.initial_data import DataSpec, make_hermitian_symplectic


def best(fn, repeat):
    return min(timeit.repeat(fn, number=1, repeat=repeat))


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--grid", type=int, default=12)
    p.add_argument("--dim", type=int, default=2)
    p.add_argument("--repeat", type=int, default=5)
    args = p.parse_args(argv)
    if "compiled" not in backend.available():
        raise SystemExit("compiled extension not built; run `pip install -e . --no-build-isolation`")
    from pcflow import _kernels

    chart = TorusChart(args.dim, args.grid)
    hs = make_hermitian_symplectic(chart, DataSpec(kind="hermitian_symplectic", epsilon=0.05))
    g = hs.omega.g.data
    d = metric_derivatives(hs.omega)
    ginv = hs.omega.ginv
    kernels = {
        "herm_inverse_eig": lambda k: k.herm_inverse_eig(g),
        "chern_bundle": lambda k: k.chern_bundle(ginv, d.dg, d.dbg, d.ddg),
    }
    print(f"n={args.dim}  N={args.grid}  points={int(np.prod(chart.shape))}")
    print(f"{'kernel':<18}{'numpy [ms]':>12}{'compiled [ms]':>15}{'speed-up':>10}{'max diff':>11}")
    for name, call in kernels.items():
        tp = best(lambda: call(_kernels_py), args.repeat) * 1e3
        tc = best(lambda: call(_kernels), args.repeat) * 1e3
        a, b = call(_kernels_py), call(_kernels)
        diff = max(float(np.max(np.abs(np.asarray(x) - np.asarray(y)))) for x, y in zip(a, b))
        print(f"{name:<18}{tp:>12.2f}{tc:>15.2f}{tp / tc:>10.2f}{diff:>11.1e}")

    state = FlowState(0.0, hs.omega, hs.phi)
    dt = stable_dt(state)
    times = {}
    for which in ("python", "compiled"):
        backend.use(which)
        times[which] = best(lambda: step_rk4(FlowState(0.0, hs.omega, hs.phi), dt),
                            max(2, args.repeat // 2)) * 1e3
    backend.use("compiled")
    print(f"{'RK4 step':<18}{times['python']:>12.2f}{times['compiled']:>15.2f}"
          f"{times['python'] / times['compiled']:>10.2f}")


if __name__ == "__main__":
    main()
