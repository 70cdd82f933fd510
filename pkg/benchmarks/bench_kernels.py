"""Compare the compiled RK4 kernel against the pure-Python fallback.

Usage: python3 benchmarks/bench_kernels.py [--steps N] [--repeat R]

Each system is integrated for one control interval of ``N`` physics steps
at 1 kHz; the best of ``R`` repetitions is reported together with a
bitwise comparison of the two results.
"""

import argparse
import timeit

from safectl.dynamics import _rk4_py
from safectl.dynamics.models import _KERNEL, make_model

try:
    from safectl.dynamics import _rk4 as _compiled
except ImportError:  # pragma: no cover
    _compiled = None

CASES = {
    "cartpole": ([0.1, 0.0, 0.2, 0.0], [1.0]),
    "quadrotor_1d": ([1.0, 0.0], [0.3]),
    "quadrotor_2d": ([0.0, 0.0, 1.0, 0.0, 0.1, 0.0], [0.14, 0.13]),
}


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--steps", type=int, default=1000)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)
    if _compiled is None:
        print("compiled kernel not built; only the Python fallback is available")
    print(f"{'system':<14}{'python [ms]':>13}{'cython [ms]':>13}{'speedup':>9}  identical")
    for name, (x, u) in CASES.items():
        model = make_model(name)
        sid = _KERNEL[model.system_id]
        p = model.params.kernel_params()
        fe = (0.0,) * model.n_force
        call = lambda mod: mod.rk4_integrate(sid, p, x, u, 1e-3, args.steps, fe)  # noqa: E731
        t_py = min(timeit.repeat(lambda: call(_rk4_py), number=1, repeat=args.repeat))
        if _compiled is None:
            print(f"{name:<14}{t_py * 1e3:>13.3f}{'-':>13}{'-':>9}  -")
            continue
        t_cy = min(timeit.repeat(lambda: call(_compiled), number=1, repeat=args.repeat))
        same = tuple(call(_rk4_py)[0]) == tuple(call(_compiled)[0])
        print(f"{name:<14}{t_py * 1e3:>13.3f}{t_cy * 1e3:>13.3f}{t_py / t_cy:>8.1f}x  {same}")


if __name__ == "__main__":
    main()
