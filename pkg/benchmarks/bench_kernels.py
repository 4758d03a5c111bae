"""Time the hot kernels with numba and with the pure-numpy fallback.

    python3 benchmarks/bench_kernels.py            # both modes, side by side
    python3 benchmarks/bench_kernels.py --single   # current mode only (JSON)
"""

import argparse
import json
import os
import subprocess
import sys
import time

import numpy as np

CASES = {
    "propagate_ode n=2 (1000 steps)": ("order=2; a0=2+sin(x); domain=[0,1]", "ode"),
    "propagate_ode n=4 (1000 steps)": ("order=4; a0=-1/x^4; domain=[1,2]", "ode"),
    "propagate_exp n=3": ("order=3; a0=1+x^2; a1=sin(x); a2=x; domain=[0,2]", "exp"),
    "solve_grid Airy across turning point": ("order=2; a0=x; domain=[-2,2]", "solve"),
    "oracle n=3 to 1e-10": ("order=3; a0=1+x^2; a1=sin(x); a2=x; domain=[0,2]", "oracle"),
}


def run_case(text, kind):
    from dtmm.coeffs import parse_problem
    from dtmm.oracle import oracle_solve
    from dtmm.propagate import propagate_exp, propagate_ode
    from dtmm.solution import solve_grid

    p = parse_problem(text)
    lo, hi = p.domain
    if kind == "ode":
        propagate_ode(p, lo, hi)
    elif kind == "exp":
        propagate_exp(p, lo, hi)
    elif kind == "solve":
        solve_grid(p, lo, (1, 0), np.linspace(lo, hi, 101), residual=False)
    else:
        oracle_solve(p, lo, np.ones(p.n), np.linspace(lo, hi, 21))


def single(repeats):
    import dtmm

    out = {"jit": dtmm.JIT_ENABLED, "cases": {}}
    for name, (text, kind) in CASES.items():
        t0 = time.perf_counter()
        run_case(text, kind)  # warm-up; includes compilation on a cold cache
        first = time.perf_counter() - t0
        times = []
        for _ in range(repeats):
            t0 = time.perf_counter()
            run_case(text, kind)
            times.append(time.perf_counter() - t0)
        out["cases"][name] = {"first": first, "best": min(times)}
    return out


def spawn(disable, repeats):
    env = dict(os.environ)
    env.pop("DTMM_DISABLE_JIT", None)
    if disable:
        env["DTMM_DISABLE_JIT"] = "1"
    res = subprocess.run([sys.executable, __file__, "--single", "--repeats", str(repeats)],
                         env=env, capture_output=True, text=True, check=True)
    return json.loads(res.stdout)


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawTextHelpFormatter)
    ap.add_argument("--single", action="store_true", help="benchmark the current mode only")
    ap.add_argument("--repeats", type=int, default=3)
    args = ap.parse_args()
    if args.single:
        json.dump(single(args.repeats), sys.stdout)
        return
    jit = spawn(False, args.repeats)
    ref = spawn(True, args.repeats)
    width = max(len(k) for k in CASES)
    print(f"{'case':<{width}}  {'numba (s)':>10}  {'numpy (s)':>10}  {'speed-up':>8}")
    for name in CASES:
        a = jit["cases"][name]["best"]
        b = ref["cases"][name]["best"]
        print(f"{name:<{width}}  {a:10.4f}  {b:10.4f}  {b / a:8.1f}x")
    if not jit["jit"]:
        print("note: numba is unavailable, both columns ran the fallback")


if __name__ == "__main__":
    main()
