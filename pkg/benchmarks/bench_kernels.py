"""Time the hot kernels with numba and with the pure numpy/Python fallback.

Each path runs in its own interpreter because SRFLOWS_NO_NUMBA is read at
import time.  Numba timings exclude compilation (one warm-up call first).

    python3 benchmarks/bench_kernels.py [--repeat 3]
"""
import argparse
import json
import os
import subprocess
import sys

WORKER = r"""
import json, time
import numpy as np
from srflows import models, hamiltonian, integrate, entropy, _jit

def best(fn, repeat):
    fn()  # warm-up (compilation on the numba path)
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)

repeat = {repeat}
susp = models.make_suspension_model([[2, 1], [1, 1]])
H = hamiltonian.sr_hamiltonian(susp)
x0 = np.array([0.1, 0.2, 0.3, 0.4, -0.3, 0.8])
cfg = integrate.IntegratorConfig(dt=1e-2)
torus = models.torus3()
Ht = hamiltonian.sr_hamiltonian(torus)
y0 = hamiltonian.energy_shell_points(torus, 1, 0)[0]
out = {{
    "numba": _jit.HAS_NUMBA,
    "gauss4 flow, suspension, 2000 steps": best(lambda: integrate.flow(H, x0, 20.0, cfg), repeat),
    "gauss4 flow, torus3, 2000 steps": best(lambda: integrate.flow(Ht, y0, 20.0, cfg), repeat),
    "tangent flow, suspension, 1000 steps": best(
        lambda: integrate.flow_with_tangent(H, x0, 10.0, cfg, reduce=susp.quotient.reduce_phase), repeat),
    "greedy cover, eps=0.02, n=8": best(lambda: entropy.spanning_entropy([[2, 1], [1, 1]], [0.02], range(5, 9)), repeat),
}}
print(json.dumps(out))
"""


def run(no_numba: bool, repeat: int) -> dict:
    env = dict(os.environ)
    env["SRFLOWS_NO_NUMBA"] = "1" if no_numba else "0"
    res = subprocess.run([sys.executable, "-c", WORKER.format(repeat=repeat)], env=env, capture_output=True, text=True, check=True)
    return json.loads(res.stdout.strip().splitlines()[-1])


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    jit = run(False, args.repeat)
    py = run(True, args.repeat)
    if not jit.pop("numba"):
        print("numba is not installed; both columns use the fallback", file=sys.stderr)
    py.pop("numba")
    w = max(len(k) for k in jit)
    print(f"{'kernel':<{w}}  {'numba [s]':>10}  {'numpy [s]':>10}  {'speedup':>8}")
    for k in jit:
        print(f"{k:<{w}}  {jit[k]:>10.4f}  {py[k]:>10.4f}  {py[k] / jit[k]:>8.1f}")


if __name__ == "__main__":
    main()
