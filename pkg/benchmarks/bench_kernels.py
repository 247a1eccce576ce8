"""Compare the compiled kernels against the pure-numpy fallback.

Runs the hot paths (energy evaluation, generalized forces, simulation
stepping) in two subprocesses so each one imports a single backend, and
prints a timing table.  Select the fallback in any process by setting
MAGFOLD_DISABLE_NUMBA=1 before import.

Usage: python benchmarks/bench_kernels.py [--steps N]
"""

import argparse
import json
import os
import subprocess
import sys
import textwrap

WORKER = textwrap.dedent("""
    import json, sys, time
    import numpy as np
    from magfold.backend import NUMBA_ENABLED
    from magfold.chain import Config, Environment, SimParams, generalized_forces, step, total_energy
    from magfold.control import beta_start, bench_environment, epm_rig
    from magfold.geometry import Pose
    from magfold.scenarios import calibrated_model

    n_steps = int(sys.argv[1])
    model = calibrated_model()
    env = Environment(epm=epm_rig(Pose(position=np.array([0.0375, -0.060, 0.0]))),
                      plates=bench_environment().plates)
    params = SimParams()
    q = Config(beta_start(model).base_pose, np.linspace(-0.5, 0.5, model.n_hinges))

    # warm up so numba compilation time is not counted
    total_energy(model, q, env, params)
    generalized_forces(model, q, env, params)
    step(model, q, env, params)

    out = {"backend": "numba" if NUMBA_ENABLED else "numpy"}

    t0 = time.perf_counter()
    for _ in range(n_steps):
        total_energy(model, q, env, params)
    out["energy_us"] = (time.perf_counter() - t0) / n_steps * 1e6

    t0 = time.perf_counter()
    for _ in range(n_steps):
        generalized_forces(model, q, env, params)
    out["forces_us"] = (time.perf_counter() - t0) / n_steps * 1e6

    state = q
    t0 = time.perf_counter()
    for _ in range(n_steps):
        state = step(model, state, env, params)
    out["step_us"] = (time.perf_counter() - t0) / n_steps * 1e6

    json.dump(out, sys.stdout)
""")


def run(disable_numba: bool, n_steps: int) -> dict:
    env = dict(os.environ)
    if disable_numba:
        env["MAGFOLD_DISABLE_NUMBA"] = "1"
    else:
        env.pop("MAGFOLD_DISABLE_NUMBA", None)
    proc = subprocess.run([sys.executable, "-c", WORKER, str(n_steps)],
                          env=env, capture_output=True, text=True, check=True)
    return json.loads(proc.stdout)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--steps", type=int, default=200,
                    help="iterations per timed section (default 200)")
    args = ap.parse_args()

    print(f"timing {args.steps} iterations per kernel (single process each)...")
    compiled = run(False, args.steps)
    fallback = run(True, args.steps)

    print(f"{'kernel':<20}{compiled['backend']:>12}{fallback['backend']:>12}{'speedup':>10}")
    for key, label in (("energy_us", "total_energy"),
                       ("forces_us", "generalized_forces"),
                       ("step_us", "step")):
        a, b = compiled[key], fallback[key]
        print(f"{label:<20}{a:>10.1f}us{b:>10.1f}us{b / a:>9.1f}x")


if __name__ == "__main__":
    main()
