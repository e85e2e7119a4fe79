"""Generate the cached explicit reference solutions (1D and 2D).

Run from the repository root; writes into the directory given by
SOLHEAT_CACHE_DIR (default refcache/).  Safe to rerun: existing entries
are kept unless --force is passed.
"""

import argparse
import sys
import time

import numpy as np

from solheat._refcache import load_reference, reference_key, save_reference
from solheat.heat1d import Params1D, cfl_dt, run_explicit_1d
from solheat.heat2d import Params2D, run_explicit_2d
from solheat.mesh import build_mesh_2d, build_uniform_mesh_1d


def gen_1d(force):
    n, k_par, gamma, t0, t_end = 450, 1.0, 2.0, 5.0, 1.0
    key = reference_key("explicit1d", n=n, k_par=k_par, gamma=gamma,
                        t0=t0, t_end=t_end, cfl=0.9)
    if not force and load_reference(key) is not None:
        print(f"1D reference {key} already cached")
        return
    mesh = build_uniform_mesh_1d(n)
    params = Params1D(k_par, gamma)
    dt = 0.9 * cfl_dt(mesh, t0, params)
    tic = time.perf_counter()
    state = run_explicit_1d(mesh, np.full(n, t0), params, dt, t_end)
    wall = time.perf_counter() - tic
    path = save_reference(key, T=state.T, time=state.time, n=n, dt=dt)
    print(f"1D reference -> {path} ({wall:.1f}s, dt={dt:.3e})")


def gen_2d(force):
    ns = nr = 300
    k_par, k_perp, gamma, q_perp, t0, t_end = 1.0, 1e-2, 2.0, 10.0, 3.0, 2.0
    key = reference_key("explicit2d", ns=ns, nr=nr, k_par=k_par, k_perp=k_perp,
                        gamma=gamma, q_perp=q_perp, t0=t0, t_end=t_end, cfl=0.9)
    if not force and load_reference(key) is not None:
        print(f"2D reference {key} already cached")
        return
    mesh = build_mesh_2d(ns, nr)
    params = Params2D(k_par, k_perp, gamma, q_perp)
    tic = time.perf_counter()
    state, steps = run_explicit_2d(mesh, np.full((ns, nr), t0), params, t_end)
    wall = time.perf_counter() - tic
    path = save_reference(key, T=state.T, time=state.time, ns=ns, nr=nr,
                          steps=steps)
    print(f"2D reference -> {path} ({wall:.1f}s, {steps} steps)")


if __name__ == "__main__":
    ap = argparse.ArgumentParser()
    ap.add_argument("--force", action="store_true")
    ap.add_argument("--only", choices=["1d", "2d"])
    args = ap.parse_args()
    if args.only in (None, "1d"):
        gen_1d(args.force)
    if args.only in (None, "2d"):
        gen_2d(args.force)
    sys.exit(0)
