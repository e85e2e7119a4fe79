"""Configuration-driven runner and command-line interface.

Configs are flat ``key = value`` text files (``#`` comments, dotted keys for
per-species sections).  Subcommands: run, reference, compare, bench, tables.
Exit codes: 0 success, 1 configuration error, 2 numerical failure.
"""

import argparse
import sys
import time
from dataclasses import dataclass, field

import numpy as np

from ._refcache import load_reference, reference_key, save_reference
from .coupled import CoupledParams, CoupledState, step_coupled
from .diagnostics import (RunReport, discrete_l2_norm, energy_breakdown,
                          relative_error, total_mass)
from .errors import ConfigError, SolheatError
from .heat1d import (NewtonOptions, Params1D, State1D, ViscosityState, cfl_dt,
                     init_viscosity, run_explicit_1d, step_explicit,
                     step_imex, step_implicit, update_viscosity)
from .heat2d import (Params2D, State2D, row_viscosity, run_explicit_2d,
                     step_explicit_2d, step_split, step_unsplit)
from .mesh import build_mesh_2d, build_uniform_mesh_1d

__all__ = ["RunConfig", "parse_config", "run", "bench", "main",
           "ensure_reference_1d", "ensure_reference_2d"]

_PROBLEMS = ("1d", "2d", "2d-unsplit", "coupled")
_SCHEMES = {
    "1d": ("explicit", "implicit", "imex"),
    "2d": ("explicit", "implicit", "imex"),
    "2d-unsplit": ("implicit", "imex"),
    "coupled": ("implicit", "imex"),
}

_SPECIES_KEYS = ("k_par", "k_perp", "gamma", "q_perp")


@dataclass
class RunConfig:
    problem: str
    scheme: str
    ns: int
    dt: float
    t_end: float
    t0: float
    nr: int = None
    params: object = None
    newton: NewtonOptions = NewtonOptions()
    cg_tol: float = 1e-10
    output: str = None
    snapshot_times: tuple = ()
    series_stride: int = None
    reference: dict = field(default=None)


def _parse_value(key, raw, kind):
    try:
        if kind is int:
            v = int(raw)
        elif kind is float:
            v = float(raw)
        else:
            v = raw
    except ValueError:
        raise ConfigError(f"key '{key}': cannot parse {raw!r}") from None
    return v


def parse_config(text):
    """Validated RunConfig from a key-value document; unknown keys rejected."""
    kv = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        key, raw = (part.strip() for part in line.split("=", 1))
        if not key or not raw:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        if key in kv:
            raise ConfigError(f"key '{key}': duplicated")
        kv[key] = raw

    def take(key, kind, default=None, required=False, positive=False):
        if key not in kv:
            if required:
                raise ConfigError(f"key '{key}': required but missing")
            return default
        v = _parse_value(key, kv.pop(key), kind)
        if positive and not v > 0:
            raise ConfigError(f"key '{key}': must be positive, got {v}")
        return v

    problem = take("problem", str, required=True)
    if problem not in _PROBLEMS:
        raise ConfigError(f"key 'problem': unknown problem {problem!r}")
    scheme = take("scheme", str, required=True)
    if scheme not in _SCHEMES[problem]:
        raise ConfigError(
            f"key 'scheme': {scheme!r} not supported for problem {problem!r}")

    cfg = RunConfig(
        problem=problem, scheme=scheme,
        ns=take("ns", int, required=True, positive=True),
        dt=take("dt", float, required=True, positive=True),
        t_end=take("t_end", float, required=True, positive=True),
        t0=take("t0", float, required=True),
    )
    if problem != "1d":
        cfg.nr = take("nr", int, required=True, positive=True)

    if problem == "1d":
        cfg.params = Params1D(take("k_par", float, required=True),
                              take("gamma", float, required=True))
    elif problem == "coupled":
        species = []
        for name in ("ion", "electron"):
            vals = [take(f"{name}.{k}", float, required=True)
                    for k in _SPECIES_KEYS]
            species.append(Params2D(*vals))
        beta = take("beta", float, required=True)
        try:
            cfg.params = CoupledParams(species[0], species[1], beta)
        except ValueError as exc:
            raise ConfigError(f"key 'beta': {exc}") from None
    else:
        cfg.params = Params2D(take("k_par", float, required=True),
                              take("k_perp", float, required=True),
                              take("gamma", float, required=True),
                              take("q_perp", float, required=True))

    cfg.newton = NewtonOptions(
        tol=take("newton_tol", float, default=1e-10, positive=True),
        max_iter=take("newton_max_iter", int, default=50, positive=True))
    cfg.cg_tol = take("cg_tol", float, default=1e-10, positive=True)
    cfg.output = take("output", str)
    snaps = take("snapshot_times", str)
    if snaps is not None:
        try:
            cfg.snapshot_times = tuple(sorted(float(x) for x in snaps.split(",")))
        except ValueError:
            raise ConfigError("key 'snapshot_times': expected comma-separated "
                              "numbers") from None
    cfg.series_stride = take("series_stride", int, positive=True)

    ref_keys = {k for k in kv if k.startswith("reference.")}
    if ref_keys:
        if problem == "coupled":
            raise ConfigError(f"key '{sorted(ref_keys)[0]}': coupled runs "
                              "have no explicit reference")
        ref = {}
        allowed = {"reference.n", "reference.ns", "reference.nr"}
        for k in sorted(ref_keys):
            if k not in allowed:
                raise ConfigError(f"key '{k}': unknown key")
            ref[k.split(".", 1)[1]] = take(k, int, positive=True)
        cfg.reference = ref

    if kv:
        raise ConfigError(f"key '{sorted(kv)[0]}': unknown key")
    return cfg


# ---------------------------------------------------------------------------
# Reference solutions (explicit scheme on a fine mesh, cached on disk).

def ensure_reference_1d(n, k_par, gamma, t0, t_end):
    """Cached (or freshly computed) fine-mesh explicit 1D solution."""
    key = reference_key("explicit1d", n=n, k_par=k_par, gamma=gamma,
                        t0=t0, t_end=t_end, cfl=0.9)
    mesh = build_uniform_mesh_1d(n)
    data = load_reference(key)
    if data is None:
        params = Params1D(k_par, gamma)
        dt = 0.9 * cfl_dt(mesh, abs(t0), params)
        state = run_explicit_1d(mesh, np.full(n, float(t0)), params, dt, t_end)
        save_reference(key, T=state.T, time=state.time, n=n, dt=dt)
        data = {"T": state.T}
    return data["T"], mesh, key


def ensure_reference_2d(ns, nr, k_par, k_perp, gamma, q_perp, t0, t_end):
    """Cached (or freshly computed) fine-mesh explicit 2D solution."""
    key = reference_key("explicit2d", ns=ns, nr=nr, k_par=k_par, k_perp=k_perp,
                        gamma=gamma, q_perp=q_perp, t0=t0, t_end=t_end, cfl=0.9)
    mesh = build_mesh_2d(ns, nr)
    data = load_reference(key)
    if data is None:
        params = Params2D(k_par, k_perp, gamma, q_perp)
        state, steps = run_explicit_2d(mesh, np.full((ns, nr), float(t0)),
                                       params, t_end)
        save_reference(key, T=state.T, time=state.time, ns=ns, nr=nr,
                       steps=steps)
        data = {"T": state.T}
    return data["T"], mesh, key


def _reference_for(cfg):
    if cfg.reference is None:
        return None, None
    if cfg.problem == "1d":
        if "n" not in cfg.reference:
            raise ConfigError("key 'reference.n': required for 1d references")
        T, mesh, _ = ensure_reference_1d(cfg.reference["n"], cfg.params.k_par,
                                         cfg.params.gamma, cfg.t0, cfg.t_end)
        return T, mesh
    if cfg.problem == "coupled":
        raise ConfigError("key 'reference.ns': coupled runs have no explicit "
                          "reference")
    for k in ("ns", "nr"):
        if k not in cfg.reference:
            raise ConfigError(f"key 'reference.{k}': required for 2d references")
    p = cfg.params
    T, mesh, _ = ensure_reference_2d(cfg.reference["ns"], cfg.reference["nr"],
                                     p.k_par, p.k_perp, p.gamma, p.q_perp,
                                     cfg.t0, cfg.t_end)
    return T, mesh


# ---------------------------------------------------------------------------
# Output helpers.

def _fmt(x):
    return format(float(x), ".17g")


def _write_series_csv(path, report, error_message=None):
    with open(path, "w") as fh:
        fh.write("time,l2,mass,e1,e2,e3,nu\n")
        for row in zip(report.times, report.l2_norms, report.masses,
                       report.e1, report.e2, report.e3, report.nu):
            fh.write(",".join(_fmt(v) for v in row) + "\n")
        if error_message is not None:
            fh.write(f"# error: {error_message}\n")


def _write_field_csv(path, field_values, mesh):
    arr = np.asarray(field_values, dtype=float)
    with open(path, "w") as fh:
        if arr.ndim == 1:
            fh.write("s,T\n")
            for s, v in zip(mesh.centers, arr):
                fh.write(f"{_fmt(s)},{_fmt(v)}\n")
        else:
            fh.write("s,r,T\n")
            sc, rc = mesh.s_mesh.centers, mesh.r_mesh.centers
            for i in range(arr.shape[0]):
                for j in range(arr.shape[1]):
                    fh.write(f"{_fmt(sc[i])},{_fmt(rc[j])},{_fmt(arr[i, j])}\n")


# ---------------------------------------------------------------------------
# Run driver.

def _step_plan(dt, t_end):
    """Number of full steps plus an optional shortened final step."""
    n = int(t_end / dt + 1e-9)
    rem = t_end - n * dt
    if rem < 1e-12 * dt:
        rem = 0.0
    return n, rem


def _series_stride(cfg, n_steps):
    if cfg.series_stride is not None:
        return cfg.series_stride
    return max(1, n_steps // 1000)


def _nu_scalar(visc):
    """Series-column summary of the viscosity: the largest (binding) value."""
    if visc is None:
        return None
    return float(np.max(visc.nu))


def _record(report, cfg, mesh, field_values, t, nu, state2d=None):
    if cfg.problem == "coupled":
        values = field_values  # (ions, electrons): track ions in the series
        l2 = discrete_l2_norm(values[0], mesh)
        mass = total_mass(values[0], mesh) + total_mass(values[1], mesh)
        energy = None
    elif cfg.problem == "1d":
        l2 = discrete_l2_norm(field_values, mesh)
        mass = total_mass(field_values, mesh)
        energy = None
    else:
        l2 = discrete_l2_norm(field_values, mesh)
        mass = total_mass(field_values, mesh)
        energy = energy_breakdown(state2d, cfg.params)
    report.record(t, l2, mass, energy=energy, nu=nu)


def run(config):
    """Integrate the configured problem to t_end and produce a RunReport.

    The wall-clock figure covers the time loop only.  On a numerical
    failure with an output path configured, the partial series is flushed
    with an error marker row before the exception propagates.
    """
    cfg = config
    report = RunReport(final=None)
    n_steps, rem = _step_plan(cfg.dt, cfg.t_end)
    stride = _series_stride(cfg, n_steps)
    snapshots = list(cfg.snapshot_times)

    if cfg.problem == "1d":
        mesh = build_uniform_mesh_1d(cfg.ns)
        state = State1D(mesh, np.full(cfg.ns, float(cfg.t0)))
        series_mesh = mesh
    else:
        mesh = build_mesh_2d(cfg.ns, cfg.nr)
        if cfg.problem == "coupled":
            ions = State2D(mesh, np.full(mesh.shape, float(cfg.t0)))
            electrons = State2D(mesh, np.full(mesh.shape, float(cfg.t0)))
            state = CoupledState(ions, electrons)
        else:
            state = State2D(mesh, np.full(mesh.shape, float(cfg.t0)))
        series_mesh = mesh

    visc = visc_e = None
    if cfg.scheme == "imex":
        if cfg.problem == "coupled":
            visc = init_viscosity(state.ions.T, cfg.params.ions.k_par)
            visc_e = init_viscosity(state.electrons.T,
                                    cfg.params.electrons.k_par)
        elif cfg.problem == "1d":
            visc = init_viscosity(_field_of(state, cfg), cfg.params.k_par)
        else:
            # 2D sweeps carry one viscosity per r-row (stability floor)
            visc = row_viscosity(state.T, cfg.params.k_par)
    elif cfg.problem == "coupled":
        # implicit sweeps ignore nu; placeholders keep the call uniform
        visc = visc_e = ViscosityState(1.0)

    def one_step(state, dt, step_index):
        nonlocal visc, visc_e
        if cfg.problem == "1d":
            if cfg.scheme == "explicit":
                return step_explicit(state, cfg.params, dt,
                                     step_index=step_index, t0_max=abs(cfg.t0))
            if cfg.scheme == "implicit":
                return step_implicit(state, cfg.params, dt, newton=cfg.newton)
            new = step_imex(state, cfg.params, dt, visc)
            visc = update_viscosity(visc, new.T, cfg.params.k_par)
            return new
        if cfg.problem == "2d":
            if cfg.scheme == "explicit":
                return step_explicit_2d(state, cfg.params, dt,
                                        step_index=step_index,
                                        t0_max=abs(cfg.t0))
            new = step_split(state, cfg.params, dt, visc or ViscosityState(1.0),
                             mode=cfg.scheme, newton=cfg.newton)
            if cfg.scheme == "imex":
                visc = row_viscosity(new.T, cfg.params.k_par)
            return new
        if cfg.problem == "2d-unsplit":
            new = step_unsplit(state, cfg.params, dt, cfg.scheme, visc=visc,
                               newton=cfg.newton, cg_tol=cfg.cg_tol)
            if cfg.scheme == "imex":
                visc = row_viscosity(new.T, cfg.params.k_par)
            return new
        new = step_coupled(state, cfg.params, dt, visc, visc_e,
                           mode=cfg.scheme, newton=cfg.newton)
        if cfg.scheme == "imex":
            visc = update_viscosity(visc, new.ions.T, cfg.params.ions.k_par)
            visc_e = update_viscosity(visc_e, new.electrons.T,
                                      cfg.params.electrons.k_par)
        return new

    _record(report, cfg, series_mesh, _field_of(state, cfg), 0.0,
            _nu_scalar(visc),
            state2d=state if cfg.problem in ("2d", "2d-unsplit") else None)

    error = None
    tic = time.monotonic()
    try:
        total = n_steps + (1 if rem else 0)
        for k in range(total):
            dt = cfg.dt if k < n_steps else rem
            state = one_step(state, dt, k)
            t = state.time
            if (k + 1) % stride == 0 or k == total - 1:
                _record(report, cfg, series_mesh, _field_of(state, cfg), t,
                        _nu_scalar(visc),
                        state2d=state if cfg.problem in ("2d", "2d-unsplit")
                        else None)
            while snapshots and t >= snapshots[0] - 1e-12:
                if cfg.output:
                    _snapshot(cfg, state, snapshots[0], series_mesh)
                snapshots.pop(0)
    except SolheatError as exc:
        error = exc
    report.wall_seconds = time.monotonic() - tic

    if error is None:
        report.final = _final_of(state, cfg)
        ref = _reference_for(cfg)
        if ref[0] is not None:
            cand_mesh = series_mesh if cfg.problem == "1d" else mesh
            report.relative_error = relative_error(
                _field_of(state, cfg), cand_mesh, ref[0], ref[1])
    if cfg.output:
        _write_series_csv(f"{cfg.output}_series.csv", report,
                          error_message=str(error) if error else None)
        if error is None:
            if cfg.problem == "coupled":
                _write_field_csv(f"{cfg.output}_ions.csv", state.ions.T, mesh)
                _write_field_csv(f"{cfg.output}_electrons.csv",
                                 state.electrons.T, mesh)
            else:
                _write_field_csv(f"{cfg.output}_final.csv",
                                 _field_of(state, cfg), series_mesh)
    if error is not None:
        raise error
    return report


def _field_of(state, cfg):
    if cfg.problem == "coupled":
        return (state.ions.T, state.electrons.T)
    return state.T


def _final_of(state, cfg):
    if cfg.problem == "coupled":
        return np.stack([state.ions.T, state.electrons.T])
    return state.T


def _snapshot(cfg, state, t_snap, mesh):
    tag = f"{t_snap:g}".replace(".", "p")
    if cfg.problem == "coupled":
        _write_field_csv(f"{cfg.output}_t{tag}_ions.csv", state.ions.T, mesh)
        _write_field_csv(f"{cfg.output}_t{tag}_electrons.csv",
                         state.electrons.T, mesh)
    else:
        _write_field_csv(f"{cfg.output}_t{tag}.csv", _field_of(state, cfg),
                         mesh)


# ---------------------------------------------------------------------------
# bench and tables.

def bench(configs, labels=None):
    """Run each config, collecting (label, scheme, mesh, dt, seconds, error).

    Individual failures are recorded in the row and the sweep continues.
    """
    rows = []
    for idx, cfg in enumerate(configs):
        label = labels[idx] if labels else f"run{idx}"
        mesh_desc = (f"{cfg.ns}" if cfg.problem == "1d"
                     else f"{cfg.ns}x{cfg.nr}")
        try:
            rep = run(cfg)
            err = rep.relative_error
            rows.append((label, cfg.problem, cfg.scheme, mesh_desc, cfg.dt,
                         rep.wall_seconds,
                         "" if err is None else err, ""))
        except SolheatError as exc:
            rows.append((label, cfg.problem, cfg.scheme, mesh_desc, cfg.dt,
                         "", "", str(exc)))
    return rows


def _write_bench_csv(path, rows):
    with open(path, "w") as fh:
        fh.write("label,problem,scheme,mesh,dt,seconds,error,failure\n")
        for row in rows:
            out = []
            for v in row:
                out.append(_fmt(v) if isinstance(v, float) else str(v))
            fh.write(",".join(out) + "\n")


def _base_1d(scheme, ns, dt, reference_n=450):
    cfg = RunConfig(problem="1d", scheme=scheme, ns=ns, dt=dt, t_end=1.0,
                    t0=5.0, params=Params1D(1.0, 2.0))
    cfg.reference = {"n": reference_n}
    return cfg


def _base_2d(problem, scheme, n, dt, t_end=2.0, reference=None):
    cfg = RunConfig(problem=problem, scheme=scheme, ns=n, nr=n, dt=dt,
                    t_end=t_end, t0=3.0,
                    params=Params2D(1.0, 1e-2, 2.0, 10.0))
    cfg.reference = reference
    return cfg


def _tables_specs():
    """Benchmark sweeps shaped like the six result tables."""
    dts = [1e-2, 1e-3, 1e-4, 1e-5]
    t12 = [(f"{s}-ns{n}-dt{dt:g}", _base_1d(s, n, dt))
           for s in ("implicit", "imex") for n in (50, 150) for dt in dts]
    t34 = [(f"2d-{s}-dt{dt:g}",
            _base_2d("2d", s, 100, dt, reference={"ns": 300, "nr": 300}))
           for s in ("implicit", "imex") for dt in [1e-1, 1e-2, 1e-3, 1e-4]]
    t5 = [(f"{p}-imex-n{n}", _base_2d(p, "imex", n, 1e-4))
          for n in (50, 100, 300, 500) for p in ("2d", "2d-unsplit")]
    t6 = [(f"{p}-{s}-dt1e-3",
           _base_2d(p, s, 100, 1e-3, reference={"ns": 300, "nr": 300}))
          for p in ("2d", "2d-unsplit") for s in ("implicit", "imex")]
    return {"1": t12, "2": t12, "3": t34, "4": t34, "5": t5, "6": t6}


# ---------------------------------------------------------------------------
# Entry point.

def main(argv=None):
    ap = argparse.ArgumentParser(prog="solheat",
                                 description="finite-volume solvers for "
                                 "anisotropic edge-plasma heat transport")
    sub = ap.add_subparsers(dest="command", required=True)
    p_run = sub.add_parser("run", help="integrate one configured problem")
    p_run.add_argument("config")
    p_ref = sub.add_parser("reference",
                           help="generate/cache the explicit reference run")
    p_ref.add_argument("config")
    p_cmp = sub.add_parser("compare",
                           help="relative error of a run against a cached "
                           "reference file")
    p_cmp.add_argument("config")
    p_cmp.add_argument("--reference", required=True)
    p_bench = sub.add_parser("bench", help="run every config in a directory")
    p_bench.add_argument("config_dir")
    p_tab = sub.add_parser("tables", help="regenerate result-table CSVs (1-6)")
    p_tab.add_argument("which", choices=list("123456"))
    p_tab.add_argument("--output", default=None)
    args = ap.parse_args(argv)

    try:
        return _dispatch(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except SolheatError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 2


def _read_config(path):
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    return parse_config(text)


def _dispatch(args):
    if args.command == "run":
        cfg = _read_config(args.config)
        rep = run(cfg)
        print(f"t_end reached; wall {rep.wall_seconds:.3f}s; "
              f"final L2 {rep.l2_norms[-1]:.6g}"
              + (f"; relative error {rep.relative_error:.6g}"
                 if rep.relative_error is not None else ""))
        return 0
    if args.command == "reference":
        cfg = _read_config(args.config)
        if cfg.problem == "1d":
            _, _, key = ensure_reference_1d(cfg.ns, cfg.params.k_par,
                                            cfg.params.gamma, cfg.t0,
                                            cfg.t_end)
        elif cfg.problem in ("2d", "2d-unsplit"):
            p = cfg.params
            _, _, key = ensure_reference_2d(cfg.ns, cfg.nr, p.k_par, p.k_perp,
                                            p.gamma, p.q_perp, cfg.t0,
                                            cfg.t_end)
        else:
            raise ConfigError("key 'problem': no explicit reference for "
                              "coupled runs")
        from ._refcache import reference_path
        print(reference_path(key))
        return 0
    if args.command == "compare":
        cfg = _read_config(args.config)
        data = np.load(args.reference)
        ref_T = data["T"]
        if cfg.problem == "1d":
            ref_mesh = build_uniform_mesh_1d(int(data["n"]))
        else:
            ref_mesh = build_mesh_2d(int(data["ns"]), int(data["nr"]))
        cfg.reference = None
        rep = run(cfg)
        cand_mesh = (build_uniform_mesh_1d(cfg.ns) if cfg.problem == "1d"
                     else build_mesh_2d(cfg.ns, cfg.nr))
        err = relative_error(rep.final, cand_mesh, ref_T, ref_mesh)
        print(f"relative error: {err:.6g}")
        return 0
    if args.command == "bench":
        from pathlib import Path
        paths = sorted(Path(args.config_dir).glob("*.cfg"))
        if not paths:
            raise ConfigError(f"no .cfg files in {args.config_dir}")
        configs = [_read_config(p) for p in paths]
        rows = bench(configs, labels=[p.stem for p in paths])
        out = Path(args.config_dir) / "bench.csv"
        _write_bench_csv(out, rows)
        print(out)
        return 0
    if args.command == "tables":
        specs = _tables_specs()[args.which]
        rows = bench([c for _, c in specs], labels=[l for l, _ in specs])
        out = args.output or f"table{args.which}.csv"
        _write_bench_csv(out, rows)
        print(out)
        return 0
    raise ConfigError(f"unknown command {args.command}")


if __name__ == "__main__":
    sys.exit(main())
