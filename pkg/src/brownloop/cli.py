"""Command-line entry point: experiments in, CSV + JSONL summaries out.

Subcommands: structure, region, kernel, ratiogap, relativized, checks,
converge, mass, mcloop, bridge.  Numeric CSV fields are written with 17
significant digits so they round-trip; identical configurations produce
byte-identical CSV.  Config precedence: flags > config file > defaults.
"""

import argparse
import csv
import json
import math
import os
import sys
import time

import numpy as np

from . import __version__
from . import rootsys, hkernel, doob, evolve, loopmc
from .hkernel import SpacePoint
from .doob import RelativizedSpace
from .rootsys import EpsilonSchedule

OUTDIR_ENV = "BROWNLOOP_OUTDIR"


def _fmt(x):
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return format(float(x), ".17g")


def _write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\r\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])
    return path


def _write_summary(outdir, payload):
    path = os.path.join(outdir, "summary.jsonl")
    with open(path, "a") as fh:
        fh.write(json.dumps(payload, sort_keys=True) + "\n")
    return path


def _write_plot_script(outdir, name, csv_name, xcol, ycols, logscale=False):
    lines = [
        'set datafile separator ","',
        "set key autotitle columnhead",
        f'set output "{name}.png"',
        "set terminal pngcairo size 900,600",
    ]
    if logscale:
        lines.append("set logscale xy")
    plots = ", ".join(f'"{csv_name}" using {xcol}:{y} with linespoints' for y in ycols)
    lines.append(f"plot {plots}")
    path = os.path.join(outdir, f"{name}.gp")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")
    return path


def _parse_floats(text):
    return [float(tok) for tok in str(text).split(",") if tok != ""]


def _load_config(path):
    values = {}
    with open(path) as fh:
        for raw in fh:
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"malformed config line: {raw.rstrip()}")
            key, val = line.split("=", 1)
            values[key.strip().replace("-", "_")] = val.strip()
    return values


def _resolve(args, defaults):
    """Apply config-file values beneath explicit flags, then the defaults table.

    Options are declared with default=None, so a non-None attribute means the
    flag was given on the command line and wins over everything.
    """
    if getattr(args, "config", None):
        for key, val in _load_config(args.config).items():
            if getattr(args, key, None) is None and hasattr(args, key):
                setattr(args, key, val)
    for key, val in defaults.get(args.command, {}).items():
        if getattr(args, key, None) is None:
            setattr(args, key, val)
    return args


def _outdir(args):
    out = getattr(args, "out", None) or os.environ.get(OUTDIR_ENV) or "."
    os.makedirs(out, exist_ok=True)
    return out


def _model(args):
    return hkernel.make_model(args.model)


def _eps(args):
    return EpsilonSchedule(gamma=float(args.eps_gamma), scale=float(args.eps_scale))


def _dataset(space, name):
    if name == "radial":
        return evolve.radial_bump(space)
    if name == "offcenter":
        return evolve.offcenter_bump(space)
    if name == "decaying":
        return evolve.decaying_data(a=2.0 * space.model.rho + 0.5, b=0.0)
    raise ValueError(f"unknown data family {name!r}")


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def _cmd_structure(args):
    datum = rootsys.build_root_datum(args.model)
    eps = _eps(args)
    ts = _parse_floats(args.t)
    rows = []
    for t in ts:
        inner, outer = rootsys.omega_bounds(t, eps)
        rows.append([t, float(eps(t)), inner, outer])
    rho = datum.rho
    if args.format == "csv":
        print("t,eps,omega_inner,omega_outer")
        for row in rows:
            print(",".join(_fmt(v) for v in row))
    else:
        print(f"datum {datum.name}: rank={datum.rank} n={datum.n} nu={datum.nu} "
              f"rho={np.array2string(rho, precision=6)} |rho|={np.linalg.norm(rho):.6f}")
        for row in rows:
            print(f"  t={row[0]:g}: eps={row[1]:.6g} "
                  f"omega=[{row[2]:.6g}, {row[3]:.6g}]")
    outdir = _outdir(args)
    path = _write_csv(os.path.join(outdir, "structure.csv"),
                      ["t", "eps", "omega_inner", "omega_outer"], rows)
    return {"datum": datum.name, "n": datum.n, "nu": datum.nu, "csv": path}


def _cmd_region(args):
    eps = _eps(args)
    rows = []
    for t in _parse_floats(args.t):
        inner, outer = rootsys.omega_bounds(t, eps)
        rows.append([t, float(eps(t)), inner, outer, outer])
    outdir = _outdir(args)
    path = _write_csv(os.path.join(outdir, "region.csv"),
                      ["t", "eps", "omega_inner", "omega_outer", "R_radius"], rows)
    print(f"wrote {len(rows)} region rows to {path}")
    return {"csv": path}


def _cmd_kernel(args):
    model = _model(args)
    rows = []
    for t in _parse_floats(args.t):
        if t <= 0:
            raise ValueError("t must be positive")
        radii = np.linspace(0.0, float(args.rmax), int(args.nr))
        h = hkernel.heat_kernel(model, t, radii)
        lo, hi = hkernel.heat_kernel_envelope(model, t, radii)
        ph = hkernel.phi0(model, radii)
        for i, r in enumerate(radii):
            rows.append([t, r, h[i], lo[i], hi[i], ph[i]])
    outdir = _outdir(args)
    path = _write_csv(os.path.join(outdir, "kernel.csv"),
                      ["t", "r", "h_t", "envelope_lo", "envelope_hi", "phi0"], rows)
    if args.plot:
        _write_plot_script(outdir, "kernel", "kernel.csv", 2, [3, 4, 5])
    print(f"wrote {len(rows)} kernel rows to {path}")
    return {"csv": path, "rows": len(rows)}


def _cmd_ratiogap(args):
    model = _model(args)
    xi = float(args.xi)
    rows = []
    for t in _parse_floats(args.t):
        if t <= 0:
            raise ValueError("t must be positive")
        sup = 0.0
        for fr in (0.25, 0.5, 0.75, 1.0):
            for ry in (0.5 * xi, xi):
                for ang in np.linspace(0.0, math.pi, 5):
                    g = SpacePoint(fr * math.sqrt(t))
                    y = SpacePoint(ry, ang)
                    sup = max(sup, abs(hkernel.ratio_gap(model, t, g, y)))
        rows.append([t, sup])
    outdir = _outdir(args)
    path = _write_csv(os.path.join(outdir, "ratiogap.csv"), ["t", "sup_gap"], rows)
    if args.plot:
        _write_plot_script(outdir, "ratiogap", "ratiogap.csv", 1, [2], logscale=True)
    print(f"wrote {len(rows)} ratio-gap rows to {path}")
    return {"csv": path}


def _cmd_relativized(args):
    model = _model(args)
    space = RelativizedSpace(model)
    rows = []
    for t in _parse_floats(args.t):
        if t <= 0:
            raise ValueError("t must be positive")
        radii = np.linspace(0.0, float(args.rmax), int(args.nr))
        ht = doob.relativized_kernel_radial(space, t, radii)
        w = space.weight(radii)
        for i, r in enumerate(radii):
            rows.append([t, r, ht[i], w[i]])
    outdir = _outdir(args)
    path = _write_csv(os.path.join(outdir, "relativized.csv"),
                      ["t", "r", "htilde", "weight"], rows)
    print(f"wrote {len(rows)} relativized rows to {path}")
    return {"csv": path}


def _cmd_checks(args):
    model = _model(args)
    space = RelativizedSpace(model)
    results = {}
    for t in _parse_floats(args.t):
        value, rmax, tail = doob.normalization_report(space, t)
        results[f"normalization_t{t:g}"] = {
            "residual": abs(value - 1.0), "r_max": rmax, "tail_bound": tail}
    grid = np.linspace(0.5, 6.0, 513)
    ga = doob.relativized_generator_apply(space, lambda r: np.exp(-(r - 2.0) ** 2), grid)
    gb = doob.relativized_generator_apply(
        space, lambda r: np.exp(-(r - 2.0) ** 2), np.linspace(0.5, 6.0, 1025))
    results["generator_discrepancy"] = {
        "coarse": ga.discrepancy, "fine": gb.discrepancy,
        "order_ratio": ga.discrepancy / gb.discrepancy}
    bump = evolve.radial_bump(space)
    results["semigroup_residual"] = {
        "residual": doob.semigroup_identity_check(space, 1.0, bump)}
    results["phi0_product_residual"] = {
        "residual": abs(hkernel.phi0_product_check(
            model, SpacePoint(1.0), SpacePoint(2.0)))}
    rng = np.random.default_rng(7)
    worst = 0.0
    for _ in range(1000):
        p = SpacePoint(float(5.0 * rng.random()), float(math.pi * rng.random()),
                       float(2.0 * math.pi * rng.random()))
        worst = max(worst, hkernel.busemann_rho(model, p) - model.rho * p.r)
    results["iwasawa_cartan_max_violation"] = {"residual": max(worst, 0.0)}

    tolerances = {"normalization": 1e-6, "generator": (3.5, 4.5),
                  "semigroup": 1e-8, "phi0_product": 1e-8, "iwasawa": 1e-12}
    failures = 0
    for key, payload in results.items():
        if key.startswith("normalization"):
            ok = payload["residual"] < tolerances["normalization"]
        elif key == "generator_discrepancy":
            lo, hi = tolerances["generator"]
            ok = lo <= payload["order_ratio"] <= hi
        elif key == "semigroup_residual":
            ok = payload["residual"] < tolerances["semigroup"]
        elif key == "phi0_product_residual":
            ok = payload["residual"] < tolerances["phi0_product"]
        else:
            ok = payload["residual"] <= tolerances["iwasawa"]
        failures += 0 if ok else 1
        print(f"{'PASS' if ok else 'FAIL'} {key}: {payload}")
    print(f"checks complete: {len(results) - failures}/{len(results)} passed")
    return {"results": results, "failures": failures}


def _cmd_converge(args):
    model = _model(args)
    space = RelativizedSpace(model)
    data = _dataset(space, args.data)
    t_grid = _parse_floats(args.tgrid)
    p_list = _parse_floats(args.p) if args.p else []
    report = evolve.run_convergence_experiment(space, data, t_grid, p_list)
    outdir = _outdir(args)
    # wall-clock stays out of the CSV so reruns are byte-identical; it is
    # echoed below and recorded in summary.jsonl
    header = report.header()[:-1]
    rows = [row[:-1] for row in report.as_rows()]
    path = _write_csv(os.path.join(outdir, "report.csv"), header, rows)
    if args.plot:
        _write_plot_script(outdir, "converge", "report.csv", 1,
                           list(range(2, 4 + len(p_list))), logscale=True)
    for row in report.rows:
        print(f"t={row.t:g}: l1={row.l1:.6g} linf_scaled={row.linf_scaled:.6g} "
              f"mass={row.mass:.6g} ({row.wall_seconds:.2f}s)")
    return {"csv": path, "rows": len(report.rows),
            "wall_seconds": [row.wall_seconds for row in report.rows]}


def _cmd_mass(args):
    model = _model(args)
    space = RelativizedSpace(model)
    data = _dataset(space, args.data)
    parts = _parse_floats(args.at)
    while len(parts) < 3:
        parts.append(0.0)
    g = SpacePoint(parts[0], parts[1], parts[2])
    value = evolve.mass_function(space, data, g)
    print(f"mass at (r={g.r:g}, theta={g.theta:g}, phi={g.phi:g}): {value:.12g}")
    if data.symmetry == "radial":
        const = evolve.mass_constant_radial(space, data)
        print(f"radial mass constant: {const:.12g}")
        return {"mass": value, "constant": const}
    return {"mass": value}


def _cmd_mcloop(args):
    model = _model(args)
    space = RelativizedSpace(model)
    cfg = loopmc.MCConfig(n_paths=int(args.paths), dt=float(args.dt),
                          t_end=float(args.tend), r0=float(args.r0),
                          seed=int(args.seed), worker_count=int(args.workers))
    sample = loopmc.simulate_loop(model, cfg)
    ks = loopmc.ks_distance(
        sample, lambda x: loopmc.loop_marginal_cdf(space, cfg.t_end, x))
    outdir = _outdir(args)
    path = _write_csv(os.path.join(outdir, "sample.csv"), ["terminal_radius"],
                      [[r] for r in sample.radii])
    moments = {"mean_r2": sample.mean_square(),
               "mean_r": float(np.mean(sample.radii)),
               "ks": ks, "reflected_steps": sample.n_reflected}
    print(f"simulated {cfg.n_paths} paths to t={cfg.t_end:g}: "
          f"mean r^2 = {moments['mean_r2']:.4f}, KS = {ks:.5f}")
    return {"csv": path, **moments}


def _cmd_bridge(args):
    model = _model(args)
    t = float(args.t)
    gaps = loopmc.bridge_to_loop_gap(model, _parse_floats(args.L), t)
    outdir = _outdir(args)
    path = _write_csv(os.path.join(outdir, "bridge.csv"), ["L", "sup_gap"], gaps)
    for L, gap in gaps:
        print(f"L={L:g}: sup gap = {gap:.6g}")
    return {"csv": path}


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------

def _declare(sub, defaults, spec):
    """Register options with default=None; real defaults live in the table."""
    for name, default, kw in spec:
        dest = name.lstrip("-").replace("-", "_")
        if default is not None:
            defaults[dest] = default
            kw = dict(kw)
            kw["help"] = (kw.get("help", "") + f" (default: {default})").strip()
        sub.add_argument(name, dest=dest, default=None, **kw)
    sub.add_argument("--out", default=None, help="output directory")
    sub.add_argument("--config", default=None, help="flat key=value config file")
    sub.add_argument("--plot", action="store_true",
                     help="emit a gnuplot script next to the CSV")
    defaults.setdefault("eps_gamma", 0.25)
    defaults.setdefault("eps_scale", 1.0)
    sub.add_argument("--eps-gamma", dest="eps_gamma", default=None, type=float)
    sub.add_argument("--eps-scale", dest="eps_scale", default=None, type=float)


def build_parser():
    parser = argparse.ArgumentParser(
        prog="brownloop",
        description="Relativized heat kernels, long-time convergence and loop Monte Carlo "
                    "on hyperbolic spaces")
    parser.add_argument("--version", action="version", version=f"brownloop {__version__}")
    subs = parser.add_subparsers(dest="command", required=True)
    defaults = {}

    commands = {
        "structure": (_cmd_structure, "structural constants and region radii", [
            ("--model", "h3", {}),
            ("--t", "10,100,1000", {}),
            ("--format", "text", {"choices": ("text", "csv")}),
        ]),
        "region": (_cmd_region, "critical-region radii per time", [
            ("--t", "10,100,1000,10000", {}),
        ]),
        "kernel": (_cmd_kernel, "heat kernel profile with envelopes", [
            ("--model", "h3", {}),
            ("--t", "1", {}),
            ("--rmax", 10.0, {"type": float}),
            ("--nr", 101, {"type": int}),
        ]),
        "ratiogap": (_cmd_ratiogap, "sup of the kernel-vs-ground-state ratio gap", [
            ("--model", "h3", {}),
            ("--t", "100,1000,10000", {}),
            ("--xi", 1.0, {"type": float}),
        ]),
        "relativized": (_cmd_relativized, "relativized kernel and measure profile", [
            ("--model", "h3", {}),
            ("--t", "1", {}),
            ("--rmax", 12.0, {"type": float}),
            ("--nr", 121, {"type": int}),
        ]),
        "checks": (_cmd_checks, "normalization/generator/semigroup identity checks", [
            ("--model", "h3", {}),
            ("--t", "1,10,100", {}),
        ]),
        "converge": (_cmd_converge, "long-time L1/Linf/Lp convergence experiment", [
            ("--model", "h3", {}),
            ("--data", "radial", {"choices": ("radial", "offcenter", "decaying")}),
            ("--tgrid", "10,100,1000", {}),
            ("--p", "", {}),
        ]),
        "mass": (_cmd_mass, "mass function at a point", [
            ("--model", "h3", {}),
            ("--data", "radial", {"choices": ("radial", "offcenter", "decaying")}),
            ("--at", "0,0,0", {"help": "r,theta,phi"}),
        ]),
        "mcloop": (_cmd_mcloop, "simulate the loop radius by Monte Carlo", [
            ("--model", "h3", {}),
            ("--paths", 100000, {"type": int}),
            ("--dt", 1e-3, {"type": float}),
            ("--tend", 1.0, {"type": float}),
            ("--r0", 0.0, {"type": float}),
            ("--seed", 12345, {"type": int}),
            ("--workers", 1, {"type": int}),
        ]),
        "bridge": (_cmd_bridge, "bridge-to-loop radial density gap", [
            ("--model", "h3", {}),
            ("--L", "10,50,250", {}),
            ("--t", 1.0, {"type": float}),
        ]),
    }
    for name, (func, help_text, spec) in commands.items():
        sub = subs.add_parser(name, help=help_text)
        defaults[name] = {}
        _declare(sub, defaults[name], spec)
        sub.set_defaults(func=func)
    return parser, defaults


def dispatch(argv) -> int:
    """Run one subcommand; exit code 0 on success, 1 on domain error, 2 on usage."""
    parser, defaults = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    start = time.perf_counter()
    try:
        args = _resolve(args, defaults)
        payload = args.func(args)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    elapsed = time.perf_counter() - start
    outdir = _outdir(args)
    summary = {"command": args.command, "timing_seconds": elapsed,
               "config": {k: v for k, v in vars(args).items()
                          if k not in ("func",) and not callable(v)}}
    if isinstance(payload, dict):
        summary["result"] = _jsonable(payload)
    _write_summary(outdir, summary)
    return 0


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    return obj


def main(argv=None) -> int:
    return dispatch(sys.argv[1:] if argv is None else argv)


if __name__ == "__main__":
    sys.exit(main())
