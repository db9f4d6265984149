"""Command-line front end.

Exit codes: 0 success (or Certified), 2 NotCertified, 1 error.
"""

import argparse
import math
import os
import sys

import numpy as np

from . import registry
from .certify import certify_box_reduced, certify_contraction, fit_decay, gamma_lower_bound, pairwise_distance
from .dae import DaeSystem, simulate
from .dsl import parse_model
from .linalg import NormKind, matrix_measure
from .observer import ObserverSpec, simulate_observer, zero_injection
from .svgplot import line_chart
from .variational import MetricTransform

EXIT_OK, EXIT_ERROR, EXIT_NOT_CERTIFIED = 0, 1, 2


class UsageError(Exception):
    pass


def _floats(text):
    text = text.strip()
    if not text:
        return np.zeros(0)
    return np.array([float(v) for v in text.split(",")])


def _params(items):
    out = {}
    for item in items or []:
        if "=" not in item:
            raise UsageError(f"--param expects NAME=VALUE, got {item!r}")
        k, v = item.split("=", 1)
        out[k.strip()] = float(v)
    return out


def _load(args):
    """(DaeSystem or ObserverSpec, NamedExample or None)."""
    params = _params(getattr(args, "param", None))
    if bool(args.example) == bool(args.model):
        raise UsageError("give exactly one of --example or --model")
    if args.model:
        with open(args.model, encoding="utf-8") as fh:
            text = fh.read()
        name = os.path.splitext(os.path.basename(args.model))[0]
        return DaeSystem.from_model(parse_model(text, params, name)), None
    ex = registry.get_example(args.example)
    if params:
        if ex.id != "smex2":
            raise UsageError(f"example {ex.id} has no parameters")
        ex.system = registry.smex2_system(**params)
        ex.params.update(params)
    return ex.system, ex


def _ics(args, ex, n):
    if args.ic:
        out = []
        for item in args.ic:
            w, _, zg = item.partition(":")
            out.append((_floats(w), _floats(zg) if zg else None))
        return out
    if ex is None:
        raise UsageError("--ic is required with --model")
    return list(ex.default_ics)


def _preset(ex, attr, fallback):
    return getattr(ex.preset, attr) if ex is not None else fallback


def _outdir(args):
    os.makedirs(args.out, exist_ok=True)
    return args.out


def cmd_list_examples(args):
    for id in registry.EXAMPLE_IDS:
        ex = registry.get_example(id)
        pr = ex.preset
        print(f"{id:15s} {ex.description}")
        print(f"{'':15s} preset: gamma={pr.gamma} norm={pr.p.value} metric={pr.metric.describe()} "
              f"beta_min={pr.beta_min:g} method={pr.method} model={ex.model_file}")
    return EXIT_OK


def cmd_simulate(args):
    system, ex = _load(args)
    if isinstance(system, ObserverSpec):
        system = system.plant.as_dae()
    out = _outdir(args)
    t_end = args.t_end if args.t_end is not None else _preset(ex, "t_end", 10.0)
    step = args.step if args.step is not None else _preset(ex, "step", 1e-3)
    if args.w0 is not None:
        ics = [(_floats(args.w0), _floats(args.z_guess) if args.z_guess else None)]
    else:
        ics = _ics(args, ex, system.n)
    if ex is not None and ex.id == "oex1_observer" and args.w0 is None:
        ics = [(z, None) for _, z in ics]  # plant initial states
    for i, (w0, zg) in enumerate(ics):
        traj = simulate(system, args.t0, w0, zg, t_end, step)
        suffix = "" if len(ics) == 1 else f"_{i}"
        traj.to_csv(os.path.join(out, f"trajectory{suffix}.csv"))
        if args.plot:
            series = [(f"w{j + 1}", traj.t, traj.w[:, j]) for j in range(system.n)]
            series += [(f"z{j + 1}", traj.t, traj.z[:, j]) for j in range(system.m)]
            line_chart(series, os.path.join(out, f"trajectory{suffix}.svg"), title=f"{system.name} trajectory")
        print(f"trajectory {i}: {len(traj)} samples, max |g| = {traj.constraint_residual_max:.3g}, "
              f"status {traj.status}; final w = {traj.w[-1].tolist()}, z = {traj.z[-1].tolist()}")
    return EXIT_OK


def _write_cert(cert, args):
    out = _outdir(args)
    with open(os.path.join(out, "report.txt"), "w", encoding="utf-8") as fh:
        fh.write(cert.report())
    cert.to_csv(os.path.join(out, "mu.csv"))
    print(cert.report(), end="")
    return EXIT_OK if cert.certified else EXIT_NOT_CERTIFIED


def cmd_certify(args):
    system, ex = _load(args)
    gamma_arg = args.gamma
    if gamma_arg is None:
        gamma = _preset(ex, "gamma", 0.0)
    elif gamma_arg.lower() == "auto":
        gamma = None
    else:
        gamma = float(gamma_arg)
    p = NormKind.parse(args.norm) if args.norm else _preset(ex, "p", NormKind.ONE)
    metric = MetricTransform.parse(args.metric) if args.metric else _preset(ex, "metric", MetricTransform.identity())
    beta_min = args.beta_min if args.beta_min is not None else _preset(ex, "beta_min", 0.5)
    t_end = args.t_end if args.t_end is not None else _preset(ex, "t_end", 10.0)
    step = args.step if args.step is not None else _preset(ex, "step", 1e-3)
    if isinstance(system, ObserverSpec):
        plant_w0 = _floats(args.plant_w0) if args.plant_w0 else ex.default_ics[0][1]
        plant = system.plant
        plant_traj = simulate(plant.as_dae(), 0.0, plant_w0, plant.eval_h(0.0, plant_w0), t_end, step)
        system = ex.dae(plant_traj)
        ics = [(w, plant.eval_h(0.0, w)) for w, _ in _ics(args, ex, plant.n)]
    else:
        ics = _ics(args, ex, system.n)
    if ex is not None and ex.preset.method == "box" and not args.ic:
        raise UsageError(f"example {ex.id} is certified with certify-box")
    cert = certify_contraction(system, ics, (0.0, t_end), gamma, p, metric, beta_min, step,
                               args.metric_cap, args.threads)
    return _write_cert(cert, args)


def _parse_box(text):
    out = []
    for item in text.split(","):
        if ":" in item:
            lo, hi = item.split(":")
            out.append((_eval_num(lo), _eval_num(hi)))
        else:
            v = _eval_num(item)
            out.append((v, v))
    return out


def _eval_num(text):
    from .dsl import evaluate, parse_expr

    return float(evaluate(parse_expr(text.strip()), 0.0, [], []))


def cmd_certify_box(args):
    system, ex = _load(args)
    if isinstance(system, ObserverSpec):
        raise UsageError("the observer example is not time-invariant")
    box = _parse_box(args.box) if args.box else _preset(ex, "box", None)
    if box is None:
        raise UsageError("--box is required")
    p = NormKind.parse(args.norm) if args.norm else _preset(ex, "p", NormKind.ONE)
    metric = MetricTransform.parse(args.metric) if args.metric else _preset(ex, "metric", MetricTransform.identity())
    beta_min = args.beta_min if args.beta_min is not None else _preset(ex, "beta_min", 1.0)
    grid = args.grid if args.grid is not None else _preset(ex, "grid", 101)
    cert = certify_box_reduced(system, box, grid, p, metric, beta_min, threads=args.threads)
    return _write_cert(cert, args)


def cmd_measure(args):
    mat = np.loadtxt(args.matrix, delimiter=",", ndmin=2)
    norms = [NormKind.parse(args.norm)] if args.norm else list(NormKind)
    for p in norms:
        val = matrix_measure(mat, p)
        print(format(val, ".17g") if args.norm else f"mu_{p.value}: {val:.17g}")
    return EXIT_OK


def cmd_gamma_bound(args):
    print(format(gamma_lower_bound(args.alpha_bar, args.lf, args.lg), ".17g"))
    return EXIT_OK


def cmd_observer(args):
    ex = registry.get_example(args.example)
    if not isinstance(ex.system, ObserverSpec):
        raise UsageError(f"example {ex.id} is not an observer example")
    spec = ex.system
    if args.gains == "zero":
        spec = ObserverSpec(spec.plant, zero_injection(spec.plant.n, spec.plant.m))
    what0 = _floats(args.what0) if args.what0 else ex.default_ics[0][0]
    w0 = _floats(args.w0) if args.w0 else ex.default_ics[0][1]
    t_end = args.t_end if args.t_end is not None else ex.preset.t_end
    run = simulate_observer(spec, w0, what0, t_end, args.step)
    out = _outdir(args)
    run.to_csv(os.path.join(out, "error.csv"))
    run.plant.to_csv(os.path.join(out, "plant.csv"))
    run.observer.to_csv(os.path.join(out, "observer.csv"))
    if args.plot:
        series = [(f"e{j + 1}", run.t, run.err[:, j]) for j in range(run.err.shape[1])]
        line_chart(series, os.path.join(out, "error.svg"), title="observer error what - w")
    print(f"final error norm: {run.err_norm[-1]:.6g}")
    if np.all(run.err_norm > 0):
        fit = fit_decay(run.t, run.err_norm)
        print(f"fitted decay: c = {fit.c:.6g}, alpha = {fit.alpha:.6g}, residual = {fit.residual:.3g}")
    return EXIT_OK


def _add_source(p, with_params=True):
    p.add_argument("--example", choices=registry.EXAMPLE_IDS, help="built-in example id")
    p.add_argument("--model", help="model file (.dae) in the expression format")
    if with_params:
        p.add_argument("--param", action="append", metavar="NAME=VALUE",
                       help="override a model parameter (repeatable)")


def build_parser():
    parser = argparse.ArgumentParser(prog="daecontract", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("list-examples", help="list built-in examples and presets")
    p.set_defaults(func=cmd_list_examples)

    p = sub.add_parser("simulate", help="simulate a DAE and write trajectory CSV")
    _add_source(p)
    p.add_argument("--t0", type=float, default=0.0, help="initial time (default 0)")
    p.add_argument("--t-end", type=float, help="final time (default: example preset or 10)")
    p.add_argument("--step", type=float, help="RK4 step (default 1e-3)")
    p.add_argument("--w0", help="initial state, comma separated")
    p.add_argument("--z-guess", help="Newton guess for z0, comma separated")
    p.add_argument("--ic", action="append", metavar="W0[:ZGUESS]", help="initial condition (repeatable)")
    p.add_argument("--out", default=".", help="output directory (default .)")
    p.add_argument("--plot", action="store_true", help="also write an SVG plot")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("certify", help="certify contraction along simulated trajectories")
    _add_source(p)
    p.add_argument("--ic", action="append", metavar="W0[:ZGUESS]",
                   help="initial condition, e.g. 3,-3:1.38 (repeatable; default: example ICs)")
    p.add_argument("--plant-w0", help="observer example only: plant initial state")
    p.add_argument("--gamma", help="auxiliary gain, or 'auto' for the ladder 0,1,2,4,8,16")
    p.add_argument("--norm", choices=["1", "2", "inf"], help="matrix measure norm")
    p.add_argument("--metric", help="identity | exp:<sigma> | diag:<a>,<b>,...")
    p.add_argument("--beta-min", type=float, help="required contraction rate")
    p.add_argument("--t-end", type=float, help="final time")
    p.add_argument("--step", type=float, help="RK4 step")
    p.add_argument("--metric-cap", type=float, default=1e6, help="cap on ||M|| ||M^-1|| (default 1e6)")
    p.add_argument("--threads", type=int, default=None, help="worker threads (default: CPU count)")
    p.add_argument("--out", default=".", help="output directory for report.txt and mu.csv")
    p.set_defaults(func=cmd_certify)

    p = sub.add_parser("certify-box", help="reduced-Jacobian test of a time-invariant DAE on a box")
    _add_source(p)
    p.add_argument("--box", help="one lo:hi (or fixed value) per coordinate of (w, z), comma separated")
    p.add_argument("--grid", type=int, help="points per gridded axis (default 101)")
    p.add_argument("--norm", choices=["1", "2", "inf"], help="matrix measure norm")
    p.add_argument("--metric", help="identity | exp:<sigma> | diag:<a>,<b>,...")
    p.add_argument("--beta-min", type=float, help="required rate")
    p.add_argument("--threads", type=int, default=None, help="worker threads (default: CPU count)")
    p.add_argument("--out", default=".", help="output directory for report.txt and mu.csv")
    p.set_defaults(func=cmd_certify_box)

    p = sub.add_parser("measure", help="matrix measure of a matrix stored as CSV")
    p.add_argument("--matrix", required=True, help="CSV file, no header")
    p.add_argument("--norm", choices=["1", "2", "inf"], help="norm (default: print all three)")
    p.set_defaults(func=cmd_measure)

    p = sub.add_parser("gamma-bound", help="lower bound l + alpha_bar on the auxiliary gain")
    p.add_argument("--alpha-bar", type=float, required=True, help="fastest decay rate of the reduced system")
    p.add_argument("--lf", type=float, required=True, help="growth exponent of ||df/dz||")
    p.add_argument("--lg", type=float, required=True, help="growth exponent of ||[dg/dz]^-1||")
    p.set_defaults(func=cmd_gamma_bound)

    p = sub.add_parser("observer", help="simulate a plant/observer pair and write the error series")
    p.add_argument("--example", default="oex1_observer", choices=["oex1_observer"], help="observer example")
    p.add_argument("--w0", help="plant initial state")
    p.add_argument("--what0", help="observer initial state")
    p.add_argument("--gains", choices=["default", "zero"], default="default", help="injection gains")
    p.add_argument("--t-end", type=float, help="final time")
    p.add_argument("--step", type=float, default=1e-3, help="RK4 step")
    p.add_argument("--out", default=".", help="output directory")
    p.add_argument("--plot", action="store_true", help="also write an SVG plot")
    p.set_defaults(func=cmd_observer)
    return parser


def run(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_ERROR
    try:
        return args.func(args)
    except (UsageError, ValueError, KeyError, OSError, ArithmeticError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
