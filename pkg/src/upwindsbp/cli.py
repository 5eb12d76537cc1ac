"""Command-line front end.

Subcommands: ``verify-operators``, ``convergence``, ``spectrum``,
``simulate`` and ``derive-operator``. Exit codes are 0 on success, 1 on a
computational failure and 2 on usage or configuration errors. A
``--config`` file of ``key = value`` lines supplies defaults; flags win.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path
from typing import Sequence

import numpy as np

from upwindsbp import analysis, experiments
from upwindsbp.operators import (
    DerivationFailedError,
    OperatorError,
    builtin_operators,
    derive_periodic_upwind,
    dump_operator_table,
    load_operator_table,
    verify,
)
from upwindsbp.semidisc import MeshLayout, Semidiscretization, global_operator
from upwindsbp.splittings import SPLITTINGS, Equation
from upwindsbp.timeint import IntegratorConfig

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def read_config(path: str) -> dict[str, str]:
    """Parse ``key = value`` lines; ``#`` starts a comment."""
    out = {}
    try:
        lines = Path(path).read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise UsageError(f"cannot read config {path}: {exc}") from exc
    for lineno, raw in enumerate(lines, 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise UsageError(f"{path}:{lineno}: expected 'key = value'")
        out[key.strip().replace("-", "_")] = value.strip()
    return out


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="upwindsbp", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", parser_class=_Parser)

    def common(sp):
        sp.add_argument("--config", help="key = value file with defaults")
        sp.add_argument("--output", "-o", help="CSV output path")

    v = sub.add_parser("verify-operators", help="check operator invariants")
    v.add_argument("--table", action="append", default=None, help="operator table file (repeatable)")
    v.add_argument("--config")

    c = sub.add_parser("convergence", help="error and EOC tables")
    common(c)
    c.add_argument("--case", choices=("advection", "euler"))
    c.add_argument("--splitting", choices=SPLITTINGS)
    c.add_argument("--order", "--orders", dest="orders", type=int, nargs="+")
    c.add_argument("--mode", choices=("dg", "fd"))
    c.add_argument("--K", type=int, nargs="+", help="element counts")
    c.add_argument("--N", type=int, nargs="+", help="nodes per element")
    c.add_argument("--operator", help="builtin, periodic or a table path")
    c.add_argument("--t-end", type=float)
    c.add_argument("--tol", type=float, help="abstol = reltol of the adaptive integrator")
    c.add_argument("--jobs", type=int)

    s = sub.add_parser("spectrum", help="eigenvalues of a semidiscretization Jacobian")
    common(s)
    s.add_argument("--equation", choices=("advection", "burgers"))
    s.add_argument("--splitting", choices=SPLITTINGS)
    s.add_argument("--order", type=int)
    s.add_argument("--K", type=int)
    s.add_argument("--N", type=int)
    s.add_argument("--operator", help="builtin, periodic or a table path")
    s.add_argument("--seed", type=int)
    s.add_argument("--scheme", choices=("upwind", "central"), help="advection operator")

    m = sub.add_parser("simulate", help="2D Euler runs with crash detection")
    common(m)
    m.add_argument("--case", choices=("khi", "vortex"))
    m.add_argument("--splitting", choices=SPLITTINGS)
    m.add_argument("--order", type=int)
    m.add_argument("--K", type=int, nargs="+", help="elements per direction")
    m.add_argument("--N", type=int, help="nodes per element and direction")
    m.add_argument("--operator", help="builtin, periodic or a table path")
    m.add_argument("--t-end", type=float)
    m.add_argument("--tol", type=float)
    m.add_argument("--log-every", type=int)
    m.add_argument("--functionals", help="directory for one t,value CSV per logged functional")
    m.add_argument("--jobs", type=int)

    d = sub.add_parser("derive-operator", help="write a derived periodic operator table")
    common(d)
    d.add_argument("--order", type=int)
    d.add_argument("--nodes", type=int)
    d.add_argument("--xmin", type=float)
    d.add_argument("--xmax", type=float)
    return p


DEFAULTS = {
    "convergence": dict(case="advection", splitting=None, orders=[2], mode="dg", K=None, N=None,
                        operator="builtin", t_end=None, tol=1e-8, jobs=experiments.default_jobs()),
    "spectrum": dict(equation="burgers", splitting="fully_upwind", order=2, K=1, N=13,
                     operator="builtin", seed=analysis.DEFAULT_SEED, scheme="upwind"),
    "simulate": dict(case="khi", splitting="van_leer_haenel", order=2, K=[4], N=16,
                     operator="builtin", t_end=None, tol=1e-6, log_every=10, functionals=None,
                     jobs=experiments.default_jobs()),
    "derive-operator": dict(order=None, nodes=None, xmin=0.0, xmax=1.0),
    "verify-operators": dict(table=None),
}


def _subparser(parser: argparse.ArgumentParser, command: str) -> argparse.ArgumentParser:
    for action in parser._actions:
        if isinstance(action, argparse._SubParsersAction):
            return action.choices[command]
    raise KeyError(command)


def resolve(args: argparse.Namespace, parser: argparse.ArgumentParser) -> argparse.Namespace:
    """Merge defaults, config file and flags (flags take precedence).

    Config values are converted with the same types as the matching flags.
    """
    values = dict(DEFAULTS[args.command])
    values.setdefault("output", None)
    actions = {a.dest: a for a in _subparser(parser, args.command)._actions}
    config = read_config(args.config) if getattr(args, "config", None) else {}
    for key, raw in config.items():
        if key not in values or key == "config":
            raise UsageError(f"unknown config key {key!r} for {args.command}")
        action = actions[key]
        try:
            conv = action.type or str
            val = [conv(v) for v in raw.replace(",", " ").split()] if action.nargs == "+" else conv(raw)
        except (ValueError, argparse.ArgumentTypeError) as exc:
            raise UsageError(f"bad config value for {key}: {raw!r}") from exc
        if action.nargs != "+" and action.choices is not None and val not in action.choices:
            raise UsageError(f"config value {raw!r} for {key} is not one of {list(action.choices)}")
        values[key] = [val] if isinstance(action, argparse._AppendAction) else val
    for key, val in values.items():
        if getattr(args, key, None) is None:
            setattr(args, key, val)
    return args


# {{{ commands


def cmd_verify_operators(args) -> int:
    pairs = dict(builtin_operators())
    for path in args.table or []:
        if not Path(path).is_file():
            raise UsageError(f"operator table {path} does not exist")
        try:
            pairs[path] = load_operator_table(path)
        except OperatorError as exc:
            print(f"FAIL {path}: {exc}")
            return EXIT_FAIL
    status = EXIT_OK
    for name, pair in pairs.items():
        rep = verify(pair)
        fail = rep.first_failure()
        print(f"{'PASS' if fail is None else 'FAIL'} {name}: sbp_residual={rep.sbp_residual:.3e} "
              f"nsd_max_eigenvalue={rep.nsd_max_eigenvalue:.3e} interior_order={rep.interior_order} "
              f"boundary_order={rep.boundary_order}" + ("" if fail is None else f" failed={fail}"))
        if fail is not None and status == EXIT_OK:
            status = EXIT_FAIL
    return status


def cmd_convergence(args) -> int:
    case = {"advection": "advection_convergence", "euler": "euler_manufactured"}[args.case]
    splitting = args.splitting or ("lax_friedrichs" if args.case == "advection" else "steger_warming")
    ladder = []
    for order in args.orders:
        ladder += experiments.ladder_for(order, args.mode, args.K, args.N)
    if not ladder:
        raise UsageError("empty ladder")
    t_end = args.t_end or (5.0 if args.case == "advection" else 2.0)
    cfg = IntegratorConfig(t_end=t_end, scheme="ssp43_adaptive", abstol=args.tol, reltol=args.tol)
    report = experiments.RunReport(experiments.CONVERGENCE_COLUMNS)
    for order in args.orders:
        cells = [c for c in ladder if c[0] == order]
        spec = experiments.ExperimentSpec(case, cells, splitting, cfg, operator=args.operator,
                                          mode=args.mode, jobs=args.jobs)
        part = experiments.run_convergence(spec)
        print(f"# {case} {splitting} order {order} ({args.mode} refinement)")
        print(experiments.format_convergence_table(part))
        report.rows += part.rows
    if args.output:
        report.to_csv(args.output)
    return EXIT_OK


def _spectrum_layout(args) -> MeshLayout:
    if args.N < 2 or args.K < 1:
        raise UsageError("need at least two nodes and one element")
    if args.equation == "burgers" and args.operator == "builtin":
        return analysis.burgers_layout(args.order, args.K, args.N)
    return experiments.build_layout(args.order, args.K, args.N, (0.0, 1.0), operator=args.operator)


def cmd_spectrum(args) -> int:
    try:
        layout = _spectrum_layout(args)
    except OperatorError as exc:
        raise UsageError(str(exc)) from exc
    n = layout.total_nodes()
    if n > analysis.EIGEN_CAP:
        print(f"error: {n} degrees of freedom exceed the eigensolver cap {analysis.EIGEN_CAP}")
        return EXIT_FAIL
    if args.equation == "advection":
        op = global_operator(layout)
        sp = analysis.operator_spectrum(op, args.scheme)
        scale = float(np.abs(op.dense()[2]).sum(axis=1).max())
    else:
        splitting = args.splitting if args.splitting in ("fully_upwind", "llf") else "fully_upwind"
        semi = Semidiscretization(layout, Equation("burgers"), splitting)
        state = np.random.default_rng(args.seed).uniform(0.0, 1.0, layout.state_shape(1))
        J = analysis.jacobian(semi, state)
        sp = analysis.spectrum(J)
        scale = J.norm_inf
    text = sp.to_csv()
    if args.output:
        Path(args.output).write_text(text)
    print(f"max_real_part,{sp.max_real_part!r}")
    print(f"scale,{scale!r}")
    return EXIT_OK


def cmd_simulate(args) -> int:
    tol = args.tol
    if args.case == "khi":
        t_end = args.t_end or 15.0
        cfg = IntegratorConfig(t_end=t_end, scheme="ssp43_adaptive", abstol=tol, reltol=tol)
        ladder = [(args.order, K, args.N) for K in args.K]
        spec = experiments.ExperimentSpec("khi", ladder, args.splitting, cfg, args.output,
                                          operator=args.operator, jobs=args.jobs)
        _, report = experiments.run_khi_sweep(spec)
        print(report.to_csv(), end="")
        return EXIT_OK
    t_end = args.t_end or 10.0
    cfg = IntegratorConfig(t_end=t_end, scheme="ssp43_adaptive", abstol=tol, reltol=tol)
    spec = experiments.ExperimentSpec("isentropic_vortex", [(args.order, args.K[0], args.N)],
                                      args.splitting, cfg, args.output, operator=args.operator,
                                      log_every=args.log_every)
    res = experiments.run_vortex(spec)
    if args.functionals:
        # one t,value file per functional
        folder = Path(args.functionals)
        folder.mkdir(parents=True, exist_ok=True)
        for key in sorted(res.functionals):
            lines = ["t,value"] + [f"{experiments.fmt(t)},{experiments.fmt(float(v))}" for t, v in
                                   zip(res.times.tolist(), res.functionals[key].tolist())]
            (folder / f"{key}.csv").write_text("\n".join(lines) + "\n")
    rec = res.crash
    print(f"final_time,{rec.final_time!r},crashed,{experiments.fmt(rec.crashed)}")
    print(f"density_error,{float(res.density_error[-1])!r}")
    return EXIT_OK


def cmd_derive_operator(args) -> int:
    if args.order is None or args.nodes is None:
        raise UsageError("derive-operator needs --order and --nodes")
    try:
        pair = derive_periodic_upwind(args.order, args.nodes, args.xmin, args.xmax)
    except DerivationFailedError as exc:
        print(f"error: {exc}")
        return EXIT_FAIL
    except OperatorError as exc:
        raise UsageError(str(exc)) from exc
    text = dump_operator_table(pair, args.output)
    if not args.output:
        print(text, end="")
    return EXIT_OK


COMMANDS = {
    "verify-operators": cmd_verify_operators,
    "convergence": cmd_convergence,
    "spectrum": cmd_spectrum,
    "simulate": cmd_simulate,
    "derive-operator": cmd_derive_operator,
}


# }}}


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            parser.print_help()
            return EXIT_USAGE
        args = resolve(args, parser)
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ValueError, OperatorError) as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
