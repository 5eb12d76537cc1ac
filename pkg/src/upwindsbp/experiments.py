"""Initial conditions, exact solutions and sweep drivers for the numerical experiments."""

from __future__ import annotations

import io
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from upwindsbp.analysis import eoc, l2_error
from upwindsbp.operators import (
    OperatorPair,
    derive_periodic_upwind,
    load_operator_table,
    make_order1_bounded,
    make_order2_bounded,
    make_order2_periodic,
)
from upwindsbp.semidisc import MeshLayout, Semidiscretization, manufactured_source_euler
from upwindsbp.splittings import Equation, GasModel
from upwindsbp.timeint import IntegratorConfig, integrate, record_functionals

CASES = ("advection_convergence", "euler_manufactured", "spectra", "burgers_stability",
         "isentropic_vortex", "khi")


# {{{ initial conditions and exact solutions


def ic_advection_sine(x):
    return np.sin(np.pi * np.asarray(x, dtype=np.float64))


def exact_advection_sine(t, x):
    return np.sin(np.pi * (np.asarray(x, dtype=np.float64) - t))


def ic_euler_manufactured(t, x, gas: GasModel = GasModel()):
    """Conserved variables ``(h, h, h^2)`` with ``h = 2 + sin(pi (x - t)) / 10``."""
    h = 2.0 + 0.1 * np.sin(np.pi * (np.asarray(x, dtype=np.float64) - t))
    return np.stack([h, h, h * h], axis=-1)


VORTEX_EPS = 10.0
VORTEX_T0 = 10.0
VORTEX_V0 = (1.0, 1.0)
VORTEX_BOUNDS = (-5.0, 5.0)


def ic_isentropic_vortex(x, y, gas: GasModel = GasModel()):
    """Isentropic vortex centred at the origin on the background ``rho = 1, v = (1, 1), p = 10``."""
    g = gas.gamma
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    r2 = x * x + y * y
    T = VORTEX_T0 - (g - 1) * VORTEX_EPS ** 2 / (8 * g * np.pi ** 2) * np.exp(1 - r2)
    rho = (T / VORTEX_T0) ** (1 / (g - 1))
    amp = VORTEX_EPS / (2 * np.pi) * np.exp(0.5 * (1 - r2))
    v1 = VORTEX_V0[0] - amp * y
    v2 = VORTEX_V0[1] + amp * x
    p = rho * T
    return np.stack([rho, rho * v1, rho * v2, p / (g - 1) + 0.5 * rho * (v1 * v1 + v2 * v2)], axis=-1)


def exact_isentropic_vortex(t, x, y, gas: GasModel = GasModel()):
    """The initial vortex translated by ``v0 t`` with periodic wrap."""
    lo, hi = VORTEX_BOUNDS
    L = hi - lo
    xs = np.mod(np.asarray(x) - VORTEX_V0[0] * t - lo, L) + lo
    ys = np.mod(np.asarray(y) - VORTEX_V0[1] * t - lo, L) + lo
    return ic_isentropic_vortex(xs, ys, gas)


def ic_khi(x, y, gas: GasModel = GasModel(), perturb: bool = True):
    """Kelvin-Helmholtz shear layer on [-1, 1]^2 with ``p = 1``.

    ``perturb=False`` drops the shear profile, leaving a constant state.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    B = np.tanh(15 * y + 7.5) - np.tanh(15 * y - 7.5) if perturb else np.zeros_like(y)
    rho = 0.5 + 0.75 * B
    v1 = 0.5 * (B - 1)
    v2 = 0.1 * np.sin(2 * np.pi * x) if perturb else np.zeros_like(x)
    p = np.ones_like(rho)
    return np.stack([rho, rho * v1, rho * v2, p / (gas.gamma - 1) + 0.5 * rho * (v1 * v1 + v2 * v2)],
                    axis=-1)


# }}}


# {{{ records


def fmt(value) -> str:
    """Shortest round-trip text for CSV cells."""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    if value is None:
        return ""
    return str(value)


@dataclass
class RunReport:
    columns: tuple[str, ...]
    rows: list[dict] = field(default_factory=list)

    def add(self, **row) -> None:
        self.rows.append(row)

    def to_csv(self, path: str | Path | None = None) -> str:
        buf = io.StringIO()
        buf.write(",".join(self.columns) + "\n")
        for row in self.rows:
            buf.write(",".join(fmt(row.get(c)) for c in self.columns) + "\n")
        text = buf.getvalue()
        if path is not None:
            Path(path).write_text(text)
        return text

    def column(self, name: str) -> list:
        return [row.get(name) for row in self.rows]


CONVERGENCE_COLUMNS = ("case", "splitting", "order", "K", "N", "dofs", "l2_error", "eoc")
KHI_COLUMNS = ("splitting", "order", "K", "N", "final_time", "crashed", "loc_x", "loc_y", "reason")


@dataclass
class CrashRecord:
    final_time: float
    crashed: bool
    t_end: float
    reason: str = ""
    location: dict | None = None

    def __post_init__(self) -> None:
        if self.crashed != (self.final_time < self.t_end):
            raise ValueError("crash flag must agree with final time < t_end")

    @property
    def at_interface(self) -> bool | None:
        return None if not self.location else self.location.get("interface")


@dataclass
class ExperimentSpec:
    """One sweep: ``ladder`` holds ``(order, K, N)`` cells.

    ``K`` and ``N`` count elements and nodes per element in each direction.
    ``operator`` selects the element operators: ``"builtin"`` (order 1, 2
    bounded elements; higher orders use derived periodic stencils on one
    block of ``K N`` nodes), ``"periodic"`` (one periodic block of ``K N``
    nodes for every order) or a path to an operator table for bounded
    elements.
    """

    case: str
    ladder: list[tuple[int, int, int]]
    splitting: str = "lax_friedrichs"
    integrator: IntegratorConfig | None = None
    output: str | None = None
    operator: str = "builtin"
    mode: str = "dg"
    jobs: int = 1
    log_every: int = 10

    def __post_init__(self) -> None:
        if self.case not in CASES:
            raise ValueError(f"unknown case {self.case!r}")
        if not self.ladder:
            raise ValueError("ladder is empty")
        for cell in self.ladder:
            if len(cell) != 3 or min(cell) < 1:
                raise ValueError(f"bad ladder cell {cell}")


# }}}


# {{{ layouts


def element_operator(order: int, N: int, operator: str = "builtin") -> OperatorPair | None:
    """Reference bounded element on [0, 1], or None when a periodic block is required."""
    if operator not in ("builtin", "periodic"):
        pair = load_operator_table(operator)
        if pair.periodic or pair.n_nodes != N:
            raise ValueError(f"table {operator} does not describe a bounded {N}-node element")
        return pair
    if operator == "periodic":
        return None
    if order == 1:
        return make_order1_bounded(N, 0.0, 1.0)
    if order == 2:
        return make_order2_bounded(N, 0.0, 1.0)
    return None


def periodic_block(order: int, n: int, xmin: float, xmax: float) -> OperatorPair:
    if order == 2:
        return make_order2_periodic(n, xmin, xmax)
    return derive_periodic_upwind(order, n, xmin, xmax)


def build_layout(order: int, K: int, N: int, bounds, dim: int = 1,
                 operator: str = "builtin") -> MeshLayout:
    ref = element_operator(order, N, operator)
    if ref is None:
        lo, hi = bounds
        block = periodic_block(order, K * N, 0.0, hi - lo)
        refs, elements = block, 1
    else:
        refs, elements = ref, K
    if dim == 1:
        return MeshLayout.from_reference(refs, elements, bounds, True)
    return MeshLayout.from_reference((refs, refs), (elements, elements), (bounds, bounds), True)


# }}}


# {{{ convergence


def _convergence_cell(args):
    case, order, K, N, splitting, operator, cfg = args
    if case == "advection_convergence":
        layout = build_layout(order, K, N, (-1.0, 1.0), operator=operator)
        semi = Semidiscretization(layout, Equation("advection"), splitting,
                                  lam=1.0 if splitting == "lax_friedrichs" else None)
        u0 = semi.project(ic_advection_sine)
        t_end = cfg.t_end if cfg else 5.0
        exact, variables = exact_advection_sine, None
    else:
        layout = build_layout(order, K, N, (0.0, 2.0), operator=operator)
        eq = Equation("euler")
        semi = Semidiscretization(layout, eq, splitting,
                                  source=lambda t, x: manufactured_source_euler(t, x, eq.gas))
        u0 = ic_euler_manufactured(0.0, layout.coordinates(), eq.gas)
        t_end = cfg.t_end if cfg else 2.0
        exact, variables = (lambda t, x: ic_euler_manufactured(t, x, eq.gas)), (0,)
    if cfg is None:
        cfg = IntegratorConfig(t_end=t_end, scheme="ssp43_adaptive", abstol=1e-8, reltol=1e-8)
    res = integrate(semi, u0, cfg)
    if res.crashed:
        return math.nan, res.crash
    return l2_error(res.u, exact, layout, res.t, variables), None


def _map(fn, items, jobs: int):
    if jobs <= 1 or len(items) <= 1:
        return [fn(it) for it in items]
    with ProcessPoolExecutor(max_workers=min(jobs, len(items))) as pool:
        return list(pool.map(fn, items))


def run_convergence(spec: ExperimentSpec) -> RunReport:
    """Errors at the final time and EOCs for every ladder cell.

    EOCs are computed along the ladder in the given order with
    ``h = 1 / (K N)``. Euler errors are those of the density.
    """
    if spec.case not in ("advection_convergence", "euler_manufactured"):
        raise ValueError("run_convergence handles advection_convergence and euler_manufactured")
    jobs = [(spec.case, o, K, N, spec.splitting, spec.operator, spec.integrator)
            for o, K, N in spec.ladder]
    results = _map(_convergence_cell, jobs, spec.jobs)
    errors = [r[0] for r in results]
    rates = eoc(errors, [1.0 / (K * N) for _, K, N in spec.ladder])
    report = RunReport(CONVERGENCE_COLUMNS)
    for (o, K, N), err, rate in zip(spec.ladder, errors, rates):
        report.add(case=spec.case, splitting=spec.splitting, order=o, K=K, N=N, dofs=K * N,
                   l2_error=err, eoc=None if math.isnan(rate) else rate)
    if spec.output:
        report.to_csv(spec.output)
    return report


def format_convergence_table(report: RunReport) -> str:
    lines = [f"{'K':>6} {'N':>6} {'error':>24} {'EOC':>20}"]
    for row in report.rows:
        lines.append(f"{row['K']:>6} {row['N']:>6} {fmt(row['l2_error']):>24} {fmt(row['eoc']):>20}")
    return "\n".join(lines)


# }}}


# {{{ 2D runs


def _crash_record(res, t_end: float) -> CrashRecord:
    if res.crash is None:
        return CrashRecord(res.t, False, t_end)
    return CrashRecord(res.t, True, t_end, res.crash.reason, res.crash.location)


def _khi_cell(args):
    order, K, N, splitting, operator, cfg, perturb = args
    layout = build_layout(order, K, N, (-1.0, 1.0), dim=2, operator=operator)
    eq = Equation("euler", dim=2)
    semi = Semidiscretization(layout, eq, splitting)
    X, Y = layout.coordinates()
    u0 = ic_khi(X, Y, eq.gas, perturb)
    res = integrate(semi, u0, IntegratorConfig(**{**cfg.__dict__, "on_underflow": "crash"}))
    return _crash_record(res, cfg.t_end)


def run_khi_sweep(spec: ExperimentSpec, perturb: bool = True) -> tuple[list[CrashRecord], RunReport]:
    """Final times of Kelvin-Helmholtz runs; crashes become records, never exceptions."""
    cfg = spec.integrator or IntegratorConfig(t_end=15.0, scheme="ssp43_adaptive",
                                              abstol=1e-6, reltol=1e-6)
    jobs = [(o, K, N, spec.splitting, spec.operator, cfg, perturb) for o, K, N in spec.ladder]
    records = _map(_khi_cell, jobs, spec.jobs)
    report = RunReport(KHI_COLUMNS)
    for (o, K, N), rec in zip(spec.ladder, records):
        loc = rec.location or {}
        report.add(splitting=spec.splitting, order=o, K=K, N=N, final_time=rec.final_time,
                   crashed=rec.crashed, loc_x=loc.get("x"), loc_y=loc.get("y"), reason=rec.reason)
    if spec.output:
        report.to_csv(spec.output)
    return records, report


@dataclass
class VortexResult:
    times: np.ndarray
    density_error: np.ndarray
    crash: CrashRecord
    functionals: dict[str, np.ndarray]

    def to_csv(self, path: str | Path | None = None) -> str:
        text = "t,value\n" + "".join(f"{fmt(t)},{fmt(e)}\n" for t, e in
                                     zip(self.times.tolist(), self.density_error.tolist()))
        if path is not None:
            Path(path).write_text(text)
        return text


def run_vortex(spec: ExperimentSpec) -> VortexResult:
    """Isentropic vortex with the density L2 error logged every ``log_every`` accepted steps."""
    order, K, N = spec.ladder[0]
    cfg = spec.integrator or IntegratorConfig(t_end=10.0, scheme="ssp43_adaptive",
                                              abstol=1e-6, reltol=1e-6)
    cfg = IntegratorConfig(**{**cfg.__dict__, "log_every": spec.log_every, "on_underflow": "crash"})
    layout = build_layout(order, K, N, VORTEX_BOUNDS, dim=2, operator=spec.operator)
    eq = Equation("euler", dim=2)
    semi = Semidiscretization(layout, eq, spec.splitting)
    X, Y = layout.coordinates()
    u0 = ic_isentropic_vortex(X, Y, eq.gas)

    def functionals(t, u):
        out = record_functionals(semi, u, t)
        out["density_error"] = l2_error(u, lambda s, x, y: exact_isentropic_vortex(s, x, y, eq.gas),
                                        layout, t, variables=(0,))
        return out

    res = integrate(semi, u0, cfg, functionals)
    t, err = res.log.series("density_error")
    result = VortexResult(t, err, _crash_record(res, cfg.t_end),
                          {k: np.array(v) for k, v in res.log.values.items()})
    if spec.output:
        result.to_csv(spec.output)
    return result


# }}}


def default_jobs() -> int:
    return os.cpu_count() or 1


DG_LADDER_ORDER2 = [(2, K, 20) for K in (1, 2, 4, 8, 16, 32, 64, 128)]
FD_LADDER_ORDER2 = [(2, 4, N) for N in (10, 20, 40, 80, 160, 320)]
KHI_DESK_LADDER = [(2, 1, 16), (2, 4, 16)]


def ladder_for(order: int, mode: str, Ks: Sequence[int] | None = None,
               Ns: Sequence[int] | None = None) -> list[tuple[int, int, int]]:
    """Default refinement ladder: ``dg`` refines K at fixed N, ``fd`` refines N at fixed K."""
    if mode == "dg":
        return [(order, K, (Ns or [20])[0]) for K in (Ks or (1, 2, 4, 8, 16, 32, 64, 128))]
    if mode == "fd":
        if order <= 2:
            return [(order, (Ks or [4])[0], N) for N in (Ns or (10, 20, 40, 80, 160, 320))]
        return [(order, 1, N) for N in (Ns or (20, 40, 80, 160))]
    raise ValueError(f"unknown ladder mode {mode!r}")

