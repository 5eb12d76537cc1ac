"""Explicit Runge-Kutta time integration for the method of lines."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from upwindsbp.splittings import InadmissibleStateError


class StepSizeUnderflowError(RuntimeError):
    """The adaptive controller drove the step size below ``1e-12 * t_end``."""

    def __init__(self, t: float, dt: float) -> None:
        super().__init__(f"step size {dt:.3e} underflowed at t = {t:.6g}")
        self.t = t
        self.dt = dt


@dataclass(frozen=True)
class Tableau:
    A: np.ndarray
    b: np.ndarray
    c: np.ndarray
    b_embedded: np.ndarray | None = None
    order: int = 0
    embedded_order: int = 0


RK4 = Tableau(
    A=np.array([[0, 0, 0, 0], [0.5, 0, 0, 0], [0, 0.5, 0, 0], [0, 0, 1, 0]], dtype=float),
    b=np.array([1 / 6, 1 / 3, 1 / 3, 1 / 6]),
    c=np.array([0, 0.5, 0.5, 1]),
    order=4,
)

# Shu-Osher SSPRK(3,3) with Heun's method as embedded second-order solution
SSP33 = Tableau(
    A=np.array([[0, 0, 0], [1, 0, 0], [0.25, 0.25, 0]]),
    b=np.array([1 / 6, 1 / 6, 2 / 3]),
    c=np.array([0, 1, 0.5]),
    b_embedded=np.array([0.5, 0.5, 0.0]),
    order=3,
    embedded_order=2,
)

# four-stage SSPRK(4,3) (SSP coefficient 2); the embedded weights use the first three stages
SSP43 = Tableau(
    A=np.array([[0, 0, 0, 0], [0.5, 0, 0, 0], [0.5, 0.5, 0, 0], [1 / 6, 1 / 6, 1 / 6, 0]]),
    b=np.array([1 / 6, 1 / 6, 1 / 6, 1 / 2]),
    c=np.array([0, 0.5, 1, 0.5]),
    b_embedded=np.array([1 / 3, 1 / 3, 1 / 3, 0]),
    order=3,
    embedded_order=2,
)

SCHEMES = {"rk4_fixed": RK4, "ssp33_adaptive": SSP33, "ssp43_adaptive": SSP43}


@dataclass
class IntegratorConfig:
    """Time integration settings.

    ``rk4_fixed`` needs ``dt``; the adaptive SSP schemes use ``abstol`` and
    ``reltol`` with a PI step size controller. Functionals are logged every
    ``log_every`` accepted steps. ``on_underflow`` is ``"raise"`` (default) or
    ``"crash"``, which ends the run with a crash event instead.
    """

    t_end: float
    scheme: str = "ssp43_adaptive"
    dt: float | None = None
    abstol: float = 1.0e-6
    reltol: float = 1.0e-6
    t_start: float = 0.0
    log_every: int = 10
    dt_max: float | None = None
    max_steps: int = 10_000_000
    on_underflow: str = "raise"

    def __post_init__(self) -> None:
        if self.scheme not in SCHEMES:
            raise ValueError(f"unknown scheme {self.scheme!r}; choose from {sorted(SCHEMES)}")
        if not self.t_end > self.t_start:
            raise ValueError("t_end must exceed t_start")
        if self.scheme == "rk4_fixed":
            if self.dt is None or not self.dt > 0:
                raise ValueError("rk4_fixed needs a positive dt")
        elif not (self.abstol > 0 and self.reltol > 0):
            raise ValueError("adaptive schemes need positive tolerances")
        if self.log_every < 1:
            raise ValueError("log_every must be positive")
        if self.on_underflow not in ("raise", "crash"):
            raise ValueError("on_underflow must be 'raise' or 'crash'")


@dataclass
class TimeSeriesLog:
    times: list[float] = field(default_factory=list)
    values: dict[str, list[float]] = field(default_factory=dict)
    accepted: int = 0
    rejected: int = 0

    def record(self, t: float, entry: dict[str, float]) -> None:
        if self.times and t <= self.times[-1]:
            return
        self.times.append(float(t))
        for key, val in entry.items():
            self.values.setdefault(key, []).append(float(val))

    def series(self, name: str) -> tuple[np.ndarray, np.ndarray]:
        return np.array(self.times), np.array(self.values[name])


@dataclass
class CrashEvent:
    t: float
    reason: str
    location: dict | None = None


@dataclass
class IntegrationResult:
    u: np.ndarray
    t: float
    log: TimeSeriesLog
    crash: CrashEvent | None = None

    @property
    def crashed(self) -> bool:
        return self.crash is not None


def _stages(rhs, tab: Tableau, t: float, u: np.ndarray, dt: float, k0=None) -> list[np.ndarray]:
    ks: list[np.ndarray] = []
    for i in range(len(tab.b)):
        if i == 0 and k0 is not None:
            ks.append(k0)
            continue
        y = u
        for j in range(i):
            if tab.A[i, j] != 0:
                y = y + (dt * tab.A[i, j]) * ks[j]
        ks.append(rhs(t + tab.c[i] * dt, y))
    return ks


def _combine(u, ks, weights, dt):
    out = u
    for w, k in zip(weights, ks):
        if w != 0:
            out = out + (dt * w) * k
    return out


def _error_norm(e, u, unew, abstol, reltol) -> float:
    sc = abstol + reltol * np.maximum(np.abs(u), np.abs(unew))
    return float(np.sqrt(np.mean((e / sc) ** 2)))


def _initial_step(rhs, t, u, f0, order, abstol, reltol) -> float:
    # error-based starting step heuristic (Hairer, Norsett, Wanner)
    sc = abstol + reltol * np.abs(u)
    d0 = np.sqrt(np.mean((u / sc) ** 2))
    d1 = np.sqrt(np.mean((f0 / sc) ** 2))
    h0 = 1e-6 if d0 < 1e-5 or d1 < 1e-5 else 0.01 * d0 / d1
    f1 = rhs(t + h0, u + h0 * f0)
    d2 = np.sqrt(np.mean(((f1 - f0) / sc) ** 2)) / h0
    if max(d1, d2) <= 1e-15:
        h1 = max(1e-6, h0 * 1e-3)
    else:
        h1 = (0.01 / max(d1, d2)) ** (1.0 / (order + 1))
    return float(min(100 * h0, h1))


def integrate(rhs: Callable, u0: np.ndarray, cfg: IntegratorConfig,
              functionals: Callable[[float, np.ndarray], dict] | None = None) -> IntegrationResult:
    """Advance ``du/dt = rhs(t, u)`` from ``cfg.t_start`` to ``cfg.t_end``.

    An :class:`~upwindsbp.splittings.InadmissibleStateError` raised by the
    right-hand side, or a NaN in the state, ends the run with a
    :class:`CrashEvent` instead of an exception.
    """
    tab = SCHEMES[cfg.scheme]
    log = TimeSeriesLog()
    t = cfg.t_start
    u = np.array(u0, dtype=np.float64)
    if functionals is not None:
        log.record(t, functionals(t, u))

    def crash(reason, location=None):
        if functionals is not None and (not log.times or log.times[-1] < t):
            log.record(t, functionals(t, u))
        return IntegrationResult(u, t, log, CrashEvent(t, reason, location))

    adaptive = tab.b_embedded is not None
    q = min(tab.order, tab.embedded_order) + 1
    beta1, beta2, safety = 0.7 / q, 0.4 / q, 0.9
    err_prev = 1.0

    try:
        f0 = rhs(t, u)
        if adaptive:
            dt = cfg.dt or _initial_step(rhs, t, u, f0, tab.order, cfg.abstol, cfg.reltol)
        else:
            dt = cfg.dt
    except InadmissibleStateError as err:
        return crash(err.reason, err.location)

    steps = 0
    while t < cfg.t_end:
        if steps >= cfg.max_steps:
            raise RuntimeError(f"exceeded {cfg.max_steps} steps at t = {t}")
        steps += 1
        if cfg.dt_max is not None:
            dt = min(dt, cfg.dt_max)
        last = t + dt >= cfg.t_end * (1 - 1e-14)
        h = cfg.t_end - t if last else dt
        if adaptive and h < 1e-12 * cfg.t_end:
            if cfg.on_underflow == "crash":
                return crash("dt_underflow")
            raise StepSizeUnderflowError(t, h)

        try:
            ks = _stages(rhs, tab, t, u, h, f0)
        except InadmissibleStateError as err:
            if adaptive and err.reason == "nan":
                # a stage blew up: treat like a failed error test
                log.rejected += 1
                dt = 0.2 * h
                continue
            return crash(err.reason, err.location)
        unew = _combine(u, ks, tab.b, h)

        if adaptive:
            e = _combine(np.zeros_like(u), ks, tab.b - tab.b_embedded, h)
            err = _error_norm(e, u, unew, cfg.abstol, cfg.reltol)
            if not np.isfinite(err) or err > 1.0:
                log.rejected += 1
                factor = 0.2 if not np.isfinite(err) else max(0.2, safety * err ** (-1.0 / q))
                dt = h * factor
                continue
            err = max(err, 1e-10)
            factor = safety * err ** (-beta1) * err_prev ** beta2
            factor = min(5.0, max(0.2, factor))
            err_prev = err
            dt_next = h * factor
        else:
            dt_next = dt

        if not np.all(np.isfinite(unew)):
            return crash("nan")
        t = cfg.t_end if last else t + h
        u = unew
        log.accepted += 1
        dt = dt_next

        try:
            f0 = rhs(t, u) if t < cfg.t_end else None
        except InadmissibleStateError as err:
            return crash(err.reason, err.location)
        if functionals is not None and (log.accepted % cfg.log_every == 0 or t >= cfg.t_end):
            log.record(t, functionals(t, u))

    return IntegrationResult(u, t, log)


def record_functionals(semi, u: np.ndarray, t: float = 0.0) -> dict[str, float]:
    """Mass per variable, ``||u||_M^2`` and (Euler) kinetic energy via the SBP quadrature."""
    w = semi.layout.weights()[..., None]
    out = {}
    mass = (w * u).reshape(-1, u.shape[-1]).sum(axis=0)
    for i, m in enumerate(mass):
        out[f"mass_{i}"] = float(m)
    out["energy"] = float((w * u * u).sum())
    if semi.equation.kind == "euler":
        rho = u[..., 0]
        mom2 = sum(u[..., 1 + d] ** 2 for d in range(semi.equation.dim))
        out["kinetic_energy"] = float((w[..., 0] * 0.5 * mom2 / rho).sum())
    return out


def stable_dt(semi, u: np.ndarray, cfl: float = 0.5) -> float:
    """CFL-type step ``cfl * min dx / max speed`` for fixed-step runs."""
    speed = 0.0
    for d in range(semi.layout.dim):
        ev = semi.split(u, d)
        s = ev.max_abs_speed
        speed = max(speed, 1.0 if not math.isfinite(s) else s)
    dx = min(op.dx for op in semi.layout.operators)
    return cfl * dx / max(speed, 1e-14)
