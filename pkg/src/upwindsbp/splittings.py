"""Conservation laws and flux vector splittings ``f = f+ + f-``.

All functions are vectorized: states are arrays whose last axis holds the
conserved variables (``(rho, rho v, rho e)`` in 1D, ``(rho, rho v1, rho v2,
rho e)`` in 2D; scalar laws use a trailing axis of length one or plain
arrays). The Jacobians of ``f+`` have nonnegative eigenvalues and those of
``f-`` nonpositive ones.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from upwindsbp.dual import value_of


class InadmissibleStateError(ValueError):
    """A state with nonpositive density or pressure (or NaN) was encountered.

    ``index`` is the position of the first offending node within the
    array passed to the splitting; the semidiscretization adds the element,
    node and coordinates as ``location``.
    """

    def __init__(self, reason: str, index: tuple = (), value: float = float("nan")) -> None:
        self.reason = reason
        self.index = tuple(int(i) for i in index)
        self.value = value
        self.location: dict | None = None
        super().__init__(self._message())

    def _message(self) -> str:
        msg = f"{self.reason} ({self.value:.6g}) at index {self.index}"
        if self.location:
            msg += f", location {self.location}"
        return msg

    def with_location(self, location: dict) -> "InadmissibleStateError":
        self.location = location
        self.args = (self._message(),)
        return self


@dataclass(frozen=True)
class GasModel:
    gamma: float = 1.4

    def __post_init__(self) -> None:
        if not self.gamma > 1:
            raise ValueError(f"gamma must exceed 1, got {self.gamma}")


@dataclass
class SplittingEval:
    fplus: np.ndarray
    fminus: np.ndarray
    max_abs_speed: float


# {{{ Euler helpers


def _check_positive(q, reason: str) -> None:
    v = value_of(q)
    bad = ~(v > 0)
    if np.any(bad):
        idx = np.argwhere(bad)[0]
        raise InadmissibleStateError(reason, tuple(idx), float(v[tuple(idx)]))


def _euler_primitives(u, gas: GasModel, dim: int):
    """Density, velocity components, pressure and sound speed."""
    if value_of(u).shape[-1] != dim + 2:
        raise ValueError(f"expected {dim + 2} conserved variables, got shape {value_of(u).shape}")
    if np.any(np.isnan(value_of(u))):
        idx = np.argwhere(np.isnan(value_of(u)))[0][:-1]
        raise InadmissibleStateError("nan", tuple(idx))
    rho = u[..., 0]
    _check_positive(rho, "negative density")
    vel = [u[..., 1 + d] / rho for d in range(dim)]
    kinetic = 0.5 * rho * sum(v * v for v in vel)
    p = (gas.gamma - 1) * (u[..., dim + 1] - kinetic)
    _check_positive(p, "negative pressure")
    a = np.sqrt(gas.gamma * p / rho)
    return rho, vel, p, a


def pressure(u, gas: GasModel = GasModel()):
    dim = value_of(u).shape[-1] - 2
    rho = u[..., 0]
    kinetic = 0.5 * sum(u[..., 1 + d] ** 2 for d in range(dim)) / rho
    return (gas.gamma - 1) * (u[..., dim + 1] - kinetic)


def euler_flux(u, gas: GasModel = GasModel(), direction: int = 0):
    dim = value_of(u).shape[-1] - 2
    rho, vel, p, _ = _euler_primitives(u, gas, dim)
    vn = vel[direction]
    rows = [rho * vn]
    for d in range(dim):
        row = u[..., 1 + d] * vn
        if d == direction:
            row = row + p
        rows.append(row)
    rows.append((u[..., dim + 1] + p) * vn)
    return np.stack(rows, axis=-1)


# }}}


# {{{ scalar splittings


def lax_friedrichs_split(u, f: Callable, lam: float) -> SplittingEval:
    """Global Lax-Friedrichs splitting ``f± = (f(u) ± lam u)/2``."""
    fu = f(u)
    return SplittingEval(0.5 * (fu + lam * u), 0.5 * (fu - lam * u), float(lam))


def burgers_flux(u):
    return 0.5 * u * u


def burgers_llf_split(u) -> SplittingEval:
    """Local Lax-Friedrichs splitting of Burgers' flux, ``f± = (u²/2 ± |u| u)/2``."""
    f = 0.5 * u * u
    d = np.abs(u) * u
    speed = float(np.max(np.abs(value_of(u)))) if np.size(value_of(u)) else 0.0
    return SplittingEval(0.5 * (f + d), 0.5 * (f - d), speed)


def fully_upwind_split(u, f: Callable) -> SplittingEval:
    """Assign the whole flux to ``f+``; valid for nonnegative wave speeds."""
    fu = f(u)
    return SplittingEval(fu, 0.0 * fu, float("nan"))


# }}}


# {{{ Euler splittings


def _steger_warming(u, gas: GasModel, dim: int, direction: int) -> SplittingEval:
    g = gas.gamma
    rho, vel, p, a = _euler_primitives(u, gas, dim)
    vn = vel[direction]
    vsq = sum(v * v for v in vel)
    H = 0.5 * vsq + a * a / (g - 1)
    lam = (vn - a, vn, vn + a)

    def part(sign):
        l1, l2, l3 = (0.5 * (lk + sign * np.abs(lk)) for lk in lam)
        c = rho / (2 * g)
        rows = [c * (l1 + 2 * (g - 1) * l2 + l3)]
        for d in range(dim):
            if d == direction:
                rows.append(c * ((vn - a) * l1 + 2 * (g - 1) * vn * l2 + (vn + a) * l3))
            else:
                rows.append(c * vel[d] * (l1 + 2 * (g - 1) * l2 + l3))
        rows.append(c * ((H - vn * a) * l1 + (g - 1) * vsq * l2 + (H + vn * a) * l3))
        return np.stack(rows, axis=-1)

    speed = float(np.max(np.abs(value_of(vn)) + value_of(a)))
    return SplittingEval(part(+1), part(-1), speed)


def _van_leer_haenel(u, gas: GasModel, dim: int, direction: int,
                     mach_switch: bool = False) -> SplittingEval:
    g = gas.gamma
    rho, vel, p, a = _euler_primitives(u, gas, dim)
    vn = vel[direction]
    mach = vn / a
    H = 0.5 * sum(v * v for v in vel) + a * a / (g - 1)
    carried = [1.0 + 0.0 * rho] + list(vel) + [H]

    def part(sign):
        mass = sign * rho * a * (mach + sign) ** 2 / 4
        p_part = 0.5 * (1 + sign * g * mach) * p
        rows = []
        for k, c in enumerate(carried):
            row = mass * c
            if k == 1 + direction:
                row = row + p_part
            rows.append(row)
        return np.stack(rows, axis=-1)

    fp, fm = part(+1), part(-1)
    # the polynomial split is used at every Mach number unless asked otherwise;
    # switching to pure upwinding for |M| >= 1 restores the eigenvalue signs there
    m = value_of(mach)[..., None]
    if mach_switch and np.any(np.abs(m) >= 1):
        flux = euler_flux(u, gas, direction)
        zero = 0.0 * flux
        fp = np.where(m >= 1, flux, np.where(m <= -1, zero, fp))
        fm = np.where(m >= 1, zero, np.where(m <= -1, flux, fm))
    speed = float(np.max(np.abs(value_of(vn)) + value_of(a)))
    return SplittingEval(fp, fm, speed)


def steger_warming_1d(u, gas: GasModel = GasModel()) -> SplittingEval:
    """Steger-Warming splitting of the 1D Euler flux."""
    return _steger_warming(u, gas, 1, 0)


def van_leer_haenel_1d(u, gas: GasModel = GasModel(), mach_switch: bool = False) -> SplittingEval:
    """Van Leer-Hänel splitting with the Liou-Steffen pressure split, 1D.

    ``f+ + f- = f`` holds for every Mach number. Without ``mach_switch`` the
    split Jacobians lose their sign property for ``|M| > 1``.
    """
    return _van_leer_haenel(u, gas, 1, 0, mach_switch)


def euler_split_2d(u, direction: int, kind: str, gas: GasModel = GasModel(),
                   lam: float | None = None) -> SplittingEval:
    """Directional splitting of the 2D Euler flux along axis ``direction`` (0 = x)."""
    if direction not in (0, 1):
        raise ValueError(f"direction must be 0 or 1, got {direction}")
    if kind == "steger_warming":
        return _steger_warming(u, gas, 2, direction)
    if kind == "van_leer_haenel":
        return _van_leer_haenel(u, gas, 2, direction)
    if kind == "van_leer_haenel_upwind":
        return _van_leer_haenel(u, gas, 2, direction, mach_switch=True)
    if kind == "lax_friedrichs":
        if lam is None:
            raise ValueError("lax_friedrichs splitting needs a wave speed bound lam")
        return lax_friedrichs_split(u, lambda w: euler_flux(w, gas, direction), lam)
    raise ValueError(f"unknown splitting {kind!r}")


# }}}


# {{{ equations


@dataclass(frozen=True)
class Equation:
    """A conservation law: ``advection`` (unit speed), ``burgers`` or ``euler``."""

    kind: str
    dim: int = 1
    gas: GasModel = GasModel()

    def __post_init__(self) -> None:
        if self.kind not in ("advection", "burgers", "euler"):
            raise ValueError(f"unknown equation {self.kind!r}")
        if self.dim not in (1, 2):
            raise ValueError("only 1D and 2D are supported")

    @property
    def n_vars(self) -> int:
        return self.dim + 2 if self.kind == "euler" else 1

    def flux(self, u, direction: int = 0):
        return physical_flux(u, self, direction)


def physical_flux(u, equation: Equation | str, direction: int = 0, gas: GasModel = GasModel()):
    """Exact flux; scalar laws use unit speed in every direction."""
    if isinstance(equation, str):
        kind = equation
    else:
        kind, gas = equation.kind, equation.gas
    if kind == "advection":
        return 1.0 * u
    if kind == "burgers":
        return burgers_flux(u)
    if kind == "euler":
        return euler_flux(u, gas, direction)
    raise ValueError(f"unknown equation {kind!r}")


SPLITTINGS = ("lax_friedrichs", "llf", "fully_upwind", "steger_warming", "van_leer_haenel",
              "van_leer_haenel_upwind")


def make_splitting(name: str, equation: Equation, lam: float | None = None):
    """Return ``split(u, direction) -> SplittingEval`` for ``equation``."""
    kind = equation.kind
    if name == "lax_friedrichs":
        if lam is None:
            lam = 1.0 if kind == "advection" else None
        if lam is None:
            raise ValueError("lax_friedrichs splitting needs lam")
        return lambda u, d=0: lax_friedrichs_split(u, lambda w: physical_flux(w, equation, d), lam)
    if name == "fully_upwind":
        if kind == "euler":
            raise ValueError("fully upwind splitting is only defined for scalar laws")
        return lambda u, d=0: fully_upwind_split(u, lambda w: physical_flux(w, equation, d))
    if name == "llf":
        if kind != "burgers":
            raise ValueError("the local Lax-Friedrichs splitting is implemented for Burgers")
        return lambda u, d=0: burgers_llf_split(u)
    if name in ("steger_warming", "van_leer_haenel", "van_leer_haenel_upwind"):
        if kind != "euler":
            raise ValueError(f"{name} splitting needs the Euler equations")
        if name == "steger_warming":
            return lambda u, d=0: _steger_warming(u, equation.gas, equation.dim, d)
        switch = name == "van_leer_haenel_upwind"
        return lambda u, d=0: _van_leer_haenel(u, equation.gas, equation.dim, d, switch)
    raise ValueError(f"unknown splitting {name!r}; choose from {SPLITTINGS}")


# }}}
