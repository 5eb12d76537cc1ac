"""Right-hand sides of upwind SBP semidiscretizations.

On every element the flux is split nodewise and differentiated as

    du/dt = -D+ f-(u) - D- f+(u) + SAT,

where the SAT couples neighboring elements with the upwind numerical flux
``f*(ul, ur) = f+(ul) + f-(ur)`` of the same splitting. 2D layouts apply
the 1D construction line by line in each direction.

State layout: ``(K, N, n_vars)`` in 1D and ``(Kx, Nx, Ky, Ny, n_vars)`` in
2D, i.e. element and node index per direction followed by the variables.
Interface coordinates shared by two elements are stored once per element.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from upwindsbp.dual import Dual, value_of
from upwindsbp.operators import OperatorPair, couple_periodic
from upwindsbp.splittings import (
    Equation,
    GasModel,
    InadmissibleStateError,
    make_splitting,
)


@dataclass(frozen=True, eq=False)
class MeshLayout:
    """Structured mesh of ``K`` elements per direction sharing one element operator.

    ``operators[d]`` is the operator of a single element in direction ``d``,
    already scaled to the element length and living on ``[0, h]``.
    """

    operators: tuple[OperatorPair, ...]
    elements: tuple[int, ...]
    bounds: tuple[tuple[float, float], ...]
    periodic: tuple[bool, ...]

    def __post_init__(self) -> None:
        dim = len(self.operators)
        if not (dim == len(self.elements) == len(self.bounds) == len(self.periodic)):
            raise ValueError("per-direction settings have different lengths")
        for op, K, (lo, hi), per in zip(self.operators, self.elements, self.bounds, self.periodic):
            if K < 1:
                raise ValueError("need at least one element per direction")
            if op.periodic and (K != 1 or not per):
                raise ValueError("periodic operators require a single periodic block")
            h = (hi - lo) / K
            if abs(op.grid.length - h) > 1e-12 * h:
                raise ValueError(f"element operator has length {op.grid.length}, expected {h}")

    @classmethod
    def from_reference(cls, refs: OperatorPair | Sequence[OperatorPair],
                       elements: int | Sequence[int],
                       bounds: Sequence[float] | Sequence[Sequence[float]],
                       periodic: bool | Sequence[bool] = True) -> "MeshLayout":
        """Build a layout by rescaling reference operators to the element size.

        Scalars describe a 1D mesh; sequences of length two a 2D tensor mesh.
        """
        if isinstance(refs, OperatorPair):
            refs, elements, bounds = (refs,), (elements,), (tuple(bounds),)
            periodic = (periodic,)
        else:
            refs = tuple(refs)
            elements = tuple(elements)
            bounds = tuple(tuple(b) for b in bounds)
            if isinstance(periodic, bool):
                periodic = (periodic,) * len(refs)
        ops = []
        for ref, K, (lo, hi) in zip(refs, elements, bounds):
            h = (hi - lo) / K
            ops.append(ref.rescaled(0.0, h))
        return cls(tuple(ops), tuple(elements), tuple(bounds), tuple(periodic))

    @property
    def dim(self) -> int:
        return len(self.operators)

    @property
    def nodes_per_element(self) -> tuple[int, ...]:
        return tuple(op.n_nodes for op in self.operators)

    def state_shape(self, n_vars: int) -> tuple[int, ...]:
        shape: tuple[int, ...] = ()
        for K, N in zip(self.elements, self.nodes_per_element):
            shape += (K, N)
        return shape + (n_vars,)

    def total_nodes(self) -> int:
        return int(np.prod([K * N for K, N in zip(self.elements, self.nodes_per_element)]))

    def dofs_per_direction(self) -> tuple[int, ...]:
        return tuple(K * N for K, N in zip(self.elements, self.nodes_per_element))

    def coordinates_1d(self, d: int) -> np.ndarray:
        """Node coordinates of direction ``d`` with shape ``(K, N)``."""
        op, K, (lo, hi) = self.operators[d], self.elements[d], self.bounds[d]
        h = (hi - lo) / K
        return lo + h * np.arange(K)[:, None] + op.grid.nodes[None, :]

    def weights_1d(self, d: int) -> np.ndarray:
        return np.broadcast_to(self.operators[d].mass_diag, (self.elements[d],
                                                             self.operators[d].n_nodes)).copy()

    def coordinates(self):
        """Node coordinates: ``x`` of shape ``(K, N)`` in 1D, ``(X, Y)`` in 2D."""
        if self.dim == 1:
            return self.coordinates_1d(0)
        x, y = self.coordinates_1d(0), self.coordinates_1d(1)
        X = np.broadcast_to(x[:, :, None, None], self.state_shape(1)[:-1])
        Y = np.broadcast_to(y[None, None, :, :], self.state_shape(1)[:-1])
        return X.copy(), Y.copy()

    def weights(self) -> np.ndarray:
        """Tensor-product quadrature weights with the node shape of the state."""
        if self.dim == 1:
            return self.weights_1d(0)
        wx, wy = self.weights_1d(0), self.weights_1d(1)
        return wx[:, :, None, None] * wy[None, None, :, :]

    def domain_volume(self) -> float:
        return float(np.prod([hi - lo for lo, hi in self.bounds]))

    def is_interface_node(self, index: Sequence[int]) -> bool:
        """Whether a node index lies on an element boundary that couples via SATs."""
        for d in range(self.dim):
            op = self.operators[d]
            if op.periodic:
                continue
            i = index[2 * d + 1]
            if i in (0, op.n_nodes - 1):
                return True
        return False


def global_operator(layout: MeshLayout, direction: int = 0) -> OperatorPair:
    """Periodic global operator equivalent to the SAT coupling of one direction."""
    op = layout.operators[direction]
    if op.periodic:
        return op
    if not layout.periodic[direction]:
        raise ValueError("global operators are assembled for periodic layouts only")
    lo = layout.bounds[direction][0]
    h = op.grid.length
    blocks = [op.rescaled(lo + k * h, lo + (k + 1) * h) for k in range(layout.elements[direction])]
    return couple_periodic(blocks)


BoundaryFn = Callable[[float, int], tuple]
SourceFn = Callable[..., np.ndarray]


@dataclass(eq=False)
class Semidiscretization:
    """Binds a mesh layout, a conservation law and a flux splitting.

    ``boundary(t, direction)`` returns the outer states ``(left, right)``
    for non-periodic directions; they enter through the same upwind SAT as
    element interfaces. ``source(t, *coords)`` returns an array with the
    shape of the state.
    """

    layout: MeshLayout
    equation: Equation
    splitting: str
    lam: float | None = None
    source: SourceFn | None = None
    boundary: BoundaryFn | None = None
    _split: Callable = field(init=False, repr=False)

    def __post_init__(self) -> None:
        if self.layout.dim != self.equation.dim:
            raise ValueError("layout and equation dimensions differ")
        self._split = make_splitting(self.splitting, self.equation, self.lam)

    @property
    def n_vars(self) -> int:
        return self.equation.n_vars

    @property
    def state_shape(self) -> tuple[int, ...]:
        return self.layout.state_shape(self.n_vars)

    def project(self, fn: Callable) -> np.ndarray:
        """Sample ``fn(*coords)`` at the nodes as a state array."""
        coords = self.layout.coordinates()
        if self.layout.dim == 1:
            coords = (coords,)
        vals = np.asarray(fn(*coords), dtype=np.float64)
        if vals.shape == coords[0].shape:
            vals = vals[..., None]
        return np.broadcast_to(vals, self.state_shape).copy()

    # {{{ rhs

    def _locate(self, err: InadmissibleStateError, t: float) -> InadmissibleStateError:
        idx = err.index[: 2 * self.layout.dim]
        if len(idx) < 2 * self.layout.dim:
            return err.with_location({"t": t})
        loc = {"t": t, "element": tuple(idx[0::2]), "node": tuple(idx[1::2])}
        coords = self.layout.coordinates()
        if self.layout.dim == 1:
            loc["x"] = float(coords[idx])
        else:
            loc["x"] = float(coords[0][idx])
            loc["y"] = float(coords[1][idx])
        loc["interface"] = self.layout.is_interface_node(idx)
        return err.with_location(loc)

    def split(self, u, direction: int = 0):
        return self._split(u, direction)

    def rhs(self, t: float, u):
        """Time derivative of the state; ``u`` is not modified."""
        if value_of(u).shape != self.state_shape:
            raise ValueError(f"state has shape {value_of(u).shape}, expected {self.state_shape}")
        du = None
        for d in range(self.layout.dim):
            try:
                ev = self._split(u, d)
                ghosts = None
                if not self.layout.periodic[d]:
                    if self.boundary is None:
                        raise ValueError(f"direction {d} is not periodic and has no boundary data")
                    left, right = self.boundary(t, d)
                    ghosts = (self._split(np.asarray(left, dtype=float), d).fplus,
                              self._split(np.asarray(right, dtype=float), d).fminus)
            except InadmissibleStateError as err:
                raise self._locate(err, t) from None
            term = _directional(self.layout.operators[d], ev.fplus, ev.fminus,
                                2 * d, self.layout.periodic[d], ghosts)
            du = term if du is None else du + term
        if self.source is not None:
            coords = self.layout.coordinates()
            if self.layout.dim == 1:
                coords = (coords,)
            du = du + self.source(t, *coords)
        return du

    __call__ = rhs

    # }}}


def _directional(op: OperatorPair, fp, fm, elem_axis: int, periodic: bool, ghosts):
    """``-D+ f- - D- f+`` plus interface SATs along one direction."""
    if elem_axis != 0:
        fp = np.moveaxis(fp, (elem_axis, elem_axis + 1), (0, 1))
        fm = np.moveaxis(fm, (elem_axis, elem_axis + 1), (0, 1))

    out = -op.apply_plus(fm, axis=1) - op.apply_minus(fp, axis=1)
    if not op.periodic:
        inv_left = 1.0 / op.mass_diag[0]
        inv_right = 1.0 / op.mass_diag[-1]
        fm_left, fm_right = fm[:, 0], fm[:, -1]
        fp_left, fp_right = fp[:, 0], fp[:, -1]
        if periodic:
            fm_next = np.roll(fm_left, -1, axis=0)
            fp_prev = np.roll(fp_right, 1, axis=0)
        else:
            ghost_plus, ghost_minus = ghosts
            fm_next = np.concatenate([fm_left[1:], _face_like(ghost_minus, fm_left)], axis=0)
            fp_prev = np.concatenate([_face_like(ghost_plus, fp_right), fp_right[:-1]], axis=0)
        out[:, -1] = out[:, -1] - inv_right * (fm_next - fm_right)
        out[:, 0] = out[:, 0] + inv_left * (fp_prev - fp_left)

    if elem_axis != 0:
        out = np.moveaxis(out, (0, 1), (elem_axis, elem_axis + 1))
    return out


def _face_like(ghost, face):
    """Broadcast a boundary flux to one element face."""
    shape = (1,) + value_of(face).shape[1:]
    if isinstance(face, Dual) and not isinstance(ghost, Dual):
        g = np.broadcast_to(np.asarray(ghost, dtype=float), shape)
        return Dual(g, np.zeros(shape + (face.n_tangents,)))
    return np.broadcast_to(ghost, shape) if not isinstance(ghost, Dual) else ghost.reshape(shape)


# {{{ named entry points


def rhs_periodic_block(semi: Semidiscretization, t: float, u):
    """Single periodic block: ``-D+ f- - D- f+`` (+ source)."""
    if not all(op.periodic for op in semi.layout.operators):
        raise ValueError("layout is not a single periodic block")
    return semi.rhs(t, u)


def rhs_multielement(semi: Semidiscretization, t: float, u):
    """Elementwise upwind operators coupled by upwind-flux SATs."""
    return semi.rhs(t, u)


def rhs_tensor_2d(semi: Semidiscretization, t: float, u):
    if semi.layout.dim != 2:
        raise ValueError("layout is not two-dimensional")
    return semi.rhs(t, u)


def rhs_advection_inflow(semi: Semidiscretization, t: float, u, g_left: Callable[[float], float]):
    """Linear advection on a bounded block with weakly imposed inflow data.

    With the splitting ``f+ = u, f- = 0`` this is
    ``du/dt = -D- u + M^{-1} t_L (g_L(t) - u_1)``.
    """
    if semi.equation.kind != "advection" or semi.layout.dim != 1:
        raise ValueError("inflow boundary is implemented for 1D linear advection")
    bounded = Semidiscretization(
        semi.layout, semi.equation, semi.splitting, semi.lam, semi.source,
        boundary=lambda time, d: (np.array([g_left(time)]), np.array([0.0])),
    )
    return bounded.rhs(t, u)


def manufactured_source_euler(t, x, gas: GasModel = GasModel()):
    """Source making ``rho = h, v = 1, rho e = h^2`` an exact solution.

    ``h = 2 + sin(pi (x - t)) / 10``. Mass is conserved exactly by the
    manufactured state; momentum and energy both receive the pressure
    gradient ``dp/dx = (gamma - 1) (2h - 1/2) h_x``.
    """
    x = np.asarray(x, dtype=np.float64)
    h = 2.0 + 0.1 * np.sin(np.pi * (x - t))
    hx = 0.1 * np.pi * np.cos(np.pi * (x - t))
    dp = (gas.gamma - 1) * (2 * h - 0.5) * hx
    return np.stack([np.zeros_like(x), dp, dp], axis=-1)


# }}}
