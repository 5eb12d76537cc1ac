"""Upwind summation-by-parts operators.

An upwind SBP operator is a pair of first-derivative matrices ``D+`` and
``D-`` together with a diagonal norm ``M`` such that

.. math::

    M D_+ + D_-^T M = t_R t_R^T - t_L t_L^T, \\qquad
    M (D_+ - D_-) \\preceq 0

on bounded grids (the right-hand side vanishes on periodic grids).
``D+`` is biased toward the upper triangle (downwind for positive speeds),
``D-`` toward the lower triangle.

Constructors
^^^^^^^^^^^^

.. autofunction:: make_order1_bounded
.. autofunction:: make_order2_bounded
.. autofunction:: make_order2_periodic
.. autofunction:: derive_periodic_upwind
.. autofunction:: make_dgsem
.. autofunction:: make_dgsem_p2

Coupling and verification
^^^^^^^^^^^^^^^^^^^^^^^^^

.. autofunction:: couple
.. autofunction:: couple_periodic
.. autofunction:: verify
.. autofunction:: central_decomposition
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import reduce
from typing import Sequence

import numpy as np
from scipy import sparse

# blocks larger than this are stored as CSR so that application is O(bandwidth * n)
DENSE_LIMIT = 512

SBP_TOL = 1.0e-13
NSD_TOL = 1.0e-12
CONSISTENCY_TOL = 1.0e-12
ACCURACY_TOL = 1.0e-10


class OperatorError(ValueError):
    """Base class for errors raised while building operators."""


class InvalidSizeError(OperatorError):
    pass


class InvalidDomainError(OperatorError):
    pass


class CouplingError(OperatorError):
    pass


class DerivationFailedError(OperatorError):
    """A derived stencil does not give a negative semidefinite dissipation."""

    def __init__(self, order: int, max_eigenvalue: float) -> None:
        super().__init__(
            f"derived order-{order} stencil is not dissipative: "
            f"max eigenvalue of M(D+ - D-) is {max_eigenvalue:.3e}"
        )
        self.order = order
        self.max_eigenvalue = max_eigenvalue


class OperatorInvariantError(OperatorError):
    """An operator fails one of the upwind SBP invariants.

    The attribute :attr:`check` names the failed residual, e.g.
    ``"sbp_residual"`` or ``"nsd"``.
    """

    def __init__(self, check: str, value: float, threshold: float) -> None:
        super().__init__(f"{check} = {value:.3e} exceeds {threshold:.3e}")
        self.check = check
        self.value = value
        self.threshold = threshold


# {{{ grid and operator containers


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=np.float64)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Grid1D:
    """Nodes of a 1D grid on ``[xmin, xmax]``.

    Bounded grids include both boundary nodes. Grids assembled by coupling
    several blocks store interface coordinates once per block, so the nodes
    are only required to be nondecreasing. Periodic grids from a single
    stencil live in ``[xmin, xmax)``.
    """

    xmin: float
    xmax: float
    nodes: np.ndarray
    periodic: bool = False

    def __post_init__(self) -> None:
        object.__setattr__(self, "nodes", _readonly(self.nodes))
        if not self.xmax > self.xmin:
            raise InvalidDomainError(f"empty domain [{self.xmin}, {self.xmax}]")
        if self.nodes.ndim != 1 or self.nodes.size < 2:
            raise InvalidSizeError("a grid needs at least two nodes")
        if np.any(np.diff(self.nodes) < 0):
            raise InvalidDomainError("grid nodes must be nondecreasing")

    @property
    def n(self) -> int:
        return self.nodes.size

    @property
    def length(self) -> float:
        return self.xmax - self.xmin

    @property
    def min_spacing(self) -> float:
        gaps = np.diff(self.nodes)
        if self.periodic:
            gaps = np.append(gaps, self.xmax - self.nodes[-1] + self.nodes[0] - self.xmin)
        return float(gaps[gaps > 0].min())

    def displacements(self, i: int) -> np.ndarray:
        """Signed distances ``x_j - x_i``, wrapped to the nearest image if periodic."""
        d = self.nodes - self.nodes[i]
        if self.periodic:
            d = d - self.length * np.round(d / self.length)
        return d


def uniform_grid(n: int, xmin: float, xmax: float, periodic: bool = False) -> Grid1D:
    if periodic:
        nodes = xmin + (xmax - xmin) * np.arange(n) / n
    else:
        nodes = np.linspace(xmin, xmax, n)
    return Grid1D(xmin, xmax, nodes, periodic)


def _store(mat):
    """Keep small operators dense and large ones as CSR."""
    if sparse.issparse(mat):
        if mat.shape[0] <= DENSE_LIMIT:
            return _readonly(mat.toarray())
        return sparse.csr_array(mat)
    mat = np.asarray(mat, dtype=np.float64)
    if mat.shape[0] <= DENSE_LIMIT:
        return _readonly(mat)
    return sparse.csr_array(mat)


def to_dense(mat) -> np.ndarray:
    if sparse.issparse(mat):
        return mat.toarray()
    return np.array(mat)


def apply_matrix(mat, arr, axis: int = 0):
    """Apply ``mat`` along ``axis`` of ``arr`` (any trailing shape).

    Works for dense and CSR matrices and for arrays of dual numbers.
    """
    from upwindsbp.dual import Dual

    if isinstance(arr, Dual):
        axis = axis % arr.ndim
        return Dual(apply_matrix(mat, arr.value, axis), apply_matrix(mat, arr.grad, axis))

    arr = np.asarray(arr)
    axis = axis % arr.ndim
    if not sparse.issparse(mat) and axis == arr.ndim - 2 or arr.ndim == 1:
        if arr.ndim == 1:
            return mat @ arr
        return np.matmul(mat, arr)

    moved = np.moveaxis(arr, axis, 0)
    out = mat @ moved.reshape(moved.shape[0], -1)
    return np.moveaxis(np.asarray(out).reshape(moved.shape), 0, axis)


@dataclass(frozen=True, eq=False)
class OperatorPair:
    """Grid, diagonal norm and the two upwind derivative matrices."""

    grid: Grid1D
    mass_diag: np.ndarray
    dplus: np.ndarray
    dminus: np.ndarray
    interior_order: int
    name: str = field(default="", compare=False)
    # (offsets, coefficients) of a circulant D+ in units of 1/dx; D- is its reflection
    stencil: tuple | None = field(default=None, compare=False, repr=False)

    def __post_init__(self) -> None:
        n = self.grid.n
        object.__setattr__(self, "mass_diag", _readonly(self.mass_diag))
        object.__setattr__(self, "dplus", _store(self.dplus))
        object.__setattr__(self, "dminus", _store(self.dminus))
        if self.mass_diag.shape != (n,):
            raise InvalidSizeError(f"mass has shape {self.mass_diag.shape}, expected ({n},)")
        for mat in (self.dplus, self.dminus):
            if mat.shape != (n, n):
                raise InvalidSizeError(f"derivative has shape {mat.shape}, expected ({n}, {n})")
        if np.any(self.mass_diag <= 0):
            raise OperatorError("mass matrix must be positive")
        if self.interior_order < 0:
            raise OperatorError("interior order must be nonnegative")

    @property
    def periodic(self) -> bool:
        return self.grid.periodic

    @property
    def n_nodes(self) -> int:
        return self.grid.n

    @property
    def dx(self) -> float:
        return self.grid.min_spacing

    @property
    def tL(self) -> np.ndarray:
        t = np.zeros(self.n_nodes)
        t[0] = 1.0
        return t

    @property
    def tR(self) -> np.ndarray:
        t = np.zeros(self.n_nodes)
        t[-1] = 1.0
        return t

    def dense(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Return ``(M, D+, D-)`` as dense arrays."""
        return np.diag(self.mass_diag), to_dense(self.dplus), to_dense(self.dminus)

    def apply_plus(self, arr, axis: int = 0):
        if self.stencil is not None:
            return self._apply_stencil(arr, axis, 1)
        return apply_matrix(self.dplus, arr, axis)

    def apply_minus(self, arr, axis: int = 0):
        if self.stencil is not None:
            return self._apply_stencil(arr, axis, -1)
        return apply_matrix(self.dminus, arr, axis)

    def _apply_stencil(self, arr, axis, sign):
        # fixed summation order for every node, so results commute with grid shifts;
        # differences against the centre node make constants map to exact zeros
        offsets, coeffs = self.stencil
        inv = 1.0 / (self.grid.length / self.n_nodes)
        out = 0.0 * arr
        for off, c in zip(offsets, coeffs):
            if off != 0:
                out = out + (sign * c * inv) * (np.roll(arr, -sign * off, axis=axis) - arr)
        return out

    def rescaled(self, xmin: float, xmax: float) -> "OperatorPair":
        """Affinely map the operator onto ``[xmin, xmax]``."""
        if not xmax > xmin:
            raise InvalidDomainError(f"empty domain [{xmin}, {xmax}]")
        scale = (xmax - xmin) / self.grid.length
        nodes = xmin + (self.grid.nodes - self.grid.xmin) * scale
        grid = Grid1D(xmin, xmax, nodes, self.grid.periodic)
        return OperatorPair(
            grid,
            self.mass_diag * scale,
            self.dplus / scale,
            self.dminus / scale,
            self.interior_order,
            self.name,
            self.stencil,
        )

    def central(self) -> "OperatorPair":
        """The classical SBP operator ``(D+ + D-)/2`` used for both derivatives."""
        c = central_decomposition(self).central
        return OperatorPair(self.grid, self.mass_diag, c, c, self.interior_order,
                            f"central({self.name})")

    def integrate(self, values: np.ndarray) -> np.ndarray:
        """Quadrature ``sum_i M_ii g_i`` along the first axis."""
        return np.tensordot(self.mass_diag, values, axes=(0, 0))


@dataclass(frozen=True)
class CentralDecomposition:
    central: np.ndarray
    dissipation: np.ndarray


def central_decomposition(pair: OperatorPair) -> CentralDecomposition:
    _, dp, dm = pair.dense()
    return CentralDecomposition(central=(dm + dp) / 2, dissipation=(dp - dm) / 2)


# }}}


# {{{ explicit constructors


def make_order1_bounded(n_nodes: int, xmin: float, xmax: float) -> OperatorPair:
    """First-order operators whose dissipation is the Neumann Laplacian."""
    if n_nodes < 3:
        raise InvalidSizeError(f"need at least 3 nodes, got {n_nodes}")
    grid = uniform_grid(n_nodes, xmin, xmax)
    dx = grid.length / (n_nodes - 1)

    i = np.arange(n_nodes)
    dminus = np.zeros((n_nodes, n_nodes))
    dminus[i[1:], i[1:] - 1] = -1.0
    dminus[i[1:], i[1:]] = 1.0
    dminus[-1, -2:] = (-2.0, 2.0)

    dplus = np.zeros((n_nodes, n_nodes))
    dplus[i[:-1], i[:-1]] = -1.0
    dplus[i[:-1], i[:-1] + 1] = 1.0
    dplus[0, :2] = (-2.0, 2.0)

    mass = np.ones(n_nodes)
    mass[[0, -1]] = 0.5
    return OperatorPair(grid, dx * mass, dplus / dx, dminus / dx, 1, "order1_bounded")


def make_order2_bounded(n_nodes: int, xmin: float, xmax: float) -> OperatorPair:
    """Diagonal-norm second-order upwind operators with boundary closures."""
    if n_nodes < 6:
        raise InvalidSizeError(f"need at least 6 nodes, got {n_nodes}")
    grid = uniform_grid(n_nodes, xmin, xmax)
    dx = grid.length / (n_nodes - 1)
    n = n_nodes

    dplus = np.zeros((n, n))
    dplus[0, :3] = (-3.0, 5.0, -2.0)
    dplus[1, :4] = (-1 / 5, -1.0, 8 / 5, -2 / 5)
    for i in range(2, n - 2):
        dplus[i, i:i + 3] = (-3 / 2, 2.0, -1 / 2)
    dplus[n - 2, n - 2:] = (-1.0, 1.0)
    dplus[n - 1, n - 2:] = (-1.0, 1.0)

    # D- is the negative mirror image of D+
    dminus = -dplus[::-1, ::-1]

    mass = np.ones(n)
    mass[[0, -1]] = 1 / 4
    mass[[1, -2]] = 5 / 4
    return OperatorPair(grid, dx * mass, dplus / dx, dminus / dx, 2, "order2_bounded")


def _circulant(n: int, offsets: Sequence[int], coeffs: Sequence[float]) -> sparse.csr_array:
    rows, cols, vals = [], [], []
    i = np.arange(n)
    for off, c in zip(offsets, coeffs):
        rows.append(i)
        cols.append((i + off) % n)
        vals.append(np.full(n, float(c)))
    # duplicate (row, col) pairs are summed on conversion
    return sparse.coo_array(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(n, n)
    ).tocsr()


def _periodic_pair(n, xmin, xmax, offsets, coeffs, order, name) -> OperatorPair:
    grid = uniform_grid(n, xmin, xmax, periodic=True)
    dx = grid.length / n
    dplus = _circulant(n, offsets, coeffs) / dx
    dminus = _circulant(n, [-o for o in offsets], [-c for c in coeffs]) / dx
    stencil = (tuple(int(o) for o in offsets), tuple(float(c) for c in coeffs))
    if abs(sum(stencil[1])) > 1e-12:
        stencil = None  # the difference form needs a consistent stencil
    return OperatorPair(grid, np.full(n, dx), dplus, dminus, order, name, stencil)


def make_order2_periodic(n_nodes: int, xmin: float, xmax: float) -> OperatorPair:
    """Periodic operators built from the interior stencils of the order-2 closure."""
    if n_nodes < 5:
        raise InvalidSizeError(f"need at least 5 nodes, got {n_nodes}")
    return _periodic_pair(
        n_nodes, xmin, xmax, (0, 1, 2), (-3 / 2, 2.0, -1 / 2), 2, "order2_periodic"
    )


def upwind_stencil(order: int) -> tuple[list[int], list[Fraction]]:
    """Offsets and exact weights of the order-``q`` downwind-biased ``D+`` stencil.

    The weights are derivatives at 0 of the Lagrange basis on the offsets
    ``-floor((q-1)/2), ..., q - floor((q-1)/2)``.
    """
    if not 1 <= order <= 7:
        raise InvalidSizeError(f"order must be in 1..7, got {order}")
    shift = (order - 1) // 2
    offsets = list(range(-shift, order - shift + 1))
    weights = []
    for j, oj in enumerate(offsets):
        total = Fraction(0)
        for m, om in enumerate(offsets):
            if m == j:
                continue
            term = Fraction(1, oj - om)
            for l, ol in enumerate(offsets):
                if l not in (j, m):
                    term *= Fraction(0 - ol, oj - ol)
            total += term
        weights.append(total)
    return offsets, weights


def _circulant_symbol_max(n: int, offsets, coeffs) -> float:
    # eigenvalues of the symmetric circulant with first-row weights at offsets
    k = np.arange(n)
    sym = np.zeros(n)
    for off, c in zip(offsets, coeffs):
        sym += float(c) * np.cos(2 * np.pi * off * k / n)
    return float(sym.max())


def derive_periodic_upwind(order: int, n_nodes: int, xmin: float, xmax: float) -> OperatorPair:
    """Periodic upwind operators of interior order 1..7 from one-point-biased stencils.

    The dissipation ``M(D+ - D-)`` is checked to be negative semidefinite;
    :class:`DerivationFailedError` is raised otherwise.
    """
    offsets, weights = upwind_stencil(order)
    if n_nodes <= order + 2:
        raise InvalidSizeError(f"order {order} needs more than {order + 2} nodes")
    pair = _periodic_pair(n_nodes, xmin, xmax, offsets, weights, order,
                          f"derived_periodic_{order}")

    if n_nodes <= DENSE_LIMIT:
        max_eig = nsd_max_eigenvalue(pair)
    else:
        # symmetric circulant: eigenvalues are the cosine symbol at the grid frequencies
        diff_off = offsets + [-o for o in offsets]
        diff_w = list(weights) + list(weights)
        max_eig = _circulant_symbol_max(n_nodes, diff_off, diff_w)
    scale = 2 * sum(abs(float(w)) for w in weights)
    if max_eig > NSD_TOL * scale:
        raise DerivationFailedError(order, max_eig)
    return pair


def _gauss_lobatto(p: int) -> tuple[np.ndarray, np.ndarray]:
    from numpy.polynomial import legendre

    coeffs = np.zeros(p + 1)
    coeffs[-1] = 1
    interior = legendre.legroots(legendre.legder(coeffs)) if p > 1 else np.array([])
    x = np.concatenate([[-1.0], np.sort(interior), [1.0]])
    w = 2.0 / (p * (p + 1) * legendre.legval(x, coeffs) ** 2)
    return x, w


def _lagrange_derivative(x: np.ndarray) -> np.ndarray:
    n = x.size
    diff = x[:, None] - x[None, :]
    np.fill_diagonal(diff, 1.0)
    bary = 1.0 / np.prod(diff, axis=1)
    D = (bary[None, :] / bary[:, None]) / diff
    np.fill_diagonal(D, 0.0)
    D[np.arange(n), np.arange(n)] = -D.sum(axis=1)
    return D


def make_dgsem(p: int, xmin: float, xmax: float) -> OperatorPair:
    """DGSEM element operator on Gauss-Lobatto nodes (``D+ = D-``)."""
    if p < 1:
        raise InvalidSizeError(f"polynomial degree must be positive, got {p}")
    if not xmax > xmin:
        raise InvalidDomainError(f"empty domain [{xmin}, {xmax}]")
    if p == 2:
        # exact rational entries for the common case
        x = np.array([-1.0, 0.0, 1.0])
        w = np.array([1 / 3, 4 / 3, 1 / 3])
        D = np.array([[-3.0, 4.0, -1.0], [-1.0, 0.0, 1.0], [1.0, -4.0, 3.0]]) / 2
    else:
        x, w = _gauss_lobatto(p)
        D = _lagrange_derivative(x)
    scale = (xmax - xmin) / 2
    nodes = xmin + (x + 1) * scale
    nodes[0], nodes[-1] = xmin, xmax
    grid = Grid1D(xmin, xmax, nodes)
    return OperatorPair(grid, w * scale, D / scale, D / scale, p, f"dgsem_p{p}")


def make_dgsem_p2(xmin: float, xmax: float) -> OperatorPair:
    return make_dgsem(2, xmin, xmax)


# }}}


# {{{ coupling


def _check_interface(left: OperatorPair, right: OperatorPair) -> None:
    if left.periodic or right.periodic:
        raise CouplingError("only bounded operators can be coupled")
    xl, xr = left.grid.nodes[-1], right.grid.nodes[0]
    if abs(xl - xr) > 1.0e-12 * max(1.0, abs(xl), abs(xr)):
        raise CouplingError(f"interface mismatch: {xl!r} != {xr!r}")


def _as_sparse(mat) -> sparse.csr_array:
    return sparse.csr_array(mat)


def couple(left: OperatorPair, right: OperatorPair) -> OperatorPair:
    """Couple two bounded upwind operators sharing an interface node.

    The interface coupling is the one induced by upwind numerical fluxes,
    so the result is again an upwind SBP operator on the joint grid.
    """
    _check_interface(left, right)
    nl, nr = left.n_nodes, right.n_nodes
    ml, mr = left.mass_diag, right.mass_diag

    dp = sparse.block_diag([_as_sparse(left.dplus), _as_sparse(right.dplus)], format="lil")
    dm = sparse.block_diag([_as_sparse(left.dminus), _as_sparse(right.dminus)], format="lil")
    dp[nl - 1, nl - 1] -= 1.0 / ml[-1]
    dp[nl - 1, nl] += 1.0 / ml[-1]
    dm[nl, nl - 1] -= 1.0 / mr[0]
    dm[nl, nl] += 1.0 / mr[0]

    nodes = np.concatenate([left.grid.nodes, right.grid.nodes])
    grid = Grid1D(left.grid.xmin, right.grid.xmax, nodes)
    return OperatorPair(
        grid,
        np.concatenate([ml, mr]),
        dp.tocsr(),
        dm.tocsr(),
        min(left.interior_order, right.interior_order),
        "coupled",
    )


def couple_periodic(blocks: Sequence[OperatorPair]) -> OperatorPair:
    """Couple bounded blocks on all interfaces, including the wrap-around one."""
    blocks = list(blocks)
    if not blocks:
        raise CouplingError("need at least one block")
    for a, b in zip(blocks[:-1], blocks[1:]):
        _check_interface(a, b)
    if blocks[0].periodic:
        raise CouplingError("only bounded operators can be coupled")

    pair = reduce(couple, blocks)
    n = pair.n_nodes
    m = pair.mass_diag
    dp = sparse.lil_array(_as_sparse(pair.dplus))
    dm = sparse.lil_array(_as_sparse(pair.dminus))
    dp[n - 1, n - 1] -= 1.0 / m[-1]
    dp[n - 1, 0] += 1.0 / m[-1]
    dm[0, n - 1] -= 1.0 / m[0]
    dm[0, 0] += 1.0 / m[0]

    g = pair.grid
    grid = Grid1D(g.xmin, g.xmax, g.nodes, periodic=True)
    return OperatorPair(grid, m, dp.tocsr(), dm.tocsr(), pair.interior_order, "coupled_periodic")


# }}}


# {{{ verification


def nsd_max_eigenvalue(pair: OperatorPair) -> float:
    """Largest eigenvalue of the symmetric part of ``M(D+ - D-)``."""
    M, dp, dm = pair.dense()
    A = M @ (dp - dm)
    S = (A + A.T) / 2
    return float(np.linalg.eigvalsh(S).max())


def _row_orders(pair: OperatorPair, mat: np.ndarray, max_order: int) -> np.ndarray:
    """Largest ``k`` such that each row differentiates polynomials of degree <= k exactly."""
    n = pair.n_nodes
    dx = pair.dx
    orders = np.full(n, -1)
    for i in range(n):
        row = mat[i] * dx
        xi = pair.grid.displacements(i) / dx
        cols = np.nonzero(row)[0]
        k_ok = -1
        for k in range(0, max_order + 1):
            vals = xi[cols] ** k
            exact = 1.0 if k == 1 else 0.0
            res = abs(row[cols] @ vals - exact)
            scale = max(1.0, float(np.abs(row[cols]) @ np.abs(vals)))
            if res > ACCURACY_TOL * scale:
                break
            k_ok = k
        orders[i] = k_ok
    return orders


@dataclass
class VerificationReport:
    """Residuals and pass/fail flags of the upwind SBP invariants."""

    mass_error: float
    sbp_residual: float
    symmetry_residual: float
    nsd_max_eigenvalue: float
    consistency: float
    row_orders_plus: np.ndarray
    row_orders_minus: np.ndarray
    declared_order: int
    thresholds: dict = field(default_factory=dict)

    @property
    def interior_order(self) -> int:
        # the order attained by most rows; boundary and seam rows are a minority
        rows = np.minimum(self.row_orders_plus, self.row_orders_minus)
        values, counts = np.unique(rows, return_counts=True)
        return int(values[counts == counts.max()].max())

    @property
    def boundary_order(self) -> int:
        return int(min(self.row_orders_plus.min(), self.row_orders_minus.min()))

    @property
    def checks(self) -> dict[str, bool]:
        t = self.thresholds
        return {
            "mass": bool(self.mass_error <= t["mass"]),
            "sbp_residual": bool(self.sbp_residual <= t["sbp_residual"]),
            "symmetry": bool(self.symmetry_residual <= t["symmetry"]),
            "nsd": bool(self.nsd_max_eigenvalue <= t["nsd"]),
            "consistency": bool(self.consistency <= t["consistency"]),
            "accuracy": bool(self.interior_order >= self.declared_order),
        }

    @property
    def passed(self) -> bool:
        return all(self.checks.values())

    def first_failure(self) -> str | None:
        for name, ok in self.checks.items():
            if not ok:
                return name
        return None

    def value(self, check: str) -> float:
        return {
            "mass": self.mass_error,
            "sbp_residual": self.sbp_residual,
            "symmetry": self.symmetry_residual,
            "nsd": self.nsd_max_eigenvalue,
            "consistency": self.consistency,
            "accuracy": float(self.interior_order),
        }[check]

    def raise_on_failure(self) -> None:
        name = self.first_failure()
        if name is not None:
            threshold = self.thresholds.get(name, float(self.declared_order))
            raise OperatorInvariantError(name, self.value(name), threshold)


def verify(pair: OperatorPair) -> VerificationReport:
    """Check all upwind SBP invariants of ``pair``; never mutates it."""
    M, dp, dm = pair.dense()
    n = pair.n_nodes
    dx = pair.dx
    boundary = np.zeros((n, n))
    if not pair.periodic:
        boundary[0, 0] = -1.0
        boundary[-1, -1] = 1.0

    sbp = M @ dp + dm.T @ M - boundary
    sbp_scale = np.abs(M @ dp).sum(axis=1).max()

    A = M @ (dp - dm)
    diss_scale = np.abs(A).sum(axis=1).max()
    S = (A + A.T) / 2
    max_eig = float(np.linalg.eigvalsh(S).max()) if n > 0 else 0.0

    ones = np.ones(n)
    consistency = max(np.abs(dp @ ones).max(), np.abs(dm @ ones).max())

    max_order = max(pair.interior_order, 1) + 1
    report = VerificationReport(
        mass_error=abs(math.fsum(pair.mass_diag) - pair.grid.length),
        sbp_residual=float(np.abs(sbp).sum(axis=1).max()),
        symmetry_residual=float(np.abs(A - A.T).max()),
        nsd_max_eigenvalue=max_eig,
        consistency=float(consistency),
        row_orders_plus=_row_orders(pair, dp, max_order),
        row_orders_minus=_row_orders(pair, dm, max_order),
        declared_order=pair.interior_order,
        thresholds={
            "mass": SBP_TOL * pair.grid.length,
            "sbp_residual": SBP_TOL * sbp_scale,
            "symmetry": SBP_TOL * diss_scale,
            "nsd": NSD_TOL * np.abs(S).sum(axis=1).max(),
            "consistency": CONSISTENCY_TOL / dx,
        },
    )
    return report


# }}}


# {{{ coefficient tables


def _parse_number(text: str) -> float:
    return float(Fraction(text.strip()))


def load_operator_table(source) -> OperatorPair:
    """Read an operator from the line-oriented coefficient format.

    ``source`` is a path or an open text stream. All invariants are
    re-verified; :class:`OperatorInvariantError` names the failed residual.
    """
    if hasattr(source, "read"):
        text = source.read()
    else:
        with open(source, encoding="utf-8") as fh:
            text = fh.read()

    header: dict[str, str] = {}
    sections: dict[str, list[str]] = {"mass": [], "dplus": [], "dminus": []}
    current = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, rest = line.partition(":")
        key = key.strip().lower()
        if sep and key in sections:
            current = key
            if rest.strip():
                raise OperatorError(f"line {lineno}: unexpected data after '{key}:'")
            continue
        if sep and key in ("kind", "order", "nodes", "xmin", "xmax"):
            header[key] = rest.strip()
            current = None
            continue
        if current is None:
            raise OperatorError(f"line {lineno}: cannot parse {raw!r}")
        sections[current].append(line)

    missing = {"kind", "order", "nodes", "xmin", "xmax"} - header.keys()
    if missing:
        raise OperatorError(f"missing header fields: {sorted(missing)}")
    kind = header["kind"].lower()
    if kind not in ("bounded", "periodic"):
        raise OperatorError(f"unknown kind {kind!r}")
    try:
        order = int(header["order"])
        n = int(header["nodes"])
        xmin = _parse_number(header["xmin"])
        xmax = _parse_number(header["xmax"])
        mass = np.array([_parse_number(v) for v in sections["mass"]])
        mats = {}
        for name in ("dplus", "dminus"):
            mat = np.zeros((n, n))
            for entry in sections[name]:
                i, j, v = entry.split()
                mat[int(i), int(j)] = _parse_number(v)
            mats[name] = mat
    except (ValueError, ZeroDivisionError, IndexError) as exc:
        raise OperatorError(f"malformed operator table: {exc}") from exc
    if mass.size != n:
        raise OperatorError(f"expected {n} mass entries, got {mass.size}")

    grid = uniform_grid(n, xmin, xmax, periodic=(kind == "periodic"))
    pair = OperatorPair(grid, mass, mats["dplus"], mats["dminus"], order, "table")
    verify(pair).raise_on_failure()
    return pair


def dump_operator_table(pair: OperatorPair, target=None) -> str:
    """Serialize ``pair`` so that :func:`load_operator_table` restores it exactly."""
    _, dp, dm = pair.dense()
    lines = [
        f"kind: {'periodic' if pair.periodic else 'bounded'}",
        f"order: {pair.interior_order}",
        f"nodes: {pair.n_nodes}",
        f"xmin: {pair.grid.xmin!r}",
        f"xmax: {pair.grid.xmax!r}",
        "mass:",
    ]
    lines += [repr(float(m)) for m in pair.mass_diag]
    for name, mat in (("dplus", dp), ("dminus", dm)):
        lines.append(f"{name}:")
        rows, cols = np.nonzero(mat)
        lines += [f"{i} {j} {float(mat[i, j])!r}" for i, j in zip(rows, cols)]
    text = "\n".join(lines) + "\n"
    if target is not None:
        with open(target, "w", encoding="utf-8") as fh:
            fh.write(text)
    return text


# }}}


def builtin_operators() -> dict[str, OperatorPair]:
    """Every internally constructed operator family, including coupled ones."""
    ops: dict[str, OperatorPair] = {
        "order1_bounded": make_order1_bounded(12, 0.0, 1.0),
        "order2_bounded": make_order2_bounded(20, 0.0, 1.0),
        "order2_periodic": make_order2_periodic(16, 0.0, 1.0),
        "dgsem_p2": make_dgsem_p2(0.0, 1.0),
    }
    for q in range(1, 8):
        try:
            ops[f"derived_q{q}"] = derive_periodic_upwind(q, 32, 0.0, 1.0)
        except DerivationFailedError:
            continue
    o1 = [make_order1_bounded(6, k / 3, (k + 1) / 3) for k in range(3)]
    o2 = [make_order2_bounded(10, k / 2, (k + 1) / 2) for k in range(2)]
    dg = [make_dgsem_p2(k / 4, (k + 1) / 4) for k in range(4)]
    ops["couple_order1"] = couple(o1[0], o1[1])
    ops["couple_order2"] = couple(o2[0], o2[1])
    ops["couple_dgsem"] = couple(dg[0], dg[1])
    ops["periodic_order1"] = couple_periodic(o1)
    ops["periodic_order2"] = couple_periodic(o2)
    ops["periodic_dgsem"] = couple_periodic(dg)
    return ops
