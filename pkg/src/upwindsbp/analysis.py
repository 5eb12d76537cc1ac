"""Jacobians, spectra, stability tables and convergence rates."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Iterable, Sequence, TextIO

import numpy as np

from upwindsbp.dual import Dual
from upwindsbp.operators import (
    OperatorPair,
    derive_periodic_upwind,
    make_order1_bounded,
    make_order2_bounded,
)
from upwindsbp.semidisc import MeshLayout, Semidiscretization
from upwindsbp.splittings import Equation, InadmissibleStateError

EIGEN_CAP = 4096
DEFAULT_SEED = 20240101


class JacobianError(RuntimeError):
    def __init__(self, column: int, cause: Exception) -> None:
        super().__init__(f"rhs failed while differentiating column {column}: {cause}")
        self.column = column
        self.cause = cause


class EigensolverError(RuntimeError):
    pass


@dataclass
class JacobianMatrix:
    matrix: np.ndarray
    method: str
    step: float | None = None

    @property
    def norm_inf(self) -> float:
        return float(np.abs(self.matrix).sum(axis=1).max()) if self.matrix.size else 0.0


@dataclass
class Spectrum:
    eigenvalues: np.ndarray

    @property
    def max_real_part(self) -> float:
        return float(self.eigenvalues.real.max())

    @property
    def spectral_radius(self) -> float:
        return float(np.abs(self.eigenvalues).max())

    def to_csv(self, target: TextIO | None = None) -> str:
        lines = ["re,im"]
        lines += [f"{ev.real!r},{ev.imag!r}" for ev in self.eigenvalues.tolist()]
        lines.append(f"# max_real_part,{self.max_real_part!r}")
        text = "\n".join(lines) + "\n"
        if target is not None:
            target.write(text)
        return text


# {{{ jacobians


def jacobian(rhs: Callable, u: np.ndarray, t: float = 0.0, method: str = "dual",
             h: float | None = None, chunk: int = 64) -> JacobianMatrix:
    """Jacobian of ``rhs(t, u)`` with respect to the flattened state.

    ``dual`` seeds ``chunk`` tangent directions per evaluation and is exact
    to roundoff. ``central_fd`` uses ``h_j = 1e-6 (1 + |u_j|)`` unless a
    fixed ``h`` is given.
    """
    u = np.asarray(u, dtype=np.float64)
    n = u.size
    J = np.empty((n, n))
    if method == "dual":
        for start in range(0, n, chunk):
            cols = np.arange(start, min(n, start + chunk))
            try:
                out = rhs(t, Dual.seed(u, cols))
            except InadmissibleStateError as err:
                raise JacobianError(int(cols[0]), err) from err
            if not isinstance(out, Dual):
                # rhs independent of u in these directions
                J[:, cols] = 0.0
                continue
            J[:, cols] = out.grad.reshape(n, cols.size)
        return JacobianMatrix(J, "dual")
    if method == "central_fd":
        flat = u.ravel()
        for j in range(n):
            hj = h if h is not None else 1e-6 * (1 + abs(flat[j]))
            up, um = flat.copy(), flat.copy()
            up[j] += hj
            um[j] -= hj
            try:
                fp = np.asarray(rhs(t, up.reshape(u.shape))).ravel()
                fm = np.asarray(rhs(t, um.reshape(u.shape))).ravel()
            except InadmissibleStateError as err:
                raise JacobianError(j, err) from err
            J[:, j] = (fp - fm) / (2 * hj)
        return JacobianMatrix(J, "central_fd", h)
    raise ValueError(f"unknown Jacobian method {method!r}")


def spectrum(A, n_check: int = 10, seed: int = 0) -> Spectrum:
    """All eigenvalues of a dense real matrix, with a residual spot check."""
    A = np.asarray(A.matrix if isinstance(A, JacobianMatrix) else A, dtype=np.float64)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError("spectrum needs a square matrix")
    n = A.shape[0]
    if n > EIGEN_CAP:
        raise ValueError(f"matrix size {n} exceeds the dense eigensolver cap {EIGEN_CAP}")
    if not np.all(np.isfinite(A)):
        raise ValueError("matrix has non-finite entries")
    if n == 0:
        return Spectrum(np.zeros(0, dtype=complex))
    try:
        lam, vecs = np.linalg.eig(A)
    except np.linalg.LinAlgError as err:
        raise EigensolverError(str(err)) from err
    scale = max(np.linalg.norm(A, ord=np.inf), np.finfo(float).tiny)
    rng = np.random.default_rng(seed)
    for k in rng.choice(n, size=min(n_check, n), replace=False):
        v = vecs[:, k]
        res = np.linalg.norm(A @ v - lam[k] * v) / max(np.linalg.norm(v), 1e-300)
        if res > 1e-8 * scale:
            raise EigensolverError(f"eigenpair {k} has residual {res:.3e}")
    return Spectrum(np.asarray(lam, dtype=complex))


# }}}


# {{{ stability tables


def burgers_layout(order: int, K: int, N: int) -> MeshLayout:
    """Periodic Burgers layout on [0, 1] used for the stability tables.

    Orders 1 and 2 use bounded element operators coupled by SATs; higher
    orders use the derived periodic stencils on one block of ``K N`` nodes.
    """
    if order == 1:
        return MeshLayout.from_reference(make_order1_bounded(N, 0.0, 1.0), K, (0.0, 1.0), True)
    if order == 2:
        return MeshLayout.from_reference(make_order2_bounded(N, 0.0, 1.0), K, (0.0, 1.0), True)
    op = derive_periodic_upwind(order, K * N, 0.0, 1.0)
    return MeshLayout.from_reference(op, 1, (0.0, 1.0), True)


@dataclass
class StabilityRow:
    order: int
    K: int
    N: int
    splitting: str
    max_real_part: float
    jacobian_norm: float

    @property
    def relative(self) -> float:
        return self.max_real_part / self.jacobian_norm if self.jacobian_norm else 0.0


def burgers_stability_table(orders: Iterable[int], K_list: Iterable[int], N_list: Iterable[int],
                            seed: int = DEFAULT_SEED,
                            splittings: Sequence[str] = ("fully_upwind", "llf")) -> list[StabilityRow]:
    """Max real part of Burgers Jacobian spectra at uniform [0, 1] random states."""
    rows = []
    rng = np.random.default_rng(seed)
    for order in orders:
        for K in K_list:
            for N in N_list:
                layout = burgers_layout(order, K, N)
                state = rng.uniform(0.0, 1.0, layout.state_shape(1))
                for name in splittings:
                    semi = Semidiscretization(layout, Equation("burgers"), name)
                    J = jacobian(semi, state)
                    sp = spectrum(J)
                    rows.append(StabilityRow(order, K, N, name, sp.max_real_part, J.norm_inf))
    return rows


# }}}


# {{{ errors and rates


def l2_error(u: np.ndarray, exact: Callable, layout: MeshLayout, t: float,
             variables: Sequence[int] | None = None, normalize: bool = True) -> float:
    """Discrete L2 error with the SBP quadrature weights.

    ``exact(t, *coords)`` returns an array shaped like ``u`` (or its node
    shape for one variable). Squared errors are summed over ``variables``
    (all by default). With ``normalize`` the integral is divided by the
    domain volume, i.e. the root-mean-square error.
    """
    coords = layout.coordinates()
    if layout.dim == 1:
        coords = (coords,)
    ref = np.asarray(exact(t, *coords), dtype=np.float64)
    if ref.shape == coords[0].shape:
        ref = ref[..., None]
    diff = np.asarray(u) - ref
    if variables is not None:
        diff = diff[..., list(variables)]
    w = layout.weights()[..., None]
    total = float((w * diff * diff).sum())
    if normalize:
        total /= layout.domain_volume()
    return math.sqrt(total)


def eoc(errors: Sequence[float], resolutions: Sequence[float]) -> list[float]:
    """Experimental orders ``log(e_{i-1}/e_i) / log(h_{i-1}/h_i)``; first entry is NaN.

    NaN also marks steps with a nonpositive or missing error.
    """
    if len(errors) != len(resolutions):
        raise ValueError("errors and resolutions differ in length")
    out = [math.nan]
    for i in range(1, len(errors)):
        e0, e1, h0, h1 = errors[i - 1], errors[i], resolutions[i - 1], resolutions[i]
        if not (e0 > 0 and e1 > 0) or h0 == h1:
            out.append(math.nan)
        else:
            out.append(math.log(e0 / e1) / math.log(h0 / h1))
    return out


# }}}


def operator_spectrum(op: OperatorPair, splitting: str = "upwind") -> Spectrum:
    """Spectrum of the linear advection semidiscretization ``-D-`` of a periodic operator."""
    _, _, dminus = op.dense()
    if splitting == "central":
        _, dplus, _ = op.dense()
        return spectrum(-(dplus + dminus) / 2)
    return spectrum(-dminus)
