import numpy as np
import pytest

from upwindsbp.operators import (
    couple_periodic,
    make_dgsem_p2,
    make_order1_bounded,
    make_order2_bounded,
    make_order2_periodic,
)
from upwindsbp.semidisc import (
    MeshLayout,
    Semidiscretization,
    global_operator,
    manufactured_source_euler,
    rhs_advection_inflow,
    rhs_multielement,
    rhs_periodic_block,
    rhs_tensor_2d,
)
from upwindsbp.splittings import Equation, GasModel, InadmissibleStateError, euler_flux

REFS = {
    "order1": lambda N: make_order1_bounded(N, 0.0, 1.0),
    "order2": lambda N: make_order2_bounded(N, 0.0, 1.0),
    "dgsem": lambda N: make_dgsem_p2(0.0, 1.0),
}


def euler_state(rng, shape, dim=1):
    rho = rng.uniform(0.8, 1.2, shape)
    vel = [rng.uniform(-0.3, 0.3, shape) for _ in range(dim)]
    p = rng.uniform(0.8, 1.2, shape)
    E = p / 0.4 + 0.5 * rho * sum(v * v for v in vel)
    return np.stack([rho] + [rho * v for v in vel] + [E], axis=-1)


# {{{ single periodic block


def test_constant_state_is_steady():
    lay = MeshLayout.from_reference(make_order2_periodic(16, 0.0, 1.0), 1, (0.0, 2.0))
    for eq, split, c in ((Equation("advection"), "lax_friedrichs", [1.5]),
                         (Equation("burgers"), "llf", [0.7]),
                         (Equation("euler"), "steger_warming", [1.0, 0.2, 2.6])):
        semi = Semidiscretization(lay, eq, split)
        u = np.broadcast_to(np.array(c), semi.state_shape).copy()
        assert np.abs(rhs_periodic_block(semi, 0.0, u)).max() <= 1e-13 * 16


def test_advection_rhs_is_minus_dminus():
    op = make_order2_periodic(20, 0.0, 2.0)
    lay = MeshLayout.from_reference(op, 1, (-1.0, 1.0))
    semi = Semidiscretization(lay, Equation("advection"), "lax_friedrichs", 1.0)
    u = semi.project(lambda x: np.sin(np.pi * x))
    _, _, dm = lay.operators[0].dense()
    np.testing.assert_allclose(semi.rhs(0.0, u)[0, :, 0], -dm @ u[0, :, 0], atol=1e-13)


def test_burgers_llf_dense_oracle():
    n = 64
    lay = MeshLayout.from_reference(make_order2_periodic(n, 0.0, 1.0), 1, (0.0, 2 * np.pi))
    semi = Semidiscretization(lay, Equation("burgers"), "llf")
    u = semi.project(lambda x: 2 + np.sin(x))
    _, dp, dm = lay.operators[0].dense()
    v = u[0, :, 0]
    expected = -0.75 * dm @ (v * v) + 0.25 * dp @ (v * v)
    np.testing.assert_allclose(semi.rhs(0.0, u)[0, :, 0], expected, atol=1e-12)


def test_translation_equivariance():
    lay = MeshLayout.from_reference(make_order2_periodic(32, 0.0, 1.0), 1, (0.0, 1.0))
    semi = Semidiscretization(lay, Equation("euler"), "van_leer_haenel")
    u = euler_state(np.random.default_rng(1), (1, 32))
    r = semi.rhs(0.0, u)
    r_shift = semi.rhs(0.0, np.roll(u, 1, axis=1))
    assert np.array_equal(np.roll(r, 1, axis=1), r_shift)


def test_rhs_does_not_mutate():
    lay = MeshLayout.from_reference(make_order2_bounded(8, 0.0, 1.0), 3, (0.0, 1.0))
    semi = Semidiscretization(lay, Equation("burgers"), "llf")
    u = np.random.default_rng(0).uniform(-1, 1, semi.state_shape)
    before = u.copy()
    semi.rhs(0.0, u)
    assert np.array_equal(u, before)


def test_wrong_state_shape():
    lay = MeshLayout.from_reference(make_order2_bounded(8, 0.0, 1.0), 3, (0.0, 1.0))
    semi = Semidiscretization(lay, Equation("burgers"), "llf")
    with pytest.raises(ValueError):
        semi.rhs(0.0, np.zeros((3, 7, 1)))


# }}}


# {{{ multi-element coupling


def _global_rhs(semi, u):
    op = global_operator(semi.layout)
    _, dp, dm = op.dense()
    ev = semi.split(u.reshape(-1, semi.n_vars))
    return (-dp @ ev.fminus - dm @ ev.fplus).reshape(u.shape)


def _configs():
    rng = np.random.default_rng(42)
    combos = [("order1", "advection", "lax_friedrichs"), ("order2", "burgers", "llf"),
              ("dgsem", "burgers", "fully_upwind"), ("order2", "euler", "steger_warming"),
              ("order1", "euler", "van_leer_haenel"), ("dgsem", "euler", "van_leer_haenel"),
              ("order2", "advection", "fully_upwind"), ("order1", "burgers", "llf"),
              ("order2", "euler", "van_leer_haenel"), ("dgsem", "advection", "lax_friedrichs")]
    for ref, eq, split in combos:
        yield ref, int(rng.integers(1, 5)), int(rng.integers(6, 12)), eq, split, int(rng.integers(1000))


@pytest.mark.parametrize("ref,K,N,eq,split,seed", list(_configs()))
def test_sat_equals_global_operator(ref, K, N, eq, split, seed):
    lay = MeshLayout.from_reference(REFS[ref](N), K, (0.0, 1.0))
    semi = Semidiscretization(lay, Equation(eq), split, lam=1.0 if split == "lax_friedrichs" else None)
    rng = np.random.default_rng(seed)
    u = euler_state(rng, semi.state_shape[:-1]) if eq == "euler" else rng.uniform(-1, 1, semi.state_shape)
    r = rhs_multielement(semi, 0.0, u)
    g = _global_rhs(semi, u)
    scale = max(1.0, np.abs(g).max())
    assert np.abs(r - g).max() <= 1e-14 * scale


def test_two_element_advection_global_equivalence():
    lay = MeshLayout.from_reference(make_order2_bounded(10, 0.0, 1.0), 2, (0.0, 2.0))
    semi = Semidiscretization(lay, Equation("advection"), "lax_friedrichs", 1.0)
    u = semi.project(lambda x: np.cos(np.pi * x) + 0.3 * x)
    blocks = [make_order2_bounded(10, 0.0, 1.0), make_order2_bounded(10, 1.0, 2.0)]
    _, _, dm = couple_periodic(blocks).dense()
    np.testing.assert_allclose(semi.rhs(0.0, u).ravel(), -dm @ u.ravel(), atol=1e-13)


def test_order1_is_classical_flux_vector_splitting():
    N = 9
    lay = MeshLayout.from_reference(make_order1_bounded(N, 0.0, 1.0), 1, (0.0, 1.0))
    semi = Semidiscretization(lay, Equation("burgers"), "llf")
    u = np.random.default_rng(4).uniform(-1, 1, semi.state_shape)
    ev = semi.split(u)
    fp, fm = ev.fplus[0, :, 0], ev.fminus[0, :, 0]
    dx = lay.operators[0].dx
    r = semi.rhs(0.0, u)[0, :, 0]
    for i in range(1, N - 1):
        fvs = -(fp[i] - fp[i - 1] + fm[i + 1] - fm[i]) / dx
        assert abs(r[i] - fvs) <= 1e-14 * max(1.0, abs(fvs))


def test_constant_elements_are_steady():
    lay = MeshLayout.from_reference(make_dgsem_p2(0.0, 1.0), 5, (0.0, 1.0))
    semi = Semidiscretization(lay, Equation("euler"), "steger_warming")
    u = np.broadcast_to(np.array([1.0, 0.5, 3.0]), semi.state_shape).copy()
    assert np.abs(semi.rhs(0.0, u)).max() <= 1e-12


@pytest.mark.parametrize("ref", ["order1", "order2", "dgsem"])
@pytest.mark.parametrize("eq,split", [("advection", "lax_friedrichs"), ("burgers", "llf"),
                                      ("euler", "steger_warming"), ("euler", "van_leer_haenel")])
def test_conservation(ref, eq, split):
    lay = MeshLayout.from_reference(REFS[ref](8), 3, (0.0, 1.0))
    semi = Semidiscretization(lay, Equation(eq), split, lam=1.0 if split == "lax_friedrichs" else None)
    rng = np.random.default_rng(8)
    u = euler_state(rng, semi.state_shape[:-1]) if eq == "euler" else rng.uniform(-1, 1, semi.state_shape)
    du = semi.rhs(0.0, u)
    w = lay.weights()[..., None]
    total = (w * du).sum(axis=(0, 1))
    fscale = np.abs(semi.split(u).fplus).max() + np.abs(semi.split(u).fminus).max()
    assert np.abs(total).max() <= 1e-13 * fscale


@pytest.mark.parametrize("ref", ["order1", "order2", "dgsem"])
def test_fully_upwind_energy_dissipation(ref):
    lay = MeshLayout.from_reference(REFS[ref](10), 4, (0.0, 1.0))
    semi = Semidiscretization(lay, Equation("advection"), "fully_upwind")
    u = np.random.default_rng(2).normal(size=semi.state_shape)
    du = semi.rhs(0.0, u)
    w = lay.weights()[..., None]
    assert (w * u * du).sum() <= 1e-13 * (w * u * u).sum()


def test_fully_upwind_burgers_entropy_dissipation():
    lay = MeshLayout.from_reference(make_order2_bounded(10, 0.0, 1.0), 3, (0.0, 1.0))
    semi = Semidiscretization(lay, Equation("burgers"), "fully_upwind")
    u = np.random.default_rng(9).uniform(0.1, 1.0, semi.state_shape)
    f = 0.5 * u * u
    du = semi.rhs(0.0, u)
    w = lay.weights()[..., None]
    assert (w * f * du).sum() <= 1e-12


# }}}


# {{{ inflow boundary


def _inflow_semi():
    lay = MeshLayout.from_reference(make_order2_bounded(16, 0.0, 1.0), 1, (0.0, 1.0), periodic=False)
    return Semidiscretization(lay, Equation("advection"), "fully_upwind")


def test_inflow_constant_steady():
    semi = _inflow_semi()
    u = np.full(semi.state_shape, 0.7)
    assert np.abs(rhs_advection_inflow(semi, 0.0, u, lambda t: 0.7)).max() <= 1e-13


def test_inflow_formula():
    semi = _inflow_semi()
    u = np.random.default_rng(3).normal(size=semi.state_shape)
    M, _, dm = semi.layout.operators[0].dense()
    g = 0.4
    v = u[0, :, 0]
    expected = -dm @ v
    expected[0] += (g - v[0]) / M[0, 0]
    np.testing.assert_allclose(rhs_advection_inflow(semi, 0.0, u, lambda t: g)[0, :, 0], expected,
                               atol=1e-12)


@pytest.mark.parametrize("seed", range(5))
def test_inflow_mass_and_energy_balance(seed):
    semi = _inflow_semi()
    rng = np.random.default_rng(seed)
    u = rng.normal(size=semi.state_shape)
    g = float(rng.normal())
    du = rhs_advection_inflow(semi, 0.0, u, lambda t: g)[0, :, 0]
    v = u[0, :, 0]
    w = semi.layout.weights()[0]
    assert abs((w * du).sum() - (g - v[-1])) <= 1e-13 * max(1, np.abs(v).max())
    energy_rate = 2 * (w * v * du).sum()
    assert energy_rate <= g * g - v[-1] ** 2 - (g - v[0]) ** 2 + 1e-12


def test_missing_boundary_data():
    lay = MeshLayout.from_reference(make_order2_bounded(8, 0.0, 1.0), 2, (0.0, 1.0), periodic=False)
    semi = Semidiscretization(lay, Equation("advection"), "fully_upwind")
    with pytest.raises(ValueError):
        semi.rhs(0.0, np.zeros(semi.state_shape))


# }}}


# {{{ 2D


def test_2d_constant_state():
    ref = make_order2_bounded(6, 0.0, 1.0)
    lay = MeshLayout.from_reference((ref, ref), (2, 3), ((0.0, 1.0), (0.0, 2.0)))
    semi = Semidiscretization(lay, Equation("euler", 2), "van_leer_haenel")
    u = np.broadcast_to(np.array([1.0, 0.3, -0.2, 2.5]), semi.state_shape).copy()
    assert np.abs(rhs_tensor_2d(semi, 0.0, u)).max() <= 1e-12


def test_2d_y_invariant_matches_1d():
    ref = make_order2_bounded(8, 0.0, 1.0)
    lay2 = MeshLayout.from_reference((ref, ref), (3, 2), ((0.0, 1.0), (0.0, 1.0)))
    lay1 = MeshLayout.from_reference(ref, 3, (0.0, 1.0))
    semi2 = Semidiscretization(lay2, Equation("euler", 2), "steger_warming")
    semi1 = Semidiscretization(lay1, Equation("euler", 1), "steger_warming")
    u1 = euler_state(np.random.default_rng(6), (3, 8))
    # embed with v2 = 0, constant along y
    u2 = np.zeros(semi2.state_shape)
    u2[..., 0] = u1[:, :, None, None, 0]
    u2[..., 1] = u1[:, :, None, None, 1]
    u2[..., 3] = u1[:, :, None, None, 2]
    r2 = semi2.rhs(0.0, u2)
    r1 = semi1.rhs(0.0, u1)
    for k in range(2):
        for j in range(8):
            np.testing.assert_allclose(r2[:, :, k, j][..., [0, 1, 3]], r1, atol=1e-12)
            np.testing.assert_allclose(r2[:, :, k, j, 2], 0.0, atol=1e-12)


def test_2d_kronecker_oracle():
    n = 8
    op = make_order2_periodic(n, 0.0, 1.0)
    lay = MeshLayout.from_reference((op, op), (1, 1), ((0.0, 1.0), (0.0, 1.0)))
    semi = Semidiscretization(lay, Equation("euler", 2), "van_leer_haenel")
    u = euler_state(np.random.default_rng(12), (1, n, 1, n), dim=2)
    _, dp, dm = lay.operators[0].dense()
    I = np.eye(n)
    flat = u.reshape(n * n, 4)
    out = np.zeros_like(flat)
    for d, (P, Mi) in enumerate(((np.kron(dp, I), np.kron(dm, I)), (np.kron(I, dp), np.kron(I, dm)))):
        ev = semi.split(flat, d)
        out += -P @ ev.fminus - Mi @ ev.fplus
    np.testing.assert_allclose(semi.rhs(0.0, u).reshape(n * n, 4), out, atol=1e-13 * np.abs(out).max())


# }}}


# {{{ manufactured source and error locations


def test_manufactured_source_residual():
    gas = GasModel()
    rng = np.random.default_rng(0)
    t = rng.uniform(0, 2, 100)
    x = rng.uniform(0, 2, 100)

    def U(t, x):
        h = 2 + 0.1 * np.sin(np.pi * (x - t))
        return np.stack([h, h, h * h], axis=-1)

    e = 1e-5
    dUdt = (U(t + e, x) - U(t - e, x)) / (2 * e)
    dFdx = (euler_flux(U(t, x + e), gas) - euler_flux(U(t, x - e), gas)) / (2 * e)
    res = dUdt + dFdx - manufactured_source_euler(t, x, gas)
    assert np.abs(res).max() <= 1e-6


def test_manufactured_source_mass_component_zero():
    x = np.array([0.5, 1.5])
    s = manufactured_source_euler(0.0, x)
    np.testing.assert_array_equal(s[:, 0], 0.0)
    np.testing.assert_allclose(s[:, 1:], 0.0, atol=1e-15)


def test_admissibility_error_location():
    lay = MeshLayout.from_reference(make_order2_bounded(8, 0.0, 1.0), 3, (0.0, 3.0))
    semi = Semidiscretization(lay, Equation("euler"), "steger_warming")
    u = np.broadcast_to(np.array([1.0, 0.0, 2.5]), semi.state_shape).copy()
    u[1, 7, 2] = -1.0
    with pytest.raises(InadmissibleStateError) as info:
        semi.rhs(0.5, u)
    loc = info.value.location
    assert info.value.reason == "negative pressure"
    assert loc["element"] == (1,) and loc["node"] == (7,)
    assert loc["x"] == pytest.approx(2.0)
    assert loc["interface"] is True
    assert loc["t"] == 0.5


def test_admissibility_error_location_2d():
    ref = make_order2_bounded(6, 0.0, 1.0)
    lay = MeshLayout.from_reference((ref, ref), (2, 2), ((0.0, 1.0), (0.0, 1.0)))
    semi = Semidiscretization(lay, Equation("euler", 2), "van_leer_haenel")
    u = np.broadcast_to(np.array([1.0, 0.0, 0.0, 2.5]), semi.state_shape).copy()
    u[0, 2, 1, 3, 0] = -0.1
    with pytest.raises(InadmissibleStateError) as info:
        semi.rhs(0.0, u)
    loc = info.value.location
    assert info.value.reason == "negative density"
    assert loc["element"] == (0, 1) and loc["node"] == (2, 3)
    assert loc["interface"] is False
    assert loc["y"] == pytest.approx(0.5 + 0.5 * 3 / 5)


# }}}
