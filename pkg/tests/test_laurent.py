import numpy as np
import pytest

from holonet import cdiff as cd
from holonet import nets
from holonet.errors import PointInsideHoleError
from holonet.laurent import LaurentPotential


def zero_kan(widths=(1, 4, 1), degree=3):
    rng = np.random.default_rng(0)
    p = nets.init_kan(list(widths), degree, rng)
    for w in p.weights:
        w[:] = 0
    return p


def identity_kan():
    p = zero_kan((1, 1), degree=1)
    p.weights[0][0, 0, 0] = 1.0
    return p


def unit_stats():
    return nets.NormStats(0.0 + 0.0j, 1.0)


def test_reduces_to_base_when_no_holes():
    rng = np.random.default_rng(1)
    params = nets.init_kan([1, 5, 1], 3, rng)
    base = nets.PlainPotential(params, unit_stats())
    lp = LaurentPotential(params, [], [], [], base_stats=unit_stats())
    z = 0.5 * (rng.normal(size=7) + 1j * rng.normal(size=7))
    t = cd.Tape()
    a = base.bind(t).at(z).value
    b = lp.bind(t).at(z).value
    assert np.array_equal(a, b)


def test_pure_log_term():
    lp = LaurentPotential(
        zero_kan(), [zero_kan()], [0.0 + 0.0j], [0.25],
        base_stats=unit_stats(), hole_stats=[unit_stats()],
        log_coeffs=[1.0],
    )
    z = np.array([np.e + 0j, 2.0j, -1.5 + 0.5j])
    t = cd.Tape()
    out = lp.bind(t).at(z).value
    assert np.allclose(out, np.log(z))
    assert np.allclose(out.real, np.log(np.abs(z)))


def test_pure_reciprocal_net():
    lp = LaurentPotential(
        zero_kan(), [identity_kan()], [0.0 + 0.0j], [0.25],
        base_stats=unit_stats(), hole_stats=[unit_stats()],
    )
    z = np.array([1.0 + 1.0j, -2.0 + 0.3j])
    t = cd.Tape()
    out = lp.bind(t).at(z).value
    assert np.allclose(out, 1.0 / z)


def test_harmonicity_of_real_part():
    # random parameters: Re(phi) has vanishing 5-point Laplacian on the annulus
    rng = np.random.default_rng(2)
    lp = LaurentPotential(
        nets.init_kan([1, 6, 1], 4, rng),
        [nets.init_kan([1, 4, 1], 4, rng)],
        [0.0 + 0.0j], [0.5],
        base_stats=nets.NormStats(0.0j, 1.5),
        hole_stats=[nets.NormStats(0.0j, 0.7)],
        log_coeffs=[0.8],
    )

    def u(z):
        t = cd.Tape()
        return float(lp.bind(t).at(np.array([z])).value[0].real)

    # h small enough that the h^2 d4u truncation term stays below the bound
    # even near the inner boundary where reciprocal terms grow
    h = 2.5e-4
    rads = rng.uniform(1.05, 1.95, 200)
    angs = rng.uniform(-np.pi, np.pi, 200)
    for z0 in rads * np.exp(1j * angs):
        lap = (u(z0 + h) + u(z0 - h) + u(z0 + 1j * h) + u(z0 - 1j * h) - 4 * u(z0)) / h**2
        d2 = abs(u(z0 + h) - 2 * u(z0) + u(z0 - h)) / h**2
        assert abs(lap) <= 1e-5 * max(1.0, d2)


def test_jet_derivatives_match_fd_even_near_branch_cut():
    rng = np.random.default_rng(3)
    lp = LaurentPotential(
        nets.init_kan([1, 5, 1], 3, rng),
        [nets.init_kan([1, 3, 1], 3, rng)],
        [0.0 + 0.0j], [0.3],
        base_stats=unit_stats(), hole_stats=[unit_stats()],
        log_coeffs=[0.6],
    )

    def phi(z):
        t = cd.Tape()
        return complex(lp.bind(t).at(np.array([z])).value[0])

    # include points just above/below the negative real axis (the cut)
    pts = [1.2 + 0.7j, -1.4 + 1e-3j, -1.4 - 1e-3j, 0.9j]
    h = 1e-6
    for z0 in pts:
        t = cd.Tape()
        jet = lp.bind(t).at(np.array([z0]), order=2)
        d1 = complex(jet.d1.value[0])
        d1_fd = (phi(z0 + h) - phi(z0 - h)) / (2 * h)
        assert abs(d1 - d1_fd) <= 1e-6 * (1.0 + abs(d1))
        d2 = complex(jet.d2.value[0])
        h2 = 1e-5
        d2_fd = (phi(z0 + h2) - 2 * phi(z0) + phi(z0 - h2)) / h2**2
        assert abs(d2 - d2_fd) <= 1e-4 * (1.0 + abs(d2))


def test_param_surface_order_and_count():
    rng = np.random.default_rng(4)
    base = nets.init_kan([1, 5, 1], 3, rng)
    hole = nets.init_kan([1, 3, 1], 3, rng)
    lp = LaurentPotential(base, [hole], [0.0j], [0.2],
                          base_stats=unit_stats(), hole_stats=[unit_stats()])
    arrs = lp.param_arrays()
    assert len(arrs) == len(base.arrays()) + len(hole.arrays()) + 1
    assert arrs[-1] is lp.log_coeffs
    assert lp.real_param_count() == base.real_param_count() + hole.real_param_count() + 1
    flags = lp.real_only_flags()
    assert flags[-1] is True and not any(flags[:-1])


def test_guard_radius_rejects_points_near_center():
    lp = LaurentPotential(
        zero_kan(), [identity_kan()], [0.0 + 0.0j], [0.5],
        base_stats=unit_stats(), hole_stats=[unit_stats()],
    )
    t = cd.Tape()
    with pytest.raises(PointInsideHoleError):
        lp.bind(t).at(np.array([0.25 + 0.0j]))


def test_gradient_of_log_coefficient():
    # L = |Re(c log z)|^2 at z = e: dL/dc = 2c (log|e|)^2 = 2c
    lp = LaurentPotential(
        zero_kan(), [zero_kan()], [0.0 + 0.0j], [0.25],
        base_stats=unit_stats(), hole_stats=[unit_stats()],
        log_coeffs=[0.7],
    )
    t = cd.Tape()
    bound = lp.bind(t)
    out = bound.at(np.array([np.e + 0.0j]))
    loss = cd.reshape(cd.sum_along(cd.abs2(cd.re(out))), ())
    g = t.backward(loss)[bound.c_leaf.idx]
    assert np.allclose(g, [2 * 0.7])
    assert np.all(g.imag == 0)
