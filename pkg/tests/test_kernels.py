import time

import mpmath
import numpy as np
import pytest
from scipy import integrate
from hypothesis import given, settings
from hypothesis import strategies as st

from sourceiter.errors import DomainError, ForbiddenRayError, UnsupportedError
from sourceiter.kernels import (KernelLattice, KernelTable, OpticalPath, QuadratureSpec, _ek_any, build_table, c1,
                                ek_approx, ek_general, expint, kappa_lattice, phi, phi_bound_check)
from sourceiter.optics import RefractiveProfile

CONST = RefractiveProfile.constant()
CLOUD = RefractiveProfile.cloud(0.01)


@pytest.mark.parametrize("k", range(6))
@pytest.mark.parametrize("x", [1e-6, 0.01, 0.3, 1.0, 4.0, 30.0])
def test_expint_against_mpmath(k, x):
    if k == 1 and x == 0:
        return
    assert expint(k, x) == pytest.approx(float(mpmath.expint(k, x)), rel=1e-12)


def test_expint_domain():
    assert expint(3, 0.0) == pytest.approx(0.5)
    with pytest.raises(UnsupportedError):
        expint(6, 1.0)
    with pytest.raises(DomainError):
        expint(2, -1.0)


def test_c1_is_integral_of_e1():
    x = 1.7
    val = float(mpmath.quad(lambda s: mpmath.expint(1, s), [0, x]))
    assert c1(x) == pytest.approx(val, rel=1e-12)


def test_quadrature_nodes_integrate_polynomials_and_sqrt_singularity():
    q = QuadratureSpec(delta_mu=0.01)
    mu, w = q.nodes(0.2)
    assert w.sum() == pytest.approx(0.8, rel=1e-14)
    assert mu.min() > 0.2 and mu.max() < 1
    # 1/sqrt(t) endpoint singularity is integrated exactly by the graded part
    assert np.sum(w / np.sqrt(mu - 0.2)) == pytest.approx(2 * np.sqrt(0.8), rel=1e-4)


def test_quadrature_spec_validation():
    with pytest.raises(DomainError):
        QuadratureSpec(delta_mu=0.2)
    with pytest.raises(DomainError):
        QuadratureSpec(delta_mu=0.001)


@pytest.mark.parametrize("k", [1, 3, 5])
@pytest.mark.parametrize("zp", [0.0, 0.3, 0.95])
def test_constant_index_reduces_to_classical_kernel(k, zp):
    z = 0.6
    tau = 0.5 * abs(z - zp)
    assert ek_general(k, z, zp, 0.5, CONST) == pytest.approx(expint(k, tau), rel=1e-3)


@settings(max_examples=25, deadline=None)
@given(st.floats(0, 1), st.floats(0, 1))
def test_constant_index_symmetry(z, zp):
    for k in (3, 5):
        assert ek_general(k, z, zp, 0.5, CONST) == pytest.approx(ek_general(k, zp, z, 0.5, CONST), rel=1e-9)


@settings(max_examples=25, deadline=None)
@given(st.floats(0, 1), st.floats(0, 1))
def test_kernel_ordering(z, zp):
    e1, e3, e5 = (ek_general(k, z, zp, 0.5, CONST) for k in (1, 3, 5))
    assert e5 <= e3 <= e1


def test_refraction_reciprocity():
    # substituting the transported cosine gives n_z^2 E1(z, z') = n_z'^2 E1(z', z)
    # on the admissible directions of both ends (same chords)
    fine = QuadratureSpec(delta_mu=0.0025)
    for z, zp in [(0.2, 0.6), (0.65, 0.9), (0.1, 0.95)]:
        a = CLOUD.n(z) ** 2 * ek_general(1, z, zp, 0.5, CLOUD, fine)
        b = CLOUD.n(zp) ** 2 * ek_general(1, zp, z, 0.5, CLOUD, fine)
        if CLOUD.n(z) == CLOUD.n(zp):
            assert a == pytest.approx(b, rel=2e-3)


def test_order_two_derivative_identity():
    # d/dz' E2(z, z') = -kappa(z') E1(z, z') away from z' = z and from refractive jumps
    quad = QuadratureSpec(delta_mu=0.0025, dz_inner=1 / 600)
    kap = lambda s: 0.5 * (1 - np.asarray(s) / 2)  # noqa: E731
    for prof in (CONST, CLOUD):
        z, zp, h = 0.2, 0.4, 1e-4
        d = (_ek_any(2, z, zp + h, kap, prof, quad) - _ek_any(2, z, zp - h, kap, prof, quad)) / (2 * h)
        assert d == pytest.approx(-kap(zp) * _ek_any(1, z, zp, kap, prof, quad), rel=2e-3)


def test_phi_forbidden_ray():
    path = OpticalPath(0.6, 0.2, 0.5, CLOUD)
    with pytest.raises(ForbiddenRayError):
        phi(path, 0.1)
    assert phi(path, 0.9) < 1


def test_phi_constant_index_closed_form():
    path = OpticalPath(0.1, 0.7, 0.5, CONST)
    assert phi(path, 0.4) == pytest.approx(np.exp(-0.3 / 0.4), rel=1e-13)


def test_attenuation_bound_holds_without_refraction():
    rng = np.random.default_rng(1)
    for z, zp, mu in rng.uniform([0, 0, 0.01], [1, 1, 1], size=(200, 3)):
        assert phi_bound_check(OpticalPath(z, zp, 0.5, CONST), mu)


def test_attenuation_bound_counterexample_entering_the_cloud():
    # from below the slab into it: the transported cosine exceeds mu (1 + eps)
    assert not phi_bound_check(OpticalPath(0.2, 0.6, 0.5, CLOUD), 0.6)
    assert phi_bound_check(OpticalPath(0.2, 0.6, 0.5, CLOUD), 0.9)


def test_linearised_kernel_orders():
    with pytest.raises(UnsupportedError):
        ek_approx(1, 0.1, 0.6, 0.5, CLOUD)
    with pytest.raises(DomainError):
        ek_approx(3, 0.1, 0.6, 0.5, CLOUD, orientation="up")
    for k in (3, 5):
        exact = ek_general(k, 0.1, 0.9, 0.5, CLOUD)
        assert ek_approx(k, 0.1, 0.9, 0.5, CLOUD) == pytest.approx(exact, rel=0.05)
        assert ek_approx(k, 0.1, 0.9, 0.5, CONST) == pytest.approx(ek_general(k, 0.1, 0.9, 0.5, CONST), rel=1e-3)


def test_general_kernel_order_guard():
    with pytest.raises(UnsupportedError):
        ek_general(2, 0.1, 0.2, 0.5, CONST)


def test_lattice_matches_pointwise_kernels():
    z = np.linspace(0, 1, 11)
    lat = KernelLattice.build(z, CLOUD)
    ker = lat.kernels(0.8)
    for i, j in [(0, 5), (6, 2), (3, 10), (10, 0)]:
        for k in (1, 3, 5):
            assert ker[k][i, j] == pytest.approx(ek_general(k, z[i], z[j], 0.8, CLOUD), rel=1e-10)
    assert np.allclose(ker["e2_bottom"][0], 1 - lat.mu_lo[0])


def test_precision_study_graded_profile():
    t0 = time.perf_counter()
    z = np.linspace(0, 1, 100)
    lat = KernelLattice.build(z, CONST, lambda s: 1 - np.asarray(s) / 2)
    ker = lat.kernels(0.5)
    tau = 0.5 * (z - z * z / 4)
    for k in (1, 3, 5):
        rel = np.abs(ker[k][1:, 0] - expint(k, tau[1:])) / expint(k, tau[1:])
        assert rel.max() < 0.01
    assert time.perf_counter() - t0 < 10


@pytest.fixture(scope="module")
def cloud_table():
    z = np.linspace(0, 1, 41)
    return build_table(z, CLOUD, kappa_lattice(0.05, 2.5, 50))


def test_table_gate_random_kappa(cloud_table):
    rng = np.random.default_rng(7)
    lat = KernelLattice.build(cloud_table.z_nodes, CLOUD)
    worst = 0.0
    for kap in np.exp(rng.uniform(np.log(0.05), np.log(2.5), 6)):
        ref = lat.kernels(kap)
        got = cloud_table.matrices(kap)
        for k in (1, 3, 5):
            off = ~np.eye(ref[k].shape[0], dtype=bool)
            worst = max(worst, float(np.max(np.abs(got[k][off] / ref[k][off] - 1))))
    assert worst < 0.005


def test_table_range_and_lookup(cloud_table):
    with pytest.raises(DomainError):
        cloud_table.matrices(10.0)
    z = cloud_table.z_nodes
    assert cloud_table.lookup(3, z[4], z[20], 0.5) == pytest.approx(cloud_table.matrices(0.5)[3][4, 20], rel=1e-12)
    mid = cloud_table.lookup(3, 0.5 * (z[4] + z[5]), z[20], 0.5)
    assert min(cloud_table.matrices(0.5)[3][4:6, 20]) <= mid <= max(cloud_table.matrices(0.5)[3][4:6, 20])
    with pytest.raises(UnsupportedError):
        cloud_table.lookup(2, 0.1, 0.2, 0.5)


def test_table_invariants(cloud_table):
    v = cloud_table.values
    assert np.all(v > 0)
    # with phi <= 1 the refracted cosine is at most sqrt(mu^2 + a), a = 1 - (1/1.01)^2
    a = 1 - 1 / 1.01**2
    for idx, k in ((1, 3), (2, 5)):
        sup, _ = integrate.quad(lambda m: (m * m + a) ** ((k - 2) / 2), 0, 1)
        assert v[idx].max() <= sup
        assert v[idx].max() > 1 / (k - 1)  # rays entering the slab do exceed the classical value
    # decreasing in kappa
    assert np.all(np.diff(v, axis=-1) <= 1e-15)


def test_table_round_trip(cloud_table, tmp_path):
    p = tmp_path / "tab.npz"
    cloud_table.save(p)
    back = KernelTable.load(p)
    assert np.array_equal(back.values, cloud_table.values)
    assert np.array_equal(back.kappa_nodes, cloud_table.kappa_nodes)


def test_refinement_study_monotone():
    z = np.linspace(0, 1, 100)
    quad = QuadratureSpec()
    ref = KernelLattice.build(z, CLOUD, quad=quad, delta=1 / 800).kernels(0.5)[1]
    errs = [np.abs(KernelLattice.build(z, CLOUD, quad=quad, delta=d).kernels(0.5)[1] - ref)[:, 0]
            for d in (1 / 100, 1 / 200, 1 / 400)]
    mono = (errs[1] <= errs[0]) & (errs[2] <= errs[1])
    assert mono[1:].mean() >= 0.95
    assert max(e[1:].max() for e in errs) < 0.012
