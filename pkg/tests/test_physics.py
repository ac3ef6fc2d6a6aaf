import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from sourceiter.errors import DomainError, UnsupportedError
from sourceiter.physics import (FrequencyGrid, assert_uv_zero, full_phase, full_phase_parts, nu_to_wavelength,
                                planck, planck_dT, reduced_phase, stefan, wavelength_to_nu)

# frozen values: 1/(e^2 - 1) and 8/(e - 1)
PLANCK_1_HALF = 0.15651764274966565
PLANCK_2_2 = 4.655813654954612


def test_planck_frozen_values():
    assert planck(1.0, 0.5) == pytest.approx(PLANCK_1_HALF, rel=1e-15)
    assert planck(2.0, 2.0) == pytest.approx(PLANCK_2_2, rel=1e-15)


def test_planck_zero_temperature_and_overflow_region():
    assert planck(1.0, 0.0) == 0.0
    assert planck(20.0, 0.01) == 0.0
    assert np.isfinite(planck(1e-8, 1.0))


@pytest.mark.parametrize("nu,T", [(0.0, 1.0), (-1.0, 1.0), (1.0, -0.1)])
def test_planck_rejects_bad_domain(nu, T):
    with pytest.raises(DomainError):
        planck(nu, T)


@given(st.floats(0.01, 30), st.floats(0.005, 2.0))
def test_planck_dT_matches_central_difference(nu, T):
    h = 1e-6 * T
    fd = (planck(nu, T + h) - planck(nu, T - h)) / (2 * h)
    assert planck_dT(nu, T) == pytest.approx(fd, rel=1e-5, abs=1e-300)


@given(st.floats(0.01, 20), st.floats(0.01, 1.0), st.floats(1.001, 3.0))
def test_planck_increases_with_temperature(nu, T, factor):
    assert planck(nu, T * factor) > planck(nu, T) or planck(nu, T) == 0.0


@pytest.mark.parametrize("T", [0.02, 0.0625, 0.2])
def test_stefan_closed_form_against_adaptive_quadrature(T):
    val, _ = integrate.quad(lambda nu: planck(nu, T), 0, 60 * T, limit=200)
    assert val == pytest.approx(stefan(T), rel=1e-9)


@pytest.mark.parametrize("T", [0.02, 0.0625, 0.2])
def test_default_grid_passes_stefan_gate(T):
    g = FrequencyGrid.geometric()
    assert g.integrate(planck(g.nodes, T)) == pytest.approx(stefan(T), rel=1e-3)


def test_coarse_cutoff_misses_cold_emission():
    # documents why the default lower cutoff sits below 0.02
    g = FrequencyGrid.geometric(nu_min=0.02)
    err = abs(g.integrate(planck(g.nodes, 0.02)) / stefan(0.02) - 1)
    assert err > 1e-3


def test_grid_validation():
    with pytest.raises(DomainError):
        FrequencyGrid.geometric(nu_min=0.0)
    with pytest.raises(DomainError):
        FrequencyGrid(np.array([1.0, 0.5]), np.array([1.0, 1.0]), 0.1)
    with pytest.raises(DomainError):
        FrequencyGrid(np.array([0.5, 1.0]), np.array([1.0, -1.0]), 0.1)


def test_wavelength_conversion_round_trip():
    nu = np.geomspace(0.01, 20, 17)
    assert np.allclose(wavelength_to_nu(nu_to_wavelength(nu)), nu, rtol=1e-15)
    assert nu_to_wavelength(3 / 18) == pytest.approx(18.0)


def test_grid_wavelengths_property():
    g = FrequencyGrid.geometric(n=8)
    assert np.allclose(g.wavelengths * g.nodes, 3.0)


def test_reduced_phase_nonnegative_on_lattice():
    mus = np.linspace(-1, 1, 101)
    for beta in (0.0, 0.5, 1.0):
        worst = min(reduced_phase("rayleigh", beta, a, b).min() for a in mus for b in mus)
        assert worst >= 0


def test_isotropic_kind_is_constant_half():
    assert np.all(reduced_phase("isotropic", 0.3, 0.2, -0.7) == 0.5)


def test_reduced_phase_errors():
    with pytest.raises(UnsupportedError):
        reduced_phase("mie", 0.5, 0.1, 0.2)
    with pytest.raises(DomainError):
        reduced_phase("rayleigh", 1.5, 0.1, 0.2)


@pytest.mark.parametrize("beta", [0.0, 0.5, 1.0])
def test_scattering_conserves_unpolarized_energy(beta):
    # incident (I_l, I_r) = (1/2, 1/2) from every direction; the mu-average of
    # the scattered total must be 1, as for isotropic scattering
    mus, w = np.polynomial.legendre.leggauss(40)
    tot = sum(wa * wb * reduced_phase("rayleigh", beta, a, b).sum() / 2
              for a, wa in zip(mus, w) for b, wb in zip(mus, w))
    assert tot / 4 == pytest.approx(1.0, rel=1e-12)


@settings(max_examples=30)
@given(st.floats(-1, 1), st.floats(-1, 1), st.floats(0, 2 * np.pi))
def test_azimuthal_average_of_nonzero_harmonics_vanishes(mu, mup, phi):
    acc = np.zeros((4, 4))
    for p in 2 * np.pi * np.arange(64) / 64:
        _, p1, p2 = full_phase_parts(mu, phi, mup, p)
        acc += p1 + p2
    assert np.max(np.abs(acc / 64)) < 1e-12


def test_averaged_block_is_constant_multiple_of_reduced_rayleigh():
    rng = np.random.default_rng(3)
    ratios = []
    for mu, mup in rng.uniform(-1, 1, size=(50, 2)):
        avg = np.mean([full_phase(mu, 0.3, mup, p) for p in 2 * np.pi * np.arange(64) / 64], axis=0)
        red = reduced_phase("rayleigh", 1.0, mu, mup)
        mask = np.abs(red) > 1e-8
        ratios.extend((avg[:2, :2][mask] / red[mask]).tolist())
    assert np.ptp(ratios) < 1e-10
    assert ratios[0] == pytest.approx(1.0)


def test_uv_zero_only_for_unpolarized_boundaries():
    class B:
        polarization = "none"

    class S:
        boundary = B()

    assert assert_uv_zero(S()).ok
    S.boundary = type("P", (), {"polarization": "linear"})()
    with pytest.raises(UnsupportedError):
        assert_uv_zero(S())
