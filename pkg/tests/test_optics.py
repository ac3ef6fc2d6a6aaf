import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from sourceiter.errors import DataError, DomainError
from sourceiter.optics import (RefractiveProfile, admissibility, check_propagation, eta, eta_h, mu_star_sq,
                               path_cells)

CLOUD = RefractiveProfile.cloud(0.01)


def test_cloud_profile_open_interval():
    assert CLOUD.n(0.5) == 1.0 and CLOUD.n(0.7) == 1.0
    assert CLOUD.n(0.6) == pytest.approx(1.01)
    assert list(CLOUD.breakpoints) == [0.5, 0.7]
    assert RefractiveProfile.cloud(0.0).is_constant


def test_profile_rejects_index_below_one():
    with pytest.raises(DomainError):
        RefractiveProfile.cloud(-0.5)


def test_table_profile(tmp_path):
    f = tmp_path / "n.txt"
    f.write_text("# z n\n0 1.0\n0.5 1.02\n1 1.0\n")
    p = RefractiveProfile.from_table(f)
    assert p.n(0.25) == pytest.approx(1.01)
    assert p.z_top == 1.0
    f.write_text("0 1.0\n0.5 oops\n")
    with pytest.raises(DataError, match=":2:"):
        RefractiveProfile.from_table(f)


def test_path_cells_respect_breakpoints_and_length():
    mids, lens = path_cells(CLOUD, 0.9, 0.1, 0.05)
    edges = np.concatenate([[0.1], 0.1 + np.cumsum(lens)])
    assert lens.sum() == pytest.approx(0.8)
    assert np.all(lens <= 0.05 + 1e-12)
    assert np.min(np.abs(edges - 0.5)) < 1e-12 and np.min(np.abs(edges - 0.7)) < 1e-12


@given(st.floats(-1, 1).filter(lambda m: abs(m) > 1e-6), st.floats(0, 1), st.floats(0, 1))
def test_eta_preserves_invariant(mu, z, zp):
    out = eta(mu, z, zp, CLOUD)
    if np.isnan(out):
        assert (1 - mu * mu) * CLOUD.n(z) ** 2 >= CLOUD.n(zp) ** 2 - 1e-15
    else:
        lhs = (1 - mu * mu) * CLOUD.n(z) ** 2
        rhs = (1 - out * out) * CLOUD.n(zp) ** 2
        assert lhs == pytest.approx(rhs, abs=1e-12)
        assert np.sign(out) == np.sign(mu)


def test_eta_identity_for_constant_index():
    mu = np.linspace(-1, 1, 10)
    assert np.allclose(eta(mu, 0.1, 0.9, RefractiveProfile.constant()), mu)
    # a horizontal ray never reaches another altitude
    assert np.isnan(eta(0.0, 0.1, 0.9, RefractiveProfile.constant()))


def test_eta_rejects_invalid_cosine():
    with pytest.raises(DomainError):
        eta(1.5, 0.1, 0.2, CLOUD)


def test_eta_h_orientations():
    assert eta_h(0.5, 0.1, 0.6, CLOUD) == pytest.approx(0.505)
    assert eta_h(0.5, 0.1, 0.6, CLOUD, "reciprocal") == pytest.approx(0.5 / 1.01)
    with pytest.raises(DomainError):
        eta_h(0.5, 0.1, 0.6, CLOUD, "sideways")


def test_admissibility_threshold_inside_cloud():
    cone = admissibility(0.6, CLOUD)
    assert cone.mu_star_sq == pytest.approx(1 - 1 / 1.01**2)
    assert not cone.admits(np.sqrt(cone.mu_star_sq))  # ties are excluded
    assert cone.admits(0.5) and cone.admits(-0.5) and not cone.admits(0.1)
    assert admissibility(0.2, CLOUD).mu_star_sq == 0.0


def test_admissibility_out_of_range():
    with pytest.raises(DomainError):
        admissibility(1.5, CLOUD)


def test_threshold_symmetric_in_sign():
    z = np.linspace(0, 1, 101)
    s = mu_star_sq(z, CLOUD)
    assert np.all(s >= 0) and np.all(s[(z > 0.5) & (z < 0.7)] > 0)


@pytest.mark.parametrize("eps", [0.01, 0.03])
def test_admissible_directions_stay_admissible(eps):
    rep = check_propagation(RefractiveProfile.cloud(eps), np.linspace(0, 1, 100), n_mu=50)
    assert rep.ok and rep.checked > 0 and rep.skipped > 0


def test_propagation_check_detects_a_bad_cone():
    # a cone narrower than the true one lets through rays that are refracted back
    prof = RefractiveProfile.cloud(0.01)
    import sourceiter.optics as optics

    real = optics.mu_star_sq

    def narrow(z, profile):
        s = np.asarray(real(z, profile), dtype=float)
        return np.where(s > 0, s * 0.25, s)

    optics.mu_star_sq = narrow
    try:
        rep = check_propagation(prof, np.linspace(0, 1, 50), n_mu=200)
    finally:
        optics.mu_star_sq = real
    assert not rep.ok
