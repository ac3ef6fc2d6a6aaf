"""Planck emission, frequency quadrature and scattering phase matrices.

All quantities are in the scaled units of the solver: frequency ``nu`` and
temperature ``T`` are nondimensional, with ``B_nu(T) = nu**3 / (exp(nu/T) - 1)``
so that the frequency integral of ``B_nu(T)`` is ``(pi T)**4 / 15``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError, UnsupportedError

# exp(700) is still finite in double precision; beyond that B is set to 0.
_MAX_EXPONENT = 700.0


@dataclass(frozen=True)
class FrequencyGrid:
    """Quadrature nodes and weights for integrals over frequency.

    Nodes are geometrically spaced on ``[nu_min, nu_max]``; weights are the
    trapezoidal rule in ``log(nu)``, which is spectrally accurate for smooth
    integrands that decay at both ends (the Planck function does).
    """

    nodes: np.ndarray
    weights: np.ndarray
    nu_min: float

    @classmethod
    def geometric(cls, nu_min: float = 2e-3, nu_max: float = 20.0, n: int = 128) -> "FrequencyGrid":
        if not 0 < nu_min < nu_max:
            raise DomainError(f"need 0 < nu_min < nu_max, got {nu_min}, {nu_max}")
        if n < 2:
            raise DomainError("need at least two frequency nodes")
        u = np.linspace(np.log(nu_min), np.log(nu_max), n)
        nodes = np.exp(u)
        du = u[1] - u[0]
        weights = nodes * du
        weights[0] *= 0.5
        weights[-1] *= 0.5
        return cls(nodes=nodes, weights=weights, nu_min=float(nu_min))

    def __post_init__(self):
        nodes = np.asarray(self.nodes, dtype=float)
        weights = np.asarray(self.weights, dtype=float)
        if nodes.ndim != 1 or nodes.shape != weights.shape:
            raise DomainError("nodes and weights must be 1-D arrays of equal length")
        if np.any(np.diff(nodes) <= 0):
            raise DomainError("frequency nodes must be strictly increasing")
        if self.nu_min <= 0 or nodes[0] < self.nu_min:
            raise DomainError("frequency nodes must lie above nu_min > 0")
        if np.any(weights <= 0):
            raise DomainError("quadrature weights must be positive")
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "weights", weights)

    def __len__(self):
        return self.nodes.size

    def integrate(self, values: np.ndarray, axis: int = -1) -> np.ndarray:
        """Integrate samples taken at the nodes along ``axis``."""
        values = np.moveaxis(np.asarray(values, dtype=float), axis, -1)
        return values @ self.weights

    @property
    def wavelengths(self) -> np.ndarray:
        """Wavelength in micrometres of each node (``lambda = 3 / nu``)."""
        return nu_to_wavelength(self.nodes)


def nu_to_wavelength(nu):
    """Scaled frequency to wavelength in micrometres."""
    return 3.0 / np.asarray(nu, dtype=float)


def wavelength_to_nu(lam):
    """Wavelength in micrometres to scaled frequency."""
    return 3.0 / np.asarray(lam, dtype=float)


def stefan(T):
    """Closed-form frequency integral of the Planck function, ``(pi T)^4 / 15``."""
    return (np.pi * np.asarray(T, dtype=float)) ** 4 / 15.0


def _check_nu(nu):
    nu = np.asarray(nu, dtype=float)
    if np.any(~(nu > 0)):
        raise DomainError("frequency must be strictly positive")
    return nu


def planck(nu, T):
    """Spectral radiance ``nu^3 / (exp(nu/T) - 1)``; zero at ``T = 0``.

    Broadcasts over ``nu`` and ``T``.
    """
    nu = _check_nu(nu)
    T = np.asarray(T, dtype=float)
    if np.any(T < 0):
        raise DomainError("temperature must be nonnegative")
    nu, T = np.broadcast_arrays(nu, T)
    out = np.zeros(nu.shape)
    hot = T > 0
    x = np.full(nu.shape, np.inf)
    x[hot] = nu[hot] / T[hot]
    ok = x <= _MAX_EXPONENT
    out[ok] = nu[ok] ** 3 / np.expm1(x[ok])
    return out if out.ndim else float(out)


def planck_dT(nu, T):
    """Temperature derivative of :func:`planck`.

    Written as ``nu^4/T^2 * e^{-x} / (1 - e^{-x})^2`` with ``x = nu/T`` so that
    large ``x`` underflows gracefully instead of overflowing.
    """
    nu = _check_nu(nu)
    T = np.asarray(T, dtype=float)
    if np.any(~(T > 0)):
        raise DomainError("temperature must be strictly positive")
    nu, T = np.broadcast_arrays(nu, T)
    x = nu / T
    em = np.exp(-x)
    out = nu**4 / T**2 * em / np.expm1(-x) ** 2
    return out if out.ndim else float(out)


def _rayleigh_reduced(mu, mup):
    # normalised like the isotropic matrix: 1/2 int over mu' of the scattered
    # unpolarized intensity, averaged over mu, equals the incident one
    m2, p2 = mu * mu, mup * mup
    return 0.75 * np.array([[2 * (1 - m2) * (1 - p2) + m2 * p2, m2], [p2, 1.0]])


def reduced_phase(kind: str, beta: float, mu: float, mup: float) -> np.ndarray:
    """Azimuth-averaged 2x2 phase matrix acting on ``(I_l, I_r)``.

    ``kind="rayleigh"`` returns the mix ``beta*Z_R + (1-beta)*Z_I``;
    ``kind="isotropic"`` returns ``Z_I`` regardless of ``beta``.
    """
    if not 0.0 <= beta <= 1.0:
        raise DomainError(f"beta must lie in [0, 1], got {beta}")
    if abs(mu) > 1 or abs(mup) > 1:
        raise DomainError("direction cosines must lie in [-1, 1]")
    iso = np.full((2, 2), 0.5)
    if kind == "isotropic":
        return iso
    if kind != "rayleigh":
        raise UnsupportedError(f"unknown phase matrix kind {kind!r}")
    return beta * _rayleigh_reduced(mu, mup) + (1 - beta) * iso


_QWEIGHT = np.diag([1.0, 1.0, 2.0, 2.0])


def full_phase_parts(mu, phi, mup, phip):
    """The three 4x4 pieces ``P0``, ``s*P1``, ``P2`` before the ``Q`` weighting.

    ``s = sqrt(1-mu^2) sqrt(1-mu'^2)`` is folded into the second piece.
    """
    d = phip - phi
    c1, s1, c2, s2 = np.cos(d), np.sin(d), np.cos(2 * d), np.sin(2 * d)
    m2, p2 = mu * mu, mup * mup
    p0 = 0.75 * np.array([
        [2 * (1 - m2) * (1 - p2) + m2 * p2, m2, 0, 0],
        [p2, 1, 0, 0],
        [0, 0, 0, 0],
        [0, 0, 0, mu * mup],
    ])
    p1 = 0.75 * np.array([
        [4 * mu * mup * c1, 0, 2 * mu * s1, 0],
        [0, 0, 0, 0],
        [-2 * mup * s1, 0, c1, 0],
        [0, 0, 0, c1],
    ])
    pp2 = 0.75 * np.array([
        [m2 * p2 * c2, -m2 * c2, m2 * mup * s2, 0],
        [-p2 * c2, c2, -mup * s2, 0],
        [-mu * p2 * s2, mu * s2, mu * mup * c2, 0],
        [0, 0, 0, 0],
    ])
    scale = np.sqrt(1 - m2) * np.sqrt(1 - p2)
    return p0, scale * p1, pp2


def full_phase(mu: float, phi: float, mup: float, phip: float) -> np.ndarray:
    """Full 4x4 Rayleigh phase matrix ``Q [P0 + s P1 + P2]`` for Stokes (I, Q, U, V)."""
    if abs(mu) > 1 or abs(mup) > 1:
        raise DomainError("direction cosines must lie in [-1, 1]")
    p0, p1, p2 = full_phase_parts(mu, phi, mup, phip)
    return _QWEIGHT @ (p0 + p1 + p2)


@dataclass(frozen=True)
class UVZero:
    """Marker that the U and V Stokes channels vanish for a scenario."""

    ok: bool = True


def assert_uv_zero(scenario) -> UVZero:
    """Check that boundary sources are unpolarized, so only I and Q are transported.

    The U and V equations are autonomous and source-free, hence identically
    zero under unpolarized boundary light.
    """
    polarization = getattr(scenario.boundary, "polarization", "none")
    if polarization not in (None, "none"):
        raise UnsupportedError(
            f"polarized boundary light ({polarization!r}) is not supported; U and V are not transported"
        )
    return UVZero()
