"""Iterations on the source for the coupled (I, Q, T) radiative equilibrium problem.

The angular dependence is eliminated through the moments
``J_k = 1/2 int mu^k I dmu`` and ``K_k = 1/2 int mu^k Q dmu`` (k = 0, 2), all
carried in the tilde convention (divided by ``n^2``). One sweep maps the
sources built from ``(T^m, moments^m)`` to ``moments^{m+1}`` through the
kernel operators, and ``T^{m+1}`` from ``J_0^m`` by a per-altitude Newton
solve of the radiative-equilibrium condition.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from .errors import DomainError, NumericalError
from .kernels import KernelLattice, KernelTable, QuadratureSpec, build_table, c1, kappa_lattice
from .optics import RefractiveProfile
from .physics import FrequencyGrid, planck, planck_dT

log = logging.getLogger(__name__)

# temperature scale: T_scaled = T_kelvin / TEMPERATURE_SCALE
TEMPERATURE_SCALE = 4798.0
CELSIUS_ZERO = 273.15
MONOTONE_SLACK = 1e-10


def to_celsius(T):
    return np.asarray(T) * TEMPERATURE_SCALE - CELSIUS_ZERO


def from_celsius(t):
    return (np.asarray(t) + CELSIUS_ZERO) / TEMPERATURE_SCALE


@dataclass(frozen=True)
class KappaModel:
    """Absorption ``kappa(nu, z) = spectral(nu) * shape(z)``."""

    spectral: Callable
    shape: Callable = field(default=lambda z: np.ones(np.shape(z)))
    label: str = "custom"

    @classmethod
    def constant(cls, value: float = 0.5) -> "KappaModel":
        if value <= 0:
            raise DomainError("absorption must be positive")
        return cls(spectral=lambda nu: np.full(np.shape(nu), float(value)), label=f"constant {value}")


@dataclass(frozen=True)
class Scattering:
    """Rayleigh mix weight and single-scattering albedo model.

    ``a_s = a1 1{z1<z<z2} + a2 1{z>z2} 1{nu1<nu<nu2} (nu/nu2)^4``.
    """

    beta: float = 0.5
    a1: float = 0.7
    a2: float = 0.3
    z1: float = 0.4
    z2: float = 0.8
    nu1: float = 0.6
    nu2: float = 1.5

    def __post_init__(self):
        if not 0 <= self.beta <= 1:
            raise DomainError("beta must lie in [0, 1]")

    def albedo(self, z, nu) -> np.ndarray:
        z = np.asarray(z, dtype=float)[:, None]
        nu = np.asarray(nu, dtype=float)[None, :]
        a = self.a1 * ((z > self.z1) & (z < self.z2)) \
            + self.a2 * (z > self.z2) * ((nu > self.nu1) & (nu < self.nu2)) * (nu / self.nu2) ** 4
        return np.broadcast_to(a, (z.shape[0], nu.shape[1])).astype(float)


@dataclass(frozen=True)
class Boundary:
    """Ground emission ``c_E B(T_E)`` and sunlight ``c_S B(T_S)`` at the top."""

    c_E: float = 2.5
    T_E: float = 300.0 / TEMPERATURE_SCALE
    c_S: float = 2e-5
    T_S: float = 5700.0 / TEMPERATURE_SCALE
    polarization: str = "none"


@dataclass(frozen=True)
class AtmosphereScenario:
    z_grid: np.ndarray
    freq: FrequencyGrid
    profile: RefractiveProfile
    kappa: KappaModel
    scattering: Scattering = Scattering()
    boundary: Boundary = Boundary()

    def __post_init__(self):
        z = np.asarray(self.z_grid, dtype=float)
        if z.ndim != 1 or z.size < 3 or np.any(np.diff(z) <= 0):
            raise DomainError("z_grid must be strictly increasing with at least 3 nodes")
        if z[0] != 0 or abs(z[-1] - self.profile.z_top) > 1e-12:
            raise DomainError("z_grid must span [0, z_top]")
        object.__setattr__(self, "z_grid", z)
        a = self.albedo
        if np.any(a < 0) or np.any(a >= 1):
            raise DomainError("single-scattering albedo must lie in [0, 1)")
        if np.any(self.kappa_zn <= 0):
            raise DomainError("absorption must be strictly positive everywhere")

    @classmethod
    def default(cls, kappa: KappaModel | None = None, eps: float = 0.0, nz: int = 100,
                freq: FrequencyGrid | None = None, **kw) -> "AtmosphereScenario":
        return cls(z_grid=np.linspace(0.0, 1.0, nz), freq=freq or FrequencyGrid.geometric(),
                   profile=RefractiveProfile.cloud(eps), kappa=kappa or KappaModel.constant(0.5), **kw)

    @property
    def nu(self):
        return self.freq.nodes

    @property
    def kappa_nu(self) -> np.ndarray:
        return np.asarray(self.kappa.spectral(self.nu), dtype=float)

    @property
    def shape_nodes(self) -> np.ndarray:
        return np.asarray(self.kappa.shape(self.z_grid), dtype=float)

    @property
    def kappa_zn(self) -> np.ndarray:
        return self.shape_nodes[:, None] * self.kappa_nu[None, :]

    @property
    def albedo(self) -> np.ndarray:
        return self.scattering.albedo(self.z_grid, self.nu)

    @property
    def n_nodes(self) -> np.ndarray:
        return np.asarray(self.profile.n(self.z_grid), dtype=float)

    def with_(self, **changes) -> "AtmosphereScenario":
        return replace(self, **changes)


def trapezoid_weights(z: np.ndarray) -> np.ndarray:
    h = np.diff(z)
    w = np.zeros_like(z)
    w[:-1] += h / 2
    w[1:] += h / 2
    return w


@dataclass
class KernelOperators:
    """Discrete z'-integration operators per frequency.

    ``m1[f] @ S`` approximates ``int ek(1; z, z') S(z') dz'`` and similarly
    ``m3``, ``m5``. The logarithmic singularity of order 1 on the diagonal is
    removed by subtracting ``S(z)`` and restoring its exact integral, which
    follows from ``d/dz' ek(2; z, z') = -kappa(z') ek(1; z, z')``.
    ``bottom[k]``/``top[k]`` hold ``ek(k; z, 0)`` and ``ek(k; z, Z)``.
    """

    m1: np.ndarray
    m3: np.ndarray
    m5: np.ndarray
    bottom: dict
    top: dict
    source: str

    @classmethod
    def build(cls, scenario: AtmosphereScenario, table: KernelTable | None = None,
              mode: str = "table", quad: QuadratureSpec | None = None) -> "KernelOperators":
        z = scenario.z_grid
        nz, nf = z.size, scenario.nu.size
        w = trapezoid_weights(z)
        shape = scenario.shape_nodes
        kap_nu = scenario.kappa_nu
        if mode == "table":
            if table is None:
                raise NumericalError("a kernel table is required for the table kernel path")
            fetch = table.matrices
            mu_lo = table.mu_lo
        elif mode == "direct":
            lat = KernelLattice.build(z, scenario.profile, scenario.kappa.shape, quad)
            fetch = lat.kernels
            mu_lo = lat.mu_lo
        else:
            raise DomainError(f"unknown kernel mode {mode!r}")
        m1 = np.empty((nf, nz, nz))
        m3 = np.empty((nf, nz, nz))
        m5 = np.empty((nf, nz, nz))
        bottom = {3: np.empty((nf, nz)), 5: np.empty((nf, nz))}
        top = {3: np.empty((nf, nz)), 5: np.empty((nf, nz))}
        off = ~np.eye(nz, dtype=bool)
        for f, kn in enumerate(kap_nu):
            ker = fetch(kn)
            kap = kn * shape
            a = np.where(off, ker[1] * (w * kap)[None, :], 0.0)
            total = 2.0 * (1.0 - mu_lo) - ker["e2_bottom"] - ker["e2_top"]
            a[np.diag_indices(nz)] = total - a.sum(axis=1)
            m1[f] = a / kap[None, :]
            m3[f] = ker[3] * w[None, :]
            m5[f] = ker[5] * w[None, :]
            for k in (3, 5):
                bottom[k][f] = ker[k][:, 0]
                top[k][f] = ker[k][:, -1]
        if np.any(np.diagonal(m1, axis1=1, axis2=2) < 0):
            log.warning("negative diagonal weight in order-1 operator; monotonicity may be lost")
        return cls(m1=m1, m3=m3, m5=m5, bottom=bottom, top=top, source=mode)

    def apply(self, which: str, s: np.ndarray) -> np.ndarray:
        """Apply an operator to sources ``s`` shaped ``(nz, nf)``."""
        return np.einsum("fij,jf->if", getattr(self, which), s)


def scenario_table(scenario: AtmosphereScenario, quad: QuadratureSpec | None = None, n_kappa: int = 50) -> KernelTable:
    """Kernel table spanning the scenario's spectral absorption range."""
    kn = scenario.kappa_nu
    return build_table(scenario.z_grid, scenario.profile, kappa_lattice(kn.min(), kn.max(), n_kappa),
                       scenario.kappa.shape, quad)


@dataclass
class RadiationState:
    J0: np.ndarray
    J2: np.ndarray
    K0: np.ndarray
    K2: np.ndarray
    T: np.ndarray
    iteration: int = 0
    direction: str = "increasing"

    @classmethod
    def zero(cls, nz: int, nf: int, direction: str = "increasing") -> "RadiationState":
        z = np.zeros((nz, nf))
        return cls(z.copy(), z.copy(), z.copy(), z.copy(), np.zeros(nz), 0, direction)

    @classmethod
    def isotropic(cls, scenario: AtmosphereScenario, T0: float, direction: str = "decreasing") -> "RadiationState":
        """``I = B(T0)`` in every admissible direction, ``Q = 0``."""
        nz = scenario.z_grid.size
        bt = planck(scenario.nu[None, :], np.full((nz, 1), T0)) / scenario.n_nodes[:, None] ** 2
        zero = np.zeros_like(bt)
        return cls(bt, bt / 3.0, zero, zero.copy(), np.full(nz, float(T0)), 0, direction)

    def lr_moments(self):
        """Moments of ``I_l = (I+Q)/2`` and ``I_r = (I-Q)/2``."""
        return ((self.J0 + self.K0) / 2, (self.J2 + self.K2) / 2,
                (self.J0 - self.K0) / 2, (self.J2 - self.K2) / 2)


def polarization_bracket(state: RadiationState) -> np.ndarray:
    """``J2 - J0/3 - K0 + K2``: the Rayleigh coupling term of the sources."""
    return state.J2 - state.J0 / 3.0 - state.K0 + state.K2


def assemble_sources(state: RadiationState, scenario: AtmosphereScenario):
    """Source coefficients ``S = S0 + mu^2 S2`` for I and ``S' = S0' + mu^2 S2'`` for Q.

    Returns ``(S0, S2, S0q, S2q)`` each shaped ``(nz, nf)``.
    """
    kap = scenario.kappa_zn
    a = scenario.albedo
    ks, ka = kap * a, kap * (1 - a)
    beta = scenario.scattering.beta
    bt = planck(scenario.nu[None, :], state.T[:, None]) / scenario.n_nodes[:, None] ** 2
    x = polarization_bracket(state)
    s0 = ka * bt + ks * state.J0 - 3 * beta * ks / 8 * x
    s2 = 9 * beta * ks / 8 * x
    return s0, s2, -s2, s2.copy()


def assemble_sources_lr(state: RadiationState, scenario: AtmosphereScenario):
    """Sources of the ``(I_l, I_r)`` formulation, all manifestly built from
    nonnegative angular integrals when the intensities are nonnegative.

    Returns ``(Sl0, Sl2, Sr0, Sr2)`` with ``S_l = Sl0 + mu^2 Sl2`` etc.
    """
    kap = scenario.kappa_zn
    a = scenario.albedo
    ks, ka = kap * a, kap * (1 - a)
    beta = scenario.scattering.beta
    bt = planck(scenario.nu[None, :], state.T[:, None]) / scenario.n_nodes[:, None] ** 2
    l0, l2, r0, r2 = state.lr_moments()
    iso = (1 - beta) * ks / 2 * (l0 + r0) + ka * bt / 2
    sl0 = 3 * beta * ks / 2 * (l0 - l2) + iso
    sl2 = 3 * beta * ks / 4 * (3 * l2 - 2 * l0 + r0)
    sr0 = 3 * beta * ks / 4 * (l2 + r0) + iso
    return sl0, sl2, sr0, np.zeros_like(sr0)


def compute_hk(state: RadiationState, scenario: AtmosphereScenario, ops: KernelOperators | None):
    """``H_k = 9/16 int ek(k+1; z, z') beta kappa_s X(z') dz'`` for k = 0, 2, 4."""
    if ops is None:
        raise NumericalError("kernel operators must be built before computing H_k")
    y = scenario.scattering.beta * scenario.kappa_zn * scenario.albedo * polarization_bracket(state)
    return tuple(9.0 / 16.0 * ops.apply(m, y) for m in ("m1", "m3", "m5"))


def boundary_terms(scenario: AtmosphereScenario, ops: KernelOperators):
    """Direct ground and sun contributions to ``J0`` and ``J2``."""
    b = scenario.boundary
    nu = scenario.nu
    ground = b.c_E / 2 * planck(nu, b.T_E) / scenario.profile.n_bottom ** 2
    sun = b.c_S / 2 * planck(nu, b.T_S) / scenario.profile.n_top ** 2
    j0 = (ops.bottom[3] * ground[:, None] + ops.top[3] * sun[:, None]).T
    j2 = (ops.bottom[5] * ground[:, None] + ops.top[5] * sun[:, None]).T
    return j0, j2


def update_moments(state: RadiationState, scenario: AtmosphereScenario, ops: KernelOperators,
                   q_sign: float = -1.0):
    """New moments ``(J0, J2, K0, K2)`` from the sources of ``state``.

    ``q_sign=-1`` is the sign that follows from the Q transport equation;
    ``+1`` reproduces the alternative printed form ``K_k = H_k - H_{k+2}``.
    """
    kap = scenario.kappa_zn
    a = scenario.albedo
    bt = planck(scenario.nu[None, :], state.T[:, None]) / scenario.n_nodes[:, None] ** 2
    base = kap * (1 - a) * bt + kap * a * state.J0
    h0, h2, h4 = compute_hk(state, scenario, ops)
    bj0, bj2 = boundary_terms(scenario, ops)
    j0 = bj0 + 0.5 * ops.apply("m1", base) - h0 / 3 + h2
    j2 = bj2 + 0.5 * ops.apply("m3", base) - h2 / 3 + h4
    return j0, j2, q_sign * (h0 - h2), q_sign * (h2 - h4)


def newton_temperature(J0: np.ndarray, scenario: AtmosphereScenario, T_prev=None,
                       rtol: float = 1e-12, max_iter: int = 60) -> np.ndarray:
    """Solve ``int kappa_a (B(T)/n^2 - J0) dnu = 0`` at every altitude.

    Safeguarded Newton: iterates stay inside a bracket that is tightened
    from the sign of the residual; a step leaving it becomes bisection.
    """
    J0 = np.asarray(J0, dtype=float)
    if not np.all(np.isfinite(J0)):
        raise NumericalError("non-finite J0 passed to the temperature solve")
    nu = scenario.nu
    wk = scenario.freq.weights[None, :] * scenario.kappa_zn * (1 - scenario.albedo)
    target = np.sum(wk * J0, axis=1) * scenario.n_nodes**2
    nz = J0.shape[0]
    T = np.zeros(nz)
    active = target > 0
    if not np.any(active):
        return T
    wk = wk[active]
    tgt = target[active]

    def resid(t):
        return np.sum(wk * planck(nu[None, :], t[:, None]), axis=1) - tgt

    lo = np.zeros(tgt.size)
    hi = np.full(tgt.size, 0.1)
    for _ in range(80):
        up = resid(hi) <= 0
        if not np.any(up):
            break
        lo[up] = hi[up]
        hi[up] *= 2
    else:
        bad = np.flatnonzero(active)[np.argmax(resid(hi) <= 0)]
        raise NumericalError(f"temperature bracket failure at z index {bad}", index=int(bad))
    # lower estimate from sum(w kappa_a B) <= max(kappa_a) (pi T)^4 / 15
    guess = (15 * tgt / (np.pi**4 * wk.sum(axis=1) / scenario.freq.weights.sum())) ** 0.25 / np.pi
    if T_prev is not None:
        tp = np.asarray(T_prev, dtype=float)[active]
        guess = np.where(tp > 0, tp, guess)
    t = np.clip(guess, lo + 1e-300, hi)
    for _ in range(max_iter):
        r = resid(t)
        done = np.abs(r) <= rtol * tgt
        if np.all(done):
            break
        lo = np.where(r < 0, np.maximum(lo, t), lo)
        hi = np.where(r > 0, np.minimum(hi, t), hi)
        d = np.sum(wk * planck_dT(nu[None, :], t[:, None]), axis=1)
        with np.errstate(divide="ignore", invalid="ignore"):
            step = t - r / d
        bisect = ~np.isfinite(step) | (step <= lo) | (step >= hi)
        new = np.where(bisect, 0.5 * (lo + hi), step)
        new = np.where(done, t, new)
        if np.all(np.abs(new - t) <= 4 * np.finfo(float).eps * t):
            t = new
            break
        t = new
    T[active] = t
    return T


def iterate(state: RadiationState, scenario: AtmosphereScenario, ops: KernelOperators,
            t_update: str = "lagged", q_sign: float = -1.0) -> RadiationState:
    """One sweep of the source iteration.

    ``t_update="lagged"`` takes ``T^{m+1}`` from ``J0^m``; ``"current"`` uses
    the new ``J0^{m+1}``. Both are compositions of monotone maps and share
    the fixed point; the current update needs fewer sweeps.
    """
    j0, j2, k0, k2 = update_moments(state, scenario, ops, q_sign)
    if t_update == "lagged":
        T = newton_temperature(state.J0, scenario, state.T)
    elif t_update == "current":
        T = newton_temperature(j0, scenario, state.T)
    else:
        raise DomainError(f"unknown temperature update {t_update!r}")
    return RadiationState(j0, j2, k0, k2, T, state.iteration + 1, state.direction)


def dominated(lower: RadiationState, upper: RadiationState, slack: float = MONOTONE_SLACK) -> bool:
    """``T`` and ``J0`` of ``upper`` are at least those of ``lower`` everywhere.

    The ``J0`` comparison is made per frequency with a slack relative to
    that frequency's largest value, so roundoff in the exponentially small
    Wien tail is not mistaken for an ordering violation.
    """
    if np.any(upper.T - lower.T < -slack):
        return False
    scale = slack * np.max(np.abs(upper.J0), axis=0, keepdims=True)
    return bool(np.all(upper.J0 - lower.J0 >= -scale))


def cone_dominated(lower: RadiationState, upper: RadiationState, slack: float = MONOTONE_SLACK) -> bool:
    """Stronger order: ``T`` ordered and the ``(I_l, I_r)`` moment differences
    satisfy ``D0 >= D2 >= 0`` in both channels."""
    if np.any(upper.T - lower.T < -slack):
        return False
    a, b = lower.lr_moments(), upper.lr_moments()
    d = [y - x for x, y in zip(a, b)]
    scale = slack * (1.0 + np.abs(upper.J0))
    for d0, d2 in ((d[0], d[1]), (d[2], d[3])):
        if np.any(d2 < -scale) or np.any(d0 - d2 < -scale):
            return False
    return True


@dataclass
class SolveOptions:
    tol: float = 1e-4
    max_iter: int = 60
    kernel: str = "table"
    t_update: str = "lagged"
    hot_T0: float | None = None
    probe_z: float = 0.03
    q_sign: float = -1.0
    # consecutive sweeps below tol before a branch stops; the lagged update
    # alternates large and small temperature steps, so one small step is not enough
    patience: int = 2
    quad: QuadratureSpec = field(default_factory=QuadratureSpec)
    n_kappa: int = 50


@dataclass
class IterationReport:
    rows: list = field(default_factory=list)
    T_inc: list = field(default_factory=list)
    T_dec: list = field(default_factory=list)
    monotone_inc: bool = True
    monotone_dec: bool = True
    bracket_ok: bool = True
    converged: bool = False
    iterations: int = 0
    bracket_width: float = float("nan")
    hot_T0: float = float("nan")
    kernel_seconds: float = 0.0
    probe_index: int = 0

    def trace(self, branch: str) -> np.ndarray:
        hist = self.T_inc if branch == "increasing" else self.T_dec
        return np.array([t[self.probe_index] for t in hist])


@dataclass
class Solution:
    state: RadiationState
    lower: RadiationState
    report: IterationReport
    ops: KernelOperators
    scenario: AtmosphereScenario


def default_hot_temperature(scenario: AtmosphereScenario) -> float:
    b = scenario.boundary
    return 1.5 * max(b.T_E, b.T_S * b.c_S**0.25, 1e-3)


def envelope_state(scenario: AtmosphereScenario, T0: float) -> RadiationState:
    """Isotropic start with intensity ``max(B(T0), c_E B(T_E), c_S B(T_S))`` per frequency.

    Its temperature is the radiative-equilibrium value of that intensity, so
    the first temperature update leaves ``T`` unchanged.
    """
    b = scenario.boundary
    nu = scenario.nu
    top = np.maximum.reduce([planck(nu, np.full(nu.shape, T0)), b.c_E * planck(nu, b.T_E),
                             b.c_S * planck(nu, b.T_S)])
    j0 = top[None, :] / scenario.n_nodes[:, None] ** 2
    zero = np.zeros_like(j0)
    T = newton_temperature(j0, scenario)
    return RadiationState(j0, j0 / 3.0, zero, zero.copy(), T, 0, "decreasing")


def hot_start(scenario: AtmosphereScenario, ops: KernelOperators, T0: float | None = None,
              doublings: int = 5, **kw) -> RadiationState:
    """Start above the solution: the first iterate must lie below it in ``T`` and ``J0``.

    Tries the isotropic Planck state at ``T0``, then the boundary envelope
    state at ``T0``, then doubles ``T0`` (at most ``doublings`` times).
    """
    T0 = default_hot_temperature(scenario) if T0 is None else T0
    for _ in range(doublings + 1):
        for s0 in (RadiationState.isotropic(scenario, T0), envelope_state(scenario, T0)):
            if dominated(iterate(s0, scenario, ops, **kw), s0):
                return s0
        T0 *= 2
    raise NumericalError("no decreasing hot start found after doubling the initial temperature")


def build_operators(scenario: AtmosphereScenario, options: SolveOptions | None = None,
                    table: KernelTable | None = None) -> KernelOperators:
    options = options or SolveOptions()
    if options.kernel == "table" and table is None:
        table = scenario_table(scenario, options.quad, options.n_kappa)
    return KernelOperators.build(scenario, table, options.kernel, options.quad)


def solve(scenario: AtmosphereScenario, options: SolveOptions | None = None,
          ops: KernelOperators | None = None) -> Solution:
    """Run the increasing (cold start) and decreasing (hot start) branches.

    Each branch stops once ``max_z |T^{m+1} - T^m| < tol``. The decreasing
    branch is returned; ``T_dec - T_inc`` bounds the error of either.
    """
    import time

    options = options or SolveOptions()
    t0 = time.perf_counter()
    ops = ops or build_operators(scenario, options)
    report = IterationReport(kernel_seconds=time.perf_counter() - t0)
    report.probe_index = int(np.argmin(np.abs(scenario.z_grid - options.probe_z)))
    kw = dict(t_update=options.t_update, q_sign=options.q_sign)
    nz, nf = scenario.z_grid.size, scenario.nu.size
    inc = RadiationState.zero(nz, nf)
    dec = hot_start(scenario, ops, options.hot_T0, **kw)
    report.hot_T0 = float(dec.T[report.probe_index])
    report.T_inc.append(inc.T.copy())
    report.T_dec.append(dec.T.copy())
    done_inc = done_dec = False
    calm_inc = calm_dec = 0
    for m in range(1, options.max_iter + 1):
        if not done_inc:
            new = iterate(inc, scenario, ops, **kw)
            if not dominated(inc, new):
                report.monotone_inc = False
            d_inc = float(np.max(np.abs(new.T - inc.T)))
            calm_inc = calm_inc + 1 if m > 1 and d_inc < options.tol else 0
            done_inc = calm_inc >= options.patience
            inc = new
        if not done_dec:
            new = replace(iterate(dec, scenario, ops, **kw), direction="decreasing")
            if not dominated(new, dec):
                report.monotone_dec = False
            d_dec = float(np.max(np.abs(new.T - dec.T)))
            calm_dec = calm_dec + 1 if m > 1 and d_dec < options.tol else 0
            done_dec = calm_dec >= options.patience
            dec = new
        report.T_inc.append(inc.T.copy())
        report.T_dec.append(dec.T.copy())
        width = dec.T - inc.T
        if np.min(width) < -MONOTONE_SLACK:
            report.bracket_ok = False
        pi = report.probe_index
        report.rows.append((m, "increasing", float(inc.T[pi]), d_inc, float(np.max(width))))
        report.rows.append((m, "decreasing", float(dec.T[pi]), d_dec, float(np.max(width))))
        report.iterations = m
        if done_inc and done_dec:
            report.converged = True
            break
    report.bracket_width = float(np.max(dec.T - inc.T))
    if not report.converged:
        log.warning("source iteration did not converge in %d sweeps (bracket %.3g)",
                    options.max_iter, report.bracket_width)
    return Solution(state=dec, lower=inc, report=report, ops=ops, scenario=scenario)


def converge(state: RadiationState, scenario: AtmosphereScenario, ops: KernelOperators,
             tol: float = 1e-13, max_iter: int = 2000, **kw) -> RadiationState:
    """Iterate until the temperature and moments stop changing to ``tol`` (relative)."""
    for _ in range(max_iter):
        new = iterate(state, scenario, ops, **kw)
        dT = np.max(np.abs(new.T - state.T)) / max(np.max(np.abs(new.T)), 1e-300)
        dJ = np.max(np.abs(new.J0 - state.J0)) / max(np.max(np.abs(new.J0)), 1e-300)
        state = new
        if max(dT, dJ) < tol:
            return state
    raise NumericalError(f"no convergence to {tol} within {max_iter} sweeps")


@dataclass
class ContractionDiagnostic:
    kappa_m: float
    kappa_M: float
    eps_M: float
    a_m: float
    a_M: float
    beta_M: float
    eta_ratio: float
    R: float

    @property
    def geometric(self) -> bool:
        return self.eta_ratio < 1


def contraction_ratio(scenario: AtmosphereScenario) -> ContractionDiagnostic:
    """Explicit constant certifying geometric convergence when below one."""
    kap = scenario.kappa_zn
    a = scenario.albedo
    n = scenario.profile.n(np.linspace(0.0, scenario.profile.z_top, 2001))
    eps_M = float(n.max() / n.min() - 1.0)
    km, kM = float(kap.min()), float(kap.max())
    am, aM = float(a.min()), float(a.max())
    beta = scenario.scattering.beta
    Z = scenario.profile.z_top
    eta_ratio = (1 + eps_M) * kM**2 / km * c1(Z * km / (1 + eps_M)) * (1 - am) / (1 - aM) * (1 + beta * aM)
    b = scenario.boundary
    R = b.c_E / 4 * kM * (1 - am) * np.pi**4 / 15 * b.T_E**4
    return ContractionDiagnostic(km, kM, eps_M, am, aM, beta, float(eta_ratio), float(R))
