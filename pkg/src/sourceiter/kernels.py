"""Attenuation along rays and the generalized exponential-integral kernels.

``ek(k; z, z')`` is the angular integral over admissible directions at ``z``
of the attenuation ``phi`` between ``z`` and ``z'`` times ``eta(z')**(k-2)``,
where ``eta(z')`` is the direction cosine transported to ``z'``. With a
constant refractive index it reduces to the classical ``E_k`` of the optical
depth between the two altitudes.

The optical depth ``kappa_nu * int shape(z'') / eta(z'') dz''`` is linear in
the spectral factor ``kappa_nu``, which is what makes tabulation over a
single ``kappa`` axis possible.
"""
from __future__ import annotations

import json
import time
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import special

from .errors import DomainError, ForbiddenRayError, UnsupportedError
from .optics import RefractiveProfile, mu_star_sq, path_cells

DZ_INNER = 1.0 / 60.0


@dataclass(frozen=True)
class QuadratureSpec:
    """Angular quadrature: squared (graded) nodes near the lower limit, linear above.

    Offsets ``t = mu - mu_lo`` below ``mu_switch`` are midpoints in
    ``v = sqrt(t)`` with step ~``delta_mu``; above it, midpoints with step
    ~``delta_mu`` in ``t``. The first node sits at ``(delta_mu/2)**2``, never on
    the (integrable) endpoint singularity.
    """

    delta_mu: float = 0.01
    mu_switch: float = 0.1
    delta_mu_oracle: float = 1.0 / 800.0
    dz_inner: float = DZ_INNER

    def __post_init__(self):
        if not 0 < self.delta_mu <= 0.05:
            raise DomainError("delta_mu must lie in (0, 0.05]")
        if not 0 < self.delta_mu_oracle < self.delta_mu:
            raise DomainError("oracle step must be smaller than delta_mu")
        if not 0 < self.mu_switch < 1:
            raise DomainError("mu_switch must lie in (0, 1)")
        if self.dz_inner <= 0:
            raise DomainError("dz_inner must be positive")

    def nodes(self, lo: float = 0.0, delta: float | None = None):
        """Nodes and weights for ``int_lo^1 f(mu) dmu``."""
        delta = self.delta_mu if delta is None else delta
        length = 1.0 - lo
        ts = min(self.mu_switch, length)
        nj = max(1, int(np.ceil(np.sqrt(ts) / delta - 1e-9)))
        dv = np.sqrt(ts) / nj
        v = (np.arange(nj) + 0.5) * dv
        t = [v * v]
        w = [2.0 * v * dv]
        rest = length - ts
        if rest > 1e-15:
            nl = max(1, int(np.ceil(rest / delta - 1e-9)))
            dt = rest / nl
            t.append(ts + (np.arange(nl) + 0.5) * dt)
            w.append(np.full(nl, dt))
        return lo + np.concatenate(t), np.concatenate(w)


def _constant(value):
    return lambda z: np.full(np.shape(z), float(value))


@dataclass
class OpticalPath:
    """A vertical segment between two altitudes with its absorption profile."""

    z: float
    zp: float
    kappa_profile: Callable = field(default_factory=lambda: _constant(1.0))
    profile: RefractiveProfile = field(default_factory=RefractiveProfile.constant)
    dz_inner: float = DZ_INNER

    def __post_init__(self):
        if self.dz_inner <= 0:
            raise DomainError("dz_inner must be positive")
        if not callable(self.kappa_profile):
            self.kappa_profile = _constant(self.kappa_profile)

    def cells(self):
        mids, lens = path_cells(self.profile, self.z, self.zp, self.dz_inner)
        kap = np.asarray(self.kappa_profile(mids), dtype=float)
        if np.any(kap < 0):
            raise DomainError("absorption must be nonnegative along the path")
        return mids, lens, kap


def _path_depth(path: OpticalPath, mu, strict: bool):
    """Optical depth along the ray, with per-cell transported cosines."""
    mu = np.abs(np.asarray(mu, dtype=float))
    mids, lens, kap = path.cells()
    ratio = path.profile.n(path.z) / path.profile.n(mids)
    e2 = 1.0 - (1.0 - mu[..., None] ** 2) * ratio**2
    bad = e2 <= 0
    if strict and np.any(bad):
        raise ForbiddenRayError(f"direction not admissible along path {path.z} -> {path.zp}")
    eta = np.sqrt(np.where(bad, 1.0, e2))
    tau = np.sum(kap * lens / eta, axis=-1)
    return np.where(np.any(bad, axis=-1), np.inf, tau)


def phi(path: OpticalPath, mu):
    """Attenuation ``exp(-|int kappa / eta dz''|)`` along the ray (composite midpoint)."""
    out = np.exp(-_path_depth(path, mu, strict=True))
    return out if out.ndim else float(out)


def expint(k: int, x):
    """Classical exponential integral ``E_k(x)`` for ``k = 0..5``, ``x >= 0``."""
    if k not in range(6):
        raise UnsupportedError(f"exponential integral order {k} not supported")
    x = np.asarray(x, dtype=float)
    if np.any(x < 0):
        raise DomainError("exponential integral argument must be nonnegative")
    out = special.expn(k, x)
    return out if out.ndim else float(out)


def c1(x):
    """``int_0^X E_1 = 1 - E_2(X)``."""
    return 1.0 - expint(2, x)


def _ek_any(k, z, zp, kappa_profile, profile, quad, delta=None):
    lo = float(np.sqrt(mu_star_sq(z, profile)))
    mu, w = quad.nodes(lo, delta)
    path = OpticalPath(z, zp, kappa_profile, profile, quad.dz_inner)
    att = np.exp(-_path_depth(path, mu, strict=False))
    e2 = 1.0 - (1.0 - mu * mu) * (profile.n(z) / profile.n(zp)) ** 2
    ok = e2 > 0
    eta = np.sqrt(np.where(ok, e2, 1.0))
    return float(np.sum(np.where(ok, w * att * eta ** (k - 2), 0.0)))


def ek_general(k: int, z: float, zp: float, kappa_profile, profile: RefractiveProfile,
               quad: QuadratureSpec | None = None, delta: float | None = None) -> float:
    """Generalized kernel by angular quadrature over admissible directions at ``z``.

    Only odd orders 1, 3, 5 are used by the moment formulas.
    """
    if k not in (1, 3, 5):
        raise UnsupportedError(f"kernel order {k} not supported (use 1, 3 or 5)")
    if not callable(kappa_profile):
        kappa_profile = _constant(kappa_profile)
    return _ek_any(k, z, zp, kappa_profile, profile, quad or QuadratureSpec(), delta)


def ek_approx(k: int, z: float, zp: float, kappa_profile, profile: RefractiveProfile,
              orientation: str = "printed", dz_inner: float = DZ_INNER) -> float:
    """Fast kernel through classical ``E_k`` with the linearised direction transport.

    Too coarse for ``k = 1``, which is refused.
    """
    if k == 1:
        raise UnsupportedError("the linearised kernel is not accurate enough for k = 1")
    if k not in (3, 5):
        raise UnsupportedError(f"kernel order {k} not supported (use 3 or 5)")
    if not callable(kappa_profile):
        kappa_profile = _constant(kappa_profile)
    mids, lens = path_cells(profile, z, zp, dz_inner)
    nz, nzp = profile.n(z), profile.n(zp)
    if orientation == "printed":
        tau = np.sum(kappa_profile(mids) * lens * nz / profile.n(mids))
        pref = (nzp / nz) ** (k - 2)
    elif orientation == "reciprocal":
        tau = np.sum(kappa_profile(mids) * lens * profile.n(mids) / nz)
        pref = (nz / nzp) ** (k - 2)
    else:
        raise DomainError(f"unknown orientation {orientation!r}")
    return float(pref * expint(k, tau))


def phi_bound_check(path: OpticalPath, mu: float, slack: float = 1e-12) -> bool:
    """Test ``phi <= exp(-(1/mu) int kappa / (1 + eps(z'', z)) dz'')``.

    ``eps(s, z) = max(1, n_s / n_z) - 1``.
    """
    mu = abs(float(mu))
    lhs = phi(path, mu)
    mids, lens, kap = path.cells()
    eps = np.maximum(1.0, path.profile.n(mids) / path.profile.n(path.z)) - 1.0
    rhs = np.exp(-np.sum(kap * lens / (1.0 + eps)) / mu)
    return bool(lhs <= rhs + slack)


def grid_cells(z_grid, profile: RefractiveProfile, dz_inner: float = DZ_INNER):
    """Cells covering ``[z_0, z_-1]`` whose edges contain every grid node.

    Returns ``(mids, lens, node_edge)`` where ``node_edge[j]`` is the index of
    grid node ``j`` among the cell edges.
    """
    z_grid = np.asarray(z_grid, dtype=float)
    mids, lens, node_edge = [], [], [0]
    count = 0
    for a, b in zip(z_grid[:-1], z_grid[1:]):
        m, l = path_cells(profile, a, b, dz_inner)
        mids.append(m)
        lens.append(l)
        count += m.size
        node_edge.append(count)
    return np.concatenate(mids), np.concatenate(lens), np.array(node_edge)


@dataclass
class KernelLattice:
    """Per-unit-``kappa`` optical depths between all pairs of grid altitudes.

    ``tau[i, j, m]`` is the depth from node ``i`` to node ``j`` along angular
    node ``m`` of altitude ``i``; ``eta[i, j, m]`` the transported cosine at
    ``j``; ``weights[i, m]`` the angular weights (zero-padded). Kernels for any
    spectral factor follow from one exponential per entry.
    """

    z_grid: np.ndarray
    tau: np.ndarray
    eta: np.ndarray
    weights: np.ndarray
    blocked: np.ndarray
    mu_lo: np.ndarray

    @classmethod
    def build(cls, z_grid, profile: RefractiveProfile, kappa_shape: Callable | None = None,
              quad: QuadratureSpec | None = None, delta: float | None = None) -> "KernelLattice":
        quad = quad or QuadratureSpec()
        kappa_shape = kappa_shape or _constant(1.0)
        z_grid = np.asarray(z_grid, dtype=float)
        nz = z_grid.size
        mids, lens, node_edge = grid_cells(z_grid, profile, quad.dz_inner)
        n_cell = profile.n(mids)
        dshape = kappa_shape(mids) * lens
        n_node = profile.n(z_grid)
        lo = np.sqrt(mu_star_sq(z_grid, profile))
        rules = [quad.nodes(float(l), delta) for l in lo]
        nm = max(r[0].size for r in rules)
        tau = np.zeros((nz, nz, nm))
        eta = np.ones((nz, nz, nm))
        weights = np.zeros((nz, nm))
        blocked = np.zeros((nz, nz, nm), dtype=bool)
        for i, (mu, w) in enumerate(rules):
            m = mu.size
            weights[i, :m] = w
            c = 1.0 - mu * mu
            e2 = 1.0 - c[None, :] * (n_node[i] / n_cell[:, None]) ** 2
            bad = e2 <= 0
            dtau = np.where(bad, 0.0, dshape[:, None] / np.sqrt(np.where(bad, 1.0, e2)))
            cum = np.vstack([np.zeros((1, m)), np.cumsum(dtau, axis=0)])[node_edge]
            nbad = np.vstack([np.zeros((1, m)), np.cumsum(bad, axis=0)])[node_edge]
            tau[i, :, :m] = np.abs(cum - cum[i])
            at = 1.0 - c[None, :] * (n_node[i] / n_node[:, None]) ** 2
            blocked[i, :, :m] = (nbad != nbad[i]) | (at <= 0)
            eta[i, :, :m] = np.sqrt(np.where(at > 0, at, 1.0))
        return cls(z_grid=z_grid, tau=tau, eta=eta, weights=weights, blocked=blocked, mu_lo=lo)

    def kernels(self, kappa: float) -> dict:
        """Kernel matrices of order 1, 3, 5 and order-2 boundary values at ``kappa``.

        Keys ``1, 3, 5`` map to ``(nz, nz)`` arrays indexed ``[z, z']``;
        ``"e2_bottom"`` / ``"e2_top"`` hold ``ek(2; z, 0)`` and ``ek(2; z, Z)``.
        """
        ex = np.where(self.blocked, 0.0, self.weights[:, None, :] * np.exp(-kappa * self.tau))
        out = {
            1: np.einsum("ijm,ijm->ij", ex, 1.0 / self.eta),
            3: np.einsum("ijm,ijm->ij", ex, self.eta),
            5: np.einsum("ijm,ijm->ij", ex, self.eta**3),
        }
        out["e2_bottom"] = ex[:, 0, :].sum(axis=-1)
        out["e2_top"] = ex[:, -1, :].sum(axis=-1)
        return out


ORDERS = (1, 3, 5)
_TINY = 1e-300


@dataclass
class KernelTable:
    """Kernel values on a ``(z, z', kappa)`` lattice for orders 1, 3, 5.

    ``values[q]`` (``q`` indexing ``ORDERS``) has shape ``(nz, nz, nk)``;
    ``e2[0]``/``e2[1]`` hold the order-2 kernel toward the bottom/top boundary,
    shape ``(nz, nk)``. Interpolation is linear in ``z`` and ``z'`` and cubic
    (4-point Lagrange) in ``log kappa`` acting on ``log`` values.
    """

    z_nodes: np.ndarray
    kappa_nodes: np.ndarray
    values: np.ndarray
    e2: np.ndarray
    mu_lo: np.ndarray
    build_seconds: float = 0.0

    @property
    def zp_nodes(self):
        return self.z_nodes

    def _kappa_weights(self, kappa):
        u = np.log(self.kappa_nodes)
        x = np.log(kappa)
        if x < u[0] - 1e-12 or x > u[-1] + 1e-12:
            raise DomainError(f"kappa={kappa} outside table range [{self.kappa_nodes[0]}, {self.kappa_nodes[-1]}]")
        n = u.size
        i = int(np.clip(np.searchsorted(u, x) - 1, 0, n - 2))
        idx = np.clip(np.arange(i - 1, i + 3), 0, n - 1)
        idx = np.unique(idx)
        pts = u[idx]
        w = np.ones(idx.size)
        for a in range(idx.size):
            for b in range(idx.size):
                if a != b:
                    w[a] *= (x - pts[b]) / (pts[a] - pts[b])
        return idx, w

    def matrices(self, kappa: float) -> dict:
        """Kernel matrices at the lattice altitudes for one spectral factor."""
        idx, w = self._kappa_weights(kappa)
        logv = np.log(np.maximum(self.values[..., idx], _TINY)) @ w
        loge = np.log(np.maximum(self.e2[..., idx], _TINY)) @ w
        v = np.exp(logv)
        e = np.exp(loge)
        out = {k: v[q] for q, k in enumerate(ORDERS)}
        out["e2_bottom"], out["e2_top"] = e[0], e[1]
        return out

    def lookup(self, k: int, z: float, zp: float, kappa: float) -> float:
        """Interpolated kernel value at an arbitrary ``(z, z', kappa)``."""
        if k not in ORDERS:
            raise UnsupportedError(f"kernel order {k} not tabulated")
        q = ORDERS.index(k)
        idx, w = self._kappa_weights(kappa)
        slab = np.exp(np.log(np.maximum(self.values[q][..., idx], _TINY)) @ w)
        zn = self.z_nodes

        def bracket(x):
            i = int(np.clip(np.searchsorted(zn, x) - 1, 0, zn.size - 2))
            return i, (x - zn[i]) / (zn[i + 1] - zn[i])

        i, a = bracket(z)
        j, b = bracket(zp)
        return float((1 - a) * (1 - b) * slab[i, j] + a * (1 - b) * slab[i + 1, j]
                     + (1 - a) * b * slab[i, j + 1] + a * b * slab[i + 1, j + 1])

    def save(self, path) -> None:
        header = {"nz": int(self.z_nodes.size), "nk": int(self.kappa_nodes.size), "orders": list(ORDERS)}
        np.savez(path, header=np.array(json.dumps(header)), z_nodes=self.z_nodes,
                 kappa_nodes=self.kappa_nodes, values=self.values, e2=self.e2, mu_lo=self.mu_lo)

    @classmethod
    def load(cls, path) -> "KernelTable":
        with np.load(path) as f:
            header = json.loads(str(f["header"]))
            tab = cls(z_nodes=f["z_nodes"], kappa_nodes=f["kappa_nodes"], values=f["values"],
                      e2=f["e2"], mu_lo=f["mu_lo"])
        if tab.values.shape != (len(ORDERS), header["nz"], header["nz"], header["nk"]):
            raise DomainError("kernel table header does not match stored arrays")
        return tab


def kappa_lattice(kmin: float, kmax: float, n: int = 50) -> np.ndarray:
    """Logarithmically spaced spectral factors covering ``[kmin, kmax]``."""
    if not 0 < kmin <= kmax:
        raise DomainError("kappa range must be positive")
    if kmin == kmax:
        kmin, kmax = kmin / 1.5, kmax * 1.5
    return np.geomspace(kmin, kmax, n)


def build_table(z_grid, profile: RefractiveProfile, kappa_nodes, kappa_shape=None,
                quad: QuadratureSpec | None = None) -> KernelTable:
    """Tabulate kernels at every lattice altitude pair and spectral factor."""
    t0 = time.perf_counter()
    lat = KernelLattice.build(z_grid, profile, kappa_shape, quad)
    kappa_nodes = np.asarray(kappa_nodes, dtype=float)
    nz, nk = lat.z_grid.size, kappa_nodes.size
    values = np.empty((len(ORDERS), nz, nz, nk))
    e2 = np.empty((2, nz, nk))
    for c, kap in enumerate(kappa_nodes):
        ker = lat.kernels(kap)
        for q, k in enumerate(ORDERS):
            values[q, :, :, c] = ker[k]
        e2[0, :, c] = ker["e2_bottom"]
        e2[1, :, c] = ker["e2_top"]
    return KernelTable(z_nodes=lat.z_grid, kappa_nodes=kappa_nodes, values=values, e2=e2,
                       mu_lo=lat.mu_lo, build_seconds=time.perf_counter() - t0)
