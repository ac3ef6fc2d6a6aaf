"""Angular fields I(z, mu) and Q(z, mu) rebuilt along characteristics.

Given converged temperatures and moments, the sources are known, and each
admissible ray is integrated exactly cell by cell: with ``S/kappa`` held at
its cell-midpoint value, ``int e^{-tau} S/kappa dtau`` has a closed form.
"""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DomainError, NumericalError
from .kernels import grid_cells
from .optics import CONE_SLACK, mu_star_sq
from .physics import FrequencyGrid, planck
from .solver import (AtmosphereScenario, KernelOperators, RadiationState, assemble_sources,
                     update_moments)


@dataclass
class StokesField:
    """``I`` and ``Q`` on a ``(z, mu)`` mesh; inadmissible cells hold ``nan``.

    Values are physical (``n^2`` times the transported tilde quantities).
    """

    nu: float
    z_nodes: np.ndarray
    mu_nodes: np.ndarray
    I: np.ndarray
    Q: np.ndarray
    n_nodes: np.ndarray

    @property
    def admissible(self) -> np.ndarray:
        return np.isfinite(self.I)

    def tilde(self, which: str = "I") -> np.ndarray:
        return getattr(self, which) / self.n_nodes[:, None] ** 2


def single_frequency_state(state: RadiationState, scenario: AtmosphereScenario, nu: float,
                           tol: float = 1e-14, max_iter: int = 500, ops: KernelOperators | None = None):
    """Moments at an arbitrary frequency ``nu`` consistent with the temperatures of ``state``.

    With ``T`` frozen the moment update is linear in the moments and
    contractive (albedo below one), so plain iteration converges.
    """
    if nu <= 0:
        raise DomainError("frequency must be positive")
    sub = scenario.with_(freq=FrequencyGrid(np.array([float(nu)]), np.array([1.0]), float(nu)))
    ops = ops or KernelOperators.build(sub, mode="direct")
    nz = sub.z_grid.size
    cur = RadiationState.zero(nz, 1)
    cur.T = state.T.copy()
    for _ in range(max_iter):
        j0, j2, k0, k2 = update_moments(cur, sub, ops)
        delta = max(np.max(np.abs(j0 - cur.J0)), np.max(np.abs(j2 - cur.J2)))
        cur = RadiationState(j0, j2, k0, k2, cur.T, cur.iteration + 1)
        if delta <= tol * max(np.max(np.abs(j0)), 1e-300):
            return cur, sub
    raise NumericalError(f"single-frequency moments did not converge at nu={nu}")


def default_mu_mesh(n: int = 400) -> np.ndarray:
    """Midpoints of a uniform partition of ``[-1, 1]`` (never exactly 0)."""
    e = np.linspace(-1.0, 1.0, n + 1)
    return 0.5 * (e[:-1] + e[1:])


def reconstruct(state: RadiationState, scenario: AtmosphereScenario, nu: float,
                mu_nodes=None, dz: float = 1.0 / 600) -> StokesField:
    """Characteristic solution for ``I`` and ``Q`` at one frequency.

    Upward rays carry the ground emission ``c_E B(T_E) mu_0``; downward
    rays carry the sunlight ``c_S B(T_S) |mu_Z|``. Q has no boundary source.
    """
    mu = default_mu_mesh() if mu_nodes is None else np.asarray(mu_nodes, dtype=float)
    if np.any(mu == 0) or np.any(np.abs(mu) > 1):
        raise DomainError("mu mesh must lie in [-1, 1] and avoid 0")
    one, sub = single_frequency_state(state, scenario, nu)
    s0, s2, q0, q2 = (a[:, 0] for a in assemble_sources(one, sub))
    z = sub.z_grid
    prof = sub.profile
    mids, lens, node_edge = grid_cells(z, prof, dz)
    n_cell = prof.n(mids)
    n_node = sub.n_nodes
    kap_cell = sub.kappa.shape(mids) * sub.kappa_nu[0]
    # source over kappa, linear in z between nodes
    kap_node = sub.kappa_zn[:, 0]
    ratios = [np.interp(mids, z, s / kap_node) for s in (s0, s2, q0, q2)]
    b = sub.boundary
    ground = b.c_E * planck(nu, b.T_E) / prof.n_bottom**2
    sun = b.c_S * planck(nu, b.T_S) / prof.n_top**2
    thr = mu_star_sq(z, prof)
    I = np.full((z.size, mu.size), np.nan)
    Q = np.full((z.size, mu.size), np.nan)
    for i in range(z.size):
        ok = mu * mu > thr[i] + CONE_SLACK if thr[i] > 0 else np.ones(mu.size, bool)
        for sign in (1, -1):
            sel = ok & (np.sign(mu) == sign)
            if not np.any(sel):
                continue
            m = mu[sel]
            cells = slice(0, node_edge[i]) if sign > 0 else slice(node_edge[i], mids.size)
            c = 1.0 - m * m
            e2 = 1.0 - c[None, :] * (n_node[i] / n_cell[cells, None]) ** 2
            cos_cell = np.sqrt(np.clip(e2, 1e-300, None))
            dtau = kap_cell[cells, None] * lens[cells, None] / cos_cell
            # optical depth from the far edge of each cell to z
            if sign > 0:
                near = np.cumsum(dtau[::-1], axis=0)[::-1] - dtau
            else:
                near = np.cumsum(dtau, axis=0) - dtau
            weight = np.exp(-near) * -np.expm1(-dtau)
            cos2 = cos_cell**2
            src_I = ratios[0][cells, None] + cos2 * ratios[1][cells, None]
            src_Q = ratios[2][cells, None] + cos2 * ratios[3][cells, None]
            total = dtau.sum(axis=0)
            edge = 0 if sign > 0 else -1
            mu_edge = np.sqrt(np.clip(1.0 - c * (n_node[i] / n_node[edge]) ** 2, 0.0, None))
            bnd = (ground if sign > 0 else sun) * mu_edge * np.exp(-total)
            I[i, sel] = bnd + np.sum(weight * src_I, axis=0)
            Q[i, sel] = np.sum(weight * src_Q, axis=0)
    scale = n_node[:, None] ** 2
    return StokesField(nu=float(nu), z_nodes=z, mu_nodes=mu, I=I * scale, Q=Q * scale, n_nodes=n_node)


@dataclass
class ConsistencyReport:
    rel_J: tuple
    rel_K: tuple
    gate: float

    @property
    def ok(self) -> bool:
        return max(self.rel_J) < self.gate and max(self.rel_K) < self.gate


def field_moments(field: StokesField, which: str = "I", k: int = 0) -> np.ndarray:
    """``1/2 int mu^k X~ dmu`` by the midpoint rule on the field's mesh."""
    mu = field.mu_nodes
    e = np.concatenate([[-1.0], 0.5 * (mu[:-1] + mu[1:]), [1.0]])
    w = np.diff(e)
    vals = np.nan_to_num(field.tilde(which), nan=0.0)
    return 0.5 * vals @ (w * mu**k)


def moment_consistency(field: StokesField, state: RadiationState, scenario: AtmosphereScenario,
                       gate: float = 0.02) -> ConsistencyReport:
    """Compare the field's angular moments with the solver moments at the field's frequency.

    Errors are relative to the largest magnitude of each moment over z.
    """
    one, _ = single_frequency_state(state, scenario, field.nu)
    ref = {("I", 0): one.J0[:, 0], ("I", 2): one.J2[:, 0], ("Q", 0): one.K0[:, 0], ("Q", 2): one.K2[:, 0]}

    def rel(which, k):
        r = ref[(which, k)]
        scale = np.max(np.abs(r))
        if scale == 0:
            return float(np.max(np.abs(field_moments(field, which, k))))
        return float(np.max(np.abs(field_moments(field, which, k) - r)) / scale)

    return ConsistencyReport(rel_J=(rel("I", 0), rel("I", 2)), rel_K=(rel("Q", 0), rel("Q", 2)), gate=gate)


def export_surface(field: StokesField, path, which: str = "I") -> Path:
    """Write ``z mu value`` triples, one block per altitude separated by blank lines.

    Inadmissible cells are written as ``nan``.
    """
    path = Path(path)
    vals = getattr(field, which)
    lines = [f"# z mu {which}  nu={field.nu:.8e}"]
    for i, z in enumerate(field.z_nodes):
        for j, m in enumerate(field.mu_nodes):
            v = vals[i, j]
            lines.append(f"{z:.8e} {m:.8e} {'nan' if not np.isfinite(v) else f'{v:.8e}'}")
        lines.append("")
    path.write_text("\n".join(lines) + "\n")
    return path
