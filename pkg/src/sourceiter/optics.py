"""Ray geometry in a stratified medium with altitude-dependent refractive index.

A ray with direction cosine ``mu`` at altitude ``z`` keeps
``(1 - mu^2) n(z)^2`` constant along its characteristic, so its direction
cosine at ``z''`` is ``eta = sqrt(1 - (1 - mu^2) n_z^2 / n_z''^2)``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DataError, DomainError

# slack used when comparing against the admissibility threshold
CONE_SLACK = 1e-12


@dataclass(frozen=True)
class RefractiveProfile:
    """Refractive index as a function of scaled altitude ``z in [0, z_top]``.

    ``kind`` is one of ``"constant"``, ``"cloud"`` (a slab
    ``n = 1 + eps`` on the open interval ``(z1, z2)``) or ``"table"``
    (linear interpolation of ``(table_z, table_n)``).
    """

    kind: str = "constant"
    eps: float = 0.0
    z1: float = 0.5
    z2: float = 0.7
    z_top: float = 1.0
    base: float = 1.0
    table_z: tuple = field(default=(), repr=False)
    table_n: tuple = field(default=(), repr=False)

    def __post_init__(self):
        if self.kind not in ("constant", "cloud", "table"):
            raise DomainError(f"unknown profile kind {self.kind!r}")
        if self.z_top <= 0:
            raise DomainError("z_top must be positive")
        if self.kind == "cloud" and not (0 <= self.z1 < self.z2 <= self.z_top):
            raise DomainError("cloud slab must satisfy 0 <= z1 < z2 <= z_top")
        if self.kind == "table":
            z = np.asarray(self.table_z, dtype=float)
            n = np.asarray(self.table_n, dtype=float)
            if z.size < 2 or z.shape != n.shape:
                raise DataError("refractive table needs at least two (z, n) rows")
            if np.any(np.diff(z) <= 0):
                raise DataError("refractive table altitudes must be strictly increasing")
        if np.any(self.n(np.linspace(0.0, self.z_top, 201)) < 1.0):
            raise DomainError("refractive index must be >= 1")

    @classmethod
    def constant(cls, z_top: float = 1.0) -> "RefractiveProfile":
        return cls(kind="constant", z_top=z_top)

    @classmethod
    def cloud(cls, eps: float = 0.01, z1: float = 0.5, z2: float = 0.7, z_top: float = 1.0) -> "RefractiveProfile":
        return cls(kind="cloud", eps=float(eps), z1=z1, z2=z2, z_top=z_top)

    @classmethod
    def from_table(cls, path) -> "RefractiveProfile":
        """Read a two-column ``z n`` text file (``#`` comments allowed)."""
        rows = []
        for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            try:
                rows.append((float(parts[0]), float(parts[1])))
            except (ValueError, IndexError):
                raise DataError(f"{path}:{lineno}: expected two numeric columns") from None
        z, n = zip(*rows) if rows else ((), ())
        return cls(kind="table", z_top=float(z[-1]) if z else 1.0, table_z=tuple(z), table_n=tuple(n))

    def n(self, z):
        """Refractive index at altitude(s) ``z``."""
        z = np.asarray(z, dtype=float)
        if self.kind == "constant":
            out = np.full(z.shape, self.base)
        elif self.kind == "cloud":
            out = np.where((z > self.z1) & (z < self.z2), self.base + self.eps, self.base)
        else:
            out = np.interp(z, self.table_z, self.table_n)
        return out if out.ndim else float(out)

    @property
    def breakpoints(self) -> np.ndarray:
        """Altitudes where ``n`` is discontinuous or has a kink."""
        if self.kind == "cloud" and self.eps != 0:
            return np.array([self.z1, self.z2])
        if self.kind == "table":
            return np.asarray(self.table_z[1:-1], dtype=float)
        return np.empty(0)

    @property
    def is_constant(self) -> bool:
        return self.kind == "constant" or (self.kind == "cloud" and self.eps == 0)

    @property
    def n_bottom(self) -> float:
        return float(self.n(0.0))

    @property
    def n_top(self) -> float:
        return float(self.n(self.z_top))


def path_cells(profile: RefractiveProfile, a: float, b: float, dz: float):
    """Split ``[min(a,b), max(a,b)]`` into cells no longer than ``dz``.

    Cell edges include every profile breakpoint inside the interval, so ``n``
    is constant (cloud) or linear (table) within each cell.
    Returns ``(midpoints, lengths)``.
    """
    lo, hi = (a, b) if a <= b else (b, a)
    if hi == lo:
        return np.empty(0), np.empty(0)
    bps = profile.breakpoints
    edges = np.concatenate([[lo], bps[(bps > lo) & (bps < hi)], [hi]])
    mids, lens = [], []
    for left, right in zip(edges[:-1], edges[1:]):
        m = max(1, int(np.ceil((right - left) / dz - 1e-9)))
        e = np.linspace(left, right, m + 1)
        mids.append(0.5 * (e[:-1] + e[1:]))
        lens.append(np.diff(e))
    return np.concatenate(mids), np.concatenate(lens)


def _eta_sq(mu, n_from, n_to):
    return 1.0 - (1.0 - mu * mu) * (n_from / n_to) ** 2


def eta(mu, z, z2, profile: RefractiveProfile):
    """Direction cosine at ``z2`` of the ray leaving ``z`` with cosine ``mu``.

    Keeps the sign of ``mu``. Returns ``nan`` when the ray cannot reach
    ``z2`` (radicand <= 0 with ``|mu| < 1``): that is a value, not an error.
    """
    mu = np.asarray(mu, dtype=float)
    if np.any(np.abs(mu) > 1):
        raise DomainError("direction cosine must lie in [-1, 1]")
    r = _eta_sq(mu, profile.n(z), profile.n(z2))
    r = np.broadcast_to(r, np.broadcast(mu, r).shape)
    mu_b = np.broadcast_to(mu, r.shape)
    out = np.where(r > 0, np.sign(mu_b) * np.sqrt(np.where(r > 0, r, 0.0)), np.nan)
    out = np.where(np.abs(mu_b) == 1.0, mu_b, out)
    return out if out.ndim else float(out)


def eta_h(mu, z, z2, profile: RefractiveProfile, orientation: str = "printed"):
    """Linearised direction transport used by the fast kernel path.

    ``orientation="printed"`` gives ``mu * n(z2) / n(z)``; ``"reciprocal"``
    gives ``mu * n(z) / n(z2)``.
    """
    ratio = profile.n(z2) / profile.n(z)
    if orientation == "reciprocal":
        ratio = 1.0 / ratio
    elif orientation != "printed":
        raise DomainError(f"unknown orientation {orientation!r}")
    return np.asarray(mu, dtype=float) * ratio if np.ndim(mu) else float(mu) * float(ratio)


@dataclass(frozen=True)
class AdmissibilityCone:
    """Admissible directions at ``z``: ``mu^2 > mu_star_sq``.

    Directions with ``mu_lo < mu < mu_hi`` are totally refracted before
    reaching a boundary and are excluded.
    """

    z: float
    mu_star_sq: float
    mu_lo: float
    mu_hi: float

    def admits(self, mu) -> np.ndarray:
        # ties at the threshold are classified inadmissible
        mu = np.asarray(mu, dtype=float)
        return mu * mu > self.mu_star_sq + CONE_SLACK if self.mu_star_sq > 0 else mu != 0


def mu_star_sq(z, profile: RefractiveProfile):
    """Squared admissibility threshold ``max(0, 1 - n0^2/nz^2, 1 - nZ^2/nz^2)``."""
    nz = np.asarray(profile.n(z), dtype=float)
    n0, nZ = profile.n_bottom, profile.n_top
    out = np.maximum(0.0, np.maximum(1 - (n0 / nz) ** 2, 1 - (nZ / nz) ** 2))
    return out if out.ndim else float(out)


def admissibility(z: float, profile: RefractiveProfile) -> AdmissibilityCone:
    if not 0 <= z <= profile.z_top:
        raise DomainError(f"altitude {z} outside [0, {profile.z_top}]")
    s = mu_star_sq(z, profile)
    m = float(np.sqrt(s))
    return AdmissibilityCone(z=float(z), mu_star_sq=s, mu_lo=-m, mu_hi=m)


@dataclass
class PropagationReport:
    checked: int
    skipped: int
    violations: list

    @property
    def ok(self) -> bool:
        return not self.violations


def check_propagation(profile: RefractiveProfile, z_grid, n_mu: int = 50, mu_values=None) -> PropagationReport:
    """Verify that a direction admissible at ``z`` stays admissible along its ray.

    For every grid altitude and every lattice direction admissible there, the
    transported cosine must satisfy the admissibility inequality at every other
    grid altitude (up to ``CONE_SLACK``). Inadmissible lattice directions are
    counted as skipped.
    """
    z_grid = np.asarray(z_grid, dtype=float)
    mus = np.linspace(-1.0, 1.0, n_mu) if mu_values is None else np.asarray(mu_values, dtype=float)
    thresholds = mu_star_sq(z_grid, profile)
    checked = skipped = 0
    violations = []
    for z, s in zip(z_grid, thresholds):
        good = mus * mus > s + CONE_SLACK if s > 0 else mus != 0
        skipped += int(np.count_nonzero(~good))
        for mu in mus[good]:
            checked += 1
            moved = eta(mu, z, z_grid, profile)
            bad = ~(moved * moved >= thresholds - CONE_SLACK)
            if np.any(bad):
                j = int(np.argmax(bad))
                violations.append((float(z), float(mu), float(z_grid[j])))
    return PropagationReport(checked=checked, skipped=skipped, violations=violations)
