"""Absorption tables, run configuration and plain-text result writers."""
from __future__ import annotations

import dataclasses
import hashlib
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from .errors import ConfigError, DataError
from .kernels import QuadratureSpec
from .optics import RefractiveProfile
from .physics import FrequencyGrid, nu_to_wavelength
from .solver import (TEMPERATURE_SCALE, AtmosphereScenario, Boundary, KappaModel, Scattering,
                     Solution, SolveOptions, contraction_ratio, from_celsius, to_celsius)

BUILTIN_KAPPA = "gemini_like"
FMT = "%.8e"


@dataclass(frozen=True)
class KappaTable:
    """Absorption versus wavelength (micrometres), linearly interpolated.

    Values below ``floor`` are raised to it; ``floored`` counts how many.
    Outside the tabulated range the end values are held.
    """

    wavelengths: np.ndarray
    kappa: np.ndarray
    floor: float = 1e-3
    floored: int = 0

    def __post_init__(self):
        lam = np.asarray(self.wavelengths, dtype=float)
        k = np.asarray(self.kappa, dtype=float)
        if lam.size == 0:
            raise DataError("absorption table is empty")
        if lam.shape != k.shape:
            raise DataError("wavelength and kappa columns differ in length")
        if np.any(np.diff(lam) <= 0):
            raise DataError("wavelengths must be strictly increasing")
        if np.any(k < 0):
            raise DataError("absorption values must be nonnegative")
        if not self.floor > 0:
            raise DataError("kappa floor must be positive")
        object.__setattr__(self, "wavelengths", lam)
        object.__setattr__(self, "kappa", np.maximum(k, self.floor))
        object.__setattr__(self, "floored", int(np.count_nonzero(k < self.floor)))

    def at_wavelength(self, lam):
        return np.interp(np.asarray(lam, dtype=float), self.wavelengths, self.kappa)

    def at_nu(self, nu):
        return self.at_wavelength(nu_to_wavelength(nu))

    def model(self, label: str = "table") -> KappaModel:
        return KappaModel(spectral=self.at_nu, label=label)


def _parse_columns(text: str, source: str):
    rows = []
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 2:
            raise DataError(f"{source}:{lineno}: expected two columns, got {len(parts)}")
        try:
            rows.append((float(parts[0]), float(parts[1])))
        except ValueError:
            raise DataError(f"{source}:{lineno}: non-numeric value in {line!r}") from None
    if not rows:
        raise DataError(f"{source}: no data rows")
    return np.array(rows).T


def load_kappa(path, floor: float = 1e-3) -> KappaTable:
    """Read a two-column ``wavelength_um kappa`` file; ``path`` may be the builtin name."""
    if str(path) == BUILTIN_KAPPA:
        text = resources.files("sourceiter.data").joinpath("kappa_gemini_like.txt").read_text()
    else:
        p = Path(path)
        if not p.is_file():
            raise DataError(f"absorption file not found: {p}")
        text = p.read_text()
    lam, k = _parse_columns(text, str(path))
    return KappaTable(lam, k, floor)


@dataclass(frozen=True)
class Co2Modifier:
    """Extra opacity on a wavelength band; a constant plateau by default."""

    band: tuple = (14.0, 18.0)
    level: float = 0.0
    profile: object = None

    def __post_init__(self):
        lo, hi = self.band
        if not 0 < lo < hi:
            raise ConfigError(f"invalid band {self.band}")
        if self.level < 0:
            raise ConfigError("added opacity must be nonnegative")

    def added(self, lam) -> np.ndarray:
        lam = np.asarray(lam, dtype=float)
        lo, hi = self.band
        inside = (lam >= lo) & (lam <= hi)
        shape = np.ones(lam.shape) if self.profile is None else np.asarray(self.profile(lam), dtype=float)
        if np.any(shape[inside] < 0):
            raise ConfigError("added opacity profile must be nonnegative")
        return np.where(inside, self.level * shape, 0.0)


def apply_co2(table: KappaTable, modifier: Co2Modifier) -> KappaTable:
    """Add the modifier's opacity to the table.

    Band edges are inserted as table nodes (duplicated) so the plateau is
    exact inside the band and the table is unchanged outside it.
    """
    lo, hi = modifier.band
    lam = table.wavelengths
    if lo < lam[0] or hi > lam[-1]:
        raise ConfigError(f"band {modifier.band} outside table range [{lam[0]}, {lam[-1]}]")
    if modifier.level == 0:
        return table
    tiny = 1e-9 * (hi - lo)
    extra = np.array([lo - tiny, lo, hi, hi + tiny])
    grid = np.union1d(lam, extra[(extra > lam[0]) & (extra < lam[-1])])
    base = table.at_wavelength(grid)
    return KappaTable(grid, base + modifier.added(grid), table.floor)


# ---------------------------------------------------------------- configuration


@dataclass
class GridSection:
    nz: int = 100
    z_top: float = 1.0
    nu_min: float = 2e-3
    nu_max: float = 20.0
    n_nu: int = 128


@dataclass
class ProfileSection:
    eps: float = 0.0
    z1: float = 0.5
    z2: float = 0.7


@dataclass
class KappaSection:
    source: str = "gemini"   # gemini | constant | path to a two-column file
    value: float = 0.5
    floor: float = 1e-3


@dataclass
class Co2Section:
    level: float = 0.0
    band_lo: float = 14.0
    band_hi: float = 18.0


@dataclass
class ScatterSection:
    beta: float = 0.5
    a1: float = 0.7
    a2: float = 0.3
    z1: float = 0.4
    z2: float = 0.8
    nu1: float = 0.6
    nu2: float = 1.5


@dataclass
class BoundarySection:
    # empty strings mean "take the case default"
    c_E: str = ""
    c_S: str = ""
    t_ground_k: float = 300.0
    t_sun_k: float = 5700.0


@dataclass
class QuadSection:
    delta_mu: float = 0.01
    mu_switch: float = 0.1
    dz_inner: float = 1.0 / 60


@dataclass
class SolverSection:
    tol: float = 1e-4
    max_iter: int = 60
    kernel: str = "table"
    t_update: str = "lagged"
    hot_t0_celsius: str = ""
    probe_z: float = 0.03
    n_kappa: int = 50


@dataclass
class OutputSection:
    dir: str = "out"
    clamp_k0: bool = False
    nu_surface: float = 0.1436
    n_mu_surface: int = 400


SECTIONS = {
    "grid": GridSection, "profile": ProfileSection, "kappa": KappaSection, "co2": Co2Section,
    "scatter": ScatterSection, "boundary": BoundarySection, "quad": QuadSection,
    "solver": SolverSection, "output": OutputSection,
}
CASES = ("case1", "case2")


@dataclass
class RunConfig:
    """Everything needed to reproduce a run.

    ``case1`` has ground infrared emission and no sun unless ``boundary.c_S``
    is set; ``case2`` has sunlight at the top and no ground emission unless
    ``boundary.c_E`` is set.
    """

    case: str = "case1"
    grid: GridSection = field(default_factory=GridSection)
    profile: ProfileSection = field(default_factory=ProfileSection)
    kappa: KappaSection = field(default_factory=KappaSection)
    co2: Co2Section = field(default_factory=Co2Section)
    scatter: ScatterSection = field(default_factory=ScatterSection)
    boundary: BoundarySection = field(default_factory=BoundarySection)
    quad: QuadSection = field(default_factory=QuadSection)
    solver: SolverSection = field(default_factory=SolverSection)
    output: OutputSection = field(default_factory=OutputSection)
    base_dir: Path = field(default=Path("."), compare=False, repr=False)

    def __post_init__(self):
        if self.case not in CASES:
            raise ConfigError(f"case must be one of {CASES}, got {self.case!r}")

    # --- text form
    @classmethod
    def parse(cls, text: str, base_dir=".") -> "RunConfig":
        cfg = cls(base_dir=Path(base_dir))
        for lineno, raw in enumerate(text.splitlines(), 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"line {lineno}: expected 'key = value'")
            key, value = (s.strip() for s in line.split("=", 1))
            cfg.set(key, value, where=f"line {lineno}")
        cfg.__post_init__()
        return cfg

    @classmethod
    def load(cls, path) -> "RunConfig":
        p = Path(path)
        if not p.is_file():
            raise ConfigError(f"config file not found: {p}")
        return cls.parse(p.read_text(), base_dir=p.parent)

    def set(self, key: str, value: str, where: str = "") -> None:
        prefix = f"{where}: " if where else ""
        if key == "case":
            self.case = value
            return
        if "." not in key:
            raise ConfigError(f"{prefix}unknown key {key!r}")
        sec, name = key.split(".", 1)
        if sec not in SECTIONS:
            raise ConfigError(f"{prefix}unknown section {sec!r}")
        obj = getattr(self, sec)
        types = {f.name: f.type for f in dataclasses.fields(obj)}
        if name not in types:
            raise ConfigError(f"{prefix}unknown key {key!r}")
        setattr(obj, name, _coerce(value, types[name], f"{prefix}{key}"))

    def serialize(self) -> str:
        lines = [f"case = {self.case}"]
        for sec in SECTIONS:
            for f in dataclasses.fields(getattr(self, sec)):
                lines.append(f"{sec}.{f.name} = {_format(getattr(getattr(self, sec), f.name))}")
        return "\n".join(lines) + "\n"

    @property
    def digest(self) -> str:
        return hashlib.sha256(self.serialize().encode()).hexdigest()[:12]

    # --- domain objects
    def kappa_table(self) -> KappaTable | None:
        src = self.kappa.source
        if src == "constant":
            return None
        path = BUILTIN_KAPPA if src == "gemini" else self.base_dir / src
        return load_kappa(path, self.kappa.floor)

    def kappa_model(self) -> KappaModel:
        table = self.kappa_table()
        if table is None:
            if self.co2.level:
                raise ConfigError("a CO2 modifier needs a tabulated absorption spectrum")
            return KappaModel.constant(self.kappa.value)
        label = self.kappa.source
        if self.co2.level:
            table = apply_co2(table, Co2Modifier((self.co2.band_lo, self.co2.band_hi), self.co2.level))
            label += f"+co2({self.co2.level})"
        return table.model(label)

    def boundary_model(self) -> Boundary:
        b = self.boundary
        c_E = _maybe_float(b.c_E, 2.5 if self.case == "case1" else 0.0, "boundary.c_E")
        c_S = _maybe_float(b.c_S, 0.0 if self.case == "case1" else 2e-5, "boundary.c_S")
        return Boundary(c_E=c_E, T_E=b.t_ground_k / TEMPERATURE_SCALE, c_S=c_S, T_S=b.t_sun_k / TEMPERATURE_SCALE)

    def scenario(self) -> AtmosphereScenario:
        g = self.grid
        try:
            return AtmosphereScenario(
                z_grid=np.linspace(0.0, g.z_top, g.nz),
                freq=FrequencyGrid.geometric(g.nu_min, g.nu_max, g.n_nu),
                profile=RefractiveProfile.cloud(self.profile.eps, self.profile.z1, self.profile.z2, g.z_top),
                kappa=self.kappa_model(),
                scattering=Scattering(**dataclasses.asdict(self.scatter)),
                boundary=self.boundary_model(),
            )
        except ValueError as exc:
            if isinstance(exc, (ConfigError, DataError)):
                raise
            raise ConfigError(str(exc)) from exc

    def solve_options(self) -> SolveOptions:
        s = self.solver
        hot = s.hot_t0_celsius.strip()
        return SolveOptions(
            tol=s.tol, max_iter=s.max_iter, kernel=s.kernel, t_update=s.t_update,
            hot_T0=float(from_celsius(float(hot))) if hot else None, probe_z=s.probe_z,
            quad=QuadratureSpec(self.quad.delta_mu, self.quad.mu_switch, dz_inner=self.quad.dz_inner),
            n_kappa=s.n_kappa,
        )


def _coerce(value: str, typ, where: str):
    typ = typ if isinstance(typ, str) else typ.__name__
    try:
        if typ == "int":
            return int(value)
        if typ == "float":
            return float(value)
        if typ == "bool":
            low = value.lower()
            if low not in ("true", "false", "1", "0", "yes", "no"):
                raise ValueError(value)
            return low in ("true", "1", "yes")
    except ValueError:
        raise ConfigError(f"{where}: cannot read {value!r} as {typ}") from None
    return value


def _format(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _maybe_float(text: str, default: float, key: str) -> float:
    if not str(text).strip():
        return default
    try:
        return float(text)
    except ValueError:
        raise ConfigError(f"{key}: cannot read {text!r} as float") from None


# ---------------------------------------------------------------- writers

K0_CLAMP = -2e-6


def _table(path: Path, header: str, columns) -> None:
    data = np.column_stack(columns)
    with open(path, "w") as fh:
        fh.write(header + "\n")
        np.savetxt(fh, data, fmt=FMT)


def write_outputs(solution: Solution, config: RunConfig, out_dir=None, clamp_k0: bool | None = None) -> list:
    """Write temperature, boundary spectra, convergence trace and diagnostic tables."""
    out = Path(out_dir if out_dir is not None else config.output.dir)
    clamp = config.output.clamp_k0 if clamp_k0 is None else clamp_k0
    out.mkdir(parents=True, exist_ok=True)
    sc, st, rep = solution.scenario, solution.state, solution.report
    tag = f"config={config.digest}"
    z = sc.z_grid
    files = []

    p = out / "temperature.txt"
    _table(p, f"# z T_scaled T_celsius T_lower_celsius  {tag}",
           [z, st.T, to_celsius(st.T), to_celsius(solution.lower.T)])
    files.append(p)

    n2 = sc.n_nodes**2
    lam = nu_to_wavelength(sc.nu)
    order = np.argsort(lam)
    for name, idx in (("spectra_z0.txt", 0), ("spectra_zZ.txt", -1)):
        j0 = st.J0[idx] * n2[idx]
        k0 = st.K0[idx] * n2[idx]
        if clamp:
            k0 = np.maximum(k0, K0_CLAMP)
        p = out / name
        _table(p, f"# wavelength_um nu J0 K0  z={z[idx]:.6g} clamp_k0={str(clamp).lower()}  {tag}",
               [lam[order], sc.nu[order], j0[order], k0[order]])
        files.append(p)

    p = out / "convergence.txt"
    with open(p, "w") as fh:
        fh.write(f"# iteration branch T_probe_celsius max_dT bracket_width  probe_z={z[rep.probe_index]:.6g}  {tag}\n")
        for m, branch, t, d, w in rep.rows:
            fh.write(f"{m:d} {branch} {FMT % to_celsius(t)} {FMT % d} {FMT % w}\n")
    files.append(p)

    p = out / "diagnostic.txt"
    diag = contraction_ratio(sc)
    lines = [f"# contraction diagnostic  {tag}"]
    for f in dataclasses.fields(diag):
        lines.append(f"{f.name} {FMT % getattr(diag, f.name)}")
    lines += [f"geometric {str(diag.geometric).lower()}",
              f"iterations {rep.iterations}", f"converged {str(rep.converged).lower()}",
              f"bracket_width {FMT % rep.bracket_width}",
              f"monotone_increasing {str(rep.monotone_inc).lower()}",
              f"monotone_decreasing {str(rep.monotone_dec).lower()}"]
    p.write_text("\n".join(lines) + "\n")
    files.append(p)
    return files
