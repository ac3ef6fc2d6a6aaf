"""Source iterations for radiative transfer with polarization and variable refractive index."""
from .errors import (ConfigError, DataError, DomainError, ForbiddenRayError, NumericalError,
                     UnsupportedError)
from .fields import StokesField, moment_consistency, reconstruct
from .kernels import KernelLattice, KernelTable, QuadratureSpec, build_table, ek_general
from .optics import RefractiveProfile, admissibility, check_propagation, eta
from .physics import FrequencyGrid, planck, stefan
from .scenario_io import Co2Modifier, KappaTable, RunConfig, apply_co2, load_kappa, write_outputs
from .solver import (AtmosphereScenario, Boundary, KappaModel, RadiationState, Scattering,
                     SolveOptions, contraction_ratio, iterate, solve)

__version__ = "0.1.0"
