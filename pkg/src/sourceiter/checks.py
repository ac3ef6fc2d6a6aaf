"""Self-checks behind ``sourceiter verify``.

Each check returns ``(name, passed, detail)``. The quick set only runs the
constant-index kernel precision check.
"""
from __future__ import annotations

import time

import numpy as np

from .kernels import OpticalPath, QuadratureSpec, expint, phi_bound_check
from .optics import RefractiveProfile, check_propagation, mu_star_sq
from .physics import FrequencyGrid, full_phase_parts, planck, stefan


def kernel_precision(nz: int = 100, gate: float = 0.01):
    """Constant index, ``kappa = 0.5 (1 - z/2)``: lattice kernels vs classical ``E_k``."""
    from .kernels import KernelLattice

    t0 = time.perf_counter()
    z = np.linspace(0.0, 1.0, nz)
    shape = lambda s: 1.0 - np.asarray(s) / 2.0  # noqa: E731
    lat = KernelLattice.build(z, RefractiveProfile.constant(), shape, QuadratureSpec(delta_mu=0.01))
    ker = lat.kernels(0.5)
    # optical depth from the ground: 0.5 * (z - z^2/4)
    tau = 0.5 * (z - z * z / 4.0)
    worst = 0.0
    for k in (1, 3, 5):
        exact = expint(k, tau[1:])
        worst = max(worst, float(np.max(np.abs(ker[k][1:, 0] - exact) / exact)))
    dt = time.perf_counter() - t0
    return "kernel precision", worst < gate and dt < 10, f"max rel err {worst:.2e}, {dt:.2f}s"


def stefan_gate(grid: FrequencyGrid | None = None, gate: float = 1e-3):
    grid = grid or FrequencyGrid.geometric()
    errs = [abs(grid.integrate(planck(grid.nodes, T)) / stefan(T) - 1) for T in (0.02, 0.0625, 0.2)]
    return "stefan", max(errs) < gate, f"max rel err {max(errs):.2e}"


def phase_cancellation(gate: float = 1e-12):
    rng = np.random.default_rng(0)
    phis = 2 * np.pi * np.arange(64) / 64
    worst = 0.0
    for mu, mup, phi0 in rng.uniform([-1, -1, 0], [1, 1, 2 * np.pi], size=(20, 3)):
        acc = np.zeros((4, 4))
        for p in phis:
            _, p1, p2 = full_phase_parts(mu, phi0, mup, p)
            acc += p1 + p2
        worst = max(worst, float(np.max(np.abs(acc / phis.size))))
    return "phase cancellation", worst < gate, f"max |mean| {worst:.1e}"


def propagation(eps_values=(0.01, 0.03)):
    bad = 0
    for eps in eps_values:
        bad += len(check_propagation(RefractiveProfile.cloud(eps), np.linspace(0, 1, 100), 50).violations)
    return "admissibility propagation", bad == 0, f"{bad} violations"


def bound_samples(profile: RefractiveProfile, n: int = 1000, seed: int = 0):
    """Random admissible ``(z, z', mu)`` with ``z != z'``; returns the failing fraction and one example."""
    rng = np.random.default_rng(seed)
    fails, example, done = 0, None, 0
    while done < n:
        z, zp, mu = rng.uniform(0, 1), rng.uniform(0, 1), rng.uniform(0, 1)
        if abs(z - zp) < 1e-6 or mu * mu <= mu_star_sq(z, profile) + 1e-12:
            continue
        done += 1
        if not phi_bound_check(OpticalPath(z, zp, 0.5, profile), mu):
            fails += 1
            example = example or (z, zp, mu)
    return fails / n, example


def attenuation_bound():
    out = []
    for eps in (0.0, 0.01):
        frac, ex = bound_samples(RefractiveProfile.cloud(eps))
        detail = f"eps={eps}: {frac:.1%} of samples violate"
        if ex:
            detail += f" (e.g. z={ex[0]:.3f} z'={ex[1]:.3f} mu={ex[2]:.3f})"
        out.append((f"attenuation bound eps={eps}", frac == 0, detail))
    return out


def monotone_traces():
    from .solver import AtmosphereScenario, Boundary, solve

    sol = solve(AtmosphereScenario.default(boundary=Boundary(c_S=0.0)))
    r = sol.report
    ok = r.monotone_inc and r.monotone_dec and r.bracket_ok and r.converged
    return "monotone traces (kappa=0.5)", ok, f"{r.iterations} sweeps, bracket {r.bracket_width:.2e}"


def run_all(quick: bool = False):
    results = [kernel_precision()]
    if quick:
        return results
    results += [stefan_gate(), phase_cancellation(), propagation()]
    results += attenuation_bound()
    results.append(monotone_traces())
    return results
