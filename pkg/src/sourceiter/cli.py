"""Command line entry point: ``python -m sourceiter <command> [options]``.

Exit codes: 0 success, 1 configuration or usage error, 2 numerical
failure, 3 a verification check failed.
"""
from __future__ import annotations

import argparse
import sys
import time
from pathlib import Path

import numpy as np

from .errors import ConfigError, DataError, DomainError, NumericalError, UnsupportedError
from .fields import export_surface, moment_consistency, reconstruct
from .scenario_io import RunConfig, write_outputs
from .solver import contraction_ratio, scenario_table, solve

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_VERIFY = 0, 1, 2, 3


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise _UsageError(message)


def _parser() -> argparse.ArgumentParser:
    p = _Parser(prog="sourceiter", description="Radiative equilibrium of a stratified atmosphere.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp):
        sp.add_argument("--config", type=Path, help="run configuration file")
        sp.add_argument("--out", type=Path, help="output directory (overrides output.dir)")
        sp.add_argument("--eps", type=float, help="refractive index bump inside the cloud slab")
        sp.add_argument("--co2", type=float, help="added opacity on the CO2 band")
        return sp

    s = common(sub.add_parser("solve", help="solve and write result tables"))
    s.add_argument("--clamp-k0", action="store_true", help="write max(K0, -2e-6) in the spectra tables")
    common(sub.add_parser("table", help="build and save the kernel table"))
    r = common(sub.add_parser("reconstruct", help="export I and Q surfaces at one frequency"))
    r.add_argument("--nu", type=float, help="scaled frequency (default output.nu_surface)")
    v = sub.add_parser("verify", help="run the built-in property checks")
    v.add_argument("--quick", action="store_true", help="constant-index kernel check only")
    common(sub.add_parser("diag", help="print the contraction diagnostic"))
    return p


def _config(args) -> RunConfig:
    cfg = RunConfig.load(args.config) if getattr(args, "config", None) else RunConfig()
    if getattr(args, "eps", None) is not None:
        cfg.profile.eps = args.eps
    if getattr(args, "co2", None) is not None:
        cfg.co2.level = args.co2
    if getattr(args, "out", None) is not None:
        cfg.output.dir = str(args.out)
    return cfg


def _cmd_solve(args) -> int:
    cfg = _config(args)
    sol = solve(cfg.scenario(), cfg.solve_options())
    files = write_outputs(sol, cfg, clamp_k0=args.clamp_k0 or None)
    rep = sol.report
    print(f"converged={rep.converged} iterations={rep.iterations} bracket={rep.bracket_width:.3e}")
    for f in files:
        print(f)
    return EXIT_OK if rep.converged else EXIT_NUMERIC


def _cmd_table(args) -> int:
    cfg = _config(args)
    sc = cfg.scenario()
    opts = cfg.solve_options()
    tab = scenario_table(sc, opts.quad, opts.n_kappa)
    out = Path(cfg.output.dir)
    out.mkdir(parents=True, exist_ok=True)
    path = out / "kernel_table.npz"
    tab.save(path)
    print(f"{path}  nz={tab.z_nodes.size} nkappa={tab.kappa_nodes.size} build={tab.build_seconds:.2f}s")
    return EXIT_OK


def _cmd_reconstruct(args) -> int:
    cfg = _config(args)
    sc = cfg.scenario()
    sol = solve(sc, cfg.solve_options())
    nu = args.nu if args.nu is not None else cfg.output.nu_surface
    n = cfg.output.n_mu_surface
    edges = np.linspace(-1.0, 1.0, n + 1)
    field = reconstruct(sol.state, sc, nu, 0.5 * (edges[:-1] + edges[1:]))
    out = Path(cfg.output.dir)
    out.mkdir(parents=True, exist_ok=True)
    for which in ("I", "Q"):
        print(export_surface(field, out / f"surface_{which}_nu{nu:g}.txt", which))
    rep = moment_consistency(field, sol.state, sc)
    print(f"moment check J0,J2={rep.rel_J[0]:.2e},{rep.rel_J[1]:.2e} K0,K2={rep.rel_K[0]:.2e},{rep.rel_K[1]:.2e}")
    return EXIT_OK


def _cmd_verify(args) -> int:
    from . import checks

    results = checks.run_all(quick=args.quick)
    for name, ok, detail in results:
        print(f"{'PASS' if ok else 'FAIL'} {name}: {detail}")
    return EXIT_OK if all(ok for _, ok, _ in results) else EXIT_VERIFY


def _cmd_diag(args) -> int:
    d = contraction_ratio(_config(args).scenario())
    for key, val in vars(d).items():
        print(f"{key} {val:.8e}")
    print(f"geometric {str(d.geometric).lower()}")
    return EXIT_OK


COMMANDS = {"solve": _cmd_solve, "table": _cmd_table, "reconstruct": _cmd_reconstruct,
            "verify": _cmd_verify, "diag": _cmd_diag}


def run_cli(argv=None) -> int:
    try:
        args = _parser().parse_args(argv)
    except _UsageError:
        return EXIT_CONFIG
    except SystemExit as exc:  # --help
        return EXIT_OK if exc.code in (0, None) else EXIT_CONFIG
    t0 = time.perf_counter()
    try:
        code = COMMANDS[args.command](args)
    except (ConfigError, DataError, DomainError, UnsupportedError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except OSError as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    print(f"elapsed {time.perf_counter() - t0:.1f}s", file=sys.stderr)
    return code


def main() -> None:
    sys.exit(run_cli())
