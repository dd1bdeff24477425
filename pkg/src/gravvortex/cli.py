"""Command-line entry point.

Exit status: 0 success, 1 configuration error, 2 an existence gate failed
(no solution by theorem), 3 the solver failed to converge.
"""

from __future__ import annotations

import argparse
import copy
import itertools
import json
import math
import platform
import sys
import time
import traceback
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from .einstein_bogomolnyi import (EBProblem, YangClass, as_grav, eb_parameter_check,
                                  integrated_identity, longitudinal_amplitude, radial_ode_oracle,
                                  solve_eb, yang_hypothesis_check)
from .errors import (ConfigurationError, ConvergenceFailure, GravVortexError, NoSolutionExists,
                     ShootingFailure, SingularJacobian)
from .geometry import make_sphere_grid, make_torus_grid
from .gravitating import GravProblem, compute_c, continue_in_alpha, solve_grav
from .io import (COMMANDS, field_csv, load_config, sha256, table_csv, validate_config,
                 write_json)
from .reduction import assemble_and_check, compute_lambda, identity_probe
from .sections import (Divisor, build_section, closed_cstar_orbit, formal_section,
                       git_classify, hilbert_mumford_oracle, is_cstar_fixed_point)
from .vortex import VortexProblem, bradlow_gate, solve_vortex

EXIT_OK, EXIT_CONFIG, EXIT_NONEXISTENCE, EXIT_CONVERGENCE = 0, 1, 2, 3


# ----- config helpers ---------------------------------------------------------

def build_surface(cfg: dict):
    surf = cfg.get("surface")
    if surf is None:
        raise ConfigurationError("field 'surface' is required for this command")
    if surf["genus"] == 0:
        return make_sphere_grid(surf["resolution"], surf.get("volume", 2 * math.pi))
    modulus = complex(*surf.get("modulus", [0.0, 1.0]))
    return make_torus_grid(surf["resolution"], modulus, surf.get("volume", 1.0))


def build_divisor(cfg: dict, seed: int, genus: int = 0) -> Divisor:
    entry = cfg.get("divisor")
    if entry is None:
        raise ConfigurationError("field 'divisor' is required for this command")
    if "random" in entry:
        mult = entry["random"]["multiplicities"]
        rng = np.random.default_rng(seed)
        if genus == 1:
            pts = [complex(x, y) for x, y in rng.uniform(0, 1, (len(mult), 2))]
            modulus = complex(*cfg.get("surface", {}).get("modulus", [0.0, 1.0]))
            pts = [p.real + modulus * p.imag for p in pts]
        else:
            pts = [complex(x, y) for x, y in rng.normal(size=(len(mult), 2))]
        return Divisor(tuple(pts), tuple(mult))
    return Divisor.from_json(entry)


def _section(cfg: dict, grid, seed: int):
    if "formal_density" in cfg:
        return None, formal_section(grid, cfg["formal_density"], 0)
    divisor = build_divisor(cfg, seed, grid.genus)
    return divisor, build_section(divisor, grid)


def _tau(cfg: dict) -> float:
    if "tau" not in cfg:
        raise ConfigurationError("field 'tau' is required for this command")
    return float(cfg["tau"])


# ----- command handlers ---------------------------------------------------------

class _Run:
    def __init__(self, cfg: dict, out: Path, seed: int, workers: int):
        self.cfg, self.out, self.seed, self.workers = cfg, out, seed, workers
        self.files: list[Path] = []
        self.stages: list[dict] = []
        self.timings: dict = {}
        self.summary: dict = {}

    def stage(self, name: str, **data):
        self.stages.append(dict(stage=name, **data))

    def emit(self, path: Path) -> Path:
        self.files.append(path)
        return path


def _cmd_vortex(run: _Run) -> int:
    cfg = run.cfg
    grid = build_surface(cfg)
    divisor, section = _section(cfg, grid, run.seed)
    tau = _tau(cfg)
    problem = VortexProblem(grid, section, tau, cfg.get("tolerance", 1e-10),
                            cfg.get("max_iterations", 100))
    N = section.degree
    if N >= 1 and not bradlow_gate(N, tau, grid.volume):
        raise NoSolutionExists(
            f"strict Bradlow bound 4*pi*N < tau*Vol violated: 4*pi*N = {4 * math.pi * N:.17g}, "
            f"tau*Vol = {tau * grid.volume:.17g}")
    sol = solve_vortex(problem)
    run.stage("vortex", residual=sol.residual_norm, iterations=sol.iterations,
              flux_defect=sol.flux_defect)
    run.emit(field_csv(run.out / "f.csv", grid, {"f": sol.f, "density": section.density}))
    run.emit(write_json(run.out / "solution.json", {
        "grid": grid.descriptor(), "divisor": divisor.to_json() if divisor else None,
        "tau": tau, "residual_norm": sol.residual_norm, "iterations": sol.iterations,
        "flux_defect": sol.flux_defect, "section_normalization": section.normalization}))
    run.summary.update(converged=True, residual=sol.residual_norm)
    return EXIT_OK


def _trivial_report(run: _Run, grid, tau: float) -> int:
    """Closed form for a vanishing Higgs field: u = 0 and f undetermined."""
    c = compute_c(0.0, tau, 0, grid.euler_characteristic, grid.volume)
    run.emit(write_json(run.out / "trivial.json", {
        "grid": grid.descriptor(), "higgs_field": "identically zero", "u": 0.0,
        "f": "any constant", "c": c, "scalar_curvature": grid.background_scalar_curvature}))
    run.stage("trivial", c=c)
    run.summary.update(converged=True, residual=0.0, conformal_volume=grid.volume)
    return EXIT_OK


def _continuation(run: _Run, grid, section, tau: float, alpha: float, write: bool = True):
    cfg = run.cfg
    template = GravProblem(grid, section, tau, 0.0, cfg.get("tolerance", 1e-10),
                           cfg.get("max_iterations", 60), cfg.get("kernel_projection", False))
    path = continue_in_alpha(template, alpha, cfg.get("initial_step", 2e-3))
    rows = []
    for i, (a, sol) in enumerate(zip(path.alphas, path.solutions)):
        if write:
            run.emit(field_csv(run.out / f"path_{i:03d}.csv", grid, {"u": sol.u, "f": sol.f}))
        rows.append([i, float(a), float(sol.residual_norms[0]), float(sol.residual_norms[1]),
                     float(sol.conformal_volume), sol.iterations])
        run.stage("continuation", alpha=a, residual_norms=list(sol.residual_norms),
                  iterations=sol.iterations)
    run.emit(table_csv(run.out / "path.csv",
                       ["index", "alpha", "residual_1", "residual_2", "conformal_volume",
                        "iterations"], rows))
    run.emit(write_json(run.out / "path.json", {
        "grid": grid.descriptor(), "tau": tau, "alpha_target": alpha,
        "alphas": path.alphas, "reached": path.reached, "failure_point": path.failure_point,
        "failure_reason": path.failure_reason, "continuity_constant": path.continuity_constant,
        "steps": path.steps}))
    last = path.solutions[-1]
    run.summary.update(reached_alpha=path.reached, residual=max(last.residual_norms),
                       conformal_volume=last.conformal_volume,
                       converged=path.failure_point is None)
    return template, path


def _cmd_gravitate(run: _Run) -> int:
    cfg = run.cfg
    grid = build_surface(cfg)
    tau = _tau(cfg)
    if cfg.get("formal_density") == 0:
        return _trivial_report(run, grid, tau)
    _, section = _section(cfg, grid, run.seed)
    N = section.degree
    if N >= 1 and not bradlow_gate(N, tau, grid.volume):
        raise NoSolutionExists(
            f"strict Bradlow bound 4*pi*N < tau*Vol violated: 4*pi*N = {4 * math.pi * N:.17g}, "
            f"tau*Vol = {tau * grid.volume:.17g}")
    _, path = _continuation(run, grid, section, tau, float(cfg.get("alpha", 0.0)))
    if path.failure_point is not None:
        raise ConvergenceFailure(
            f"continuation stopped at alpha = {path.reached!r} (failed at {path.failure_point!r})")
    return EXIT_OK


def _eb_problem(cfg: dict, grid, divisor: Divisor) -> EBProblem:
    tau = _tau(cfg)
    N = divisor.degree
    if grid.genus != 0:
        raise ConfigurationError("c = 0 runs require genus 0: chi = 2 alpha tau N > 0")
    alpha = cfg.get("alpha")
    if alpha is not None and not eb_parameter_check(alpha, tau, N):
        raise ConfigurationError(f"alpha*tau*N = {alpha * tau * N!r} must equal 1 for c = 0")
    policy = cfg.get("c_prime_policy", "volume")
    target = cfg.get("target_volume", 2 * math.pi) if policy == "volume" else None
    return EBProblem.build(grid, divisor, tau, alpha=alpha, c_prime=cfg.get("c_prime", 0.0),
                           target_volume=target, tolerance=cfg.get("tolerance", 1e-10),
                           max_iterations=cfg.get("max_iterations", 60))


def _cmd_eb(run: _Run) -> int:
    cfg = run.cfg
    grid = build_surface(cfg)
    divisor = build_divisor(cfg, run.seed, grid.genus)
    problem = _eb_problem(cfg, grid, divisor)
    hyp = problem.hypothesis
    sol = solve_eb(problem)
    report = {
        "grid": grid.descriptor(), "divisor": divisor.to_json(), "tau": problem.tau,
        "alpha": problem.alpha, "hypothesis": hyp.value, "experimental": sol.experimental,
        "residual_norm": sol.residual_norm, "c_prime": sol.c_prime,
        "conformal_volume": sol.conformal_volume, "deficit": sol.deficit,
        "integrated_identity": integrated_identity(sol, problem),
        "longitudinal_amplitude": longitudinal_amplitude(sol.f),
    }
    run.emit(field_csv(run.out / "fields.csv", grid, {"f": sol.f, "u": sol.u}))
    run.stage("eb", residual=sol.residual_norm, hypothesis=hyp.value)
    if problem.parity_gauge and cfg.get("compare_radial", True):
        prof = radial_ode_oracle(divisor.degree, problem.tau, problem.alpha, grid.volume,
                                 problem.target_volume or sol.conformal_volume)
        s = np.linspace(0.0, 10.0, 201)
        run.emit(table_csv(run.out / "radial_profile.csv", ["s", "f", "u"],
                           [[float(a), float(b), float(c)] for a, b, c in zip(s, prof(s), prof.u(s))]))
        diff = float(np.abs(sol.f.values - prof.at_colatitude(grid.nodes[..., 0])).max())
        report["radial_comparison"] = {"sup_difference": diff, "ode_centre": prof.f0,
                                       "ode_c_prime": prof.c_prime}
        run.stage("radial_oracle", sup_difference=diff)
    run.emit(write_json(run.out / "comparison.json", report))
    run.summary.update(converged=True, residual=sol.residual_norm,
                       conformal_volume=sol.conformal_volume)
    return EXIT_OK


def _cmd_classify(run: _Run) -> int:
    divisor = build_divisor(run.cfg, run.seed, 0)
    cls = git_classify(divisor)
    report = {"divisor": divisor.to_json(), **cls.to_json(),
              "closed_cstar_orbit": closed_cstar_orbit(divisor),
              "cstar_fixed_point": is_cstar_fixed_point(divisor),
              "yang_hypothesis": yang_hypothesis_check(divisor).value}
    if divisor.degree <= 8:
        oracle = hilbert_mumford_oracle(divisor)
        report["oracle_class"] = oracle.kind.value
        report["oracle_agrees"] = oracle.kind == cls.kind
    run.emit(write_json(run.out / "classification.json", report))
    run.stage("classify", result=cls.kind.value)
    run.summary.update(converged=True, stability=cls.kind.value)
    return EXIT_OK


def _is_eb_config(cfg: dict) -> bool:
    if "c_prime_policy" in cfg or "alpha" not in cfg:
        return True
    spec = cfg.get("divisor", {})
    mult = spec.get("multiplicities") or spec.get("random", {}).get("multiplicities", [])
    return eb_parameter_check(cfg["alpha"], cfg["tau"], sum(mult))


def _cmd_reduce(run: _Run) -> int:
    cfg = run.cfg
    grid = build_surface(cfg)
    tau = _tau(cfg)
    if "formal_density" in cfg:
        if cfg["formal_density"] == 0:
            return _trivial_report(run, grid, tau)
        section = formal_section(grid, cfg["formal_density"], 0)
        problem = GravProblem(grid, section, tau, float(cfg.get("alpha", 0.0)),
                              cfg.get("tolerance", 1e-10))
        sol = solve_grav(problem)
    elif grid.genus == 0 and _is_eb_config(cfg):
        divisor = build_divisor(cfg, run.seed, grid.genus)
        eb = _eb_problem(cfg, grid, divisor)
        problem, sol = as_grav(solve_eb(eb), eb)
    else:
        _, section = _section(cfg, grid, run.seed)
        template, path = _continuation(run, grid, section, tau, float(cfg.get("alpha", 0.0)),
                                       write=False)
        if path.failure_point is not None:
            raise ConvergenceFailure(f"continuation stopped at alpha = {path.reached!r}")
        problem, sol = template.with_alpha(path.reached), path.solutions[-1]
    data = assemble_and_check(sol, problem)
    report = data.to_json()
    report["expected_lambda"] = compute_lambda(problem.degree, tau, data.conformal_volume)
    report["identity_probe"] = identity_probe(sol, problem)
    report["alpha"] = problem.alpha
    report["grav_residual_norms"] = list(sol.residual_norms)
    run.emit(write_json(run.out / "report.json", report))
    run.emit(field_csv(run.out / "fields.csv", grid, {"u": sol.u, "f": sol.f, "f2": data.f2}))
    run.stage("reduce-check", residuals=data.residuals, passed=data.passed)
    run.summary.update(converged=data.passed, residual=max(data.residuals.values()),
                       conformal_volume=data.conformal_volume)
    if not data.passed:
        raise ConvergenceFailure("reduced residuals exceed the pass threshold")
    return EXIT_OK


# ----- sweep ---------------------------------------------------------------------

def sweep_cells(sweep: dict) -> list[dict]:
    base = sweep["base"]
    axes = [("tau", sweep.get("tau")), ("alpha", sweep.get("alpha")),
            ("volume", sweep.get("volume")), ("divisor", sweep.get("divisors"))]
    axes = [(k, v) for k, v in axes if v]
    cells = []
    for combo in itertools.product(*[v for _, v in axes]):
        cell = copy.deepcopy(base)
        cell["command"] = sweep["command"]
        for (key, _), val in zip(axes, combo):
            if key == "volume":
                cell.setdefault("surface", {})["volume"] = val
            else:
                cell[key] = val
        cells.append(cell)
    return cells


def _run_cell(args):
    index, cell, out, seed, tolerance = args
    code, manifest = run(cell, Path(out), seed=seed, tolerance=tolerance)
    return index, code, manifest.get("summary", {}), manifest.get("message", "")


def _cmd_sweep(run_: _Run) -> int:
    sweep = run_.cfg.get("sweep")
    if sweep is None:
        raise ConfigurationError("field 'sweep' is required for the sweep command")
    cells = sweep_cells(sweep)
    jobs = [(i, c, str(run_.out / f"cell_{i:03d}"), run_.seed, run_.cfg.get("tolerance"))
            for i, c in enumerate(cells)]
    if run_.workers > 1:
        with ProcessPoolExecutor(max_workers=run_.workers) as pool:
            results = list(pool.map(_run_cell, jobs))
    else:
        results = [_run_cell(j) for j in jobs]
    rows = []
    for (i, code, summary, message), cell in zip(sorted(results, key=lambda r: r[0]), cells):
        surf = cell.get("surface", {})
        rows.append([i, cell["command"], cell.get("tau", ""), cell.get("alpha", ""),
                     surf.get("volume", ""), json.dumps(cell.get("divisor"), sort_keys=True),
                     code, bool(summary.get("converged", False)), summary.get("residual", ""),
                     summary.get("conformal_volume", ""), summary.get("reached_alpha", ""),
                     summary.get("stability", ""), message.replace("\n", " ")])
        run_.stage("cell", index=i, exit_code=code)
    run_.emit(table_csv(run_.out / "sweep.csv",
                        ["cell", "command", "tau", "alpha", "volume", "divisor", "exit_code",
                         "converged", "residual", "conformal_volume", "reached_alpha", "class",
                         "message"], rows))
    for i in range(len(cells)):
        man = run_.out / f"cell_{i:03d}" / "manifest.json"
        if man.exists():
            run_.files.append(man)
    run_.summary.update(cells=len(cells), converged=True)
    return EXIT_OK


HANDLERS = {"vortex": _cmd_vortex, "gravitate": _cmd_gravitate, "eb": _cmd_eb,
            "classify": _cmd_classify, "reduce-check": _cmd_reduce, "sweep": _cmd_sweep}


def run(config: dict, out: Path, *, seed: int = 0, workers: int = 1,
        tolerance: float | None = None, max_alpha: float | None = None) -> tuple[int, dict]:
    """Validate ``config``, dispatch, and write ``manifest.json`` whatever happens."""
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    cfg = copy.deepcopy(config)
    if tolerance is not None:
        cfg["tolerance"] = tolerance
    if max_alpha is not None:
        cfg["alpha"] = max_alpha
    r = _Run(cfg, out, seed, workers)
    start = time.perf_counter()
    code, message = EXIT_OK, "ok"
    try:
        validate_config(cfg)
        command = cfg.get("command")
        if command not in COMMANDS:
            raise ConfigurationError(f"unknown command {command!r}")
        code = HANDLERS[command](r)
    except NoSolutionExists as exc:
        code, message = EXIT_NONEXISTENCE, str(exc)
    except (ConvergenceFailure, SingularJacobian, ShootingFailure) as exc:
        code, message = EXIT_CONVERGENCE, f"{type(exc).__name__}: {exc}"
    except (ConfigurationError, ValueError, KeyError, TypeError) as exc:
        code, message = EXIT_CONFIG, f"{type(exc).__name__}: {exc}"
    except GravVortexError as exc:
        code, message = EXIT_CONVERGENCE, f"{type(exc).__name__}: {exc}"
    except Exception as exc:  # unexpected: still leave a manifest behind
        code, message = EXIT_CONVERGENCE, "".join(traceback.format_exception_only(type(exc), exc)).strip()
    r.timings["total_seconds"] = time.perf_counter() - start
    manifest = {
        "config": cfg, "seed": seed, "exit_code": code, "message": message,
        "versions": {"gravvortex": __version__, "python": platform.python_version(),
                     "numpy": np.__version__, "scipy": scipy.__version__},
        "timings": r.timings, "stages": r.stages, "summary": r.summary,
        "files": [{"path": str(p.relative_to(out)), "sha256": sha256(p), "bytes": p.stat().st_size}
                  for p in r.files if p.exists()],
    }
    write_json(out / "manifest.json", manifest)
    return code, manifest


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="gravvortex", description=__doc__.splitlines()[0])
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("--config", required=True, help="JSON run configuration")
    parser.add_argument("--out", required=True, help="output directory")
    parser.add_argument("--workers", type=int, default=1, help="parallel sweep cells")
    parser.add_argument("--seed", type=int, default=0, help="seed for random divisors")
    parser.add_argument("--tolerance", type=float, help="override the solver tolerance")
    parser.add_argument("--max-alpha", type=float, help="override the coupling target")
    args = parser.parse_args(argv)
    if args.seed < 0 or args.seed >= 2**64:
        print("error: --seed must be an unsigned 64-bit integer", file=sys.stderr)
        return EXIT_CONFIG
    try:
        config = load_config(args.config)
    except (ConfigurationError, OSError) as exc:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        write_json(out / "manifest.json", {"config_path": args.config, "exit_code": EXIT_CONFIG,
                                           "message": str(exc), "files": []})
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if config.get("command", args.command) != args.command:
        print(f"warning: config command {config['command']!r} overridden by {args.command!r}",
              file=sys.stderr)
    config["command"] = args.command
    code, manifest = run(config, Path(args.out), seed=args.seed, workers=args.workers,
                         tolerance=args.tolerance, max_alpha=args.max_alpha)
    if code != EXIT_OK:
        print(f"error ({code}): {manifest['message']}", file=sys.stderr)
    else:
        print(f"ok: wrote {len(manifest['files'])} files to {args.out}")
    return code


if __name__ == "__main__":
    sys.exit(main())
