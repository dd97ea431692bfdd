"""Command-line front end: ``helm-control run|validate|list``."""

from __future__ import annotations

import argparse
import logging
import os
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .errors import ConfigError, GeometryViolation, NumericalFailure, SingularKernelError
from .geometry import (
    FarFieldTarget,
    cylindrical_to_cartesian,
    make_farfield_patch,
    make_ocean_farfield_patch,
    write_points_csv,
)
from .greens import u_infinity_ocean_rows
from .propagator import assemble, condition_report, far_field_matrix, write_system
from .regsolve import (
    morozov_search,
    svd_factor,
    svd_solve,
    write_density_csv,
    write_diagnostics,
)
from .scenario import BUNDLED, Scenario, bundled_path, load_scenario, prescribed_values
from .synthesis import (
    boundary_inputs,
    error_report,
    eval_field,
    physical_surface,
    radiated_power,
    stability_offset_grid,
    write_boundary_csv,
    write_field_csv,
    write_json,
)

logger = logging.getLogger(__name__)

EXIT_OK, EXIT_CONFIG, EXIT_GEOMETRY, EXIT_NUMERICAL = 0, 2, 3, 4


@dataclass
class RunResult:
    """Everything a run produces, kept in memory for tests and scripts."""

    scenario: Scenario
    density: np.ndarray
    solution: object
    svd_agreement: float
    errors_on_grid: object
    errors_offset: object
    power: object
    far_values: list[complex]
    boundary: object
    timings: dict[str, float] = field(default_factory=dict)
    files: list[str] = field(default_factory=list)


def resolve_threads(cli_value: int | None) -> int:
    if cli_value is not None:
        return max(1, cli_value)
    env = os.environ.get("HELM_CONTROL_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise ConfigError(f"HELM_CONTROL_THREADS must be an integer, got {env!r}")
    return 1


def solve_scenario(scen: Scenario, epsilon_rel: float | None = None, threads: int = 1,
                   out_dir: Path | None = None) -> RunResult:
    """Assemble, solve, synthesize and (when ``out_dir`` is set) write all artifacts."""
    timings: dict[str, float] = {}
    files: list[str] = []
    t0 = time.perf_counter()

    basis = scen.basis()
    regions = scen.build_regions()
    system = assemble(regions, list(scen.farfield), basis, scen.medium, scen.truncation,
                      {r.name: r.weight for r in scen.regions}, scen.solver.farfield_weight,
                      threads)
    timings["assemble"] = time.perf_counter() - t0

    t = time.perf_counter()
    eps = scen.solver.epsilon_rel if epsilon_rel is None else epsilon_rel
    svd = svd_factor(system.A)
    delta = eps * float(np.linalg.norm(system.b))
    sol = morozov_search(system.A, system.b, delta, scen.solver.tol_rel, scen.solver.alpha_bracket,
                         scen.solver.method, svd)
    oracle = svd_solve(system.A, system.b, sol.alpha, svd)
    scale = max(np.linalg.norm(oracle.w), 1e-300)
    agreement = float(np.linalg.norm(sol.w - oracle.w) / scale)
    timings["solve"] = time.perf_counter() - t
    w = sol.w

    t = time.perf_counter()
    A_raw, _ = system.unweighted()
    generated = A_raw @ w
    on_grid, offset = [], []
    offset_regions = [stability_offset_grid(r, scen.outputs.offset_fraction) for r in regions]
    offset_fields = []
    for reg, oreg in zip(regions, offset_regions):
        rows = system.rows_of(reg.name)
        on_grid.append((reg.name, generated[rows], reg.prescribed))
        spec = next(s for s in scen.regions if s.name == reg.name)
        oreg.prescribed = prescribed_values(spec.prescription, oreg.points)
        u_off = eval_field(w, basis, oreg.points, scen.medium, scen.truncation, threads)
        offset.append((reg.name, u_off, oreg.prescribed))
        offset_fields.append(u_off)
    far_rows = system.rows_of("farfield")
    far_values = [complex(v) for v in generated[far_rows]]
    directions = [(g, t_.value) for g, t_ in zip(far_values, scen.farfield)]
    rep_on = error_report(on_grid, directions)
    rep_off = error_report(offset, directions)
    timings["fields"] = time.perf_counter() - t

    t = time.perf_counter()
    surface = physical_surface(scen.source.center, scen.source.physical_radius, scen.n_lat,
                               scen.n_lon)
    bi = boundary_inputs(w, basis, surface, scen.medium, scen.truncation, threads)
    power = radiated_power(w, basis, scen.medium, scen.truncation, scen.outputs.power_radius,
                           scen.outputs.power_n_theta, scen.outputs.power_n_phi, threads)
    timings["synthesis"] = time.perf_counter() - t

    result = RunResult(scen, w, sol, agreement, rep_on, rep_off, power, far_values, bi, timings,
                       files)
    if out_dir is not None:
        _write_outputs(result, system, basis, regions, offset_regions, offset_fields, svd,
                       Path(out_dir))
    return result


def _far_patches(scen: Scenario, basis) -> list[tuple[str, np.ndarray, np.ndarray]]:
    out = []
    o = scen.outputs
    for j, t in enumerate(scen.farfield):
        if scen.medium.is_ocean:
            grid = make_ocean_farfield_patch(t.theta, t.z, o.patch_half_width, o.patch_n,
                                             scen.medium.depth)
            rows = u_infinity_ocean_rows(grid[:, 0], grid[:, 1], basis.nodes, basis.weights,
                                         scen.medium, scen.truncation)
            coords = cylindrical_to_cartesian(1.0, grid[:, 0], grid[:, 1])
        else:
            coords = make_farfield_patch(t.direction, o.patch_half_width, o.patch_n)
            rows = far_field_matrix([FarFieldTarget(0j, direction=tuple(d)) for d in coords],
                                    basis, scen.medium, scen.truncation)
        out.append((f"farfield_patch_{j}.csv", coords, rows))
    return out


def _write_outputs(res: RunResult, system, basis, regions, offset_regions, offset_fields, svd,
                   out: Path) -> None:
    t = time.perf_counter()
    out.mkdir(parents=True, exist_ok=True)
    scen = res.scenario
    files = res.files

    def add(name):
        files.append(name)
        return out / name

    write_points_csv(add("basis.csv"), basis.centroids, basis)
    for reg, oreg in zip(regions, offset_regions):
        write_points_csv(add(f"grid_{reg.name}.csv"), reg.points)
        write_points_csv(add(f"grid_{reg.name}_offset.csv"), oreg.points)
    write_system(add("system.bin"), system)
    write_density_csv(add("density.csv"), res.density)
    A_raw, _ = system.unweighted()
    generated = A_raw @ res.density
    for reg, oreg, u_off in zip(regions, offset_regions, offset_fields):
        rows = system.rows_of(reg.name)
        write_field_csv(add(f"field_{reg.name}.csv"), reg.points, generated[rows], reg.prescribed)
        write_field_csv(add(f"field_{reg.name}_offset.csv"), oreg.points, u_off, oreg.prescribed)
    for name, coords, rows in _far_patches(scen, basis):
        write_field_csv(add(name), coords, rows @ res.density)
    write_boundary_csv(add("boundary_input.csv"), res.boundary)
    write_json(add("power.json"), res.power.to_dict())
    write_json(add("errors.json"), {"on_grid": res.errors_on_grid.to_dict(),
                                    "offset_grid": res.errors_offset.to_dict()})
    cond = condition_report(system.A, svd.s)
    write_diagnostics(add("diagnostics.json"), res.solution,
                      {"svd_agreement": res.svd_agreement, "condition": cond,
                       "system_shape": list(system.A.shape)})
    res.timings["write"] = time.perf_counter() - t
    manifest = {
        "config_hash": scen.config_hash,
        "version": __version__,
        "scenario": scen.name,
        "timings_s": {k: round(v, 3) for k, v in res.timings.items()},
        "files": files + ["manifest.json"],
    }
    write_json(out / "manifest.json", manifest)


def _resolve_config(arg: str) -> Path:
    p = Path(arg)
    if not p.exists() and arg in BUNDLED:
        return bundled_path(arg)
    return p


def _summary(res: RunResult) -> str:
    lines = [f"scenario {res.scenario.name}: alpha={res.solution.alpha:.3e} "
             f"residual={res.solution.residual_norm:.3e} flags={res.solution.flags or 'none'}"]
    for r in res.errors_on_grid.regions:
        lines.append(f"  {r.name}: max rel err={r.max_rel_error}  max |u| null={r.max_abs_null}")
    for d, t in zip(res.errors_on_grid.directions, res.scenario.farfield):
        lines.append(f"  far[{d.index}]: u_inf={d.generated:.5g} target={t.value:.5g}")
    lines.append(f"  power={res.power.power:.4e} W ({res.power.level_db:.2f} dB)")
    return "\n".join(lines)


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="helm-control",
                                     description="Active acoustic control by source-density synthesis.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="solve a scenario and write all artifacts")
    run.add_argument("config", help="TOML scenario file or bundled scenario name")
    run.add_argument("--out", help="output directory (overrides the config)")
    run.add_argument("--epsilon-rel", type=float, help="discrepancy level relative to ||b||")
    run.add_argument("--threads", type=int, help="assembly threads (default HELM_CONTROL_THREADS or 1)")
    val = sub.add_parser("validate", help="check a scenario without assembling")
    val.add_argument("config")
    sub.add_parser("list", help="list bundled scenarios")
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")

    if args.command == "list":
        for name in BUNDLED:
            print(f"{name}\t{bundled_path(name)}")
        return EXIT_OK
    try:
        scen = load_scenario(_resolve_config(args.config))
        if args.command == "validate":
            print(f"{args.config}: ok (no issues)")
            return EXIT_OK
        if args.epsilon_rel is not None and not 0 < args.epsilon_rel < 1:
            raise ConfigError(f"--epsilon-rel must lie in (0, 1), got {args.epsilon_rel}")
        threads = resolve_threads(args.threads)
        out = Path(args.out) if args.out else Path(scen.outputs.directory)
        res = solve_scenario(scen, args.epsilon_rel, threads, out)
        print(_summary(res))
        print(f"wrote {len(res.files) + 1} files to {out}")
        return EXIT_OK
    except ConfigError as exc:
        print(f"config invalid: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except GeometryViolation as exc:
        print(f"geometry violation: {exc}", file=sys.stderr)
        return EXIT_GEOMETRY
    except (NumericalFailure, SingularKernelError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
