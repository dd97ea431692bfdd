"""Run every bundled scenario and print the headline metrics.

Usage: python3 scripts/run_all_scenarios.py [--out DIR] [--threads N] [--json FILE]
"""

import argparse
import json
from pathlib import Path

from helmcontrol.cli import resolve_threads, solve_scenario
from helmcontrol.scenario import BUNDLED, load_bundled


def metrics(res) -> dict:
    def region_rows(rep):
        return {r.name: {"max_rel_error": r.max_rel_error, "max_abs_null": r.max_abs_null}
                for r in rep.regions}

    return {
        "alpha": res.solution.alpha,
        "residual": res.solution.residual_norm,
        "delta": res.solution.delta,
        "flags": res.solution.flags,
        "svd_agreement": res.svd_agreement,
        "on_grid": region_rows(res.errors_on_grid),
        "offset_grid": region_rows(res.errors_offset),
        "far": [[v.real, v.imag] for v in res.far_values],
        "power_w": res.power.power,
        "power_db": res.power.level_db,
        "timings_s": res.timings,
    }


def main() -> None:
    ap = argparse.ArgumentParser()
    ap.add_argument("--out", help="write full artifacts under DIR/<scenario>")
    ap.add_argument("--threads", type=int)
    ap.add_argument("--json", help="write the metrics table to this file")
    ap.add_argument("names", nargs="*", default=list(BUNDLED))
    args = ap.parse_args()
    threads = resolve_threads(args.threads)
    table = {}
    for name in args.names:
        out = Path(args.out) / name if args.out else None
        res = solve_scenario(load_bundled(name), threads=threads, out_dir=out)
        table[name] = m = metrics(res)
        print(f"{name}: alpha={m['alpha']:.2e} flags={m['flags'] or '-'} "
              f"P={m['power_db']:.2f} dB far={[complex(*v) for v in m['far']]}")
        for grid in ("on_grid", "offset_grid"):
            for reg, e in m[grid].items():
                print(f"    {grid:11s} {reg}: rel={e['max_rel_error']} null={e['max_abs_null']}")
        print(f"    svd agreement={m['svd_agreement']:.2e} time={sum(m['timings_s'].values()):.1f}s",
              flush=True)
    if args.json:
        Path(args.json).write_text(json.dumps(table, indent=2) + "\n")


if __name__ == "__main__":
    main()
