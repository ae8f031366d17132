"""Command-line interface.

    assistdlo run --scenario file.toml --out results/
    assistdlo suite [--dir scenarios/] --out results/
    assistdlo trace --mask m.pgm --depth d.pgm --intrinsics k.json
    assistdlo elastica fit --length 3.91 --mass 0.140 --free-length 0.3 --bproj 0.27
    assistdlo elastica table --kmin 1e-3 --kmax 1e3 --n 128 --out table.csv
    assistdlo serve --scenario file.toml --port 8000
"""
from __future__ import annotations

import dataclasses
import json
import sys
from pathlib import Path

import click


@click.group()
def main():
    """Shared-autonomy rope teleoperation: scenario harness, perception tools,
    rope property estimation, and the live teleop service."""


@main.command()
@click.option("--scenario", "scenario_path", required=True,
              type=click.Path(exists=True), help="Scenario TOML file.")
@click.option("--out", "out_dir", type=click.Path(), default=None,
              help="Directory for per-tick logs.")
def run(scenario_path, out_dir):
    """Run one closed-loop scenario and print its metrics as JSON."""
    from .harness import run_scenario
    from .scenarios import load_scenario

    metrics = run_scenario(load_scenario(scenario_path), out_dir)
    click.echo(json.dumps(dataclasses.asdict(metrics), indent=2))


@main.command()
@click.option("--dir", "scenario_dir", type=click.Path(exists=True), default=None,
              help="Directory of scenario TOML files (default: built-in suite).")
@click.option("--out", "out_dir", required=True, type=click.Path(),
              help="Output directory for results.csv and summary.json.")
@click.option("--seeds", default=1, show_default=True,
              help="Seeds per built-in scenario (ignored with --dir).")
@click.option("--serial", is_flag=True, help="Disable parallel execution.")
def suite(scenario_dir, out_dir, seeds, serial):
    """Run a scenario suite and write results.csv plus summary.json."""
    from .harness import default_suite, run_suite
    from .scenarios import load_scenario

    if scenario_dir is not None:
        paths = sorted(Path(scenario_dir).glob("*.toml"))
        if not paths:
            raise click.ClickException(f"no .toml scenarios in {scenario_dir}")
        scenarios = [load_scenario(p) for p in paths]
    else:
        scenarios = default_suite(seeds=tuple(range(seeds)))
    summary = run_suite(scenarios, out_dir, parallel=not serial)
    click.echo(json.dumps(summary, indent=2, sort_keys=True))


@main.command()
@click.option("--mask", "mask_path", required=True, type=click.Path(exists=True),
              help="Binary mask (PBM) or 8-bit grayscale (PGM, Otsu applied).")
@click.option("--depth", "depth_path", required=True, type=click.Path(exists=True),
              help="16-bit depth PGM in millimeters.")
@click.option("--intrinsics", "intr_path", required=True, type=click.Path(exists=True),
              help="JSON with fx, fy, cx, cy, width, height.")
@click.option("--aux-mask", "aux_path", type=click.Path(exists=True), default=None,
              help="Optional auxiliary mask ANDed with the primary one.")
@click.option("--stride", default=2, show_default=True)
@click.option("--out", "out_path", type=click.Path(), default=None,
              help="Write points as 'x y z' lines (default: stdout).")
def trace(mask_path, depth_path, intr_path, aux_path, stride, out_path):
    """Extract a camera-frame 3-D rope trace from one mask + depth frame."""
    from .geometry import CameraIntrinsics
    from .imaging import GrayImage, read_depth_pgm, read_pgm, read_pbm
    from .trace import extract_camera_points, otsu_mask

    with open(intr_path) as f:
        K = CameraIntrinsics(**json.load(f))
    if mask_path.endswith(".pbm"):
        mask = read_pbm(mask_path)
    else:
        img = read_pgm(mask_path)
        if not isinstance(img, GrayImage):
            raise click.ClickException("--mask must be a PBM or 8-bit PGM")
        mask = otsu_mask(img)
    aux = read_pbm(aux_path) if aux_path else None
    depth = read_depth_pgm(depth_path)
    points = extract_camera_points(mask, aux, depth, K, stride)
    lines = [f"{float(p[0])!r} {float(p[1])!r} {float(p[2])!r}" for p in points]
    text = "\n".join(lines) + ("\n" if lines else "")
    if out_path:
        Path(out_path).write_text(text)
        click.echo(f"wrote {len(points)} points to {out_path}")
    else:
        sys.stdout.write(text)


@main.group()
def elastica():
    """Rope bending-stiffness estimation from cantilever measurements."""


@elastica.command()
@click.option("--length", required=True, type=float, help="Total rope length, m.")
@click.option("--mass", required=True, type=float, help="Total rope mass, kg.")
@click.option("--free-length", required=True, type=float,
              help="Free-hanging length past the clamp, m.")
@click.option("--bproj", required=True, type=float,
              help="Horizontal projection of the free end, m.")
@click.option("--diameter", type=float, default=0.0)
@click.option("--table-path", type=click.Path(exists=True), default=None,
              help="Precomputed K/projection CSV (default: build in-process).")
def fit(length, mass, free_length, bproj, diameter, table_path):
    """Estimate flexural rigidity; prints {lambda, K, EI} as JSON."""
    from . import elastica as el

    if table_path:
        table = el.ProjectionTable.from_csv(Path(table_path).read_text())
    else:
        table = el.default_table()
    meas = el.RopeMeasurement(length, mass, free_length, bproj, diameter)
    ei, k, lam = el.estimate_ei(meas, table)
    click.echo(json.dumps({"lambda": lam, "K": k, "EI": ei}, indent=2))


@elastica.command()
@click.option("--kmin", default=1e-3, show_default=True, type=float)
@click.option("--kmax", default=1e3, show_default=True, type=float)
@click.option("--n", default=128, show_default=True, type=int)
@click.option("--out", "out_path", required=True, type=click.Path())
def table(kmin, kmax, n, out_path):
    """Precompute the K -> normalized-projection lookup table as CSV."""
    from . import elastica as el

    tab = el.build_table(kmin, kmax, n)
    Path(out_path).write_text(tab.to_csv())
    click.echo(f"wrote {n} entries to {out_path}")


@main.command()
@click.option("--scenario", "scenario_path", type=click.Path(exists=True),
              default=None, help="Scenario TOML (default: built-in hover scene).")
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=8000, show_default=True, type=int)
def serve(scenario_path, host, port):
    """Start the live teleop service (websocket + HTTP)."""
    from .scenarios import Scenario, load_scenario
    from .service import serve as run_server

    if scenario_path:
        sc = load_scenario(scenario_path)
    else:
        sc = Scenario(name="live", rope_layout="u-turn", duration_limit=3600.0)
    click.echo(f"serving scenario '{sc.name}' on ws://{host}:{port}/ws")
    run_server(sc, host, port)


if __name__ == "__main__":
    main()
