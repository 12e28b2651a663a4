"""Command line interface: run, sweep, compare, meshgen."""

from __future__ import annotations

import sys

import click

from . import experiments as xp
from .inversion import InversionError
from .mesh import ElectrodeLayout, generate_disk_mesh, save_mesh


def _mesh_spec(mesh_fine, mesh_coarse, elements_fine, elements_coarse,
               electrodes):
    return xp.MeshSpec(elements_fine=elements_fine,
                       elements_coarse=elements_coarse,
                       electrodes=electrodes,
                       mesh_fine_path=mesh_fine or "",
                       mesh_coarse_path=mesh_coarse or "")


def _mesh_options(fn):
    fn = click.option("--mesh-fine", type=click.Path(exists=True),
                      default=None, help="Load the simulation mesh from a file.")(fn)
    fn = click.option("--mesh-coarse", type=click.Path(exists=True),
                      default=None, help="Load the inversion mesh from a file.")(fn)
    fn = click.option("--elements-fine", type=int,
                      default=xp.DEFAULT_ELEMENTS_FINE, show_default=True)(fn)
    fn = click.option("--elements-coarse", type=int,
                      default=xp.DEFAULT_ELEMENTS_COARSE, show_default=True)(fn)
    fn = click.option("--electrodes", type=int,
                      default=xp.DEFAULT_ELECTRODES, show_default=True)(fn)
    return fn


@click.group()
def main():
    """Impedance tomography reconstruction experiments."""


@main.command()
@click.option("--method", type=click.Choice(xp.METHODS), required=True)
@click.option("--phantom", type=click.Choice(["A", "B", "C"],
                                             case_sensitive=False),
              required=True)
@click.option("--noise", type=float, default=0.0, show_default=True,
              help="Noise level as a fraction (0.001 = 0.1%).")
@click.option("--config", "config_path", type=click.Path(exists=True),
              default=None, help="key = value parameter file.")
@click.option("--seed", type=int, default=-1,
              help="Noise seed; defaults to a fixed per-case value.")
@click.option("--beta", type=float, default=None,
              help="Override the convex mix of the default config.")
@click.option("--out", "out_dir", type=click.Path(), required=True)
@_mesh_options
def run(method, phantom, noise, config_path, seed, beta, out_dir, mesh_fine,
        mesh_coarse, elements_fine, elements_coarse, electrodes):
    """Reconstruct one phantom and write report.json/history.csv/image.csv."""
    if config_path is not None:
        config = xp.InversionConfig.from_file(config_path)
    else:
        config = xp.default_config(method, phantom, noise)
    if beta is not None:
        config = config.replace(beta=beta)
    spec = xp.ExperimentSpec(
        method=method, phantom=phantom, epsilon=noise, seed=seed,
        config=config,
        mesh=_mesh_spec(mesh_fine, mesh_coarse, elements_fine,
                        elements_coarse, electrodes))
    try:
        report = xp.run_experiment(spec, out_dir=out_dir)
    except InversionError as err:
        raise click.ClickException(f"solver failure: {err}")
    if report.status != "ok":
        click.echo(f"FAILED: {report.error}", err=True)
        sys.exit(1)
    click.echo(f"{method} phantom {spec.phantom} noise {noise:g}: "
               f"RE={report.final_re:.4f} residual={report.residual:.3e} "
               f"iterations={report.iterations} ({report.stopped_by})")


@main.command()
@click.option("--axis", type=click.Choice(["beta", "mu", "epsilon"]),
              required=True)
@click.option("--values", required=True,
              help="Comma-separated values, e.g. 0.1,0.3,0.5")
@click.option("--method", type=click.Choice(xp.METHODS), default="alg1",
              show_default=True)
@click.option("--phantom", type=click.Choice(["A", "B", "C"],
                                             case_sensitive=False),
              required=True)
@click.option("--noise", type=float, default=0.0, show_default=True)
@click.option("--config", "config_path", type=click.Path(exists=True),
              default=None)
@click.option("--workers", type=int, default=1, show_default=True)
@click.option("--out", "out_dir", type=click.Path(), required=True)
@_mesh_options
def sweep(axis, values, method, phantom, noise, config_path, workers,
          out_dir, mesh_fine, mesh_coarse, elements_fine, elements_coarse,
          electrodes):
    """Parameter sweep; writes one run directory per value plus summary.csv."""
    vals = [float(v) for v in values.split(",") if v.strip()]
    if config_path is not None:
        config = xp.InversionConfig.from_file(config_path)
    else:
        config = xp.default_config(method, phantom, noise)
    base = xp.ExperimentSpec(
        method=method, phantom=phantom, epsilon=noise, config=config,
        mesh=_mesh_spec(mesh_fine, mesh_coarse, elements_fine,
                        elements_coarse, electrodes))
    reports = xp.sweep(axis, vals, base, out_dir=out_dir, workers=workers)
    failed = 0
    for v, r in zip(vals, reports):
        click.echo(f"{axis}={v:g}: RE={r.final_re:.4f} ({r.status})")
        failed += r.status != "ok"
    if failed:
        sys.exit(1)


@main.command()
@click.option("--phantom", type=click.Choice(["A", "B", "C"],
                                             case_sensitive=False),
              required=True)
@click.option("--noise", type=float, default=0.001, show_default=True)
@click.option("--beta", type=float, default=0.1, show_default=True)
@click.option("--out", "out_dir", type=click.Path(), required=True)
@_mesh_options
def compare(phantom, noise, beta, out_dir, mesh_fine, mesh_coarse,
            elements_fine, elements_coarse, electrodes):
    """Compare alg1/alg2/tv/l1/l2 on one phantom; writes table5.csv."""
    reports = xp.compare_methods(
        phantom, noise, out_dir=out_dir, beta=beta,
        mesh=_mesh_spec(mesh_fine, mesh_coarse, elements_fine,
                        elements_coarse, electrodes))
    failed = 0
    for method, r in reports.items():
        click.echo(f"{method}: RE={r.final_re:.4f} ({r.status})")
        failed += r.status != "ok"
    if failed:
        sys.exit(1)


@main.command()
@click.option("--elements", type=int, required=True)
@click.option("--electrodes", type=int, default=xp.DEFAULT_ELECTRODES,
              show_default=True)
@click.option("--coverage", type=float, default=xp.DEFAULT_COVERAGE,
              show_default=True)
@click.option("--contact-impedance", type=float,
              default=xp.DEFAULT_CONTACT_IMPEDANCE, show_default=True)
@click.option("--out", "out_path", type=click.Path(), required=True)
def meshgen(elements, electrodes, coverage, contact_impedance, out_path):
    """Generate a disk mesh with electrode arcs and save it as text."""
    layout = ElectrodeLayout(electrodes, contact_impedance, coverage)
    mesh = generate_disk_mesh(elements, layout)
    save_mesh(mesh, out_path)
    click.echo(f"wrote {mesh.n_elements} elements, {mesh.n_nodes} nodes, "
               f"{electrodes} electrodes to {out_path}")


if __name__ == "__main__":
    main()
