"""Command-line interface.

Subcommands: significance, stability, ammi, gge, all, serve.  Exit codes:
0 success, 1 usage error, 2 data or model error.  The `all` subcommand is
transactional: partial outputs are removed if any stage fails.
"""
from __future__ import annotations

import json
import os
import shutil
import sys
from pathlib import Path

import click

from .bundle import write_bundle
from .data import ColumnSchema, parse_csv
from .gge import MODES
from .mixed_model import ModelCase, build_model, fit_reml, predict, significance_table
from .pipeline import ammi_payload, gge_payload, run_all
from .plotting import render_ammi_biplot, render_residual_scatter, render_svg
from .gge import biplot_geometry, fit_gge
from .data import two_way_means
from .stability import stability_report

DATA_ERRORS = (ValueError, KeyError, ArithmeticError)

# usage problems exit 1; data/model problems exit 2
click.UsageError.exit_code = 1


def _load(input_path, year_col, loc_col, rep_col, geno_col, trait_col):
    raw = Path(input_path).read_bytes()
    header = raw.split(b"\n", 1)[0].decode("utf-8", "replace")
    cols = [c.strip() for c in header.split(",")]
    schema = ColumnSchema(
        genotype=geno_col,
        location=loc_col,
        trait=trait_col,
        year=year_col if (year_col and year_col in cols) else None,
        rep=rep_col if (rep_col and rep_col in cols) else None,
    )
    return parse_csv(raw, schema)


def _seed(ctx_seed):
    if ctx_seed is not None:
        return ctx_seed
    env = os.environ.get("GXESTAT_SEED")
    return int(env) if env else 0


common_options = [
    click.option("--input", "input_path", required=True, type=click.Path(exists=True, dir_okay=False)),
    click.option("--year-col", default="YR", show_default=True),
    click.option("--loc-col", default="LC", show_default=True),
    click.option("--rep-col", default="RP", show_default=True),
    click.option("--geno-col", default="CLT", show_default=True),
    click.option("--trait-col", default="MY", show_default=True),
]


def with_common(f):
    for opt in reversed(common_options):
        f = opt(f)
    return f


@click.group()
def main():
    """Genotype-by-environment analysis: significance, stability, biplots."""


def _run(fn):
    try:
        fn()
    except DATA_ERRORS as e:
        click.echo(f"error: {e}", err=True)
        sys.exit(2)


@main.command()
@with_common
@click.option("--case", type=click.IntRange(1, 5), default=1, show_default=True)
@click.option("--out", "out_dir", type=click.Path(file_okay=False), default=None)
def significance(input_path, year_col, loc_col, rep_col, geno_col, trait_col, case, out_dir):
    """Mixed-model variance components and term significance tests."""

    def body():
        ds = _load(input_path, year_col, loc_col, rep_col, geno_col, trait_col)
        table = significance_table(ds, ModelCase(case))
        click.echo(table.to_text(), nl=False)
        if out_dir:
            out = Path(out_dir)
            out.mkdir(parents=True, exist_ok=True)
            (out / "significance.json").write_text(
                json.dumps(table.to_json_dict(), sort_keys=True, indent=1) + "\n"
            )
            (out / "significance.txt").write_text(table.to_text())
            case_obj = ModelCase(case)
            fit = fit_reml(build_model(ds, case_obj))
            pred, resid = predict(fit)
            (out / "residual_scatter.svg").write_text(render_residual_scatter(pred, resid))

    _run(body)


@main.command()
@with_common
@click.option("--out", "out_dir", type=click.Path(file_okay=False), default=None)
def stability(input_path, year_col, loc_col, rep_col, geno_col, trait_col, out_dir):
    """Per-genotype stability statistics table."""

    def body():
        ds = _load(input_path, year_col, loc_col, rep_col, geno_col, trait_col)
        report = stability_report(ds)
        click.echo(report.to_text(), nl=False)
        if out_dir:
            out = Path(out_dir)
            out.mkdir(parents=True, exist_ok=True)
            (out / "stability.csv").write_text(report.to_csv())
            (out / "stability.json").write_text(
                json.dumps(report.to_json_dict(), sort_keys=True, indent=1) + "\n"
            )

    _run(body)


@main.command()
@with_common
@click.option("--n-components", type=int, default=None)
@click.option("--alpha", type=float, default=0.05, show_default=True)
@click.option("--n-boot", type=int, default=1000, show_default=True)
@click.option("--seed", type=int, default=None)
@click.option("--out", "out_dir", type=click.Path(file_okay=False), default=None)
def ammi(input_path, year_col, loc_col, rep_col, geno_col, trait_col, n_components, alpha, n_boot, seed, out_dir):
    """Additive main effects + multiplicative interaction analysis."""

    def body():
        ds = _load(input_path, year_col, loc_col, rep_col, geno_col, trait_col)
        payload = ammi_payload(ds, n_components=n_components, alpha=alpha, n_boot=n_boot, seed=_seed(seed))
        click.echo(json.dumps(payload["anova"], indent=1))
        if out_dir:
            out = Path(out_dir)
            out.mkdir(parents=True, exist_ok=True)
            (out / "ammi.json").write_text(json.dumps(payload, sort_keys=True, indent=1) + "\n")
            if payload["biplot"]:
                (out / "ammi_biplot.svg").write_text(render_ammi_biplot(payload["biplot"]))

    _run(body)


@main.command()
@with_common
@click.option("--centering", type=click.Choice(["environment_centered", "env_standardized"]), default="environment_centered", show_default=True)
@click.option("--svp", type=float, default=None, help="singular-value partition override")
@click.option("--mode", type=click.Choice(list(MODES)), default=None, help="one biplot mode (default: all)")
@click.option("--out", "out_dir", type=click.Path(file_okay=False), default=None)
def gge(input_path, year_col, loc_col, rep_col, geno_col, trait_col, centering, svp, mode, out_dir):
    """GGE biplot geometries (all seven modes or one)."""

    def body():
        ds = _load(input_path, year_col, loc_col, rep_col, geno_col, trait_col)
        modes = [mode] if mode else None
        payload = gge_payload(ds, centering=centering, svp=svp, modes=modes)
        click.echo(json.dumps({m: g["overlays"] for m, g in payload["modes"].items()}, indent=1, sort_keys=True))
        if out_dir:
            out = Path(out_dir)
            out.mkdir(parents=True, exist_ok=True)
            (out / "gge.json").write_text(json.dumps(payload, sort_keys=True, indent=1) + "\n")
            table = two_way_means(ds, environments="location").require_complete()
            fit = fit_gge(table, centering=centering)
            for m in payload["modes"]:
                geom = biplot_geometry(fit, m, svp=svp)
                (out / f"gge_{m}.svg").write_text(render_svg(geom))

    _run(body)


@main.command(name="all")
@with_common
@click.option("--case", type=click.IntRange(1, 5), default=1, show_default=True)
@click.option("--alpha", type=float, default=0.05, show_default=True)
@click.option("--n-boot", type=int, default=1000, show_default=True)
@click.option("--seed", type=int, default=None)
@click.option("--out", "out_dir", required=True, type=click.Path(file_okay=False))
def run_everything(input_path, year_col, loc_col, rep_col, geno_col, trait_col, case, alpha, n_boot, seed, out_dir):
    """Significance, stability, AMMI and GGE in sequence; fails fast and
    removes partial outputs."""
    out = Path(out_dir)
    created = not out.exists()
    try:
        ds = _load(input_path, year_col, loc_col, rep_col, geno_col, trait_col)
        bundle = run_all(ds, case_id=case, alpha=alpha, n_boot=n_boot, seed=_seed(seed))
        out.mkdir(parents=True, exist_ok=True)
        write_bundle(bundle, out / "bundle.json")
        sig_rows = bundle.significance["table"]
        (out / "significance.json").write_text(json.dumps(sig_rows, sort_keys=True, indent=1) + "\n")
        report = stability_report(ds)
        (out / "stability.csv").write_text(report.to_csv())
        click.echo(bundle.significance["table_text"], nl=False)
        click.echo(report.to_text(), nl=False)
        pred = bundle.significance["predictions"]
        resid = bundle.significance["residuals"]
        (out / "residual_scatter.svg").write_text(render_residual_scatter(pred, resid))
        if bundle.ammi.get("biplot"):
            (out / "ammi_biplot.svg").write_text(render_ammi_biplot(bundle.ammi["biplot"]))
        table = two_way_means(ds, environments="location").require_complete()
        fit = fit_gge(table)
        for m in MODES:
            (out / f"gge_{m}.svg").write_text(render_svg(biplot_geometry(fit, m)))
    except DATA_ERRORS as e:
        if created and out.exists():
            shutil.rmtree(out, ignore_errors=True)
        elif out.exists():
            for child in out.iterdir():
                if child.suffix in (".json", ".svg", ".csv"):
                    child.unlink(missing_ok=True)
        click.echo(f"error: {e}", err=True)
        sys.exit(2)


@main.command()
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", type=int, default=8750, show_default=True)
@click.option("--session-ttl", type=float, default=3600.0, show_default=True)
def serve(host, port, session_ttl):
    """Run the JSON HTTP analysis service."""
    import uvicorn

    from .service import create_app

    uvicorn.run(create_app(session_ttl=session_ttl), host=host, port=port, log_level="warning")


if __name__ == "__main__":
    main()
