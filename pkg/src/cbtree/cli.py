"""Command-line front end.

Model errors exit with status 3 and print ``error: <TOKEN>: <message>`` on
stderr, where the token is one of ``STEP_TOO_COARSE``, ``DEGENERATE_VOL``,
``FLOOR_UNREACHABLE`` (or ``INVALID_STEP``, ``GRID_TOO_COARSE``).  Term-sheet
problems exit with status 2 and name the file, line and key; other invalid
inputs also exit with status 2, token ``INVALID_INPUT``.
"""

from __future__ import annotations

import csv
import io
import sys
from dataclasses import replace
from pathlib import Path

import click
import numpy as np

from .errors import PricingError, StepTooCoarse
from .estimators import ConvertiblePricer
from .intensity import stock_floor
from .lattice import hazard_bound, hull_step_params, max_hazard_step
from .pde import AfvPdeSolver
from .termsheet import TermSheetError, load_terms

EXIT_MODEL_ERROR = 3
EXIT_CONFIG_ERROR = 2


def fmt(x: float) -> str:
    """Shortest round-trip decimal form."""
    return repr(float(x))


def parse_spot_grid(text: str) -> np.ndarray:
    """``lo:hi:n`` -> ``n`` equally spaced spots from ``lo`` to ``hi``."""
    try:
        lo, hi, n = text.split(":")
        lo, hi, n = float(lo), float(hi), int(n)
    except ValueError:
        raise click.BadParameter(f"expected lo:hi:n, got {text!r}") from None
    if n < 1 or lo < 0.0 or hi < lo or (n > 1 and hi == lo):
        raise click.BadParameter(f"invalid grid {text!r}")
    return np.linspace(lo, hi, n) if n > 1 else np.array([lo])


def _model_options(f):
    options = [
        click.option("--terms", "terms_path", required=True, type=click.Path(dir_okay=False), help="Term-sheet file."),
        click.option("--model", type=click.Choice(["constant", "synthesis", "hull"]), default="constant", show_default=True),
        click.option("--steps", type=click.IntRange(min=1), default=1000, show_default=True, help="Tree steps."),
        click.option("--lambda0", type=float, default=0.062, show_default=True, help="Default intensity (at --s0 for synthesis)."),
        click.option("--alpha", type=float, default=-0.5, show_default=True, help="Synthesis power-law exponent."),
        click.option("--s0", type=float, default=50.0, show_default=True, help="Synthesis reference spot."),
        click.option("--eta", type=float, default=1.0, show_default=True, help="Stock drop on default."),
        click.option("--r", "rate", type=float, default=0.05, show_default=True),
        click.option("--sigma", type=float, default=0.25, show_default=True),
        click.option("--recovery", type=float, default=None, help="Override the term-sheet recovery rate."),
        click.option("--valuation-date", type=click.DateTime(["%Y-%m-%d"]), default=None, help="Defaults to the issue date."),
    ]
    for opt in reversed(options):
        f = opt(f)
    return f


def _pricer(params: dict, **overrides) -> ConvertiblePricer:
    path = params["terms_path"]
    if not Path(path).is_file():
        _fail_config(f"{path}: term-sheet file not found")
    try:
        terms = load_terms(path)
    except TermSheetError as exc:
        _fail_config(str(exc))
    if params["recovery"] is not None:
        try:
            terms = replace(terms, recovery=params["recovery"])
        except ValueError as exc:
            raise click.BadParameter(str(exc), param_hint="--recovery") from None
    vd = params["valuation_date"]
    kwargs = dict(
        terms=terms,
        model=params["model"],
        r=params["rate"],
        sigma=params["sigma"],
        eta=params["eta"],
        lambda0=params["lambda0"],
        alpha=params["alpha"],
        s0=params["s0"],
        n_steps=params["steps"],
        valuation_date=vd.date() if vd is not None else None,
    )
    kwargs.update(overrides)
    try:
        return ConvertiblePricer(**kwargs).fit()
    except PricingError:
        raise
    except ValueError as exc:
        raise click.UsageError(str(exc)) from None


def _fail_config(message: str):
    click.echo(f"error: CONFIG: {message}", err=True)
    sys.exit(EXIT_CONFIG_ERROR)


def _spots(spot, spot_grid) -> np.ndarray:
    if spot_grid is not None:
        return parse_spot_grid(spot_grid)
    if spot is not None:
        return np.array([spot])
    raise click.UsageError("give --spot or --spot-grid")


def _emit(text: str, out: str | None) -> None:
    if out is None:
        click.echo(text, nl=False)
    else:
        Path(out).write_text(text, newline="")


def _csv(header, rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buf.getvalue()


class _Group(click.Group):
    def invoke(self, ctx):
        try:
            return super().invoke(ctx)
        except PricingError as exc:
            click.echo(f"error: {exc.token}: {exc}", err=True)
            sys.exit(EXIT_MODEL_ERROR)
        except ValueError as exc:
            click.echo(f"error: INVALID_INPUT: {exc}", err=True)
            sys.exit(EXIT_CONFIG_ERROR)


@click.group(cls=_Group)
def cli():
    """Convertible bond pricing on a defaultable-stock binomial tree."""


@cli.command()
@_model_options
@click.option("--spot", type=click.FloatRange(min=0.0, min_open=True), required=True)
def price(spot, **params):
    """Value and delta at one spot."""
    pricer = _pricer(params)
    res = pricer.price(spot)
    fields = [
        f"model={res.model}",
        f"spot={fmt(res.spot)}",
        f"value={res.value:.6f}",
        f"delta={res.delta:.6f}",
        f"n_steps={res.n_steps}",
        f"step_margin={res.step_margin:.6g}",
        f"floor={'none' if res.floor is None else format(res.floor, '.6g')}",
        f"clamped_nodes={res.clamped_nodes}",
    ]
    if pricer.lambda0 == 0.0 and pricer.kind_ != "synthesis":
        fields.append("mode=CRR-equivalent")
    click.echo(" ".join(fields))


@cli.command()
@_model_options
@click.option("--spot", type=click.FloatRange(min=0.0, min_open=True), default=None)
@click.option("--spot-grid", default=None, help="lo:hi:n")
@click.option("--out", type=click.Path(dir_okay=False), default=None, help="CSV path (default stdout).")
@click.option("--jobs", type=int, default=None, help="Worker threads.")
def profile(spot, spot_grid, out, jobs, **params):
    """Price profile over a spot grid as CSV."""
    spots = _spots(spot, spot_grid)
    pricer = _pricer(params, n_jobs=jobs)
    rows = [
        (fmt(s), fmt(res.value), fmt(res.delta), "true" if res.floor_extended else "false", res.model)
        for s, res in pricer.profile(spots)
    ]
    _emit(_csv(["spot", "value", "delta", "floor_extended", "model"], rows), out)


@cli.command()
@_model_options
@click.option("--spot", type=click.FloatRange(min=0.0, min_open=True), required=True)
@click.option("--ladder", default="125,250,500,1000,2000,4000", show_default=True, help="Comma-separated step counts.")
@click.option("--pde-grid", default="800x800", show_default=True, help="SPACExTIME steps of the reference solve.")
@click.option("--pde-scheme", type=click.Choice(["implicit", "crank-nicolson"]), default="implicit", show_default=True)
@click.option("--out", type=click.Path(dir_okay=False), default=None)
def converge(spot, ladder, pde_grid, pde_scheme, out, **params):
    """Tree values over a step ladder against the finite-difference reference."""
    try:
        steps = [int(x) for x in ladder.split(",")]
        n_space, n_time = (int(x) for x in pde_grid.lower().split("x"))
    except ValueError:
        raise click.BadParameter("malformed --ladder or --pde-grid") from None
    base = _pricer(params, n_steps=steps[0])
    ref = AfvPdeSolver(
        base.terms_,
        r=base.r,
        sigma=base.sigma,
        eta=base.eta,
        model=base.model,
        lambda0=base.lambda0,
        alpha=base.alpha,
        s0=base.s0,
        n_space=n_space,
        n_time=n_time,
        scheme=pde_scheme,
        valuation_date=base.valuation_date,
    ).fit([spot])
    target = float(ref.predict([spot])[0])
    rows = []
    for n in steps:
        value = base.set_params(n_steps=n).fit().price(spot).value
        rows.append((n, fmt(value), fmt(abs(value - target))))
    _emit(_csv(["n_steps", "tree_value", "abs_error"], rows), out)


@cli.command("compare-hull")
@_model_options
@click.option("--spot", type=click.FloatRange(min=0.0, min_open=True), default=None)
@click.option("--spot-grid", default=None, help="lo:hi:n")
@click.option("--out", type=click.Path(dir_okay=False), default=None)
def compare_hull(spot, spot_grid, out, **params):
    """Constant-intensity tree against the reduced-volatility tree, same inputs."""
    spots = _spots(spot, spot_grid)
    const = _pricer(params, model="constant").predict(spots)
    hull = _pricer(params, model="hull").predict(spots)
    rows = [(fmt(s), fmt(c), fmt(h), fmt(h - c)) for s, c, h in zip(spots, const, hull)]
    _emit(_csv(["spot", "constant", "hull", "difference"], rows), out)


@cli.command("validate-step")
@_model_options
@click.option("--spot", type=click.FloatRange(min=0.0, min_open=True), default=None, help="Check the synthesis intensity at this spot.")
def validate_step(spot, **params):
    """Check the step bound for the configured tree step."""
    pricer = _pricer(params)  # constant/hull failures raise here
    dt, market, spec, kind = pricer.dt_, pricer.market_, pricer.spec_, pricer.kind_
    if kind == "hull":
        u = hull_step_params(market, spec.hazard.lambda0, dt).u
        bound = hazard_bound(market.r, u, 1.0, dt)
    else:
        bound = max_hazard_step(market, spec.eta, dt)
    fields = [f"model={kind}", f"dt={dt:.6g}", f"max_lambda_dt={bound:.6g}"]
    if kind == "synthesis":
        floor = stock_floor(spec.hazard, market, spec.eta, dt)
        fields.append(f"floor={floor:.6g}")
        if spot is not None:
            lam_dt = spec.hazard.at(spot) * dt
            fields.append(f"lambda_dt={lam_dt:.6g}")
            if lam_dt > bound:
                raise StepTooCoarse(
                    f"spot {spot:g} lies below the floor {floor:.6g}", max_lambda_dt=bound, lambda_dt=lam_dt
                )
    else:
        fields.append(f"lambda_dt={spec.hazard.lambda0 * dt:.6g}")
    fields.append("valid=true")
    click.echo(" ".join(fields))


def main(argv=None):
    return cli.main(args=argv, prog_name="cbtree")


if __name__ == "__main__":
    main()
