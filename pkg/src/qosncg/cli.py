"""Command-line entry point: ``qosncg <subcommand>``.

Exit codes: 0 success, 1 instability found, 2 invalid input, 3 bound violation, 4 I/O error.
"""

from __future__ import annotations

import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

import click
import numpy as np
from click.core import ParameterSource

from . import __version__
from .constructions import max_ne, max_opt_star, opt_sum, sum_ne, sum_worst_clique
from .dynamics import (DEFAULT_GRID, EXHAUSTIVE_LIMIT, RESTRICTED, CandidateWeights,
                       DeviationFamily, Scheduler, candidate_weights, random_profile, run_dynamics)
from .errors import NCGError
from .experiment import ExperimentConfig, ExperimentRecord, report, run_experiment
from .game import EPS, GameKind, StrategyProfile, dumps, load_profile, realize, save_profile
from .price import parse_price
from .verifier import bound_suite, brute_force_opt, certify_ne, families_for

EXIT_OK, EXIT_UNSTABLE, EXIT_INVALID, EXIT_BOUND, EXIT_IO = range(5)

log = logging.getLogger("qosncg")


class Exit(Exception):
    def __init__(self, code):
        self.code = code


def _echo_json(obj):
    click.echo(json.dumps(obj, indent=1, sort_keys=True))


def _out_dir(ctx):
    path = Path(ctx.obj["out"])
    path.mkdir(parents=True, exist_ok=True)
    return path


def _families(name, n, limit):
    if name == "auto":
        return families_for(n, limit)
    if name == "restricted":
        return RESTRICTED
    return (DeviationFamily.parse(name),)


game_option = click.option("--game", "game", type=click.Choice(["sum", "max"]), default="sum",
                           show_default=True)
price_option = click.option("--price", "price", required=True,
                            help="e.g. reciprocal:alpha=4,lo=1,hi=10")
grid_option = click.option("--grid", type=int, default=DEFAULT_GRID, show_default=True,
                           help="evenly spaced candidate weights added to the minimizers")
limit_option = click.option("--exhaustive-limit", type=int, default=EXHAUSTIVE_LIMIT,
                            show_default=True)
family_option = click.option("--family", default="auto", show_default=True,
                             help="auto, restricted, exhaustive, remove-only, single-add, "
                                  "single-reweight or star-collapse")


@click.group()
@click.version_option(__version__)
@click.option("--workers", type=int, default=None, help="worker processes (default: all cores)")
@click.option("--tolerance", type=float, default=EPS, show_default=True,
              help="strict-improvement threshold used by certification and dynamics")
@click.option("--out", type=click.Path(file_okay=False), default=".", show_default=True)
@click.option("-v", "--verbose", count=True)
@click.pass_context
def cli(ctx, workers, tolerance, out, verbose):
    """Network creation games with quality-dependent edge prices."""
    logging.basicConfig(level=logging.WARNING - 10 * min(verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    ctx.obj = {"workers": workers, "tolerance": tolerance, "out": out,
               "tolerance_set": ctx.get_parameter_source("tolerance") is not ParameterSource.DEFAULT}


@cli.command()
@game_option
@click.option("--n", "n", type=int, required=True)
@price_option
@click.option("--which", type=click.Choice(["opt", "ne", "worst"]), default="ne", show_default=True)
@click.option("--name", default=None, help="output file stem")
@click.pass_context
def construct(ctx, game, n, price, which, name):
    """Build a constructed profile; writes <stem>.ncg and <stem>.json."""
    p = parse_price(price)
    kind = GameKind.parse(game)
    if kind is GameKind.SUM:
        build = {"opt": opt_sum, "ne": sum_ne, "worst": sum_worst_clique}[which]
    elif which == "worst":
        raise click.BadParameter("--which worst exists for the sum game only")
    else:
        build = {"opt": max_opt_star, "ne": max_ne}[which]
    outcome = build(n, p)
    stem = _out_dir(ctx) / (name or f"{game}-{which}-n{n}")
    save_profile(outcome.profile, stem.with_suffix(".ncg"))
    stem.with_suffix(".json").write_text(json.dumps(outcome.sidecar(), indent=1, sort_keys=True) + "\n")
    _echo_json({**outcome.sidecar(), "profile": str(stem.with_suffix(".ncg"))})


@cli.command()
@click.option("--profile", "profile_path", type=click.Path(dir_okay=False), required=True)
@family_option
@grid_option
@limit_option
@click.option("--all-bounds", is_flag=True, help="also run every applicable bound check")
@click.pass_context
def verify(ctx, profile_path, family, grid, exhaustive_limit, all_bounds):
    """Certify a profile as an equilibrium (exit 1 if Unstable, 3 on a bound violation)."""
    profile = load_profile(profile_path)
    cands = candidate_weights(profile.price, profile.n, grid)
    fams = _families(family, profile.n, exhaustive_limit)
    rep = certify_ne(profile, fams, cands, eps=ctx.obj["tolerance"],
                     exhaustive_limit=max(exhaustive_limit, profile.n) if family == "exhaustive"
                     else exhaustive_limit)
    out = {"stability": rep.as_json()}
    code = EXIT_OK if rep.stable else EXIT_UNSTABLE
    if all_bounds:
        checks = bound_suite(realize(profile), rep)
        out["bounds"] = [{"name": c.name, "lhs": c.lhs, "rhs": c.rhs, "direction": c.direction,
                          "slack": c.slack, "satisfied": c.satisfied} for c in checks]
        if code == EXIT_OK and not all(c.satisfied for c in checks):
            code = EXIT_BOUND
    _echo_json(out)
    raise Exit(code)


@cli.command("br-dynamics")
@click.option("--init", "init", default="empty", show_default=True,
              help="profile file, 'empty' or 'random:<seed>'")
@click.option("--game", type=click.Choice(["sum", "max"]), default=None,
              help="required unless --init is a profile file")
@click.option("--n", "n", type=int, default=None)
@click.option("--price", default=None)
@click.option("--family", default="exhaustive", show_default=True)
@click.option("--scheduler", default="round-robin", show_default=True,
              help="round-robin or random:<seed>")
@click.option("--max-rounds", type=int, default=100, show_default=True)
@click.option("--density", type=float, default=0.4, show_default=True)
@grid_option
@limit_option
@click.pass_context
def br_dynamics(ctx, init, game, n, price, family, scheduler, max_rounds, density, grid,
                exhaustive_limit):
    """Run improving-response dynamics; writes trace.jsonl and final.ncg (exit 1 if not converged)."""
    if init == "empty" or init.startswith("random:"):
        if game is None or n is None or price is None:
            raise click.UsageError("--game, --n and --price are required with --init empty/random")
        p, kind = parse_price(price), GameKind.parse(game)
        cands = candidate_weights(p, n, grid)
        if init == "empty":
            start = StrategyProfile.empty(n, p, kind)
        else:
            start = random_profile(n, p, kind, cands, seed=int(init.split(":", 1)[1]), density=density)
    else:
        start = load_profile(init)
        cands = candidate_weights(start.price, start.n, grid)
    trace = run_dynamics(start, cands, Scheduler.parse(scheduler), DeviationFamily.parse(family),
                         max_rounds, eps=ctx.obj["tolerance"], exhaustive_limit=exhaustive_limit)
    out = _out_dir(ctx)
    with open(out / "trace.jsonl", "w") as fh:
        for step in trace.steps:
            fh.write(json.dumps(step.as_json(), sort_keys=True) + "\n")
    save_profile(trace.final, out / "final.ncg")
    _echo_json({"converged": trace.converged, "rounds": trace.rounds, "moves": len(trace.steps),
                "scheduler": str(trace.scheduler), "family": trace.family.value,
                "social_cost": realize(trace.final).social_cost(),
                "final": str(out / "final.ncg")})
    raise Exit(EXIT_OK if trace.converged else EXIT_UNSTABLE)


@cli.command()
@click.option("--config", "config_path", type=click.Path(dir_okay=False), default=None,
              help="key = value config file; other flags are ignored when given")
@click.option("--game", type=click.Choice(["sum", "max"]), default="sum", show_default=True)
@click.option("--price", default=None, help="template, e.g. reciprocal:alpha={alpha},lo=1,hi=10")
@click.option("--alpha", default="", help="comma list")
@click.option("--eps", "eps_list", default="", help="comma list")
@click.option("--n", "n_list", default="", help="comma list or a..b range")
@click.option("--grid", type=int, default=DEFAULT_GRID, show_default=True)
@click.option("--family", default="auto", show_default=True)
@limit_option
@click.option("--scheduler", default="round-robin", show_default=True)
@click.option("--dynamics-runs", type=int, default=0, show_default=True)
@click.option("--max-rounds", type=int, default=50, show_default=True)
@click.option("--svg", "svg_path", type=click.Path(dir_okay=False), default=None)
@click.pass_context
def sweep(ctx, config_path, game, price, alpha, eps_list, n_list, grid, family, exhaustive_limit,
          scheduler, dynamics_runs, max_rounds, svg_path):
    """Run an experiment over (price, n); writes rows.jsonl, rows.csv and record.json."""
    if config_path:
        config = ExperimentConfig.from_text(Path(config_path).read_text())
    else:
        if price is None:
            raise click.UsageError("--price or --config is required")
        config = ExperimentConfig.from_mapping({
            "game": game, "price": price, "alpha": alpha, "eps": eps_list, "n": n_list,
            "grid": grid, "family": family, "exhaustive_limit": exhaustive_limit,
            "scheduler": scheduler, "dynamics_runs": dynamics_runs, "max_rounds": max_rounds})
    if ctx.obj["tolerance_set"]:
        config = replace(config, tolerance=ctx.obj["tolerance"])
    out = _out_dir(ctx)
    record = run_experiment(config, out_dir=out, workers=ctx.obj["workers"])
    if svg_path:
        report(record, "svg", svg_path)
    errors = sum(1 for r in record.rows if r["error"])
    _echo_json({"rows": len(record.rows), "fingerprint": record.fingerprint,
                "digest": record.digest(), "unstable": record.unstable,
                "violations": record.violations, "errors": errors,
                "csv": str(out / "rows.csv"), "wall_time": round(record.wall_time, 3)})
    if record.unstable:
        raise Exit(EXIT_UNSTABLE)
    if record.violations:
        raise Exit(EXIT_BOUND)


@cli.command()
@game_option
@click.option("--n", "n", type=int, required=True)
@price_option
@click.option("--brute-force", is_flag=True, help="also minimize over all small profiles")
@click.option("--grid", type=int, default=0, show_default=True,
              help="evenly spaced weights added to the brute-force set (endpoints and "
                   "optimal-edge weights are always included)")
def opt(game, n, price, brute_force, grid):
    """Optimum construction (SUM) or optimum reference (MAX), optionally by enumeration."""
    p, kind = parse_price(price), GameKind.parse(game)
    outcome = opt_sum(n, p) if kind is GameKind.SUM else max_opt_star(n, p)
    out = outcome.sidecar()
    out["profile"] = dumps(outcome.profile)
    if brute_force:
        ws = [p.lo, p.hi, *(v for k, v in outcome.details.items() if k.startswith(("x_", "chi_")))]
        if grid >= 2:
            ws += list(np.linspace(p.lo, p.hi, grid))
        cost, best = brute_force_opt(n, p, CandidateWeights(tuple(ws)), kind)
        out["brute_force_cost"] = cost
        out["brute_force_profile"] = dumps(best)
        out["gap"] = outcome.predicted_cost - cost
    _echo_json(out)


@cli.command("report")
@click.option("--record", "record_path", type=click.Path(dir_okay=False), required=True,
              help="record.json written by sweep")
@click.option("--format", "fmt", type=click.Choice(["csv", "json", "svg"]), default="csv",
              show_default=True)
@click.option("--output", type=click.Path(dir_okay=False), default=None)
@click.pass_context
def report_cmd(ctx, record_path, fmt, output):
    """Render a saved experiment record as CSV, JSON or an SVG chart."""
    record = ExperimentRecord.from_json(Path(record_path).read_text())
    path = Path(output) if output else _out_dir(ctx) / f"report.{fmt}"
    report(record, fmt, path)
    click.echo(str(path))


def main(argv=None):
    try:
        cli.main(args=argv, prog_name="qosncg", standalone_mode=False)
    except Exit as exc:
        return exc.code
    except click.exceptions.Abort:
        return EXIT_INVALID
    except click.ClickException as exc:
        exc.show()
        return EXIT_INVALID
    except (NCGError, ValueError) as exc:
        click.echo(f"error: {exc}", err=True)
        return EXIT_INVALID
    except OSError as exc:
        click.echo(f"I/O error: {exc}", err=True)
        return EXIT_IO
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
