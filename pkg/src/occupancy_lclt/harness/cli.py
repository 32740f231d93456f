"""Command line entry point."""

from __future__ import annotations

import math
import sys

import click

from .. import __version__
from ..distlib import Pmf
from ..er_model import ErdosRenyiModel, ErSample
from ..errors import DegenerateInput, InvalidArgument, PreconditionViolation, ResourceLimit
from ..gg_model import GermConfig, GermGrainModel
from ..oracle import er_exact_pmf, er_exact_size_bias_pmf
from ..rng import block_seed, derive_stream, tag_of
from ..steinlab import bound_report, write_bound_csv
from .config import ExperimentConfig, load_config
from .rates import provenance_lines, run_rate_experiment, w_counts
from .verify import run_checks

EXIT_PRECONDITION = 2
EXIT_RESOURCE = 3


def _threads(value):
    if value is None or value == "auto":
        return value
    try:
        return int(value)
    except ValueError:
        raise click.BadParameter("expected an integer or 'auto'") from None


def _emit(text, out):
    if out is None:
        click.echo(text, nl=False)
    else:
        with open(out, "w", newline="\n") as fh:
            fh.write(text)


def _config(config_path, seed, threads, out, **fallback):
    if config_path is not None:
        cfg = load_config(config_path)
    else:
        missing = [k for k in ("model", "param", "d", "n_list") if fallback.get(k) is None]
        if missing:
            raise InvalidArgument(f"without --config these options are required: {', '.join(missing)}")
        cfg = ExperimentConfig(**{k: v for k, v in fallback.items() if v is not None})
    return cfg.with_overrides(master_seed=seed, threads=threads, output_path=out)


def _model(cfg, n):
    return ErdosRenyiModel(n, cfg.param) if cfg.model == "ER" else GermGrainModel(n, cfg.param)


common = [
    click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False),
                 help="flat key = value experiment file"),
    click.option("--seed", type=click.IntRange(0, 2**64 - 1), help="master seed (overrides the config)"),
    click.option("--threads", callback=lambda c, p, v: _threads(v), help="worker threads or 'auto'"),
    click.option("--out", type=click.Path(dir_okay=False), help="output CSV (default: stdout)"),
]
model_opts = [
    click.option("--model", type=click.Choice(["ER", "GG"], case_sensitive=False)),
    click.option("--param", type=float, help="lambda for ER, r for GG"),
    click.option("--d", type=int),
    click.option("--n", "n_list", type=int, multiple=True, help="repeatable"),
    click.option("--reps", type=int, default=None),
]


def _apply(opts):
    def wrap(f):
        for opt in reversed(opts):
            f = opt(f)
        return f
    return wrap


@click.group()
@click.version_option(__version__, prog_name="occupancy-lclt")
def cli():
    """Translated Poisson approximation of occupancy counts."""


@cli.command()
@_apply(common + model_opts)
def simulate(config_path, seed, threads, out, model, param, d, n_list, reps):
    """Empirical pmf of W_d at the largest n of the sweep."""
    cfg = _config(config_path, seed, threads, None, model=model, param=param, d=d,
                  n_list=n_list or None, reps=reps or 10_000)
    n = cfg.n_list[-1]
    tag = tag_of("simulate", cfg.model, cfg.param, cfg.d, n)
    counts = w_counts(_model(cfg, n), cfg.d, cfg.reps, cfg.master_seed, tag, cfg.block, cfg.n_threads)
    header = "".join(f"# {line}\n" for line in provenance_lines(cfg)) + f"# n={n}\n"
    _emit(header + Pmf.from_counts(0, counts).to_csv(), out)


@cli.command()
@_apply(common + model_opts)
def rates(config_path, seed, threads, out, model, param, d, n_list, reps):
    """Sweep n and fit log-log slopes of the TV and local distances."""
    cfg = _config(config_path, seed, threads, out, model=model, param=param, d=d,
                  n_list=n_list or None, reps=reps or 100_000)
    series = run_rate_experiment(cfg)
    if out is None:
        click.echo(series.to_csv(), nl=False)


@cli.command()
@click.option("--graph", type=click.Path(exists=True, dir_okay=False), help="edge list with 'n=<n>' header")
@click.option("--lam", type=float, default=1.0, help="lambda attached to --graph")
@click.option("--germs", type=click.Path(exists=True, dir_okay=False), help="germ CSV with 'n=<n>,r=<r>' header")
@click.option("--d", type=int, default=1)
def verify(graph, lam, germs, d):
    """Run the built-in oracle checks, plus checks on dumped samples."""
    sample = None
    if graph is not None:
        with open(graph) as fh:
            sample = ErSample.from_text(fh.read(), lam)
    germ_cfg = GermConfig.from_csv(germs) if germs is not None else None
    checks = run_checks(sample, germ_cfg, d)
    for c in checks:
        click.echo(c.line())
    if not all(c.ok for c in checks):
        raise click.exceptions.Exit(1)


@cli.command()
@_apply(common + model_opts)
@click.option("--outer", type=int, default=200)
@click.option("--inner", type=int, default=10_000)
def bound(config_path, seed, threads, out, model, param, d, n_list, reps, outer, inner):
    """Estimate c1, c2 and report both bounds with provenance."""
    cfg = _config(config_path, seed, threads, None, model=model, param=param, d=d,
                  n_list=n_list or None, reps=reps or 10_000)
    n = cfg.n_list[-1]
    mdl = _model(cfg, n)
    if cfg.model == "ER":
        sigma, sigma_se = math.sqrt(mdl.variance(cfg.d)), 0.0
    else:
        var, var_se = mdl.variance_mc(cfg.d, cfg.reps, block_seed(cfg.master_seed, 0, tag_of("bound-sigma")))
        sigma, sigma_se = math.sqrt(var), var_se / (2 * math.sqrt(var))
    rng = derive_stream(cfg.master_seed, n, tag_of("bound", cfg.model, cfg.param, cfg.d))
    inputs, _ = bound_report(mdl, cfg.d, reps=cfg.reps, outer=outer, inner=inner, rng=rng,
                          sigma=sigma, sigma_se=sigma_se)
    _emit(write_bound_csv(inputs.provenance, None, provenance_lines(cfg) + [f"n={n}"]), out)


@cli.command()
@click.option("--n", type=int, required=True)
@click.option("--lam", type=float, required=True)
@click.option("--d", type=int, required=True)
@click.option("--size-bias", is_flag=True, help="emit the size-biased law instead")
@click.option("--threads", type=int, default=1)
@click.option("--out", type=click.Path(dir_okay=False))
def oracle(n, lam, d, size_bias, threads, out):
    """Exact pmf of W_d for a tiny Erdos-Renyi graph."""
    pmf = er_exact_size_bias_pmf(n, lam, d) if size_bias else er_exact_pmf(n, lam, d, threads=threads).pmf
    header = f"# occupancy_lclt {__version__}\n# exact n={n} lambda={lam!r} d={d}\n"
    _emit(header + pmf.to_csv(), out)


def main(argv=None):
    try:
        cli.main(args=argv, prog_name="occupancy-lclt", standalone_mode=False)
    except (InvalidArgument, PreconditionViolation, DegenerateInput) as exc:
        click.echo(f"error: {exc}", err=True)
        return EXIT_PRECONDITION
    except ResourceLimit as exc:
        click.echo(f"resource limit: {exc}", err=True)
        return EXIT_RESOURCE
    except click.exceptions.Exit as exc:
        return exc.exit_code
    except click.ClickException as exc:
        exc.show()
        return EXIT_PRECONDITION if isinstance(exc, click.UsageError) else exc.exit_code
    except OSError as exc:
        click.echo(f"io error: {exc}", err=True)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
