"""Convergence-rate sweeps: distance to the translated Poisson law as n grows."""

from __future__ import annotations

import io
import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import statsmodels.api as sm
from scipy import stats

from ..distlib import Pmf, loc_distance, tp_params, tp_pmf, tv_distance
from ..er_model import ErdosRenyiModel
from ..errors import InvalidArgument, ReliabilityWarning
from ..gg_model import GermGrainModel
from ..rng import block_seed, derive_stream, tag_of

COLUMNS = ("n", "sigma_hat", "se_sigma", "dtv_hat", "se_dtv", "dloc_hat", "se_dloc")
# exponent of log(sigma) in the local-distance normalization
LOC_LOG_POWER = {"ER": 2.5, "GG": 1.5}


@dataclass(frozen=True)
class LogLogFit:
    slope: float
    intercept: float
    ci: tuple
    level: float = 0.95

    def contains(self, value, tol=0.0):
        return self.ci[0] - tol <= value <= self.ci[1] + tol


def fit_loglog(x, y, se, level=0.95):
    """Weighted least squares of log y on log x with weights ``(y/se)^2``."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    se = np.asarray(se, dtype=float)
    if not (x.shape == y.shape == se.shape) or x.ndim != 1:
        raise InvalidArgument("x, y and se must be 1-d arrays of equal length")
    if x.size < 3:
        raise InvalidArgument("a log-log fit needs at least 3 rows")
    if np.unique(x).size != x.size:
        raise InvalidArgument("x values must be distinct")
    if np.any(x <= 0) or np.any(y <= 0):
        raise InvalidArgument("x and y must be positive")
    if np.any(~np.isfinite(se)) or np.any(se <= 0):
        raise InvalidArgument("standard errors must be positive and finite")
    design = sm.add_constant(np.log(x))
    res = sm.WLS(np.log(y), design, weights=(y / se) ** 2).fit()
    half = stats.t.ppf(0.5 + level / 2, res.df_resid) * res.bse[1]
    slope = float(res.params[1])
    return LogLogFit(slope, float(res.params[0]), (slope - half, slope + half), level)


@dataclass
class RateSeries:
    rows: list
    fits: dict = field(default_factory=dict)
    flags: list = field(default_factory=list)
    provenance: list = field(default_factory=list)

    def column(self, name):
        return np.array([r[COLUMNS.index(name)] for r in self.rows])

    def to_csv(self, path=None):
        buf = io.StringIO()
        for line in self.provenance:
            buf.write(f"# {line}\n")
        buf.write(",".join(COLUMNS) + "\n")
        for row in self.rows:
            buf.write(f"{row[0]:d}," + ",".join(f"{v:.17g}" for v in row[1:]) + "\n")
        for name, fit in self.fits.items():
            buf.write(f"# fit {name}: slope={fit.slope:.17g} intercept={fit.intercept:.17g} "
                      f"ci=[{fit.ci[0]:.17g},{fit.ci[1]:.17g}]\n")
        for flag in self.flags:
            buf.write(f"# warning {flag}\n")
        text = buf.getvalue()
        if path is not None:
            with open(path, "w", newline="\n") as fh:
                fh.write(text)
        return text


def make_model(config, n):
    if config.model == "ER":
        return ErdosRenyiModel(n, config.param)
    return GermGrainModel(n, config.param)


def _blocks(total, size):
    full, rest = divmod(total, size)
    return [size] * full + ([rest] if rest else [])


def w_counts(model, d, reps, master_seed, tag, block=20_000, threads=1):
    """Histogram of W_d over ``reps`` draws; bins indexed by value 0..n."""
    sizes = _blocks(reps, block)
    seeds = [block_seed(master_seed, b, tag) for b in range(len(sizes))]

    def run(job):
        size, seed = job
        w = model.w_samples([d], size, seed)[:, 0]
        return np.bincount(w, minlength=model.n + 1)

    jobs = list(zip(sizes, seeds))
    if threads > 1 and len(jobs) > 1:
        with ThreadPoolExecutor(threads) as ex:
            parts = list(ex.map(run, jobs))
    else:
        parts = [run(j) for j in jobs]
    return np.sum(parts, axis=0)


def _sigma2(config, model, n, threads):
    if config.model == "ER":
        return model.variance(config.d), 0.0
    # independent Monte Carlo stream for the variance
    tag = tag_of("rates-sigma", config.model, config.param, config.d, n)
    counts = w_counts(model, config.d, config.reps, config.master_seed, tag, config.block, threads)
    k = np.arange(counts.size, dtype=float)
    total = counts.sum()
    m1 = counts @ k / total
    c2 = counts @ (k - m1) ** 2 / total
    c4 = counts @ (k - m1) ** 4 / total
    var = c2 * total / (total - 1)
    return float(var), float(math.sqrt(max(c4 - c2 * c2, 0.0) / total))


def _distances(emp, mu, sigma2):
    target = tp_pmf(tp_params(mu, sigma2))
    return tv_distance(emp, target), loc_distance(emp, target)


def rate_row(config, n, threads=1):
    """One RateSeries row plus a list of reliability flags."""
    model = make_model(config, n)
    d = config.d
    mu = model.mean(d)
    sigma2, se_sigma2 = _sigma2(config, model, n, threads)
    if sigma2 <= 0:
        raise InvalidArgument(f"n={n}: W_d has zero variance")
    tag = tag_of("rates", config.model, config.param, d, n)
    counts = w_counts(model, d, config.reps, config.master_seed, tag, config.block, threads)
    emp = Pmf.from_counts(0, counts)
    dtv, dloc = _distances(emp, mu, sigma2)

    rng = derive_stream(config.master_seed, n, tag_of("rates-bootstrap", config.model, config.param, d))
    boot = rng.multinomial(config.reps, counts / counts.sum(), size=config.bootstrap)
    jitter = rng.standard_normal(config.bootstrap) * se_sigma2
    tv_b = np.empty(config.bootstrap)
    loc_b = np.empty(config.bootstrap)
    for b in range(config.bootstrap):
        s2 = max(sigma2 + jitter[b], 1e-12)
        tv_b[b], loc_b[b] = _distances(Pmf.from_counts(0, boot[b]), mu, s2)
    se_tv = float(tv_b.std(ddof=1))
    se_loc = float(loc_b.std(ddof=1))

    sigma = math.sqrt(sigma2)
    se_sigma = se_sigma2 / (2 * sigma)
    flags = []
    if not se_loc < dloc:
        flags.append(f"n={n}: bootstrap SE of dloc ({se_loc:.3g}) is not below dloc ({dloc:.3g}); "
                     f"reps too small to resolve the local distance")
    if not se_tv < dtv:
        flags.append(f"n={n}: bootstrap SE of dtv ({se_tv:.3g}) is not below dtv ({dtv:.3g})")
    return (n, sigma, se_sigma, dtv, se_tv, dloc, se_loc), flags


def _fit_series(series, model):
    if len(series.rows) < 3:
        return
    sigma = series.column("sigma_hat")
    for name, y_col, se_col in (("tv", "dtv_hat", "se_dtv"), ("loc", "dloc_hat", "se_dloc")):
        y, se = series.column(y_col), series.column(se_col)
        try:
            series.fits[name] = fit_loglog(sigma, y, se)
        except InvalidArgument as exc:
            series.flags.append(f"fit {name} skipped: {exc}")
    power = LOC_LOG_POWER[model]
    log_s = np.log(sigma)
    if np.all(log_s > 0):
        norm = log_s ** power
        try:
            series.fits["loc_normalized"] = fit_loglog(
                sigma, series.column("dloc_hat") / norm, series.column("se_dloc") / norm)
        except InvalidArgument as exc:
            series.flags.append(f"fit loc_normalized skipped: {exc}")
    else:
        series.flags.append("fit loc_normalized skipped: log(sigma) <= 0")


def provenance_lines(config, version=None):
    if version is None:
        from .. import __version__ as version
    return [f"occupancy_lclt {version}",
            f"config_hash={config.config_hash()}",
            f"master_seed={config.master_seed}",
            f"model={config.model} {config.param_name}={config.param!r} d={config.d} "
            f"reps={config.reps} bootstrap={config.bootstrap}"]


def run_rate_experiment(config, threads=None):
    """Sweep ``config.n_list`` and fit log-log slopes against sigma."""
    threads = config.n_threads if threads is None else int(threads)
    series = RateSeries(rows=[], provenance=provenance_lines(config))
    for n in config.n_list:
        row, flags = rate_row(config, n, threads)
        series.rows.append(row)
        series.flags.extend(flags)
    _fit_series(series, config.model)
    for flag in series.flags:
        warnings.warn(flag, ReliabilityWarning, stacklevel=2)
    if config.output_path is not None:
        series.to_csv(config.output_path)
    return series
