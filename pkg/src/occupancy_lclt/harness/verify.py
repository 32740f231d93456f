"""Fast self-checks run by ``occupancy-lclt verify``."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .. import distlib, er_model, gg_model, oracle, sizebias
from ..rng import derive_stream
from .rates import fit_loglog


@dataclass(frozen=True)
class Check:
    name: str
    ok: bool
    detail: str = ""

    def line(self):
        return f"{'PASS' if self.ok else 'FAIL'} {self.name}" + (f": {self.detail}" if self.detail else "")


def check_er_moments():
    worst = 0.0
    for n in range(3, 6):
        for lam in (0.5, 1.0, 2.0):
            for d in (0, 1, 2):
                mu, var = er_model.er_moments(n, lam, d)
                exact = oracle.er_exact_pmf(n, lam, d)
                worst = max(worst, abs(mu - exact.mean), abs(var - exact.variance))
    return Check("er closed-form moments vs enumeration", worst < 1e-10, f"max error {worst:.3g}")


def check_coupled_law():
    worst = 0.0
    for n, p in ((10, 0.3), (25, 0.1), (40, 0.7)):
        base = distlib.binomial_pmf(n, p)
        for d in range(n + 1):
            law = sizebias.build_increment_law(base, d)
            target = sizebias.conditional_pmf(base, d)
            got = sizebias.coupled_law(law)
            lo = min(got.offset, target.offset)
            hi = max(got.max_support, target.max_support)
            worst = max(worst, float(np.max(np.abs(got.on_range(lo, hi) - target.on_range(lo, hi)))))
    return Check("increment coupling reproduces L(M | M != d)", worst < 1e-12, f"max error {worst:.3g}")


def check_er_size_bias():
    worst = 0.0
    for d in (0, 1):
        law = er_model.degree_law(4, 2.0, d)
        ws, ed, _ = oracle.er_exact_coupling(4, 2.0, d, law)
        sb = oracle.er_exact_size_bias_pmf(4, 2.0, d)
        worst = max(worst, distlib.tv_distance(ws, sb), abs(ed - er_model.er_moments(4, 2.0, d)[1]))
    return Check("exact ER coupling law equals the size-biased law", worst < 1e-12, f"max error {worst:.3g}")


def check_tp_gap():
    vals = [distlib.tp_vs_normal_gap(distlib.tp_params(0.0, s2)) * s2 for s2 in (1, 4, 16, 64)]
    ok = max(vals) <= 1.25 * vals[0]
    return Check("translated Poisson vs normal gap times sigma^2 stays bounded", ok,
                 ", ".join(f"{v:.4f}" for v in vals))


def check_fit():
    x = np.array([1.0, 2.0, 4.0, 8.0])
    fit = fit_loglog(x, x ** 2, 0.01 * x ** 2)
    ok = abs(fit.slope - 2) < 1e-10 and fit.ci[1] - fit.ci[0] < 1e-8
    return Check("log-log fit recovers an exact power law", ok, f"slope {fit.slope:.12g}")


def check_streams():
    a = derive_stream(1, 2, 3).random(1000)
    b = derive_stream(1, 2, 3).random(1000)
    c = derive_stream(1, 2, 4).random(1000)
    ok = np.array_equal(a, b) and not np.array_equal(a, c)
    return Check("derived streams replay and separate by tag", ok)


def check_graph(sample, d):
    law = er_model.degree_law(sample.n, sample.lam, d)
    step = oracle.er_step_law(sample, d, law)
    direct = er_model.er_mean(sample.n, sample.lam, d) * sum(k * v for k, v in step.items())
    closed = er_model.conditional_gd(sample, d, law)
    ok = abs(direct - closed) <= 1e-10 * max(1.0, abs(closed)) and max(abs(k) for k in step) <= 2
    return Check(f"graph n={sample.n}: E[GD | graph] by enumeration vs closed form", ok,
                 f"{direct:.12g} vs {closed:.12g}, W_{d}={er_model.w_d(sample, d)}")


def check_germs(config, d):
    out = []
    brute = config.brute_force_counts()
    out.append(Check(f"germs n={config.n}: cell-list counts equal brute force",
                     bool(np.array_equal(brute, config.m_counts))))
    s = gg_model.removal_increment(config, d)
    w = config.w_d(d)
    actual = np.array([config.without(j).w_d(d) - w + 1 for j in range(config.n)])
    out.append(Check(f"germs n={config.n}: S_j equals the deletion difference",
                     bool(np.array_equal(s, actual))))
    stats = gg_model.increment_stats(config, d, check=False)
    bad = gg_model.bound_violations(stats, config)
    out.append(Check(f"germs n={config.n}: uniform increment bounds", not bad, f"{len(bad)} violations"))
    return out


def run_checks(graph=None, germs=None, d=1):
    checks = [check_er_moments(), check_coupled_law(), check_er_size_bias(), check_tp_gap(),
              check_fit(), check_streams()]
    if graph is not None:
        checks.append(check_graph(graph, d))
    if germs is not None:
        checks.extend(check_germs(germs, d))
    return checks
