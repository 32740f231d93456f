"""Bound ingredients for translated Poisson approximation via Stein couplings.

``brr_bounds`` turns the constants ``c1`` and ``c2`` into total variation and
local bounds; the ``estimate_*`` functions estimate those constants by
simulation for the two occupancy models; the remaining helpers evaluate the
moment inequalities used along the way.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ._validation import check_int, check_real
from .distlib import Pmf, smoothness
from .errors import (InvalidArgument, PreconditionViolation, ResourceLimit,
                     warn_unreliable)
from .rng import block_seed, tag_of

E = math.e
_BINMOM_CONST = math.pi * math.exp(E - 2.0)


@dataclass(frozen=True)
class Ingredient:
    estimate: float
    se: float
    provenance: str  # "estimated", "hardwired" or "formula"
    note: str = ""


@dataclass(frozen=True)
class BoundInputs:
    mu: float
    sigma: float
    c1: float
    c2: float
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        check_real(self.sigma, "sigma", lower=0.0, lower_open=True)
        if self.c1 < 0 or self.c2 < 0:
            raise InvalidArgument("c1 and c2 must be non-negative")

    @property
    def feasible(self):
        return self.c1 + E * self.c2 < self.sigma / 2


@dataclass(frozen=True)
class BoundResult:
    tv_bound: float
    loc_bound: float | None
    reason: str = ""


def brr_bounds(inputs):
    """``5 c1 / sigma`` and, when ``c1 + e c2 < sigma/2``, ``4 (4 c1 + e c2) / sigma^2``."""
    s = inputs.sigma
    tv = 5.0 * inputs.c1 / s
    if inputs.feasible:
        return BoundResult(tv, 4.0 * (4.0 * inputs.c1 + E * inputs.c2) / (s * s))
    return BoundResult(tv, None, f"c1 + e*c2 = {inputs.c1 + E * inputs.c2:.6g} >= sigma/2 = {s / 2:.6g}")


# ---------------------------------------------------------------- T norms

def _lq(x, q):
    return float(np.mean(np.abs(x) ** q) ** (1.0 / q))


def _bootstrap_se(values, stat, n_boot, rng):
    n = values.size
    reps = np.empty(n_boot)
    for b in range(n_boot):
        reps[b] = stat(values[rng.integers(0, n, n)])
    return float(reps.std(ddof=1))


def _gd_stream(model, d, reps, master_seed, purpose, block=2000):
    out = []
    left = reps
    b = 0
    tag = tag_of(purpose, model.name, model.n, d)
    while left > 0:
        k = min(block, left)
        out.append(model.conditional_gd_samples(d, k, block_seed(master_seed, b, tag)))
        left -= k
        b += 1
    return np.concatenate(out)


def estimate_gd_mean(model, d, reps, master_seed):
    """E[GD] from a dedicated pass (seed offset fixed by its purpose tag)."""
    gd = _gd_stream(model, d, reps, master_seed, "gd-mean")
    return float(gd.mean()), float(gd.std(ddof=1) / math.sqrt(gd.size))


@dataclass(frozen=True)
class TNormEstimate:
    q: int
    value: float
    se: float
    unreliable: bool


def t_norms_from_stream(gd, gd_mean, sigma, q_list, rng, n_boot=200):
    """L_q norms of ``|gd - gd_mean|`` divided by sigma, with bootstrap SEs."""
    t = np.abs(np.asarray(gd, dtype=float) - gd_mean)
    out = []
    for q in q_list:
        q = check_int(q, "q", min_value=1)
        flag = q > t.size ** (1.0 / 3.0)
        if flag:
            warn_unreliable(f"q={q} exceeds reps^(1/3); the L_q estimate is heavy-tail sensitive")
        val = _lq(t, q) / sigma
        se = _bootstrap_se(t, lambda x, q=q: _lq(x, q), n_boot, rng) / sigma
        out.append(TNormEstimate(q, val, se, flag))
    return out


def estimate_t_norms(model, d, q_list, reps, rng, *, sigma=None, gd_mean=None, n_boot=200):
    """sigma^-1 ||E[GD | config] - E[GD]||_q for each q, from one replication set.

    ``E[GD]`` comes from a separate pass whose seed is drawn from ``rng``
    before the main stream, so reruns with the same stream agree.
    """
    reps = check_int(reps, "reps", min_value=1000)
    master = int(rng.integers(0, 2**63 - 1))
    if gd_mean is None:
        gd_mean = estimate_gd_mean(model, d, max(reps, 10_000), master)[0]
    if sigma is None:
        sigma = math.sqrt(model.variance(d))
    gd = _gd_stream(model, d, reps, master, "t-norm")
    return t_norms_from_stream(gd, gd_mean, sigma, q_list, rng, n_boot), gd


# ---------------------------------------------------------------- Upsilon

@dataclass(frozen=True)
class UpsilonEstimate:
    upsilon: float
    se: float
    bias_bound: float
    outer: int
    inner: int

    @property
    def certified(self):
        """Inner-sampling bias bound below 10% of the estimate."""
        return self.upsilon > 0 and self.bias_bound < 0.1 * self.upsilon


def s2_bias_bound(cells, inner):
    """Upper bound on E|S2(empirical) - S2(true)| for an inner sample of size ``inner``.

    Each second difference of the empirical pmf has variance at most
    ``(p_{k-1} + 4 p_k + p_{k+1}) / inner``; summing square roots over the
    ``cells`` positions and applying Cauchy–Schwarz gives ``sqrt(6 cells / inner)``.
    """
    return math.sqrt(6.0 * cells / inner)


def estimate_upsilon(model, d, outer, inner, rng):
    """E[|G D (D-1)| S2(L(W | F2))] with the conditional law estimated by redraws.

    Each outer draw freezes the randomness near the coupling move (see the
    models' ``upsilon_outer``) and redraws the rest ``inner`` times.
    """
    outer = check_int(outer, "outer", min_value=200)
    inner = check_int(inner, "inner", min_value=10_000)
    g = model.mean(d)
    law = model.law(d)
    master = int(rng.integers(0, 2**63 - 1))
    tag = tag_of("upsilon", model.name, model.n, d)
    vals = np.empty(outer)
    bias = np.empty(outer)
    for o in range(outer):
        dd, _, counts, _ = model.upsilon_outer(d, inner, block_seed(master, o, tag), law)
        weight = abs(g * dd * (dd - 1))
        if weight == 0.0:
            vals[o] = bias[o] = 0.0
            continue
        nz = np.flatnonzero(counts)
        if nz.size == 0:
            raise ResourceLimit("inner sample too small to populate the conditional pmf")
        pmf = Pmf.from_counts(int(nz[0]), counts[nz[0]:nz[-1] + 1])
        vals[o] = weight * smoothness(pmf, 2)
        bias[o] = weight * s2_bias_bound(len(pmf) + 2, inner)
    # jackknife SE of a mean reduces to the usual standard error
    jk = (vals.sum() - vals) / (outer - 1)
    se = math.sqrt((outer - 1) / outer * np.sum((jk - jk.mean()) ** 2))
    return UpsilonEstimate(float(vals.mean()), se, float(bias.mean()), outer, inner)


# ---------------------------------------------------------------- moment inequalities

@dataclass(frozen=True)
class YutingResult:
    lhs: float
    rhs: float
    holds: bool
    lhs_se: float
    rhs_se: float


def _norm_and_se(x, r):
    """||x||_r and its delta-method standard error."""
    a = np.abs(x) ** r
    m = a.mean()
    if m == 0:
        return 0.0, 0.0
    se_m = a.std(ddof=1) / math.sqrt(a.size)
    return m ** (1.0 / r), se_m * m ** (1.0 / r - 1.0) / r


def yuting_check(y, y_prime, g, mu, r):
    """``||Y - mu||_r <= sqrt(2 (r-1) ||G||_r ||Y' - Y||_r)`` on samples."""
    r = check_int(r, "r", min_value=2)
    y = np.asarray(y, dtype=float)
    y_prime = np.asarray(y_prime, dtype=float)
    g = np.broadcast_to(np.asarray(g, dtype=float), y.shape)
    m_prime = np.mean(np.abs(y_prime - mu) ** r)
    m_base = np.mean(np.abs(y - mu) ** r)
    if m_prime > m_base:
        err = PreconditionViolation(
            f"E|Y'-mu|^{r} = {m_prime:.6g} exceeds E|Y-mu|^{r} = {m_base:.6g} on the sample")
        err.moments = (m_prime, m_base)
        raise err
    lhs, lhs_se = _norm_and_se(y - mu, r)
    gn, gn_se = _norm_and_se(g, r)
    dn, dn_se = _norm_and_se(y_prime - y, r)
    prod = 2.0 * (r - 1) * gn * dn
    rhs = math.sqrt(prod)
    if rhs > 0:
        prod_se = 2.0 * (r - 1) * math.hypot(gn_se * dn, dn_se * gn)
        rhs_se = prod_se / (2.0 * rhs)
    else:
        rhs_se = 0.0
    holds = lhs <= rhs + 5.0 * math.hypot(lhs_se, rhs_se)
    return YutingResult(lhs, rhs, bool(holds), lhs_se, rhs_se)


def binmom_bound(x, l):
    """A(x, l) = pi e^(e-2) * (l / log(e-1) if l > x else x)."""
    x = check_real(x, "x", lower=0.0)
    l = check_int(l, "l", min_value=1)
    return _BINMOM_CONST * (l / math.log(E - 1.0) if l > x else x)


def branch_bound_check(counts, y_norm_bound, l, sum_samples):
    """``||sum_{i in E} Y_i||_l <= y ||E||_l`` within 5 joint standard errors."""
    l = check_int(l, "l", min_value=1)
    lhs, lhs_se = _norm_and_se(np.asarray(sum_samples, dtype=float), l)
    en, en_se = _norm_and_se(np.asarray(counts, dtype=float), l)
    rhs = y_norm_bound * en
    return bool(lhs <= rhs + 5.0 * math.hypot(lhs_se, y_norm_bound * en_se))


def chernoff_tail(mu, delta):
    """``exp(-delta mu / 3)``, valid for delta >= 1."""
    mu = check_real(mu, "mu", lower=0.0, lower_open=True)
    delta = check_real(delta, "delta")
    if delta < 1:
        raise InvalidArgument("the tail bound is stated for delta >= 1 only")
    return math.exp(-delta * mu / 3.0)


# ---------------------------------------------------------------- pipeline

def bound_report(model, d, *, reps, outer, inner, rng, sigma=None, sigma_se=0.0):
    """Estimate c1, c2 and evaluate both bounds; returns (BoundInputs, BoundResult)."""
    if sigma is None:
        sigma = math.sqrt(model.variance(d))
    q_hi = max(2, math.ceil(math.log(sigma)))
    norms, _ = estimate_t_norms(model, d, [2, q_hi], reps, rng, sigma=sigma)
    t2, tq = norms
    ups = estimate_upsilon(model, d, outer, inner, rng)
    c1 = max(ups.upsilon + 1.0, 0.0, t2.value)
    prov = {
        "sigma": Ingredient(sigma, sigma_se, "formula" if sigma_se == 0 else "estimated"),
        "upsilon": Ingredient(ups.upsilon, ups.se, "estimated",
                              f"inner bias bound {ups.bias_bound:.6g}"),
        "R_norm_2": Ingredient(0.0, 0.0, "hardwired", "exact Stein coupling, R = 0"),
        "T_norm_2": Ingredient(t2.value, t2.se, "estimated"),
        f"T_norm_{q_hi}": Ingredient(tq.value, tq.se, "estimated",
                                     "unreliable: q > reps^(1/3)" if tq.unreliable else ""),
        "c1": Ingredient(c1, 0.0, "formula", "max(upsilon+1, ||R||_2, ||T||_2/sigma)"),
        "c2": Ingredient(tq.value, tq.se, "formula", f"||T||_q/sigma at q={q_hi}"),
    }
    inputs = BoundInputs(mu=model.mean(d), sigma=sigma, c1=c1, c2=tq.value, provenance=prov)
    res = brr_bounds(inputs)
    prov["tv_bound"] = Ingredient(res.tv_bound, 0.0, "formula")
    prov["loc_bound"] = Ingredient(res.loc_bound if res.loc_bound is not None else float("nan"), 0.0,
                                   "formula", res.reason)
    return inputs, res


def write_bound_csv(provenance, path=None, header_lines=()):
    lines = [f"# {h}" for h in header_lines] + ["ingredient,estimate,SE,provenance"]
    for name, ing in provenance.items():
        prov = ing.provenance + (f" ({ing.note})" if ing.note else "")
        lines.append(f"{name},{ing.estimate:.17g},{ing.se:.17g},\"{prov}\"")
    text = "\n".join(lines) + "\n"
    if path is None:
        return text
    with open(path, "w", newline="\n") as fh:
        fh.write(text)
    return None
