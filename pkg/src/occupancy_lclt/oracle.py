"""Exact laws at tiny scale, by exhaustive enumeration.

All 2^C(n,2) graphs are visited in Gray-code order, so consecutive graphs
differ by one edge and the degree vector updates in O(1).  Integer tallies
indexed by (edge count, W_d) are accumulated per chunk and summed; weights
``p^k (1-p)^(m-k)`` are applied only at the end, so the result does not
depend on how the enumeration is split.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from itertools import combinations

import numba
import numpy as np
from scipy import stats

from ._validation import check_int, check_integer_samples, check_real
from .distlib import Pmf
from .errors import DegenerateInput, InvalidArgument, ResourceLimit
from .sizebias import size_bias_pmf

MAX_ENUM_N = 7
MAX_COUPLING_N = 5


@dataclass(frozen=True)
class ExactLaw:
    pmf: Pmf
    mean: float
    variance: float
    source: tuple

    def __post_init__(self):
        if abs(self.pmf.mean() - self.mean) > 1e-12 * max(1.0, abs(self.mean)):
            raise InvalidArgument("stored mean disagrees with the pmf")
        if abs(self.pmf.var() - self.variance) > 1e-12 * max(1.0, self.variance):
            raise InvalidArgument("stored variance disagrees with the pmf")


@numba.njit(cache=True, nogil=True)
def _gray_chunk(n, ea, eb, d, low_bits, high_state):
    """Tally (edge count, W_d) over all graphs whose high edge bits equal ``high_state``."""
    m = ea.size
    tally = np.zeros((m + 1, n + 1), np.int64)
    deg = np.zeros(n, np.int64)
    k = 0
    for t in range(low_bits, m):
        if (high_state >> (t - low_bits)) & 1:
            deg[ea[t]] += 1
            deg[eb[t]] += 1
            k += 1
    present = np.zeros(m, np.bool_)
    w = 0
    for v in range(n):
        if deg[v] != d:
            w += 1
    tally[k, w] += 1
    for g in range(1, 1 << low_bits):
        # bit to flip: index of the lowest set bit of g
        t = 0
        while not (g >> t) & 1:
            t += 1
        a = ea[t]
        b = eb[t]
        step = -1 if present[t] else 1
        present[t] = not present[t]
        k += step
        for v in (a, b):
            before = deg[v] != d
            deg[v] += step
            after = deg[v] != d
            w += int(after) - int(before)
        tally[k, w] += 1
    return tally


def _edge_list(n):
    pairs = np.array(list(combinations(range(n), 2)), dtype=np.int64).reshape(-1, 2)
    return pairs[:, 0].copy(), pairs[:, 1].copy()


def enumeration_tally(n, d, high_bits=None, threads=1):
    """Integer tally ``T[k, w]`` = number of graphs with k edges and W_d = w."""
    ea, eb = _edge_list(n)
    m = ea.size
    if high_bits is None:
        high_bits = min(m, 4)
    high_bits = min(high_bits, m)
    low = m - high_bits
    chunks = range(1 << high_bits)
    run = lambda h: _gray_chunk(n, ea, eb, d, low, h)  # noqa: E731
    if threads > 1:
        with ThreadPoolExecutor(threads) as ex:
            parts = list(ex.map(run, chunks))
    else:
        parts = [run(h) for h in chunks]
    return np.sum(parts, axis=0)


def _weighted(tally, p):
    m = tally.shape[0] - 1
    k = np.arange(m + 1)
    if p == 1.0:
        wk = (k == m).astype(float)
    elif p == 0.0:
        wk = (k == 0).astype(float)
    else:
        wk = np.exp(k * math.log(p) + (m - k) * math.log1p(-p))
    return tally.T.astype(np.float64) @ wk


def er_exact_pmf(n, lam, d, *, high_bits=None, threads=1):
    """Exact law of W_d for G(n, lam/n) with ``n <= 7``."""
    n = check_int(n, "n", min_value=2)
    if n > MAX_ENUM_N:
        raise ResourceLimit(f"exhaustive enumeration is capped at n={MAX_ENUM_N}")
    lam = check_real(lam, "lam", lower=0.0, upper=float(n), lower_open=True)
    d = check_int(d, "d", min_value=0)
    probs = _weighted(enumeration_tally(n, d, high_bits, threads), lam / n)
    pmf = Pmf.from_weights(0, probs)
    return ExactLaw(pmf=pmf, mean=pmf.mean(), variance=pmf.var(), source=(n, lam, d, "ER"))


def er_exact_size_bias_pmf(n, lam, d):
    n = check_int(n, "n", min_value=2)
    if n > MAX_COUPLING_N:
        raise ResourceLimit(f"the size-bias oracle is capped at n={MAX_COUPLING_N}")
    law = er_exact_pmf(n, lam, d)
    if law.mean <= 0:
        raise DegenerateInput("mu_d = 0")
    return size_bias_pmf(law.pmf)


def _all_graphs(n):
    ea, eb = _edge_list(n)
    m = ea.size
    for mask in range(1 << m):
        bits = (mask >> np.arange(m)) & 1
        yield ea[bits == 1], eb[bits == 1], int(bits.sum())


def er_step_law(sample, d, law):
    """Exact law of D = W^s - W for one size-bias step from a fixed graph.

    Sums over the uniform index I, the increment X and the uniform partner J;
    returns a dict mapping each attainable D to its probability.
    """
    n = sample.n
    deg = sample.degrees
    adj = sample.adjacency
    out = {}
    for i in range(n):
        if deg[i] <= law.base.max_support:
            up = law.q * law.pi_at(deg[i])
            down = (1 - law.q) * law.gamma_at(deg[i])
        else:
            up = down = 0.0
        out[0] = out.get(0, 0.0) + (1.0 - up - down) / n
        for x, px, cand in ((1, up, np.flatnonzero(~adj[i] & (np.arange(n) != i))),
                            (-1, down, np.flatnonzero(adj[i]))):
            if px == 0.0:
                continue
            for j in cand:
                dd = sum(int(deg[v] + x != d) - int(deg[v] != d) for v in (i, j))
                out[dd] = out.get(dd, 0.0) + px / (n * cand.size)
    return out


def er_exact_coupling(n, lam, d, law):
    """Integrate the ER size-bias step over all graphs and all coupling randomness.

    Returns ``(pmf of W^s, E[G D], E[conditional_gd])`` computed exactly, where
    the last entry averages the closed form from :mod:`er_model` over the
    exact graph law.
    """
    from .er_model import ErSample, conditional_gd, er_mean

    n = check_int(n, "n", min_value=2)
    if n > MAX_COUPLING_N:
        raise ResourceLimit(f"the coupling oracle is capped at n={MAX_COUPLING_N}")
    p = lam / n
    m_all = n * (n - 1) // 2
    ws = np.zeros(n + 3)
    e_d = 0.0
    e_cgd = 0.0
    g = er_mean(n, lam, d)
    for ea, eb, k in _all_graphs(n):
        weight = p ** k * (1 - p) ** (m_all - k)
        if weight == 0.0:
            continue
        sample = ErSample.from_edges(n, np.column_stack([ea, eb]), lam)
        w = int(np.count_nonzero(sample.degrees != d))
        for dd, pr in er_step_law(sample, d, law).items():
            ws[w + dd] += weight * pr
            e_d += weight * pr * dd
        e_cgd += weight * conditional_gd(sample, d, law)
    return Pmf.from_weights(0, ws), g * e_d, e_cgd


def _pool_cells(expected, min_expected=5.0):
    """Greedy ascending pooling; returns a list of (start, stop) index ranges."""
    cells = []
    start = 0
    acc = 0.0
    for k, e in enumerate(expected):
        acc += e
        if acc >= min_expected:
            cells.append([start, k + 1])
            start = k + 1
            acc = 0.0
    if start < len(expected):
        if cells:
            cells[-1][1] = len(expected)
        else:
            cells.append([start, len(expected)])
    return cells


def chi_square_gof(samples, target, min_expected=5.0):
    """Pearson goodness-of-fit of an integer sample to ``target``.

    Cells are pooled in ascending order until each expects at least
    ``min_expected`` draws; the outermost cells absorb the two tails.
    """
    x = check_integer_samples(samples)
    n_obs = x.size
    expected = target.weights * n_obs
    cells = _pool_cells(expected, min_expected)
    if len(cells) < 2:
        raise DegenerateInput("all expected mass falls in a single pooled cell")
    idx = np.clip(x - target.offset, -1, len(target))
    obs_k = np.bincount(idx + 1, minlength=len(target) + 2)
    observed = []
    exp_c = []
    for c, (a, b) in enumerate(cells):
        lo = 0 if c == 0 else a + 1
        hi = len(target) + 2 if c == len(cells) - 1 else b + 1
        observed.append(obs_k[lo:hi].sum())
        exp_c.append(expected[a:b].sum())
    observed = np.asarray(observed, dtype=float)
    exp_c = np.asarray(exp_c)
    stat = float(np.sum((observed - exp_c) ** 2 / exp_c))
    return stat, float(stats.chi2.sf(stat, len(cells) - 1))
