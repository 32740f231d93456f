"""Sparse Erdős–Rényi occupancy: W_d counts vertices whose degree is not d.

Graphs are drawn with geometric skipping over the vertex pairs, so a graph
with ``m`` edges costs ``O(n + m)``.  The single-graph API works on
:class:`ErSample`; the ``*_block`` kernels run whole batches of replications
inside compiled code, seeded once per block so results do not depend on how
blocks are scheduled.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property

import numba
import numpy as np
from scipy import special

from ._validation import check_int, check_real
from .distlib import binomial_pmf
from .errors import (DegenerateInput, InternalInvariantViolation,
                     InvalidArgument)
from .rng import kernel_seed
from .sizebias import build_increment_law, sample_increment

DENSE_ADJACENCY_MAX_N = 4096


# ---------------------------------------------------------------- kernels

@numba.njit(cache=True, nogil=True)
def _seed(seed):
    np.random.seed(seed)


@numba.njit(cache=True, nogil=True)
def _gnp_edges(n, p):
    total = n * (n - 1) // 2
    if p >= 1.0:
        eu = np.empty(total, np.int64)
        ev = np.empty(total, np.int64)
        m = 0
        for v in range(1, n):
            for w in range(v):
                eu[m] = w
                ev[m] = v
                m += 1
        return eu, ev
    if p <= 0.0 or total == 0:
        return np.empty(0, np.int64), np.empty(0, np.int64)
    mean = total * p
    cap = min(total, int(mean + 10.0 * math.sqrt(mean) + 64))
    eu = np.empty(cap, np.int64)
    ev = np.empty(cap, np.int64)
    lp = math.log1p(-p)
    m = 0
    v = 1
    w = -1
    while v < n:
        u = np.random.random()
        skip = math.floor(math.log1p(-u) / lp)
        w += 1 + int(min(skip, float(total)))
        while w >= v and v < n:
            w -= v
            v += 1
        if v < n:
            if m == cap:
                cap = min(total, 2 * cap)
                eu2 = np.empty(cap, np.int64)
                ev2 = np.empty(cap, np.int64)
                eu2[:m] = eu[:m]
                ev2[:m] = ev[:m]
                eu, ev = eu2, ev2
            eu[m] = w
            ev[m] = v
            m += 1
    return eu[:m], ev[:m]


@numba.njit(cache=True, nogil=True)
def _csr(n, eu, ev):
    deg = np.zeros(n, np.int64)
    for e in range(eu.size):
        deg[eu[e]] += 1
        deg[ev[e]] += 1
    indptr = np.zeros(n + 1, np.int64)
    for i in range(n):
        indptr[i + 1] = indptr[i] + deg[i]
    fill = indptr[:-1].copy()
    indices = np.empty(indptr[n], np.int64)
    for e in range(eu.size):
        a = eu[e]
        b = ev[e]
        indices[fill[a]] = b
        fill[a] += 1
        indices[fill[b]] = a
        fill[b] += 1
    return indptr, indices, deg


@numba.njit(cache=True, nogil=True)
def _w_count(deg, d):
    c = 0
    for i in range(deg.size):
        if deg[i] != d:
            c += 1
    return c


@numba.njit(cache=True, nogil=True)
def _gd_terms(n, d, indptr, indices, deg, pi_tab, gam_tab, q):
    """Per-graph sum inside the conditional E[GD | G] display and T1'..T6'.

    Returns ``[total, T1, T2, T3, T4, T5, T6, U]``; the conditional mean is
    ``(1 - b_d) * total``.
    """
    w_dm1 = _w_count(deg, d - 1)
    w_d = _w_count(deg, d)
    total = 0.0
    u_sum = 0.0
    t3 = 0.0
    t4 = 0.0
    t5 = 0.0
    for i in range(n):
        m = deg[i]
        h_dm1 = 0
        h_d = 0
        h_dp1 = 0
        for k in range(indptr[i], indptr[i + 1]):
            mj = deg[indices[k]]
            if mj == d - 1:
                h_dm1 += 1
            elif mj == d:
                h_d += 1
            elif mj == d + 1:
                h_dp1 += 1
        is_dm1 = 1.0 if m == d - 1 else 0.0
        is_d = 1.0 if m == d else 0.0
        term = is_d
        g = gam_tab[m]
        if g > 0.0 and m > 0:
            term += (1.0 - q) * g / m * (h_d - h_dp1)
            t5 += (1.0 - q) * g / m * (h_dp1 - h_d)
        pp = pi_tab[m]
        free = n - m - 1
        if pp > 0.0 and free > 0:
            local = h_dm1 - h_d + is_dm1 - is_d
            bracket = (w_dm1 - w_d) + local
            term += q * pp / free * bracket
            if 2 * m < n:
                u_sum += n * pp / free
                t3 += q * pp / free * local
            else:
                t4 += q * pp / free * bracket
        total += term
    out = np.empty(8)
    out[0] = total
    out[1] = q / n * u_sum * w_dm1
    out[2] = q / n * u_sum * w_d
    out[3] = t3
    out[4] = t4
    out[5] = t5
    out[6] = w_d
    out[7] = u_sum
    return out


@numba.njit(cache=True, nogil=True)
def _is_neighbor(indptr, indices, i, j):
    for k in range(indptr[i], indptr[i + 1]):
        if indices[k] == j:
            return True
    return False


@numba.njit(cache=True, nogil=True)
def _coupling_move(n, d, indptr, indices, deg, up_tab, down_tab):
    """One size-bias step on a CSR graph; returns (I, X, J, D) or J=-1 on X=0.

    D = -99 flags an impossible branch (empty candidate set).
    """
    i = np.random.randint(0, n)
    m = deg[i]
    u = np.random.random()
    if u < up_tab[m]:
        x = 1
    elif u < up_tab[m] + down_tab[m]:
        x = -1
    else:
        return i, 0, -1, 0
    if x == 1:
        if m >= n - 1:
            return i, x, -1, -99
        while True:
            j = np.random.randint(0, n)
            if j != i and not _is_neighbor(indptr, indices, i, j):
                break
    else:
        if m == 0:
            return i, x, -1, -99
        j = indices[indptr[i] + np.random.randint(0, m)]
    dd = 0
    for v in (i, j):
        old = deg[v]
        new = old + x
        dd += (1 if new != d else 0) - (1 if old != d else 0)
    return i, x, j, dd


@numba.njit(cache=True, nogil=True)
def _w_block(n, p, ds, reps, seed):
    """W_d for every d in ``ds`` over ``reps`` fresh graphs."""
    np.random.seed(seed)
    out = np.empty((reps, ds.size), np.int64)
    hist = np.zeros(n + 1, np.int64)
    deg = np.zeros(n, np.int64)
    for r in range(reps):
        eu, ev = _gnp_edges(n, p)
        deg[:] = 0
        for e in range(eu.size):
            deg[eu[e]] += 1
            deg[ev[e]] += 1
        hist[:] = 0
        for i in range(n):
            hist[deg[i]] += 1
        for t in range(ds.size):
            dd = ds[t]
            out[r, t] = n - (hist[dd] if 0 <= dd < n else 0)
    return out


@numba.njit(cache=True, nogil=True)
def _coupling_block(n, p, d, up_tab, down_tab, pi_tab, gam_tab, q, reps, seed):
    """Fresh graph + one coupling step per replication.

    Columns of the integer output: W, W^s, X, I, J.  The float output holds
    the ``_gd_terms`` vector of the pre-step graph.
    """
    np.random.seed(seed)
    ints = np.empty((reps, 5), np.int64)
    flts = np.empty((reps, 8))
    for r in range(reps):
        eu, ev = _gnp_edges(n, p)
        indptr, indices, deg = _csr(n, eu, ev)
        w = _w_count(deg, d)
        i, x, j, dd = _coupling_move(n, d, indptr, indices, deg, up_tab, down_tab)
        ints[r, 0] = w
        ints[r, 1] = w + dd
        ints[r, 2] = x
        ints[r, 3] = i
        ints[r, 4] = j
        flts[r, :] = _gd_terms(n, d, indptr, indices, deg, pi_tab, gam_tab, q)
    return ints, flts


@numba.njit(cache=True, nogil=True)
def _upsilon_outer(n, p, d, up_tab, down_tab, inner, seed):
    """One outer draw of the conditional-smoothness estimator.

    The graph and coupling step are drawn; the edges touching
    A = {I} + N(I) + {J} are frozen and the edges among the remaining vertices
    are redrawn ``inner`` times.  Returns (D, W, counts of W over 0..n, ok).
    """
    np.random.seed(seed)
    counts = np.zeros(n + 1, np.int64)
    while True:
        eu, ev = _gnp_edges(n, p)
        indptr, indices, deg = _csr(n, eu, ev)
        i, x, j, dd = _coupling_move(n, d, indptr, indices, deg, up_tab, down_tab)
        if dd != -99:
            break
    w = _w_count(deg, d)
    frozen = np.zeros(n, np.bool_)
    frozen[i] = True
    for k in range(indptr[i], indptr[i + 1]):
        frozen[indices[k]] = True
    if j >= 0:
        frozen[j] = True
    free = np.empty(n, np.int64)
    nf = 0
    for v in range(n):
        if not frozen[v]:
            free[nf] = v
            nf += 1
    # degree contributions from edges that touch the frozen set
    base = np.zeros(n, np.int64)
    for e in range(eu.size):
        a = eu[e]
        b = ev[e]
        if frozen[a] or frozen[b]:
            base[a] += 1
            base[b] += 1
    deg2 = np.empty(n, np.int64)
    for t in range(inner):
        deg2[:] = base
        su, sv = _gnp_edges(nf, p)
        for e in range(su.size):
            deg2[free[su[e]]] += 1
            deg2[free[sv[e]]] += 1
        counts[_w_count(deg2, d)] += 1
    return dd, w, counts


# ---------------------------------------------------------------- types

@dataclass(frozen=True, eq=False)
class ErSample:
    """One Erdős–Rényi graph on vertices ``0..n-1``.

    ``edges`` is an ``(m, 2)`` array of pairs ``(i, j)`` with ``i < j``.
    """

    n: int
    lam: float
    edges: np.ndarray = field(repr=False)
    degrees: np.ndarray = field(repr=False)

    def __post_init__(self):
        e = np.asarray(self.edges, dtype=np.int64).reshape(-1, 2)
        e = np.sort(e, axis=1)
        if e.size and (np.any(e[:, 0] == e[:, 1]) or e.min() < 0 or e.max() >= self.n):
            raise InvalidArgument("edges must join distinct vertices in range")
        key = e[:, 0] * self.n + e[:, 1]
        order = np.argsort(key, kind="stable")
        e = e[order]
        if np.any(np.diff(key[order]) == 0):
            raise InvalidArgument("duplicate edge")
        deg = np.bincount(e.ravel(), minlength=self.n).astype(np.int64)
        if self.degrees is not None and not np.array_equal(np.asarray(self.degrees), deg):
            raise InvalidArgument("degrees disagree with the edge list")
        e.setflags(write=False)
        deg.setflags(write=False)
        object.__setattr__(self, "edges", e)
        object.__setattr__(self, "degrees", deg)

    @classmethod
    def from_edges(cls, n, edges, lam=1.0):
        return cls(n=int(n), lam=float(lam), edges=np.asarray(edges, dtype=np.int64).reshape(-1, 2),
                   degrees=None)

    @classmethod
    def empty(cls, n, lam=1.0):
        return cls.from_edges(n, np.empty((0, 2), np.int64), lam)

    @classmethod
    def complete(cls, n, lam=None):
        iu = np.triu_indices(n, 1)
        return cls.from_edges(n, np.column_stack(iu), float(n) if lam is None else lam)

    @property
    def p(self):
        return self.lam / self.n

    @property
    def n_edges(self):
        return self.edges.shape[0]

    @cached_property
    def csr(self):
        return _csr(self.n, self.edges[:, 0].copy(), self.edges[:, 1].copy())[:2]

    @cached_property
    def adjacency(self):
        """Dense boolean adjacency (only for moderate ``n``)."""
        if self.n > DENSE_ADJACENCY_MAX_N:
            raise InvalidArgument("dense adjacency is only built for n <= 4096")
        a = np.zeros((self.n, self.n), dtype=bool)
        a[self.edges[:, 0], self.edges[:, 1]] = True
        a[self.edges[:, 1], self.edges[:, 0]] = True
        return a

    def neighbors(self, i):
        indptr, indices = self.csr
        return np.sort(indices[indptr[i]:indptr[i + 1]])

    def has_edge(self, i, j):
        indptr, indices = self.csr
        return bool(_is_neighbor(indptr, indices, int(i), int(j)))

    def toggled(self, i, j):
        """Copy with the edge ``{i, j}`` flipped."""
        i, j = min(i, j), max(i, j)
        if self.has_edge(i, j):
            keep = ~((self.edges[:, 0] == i) & (self.edges[:, 1] == j))
            e = self.edges[keep]
        else:
            e = np.vstack([self.edges, [[i, j]]])
        return ErSample.from_edges(self.n, e, self.lam)

    def to_text(self):
        lines = [f"n={self.n}"] + [f"{a} {b}" for a, b in self.edges]
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text, lam=1.0):
        rows = [ln.strip() for ln in text.splitlines() if ln.strip()]
        if not rows[0].startswith("n="):
            raise InvalidArgument("graph dump must start with 'n=<n>'")
        n = int(rows[0][2:])
        edges = [tuple(int(t) for t in ln.split()) for ln in rows[1:]]
        return cls.from_edges(n, np.asarray(edges, dtype=np.int64).reshape(-1, 2), lam)


@dataclass(frozen=True)
class CouplingRecord:
    """One realised size-bias step."""

    i_chosen: int
    x: int
    j_moved: int | None
    w: int
    w_s: int
    d_incr: int
    g: float

    def __post_init__(self):
        if self.d_incr != self.w_s - self.w:
            raise InternalInvariantViolation("D must equal W^s - W")
        if self.x == 0 and self.w_s != self.w:
            raise InternalInvariantViolation("X = 0 must leave W unchanged")


# ---------------------------------------------------------------- functions

def _check_n_lam(n, lam):
    n = check_int(n, "n", min_value=2)
    lam = check_real(lam, "lam", lower=0.0, lower_open=True)
    if lam > n:
        raise InvalidArgument(f"lambda={lam} exceeds n={n}, so lambda/n is not a probability")
    return n, lam


def sample_graph(n, lam, rng):
    """G(n, lam/n) drawn from ``rng``."""
    n, lam = _check_n_lam(n, lam)
    _seed(kernel_seed(rng))
    eu, ev = _gnp_edges(n, lam / n)
    return ErSample(n=n, lam=lam, edges=np.column_stack([eu, ev]), degrees=None)


def w_d(sample, d):
    d = check_int(d, "d", min_value=0)
    return int(np.count_nonzero(sample.degrees != d))


def occupancy_probability(n, lam, d):
    """b_d = P(Bi(n-1, lam/n) = d), evaluated in log space."""
    n, lam = _check_n_lam(n, lam)
    d = check_int(d, "d", min_value=0)
    if d > n - 1:
        return 0.0
    p = lam / n
    if p == 1.0:
        return 1.0 if d == n - 1 else 0.0
    logb = (special.gammaln(n) - special.gammaln(d + 1) - special.gammaln(n - d)
            + d * math.log(p) + (n - 1 - d) * math.log1p(-p))
    return math.exp(logb)


def er_mean(n, lam, d):
    return n * (1.0 - occupancy_probability(n, lam, d))


def er_moments(n, lam, d):
    """Closed-form mean and variance of W_d."""
    n, lam = _check_n_lam(n, lam)
    d = check_int(d, "d", min_value=0)
    b = occupancy_probability(n, lam, d)
    mu = n * (1.0 - b)
    p = lam / n
    if p >= 1.0:
        err = DegenerateInput("p = 1: the variance formula divides by p(1-p)")
        err.mu_d = mu
        raise err
    sigma2 = n * b * b * ((d - (n - 1) * p) ** 2 / ((n - 1) * p * (1 - p)) - 1.0) + n * b
    return mu, sigma2


def degree_law(n, lam, d):
    """Increment law built from Bi(n-1, lam/n)."""
    n, lam = _check_n_lam(n, lam)
    return build_increment_law(binomial_pmf(n - 1, lam / n), d)


def law_tables(law, n):
    """Dense per-degree tables ``(up, down, pi, gamma)`` over ``0..n-1``."""
    up, down = law.dense_tables(n)
    pi = np.zeros(n)
    gam = np.zeros(n)
    ks = law.base.support
    ok = (ks >= 0) & (ks < n)
    pi[ks[ok]] = law.pi[ok]
    gam[ks[ok]] = law.gamma[ok]
    return up, down, pi, gam


def size_bias_step(sample, d, law, rng):
    """Choose I, draw X at M_I, and add or remove one edge at I."""
    d = check_int(d, "d", min_value=0)
    n = sample.n
    i = int(rng.integers(n))
    m = int(sample.degrees[i])
    x = sample_increment(law, m, rng)
    w = w_d(sample, d)
    g = er_mean(n, sample.lam, d)
    if x == 0:
        return CouplingRecord(i, 0, None, w, w, 0, g)
    if x == 1:
        if m >= n - 1:
            raise InternalInvariantViolation("X=+1 drawn at a vertex of full degree")
        nb = sample.neighbors(i)
        cand = np.setdiff1d(np.arange(n), np.append(nb, i), assume_unique=False)
    else:
        if m == 0:
            raise InternalInvariantViolation("X=-1 drawn at an isolated vertex")
        cand = sample.neighbors(i)
    j = int(cand[rng.integers(cand.size)])
    dd = 0
    for v in (i, j):
        old = int(sample.degrees[v])
        dd += int(old + x != d) - int(old != d)
    return CouplingRecord(i, x, j, w, w + dd, dd, g)


def apply_step(sample, record):
    """Graph after the move recorded in ``record``."""
    if record.x == 0:
        return sample
    return sample.toggled(record.i_chosen, record.j_moved)


def _gd_vector(sample, d, law):
    n = sample.n
    _, _, pi, gam = law_tables(law, n)
    indptr, indices = sample.csr
    return _gd_terms(n, d, indptr, indices, sample.degrees.astype(np.int64), pi, gam, law.q)


def conditional_gd(sample, d, law=None):
    """E[G D | graph] in closed form.

    ``law`` defaults to the increment law of Bi(n-1, lam/n); it is not needed
    when every vertex surely has degree ``d`` (the factor 1 - b_d vanishes).
    """
    d = check_int(d, "d", min_value=0)
    one_minus_b = 1.0 - occupancy_probability(sample.n, sample.lam, d)
    if one_minus_b == 0.0:
        return 0.0
    if law is None:
        law = degree_law(sample.n, sample.lam, d)
    return one_minus_b * float(_gd_vector(sample, d, law)[0])


def t_statistics(sample, d, law=None):
    """T1'..T6' for one graph."""
    d = check_int(d, "d", min_value=0)
    if law is None:
        law = degree_law(sample.n, sample.lam, d)
    return np.asarray(_gd_vector(sample, d, law)[1:7])


def u_statistic(sample, d, law=None):
    if law is None:
        law = degree_law(sample.n, sample.lam, d)
    return float(_gd_vector(sample, d, law)[7])


class ErdosRenyiModel:
    """G(n, lam/n) occupancy model, the generator object consumed by the estimators."""

    name = "ER"

    def __init__(self, n, lam):
        self.n, self.lam = _check_n_lam(n, lam)

    def get_params(self, deep=True):
        return {"n": self.n, "lam": self.lam}

    def __repr__(self):
        return f"ErdosRenyiModel(n={self.n}, lam={self.lam})"

    @property
    def p(self):
        return self.lam / self.n

    def mean(self, d):
        return er_mean(self.n, self.lam, d)

    def variance(self, d):
        return er_moments(self.n, self.lam, d)[1]

    def law(self, d):
        return degree_law(self.n, self.lam, d)

    def sample(self, rng):
        return sample_graph(self.n, self.lam, rng)

    def w_samples(self, ds, reps, seed):
        """``(reps, len(ds))`` matrix of W_d values from one seeded block."""
        return _w_block(self.n, self.p, np.asarray(ds, dtype=np.int64), int(reps), int(seed))

    def coupling_block(self, d, reps, seed, law=None):
        """Fresh graph + coupling step per replication.

        Returns ``(ints, gd)`` where ``ints`` has columns W, W^s, X, I, J and
        ``gd`` holds the conditional E[GD | graph] per replication.
        """
        law = self.law(d) if law is None else law
        up, down, pi, gam = law_tables(law, self.n)
        ints, flts = _coupling_block(self.n, self.p, d, up, down, pi, gam, law.q, int(reps), int(seed))
        if np.any(np.abs(ints[:, 1] - ints[:, 0]) > 2):
            raise InternalInvariantViolation("|D| > 2 in an ER coupling step")
        one_minus_b = 1.0 - occupancy_probability(self.n, self.lam, d)
        return ints, one_minus_b * flts[:, 0], flts

    def conditional_gd_samples(self, d, reps, seed):
        _, gd, _ = self.coupling_block(d, reps, seed)
        return gd

    def upsilon_outer(self, d, inner, seed, law=None):
        law = self.law(d) if law is None else law
        up, down, _, _ = law_tables(law, self.n)
        dd, w, counts = _upsilon_outer(self.n, self.p, d, up, down, int(inner), int(seed))
        return int(dd), int(w), counts, 0
