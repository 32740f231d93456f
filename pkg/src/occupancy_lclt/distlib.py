"""Integer-supported pmfs, the translated Poisson family, distances and smoothness.

A :class:`Pmf` is an offset plus a weight vector with both end weights
strictly positive.  Every function here is pure and every object immutable.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import special, stats
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from ._validation import check_int, check_integer_samples, check_real
from .errors import InvalidArgument, ResourceLimit

PMF_SUM_TOL = 1e-12
DEFAULT_SUPPORT_EPS = 1e-12
#: hard cap on the length of a truncated Poisson support vector
MAX_SUPPORT_LENGTH = 50_000_000


@dataclass(frozen=True, eq=False)
class Pmf:
    """Probability mass function on ``offset, offset+1, ...``.

    Use :meth:`from_weights` when the weights may carry zero end cells or
    need renormalising; the constructor itself only validates.
    """

    offset: int
    weights: np.ndarray = field(repr=False)

    def __post_init__(self):
        w = np.array(self.weights, dtype=np.float64, copy=True)
        if w.ndim != 1 or w.size == 0:
            raise InvalidArgument("weights must be a non-empty 1-d vector")
        if not np.all(np.isfinite(w)) or np.any(w < 0):
            raise InvalidArgument("weights must be finite and non-negative")
        total = math.fsum(w)
        if abs(total - 1.0) > PMF_SUM_TOL:
            raise InvalidArgument(f"weights sum to {total!r}, not 1")
        if w[0] <= 0 or w[-1] <= 0:
            raise InvalidArgument("end weights must be strictly positive")
        w.setflags(write=False)
        object.__setattr__(self, "offset", check_int(self.offset, "offset"))
        object.__setattr__(self, "weights", w)

    @classmethod
    def from_weights(cls, offset, weights, *, normalize=True):
        """Trim zero end cells (and optionally renormalise) before building."""
        w = np.asarray(weights, dtype=np.float64)
        nz = np.flatnonzero(w > 0)
        if nz.size == 0:
            raise InvalidArgument("all weights are zero")
        w = w[nz[0]:nz[-1] + 1]
        if normalize:
            w = w / math.fsum(w)
        return cls(int(offset) + int(nz[0]), w)

    @classmethod
    def point_mass(cls, k):
        return cls(int(k), np.ones(1))

    @classmethod
    def from_samples(cls, samples):
        """Empirical pmf of an integer sample."""
        x = check_integer_samples(samples)
        lo = int(x.min())
        counts = np.bincount(x - lo)
        return cls.from_weights(lo, counts / x.size)

    @classmethod
    def from_counts(cls, offset, counts):
        counts = np.asarray(counts, dtype=np.float64)
        return cls.from_weights(offset, counts / counts.sum())

    @property
    def support(self):
        return np.arange(self.offset, self.offset + self.weights.size)

    @property
    def max_support(self):
        return self.offset + self.weights.size - 1

    def __len__(self):
        return self.weights.size

    def __call__(self, k):
        """Probability of ``k`` (scalar or array), zero off the support."""
        k = np.asarray(k)
        idx = k - self.offset
        inside = (idx >= 0) & (idx < self.weights.size)
        out = np.where(inside, self.weights[np.clip(idx, 0, self.weights.size - 1)], 0.0)
        return float(out) if out.ndim == 0 else out

    def mean(self):
        return float(np.dot(self.support, self.weights))

    def var(self):
        c = self.support - self.mean()
        return float(np.dot(c * c, self.weights))

    def shift(self, k):
        return Pmf(self.offset + int(k), self.weights)

    def on_range(self, lo, hi):
        """Weights on the integer range ``lo..hi`` (inclusive), zero-padded."""
        out = np.zeros(hi - lo + 1)
        a, b = max(lo, self.offset), min(hi, self.max_support)
        if a <= b:
            out[a - lo:b - lo + 1] = self.weights[a - self.offset:b - self.offset + 1]
        return out

    def to_csv(self, path_or_buf=None):
        """Write ``k,probability`` lines with a header; reals at 17 significant digits."""
        lines = ["k,probability"]
        lines += [f"{k},{w:.17g}" for k, w in zip(self.support, self.weights)]
        text = "\n".join(lines) + "\n"
        if path_or_buf is None:
            return text
        if isinstance(path_or_buf, io.TextIOBase):
            path_or_buf.write(text)
        else:
            with open(path_or_buf, "w", newline="\n") as fh:
                fh.write(text)
        return None

    @classmethod
    def from_csv(cls, path_or_text):
        if isinstance(path_or_text, str) and "\n" in path_or_text:
            text = path_or_text
        else:
            with open(path_or_text) as fh:
                text = fh.read()
        rows = [ln for ln in text.splitlines() if ln and not ln.startswith("#")]
        if rows[0].replace(" ", "") != "k,probability":
            raise InvalidArgument("expected header 'k,probability'")
        ks, ws = [], []
        for ln in rows[1:]:
            k, w = ln.split(",")
            ks.append(int(k))
            ws.append(float(w))
        ks = np.asarray(ks)
        if np.any(np.diff(ks) != 1):
            raise InvalidArgument("k column must be consecutive integers")
        return cls(int(ks[0]), np.asarray(ws))

    def __eq__(self, other):
        if not isinstance(other, Pmf):
            return NotImplemented
        return self.offset == other.offset and np.array_equal(self.weights, other.weights)

    __hash__ = None


def _aligned(p, q):
    lo = min(p.offset, q.offset)
    hi = max(p.max_support, q.max_support)
    return p.on_range(lo, hi), q.on_range(lo, hi)


def tv_distance(p, q):
    """Total variation distance, half the l1 distance of the pmfs."""
    a, b = _aligned(p, q)
    return min(1.0, 0.5 * math.fsum(np.abs(a - b)))


def loc_distance(p, q):
    """Largest pointwise difference of the pmfs."""
    a, b = _aligned(p, q)
    return float(np.max(np.abs(a - b)))


def smoothness(p, l=1):
    """Absolute sum of the ``l``-th differences of the zero-extended pmf."""
    l = check_int(l, "l", min_value=1)
    w = np.pad(p.weights, l)
    return math.fsum(np.abs(np.diff(w, n=l)))


def shift(p, k):
    return p.shift(k)


@dataclass(frozen=True)
class TpParams:
    """Parameters of ``s + Po(lambda)`` with mean ``mu`` and variance in ``[sigma2, sigma2+1)``."""

    mu: float
    sigma2: float
    s: int
    gamma: float
    lam: float


def tp_params(mu, sigma2):
    mu = check_real(mu, "mu")
    sigma2 = check_real(sigma2, "sigma2", lower=0.0, lower_open=True)
    s = math.floor(mu - sigma2)
    gamma = (mu - sigma2) - s
    return TpParams(mu=mu, sigma2=sigma2, s=int(s), gamma=gamma, lam=sigma2 + gamma)


def poisson_pmf(lam, support_eps=DEFAULT_SUPPORT_EPS, shift_by=0):
    """Truncated, renormalised ``shift_by + Po(lam)``."""
    lam = check_real(lam, "lam", lower=0.0)
    if lam == 0.0:
        return Pmf.point_mass(shift_by)
    lo = int(stats.poisson.ppf(support_eps / 2, lam))
    hi = int(stats.poisson.isf(support_eps / 2, lam)) + 1
    if hi - lo + 1 > MAX_SUPPORT_LENGTH:
        raise ResourceLimit(f"Poisson support of length {hi - lo + 1} exceeds the cap")
    k = np.arange(max(lo, 0), hi + 1)
    logw = k * math.log(lam) - lam - special.gammaln(k + 1.0)
    return Pmf.from_weights(int(k[0]) + shift_by, np.exp(logw))


def tp_pmf(params, support_eps=DEFAULT_SUPPORT_EPS):
    """Translated Poisson pmf, truncated where the tail mass drops below ``support_eps``."""
    check_real(support_eps, "support_eps", lower=0.0, upper=1e-6, lower_open=True)
    return poisson_pmf(params.lam, support_eps, shift_by=params.s)


def binomial_pmf(n, p):
    """Exact Bi(n, p) pmf; weights come from log-space evaluation in scipy."""
    n = check_int(n, "n", min_value=0)
    p = check_real(p, "p", lower=0.0, upper=1.0)
    k = np.arange(n + 1)
    w = stats.binom.pmf(k, n, p)
    # subnormal tail weights carry no usable precision; drop them
    w[w < np.finfo(np.float64).tiny] = 0.0
    return Pmf.from_weights(0, w)


def tp_vs_normal_gap(params):
    """Largest integer-point gap between the translated Poisson pmf and the normal density."""
    if params.sigma2 < 1:
        raise InvalidArgument("sigma2 must be at least 1")
    tp = tp_pmf(params)
    sd = math.sqrt(params.sigma2)
    pad = int(12 * sd) + 10
    k = np.arange(tp.offset - pad, tp.max_support + pad + 1)
    dens = stats.norm.pdf(k, loc=params.mu, scale=sd)
    return float(np.max(np.abs(tp(k) - dens)))


def is_log_concave(p):
    """True iff the support is contiguous and ``p(s-1)p(s+1) <= p(s)^2`` throughout."""
    w = p.weights
    if np.any(w == 0):
        return False
    if w.size < 3:
        return True
    return bool(np.all(w[:-2] * w[2:] <= w[1:-1] ** 2 + 1e-15))


class TranslatedPoissonFit(BaseEstimator):
    """Fit a translated Poisson law to an integer sample and score the fit.

    Parameters
    ----------
    mu, sigma2 : float or None
        Fixed target moments; ``None`` means use the sample moment.
    support_eps : float
        Tail truncation for the fitted pmf.
    """

    def __init__(self, mu=None, sigma2=None, support_eps=DEFAULT_SUPPORT_EPS):
        self.mu = mu
        self.sigma2 = sigma2
        self.support_eps = support_eps

    def fit(self, X, y=None):
        x = check_integer_samples(np.ravel(X))
        self.empirical_pmf_ = Pmf.from_samples(x)
        self.mu_ = float(x.mean()) if self.mu is None else float(self.mu)
        self.sigma2_ = float(x.var()) if self.sigma2 is None else float(self.sigma2)
        self.params_ = tp_params(self.mu_, self.sigma2_)
        self.pmf_ = tp_pmf(self.params_, self.support_eps)
        return self

    def tv_distance(self):
        check_is_fitted(self, "pmf_")
        return tv_distance(self.empirical_pmf_, self.pmf_)

    def loc_distance(self):
        check_is_fitted(self, "pmf_")
        return loc_distance(self.empirical_pmf_, self.pmf_)

    def score(self, X, y=None):
        """Negative total variation distance between ``X``'s empirical law and the fit."""
        check_is_fitted(self, "pmf_")
        return -tv_distance(Pmf.from_samples(np.ravel(X)), self.pmf_)
