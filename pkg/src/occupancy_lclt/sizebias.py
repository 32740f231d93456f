"""Bounded size-bias increments for log-concave occupancy laws.

Given the law of an occupancy count ``M`` and an excluded level ``d``, the
increment ``X`` in {-1, 0, 1} is built so that ``M + X`` has the law of ``M``
conditioned on ``M != d``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ._validation import check_int
from .distlib import Pmf, is_log_concave
from .errors import (DegenerateInput, InternalInvariantViolation,
                     InvalidArgument, PreconditionViolation)

MEMBERSHIP_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class IncrementLaw:
    """Increment probabilities indexed by the support of ``base``.

    ``pi[k]`` and ``gamma[k]`` belong to the support point ``base.offset + k``.
    """

    base: Pmf
    d: int
    q: float
    pi: np.ndarray = field(repr=False)
    gamma: np.ndarray = field(repr=False)

    def _index(self, m):
        k = int(m) - self.base.offset
        if k < 0 or k >= self.pi.size:
            raise InvalidArgument(f"m={m} lies outside the support of the base law")
        return k

    def pi_at(self, m):
        return float(self.pi[self._index(m)])

    def gamma_at(self, m):
        return float(self.gamma[self._index(m)])

    def up_prob(self, m):
        """P(X = +1 | M = m)."""
        return self.q * self.pi_at(m)

    def down_prob(self, m):
        """P(X = -1 | M = m)."""
        return (1.0 - self.q) * self.gamma_at(m)

    def dense_tables(self, size):
        """``(up, down)`` probabilities for ``m = 0..size-1`` (zero off the support)."""
        up = np.zeros(size)
        down = np.zeros(size)
        ks = self.base.support
        ok = (ks >= 0) & (ks < size)
        up[ks[ok]] = self.q * self.pi[ok]
        down[ks[ok]] = (1.0 - self.q) * self.gamma[ok]
        return up, down


def _checked_unit(values, name):
    bad = ~np.isfinite(values) | (values < -MEMBERSHIP_TOL) | (values > 1 + MEMBERSHIP_TOL)
    if np.any(bad):
        k = int(np.flatnonzero(bad)[0])
        raise InternalInvariantViolation(f"{name}[{k}] = {values[k]!r} is outside [0, 1]")
    return np.clip(values, 0.0, 1.0)


def build_increment_law(base, d):
    """Increment law of the ``d``-excluding size-bias step for ``base``."""
    d = check_int(d, "d", min_value=0)
    if not is_log_concave(base):
        raise PreconditionViolation("base law is not log-concave")
    p = base.weights
    ks = base.support
    p_d = base(d)
    p_not_d = 1.0 - p_d
    if p_not_d <= 0:
        raise DegenerateInput(f"P(M != {d}) = 0")
    # upper[k] = P(M >= ks[k] + 1), lower[k] = P(M <= ks[k] - 1)
    upper = np.concatenate([np.cumsum(p[::-1])[::-1][1:], [0.0]])
    lower = np.concatenate([[0.0], np.cumsum(p)[:-1]])
    above_d = float(np.sum(p[ks >= d + 1]))
    below_d = float(np.sum(p[ks <= d - 1]))

    pi = np.zeros(p.size)
    gamma = np.zeros(p.size)
    if above_d > 0:
        sel = ks >= d
        pi[sel] = (upper[sel] / p[sel]) * (p_d / above_d)
        q = above_d / p_not_d
    else:
        q = 0.0
    if below_d > 0:
        sel = ks <= d
        gamma[sel] = (lower[sel] / p[sel]) * (p_d / below_d)
    # the ratio is 1 by definition at x = d; pin it against rounding
    if base.offset <= d <= base.max_support:
        if above_d > 0:
            pi[d - base.offset] = 1.0
        if below_d > 0:
            gamma[d - base.offset] = 1.0
    pi = _checked_unit(pi, "pi")
    gamma = _checked_unit(gamma, "gamma")
    pi.setflags(write=False)
    gamma.setflags(write=False)
    return IncrementLaw(base=base, d=d, q=float(min(max(q, 0.0), 1.0)), pi=pi, gamma=gamma)


def sample_increment(law, m, rng):
    """Draw ``X = Z Z+ - (1 - Z) Z-`` at occupancy ``m``."""
    k = law._index(m)
    z, zp, zm = rng.random(3)
    if z < law.q:
        return 1 if zp < law.pi[k] else 0
    return -1 if zm < law.gamma[k] else 0


def sample_increments(law, m, rng):
    """Vectorised :func:`sample_increment` over an array of occupancies."""
    m = np.asarray(m, dtype=np.int64)
    k = m - law.base.offset
    if np.any((k < 0) | (k >= law.pi.size)):
        raise InvalidArgument("some occupancies lie outside the support of the base law")
    u = rng.random((3, m.size))
    up = (u[0] < law.q) & (u[1] < law.pi[k])
    down = (u[0] >= law.q) & (u[2] < law.gamma[k])
    return up.astype(np.int64) - down.astype(np.int64)


def coupled_law(law):
    """Exact law of ``M + X``."""
    p = law.base.weights
    stay = p * (1.0 - law.q * law.pi - (1.0 - law.q) * law.gamma)
    out = np.zeros(p.size + 2)
    out[1:-1] += stay
    out[2:] += p * law.q * law.pi
    out[:-2] += p * (1.0 - law.q) * law.gamma
    out = np.where(np.abs(out) < 1e-300, 0.0, out)
    if np.any(out < -MEMBERSHIP_TOL):
        raise InternalInvariantViolation("negative mass in the coupled law")
    return Pmf.from_weights(law.base.offset - 1, np.clip(out, 0.0, None))


def conditional_pmf(base, d):
    """Law of ``M`` given ``M != d``."""
    w = base.weights.copy()
    if base.offset <= d <= base.max_support:
        w[d - base.offset] = 0.0
    if not np.any(w > 0):
        raise DegenerateInput(f"P(M != {d}) = 0")
    return Pmf.from_weights(base.offset, w)


def size_bias_pmf(p):
    """``k p(k) / mean`` on the non-negative integers."""
    if p.offset < 0:
        raise InvalidArgument("size biasing needs a non-negative support")
    k = p.support.astype(np.float64)
    mass = k * p.weights
    mu = math.fsum(mass)
    if mu <= 0:
        raise DegenerateInput("the mean is zero")
    return Pmf.from_weights(p.offset, mass / mu)
