"""Germ–grain occupancy on the flat torus ``[0, side)^2`` with ``side = sqrt(n)``.

Germ ``i`` sits at ``V_i``; its grain is the closed ball of radius ``r``.
``M_i`` counts the other germs inside that ball and ``W_d`` counts germs
with ``M_i != d``.

Neighbour queries go through a uniform cell list whose cell width is at
least ``r``, so a query visits at most nine cells.  Area integrals over balls
and over the torus use randomly shifted rank-1 lattices (several independent
shifts per region give the standard error); the shift table is keyed by the
configuration seed and the region id.
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
from .er_model import CouplingRecord, law_tables
from .errors import (InternalInvariantViolation, InvalidArgument,
                     ResourceLimit)
from .rng import derive_stream, kernel_seed, tag_of
from .sizebias import build_increment_law

REJECTION_CAP = 10_000
DEFAULT_BALL_POINTS = 4096
DEFAULT_TORUS_POINTS = 16384
DEFAULT_REPLICATES = 8
_SHIFT_TAG = tag_of("gg-quadrature-shifts")
_TORUS_TAG = tag_of("gg-torus-shifts")
_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0

# status codes returned by the move kernel
_OK, _IMPOSSIBLE, _CAPPED = 0, 1, 2


def kappa(s):
    """Crude packing bound for unit balls in a radius-``s`` ball."""
    return s * s


def uniform_bounds(d):
    """Uniform bounds on |S_j|, |H_i|, |Q_ij|, |E_ij| and |sum_{j in I_i} S_j|."""
    return {
        "s": kappa(3) * (d + 2),
        "h": kappa(3) * (d + 1),
        "q": 2 * kappa(3) * (d + 2),
        "e": 2 * kappa(3) * (d + 2),
        "s_sum": kappa(5) * (d + 2) ** 2,
    }


def structural_d_bound(d):
    """Bound on |W^s - W| for one germ move."""
    return kappa(3) * (d + 2) + kappa(3) * (d + 1) + 2


# ---------------------------------------------------------------- kernels

@numba.njit(cache=True, nogil=True)
def _torus_d2(x0, y0, x1, y1, side):
    dx = abs(x0 - x1)
    if dx > 0.5 * side:
        dx = side - dx
    dy = abs(y0 - y1)
    if dy > 0.5 * side:
        dy = side - dy
    return dx * dx + dy * dy


@numba.njit(cache=True, nogil=True)
def _n_cells(n, side, r):
    # cells at least r wide; capped so tiny radii do not blow up the grid
    cap = 2 * int(math.sqrt(max(n, 1))) + 2
    return max(1, min(int(math.floor(side / r)), cap))


@numba.njit(cache=True, nogil=True)
def _cell_of(x, width, ncell):
    c = int(x / width)
    if c >= ncell:
        c = ncell - 1
    if c < 0:
        c = 0
    return c


@numba.njit(cache=True, nogil=True)
def _build_cells(pts, side, ncell):
    n = pts.shape[0]
    width = side / ncell
    cid = np.empty(n, np.int64)
    start = np.zeros(ncell * ncell + 1, np.int64)
    for i in range(n):
        c = _cell_of(pts[i, 0], width, ncell) * ncell + _cell_of(pts[i, 1], width, ncell)
        cid[i] = c
        start[c + 1] += 1
    for c in range(ncell * ncell):
        start[c + 1] += start[c]
    fill = start[:-1].copy()
    items = np.empty(n, np.int64)
    for i in range(n):
        items[fill[cid[i]]] = i
        fill[cid[i]] += 1
    return start, items


@numba.njit(cache=True, nogil=True)
def _query(x, y, pts, side, ncell, start, items, r2, skip, buf):
    """Indices (into ``buf``) of germs within distance sqrt(r2) of (x, y)."""
    width = side / ncell
    cx = _cell_of(x, width, ncell)
    cy = _cell_of(y, width, ncell)
    if ncell >= 3:
        lo, hi = -1, 2
    else:
        lo, hi = 0, ncell
    cnt = 0
    for a in range(lo, hi):
        ix = (cx + a) % ncell if ncell >= 3 else a
        for b in range(lo, hi):
            iy = (cy + b) % ncell if ncell >= 3 else b
            c = ix * ncell + iy
            for k in range(start[c], start[c + 1]):
                j = items[k]
                if j == skip:
                    continue
                if _torus_d2(x, y, pts[j, 0], pts[j, 1], side) <= r2:
                    buf[cnt] = j
                    cnt += 1
    return cnt


@numba.njit(cache=True, nogil=True)
def _neighbor_csr(pts, side, ncell, start, items, r2):
    n = pts.shape[0]
    buf = np.empty(n, np.int64)
    counts = np.zeros(n, np.int64)
    chunks = []
    for i in range(n):
        c = _query(pts[i, 0], pts[i, 1], pts, side, ncell, start, items, r2, i, buf)
        counts[i] = c
        chunks.append(np.sort(buf[:c].copy()))
    indptr = np.zeros(n + 1, np.int64)
    for i in range(n):
        indptr[i + 1] = indptr[i] + counts[i]
    indices = np.empty(indptr[n], np.int64)
    for i in range(n):
        indices[indptr[i]:indptr[i + 1]] = chunks[i]
    return indptr, indices


@numba.njit(cache=True, nogil=True)
def _brute_counts(pts, side, r2):
    n = pts.shape[0]
    m = np.zeros(n, np.int64)
    for i in range(n):
        for j in range(i + 1, n):
            if _torus_d2(pts[i, 0], pts[i, 1], pts[j, 0], pts[j, 1], side) <= r2:
                m[i] += 1
                m[j] += 1
    return m


@numba.njit(cache=True, nogil=True)
def _counts_only(pts, side, ncell, start, items, r2, buf):
    n = pts.shape[0]
    m = np.empty(n, np.int64)
    for i in range(n):
        m[i] = _query(pts[i, 0], pts[i, 1], pts, side, ncell, start, items, r2, i, buf)
    return m


@numba.njit(cache=True, nogil=True)
def _a_coef(m, d):
    return (1.0 if m == d else 0.0) - (1.0 if m == d - 1 else 0.0)


@numba.njit(cache=True, nogil=True)
def _c_coef(m, d):
    return (1.0 if m == d + 1 else 0.0) - (2.0 if m == d else 0.0) + (1.0 if m == d - 1 else 0.0)


@numba.njit(cache=True, nogil=True)
def _ball_quadrature(pts, side, ncell, start, items, r, d, mc, nptr, nidx,
                     base_u, base_v, centers, shifts):
    """Shifted-lattice averages over the balls B_r(centers[k]).

    For a point x let L(x) be the germs within r of x and N = |L(x)|.  Per
    ball and shift the kernel averages

    * f(x) = I{N != d} + sum_{l in L} a(M_l)  (W_d change on inserting at x),
    * g(x) = I{N = d} - I{N = d+1},
    * e_j(x) for every germ j (change in f when germ j is deleted).

    Returns F, G of shape (R, K) and the across-shift mean and standard error
    of the e_j averages, shape (R, n).
    """
    n = pts.shape[0]
    nreg = centers.shape[0]
    nrep = shifts.shape[1]
    npts = base_u.size
    r2 = r * r
    fa = np.zeros((nreg, nrep))
    ga = np.zeros((nreg, nrep))
    qm = np.zeros((nreg, n))
    qs = np.zeros((nreg, n))
    row = np.zeros((nrep, n))
    touched = np.zeros(n, np.bool_)
    tlist = np.empty(n, np.int64)
    buf = np.empty(n, np.int64)
    for ri in range(nreg):
        cx = centers[ri, 0]
        cy = centers[ri, 1]
        nt = 0
        for k in range(nrep):
            sx = shifts[ri, k, 0]
            sy = shifts[ri, k, 1]
            fsum = 0.0
            gsum = 0.0
            for t in range(npts):
                u = base_u[t] + sx
                u -= math.floor(u)
                v = base_v[t] + sy
                v -= math.floor(v)
                rho = r * math.sqrt(u)
                th = 2.0 * math.pi * v
                x = (cx + rho * math.cos(th)) % side
                y = (cy + rho * math.sin(th)) % side
                cnt = _query(x, y, pts, side, ncell, start, items, r2, -1, buf)
                f = 1.0 if cnt != d else 0.0
                g = (1.0 if cnt == d else 0.0) - (1.0 if cnt == d + 1 else 0.0)
                for qi in range(cnt):
                    l = buf[qi]
                    ml = mc[l]
                    al = _a_coef(ml, d)
                    f += al
                    row[k, l] += g - al
                    if not touched[l]:
                        touched[l] = True
                        tlist[nt] = l
                        nt += 1
                    cl = _c_coef(ml, d)
                    if cl != 0.0:
                        for p in range(nptr[l], nptr[l + 1]):
                            j = nidx[p]
                            row[k, j] += cl
                            if not touched[j]:
                                touched[j] = True
                                tlist[nt] = j
                                nt += 1
                fsum += f
                gsum += g
            fa[ri, k] = fsum / npts
            ga[ri, k] = gsum / npts
        for q in range(nt):
            j = tlist[q]
            s1 = 0.0
            for k in range(nrep):
                s1 += row[k, j] / npts
            mean = s1 / nrep
            s2 = 0.0
            for k in range(nrep):
                dv = row[k, j] / npts - mean
                s2 += dv * dv
                row[k, j] = 0.0
            qm[ri, j] = mean
            if nrep > 1:
                qs[ri, j] = math.sqrt(s2 / (nrep - 1) / nrep)
            touched[j] = False
    return fa, ga, qm, qs


@numba.njit(cache=True, nogil=True)
def _torus_hist(pts, side, ncell, start, items, r, base_u, base_v, shifts):
    """Per-shift histogram of N_r(x) over lattice points spread on the torus."""
    n = pts.shape[0]
    nrep = shifts.shape[0]
    hist = np.zeros((nrep, n + 1), np.int64)
    buf = np.empty(max(n, 1), np.int64)
    r2 = r * r
    for k in range(nrep):
        for t in range(base_u.size):
            u = base_u[t] + shifts[k, 0]
            u -= math.floor(u)
            v = base_v[t] + shifts[k, 1]
            v -= math.floor(v)
            cnt = _query(u * side, v * side, pts, side, ncell, start, items, r2, -1, buf)
            hist[k, cnt] += 1
    return hist


@numba.njit(cache=True, nogil=True)
def _move(pts, side, ncell, start, items, r, mc, d, up, down, buf1, buf2, delta, done):
    """One germ-grain size-bias step; the configuration is left untouched.

    Returns (I, X, J, D, new_x, new_y, status).
    """
    n = pts.shape[0]
    r2 = r * r
    i = np.random.randint(0, n)
    m = mc[i]
    u = np.random.random()
    if u < up[m]:
        x = 1
    elif u < up[m] + down[m]:
        x = -1
    else:
        return i, 0, -1, 0, 0.0, 0.0, _OK
    vx = pts[i, 0]
    vy = pts[i, 1]
    if x == -1:
        if m == 0:
            return i, x, -1, 0, 0.0, 0.0, _IMPOSSIBLE
        cnt = _query(vx, vy, pts, side, ncell, start, items, r2, i, buf1)
        j = buf1[np.random.randint(0, cnt)]
        tries = 0
        while True:
            px = np.random.random() * side
            py = np.random.random() * side
            if _torus_d2(px, py, vx, vy, side) > r2:
                break
            tries += 1
            if tries >= REJECTION_CAP:
                return i, x, j, 0, 0.0, 0.0, _CAPPED
    else:
        if m >= n - 1:
            return i, x, -1, 0, 0.0, 0.0, _IMPOSSIBLE
        while True:
            j = np.random.randint(0, n)
            if j != i and _torus_d2(pts[j, 0], pts[j, 1], vx, vy, side) > r2:
                break
        rho = r * math.sqrt(np.random.random())
        th = 2.0 * math.pi * np.random.random()
        px = (vx + rho * math.cos(th)) % side
        py = (vy + rho * math.sin(th)) % side
    c_old = _query(pts[j, 0], pts[j, 1], pts, side, ncell, start, items, r2, j, buf1)
    c_new = _query(px, py, pts, side, ncell, start, items, r2, j, buf2)
    for q in range(c_old):
        delta[buf1[q]] -= 1
    for q in range(c_new):
        delta[buf2[q]] += 1
    dd = 0
    for q in range(c_old + c_new):
        l = buf1[q] if q < c_old else buf2[q - c_old]
        if done[l]:
            continue
        done[l] = True
        dd += (1 if mc[l] + delta[l] != d else 0) - (1 if mc[l] != d else 0)
    for q in range(c_old + c_new):
        l = buf1[q] if q < c_old else buf2[q - c_old]
        delta[l] = 0
        done[l] = False
    dd += (1 if c_new != d else 0) - (1 if mc[j] != d else 0)
    return i, x, j, dd, px, py, _OK


@numba.njit(cache=True, nogil=True)
def _uniform_points(n, side):
    pts = np.empty((n, 2))
    for i in range(n):
        pts[i, 0] = np.random.random() * side
        pts[i, 1] = np.random.random() * side
    return pts


@numba.njit(cache=True, nogil=True)
def _w_block(n, r, ds, reps, seed):
    np.random.seed(seed)
    side = math.sqrt(n)
    ncell = _n_cells(n, side, r)
    out = np.empty((reps, ds.size), np.int64)
    buf = np.empty(n, np.int64)
    hist = np.zeros(n + 1, np.int64)
    for rep in range(reps):
        pts = _uniform_points(n, side)
        start, items = _build_cells(pts, side, ncell)
        mc = _counts_only(pts, side, ncell, start, items, r * r, buf)
        hist[:] = 0
        for i in range(n):
            hist[mc[i]] += 1
        for t in range(ds.size):
            dd = ds[t]
            out[rep, t] = n - (hist[dd] if 0 <= dd < n else 0)
    return out


@numba.njit(cache=True, nogil=True)
def _coupling_block(n, r, d, up, down, reps, seed):
    """Fresh configuration + one step per replication: columns W, W^s, X, status."""
    np.random.seed(seed)
    side = math.sqrt(n)
    ncell = _n_cells(n, side, r)
    out = np.empty((reps, 4), np.int64)
    buf = np.empty(n, np.int64)
    buf2 = np.empty(n, np.int64)
    delta = np.zeros(n, np.int64)
    done = np.zeros(n, np.bool_)
    for rep in range(reps):
        pts = _uniform_points(n, side)
        start, items = _build_cells(pts, side, ncell)
        mc = _counts_only(pts, side, ncell, start, items, r * r, buf)
        w = 0
        for i in range(n):
            if mc[i] != d:
                w += 1
        i, x, j, dd, px, py, status = _move(pts, side, ncell, start, items, r, mc, d, up, down,
                                            buf, buf2, delta, done)
        out[rep, 0] = w
        out[rep, 1] = w + dd
        out[rep, 2] = x
        out[rep, 3] = status
    return out


@numba.njit(cache=True, nogil=True)
def _steps_on_config(pts, side, ncell, start, items, r, mc, d, up, down, steps, seed):
    np.random.seed(seed)
    n = pts.shape[0]
    out = np.empty((steps, 3), np.int64)
    buf = np.empty(n, np.int64)
    buf2 = np.empty(n, np.int64)
    delta = np.zeros(n, np.int64)
    done = np.zeros(n, np.bool_)
    for s in range(steps):
        i, x, j, dd, px, py, status = _move(pts, side, ncell, start, items, r, mc, d, up, down,
                                            buf, buf2, delta, done)
        out[s, 0] = x
        out[s, 1] = dd
        out[s, 2] = status
    return out


@numba.njit(cache=True, nogil=True)
def _upsilon_outer(n, r, d, up, down, inner, seed):
    """Outer draw: configuration, one step, then ``inner`` redraws of the
    germs outside B_2r(V_I) + B_r(V_J) + B_r(V_J^s).  Returns (D, W, counts, status)."""
    np.random.seed(seed)
    side = math.sqrt(n)
    ncell = _n_cells(n, side, r)
    r2 = r * r
    buf = np.empty(n, np.int64)
    buf2 = np.empty(n, np.int64)
    delta = np.zeros(n, np.int64)
    done = np.zeros(n, np.bool_)
    counts = np.zeros(n + 1, np.int64)
    while True:
        pts = _uniform_points(n, side)
        start, items = _build_cells(pts, side, ncell)
        mc = _counts_only(pts, side, ncell, start, items, r2, buf)
        i, x, j, dd, px, py, status = _move(pts, side, ncell, start, items, r, mc, d, up, down,
                                            buf, buf2, delta, done)
        if status == _OK:
            break
    w = 0
    for v in range(n):
        if mc[v] != d:
            w += 1
    if x == 0:
        j = i
        px = pts[i, 0]
        py = pts[i, 1]
    cxs = np.array([pts[i, 0], pts[j, 0], px])
    cys = np.array([pts[i, 1], pts[j, 1], py])
    rad2 = np.array([4.0 * r2, r2, r2])
    frozen = np.zeros(n, np.bool_)
    for v in range(n):
        for c in range(3):
            if _torus_d2(pts[v, 0], pts[v, 1], cxs[c], cys[c], side) <= rad2[c]:
                frozen[v] = True
    frozen[i] = True
    frozen[j] = True
    pts2 = pts.copy()
    status = _OK
    for t in range(inner):
        for v in range(n):
            if frozen[v]:
                continue
            tries = 0
            while True:
                qx = np.random.random() * side
                qy = np.random.random() * side
                inside = False
                for c in range(3):
                    if _torus_d2(qx, qy, cxs[c], cys[c], side) <= rad2[c]:
                        inside = True
                        break
                if not inside:
                    break
                tries += 1
                if tries >= REJECTION_CAP:
                    return dd, w, counts, _CAPPED
            pts2[v, 0] = qx
            pts2[v, 1] = qy
        s2, it2 = _build_cells(pts2, side, ncell)
        mc2 = _counts_only(pts2, side, ncell, s2, it2, r2, buf)
        ww = 0
        for v in range(n):
            if mc2[v] != d:
                ww += 1
        counts[ww] += 1
    return dd, w, counts, status


# ---------------------------------------------------------------- types

def torus_distance(x, y, side):
    """Euclidean distance on the flat torus of the given side."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    delta = np.abs(x - y) % side
    delta = np.minimum(delta, side - delta)
    return float(np.sqrt(np.sum(delta * delta, axis=-1)))


@dataclass(frozen=True, eq=False)
class GermConfig:
    """Germ positions plus the cell index and neighbour counts.

    ``side`` defaults to ``sqrt(n)``; it can be set explicitly so that germs
    may be removed without shrinking the torus.  ``seed`` keys the
    quadrature point sets.
    """

    points: np.ndarray = field(repr=False)
    r: float
    side: float | None = None
    seed: int = 0

    def __post_init__(self):
        pts = np.array(self.points, dtype=np.float64).reshape(-1, 2)
        r = check_real(self.r, "r", lower=0.0, lower_open=True)
        n = pts.shape[0]
        side = math.sqrt(n) if self.side is None else check_real(self.side, "side", lower=0.0,
                                                                  lower_open=True)
        if math.pi * r * r >= side * side:
            raise InvalidArgument("the grain area must be below the torus area (pi r^2 < n)")
        if 2.0 * r > side:
            raise InvalidArgument("grains wider than the torus (2r > side) are not supported")
        if n and (pts.min() < 0 or pts.max() >= side):
            pts = pts % side
            pts[pts >= side] = 0.0
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "r", r)
        object.__setattr__(self, "side", float(side))
        object.__setattr__(self, "seed", int(self.seed))

    @property
    def n(self):
        return self.points.shape[0]

    @property
    def area(self):
        return self.side * self.side

    @property
    def grain_area(self):
        return math.pi * self.r * self.r

    @property
    def ncell(self):
        return _n_cells(self.n, self.side, self.r)

    @property
    def cell_width(self):
        return self.side / self.ncell

    @cached_property
    def cell_index(self):
        """``(start, items)``: germs of cell ``c`` are ``items[start[c]:start[c+1]]``."""
        return _build_cells(self.points, self.side, self.ncell)

    @cached_property
    def neighbors(self):
        """CSR ``(indptr, indices)`` of I_{i,r}."""
        start, items = self.cell_index
        return _neighbor_csr(self.points, self.side, self.ncell, start, items, self.r * self.r)

    @cached_property
    def m_counts(self):
        indptr, _ = self.neighbors
        m = np.diff(indptr)
        m.setflags(write=False)
        return m

    def neighbors_of(self, i):
        indptr, indices = self.neighbors
        return indices[indptr[i]:indptr[i + 1]]

    def brute_force_counts(self):
        return _brute_counts(self.points, self.side, self.r * self.r)

    def query(self, x, y, radius=None, skip=-1):
        """Germs within ``radius`` (default r) of the point (x, y)."""
        radius = self.r if radius is None else radius
        if radius > self.cell_width:
            d2 = np.array([torus_distance((x, y), p, self.side) for p in self.points])
            idx = np.flatnonzero(d2 <= radius)
            return idx[idx != skip]
        start, items = self.cell_index
        buf = np.empty(max(self.n, 1), np.int64)
        c = _query(float(x) % self.side, float(y) % self.side, self.points, self.side, self.ncell,
                   start, items, radius * radius, skip, buf)
        return np.sort(buf[:c])

    def w_d(self, d):
        return int(np.count_nonzero(self.m_counts != d))

    def without(self, j):
        """Same torus with germ ``j`` removed."""
        return GermConfig(np.delete(self.points, j, axis=0), self.r, self.side, self.seed)

    def with_point(self, j, xy):
        pts = self.points.copy()
        pts[j] = xy
        return GermConfig(pts, self.r, self.side, self.seed)

    def to_csv(self, path=None):
        lines = [f"n={self.n},r={self.r:.17g}"]
        lines += [f"{i},{x:.17g},{y:.17g}" for i, (x, y) in enumerate(self.points)]
        text = "\n".join(lines) + "\n"
        if path is None:
            return text
        with open(path, "w", newline="\n") as fh:
            fh.write(text)
        return None

    @classmethod
    def from_csv(cls, path_or_text, seed=0):
        if "\n" in path_or_text:
            text = path_or_text
        else:
            with open(path_or_text) as fh:
                text = fh.read()
        rows = [ln for ln in text.splitlines() if ln.strip()]
        head = dict(kv.split("=") for kv in rows[0].split(","))
        n = int(head["n"])
        pts = np.array([[float(t) for t in ln.split(",")[1:]] for ln in rows[1:]]).reshape(-1, 2)
        if pts.shape[0] != n:
            raise InvalidArgument("germ count disagrees with the header")
        return cls(pts, float(head["r"]), seed=seed)


def sample_config(n, r, rng):
    """n i.i.d. uniform germs on the torus of side sqrt(n)."""
    n = check_int(n, "n", min_value=1)
    r = check_real(r, "r", lower=0.0, lower_open=True)
    if math.pi * r * r >= n:
        raise InvalidArgument("pi r^2 must be below n")
    side = math.sqrt(n)
    pts = rng.random((n, 2)) * side
    return GermConfig(pts, r, side, seed=int(rng.integers(0, 2**63 - 1)))


def gg_occupancy_probability(n, r, d):
    n = check_int(n, "n", min_value=1)
    d = check_int(d, "d", min_value=0)
    p = math.pi * r * r / n
    if not 0 < p < 1:
        raise InvalidArgument("pi r^2 must lie in (0, n)")
    if d > n - 1:
        return 0.0
    logb = (special.gammaln(n) - special.gammaln(d + 1) - special.gammaln(n - d)
            + d * math.log(p) + (n - 1 - d) * math.log1p(-p))
    return math.exp(logb)


def gg_mu(n, r, d):
    """E W_d = n (1 - b_d) with b_d the Bi(n-1, pi r^2/n) mass at d."""
    return n * (1.0 - gg_occupancy_probability(n, r, d))


def gg_law(n, r, d):
    return build_increment_law(binomial_pmf(n - 1, math.pi * r * r / n), d)


# ---------------------------------------------------------------- quadrature

def _lattice(npts):
    t = np.arange(npts)
    return (t + 0.5) / npts, (t * _GOLDEN) % 1.0


def shift_table(seed, n_regions, n_shifts):
    """Cranley–Patterson shifts; row ``k`` depends only on (seed, k)."""
    rng = derive_stream(seed, 0, _SHIFT_TAG)
    return rng.random((n_regions, n_shifts, 2))


def ball_averages(config, d, centers, region_ids, points=DEFAULT_BALL_POINTS,
                  replicates=DEFAULT_REPLICATES):
    """Per-ball averages of f, g and the e_j row (see :func:`_ball_quadrature`).

    Returns ``(f, f_se, g, g_se, e_mean, e_se)``.
    """
    if points < replicates:
        raise InvalidArgument("need at least one lattice point per shift")
    centers = np.asarray(centers, dtype=float).reshape(-1, 2)
    region_ids = np.asarray(region_ids, dtype=np.int64)
    shifts = shift_table(config.seed, int(region_ids.max()) + 1 if region_ids.size else 0,
                         replicates)[region_ids]
    u, v = _lattice(points // replicates)
    start, items = config.cell_index
    nptr, nidx = config.neighbors
    fa, ga, qm, qs = _ball_quadrature(config.points, config.side, config.ncell, start, items,
                                      config.r, d, config.m_counts.astype(np.int64), nptr, nidx,
                                      u, v, centers, np.ascontiguousarray(shifts))
    k = replicates
    se = lambda a: a.std(axis=1, ddof=1) / math.sqrt(k) if k > 1 else np.zeros(a.shape[0])  # noqa: E731
    return fa.mean(axis=1), se(fa), ga.mean(axis=1), se(ga), qm, qs


def y_d_value(config, d, quadrature_points=DEFAULT_TORUS_POINTS, replicates=DEFAULT_REPLICATES,
              return_se=False):
    """Area of the set of torus points covered by exactly ``d`` grains."""
    d = check_int(d, "d", min_value=0)
    quadrature_points = check_int(quadrature_points, "quadrature_points", min_value=10_000)
    vals = _y_table(config, quadrature_points, replicates)
    if d > config.n:
        est, se = 0.0, 0.0
    else:
        est = float(vals[:, d].mean())
        se = float(vals[:, d].std(ddof=1) / math.sqrt(replicates)) if replicates > 1 else 0.0
    return (est, se) if return_se else est


def _y_table(config, quadrature_points, replicates):
    shifts = derive_stream(config.seed, 0, _TORUS_TAG).random((replicates, 2))
    u, v = _lattice(quadrature_points // replicates)
    start, items = config.cell_index
    hist = _torus_hist(config.points, config.side, config.ncell, start, items, config.r, u, v, shifts)
    return config.area * hist / u.size


# ---------------------------------------------------------------- increments

@dataclass(frozen=True, eq=False)
class IncrementStats:
    """Local increment statistics of one configuration.

    ``q_matrix[i, j]`` is Q_ij (dense); ``e_matrix[i, j]`` is E_ij for
    ``j`` in I_{i,r} and zero elsewhere.
    """

    d: int
    s: np.ndarray = field(repr=False)
    h: np.ndarray = field(repr=False)
    k: np.ndarray = field(repr=False)
    y_d: float
    q_matrix: np.ndarray = field(repr=False)
    e_matrix: np.ndarray = field(repr=False)
    h_se: np.ndarray = field(repr=False)
    k_se: np.ndarray = field(repr=False)
    y_d_se: float
    q_se: np.ndarray = field(repr=False)
    e_se: np.ndarray = field(repr=False)
    w_d: int
    w_dm1: int
    radius: float
    positions: np.ndarray = field(repr=False)
    side: float

    @property
    def q_pair(self):
        """Q_ij for pairs within distance 3r (all other entries vanish)."""
        out = {}
        for i, j in zip(*np.nonzero(self.q_matrix)):
            out[(int(i), int(j))] = float(self.q_matrix[i, j])
        return out

    @property
    def e_pair(self):
        out = {}
        for i, j in zip(*np.nonzero(self.e_matrix)):
            out[(int(i), int(j))] = float(self.e_matrix[i, j])
        return out

    def a_ij(self, i, j):
        return self.h[i] + self.s[j] + self.q_matrix[i, j]

    def r_ij(self, i, j):
        return self.s[j] + self.k[i] + self.e_matrix[i, j]


def removal_increment(config, d):
    """S_j: change in W_d when germ j is deleted, plus one."""
    m = config.m_counts
    indptr, indices = config.neighbors
    contrib = (m == d).astype(np.int64) - (m == d + 1).astype(np.int64)
    nb = np.array([contrib[indices[indptr[j]:indptr[j + 1]]].sum() for j in range(config.n)],
                  dtype=np.int64)
    return 1 - (m != d).astype(np.int64) + nb


def bound_violations(stats, config):
    """List of (name, index, value, bound) for every breached uniform bound."""
    b = uniform_bounds(stats.d)
    out = []
    for name, arr in (("s", stats.s), ("h", stats.h), ("q", stats.q_matrix), ("e", stats.e_matrix)):
        bad = np.argwhere(np.abs(arr) > b[name] + 1e-9)
        out += [(name, tuple(int(t) for t in ix), float(arr[tuple(ix)]), b[name]) for ix in bad]
    indptr, indices = config.neighbors
    ssum = np.array([stats.s[config.neighbors_of(i)].sum() for i in range(config.n)])
    bad = np.flatnonzero(np.abs(ssum) > b["s_sum"])
    out += [("s_sum", (int(i),), float(ssum[i]), b["s_sum"]) for i in bad]
    return out


def increment_stats(config, d, quadrature_points=DEFAULT_BALL_POINTS,
                    torus_points=DEFAULT_TORUS_POINTS, replicates=DEFAULT_REPLICATES, check=True):
    """S, H, Q, K, E and Y_d for ``config``.

    H, Q and the ball part of E come from one pass of ``quadrature_points``
    lattice points per grain; Y_d from ``torus_points`` points on the torus.
    K_i follows from the torus-wide integral of the insertion increment,
    ``n - Y_d + pi r^2 (W_{d-1} - W_d)``, minus the part inside B_i.
    """
    d = check_int(d, "d", min_value=0)
    n = config.n
    a = config.grain_area
    out_area = config.area - a
    m = config.m_counts
    s = removal_increment(config, d)
    f, f_se, g, g_se, qm, qs = ball_averages(config, d, config.points, np.arange(n),
                                             quadrature_points, replicates)
    h = f - 1.0
    ytab = _y_table(config, torus_points, replicates)
    y_d = float(ytab[:, d].mean()) if d <= n else 0.0
    y_se = float(ytab[:, d].std(ddof=1) / math.sqrt(replicates)) if (d <= n and replicates > 1) else 0.0
    w_d = int(np.count_nonzero(m != d))
    w_dm1 = int(np.count_nonzero(m != d - 1))
    k = (a * (w_dm1 - w_d - h) - y_d) / out_area
    k_se = np.sqrt((a * f_se) ** 2 + y_se ** 2) / out_area
    # integral of e_j over the whole torus, divided by pi r^2
    a_coef = (m == d).astype(float) - (m == d - 1).astype(float)
    c_coef = (m == d + 1).astype(float) - 2.0 * (m == d) + (m == d - 1)
    indptr, indices = config.neighbors
    c_sum = np.array([c_coef[indices[indptr[j]:indptr[j + 1]]].sum() for j in range(n)])
    whole = g - a_coef + c_sum
    e = np.zeros((n, n))
    e_se = np.zeros((n, n))
    for i in range(n):
        js = indices[indptr[i]:indptr[i + 1]]
        e[i, js] = a / out_area * (whole[js] - qm[i, js])
        e_se[i, js] = a / out_area * np.sqrt(g_se[js] ** 2 + qs[i, js] ** 2)
    stats = IncrementStats(d=d, s=s, h=h, k=k, y_d=y_d, q_matrix=qm, e_matrix=e, h_se=f_se,
                           k_se=k_se, y_d_se=y_se, q_se=qs, e_se=e_se, w_d=w_d, w_dm1=w_dm1,
                           radius=config.r, positions=config.points, side=config.side)
    if check:
        bad = bound_violations(stats, config)
        if bad:
            raise InternalInvariantViolation(f"uniform increment bounds violated: {bad[:5]}")
    return stats


# ---------------------------------------------------------------- coupling

@dataclass(frozen=True)
class GgCouplingRecord(CouplingRecord):
    new_position: tuple | None = None


def size_bias_step_gg(config, d, law, rng):
    """Pick I, draw X at M_I and move one germ into or out of B_{I,r}."""
    d = check_int(d, "d", min_value=0)
    n = config.n
    up, down, _, _ = law_tables(law, n)
    start, items = config.cell_index
    from .er_model import _seed
    _seed(kernel_seed(rng))
    i, x, j, dd, px, py, status = _move(config.points, config.side, config.ncell, start, items,
                                        config.r, config.m_counts.astype(np.int64), d, up, down,
                                        np.empty(n, np.int64), np.empty(n, np.int64),
                                        np.zeros(n, np.int64), np.zeros(n, np.bool_))
    if status == _IMPOSSIBLE:
        raise InternalInvariantViolation("the increment law selected an empty candidate set")
    if status == _CAPPED:
        raise ResourceLimit("rejection sampling outside B_I exceeded the retry cap")
    w = config.w_d(d)
    g = gg_mu(n, config.r, d)
    if x == 0:
        return GgCouplingRecord(int(i), 0, None, w, w, 0, g)
    return GgCouplingRecord(int(i), int(x), int(j), w, w + int(dd), int(dd), g, (float(px), float(py)))


def apply_step_gg(config, record):
    if record.x == 0:
        return config
    return config.with_point(record.j_moved, record.new_position)


def steps_on_config(config, d, law, steps, seed):
    """``steps`` independent coupling steps from the same frozen configuration.

    Returns an array with columns X, D, status.
    """
    up, down, _, _ = law_tables(law, config.n)
    start, items = config.cell_index
    return _steps_on_config(config.points, config.side, config.ncell, start, items, config.r,
                            config.m_counts.astype(np.int64), d, up, down, int(steps), int(seed))


def gd_assembly(config, d, law, stats=None):
    """E[G D | V] assembled from the increment statistics, with T1'..T11'.

    Returns ``(value, t_prime)``; ``value / (1 - b_d)`` equals
    ``T1+T2+T3+T4-T5+T6-T7+T8-T9-T10+T11`` term by term.
    """
    n = config.n
    if stats is None:
        stats = increment_stats(config, d)
    _, _, pi_t, gam_t = law_tables(law, n)
    q = law.q
    m = config.m_counts
    pi_i = pi_t[m]
    gam_i = gam_t[m]
    a = config.grain_area
    out_area = config.area - a
    one_minus_b = 1.0 - gg_occupancy_probability(n, config.r, d)
    indptr, indices = config.neighbors
    s = stats.s.astype(float)
    s_all = s.sum()
    free = n - m - 1
    with np.errstate(divide="ignore", invalid="ignore"):
        w_up = np.where((pi_i > 0) & (free > 0), pi_i / free, 0.0)
        w_down = np.where((gam_i > 0) & (m > 0), gam_i / m, 0.0)
    s_nb = np.array([s[indices[indptr[i]:indptr[i + 1]]].sum() for i in range(n)])
    e_nb = stats.e_matrix.sum(axis=1)
    q_nb = np.array([stats.q_matrix[i, indices[indptr[i]:indptr[i + 1]]].sum() for i in range(n)])
    q_comp = stats.q_matrix.sum(axis=1) - np.diag(stats.q_matrix) - q_nb
    small = 2 * m <= n
    gsum = gam_i.sum()
    t = np.zeros(11)
    t[0] = q * np.sum(np.where(free > 0, pi_i, 0.0) * stats.h)
    t[1] = q * np.sum(w_up * q_comp)
    t[2] = q * np.sum(w_up * small) * s_all
    t[3] = q * np.sum(w_up * ~small) * s_all
    t[4] = q * np.sum(w_up * (s + s_nb))
    t[5] = (1 - q) * np.sum(w_down * s_nb)
    t[6] = (1 - q) * a / out_area * stats.w_d * gsum
    t[7] = (1 - q) * a / out_area * stats.w_dm1 * gsum
    t[8] = (1 - q) * a / out_area * np.sum(gam_i * stats.h)
    t[9] = (1 - q) / out_area * stats.y_d * gsum
    t[10] = (1 - q) * np.sum(w_down * e_nb)
    # direct assembly from A_ij and R_ij
    a_part = w_up * (free * stats.h + (s_all - s - s_nb) + q_comp)
    r_part = w_down * (s_nb + m * stats.k + e_nb)
    value = one_minus_b * (q * a_part.sum() + (1 - q) * r_part.sum())
    return float(value), t


SIGNS = np.array([1, 1, 1, 1, -1, 1, -1, 1, -1, -1, 1], dtype=float)


def t_statistics_gg(config, d, law, stats=None):
    """T1'..T11' for one configuration."""
    return gd_assembly(config, d, law, stats)[1]


class GermGrainModel:
    """n uniform germs on the torus with grain radius r."""

    name = "GG"

    def __init__(self, n, r, quadrature_points=DEFAULT_BALL_POINTS):
        self.n = check_int(n, "n", min_value=2)
        self.r = check_real(r, "r", lower=0.0, lower_open=True)
        if math.pi * self.r ** 2 >= self.n or 2 * self.r > math.sqrt(self.n):
            raise InvalidArgument("need pi r^2 < n and 2r <= sqrt(n)")
        self.quadrature_points = quadrature_points

    def get_params(self, deep=True):
        return {"n": self.n, "r": self.r, "quadrature_points": self.quadrature_points}

    def __repr__(self):
        return f"GermGrainModel(n={self.n}, r={self.r})"

    def mean(self, d):
        return gg_mu(self.n, self.r, d)

    def law(self, d):
        return gg_law(self.n, self.r, d)

    def variance(self, d, reps=100_000, seed=0):
        """Monte Carlo variance of W_d (no closed form is available)."""
        return self.variance_mc(d, reps, seed)[0]

    def variance_mc(self, d, reps=100_000, seed=0):
        """``(variance, standard error)`` of W_d from ``reps`` fresh configurations."""
        key = (d, reps, seed)
        cache = self.__dict__.setdefault("_var_cache", {})
        if key not in cache:
            w = self.w_samples([d], reps, seed)[:, 0].astype(float)
            c = w - w.mean()
            var = float(c.var(ddof=1))
            se = float(np.sqrt(np.var(c * c, ddof=1) / w.size))
            cache[key] = (var, se)
        return cache[key]

    def sample(self, rng):
        return sample_config(self.n, self.r, rng)

    def w_samples(self, ds, reps, seed):
        return _w_block(self.n, self.r, np.asarray(ds, dtype=np.int64), int(reps), int(seed))

    def coupling_block(self, d, reps, seed, law=None):
        """Columns W, W^s, X, status for ``reps`` fresh configurations."""
        law = self.law(d) if law is None else law
        up, down, _, _ = law_tables(law, self.n)
        out = _coupling_block(self.n, self.r, d, up, down, int(reps), int(seed))
        if np.any(out[:, 3] == _IMPOSSIBLE):
            raise InternalInvariantViolation("the increment law selected an empty candidate set")
        if np.any(out[:, 3] == _CAPPED):
            raise ResourceLimit("rejection sampling outside B_I exceeded the retry cap")
        return out

    def conditional_gd_samples(self, d, reps, seed):
        rng = np.random.default_rng(seed)
        law = self.law(d)
        return np.array([gd_assembly(c, d, law, increment_stats(c, d, self.quadrature_points))[0]
                         for c in (self.sample(rng) for _ in range(reps))])

    def upsilon_outer(self, d, inner, seed, law=None):
        law = self.law(d) if law is None else law
        up, down, _, _ = law_tables(law, self.n)
        dd, w, counts, status = _upsilon_outer(self.n, self.r, d, up, down, int(inner), int(seed))
        if status == _CAPPED:
            raise ResourceLimit("rejection sampling of the unfrozen germs exceeded the retry cap")
        return int(dd), int(w), counts, status
