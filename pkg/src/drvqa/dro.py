"""Discrete noise-level distributions, MMD geometry and the worst-case solver."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from numba import njit
from scipy.linalg import LinAlgError, cholesky

from .errors import DomainError, NumericalError, SolverError


@dataclass(frozen=True)
class NoiseGrid:
    levels: np.ndarray

    def __post_init__(self):
        levels = np.array(self.levels, dtype=float)
        if levels.ndim != 1 or len(levels) < 1:
            raise DomainError("noise grid needs a 1-D array of levels")
        if np.any(np.diff(levels) <= 0):
            raise DomainError("noise levels must be strictly increasing")
        if levels[0] < 0 or levels[-1] > 1:
            raise DomainError("noise levels must lie in [0, 1]")
        levels.setflags(write=False)
        object.__setattr__(self, "levels", levels)

    @classmethod
    def uniform(cls, n=20, lo=0.0, hi=0.08):
        return cls(np.linspace(lo, hi, n))

    def __len__(self):
        return len(self.levels)

    @property
    def spacing(self):
        return float(np.mean(np.diff(self.levels))) if len(self) > 1 else 1.0

    @property
    def range(self):
        return float(self.levels[0]), float(self.levels[-1])


@dataclass(frozen=True)
class DiscretePdf:
    weights: np.ndarray

    def __post_init__(self):
        w = np.array(self.weights, dtype=float)
        if w.ndim != 1 or not np.all(np.isfinite(w)):
            raise DomainError("weights must be a finite 1-D array")
        if np.any(w < -1e-15) or np.any(w > 1 + 1e-15):
            raise DomainError("weights must lie in [0, 1]")
        w = np.clip(w, 0.0, 1.0)
        if abs(w.sum() - 1.0) > 1e-12:
            raise DomainError(f"weights sum to {w.sum()!r}, not 1")
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)

    @classmethod
    def normalized(cls, raw):
        raw = np.asarray(raw, dtype=float)
        return cls(raw / raw.sum())

    @classmethod
    def dirac(cls, n, index):
        w = np.zeros(n)
        w[index] = 1.0
        return cls(w)

    def __len__(self):
        return len(self.weights)

    def mean(self, grid: NoiseGrid):
        return float(self.weights @ grid.levels)


def mmd_kernel_matrix(grid: NoiseGrid, lengthscale=None):
    """RBF Gram matrix over the grid levels; default lengthscale is two grid spacings."""
    if lengthscale is None:
        lengthscale = 2.0 * grid.spacing
    if lengthscale <= 0:
        raise DomainError("MMD kernel lengthscale must be positive")
    d = grid.levels[:, None] - grid.levels[None, :]
    return np.exp(-(d * d) / (2.0 * lengthscale * lengthscale))


def mmd_distance(w, w2, M):
    w = getattr(w, "weights", w)
    w2 = getattr(w2, "weights", w2)
    w, w2 = np.asarray(w, dtype=float), np.asarray(w2, dtype=float)
    if w.shape != (M.shape[0],) or w2.shape != w.shape:
        raise DomainError("weight vectors and kernel matrix differ in size")
    d = w - w2
    q = float(d @ M @ d)
    if q < -1e-12:
        raise NumericalError(f"negative MMD quadratic form {q:.3e}; kernel matrix is not PSD")
    return math.sqrt(max(q, 0.0))


@dataclass(frozen=True)
class MmdBall:
    center: DiscretePdf
    radius: float
    kernel_matrix: np.ndarray

    def __post_init__(self):
        M = np.array(self.kernel_matrix, dtype=float)
        n = len(self.center)
        if M.shape != (n, n):
            raise DomainError("kernel matrix does not match the center's length")
        if np.max(np.abs(M - M.T)) > 1e-12:
            raise DomainError("kernel matrix is not symmetric")
        if not self.radius >= 0:
            raise DomainError("radius must be non-negative")
        jitter = 1e-12 * np.trace(M) / n
        try:
            cholesky(M + jitter * np.eye(n), lower=True)
        except LinAlgError:
            raise DomainError("kernel matrix is not positive semi-definite") from None
        M.setflags(write=False)
        object.__setattr__(self, "kernel_matrix", M)
        object.__setattr__(self, "radius", float(self.radius))

    def distance(self, w):
        return mmd_distance(self.center, w, self.kernel_matrix)


def project_simplex(v):
    """Euclidean projection of each row of ``v`` onto the probability simplex."""
    v = np.asarray(v, dtype=float)
    flat = np.atleast_2d(v)
    n = flat.shape[1]
    u = -np.sort(-flat, axis=1)
    css = np.cumsum(u, axis=1) - 1.0
    ks = np.arange(1, n + 1)
    cond = u - css / ks > 0
    rho = n - 1 - np.argmax(cond[:, ::-1], axis=1)
    tau = css[np.arange(len(flat)), rho] / (rho + 1)
    out = np.maximum(flat - tau[:, None], 0.0)
    return out.reshape(v.shape)


def _radial_shrink(x, w, M, eps):
    """Pull rows of ``x`` toward ``w`` until their M-distance is at most ``eps``."""
    d = x - w
    dist = np.sqrt(np.maximum(np.einsum("bi,ij,bj->b", d, M, d), 0.0))
    scale = np.where(dist > eps, eps / np.where(dist > 0, dist, 1.0), 1.0)
    return w + d * scale[:, None]


@njit(cache=True)
def _chol_solve2(h, r1, r2):
    """Solve ``h a = r1`` and ``h b = r2`` for SPD ``h`` (overwritten). Returns ok flag."""
    n = h.shape[0]
    for j in range(n):
        acc = h[j, j]
        for k in range(j):
            acc -= h[j, k] * h[j, k]
        if not acc > 0.0:
            return False
        ljj = math.sqrt(acc)
        h[j, j] = ljj
        for i in range(j + 1, n):
            acc = h[i, j]
            for k in range(j):
                acc -= h[i, k] * h[j, k]
            h[i, j] = acc / ljj
    for r in (r1, r2):
        for i in range(n):
            acc = r[i]
            for k in range(i):
                acc -= h[i, k] * r[k]
            r[i] = acc / h[i, i]
        for i in range(n - 1, -1, -1):
            acc = r[i]
            for k in range(i + 1, n):
                acc -= h[k, i] * r[k]
            r[i] = acc / h[i, i]
    return True


@njit(cache=True)
def _barrier_row(c, w, M, eps2, x, gap_tol, growth, max_newton):
    """Log-barrier maximization of ``c @ x`` for one row, ``x`` updated in place.

    Newton systems are solved in coordinates scaled by ``x`` so tiny entries
    do not wreck conditioning. Returns 0 on success, 1 on a numerical failure.
    """
    n = c.shape[0]
    m = n + 1
    t = 1.0
    h = np.empty((n, n))
    md = np.empty(n)
    g = np.empty(n)
    a = np.empty(n)
    bb = np.empty(n)
    dx = np.empty(n)
    mdx = np.empty(n)
    while True:
        final = m / t < gap_tol
        # centering error costs about lam2 / (2 t) in the objective, so
        # loose centering suffices on the path; tighten somewhat at the end
        tol = 1e-8 if final else 1e-3
        for _ in range(max_newton):
            s = eps2
            for i in range(n):
                acc = 0.0
                for j in range(n):
                    acc += M[i, j] * (x[j] - w[j])
                md[i] = acc
                s -= acc * (x[i] - w[i])
            if not s > 0.0:
                return 1
            for i in range(n):
                g[i] = -t * c[i] - 1.0 / x[i] + 2.0 * md[i] / s
            for i in range(n):
                for j in range(n):
                    h[i, j] = x[i] * x[j] * (2.0 * M[i, j] / s + 4.0 * md[i] * md[j] / (s * s))
                h[i, i] += 1.0
                a[i] = x[i] * g[i]
                bb[i] = x[i]
            if not _chol_solve2(h, a, bb):
                return 1
            sg = 0.0
            s1 = 0.0
            for i in range(n):
                a[i] *= x[i]
                bb[i] *= x[i]
                sg += a[i]
                s1 += bb[i]
            nu = -sg / s1
            sdx = 0.0
            sx = 0.0
            sx2 = 0.0
            for i in range(n):
                dx[i] = -(a[i] + nu * bb[i])
                sdx += dx[i]
                sx += x[i]
                sx2 += x[i] * x[i]
            # roundoff in the solve leaks into sum(dx); steer sum(x) back to 1
            fix = (1.0 - sx - sdx) / sx2
            lam2 = 0.0
            for i in range(n):
                dx[i] += fix * x[i] * x[i]
                lam2 -= g[i] * dx[i]
            if not math.isfinite(lam2):
                return 1
            if lam2 <= tol:
                break
            # largest step keeping x > 0 and the ball slack > 0
            step_max = np.inf
            qa = 0.0
            qb = 0.0
            cdx = 0.0
            for i in range(n):
                if dx[i] < 0.0:
                    step_max = min(step_max, -x[i] / dx[i])
                acc = 0.0
                for j in range(n):
                    acc += M[i, j] * dx[j]
                mdx[i] = acc
                qa += acc * dx[i]
                qb += 2.0 * md[i] * dx[i]
                cdx += c[i] * dx[i]
            denom = qb + math.sqrt(max(qb * qb + 4.0 * qa * s, 0.0))
            if denom > 0.0:
                step_max = min(step_max, 2.0 * s / denom)
            step = min(1.0, 0.99 * step_max)
            # backtracking on the barrier decrease, written without cancellation
            for _ in range(60):
                s_new = s - step * (qb + step * qa)
                ok = s_new > 0.0
                val = -t * step * cdx
                if ok:
                    val -= math.log(s_new / s)
                    for i in range(n):
                        r = step * dx[i] / x[i]
                        if r <= -1.0:
                            ok = False
                            break
                        val -= math.log1p(r)
                if ok and val <= -0.25 * step * lam2:
                    break
                step *= 0.5
            for i in range(n):
                x[i] += step * dx[i]
        if final:
            return 0
        t *= growth


@njit(cache=True)
def _homotopy_row(c, w, M, eps2, x, max_events):
    """Exact worst case for one row by following the multiplier path.

    With ``u`` the inverse of the ball multiplier, the maximizer of
    ``c @ x - q(x) / u`` over the simplex is piecewise affine in ``u``, where
    ``q(x) = (x - w) M (x - w)``. Starting from ``x = w`` at ``u = 0`` the
    path is walked segment by segment, each segment ending when a coordinate
    leaves or joins the support, until ``q`` reaches ``eps2``. Writes the
    result into ``x``; returns 0 on success, 1 if the walk did not finish.
    """
    n = c.shape[0]
    k = 0
    for i in range(1, n):
        if c[i] > c[k]:
            k = i
    q = 0.0
    for i in range(n):
        di = (1.0 if i == k else 0.0) - w[i]
        for j in range(n):
            q += di * M[i, j] * ((1.0 if j == k else 0.0) - w[j])
    if q <= eps2:
        x[:] = 0.0
        x[k] = 1.0
        return 0
    x[:] = w
    support = w > 0.0
    u = 0.0
    slope_tol = 1e-9 * (1.0 + np.max(np.abs(c)))
    r = np.empty(n)
    for _ in range(max_events):
        idx = np.flatnonzero(support)
        m = idx.shape[0]
        # r = M (x - w); multiplier of the sum constraint from the support rows
        for i in range(n):
            acc = 0.0
            for j in range(n):
                acc += M[i, j] * (x[j] - w[j])
            r[i] = acc
        nu = 0.0
        for a in range(m):
            nu += u * c[idx[a]] - 2.0 * r[idx[a]]
        nu /= m
        kkt = np.zeros((m + 1, m + 1))
        rhs = np.zeros(m + 1)
        for a in range(m):
            for b in range(m):
                kkt[a, b] = 2.0 * M[idx[a], idx[b]]
            kkt[a, m] = 1.0
            kkt[m, a] = 1.0
            rhs[a] = c[idx[a]]
        sol = np.linalg.solve(kkt, rhs)
        dx = np.zeros(n)
        for a in range(m):
            dx[idx[a]] = sol[a]
        dnu = sol[m]
        # q along the segment: q0 + 2 h (x - w) M dx + h^2 dx M dx
        q0 = 0.0
        lin = 0.0
        quad = 0.0
        for i in range(n):
            q0 += (x[i] - w[i]) * r[i]
            acc = 0.0
            for j in range(n):
                acc += M[i, j] * dx[j]
            lin += r[i] * dx[i]
            quad += dx[i] * acc
            r[i] = acc  # now M dx
        h_ball = np.inf
        gap = eps2 - q0
        if gap <= 0.0:
            h_ball = 0.0
        elif quad > 0.0:
            h_ball = gap / (lin + math.sqrt(lin * lin + quad * gap))
        elif lin > 0.0:
            h_ball = 0.5 * gap / lin
        h_event = np.inf
        leave = -1
        enter = -1
        for i in range(n):
            if support[i]:
                if dx[i] < 0.0:
                    h = -x[i] / dx[i]
                    if h < h_event:
                        h_event, leave, enter = h, i, -1
            else:
                # reduced cost 2 (M(x - w))_i - u c_i + nu must stay >= 0
                acc = 0.0
                for j in range(n):
                    acc += M[i, j] * (x[j] - w[j])
                g = 2.0 * acc - u * c[i] + nu
                slope = 2.0 * r[i] - c[i] + dnu
                # slopes inherit the conditioning of M; ignore roundoff-sized ones
                if slope < -slope_tol:
                    h = max(g, 0.0) / -slope
                    if h < h_event:
                        h_event, leave, enter = h, -1, i
        if h_ball <= h_event:
            for i in range(n):
                x[i] += h_ball * dx[i]
            return 0
        if not math.isfinite(h_event):
            return 1
        for i in range(n):
            x[i] += h_event * dx[i]
        u += h_event
        if leave >= 0:
            x[leave] = 0.0
            support[leave] = False
        else:
            support[enter] = True
    return 1


def _barrier_solve(c, w, M, eps, gap_tol=1e-10, growth=30.0, max_newton=80):
    """Maximize ``c @ x`` over simplex ∩ {||x - w||_M <= eps} for each row of ``c``."""
    b, n = c.shape
    u = np.full(n, 1.0 / n)
    du = u - w
    dist_u = math.sqrt(max(float(du @ M @ du), 0.0))
    alpha = 0.5 if dist_u == 0 else min(0.5, 0.5 * eps / dist_u)
    x = np.tile(w + alpha * du, (b, 1))
    if np.any(x <= 0):
        raise SolverError("could not find a strictly feasible start", iterates=x)
    c = np.ascontiguousarray(c, dtype=float)
    w = np.ascontiguousarray(w, dtype=float)
    M = np.ascontiguousarray(M, dtype=float)
    for r in range(b):
        if _barrier_row(c[r], w, M, eps * eps, x[r], gap_tol, growth, max_newton):
            raise SolverError("numerical failure in worst-case solver", iterates=x)
    return x


def _homotopy_solve(c, w, M, eps):
    """Exact path solve per row; rows where the walk stalls go to the barrier method."""
    c = np.ascontiguousarray(c, dtype=float)
    w = np.ascontiguousarray(w, dtype=float)
    M = np.ascontiguousarray(M, dtype=float)
    x = np.empty_like(c)
    failed = []
    for r in range(len(c)):
        if _homotopy_row(c[r], w, M, eps * eps, x[r], 20 * len(w)):
            failed.append(r)
    if failed:
        x[failed] = _barrier_solve(c[failed], w, M, eps)
    return x


def worst_case_weights(values, ball: MmdBall):
    """Batched worst-case distributions for each row of ``values``.

    Returns an array of the same shape whose rows lie on the simplex and
    inside the ball. Constant rows and a zero radius give the center.
    """
    v = np.atleast_2d(np.asarray(values, dtype=float))
    w = np.asarray(ball.center.weights)
    if v.shape[1] != len(w):
        raise DomainError("values and ball dimension differ")
    if not np.all(np.isfinite(v)):
        raise DomainError("non-finite values")
    out = np.tile(w, (len(v), 1))
    eps = ball.radius
    if eps == 0.0:
        return out
    lo = v.min(axis=1)
    span = v.max(axis=1) - lo
    scale = np.maximum(1.0, np.max(np.abs(v), axis=1))
    live = span > 1e-14 * scale
    if not np.any(live):
        return out
    c = (v[live] - lo[live, None]) / span[live, None]
    M = ball.kernel_matrix
    x = _homotopy_solve(c, w, M, eps)
    x = project_simplex(x)
    x = _radial_shrink(x, w, M, eps)
    worse = np.sum(c * x, 1) < c @ w
    x[worse] = w
    d = x - w
    dist = np.sqrt(np.maximum(np.einsum("bi,ij,bj->b", d, M, d), 0.0))
    if np.any(dist > eps + 1e-9) or np.any(np.abs(x.sum(1) - 1) > 1e-9) or np.any(x < -1e-9):
        raise SolverError("worst-case iterate left the feasible set", iterates=x)
    out[live] = x
    return out


def worst_case_distribution(values, ball: MmdBall) -> DiscretePdf:
    v = np.asarray(values, dtype=float)
    if v.ndim != 1:
        raise DomainError("values must be a 1-D array")
    x = worst_case_weights(v[None], ball)[0]
    return DiscretePdf(x / x.sum())


def truncated_gaussian_pdf(mean, std, grid: NoiseGrid) -> DiscretePdf:
    """Gaussian density at each level, renormalized over the grid."""
    if not std > 0:
        raise DomainError("std must be positive")
    z = (grid.levels - mean) / std
    dens = np.exp(-0.5 * z * z)
    total = dens.sum()
    if total == 0.0 or not np.isfinite(total):
        raise DomainError(f"Gaussian(mean={mean}, std={std}) underflows on every grid level")
    return DiscretePdf(dens / total)


@lru_cache(maxsize=8)
def simplex_lattice(n, units):
    """All points of the simplex with coordinates in multiples of 1/units."""
    pts = []
    for bars in itertools.combinations(range(units + n - 1), n - 1):
        edges = (-1,) + bars + (units + n - 1,)
        pts.append([edges[i + 1] - edges[i] - 1 for i in range(n)])
    arr = np.array(pts, dtype=float) / units
    arr.setflags(write=False)
    return arr


def grid_search_worst_case(values, ball: MmdBall, step=0.02):
    """Best feasible lattice point by exhaustive enumeration (small n only)."""
    n = len(ball.center)
    units = int(round(1.0 / step))
    pts = simplex_lattice(n, units)
    d = pts - ball.center.weights
    dist2 = np.einsum("bi,ij,bj->b", d, ball.kernel_matrix, d)
    feasible = dist2 <= ball.radius**2 + 1e-15
    if not np.any(feasible):
        return float(np.dot(ball.center.weights, values)), ball.center.weights.copy()
    obj = pts[feasible] @ np.asarray(values, dtype=float)
    k = int(np.argmax(obj))
    return float(obj[k]), pts[feasible][k]
