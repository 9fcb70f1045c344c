"""Seeded random-variate kernels used by the Gibbs samplers.

Every sampler in this package draws from a :class:`SeededStream`, a thin
wrapper around numpy's PCG64 generator keyed by ``(seed, lineage)``.  Two
streams built from the same key produce bitwise-identical sequences, and
parallel units (chains, folds, replicates) each derive their own stream so
results never depend on scheduling order.
"""

from __future__ import annotations

import numpy as np
from scipy.linalg import solve_triangular
from scipy.special import ndtr, ndtri

from .errors import NumericalError

# Interval endpoints further than this many sd from the mean are handled by
# tail rejection instead of inverse-CDF (which loses precision out there).
_TAIL_CUTOFF = 5.0

# Cholesky jitter escalation: start at 1e-10 * trace/k, multiply by 10 until
# 1e-6 * trace/k, then give up loudly.
_JITTER_START = 1e-10
_JITTER_LIMIT = 1e-6


class SeededStream:
    """Deterministic random stream keyed by a master seed plus a lineage.

    ``derive(i, j, ...)`` produces an independent child stream; the mapping
    from (seed, lineage) to the draw sequence is stable across runs and
    platforms, which is what makes parallel chains/folds reproducible.
    """

    def __init__(self, seed: int, lineage: tuple = ()):
        self.seed = int(seed)
        self.lineage = tuple(int(i) for i in lineage)
        self.counter = 0
        ss = np.random.SeedSequence(entropy=self.seed, spawn_key=self.lineage)
        self._gen = np.random.Generator(np.random.PCG64(ss))

    def derive(self, *indices: int) -> "SeededStream":
        return SeededStream(self.seed, self.lineage + tuple(indices))

    def _count(self, size) -> None:
        self.counter += 1 if size is None else int(np.prod(size))

    def standard_normal(self, size=None):
        self._count(size)
        return self._gen.standard_normal(size)

    def uniform(self, low=0.0, high=1.0, size=None):
        self._count(size)
        return self._gen.uniform(low, high, size)

    def gamma(self, shape, scale=1.0, size=None):
        self._count(size)
        return self._gen.gamma(shape, scale, size)

    def chisquare(self, df, size=None):
        self._count(size)
        return self._gen.chisquare(df, size)

    def permutation(self, n: int):
        self.counter += int(n)
        return self._gen.permutation(n)

    def __repr__(self):
        return f"SeededStream(seed={self.seed}, lineage={self.lineage}, counter={self.counter})"


def cholesky_with_jitter(cov: np.ndarray) -> np.ndarray:
    """Lower Cholesky factor, escalating diagonal jitter on failure.

    Jitter starts at 1e-10*trace/k and grows tenfold per retry; past
    1e-6*trace/k the failure is considered real and raised.
    """
    cov = np.asarray(cov, dtype=float)
    k = cov.shape[0]
    base = np.trace(cov) / k
    jitter = 0.0
    while True:
        try:
            return np.linalg.cholesky(cov + jitter * np.eye(k))
        except np.linalg.LinAlgError:
            if base <= 0:
                raise NumericalError(
                    "covariance is not positive definite and has non-positive trace"
                )
            if jitter == 0.0:
                jitter = _JITTER_START * base
            elif jitter < _JITTER_LIMIT * base:
                jitter = min(jitter * 10.0, _JITTER_LIMIT * base)
            else:
                raise NumericalError(
                    f"Cholesky failed after jitter escalation to {jitter:.3e}"
                )


def draw_mvnormal(mean, cov, stream: SeededStream) -> np.ndarray:
    """One draw from N(mean, cov); cov must be SPD up to jitter tolerance."""
    mean = np.asarray(mean, dtype=float)
    L = cholesky_with_jitter(cov)
    z = stream.standard_normal(mean.shape[0])
    return mean + L @ z


def _robert_tail(a, b, stream: SeededStream) -> np.ndarray:
    """Rejection sampler for a standard normal restricted to [a, b], a >= 0.

    Translated-exponential proposal (Robert 1995); used where the interval
    sits in the far right tail and inverse-CDF precision degrades.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    out = np.empty_like(a)
    pending = np.ones(a.shape, dtype=bool)
    lam = (a + np.sqrt(a * a + 4.0)) / 2.0
    while pending.any():
        idx = np.nonzero(pending)[0]
        u1 = stream.uniform(size=idx.size)
        x = a[idx] - np.log1p(-u1) / lam[idx]
        u2 = stream.uniform(size=idx.size)
        ok = (x <= b[idx]) & (np.log(u2) <= -0.5 * (x - lam[idx]) ** 2)
        out[idx[ok]] = x[ok]
        pending[idx[ok]] = False
    return out


def draw_truncated_normal(mean, sd, lower, upper, stream: SeededStream):
    """Draws from N(mean, sd^2) truncated to (lower, upper).

    Fully vectorized; inputs broadcast.  Body intervals use the inverse CDF
    (worked on whichever side keeps the uniform away from 1); intervals
    entirely beyond 5 sd use exponential tail rejection.
    """
    mean = np.asarray(mean, dtype=float)
    sd = np.asarray(sd, dtype=float)
    lower = np.asarray(lower, dtype=float)
    upper = np.asarray(upper, dtype=float)
    scalar = mean.ndim == 0 and sd.ndim == 0 and lower.ndim == 0 and upper.ndim == 0
    mean, sd, lower, upper = np.broadcast_arrays(mean, sd, lower, upper)
    if np.any(sd <= 0):
        raise ValueError("sd must be positive")
    if np.any(~(lower < upper)):
        raise ValueError("truncation interval must have lower < upper")

    a = (lower - mean) / sd
    b = (upper - mean) / sd
    shape = a.shape
    a = a.ravel()
    b = b.ravel()
    z = np.empty(a.shape, dtype=float)

    right = a > _TAIL_CUTOFF
    left = b < -_TAIL_CUTOFF
    body = ~(right | left)

    if body.any():
        ab, bb = a[body], b[body]
        # Mirror so the interval's heavier side maps near u=0, where ndtri
        # keeps full precision.
        flip = (ab + bb) > 0
        lo = np.where(flip, -bb, ab)
        hi = np.where(flip, -ab, bb)
        Fl = ndtr(lo)
        Fh = ndtr(hi)
        u = Fl + stream.uniform(size=lo.size) * (Fh - Fl)
        # Guard: interval mass can underflow to a point in extreme settings.
        u = np.clip(u, np.nextafter(0.0, 1.0), np.nextafter(1.0, 0.0))
        x = ndtri(u)
        x = np.clip(x, lo, hi)
        z[body] = np.where(flip, -x, x)
    if right.any():
        z[right] = _robert_tail(a[right], b[right], stream)
    if left.any():
        z[left] = -_robert_tail(-b[left], -a[left], stream)

    out = (mean.ravel() + sd.ravel() * z).reshape(shape)
    # Open-interval contract: nudge any draw that landed on a bound.
    np.clip(out, np.nextafter(lower, upper), np.nextafter(upper, lower), out=out)
    return float(out) if scalar else out


def draw_inverse_wishart(scale, dof: float, stream: SeededStream) -> np.ndarray:
    """Bartlett-construction draw from an inverse-Wishart(scale, dof).

    Parametrized so that the mean is scale/(dof - d - 1) when dof > d + 1.
    Requires dof > d - 1 and an SPD scale matrix.
    """
    scale = np.asarray(scale, dtype=float)
    d = scale.shape[0]
    if dof <= d - 1:
        raise ValueError(f"dof must exceed dim - 1 = {d - 1}, got {dof}")
    scale_inv = _spd_inverse(scale)
    L = cholesky_with_jitter(scale_inv)
    A = np.zeros((d, d))
    for i in range(d):
        A[i, i] = np.sqrt(stream.chisquare(dof - i))
    if d > 1:
        tri = np.tril_indices(d, k=-1)
        A[tri] = stream.standard_normal(len(tri[0]))
    # W = (L A)(L A)^T ~ Wishart(dof, scale^{-1}); the inverse-Wishart draw
    # is W^{-1}, computed via triangular solves for stability.
    LA = L @ A
    inv_LA = solve_triangular(LA, np.eye(d), lower=True)
    X = inv_LA.T @ inv_LA
    return (X + X.T) / 2.0


def _spd_inverse(m: np.ndarray) -> np.ndarray:
    L = cholesky_with_jitter(m)
    inv_L = solve_triangular(L, np.eye(m.shape[0]), lower=True)
    return inv_L.T @ inv_L


def draw_inverse_gamma(shape: float, rate: float, stream: SeededStream, size=None):
    """Draw from inverse-gamma with mean rate/(shape-1) for shape > 1."""
    if shape <= 0 or rate <= 0:
        raise ValueError("shape and rate must be positive")
    g = stream.gamma(shape, 1.0 / rate, size=size)
    return 1.0 / g
