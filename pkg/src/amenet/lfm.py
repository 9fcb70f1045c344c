"""Multiplicative-effects (bilinear latent factor) conditionals and geometry.

The directed multiplicative term is u_i' D v_j.  Estimation uses the
absorbed form: D is held at ones and the receiver factors carry the scale,
so the invariant object is always the product U diag(D) V'.  Reporting
recovers an explicit D by SVD of the posterior-mean product.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_solve, solve_triangular

from .errors import DataError
from .randkit import SeededStream, cholesky_with_jitter


@dataclass(frozen=True)
class LatentFactors:
    U: np.ndarray  # n x K sender factors
    V: np.ndarray  # n x K receiver factors
    D: np.ndarray  # K diagonal scaling

    def __post_init__(self):
        if self.U.shape != self.V.shape or self.U.ndim != 2:
            raise DataError("U and V must be n x K matrices")
        if self.D.shape != (self.U.shape[1],):
            raise DataError("D must be a K-vector")
        for arr in (self.U, self.V, self.D):
            if not np.all(np.isfinite(arr)):
                raise DataError("latent factors must be finite")

    @property
    def n(self) -> int:
        return self.U.shape[0]

    @property
    def K(self) -> int:
        return self.U.shape[1]


def zero_factors(n: int, K: int) -> LatentFactors:
    return LatentFactors(np.zeros((n, K)), np.zeros((n, K)), np.ones(K))


def multiplicative_predictor(factors: LatentFactors) -> np.ndarray:
    """Matrix with entries sum_k D_k U_ik V_jk (K=0 gives zeros)."""
    if factors.K == 0:
        return np.zeros((factors.n, factors.n))
    return (factors.U * factors.D[None, :]) @ factors.V.T


def _sample_bilinear_column(
    M: np.ndarray,
    w: np.ndarray,
    prior_var: float,
    rho: float,
    sigma_eps2: float,
    stream: SeededStream,
) -> np.ndarray:
    """Draw x from its conditional in the model M_ij = x_i w_j + eps_ij.

    Error pairs (eps_ij, eps_ji) have correlation rho and variance
    sigma_eps2; cells whose mirror is missing enter with the marginal
    variance; missing cells drop out entirely.
    """
    n = M.shape[0]
    obs = np.isfinite(M)
    np.fill_diagonal(obs, False)
    complete = obs & obs.T
    single = obs & ~obs.T
    Mc = np.where(complete, M, 0.0)

    c = 1.0 / (sigma_eps2 * (1.0 - rho * rho))
    w2 = w * w

    P = np.diag(c * complete @ w2 + 1.0 / prior_var)
    P -= (c * rho) * (np.outer(w, w) * complete)
    lin = c * ((Mc - rho * Mc.T) * complete) @ w
    if single.any():
        Ms = np.where(single, M, 0.0)
        P[np.diag_indices(n)] += (single @ w2) / sigma_eps2
        lin += (Ms @ w) / sigma_eps2

    L = cholesky_with_jitter(P)
    mean = cho_solve((L, True), lin)
    return mean + solve_triangular(L.T, stream.standard_normal(n), lower=False)


def sample_factors(
    residual: np.ndarray,
    factors: LatentFactors,
    prior_var: float,
    stream: SeededStream,
    rho: float = 0.0,
    sigma_eps2: float = 1.0,
) -> LatentFactors:
    """Column-wise Gibbs update of the latent factors in absorbed form.

    For each k the sender column U[:, k] is drawn from its normal full
    conditional holding everything else fixed, then the (scale-carrying)
    receiver column V[:, k].  Sender entries have prior variance
    ``prior_var``; receiver columns absorb the diagonal scale and carry its
    N(0, n * prior_var) prior.  Returned D is ones; the product
    U diag(D) V' is the invariant object.
    """
    K = factors.K
    if K == 0:
        return factors
    n = factors.n
    U = factors.U.copy()
    V = factors.V * factors.D[None, :]  # absorb any incoming scale
    prior_var_v = prior_var * n

    for k in range(K):
        others = [l for l in range(K) if l != k]
        partial = residual - U[:, others] @ V[:, others].T
        U[:, k] = _sample_bilinear_column(
            partial, V[:, k], prior_var, rho, sigma_eps2, stream
        )
        V[:, k] = _sample_bilinear_column(
            partial.T, U[:, k], prior_var_v, rho, sigma_eps2, stream
        )
    return LatentFactors(U, V, np.ones(K))


def reconstruct_factors(product_mean: np.ndarray, K: int) -> LatentFactors:
    """Rank-K SVD of a posterior-mean product matrix, D as singular values.

    Per-draw factors rotate freely across the chain, so interpretable
    geometry must come from the (rotation-invariant) mean product.
    """
    if K < 1:
        raise DataError("K must be at least 1 to reconstruct factors")
    m = np.where(np.isfinite(product_mean), product_mean, 0.0)
    u, s, vt = np.linalg.svd(m)
    return LatentFactors(u[:, :K], vt[:K].T, s[:K])


@dataclass(frozen=True)
class FactorGeometry:
    """Circle-plot geometry: per-node angles/magnitudes plus flagged dyads."""

    sender_angle: np.ndarray
    sender_magnitude: np.ndarray
    receiver_angle: np.ndarray
    receiver_magnitude: np.ndarray
    score: np.ndarray  # n x n multiplicative predictor (excess association)
    baseline: np.ndarray | None  # n x n regression + additive fit, if given
    threshold: float
    flagged: list  # (i, j) dyads with score above threshold


def export_factor_geometry(
    posterior_mean_factors: LatentFactors,
    additive_fit: np.ndarray | None = None,
    threshold: float | None = None,
) -> FactorGeometry:
    """Angles/magnitudes from the first two factor columns, plus excess dyads.

    Needs K >= 2.  The default threshold flags dyads whose multiplicative
    predictor exceeds the 90th percentile of off-diagonal values.
    """
    f = posterior_mean_factors
    if f.K < 2:
        raise DataError("factor geometry needs K >= 2")
    su = f.U[:, :2] * np.sqrt(f.D[:2])[None, :]
    sv = f.V[:, :2] * np.sqrt(f.D[:2])[None, :]
    score = multiplicative_predictor(f)
    off = ~np.eye(f.n, dtype=bool)
    if threshold is None:
        threshold = float(np.quantile(score[off], 0.9))
    flagged = [tuple(ij) for ij in np.argwhere((score > threshold) & off)]
    return FactorGeometry(
        sender_angle=np.mod(np.arctan2(su[:, 1], su[:, 0]), 2.0 * np.pi),
        sender_magnitude=np.linalg.norm(su, axis=1),
        receiver_angle=np.mod(np.arctan2(sv[:, 1], sv[:, 0]), 2.0 * np.pi),
        receiver_magnitude=np.linalg.norm(sv, axis=1),
        score=score,
        baseline=additive_fit,
        threshold=threshold,
        flagged=flagged,
    )


def render_circle_plot(geometry: FactorGeometry, labels, size: int = 600) -> str:
    """Deterministic SVG: nodes on a circle by angle, radius by magnitude,
    dashed chords for dyads above the excess-association threshold."""
    cx = cy = size / 2.0
    max_mag = max(
        float(geometry.sender_magnitude.max(initial=0.0)),
        float(geometry.receiver_magnitude.max(initial=0.0)),
        1e-12,
    )
    base_r = size * 0.38

    def pos(angle, mag):
        r = base_r * (0.35 + 0.65 * mag / max_mag)
        return cx + r * np.cos(angle), cy - r * np.sin(angle)

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" '
        f'viewBox="0 0 {size} {size}">',
        f'<circle cx="{cx}" cy="{cy}" r="{base_r}" fill="none" stroke="#cccccc"/>',
    ]
    send_xy = []
    for i, lab in enumerate(labels):
        x, y = pos(geometry.sender_angle[i], geometry.sender_magnitude[i])
        send_xy.append((x, y))
    for i, j in geometry.flagged:
        x1, y1 = send_xy[i]
        x2, y2 = send_xy[j]
        parts.append(
            f'<line x1="{x1:.2f}" y1="{y1:.2f}" x2="{x2:.2f}" y2="{y2:.2f}" '
            f'stroke="#888888" stroke-dasharray="4 3" stroke-width="1"/>'
        )
    for i, lab in enumerate(labels):
        x, y = send_xy[i]
        rx, ry = pos(geometry.receiver_angle[i], geometry.receiver_magnitude[i])
        ms = 2.0 + 5.0 * geometry.sender_magnitude[i] / max_mag
        mr = 2.0 + 5.0 * geometry.receiver_magnitude[i] / max_mag
        parts.append(f'<circle cx="{x:.2f}" cy="{y:.2f}" r="{ms:.2f}" fill="#4477aa"/>')
        parts.append(f'<circle cx="{rx:.2f}" cy="{ry:.2f}" r="{mr:.2f}" fill="#aa4444"/>')
        parts.append(
            f'<text x="{x + 4:.2f}" y="{y - 4:.2f}" font-size="9" fill="#222222">{lab}</text>'
        )
    parts.append("</svg>")
    return "\n".join(parts)
