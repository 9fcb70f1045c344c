"""Full conditionals for the additive (social relations) part of the model.

The dyadic decomposition is  r_ij = a_i + b_j + eps_ij  with
(a_i, b_i) ~ iid N(0, Sigma_ab) and within-pair errors
(eps_ij, eps_ji) ~ iid N(0, sigma_eps2 * [[1, rho], [rho, 1]]).

The joint (a, b) draw works in per-node sum/difference coordinates
s_i = a_i + b_i, d_i = a_i - b_i: the pair-sum equations involve only s, the
pair-difference equations only d, and the two error components are
independent with variances 2*sigma_eps2*(1 +/- rho).  The prior still couples
s_i and d_i, so the 2n-dimensional conditional is assembled and solved
exactly.  Cells whose mirror is missing are dropped (complete-pair analysis).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor, cho_solve, solve_triangular
from scipy.special import ndtr

from .errors import DataError
from .randkit import SeededStream, cholesky_with_jitter, draw_inverse_gamma, \
    draw_inverse_wishart, draw_truncated_normal


@dataclass(frozen=True)
class AdditiveEffects:
    a: np.ndarray  # sender effects
    b: np.ndarray  # receiver effects

    def __post_init__(self):
        if self.a.shape != self.b.shape or self.a.ndim != 1:
            raise DataError("a and b must be equal-length vectors")
        if not (np.all(np.isfinite(self.a)) and np.all(np.isfinite(self.b))):
            raise DataError("additive effects must be finite")

    @property
    def n(self) -> int:
        return self.a.shape[0]

    def outer_sum(self) -> np.ndarray:
        """Matrix with entries a_i + b_j."""
        return self.a[:, None] + self.b[None, :]


@dataclass(frozen=True)
class SrmCovariance:
    sigma_a2: float
    sigma_b2: float
    sigma_ab: float
    rho: float
    sigma_eps2: float

    def __post_init__(self):
        if not abs(self.rho) < 1:
            raise DataError(f"|rho| must be < 1, got {self.rho}")
        if self.sigma_eps2 <= 0:
            raise DataError("sigma_eps2 must be positive")
        m = self.ab_matrix()
        if self.sigma_a2 < 0 or self.sigma_b2 < 0 or np.linalg.det(m) < -1e-12:
            raise DataError("Sigma_ab must be positive semidefinite")

    def ab_matrix(self) -> np.ndarray:
        return np.array(
            [[self.sigma_a2, self.sigma_ab], [self.sigma_ab, self.sigma_b2]]
        )

    def replace(self, **kw) -> "SrmCovariance":
        d = dict(
            sigma_a2=self.sigma_a2,
            sigma_b2=self.sigma_b2,
            sigma_ab=self.sigma_ab,
            rho=self.rho,
            sigma_eps2=self.sigma_eps2,
        )
        d.update(kw)
        return SrmCovariance(**d)


def complete_pair_mask(residual: np.ndarray) -> np.ndarray:
    """Off-diagonal cells whose mirror cell is also observed."""
    obs = np.isfinite(residual)
    np.fill_diagonal(obs, False)
    return obs & obs.T


def sample_additive_effects(
    residual: np.ndarray, cov: SrmCovariance, stream: SeededStream
) -> AdditiveEffects:
    """Joint draw of (a, b) from their exact 2n-dimensional full conditional."""
    n = residual.shape[0]
    complete = complete_pair_mask(residual)
    r = np.where(complete, residual, 0.0)

    v_s = 2.0 * cov.sigma_eps2 * (1.0 + cov.rho)
    v_d = 2.0 * cov.sigma_eps2 * (1.0 - cov.rho)

    # Prior on (s_i, d_i) = T (a_i, b_i) with T = [[1, 1], [1, -1]].
    T = np.array([[1.0, 1.0], [1.0, -1.0]])
    omega = T @ cov.ab_matrix() @ T.T
    L_om = cholesky_with_jitter(omega)
    inv_L = solve_triangular(L_om, np.eye(2), lower=True)
    omega_inv = inv_L.T @ inv_L

    pairs_per_node = complete.sum(axis=1).astype(float)
    cfloat = complete.astype(float)

    P = np.zeros((2 * n, 2 * n))
    P[:n, :n] = (np.diag(pairs_per_node) + cfloat) / v_s
    P[n:, n:] = (np.diag(pairs_per_node) - cfloat) / v_d
    P[:n, :n] += omega_inv[0, 0] * np.eye(n)
    P[n:, n:] += omega_inv[1, 1] * np.eye(n)
    P[:n, n:] = omega_inv[0, 1] * np.eye(n)
    P[n:, :n] = omega_inv[1, 0] * np.eye(n)

    lin = np.concatenate([(r + r.T).sum(axis=1) / v_s, (r - r.T).sum(axis=1) / v_d])

    L = cholesky_with_jitter(P)
    factor = (L, True)
    mean = cho_solve(factor, lin)
    z = stream.standard_normal(2 * n)
    draw = mean + solve_triangular(L.T, z, lower=False)

    s, d = draw[:n], draw[n:]
    return AdditiveEffects(a=(s + d) / 2.0, b=(s - d) / 2.0)


def sample_cov_ab(
    effects: AdditiveEffects, prior: tuple, stream: SeededStream
) -> np.ndarray:
    """Inverse-Wishart draw for Sigma_ab given the current (a, b)."""
    S0, nu0 = prior
    S0 = np.asarray(S0, dtype=float)
    ab = np.column_stack([effects.a, effects.b])
    scale = S0 + ab.T @ ab
    return draw_inverse_wishart(scale, nu0 + effects.n, stream)


def _rho_loglik(rho: float, s11: float, s12: float, m: int, sigma_eps2: float) -> float:
    # Bivariate-normal likelihood of m error pairs, constants dropped.
    om = 1.0 - rho * rho
    return -0.5 * m * np.log(om) - (s11 - 2.0 * rho * s12) / (2.0 * sigma_eps2 * om)


def _truncnorm_logpdf(x: float, center: float, sd: float) -> float:
    z = (x - center) / sd
    mass = ndtr((1.0 - center) / sd) - ndtr((-1.0 - center) / sd)
    return -0.5 * z * z - np.log(sd) - np.log(mass)


def sample_rho(
    dyadic_residuals: np.ndarray,
    rho_current: float,
    sigma_eps2: float,
    proposal_sd: float,
    stream: SeededStream,
) -> tuple:
    """Metropolis-Hastings update of the reciprocity correlation.

    ``dyadic_residuals`` is an (m, 2) array of complete (eps_ij, eps_ji)
    pairs.  The proposal is a normal truncated to (-1, 1); its asymmetry is
    corrected with the truncated proposal densities.  Returns
    (rho_new, accepted).
    """
    if not abs(rho_current) < 1:
        raise DataError("|rho_current| must be < 1")
    pairs = np.asarray(dyadic_residuals, dtype=float).reshape(-1, 2)
    m = pairs.shape[0]
    s11 = float((pairs * pairs).sum())
    s12 = float((pairs[:, 0] * pairs[:, 1]).sum())

    prop = float(draw_truncated_normal(rho_current, proposal_sd, -1.0, 1.0, stream))
    log_alpha = (
        _rho_loglik(prop, s11, s12, m, sigma_eps2)
        - _rho_loglik(rho_current, s11, s12, m, sigma_eps2)
        + _truncnorm_logpdf(rho_current, prop, proposal_sd)
        - _truncnorm_logpdf(prop, rho_current, proposal_sd)
    )
    if np.log(stream.uniform()) < log_alpha:
        return prop, True
    return rho_current, False


def sample_sigma_eps2(
    dyadic_residuals: np.ndarray,
    rho: float,
    prior: tuple,
    stream: SeededStream,
    family: str = "gaussian",
) -> float:
    """Conjugate inverse-gamma draw for the dyadic variance (gaussian only).

    Under the binary (probit) family the scale is not identified and is
    fixed at 1, so calling this is an error.
    """
    if family == "binary":
        raise DataError("sigma_eps2 is fixed at 1 under the binary (probit) family")
    shape0, rate0 = prior
    pairs = np.asarray(dyadic_residuals, dtype=float).reshape(-1, 2)
    m = pairs.shape[0]
    if m == 0:
        return float(draw_inverse_gamma(shape0, rate0, stream))
    e1, e2 = pairs[:, 0], pairs[:, 1]
    quad = float(((e1 * e1) - 2.0 * rho * e1 * e2 + (e2 * e2)).sum() / (1.0 - rho * rho))
    return float(draw_inverse_gamma(shape0 + m, rate0 + quad / 2.0, stream))


def residual_pairs(residual: np.ndarray) -> np.ndarray:
    """Extract complete (eps_ij, eps_ji) pairs, one row per unordered pair."""
    complete = complete_pair_mask(residual)
    iu, ju = np.triu_indices(residual.shape[0], k=1)
    keep = complete[iu, ju]
    return np.column_stack([residual[iu[keep], ju[keep]], residual[ju[keep], iu[keep]]])
