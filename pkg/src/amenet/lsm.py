"""Minimal Bayesian latent space (distance) model comparator.

eta_ij = beta' x_ij - |Z_i - Z_j| (+ a_i + b_j with the SR variant).  Binary
outcomes via probit augmentation with independent unit-variance errors;
positions move by per-node random-walk Metropolis.  This is deliberately a
small comparator, not a full latent-space toolkit.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass

import numpy as np
from joblib import Parallel, delayed
from scipy.linalg import cho_solve, solve_triangular
from scipy.spatial.distance import cdist
from scipy.special import ndtr

from . import netdata, srm
from .ame import PosteriorSamples, _config_dict, _zeroed_design
from .errors import DataError, NumericalError
from .randkit import SeededStream, cholesky_with_jitter, draw_truncated_normal


@dataclass(frozen=True)
class LsmConfig:
    K: int = 2
    with_sr_effects: bool = False
    burn: int = 5000
    iterations: int = 15000
    thin: int = 10
    seed: int = 0
    chains: int = 1
    beta_prior_var: float = 100.0
    z_prior_var: float = 4.0
    proposal_sd: float = 0.1
    S0: np.ndarray | None = None
    nu0: float = 4.0
    n_jobs: int = 1

    def __post_init__(self):
        if self.K < 1:
            raise DataError("LSM needs K >= 1 latent dimensions")
        if self.iterations <= self.burn:
            raise DataError("iterations must exceed burn")
        if self.thin < 1 or self.chains < 1:
            raise DataError("thin and chains must be >= 1")
        for name in ("beta_prior_var", "z_prior_var", "proposal_sd"):
            if getattr(self, name) <= 0:
                raise DataError(f"{name} must be positive")

    def s0_matrix(self) -> np.ndarray:
        return np.eye(2) if self.S0 is None else np.asarray(self.S0, dtype=float)


def lsm_predictor(
    Z: np.ndarray,
    beta: np.ndarray,
    X: netdata.DesignArray,
    effects: srm.AdditiveEffects | None = None,
) -> np.ndarray:
    """eta_ij = beta' x_ij - |Z_i - Z_j| (+ a_i + b_j when effects given)."""
    eta = _zeroed_design(X) @ beta - cdist(Z, Z)
    if effects is not None:
        eta = eta + effects.outer_sum()
    return eta


def _spectral_start(Y: netdata.Network, K: int) -> np.ndarray:
    """Warm start from the top eigenvectors of the symmetrized adjacency."""
    a = np.where(np.isfinite(Y.cells), Y.cells, 0.0)
    s = (a + a.T) / 2.0
    s -= s.mean()
    vals, vecs = np.linalg.eigh(s)
    order = np.argsort(-np.abs(vals))[:K]
    return vecs[:, order] * np.sqrt(np.abs(vals[order]))[None, :]


def _run_chain(Y, X, config: LsmConfig, chain_idx: int, lineage: tuple):
    stream = SeededStream(config.seed, lineage + (chain_idx,))
    n = Y.n
    Xz = _zeroed_design(X)
    iu = ~np.eye(n, dtype=bool)
    Xmat = Xz[iu]  # (n(n-1), P) stacked rows for the beta update
    gram = Xmat.T @ Xmat
    y = Y.cells
    lo = np.where(y == 1.0, 0.0, -np.inf)[iu]
    hi = np.where(y == 0.0, 0.0, np.inf)[iu]

    Z = _spectral_start(Y, config.K) + 0.1 * stream.standard_normal((n, config.K))
    beta = np.zeros(X.p)
    effects = srm.AdditiveEffects(np.zeros(n), np.zeros(n))
    cov = srm.SrmCovariance(1.0, 1.0, 0.0, 0.0, 1.0)
    theta = np.where(np.isfinite(y), np.where(y == 1.0, 0.5, -0.5), 0.0)
    np.fill_diagonal(theta, np.nan)

    kept = (config.iterations - config.burn) // config.thin
    rec = {
        "beta": np.empty((kept, X.p)),
        "Z": np.empty((kept, n, config.K)),
        "a": np.empty((kept, n)),
        "b": np.empty((kept, n)),
        "sigma_a2": np.empty(kept),
        "sigma_b2": np.empty(kept),
        "sigma_ab": np.empty(kept),
    }
    prob_sum = np.zeros((n, n))
    z_props = 0
    z_accepts = 0
    k = 0

    P_beta = gram + np.eye(X.p) / config.beta_prior_var
    L_beta = cholesky_with_jitter(P_beta)

    for t in range(1, config.iterations + 1):
        dist = cdist(Z, Z)
        eta = Xz @ beta - dist + effects.outer_sum()

        # theta | rest: independent truncated normals.
        theta[iu] = draw_truncated_normal(eta[iu], 1.0, lo, hi, stream)

        # beta | rest: conjugate normal on theta + dist - (a + b).
        resid = (theta + dist - effects.outer_sum())[iu]
        mean = cho_solve((L_beta, True), Xmat.T @ resid)
        beta = mean + solve_triangular(
            L_beta.T, stream.standard_normal(X.p), lower=False
        )

        # Z | rest: random-walk Metropolis, one node at a time.
        xb = Xz @ beta
        ab = effects.outer_sum()
        for i in range(n):
            prop = Z[i] + config.proposal_sd * stream.standard_normal(config.K)
            d_cur = np.sqrt(((Z - Z[i]) ** 2).sum(axis=1))
            d_new = np.sqrt(((Z - prop) ** 2).sum(axis=1))
            d_cur[i] = d_new[i] = 0.0
            mu_row_cur = xb[i] - d_cur + ab[i]
            mu_row_new = xb[i] - d_new + ab[i]
            mu_col_cur = xb[:, i] - d_cur + ab[:, i]
            mu_col_new = xb[:, i] - d_new + ab[:, i]
            mask = np.ones(n, dtype=bool)
            mask[i] = False
            dlog = -0.5 * (
                ((theta[i] - mu_row_new)[mask] ** 2).sum()
                - ((theta[i] - mu_row_cur)[mask] ** 2).sum()
                + ((theta[:, i] - mu_col_new)[mask] ** 2).sum()
                - ((theta[:, i] - mu_col_cur)[mask] ** 2).sum()
            )
            dlog -= (prop @ prop - Z[i] @ Z[i]) / (2.0 * config.z_prior_var)
            z_props += 1
            if np.log(stream.uniform()) < dlog:
                Z[i] = prop
                z_accepts += 1

        if config.with_sr_effects:
            dist = cdist(Z, Z)
            effects = srm.sample_additive_effects(theta - (Xz @ beta) + dist, cov, stream)
            sig = srm.sample_cov_ab(effects, (config.s0_matrix(), config.nu0), stream)
            cov = cov.replace(
                sigma_a2=float(sig[0, 0]),
                sigma_b2=float(sig[1, 1]),
                sigma_ab=float(sig[0, 1]),
            )

        if t > config.burn and (t - config.burn) % config.thin == 0:
            rec["beta"][k] = beta
            rec["Z"][k] = Z
            rec["a"][k] = effects.a
            rec["b"][k] = effects.b
            rec["sigma_a2"][k] = cov.sigma_a2 if config.with_sr_effects else 0.0
            rec["sigma_b2"][k] = cov.sigma_b2 if config.with_sr_effects else 0.0
            rec["sigma_ab"][k] = cov.sigma_ab if config.with_sr_effects else 0.0
            eta = Xz @ beta - cdist(Z, Z) + effects.outer_sum()
            prob_sum += ndtr(eta)
            k += 1

    stats = {"z_proposals": z_props, "z_accepts": z_accepts}
    return rec, stats, prob_sum, kept


def fit_lsm(
    Y: netdata.Network,
    X: netdata.DesignArray | None = None,
    config: LsmConfig | None = None,
    _lineage: tuple = (),
) -> PosteriorSamples:
    """Fit the latent space comparator; binary networks only."""
    config = config or LsmConfig()
    if X is None:
        X = netdata.intercept_design(Y.n)
    netdata.check_design(Y, X)
    if Y.family != "binary":
        raise DataError("the latent space comparator supports binary networks only")

    chain_ids = list(range(config.chains))
    if config.chains > 1 and config.n_jobs != 1:
        results = Parallel(n_jobs=config.n_jobs)(
            delayed(_run_chain)(Y, X, config, c, _lineage) for c in chain_ids
        )
    else:
        results = [_run_chain(Y, X, config, c, _lineage) for c in chain_ids]

    draws = {
        key: np.concatenate([r[0][key] for r in results], axis=0)
        for key in results[0][0]
    }
    chain = np.concatenate([np.full(r[3], c, dtype=int) for c, r in zip(chain_ids, results)])
    total_kept = int(chain.shape[0])
    prob_mean = sum(r[2] for r in results) / total_kept
    np.fill_diagonal(prob_mean, np.nan)
    props = sum(r[1]["z_proposals"] for r in results)
    accepts = sum(r[1]["z_accepts"] for r in results)

    return PosteriorSamples(
        kind="lsm",
        network=Y,
        design_names=X.names,
        config=_config_dict(config),
        draws=draws,
        chain=chain,
        prob_mean=prob_mean,
        mult_mean=None,
        theta_mean=None,
        accept={"z": accepts / props if props else float("nan")},
    )


def predictor_from_draw(samples: PosteriorSamples, idx: int, X: netdata.DesignArray) -> np.ndarray:
    d = samples.draws
    Z = d["Z"][idx]
    eta = _zeroed_design(X) @ d["beta"][idx] - cdist(Z, Z)
    eta += d["a"][idx][:, None] + d["b"][idx][None, :]
    return eta
