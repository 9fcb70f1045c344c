"""Estimator facades over the samplers, following the scikit-learn protocol.

Each estimator takes its hyperparameters in ``__init__`` (so ``get_params``
and ``clone`` work), fits against a :class:`~amenet.netdata.Network` plus an
optional :class:`~amenet.netdata.DesignArray`, and exposes in-sample
probability matrices through ``predict_proba``.
"""

from __future__ import annotations

import numpy as np
import pandas as pd
from sklearn.base import BaseEstimator
from sklearn.exceptions import NotFittedError

from . import ame, glmbase, lfm, lsm, netdata


class AmeEstimator(BaseEstimator):
    """Additive-and-multiplicative-effects network model."""

    def __init__(
        self,
        K=2,
        family="binary",
        burn=5000,
        iterations=15000,
        thin=10,
        seed=0,
        chains=1,
        beta_prior_var=100.0,
        nu0=4.0,
        ig_shape0=1.0,
        ig_rate0=1.0,
        factor_prior_var=1.0,
        rho_proposal_sd=None,
        additive_effects=True,
        estimate_rho=True,
        n_jobs=1,
    ):
        self.K = K
        self.family = family
        self.burn = burn
        self.iterations = iterations
        self.thin = thin
        self.seed = seed
        self.chains = chains
        self.beta_prior_var = beta_prior_var
        self.nu0 = nu0
        self.ig_shape0 = ig_shape0
        self.ig_rate0 = ig_rate0
        self.factor_prior_var = factor_prior_var
        self.rho_proposal_sd = rho_proposal_sd
        self.additive_effects = additive_effects
        self.estimate_rho = estimate_rho
        self.n_jobs = n_jobs

    def _config(self) -> ame.FitConfig:
        return ame.FitConfig(
            K=self.K,
            family=self.family,
            burn=self.burn,
            iterations=self.iterations,
            thin=self.thin,
            seed=self.seed,
            chains=self.chains,
            beta_prior_var=self.beta_prior_var,
            nu0=self.nu0,
            ig_shape0=self.ig_shape0,
            ig_rate0=self.ig_rate0,
            factor_prior_var=self.factor_prior_var,
            rho_proposal_sd=self.rho_proposal_sd,
            additive_effects=self.additive_effects,
            estimate_rho=self.estimate_rho,
            n_jobs=self.n_jobs,
        )

    def fit(self, Y: netdata.Network, X: netdata.DesignArray | None = None):
        self.samples_ = ame.fit(Y, X, self._config())
        return self

    def _check_fitted(self):
        if not hasattr(self, "samples_"):
            raise NotFittedError("call fit first")

    def predict_proba(self) -> np.ndarray:
        self._check_fitted()
        return ame.predict_proba(self.samples_)

    def predict_theta(self) -> np.ndarray:
        self._check_fitted()
        return ame.posterior_theta_mean(self.samples_)

    def summary(self) -> pd.DataFrame:
        self._check_fitted()
        return ame.posterior_summary(self.samples_)

    def diagnostics(self) -> pd.DataFrame:
        self._check_fitted()
        return ame.diagnostics(self.samples_)

    def factor_geometry(self, X=None, threshold=None) -> lfm.FactorGeometry:
        self._check_fitted()
        factors = lfm.reconstruct_factors(self.samples_.mult_mean, self.K)
        baseline = ame.additive_fit_mean(self.samples_, X) if X is not None else None
        return lfm.export_factor_geometry(factors, baseline, threshold)


class LsmEstimator(BaseEstimator):
    """Latent space (negative Euclidean distance) comparator."""

    def __init__(
        self,
        K=2,
        with_sr_effects=False,
        burn=5000,
        iterations=15000,
        thin=10,
        seed=0,
        chains=1,
        beta_prior_var=100.0,
        z_prior_var=4.0,
        proposal_sd=0.1,
        nu0=4.0,
        n_jobs=1,
    ):
        self.K = K
        self.with_sr_effects = with_sr_effects
        self.burn = burn
        self.iterations = iterations
        self.thin = thin
        self.seed = seed
        self.chains = chains
        self.beta_prior_var = beta_prior_var
        self.z_prior_var = z_prior_var
        self.proposal_sd = proposal_sd
        self.nu0 = nu0
        self.n_jobs = n_jobs

    def _config(self) -> lsm.LsmConfig:
        return lsm.LsmConfig(
            K=self.K,
            with_sr_effects=self.with_sr_effects,
            burn=self.burn,
            iterations=self.iterations,
            thin=self.thin,
            seed=self.seed,
            chains=self.chains,
            beta_prior_var=self.beta_prior_var,
            z_prior_var=self.z_prior_var,
            proposal_sd=self.proposal_sd,
            nu0=self.nu0,
            n_jobs=self.n_jobs,
        )

    def fit(self, Y: netdata.Network, X: netdata.DesignArray | None = None):
        self.samples_ = lsm.fit_lsm(Y, X, self._config())
        return self

    def predict_proba(self) -> np.ndarray:
        if not hasattr(self, "samples_"):
            raise NotFittedError("call fit first")
        return self.samples_.prob_mean.copy()

    def summary(self) -> pd.DataFrame:
        if not hasattr(self, "samples_"):
            raise NotFittedError("call fit first")
        return ame.posterior_summary(self.samples_)


class LogitEstimator(BaseEstimator):
    """Dyad-stacked logistic regression baseline."""

    def fit(self, Y: netdata.Network, X: netdata.DesignArray | None = None):
        if X is None:
            X = netdata.intercept_design(Y.n)
        self.result_ = glmbase.fit_logit(Y, X)
        self.design_ = X
        return self

    def _check_fitted(self):
        if not hasattr(self, "result_"):
            raise NotFittedError("call fit first")

    @property
    def coef_(self) -> np.ndarray:
        self._check_fitted()
        return self.result_.coefficients

    def predict_proba(self) -> np.ndarray:
        self._check_fitted()
        return glmbase.predict_proba(self.result_, self.design_)

    def summary(self) -> pd.DataFrame:
        self._check_fitted()
        r = self.result_
        return pd.DataFrame(
            {
                "name": [f"beta[{n}]" for n in r.names],
                "mean": r.coefficients,
                "sd": r.std_errors,
                "q2.5": r.coefficients - 1.959963984540054 * r.std_errors,
                "q97.5": r.coefficients + 1.959963984540054 * r.std_errors,
            }
        )
