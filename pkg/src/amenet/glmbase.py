"""Plain logistic regression on stacked dyads (the conditional-independence
baseline).  Fit by iteratively reweighted least squares; standard errors from
the inverse observed information."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from . import netdata
from .errors import DataError

MAX_ITER = 100
SCORE_TOL = 1e-8
SEPARATION_BOUND = 1e3


@dataclass(frozen=True)
class LogitFit:
    coefficients: np.ndarray
    std_errors: np.ndarray
    converged: bool
    separation: bool
    n_iter: int
    names: tuple


def stack_dyads(Y: netdata.Network, X: netdata.DesignArray):
    """Rows (y, x) for every observed off-diagonal cell, row-major order."""
    netdata.check_design(Y, X)
    obs = Y.observed_mask()
    y = Y.cells[obs]
    xd = X.slabs[obs]
    return y, xd


def fit_logit(Y: netdata.Network, X: netdata.DesignArray | None = None) -> LogitFit:
    """Maximum-likelihood logit on observed dyads.

    Perfect separation is detected by coefficients diverging past 1e3 and is
    flagged rather than fatal.
    """
    if X is None:
        X = netdata.intercept_design(Y.n)
    if Y.family != "binary":
        raise DataError("logit requires a binary network")
    y, xd = stack_dyads(Y, X)
    if y.size == 0:
        raise DataError("no observed dyads to fit")
    if np.all(y == y[0]):
        raise DataError("outcomes are constant; logit is not identified")

    p_dim = xd.shape[1]
    beta = np.zeros(p_dim)
    converged = False
    separation = False
    it = 0
    info = np.eye(p_dim)
    for it in range(1, MAX_ITER + 1):
        mu = expit(xd @ beta)
        score = xd.T @ (y - mu)
        if np.max(np.abs(score)) < SCORE_TOL:
            converged = True
            break
        w = np.clip(mu * (1.0 - mu), 1e-12, None)
        info = (xd * w[:, None]).T @ xd
        try:
            step = np.linalg.solve(info, score)
        except np.linalg.LinAlgError:
            separation = True
            break
        beta = beta + step
        if np.max(np.abs(beta)) > SEPARATION_BOUND:
            separation = True
            break

    mu = expit(xd @ beta)
    w = np.clip(mu * (1.0 - mu), 1e-12, None)
    info = (xd * w[:, None]).T @ xd
    try:
        se = np.sqrt(np.diag(np.linalg.inv(info)))
    except np.linalg.LinAlgError:
        se = np.full(p_dim, np.inf)
    return LogitFit(
        coefficients=beta,
        std_errors=se,
        converged=converged and not separation,
        separation=separation,
        n_iter=it,
        names=X.names,
    )


def predict_proba(fit: LogitFit, X: netdata.DesignArray) -> np.ndarray:
    """Fitted tie probabilities on the full matrix (diagonal missing)."""
    eta = np.einsum("ijp,p->ij", np.nan_to_num(X.slabs), fit.coefficients)
    prob = expit(eta)
    np.fill_diagonal(prob, np.nan)
    return prob
