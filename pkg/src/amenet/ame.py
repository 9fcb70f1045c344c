"""Gibbs sampler for the additive-and-multiplicative-effects network model.

The latent propensity for each ordered dyad is

    theta_ij = beta' x_ij + a_i + b_j + u_i' D v_j + eps_ij

with (eps_ij, eps_ji) jointly normal (reciprocity rho, variance sigma_eps2).
Binary networks use a probit link, y_ij = 1(theta_ij > 0), with the scale
fixed at 1; gaussian networks observe theta directly.  One sweep updates, in
order: theta, beta, (a, b), Sigma_ab, rho, sigma_eps2 (gaussian only), then
the factor columns.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field

import numpy as np
import pandas as pd
from joblib import Parallel, delayed
from scipy.linalg import cho_solve, solve_triangular
from scipy.special import ndtr

from . import lfm, netdata, srm
from .errors import DataError, NumericalError
from .randkit import SeededStream, cholesky_with_jitter, draw_truncated_normal

SCALAR_PARAMS = ("rho", "sigma_a2", "sigma_b2", "sigma_ab", "sigma_eps2")


@dataclass(frozen=True)
class FitConfig:
    K: int = 2
    family: str = "binary"
    burn: int = 5000
    iterations: int = 15000
    thin: int = 10
    seed: int = 0
    chains: int = 1
    beta_prior_var: float = 100.0
    S0: np.ndarray | None = None  # None -> identity
    nu0: float = 4.0
    ig_shape0: float = 1.0
    ig_rate0: float = 1.0
    factor_prior_var: float = 1.0
    rho_proposal_sd: float | None = None  # None -> current sigma_eps
    additive_effects: bool = True
    estimate_rho: bool = True
    n_jobs: int = 1

    def __post_init__(self):
        if self.family not in ("binary", "gaussian"):
            raise DataError(f"unknown family {self.family!r}")
        if self.iterations <= self.burn:
            raise DataError("iterations must exceed burn")
        if self.thin < 1 or self.K < 0 or self.chains < 1:
            raise DataError("thin and chains must be >= 1 and K >= 0")
        for name in ("beta_prior_var", "factor_prior_var", "ig_shape0", "ig_rate0"):
            if getattr(self, name) <= 0:
                raise DataError(f"{name} must be positive")

    def s0_matrix(self) -> np.ndarray:
        return np.eye(2) if self.S0 is None else np.asarray(self.S0, dtype=float)


@dataclass
class ModelState:
    beta: np.ndarray
    effects: srm.AdditiveEffects
    cov: srm.SrmCovariance
    factors: lfm.LatentFactors
    theta: np.ndarray


@dataclass
class PosteriorSamples:
    """Thinned post-burn-in draws plus running predictive summaries."""

    kind: str
    network: netdata.Network
    design_names: tuple
    config: dict
    draws: dict
    chain: np.ndarray
    prob_mean: np.ndarray | None
    mult_mean: np.ndarray | None
    theta_mean: np.ndarray | None
    accept: dict

    @property
    def kept(self) -> int:
        return int(self.chain.shape[0])

    @property
    def family(self) -> str:
        return self.network.family

    def beta_names(self) -> list:
        return list(self.design_names)


def _zeroed_design(X: netdata.DesignArray) -> np.ndarray:
    slabs = X.slabs.copy()
    n = slabs.shape[0]
    slabs[np.arange(n), np.arange(n), :] = 0.0
    return slabs


class _Workspace:
    """Per-fit precomputed index and Gram structures."""

    def __init__(self, Y: netdata.Network, X: netdata.DesignArray):
        n = Y.n
        self.n = n
        self.Xz = _zeroed_design(X)
        self.iu, self.ju = np.triu_indices(n, k=1)
        self.X1 = self.Xz[self.iu, self.ju, :]
        self.X2 = self.Xz[self.ju, self.iu, :]
        self.G11 = self.X1.T @ self.X1 + self.X2.T @ self.X2
        self.G12 = self.X1.T @ self.X2 + self.X2.T @ self.X1
        y = Y.cells
        # Truncation bounds per cell: y=1 -> (0, inf), y=0 -> (-inf, 0),
        # missing -> unbounded.
        self.lo = np.where(y == 1.0, 0.0, -np.inf)
        self.hi = np.where(y == 0.0, 0.0, np.inf)
        self.obs = Y.observed_mask()


def init_state(
    Y: netdata.Network,
    X: netdata.DesignArray,
    config: FitConfig,
    stream: SeededStream | None = None,
) -> ModelState:
    """Starting values: zero effects, tiny random factors, sign-matched theta."""
    netdata.check_design(Y, X)
    if stream is None:
        stream = SeededStream(config.seed)
    n = Y.n
    y = Y.cells
    if config.family == "binary":
        theta = np.where(np.isfinite(y), np.where(y == 1.0, 0.5, -0.5), 0.0)
    else:
        obs = np.isfinite(y)
        center = y[obs].mean() if obs.any() else 0.0
        theta = np.where(obs, y - center, 0.0)
    theta = theta.astype(float)
    np.fill_diagonal(theta, np.nan)

    if config.K > 0:
        U = 0.1 * stream.standard_normal((n, config.K))
        V = 0.1 * stream.standard_normal((n, config.K))
        factors = lfm.LatentFactors(U, V, np.ones(config.K))
    else:
        factors = lfm.zero_factors(n, 0)

    if config.additive_effects:
        cov = srm.SrmCovariance(1.0, 1.0, 0.0, 0.0, 1.0)
    else:
        cov = srm.SrmCovariance(0.0, 0.0, 0.0, 0.0, 1.0)
    return ModelState(
        beta=np.zeros(X.p),
        effects=srm.AdditiveEffects(np.zeros(n), np.zeros(n)),
        cov=cov,
        factors=factors,
        theta=theta,
    )


def _linear_predictor(state: ModelState, Xz: np.ndarray) -> np.ndarray:
    return (
        Xz @ state.beta
        + state.effects.outer_sum()
        + lfm.multiplicative_predictor(state.factors)
    )


def sample_latent_theta(
    state: ModelState,
    Y: netdata.Network,
    X: netdata.DesignArray,
    stream: SeededStream,
    _ws: _Workspace | None = None,
) -> np.ndarray:
    """Update the latent propensity matrix.

    Binary family: for each unordered pair, theta_ij is drawn from its
    normal conditional given theta_ji, truncated to the half-line matching
    the observed tie (untruncated where y is missing); then the mirror cell.
    Gaussian family: observed cells are y itself; missing cells are imputed
    from the same pair conditional without truncation.
    """
    ws = _ws or _Workspace(Y, X)
    mu = _linear_predictor(state, ws.Xz)
    theta = state.theta.copy()
    rho = state.cov.rho
    sd = float(np.sqrt(state.cov.sigma_eps2 * (1.0 - rho * rho)))

    if Y.family == "gaussian":
        theta[ws.obs] = Y.cells[ws.obs]
        for rows, cols in ((ws.iu, ws.ju), (ws.ju, ws.iu)):
            mask = ~ws.obs[rows, cols]
            if not mask.any():
                continue
            r, c = rows[mask], cols[mask]
            cond = mu[r, c] + rho * (theta[c, r] - mu[c, r])
            theta[r, c] = cond + sd * stream.standard_normal(r.shape[0])
        return theta

    for rows, cols in ((ws.iu, ws.ju), (ws.ju, ws.iu)):
        cond = mu[rows, cols] + rho * (theta[cols, rows] - mu[cols, rows])
        theta[rows, cols] = draw_truncated_normal(
            cond, sd, ws.lo[rows, cols], ws.hi[rows, cols], stream
        )
    return theta


def _sample_beta(theta, state: ModelState, ws: _Workspace, config, stream):
    resid = theta - state.effects.outer_sum() - lfm.multiplicative_predictor(state.factors)
    r1 = resid[ws.iu, ws.ju]
    r2 = resid[ws.ju, ws.iu]
    rho = state.cov.rho
    c = 1.0 / (state.cov.sigma_eps2 * (1.0 - rho * rho))
    P = c * (ws.G11 - rho * ws.G12) + np.eye(ws.G11.shape[0]) / config.beta_prior_var
    lin = c * (ws.X1.T @ (r1 - rho * r2) + ws.X2.T @ (r2 - rho * r1))
    L = cholesky_with_jitter(P)
    mean = cho_solve((L, True), lin)
    return mean + solve_triangular(L.T, stream.standard_normal(len(lin)), lower=False)


def gibbs_sweep(
    state: ModelState,
    Y: netdata.Network,
    X: netdata.DesignArray,
    config: FitConfig,
    stream: SeededStream,
    _ws: _Workspace | None = None,
    _stats: dict | None = None,
) -> ModelState:
    """One full pass through every conditional, in the fixed sweep order."""
    ws = _ws or _Workspace(Y, X)
    n = Y.n

    theta = sample_latent_theta(state, Y, X, stream, _ws=ws)
    beta = _sample_beta(theta, state, ws, config, stream)
    xb = ws.Xz @ beta
    mult = lfm.multiplicative_predictor(state.factors)

    if config.additive_effects:
        effects = srm.sample_additive_effects(theta - xb - mult, state.cov, stream)
        sig_ab = srm.sample_cov_ab(effects, (config.s0_matrix(), config.nu0), stream)
        cov = state.cov.replace(
            sigma_a2=float(sig_ab[0, 0]),
            sigma_b2=float(sig_ab[1, 1]),
            sigma_ab=float(sig_ab[0, 1]),
        )
    else:
        effects = srm.AdditiveEffects(np.zeros(n), np.zeros(n))
        cov = state.cov

    eps = theta - xb - effects.outer_sum() - mult
    pairs = np.column_stack([eps[ws.iu, ws.ju], eps[ws.ju, ws.iu]])

    if config.estimate_rho:
        prop_sd = config.rho_proposal_sd
        if prop_sd is None:
            prop_sd = float(np.sqrt(cov.sigma_eps2))
        rho_new, accepted = srm.sample_rho(pairs, cov.rho, cov.sigma_eps2, prop_sd, stream)
        cov = cov.replace(rho=rho_new)
        if _stats is not None:
            _stats["rho_proposals"] = _stats.get("rho_proposals", 0) + 1
            _stats["rho_accepts"] = _stats.get("rho_accepts", 0) + int(accepted)

    if config.family == "gaussian":
        se2 = srm.sample_sigma_eps2(
            pairs, cov.rho, (config.ig_shape0, config.ig_rate0), stream, family="gaussian"
        )
        cov = cov.replace(sigma_eps2=se2)

    if config.K > 0:
        factors = lfm.sample_factors(
            theta - xb - effects.outer_sum(),
            state.factors,
            config.factor_prior_var,
            stream,
            rho=cov.rho,
            sigma_eps2=cov.sigma_eps2,
        )
    else:
        factors = state.factors

    return ModelState(beta=beta, effects=effects, cov=cov, factors=factors, theta=theta)


def _run_chain(Y, X, config: FitConfig, chain_idx: int, lineage: tuple):
    stream = SeededStream(config.seed, lineage + (chain_idx,))
    ws = _Workspace(Y, X)
    state = init_state(Y, X, config, stream)
    kept = (config.iterations - config.burn) // config.thin
    n, P = Y.n, X.p
    rec = {
        "beta": np.empty((kept, P)),
        "rho": np.empty(kept),
        "sigma_a2": np.empty(kept),
        "sigma_b2": np.empty(kept),
        "sigma_ab": np.empty(kept),
        "sigma_eps2": np.empty(kept),
        "a": np.empty((kept, n)),
        "b": np.empty((kept, n)),
        "U": np.empty((kept, n, config.K)),
        "V": np.empty((kept, n, config.K)),
    }
    prob_sum = np.zeros((n, n)) if Y.family == "binary" else None
    mult_sum = np.zeros((n, n))
    theta_sum = np.zeros((n, n))
    stats: dict = {}
    k = 0
    for t in range(1, config.iterations + 1):
        try:
            state = gibbs_sweep(state, Y, X, config, stream, _ws=ws, _stats=stats)
        except NumericalError as e:
            raise NumericalError(f"sweep {t}: {e}") from e
        if t > config.burn and (t - config.burn) % config.thin == 0:
            rec["beta"][k] = state.beta
            rec["rho"][k] = state.cov.rho
            rec["sigma_a2"][k] = state.cov.sigma_a2
            rec["sigma_b2"][k] = state.cov.sigma_b2
            rec["sigma_ab"][k] = state.cov.sigma_ab
            rec["sigma_eps2"][k] = state.cov.sigma_eps2
            rec["a"][k] = state.effects.a
            rec["b"][k] = state.effects.b
            rec["U"][k] = state.factors.U
            rec["V"][k] = state.factors.V * state.factors.D[None, :]
            mult = lfm.multiplicative_predictor(state.factors)
            mu = ws.Xz @ state.beta + state.effects.outer_sum() + mult
            if prob_sum is not None:
                prob_sum += ndtr(mu / np.sqrt(state.cov.sigma_eps2))
            mult_sum += mult
            th = state.theta.copy()
            np.fill_diagonal(th, 0.0)
            theta_sum += th
            k += 1
    return rec, stats, prob_sum, mult_sum, theta_sum, kept


def fit(
    Y: netdata.Network,
    X: netdata.DesignArray | None = None,
    config: FitConfig | None = None,
    _lineage: tuple = (),
) -> PosteriorSamples:
    """Run burn + kept sweeps (per chain) and accumulate posterior samples."""
    config = config or FitConfig()
    if X is None:
        X = netdata.intercept_design(Y.n)
    netdata.check_design(Y, X)
    if Y.family != config.family:
        raise DataError(
            f"config family {config.family!r} does not match network family {Y.family!r}"
        )

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
    chain = np.concatenate([np.full(r[5], c, dtype=int) for c, r in zip(chain_ids, results)])
    total_kept = int(chain.shape[0])
    prob_mean = None
    if Y.family == "binary":
        prob_mean = sum(r[2] for r in results) / total_kept
        np.fill_diagonal(prob_mean, np.nan)
    mult_mean = sum(r[3] for r in results) / total_kept
    theta_mean = sum(r[4] for r in results) / total_kept
    np.fill_diagonal(theta_mean, np.nan)

    proposals = sum(r[1].get("rho_proposals", 0) for r in results)
    accepts = sum(r[1].get("rho_accepts", 0) for r in results)
    accept = {"rho": accepts / proposals if proposals else float("nan")}

    return PosteriorSamples(
        kind="ame",
        network=Y,
        design_names=X.names,
        config=_config_dict(config),
        draws=draws,
        chain=chain,
        prob_mean=prob_mean,
        mult_mean=mult_mean,
        theta_mean=theta_mean,
        accept=accept,
    )


def _config_dict(config) -> dict:
    d = dataclasses.asdict(config)
    for key, val in d.items():
        if isinstance(val, np.ndarray):
            d[key] = val.tolist()
    return d


def predict_proba(samples: PosteriorSamples) -> np.ndarray:
    """Posterior mean tie probability, Phi(mu) averaged over kept draws."""
    if samples.family != "binary":
        raise DataError("predict_proba is defined for binary networks; "
                        "use posterior_theta_mean for gaussian fits")
    return samples.prob_mean.copy()


def posterior_theta_mean(samples: PosteriorSamples) -> np.ndarray:
    """Posterior mean of the latent propensity (gaussian-family predictions)."""
    return samples.theta_mean.copy()


def scalar_draw_table(samples: PosteriorSamples) -> dict:
    """Named scalar chains: one entry per beta coefficient plus SRM scalars."""
    out = {}
    beta = samples.draws["beta"]
    for j, name in enumerate(samples.beta_names()):
        out[f"beta[{name}]"] = beta[:, j]
    for name in SCALAR_PARAMS:
        if name in samples.draws:
            out[name] = samples.draws[name]
    return out


def posterior_summary(samples: PosteriorSamples) -> pd.DataFrame:
    """Mean, sd, and central 95% interval per scalar parameter."""
    if samples.kept < 2:
        raise DataError("posterior summary needs at least 2 kept draws")
    rows = []
    for name, chain in scalar_draw_table(samples).items():
        rows.append(
            {
                "name": name,
                "mean": float(np.mean(chain)),
                "sd": float(np.std(chain, ddof=1)),
                "q2.5": float(np.quantile(chain, 0.025, method="linear")),
                "q97.5": float(np.quantile(chain, 0.975, method="linear")),
            }
        )
    return pd.DataFrame(rows)


def geweke_z(chain: np.ndarray, first: float = 0.1, last: float = 0.5) -> float:
    """Two-window mean comparison (first 10% vs last 50%) as a z score."""
    m = chain.shape[0]
    na = max(1, int(first * m))
    nb = max(1, int(last * m))
    xa, xb = chain[:na], chain[m - nb:]
    va = xa.var(ddof=1) / na if na > 1 else 0.0
    vb = xb.var(ddof=1) / nb if nb > 1 else 0.0
    denom = np.sqrt(va + vb)
    if denom == 0:
        return 0.0 if xa.mean() == xb.mean() else float("nan")
    return float((xa.mean() - xb.mean()) / denom)


def diagnostics(samples: PosteriorSamples) -> pd.DataFrame:
    """Per-chain trace means over thirds plus a Geweke-style z per parameter."""
    rows = []
    table = scalar_draw_table(samples)
    for c in np.unique(samples.chain):
        sel = samples.chain == c
        for name, chain in table.items():
            x = chain[sel]
            thirds = np.array_split(x, 3)
            rows.append(
                {
                    "chain": int(c),
                    "name": name,
                    "mean_third1": float(thirds[0].mean()) if thirds[0].size else np.nan,
                    "mean_third2": float(thirds[1].mean()) if thirds[1].size else np.nan,
                    "mean_third3": float(thirds[2].mean()) if thirds[2].size else np.nan,
                    "geweke_z": geweke_z(x),
                }
            )
    df = pd.DataFrame(rows)
    df.attrs["rho_accept_rate"] = samples.accept.get("rho", float("nan"))
    return df


def predictor_from_draw(samples: PosteriorSamples, idx: int, X: netdata.DesignArray) -> np.ndarray:
    """Rebuild mu (without eps) for one kept draw; used by posterior-predictive
    simulation."""
    Xz = _zeroed_design(X)
    d = samples.draws
    mu = Xz @ d["beta"][idx]
    mu += d["a"][idx][:, None] + d["b"][idx][None, :]
    if d["U"].shape[2] > 0:
        mu += d["U"][idx] @ d["V"][idx].T
    return mu
