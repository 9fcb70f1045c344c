"""Network goodness-of-fit statistics and posterior-predictive envelopes.

The core four: sd of row means, sd of column means, within-dyad correlation
(reciprocity), and normalized triadic dependence
trace(E^3) / (trace(D^3) * sd(Y)^3), with E the grand-mean-centered network
(missing as zero) and D the observedness indicator.  Extended statistics:
shared-partner distributions, geodesic distances, degree histograms, and
incoming k-stars.  Graph statistics treat missing cells as non-edges; the
moment statistics are missing-aware.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass

import numpy as np
import pandas as pd

from . import ame, lsm, netdata
from .errors import DataError
from .randkit import SeededStream

CORE4_NAMES = ("sd_rowmean", "sd_colmean", "dyad_dep", "triad_dep")
ALL_STATS = ("core4", "shared_partners", "geodesic", "degree", "kstar")

MIN_PPC_SIMS = 20


@dataclass(frozen=True)
class GofVector:
    sd_rowmean: float
    sd_colmean: float
    dyad_dep: float
    triad_dep: float
    degenerate: bool = False

    def as_array(self) -> np.ndarray:
        return np.array([self.sd_rowmean, self.sd_colmean, self.dyad_dep, self.triad_dep])


def gof_core4(Y: netdata.Network) -> GofVector:
    """The four summary statistics; dependence measures are missing-aware."""
    cells = Y.cells
    n = Y.n
    obs = np.isfinite(cells)
    np.fill_diagonal(obs, False)
    vals = cells[obs]
    if vals.size == 0:
        raise DataError("no observed cells")

    with np.errstate(invalid="ignore"):
        rowm = np.nanmean(np.where(obs, cells, np.nan), axis=1)
        colm = np.nanmean(np.where(obs, cells, np.nan), axis=0)
    sd_rowmean = float(np.nanstd(rowm, ddof=1))
    sd_colmean = float(np.nanstd(colm, ddof=1))

    if np.all(vals == vals[0]):
        return GofVector(sd_rowmean, sd_colmean, float("nan"), float("nan"), True)

    both = obs & obs.T
    dyad_dep = float("nan")
    if both.any():
        x = cells[both]
        xt = cells.T[both]
        if x.std() > 0 and xt.std() > 0:
            dyad_dep = float(np.corrcoef(x, xt)[0, 1])

    grand = vals.mean()
    sd_all = vals.std(ddof=1)
    E = np.where(obs, cells - grand, 0.0)
    D = obs.astype(float)
    denom = float(np.trace(D @ D @ D)) * sd_all**3
    triad_dep = float(np.trace(E @ E @ E) / denom) if denom > 0 else float("nan")
    return GofVector(sd_rowmean, sd_colmean, dyad_dep, triad_dep, False)


def _binary_adjacency(Y: netdata.Network) -> np.ndarray:
    if Y.family != "binary":
        raise DataError("graph statistics need a binary network")
    a = np.where(np.isfinite(Y.cells), Y.cells, 0.0) == 1.0
    np.fill_diagonal(a, False)
    return a


def shared_partner_dists(Y: netdata.Network, mode: str = "symmetric"):
    """Histograms of shared-partner counts over unordered pairs.

    ``dyadwise`` covers every pair, ``edgewise`` only pairs joined by at
    least one directed tie.  ``mode`` picks the partner notion: "symmetric"
    (either direction), "out" (common targets), "in" (common sources).
    """
    A = _binary_adjacency(Y)
    n = A.shape[0]
    G = A | A.T
    if mode == "symmetric":
        N = G
    elif mode == "out":
        N = A
    elif mode == "in":
        N = A.T
    else:
        raise DataError(f"unknown shared-partner mode {mode!r}")
    sp = (N.astype(int) @ N.astype(int).T)
    iu, ju = np.triu_indices(n, k=1)
    counts = sp[iu, ju]
    connected = G[iu, ju]
    dyadwise = np.bincount(counts, minlength=n - 1)
    edgewise = np.bincount(counts[connected], minlength=n - 1)
    return dyadwise, edgewise


@dataclass(frozen=True)
class GeodesicHist:
    counts: np.ndarray  # counts[k] = ordered pairs at distance k (index 0 unused)
    inf_count: int
    n: int

    def proportions(self) -> dict:
        m = self.n * (self.n - 1)
        out = {k: self.counts[k] / m for k in range(1, len(self.counts)) if self.counts[k]}
        out["inf"] = self.inf_count / m
        return out


def geodesic_dist(Y: netdata.Network) -> GeodesicHist:
    """Directed shortest-path length histogram by BFS from every node."""
    A = _binary_adjacency(Y)
    n = A.shape[0]
    neighbors = [np.nonzero(A[i])[0] for i in range(n)]
    counts = np.zeros(n, dtype=int)
    inf_count = 0
    for src in range(n):
        dist = np.full(n, -1, dtype=int)
        dist[src] = 0
        q = deque([src])
        while q:
            u = q.popleft()
            for v in neighbors[u]:
                if dist[v] < 0:
                    dist[v] = dist[u] + 1
                    q.append(v)
        for v in range(n):
            if v == src:
                continue
            if dist[v] > 0:
                counts[dist[v]] += 1
            else:
                inf_count += 1
    return GeodesicHist(counts=counts, inf_count=inf_count, n=n)


def degree_and_star_stats(Y: netdata.Network, kmax: int | None = None):
    """Indegree/outdegree histograms and incoming k-star counts.

    The k-star count is sum_i C(indegree_i, k) for k = 2..kmax (kmax
    defaults to the maximum observed indegree).
    """
    A = _binary_adjacency(Y)
    n = A.shape[0]
    indeg = A.sum(axis=0).astype(int)
    outdeg = A.sum(axis=1).astype(int)
    indeg_hist = np.bincount(indeg, minlength=n)
    outdeg_hist = np.bincount(outdeg, minlength=n)
    if kmax is None:
        kmax = int(indeg.max()) if n else 0
    kstars = {
        k: int(sum(math.comb(int(d), k) for d in indeg)) for k in range(2, kmax + 1)
    }
    return indeg_hist, outdeg_hist, kstars


def simulate_network(
    mu: np.ndarray, rho: float, sigma_eps2: float, family: str, stream: SeededStream
) -> netdata.Network:
    """Draw one network from the model at a given predictor state."""
    n = mu.shape[0]
    iu, ju = np.triu_indices(n, k=1)
    z1 = stream.standard_normal(iu.shape[0])
    z2 = stream.standard_normal(iu.shape[0])
    sd = np.sqrt(sigma_eps2)
    e1 = sd * z1
    e2 = sd * (rho * z1 + np.sqrt(1.0 - rho * rho) * z2)
    theta = np.full((n, n), np.nan)
    theta[iu, ju] = mu[iu, ju] + e1
    theta[ju, iu] = mu[ju, iu] + e2
    if family == "binary":
        cells = np.where(np.isfinite(theta), (theta > 0).astype(float), np.nan)
    else:
        cells = theta
    labels = tuple(f"n{i}" for i in range(n))
    return netdata.Network(labels, cells, family)


@dataclass
class GofReport:
    """Observed statistics with simulation envelopes.

    ``observed`` and the per-simulation rows are keyed by (statistic, bin);
    scalar statistics use bin "".
    """

    observed: dict
    simulated: dict  # key -> (nsims,) array
    nsims: int
    which_stats: tuple

    def envelopes(self) -> dict:
        out = {}
        for key, sims in self.simulated.items():
            finite = sims[np.isfinite(sims)]
            if finite.size == 0:
                out[key] = (np.nan, np.nan, np.nan, np.nan)
                continue
            q = np.quantile(finite, [0.025, 0.05, 0.95, 0.975])
            out[key] = tuple(float(v) for v in q)
        return out

    def to_table(self) -> pd.DataFrame:
        env = self.envelopes()
        rows = []
        for key in self.observed:
            stat, bin_label = key
            sims = self.simulated[key]
            finite = sims[np.isfinite(sims)]
            q025, q05, q95, q975 = env[key]
            rows.append(
                {
                    "statistic": stat,
                    "bin": bin_label,
                    "observed": self.observed[key],
                    "sim_mean": float(finite.mean()) if finite.size else float("nan"),
                    "q05": q05,
                    "q95": q95,
                    "q025": q025,
                    "q975": q975,
                }
            )
        return pd.DataFrame(rows)

    def inside_95(self, stat: str) -> bool:
        key = (stat, "")
        q025, _, _, q975 = self.envelopes()[key]
        v = self.observed[key]
        return bool(q025 <= v <= q975)


def _stat_rows(Y: netdata.Network, which_stats, sp_mode: str) -> dict:
    n = Y.n
    out = {}
    if "core4" in which_stats:
        g = gof_core4(Y)
        for name, v in zip(CORE4_NAMES, g.as_array()):
            out[(name, "")] = float(v)
    if "shared_partners" in which_stats:
        dy, ed = shared_partner_dists(Y, mode=sp_mode)
        for k in range(n - 1):
            out[("dyadwise_shared_partners", str(k))] = float(dy[k])
            out[("edgewise_shared_partners", str(k))] = float(ed[k])
    if "geodesic" in which_stats:
        geo = geodesic_dist(Y)
        m = n * (n - 1)
        for k in range(1, n):
            out[("geodesic", str(k))] = geo.counts[k] / m
        out[("geodesic", "inf")] = geo.inf_count / m
    if "degree" in which_stats:
        indeg, outdeg, _ = degree_and_star_stats(Y, kmax=0)
        for k in range(n):
            out[("indegree", str(k))] = float(indeg[k])
            out[("outdegree", str(k))] = float(outdeg[k])
    if "kstar" in which_stats:
        _, _, kstars = degree_and_star_stats(Y, kmax=n - 1)
        for k in range(2, n):
            out[("incoming_kstar", str(k))] = float(kstars.get(k, 0))
    return out


def posterior_predictive_gof(
    samples: ame.PosteriorSamples,
    X: netdata.DesignArray,
    nsims: int = 1000,
    which_stats=("core4",),
    stream: SeededStream | None = None,
    sp_mode: str = "symmetric",
) -> GofReport:
    """Simulate networks from kept posterior draws and envelope the statistics.

    Draw states are cycled over the kept iterations; each simulation redraws
    the pair-correlated errors (binary networks threshold the propensities).
    """
    if nsims < MIN_PPC_SIMS:
        raise DataError(f"need at least {MIN_PPC_SIMS} simulations for envelopes")
    if stream is None:
        stream = SeededStream(int(samples.config.get("seed", 0))).derive(2)
    family = samples.family
    observed = _stat_rows(samples.network, which_stats, sp_mode)
    sims: dict = {key: np.full(nsims, np.nan) for key in observed}
    for s in range(nsims):
        idx = s % samples.kept
        if samples.kind == "ame":
            mu = ame.predictor_from_draw(samples, idx, X)
            rho = float(samples.draws["rho"][idx])
            se2 = float(samples.draws["sigma_eps2"][idx])
        elif samples.kind == "lsm":
            mu = lsm.predictor_from_draw(samples, idx, X)
            rho, se2 = 0.0, 1.0
        else:
            raise DataError(f"cannot simulate from samples of kind {samples.kind!r}")
        net = simulate_network(mu, rho, se2, family, stream)
        for key, value in _stat_rows(net, which_stats, sp_mode).items():
            if key in sims:
                sims[key][s] = value
    return GofReport(observed=observed, simulated=sims, nsims=nsims, which_stats=tuple(which_stats))
