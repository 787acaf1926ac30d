"""Reference clustering models: Lloyd's k-means and EM for Gaussian mixtures.

The isotropic EM variant learns one scalar variance per component and keeps
the mixture weights fixed uniform; the full variant learns weights and full
covariance matrices with a jitter rescue on degenerate components.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import solve_triangular

from .tensor import make_rng


class DegenerateComponentError(RuntimeError):
    """A mixture component kept collapsing after repeated jitter rescues."""


@dataclass
class KmeansResult:
    centroids: np.ndarray
    labels: np.ndarray
    inertia: float
    inertia_history: list[float] = field(default_factory=list)
    n_iter: int = 0


@dataclass
class GmmParams:
    weights: np.ndarray  # (K,) stochastic
    means: np.ndarray  # (K, d)
    covariance_kind: str  # "isotropic" | "full"
    variances: np.ndarray | None = None  # (K,) for isotropic
    covariances: np.ndarray | None = None  # (K, d, d) for full


def _sq_dists(x: np.ndarray, centroids: np.ndarray) -> np.ndarray:
    """Pairwise squared Euclidean distances, clipped at zero."""
    d2 = (
        (x * x).sum(axis=1, keepdims=True)
        - 2.0 * x @ centroids.T
        + (centroids * centroids).sum(axis=1)
    )
    return np.maximum(d2, 0.0)


def kmeans_pp_init(x: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    """k-means++ seeding: sample each next centroid proportionally to the
    squared distance to the nearest one already chosen."""
    n = x.shape[0]
    if k > n:
        raise ValueError(f"k={k} exceeds the number of points {n}")
    chosen = np.empty((k, x.shape[1]))
    chosen[0] = x[rng.integers(n)]
    d2 = _sq_dists(x, chosen[:1]).ravel()
    for j in range(1, k):
        total = d2.sum()
        if total <= 0.0:
            probs = np.full(n, 1.0 / n)
        else:
            probs = d2 / total
        idx = rng.choice(n, p=probs)
        chosen[j] = x[idx]
        d2 = np.minimum(d2, _sq_dists(x, chosen[j : j + 1]).ravel())
    return chosen


def lloyd(
    x: np.ndarray,
    k: int,
    init_centroids: np.ndarray,
    max_iter: int = 150,
    tol: float = 1e-6,
) -> KmeansResult:
    """Alternate nearest-centroid assignment and mean updates.

    Empty clusters are reseeded to the point currently farthest from its own
    centroid, which keeps the inertia sequence non-increasing.
    """
    centroids = np.array(init_centroids, dtype=np.float64)
    if centroids.shape != (k, x.shape[1]):
        raise ValueError(f"init centroids must be {k} x {x.shape[1]}")
    history: list[float] = []
    labels = np.zeros(x.shape[0], dtype=np.int64)
    n_iter = 0
    for n_iter in range(1, max_iter + 1):
        d2 = _sq_dists(x, centroids)
        labels = d2.argmin(axis=1)
        point_d2 = d2[np.arange(x.shape[0]), labels]
        history.append(float(point_d2.sum()))

        new_centroids = centroids.copy()
        counts = np.bincount(labels, minlength=k)
        for j in range(k):
            if counts[j] > 0:
                new_centroids[j] = x[labels == j].mean(axis=0)
        empties = np.flatnonzero(counts == 0)
        if empties.size:
            farthest = np.argsort(point_d2)[::-1]
            for rank, j in enumerate(empties):
                new_centroids[j] = x[farthest[rank]]
        shift = np.sqrt(((new_centroids - centroids) ** 2).sum(axis=1)).max()
        centroids = new_centroids
        if shift < tol:
            break
    d2 = _sq_dists(x, centroids)
    labels = d2.argmin(axis=1)
    inertia = float(d2[np.arange(x.shape[0]), labels].sum())
    history.append(inertia)
    return KmeansResult(centroids, labels, inertia, history, n_iter)


def _iso_log_prob(x: np.ndarray, means: np.ndarray, variances: np.ndarray) -> np.ndarray:
    d = x.shape[1]
    d2 = _sq_dists(x, means)
    return -0.5 * (d * np.log(2.0 * np.pi * variances) + d2 / variances)


def _full_log_prob(x: np.ndarray, means: np.ndarray, covariances: np.ndarray) -> np.ndarray:
    n, d = x.shape
    k = means.shape[0]
    out = np.empty((n, k))
    for j in range(k):
        chol = np.linalg.cholesky(covariances[j])
        diff = x - means[j]
        y = solve_triangular(chol, diff.T, lower=True)
        maha = (y * y).sum(axis=0)
        logdet = 2.0 * np.log(np.diag(chol)).sum()
        out[:, j] = -0.5 * (d * np.log(2.0 * np.pi) + logdet + maha)
    return out


def _log_sum_exp(a: np.ndarray) -> np.ndarray:
    m = a.max(axis=1, keepdims=True)
    return m + np.log(np.exp(a - m).sum(axis=1, keepdims=True))


def em_gmm(
    x: np.ndarray,
    k: int,
    covariance_kind: str = "isotropic",
    init: np.ndarray | GmmParams | None = None,
    max_iter: int = 150,
    tol: float = 1e-6,
    rng: np.random.Generator | None = None,
) -> tuple[GmmParams, np.ndarray, list[float]]:
    """Fit a Gaussian mixture by EM; returns params, responsibilities and the
    per-iteration trace of the mean log-likelihood per point."""
    if covariance_kind not in ("isotropic", "full"):
        raise ValueError(f"unknown covariance kind {covariance_kind!r}")
    n, d = x.shape
    if rng is None:
        rng = make_rng(0)
    if isinstance(init, GmmParams):
        params = init
        means = params.means.copy()
        weights = params.weights.copy()
        variances = None if params.variances is None else params.variances.copy()
        covariances = None if params.covariances is None else params.covariances.copy()
    else:
        means = np.array(init, dtype=np.float64) if init is not None else kmeans_pp_init(x, k, rng)
        weights = np.full(k, 1.0 / k)
        base_var = max(float(x.var(axis=0).mean()), 1e-6)
        variances = np.full(k, base_var)
        covariances = np.stack([base_var * np.eye(d)] * k)

    trace: list[float] = []
    resp = np.full((n, k), 1.0 / k)
    collapses = 0
    for _ in range(max_iter):
        # E-step in log space
        if covariance_kind == "isotropic":
            log_prob = _iso_log_prob(x, means, variances)
        else:
            log_prob = _full_log_prob(x, means, covariances)
        weighted = log_prob + np.log(weights)
        log_norm = _log_sum_exp(weighted)
        resp = np.exp(weighted - log_norm)
        resp /= resp.sum(axis=1, keepdims=True)
        loglik = float(log_norm.mean())
        trace.append(loglik)

        # M-step
        nk = resp.sum(axis=0)
        safe_nk = np.maximum(nk, 1e-10)
        means = (resp.T @ x) / safe_nk[:, None]
        if covariance_kind == "isotropic":
            d2 = _sq_dists(x, means)
            variances = (resp * d2).sum(axis=0) / (d * safe_nk)
            dead = variances < 1e-12
            if dead.any():
                collapses += 1
                if collapses >= 10:
                    raise DegenerateComponentError(
                        f"{int(dead.sum())} isotropic components kept collapsing"
                    )
                variances = np.where(dead, variances + 1e-6, variances)
            # mixture weights stay uniform for the isotropic variant
        else:
            weights = nk / n
            weights = np.maximum(weights, 1e-12)
            weights /= weights.sum()
            new_covs = np.empty_like(covariances)
            for j in range(k):
                diff = x - means[j]
                cov = (resp[:, j : j + 1] * diff).T @ diff / safe_nk[j]
                try:
                    np.linalg.cholesky(cov)
                except np.linalg.LinAlgError:
                    collapses += 1
                    if collapses >= 10:
                        raise DegenerateComponentError(
                            f"component {j} covariance kept collapsing"
                        )
                    cov = cov + 1e-6 * np.eye(d)
                new_covs[j] = cov
            covariances = new_covs

        if len(trace) >= 2 and trace[-1] - trace[-2] < tol:
            break

    params = GmmParams(
        weights=weights,
        means=means,
        covariance_kind=covariance_kind,
        variances=variances if covariance_kind == "isotropic" else None,
        covariances=covariances if covariance_kind == "full" else None,
    )
    return params, resp, trace
