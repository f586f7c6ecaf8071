"""Aggregation kernels.

The similarity-reweighted weighted geometric median lives here together with
the baselines it is compared against (size-weighted mean, Krum, the plain
geometric median and per-update clipping with noise).  Every kernel takes a
stacked ``(N, d)`` array of client updates.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

log = logging.getLogger(__name__)

__all__ = [
    "SimilarityMatrix",
    "WgmeResult",
    "WpcraParams",
    "pairwise_similarity",
    "pardon",
    "trust_weights",
    "logit_rescale",
    "wgme_objective",
    "wgme",
    "aggregate_wpcra",
    "aggregate_mean",
    "aggregate_krum",
    "aggregate_rfa",
    "aggregate_perturbing",
    "AGGREGATORS",
]

AGGREGATORS = ("wpcra", "mean", "krum", "rfa", "perturbing", "crfl", "crfl-rfa")


@dataclass(frozen=True)
class SimilarityMatrix:
    """Pairwise history similarities; the diagonal holds ``-inf`` so it never wins a max."""

    sim: np.ndarray
    ms: np.ndarray

    @classmethod
    def from_sim(cls, sim: np.ndarray) -> "SimilarityMatrix":
        sim = np.array(sim, dtype=float)
        np.fill_diagonal(sim, -np.inf)
        return cls(sim=sim, ms=sim.max(axis=1))


@dataclass(frozen=True)
class WpcraParams:
    eps_s: float = 1e-9
    eps_r: float = 1e-6
    eps_g: float = 1e-6
    eps_w: float = 1e-6
    max_iters: int = 100
    pardon: bool = True
    reweight: bool = True
    median: bool = True

    def __post_init__(self):
        for name in ("eps_s", "eps_r", "eps_g", "eps_w"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be > 0")
        if self.eps_w >= 0.5:
            raise ValueError("eps_w must be < 0.5")
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")


@dataclass
class WgmeResult:
    median: np.ndarray
    weights: np.ndarray
    objective: list[float] = field(default_factory=list)
    iterations: int = 0
    converged: bool = False


def _stack(updates) -> np.ndarray:
    U = np.asarray(updates, dtype=float)
    if U.ndim == 1:
        U = U[:, None]
    if U.ndim != 2 or U.shape[0] == 0:
        raise ValueError("updates must be a non-empty (N, d) array")
    return U


def pairwise_similarity(histories, eps_s: float = 1e-9) -> SimilarityMatrix:
    """Floored cosine similarity between client histories."""
    H = _stack(histories)
    if H.shape[0] < 2:
        raise ValueError("similarity needs at least two clients")
    if not eps_s > 0:
        raise ValueError("eps_s must be > 0")
    norms = np.maximum(np.linalg.norm(H, axis=1), eps_s)
    sim = (H @ H.T) / np.outer(norms, norms)
    return SimilarityMatrix.from_sim(sim)


def pardon(matrix: SimilarityMatrix) -> SimilarityMatrix:
    """Shrink ``sim_ij`` by ``ms_i / ms_j`` whenever client j looks more malicious than i.

    All comparisons use the malicious scores from before any change.  Only
    positive similarities are rescaled: shrinking a negative entry toward
    zero would raise it.
    """
    sim = matrix.sim.copy()
    ms = matrix.ms
    finite = np.isfinite(sim)
    fires = (ms[None, :] > ms[:, None]) & (ms[None, :] > 0) & finite & (sim > 0)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = ms[:, None] / ms[None, :]
    sim[fires] = sim[fires] * ratio[fires]
    return SimilarityMatrix(sim=sim, ms=sim.max(axis=1))


def trust_weights(ms: np.ndarray) -> np.ndarray:
    """Map malicious scores to raw weights in [0, 1]; the least suspicious client gets 1."""
    ms = np.minimum(np.asarray(ms, dtype=float), 1.0)
    slack = 1.0 - ms
    top = slack.max()
    if not top > 0:
        log.warning("all malicious scores are 1; falling back to uniform trust")
        return np.ones_like(ms)
    return slack / top


def logit_rescale(w: np.ndarray, eps_w: float = 1e-6) -> np.ndarray:
    """Spread raw weights with a logit centred at 0.5, clip to [0, 1], normalize."""
    w = np.clip(np.asarray(w, dtype=float), eps_w, 1.0 - eps_w)
    w = np.clip(np.log(w / (1.0 - w)) + 0.5, 0.0, 1.0)
    total = w.sum()
    if not total > 0:
        log.warning("all logit-rescaled weights are 0; falling back to uniform trust")
        return np.full(w.shape, 1.0 / w.size)
    return w / total


def wgme_objective(m: np.ndarray, updates, coef: np.ndarray) -> float:
    """``sum_i coef_i * ||m - update_i||``."""
    U = _stack(updates)
    return float(np.dot(coef, np.linalg.norm(U - m, axis=1)))


def wgme(
    updates,
    trust,
    sizes,
    eps_r: float = 1e-6,
    eps_g: float = 1e-6,
    max_iters: int = 100,
) -> WgmeResult:
    """Weighted geometric median by smoothed Weiszfeld iterations.

    Each client counts with multiplier ``trust_i * sizes_i``.  The iterate starts
    at the multiplier-weighted mean and stops once the relative objective change
    drops to ``eps_g`` or after ``max_iters`` reweighting steps.  The returned
    weights are the normalized Weiszfeld weights that produced the returned
    median, so ``median == weights @ updates``.
    """
    U = _stack(updates)
    coef = np.asarray(trust, dtype=float) * np.asarray(sizes, dtype=float)
    if coef.shape != (U.shape[0],):
        raise ValueError("trust and sizes must have one entry per update")
    if np.any(coef < 0) or not coef.sum() > 0:
        raise ValueError("trust * size multipliers must be non-negative with a positive sum")
    if not (eps_r > 0 and eps_g > 0):
        raise ValueError("eps_r and eps_g must be > 0")

    weights = coef / coef.sum()
    m = weights @ U
    g = wgme_objective(m, U, coef)
    res = WgmeResult(median=m, weights=weights, objective=[g])
    if g == 0.0:
        res.converged = True
        return res
    at_vertex = False
    for j in range(1, max_iters + 1):
        dist = np.linalg.norm(U - m, axis=1)
        if not at_vertex:
            jump = _optimal_vertex(U, coef, int(np.argmin(dist)))
            if jump is not None and wgme_objective(U[jump[0]], U, coef) < g:
                at_vertex = True
                m, weights = U[jump[0]].copy(), jump[1]
                g = wgme_objective(m, U, coef)
                res.objective.append(g)
                res.median, res.weights, res.iterations = m, weights, j
                continue
        v = coef / np.maximum(dist, eps_r)
        w_new = v / v.sum()
        m_new = w_new @ U
        g_new = wgme_objective(m_new, U, coef)
        if g_new > g:
            # The distance floor can make a step overshoot by a hair once the
            # iterate sits within eps_r of a data point; keep the better point.
            res.converged = True
            break
        m, weights = m_new, w_new
        res.objective.append(g_new)
        res.median, res.weights, res.iterations = m, weights, j
        if g_new == 0.0 or (g - g_new) / g_new <= eps_g:
            res.converged = True
            break
        g = g_new
    return res


def _optimal_vertex(U: np.ndarray, coef: np.ndarray, k: int):
    """Check whether data point ``k`` minimizes the weighted distance sum exactly.

    A data point is the minimizer when the pull of all other points, a sum of
    unit vectors scaled by their multipliers, is no stronger than the
    multiplier mass sitting on the point itself.  Weiszfeld steps only creep
    toward such a point, so detecting it lets the iteration land there.
    Returns ``(k, weights)`` with the weight spread over coincident points, or
    ``None``.
    """
    diff = U - U[k]
    d = np.linalg.norm(diff, axis=1)
    same = d == 0
    mass = coef[same].sum()
    if mass <= 0:
        return None
    others = ~same
    pull = np.linalg.norm((coef[others] / d[others]) @ diff[others]) if others.any() else 0.0
    if pull > mass:
        return None
    w = np.where(same, coef, 0.0)
    return k, w / mass


def aggregate_wpcra(
    updates, histories, sizes, params: WpcraParams | None = None
) -> tuple[np.ndarray, np.ndarray]:
    """Similarity-reweighted weighted geometric median.

    Returns the aggregated update and the final per-client weights.  The
    ablation switches in ``params`` drop pardoning, the whole reweighting stage
    (uniform trust) or the median (trust-and-size weighted mean).
    """
    params = params or WpcraParams()
    U = _stack(updates)
    n = U.shape[0]
    if params.reweight and n >= 2:
        sm = pairwise_similarity(histories, params.eps_s)
        if params.pardon:
            sm = pardon(sm)
        trust = logit_rescale(trust_weights(sm.ms), params.eps_w)
    else:
        trust = np.full(n, 1.0 / n)
    if not params.median:
        coef = trust * np.asarray(sizes, dtype=float)
        w = coef / coef.sum()
        return w @ U, w
    res = wgme(U, trust, sizes, params.eps_r, params.eps_g, params.max_iters)
    return res.median, res.weights


def aggregate_mean(updates, sizes) -> np.ndarray:
    """Data-size weighted mean of the updates."""
    return _mean_weights(sizes) @ _stack(updates)


def _mean_weights(sizes) -> np.ndarray:
    sizes = np.asarray(sizes, dtype=float)
    if np.any(sizes <= 0):
        raise ValueError("client sizes must be positive")
    return sizes / sizes.sum()


def krum_scores(updates, num_byzantine: int) -> np.ndarray:
    U = _stack(updates)
    n = U.shape[0]
    k = n - num_byzantine - 2
    if k < 1:
        raise ValueError(
            f"Krum needs N - R - 2 >= 1, got N={n}, R={num_byzantine}"
        )
    sq = np.sum(U * U, axis=1)
    d2 = np.maximum(sq[:, None] + sq[None, :] - 2.0 * U @ U.T, 0.0)
    np.fill_diagonal(d2, np.inf)
    return np.sort(d2, axis=1)[:, :k].sum(axis=1)


def aggregate_krum(updates, num_byzantine: int) -> np.ndarray:
    """The update whose N - R - 2 nearest neighbours are closest (squared L2); ties to lowest id."""
    U = _stack(updates)
    return U[int(np.argmin(krum_scores(U, num_byzantine)))].copy()


def aggregate_rfa(
    updates, sizes, eps_r: float = 1e-6, eps_g: float = 1e-6, max_iters: int = 100
) -> np.ndarray:
    """Geometric median with data-size multipliers only."""
    U = _stack(updates)
    return wgme(U, np.ones(U.shape[0]), sizes, eps_r, eps_g, max_iters).median


def aggregate_perturbing(
    updates,
    sizes,
    clip_norm: float,
    sigma: float,
    rng: np.random.Generator | None = None,
) -> np.ndarray:
    """Clip each update to norm ``clip_norm``, take the size-weighted mean, add N(0, sigma^2)."""
    U = _stack(updates)
    norms = np.linalg.norm(U, axis=1)
    if math.isinf(clip_norm):
        scale = np.ones_like(norms)
    else:
        with np.errstate(divide="ignore"):
            scale = np.minimum(1.0, clip_norm / norms)
    agg = _mean_weights(sizes) @ (U * scale[:, None])
    if sigma > 0:
        if rng is None:
            raise ValueError("a positive sigma needs a random generator")
        agg = agg + rng.normal(0.0, sigma, size=agg.shape)
    return agg
