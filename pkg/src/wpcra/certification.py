"""Ex-post clipping and noise, randomized smoothing and the certified radius."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .model import predict

__all__ = [
    "AttackerTerms",
    "CertConfig",
    "RadiusReport",
    "normal_cdf",
    "rho_schedule",
    "clip_and_perturb",
    "smooth_predict",
    "hoeffding_bounds",
    "certified_radius",
    "model_radius",
    "certify",
]


def normal_cdf(x: float) -> float:
    """Standard normal CDF via ``erfc``; exact 0.5 at 0 and accurate in both tails."""
    return 0.5 * math.erfc(-x / math.sqrt(2.0))


def rho_schedule(t: int) -> float:
    """Clipping threshold at round ``t``: grows linearly from 2."""
    return 0.025 * t + 2.0


@dataclass(frozen=True)
class AttackerTerms:
    """Per-attacker quantities entering the radius: scale, learning rate,
    local iterations, poison fraction and final aggregation weight."""

    scale: float
    learning_rate: float
    local_iterations: int
    poison_fraction: float
    weight: float

    def energy(self) -> float:
        return (
            self.scale * self.learning_rate * self.local_iterations
            * self.poison_fraction * self.weight
        ) ** 2


@dataclass(frozen=True)
class CertConfig:
    """Smoothing and certification settings.

    ``sigma`` is a constant or a per-round sequence indexed from round 1;
    ``rho`` maps a round index to its clipping threshold.
    """

    sigma: float | Sequence[float] = 0.01
    rho: Callable[[int], float] = rho_schedule
    num_samples: int = 1000
    eps_alpha: float = 0.001
    lipschitz: float = 1.0
    attackers: tuple[AttackerTerms, ...] = ()
    adversarial_round: int = 1
    final_round: int = 1

    def __post_init__(self):
        object.__setattr__(self, "attackers", tuple(self.attackers))
        if self.num_samples < 2:
            raise ValueError("num_samples must be >= 2")
        if not 0 < self.eps_alpha <= 1:
            raise ValueError("eps_alpha must be in (0, 1]")
        if not self.lipschitz > 0:
            raise ValueError("lipschitz must be > 0")
        if self.adversarial_round < 1 or self.final_round < self.adversarial_round:
            raise ValueError("need 1 <= adversarial_round <= final_round")

    def sigma_at(self, t: int) -> float:
        if isinstance(self.sigma, (int, float)):
            return float(self.sigma)
        return float(self.sigma[t - 1])


@dataclass
class RadiusReport:
    """Per-sample smoothing outcome and certified radius (0 marks abstention)."""

    counts: np.ndarray
    c_a: np.ndarray
    c_b: np.ndarray
    p_a: np.ndarray
    p_b: np.ndarray
    p_a_lower: np.ndarray
    p_b_upper: np.ndarray
    radius: np.ndarray
    abstain: np.ndarray
    model_radius: float = 0.0
    log_radius: float | None = None


def clip_and_perturb(
    theta: np.ndarray,
    t: int,
    T: int,
    sigma: float,
    rho: float,
    rng: np.random.Generator | None = None,
) -> np.ndarray:
    """Scale ``theta`` into the L2 ball of radius ``rho``; add N(0, sigma^2 I) unless ``t == T``."""
    if t < 1:
        raise ValueError(f"round index must be >= 1, got {t}")
    theta = np.asarray(theta, dtype=float)
    out = theta / max(1.0, float(np.linalg.norm(theta)) / rho)
    if t < T and sigma > 0:
        if rng is None:
            raise ValueError("perturbation needs a random generator")
        out = out + rng.normal(0.0, sigma, size=out.shape)
    return out


def _top_two(counts: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    order = np.argsort(-counts, axis=1, kind="stable")
    return order[:, 0], order[:, 1]


def smooth_predict(
    theta: np.ndarray,
    X: np.ndarray,
    num_classes: int,
    num_samples: int,
    sigma: float,
    rng: np.random.Generator,
):
    """Monte-Carlo vote counts of ``num_samples`` Gaussian-perturbed copies of ``theta``.

    ``X`` may hold one sample or many; all samples share the same noise draws.
    Returns ``(counts, c_a, c_b, p_a, p_b)`` with the top two classes by count,
    ties resolved toward the lower class index.
    """
    if num_samples < 2:
        raise ValueError("num_samples must be >= 2")
    single = np.ndim(X) == 1
    X = np.atleast_2d(np.asarray(X, dtype=float))
    theta = np.asarray(theta, dtype=float)
    noise = rng.normal(0.0, sigma, size=(num_samples, theta.size)) if sigma > 0 else None
    counts = np.zeros((X.shape[0], num_classes), dtype=np.int64)
    rows = np.arange(X.shape[0])
    for k in range(num_samples):
        noisy = theta if noise is None else theta + noise[k]
        np.add.at(counts, (rows, predict(noisy, X)), 1)
    c_a, c_b = _top_two(counts)
    p_a = counts[rows, c_a] / num_samples
    p_b = counts[rows, c_b] / num_samples
    if single:
        return counts[0], int(c_a[0]), int(c_b[0]), float(p_a[0]), float(p_b[0])
    return counts, c_a, c_b, p_a, p_b


def hoeffding_bounds(p_a, p_b, num_samples: int, eps_alpha: float):
    """One-sided Hoeffding bounds: lower on the top class, upper on the runner-up."""
    slack = math.sqrt(math.log(1.0 / eps_alpha) / (2.0 * num_samples))
    return np.clip(np.asarray(p_a) - slack, 0.0, 1.0), np.clip(np.asarray(p_b) + slack, 0.0, 1.0)


def certified_radius(p_a_lower, p_b_upper, cfg: CertConfig):
    """Certified attack magnitude for each sample.

    Returns 0 where the bounds do not separate the top two classes (abstain)
    and ``inf`` where the bound diverges: either the log argument reaches 0
    (``p_a_lower = 1``, ``p_b_upper = 0``) or every attacker weight is 0.
    """
    R = len(cfg.attackers)
    if R == 0:
        raise ValueError("certification needs at least one attacker")
    pa = np.asarray(p_a_lower, dtype=float)
    pb = np.asarray(p_b_upper, dtype=float)

    if any(cfg.sigma_at(t) <= 0 for t in range(cfg.adversarial_round, cfg.final_round + 1)):
        raise ValueError("certification needs a positive noise level in every round from t_a to T")
    energy = math.fsum(a.energy() for a in cfg.attackers)
    clip_prob = 1.0
    for t in range(cfg.adversarial_round, cfg.final_round + 1):
        clip_prob *= math.erf(cfg.rho(t) / cfg.sigma_at(t) / math.sqrt(2.0))
    denom = 2.0 * R * cfg.lipschitz**2 * energy * clip_prob
    sigma_a = cfg.sigma_at(cfg.adversarial_round)

    gap = (np.sqrt(pa) - np.sqrt(pb)) ** 2
    with np.errstate(divide="ignore"):
        numer = -np.log1p(-gap) * sigma_a**2
    with np.errstate(divide="ignore", invalid="ignore"):
        radius = np.sqrt(numer / denom) if denom > 0 else np.full(pa.shape, np.inf)
    radius = np.where(pa > pb, radius, 0.0)
    return float(radius) if radius.ndim == 0 else radius


def model_radius(radii) -> tuple[float, float | None]:
    """Largest per-sample radius and its base-10 log (``None`` when every sample abstains)."""
    r = np.asarray(radii, dtype=float)
    r = r[r > 0]
    if r.size == 0:
        return 0.0, None
    top = float(r.max())
    return top, math.inf if math.isinf(top) else math.log10(top)


def certify(theta: np.ndarray, X: np.ndarray, num_classes: int, cfg: CertConfig,
            rng: np.random.Generator) -> RadiusReport:
    """Smooth ``theta`` on every row of ``X`` and compute per-sample radii."""
    sigma_T = cfg.sigma_at(cfg.final_round)
    counts, c_a, c_b, p_a, p_b = smooth_predict(theta, X, num_classes, cfg.num_samples, sigma_T, rng)
    lo, hi = hoeffding_bounds(p_a, p_b, cfg.num_samples, cfg.eps_alpha)
    radius = np.atleast_1d(certified_radius(lo, hi, cfg))
    top, log_top = model_radius(radius)
    return RadiusReport(
        counts=counts, c_a=c_a, c_b=c_b, p_a=p_a, p_b=p_b,
        p_a_lower=lo, p_b_upper=hi, radius=radius, abstain=~(lo > hi),
        model_radius=top, log_radius=log_top,
    )
