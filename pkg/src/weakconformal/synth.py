"""Synthetic weak-supervision generators and the small trainers they feed.

Each generator draws iid records whose weak label provably contains the
truth; fixed seed means byte-identical output. Randomness is split into one
child stream per role (parameters, features, noise, thresholds, counts) via
SeedSequence, so adding a role never perturbs the others.

The trainers are deliberately plain full-batch gradient-descent linear
models (per-label logistic, multinomial logistic) with explicit
loss-and-gradient functions so their gradients can be checked against
finite differences.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .labels import ExplicitSet, Interval, PartialMatching, RankingPrefix, WeakRecord

__all__ = [
    "MulticlassConfig",
    "RankingSimConfig",
    "MulticlassData",
    "RankingData",
    "MatchingData",
    "RegressionData",
    "gen_multiclass",
    "gen_ranking",
    "gen_matching",
    "gen_regression",
    "to_records",
    "three_way_split",
    "train_per_label_logistic",
    "train_multinomial_logistic",
    "logistic_loss_grad",
    "multinomial_loss_grad",
    "predict_label_marginals",
    "predict_class_probs",
    "cumulative_probability_scores",
    "fit_ols",
]

# RNG role ids (SeedSequence([seed, role]))
_PARAMS, _FEATURES, _NOISE, _THRESH, _COUNTS = 0, 1, 2, 3, 4


def _rng(seed: int, role: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([int(seed), int(role)]))


def three_way_split(n: int, fractions: Sequence[float]) -> tuple[slice, slice, slice]:
    """Contiguous train/calibration/test slices with the given proportions."""
    if len(fractions) != 3 or any(f < 0 for f in fractions) or abs(sum(fractions) - 1) > 1e-9:
        raise ValueError("fractions must be three nonnegative values summing to 1")
    n1 = int(round(n * fractions[0]))
    n2 = int(round(n * fractions[1]))
    n1, n2 = min(n1, n), min(n2, n - n1)
    return slice(0, n1), slice(n1, n1 + n2), slice(n1 + n2, n)


@dataclass(frozen=True)
class MulticlassConfig:
    n: int = 10_000
    k: int = 10
    d: int = 2
    sigma: float = 1.0
    seed: int = 0
    split: tuple[float, float, float] = (0.3, 0.2, 0.5)
    min_weak_size: int = 1

    def __post_init__(self):
        if self.n < 1 or self.k < 2 or self.d < 1:
            raise ValueError("need n >= 1, k >= 2, d >= 1")
        if self.sigma < 0:
            raise ValueError("sigma must be nonnegative")
        if not 1 <= self.min_weak_size <= self.k:
            raise ValueError("min_weak_size must be in [1, k]")


@dataclass(frozen=True)
class RankingSimConfig:
    n: int = 10_000
    k: int = 7
    d: int = 2
    sigma: float = 1.0
    seed: int = 0
    prefix_rate: float = 0.5  # Poisson rate of extra revealed positions

    def __post_init__(self):
        if self.n < 1 or self.k < 2 or self.d < 1:
            raise ValueError("need n >= 1, k >= 2, d >= 1")
        if self.sigma < 0 or self.prefix_rate < 0:
            raise ValueError("sigma and prefix_rate must be nonnegative")


@dataclass
class MulticlassData:
    x: np.ndarray
    y: np.ndarray
    weak: list[ExplicitSet]
    oracle_scores: np.ndarray
    theta: np.ndarray


@dataclass
class RankingData:
    x: np.ndarray
    y: list[tuple[int, ...]]
    weak: list[RankingPrefix]
    oracle_scores: np.ndarray
    theta: np.ndarray


@dataclass
class MatchingData:
    costs: np.ndarray  # (n, k, k)
    y: list[tuple[int, ...]]
    weak: list[PartialMatching]


@dataclass
class RegressionData:
    x: np.ndarray
    y: np.ndarray
    weak: list[Interval]
    beta: np.ndarray


def _oracle_scores(cfg, n: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Shared noise model: class scores x^T theta_y + sigma * noise."""
    rng_p = _rng(cfg.seed, _PARAMS)
    theta = rng_p.standard_normal((cfg.k, cfg.d))
    theta /= np.linalg.norm(theta, axis=1, keepdims=True)  # uniform directions
    x = _rng(cfg.seed, _FEATURES).standard_normal((n, cfg.d))
    scores = x @ theta.T + cfg.sigma * _rng(cfg.seed, _NOISE).standard_normal((n, cfg.k))
    return x, scores, theta


def gen_multiclass(cfg: MulticlassConfig) -> MulticlassData:
    """Weak multiclass data: Y is the score argmin, W the labels whose score
    falls below a uniform random cut between the row's min and max.

    With min_weak_size > 1 the cut is raised to the min_weak_size-th
    smallest score, so every weak set has at least that many labels. The
    argmin always survives the cut: Y is in W by construction.
    """
    x, scores, theta = _oracle_scores(cfg, cfg.n)
    y = scores.argmin(axis=1)
    row_min = scores.min(axis=1)
    row_max = scores.max(axis=1)
    u = _rng(cfg.seed, _THRESH).uniform(size=cfg.n)
    cut = row_min + u * (row_max - row_min)
    if cfg.min_weak_size > 1:
        kth = np.partition(scores, cfg.min_weak_size - 1, axis=1)[:, cfg.min_weak_size - 1]
        cut = np.maximum(cut, kth)
    member = scores <= cut[:, None]
    weak = [ExplicitSet(tuple(np.flatnonzero(row))) for row in member]
    return MulticlassData(x=x, y=y, weak=weak, oracle_scores=scores, theta=theta)


def gen_ranking(cfg: RankingSimConfig) -> RankingData:
    """Weak ranking data: the truth sorts oracle scores descending (high
    score = top rank); the weak label reveals the top
    min(k, 1 + Poisson(prefix_rate)) positions."""
    x, scores, theta = _oracle_scores(cfg, cfg.n)
    order = np.argsort(-scores, axis=1, kind="stable")
    lengths = 1 + _rng(cfg.seed, _COUNTS).poisson(cfg.prefix_rate, size=cfg.n)
    lengths = np.minimum(lengths, cfg.k)
    rankings = [tuple(int(v) for v in row) for row in order]
    weak = [RankingPrefix(r[:m], cfg.k) for r, m in zip(rankings, lengths)]
    return RankingData(x=x, y=rankings, weak=weak, oracle_scores=scores, theta=theta)


def gen_matching(n: int, k: int, noise: float, seed: int = 0) -> MatchingData:
    """Weak matching data: iid noise costs with the planted assignment's
    entries lowered by 1 (the unique minimizer at noise 0); the weak label
    reveals min(k, 1 + Poisson(0.5)) of the planted pairs."""
    if n < 1 or k < 2 or noise < 0:
        raise ValueError("need n >= 1, k >= 2, noise >= 0")
    rng_p = _rng(seed, _PARAMS)
    planted = np.array([rng_p.permutation(k) for _ in range(n)])
    costs = noise * _rng(seed, _NOISE).standard_normal((n, k, k))
    rows = np.arange(k)
    for i in range(n):
        costs[i, rows, planted[i]] -= 1.0
    rng_c = _rng(seed, _COUNTS)
    lengths = np.minimum(1 + rng_c.poisson(0.5, size=n), k)
    weak = []
    for i in range(n):
        revealed = rng_c.choice(k, size=int(lengths[i]), replace=False)
        pairs = tuple((int(uu), int(planted[i, uu])) for uu in revealed)
        weak.append(PartialMatching(pairs, k))
    y = [tuple(int(v) for v in row) for row in planted]
    return MatchingData(costs=costs, y=y, weak=weak)


def gen_regression(
    n: int,
    d: int,
    mu: float,
    seed: int = 0,
    min_half_width: float | None = None,
) -> RegressionData:
    """Weak regression data: linear-Gaussian response with interval weak
    label Y +/- Z, Z ~ Normal(mu, 0.0001) resampled until positive (and
    until >= min_half_width when given, for lower-bounded interval length).
    """
    if n < 1 or d < 1 or mu <= 0:
        raise ValueError("need n >= 1, d >= 1, mu > 0")
    beta = _rng(seed, _PARAMS).standard_normal(d)
    x = _rng(seed, _FEATURES).standard_normal((n, d))
    y = x @ beta + 0.5 * _rng(seed, _NOISE).standard_normal(n)
    rng_t = _rng(seed, _THRESH)
    z = mu + 0.01 * rng_t.standard_normal(n)
    floor = 0.0 if min_half_width is None else float(min_half_width)
    for _ in range(1000):
        bad = z <= floor if floor > 0 else z <= 0
        if not bad.any():
            break
        z[bad] = mu + 0.01 * rng_t.standard_normal(int(bad.sum()))
    else:  # pragma: no cover
        raise RuntimeError("half-width resampling did not terminate")
    weak = [Interval(yi - zi, yi + zi) for yi, zi in zip(y, z)]
    return RegressionData(x=x, y=y, weak=weak, beta=beta)


def to_records(data) -> list[WeakRecord]:
    """Flatten a generated dataset into WeakRecords (costs become features)."""
    if isinstance(data, MatchingData):
        return [
            WeakRecord(data.costs[i].ravel(), data.weak[i], data.y[i])
            for i in range(len(data.y))
        ]
    return [
        WeakRecord(data.x[i], data.weak[i], data.y[i]) for i in range(len(data.weak))
    ]


# --- trainers ----------------------------------------------------------------


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def _with_bias(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    return np.concatenate([x, np.ones((x.shape[0], 1))], axis=1)


def logistic_loss_grad(
    weights: np.ndarray, xb: np.ndarray, targets: np.ndarray
) -> tuple[float, np.ndarray]:
    """k independent binary logistic losses, averaged over records.

    weights (k, p), xb (n, p), targets (n, k) in {0, 1}; returns the summed
    per-label mean losses and the matching (k, p) gradient.
    """
    n = xb.shape[0]
    z = xb @ weights.T
    loss = float((np.logaddexp(0.0, z) - targets * z).sum() / n)
    grad = (_sigmoid(z) - targets).T @ xb / n
    return loss, grad


def multinomial_loss_grad(
    weights: np.ndarray, xb: np.ndarray, y: np.ndarray
) -> tuple[float, np.ndarray]:
    """Softmax cross-entropy (mean over records) with (k, p) weights."""
    n = xb.shape[0]
    z = xb @ weights.T
    z = z - z.max(axis=1, keepdims=True)
    logz = np.log(np.exp(z).sum(axis=1, keepdims=True))
    logp = z - logz
    loss = float(-logp[np.arange(n), y].sum() / n)
    p = np.exp(logp)
    p[np.arange(n), y] -= 1.0
    grad = p.T @ xb / n
    return loss, grad


def train_per_label_logistic(
    x: np.ndarray,
    indicators: np.ndarray,
    epochs: int = 200,
    lr: float = 0.5,
) -> tuple[np.ndarray, list[float]]:
    """Fit P(y in W | x) per label by full-batch gradient descent.

    indicators is the (n, k) 0/1 weak-membership matrix. Returns (k, d+1)
    weights (bias last) and the loss trace.
    """
    xb = _with_bias(x)
    targets = np.asarray(indicators, dtype=float)
    weights = np.zeros((targets.shape[1], xb.shape[1]))
    losses = []
    for _ in range(epochs):
        loss, grad = logistic_loss_grad(weights, xb, targets)
        losses.append(loss)
        weights = weights - lr * grad
    losses.append(logistic_loss_grad(weights, xb, targets)[0])
    return weights, losses


def train_multinomial_logistic(
    x: np.ndarray,
    y: np.ndarray,
    k: int,
    epochs: int = 200,
    lr: float = 0.5,
) -> tuple[np.ndarray, list[float]]:
    """Fit P(Y = y | x) by softmax regression; (k, d+1) weights, bias last."""
    xb = _with_bias(x)
    y = np.asarray(y, dtype=int)
    if y.min() < 0 or y.max() >= k:
        raise ValueError("labels out of range")
    weights = np.zeros((k, xb.shape[1]))
    losses = []
    for _ in range(epochs):
        loss, grad = multinomial_loss_grad(weights, xb, y)
        losses.append(loss)
        weights = weights - lr * grad
    losses.append(multinomial_loss_grad(weights, xb, y)[0])
    return weights, losses


def predict_label_marginals(weights: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Per-label weak-membership probabilities q_y(x), shape (n, k)."""
    return _sigmoid(_with_bias(x) @ weights.T)


def predict_class_probs(weights: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Softmax class probabilities, shape (n, k)."""
    z = _with_bias(x) @ weights.T
    z = z - z.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def cumulative_probability_scores(probs: np.ndarray) -> np.ndarray:
    """Deterministic cumulative-probability conformity scores.

    s(x, y) = sum of all class probabilities at least as large as class y's
    (so the modal class scores its own probability, the least likely class
    scores 1). Lower is more plausible. Shape in = shape out = (n, k).
    """
    p = np.asarray(probs, dtype=float)
    if p.ndim != 2:
        raise ValueError("probs must be (n, k)")
    ge = p[:, :, None] >= p[:, None, :]  # ge[i, k, y]: p_ik >= p_iy
    return np.einsum("iky,ik->iy", ge, p)


def fit_ols(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Least-squares coefficients (no intercept, matching the generator)."""
    coef, *_ = np.linalg.lstsq(np.asarray(x, dtype=float), np.asarray(y, dtype=float), rcond=None)
    return coef
