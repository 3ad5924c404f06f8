"""End-to-end experiment harness over the synthetic generators.

One run = one task, one alpha, n_trials independent trials. Each trial
generates a fresh dataset from a trial-derived seed, splits it
train/calibration/test, fits whatever model the task needs on the training
block, calibrates each requested method on the calibration block, and
evaluates on the test block. Rows land in a fixed-schema CSV (appended,
never overwritten) plus a JSON-lines twin carrying extra fields; a
metadata JSON echoes the configuration.

Methods:
  wsc          calibrate on best-case (weak) scores     -> weak coverage
  fsc          calibrate on true-label scores           -> strong coverage
  gws          greedy randomized sets from fitted label marginals,
               conformalized through the nested score (classify only)
  pessimistic  calibrate on worst-case scores (classify/regress only)

Reported seconds cover calibration plus evaluation for the method's row;
model fitting is shared across methods and excluded. For rank/match tasks
set sizes are level-set counts capped at m_max (coverage columns stay
exact); the capped fraction is in the JSON rows, not the CSV.
"""
from __future__ import annotations

import dataclasses
import itertools
import json
import math
import os
import time
from bisect import bisect_right
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import synth
from .conformal import conformal_threshold
from .greedy import label_independent_nested_scores
from .labels import ExplicitSet
from .matching import MatchingProblem, matching_score, min_matching_cost, partial_matching_score
from .mbest import Enumerator
from .ranking import (
    PsiSpec,
    RankingProblem,
    complete_prefix,
    listnet_train,
    predict_relevances,
    rank_scores_batch,
)
from .regression import interval_partial_score, interval_pessimistic_score

__all__ = ["ExperimentConfig", "TrialResult", "run", "CSV_COLUMNS"]

CSV_COLUMNS = [
    "trial",
    "method",
    "param",
    "strong_cov",
    "weak_cov",
    "avg_size",
    "p50_size",
    "p90_size",
    "threshold",
    "seconds",
]

_TASKS = ("classify", "rank", "match", "regress")
_DEFAULT_K = {"classify": 10, "rank": 7, "match": 6, "regress": 0}
# full-space scoring beats per-record best-first enumeration up to this size
_EXHAUSTIVE_SPACE_CAP = 10_000
_METHODS = {
    "classify": ("wsc", "fsc", "gws", "pessimistic"),
    "rank": ("wsc", "fsc"),
    "match": ("wsc", "fsc"),
    "regress": ("wsc", "fsc", "pessimistic"),
}


@dataclass(frozen=True)
class ExperimentConfig:
    task: str = "classify"
    alpha: float = 0.1
    n_trials: int = 20
    seed: int = 0
    n: int = 4000
    split: tuple[float, float, float] = (0.25, 0.25, 0.5)
    k: int | None = None
    d: int = 2
    sigma: float = 1.0  # classify/rank score noise
    noise: float = 0.25  # match cost noise
    mu: float = 0.05  # regress mean half-width
    min_weak_size: int = 1  # classify: lower bound on |W|
    min_half_width: float | None = None  # regress: lower bound on Z
    methods: tuple[str, ...] = ("wsc", "fsc")
    m_max: int = 20
    psi_c: float = 0.0  # rank: 0 = hinge, > 0 = exp-weighted
    out: str | None = None

    def __post_init__(self):
        if self.task not in _TASKS:
            raise ValueError(f"task must be one of {_TASKS}")
        if not 0.0 < self.alpha < 1.0:
            raise ValueError("alpha must be in (0, 1)")
        if self.n_trials < 1 or self.n < 10 or self.m_max < 1:
            raise ValueError("n_trials >= 1, n >= 10, m_max >= 1 required")
        bad = [m for m in self.methods if m not in _METHODS[self.task]]
        if bad:
            raise ValueError(f"methods {bad} not available for task {self.task!r}")
        object.__setattr__(self, "methods", tuple(self.methods))
        object.__setattr__(self, "split", tuple(self.split))

    @property
    def resolved_k(self) -> int:
        return self.k if self.k is not None else _DEFAULT_K[self.task]

    @property
    def param(self) -> float:
        return {"classify": self.sigma, "rank": self.sigma, "match": self.noise, "regress": self.mu}[
            self.task
        ]

    def psi(self) -> PsiSpec:
        return PsiSpec.hinge() if self.psi_c == 0 else PsiSpec.exp_weighted(self.psi_c)


@dataclass
class TrialResult:
    trial: int
    method: str
    param: float
    strong_cov: float
    weak_cov: float
    avg_size: float
    p50_size: float
    p90_size: float
    threshold: float
    seconds: float
    truncation_fraction: float = 0.0

    def csv_row(self) -> str:
        vals = [getattr(self, c) for c in CSV_COLUMNS]
        return ",".join(
            str(v) if isinstance(v, (int, str)) else repr(float(v)) for v in vals
        )


def _trial_seed(seed: int, trial: int) -> int:
    return int(np.random.SeedSequence([seed, trial]).generate_state(1)[0])


def _weak_mask(weak: Sequence[ExplicitSet], k: int) -> np.ndarray:
    mask = np.zeros((len(weak), k), dtype=bool)
    for i, w in enumerate(weak):
        mask[i, list(w.labels)] = True
    return mask


def _size_stats(sizes: np.ndarray) -> tuple[float, float, float]:
    if np.isinf(sizes).all():
        # quantile interpolation between infinities warns; the answer is plain
        return math.inf, math.inf, math.inf
    return (
        float(sizes.mean()),
        float(np.quantile(sizes, 0.5)),
        float(np.quantile(sizes, 0.9)),
    )


def _capped_levelset_counts(
    problem, thresholds: Sequence[float], cap: int
) -> tuple[list[int], list[bool]]:
    """Sizes of {y : score <= t} for several t on one problem, capped.

    Shares a single best-first enumeration across thresholds. The returned
    flag marks counts that hit the cap with possibly more members beyond it.
    """
    t_max = max(thresholds)
    state = Enumerator(problem)
    target = 1
    while True:
        state.extend_to(min(target, cap))
        if state.exhausted or len(state.configs) >= cap or state.scores[-1] > t_max:
            break
        target *= 2
    counts, flags = [], []
    for t in thresholds:
        c = bisect_right(state.scores, t)
        capped = not state.exhausted and c >= len(state.configs) and c >= cap
        counts.append(min(c, cap))
        flags.append(bool(capped))
    return counts, flags


def _threshold_rows(
    cfg: ExperimentConfig,
    trial: int,
    cal_scores: dict[str, np.ndarray],
    evaluate,
) -> list[TrialResult]:
    """Calibrate each method on its scores and evaluate with the shared fn.

    evaluate(threshold_value) must return (strong_cov, weak_cov, sizes,
    truncation_fraction) on the test block.
    """
    rows = []
    for method in cfg.methods:
        start = time.perf_counter()
        t = conformal_threshold(cal_scores[method], cfg.alpha)
        strong_cov, weak_cov, sizes, trunc = evaluate(t.value, method)
        avg, p50, p90 = _size_stats(sizes)
        rows.append(
            TrialResult(
                trial=trial,
                method=method,
                param=cfg.param,
                strong_cov=strong_cov,
                weak_cov=weak_cov,
                avg_size=avg,
                p50_size=p50,
                p90_size=p90,
                threshold=t.value,
                seconds=time.perf_counter() - start,
                truncation_fraction=trunc,
            )
        )
    return rows


# --- per-task trials ---------------------------------------------------------


def _classify_trial(cfg: ExperimentConfig, trial: int) -> list[TrialResult]:
    k = cfg.resolved_k
    seed = _trial_seed(cfg.seed, trial)
    data = synth.gen_multiclass(
        synth.MulticlassConfig(
            n=cfg.n, k=k, d=cfg.d, sigma=cfg.sigma, seed=seed,
            split=cfg.split, min_weak_size=cfg.min_weak_size,
        )
    )
    tr, ca, te = synth.three_way_split(cfg.n, cfg.split)
    mask_ca = _weak_mask(data.weak[ca], k)
    mask_te = _weak_mask(data.weak[te], k)

    need_probs = any(m in cfg.methods for m in ("wsc", "fsc", "pessimistic"))
    cal_scores: dict[str, np.ndarray] = {}
    score_ca = score_te = None
    if need_probs:
        w_model, _ = synth.train_multinomial_logistic(data.x[tr], data.y[tr], k)
        score_ca = synth.cumulative_probability_scores(
            synth.predict_class_probs(w_model, data.x[ca])
        )
        score_te = synth.cumulative_probability_scores(
            synth.predict_class_probs(w_model, data.x[te])
        )
        if "wsc" in cfg.methods:
            cal_scores["wsc"] = np.where(mask_ca, score_ca, np.inf).min(axis=1)
        if "fsc" in cfg.methods:
            cal_scores["fsc"] = score_ca[np.arange(score_ca.shape[0]), data.y[ca]]
        if "pessimistic" in cfg.methods:
            cal_scores["pessimistic"] = np.where(mask_ca, score_ca, -np.inf).max(axis=1)
    nested_ca = nested_te = None
    if "gws" in cfg.methods:
        w_marg, _ = synth.train_per_label_logistic(
            data.x[tr], _weak_mask(data.weak[tr], k).astype(float)
        )
        q_ca = synth.predict_label_marginals(w_marg, data.x[ca])
        q_te = synth.predict_label_marginals(w_marg, data.x[te])
        u_ca = np.random.default_rng(np.random.SeedSequence([seed, 101])).uniform(
            size=q_ca.shape[0]
        )
        u_te = np.random.default_rng(np.random.SeedSequence([seed, 102])).uniform(
            size=q_te.shape[0]
        )
        nested_ca = label_independent_nested_scores(q_ca, u_ca)
        nested_te = label_independent_nested_scores(q_te, u_te)
        cal_scores["gws"] = np.where(mask_ca, nested_ca, np.inf).min(axis=1)

    y_te = data.y[te]

    def evaluate(t_value: float, method: str):
        s_te = nested_te if method == "gws" else score_te
        member = s_te <= t_value
        strong = member[np.arange(member.shape[0]), y_te]
        weak = (member & mask_te).any(axis=1)
        sizes = member.sum(axis=1).astype(float)
        return float(strong.mean()), float(weak.mean()), sizes, 0.0

    return _threshold_rows(cfg, trial, cal_scores, evaluate)


def _rank_trial(cfg: ExperimentConfig, trial: int) -> list[TrialResult]:
    k = cfg.resolved_k
    seed = _trial_seed(cfg.seed, trial)
    data = synth.gen_ranking(
        synth.RankingSimConfig(n=cfg.n, k=k, d=cfg.d, sigma=cfg.sigma, seed=seed)
    )
    tr, ca, te = synth.three_way_split(cfg.n, cfg.split)
    psi = cfg.psi()
    weights, _ = listnet_train(data.x[tr], data.y[tr])
    rel_ca = predict_relevances(weights, data.x[ca])
    rel_te = predict_relevances(weights, data.x[te])

    perms_ca = np.array(data.y[ca])
    perms_te = np.array(data.y[te])
    compl_ca = np.array(
        [complete_prefix(rel_ca[i], w) for i, w in enumerate(data.weak[ca])]
    )
    compl_te = np.array(
        [complete_prefix(rel_te[i], w) for i, w in enumerate(data.weak[te])]
    )
    strong_ca = rank_scores_batch(rel_ca, perms_ca, psi)
    strong_te = rank_scores_batch(rel_te, perms_te, psi)
    weak_ca = rank_scores_batch(rel_ca, compl_ca, psi)
    weak_te = rank_scores_batch(rel_te, compl_te, psi)

    cal_scores: dict[str, np.ndarray] = {}
    if "wsc" in cfg.methods:
        cal_scores["wsc"] = weak_ca
    if "fsc" in cfg.methods:
        cal_scores["fsc"] = strong_ca

    thresholds = {
        m: conformal_threshold(cal_scores[m], cfg.alpha).value for m in cfg.methods
    }
    t_list = list(thresholds.values())
    n_te = rel_te.shape[0]
    counts = np.zeros((n_te, len(t_list)))
    capped = np.zeros((n_te, len(t_list)), dtype=bool)
    for i in range(n_te):
        c, f = _capped_levelset_counts(
            RankingProblem(rel_te[i], psi), t_list, cfg.m_max
        )
        counts[i] = c
        capped[i] = f

    def evaluate(t_value: float, method: str):
        col = list(thresholds).index(method)
        strong = strong_te <= t_value
        weak = weak_te <= t_value
        return (
            float(strong.mean()),
            float(weak.mean()),
            counts[:, col],
            float(capped[:, col].mean()),
        )

    return _threshold_rows(cfg, trial, cal_scores, evaluate)


def _match_trial(cfg: ExperimentConfig, trial: int) -> list[TrialResult]:
    k = cfg.resolved_k
    seed = _trial_seed(cfg.seed, trial)
    data = synth.gen_matching(cfg.n, k, cfg.noise, seed)
    tr, ca, te = synth.three_way_split(cfg.n, cfg.split)

    def translated(block: slice) -> tuple[np.ndarray, np.ndarray, list[float]]:
        idx = range(block.start, block.stop)
        strong, weak, bases = [], [], []
        for i in idx:
            base = min_matching_cost(data.costs[i])
            strong.append(matching_score(data.costs[i], data.y[i]) - base)
            weak.append(partial_matching_score(data.costs[i], data.weak[i]) - base)
            bases.append(base)
        return np.asarray(strong), np.asarray(weak), bases

    strong_ca, weak_ca, _ = translated(ca)
    strong_te, weak_te, bases_te = translated(te)

    cal_scores: dict[str, np.ndarray] = {}
    if "wsc" in cfg.methods:
        cal_scores["wsc"] = weak_ca
    if "fsc" in cfg.methods:
        cal_scores["fsc"] = strong_ca

    thresholds = {
        m: conformal_threshold(cal_scores[m], cfg.alpha).value for m in cfg.methods
    }
    t_list = list(thresholds.values())
    n_te = strong_te.size
    counts = np.zeros((n_te, len(t_list)))
    capped = np.zeros((n_te, len(t_list)), dtype=bool)
    if math.factorial(k) <= _EXHAUSTIVE_SPACE_CAP:
        # small spaces: score every assignment at once instead of running the
        # best-first engine per record (reported values are identical)
        perms = np.array(list(itertools.permutations(range(k))))
        rows = np.arange(k)
        for j, i in enumerate(range(te.start, te.stop)):
            all_scores = data.costs[i][rows, perms].sum(axis=1) - bases_te[j]
            exact = (all_scores[None, :] <= np.asarray(t_list)[:, None]).sum(axis=1)
            counts[j] = np.minimum(exact, cfg.m_max)
            capped[j] = exact > cfg.m_max
    else:
        for j, i in enumerate(range(te.start, te.stop)):
            problem = MatchingProblem(data.costs[i], offset=bases_te[j])
            c, f = _capped_levelset_counts(problem, t_list, cfg.m_max)
            counts[j] = c
            capped[j] = f

    def evaluate(t_value: float, method: str):
        col = list(thresholds).index(method)
        strong = strong_te <= t_value
        weak = weak_te <= t_value
        return (
            float(strong.mean()),
            float(weak.mean()),
            counts[:, col],
            float(capped[:, col].mean()),
        )

    return _threshold_rows(cfg, trial, cal_scores, evaluate)


def _regress_trial(cfg: ExperimentConfig, trial: int) -> list[TrialResult]:
    seed = _trial_seed(cfg.seed, trial)
    data = synth.gen_regression(
        cfg.n, cfg.d, cfg.mu, seed, min_half_width=cfg.min_half_width
    )
    tr, ca, te = synth.three_way_split(cfg.n, cfg.split)
    beta = synth.fit_ols(data.x[tr], data.y[tr])
    pred_ca = data.x[ca] @ beta
    pred_te = data.x[te] @ beta

    weak_ca_labels = data.weak[ca]
    weak_te_labels = data.weak[te]
    cal_scores: dict[str, np.ndarray] = {}
    if "wsc" in cfg.methods:
        cal_scores["wsc"] = np.array(
            [interval_partial_score(p, w) for p, w in zip(pred_ca, weak_ca_labels)]
        )
    if "fsc" in cfg.methods:
        cal_scores["fsc"] = np.abs(pred_ca - data.y[ca])
    if "pessimistic" in cfg.methods:
        cal_scores["pessimistic"] = np.array(
            [interval_pessimistic_score(p, w) for p, w in zip(pred_ca, weak_ca_labels)]
        )

    strong_te = np.abs(pred_te - data.y[te])
    weak_te = np.array(
        [interval_partial_score(p, w) for p, w in zip(pred_te, weak_te_labels)]
    )

    def evaluate(t_value: float, method: str):
        strong = strong_te <= t_value
        weak = weak_te <= t_value
        sizes = np.full(strong_te.size, 2.0 * t_value)
        return float(strong.mean()), float(weak.mean()), sizes, 0.0

    return _threshold_rows(cfg, trial, cal_scores, evaluate)


_TRIALS = {
    "classify": _classify_trial,
    "rank": _rank_trial,
    "match": _match_trial,
    "regress": _regress_trial,
}


# --- output ------------------------------------------------------------------


def _write_outputs(cfg: ExperimentConfig, results: list[TrialResult]) -> None:
    assert cfg.out is not None
    path = cfg.out
    fresh = not os.path.exists(path) or os.path.getsize(path) == 0
    with open(path, "a", encoding="utf-8") as fh:
        if fresh:
            fh.write(",".join(CSV_COLUMNS) + "\n")
        for row in results:
            fh.write(row.csv_row() + "\n")
    stem = path[: -len(".csv")] if path.endswith(".csv") else path
    with open(stem + ".jsonl", "a", encoding="utf-8") as fh:
        for row in results:
            fh.write(json.dumps(dataclasses.asdict(row)) + "\n")
    meta = {
        "config": dataclasses.asdict(cfg),
        "columns": CSV_COLUMNS,
        "score": {
            "classify": "cumulative_probability",
            "rank": "pairwise_discordance",
            "match": "translated_matching_cost",
            "regress": "absolute_residual",
        }[cfg.task],
        "numpy_version": np.__version__,
        "notes": [
            "set sizes for rank/match are capped at m_max; see truncation_fraction in the jsonl rows",
            "seconds column excluded from determinism guarantees",
        ],
    }
    with open(stem + ".meta.json", "w", encoding="utf-8") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")


def run(cfg: ExperimentConfig) -> list[TrialResult]:
    """Run all trials of an experiment; write outputs when cfg.out is set."""
    if not cfg.methods:
        raise ValueError("at least one method required")
    results: list[TrialResult] = []
    trial_fn = _TRIALS[cfg.task]
    for trial in range(cfg.n_trials):
        results.extend(trial_fn(cfg, trial))
    if cfg.out is not None:
        _write_outputs(cfg, results)
    return results
