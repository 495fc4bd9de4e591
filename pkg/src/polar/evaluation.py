"""Downstream evaluation harness: logistic regression on axis scores.

Stratified cross-validation with per-fold axis selection, out-of-fold
discrimination and calibration metrics, and bootstrap inference.  The whole
protocol is a pure function of (score_table, labels, config); repeated runs
are byte-identical.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .association import bh_fdr, effect_size
from .errors import InputError, InternalError, StratificationError, UndefinedMetricError
from .lexicon import AttributePair
from .rng import rng_from_key


@dataclass(frozen=True)
class EvalConfig:
    k_folds: int = 5
    top_k_axes: int = 4
    n_boot: int = 2000
    ece_bins: int = 10
    l2_lambda: float = 1e-3
    seed: int = 123

    def __post_init__(self):
        if self.k_folds < 2:
            raise InputError("k_folds must be >= 2")
        if self.ece_bins < 1:
            raise InputError("ece_bins must be >= 1")
        if self.l2_lambda < 0:
            raise InputError("l2_lambda must be nonnegative")


@dataclass
class EvalReport:
    oof_probs: np.ndarray
    auroc: float
    auroc_ci: tuple[float, float]
    pr_auc: float
    brier: float
    ece: float
    selected_axes_per_fold: list[list[str]]


@dataclass
class ProtocolResult:
    """Top-k sweep plus single-axis reports and paired tests against k=1."""

    topk: dict[int, EvalReport]
    paired_p_vs_k1: dict[int, float]
    paired_signif_bh: dict[int, bool]
    single_axis: dict[str, EvalReport] = field(default_factory=dict)


def _as_binary_labels(labels) -> np.ndarray:
    y = np.asarray(labels)
    if not np.isin(y, (0, 1)).all():
        raise InputError("labels must be 0/1")
    return y.astype(np.int64)


def stratified_folds(labels, k: int, seed: int) -> np.ndarray:
    """Per-class round-robin fold assignment after a seeded shuffle.

    The round-robin counter carries across classes so fold sizes stay
    within one sample of each other, and each class is spread within one
    sample of evenly across folds.
    """
    y = _as_binary_labels(labels)
    classes, counts = np.unique(y, return_counts=True)
    if classes.size < 2:
        raise StratificationError("stratification needs both classes present")
    if k > counts.min():
        raise StratificationError(
            f"k={k} exceeds the smaller class count {counts.min()}"
        )
    rng = rng_from_key(seed, "stratified_folds")
    folds = np.empty(y.size, dtype=np.int64)
    cursor = 0
    for c in classes:
        idx = np.flatnonzero(y == c)
        idx = idx[rng.permutation(idx.size)]
        for j, i in enumerate(idx):
            folds[i] = (cursor + j) % k
        cursor += idx.size
    return folds


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def fit_logistic(features, labels, l2_lambda: float = 1e-3,
                 tol: float = 1e-8, max_iter: int = 10_000) -> tuple[np.ndarray, float]:
    """Full-batch gradient descent with backtracking, from zero init.

    Minimizes mean binary cross-entropy plus l2_lambda * ||w||^2 with an
    unpenalized intercept, until the gradient norm falls below ``tol`` or
    ``max_iter`` iterations.  Deterministic.
    """
    X = np.asarray(features, dtype=np.float64)
    if X.ndim != 2:
        raise InputError("features must be a 2-D array")
    if not np.isfinite(X).all():
        raise InputError("features must be finite")
    y = _as_binary_labels(labels).astype(np.float64)
    n, f = X.shape

    def loss(w, b):
        z = X @ w + b
        # log(1 + exp(-t)) for t = z on positives, -z on negatives
        ll = np.logaddexp(0.0, -z) * y + np.logaddexp(0.0, z) * (1.0 - y)
        return float(ll.mean() + l2_lambda * w @ w)

    def grad(w, b):
        r = _sigmoid(X @ w + b) - y
        gw = X.T @ r / n + 2.0 * l2_lambda * w
        gb = float(r.mean())
        return gw, gb

    w = np.zeros(f)
    b = 0.0
    step = 1.0
    cur = loss(w, b)
    for _ in range(max_iter):
        gw, gb = grad(w, b)
        gnorm2 = float(gw @ gw) + gb * gb
        if math.sqrt(gnorm2) <= tol:
            break
        while True:
            w_new = w - step * gw
            b_new = b - step * gb
            new = loss(w_new, b_new)
            if new <= cur - 1e-4 * step * gnorm2 or step < 1e-18:
                break
            step *= 0.5
        w, b, cur = w_new, b_new, new
        step *= 2.0
    return w, b


def predict_proba(features, w: np.ndarray, b: float) -> np.ndarray:
    return _sigmoid(np.asarray(features, dtype=np.float64) @ w + b)


def _midranks(values: np.ndarray) -> np.ndarray:
    order = np.argsort(values, kind="stable")
    ranks = np.empty(values.size, dtype=np.float64)
    i = 0
    while i < values.size:
        j = i
        while j + 1 < values.size and values[order[j + 1]] == values[order[i]]:
            j += 1
        ranks[order[i : j + 1]] = (i + j) / 2.0 + 1.0
        i = j + 1
    return ranks


def auroc(scores, labels) -> float:
    """Mann-Whitney AUROC: P(score+ > score-) + half the tie probability."""
    y = _as_binary_labels(labels)
    s = np.asarray(scores, dtype=np.float64)
    n_pos = int((y == 1).sum())
    n_neg = int((y == 0).sum())
    if n_pos == 0 or n_neg == 0:
        raise UndefinedMetricError("AUROC undefined with a single class")
    ranks = _midranks(s)
    u = ranks[y == 1].sum() - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))


def pr_auc(scores, labels) -> float:
    """Average precision with step interpolation over distinct thresholds."""
    y = _as_binary_labels(labels)
    s = np.asarray(scores, dtype=np.float64)
    n_pos = int((y == 1).sum())
    if n_pos == 0:
        raise UndefinedMetricError("PR-AUC undefined with no positives")
    order = np.argsort(-s, kind="stable")
    ys = y[order]
    ss = s[order]
    tp = np.cumsum(ys)
    ranks = np.arange(1, y.size + 1)
    # threshold boundaries: last index of each distinct score value
    boundary = np.append(ss[1:] != ss[:-1], True)
    tp_b = tp[boundary]
    rank_b = ranks[boundary]
    precision = tp_b / rank_b
    recall = tp_b / n_pos
    prev_recall = np.concatenate([[0.0], recall[:-1]])
    return float(np.sum((recall - prev_recall) * precision))


def brier(probs, labels) -> float:
    y = _as_binary_labels(labels).astype(np.float64)
    p = np.asarray(probs, dtype=np.float64)
    return float(np.mean((p - y) ** 2))


def ece(probs, labels, bins: int = 10) -> float:
    """Expected calibration error over equal-width probability bins.

    Bins are right-closed except the first; confidence is the predicted
    positive-class probability and accuracy the empirical positive rate.
    Empty bins are skipped.
    """
    y = _as_binary_labels(labels).astype(np.float64)
    p = np.asarray(probs, dtype=np.float64)
    if np.any(p < 0) or np.any(p > 1):
        raise InputError("probabilities must lie in [0, 1]")
    idx = np.ceil(p * bins).astype(np.int64) - 1
    idx[idx < 0] = 0
    total = 0.0
    for b in range(bins):
        mask = idx == b
        cnt = int(mask.sum())
        if cnt == 0:
            continue
        conf = float(p[mask].mean())
        acc = float(y[mask].mean())
        total += cnt / y.size * abs(acc - conf)
    return float(total)


def _resample_both_classes(rng_key: tuple, y: np.ndarray, n_boot: int, attempt_cap: int):
    """Yield n_boot index resamples containing both classes.

    Each attempt uses its own derived stream so the result is independent
    of any parallel schedule; single-class draws are redrawn, capped.
    """
    n = y.size
    accepted = 0
    attempts = 0
    redraws = 0
    while accepted < n_boot:
        if attempts >= attempt_cap:
            raise InputError(
                f"bootstrap exceeded {attempt_cap} attempts; labels too imbalanced"
            )
        rng = rng_from_key(*rng_key, attempts)
        attempts += 1
        idx = rng.integers(0, n, size=n)
        ys = y[idx]
        if ys.min() == ys.max():
            redraws += 1
            continue
        accepted += 1
        yield idx


def bootstrap_ci(metric, oof_scores, labels, n_boot: int = 2000, seed: int = 123) -> tuple[float, float]:
    """Percentile 95% CI of a metric over seeded (score, label) resamples."""
    y = _as_binary_labels(labels)
    s = np.asarray(oof_scores, dtype=np.float64)
    stats = np.empty(n_boot)
    for i, idx in enumerate(
        _resample_both_classes((seed, "bootstrap_ci"), y, n_boot, 10 * n_boot)
    ):
        stats[i] = metric(s[idx], y[idx])
    lo, hi = np.percentile(stats, [2.5, 97.5])
    return float(lo), float(hi)


def paired_bootstrap_test(oof_probs_a, oof_probs_b, labels, n_boot: int = 2000, seed: int = 123) -> float:
    """Two-sided paired bootstrap p-value for AUROC(a) - AUROC(b).

    Indices are resampled jointly; p = 2 * min(frac(delta <= 0),
    frac(delta >= 0)) clamped to [1/n_boot, 1].
    """
    y = _as_binary_labels(labels)
    a = np.asarray(oof_probs_a, dtype=np.float64)
    b = np.asarray(oof_probs_b, dtype=np.float64)
    if a.shape != b.shape or a.shape[0] != y.size:
        raise InputError("paired test needs aligned predictions and labels")
    deltas = np.empty(n_boot)
    for i, idx in enumerate(
        _resample_both_classes((seed, "paired_bootstrap"), y, n_boot, 10 * n_boot)
    ):
        deltas[i] = auroc(a[idx], y[idx]) - auroc(b[idx], y[idx])
    frac_le = float(np.mean(deltas <= 0.0))
    frac_ge = float(np.mean(deltas >= 0.0))
    p = 2.0 * min(frac_le, frac_ge)
    return float(min(1.0, max(1.0 / n_boot, p)))


def select_axes(train_features, train_labels, k: int) -> list[int]:
    """Top-k axes by orientation-agnostic univariate AUROC.

    An axis with AUROC 0.1 is as informative as one with 0.9, so axes are
    ranked by max(AUROC, 1 - AUROC); ties break by column order (callers
    pass columns in axis-name order).
    """
    X = np.asarray(train_features, dtype=np.float64)
    if k > X.shape[1]:
        raise InputError(f"k={k} exceeds {X.shape[1]} axes")
    strength = []
    for j in range(X.shape[1]):
        a = auroc(X[:, j], train_labels)
        strength.append(max(a, 1.0 - a))
    return sorted(range(X.shape[1]), key=lambda j: (-strength[j], j))[:k]


def _standardize(train: np.ndarray, other: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    mu = train.mean(axis=0)
    sd = train.std(axis=0)
    sd = np.where(sd == 0.0, 1.0, sd)
    return (train - mu) / sd, (other - mu) / sd


def _cv_oof_probs(
    X: np.ndarray,
    y: np.ndarray,
    folds: np.ndarray,
    cfg: EvalConfig,
    k_axes: int | None,
    axis_names: list[str],
) -> tuple[np.ndarray, list[list[str]]]:
    """Out-of-fold probabilities; ``k_axes=None`` means use all columns."""
    oof = np.full(y.size, np.nan)
    filled = np.zeros(y.size, dtype=bool)
    selected: list[list[str]] = []
    for f in range(cfg.k_folds):
        tr = folds != f
        te = folds == f
        if k_axes is None:
            cols = list(range(X.shape[1]))
        else:
            cols = select_axes(X[tr], y[tr], k_axes)
        selected.append([axis_names[j] for j in cols])
        Xtr, Xte = _standardize(X[np.ix_(tr, cols)], X[np.ix_(te, cols)])
        w, b = fit_logistic(Xtr, y[tr], cfg.l2_lambda)
        if filled[te].any():
            raise InternalError("fold bookkeeping overlap")
        oof[te] = predict_proba(Xte, w, b)
        filled[te] = True
    if not filled.all():
        raise InternalError("fold bookkeeping left unpredicted samples")
    return oof, selected


def _report(oof: np.ndarray, y: np.ndarray, cfg: EvalConfig, selected: list[list[str]]) -> EvalReport:
    return EvalReport(
        oof_probs=oof,
        auroc=auroc(oof, y),
        auroc_ci=bootstrap_ci(auroc, oof, y, cfg.n_boot, cfg.seed),
        pr_auc=pr_auc(oof, y),
        brier=brier(oof, y),
        ece=ece(oof, y, cfg.ece_bins),
        selected_axes_per_fold=selected,
    )


def run_protocol(score_table, labels, cfg: EvalConfig, axis_names: list[str] | None = None) -> ProtocolResult:
    """Top-k sweep (k = 1..top_k_axes) plus per-axis single-LR reports.

    Axis selection, standardization, and fitting all happen inside each
    training fold; predictions for a sample only ever come from a model
    that never saw it.  Paired bootstrap tests compare each k > 1 against
    k = 1 on the shared out-of-fold predictions, with BH across the set.
    """
    X = np.asarray(score_table, dtype=np.float64)
    if X.ndim != 2:
        raise InputError("score_table must be users x axes")
    if not np.isfinite(X).all():
        raise InputError("score_table must be finite; drop or impute NaN rows first")
    y = _as_binary_labels(labels)
    if axis_names is None:
        axis_names = [f"axis{j}" for j in range(X.shape[1])]
    if len(axis_names) != X.shape[1]:
        raise InputError("axis_names must match score_table columns")
    folds = stratified_folds(y, cfg.k_folds, cfg.seed)

    topk: dict[int, EvalReport] = {}
    k_max = min(cfg.top_k_axes, X.shape[1])
    for k in range(1, k_max + 1):
        oof, selected = _cv_oof_probs(X, y, folds, cfg, k, axis_names)
        topk[k] = _report(oof, y, cfg, selected)

    paired_p: dict[int, float] = {}
    ks = [k for k in sorted(topk) if k > 1]
    for k in ks:
        paired_p[k] = paired_bootstrap_test(
            topk[k].oof_probs, topk[1].oof_probs, y, cfg.n_boot, cfg.seed
        )
    flags = bh_fdr([paired_p[k] for k in ks], 0.05) if ks else np.zeros(0, bool)
    paired_signif = {k: bool(f) for k, f in zip(ks, flags)}

    single: dict[str, EvalReport] = {}
    for j, name in enumerate(axis_names):
        oof, selected = _cv_oof_probs(X[:, [j]], y, folds, cfg, None, [name])
        single[name] = _report(oof, y, cfg, selected)

    return ProtocolResult(
        topk=topk,
        paired_p_vs_k1=paired_p,
        paired_signif_bh=paired_signif,
        single_axis=single,
    )


def aggregated_sentence_scores(post_vectors_by_user, pairs: list[AttributePair]) -> np.ndarray:
    """Post-level effect sizes averaged per user per pair.

    ``post_vectors_by_user`` maps user id to a list of unit post vectors
    (insertion order fixes the row order).  Degenerate post scores are
    skipped in the average; a user with only degenerate posts gets NaN.
    """
    users = list(post_vectors_by_user)
    out = np.full((len(users), len(pairs)), np.nan)
    for i, uid in enumerate(users):
        vecs = post_vectors_by_user[uid]
        for j, pair in enumerate(pairs):
            scores = [effect_size(v, pair.A_matrix, pair.B_matrix) for v in vecs]
            finite = [s for s in scores if not math.isnan(s)]
            if finite:
                out[i, j] = float(np.mean(finite))
    return out


def read_wide_scores(path) -> tuple[list[str], list[str], np.ndarray, list[str]]:
    """Parse a wide CSV: user_id, one column per axis, and a label column.

    Returns (user_ids, axis_names, score matrix, labels); axis columns are
    every header field other than user_id and label, kept in file order.
    """
    import csv
    from pathlib import Path

    path = Path(path)
    with path.open(encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        fields = list(reader.fieldnames or ())
        if "user_id" not in fields or "label" not in fields:
            raise InputError(f"{path}: header must contain user_id and label")
        axes = [f for f in fields if f not in ("user_id", "label")]
        if not axes:
            raise InputError(f"{path}: no axis columns")
        user_ids, labels, rows = [], [], []
        for row in reader:
            user_ids.append(row["user_id"])
            labels.append((row.get("label") or "").strip())
            try:
                rows.append([float(row[a]) if row[a] != "NaN" else float("nan") for a in axes])
            except (TypeError, ValueError) as exc:
                raise InputError(f"{path}: bad score for user {row['user_id']!r} ({exc})")
    return user_ids, axes, np.array(rows, dtype=np.float64), labels


def pca_2d(score_table) -> np.ndarray:
    """Projection onto the top-2 principal directions, for plotting only.

    Columns are mean-centered first; each component's sign is fixed so its
    largest-magnitude loading is positive.
    """
    X = np.asarray(score_table, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] < 2:
        raise InputError("pca_2d needs at least two axes")
    Xc = X - X.mean(axis=0)
    _, _, vt = np.linalg.svd(Xc, full_matrices=False)
    comps = vt[:2].copy()
    for r in range(comps.shape[0]):
        j = int(np.argmax(np.abs(comps[r])))
        if comps[r, j] < 0:
            comps[r] = -comps[r]
    return Xc @ comps.T
