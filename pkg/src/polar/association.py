"""Effect sizes, permutation p-values, and false-discovery control.

The statistic for a user u and attribute pair (A, B) is

    s = (mean(d_A) - mean(d_B)) / sd(d_all)

with d_A = A @ u_hat, d_B = B @ u_hat, d_all their concatenation, and sd
the population standard deviation (divide by m+n).  The null treats labels
on the m+n pooled entries as exchangeable; a two-sided Monte Carlo p-value
with add-one smoothing is attached per (user, pair), and Benjamini-Hochberg
is applied per pair across users.
"""

from __future__ import annotations

import itertools
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .errors import EmptySideError, InputError, InternalError, MissingUserTokenError, TooLargeError
from .lexicon import AttributePair
from .rng import rng_from_key
from .store import EmbeddingTable, UserRecord, user_vector

# Pooled-sd values at or below this (relative to the data scale) are
# indistinguishable from float rounding of a constant vector; treat as the
# zero-variance degenerate case.
_ZERO_SD_RTOL = 1e-15
# Slack when counting |s_k| >= |s_obs|: a replicate that redraws the
# observed labeling re-sums the same values in a different order, so exact
# comparison would drop true ties through float noise.
_TIE_ATOL = 1e-12

EXACT_ENUMERATION_LIMIT = 10**6


@dataclass(frozen=True)
class PermutationConfig:
    M: int = 2000
    master_seed: int = 123
    alpha: float = 0.05

    def __post_init__(self):
        if self.M < 1:
            raise InputError("M must be >= 1")
        if not 0.0 < self.alpha < 1.0:
            raise InputError("alpha must be in (0, 1)")


@dataclass
class ScoreRow:
    """One (user, pair) result as written to per_user_scores.csv."""

    user_id: str
    pair: str
    s: float
    p_perm: float
    n_posts: int
    n_pos_attr: int
    n_neg_attr: int
    label_majority: str | None
    targets: str | None
    signif_bh: bool = False


@dataclass
class ScoreResult:
    rows: list[ScoreRow]
    skipped_user_ids: list[str]
    n_degenerate: int


def _pooled_sd(d_all: np.ndarray) -> float:
    # canonical (sorted) order so the value is exactly invariant to
    # labeling and item order
    d_sorted = np.sort(d_all)
    sd = float(d_sorted.std())
    scale = max(1.0, float(np.max(np.abs(d_sorted))) if d_sorted.size else 0.0)
    if sd <= _ZERO_SD_RTOL * scale:
        return 0.0
    return sd


def effect_size(u_hat: np.ndarray, A_matrix: np.ndarray, B_matrix: np.ndarray) -> float:
    """Standardized association of a unit user vector with side A over B.

    Returns NaN when the pooled similarities have zero variance (the
    degenerate case; downstream never flags such cells significant).
    """
    A_matrix = np.atleast_2d(np.asarray(A_matrix, dtype=np.float64))
    B_matrix = np.atleast_2d(np.asarray(B_matrix, dtype=np.float64))
    if A_matrix.shape[0] < 1 or B_matrix.shape[0] < 1:
        raise EmptySideError("both attribute sides must have at least one row")
    u_hat = np.asarray(u_hat, dtype=np.float64)
    # sorted within each side: the means are symmetric functions, and the
    # canonical order makes item-order invariance and A/B antisymmetry
    # exact in floating point, not just up to rounding
    d_A = np.sort(A_matrix @ u_hat)
    d_B = np.sort(B_matrix @ u_hat)
    d_all = np.concatenate([d_A, d_B])
    sd = _pooled_sd(d_all)
    if sd == 0.0:
        return float("nan")
    numerator = float(d_A.mean() - d_B.mean())
    # The numerator is also the projection of u_hat onto the axis between
    # the two side centroids; both routes must agree.
    alt = float((A_matrix.mean(axis=0) - B_matrix.mean(axis=0)) @ u_hat)
    if abs(numerator - alt) > 1e-9:
        raise InternalError(
            f"numerator identity violated: {numerator!r} vs centroid form {alt!r}"
        )
    return numerator / sd


def _numerator_obs(d_all: np.ndarray, m: int) -> float:
    return float(d_all[:m].mean() - d_all[m:].mean())


def _relabel_numerators(d_sorted: np.ndarray, chosen_sums: np.ndarray, mm: int) -> np.ndarray:
    n_rest = d_sorted.size - mm
    return chosen_sums * (1.0 / mm + 1.0 / n_rest) - d_sorted.sum() / n_rest


def permutation_p(
    d_all: np.ndarray, m: int, cfg: PermutationConfig, stream_key: str
) -> float:
    """Two-sided Monte Carlo p-value under exchangeable pooled labels.

    Each of the M replicates relabels the fixed pooled vector with a
    uniformly random size-m subset as side A (realized by drawing the
    smaller side and using complement symmetry of |s|).  The pooled sd is
    invariant under relabeling, so replicates compare mean differences
    only.  The replicate stream is derived from (master_seed, stream_key),
    making the result independent of execution order.  Add-one smoothing
    bounds the estimate in [1/(1+M), 1].
    """
    d_all = np.asarray(d_all, dtype=np.float64)
    K = d_all.size
    if not 1 <= m < K:
        raise InputError(f"need 1 <= m < m+n, got m={m}, m+n={K}")
    if _pooled_sd(d_all) == 0.0:
        return float("nan")
    num_obs = _numerator_obs(d_all, m)
    rng = rng_from_key(cfg.master_seed, stream_key)
    # draw the smaller side over the sorted pool: |s| is invariant under
    # complementation, so this is the same null while making the realized
    # p-value exactly invariant to an A/B swap with a shared stream
    d_sorted = np.sort(d_all)
    mm = min(m, K - m)
    # argsort of iid uniforms = uniform random permutation per replicate
    order = np.argsort(rng.random((cfg.M, K)), axis=1)
    chosen_sums = d_sorted[order[:, :mm]].sum(axis=1)
    nums = _relabel_numerators(d_sorted, chosen_sums, mm)
    tol = _TIE_ATOL * (1.0 + abs(num_obs))
    count = int(np.count_nonzero(np.abs(nums) >= abs(num_obs) - tol))
    return (1 + count) / (1 + cfg.M)


def exact_permutation_p(d_all: np.ndarray, m: int) -> float:
    """Exhaustive-enumeration p-value with the same add-one convention.

    Oracle companion to :func:`permutation_p`; enumerates all C(m+n, m)
    labelings (identity included) and treats them as the replicate set.
    """
    d_all = np.asarray(d_all, dtype=np.float64)
    K = d_all.size
    if not 1 <= m < K:
        raise InputError(f"need 1 <= m < m+n, got m={m}, m+n={K}")
    n_comb = math.comb(K, m)
    if n_comb > EXACT_ENUMERATION_LIMIT:
        raise TooLargeError(f"C({K},{m}) = {n_comb} exceeds {EXACT_ENUMERATION_LIMIT}")
    if _pooled_sd(d_all) == 0.0:
        return float("nan")
    num_obs = _numerator_obs(d_all, m)
    d_sorted = np.sort(d_all)
    mm = min(m, K - m)
    combos = np.fromiter(
        itertools.chain.from_iterable(itertools.combinations(range(K), mm)),
        dtype=np.intp,
        count=n_comb * mm,
    ).reshape(n_comb, mm)
    nums = _relabel_numerators(d_sorted, d_sorted[combos].sum(axis=1), mm)
    tol = _TIE_ATOL * (1.0 + abs(num_obs))
    count = int(np.count_nonzero(np.abs(nums) >= abs(num_obs) - tol))
    return (1 + count) / (1 + n_comb)


def bh_fdr(p_values, alpha: float) -> np.ndarray:
    """Benjamini-Hochberg step-up rejections; NaN entries never reject."""
    if not 0.0 < alpha < 1.0:
        raise InputError("alpha must be in (0, 1)")
    p = np.asarray(p_values, dtype=np.float64)
    reject = np.zeros(p.shape, dtype=bool)
    finite = ~np.isnan(p)
    n = int(finite.sum())
    if n == 0:
        return reject
    pf = p[finite]
    order = np.argsort(pf, kind="stable")
    sorted_p = pf[order]
    ok = sorted_p <= alpha * np.arange(1, n + 1) / n
    if not ok.any():
        return reject
    crit = sorted_p[np.nonzero(ok)[0].max()]
    mask = np.zeros(p.shape, dtype=bool)
    mask[finite] = pf <= crit
    reject[mask] = True
    return reject


def _worker_count(n_threads: int | None) -> int:
    if n_threads is None:
        env = os.environ.get("POLAR_THREADS", "")
        n_threads = int(env) if env.strip() else 1
    return max(1, n_threads)


def _score_user_against_pairs(
    u_hat: np.ndarray, rec: UserRecord, pairs: list[AttributePair], cfg: PermutationConfig
) -> list[ScoreRow]:
    rows = []
    for pair in pairs:
        d_A = pair.A_matrix @ u_hat
        d_B = pair.B_matrix @ u_hat
        d_all = np.concatenate([d_A, d_B])
        s = effect_size(u_hat, pair.A_matrix, pair.B_matrix)
        if math.isnan(s):
            p = float("nan")
        else:
            p = permutation_p(d_all, pair.m, cfg, f"{rec.user_id}/{pair.name}")
        rows.append(
            ScoreRow(
                user_id=rec.user_id,
                pair=pair.name,
                s=s,
                p_perm=p,
                n_posts=rec.n_posts,
                n_pos_attr=pair.m,
                n_neg_attr=pair.n,
                label_majority=rec.label_majority,
                targets=rec.targets,
            )
        )
    return rows


def score_all(
    table: EmbeddingTable,
    users: list[UserRecord],
    pairs: list[AttributePair],
    cfg: PermutationConfig,
    n_threads: int | None = None,
) -> ScoreResult:
    """Score every (user, pair) cell and apply BH per pair across users.

    Rows come out in deterministic user-major order regardless of the
    worker count (capped by the POLAR_THREADS environment variable when
    ``n_threads`` is not given).  Users whose token is missing from the
    vocabulary are skipped and counted, not fatal.
    """
    if not users or not pairs:
        raise InputError("need at least one user and one attribute pair")
    resolved: list[tuple[UserRecord, np.ndarray]] = []
    skipped: list[str] = []
    for rec in users:
        try:
            vec = rec.vector if rec.vector is not None else user_vector(table, rec)
        except MissingUserTokenError:
            skipped.append(rec.user_id)
            continue
        resolved.append((rec, np.asarray(vec, dtype=np.float64)))

    workers = _worker_count(n_threads)
    per_user: list[list[ScoreRow]] = [None] * len(resolved)  # type: ignore[list-item]

    def run(i: int) -> None:
        rec, vec = resolved[i]
        per_user[i] = _score_user_against_pairs(vec, rec, pairs, cfg)

    if workers == 1 or len(resolved) < 2:
        for i in range(len(resolved)):
            run(i)
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            list(pool.map(run, range(len(resolved))))

    rows = [row for chunk in per_user for row in chunk]
    # BH per attribute pair across users; NaN rows never reject.
    for j, pair in enumerate(pairs):
        pair_rows = [rows[i * len(pairs) + j] for i in range(len(resolved))]
        flags = bh_fdr([r.p_perm for r in pair_rows], cfg.alpha)
        for r, f in zip(pair_rows, flags):
            r.signif_bh = bool(f)
    n_degenerate = sum(1 for r in rows if math.isnan(r.s))
    return ScoreResult(rows=rows, skipped_user_ids=skipped, n_degenerate=n_degenerate)
