"""Cumulative per-user association dynamics.

Recomputes the association score after each successive post using a
label-free proxy for the user vector: the normalized running mean of the
per-post mean token embeddings (the quantity the training objective pulls
the user token toward).  A snapshot mode accepts externally supplied
per-step user vectors for exact fidelity to retrained checkpoints.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .association import PermutationConfig, effect_size, permutation_p
from .errors import InputError
from .lexicon import AttributePair
from .rng import rng_from_key
from .store import EmbeddingTable

# Running means that cancel to (numerically) nothing carry no direction.
_ZERO_NORM_TOL = 1e-12


@dataclass
class PostSequence:
    """Ordered posts of one user as vocabulary row ids (user token excluded)."""

    user_id: str
    posts: list[tuple[int, list[int]]]

    def __post_init__(self):
        ts = [t for t, _ in self.posts]
        if any(b <= a for a, b in zip(ts, ts[1:])):
            raise InputError(f"t_index must be strictly increasing for {self.user_id!r}")


@dataclass
class TrajectoryPoint:
    user_id: str
    pair: str
    t: int
    s: float
    p: float
    jitter: float


@dataclass
class DrifterReport:
    drifters: list[str]
    slopes: dict[str, float]
    least_aligned: str | None
    most_aligned: str | None


def post_mean(table: EmbeddingTable, token_ids: list[int]) -> np.ndarray | None:
    """Mean embedding of one post's tokens; None for an empty post."""
    if not token_ids:
        return None
    return table.matrix[np.asarray(token_ids, dtype=np.intp)].astype(np.float64).mean(axis=0)


def post_unit_vectors(table: EmbeddingTable, seq: PostSequence) -> list[np.ndarray]:
    """Unit vector per post, for the aggregated post-level baseline."""
    out = []
    for _, ids in seq.posts:
        v = post_mean(table, ids)
        if v is None:
            continue
        nrm = float(np.linalg.norm(v))
        if nrm > _ZERO_NORM_TOL:
            out.append(v / nrm)
    return out


def proxy_user_vector(table: EmbeddingTable, posts_prefix: list[tuple[int, list[int]]]) -> np.ndarray | None:
    """Normalized mean over posts of each post's mean token embedding.

    Returns None when every post is empty after tokenization or the means
    cancel to the zero vector.
    """
    if not posts_prefix:
        raise InputError("posts_prefix must be nonempty")
    means = [m for _, ids in posts_prefix if (m := post_mean(table, ids)) is not None]
    if not means:
        return None
    v = np.mean(means, axis=0)
    nrm = float(np.linalg.norm(v))
    if nrm <= _ZERO_NORM_TOL:
        return None
    return v / nrm


def cumulative_scores(
    table: EmbeddingTable,
    seq: PostSequence,
    pairs: list[AttributePair],
    cfg: PermutationConfig,
    snapshot_vectors: list[np.ndarray | None] | None = None,
) -> list[TrajectoryPoint]:
    """Score every prefix of a user's history against every pair.

    Prefix vectors come from the running-mean proxy, or from
    ``snapshot_vectors`` (one per step, e.g. per-prefix checkpoint exports)
    when supplied.  Degenerate prefixes yield NaN rows, not failures.  The
    jitter column is a seeded rendering aid for swarm-style plots.
    """
    T = len(seq.posts)
    if T < 2:
        raise InputError(f"user {seq.user_id!r} needs at least two posts")
    if snapshot_vectors is not None and len(snapshot_vectors) != T:
        raise InputError("snapshot_vectors must supply one vector per step")
    out: list[TrajectoryPoint] = []
    # incremental running sums; equal to batch recomputation after renorm
    mean_sum = np.zeros(table.dim, dtype=np.float64)
    n_means = 0
    for t in range(1, T + 1):
        if snapshot_vectors is not None:
            u = snapshot_vectors[t - 1]
        else:
            m = post_mean(table, seq.posts[t - 1][1])
            if m is not None:
                mean_sum += m
                n_means += 1
            if n_means == 0:
                u = None
            else:
                v = mean_sum / n_means
                nrm = float(np.linalg.norm(v))
                u = v / nrm if nrm > _ZERO_NORM_TOL else None
        for pair in pairs:
            if u is None:
                s = p = float("nan")
            else:
                s = effect_size(u, pair.A_matrix, pair.B_matrix)
                if math.isnan(s):
                    p = float("nan")
                else:
                    d_all = np.concatenate([pair.A_matrix @ u, pair.B_matrix @ u])
                    p = permutation_p(
                        d_all, pair.m, cfg, f"{seq.user_id}/{pair.name}/t{t}"
                    )
            jr = rng_from_key(cfg.master_seed, "jitter", seq.user_id, pair.name, t)
            out.append(
                TrajectoryPoint(
                    user_id=seq.user_id,
                    pair=pair.name,
                    t=t,
                    s=s,
                    p=p,
                    jitter=float(jr.uniform(-0.5, 0.5)),
                )
            )
    return out


def _ols_slope(ts: np.ndarray, ys: np.ndarray) -> float:
    tc = ts - ts.mean()
    denom = float(tc @ tc)
    if denom == 0.0:
        return 0.0
    return float(tc @ (ys - ys.mean()) / denom)


def flag_drifters(
    trajectories: list[TrajectoryPoint],
    top_q: float,
    axes: list[str] | None = None,
) -> DrifterReport:
    """Rank users by mean least-squares slope of s_t over the given axes.

    Returns the top quantile as drifters plus the least- and most-aligned
    users by final score.  Slopes use finite points only.
    """
    if not 0.0 <= top_q <= 1.0:
        raise InputError("top_q must be in [0, 1]")
    by_user: dict[str, dict[str, list[tuple[int, float]]]] = {}
    for pt in trajectories:
        if axes is not None and pt.pair not in axes:
            continue
        by_user.setdefault(pt.user_id, {}).setdefault(pt.pair, []).append((pt.t, pt.s))
    slopes: dict[str, float] = {}
    finals: dict[str, float] = {}
    for uid, per_pair in by_user.items():
        pair_slopes = []
        pair_finals = []
        for pts in per_pair.values():
            pts.sort()
            ts = np.array([t for t, _ in pts], dtype=np.float64)
            ys = np.array([s for _, s in pts], dtype=np.float64)
            ok = np.isfinite(ys)
            if ok.sum() >= 2:
                pair_slopes.append(_ols_slope(ts[ok], ys[ok]))
            if ok.any():
                pair_finals.append(ys[ok][-1])
        if pair_slopes:
            slopes[uid] = float(np.mean(pair_slopes))
        if pair_finals:
            finals[uid] = float(np.mean(pair_finals))
    ranked = sorted(slopes, key=lambda u: (-slopes[u], u))
    n_flag = int(math.floor(top_q * len(ranked) + 1e-9))
    drifters = ranked[:n_flag]
    least = min(finals, key=lambda u: (finals[u], u)) if finals else None
    most = max(finals, key=lambda u: (finals[u], u)) if finals else None
    return DrifterReport(drifters=drifters, slopes=slopes, least_aligned=least, most_aligned=most)
