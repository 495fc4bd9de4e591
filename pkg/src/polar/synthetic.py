"""Synthetic embedding worlds with known ground truth.

Attribute and user rows are drawn from an isotropic Gaussian and
normalized, which makes every null (user, pair) cell exchangeable by
construction.  Planted alternatives shift the user row along each pair's
centroid-difference axis before the final normalization, so the effect
lands exactly where the statistic's numerator projects.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .association import PermutationConfig, ScoreResult, score_all
from .errors import InputError
from .lexicon import AttributePair, build_pair
from .rng import rng_from_key
from .store import DEFAULT_USR_PREFIX, EmbeddingTable, UserRecord, user_token
from .wordpiece import TokenizerConfig

# Below this many replicates the p-value lattice 1/(M+1) is too coarse for
# calibration readings.
COARSE_M_THRESHOLD = 100


@dataclass(frozen=True)
class SynthSpec:
    n_users: int
    dim: int
    pairs: list[tuple[int, int]]
    effect_frac: float = 0.0
    effect_delta: float = 0.0
    seed: int = 123

    def __post_init__(self):
        if self.dim < 2:
            raise InputError("dim must be >= 2")
        if self.n_users < 1:
            raise InputError("n_users must be >= 1")
        if not self.pairs:
            raise InputError("need at least one (m, n) pair")
        if not 0.0 <= self.effect_frac <= 1.0:
            raise InputError("effect_frac must be in [0, 1]")
        if self.effect_delta < 0.0:
            raise InputError("effect_delta must be nonnegative")

    @property
    def n_planted(self) -> int:
        return int(math.floor(self.effect_frac * self.n_users))


@dataclass
class SynthWorld:
    spec: SynthSpec
    table: EmbeddingTable
    users: list[UserRecord]
    pairs: list[AttributePair]
    truth: np.ndarray  # (n_users, n_pairs) bool, True = planted alternative


@dataclass
class CalibrationReport:
    ks_stat: float
    rej_rate_at_alpha: float
    empirical_fdp: float
    power: float
    coarse_m_warning: bool
    n_null: int
    n_alt: int
    n_rejections: int

    def as_dict(self) -> dict:
        return {
            "ks_stat": self.ks_stat,
            "rej_rate_at_alpha": self.rej_rate_at_alpha,
            "empirical_fdp": self.empirical_fdp,
            "power": self.power,
            "coarse_m_warning": self.coarse_m_warning,
            "n_null": self.n_null,
            "n_alt": self.n_alt,
            "n_rejections": self.n_rejections,
        }


def _unit_rows(rng: np.random.Generator, n: int, dim: int) -> np.ndarray:
    rows = rng.standard_normal((n, dim))
    return rows / np.linalg.norm(rows, axis=1, keepdims=True)


def generate_world(spec: SynthSpec) -> SynthWorld:
    """Sample a world; planted users are shifted along every pair's axis.

    Labeling whole users as alternatives (rather than single cells) keeps
    the null cells clean: a shift along one pair's axis would otherwise
    leak small associations into cells labeled null.
    """
    rng = rng_from_key(spec.seed, "synthetic_world")
    vocab: list[str] = ["[UNK]"]
    rows: list[np.ndarray] = [np.zeros(spec.dim)]
    pair_items: list[tuple[str, list[str], list[str]]] = []
    axis_dirs: list[np.ndarray] = []
    for p, (m, n) in enumerate(spec.pairs):
        if m < 1 or n < 1:
            raise InputError("each pair needs m >= 1 and n >= 1")
        items_a = [f"ax{p}a{i}" for i in range(m)]
        items_b = [f"ax{p}b{j}" for j in range(n)]
        A = _unit_rows(rng, m, spec.dim)
        B = _unit_rows(rng, n, spec.dim)
        vocab.extend(items_a + items_b)
        rows.extend(list(A) + list(B))
        axis = A.mean(axis=0) - B.mean(axis=0)
        nrm = float(np.linalg.norm(axis))
        if nrm == 0.0:
            raise InputError(f"pair {p} has coincident centroids; reseed")
        axis_dirs.append(axis / nrm)
        pair_items.append((f"pair{p}", items_a, items_b))

    user_ids = [f"u{i:05d}" for i in range(spec.n_users)]
    planted_idx = rng.choice(spec.n_users, size=spec.n_planted, replace=False)
    planted = np.zeros(spec.n_users, dtype=bool)
    planted[planted_idx] = True
    user_rows = _unit_rows(rng, spec.n_users, spec.dim)
    for i in np.flatnonzero(planted):
        shifted = user_rows[i] + spec.effect_delta * np.sum(axis_dirs, axis=0)
        user_rows[i] = shifted
    users: list[UserRecord] = []
    for i, uid in enumerate(user_ids):
        tok = user_token(uid, DEFAULT_USR_PREFIX)
        vocab.append(tok)
        rows.append(user_rows[i])
        users.append(UserRecord(user_id=uid, token=tok, n_posts=2))

    table = EmbeddingTable(
        vocab,
        np.vstack(rows),
        meta={
            "dim": spec.dim,
            "vocab_size": len(vocab),
            "usr_prefix": DEFAULT_USR_PREFIX,
            "hash": "sha1-hex-10",
            "lowercase": True,
        },
    )
    cfg = TokenizerConfig(vocab_index=table.index)
    pairs = [build_pair(table, cfg, name, a, b) for name, a, b in pair_items]
    truth = np.repeat(planted[:, None], len(pairs), axis=1)
    return SynthWorld(spec=spec, table=table, users=users, pairs=pairs, truth=truth)


def ks_uniform(values: np.ndarray) -> float:
    """Kolmogorov-Smirnov distance of a sample to Uniform(0, 1)."""
    x = np.sort(np.asarray(values, dtype=np.float64))
    n = x.size
    if n == 0:
        raise InputError("KS distance needs a nonempty sample")
    i = np.arange(1, n + 1)
    d_plus = float(np.max(i / n - x))
    d_minus = float(np.max(x - (i - 1) / n))
    return max(d_plus, d_minus)


def calibration_report(
    world: SynthWorld, cfg: PermutationConfig, scores: ScoreResult | None = None
) -> CalibrationReport:
    """Score the world and compare outcomes against the planted truth."""
    if scores is None:
        scores = score_all(world.table, world.users, world.pairs, cfg)
    n_pairs = len(world.pairs)
    p = np.array([r.p_perm for r in scores.rows]).reshape(-1, n_pairs)
    sig = np.array([r.signif_bh for r in scores.rows]).reshape(-1, n_pairs)
    truth = world.truth
    null_p = p[~truth]
    null_p = null_p[~np.isnan(null_p)]
    ks = ks_uniform(null_p) if null_p.size else float("nan")
    rej_rate = float(np.mean(null_p <= cfg.alpha)) if null_p.size else float("nan")
    n_rej = int(sig.sum())
    false_rej = int((sig & ~truth).sum())
    true_rej = int((sig & truth).sum())
    n_alt = int(truth.sum())
    fdp = false_rej / n_rej if n_rej > 0 else 0.0
    power = true_rej / n_alt if n_alt > 0 else float("nan")
    return CalibrationReport(
        ks_stat=ks,
        rej_rate_at_alpha=rej_rate,
        empirical_fdp=float(fdp),
        power=float(power),
        coarse_m_warning=cfg.M < COARSE_M_THRESHOLD,
        n_null=int(null_p.size),
        n_alt=n_alt,
        n_rejections=n_rej,
    )
