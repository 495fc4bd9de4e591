import math
from itertools import combinations

import numpy as np
import pytest

from polar.association import (
    PermutationConfig,
    bh_fdr,
    effect_size,
    exact_permutation_p,
    permutation_p,
    score_all,
)
from polar.errors import EmptySideError, InputError, TooLargeError
from polar.synthetic import SynthSpec, generate_world


def brute_effect_size(u, A, B):
    """Oracle: plain-Python mean difference over population sd."""
    d_a = [sum(a[i] * u[i] for i in range(len(u))) for a in A]
    d_b = [sum(b[i] * u[i] for i in range(len(u))) for b in B]
    pooled = d_a + d_b
    mean_all = sum(pooled) / len(pooled)
    var = sum((x - mean_all) ** 2 for x in pooled) / len(pooled)
    if var == 0.0:
        return float("nan")
    return (sum(d_a) / len(d_a) - sum(d_b) / len(d_b)) / math.sqrt(var)


def brute_perm_fraction(d_all, m):
    """Oracle: exact fraction of labelings with |s_k| >= |s_obs|."""
    d_all = list(d_all)
    K = len(d_all)
    idx = set(range(m))

    def stat(chosen):
        a = [d_all[i] for i in chosen]
        b = [d_all[i] for i in range(K) if i not in chosen]
        return sum(a) / len(a) - sum(b) / len(b)

    obs = abs(stat(idx))
    hits = sum(1 for c in combinations(range(K), m) if abs(stat(set(c))) >= obs - 1e-12)
    return hits, math.comb(K, m)


def brute_bh(p_values, alpha):
    """Oracle: literal step-up definition on the non-NaN entries."""
    entries = [(p, i) for i, p in enumerate(p_values) if not math.isnan(p)]
    entries.sort()
    n = len(entries)
    k_star = 0
    for rank, (p, _) in enumerate(entries, start=1):
        if p <= rank * alpha / n:
            k_star = rank
    reject = [False] * len(p_values)
    for rank, (p, i) in enumerate(entries, start=1):
        if rank <= k_star:
            reject[i] = True
    return reject


class TestEffectSize:
    def test_hand_arithmetic_single_rows(self):
        # d_A=[0.8], d_B=[0.2]: mean diff 0.6, population sd of [0.8, 0.2]
        # is 0.3, so s = 2.0
        u = np.array([1.0, 0.0])
        A = np.array([[0.8, 0.6]])
        B = np.array([[0.2, math.sqrt(1 - 0.04)]])
        assert effect_size(u, A, B) == pytest.approx(2.0, abs=1e-9)

    def test_identical_sides_zero(self):
        u = np.array([1.0, 0.0])
        A = np.array([[0.6, 0.8], [1.0, 0.0]])
        assert effect_size(u, A, A.copy()) == 0.0

    def test_orthogonal_user_degenerate_nan(self):
        u = np.array([0.0, 0.0, 1.0, 0.0])
        A = np.array([[1.0, 0.0, 0.0, 0.0]])
        B = np.array([[0.0, 1.0, 0.0, 0.0]])
        assert math.isnan(effect_size(u, A, B))

    def test_empty_side_error(self):
        with pytest.raises(EmptySideError):
            effect_size(np.ones(2), np.zeros((0, 2)), np.ones((1, 2)))

    def test_matches_brute_force_on_random_instances(self):
        rng = np.random.default_rng(11)
        for _ in range(200):
            d = int(rng.integers(2, 9))
            m = int(rng.integers(1, 5))
            n = int(rng.integers(1, 5))
            u = rng.normal(size=d)
            u /= np.linalg.norm(u)
            A = rng.normal(size=(m, d))
            A /= np.linalg.norm(A, axis=1, keepdims=True)
            B = rng.normal(size=(n, d))
            B /= np.linalg.norm(B, axis=1, keepdims=True)
            got = effect_size(u, A, B)
            want = brute_effect_size(u, A, B)
            assert got == pytest.approx(want, abs=1e-9)
            # numerator identity against the centroid-axis form
            num = (A @ u).mean() - (B @ u).mean()
            axis_form = (A.mean(axis=0) - B.mean(axis=0)) @ u
            assert num == pytest.approx(axis_form, abs=1e-9)

    def test_antisymmetry_exact(self):
        rng = np.random.default_rng(12)
        for _ in range(50):
            u = rng.normal(size=5)
            u /= np.linalg.norm(u)
            A = rng.normal(size=(3, 5))
            B = rng.normal(size=(4, 5))
            assert effect_size(u, A, B) == -effect_size(u, B, A)

    def test_scale_invariance_of_user_row(self):
        rng = np.random.default_rng(13)
        row = rng.normal(size=6)
        A = rng.normal(size=(3, 6))
        B = rng.normal(size=(2, 6))
        for c in (0.001, 3.0, 1e6):
            u1 = row / np.linalg.norm(row)
            u2 = (c * row) / np.linalg.norm(c * row)
            assert effect_size(u1, A, B) == pytest.approx(effect_size(u2, A, B), rel=1e-12)

    def test_item_order_invariance_exact(self):
        rng = np.random.default_rng(14)
        u = rng.normal(size=4)
        u /= np.linalg.norm(u)
        A = rng.normal(size=(5, 4))
        B = rng.normal(size=(3, 4))
        s = effect_size(u, A, B)
        for _ in range(5):
            assert effect_size(u, A[rng.permutation(5)], B[rng.permutation(3)]) == s


class TestPermutationP:
    CFG = PermutationConfig(M=2000, master_seed=123, alpha=0.05)

    def test_zero_statistic_gives_p_one(self):
        d_all = np.array([0.4, 0.1, 0.4, 0.1])
        assert permutation_p(d_all, 2, self.CFG, "k") == 1.0

    def test_lower_bound_is_add_one(self):
        # huge observed gap: no replicate beats it except redraws of the
        # observed labeling, which always count
        d_all = np.array([10.0, 10.0, -10.0, -10.0, 0.01, -0.01])
        p = permutation_p(d_all, 2, self.CFG, "k")
        assert p >= 1.0 / (1 + self.CFG.M)

    def test_bounds_hold(self):
        rng = np.random.default_rng(21)
        for i in range(50):
            K = int(rng.integers(3, 12))
            m = int(rng.integers(1, K))
            d_all = rng.normal(size=K)
            p = permutation_p(d_all, m, self.CFG, f"b{i}")
            assert 1.0 / (1 + self.CFG.M) <= p <= 1.0

    def test_small_case_within_mc_error_of_exact(self):
        # p_mc estimates the exact exceedance fraction q through add-one
        # smoothing at M, so its expectation is (1 + M*q) / (1 + M)
        d_all = np.array([0.9, 0.8, 0.1, 0.2])
        hits, total = brute_perm_fraction(d_all, 2)
        q = hits / total
        expect = (1 + self.CFG.M * q) / (1 + self.CFG.M)
        p_mc = permutation_p(d_all, 2, self.CFG, "case")
        se = math.sqrt(q * (1 - q) / self.CFG.M)
        assert abs(p_mc - expect) <= 3 * se + 1e-9

    def test_swap_sides_same_p_with_shared_stream(self):
        rng = np.random.default_rng(77)
        for i in range(30):
            m = int(rng.integers(1, 5))
            n = int(rng.integers(1, 5))
            d_a = rng.normal(size=m)
            d_b = rng.normal(size=n)
            p_ab = permutation_p(np.concatenate([d_a, d_b]), m, self.CFG, f"s{i}")
            p_ba = permutation_p(np.concatenate([d_b, d_a]), n, self.CFG, f"s{i}")
            assert p_ab == p_ba

    def test_nan_when_degenerate(self):
        assert math.isnan(permutation_p(np.zeros(4), 2, self.CFG, "z"))

    def test_deterministic_per_stream_key(self):
        d_all = np.random.default_rng(3).normal(size=8)
        p1 = permutation_p(d_all, 3, self.CFG, "same")
        p2 = permutation_p(d_all, 3, self.CFG, "same")
        p3 = permutation_p(d_all, 3, self.CFG, "other")
        assert p1 == p2
        assert p1 != p3  # overwhelmingly likely for distinct streams

    def test_invalid_m(self):
        with pytest.raises(InputError):
            permutation_p(np.ones(3), 3, self.CFG, "k")


class TestExactPermutationP:
    def test_swap_symmetry_m1_n1(self):
        assert exact_permutation_p(np.array([0.7, 0.1]), 1) == 1.0

    def test_hand_enumerated_case(self):
        # d_all=[1,1,0,0], m=2: the observed split is one of 2 extreme
        # labelings among C(4,2)=6, so p=(1+2)/(1+6)
        p = exact_permutation_p(np.array([1.0, 1.0, 0.0, 0.0]), 2)
        assert p == pytest.approx(3 / 7)

    def test_constant_values_nan(self):
        assert math.isnan(exact_permutation_p(np.full(5, 0.3), 2))

    def test_matches_brute_fraction(self):
        rng = np.random.default_rng(31)
        for _ in range(25):
            K = int(rng.integers(3, 9))
            m = int(rng.integers(1, K))
            d_all = rng.normal(size=K)
            hits, total = brute_perm_fraction(d_all, m)
            assert exact_permutation_p(d_all, m) == pytest.approx(
                (1 + hits) / (1 + total), abs=1e-12
            )

    def test_combinatorial_bound(self):
        with pytest.raises(TooLargeError):
            exact_permutation_p(np.random.default_rng(1).normal(size=50), 25)


class TestBhFdr:
    def test_all_small_all_rejected(self):
        flags = bh_fdr([0.001] * 8, 0.05)
        assert flags.all()

    def test_step_up_against_brute_force(self):
        rng = np.random.default_rng(41)
        for _ in range(200):
            n = int(rng.integers(1, 30))
            p = rng.uniform(size=n) ** 2
            if rng.random() < 0.3:
                p[rng.integers(0, n)] = float("nan")
            alpha = float(rng.uniform(0.01, 0.2))
            got = list(bh_fdr(p, alpha))
            want = brute_bh(list(p), alpha)
            assert got == want

    def test_fixture_case(self):
        p = [0.01, 0.04, 0.30, 0.90]
        assert list(bh_fdr(p, 0.05)) == brute_bh(p, 0.05)

    def test_nan_never_rejected(self):
        flags = bh_fdr([float("nan"), 0.0001, float("nan")], 0.05)
        assert list(flags) == [False, True, False]

    def test_empty_and_all_nan(self):
        assert list(bh_fdr([], 0.05)) == []
        assert not bh_fdr([float("nan")] * 3, 0.05).any()


@pytest.fixture(scope="module")
def world():
    spec = SynthSpec(n_users=12, dim=8, pairs=[(3, 3), (2, 4)], seed=99)
    return generate_world(spec)


class TestScoreAll:
    def test_smoke_single_cell(self, world):
        cfg = PermutationConfig(M=200, master_seed=1)
        res = score_all(world.table, world.users[:1], world.pairs[:1], cfg)
        row = res.rows[0]
        assert math.isfinite(row.s) and math.isfinite(row.p_perm)

    def test_cardinality_and_order(self, world):
        cfg = PermutationConfig(M=100, master_seed=1)
        res = score_all(world.table, world.users, world.pairs, cfg)
        assert len(res.rows) == len(world.users) * len(world.pairs)
        expect = [(u.user_id, p.name) for u in world.users for p in world.pairs]
        assert [(r.user_id, r.pair) for r in res.rows] == expect

    def test_rerun_identical(self, world):
        cfg = PermutationConfig(M=100, master_seed=7)
        a = score_all(world.table, world.users, world.pairs, cfg)
        b = score_all(world.table, world.users, world.pairs, cfg)
        assert [(r.s, r.p_perm, r.signif_bh) for r in a.rows] == [
            (r.s, r.p_perm, r.signif_bh) for r in b.rows
        ]

    def test_missing_tokens_skipped_and_counted(self, world):
        from polar.store import UserRecord

        cfg = PermutationConfig(M=50, master_seed=7)
        ghost = UserRecord(user_id="ghost", token="usr0000000000", n_posts=3)
        res = score_all(world.table, [world.users[0], ghost], world.pairs, cfg)
        assert res.skipped_user_ids == ["ghost"]
        assert len(res.rows) == len(world.pairs)

    def test_thread_count_does_not_change_results(self, world):
        cfg = PermutationConfig(M=100, master_seed=3)
        one = score_all(world.table, world.users, world.pairs, cfg, n_threads=1)
        four = score_all(world.table, world.users, world.pairs, cfg, n_threads=4)
        assert [(r.s, r.p_perm, r.signif_bh) for r in one.rows] == [
            (r.s, r.p_perm, r.signif_bh) for r in four.rows
        ]

    def test_bh_applied_per_pair(self, world):
        cfg = PermutationConfig(M=200, master_seed=5, alpha=0.2)
        res = score_all(world.table, world.users, world.pairs, cfg)
        for pair in world.pairs:
            ps = [r.p_perm for r in res.rows if r.pair == pair.name]
            flags = [r.signif_bh for r in res.rows if r.pair == pair.name]
            assert flags == list(bh_fdr(ps, cfg.alpha))

    def test_empty_inputs_rejected(self, world):
        cfg = PermutationConfig(M=10)
        with pytest.raises(InputError):
            score_all(world.table, [], world.pairs, cfg)
        with pytest.raises(InputError):
            score_all(world.table, world.users, [], cfg)


class TestRuntimeScaling:
    def test_linear_in_users(self):
        # generous bound: U=1000 should cost at most 1.5x the linear
        # extrapolation from U=100
        import time

        cfg = PermutationConfig(M=200, master_seed=2)

        def world(n):
            return generate_world(SynthSpec(n_users=n, dim=16, pairs=[(8, 8)], seed=4))

        w_small, w_big = world(100), world(1000)
        # warm up caches and allocator
        score_all(w_small.table, w_small.users, w_small.pairs, cfg)

        def timed(w):
            t0 = time.perf_counter()
            score_all(w.table, w.users, w.pairs, cfg)
            return time.perf_counter() - t0

        t_small = min(timed(w_small) for _ in range(3))
        t_big = min(timed(w_big) for _ in range(2))
        assert t_big <= 1.5 * 10 * t_small + 0.05
