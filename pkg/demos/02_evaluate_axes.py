#!/usr/bin/env python3
"""Walkthrough: the label-aware evaluation harness.

Simulates a score table where one axis carries the class signal and three
are noise, then runs the cross-validated protocol: per-axis logistic
regressions, the top-k sweep with fold-local axis selection, bootstrap
CIs, and paired tests of k>1 against k=1.

Run from anywhere: python demos/02_evaluate_axes.py
"""

import numpy as np

from polar import EvalConfig, run_protocol

rng = np.random.default_rng(11)
n_users = 400
labels = np.array([0, 1] * (n_users // 2))

# one informative axis (separation ~2 against noise sd 0.8) + three noise
signal = (2 * labels - 1) + 0.8 * rng.normal(size=n_users)
score_table = np.column_stack([signal, rng.normal(size=(n_users, 3))])
axis_names = ["hype_vs_calm", "noise_a", "noise_b", "noise_c"]

cfg = EvalConfig(k_folds=5, top_k_axes=4, n_boot=2000, ece_bins=10, seed=123)
res = run_protocol(score_table, labels, cfg, axis_names=axis_names)

print("per-axis metrics (one logistic regression per axis, out of fold)\n")
print(f"{'axis':<14} {'AUROC':>7} {'PR-AUC':>7} {'Brier':>7} {'ECE':>7}")
for name in axis_names:
    r = res.single_axis[name]
    print(f"{name:<14} {r.auroc:7.3f} {r.pr_auc:7.3f} {r.brier:7.3f} {r.ece:7.3f}")

print("\ntop-k sweep (axes reselected inside each training fold)\n")
print(f"{'k':>2} {'AUROC':>7}  {'95% CI':<16} {'PR-AUC':>7} {'Brier':>7} {'p vs k=1':>9}")
for k in sorted(res.topk):
    r = res.topk[k]
    ci = f"[{r.auroc_ci[0]:.3f}, {r.auroc_ci[1]:.3f}]"
    p = res.paired_p_vs_k1.get(k)
    p_str = "-" if p is None else f"{p:.3f}"
    print(f"{k:>2} {r.auroc:7.3f}  {ci:<16} {r.pr_auc:7.3f} {r.brier:7.3f} {p_str:>9}")

print("\nselected axes per fold at k=1:", res.topk[1].selected_axes_per_fold)
print(
    "\nadding axes beyond the informative one moves AUROC by "
    f"{max(res.topk[k].auroc for k in res.topk) - min(res.topk[k].auroc for k in res.topk):.4f}"
    "; none of the paired tests is significant after BH:",
    res.paired_signif_bh,
)
