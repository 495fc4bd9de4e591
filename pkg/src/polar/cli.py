"""Command-line entry point.

Subcommands: score, eval, traj, sim, plot, export-check.  Every command is
a deterministic function of its inputs and flags; meta.json records the
effective parameters.  Exit codes: 0 success, 2 usage or input error,
3 internal invariant violation.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import re
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .artifacts import (
    fmt_float,
    json_safe,
    write_json,
    write_per_user_scores,
    write_tsv,
    write_users_csv,
)
from .association import PermutationConfig, score_all
from .errors import InputError, InternalError, PolarError
from .evaluation import EvalConfig, pca_2d, run_protocol
from .ingestion import load_corpus, optional_post_cap
from .lexicon import build_pairs_from_lexicon
from .store import load_table
from .svgplot import svg_box_swarm, svg_scatter
from .synthetic import SynthSpec, calibration_report, generate_world
from .trajectory import cumulative_scores, flag_drifters


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--overwrite", action="store_true", help="replace existing outputs")
    p.add_argument("--seed", type=int, default=123, help="master seed (default 123)")


def _add_scoring(p: argparse.ArgumentParser) -> None:
    p.add_argument("--model-dir", required=True, help="embedding model directory")
    p.add_argument("--posts", required=True, help="posts CSV (user_id, text[, label][, t_index])")
    p.add_argument("--lexicon", required=True, help="attribute-pair lexicon JSON")
    p.add_argument("--permutations", type=int, default=2000, help="Monte Carlo replicates (default 2000)")
    p.add_argument("--alpha", type=float, default=0.05, help="BH-FDR level (default 0.05)")
    p.add_argument("--min-posts", type=int, default=2, help="minimum posts per user (default 2)")
    p.add_argument("--post-cap", type=int, default=None, help="optional per-user post cap")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="polar",
        description="Per-user lexical association scores over an embedding space.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("score", help="score users against attribute pairs")
    _add_scoring(p)
    _add_common(p)
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("eval", help="cross-validated evaluation on axis scores")
    p.add_argument("--scores", required=True, help="per_user_scores.csv from a score run")
    p.add_argument("--labels", default=None, help="optional user_id,label CSV overriding label_majority")
    p.add_argument("--positive-label", default=None, help="label treated as class 1")
    p.add_argument("--k-folds", type=int, default=5)
    p.add_argument("--top-k", type=int, default=4, help="sweep k = 1..top-k (default 4)")
    p.add_argument("--n-boot", type=int, default=2000)
    p.add_argument("--ece-bins", type=int, default=10)
    p.add_argument("--l2-lambda", type=float, default=1e-3)
    _add_common(p)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("traj", help="cumulative per-user score trajectories")
    _add_scoring(p)
    p.add_argument("--top-q", type=float, default=0.1, help="drifter quantile (default 0.1)")
    _add_common(p)
    p.set_defaults(func=cmd_traj)

    p = sub.add_parser("sim", help="synthetic-world calibration report")
    p.add_argument("--spec", required=True, help="world spec JSON")
    p.add_argument("--permutations", type=int, default=2000)
    p.add_argument("--alpha", type=float, default=0.05)
    _add_common(p)
    p.set_defaults(func=cmd_sim)

    p = sub.add_parser("plot", help="static SVG summaries of prior outputs")
    p.add_argument("--scores", required=True, help="per_user_scores.csv from a score run")
    p.add_argument("--pca", default=None, help="optional pca_projection.tsv from an eval run")
    _add_common(p)
    p.set_defaults(func=cmd_plot)

    p = sub.add_parser("export-check", help="validate an exported model directory")
    p.add_argument("--model-dir", required=True)
    p.set_defaults(func=cmd_export_check)

    return parser


def _flush_outputs(out_dir: Path, outputs: dict[str, object], overwrite: bool) -> None:
    """Write all staged outputs at once; remove everything on failure."""
    out_dir.mkdir(parents=True, exist_ok=True)
    if not overwrite:
        clashes = [n for n in outputs if (out_dir / n).exists()]
        if clashes:
            raise InputError(
                f"outputs already exist in {out_dir} ({', '.join(sorted(clashes))}); "
                "pass --overwrite to replace"
            )
    written: list[Path] = []
    try:
        for name, writer in outputs.items():
            path = out_dir / name
            if callable(writer):
                writer(path)
            else:
                path.write_text(str(writer), encoding="utf-8")
            written.append(path)
    except BaseException:
        for path in written:
            path.unlink(missing_ok=True)
        raise


def _require_file(path: str, what: str) -> Path:
    p = Path(path)
    if not p.is_file():
        raise InputError(f"{what} not found: {p}")
    return p


def _safe_name(name: str) -> str:
    return re.sub(r"[^A-Za-z0-9._-]+", "_", name).strip("_") or "axis"


def cmd_score(args) -> int:
    table = load_table(args.model_dir)
    _require_file(args.posts, "posts file")
    _require_file(args.lexicon, "lexicon file")
    pairs = build_pairs_from_lexicon(table, _tok_cfg(table), args.lexicon)
    corpus = load_corpus(args.posts, table, args.min_posts)
    corpus = optional_post_cap(corpus, args.post_cap, args.seed)
    if not corpus.users:
        raise InputError("no users retained after inclusion rules")
    cfg = PermutationConfig(M=args.permutations, master_seed=args.seed, alpha=args.alpha)
    result = score_all(table, corpus.users, pairs, cfg)
    meta = {
        "seed": args.seed,
        "M": args.permutations,
        "alpha": args.alpha,
        "usr_prefix": table.usr_prefix,
        "min_posts_per_user": args.min_posts,
        "version": __version__,
        "config": {
            "command": "score",
            "model_dir": str(args.model_dir),
            "posts": str(args.posts),
            "lexicon": str(args.lexicon),
            "post_cap": args.post_cap,
        },
    }
    diagnostics = {
        "pairs": [
            {
                "name": p.name,
                "n_pos_attr": p.m,
                "n_neg_attr": p.n,
                "dropped_A": sorted(set(p.items_A) - set(p.kept_A)),
                "dropped_B": sorted(set(p.items_B) - set(p.kept_B)),
                "centroid_cos": None if math.isnan(p.centroid_cos) else p.centroid_cos,
                "warnings": p.warnings,
            }
            for p in pairs
        ],
        "corpus": {
            "input_rows": corpus.n_rows,
            "malformed_rows": corpus.n_malformed,
            "dropped_under_min_posts": corpus.dropped_under_min,
            "missing_token_users": corpus.skipped_missing_token,
        },
        "scoring": {
            "skipped_missing_token": result.skipped_user_ids,
            "degenerate_cells": result.n_degenerate,
            "n_rows": len(result.rows),
        },
    }
    outputs = {
        "per_user_scores.csv": lambda p: write_per_user_scores(p, result.rows),
        "users.csv": lambda p: write_users_csv(p, corpus.users),
        "meta.json": lambda p: write_json(p, meta),
        "diagnostics.json": lambda p: write_json(p, json_safe(diagnostics)),
    }
    _flush_outputs(Path(args.out), outputs, args.overwrite)
    print(
        f"scored {len(corpus.users) - len(result.skipped_user_ids)} users x {len(pairs)} pairs "
        f"-> {args.out}"
    )
    return 0


def _tok_cfg(table):
    from .wordpiece import config_from_table

    return config_from_table(table)


def _read_scores_long(path: Path):
    """per_user_scores.csv -> (user order, axis names, score dict, labels)."""
    users: list[str] = []
    axes: set[str] = set()
    scores: dict[tuple[str, str], float] = {}
    labels: dict[str, str] = {}
    with path.open(encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        need = {"user_id", "pair", "s"}
        if not need <= set(reader.fieldnames or ()):
            raise InputError(f"{path}: expected per_user_scores.csv columns")
        for row in reader:
            uid = row["user_id"]
            pair = row["pair"]
            if uid not in labels:
                users.append(uid)
                labels[uid] = (row.get("label_majority") or "").strip()
            axes.add(pair)
            scores[(uid, pair)] = float(row["s"]) if row["s"] != "NaN" else float("nan")
    return users, sorted(axes), scores, labels


def _read_label_file(path: Path) -> dict[str, str]:
    out: dict[str, str] = {}
    with path.open(encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        if not {"user_id", "label"} <= set(reader.fieldnames or ()):
            raise InputError(f"{path}: header must contain user_id and label")
        for row in reader:
            out[row["user_id"]] = (row.get("label") or "").strip()
    return out


def cmd_eval(args) -> int:
    scores_path = _require_file(args.scores, "scores file")
    users, axes, scores, labels = _read_scores_long(scores_path)
    if args.labels:
        labels = _read_label_file(_require_file(args.labels, "labels file"))
    kept_users = []
    dropped = 0
    for uid in users:
        lab = labels.get(uid, "")
        row = [scores.get((uid, ax), float("nan")) for ax in axes]
        if not lab or any(math.isnan(v) for v in row):
            dropped += 1
            continue
        kept_users.append(uid)
    if not kept_users:
        raise InputError("no users with complete scores and labels")
    distinct = sorted({labels[u] for u in kept_users})
    if len(distinct) != 2:
        raise InputError(f"need exactly two label values, got {distinct}")
    positive = args.positive_label if args.positive_label is not None else distinct[-1]
    if positive not in distinct:
        raise InputError(f"--positive-label {positive!r} not among {distinct}")
    y = np.array([1 if labels[u] == positive else 0 for u in kept_users])
    X = np.array([[scores[(u, ax)] for ax in axes] for u in kept_users])
    cfg = EvalConfig(
        k_folds=args.k_folds,
        top_k_axes=args.top_k,
        n_boot=args.n_boot,
        ece_bins=args.ece_bins,
        l2_lambda=args.l2_lambda,
        seed=args.seed,
    )
    res = run_protocol(X, y, cfg, axis_names=axes)

    report = {
        "config": {
            "command": "eval",
            "scores": str(args.scores),
            "labels": str(args.labels) if args.labels else None,
            "positive_label": positive,
            "k_folds": cfg.k_folds,
            "top_k": cfg.top_k_axes,
            "n_boot": cfg.n_boot,
            "ece_bins": cfg.ece_bins,
            "l2_lambda": cfg.l2_lambda,
            "seed": cfg.seed,
            "version": __version__,
        },
        "ci_method": "percentile bootstrap, 95%",
        "n_users": len(kept_users),
        "n_dropped": dropped,
        "axes": axes,
        "per_axis": {
            name: {
                "auroc": r.auroc,
                "auroc_ci": list(r.auroc_ci),
                "pr_auc": r.pr_auc,
                "brier": r.brier,
                "ece": r.ece,
            }
            for name, r in res.single_axis.items()
        },
        "topk": {
            str(k): {
                "auroc": r.auroc,
                "auroc_ci": list(r.auroc_ci),
                "pr_auc": r.pr_auc,
                "brier": r.brier,
                "ece": r.ece,
                "selected_axes_per_fold": r.selected_axes_per_fold,
                "paired_p_vs_k1": res.paired_p_vs_k1.get(k),
                "paired_signif_bh": res.paired_signif_bh.get(k),
            }
            for k, r in res.topk.items()
        },
    }

    pca = pca_2d(X) if X.shape[1] >= 2 else np.column_stack([X[:, 0], np.zeros(len(kept_users))])
    dominant = [axes[int(j)] for j in np.argmax(np.abs(X), axis=1)]

    def write_oof(path):
        with Path(path).open("w", encoding="utf-8", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["user_id", "label", "model", "oof_prob"])
            for k in sorted(res.topk):
                for uid, prob in zip(kept_users, res.topk[k].oof_probs):
                    w.writerow([uid, labels[uid], f"top{k}", fmt_float(prob)])
            for name in axes:
                for uid, prob in zip(kept_users, res.single_axis[name].oof_probs):
                    w.writerow([uid, labels[uid], f"axis:{name}", fmt_float(prob)])

    def write_per_axis(path):
        with Path(path).open("w", encoding="utf-8", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["axis", "auroc", "pr_auc", "brier", "ece"])
            for name in axes:
                r = res.single_axis[name]
                w.writerow([name] + [fmt_float(v) for v in (r.auroc, r.pr_auc, r.brier, r.ece)])

    def write_topk(path):
        with Path(path).open("w", encoding="utf-8", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(
                ["k", "auroc", "auroc_ci_lo", "auroc_ci_hi", "pr_auc", "brier", "ece", "p_vs_k1", "signif_bh"]
            )
            for k in sorted(res.topk):
                r = res.topk[k]
                p1 = res.paired_p_vs_k1.get(k)
                w.writerow(
                    [
                        k,
                        fmt_float(r.auroc),
                        fmt_float(r.auroc_ci[0]),
                        fmt_float(r.auroc_ci[1]),
                        fmt_float(r.pr_auc),
                        fmt_float(r.brier),
                        fmt_float(r.ece),
                        "" if p1 is None else fmt_float(p1),
                        "" if p1 is None else ("true" if res.paired_signif_bh[k] else "false"),
                    ]
                )

    outputs = {
        "eval_report.json": lambda p: write_json(p, json_safe(report)),
        "oof_predictions.csv": write_oof,
        "per_axis_metrics.csv": write_per_axis,
        "topk_metrics.csv": write_topk,
        "pca_projection.tsv": lambda p: write_tsv(
            p,
            ["user_id", "pc1", "pc2", "label", "dominant_axis"],
            (
                (uid, fmt_float(pca[i, 0]), fmt_float(pca[i, 1]), labels[uid], dominant[i])
                for i, uid in enumerate(kept_users)
            ),
        ),
        "scores_by_class.tsv": lambda p: write_tsv(
            p,
            ["axis", "user_id", "label", "s"],
            (
                (ax, uid, labels[uid], fmt_float(scores[(uid, ax)]))
                for ax in axes
                for uid in kept_users
            ),
        ),
    }
    _flush_outputs(Path(args.out), outputs, args.overwrite)
    print(f"evaluated {len(kept_users)} users on {len(axes)} axes -> {args.out}")
    return 0


def cmd_traj(args) -> int:
    table = load_table(args.model_dir)
    _require_file(args.posts, "posts file")
    _require_file(args.lexicon, "lexicon file")
    pairs = build_pairs_from_lexicon(table, _tok_cfg(table), args.lexicon)
    corpus = load_corpus(args.posts, table, max(2, args.min_posts))
    corpus = optional_post_cap(corpus, args.post_cap, args.seed)
    cfg = PermutationConfig(M=args.permutations, master_seed=args.seed, alpha=args.alpha)
    points = []
    for rec in corpus.users:
        if rec.token not in table:
            continue
        seq = corpus.posts_by_user[rec.user_id]
        # a post cap below the inclusion minimum can leave one-post users
        if len(seq.posts) < 2:
            continue
        points.extend(cumulative_scores(table, seq, pairs, cfg))
    if not points:
        raise InputError("no users with trajectories")
    drift = flag_drifters(points, args.top_q)
    outputs = {
        "trajectories.csv": lambda p: _write_traj_csv(p, points),
        "drifters.json": lambda p: write_json(
            p,
            json_safe(
                {
                    "top_q": args.top_q,
                    "drifters": drift.drifters,
                    "slopes": drift.slopes,
                    "least_aligned": drift.least_aligned,
                    "most_aligned": drift.most_aligned,
                }
            ),
        ),
    }
    _flush_outputs(Path(args.out), outputs, args.overwrite)
    print(f"wrote {len(points)} trajectory rows -> {args.out}")
    return 0


def _write_traj_csv(path, points) -> None:
    with Path(path).open("w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["user_id", "pair", "t", "s_t", "p_t", "jitter"])
        for pt in points:
            w.writerow(
                [pt.user_id, pt.pair, pt.t, fmt_float(pt.s), fmt_float(pt.p), fmt_float(pt.jitter)]
            )


def cmd_sim(args) -> int:
    spec_path = _require_file(args.spec, "spec file")
    try:
        raw = json.loads(spec_path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise InputError(f"{spec_path}: invalid JSON ({exc})") from exc
    try:
        spec = SynthSpec(
            n_users=int(raw["n_users"]),
            dim=int(raw["dim"]),
            pairs=[(int(m), int(n)) for m, n in raw["pairs"]],
            effect_frac=float(raw.get("effect_frac", 0.0)),
            effect_delta=float(raw.get("effect_delta", 0.0)),
            seed=int(raw.get("seed", args.seed)),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise InputError(f"{spec_path}: bad world spec ({exc})") from exc
    cfg = PermutationConfig(M=args.permutations, master_seed=args.seed, alpha=args.alpha)
    world = generate_world(spec)
    scores = score_all(world.table, world.users, world.pairs, cfg)
    report = calibration_report(world, cfg, scores)
    rows = []
    n_pairs = len(world.pairs)
    for i, r in enumerate(scores.rows):
        rows.append(
            (
                r.user_id,
                r.pair,
                fmt_float(r.s),
                fmt_float(r.p_perm),
                "true" if world.truth[i // n_pairs, i % n_pairs] else "false",
            )
        )
    payload = {
        "spec": {
            "n_users": spec.n_users,
            "dim": spec.dim,
            "pairs": [list(p) for p in spec.pairs],
            "effect_frac": spec.effect_frac,
            "effect_delta": spec.effect_delta,
            "seed": spec.seed,
        },
        "M": cfg.M,
        "alpha": cfg.alpha,
        "master_seed": cfg.master_seed,
        "report": report.as_dict(),
        "version": __version__,
    }
    outputs = {
        "calibration_report.json": lambda p: write_json(p, json_safe(payload)),
        "pvalues.tsv": lambda p: write_tsv(
            p, ["user_id", "pair", "s", "p_perm", "is_alternative"], rows
        ),
    }
    _flush_outputs(Path(args.out), outputs, args.overwrite)
    print(
        f"sim: ks={report.ks_stat:.4f} rej@alpha={report.rej_rate_at_alpha:.4f} "
        f"fdp={report.empirical_fdp:.4f} power={report.power:.4f} -> {args.out}"
    )
    return 0


def cmd_plot(args) -> int:
    scores_path = _require_file(args.scores, "scores file")
    users, axes, scores, labels = _read_scores_long(scores_path)
    outputs: dict[str, object] = {}
    point_rows = []
    for ax in axes:
        groups: dict[str, list[float]] = {}
        for uid in users:
            lab = labels.get(uid) or "unlabeled"
            groups.setdefault(lab, []).append(scores.get((uid, ax), float("nan")))
            point_rows.append((ax, uid, lab, fmt_float(scores.get((uid, ax), float("nan")))))
        svg = svg_box_swarm(
            {k: np.array(v) for k, v in sorted(groups.items())}, title=ax, seed=args.seed
        )
        outputs[f"plot_{_safe_name(ax)}.svg"] = svg
    outputs["plot_points.tsv"] = lambda p: write_tsv(
        p, ["axis", "user_id", "label", "s"], point_rows
    )
    if args.pca:
        pca_path = _require_file(args.pca, "pca file")
        pts = []
        with pca_path.open(encoding="utf-8") as fh:
            header = fh.readline().rstrip("\n").split("\t")
            need = {"pc1", "pc2", "dominant_axis"}
            if not need <= set(header):
                raise InputError(f"{pca_path}: expected pca_projection.tsv columns")
            idx = {c: header.index(c) for c in header}
            for line in fh:
                cells = line.rstrip("\n").split("\t")
                pts.append(
                    (
                        float(cells[idx["pc1"]]),
                        float(cells[idx["pc2"]]),
                        cells[idx["dominant_axis"]],
                    )
                )
        outputs["plot_pca.svg"] = svg_scatter(pts, title="axis-score space (2-D projection)")
    _flush_outputs(Path(args.out), outputs, args.overwrite)
    print(f"wrote {len(outputs)} plot files -> {args.out}")
    return 0


def cmd_export_check(args) -> int:
    table = load_table(args.model_dir)
    n_user = len(table.user_tokens())
    print(
        f"ok: vocab={len(table)} dim={table.dim} user_tokens={n_user} "
        f"usr_prefix={table.usr_prefix!r}"
    )
    if n_user == 0:
        print("warning: no user tokens found; scoring will skip every user", file=sys.stderr)
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except InternalError as exc:
        print(f"internal error: {exc}", file=sys.stderr)
        return 3
    except (InputError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except PolarError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
