"""Evaluation: ACC@k, macro/micro F1 and AUC, bootstrap SDs, per-DRG tables."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np
from scipy.stats import rankdata

DEFAULT_KS = (1, 5, 10)
BOOTSTRAP_ITERATIONS = 30
ACC5_BINS = (0.0, 0.2, 0.4, 0.6, 0.8, 1.0)


@dataclass
class PredictionSet:
    """Probability rows over ``classes`` with the true class per instance."""

    probs: np.ndarray  # (n, K)
    truths: np.ndarray  # (n,) class ids, each in ``classes``
    classes: np.ndarray  # (K,) class ids in column order
    ids: list[str] = field(default_factory=list)

    def __post_init__(self):
        self.probs = np.asarray(self.probs, dtype=np.float64)
        self.truths = np.asarray(self.truths)
        self.classes = np.asarray(self.classes)
        if self.probs.ndim != 2 or self.probs.shape != (len(self.truths), len(self.classes)):
            raise ValueError(f"probs shape {self.probs.shape} inconsistent with "
                             f"{len(self.truths)} truths x {len(self.classes)} classes")

    def __len__(self) -> int:
        return len(self.truths)

    @property
    def truth_columns(self) -> np.ndarray:
        col = {c: i for i, c in enumerate(self.classes.tolist())}
        return np.array([col[t] for t in self.truths.tolist()], dtype=np.int64)

    def rankings(self) -> np.ndarray:
        """Column indices by descending probability, ties to the lower column."""
        return np.argsort(-self.probs, axis=1, kind="stable")

    def top1(self) -> np.ndarray:
        return self.classes[self.rankings()[:, 0]] if len(self) else self.classes[:0]

    def take(self, idx) -> PredictionSet:
        idx = np.asarray(idx, dtype=np.int64)
        ids = [self.ids[i] for i in idx] if self.ids else []
        return PredictionSet(self.probs[idx], self.truths[idx], self.classes, ids)


def top_k_accuracy(rankings: Sequence[Sequence[int]], truths: Sequence[int], k: int) -> float:
    """Share of instances whose truth is among the first ``k`` ranked classes."""
    if k < 1:
        raise ValueError("k must be >= 1")
    if len(truths) == 0:
        raise ValueError("no predictions to score")
    hits = sum(1 for ranked, t in zip(rankings, truths) if t in list(ranked[:k]))
    return hits / len(truths)


def _top_k_from_columns(ranks: np.ndarray, truth_cols: np.ndarray, k: int) -> float:
    if len(truth_cols) == 0:
        raise ValueError("no predictions to score")
    return float(np.mean(np.any(ranks[:, :k] == truth_cols[:, None], axis=1)))


def f1_scores(top1_preds: Sequence, truths: Sequence, class_universe: Sequence) -> tuple[float, float]:
    """(macro F1 over ``class_universe``, micro F1 from pooled counts); 0/0 -> 0."""
    preds = np.asarray(top1_preds)
    truths = np.asarray(truths)
    universe = list(class_universe)
    if not universe:
        return 0.0, 0.0
    per_class = []
    tp_all = fp_all = fn_all = 0
    for c in universe:
        p, t = preds == c, truths == c
        tp = int(np.sum(p & t))
        fp = int(np.sum(p & ~t))
        fn = int(np.sum(~p & t))
        denom = 2 * tp + fp + fn
        per_class.append(2 * tp / denom if denom else 0.0)
        tp_all, fp_all, fn_all = tp_all + tp, fp_all + fp, fn_all + fn
    denom = 2 * tp_all + fp_all + fn_all
    micro = 2 * tp_all / denom if denom else 0.0
    return float(np.mean(per_class)), float(micro)


def binary_auc(scores: np.ndarray, positives: np.ndarray) -> float | None:
    """Mann-Whitney AUC with midranks; None when one side is empty."""
    positives = np.asarray(positives, dtype=bool)
    n_pos = int(positives.sum())
    n_neg = len(positives) - n_pos
    if n_pos == 0 or n_neg == 0:
        return None
    ranks = rankdata(scores, method="average")
    u = ranks[positives].sum() - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))


def auc_scores(probs: np.ndarray, truths: Sequence, class_universe: Sequence) -> tuple[float | None, float | None]:
    """(macro, micro) one-vs-rest AUC; columns of ``probs`` follow ``class_universe``."""
    probs = np.asarray(probs, dtype=np.float64)
    truths = np.asarray(truths)
    universe = np.asarray(class_universe)
    onehot = truths[:, None] == universe[None, :]
    per_class = [binary_auc(probs[:, j], onehot[:, j]) for j in range(len(universe))]
    defined = [a for a in per_class if a is not None]
    macro = float(np.mean(defined)) if defined else None
    micro = binary_auc(probs.ravel(), onehot.ravel())
    return macro, micro


def bootstrap(metric_fn: Callable[[PredictionSet], float], preds: PredictionSet,
              iterations: int = BOOTSTRAP_ITERATIONS, seed: int = 0) -> tuple[float, float]:
    """Mean and population SD of ``metric_fn`` over n-of-n resamples.

    Iteration ``i`` draws its indices from a generator seeded with ``seed + i``.
    """
    n = len(preds)
    if n == 0:
        raise ValueError("cannot bootstrap an empty prediction set")
    values = np.array([
        metric_fn(preds.take(resample_indices(n, seed + i))) for i in range(iterations)
    ], dtype=np.float64)
    return float(values.mean()), float(values.std(ddof=0))


def resample_indices(n: int, seed: int) -> np.ndarray:
    return np.random.default_rng(seed).integers(0, n, size=n)


# ---------------------------------------------------------------------------
# reports

METRIC_KEYS = ("acc1", "acc5", "acc10", "macro_f1", "micro_f1", "macro_auc", "micro_auc")


def compute_metrics(preds: PredictionSet, ks: Sequence[int] = DEFAULT_KS) -> dict[str, float | None]:
    ranks = preds.rankings()
    truth_cols = preds.truth_columns
    out: dict[str, float | None] = {}
    for k in ks:
        out[f"acc{k}"] = _top_k_from_columns(ranks, truth_cols, k)
    top1 = preds.classes[ranks[:, 0]]
    # macro F1 over classes seen as truth or prediction; micro F1 over every class
    seen = np.union1d(np.unique(preds.truths), np.unique(top1))
    out["macro_f1"], _ = f1_scores(top1, preds.truths, seen)
    out["macro_f1_all_classes"], out["micro_f1"] = f1_scores(top1, preds.truths, preds.classes)
    out["macro_auc"], out["micro_auc"] = auc_scores(preds.probs, preds.truths, preds.classes)
    return out


def metrics_report(preds: PredictionSet, subset: str = "all", n_total: int | None = None,
                   bootstrap_iterations: int = BOOTSTRAP_ITERATIONS, seed: int = 0,
                   ks: Sequence[int] = DEFAULT_KS) -> dict:
    if len(preds) == 0:
        raise ValueError(f"subset {subset!r} has no test instances")
    report: dict = dict(compute_metrics(preds, ks))
    report["bootstrap"] = {}
    if bootstrap_iterations > 0:
        keys = [f"acc{k}" for k in ks] + ["macro_f1", "micro_f1", "macro_auc", "micro_auc"]
        draws = {key: [] for key in keys}
        for i in range(bootstrap_iterations):
            m = compute_metrics(preds.take(resample_indices(len(preds), seed + i)), ks)
            for key in keys:
                draws[key].append(_nan_if_none(m[key]))
        for key, values in draws.items():
            arr = np.asarray(values)
            report["bootstrap"][key] = {"mean": float(arr.mean()), "sd": float(arr.std(ddof=0))}
    n_total = len(preds) if n_total is None else n_total
    report.update({
        "n": len(preds),
        "n_classes": int(len(preds.classes)),
        "subset": subset,
        "coverage_pct": 100.0 * len(preds) / n_total if n_total else 0.0,
        "metadata": {
            "macro_f1": "mean over classes occurring as truth or top-1 prediction",
            "macro_f1_all_classes": "mean over every class in the label space",
            "macro_auc": "mean over classes with at least one positive and one negative",
            "bootstrap_sd": "population (ddof=0)",
        },
    })
    return report


def _nan_if_none(v):
    return float("nan") if v is None else v


def top_classes(train_counts: Mapping[int, int], top_n: int) -> list[int]:
    """Most frequent training classes, ties broken by ascending class id."""
    ordered = sorted(train_counts.items(), key=lambda kv: (-kv[1], kv[0]))
    return [c for c, _ in ordered[:top_n]]


def subset_eval(preds: PredictionSet, train_counts: Mapping[int, int], top_n: int,
                bootstrap_iterations: int = BOOTSTRAP_ITERATIONS, seed: int = 0) -> dict:
    keep = set(top_classes(train_counts, top_n))
    idx = [i for i, t in enumerate(preds.truths.tolist()) if t in keep]
    return metrics_report(preds.take(idx), subset=f"top{top_n}", n_total=len(preds),
                          bootstrap_iterations=bootstrap_iterations, seed=seed)


@dataclass
class PerDrgRow:
    code: int
    n_train: int
    n_test: int
    acc1: float
    acc5: float
    rank: int


def per_drg_report(preds: PredictionSet, train_counts: Mapping[int, int]) -> tuple[list[PerDrgRow], list[dict]]:
    """One row per class present in the test set, plus acc@5 bin summaries."""
    if len(preds) == 0:
        return [], []
    ranks = preds.rankings()
    truth_cols = preds.truth_columns
    hit1 = ranks[:, 0] == truth_cols
    hit5 = np.any(ranks[:, :5] == truth_cols[:, None], axis=1)
    rows = []
    for code in np.unique(preds.truths).tolist():
        mask = preds.truths == code
        rows.append(PerDrgRow(int(code), int(train_counts.get(code, 0)), int(mask.sum()),
                              float(hit1[mask].mean()), float(hit5[mask].mean()), 0))
    rows.sort(key=lambda r: (-r.n_train, r.code))
    for rank, r in enumerate(rows, start=1):
        r.rank = rank
    rows.sort(key=lambda r: r.code)
    return rows, acc5_bins(rows)


def acc5_bins(rows: Sequence[PerDrgRow], edges: Sequence[float] = ACC5_BINS) -> list[dict]:
    out = []
    for i, (lo, hi) in enumerate(zip(edges[:-1], edges[1:])):
        last = i == len(edges) - 2
        members = [r.n_train for r in rows if lo <= r.acc5 < hi or (last and r.acc5 == hi)]
        entry = {"range": [lo, hi], "closed_right": last, "n_classes": len(members)}
        if members:
            q1, med, q3 = np.percentile(members, [25, 50, 75])
            entry.update({"median_train": float(med), "q1_train": float(q1), "q3_train": float(q3)})
        out.append(entry)
    return out


def write_per_drg_csv(rows: Sequence[PerDrgRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["code", "n_train", "n_test", "acc1", "acc5", "rank"])
    for r in rows:
        w.writerow([r.code, r.n_train, r.n_test, f"{r.acc1:.6f}", f"{r.acc5:.6f}", r.rank])
    return buf.getvalue()
