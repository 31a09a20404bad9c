"""Command-line pipeline: catalog -> harmonize -> preprocess -> train -> predict -> evaluate.

Exit status: 0 success, 1 validation failure, 2 I/O failure.  Diagnostics go
to stderr; data only to the files named on the command line.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from collections import Counter
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from drgkit import __version__
from drgkit.catalog import CcMccLabel, DrgCatalog, bundled_catalog_path, load_catalog, parse_catalog
from drgkit.errors import ConfigurationError, DrgkitError, ModeMismatchError
from drgkit.harmonize import (
    EXCLUDE,
    Harmonizer,
    NormalizationRuleSet,
    apply_review_decisions,
    harmonize_descriptions,
    normalize_description,
    read_decisions,
    read_mapping,
    read_review_queue,
    write_mapping,
    write_review_queue,
)
from drgkit.metrics import (
    PredictionSet,
    metrics_report,
    per_drg_report,
    resample_indices,
    subset_eval,
    write_per_drg_csv,
)
from drgkit.model import (
    Mode,
    TrainConfig,
    artifact_logits,
    decode_two_label,
    load_artifact,
    rank_desc,
    save_artifact,
    softmax,
    train,
)
from drgkit.preprocess import (
    RawNote,
    build_candidates,
    cohort_stats,
    drop_rare_drgs,
    filter_cohort,
    read_cohort,
    read_jsonl,
    stratified_split,
    write_cohort,
)

log = logging.getLogger("drgkit")

EXIT_OK, EXIT_VALIDATION, EXIT_IO = 0, 1, 2


@dataclass
class PipelineConfig:
    catalog: str | None = None
    rules: str | None = None
    accept_threshold: float = 0.95
    review_threshold: float = 0.70
    seed: int = 0
    subsets: list[int] = field(default_factory=lambda: [300, 50, 30])
    bootstrap: int = 30
    train: TrainConfig = field(default_factory=TrainConfig)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["train"] = self.train.to_dict()
        return d

    @classmethod
    def from_dict(cls, d: dict) -> PipelineConfig:
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ConfigurationError(f"unknown config keys: {sorted(unknown)}")
        d = dict(d)
        d["train"] = TrainConfig(**d.get("train", {}))
        return cls(**d)

    @classmethod
    def load(cls, path: str | None) -> PipelineConfig:
        if path is None:
            return cls()
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def _pick(flag, default):
    return default if flag is None else flag


def _require_inputs(*paths) -> None:
    for p in paths:
        if p is not None and not Path(p).exists():
            raise FileNotFoundError(f"input not found: {p}")


def _write(path: str | Path, text: str) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Path(path).write_text(text, encoding="utf-8")


def _catalog(args, cfg: PipelineConfig) -> DrgCatalog:
    path = _pick(args.catalog, cfg.catalog) or str(bundled_catalog_path())
    _require_inputs(path)
    return load_catalog(path)


def _rules(args, cfg: PipelineConfig) -> NormalizationRuleSet:
    path = _pick(getattr(args, "rules", None), cfg.rules)
    if path is None:
        return NormalizationRuleSet()
    _require_inputs(path)
    return NormalizationRuleSet.from_csv(path)


# ---------------------------------------------------------------------------
# commands

def cmd_build_catalog(args, cfg: PipelineConfig) -> int:
    path = _pick(args.catalog, cfg.catalog) or str(bundled_catalog_path())
    _require_inputs(path)
    catalog = parse_catalog(Path(path).read_text(encoding="utf-8"))
    if len(catalog) == 0:
        raise ConfigurationError(f"{path}: catalog has no entries")
    summary = catalog.summary()
    dump = catalog.to_dict()
    dump["summary"] = summary
    _write(args.out, json.dumps(dump, indent=2))
    log.info("catalog: %d codes, %d bases, splits %s", summary["codes"], summary["bases"], summary["splits"])
    if args.summary:
        _write(args.summary, json.dumps(summary, indent=2))
    return EXIT_OK


def cmd_harmonize(args, cfg: PipelineConfig) -> int:
    _require_inputs(args.input)
    catalog = _catalog(args, cfg)
    harmonizer = Harmonizer(
        catalog, _rules(args, cfg),
        accept_threshold=_pick(args.accept, cfg.accept_threshold),
        review_threshold=_pick(args.review, cfg.review_threshold),
    )
    notes = read_jsonl(Path(args.input).read_text(encoding="utf-8"))
    result = harmonize_descriptions((n["drg_description"] for n in notes), harmonizer, args.workers)
    _write(args.queue, write_review_queue(result.queue))
    _write(args.mapping, write_mapping(result.mapping))
    log.info("harmonize: %d descriptions matched, %d queued for review", len(result.mapping), len(result.queue))
    return EXIT_OK


def cmd_apply_reviews(args, cfg: PipelineConfig) -> int:
    _require_inputs(args.queue, args.decisions, args.mapping)
    catalog = _catalog(args, cfg)
    queue = read_review_queue(Path(args.queue).read_text(encoding="utf-8"))
    decisions = read_decisions(Path(args.decisions).read_text(encoding="utf-8"))
    resolved = apply_review_decisions(queue, decisions, catalog)
    mapping = read_mapping(Path(args.mapping).read_text(encoding="utf-8"))
    mapping.update(resolved)
    _write(args.out, write_mapping(mapping))
    n_excluded = sum(1 for v in resolved.values() if v == EXCLUDE)
    log.info("apply-reviews: %d reviewed (%d excluded), %d total mapped", len(resolved), n_excluded, len(mapping))
    return EXIT_OK


def cmd_preprocess(args, cfg: PipelineConfig) -> int:
    _require_inputs(args.input, args.mapping)
    seed = _pick(args.seed, cfg.seed)
    rules = _rules(args, cfg)
    notes = [RawNote.from_json(o) for o in read_jsonl(Path(args.input).read_text(encoding="utf-8"))]
    raw_mapping = read_mapping(Path(args.mapping).read_text(encoding="utf-8"))
    mapping = dict(raw_mapping)
    for text, code in raw_mapping.items():
        mapping.setdefault(normalize_description(text, rules), code)
    candidates = build_candidates(notes, mapping, lambda d: normalize_description(d, rules))
    kept, report = filter_cohort(candidates)
    before_rare = len(kept)
    kept = drop_rare_drgs(kept)
    if before_rare - len(kept):
        report.counts["rare_drg"] += before_rare - len(kept)
    split = stratified_split(kept, seed=seed)
    _write(args.out, write_cohort(split))
    if args.drop_report:
        _write(args.drop_report, json.dumps(report.to_dict(), indent=2, sort_keys=True))
    if args.stats:
        _write(args.stats, json.dumps(cohort_stats(kept, split), indent=2, sort_keys=True))
    if not kept:
        log.warning("preprocess: cohort is empty (dropped: %s)", report.to_dict())
    else:
        log.info("preprocess: kept %d (train %d / test %d), dropped %s",
                 len(kept), len(split.train), len(split.test), report.to_dict())
    return EXIT_OK


def _train_config(args, cfg: PipelineConfig) -> TrainConfig:
    d = cfg.train.to_dict()
    if args.preset == "llm":
        d["learning_rate"] = TrainConfig.llm_preset().learning_rate
    overrides = {
        "learning_rate": args.lr, "weight_decay": args.weight_decay, "epochs": args.epochs,
        "batch_size": args.batch_size, "lambda_cc": args.lambda_cc,
        "lora_rank": args.lora_rank, "lora_alpha": args.lora_alpha,
        "seed": _pick(args.seed, cfg.seed or None),
    }
    d.update({k: v for k, v in overrides.items() if v is not None})
    if args.adapter:
        d["adapter"] = True
    return TrainConfig(**d)


def cmd_train(args, cfg: PipelineConfig) -> int:
    _require_inputs(args.cohort, args.base_artifact)
    catalog = _catalog(args, cfg)
    config = _train_config(args, cfg)
    split = read_cohort(Path(args.cohort).read_text(encoding="utf-8"))
    base = load_artifact(args.base_artifact) if args.base_artifact else None
    art = train(split, catalog, config, Mode(args.mode), base)
    save_artifact(art, args.out)
    log.info("train: %s mode, %d outputs, vocab %d, epoch losses %s",
             art.mode.value, art.head.n_outputs, art.vocabulary.size, [round(h, 5) for h in art.history])
    return EXIT_OK


def cmd_predict(args, cfg: PipelineConfig) -> int:
    _require_inputs(args.artifact, args.cohort)
    catalog = _catalog(args, cfg)
    art = load_artifact(args.artifact)
    if args.mode is not None and Mode(args.mode) is not art.mode:
        raise ModeMismatchError(f"artifact is {art.mode.value}, --mode asked for {args.mode}")
    if art.catalog_fingerprint != catalog.fingerprint():
        raise ConfigurationError("artifact was trained against a different catalog")
    split = read_cohort(Path(args.cohort).read_text(encoding="utf-8"))
    records = split.test if args.split == "test" else split.train
    logits = artifact_logits(art, [r.course_text for r in records]) if records else np.zeros((0, 0))
    lines = []
    for rec, row in zip(records, logits):
        if art.mode is Mode.SINGLE:
            probs = softmax(row)
            order = rank_desc(row)
            if args.top_k:
                order = order[: args.top_k]
            obj = {"stay_id": rec.stay_id,
                   "topk": [{"code": art.classes[i], "prob": float(probs[i])} for i in order]}
        else:
            p = decode_two_label(row, catalog)
            base = p.base_ranking[: args.top_k] if args.top_k else p.base_ranking
            obj = {
                "stay_id": rec.stay_id,
                "topk": [{"code": p.composed_code, "prob": p.composed_prob}],
                "base_topk": [{"base_id": b, "prob": pr} for b, pr in base],
                "cc": p.cc.name,
                "cc_ranking": [{"label": lab.name, "prob": pr} for lab, pr in p.cc_ranking],
                "composed_code": p.composed_code,
            }
        lines.append(json.dumps(obj))
    _write(args.out, "\n".join(lines) + ("\n" if lines else ""))
    log.info("predict: %d %s instances", len(lines), args.split)
    return EXIT_OK


def _truths(split, which: str) -> dict[str, int]:
    records = split.test if which == "test" else split.train
    return {r.stay_id: r.drg_code for r in records}


def _load_predictions(path) -> list[dict]:
    return read_jsonl(Path(path).read_text(encoding="utf-8"))


def _single_prediction_set(preds: list[dict], truth: dict[str, int], classes: list[int]) -> PredictionSet:
    col = {c: i for i, c in enumerate(classes)}
    probs = np.zeros((len(preds), len(classes)))
    for i, p in enumerate(preds):
        for item in p["topk"]:
            probs[i, col[item["code"]]] = item["prob"]
    return PredictionSet(probs, [truth[p["stay_id"]] for p in preds], classes, [p["stay_id"] for p in preds])


def cmd_evaluate(args, cfg: PipelineConfig) -> int:
    _require_inputs(args.predictions, args.cohort)
    catalog = _catalog(args, cfg)
    split = read_cohort(Path(args.cohort).read_text(encoding="utf-8"))
    truth = _truths(split, args.split)
    preds = _load_predictions(args.predictions)
    missing = [p["stay_id"] for p in preds if p["stay_id"] not in truth]
    if missing:
        raise ConfigurationError(f"{len(missing)} predictions have no cohort record, first {missing[0]!r}")
    seed = _pick(args.seed, cfg.seed)
    iters = _pick(args.bootstrap, cfg.bootstrap)
    subsets = cfg.subsets if args.subsets is None else [int(s) for s in args.subsets.split(",") if s]
    train_counts = Counter(r.drg_code for r in split.train)
    two_label = bool(preds) and "base_topk" in preds[0]

    if not two_label:
        ps = _single_prediction_set(preds, truth, catalog.codes)
        reports = [metrics_report(ps, "all", bootstrap_iterations=iters, seed=seed)]
        for n in subsets:
            reports.append(subset_eval(ps, train_counts, min(n, len(train_counts)), iters, seed))
            reports[-1]["subset"] = f"top{n}"
        out = {"mode": Mode.SINGLE.value, "reports": reports}
    else:
        n_bases = len(catalog.bases)
        base_probs = np.zeros((len(preds), n_bases))
        cc_probs = np.zeros((len(preds), len(CcMccLabel)))
        for i, p in enumerate(preds):
            for item in p["base_topk"]:
                base_probs[i, item["base_id"]] = item["prob"]
            for item in p["cc_ranking"]:
                cc_probs[i, CcMccLabel[item["label"]]] = item["prob"]
        targets = [catalog.two_label_target(truth[p["stay_id"]]) for p in preds]
        ids = [p["stay_id"] for p in preds]
        base_ps = PredictionSet(base_probs, [b for b, _ in targets], np.arange(n_bases), ids)
        cc_ps = PredictionSet(cc_probs, [int(c) for _, c in targets], np.arange(len(CcMccLabel)), ids)
        hit = np.array([p["composed_code"] == truth[p["stay_id"]] for p in preds], dtype=float)
        drg = {"acc1": float(hit.mean()), "n": len(preds), "n_classes": len(catalog), "subset": "all",
               "bootstrap": {}}
        if iters:
            draws = np.array([hit[resample_indices(len(hit), seed + i)].mean() for i in range(iters)])
            drg["bootstrap"]["acc1"] = {"mean": float(draws.mean()), "sd": float(draws.std(ddof=0))}
        out = {
            "mode": Mode.TWO_LABEL.value,
            "base": metrics_report(base_ps, "base", bootstrap_iterations=iters, seed=seed),
            "cc": metrics_report(cc_ps, "cc", bootstrap_iterations=iters, seed=seed, ks=(1,)),
            "drg": drg,
        }
    out["config"] = {"seed": seed, "bootstrap": iters, "subsets": subsets}
    _write(args.out, json.dumps(out, indent=2, sort_keys=True))
    headline = out["reports"][0] if not two_label else out["drg"]
    log.info("evaluate: acc@1 %.4f on %d instances", headline["acc1"], headline["n"])
    return EXIT_OK


def cmd_report(args, cfg: PipelineConfig) -> int:
    _require_inputs(args.predictions, args.cohort)
    catalog = _catalog(args, cfg)
    split = read_cohort(Path(args.cohort).read_text(encoding="utf-8"))
    preds = _load_predictions(args.predictions)
    if preds and "base_topk" in preds[0]:
        raise ModeMismatchError("report needs single-label predictions (full code rankings)")
    ps = _single_prediction_set(preds, _truths(split, args.split), catalog.codes)
    train_counts = Counter(r.drg_code for r in split.train)
    rows, bins = per_drg_report(ps, train_counts)
    _write(args.out, write_per_drg_csv(rows))
    if args.summary:
        _write(args.summary, json.dumps({"acc5_bins": bins}, indent=2))
    log.info("report: %d DRG rows", len(rows))
    return EXIT_OK


def cmd_synth(args, cfg: PipelineConfig) -> int:
    from drgkit.synth import NoteSpec, synthetic_catalog_csv, synthetic_notes

    seed = _pick(args.seed, 7)
    if args.catalog_out:
        _write(args.catalog_out, synthetic_catalog_csv())
    catalog = _catalog(args, cfg)
    notes = synthetic_notes(catalog, NoteSpec(n_notes=args.n_notes, n_bases=args.n_bases, seed=seed))
    _write(args.out, "".join(json.dumps(n) + "\n" for n in notes))
    log.info("synth: %d notes over %d bases", len(notes), args.n_bases)
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON pipeline config; flags override it")
    common.add_argument("--seed", type=int)
    common.add_argument("--quiet", action="store_true", help="only warnings and errors on stderr")

    parser = argparse.ArgumentParser(prog="drgkit", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"drgkit {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, func, help_):
        p = sub.add_parser(name, parents=[common], help=help_)
        p.set_defaults(func=func)
        return p

    p = add("build-catalog", cmd_build_catalog, "dissect a DRG table and dump the catalog")
    p.add_argument("--catalog", help="CSV code,description (default: bundled synthetic v34 table)")
    p.add_argument("--out", required=True)
    p.add_argument("--summary")

    p = add("harmonize", cmd_harmonize, "map historical DRG descriptions onto the catalog")
    p.add_argument("--input", required=True, help="notes JSON-lines")
    p.add_argument("--catalog")
    p.add_argument("--rules", help="CSV pattern,replacement extending the default rules")
    p.add_argument("--accept", type=float)
    p.add_argument("--review", type=float)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--queue", required=True, help="review queue CSV to write")
    p.add_argument("--mapping", required=True, help="auto-matched mapping CSV to write")

    p = add("apply-reviews", cmd_apply_reviews, "merge review decisions into the mapping")
    p.add_argument("--queue", required=True)
    p.add_argument("--decisions", required=True)
    p.add_argument("--mapping", required=True, help="auto-matched mapping CSV")
    p.add_argument("--catalog")
    p.add_argument("--out", required=True)

    p = add("preprocess", cmd_preprocess, "extract, filter and split the cohort")
    p.add_argument("--input", required=True)
    p.add_argument("--mapping", required=True)
    p.add_argument("--rules")
    p.add_argument("--out", required=True)
    p.add_argument("--drop-report")
    p.add_argument("--stats")

    p = add("train", cmd_train, "train the linear classifier")
    p.add_argument("--cohort", required=True)
    p.add_argument("--catalog")
    p.add_argument("--mode", choices=[m.value for m in Mode], default=Mode.SINGLE.value)
    p.add_argument("--out", required=True)
    p.add_argument("--preset", choices=["desk", "llm"], default="desk")
    p.add_argument("--lr", type=float)
    p.add_argument("--weight-decay", type=float)
    p.add_argument("--epochs", type=int)
    p.add_argument("--batch-size", type=int)
    p.add_argument("--lambda-cc", type=float)
    p.add_argument("--adapter", action="store_true")
    p.add_argument("--lora-rank", type=int)
    p.add_argument("--lora-alpha", type=float)
    p.add_argument("--base-artifact", help="frozen head to adapt (with --adapter)")

    p = add("predict", cmd_predict, "score a cohort split")
    p.add_argument("--artifact", required=True)
    p.add_argument("--cohort", required=True)
    p.add_argument("--catalog")
    p.add_argument("--mode", choices=[m.value for m in Mode])
    p.add_argument("--split", choices=["test", "train"], default="test")
    p.add_argument("--top-k", type=int, default=0, help="0 keeps the full ranking (needed for AUC)")
    p.add_argument("--out", required=True)

    p = add("evaluate", cmd_evaluate, "metrics report with bootstrap SDs")
    p.add_argument("--predictions", required=True)
    p.add_argument("--cohort", required=True)
    p.add_argument("--catalog")
    p.add_argument("--split", choices=["test", "train"], default="test")
    p.add_argument("--subsets", help="comma-separated top-N frequency subsets, e.g. 300,50,30")
    p.add_argument("--bootstrap", type=int, help="bootstrap iterations (0 disables)")
    p.add_argument("--out", required=True)

    p = add("report", cmd_report, "per-DRG accuracy table and acc@5 bins")
    p.add_argument("--predictions", required=True)
    p.add_argument("--cohort", required=True)
    p.add_argument("--catalog")
    p.add_argument("--split", choices=["test", "train"], default="test")
    p.add_argument("--out", required=True, help="per-DRG CSV")
    p.add_argument("--summary", help="acc@5 bin summary JSON")

    p = add("synth", cmd_synth, "write synthetic notes (and optionally the synthetic catalog)")
    p.add_argument("--catalog")
    p.add_argument("--catalog-out")
    p.add_argument("--n-notes", type=int, default=5000)
    p.add_argument("--n-bases", type=int, default=60)
    p.add_argument("--out", required=True)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO,
                        format="%(levelname)s %(message)s", stream=sys.stderr, force=True)
    try:
        cfg = PipelineConfig.load(args.config)
        return args.func(args, cfg)
    except OSError as exc:
        log.error("%s", exc)
        return EXIT_IO
    except (DrgkitError, ValueError, KeyError) as exc:
        log.error("%s", exc)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
