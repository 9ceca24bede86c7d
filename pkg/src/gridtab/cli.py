"""Command-line interface: ingest, labelgen, reconstruct, eval, synth, roundtrip.

I/O is JSON-lines with one document per line. Per-document algorithm
failures never abort a run; they become error records in the output
stream (and a nonzero exit only under --strict). Exit codes: 0 success,
1 per-document failures with --strict, 2 schema or I/O errors.

Option precedence: explicit flags, then the JSON config file (--config
or $GRIDTAB_CONFIG), then built-in defaults.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys
from dataclasses import dataclass
from datetime import datetime, timezone
from multiprocessing import get_context
from typing import Any, Callable, Optional

import numpy as np

from . import __version__
from .errors import GridTabError, SchemaError
from .grid import GridDims
from .ingest import ingest, raw_annotation_from_dict
from .labels import build_grid_label
from .matching import FocalConfig, LossWeights, MatchCostConfig, evaluate_losses
from .metrics import adjacency_f1, cell_detection_fscore
from .reconstruct import ReconstructionConfig, reconstruct_table, to_html
from .serialize import (
    label_from_dict,
    label_to_dict,
    prediction_from_dict,
    prediction_to_dict,
    read_jsonl,
    table_from_dict,
    table_to_dict,
    write_jsonl,
)
from .synth import NoiseParams, SynthParams, generate_table, perfect_prediction, perturb
from .teds import table_to_tree, teds

SCHEMA_ERROR = "error.v1"
EVAL_MODES = ("teds", "teds-struct", "adjacency", "fscore", "loss")
_MISSING = "missing"

DEFAULTS: dict[str, Any] = {
    "m": 50,
    "n": 50,
    "tau1": 0.5,
    "tau2": 0.4,
    "lambda_cls": 1.0,
    "lambda_coord": 5.0,
    "lambda_ref": 5.0,
    "lambda_edge": 5.0,
    "gamma_iou": 0.1,
    "focal_alpha": 0.25,
    "focal_gamma": 2.0,
    "iou_thresh": 0.6,
    "workers": 1,
    "seed": 0,
    "match": "iou",
    "skip_empty": False,
    "w_cls": 1.0,
    "w_ref": 1.0,
    "count": 100,
    "rows": (2, 8),
    "cols": (2, 8),
    "merge_prob": 0.2,
    "image_w": 1024.0,
    "image_h": 1024.0,
    "jitter_px": 3.0,
    "rotation": (0.0, 0.0),
    "curve_amp": 0.0,
    "coord_sigma": 0.0,
    "edge_flip_prob": 0.0,
    "line_prob_noise": 0.0,
    "confidence_floor": 0.02,
    "confidence_ceiling": 0.98,
}


@dataclass(frozen=True)
class RunConfig:
    """Resolved knobs of one CLI run (flags > config file > defaults)."""

    m: int = 50
    n: int = 50
    tau1: float = 0.5
    tau2: float = 0.4
    lambda_cls: float = 1.0
    lambda_coord: float = 5.0
    lambda_ref: float = 5.0
    lambda_edge: float = 5.0
    gamma_iou: float = 0.1
    focal_alpha: float = 0.25
    focal_gamma: float = 2.0
    iou_thresh: float = 0.6
    workers: int = 1
    seed: int = 0
    match: str = "iou"
    skip_empty: bool = False
    w_cls: float = 1.0
    w_ref: float = 1.0
    count: int = 100
    rows: tuple[int, int] = (2, 8)
    cols: tuple[int, int] = (2, 8)
    merge_prob: float = 0.2
    image_w: float = 1024.0
    image_h: float = 1024.0
    jitter_px: float = 3.0
    rotation: tuple[float, float] = (0.0, 0.0)
    curve_amp: float = 0.0
    coord_sigma: float = 0.0
    edge_flip_prob: float = 0.0
    line_prob_noise: float = 0.0
    confidence_floor: float = 0.02
    confidence_ceiling: float = 0.98

    def dims(self) -> GridDims:
        return GridDims(self.m, self.n)

    def recon(self) -> ReconstructionConfig:
        return ReconstructionConfig(self.tau1, self.tau2)

    def weights(self) -> LossWeights:
        return LossWeights(self.lambda_cls, self.lambda_coord, self.lambda_ref, self.lambda_edge, self.gamma_iou)

    def focal(self) -> FocalConfig:
        return FocalConfig(self.focal_alpha, self.focal_gamma)

    def match_cost(self) -> MatchCostConfig:
        return MatchCostConfig(self.w_cls, self.w_ref)

    def synth_params(self, seed: int) -> SynthParams:
        return SynthParams(
            seed=seed,
            rows=self.rows,
            cols=self.cols,
            merge_prob=self.merge_prob,
            image_w=self.image_w,
            image_h=self.image_h,
            jitter_px=self.jitter_px,
            rotation_deg=self.rotation,
            curve_amp=self.curve_amp,
        )

    def noise_params(self, seed: int) -> NoiseParams:
        return NoiseParams(
            seed=seed,
            coord_sigma=self.coord_sigma,
            edge_flip_prob=self.edge_flip_prob,
            line_prob_noise=self.line_prob_noise,
            confidence_floor=self.confidence_floor,
            confidence_ceiling=self.confidence_ceiling,
        )


def doc_seed(base: int, index: int, stream: int = 0) -> int:
    """Stable per-document seed derived by seed-sequence splitting."""
    return int(np.random.SeedSequence([base, index, stream]).generate_state(1, dtype=np.uint64)[0])


def _resolve_config(args: argparse.Namespace) -> RunConfig:
    file_values: dict[str, Any] = {}
    path = getattr(args, "config", None) or os.environ.get("GRIDTAB_CONFIG")
    if path:
        try:
            with open(path, "r", encoding="utf-8") as handle:
                file_values = json.load(handle)
        except (OSError, json.JSONDecodeError) as exc:
            raise SchemaError(f"cannot read config file {path}: {exc}") from exc
        if not isinstance(file_values, dict):
            raise SchemaError(f"config file {path} must hold a JSON object")
    merged: dict[str, Any] = {}
    for key, default in DEFAULTS.items():
        value = getattr(args, key, None)
        if value is None:
            value = file_values.get(key, default)
        if isinstance(default, tuple) and value is not None:
            value = tuple(type(default[0])(v) for v in value)
        merged[key] = value
    return RunConfig(**merged)


def _error_record(doc_id: Optional[str], exc: Exception) -> dict:
    return {
        "schema": SCHEMA_ERROR,
        "doc_id": doc_id,
        "error": type(exc).__name__,
        "message": str(exc),
    }


def _run_parallel(items: list, fn: Callable[[Any], dict], workers: int) -> list[dict]:
    """Apply fn to each item, preserving order; a pool is used when workers > 1."""
    if workers <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with get_context("spawn").Pool(processes=workers) as pool:
        return pool.map(fn, items, chunksize=max(1, len(items) // (workers * 4)))


def _write_manifest(out_path: str, subcommand: str, cfg: RunConfig, counts: dict, deterministic: bool) -> None:
    manifest = {
        "schema": "run_manifest.v1",
        "tool": "gridtab",
        "version": __version__,
        "subcommand": subcommand,
        "config": dataclasses.asdict(cfg),
        "counts": counts,
    }
    if not deterministic:
        manifest["timestamp"] = datetime.now(timezone.utc).isoformat()
    with open(out_path + ".manifest.json", "w", encoding="utf-8") as handle:
        json.dump(manifest, handle, indent=2)
        handle.write("\n")


def _doc_id(doc: dict, index: int) -> str:
    return doc.get("doc_id") or f"line-{index:06d}"


# ---------------------------------------------------------------------------
# per-document workers (top level so they pickle for the process pool)


def _work_ingest(item: tuple[int, dict]) -> dict:
    index, doc = item
    doc_id = _doc_id(doc, index)
    try:
        table = ingest(raw_annotation_from_dict(doc))
        return table_to_dict(table, doc_id=doc_id)
    except Exception as exc:  # per-document isolation
        return _error_record(doc_id, exc)


def _work_labelgen(item: tuple[int, dict], cfg: RunConfig) -> dict:
    index, doc = item
    doc_id = _doc_id(doc, index)
    try:
        table = table_from_dict(doc)
        label = build_grid_label(table, cfg.dims())
        return label_to_dict(label, doc_id=doc_id)
    except Exception as exc:
        return _error_record(doc_id, exc)


def _work_reconstruct(item: tuple[int, dict], cfg: RunConfig, emit_html: bool) -> dict:
    index, doc = item
    doc_id = _doc_id(doc, index)
    try:
        pred = prediction_from_dict(doc)
        table = reconstruct_table(pred, cfg.recon())
        out = table_to_dict(table, doc_id=doc_id)
        if emit_html:
            out["html"] = list(to_html(table).tokens)
        return out
    except Exception as exc:
        return _error_record(doc_id, exc)


def _work_eval_tables(item: tuple[str, dict, dict], mode: str, cfg: RunConfig) -> dict:
    doc_id, pred_doc, gt_doc = item
    try:
        if pred_doc.get("schema") == _MISSING:
            raise SchemaError(f"no prediction document for doc_id {doc_id!r}")
        pred = table_from_dict(pred_doc)
        gt = table_from_dict(gt_doc)
        if mode in ("teds", "teds-struct"):
            struct_only = mode == "teds-struct"
            score = teds(
                table_to_tree(pred, with_content=not struct_only),
                table_to_tree(gt, with_content=not struct_only),
                struct_only=struct_only,
            )
            return {"doc_id": doc_id, "score": score}
        if mode == "adjacency":
            prf = adjacency_f1(pred, gt, match=cfg.match, iou_thresh=cfg.iou_thresh, skip_empty=cfg.skip_empty)
        else:  # fscore
            prf = cell_detection_fscore(pred.cells, gt.cells, iou_thresh=cfg.iou_thresh)
        return {
            "doc_id": doc_id,
            "precision": prf.precision,
            "recall": prf.recall,
            "f1": prf.f1,
            "tp": prf.tp,
            "n_pred": prf.n_pred,
            "n_gt": prf.n_gt,
        }
    except Exception as exc:
        return _error_record(doc_id, exc)


def _work_eval_loss(item: tuple[str, dict, dict], cfg: RunConfig) -> dict:
    doc_id, pred_doc, gt_doc = item
    try:
        if pred_doc.get("schema") == _MISSING:
            raise SchemaError(f"no prediction document for doc_id {doc_id!r}")
        pred = prediction_from_dict(pred_doc)
        label = label_from_dict(gt_doc)
        terms = evaluate_losses(
            pred, label, weights=cfg.weights(), focal=cfg.focal(), match=cfg.match_cost()
        )
        return {"doc_id": doc_id, **terms}
    except Exception as exc:
        return _error_record(doc_id, exc)


def _work_synth(item: int, cfg: RunConfig, emits: tuple[str, ...]) -> dict:
    index = item
    doc_id = f"synth-{cfg.seed}-{index:06d}"
    try:
        table = generate_table(cfg.synth_params(doc_seed(cfg.seed, index)))
        out: dict[str, Any] = {"doc_id": doc_id}
        if "tables" in emits:
            out["table"] = table_to_dict(table, doc_id=doc_id)
        if "labels" in emits or "predictions" in emits:
            label = build_grid_label(table, cfg.dims())
            if "labels" in emits:
                out["label"] = label_to_dict(label, doc_id=doc_id)
            if "predictions" in emits:
                pred = perturb(label, cfg.noise_params(doc_seed(cfg.seed, index, stream=1)))
                out["prediction"] = prediction_to_dict(pred, doc_id=doc_id)
        return out
    except Exception as exc:
        return {"error_record": _error_record(doc_id, exc)}


def _work_roundtrip(item: int, cfg: RunConfig, perfect: bool) -> dict:
    index = item
    doc_id = f"synth-{cfg.seed}-{index:06d}"
    try:
        table = generate_table(cfg.synth_params(doc_seed(cfg.seed, index)))
        label = build_grid_label(table, cfg.dims())
        if perfect:
            pred = perfect_prediction(label)
        else:
            pred = perturb(label, cfg.noise_params(doc_seed(cfg.seed, index, stream=1)))
        rec = reconstruct_table(pred, cfg.recon())
        struct = teds(table_to_tree(rec, False), table_to_tree(table, False), struct_only=True)
        adj = adjacency_f1(rec, table, match=cfg.match, iou_thresh=cfg.iou_thresh)
        det = cell_detection_fscore(rec.cells, table.cells, iou_thresh=cfg.iou_thresh)
        return {
            "doc_id": doc_id,
            "spans_exact": rec.span_set() == table.span_set(),
            "teds_struct": struct,
            "adjacency_f1": adj.f1,
            "detection_f1": det.f1,
        }
    except Exception as exc:
        return _error_record(doc_id, exc)


# ---------------------------------------------------------------------------
# subcommands


def _load_docs(path: str) -> list[dict]:
    return list(read_jsonl(path))


def _emit_stream(
    out_path: str, results: list[dict], subcommand: str, cfg: RunConfig, read: int, deterministic: bool
) -> int:
    errors = sum(1 for r in results if r.get("schema") == SCHEMA_ERROR)
    write_jsonl(out_path, results)
    _write_manifest(
        out_path, subcommand, cfg, {"read": read, "written": len(results), "errors": errors}, deterministic
    )
    return errors


def _cmd_ingest(args: argparse.Namespace, cfg: RunConfig) -> int:
    docs = _load_docs(args.input)
    results = _run_parallel(list(enumerate(docs)), _work_ingest, cfg.workers)
    errors = _emit_stream(args.output, results, "ingest", cfg, len(docs), args.deterministic)
    print(f"ingest: {len(docs) - errors}/{len(docs)} documents -> {args.output}")
    return 1 if errors and args.strict else 0


def _cmd_labelgen(args: argparse.Namespace, cfg: RunConfig) -> int:
    from functools import partial

    docs = _load_docs(args.input)
    results = _run_parallel(list(enumerate(docs)), partial(_work_labelgen, cfg=cfg), cfg.workers)
    errors = _emit_stream(args.output, results, "labelgen", cfg, len(docs), args.deterministic)
    print(f"labelgen: {len(docs) - errors}/{len(docs)} labels ({cfg.m}x{cfg.n}) -> {args.output}")
    return 1 if errors and args.strict else 0


def _cmd_reconstruct(args: argparse.Namespace, cfg: RunConfig) -> int:
    from functools import partial

    docs = _load_docs(args.input)
    fn = partial(_work_reconstruct, cfg=cfg, emit_html=args.html)
    results = _run_parallel(list(enumerate(docs)), fn, cfg.workers)
    errors = _emit_stream(args.output, results, "reconstruct", cfg, len(docs), args.deterministic)
    print(
        f"reconstruct: {len(docs) - errors}/{len(docs)} tables "
        f"(tau1={cfg.tau1}, tau2={cfg.tau2}) -> {args.output}"
    )
    return 1 if errors and args.strict else 0


def _pair_documents(pred_docs: list[dict], gt_docs: list[dict]) -> list[tuple[str, dict, dict]]:
    pred_ids = [d.get("doc_id") for d in pred_docs]
    gt_ids = [d.get("doc_id") for d in gt_docs]
    if all(i is not None for i in pred_ids) and all(i is not None for i in gt_ids):
        by_id = {i: d for i, d in zip(pred_ids, pred_docs)}
        pairs = []
        for gid, gdoc in zip(gt_ids, gt_docs):
            pdoc = by_id.get(gid)
            if pdoc is None:
                pairs.append((gid, {"schema": _MISSING}, gdoc))
            else:
                pairs.append((gid, pdoc, gdoc))
        return pairs
    if any(i is not None for i in pred_ids) or any(i is not None for i in gt_ids):
        raise SchemaError("doc_id must be present on every document of both files, or on none")
    if len(pred_docs) != len(gt_docs):
        raise SchemaError(
            f"cannot pair by position: {len(pred_docs)} predictions vs {len(gt_docs)} ground truths"
        )
    return [(f"line-{k:06d}", p, g) for k, (p, g) in enumerate(zip(pred_docs, gt_docs))]


def _aggregate_eval(mode: str, results: list[dict]) -> dict:
    scored = [r for r in results if r.get("schema") != SCHEMA_ERROR]
    errors = len(results) - len(scored)
    agg: dict[str, Any] = {"count": len(results), "scored": len(scored), "errors": errors}
    if not scored:
        return agg
    if mode in ("teds", "teds-struct"):
        agg["mean_score"] = float(np.mean([r["score"] for r in scored]))
    elif mode in ("adjacency", "fscore"):
        for key in ("precision", "recall", "f1"):
            agg[f"macro_{key}"] = float(np.mean([r[key] for r in scored]))
        tp = sum(r["tp"] for r in scored)
        n_pred = sum(r["n_pred"] for r in scored)
        n_gt = sum(r["n_gt"] for r in scored)
        if n_pred == 0 and n_gt == 0:
            micro_p = micro_r = 1.0
        else:
            micro_p = tp / n_pred if n_pred else 0.0
            micro_r = tp / n_gt if n_gt else 0.0
        agg["micro_precision"] = micro_p
        agg["micro_recall"] = micro_r
        agg["micro_f1"] = 2 * micro_p * micro_r / (micro_p + micro_r) if micro_p + micro_r else 0.0
    else:  # loss
        for key in ("cls", "coord", "ref", "edge", "total"):
            agg[f"mean_{key}"] = float(np.mean([r[key] for r in scored]))
    return agg


def _primary_scores(mode: str, results: list[dict]) -> list[float]:
    key = {"teds": "score", "teds-struct": "score", "adjacency": "f1", "fscore": "f1", "loss": "total"}[mode]
    return [r[key] for r in results if r.get("schema") != SCHEMA_ERROR]


def _write_csv(path: str, rows: list[dict]) -> None:
    import csv

    fields: list[str] = []
    for row in rows:
        for key in row:
            if key not in fields:
                fields.append(key)
    with open(path, "w", encoding="utf-8", newline="") as handle:
        writer = csv.DictWriter(handle, fieldnames=fields)
        writer.writeheader()
        writer.writerows(rows)


def _cmd_eval(args: argparse.Namespace, cfg: RunConfig) -> int:
    from functools import partial

    mode = args.mode
    pred_docs = _load_docs(args.pred)
    gt_docs = _load_docs(args.gt)
    pairs = _pair_documents(pred_docs, gt_docs)
    if mode == "loss":
        fn = partial(_work_eval_loss, cfg=cfg)
    else:
        fn = partial(_work_eval_tables, mode=mode, cfg=cfg)
    results = _run_parallel(pairs, fn, cfg.workers)
    report = {
        "schema": "eval_report.v1",
        "mode": mode,
        "aggregate": _aggregate_eval(mode, results),
        "per_doc": results,
    }
    errors = report["aggregate"]["errors"]
    if args.output:
        with open(args.output, "w", encoding="utf-8") as handle:
            json.dump(report, handle, indent=2)
            handle.write("\n")
        _write_manifest(
            args.output, f"eval {mode}", cfg,
            {"read": len(pairs), "written": len(results), "errors": errors}, args.deterministic,
        )
    if args.csv:
        _write_csv(args.csv, results)
    if args.plots:
        from .report import save_score_histogram

        scores = _primary_scores(mode, results)
        xlabel = "total loss" if mode == "loss" else ("f1" if mode in ("adjacency", "fscore") else "score")
        save_score_histogram(
            scores, os.path.join(args.plots, f"eval_{mode}.png"), f"eval {mode} ({len(scores)} documents)", xlabel
        )
    agg = report["aggregate"]
    summary = {k: round(v, 6) if isinstance(v, float) else v for k, v in agg.items()}
    print(f"eval {mode}: {summary}")
    return 1 if errors and args.strict else 0


def _cmd_synth(args: argparse.Namespace, cfg: RunConfig) -> int:
    from functools import partial

    emits = tuple(e.strip() for e in args.emit.split(",") if e.strip())
    unknown = set(emits) - {"tables", "labels", "predictions"}
    if unknown:
        raise SchemaError(f"unknown --emit kinds: {sorted(unknown)}")
    outputs = {
        "tables": args.tables_out,
        "labels": args.labels_out,
        "predictions": args.predictions_out,
    }
    for kind in emits:
        if not outputs[kind]:
            raise SchemaError(f"--emit {kind} requires --{kind}-out")
    results = _run_parallel(list(range(cfg.count)), partial(_work_synth, cfg=cfg, emits=emits), cfg.workers)
    total_errors = 0
    for kind, key in (("tables", "table"), ("labels", "label"), ("predictions", "prediction")):
        if kind not in emits:
            continue
        stream = [r.get(key, r.get("error_record")) for r in results]
        errors = _emit_stream(outputs[kind], stream, "synth", cfg, cfg.count, args.deterministic)
        total_errors = max(total_errors, errors)
        print(f"synth: {cfg.count - errors}/{cfg.count} {kind} -> {outputs[kind]}")
    return 1 if total_errors and args.strict else 0


def _cmd_roundtrip(args: argparse.Namespace, cfg: RunConfig) -> int:
    from functools import partial

    fn = partial(_work_roundtrip, cfg=cfg, perfect=args.perfect)
    results = _run_parallel(list(range(args.seeds)), fn, cfg.workers)
    scored = [r for r in results if r.get("schema") != SCHEMA_ERROR]
    errors = len(results) - len(scored)
    success = sum(1 for r in scored if r["spans_exact"] and r["teds_struct"] == 1.0)
    report = {
        "schema": "roundtrip_report.v1",
        "seeds": args.seeds,
        "success": success,
        "errors": errors,
        "teds_struct_mean": float(np.mean([r["teds_struct"] for r in scored])) if scored else 0.0,
        "adjacency_f1_mean": float(np.mean([r["adjacency_f1"] for r in scored])) if scored else 0.0,
        "detection_f1_mean": float(np.mean([r["detection_f1"] for r in scored])) if scored else 0.0,
        "per_doc": results,
    }
    if args.output:
        with open(args.output, "w", encoding="utf-8") as handle:
            json.dump(report, handle, indent=2)
            handle.write("\n")
        _write_manifest(
            args.output, "roundtrip", cfg,
            {"read": args.seeds, "written": len(results), "errors": errors}, args.deterministic,
        )
    if args.csv:
        _write_csv(args.csv, results)
    if args.plots:
        from .report import save_score_histogram

        save_score_histogram(
            [r["teds_struct"] for r in scored],
            os.path.join(args.plots, "roundtrip_teds_struct.png"),
            f"roundtrip structure score ({len(scored)} seeds)",
        )
    print(
        f"roundtrip: success {success}/{args.seeds}, "
        f"teds-struct {report['teds_struct_mean']:.4f}, "
        f"adjacency-f1 {report['adjacency_f1_mean']:.4f}, "
        f"detection-f1 {report['detection_f1_mean']:.4f}, errors {errors}"
    )
    return 1 if errors and args.strict else 0


# ---------------------------------------------------------------------------
# argument parsing


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="JSON config file (default: $GRIDTAB_CONFIG)")
    parser.add_argument("--workers", type=int, help="worker processes (default 1)")
    parser.add_argument("--strict", action="store_true", help="exit 1 when any document failed")
    parser.add_argument("--deterministic", action="store_true", help="omit timestamps from manifests")


def _add_synth_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--seed", type=int, help="base seed")
    parser.add_argument("--rows", nargs=2, type=int, metavar=("LO", "HI"), help="row-count range")
    parser.add_argument("--cols", nargs=2, type=int, metavar=("LO", "HI"), help="column-count range")
    parser.add_argument("--merge-prob", type=float, help="cell-merge intensity in [0,1]")
    parser.add_argument("--image-w", type=float)
    parser.add_argument("--image-h", type=float)
    parser.add_argument("--jitter-px", type=float, help="separator jitter in pixels")
    parser.add_argument("--rotation", nargs=2, type=float, metavar=("LO", "HI"), help="rotation range, degrees")
    parser.add_argument("--curve-amp", type=float, help="sinusoidal warp amplitude (normalized)")
    parser.add_argument("--coord-sigma", type=float, help="vertex coordinate noise std (normalized)")
    parser.add_argument("--edge-flip-prob", type=float)
    parser.add_argument("--line-prob-noise", type=float)
    parser.add_argument("--confidence-floor", type=float)
    parser.add_argument("--confidence-ceiling", type=float)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gridtab", description=__doc__)
    parser.add_argument("--version", action="version", version=f"gridtab {__version__}")
    sub = parser.add_subparsers(dest="subcommand", required=True)

    p = sub.add_parser("ingest", help="raw annotations -> logical tables")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--out", dest="output", required=True)
    _add_common(p)
    p.set_defaults(handler=_cmd_ingest)

    p = sub.add_parser("labelgen", help="logical tables -> grid labels")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--out", dest="output", required=True)
    p.add_argument("--m", type=int, help="row-line budget (default 50)")
    p.add_argument("--n", type=int, help="column-line budget (default 50)")
    _add_common(p)
    p.set_defaults(handler=_cmd_labelgen)

    p = sub.add_parser("reconstruct", help="grid predictions -> logical tables")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--out", dest="output", required=True)
    p.add_argument("--tau1", type=float, help="row/column score threshold (default 0.5)")
    p.add_argument("--tau2", type=float, help="edge score threshold (default 0.4)")
    p.add_argument("--html", action="store_true", help="also emit HTML structure tokens")
    _add_common(p)
    p.set_defaults(handler=_cmd_reconstruct)

    p = sub.add_parser("eval", help="score predictions against ground truth")
    p.add_argument("mode", choices=EVAL_MODES)
    p.add_argument("--pred", required=True, help="predictions JSON-lines")
    p.add_argument("--gt", required=True, help="ground-truth JSON-lines")
    p.add_argument("--out", dest="output", help="JSON report path")
    p.add_argument("--csv", help="per-document CSV summary path")
    p.add_argument("--plots", help="directory for report figures")
    p.add_argument("--iou-thresh", type=float, help="cell-match IoU threshold (default 0.6)")
    p.add_argument("--match", choices=("iou", "logical"), help="cell matching mode for adjacency")
    p.add_argument("--skip-empty", action="store_true", default=None, help="ignore blank cells in relations")
    p.add_argument("--lambda-cls", type=float)
    p.add_argument("--lambda-coord", type=float)
    p.add_argument("--lambda-ref", type=float)
    p.add_argument("--lambda-edge", type=float)
    p.add_argument("--gamma-iou", type=float)
    p.add_argument("--focal-alpha", type=float)
    p.add_argument("--focal-gamma", type=float)
    p.add_argument("--w-cls", type=float, help="matching-cost class weight")
    p.add_argument("--w-ref", type=float, help="matching-cost reference weight")
    _add_common(p)
    p.set_defaults(handler=_cmd_eval)

    p = sub.add_parser("synth", help="generate seeded tables / labels / predictions")
    p.add_argument("--count", type=int, help="number of documents (default 100)")
    p.add_argument("--emit", default="tables", help="comma list of tables,labels,predictions")
    p.add_argument("--tables-out")
    p.add_argument("--labels-out")
    p.add_argument("--predictions-out")
    p.add_argument("--m", type=int)
    p.add_argument("--n", type=int)
    _add_synth_flags(p)
    _add_common(p)
    p.set_defaults(handler=_cmd_synth)

    p = sub.add_parser("roundtrip", help="synth -> labelgen -> perturb -> reconstruct -> eval")
    p.add_argument("--seeds", type=int, default=100, help="number of seeded documents")
    p.add_argument("--perfect", action="store_true", help="use exact 1/0 scores instead of the noise model")
    p.add_argument("--out", dest="output", help="JSON report path")
    p.add_argument("--csv", help="per-seed CSV path")
    p.add_argument("--plots", help="directory for report figures")
    p.add_argument("--m", type=int)
    p.add_argument("--n", type=int)
    p.add_argument("--tau1", type=float)
    p.add_argument("--tau2", type=float)
    p.add_argument("--iou-thresh", type=float)
    _add_synth_flags(p)
    _add_common(p)
    p.set_defaults(handler=_cmd_roundtrip)

    return parser


def main(argv: Optional[list[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = _resolve_config(args)
        return args.handler(args, cfg)
    except (SchemaError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except GridTabError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
