"""JSON schemas and JSON-lines I/O.

Every written document carries an explicit ``schema`` field which is
checked on read; unknown extra fields are tolerated. Arrays are
row-major (row line outer, column line inner). Booleans are written as
true/false; 0/1 is accepted on read.
"""

from __future__ import annotations

import json
from typing import Any, Iterable, Iterator, Optional

import numpy as np

from .errors import SchemaError
from .grid import Cell, GridDims, GridLabel, GridPrediction, LogicalTable

__all__ = [
    "SCHEMA_TABLE",
    "SCHEMA_LABEL",
    "SCHEMA_PREDICTION",
    "table_to_dict",
    "table_from_dict",
    "label_to_dict",
    "label_from_dict",
    "prediction_to_dict",
    "prediction_from_dict",
    "check_schema",
    "read_jsonl",
    "write_jsonl",
]

SCHEMA_TABLE = "logical_table.v1"
SCHEMA_LABEL = "grid_label.v1"
SCHEMA_PREDICTION = "grid_prediction.v1"


def check_schema(doc: dict, expected: str) -> None:
    schema = doc.get("schema")
    if schema is None:
        raise SchemaError(f"document has no 'schema' field (expected {expected})")
    if schema != expected:
        raise SchemaError(f"expected schema {expected}, got {schema!r}")


def _require(doc: dict, key: str) -> Any:
    try:
        return doc[key]
    except KeyError as exc:
        raise SchemaError(f"missing field {key!r}") from exc


def _bool_array(value: Any, name: str) -> np.ndarray:
    try:
        return np.asarray(value, dtype=float).astype(bool)
    except (TypeError, ValueError) as exc:
        raise SchemaError(f"field {name!r} is not a boolean array") from exc


def _float_array(value: Any, name: str) -> np.ndarray:
    try:
        return np.asarray(value, dtype=float)
    except (TypeError, ValueError) as exc:
        raise SchemaError(f"field {name!r} is not a numeric array") from exc


def table_to_dict(table: LogicalTable, doc_id: Optional[str] = None) -> dict:
    doc: dict[str, Any] = {
        "schema": SCHEMA_TABLE,
        "rows": table.rows,
        "cols": table.cols,
        "image_w": table.image_w,
        "image_h": table.image_h,
        "cells": [
            {
                "row_start": cell.row_start,
                "row_end": cell.row_end,
                "col_start": cell.col_start,
                "col_end": cell.col_end,
                "quad": None if cell.quad is None else np.asarray(cell.quad).tolist(),
                "content": cell.content,
            }
            for cell in table.cells
        ],
    }
    if doc_id is not None:
        doc["doc_id"] = doc_id
    return doc


def table_from_dict(doc: dict) -> LogicalTable:
    check_schema(doc, SCHEMA_TABLE)
    cells = []
    for raw in _require(doc, "cells"):
        quad = raw.get("quad")
        cells.append(
            Cell(
                row_start=int(_require(raw, "row_start")),
                row_end=int(_require(raw, "row_end")),
                col_start=int(_require(raw, "col_start")),
                col_end=int(_require(raw, "col_end")),
                quad=None if quad is None else np.asarray(quad, dtype=float),
                content=raw.get("content"),
            )
        )
    return LogicalTable(
        rows=int(_require(doc, "rows")),
        cols=int(_require(doc, "cols")),
        image_w=float(_require(doc, "image_w")),
        image_h=float(_require(doc, "image_h")),
        cells=tuple(cells),
    )


def _refs_to_list(free: np.ndarray, positive: np.ndarray, fixed: float) -> list[dict]:
    return [
        {"fixed": fixed if pos else -1.0, "free": float(f), "positive": bool(pos)}
        for f, pos in zip(free, positive)
    ]


def label_to_dict(label: GridLabel, doc_id: Optional[str] = None) -> dict:
    doc: dict[str, Any] = {
        "schema": SCHEMA_LABEL,
        "m": label.dims.m,
        "n": label.dims.n,
        "image_w": label.image_w,
        "image_h": label.image_h,
        "row_positive": label.row_positive.tolist(),
        "col_positive": label.col_positive.tolist(),
        "vertex_positive": label.vertex_positive.tolist(),
        "vertex_x": label.vertex_x.tolist(),
        "vertex_y": label.vertex_y.tolist(),
        "down_edge": label.down_edge.tolist(),
        "right_edge": label.right_edge.tolist(),
        "row_ref": _refs_to_list(label.row_ref_free, label.row_positive, label.ref_fixed),
        "col_ref": _refs_to_list(label.col_ref_free, label.col_positive, label.ref_fixed),
    }
    if doc_id is not None:
        doc["doc_id"] = doc_id
    return doc


def label_from_dict(doc: dict) -> GridLabel:
    check_schema(doc, SCHEMA_LABEL)
    dims = GridDims(int(_require(doc, "m")), int(_require(doc, "n")))
    row_ref = _require(doc, "row_ref")
    col_ref = _require(doc, "col_ref")
    return GridLabel(
        dims=dims,
        row_positive=_bool_array(_require(doc, "row_positive"), "row_positive"),
        col_positive=_bool_array(_require(doc, "col_positive"), "col_positive"),
        vertex_positive=_bool_array(_require(doc, "vertex_positive"), "vertex_positive"),
        vertex_x=_float_array(_require(doc, "vertex_x"), "vertex_x"),
        vertex_y=_float_array(_require(doc, "vertex_y"), "vertex_y"),
        down_edge=_bool_array(_require(doc, "down_edge"), "down_edge"),
        right_edge=_bool_array(_require(doc, "right_edge"), "right_edge"),
        row_ref_free=np.array([float(r["free"]) for r in row_ref]),
        col_ref_free=np.array([float(r["free"]) for r in col_ref]),
        image_w=float(doc.get("image_w", 1.0)),
        image_h=float(doc.get("image_h", 1.0)),
    )


def prediction_to_dict(pred: GridPrediction, doc_id: Optional[str] = None) -> dict:
    doc: dict[str, Any] = {
        "schema": SCHEMA_PREDICTION,
        "m": pred.dims.m,
        "n": pred.dims.n,
        "image_w": pred.image_w,
        "image_h": pred.image_h,
        "row_prob": pred.row_prob.tolist(),
        "col_prob": pred.col_prob.tolist(),
        "vertex_x": pred.vertex_x.tolist(),
        "vertex_y": pred.vertex_y.tolist(),
        "down_edge_prob": pred.down_edge_prob.tolist(),
        "right_edge_prob": pred.right_edge_prob.tolist(),
        "row_ref_pred": pred.row_ref_pred.tolist(),
        "col_ref_pred": pred.col_ref_pred.tolist(),
    }
    if doc_id is not None:
        doc["doc_id"] = doc_id
    return doc


def prediction_from_dict(doc: dict) -> GridPrediction:
    check_schema(doc, SCHEMA_PREDICTION)
    dims = GridDims(int(_require(doc, "m")), int(_require(doc, "n")))
    return GridPrediction(
        dims=dims,
        row_prob=_float_array(_require(doc, "row_prob"), "row_prob"),
        col_prob=_float_array(_require(doc, "col_prob"), "col_prob"),
        vertex_x=_float_array(_require(doc, "vertex_x"), "vertex_x"),
        vertex_y=_float_array(_require(doc, "vertex_y"), "vertex_y"),
        down_edge_prob=_float_array(_require(doc, "down_edge_prob"), "down_edge_prob"),
        right_edge_prob=_float_array(_require(doc, "right_edge_prob"), "right_edge_prob"),
        row_ref_pred=_float_array(_require(doc, "row_ref_pred"), "row_ref_pred"),
        col_ref_pred=_float_array(_require(doc, "col_ref_pred"), "col_ref_pred"),
        image_w=float(doc.get("image_w", 1.0)),
        image_h=float(doc.get("image_h", 1.0)),
    )


def read_jsonl(path) -> Iterator[dict]:
    """Yield one decoded document per non-empty line."""
    with open(path, "r", encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                doc = json.loads(line)
            except json.JSONDecodeError as exc:
                raise SchemaError(f"{path}:{lineno}: invalid JSON: {exc}") from exc
            if not isinstance(doc, dict):
                raise SchemaError(f"{path}:{lineno}: document is not an object")
            yield doc


def write_jsonl(path, docs: Iterable[dict]) -> int:
    """Write one compact JSON document per line; returns the count."""
    count = 0
    with open(path, "w", encoding="utf-8") as handle:
        for doc in docs:
            handle.write(json.dumps(doc, separators=(",", ":")) + "\n")
            count += 1
    return count
