"""Tabular rendering and JSON persistence of evaluation reports."""

import json
from pathlib import Path
from typing import Any, Mapping, Union

import pandas as pd
from pydantic import BaseModel

from evaluation.metrics import EvalReport


def report_row(report: EvalReport) -> dict:
    """mIoU and IoU@R as percentages, the way result tables print them."""
    row = {"mIoU": 100.0 * report.miou}
    for key, value in report.iou_at.items():
        row[f"IoU@{key}"] = 100.0 * value
    row["samples"] = report.count
    return row


def report_frame(reports: Mapping[str, EvalReport]) -> pd.DataFrame:
    """One row per method / configuration, in insertion order."""
    frame = pd.DataFrame([report_row(r) for r in reports.values()], index=list(reports.keys()))
    frame.index.name = "method"
    return frame


def render_table(reports: Mapping[str, EvalReport], decimals: int = 2) -> str:
    """Aligned text table; difficulty sub-reports become extra rows named 'method [tag]'."""
    rows = {}
    for name, report in reports.items():
        rows[name] = report
        for tag, sub in report.by_difficulty.items():
            rows[f"{name} [{tag}]"] = sub
    return report_frame(rows).round(decimals).to_string()


def dump_json(document: Union[BaseModel, Mapping[str, Any]]) -> str:
    """Stable JSON text: sorted keys and two-space indent, so reruns are byte-identical."""
    if isinstance(document, BaseModel):
        document = document.model_dump(mode="json")
    return json.dumps(document, indent=2, sort_keys=True) + "\n"


def write_json(path: Union[str, Path], document: Union[BaseModel, Mapping[str, Any]]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(dump_json(document), encoding="utf-8")
    return path
