"""Evaluation package: IoU metrics, baselines and report tables"""

from .metrics import EvalReport, Segment, evaluate, iou
from .report import render_table, write_json

__all__ = [
    'EvalReport',
    'Segment',
    'evaluate',
    'iou',
    'render_table',
    'write_json'
]
