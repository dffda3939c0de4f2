"""Proximal gradient machinery: group structures, the group prox and the APG engines."""

from opf_distill.proxalg.apg import (
    ApgResult,
    MonitoredAverage,
    TraceRow,
    apg_convex,
    apg_nonconvex,
    barzilai_borwein,
    write_trace_csv,
)
from opf_distill.proxalg.base import SmoothLoss
from opf_distill.proxalg.groups import GroupStructure, group_penalty, group_prox

__all__ = [
    "ApgResult",
    "GroupStructure",
    "MonitoredAverage",
    "SmoothLoss",
    "TraceRow",
    "apg_convex",
    "apg_nonconvex",
    "barzilai_borwein",
    "group_penalty",
    "group_prox",
    "write_trace_csv",
]
