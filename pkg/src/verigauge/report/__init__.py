"""Audit pipeline, report serialisation, plots and the command line."""

from .audit import AuditReport, run_audit
from .config import AuditConfig, load_config
from .emit import emit_report, export_curves, parse_report, report_json

__all__ = [
    "AuditConfig",
    "AuditReport",
    "emit_report",
    "export_curves",
    "load_config",
    "parse_report",
    "report_json",
    "run_audit",
]
