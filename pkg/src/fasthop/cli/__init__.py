"""Command-line front end and report tooling."""

from .main import main, run_command
from .report import compare_reports, format_table, make_report, parse_table

__all__ = ["compare_reports", "format_table", "main", "make_report", "parse_table", "run_command"]
