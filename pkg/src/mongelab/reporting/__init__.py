"""Reporting utilities."""

from mongelab.reporting.json_report import RunReport, to_jsonable, write_json_report
from mongelab.reporting.markdown_report import render_markdown_report
from mongelab.reporting.series import write_series

__all__ = [
    "RunReport",
    "render_markdown_report",
    "to_jsonable",
    "write_json_report",
    "write_series",
]
