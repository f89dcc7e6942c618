"""
Service for writing result tables and their provenance sidecars.
"""

import io
import json
import logging
import math
import os
from pathlib import Path
from typing import Optional, TextIO
import pandas as pd
from rich.console import Console
from rich.table import Table
from slabstack.schemas.run import FigureMetadata, OutputFormat

logger = logging.getLogger(__name__)

FLOAT_FORMAT = "%.17g"


class OutputService:
    """
    Service for handling result files.
    """

    @staticmethod
    def _json_safe(value):
        if isinstance(value, float) and not math.isfinite(value):
            return None
        return value

    @staticmethod
    def to_text(frame: pd.DataFrame, output_format: OutputFormat) -> str:
        """
        Render a table as CSV or JSON text.
        Args:
            frame: The table.
            output_format: CSV or JSON.
        Returns:
            CSV with a header row and 17 significant digits, or a JSON list of records.
        """
        if output_format is OutputFormat.JSON:
            records = [
                {key: OutputService._json_safe(value) for key, value in record.items()}
                for record in frame.to_dict(orient="records")
            ]
            return json.dumps(records, indent=2) + "\n"
        buffer = io.StringIO()
        frame.to_csv(buffer, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
        return buffer.getvalue()

    @staticmethod
    def print_table(frame: pd.DataFrame, console: Console, title: Optional[str] = None):
        """
        Show a table on the console.
        """
        table = Table(show_header=True, header_style="bold magenta", title=title)
        for column in frame.columns:
            table.add_column(str(column), style="cyan" if column == frame.columns[0] else "white")
        for record in frame.itertuples(index=False):
            table.add_row(*(f"{value:.10g}" if isinstance(value, float) else str(value) for value in record))
        console.print(table)

    @staticmethod
    def sidecar_path(out: str) -> Path:
        """
        Where the metadata of an output file goes: <stem>.meta.json next to it.
        """
        path = Path(out)
        return path.with_name(f"{path.stem}.meta.json")

    @staticmethod
    def write(
        frame: pd.DataFrame,
        output_format: OutputFormat,
        out: Optional[str] = None,
        metadata: Optional[FigureMetadata] = None,
        stream: Optional[TextIO] = None,
        console: Optional[Console] = None,
    ) -> Optional[Path]:
        """
        Write a table to a file (with its sidecar) or to a stream.
        Args:
            frame: The table.
            output_format: CSV, JSON or a rich table.
            out: Output path, the stream is used when omitted.
            metadata: Provenance written as <stem>.meta.json next to out.
            stream: Text stream for output without a path.
            console: Console for the table format.
        Returns:
            The path written, if any.
        """
        if output_format is OutputFormat.TABLE and out is None:
            OutputService.print_table(frame, console or Console(), title=metadata.command if metadata else None)
            return None
        text = OutputService.to_text(frame, OutputFormat.JSON if output_format is OutputFormat.JSON else OutputFormat.CSV)
        if out is None:
            (stream or io.StringIO()).write(text)
            return None
        path = Path(out)
        if path.parent and not path.parent.exists():
            os.makedirs(path.parent, exist_ok=True)
        path.write_text(text, encoding="utf-8")
        logger.info("Wrote %d rows to %s", len(frame), path)
        if metadata is not None:
            sidecar = OutputService.sidecar_path(out)
            sidecar.write_text(metadata.model_dump_json(indent=2, by_alias=True) + "\n", encoding="utf-8")
            logger.info("Wrote metadata to %s", sidecar)
        return path
