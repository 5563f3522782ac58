"""
File utility functions for powgame.

CSV output with a provenance header, atomic writes and the matching reader.
Reals are written with 17 significant digits so doubles round-trip exactly.
"""

import csv
import io
import os
import tempfile
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, List, Optional, Sequence, Tuple

import numpy as np

from powgame import __version__

COMMENT_PREFIX = "#"
EVENT_TAG = "event"


@dataclass
class CsvTable:
    """A parsed CSV file: header, string rows and the '#' comment lines."""

    columns: List[str]
    rows: List[List[str]]
    comments: List[str] = field(default_factory=list)

    def column(self, name: str) -> np.ndarray:
        """Numeric column as a float array; blank cells become NaN."""
        index = self.columns.index(name)
        return np.array([float(r[index]) if r[index] != "" else np.nan for r in self.rows])

    def text_column(self, name: str) -> List[str]:
        index = self.columns.index(name)
        return [r[index] for r in self.rows]

    def events(self) -> List[Tuple[float, str]]:
        """(time, kind) pairs from '# event,<t>,<kind>' comment lines."""
        found = []
        for line in self.comments:
            parts = line.split(",")
            if len(parts) == 3 and parts[0] == EVENT_TAG:
                found.append((float(parts[1]), parts[2]))
        return found


def ensure_directories(paths: Iterable[str]) -> None:
    """Create directories if they don't exist.

    Idempotent operation - safe to call multiple times.

    Examples:
        >>> ensure_directories(["out/sweeps", "out/agents"])
    """
    for path in paths:
        if path:
            os.makedirs(path, exist_ok=True)


def format_cell(value: object) -> str:
    """17 significant digits for reals, plain text for everything else."""
    if isinstance(value, (bool, np.bool_)):
        return str(value).lower()
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return format(float(value), ".17g")
    return str(value)


def provenance_lines(command: str, digest: str) -> List[str]:
    return [f"powgame {__version__}", f"command: {command}", f"config-sha256: {digest}"]


def render_csv(
    columns: Sequence[str],
    rows: Iterable[Sequence[object]],
    header_lines: Sequence[str] = (),
    footer_lines: Sequence[str] = (),
) -> str:
    """CSV text with '#'-prefixed header and footer comment lines, LF endings."""
    buffer = io.StringIO()
    for line in header_lines:
        buffer.write(f"{COMMENT_PREFIX} {line}\n")
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([format_cell(v) for v in row])
    for line in footer_lines:
        buffer.write(f"{COMMENT_PREFIX} {line}\n")
    return buffer.getvalue()


def event_lines(events: Iterable[Tuple[float, str]]) -> List[str]:
    return [f"{EVENT_TAG},{format_cell(float(t))},{kind}" for t, kind in events]


def atomic_write_text(path: str, text: str) -> None:
    """Write text to path via a temp file and rename.

    Creates the destination directory if it doesn't exist; a failed write
    never leaves a partial file behind.
    """
    dst_dir = os.path.dirname(path) or "."
    ensure_directories([dst_dir])
    with tempfile.NamedTemporaryFile(
        "w", dir=dst_dir, delete=False, encoding="utf-8", newline=""
    ) as tmp:
        tmp_path = tmp.name
        try:
            tmp.write(text)
        except Exception:
            tmp.close()
            os.remove(tmp_path)
            raise
    try:
        os.replace(tmp_path, path)
    except Exception:
        if os.path.exists(tmp_path):
            os.remove(tmp_path)
        raise


def read_csv(path: str, text: Optional[str] = None) -> CsvTable:
    """Parse a file written by render_csv (or the given text)."""
    if text is None:
        if not os.path.exists(path):
            raise FileNotFoundError(f"CSV file not found: {path}")
        text = Path(path).read_text(encoding="utf-8")

    comments: List[str] = []
    data_lines: List[str] = []
    for line in text.splitlines():
        if line.startswith(COMMENT_PREFIX):
            comments.append(line[len(COMMENT_PREFIX):].strip())
        elif line:
            data_lines.append(line)
    if not data_lines:
        raise ValueError(f"CSV has no header row: {path}")
    parsed = list(csv.reader(data_lines))
    return CsvTable(columns=parsed[0], rows=parsed[1:], comments=comments)
