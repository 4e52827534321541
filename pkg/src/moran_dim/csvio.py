"""CSV output: provenance line, header, 12 significant digits, atomic writes."""
from __future__ import annotations

import csv
import io
import os
import tempfile
from pathlib import Path
from typing import Iterable, Sequence

SIG_DIGITS = 12


def fmt(v) -> str:
    """Locale-independent formatting; floats get 12 significant digits."""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return f"{v:.{SIG_DIGITS}g}"
    if hasattr(v, "dtype"):  # numpy scalar
        return fmt(v.item())
    return str(v)


def provenance_line(spec_hash: str, version: str, seed: int) -> str:
    return f"#spec-hash={spec_hash} #version={version} #seed={seed}"


def render_csv(header: Sequence[str], rows: Iterable[Sequence], provenance: str | None = None) -> str:
    buf = io.StringIO()
    if provenance:
        buf.write(provenance + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([fmt(v) for v in row])
    return buf.getvalue()


def read_csv(text: str) -> tuple[list[str], list[list[str]]]:
    """Header and rows, skipping ``#`` comment lines."""
    lines = [ln for ln in text.splitlines() if not ln.startswith("#")]
    rows = list(csv.reader(lines))
    return rows[0], rows[1:]


def atomic_write(path, text: str) -> None:
    """Write to a temporary file next to ``path`` and rename it into place."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
