"""CSV output with a ``# key=value`` metadata prologue."""
from __future__ import annotations

import csv
import io
import math
import sys
from contextlib import contextmanager
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np


def format_value(v) -> str:
    if isinstance(v, np.generic):
        v = v.item()
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        # shortest string that round-trips exactly
        return repr(v)
    if isinstance(v, (list, tuple)):
        return ",".join(format_value(x) for x in v)
    if v is None:
        return ""
    return str(v)


def write_csv(stream, metadata: Mapping, header: Sequence[str], rows: Iterable[Sequence]) -> None:
    for key, val in metadata.items():
        stream.write(f"# {key}={format_value(val)}\n")
    w = csv.writer(stream, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([format_value(x) if not isinstance(x, str) else x for x in row])


@contextmanager
def open_output(path):
    if path in (None, "", "-"):
        yield sys.stdout
    else:
        p = Path(path)
        if p.parent and not p.parent.exists():
            p.parent.mkdir(parents=True, exist_ok=True)
        with open(p, "w", encoding="utf-8", newline="") as fh:
            yield fh


def read_csv(text_or_path) -> tuple[dict, list[str], list[list[str]]]:
    """Parse output of :func:`write_csv` into ``(metadata, header, rows)``."""
    if isinstance(text_or_path, Path) or (isinstance(text_or_path, str) and "\n" not in text_or_path):
        text = Path(text_or_path).read_text(encoding="utf-8")
    else:
        text = text_or_path
    meta = {}
    body = []
    for line in text.splitlines():
        if line.startswith("# "):
            key, _, val = line[2:].partition("=")
            meta[key] = val
        elif line:
            body.append(line)
    rows = list(csv.reader(io.StringIO("\n".join(body))))
    return meta, rows[0], rows[1:]
