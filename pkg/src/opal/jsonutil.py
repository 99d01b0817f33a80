"""Canonical JSON helpers.

Every persisted artifact goes through ``canonical_dumps`` so that reruns with
identical inputs produce byte-identical files (sorted keys, fixed separators,
trailing newline, no NaN/Inf).
"""

from __future__ import annotations

import json
import os
from pathlib import Path
from typing import Any


def canonical_dumps(data: Any) -> str:
    return json.dumps(data, indent=2, sort_keys=True, allow_nan=False) + "\n"


def write_json(path: Path | str, data: Any) -> None:
    Path(path).write_text(canonical_dumps(data), encoding="utf-8")


def write_json_atomic(path: Path | str, data: Any) -> None:
    """Write via tmp-file + rename so readers never observe a torn file."""
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(canonical_dumps(data), encoding="utf-8")
    os.replace(tmp, path)


def read_json(path: Path | str) -> Any:
    return json.loads(Path(path).read_text(encoding="utf-8"))
