"""Report writers: CSV at 17 significant digits, JSON, manifest and text tables.

Every file is written to a temporary sibling first and moved into place with
os.replace, so readers never see a partial file.
"""
import json
import logging
import os
import tempfile
from typing import Any, Dict, Iterable, List, Optional

import numpy as np
import pandas as pd

from . import __version__

logger = logging.getLogger(__name__)

FLOAT_FORMAT = "%.17g"


def _atomic_write(path: str, text: str) -> None:
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp_path = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as handle:
            handle.write(text)
        os.replace(tmp_path, path)
    except BaseException:
        if os.path.exists(tmp_path):
            os.remove(tmp_path)
        raise


def _jsonable(value: Any) -> Any:
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return [_jsonable(v) for v in value.tolist()]
    if isinstance(value, (np.bool_, bool)):
        return bool(value)
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (np.floating, float)):
        number = float(value)
        if np.isnan(number):
            return None
        if np.isinf(number):
            return "inf" if number > 0 else "-inf"
        return number
    return value


def write_csv(frame: pd.DataFrame, path: str) -> str:
    """Write a DataFrame without index at 17 significant digits."""
    _atomic_write(path, frame.to_csv(index=False, float_format=FLOAT_FORMAT, lineterminator="\n"))
    logger.info(f"Wrote {path} ({len(frame)} rows)")
    return path


def write_json(data: Dict[str, Any], path: str) -> str:
    _atomic_write(path, json.dumps(_jsonable(data), indent=2) + "\n")
    logger.info(f"Wrote {path}")
    return path


def read_json(path: str) -> Dict[str, Any]:
    with open(path, encoding="utf-8") as handle:
        return json.load(handle)


def write_manifest(out_dir: str, command: str, config: Dict[str, Any], outputs: Iterable[str],
                   extra: Optional[Dict[str, Any]] = None) -> str:
    """manifest.json: library version, command, resolved config and output files."""
    manifest: Dict[str, Any] = {
        "version": __version__,
        "command": command,
        "config": config,
        "outputs": sorted(os.path.basename(p) for p in outputs),
    }
    if extra:
        manifest.update(extra)
    return write_json(manifest, os.path.join(out_dir, "manifest.json"))


def _format_value(value: Any) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "yes" if value else "no"
    if isinstance(value, (float, np.floating)):
        return f"{float(value):.10g}"
    if isinstance(value, (list, tuple)) and len(value) > 8:
        return f"[{len(value)} entries]"
    if isinstance(value, dict):
        return ", ".join(f"{k}={_format_value(v)}" for k, v in value.items())
    return str(value)


def format_report_text(report: Dict[str, Any], title: str = "REPORT") -> str:
    """Plain-text two-column table of a report dict."""
    lines: List[str] = []
    lines.append("=" * 80)
    lines.append(title)
    lines.append("=" * 80)
    width = max((len(str(k)) for k in report), default=0)
    for key, value in report.items():
        lines.append(f"{str(key).ljust(width)}  {_format_value(value)}")
    lines.append("=" * 80)
    return "\n".join(lines)
