# -*- coding: utf-8 -*-
"""
Results writer - CSV tables (pandas) and JSON summaries

Output is byte-stable for identical inputs: fixed column order, fixed float
format, sorted JSON keys and no timestamps.
"""

from __future__ import annotations

import json
import logging
from dataclasses import asdict, dataclass, is_dataclass
from pathlib import Path

import numpy as np
import pandas as pd
import scipy

import config
from services.errors import ResultsIoError

logger = logging.getLogger(__name__)

RATE_COLUMNS = ["config_id", "d", "p", "n", "m", "s", "tau", "eps", "sup_error"]
RATE_TAIL = ["cutoff", "wall_ms"]
FLOAT_FORMAT = "%.17g"


@dataclass(frozen=True)
class WriterConfig:
    out_dir: Path
    float_format: str = FLOAT_FORMAT


def _plain(value):
    if is_dataclass(value):
        return _plain(asdict(value))
    if isinstance(value, dict):
        return {str(k): _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    if isinstance(value, np.ndarray):
        return _plain(value.tolist())
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (np.floating,)):
        value = float(value)
    if isinstance(value, float) and not np.isfinite(value):
        return None
    if isinstance(value, complex):
        return [value.real, value.imag]
    if isinstance(value, Path):
        return str(value)
    return value


def rate_frame(records) -> pd.DataFrame:
    if not records:
        raise ResultsIoError("no records to write")
    d = max(len(r.argmax_k) for r in records)
    rows = []
    for r in records:
        row = {c: getattr(r, c) for c in RATE_COLUMNS}
        for i in range(d):
            row[f"argmax_k{i}"] = r.argmax_k[i] if i < len(r.argmax_k) else float("nan")
        for c in RATE_TAIL:
            row[c] = getattr(r, c)
        rows.append(row)
    columns = RATE_COLUMNS + [f"argmax_k{i}" for i in range(d)] + RATE_TAIL
    return pd.DataFrame(rows, columns=columns)


class ResultsWriter:
    def __init__(self, cfg: WriterConfig):
        self.cfg = cfg

    def _target(self, name: str) -> Path:
        try:
            self.cfg.out_dir.mkdir(parents=True, exist_ok=True)
        except OSError as e:
            raise ResultsIoError(f"cannot create output directory {self.cfg.out_dir}: {e}") from e
        return self.cfg.out_dir / name

    def write_frame(self, name: str, frame: pd.DataFrame) -> Path:
        if frame.empty:
            raise ResultsIoError(f"refusing to write empty table {name}")
        path = self._target(name)
        try:
            frame.to_csv(path, index=False, float_format=self.cfg.float_format, lineterminator="\n")
        except OSError as e:
            raise ResultsIoError(f"cannot write {path}: {e}") from e
        logger.info("[Results] wrote %s (%s rows)", path, len(frame))
        return path

    def write_rows(self, name: str, rows: list) -> Path:
        if not rows:
            raise ResultsIoError(f"no rows to write for {name}")
        return self.write_frame(name, pd.DataFrame([_plain(r) for r in rows]))

    def write_records(self, name: str, records) -> Path:
        return self.write_frame(name, rate_frame(records))

    def write_summary(self, name: str, summary: dict) -> Path:
        payload = dict(_plain(summary))
        payload["versions"] = versions()
        path = self._target(name)
        try:
            path.write_text(json.dumps(payload, sort_keys=True, indent=2) + "\n", encoding="utf-8")
        except OSError as e:
            raise ResultsIoError(f"cannot write {path}: {e}") from e
        logger.info("[Results] wrote %s", path)
        return path


def versions() -> dict:
    return {
        config.APP_NAME: config.APP_VERSION,
        "numpy": np.__version__,
        "pandas": pd.__version__,
        "scipy": scipy.__version__,
    }


def emit_results(records, out_dir: Path, stem: str, summary: dict | None = None) -> list[Path]:
    """CSV with one row per record, plus a JSON summary"""
    if not records:
        raise ResultsIoError("no records to write")
    writer = ResultsWriter(WriterConfig(Path(out_dir)))
    paths = [writer.write_records(f"{stem}.csv", records)]
    paths.append(writer.write_summary(f"{stem}_summary.json", summary or {}))
    return paths
