import json
from pathlib import Path
from typing import Sequence

import pandas as pd

from src.common.common import ValidationError
from src.evaluation.metrics import Metrics
from src.evaluation.records import RECORD_COLUMNS, EpisodeRecord

REPORT_FORMATS = ("csv", "json")

# Fixed column order of metric tables
METRIC_COLUMNS = [
    "domain",
    "variant",
    "attack",
    "timing",
    "noise_level",
    "ATR",
    "ATR_measured",
    "AFR",
    "ASR",
    "IS",
    "ATS",
    "ATF",
    "ARF",
    "n_agents",
    "n_episodes",
]
KEY_COLUMNS = ["domain", "variant", "attack", "timing", "noise_level"]
TEXT_COLUMNS = ["domain", "variant", "attack", "timing"]


def metrics_row(metrics: Metrics, domain: str, variant: str, attack: str, timing: str = "", noise_level: float | None = None) -> dict:
    """One row of a metric table."""
    row = {"domain": domain, "variant": variant, "attack": attack, "timing": timing, "noise_level": noise_level}
    row.update({k: v for k, v in metrics.to_dict().items() if k in METRIC_COLUMNS})
    return row


def _metrics_frame(rows) -> pd.DataFrame:
    df = rows if isinstance(rows, pd.DataFrame) else pd.DataFrame(list(rows))
    missing = [c for c in METRIC_COLUMNS if c not in df.columns]
    if missing:
        raise ValidationError([f"missing column {c!r}" for c in missing], "metric table")
    return df[METRIC_COLUMNS]


def emit_report(data, path: str | Path, fmt: str = "csv") -> Path:
    """
    Write episode records or metric rows.

    Records go to a CSV with one column per record field, or to JSON Lines with
    one record per line. Metric rows (dicts or a DataFrame) go to a CSV with the
    METRIC_COLUMNS layout or to a JSON list.

    Args:
        data: A sequence of EpisodeRecord, a sequence of metric rows or a DataFrame.
        path (str | Path): Output file.
        fmt (str): "csv" or "json".

    Returns:
        Path: The written file.
    """
    if fmt not in REPORT_FORMATS:
        raise ValueError(f"Unknown report format {fmt!r}, expected one of {REPORT_FORMATS}.")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    is_records = not isinstance(data, pd.DataFrame) and (len(data) == 0 or isinstance(data[0], EpisodeRecord))
    if is_records:
        if fmt == "csv":
            pd.DataFrame([r.to_dict() for r in data], columns=RECORD_COLUMNS).to_csv(path, index=False)
        else:
            with open(path, "w", encoding="utf-8") as f:
                for record in data:
                    f.write(json.dumps(record.to_dict()) + "\n")
        return path
    df = _metrics_frame(data)
    if fmt == "csv":
        df.to_csv(path, index=False)
    else:
        rows = df.astype(object).where(df.notna(), None).to_dict(orient="records")
        with open(path, "w", encoding="utf-8") as f:
            json.dump(rows, f, indent=2)
    return path


def load_records(path: str | Path) -> list[EpisodeRecord]:
    """Read records written by emit_report (CSV or JSON Lines)."""
    path = Path(path)
    if path.suffix == ".csv":
        df = pd.read_csv(path, dtype={"outcome": str})
        return [EpisodeRecord.from_dict(row) for row in df.to_dict(orient="records")]
    with open(path, "r", encoding="utf-8") as f:
        return [EpisodeRecord.from_dict(json.loads(line)) for line in f if line.strip()]


def load_metrics(path: str | Path) -> pd.DataFrame:
    """Read a metric table CSV, checking its columns."""
    header = list(pd.read_csv(path, nrows=0).columns)
    if header != METRIC_COLUMNS:
        raise ValidationError([f"columns {header} differ from {METRIC_COLUMNS}"], f"metric table {path}")
    return pd.read_csv(
        path,
        dtype={c: str for c in TEXT_COLUMNS},
        keep_default_na=False,
        na_values={c: [""] for c in METRIC_COLUMNS if c not in TEXT_COLUMNS},
    )


def merge_reports(paths: Sequence[str | Path]) -> pd.DataFrame:
    """
    Union of metric tables keyed by domain, agent variant, attack, timing and
    noise level.

    Raises:
        ValidationError: On schema mismatch or when two rows share a key.
    """
    if not paths:
        raise ValueError("At least one metric table is needed.")
    frames = []
    for path in paths:
        df = load_metrics(path)
        df["source"] = str(path)
        frames.append(df)
    merged = pd.concat(frames, ignore_index=True)
    keys = merged[KEY_COLUMNS].astype(str)
    duplicated = keys.duplicated(keep=False)
    if duplicated.any():
        violations = []
        for key, group in merged[duplicated].groupby(KEY_COLUMNS, dropna=False, sort=True):
            violations.append(f"key {tuple(key)} appears in {', '.join(group['source'])}")
        raise ValidationError(violations, "report merge")
    return merged[METRIC_COLUMNS]
