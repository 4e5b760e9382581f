import math
from dataclasses import asdict, dataclass
from typing import Sequence

import numpy as np
import pandas as pd

from src.common.common import WARNINGS
from src.evaluation.records import RECORD_COLUMNS, EpisodeRecord

DEFAULT_ALPHA = 0.5


@dataclass(frozen=True)
class Metrics:
    """Session metrics averaged over agents. Absent values are None."""

    ASR: float
    AFR: float
    ATS: float | None
    ATF: float | None
    ARF: float | None
    ATR: float
    IS: float
    ATR_measured: float
    alpha: float
    n_agents: int
    n_episodes: int

    def to_dict(self) -> dict:
        return asdict(self)


def impact_score(afr: float, atr: float, alpha: float = DEFAULT_ALPHA) -> float:
    """
    Impact score alpha * sqrt(AFR) / (ATR + alpha): grows with the induced failure
    rate and shrinks with the share of tampered outputs.
    """
    return alpha * math.sqrt(afr) / (atr + alpha)


def _mean_or_none(values: pd.Series) -> float | None:
    values = values.dropna()
    return float(values.mean()) if len(values) else None


def compute_metrics(
    records: Sequence[EpisodeRecord],
    alpha: float = DEFAULT_ALPHA,
    failure_metrics: bool = False,
    nominal_atr: float | None = None,
    logger=None,
) -> Metrics:
    """
    Aggregate episode records into session metrics.

    Per agent the success rate, the mean steps of successful and failed episodes,
    the mean reward of failed episodes and the mean per-episode tampering rate are
    computed, then averaged over agents. Agents without successes (failures) are
    left out of the ATS (ATF, ARF) average.

    Args:
        records (Sequence[EpisodeRecord]): Records of one session.
        alpha (float): Impact score normalization.
        failure_metrics (bool): Report ATF and ARF (Symbol World).
        nominal_atr (float | None): Tampering rate to use in the impact score instead
            of the measured one (random noise sessions use their noise level).
        logger (Logger): Optional workflow logger for exclusion warnings.

    Returns:
        Metrics: The aggregated metrics.
    """
    if not records:
        raise ValueError("Cannot compute metrics without episode records.")
    df = pd.DataFrame([r.to_dict() for r in records], columns=RECORD_COLUMNS)
    df["rate"] = np.where(df["episode_length"] > 0, df["tamper_count"] / df["episode_length"].clip(lower=1), 0.0)

    rows = []
    for agent_id, group in df.groupby("agent_id", sort=True):
        successes = group[group["success"]]
        failures = group[~group["success"]]
        if successes.empty and logger is not None:
            logger.log("WARNING: " + WARNINGS["no-successes"].format(agent=agent_id), 1)
        if failure_metrics and failures.empty and logger is not None:
            logger.log("WARNING: " + WARNINGS["no-failures"].format(agent=agent_id), 2)
        rows.append(
            {
                "s": group["success"].mean(),
                "t_s": successes["steps"].mean() if len(successes) else np.nan,
                "t_f": failures["steps"].mean() if len(failures) else np.nan,
                "r_f": failures["reward"].mean() if len(failures) else np.nan,
                "tau": group["rate"].mean(),
            }
        )
    per_agent = pd.DataFrame(rows)
    asr = float(per_agent["s"].mean())
    afr = 1.0 - asr
    atr_measured = float(per_agent["tau"].mean())
    atr = atr_measured if nominal_atr is None else float(nominal_atr)
    return Metrics(
        ASR=asr,
        AFR=afr,
        ATS=_mean_or_none(per_agent["t_s"]),
        ATF=_mean_or_none(per_agent["t_f"]) if failure_metrics else None,
        ARF=_mean_or_none(per_agent["r_f"]) if failure_metrics else None,
        ATR=atr,
        IS=impact_score(max(afr, 0.0), atr, alpha),
        ATR_measured=atr_measured,
        alpha=alpha,
        n_agents=len(per_agent),
        n_episodes=len(df),
    )


def curve_summary(curves: Sequence) -> pd.DataFrame:
    """
    Per-bin median and 25th/75th percentiles (linear interpolation) of learning curves.

    Args:
        curves (Sequence[LearningCurve]): Curves with identical bin layouts.

    Returns:
        pd.DataFrame: Columns bin_start, median, p25, p75.
    """
    if not curves:
        return pd.DataFrame(columns=["bin_start", "median", "p25", "p75"])
    layouts = {(len(c.rewards), c.bin_width) for c in curves}
    if len(layouts) != 1:
        raise ValueError(f"Learning curves have different bin layouts: {sorted(layouts)}.")
    data = np.asarray([c.rewards for c in curves], dtype=float)
    p25, median, p75 = np.percentile(data, [25, 50, 75], axis=0)
    return pd.DataFrame({"bin_start": curves[0].bin_starts, "median": median, "p25": p25, "p75": p75})
