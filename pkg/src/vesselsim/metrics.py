"""Trial scoring: completion time, path length, speed, collisions, smoothness.

Smoothness uses the dimensionless normalized jerk of fixed-length trajectory
segments: phi = sqrt(0.5 * integral(|jerk|^2) * D^5 / ell^2) with D the segment
duration and ell its path length. Jerk comes from second-order finite
differences (central stencil inside, one-sided at the edges), so an ideal
minimum-jerk segment scores within a couple percent of its closed form
sqrt(360). The per-trial score S_raw is the median of log10(phi) over
segments; reports min-max normalize S_raw across all trials pooled, inverted
so that smoother motion maps to higher S in [0, 1].
"""

from __future__ import annotations

import csv
import io
import json
import logging
from dataclasses import dataclass

import numpy as np

from .errors import EmptyGroupError, TooShortError
from .simulate import detect_wall_contact
from .triallog import STATUS_REACHED, TrialLog

log = logging.getLogger(__name__)

PHI_EPS = 1e-12
MAX_CONTACTS_FOR_SUCCESS = 5
DEFAULT_SEGMENT_TICKS = 30


@dataclass
class TrialMetrics:
    ct_s: float
    pl_cm: float
    va_cm_s: float
    cc: int
    success: bool
    s_raw: float | None = None  # median log10 normalized jerk (lower = smoother)
    s: float | None = None  # min-max normalized, higher = smoother

    def to_dict(self) -> dict:
        return {
            "CT": self.ct_s,
            "PL": self.pl_cm,
            "Va": self.va_cm_s,
            "S": self.s,
            "CC": self.cc,
            "S_raw": self.s_raw,
            "success": self.success,
        }


def compute_basic_metrics(trial: TrialLog, debounce_ticks: int = 10) -> TrialMetrics:
    """CT, PL, Va, CC, and the five-or-fewer-contacts success flag."""
    trial.require_complete()
    ticks = [r.tick for r in trial.records]
    ct = (ticks[-1] - ticks[0]) * trial.dt
    mids = trial.midpoints()
    pl_mm = float(np.hypot(*np.diff(mids, axis=0).T).sum()) if len(mids) > 1 else 0.0
    pl_cm = pl_mm / 10.0
    va = pl_cm / ct if ct > 0 else 0.0
    cc = detect_wall_contact(trial.contact_events(), debounce_ticks)
    success = trial.status == STATUS_REACHED and cc <= MAX_CONTACTS_FOR_SUCCESS
    return TrialMetrics(ct_s=ct, pl_cm=pl_cm, va_cm_s=va, cc=cc, success=success)


# ---------------------------------------------------------------------------
# smoothness
# ---------------------------------------------------------------------------


def _third_derivative(x: np.ndarray, h: float) -> np.ndarray:
    """Second-order finite-difference third derivative along axis 0.

    Central five-point stencil in the interior; one-sided five-point stencils
    at the two samples on each edge. Needs n >= 5; n == 4 uses the single
    four-point rule everywhere (first order); n == 3 returns zeros (a third
    derivative is unobservable from three samples).
    """
    n = len(x)
    out = np.zeros_like(x, dtype=float)
    h3 = h * h * h
    if n < 3:
        raise TooShortError(f"need >= 3 samples, got {n}")
    if n == 3:
        return out
    if n == 4:
        j = (x[3] - 3 * x[2] + 3 * x[1] - x[0]) / h3
        out[:] = j
        return out
    out[2:-2] = (x[4:] - 2 * x[3:-1] + 2 * x[1:-3] - x[0:-4]) / (2 * h3)
    out[0] = (-5 * x[0] + 18 * x[1] - 24 * x[2] + 14 * x[3] - 3 * x[4]) / (2 * h3)
    out[1] = (-3 * x[0] + 10 * x[1] - 12 * x[2] + 6 * x[3] - x[4]) / (2 * h3)
    out[-1] = (5 * x[-1] - 18 * x[-2] + 24 * x[-3] - 14 * x[-4] + 3 * x[-5]) / (2 * h3)
    out[-2] = (3 * x[-1] - 10 * x[-2] + 12 * x[-3] - 6 * x[-4] + x[-5]) / (2 * h3)
    return out


def normalized_jerk(positions: np.ndarray, dt: float) -> float:
    """Dimensionless jerk measure phi of one trajectory segment, floored at eps."""
    n = len(positions)
    if n < 3:
        raise TooShortError(f"segment needs >= 3 samples, got {n}")
    jerk = _third_derivative(positions, dt)
    jerk_sq = (jerk * jerk).sum(axis=1)
    integral = float(np.trapezoid(jerk_sq, dx=dt))
    duration = (n - 1) * dt
    ell = float(np.hypot(*np.diff(positions, axis=0).T).sum())
    if ell < 1e-12:
        # no net motion: jerk-free holds floor at eps, jittering-in-place tops out
        return PHI_EPS if integral < 1e-18 else 1.0 / PHI_EPS
    phi = float(np.sqrt(0.5 * integral * duration**5 / (ell * ell)))
    return max(phi, PHI_EPS)


def smoothness_raw(
    trial: TrialLog, segment_ticks: int = DEFAULT_SEGMENT_TICKS
) -> float:
    """Median over segments of log10(max(phi, eps))."""
    trial.require_complete()
    mids = trial.midpoints()
    if len(mids) < 3:
        raise TooShortError(f"log has {len(mids)} ticks; need >= 3")
    seg_scores = []
    for lo in range(0, len(mids), segment_ticks):
        seg = mids[lo : lo + segment_ticks]
        if len(seg) < 5 and lo > 0:
            break  # trailing remainder too short to difference
        if len(seg) < 3:
            break
        phi = normalized_jerk(seg, trial.dt)
        seg_scores.append(np.log10(max(phi, PHI_EPS)))
    if not seg_scores:
        raise TooShortError("no segment long enough for the jerk stencil")
    return float(np.median(seg_scores))


def normalize_smoothness(raw_values: list[float]) -> list[float]:
    """Invert and min-max map raw scores to [0, 1]: smoothest trial -> 1.

    All-equal inputs map to 1.0 by convention (logged, not raised).
    """
    if not raw_values:
        raise EmptyGroupError("no smoothness values to normalize")
    hi = max(raw_values)
    lo = min(raw_values)
    if hi == lo:
        log.warning("degenerate smoothness range (%d identical values); all -> 1.0", len(raw_values))
        return [1.0 for _ in raw_values]
    return [(hi - v) / (hi - lo) for v in raw_values]


def score_trials(
    trials: list[TrialLog],
    debounce_ticks: int = 10,
    segment_ticks: int = DEFAULT_SEGMENT_TICKS,
) -> list[TrialMetrics]:
    """Basic metrics plus pooled-normalized smoothness for a set of trials."""
    out = [compute_basic_metrics(t, debounce_ticks) for t in trials]
    raws = [smoothness_raw(t, segment_ticks) for t in trials]
    if len(raws) >= 2:
        normed = normalize_smoothness(raws)
    else:
        normed = [1.0 for _ in raws]
    for m, raw, s in zip(out, raws, normed):
        m.s_raw = raw
        m.s = s
    return out


# ---------------------------------------------------------------------------
# condition reports
# ---------------------------------------------------------------------------

REPORT_COLUMNS = ("CT", "PL", "Va", "S", "CC")


@dataclass
class ConditionStats:
    name: str
    n: int
    mean: dict  # column -> mean
    sd: dict  # column -> sample SD (0 for a single trial)
    success_rate: float


@dataclass
class Report:
    conditions: list[ConditionStats]
    trials: dict  # condition -> list of per-trial metric dicts
    normalization: str = "pooled"


def _mean_sd(values: list[float]) -> tuple[float, float]:
    arr = np.asarray(values, dtype=float)
    mean = float(arr.mean())
    sd = float(arr.std(ddof=1)) if len(arr) > 1 else 0.0
    return mean, sd


def aggregate_report(metrics_by_condition: dict[str, list[TrialMetrics]]) -> Report:
    """Per-condition mean and sample SD of each metric, in fixed column order."""
    conditions = []
    trials = {}
    for name, group in metrics_by_condition.items():
        if not group:
            raise EmptyGroupError(f"condition {name!r} has no trials")
        cols = {
            "CT": [m.ct_s for m in group],
            "PL": [m.pl_cm for m in group],
            "Va": [m.va_cm_s for m in group],
            "S": [m.s if m.s is not None else 0.0 for m in group],
            "CC": [float(m.cc) for m in group],
        }
        mean = {}
        sd = {}
        for col in REPORT_COLUMNS:
            mean[col], sd[col] = _mean_sd(cols[col])
        conditions.append(
            ConditionStats(
                name=name,
                n=len(group),
                mean=mean,
                sd=sd,
                success_rate=sum(1 for m in group if m.success) / len(group),
            )
        )
        trials[name] = [m.to_dict() for m in group]
    return Report(conditions=conditions, trials=trials)


def report_to_csv(report: Report) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    header = ["condition", "n"]
    for col in REPORT_COLUMNS:
        header += [f"{col}_mean", f"{col}_sd"]
    header.append("success_rate")
    writer.writerow(header)
    for c in report.conditions:
        row = [c.name, c.n]
        for col in REPORT_COLUMNS:
            row += [repr(c.mean[col]), repr(c.sd[col])]
        row.append(repr(c.success_rate))
        writer.writerow(row)
    return buf.getvalue()


def report_to_json(report: Report) -> str:
    return json.dumps(
        {
            "v": 1,
            "normalization": report.normalization,
            "columns": list(REPORT_COLUMNS),
            "conditions": [
                {
                    "name": c.name,
                    "n": c.n,
                    "mean": c.mean,
                    "sd": c.sd,
                    "success_rate": c.success_rate,
                }
                for c in report.conditions
            ],
            "trials": report.trials,
        },
        indent=2,
    )
