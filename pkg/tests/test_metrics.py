import math

import numpy as np
import pytest

from vesselsim.errors import EmptyGroupError, IncompleteLogError, TooShortError
from vesselsim.metrics import (
    PHI_EPS,
    aggregate_report,
    compute_basic_metrics,
    normalize_smoothness,
    normalized_jerk,
    report_to_csv,
    report_to_json,
    score_trials,
    smoothness_raw,
)
from vesselsim.phantom import SafetySnapshot
from vesselsim.triallog import TickRecord, TrialLog

MIN_JERK_PHI = math.sqrt(360.0)  # closed form for a quintic point-to-point segment


def synthetic_log(midpoints: np.ndarray, dt: float = 1.0 / 30.0, status="reached", events=None):
    """Build a log whose rod midpoint follows the given trajectory."""
    half = np.array([2.0, 0.0])
    records = []
    events = events or {}
    for i, mid in enumerate(np.asarray(midpoints, dtype=float)):
        records.append(
            TickRecord(
                tick=i,
                head=tuple(mid + half),
                tail=tuple(mid - half),
                tip_left=tuple(mid + half),
                tip_right=tuple(mid - half),
                alpha=(0.0, 0.0),
                u_human=((0.0, 0.0), (0.0, 0.0)),
                u_robot=((0.0, 0.0), (0.0, 0.0)),
                u_blended=((0.0, 0.0), (0.0, 0.0)),
                intent=(0.0, 0.0),
                haptic=((0.0, 0.0), (0.0, 0.0)),
                safety=SafetySnapshot(5.0, 1.0, 0.0, 1e6),
                events=list(events.get(i, [])),
            )
        )
    return TrialLog(config_hash="x", config={}, dt=dt, records=records, status=status)


def quintic_midpoints(n: int, duration: float, delta: float):
    t = np.linspace(0.0, duration, n)
    tau = t / duration
    x = delta * (10 * tau**3 - 15 * tau**4 + 6 * tau**5)
    return np.column_stack([x + 5.0, np.full(n, 5.0)]), duration / (n - 1)


class TestComputeBasicMetrics:
    def test_stationary_log(self):
        mids = np.tile(np.array([5.0, 5.0]), (301, 1))
        log = synthetic_log(mids, dt=
        1.0 / 30.0)
        m = compute_basic_metrics(log)
        assert m.ct_s == pytest.approx(10.0)
        assert m.pl_cm == 0.0
        assert m.va_cm_s == 0.0

    def test_straight_traverse(self):
        # 2 cm over 20 s
        n = 601
        xs = np.linspace(0.0, 20.0, n)
        mids = np.column_stack([xs + 5.0, np.full(n, 5.0)])
        log = synthetic_log(mids, dt=20.0 / (n - 1))
        m = compute_basic_metrics(log)
        assert m.ct_s == pytest.approx(20.0, rel=1e-9)
        assert m.pl_cm == pytest.approx(2.0, rel=1e-9)
        assert m.va_cm_s == pytest.approx(0.1, rel=1e-9)

    def test_va_identity(self):
        rng = np.random.default_rng(0)
        mids = np.cumsum(rng.normal(0, 0.1, size=(100, 2)), axis=0) + 10.0
        log = synthetic_log(mids)
        m = compute_basic_metrics(log)
        assert m.va_cm_s == pytest.approx(m.pl_cm / m.ct_s, abs=1e-9)

    @pytest.mark.parametrize("cc,expected", [(5, True), (6, False)])
    def test_success_boundary_five_contacts(self, cc, expected):
        mids = np.tile(np.array([5.0, 5.0]), (100, 1))
        events = {i * 12: [{"type": "contact", "endpoint": "head"}] for i in range(cc)}
        log = synthetic_log(mids, events=events)
        m = compute_basic_metrics(log, debounce_ticks=10)
        assert m.cc == cc
        assert m.success is expected

    def test_not_reached_never_success(self):
        mids = np.tile(np.array([5.0, 5.0]), (50, 1))
        log = synthetic_log(mids, status="timeout")
        assert not compute_basic_metrics(log).success

    def test_incomplete_log_rejected(self):
        log = synthetic_log(np.tile(np.array([5.0, 5.0]), (5, 1)), status=None)
        with pytest.raises(IncompleteLogError):
            compute_basic_metrics(log)

    def test_pl_additivity(self):
        rng = np.random.default_rng(2)
        a = np.cumsum(rng.normal(0, 0.2, size=(60, 2)), axis=0) + 20.0
        b = np.cumsum(rng.normal(0, 0.2, size=(40, 2)), axis=0) + 30.0
        joined = np.vstack([a, b])
        pl = lambda mids: compute_basic_metrics(synthetic_log(mids)).pl_cm
        joint_seg = float(np.hypot(*(b[0] - a[-1]))) / 10.0
        assert pl(joined) == pytest.approx(pl(a) + pl(b) + joint_seg, abs=1e-12)


class TestNormalizedJerk:
    def test_min_jerk_segment_matches_closed_form(self):
        mids, dt = quintic_midpoints(30, duration=1.0, delta=2.5)
        phi = normalized_jerk(mids, dt)
        assert phi == pytest.approx(MIN_JERK_PHI, rel=0.02)

    def test_constant_velocity_hits_epsilon_floor(self):
        # dyadic step keeps the finite differences exactly zero in floats
        n = 30
        mids = np.column_stack([np.arange(n) * 0.125, np.zeros(n)])
        phi = normalized_jerk(mids, 1.0 / 32.0)
        assert phi == PHI_EPS

    def test_noise_strictly_increases_phi(self):
        mids, dt = quintic_midpoints(30, duration=1.0, delta=2.5)
        clean = normalized_jerk(mids, dt)
        rng = np.random.default_rng(7)
        noisy = normalized_jerk(mids + rng.normal(0, 0.01, mids.shape), dt)
        assert noisy > clean

    def test_too_short(self):
        with pytest.raises(TooShortError):
            normalized_jerk(np.zeros((2, 2)), 0.1)


class TestSmoothnessRaw:
    def test_constant_velocity_log_scores_eps_floor(self):
        n = 90
        mids = np.column_stack([np.arange(n) * 0.125, np.zeros(n)])
        log = synthetic_log(mids, dt=1.0 / 32.0)
        assert smoothness_raw(log, segment_ticks=30) == pytest.approx(-12.0)

    def test_min_jerk_log(self):
        mids, dt = quintic_midpoints(30, duration=1.0, delta=2.5)
        log = synthetic_log(mids, dt=dt)
        s = smoothness_raw(log, segment_ticks=30)
        assert s == pytest.approx(math.log10(MIN_JERK_PHI), abs=math.log10(1.02))

    def test_white_noise_increases_raw_score(self):
        mids, dt = quintic_midpoints(120, duration=4.0, delta=6.0)
        clean = smoothness_raw(synthetic_log(mids, dt=dt), segment_ticks=30)
        rng = np.random.default_rng(3)
        noisy_mids = mids + rng.normal(0, 0.02, mids.shape)
        noisy = smoothness_raw(synthetic_log(noisy_mids, dt=dt), segment_ticks=30)
        assert noisy > clean

    def test_median_robust_to_one_wild_segment(self):
        rng = np.random.default_rng(5)
        mids, dt = quintic_midpoints(151, duration=5.0, delta=8.0)
        base = smoothness_raw(synthetic_log(mids, dt=dt), segment_ticks=30)
        wild = mids.copy()
        wild[-10:] += rng.normal(0, 2.0, size=(10, 2))  # corrupt only the last segment
        corrupted = smoothness_raw(synthetic_log(wild, dt=dt), segment_ticks=30)
        assert corrupted == pytest.approx(base, abs=0.3)

    def test_too_short_log(self):
        with pytest.raises(TooShortError):
            smoothness_raw(synthetic_log(np.zeros((2, 2))))


class TestNormalizeSmoothness:
    def test_extremes_map_to_unit_interval(self):
        s = normalize_smoothness([1.0, 3.0, 2.0])
        assert s[0] == 1.0  # lowest raw jerk = smoothest
        assert s[1] == 0.0
        assert s[2] == pytest.approx(0.5)

    def test_ranking_preserved(self):
        rng = np.random.default_rng(11)
        raw = rng.normal(1.5, 0.5, size=20).tolist()
        s = normalize_smoothness(raw)
        assert np.argsort(raw).tolist() == np.argsort(s)[::-1].tolist()

    def test_degenerate_all_equal_maps_to_one(self, caplog):
        s = normalize_smoothness([2.0, 2.0, 2.0])
        assert s == [1.0, 1.0, 1.0]

    def test_empty_rejected(self):
        with pytest.raises(EmptyGroupError):
            normalize_smoothness([])


class TestAggregateReport:
    def make_metrics(self, ct_values):
        mids, dt = quintic_midpoints(40, duration=1.0, delta=3.0)
        logs = []
        for ct in ct_values:
            n = int(round(ct / 0.1)) + 1
            xs = np.linspace(0, 5, n)
            logs.append(synthetic_log(np.column_stack([xs, xs]), dt=0.1))
        return score_trials(logs)

    def test_single_trial_sd_zero(self):
        report = aggregate_report({"solo": self.make_metrics([10.0])})
        assert report.conditions[0].sd["CT"] == 0.0

    def test_two_trial_mean_sd(self):
        report = aggregate_report({"pair": self.make_metrics([10.0, 20.0])})
        c = report.conditions[0]
        assert c.mean["CT"] == pytest.approx(15.0)
        assert c.sd["CT"] == pytest.approx(np.std([10.0, 20.0], ddof=1))

    def test_csv_column_order(self):
        report = aggregate_report({"a": self.make_metrics([10.0, 12.0])})
        header = report_to_csv(report).splitlines()[0]
        cols = header.split(",")
        order = [c[:-5] for c in cols if c.endswith("_mean")]
        assert order == ["CT", "PL", "Va", "S", "CC"]

    def test_json_mirror_contains_per_trial_values(self):
        import json

        report = aggregate_report({"a": self.make_metrics([10.0, 12.0])})
        payload = json.loads(report_to_json(report))
        assert payload["normalization"] == "pooled"
        assert len(payload["trials"]["a"]) == 2
        assert payload["columns"] == ["CT", "PL", "Va", "S", "CC"]

    def test_empty_group_rejected(self):
        with pytest.raises(EmptyGroupError):
            aggregate_report({"none": []})

    def test_csv_deterministic(self):
        m = self.make_metrics([10.0, 12.0, 14.0])
        a = report_to_csv(aggregate_report({"a": m}))
        b = report_to_csv(aggregate_report({"a": m}))
        assert a == b


class TestScoreTrials:
    def test_pooled_normalization_spans_unit_interval(self):
        mids_smooth, dt = quintic_midpoints(90, duration=3.0, delta=6.0)
        rng = np.random.default_rng(9)
        mids_rough = mids_smooth + rng.normal(0, 0.05, mids_smooth.shape)
        logs = [synthetic_log(mids_smooth, dt=dt), synthetic_log(mids_rough, dt=dt)]
        scored = score_trials(logs)
        assert scored[0].s == 1.0
        assert scored[1].s == 0.0
        assert scored[0].s_raw < scored[1].s_raw
