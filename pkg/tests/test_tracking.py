# ===================================================================================
#   tests/test_tracking.py: 2차 허프 추적기와 극성 짝짓기 테스트
# ===================================================================================
#
#   - 등속으로 이동하는 가장자리 한 쌍 → 극성별 트랙 1개씩 → 짝지은 Track 1개.
#   - finalize_gap: 진행 중인 트랙은 확정되지 않고 누산기에도 그대로 남음.
#   - origin 재설정(rebase) 후에도 누산기 == 살아있는 점으로 다시 센 값.
#   - 20점 직선 하나 → 트랙 1개, 8 px 떨어진 평행 직선 두 개 → 샘플을 공유하지 않는 트랙 2개.
#   - 같은 시각 검출의 도착 순서를 바꿔도 트랙 분할은 같음.
#   - 짝짓기 조건 (phi bin 차이, 평균 수평 거리, 시간 겹침), 스트리밍 TrackPairer.
#
#
import math

import numpy as np
import pytest

from app.config import TrackerConfig
from app.errors import OrderError
from app.hough.models import Detection
from app.tracking.models import LineFit, PolarityTrack, SpatioTemporalPoint
from app.tracking.pairing import TrackPairer, match_tracks, merge_pair, pair_tracks
from app.tracking.second_ht import SpatioTemporalTracker, extract_tracks, ingest_detection, recount_accumulator

STEP_US = 10_000


def edge(polarity: int, x0: float, slope_px_per_step: float, n: int = 101, t0: int = 0, step_us: int = STEP_US):
    """t0부터 step_us 간격으로 x = x0 + slope·k 위치에 검출되는 가장자리"""
    return [Detection(t0 + k * step_us, int(round(x0 + slope_px_per_step * k)), 0.0, polarity, 40)
            for k in range(n)]


def merged(*streams):
    return sorted((d for s in streams for d in s), key=lambda d: (d.t, -d.polarity))


def ptrack(polarity: int, t, x, phi_bin: int = 30) -> PolarityTrack:
    t = np.asarray(t, dtype=np.int64)
    x = np.asarray(x, dtype=np.float64)
    return PolarityTrack(polarity, t, x, rho=0.0, phi=float(phi_bin), phi_bin=phi_bin, fit=LineFit.fit(t, x))


@pytest.fixture
def cfg() -> TrackerConfig:
    return TrackerConfig()


@pytest.fixture
def pole_detections():
    # 폭 10px인 폴: 오른쪽(양) 가장자리 x+5, 왼쪽(음) 가장자리 x−5, 1 px / 10 ms 로 왼쪽 이동
    return merged(edge(1, 205, -1), edge(0, 195, -1))


# --------------------------------------------------------------------------
# LineFit
# --------------------------------------------------------------------------
def test_line_fit_exact_and_degenerate():
    fit = LineFit.fit([0, 10, 20], [5.0, 4.0, 3.0])
    assert fit.slope == pytest.approx(-0.1)
    assert float(fit.x_at(30)) == pytest.approx(2.0)
    flat = LineFit.fit([7, 7], [1.0, 3.0])
    assert flat.slope == 0.0
    assert float(flat.x_at(100)) == pytest.approx(2.0)


# --------------------------------------------------------------------------
# 추적기
# --------------------------------------------------------------------------
def test_constant_velocity_edges_become_tracks(cfg, pole_detections):
    tracker = SpatioTemporalTracker(cfg)
    for d in pole_detections:
        tracker.ingest_detection(d)
    tracks = tracker.flush()

    assert sorted(tr.polarity for tr in tracks) == [0, 1]
    for tr in tracks:
        assert len(tr) == 101
        assert tr.t_first == 0 and tr.t_last == 1_000_000
        assert tr.fit.slope == pytest.approx(-1.0 / STEP_US)
        # τ = 1.6·(x0 − x) → tan φ = 1/1.6
        assert tr.phi == pytest.approx(math.degrees(math.atan(1 / 1.6)), abs=1.0)
    assert not tracker.accumulator(0).any() and not tracker.accumulator(1).any()


def test_tracks_pair_into_midline(cfg, pole_detections):
    tracker = SpatioTemporalTracker(cfg)
    for d in pole_detections:
        tracker.ingest_detection(d)
    polarity_tracks = tracker.flush()
    tracks = pair_tracks([tr for tr in polarity_tracks if tr.polarity == 1],
                         [tr for tr in polarity_tracks if tr.polarity == 0], cfg, start_id=7)
    assert len(tracks) == 1
    track = tracks[0]
    assert track.track_id == 7
    assert len(track) == 101
    expected = 200.0 - np.arange(101)
    assert np.allclose(track.x, expected, atol=1e-6)
    assert track.t_mid == 500_000


def test_finalize_gap_holds_back_ongoing_tracks(cfg, pole_detections):
    tracker = SpatioTemporalTracker(cfg)
    for d in pole_detections:
        tracker.ingest_detection(d)
    before = [tracker.accumulator(p).copy() for p in (0, 1)]

    assert tracker.extract_tracks(1_000_000) == []
    for p in (0, 1):
        assert np.array_equal(tracker.accumulator(p), before[p])
        assert np.array_equal(tracker.accumulator(p), recount_accumulator(tracker, p))

    # 마지막 검출 이후 finalize_gap이 지나면 확정
    later = tracker.extract_tracks(1_000_000 + cfg.finalize_gap)
    assert len(later) == 2
    assert len(tracker.live_points(0)[0]) == 0


def test_poll_respects_extract_interval(cfg, pole_detections):
    tracker = SpatioTemporalTracker(cfg)
    tracker.ingest_detection(pole_detections[0])
    assert tracker.poll(cfg.extract_interval - 1) == []
    assert tracker.last_extract == 0
    tracker.poll(cfg.extract_interval)
    assert tracker.last_extract == cfg.extract_interval


def test_short_lines_are_dropped(cfg):
    tracker = SpatioTemporalTracker(cfg)
    # 10 ms × 16 = 150 ms < min_track_span
    for d in edge(1, 150, -1, n=16):
        tracker.ingest_detection(d)
    assert tracker.flush() == []
    assert len(tracker.live_points(1)[0]) == 0


def test_detection_time_regression(cfg):
    tracker = SpatioTemporalTracker(cfg)
    tracker.ingest_detection(Detection(100, 50, 0.0, 1, 20))
    with pytest.raises(OrderError):
        tracker.ingest_detection(Detection(99, 50, 0.0, 0, 20))


def test_rebase_keeps_accumulator_consistent(cfg):
    tracker = SpatioTemporalTracker(cfg)
    rng = np.random.default_rng(5)
    t = 0
    for _ in range(400):
        t += int(rng.integers(5_000, 20_000))
        tracker.ingest_detection(Detection(t, int(rng.integers(0, 240)), 0.0, int(rng.integers(0, 2)), 20))
    assert t > 2 * cfg.window_duration
    assert tracker.n_rebases >= 1
    for p in (0, 1):
        assert np.array_equal(tracker.accumulator(p), recount_accumulator(tracker, p))
        live_t, _ = tracker.live_points(p)
        assert live_t.size == 0 or live_t.min() >= t - cfg.window_duration


def test_expired_points_leave_no_votes(cfg):
    tracker = SpatioTemporalTracker(cfg)
    tracker.ingest_detection(Detection(0, 100, 0.0, 1, 20))
    tracker.ingest_detection(Detection(cfg.window_duration + 1, 100, 0.0, 0, 20))
    assert len(tracker.live_points(1)[0]) == 0
    assert not tracker.accumulator(1).any()


def test_reverse_travel_direction():
    cfg = TrackerConfig(travel_direction="reverse")
    tracker = SpatioTemporalTracker(cfg)
    for d in merged(edge(1, 45, 1), edge(0, 35, 1)):
        tracker.ingest_detection(d)
    tracks = tracker.flush()
    assert sorted(tr.polarity for tr in tracks) == [0, 1]
    assert all(tr.phi < 0 for tr in tracks)
    assert all(tr.fit.slope > 0 for tr in tracks)


# --------------------------------------------------------------------------
# 짧은 직선 (20점, 0.3초)
# --------------------------------------------------------------------------
SHORT_STEP_US = 15_800


def short_edge(polarity: int, x0: float):
    return edge(polarity, x0, -1, n=20, step_us=SHORT_STEP_US)


def run_tracker(cfg: TrackerConfig, detections):
    tracker = SpatioTemporalTracker(cfg)
    for d in detections:
        ingest_detection(tracker, d)
    return tracker.flush()


def partition(tracks):
    return [(tr.polarity, tr.t.tolist(), tr.x.tolist()) for tr in tracks]


def test_single_detection_votes_once_per_phi(cfg):
    tracker = SpatioTemporalTracker(cfg)
    ingest_detection(tracker, Detection(0, 100, 0.0, 1, 20))
    per_phi = tracker.accumulator(1).sum(axis=1)
    assert set(per_phi.tolist()) <= {0, 1}
    assert per_phi.sum() == int((tracker.rho_bins_for(100.0, 0) >= 0).sum()) == cfg.n_phi
    assert not tracker.accumulator(0).any()
    assert tracker.window_points(1) == [SpatioTemporalPoint(xpos=100.0, t=0, polarity=1)]


def test_collinear_points_form_one_track(cfg):
    detections = short_edge(1, 150)
    t_last = detections[-1].t
    assert t_last == 300_200

    immediate = SpatioTemporalTracker(TrackerConfig(finalize_gap=0))
    held = SpatioTemporalTracker(cfg)
    for d in detections:
        ingest_detection(immediate, d)
        ingest_detection(held, d)

    tracks = extract_tracks(immediate, t_last)
    assert len(tracks) == 1
    assert tracks[0].t.tolist() == [d.t for d in detections]
    assert tracks[0].x.tolist() == [float(d.r) for d in detections]
    assert immediate.window_points(1) == []

    # 기본 finalize_gap에서는 마지막 점 직후 추출하면 보류되고, flush()에서 확정
    assert extract_tracks(held, t_last) == []
    assert partition(held.flush()) == partition(tracks)


def test_parallel_lines_do_not_share_samples(cfg):
    gap = int(2 * cfg.assoc_tolerance + 2)
    tracks = run_tracker(cfg, merged(short_edge(1, 150), short_edge(1, 150 + gap)))
    assert len(tracks) == 2
    near, far = tracks
    assert near.x.tolist() == [150.0 - k for k in range(20)]
    assert far.x.tolist() == [150.0 + gap - k for k in range(20)]
    assert not set(zip(near.t.tolist(), near.x.tolist())) & set(zip(far.t.tolist(), far.x.tolist()))


def test_arrival_order_within_timestamp_does_not_change_tracks(cfg):
    lines = [short_edge(1, 150), short_edge(1, 200), short_edge(0, 100)]
    baseline = run_tracker(cfg, [line[k] for k in range(20) for line in lines])
    assert len(baseline) == 3

    # 시각이 역행하면 OrderError이므로, 같은 시각의 검출끼리만 순서를 섞음
    rng = np.random.default_rng(7)
    for _ in range(3):
        shuffled = []
        for k in range(20):
            same_time = [line[k] for line in lines]
            shuffled.extend(same_time[i] for i in rng.permutation(len(lines)))
        assert partition(run_tracker(cfg, shuffled)) == partition(baseline)


# --------------------------------------------------------------------------
# 짝짓기
# --------------------------------------------------------------------------
T = np.arange(0, 1_000_001, 50_000)


def test_pairing_accepts_close_parallel_tracks(cfg):
    pos = ptrack(1, T, 150 - T * 1e-4, phi_bin=30)
    neg = ptrack(0, T, 140 - T * 1e-4, phi_bin=32)
    assert match_tracks([pos], [neg], cfg) == [(pos, neg)]


@pytest.mark.parametrize("neg_offset, neg_phi, neg_t", [
    (-25.0, 30, T),                    # 평균 |Δx| > 20
    (-10.0, 33, T),                    # |Δphi bin| > 2
    (-10.0, 30, T + 2_000_000),        # 시간 구간이 겹치지 않음
])
def test_pairing_rejections(cfg, neg_offset, neg_phi, neg_t):
    pos = ptrack(1, T, 150 - T * 1e-4)
    neg = ptrack(0, neg_t, 150 + neg_offset - (neg_t - neg_t[0]) * 1e-4, phi_bin=neg_phi)
    assert match_tracks([pos], [neg], cfg) == []
    assert pair_tracks([pos], [neg], cfg) == []


def test_pairing_picks_nearest_negative(cfg):
    pos = ptrack(1, T, 150 - T * 1e-4)
    far = ptrack(0, T, 135 - T * 1e-4)
    near = ptrack(0, T, 145 - T * 1e-4)
    assert match_tracks([pos], [far, near], cfg) == [(pos, near)]


def test_merge_pair_drops_samples_outside_frame(cfg):
    pos = ptrack(1, T, 260 - T * 1e-4)
    neg = ptrack(0, T, 250 - T * 1e-4)
    track = merge_pair(pos, neg, 0, cfg.frame_width)
    # 중점 255 − 100·t[s] 가 240 미만인 샘플만 남음
    assert np.all(track.x < cfg.frame_width)
    assert track.t_first > 0
    assert track.sources == (pos, neg)


def test_merge_pair_with_too_few_samples(cfg):
    pos = ptrack(1, T, 300 - T * 1e-5)
    neg = ptrack(0, T, 290 - T * 1e-5)
    assert merge_pair(pos, neg, 0, cfg.frame_width) is None


def test_track_pairer_streams_and_expires(cfg):
    pairer = TrackPairer(cfg)
    pos = ptrack(1, T, 150 - T * 1e-4)
    pairer.push([pos])
    assert pairer.poll(T[-1]) == []
    assert pairer.pending_pos == [pos]

    pairer.push([ptrack(0, T, 140 - T * 1e-4)])
    out = pairer.poll(T[-1])
    assert [tr.track_id for tr in out] == [0]
    assert pairer.next_id == 1

    lonely = ptrack(0, T, 60 - T * 1e-4)
    pairer.push([lonely])
    pairer.poll(int(T[-1]) + cfg.window_duration + 1)
    assert pairer.pending_neg == []
    assert pairer.discarded == 1

    pairer.push([ptrack(1, T, 80 - T * 1e-4)])
    assert pairer.flush() == []
    assert pairer.discarded == 2
