# ===================================================================================
#   tests/test_pipeline.py: 전체 파이프라인 테스트
# ===================================================================================
#
#   - 데모 씬: 10개 폴 → 10개 랜드마크, RMSE ≤ 0.2 m.
#   - 작은 씬(폴 2개)으로 순차/파이프라인(asyncio) 실행 결과 일치, 결정성, 서브샘플링,
#     트랙 단위 기하 실패 집계, 산출물 CSV 재로딩을 확인합니다.
#   - 20개 폴 씬 (노이즈 0 / 5%)의 신뢰도·정확도 검사는 `slow` 마커.
#
#
from unittest.mock import patch

import numpy as np
import pytest

from app.config import PipelineConfig, TrackerConfig
from app.errors import BehindCamera, BoundsError, ConfigError, ParseError
from app.events.models import CameraIntrinsics, EventStream
from app.hough.models import Detection
from app.mapping.evaluation import match_and_rmse
from app.mapping.landmark_map import write_map
from app.pipeline.outputs import load_detections, load_tracks, write_detections, write_tracks
from app.pipeline.runner import run_pipeline, run_pipeline_async, subsample_events
from app.sim.models import Pole, Scene, SensorConfig, VelocityProfile
from app.sim.simulator import simulate
from app.tracking.models import Track


@pytest.fixture(scope="module")
def small(davis240):
    """폴 2개, 10 m/s로 3초 주행: (events, poses, gt, intrinsics)"""
    scene = Scene(poles=(Pole(x=8.0, y=6.0, width=0.3), Pole(x=20.0, y=9.0, width=0.25)))
    events, poses, gt = simulate(scene, VelocityProfile.constant(10.0, 3_000_000), SensorConfig(intrinsics=davis240))
    return events, poses, gt, davis240


@pytest.fixture(scope="module")
def small_result(small):
    events, poses, _, intr = small
    return run_pipeline(events, poses, intr)


def assert_same_result(a, b):
    assert a.detections == b.detections
    assert [tr.track_id for tr in a.tracks] == [tr.track_id for tr in b.tracks]
    for ta, tb in zip(a.tracks, b.tracks):
        assert np.array_equal(ta.t, tb.t) and np.array_equal(ta.x, tb.x)
    assert a.landmarks == b.landmarks
    assert a.landmark_map.landmarks == b.landmark_map.landmarks
    assert a.rejected == b.rejected


# --------------------------------------------------------------------------
# 데모 씬
# --------------------------------------------------------------------------
@pytest.mark.slow
def test_demo_scene_maps_every_pole(demo_result, demo_sim):
    _, poses, gt = demo_sim
    assert len(demo_result.landmark_map) == 10
    report = match_and_rmse(demo_result.landmark_map, gt, 4.0, poses)
    assert report.true_positives == 10
    assert report.false_positives == 0
    assert report.rmse <= 0.2


# --------------------------------------------------------------------------
# 작은 씬
# --------------------------------------------------------------------------
def test_small_scene(small, small_result):
    events, poses, gt, _ = small
    result = small_result
    assert result.events_in == result.events_used == len(events)
    assert {d.polarity for d in result.detections} == {0, 1}
    assert len(result.polarity_tracks) >= 4
    assert len(result.landmarks) + sum(result.rejected.values()) == len(result.tracks)

    report = match_and_rmse(result.landmark_map, gt, 4.0, poses)
    assert report.true_positives == 2
    assert report.false_positives == 0
    assert report.rmse <= 0.2


def test_detections_are_time_ordered(small_result):
    ts = [d.t for d in small_result.detections]
    assert ts == sorted(ts)
    assert all(d.votes >= PipelineConfig().hough.threshold for d in small_result.detections)


async def test_pipelined_run_matches_sequential(small, small_result):
    events, poses, _, intr = small
    result = await run_pipeline_async(events, poses, intr, chunk_size=1000, queue_size=4, workers=2)
    assert_same_result(result, small_result)


def test_reruns_write_identical_files(tmp_path, small, small_result):
    events, poses, _, intr = small
    again = run_pipeline(events, poses, intr)
    for result, out in ((small_result, tmp_path / "a"), (again, tmp_path / "b")):
        write_detections(result.detections, out / "detections.csv")
        write_tracks(result.tracks, out / "tracks.csv")
        write_map(result.landmark_map, out / "map.csv")
    for name in ("detections.csv", "tracks.csv", "map.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_subsample_zero_is_identity(small, small_result):
    events, poses, _, intr = small
    assert subsample_events(events, 0.0) is events
    assert_same_result(run_pipeline(events, poses, intr, subsample=0.0, seed=99), small_result)


def test_subsample_one_drops_everything(small):
    events, poses, _, intr = small
    result = run_pipeline(events, poses, intr, subsample=1.0)
    assert result.events_in == len(events)
    assert result.events_used == 0
    assert result.detections == []
    assert len(result.landmark_map) == 0


def test_partial_subsample_is_seeded(small):
    events = small[0]
    a = subsample_events(events, 0.3, seed=5)
    assert a == subsample_events(events, 0.3, seed=5)
    assert 0.65 < len(a) / len(events) < 0.75
    assert np.all(np.diff(a.t) >= 0)


@pytest.mark.parametrize("p", [-0.1, 1.5])
def test_invalid_subsample_probability(small, p):
    with pytest.raises(ConfigError):
        subsample_events(small[0], p)


def test_empty_stream_gives_empty_map(small):
    _, poses, _, intr = small
    result = run_pipeline(EventStream.empty(), poses, intr)
    assert result.events_in == 0
    assert result.tracks == [] and len(result.landmark_map) == 0
    assert result.rejected == {}


def test_out_of_bounds_event_is_fatal(small):
    _, poses, _, intr = small
    with pytest.raises(BoundsError):
        run_pipeline(EventStream([0, 1], [10, 240], [10, 10], [1, 1]), poses, intr)


def test_geometry_failures_are_counted(small, small_result):
    events, poses, _, intr = small
    with patch("app.pipeline.runner.triangulate", side_effect=BehindCamera("mocked")) as mocked:
        result = run_pipeline(events, poses, intr)
    assert mocked.call_count == len(result.tracks) > 0
    assert result.landmarks == []
    assert result.rejected == {"BehindCamera": len(result.tracks)}
    assert len(result.landmark_map) == 0


def test_stricter_tracker_finds_fewer_tracks(small, small_result):
    events, poses, _, intr = small
    cfg = PipelineConfig(tracker=TrackerConfig(min_track_span=1_400_000))
    result = run_pipeline(events, poses, intr, cfg)
    assert result.detections == small_result.detections
    assert result.tracks == []


def test_distorted_stream_is_undistorted(davis240):
    intr = CameraIntrinsics(**{**davis240.model_dump(), "k1": 0.02})
    scene = Scene(poles=(Pole(x=8.0, y=6.0, width=0.3),))
    events, poses, gt = simulate(scene, VelocityProfile.constant(10.0, 2_000_000),
                                 SensorConfig(intrinsics=intr, distort=True))
    result = run_pipeline(events, poses, intr)
    report = match_and_rmse(result.landmark_map, gt, 1.0, poses)
    assert report.true_positives == 1
    assert report.false_positives == 0


# --------------------------------------------------------------------------
# 산출물 CSV
# --------------------------------------------------------------------------
def test_detection_and_track_files_reload(tmp_path, small_result):
    det_path = write_detections(small_result.detections, tmp_path / "detections.csv")
    assert det_path.read_text().splitlines()[0] == "t_us,r_px,theta_deg,polarity,votes"
    assert load_detections(det_path) == small_result.detections

    tracks_path = write_tracks(small_result.tracks, tmp_path / "tracks.csv")
    loaded = load_tracks(tracks_path)
    assert [tr.track_id for tr in loaded] == [tr.track_id for tr in small_result.tracks]
    for a, b in zip(loaded, small_result.tracks):
        assert np.array_equal(a.t, b.t)
        assert np.allclose(a.x, b.x, atol=1e-6)


def test_empty_outputs_reload(tmp_path):
    path = write_tracks([], tmp_path / "tracks.csv")
    assert path.read_text() == "track_id,t_us,xpos_px\n"
    assert load_tracks(path) == []
    assert load_detections(write_detections([], tmp_path / "detections.csv")) == []


def test_track_file_groups_by_id(tmp_path):
    tracks = [Track(3, np.array([0, 10]), np.array([5.5, 4.5])), Track(1, np.array([20, 30, 40]), np.array([1.0, 2.0, 3.0]))]
    loaded = load_tracks(write_tracks(tracks, tmp_path / "tracks.csv"))
    assert [tr.track_id for tr in loaded] == [1, 3]
    assert loaded[1].x.tolist() == [5.5, 4.5]


def test_output_parse_errors(tmp_path):
    with pytest.raises(ParseError, match="not found"):
        load_detections(tmp_path / "none.csv")
    bad = tmp_path / "bad.csv"
    bad.write_text("t,r\n1,2\n")
    with pytest.raises(ParseError) as info:
        load_detections(bad)
    assert info.value.line == 1
    write_detections([Detection(1, 2, 0.0, 1, 20)], tmp_path / "ok.csv")
    with pytest.raises(ParseError):
        load_tracks(tmp_path / "ok.csv")


# --------------------------------------------------------------------------
# 20개 폴 씬
# --------------------------------------------------------------------------
def twenty_pole_scene() -> Scene:
    # 5–15 m 깊이, 16 m 간격
    return Scene(poles=tuple(Pole(x=15.0 + 16.0 * k, y=5.0 + (3 * k) % 11, width=0.3) for k in range(20)))


@pytest.fixture(scope="module")
def twenty_clean(davis240):
    profile = VelocityProfile.constant(10.0, 33_000_000)
    return simulate(twenty_pole_scene(), profile, SensorConfig(intrinsics=davis240)), profile


@pytest.mark.slow
@pytest.mark.parametrize("noise_fraction, max_rmse", [(0.0, 0.2), (0.05, 0.5)])
def test_twenty_pole_reliability(davis240, twenty_clean, noise_fraction, max_rmse):
    (events, poses, gt), profile = twenty_clean
    if noise_fraction:
        duration_s = (profile.t_end - profile.t_start) / 1e6
        sensor = SensorConfig(intrinsics=davis240, noise_rate=noise_fraction * len(events) / duration_s, seed=21)
        events, poses, gt = simulate(twenty_pole_scene(), profile, sensor)

    result = run_pipeline(events, poses, davis240)
    report = match_and_rmse(result.landmark_map, gt, 4.0, poses)
    assert report.true_positives >= 18
    assert report.false_positives <= 2
    assert report.rmse <= max_rmse
