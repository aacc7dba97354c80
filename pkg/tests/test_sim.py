# ===================================================================================
#   tests/test_sim.py: 합성 씬 시뮬레이터 테스트
# ===================================================================================
#
#   - 속도 프로파일 적분 (해석해와 비교)
#   - 폴 하나가 화면 전체를 지나는 경우의 이벤트 수, 극성 균형, 교차 시각
#   - 결정성(같은 시드 → 같은 바이트), 노이즈, 왜곡 역변환
#   - 씬 파일 파싱과 에러
#
#
import numpy as np
import pytest

from app.errors import ConfigError, OutOfRange
from app.events.io import write_events
from app.events.models import CameraIntrinsics
from app.events.undistort import build_undistortion_lut, undistort_stream
from app.sim.models import Pole, Scene, SensorConfig, VelocityProfile
from app.sim.profile import profile_eval, profile_positions
from app.sim.scene_io import load_scene, scene_from_mapping
from app.sim.simulator import edge_crossings, simulate


@pytest.fixture
def one_pole() -> Scene:
    return Scene(poles=(Pole(x=5.0, y=8.0, width=0.3),))


@pytest.fixture
def one_second() -> VelocityProfile:
    return VelocityProfile.constant(10.0, 1_000_000)


# --------------------------------------------------------------------------
# 속도 프로파일
# --------------------------------------------------------------------------
def test_piecewise_linear_profile():
    profile = VelocityProfile(knots=((0, 0.0), (1_000_000, 10.0), (3_000_000, 4.0)))
    assert profile_eval(profile, 0) == (0.0, 0.0)
    assert profile_eval(profile, 1_000_000) == pytest.approx((5.0, 10.0))
    assert profile_eval(profile, 2_000_000) == pytest.approx((13.5, 7.0))
    assert profile_eval(profile, 3_000_000) == pytest.approx((19.0, 4.0))


def test_profile_positions_are_monotone():
    profile = VelocityProfile(knots=((0, 3.0), (500_000, 0.0), (800_000, 0.0), (2_000_000, 12.0)))
    pos, speed = profile_positions(profile, np.arange(0, 2_000_001, 1000))
    assert np.all(np.diff(pos) >= 0)
    assert speed.min() >= 0


def test_profile_out_of_range():
    profile = VelocityProfile.constant(10.0, 1_000_000, t0=100)
    with pytest.raises(OutOfRange):
        profile_eval(profile, 99)
    with pytest.raises(OutOfRange):
        profile_positions(profile, [100, 1_000_101])


@pytest.mark.parametrize("knots", [((0, 1.0),), ((0, 1.0), (0, 2.0)), ((0, 1.0), (10, -1.0))])
def test_invalid_profiles(knots):
    with pytest.raises(ValueError):
        VelocityProfile(knots=knots)


# --------------------------------------------------------------------------
# 엣지 교차
# --------------------------------------------------------------------------
def test_edge_crossings_interpolate_boundary_time():
    ts = np.array([0, 100, 200])
    u = np.array([10.2, 12.2, 12.4])
    t, cols, sign = edge_crossings(u, ts)
    assert cols.tolist() == [11, 12]
    assert sign.tolist() == [1, 1]
    # 경계 10.5 → t = 15, 11.5 → t = 65
    assert t.tolist() == [15, 65]


def test_edge_crossings_without_change():
    t, cols, sign = edge_crossings(np.array([3.1, 3.2, 3.3]), np.array([0, 1, 2]))
    assert t.size == cols.size == sign.size == 0


# --------------------------------------------------------------------------
# 시뮬레이션
# --------------------------------------------------------------------------
def test_single_pole_sweeps_whole_frame(davis240, one_pole, one_second):
    events, poses, gt = simulate(one_pole, one_second, SensorConfig(intrinsics=davis240))
    rows = one_pole.rows
    assert rows == 160
    assert len(events) == 2 * davis240.width * rows
    assert int((events.p == 0).sum()) == int((events.p == 1).sum()) == davis240.width * rows
    assert events.y.min() == one_pole.v_top and events.y.max() == one_pole.v_bot
    assert gt[0].x == 5.0 and gt[0].y == 8.0 and gt[0].id == 0
    assert len(poses) == 101
    assert np.allclose(poses.x, poses.t * 1e-5)
    assert not poses.y.any() and not poses.theta.any()


def test_crossing_times_match_closed_form(davis240, one_pole, one_second):
    events, _, _ = simulate(one_pole, one_second, SensorConfig(intrinsics=davis240))
    pole = one_pole.poles[0]
    # u가 감소: 왼쪽(음) 엣지는 x − w/2, 오른쪽(양) 엣지는 x + w/2, 경계는 열 + 0.5
    edge_x = np.where(events.p == 0, pole.x - pole.width / 2, pole.x + pole.width / 2)
    x_cam = 10.0 * events.t / 1e6
    u = davis240.u0 + davis240.alpha_x * (edge_x - x_cam) / pole.y
    assert np.abs(u - (events.x + 0.5)).max() <= 1e-3


def test_events_are_sorted_and_in_bounds(davis240, one_pole, one_second):
    events, _, _ = simulate(one_pole, one_second, SensorConfig(intrinsics=davis240, noise_rate=2000.0, seed=3))
    assert np.all(np.diff(events.t) >= 0)
    events.check_bounds(davis240.width, davis240.height)


def test_zero_poles_gives_empty_stream(davis240, one_second):
    events, poses, gt = simulate(Scene(), one_second, SensorConfig(intrinsics=davis240))
    assert len(events) == 0
    assert gt == []
    assert poses.span == (0, 1_000_000)


def test_pose_log_ends_at_profile_end(davis240, one_pole):
    profile = VelocityProfile.constant(10.0, 1_005_000)
    _, poses, _ = simulate(one_pole, profile, SensorConfig(intrinsics=davis240))
    assert poses.t[-2:].tolist() == [1_000_000, 1_005_000]


def test_noise_is_poisson_and_seeded(davis240, one_pole, one_second):
    clean, _, _ = simulate(one_pole, one_second, SensorConfig(intrinsics=davis240))
    noisy, _, _ = simulate(one_pole, one_second, SensorConfig(intrinsics=davis240, noise_rate=1000.0, seed=1))
    extra = len(noisy) - len(clean)
    assert 800 < extra < 1200


def test_same_seed_gives_identical_bytes(tmp_path, davis240, one_pole, one_second):
    sensor = SensorConfig(intrinsics=davis240, noise_rate=500.0, seed=11)
    a = write_events(simulate(one_pole, one_second, sensor)[0], tmp_path / "a.bin", "binary")
    b = write_events(simulate(one_pole, one_second, sensor)[0], tmp_path / "b.bin", "binary")
    c = write_events(simulate(one_pole, one_second, sensor.model_copy(update={"seed": 12}))[0],
                     tmp_path / "c.bin", "binary")
    assert a.read_bytes() == b.read_bytes()
    assert a.read_bytes() != c.read_bytes()


def test_scene_must_fit_sensor(davis240, one_second):
    with pytest.raises(ConfigError, match="v_bot"):
        simulate(Scene(v_top=10, v_bot=180), one_second, SensorConfig(intrinsics=davis240))
    with pytest.raises(ConfigError, match="behind"):
        simulate(Scene(poles=(Pole(x=1.0, y=-2.0, width=0.3),)), one_second, SensorConfig(intrinsics=davis240))


def test_distorted_events_undistort_back(one_pole, one_second):
    intr = CameraIntrinsics(width=240, height=180, alpha_x=225.7, alpha_y=225.7, u0=120.0, v0=90.0, k1=0.05)
    ideal, _, _ = simulate(one_pole, one_second, SensorConfig(intrinsics=intr))
    raw, _, _ = simulate(one_pole, one_second, SensorConfig(intrinsics=intr, distort=True))
    assert len(raw) <= len(ideal)
    assert raw != ideal
    raw.check_bounds(intr.width, intr.height)

    restored = undistort_stream(raw, build_undistortion_lut(intr))
    near_rows = (restored.y >= one_pole.v_top - 1) & (restored.y <= one_pole.v_bot + 1)
    assert near_rows.mean() > 0.99


def test_distort_flag_without_coefficients_is_identity(davis240, one_pole, one_second):
    ideal, _, _ = simulate(one_pole, one_second, SensorConfig(intrinsics=davis240))
    flagged, _, _ = simulate(one_pole, one_second, SensorConfig(intrinsics=davis240, distort=True))
    assert flagged == ideal


# --------------------------------------------------------------------------
# 씬 파일
# --------------------------------------------------------------------------
def test_demo_scene(demo_setup, demo_sim):
    assert len(demo_setup.scene.poles) == 10
    assert demo_setup.sensor.intrinsics.width == 240
    events, poses, gt = demo_sim
    assert len(gt) == 10
    assert poses.span == (0, 17_500_000)
    assert len(events) > 0


def test_load_scene_file(tmp_path):
    path = tmp_path / "scene.txt"
    path.write_text(
        "# two poles, accelerating\n"
        "pole=5,8,0.3\npole=20,10,0.25\n"
        "knot=0,0\nknot=1000000,8\nknot=3000000,8\n"
        "sensor=davis346\nalpha_x=300\nnoise_rate=50\nseed=4\nv_bot=200\n"
    )
    setup = load_scene(path)
    assert [p.x for p in setup.scene.poles] == [5.0, 20.0]
    assert setup.profile.knots == ((0, 0.0), (1_000_000, 8.0), (3_000_000, 8.0))
    assert setup.sensor.intrinsics.width == 346
    assert setup.sensor.intrinsics.alpha_x == setup.sensor.intrinsics.alpha_y == 300.0
    assert setup.sensor.noise_rate == 50.0 and setup.sensor.seed == 4
    assert setup.scene.v_bot == 200


@pytest.mark.parametrize("values, match", [
    ({"pole": ["1,2,0.3"], "speed": "10"}, "velocity profile missing"),
    ({"pole": ["1,2,0.3"], "knot": ["0,1", "10,1"], "speed": "10", "duration_us": "10"}, "not both"),
    ({"pole": ["1,2"], "speed": "10", "duration_us": "10"}, "expects 3"),
    ({"pole": ["1,x,0.3"], "speed": "10", "duration_us": "10"}, "non-numeric"),
    ({"pole": ["1,2,-0.3"], "speed": "10", "duration_us": "10"}, "invalid scene"),
    ({"speed": "10", "duration_us": "10", "colour": "red"}, "unknown scene keys"),
    ({"speed": "10", "duration_us": "10", "sensor": "nope"}, "Unknown sensor preset"),
    ({"speed": "10", "duration_us": "10", "alpha_x": "-5"}, "invalid calibration"),
])
def test_scene_errors(values, match):
    with pytest.raises(ConfigError, match=match):
        scene_from_mapping(values)


def test_missing_scene_file(tmp_path):
    with pytest.raises(ConfigError, match="not found"):
        load_scene(tmp_path / "none.txt")
