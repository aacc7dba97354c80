# ===================================================================================
#   sim/simulator.py: 엣지 교차 기반 이벤트 카메라 시뮬레이터
# ===================================================================================
#
#   - 차량(= 카메라, 항등 extrinsic)은 월드 원점에서 출발해 +x 방향으로 주행합니다.
#     카메라는 +y 방향을 바라보며, 폴의 깊이는 폴의 y 좌표입니다.
#   - 매 sim_step마다 폴의 두 수직 엣지 (x ± width/2)를 핀홀로 투영합니다.
#         u(t) = u0 + αx · (x_edge − x_cam(t)) / depth
#   - 엣지의 픽셀 열 floor(u + 0.5)가 바뀌면, 새로 들어간 열마다 [v_top, v_bot]의 각 행에
#     이벤트 하나를 만듭니다. 시각은 열 경계를 지나는 순간을 스텝 안에서 선형 보간합니다.
#   - 극성: 배경→폴(밝음→어두움) = 음, 폴→배경 = 양.
#     u가 감소하는 동안 왼쪽 엣지는 앞쪽(음), 오른쪽 엣지는 뒤쪽(양) 엣지입니다.
#   - 노이즈: 시드 고정 난수로 포아송 개수, 균일한 시각/픽셀/극성.
#   - 정렬 키: (t, 엣지 id, 행, 열). 노이즈의 엣지 id는 모든 폴 엣지 뒤입니다.
#
#
from typing import List, Tuple

import numpy as np
from loguru import logger

from app.errors import ConfigError
from app.events.models import CameraIntrinsics, EventStream, PoseLog
from app.events.undistort import invert_normalized
from app.mapping.models import GroundTruthPole
from app.sim.models import Scene, SensorConfig, VelocityProfile
from app.sim.profile import US_PER_S, profile_positions
from app.utils.math import round_half_up
from app.utils.typing import Polarity

_EMPTY = np.zeros(0, dtype=np.int64)


def edge_crossings(u: np.ndarray, ts: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    샘플링된 투영 열 u(ts)에서 정수 열 경계 교차를 찾습니다.

    :return: (교차 시각 µs, 새로 들어간 열, 진행 방향 부호 ±1)
    """
    col = round_half_up(u)
    change = np.flatnonzero(col[1:] != col[:-1])
    if not change.size:
        return _EMPTY, _EMPTY, _EMPTY
    c_a = col[change]
    step = col[change + 1] - c_a
    n = np.abs(step)
    sign = np.sign(step)

    owner = np.repeat(np.arange(change.size), n)
    k = np.arange(int(n.sum())) - np.repeat(np.cumsum(n) - n, n) + 1
    cols = c_a[owner] + sign[owner] * k
    boundary = cols - sign[owner] * 0.5

    i = change[owner]
    u_a, u_b = u[i], u[i + 1]
    frac = (boundary - u_a) / (u_b - u_a)
    t = ts[i] + frac * (ts[i + 1] - ts[i])
    return round_half_up(t), cols, sign[owner]


def _distort_pixels(x: np.ndarray, y: np.ndarray, intr: CameraIntrinsics):
    """이상 픽셀 → 원시(왜곡된) 픽셀. 보정 LUT(forward)의 역변환입니다."""
    xn = (x - intr.u0) / intr.alpha_x
    yn = (y - intr.v0) / intr.alpha_y
    xr, yr = invert_normalized(xn, yn, intr.dist)
    xs = round_half_up(intr.alpha_x * xr + intr.u0)
    ys = round_half_up(intr.alpha_y * yr + intr.v0)
    keep = (xs >= 0) & (xs < intr.width) & (ys >= 0) & (ys < intr.height)
    return xs, ys, keep


def _check_scene(scene: Scene, intr: CameraIntrinsics):
    if scene.v_bot >= intr.height:
        raise ConfigError(f"v_bot={scene.v_bot} must be < sensor height {intr.height}")
    for i, pole in enumerate(scene.poles):
        if pole.y <= 0.0:
            raise ConfigError(f"Pole {i} at y={pole.y} m lies on or behind the camera plane")


def simulate(
    scene: Scene, profile: VelocityProfile, sensor: SensorConfig
) -> Tuple[EventStream, PoseLog, List[GroundTruthPole]]:
    """씬을 주행하며 (이벤트 스트림, 포즈 로그, GT 맵)을 생성합니다. 같은 입력이면 같은 결과."""
    intr = sensor.intrinsics
    _check_scene(scene, intr)
    t0, t_end = profile.t_start, profile.t_end

    grid = np.arange(t0, t_end + 1, sensor.sim_step, dtype=np.int64)
    if grid[-1] != t_end:
        grid = np.append(grid, t_end)
    x_cam, _ = profile_positions(profile, grid)

    rows = np.arange(scene.v_top, scene.v_bot + 1, dtype=np.int64)
    chunks = []
    for k, pole in enumerate(scene.poles):
        for side, offset in enumerate((-0.5 * pole.width, 0.5 * pole.width)):
            u = intr.u0 + intr.alpha_x * (pole.x + offset - x_cam) / pole.y
            t, cols, sign = edge_crossings(u, grid)
            inside = (cols >= 0) & (cols < intr.width)
            t, cols, sign = t[inside], cols[inside], sign[inside]
            decreasing = sign < 0
            if side == 0:
                p = np.where(decreasing, Polarity.NEGATIVE, Polarity.POSITIVE)
            else:
                p = np.where(decreasing, Polarity.POSITIVE, Polarity.NEGATIVE)
            chunks.append((
                np.repeat(t, rows.size),
                np.repeat(cols, rows.size),
                np.tile(rows, t.size),
                np.repeat(p, rows.size).astype(np.int64),
                np.full(t.size * rows.size, 2 * k + side, dtype=np.int64),
            ))

    if chunks:
        t, x, y, p, edge = (np.concatenate(c) for c in zip(*chunks))
    else:
        t = x = y = p = edge = _EMPTY
    if sensor.distort and intr.has_distortion and t.size:
        x, y, keep = _distort_pixels(x, y, intr)
        t, x, y, p, edge = t[keep], x[keep], y[keep], p[keep], edge[keep]
    n_signal = int(t.size)

    rng = np.random.default_rng(sensor.seed)
    n_noise = int(rng.poisson(sensor.noise_rate * (t_end - t0) / US_PER_S)) if sensor.noise_rate > 0 else 0
    if n_noise:
        t = np.concatenate([t, rng.integers(t0, t_end + 1, n_noise)])
        x = np.concatenate([x, rng.integers(0, intr.width, n_noise)])
        y = np.concatenate([y, rng.integers(0, intr.height, n_noise)])
        p = np.concatenate([p, rng.integers(0, 2, n_noise)])
        edge = np.concatenate([edge, np.full(n_noise, 2 * len(scene.poles), dtype=np.int64)])

    order = np.lexsort((x, y, edge, t))
    events = EventStream(t[order], x[order], y[order], p[order])

    pose_t = np.arange(t0, t_end + 1, sensor.pose_interval, dtype=np.int64)
    if pose_t[-1] != t_end:
        pose_t = np.append(pose_t, t_end)
    pose_x, _ = profile_positions(profile, pose_t)
    zeros = np.zeros(pose_t.size)
    poses = PoseLog(pose_t, pose_x, zeros, zeros)

    ground_truth = [GroundTruthPole(id=i, x=pole.x, y=pole.y) for i, pole in enumerate(scene.poles)]
    logger.info(
        f"Simulated {len(scene.poles)} poles over {(t_end - t0) / US_PER_S:.2f} s: "
        f"{n_signal} signal + {n_noise} noise events, {len(poses)} poses."
    )
    return events, poses, ground_truth
