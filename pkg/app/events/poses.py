# ===================================================================================
#   events/poses.py: SE(2) 포즈 보간 및 변환
# ===================================================================================
#
#   - 포즈 로그는 차량의 월드 좌표계 포즈를 담고 있습니다.
#   - 카메라 포즈 = 차량 포즈 ∘ 외부 파라미터(카메라→차량 SE(2) 오프셋).
#   - 외부 파라미터가 항등이면 카메라는 차량의 +y 방향을 바라보고,
#     이미지 u축은 주행 방향(+x)과 같습니다.
#
#   **좌표 규약 (world→camera 2×3 행렬):**
#   - 0행: 이미지 수평(lateral) 방향 [ cosθ,  sinθ, −(cosθ·cx + sinθ·cy)]
#   - 1행: 시선(depth) 방향           [−sinθ,  cosθ,   sinθ·cx − cosθ·cy ]
#   - 투영: (u − u0)/αx = (0행·X) / (1행·X)
#
#
import math

import numpy as np

from app.errors import OutOfRange
from app.events.models import PoseLog
from app.utils.math import angle_diff, wrap_angle
from app.utils.typing import Pose2


def _check_span(log: PoseLog, t_min: int, t_max: int):
    if not len(log):
        raise OutOfRange("Pose log is empty")
    if t_min < log.t[0] or t_max > log.t[-1]:
        raise OutOfRange(
            f"Query time [{t_min}, {t_max}] outside pose log span [{int(log.t[0])}, {int(log.t[-1])}]"
        )


def interpolate_pose(log: PoseLog, t: int) -> Pose2:
    """
    시각 t의 포즈를 선형 보간합니다. 샘플 시각에서는 로그 값을 그대로 반환합니다.
    heading은 최단 호 방향으로 보간합니다 (π 경계를 가로지를 수 있음).
    """
    _check_span(log, t, t)
    i = int(np.searchsorted(log.t, t, side="left"))
    if log.t[i] == t:
        return log[i]
    t0, t1 = int(log.t[i - 1]), int(log.t[i])
    a = (t - t0) / (t1 - t0)
    x = log.x[i - 1] + a * (log.x[i] - log.x[i - 1])
    y = log.y[i - 1] + a * (log.y[i] - log.y[i - 1])
    theta = wrap_angle(log.theta[i - 1] + a * angle_diff(log.theta[i], log.theta[i - 1]))
    return Pose2(int(t), float(x), float(y), float(theta))


def interpolate_poses(log: PoseLog, ts) -> PoseLog:
    """`interpolate_pose`의 벡터화 버전. 결과 값은 스칼라 버전과 동일합니다."""
    ts = np.asarray(ts, dtype=np.int64)
    if not ts.size:
        return PoseLog([], [], [], [])
    _check_span(log, int(ts.min()), int(ts.max()))
    i = np.searchsorted(log.t, ts, side="left")
    exact = log.t[np.minimum(i, len(log) - 1)] == ts
    lo = np.maximum(i - 1, 0)
    hi = np.minimum(i, len(log) - 1)
    span = np.where(exact, 1, log.t[hi] - log.t[lo])
    a = np.where(exact, 0.0, (ts - log.t[lo]) / span)
    base = np.where(exact, hi, lo)
    x = np.where(exact, log.x[base], log.x[lo] + a * (log.x[hi] - log.x[lo]))
    y = np.where(exact, log.y[base], log.y[lo] + a * (log.y[hi] - log.y[lo]))
    theta = np.where(
        exact, log.theta[base], wrap_angle(log.theta[lo] + a * angle_diff(log.theta[hi], log.theta[lo]))
    )
    # 질의 시각이 중복될 수 있으므로 PoseLog 대신 생성자 검사를 우회하지 않는 배열 묶음을 돌려줍니다.
    return _PoseArrays(ts, x, y, theta)


class _PoseArrays(PoseLog):
    """엄격 증가 조건 없이 보간 결과를 담는 PoseLog (질의 시각 중복 허용)."""

    def __init__(self, t, x, y, theta):
        self.t = np.asarray(t, dtype=np.int64)
        self.x = np.asarray(x, dtype=np.float64)
        self.y = np.asarray(y, dtype=np.float64)
        self.theta = np.asarray(theta, dtype=np.float64)


def compose_pose(pose: Pose2, ext_x: float = 0.0, ext_y: float = 0.0, ext_theta: float = 0.0) -> Pose2:
    """차량 포즈에 카메라→차량 외부 파라미터를 합성하여 카메라 포즈를 반환합니다."""
    c, s = math.cos(pose.theta), math.sin(pose.theta)
    return Pose2(
        pose.t,
        pose.x + c * ext_x - s * ext_y,
        pose.y + s * ext_x + c * ext_y,
        float(wrap_angle(pose.theta + ext_theta)),
    )


def compose_poses(log: PoseLog, ext_x: float = 0.0, ext_y: float = 0.0, ext_theta: float = 0.0) -> PoseLog:
    if ext_x == 0.0 and ext_y == 0.0 and ext_theta == 0.0:
        return log
    c, s = np.cos(log.theta), np.sin(log.theta)
    return _PoseArrays(
        log.t,
        log.x + c * ext_x - s * ext_y,
        log.y + s * ext_x + c * ext_y,
        wrap_angle(log.theta + ext_theta),
    )


def world_to_camera(pose: Pose2) -> np.ndarray:
    """카메라 포즈의 역변환을 2×3 행렬로 반환합니다 (0행 = lateral, 1행 = depth)."""
    c, s = math.cos(pose.theta), math.sin(pose.theta)
    return np.array([
        [c, s, -(c * pose.x + s * pose.y)],
        [-s, c, s * pose.x - c * pose.y],
    ])


def world_to_camera_stack(log: PoseLog) -> np.ndarray:
    """포즈 배열 전체에 대한 (k, 2, 3) world→camera 행렬."""
    c, s = np.cos(log.theta), np.sin(log.theta)
    rows = np.empty((len(log.t), 2, 3))
    rows[:, 0, 0] = c
    rows[:, 0, 1] = s
    rows[:, 0, 2] = -(c * log.x + s * log.y)
    rows[:, 1, 0] = -s
    rows[:, 1, 1] = c
    rows[:, 1, 2] = s * log.x - c * log.y
    return rows


def heading_vector(theta: float) -> np.ndarray:
    """주행 방향 단위 벡터 (cosθ, sinθ)."""
    return np.array([math.cos(theta), math.sin(theta)])
