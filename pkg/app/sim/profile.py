# ===================================================================================
#   sim/profile.py: 속도 프로파일 평가
# ===================================================================================
#
#   - 속도는 매듭점 사이 선형 보간, 위치는 구간별 선형 속도의 정확한 적분(사다리꼴 누적 +
#     구간 내 2차식)으로 계산합니다. 수치 적분을 사용하지 않습니다.
#   - 위치는 첫 매듭점에서 0입니다.
#
#
from typing import Tuple

import numpy as np

from app.errors import OutOfRange
from app.sim.models import VelocityProfile

US_PER_S = 1_000_000


def _segments(profile: VelocityProfile):
    t, v = profile.arrays()
    dt = np.diff(t) / US_PER_S
    cumulative = np.concatenate([[0.0], np.cumsum(0.5 * (v[:-1] + v[1:]) * dt)])
    return t, v, dt, cumulative


def profile_positions(profile: VelocityProfile, ts) -> Tuple[np.ndarray, np.ndarray]:
    """시각 배열 ts에서의 (위치 m, 속도 m/s). 매듭점 범위 밖이면 `OutOfRange`."""
    ts = np.asarray(ts, dtype=np.int64)
    t, v, dt, cumulative = _segments(profile)
    if ts.size and (ts.min() < t[0] or ts.max() > t[-1]):
        raise OutOfRange(f"Query outside velocity profile span [{int(t[0])}, {int(t[-1])}]")
    k = np.clip(np.searchsorted(t, ts, side="right") - 1, 0, len(t) - 2)
    tau = (ts - t[k]) / US_PER_S
    accel = (v[k + 1] - v[k]) / dt[k]
    speed = v[k] + accel * tau
    position = cumulative[k] + v[k] * tau + 0.5 * accel * tau * tau
    return position, speed


def profile_eval(profile: VelocityProfile, t: int) -> Tuple[float, float]:
    """시각 t의 (위치 m, 속도 m/s)."""
    position, speed = profile_positions(profile, np.array([t]))
    return float(position[0]), float(speed[0])
