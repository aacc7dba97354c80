# ===================================================================================
#   events/undistort.py: 왜곡 보정 룩업 테이블
# ===================================================================================
#
#   - 센서의 모든 픽셀에 대해 보정된 정수 픽셀 좌표를 미리 계산합니다.
#   - 이벤트는 투표 전에 이 테이블로 재매핑됩니다 (테이블 밖으로 나가면 버림).
#
#   **LUT 생성 방식 (`method`):**
#   - `forward` (기본): 픽셀을 정규화한 뒤 radial-tangential 다항식을 그대로 적용합니다.
#       x' = x(1 + k1 r² + k2 r⁴) + 2 p1 x y + p2 (r² + 2x²)
#       y' = y(1 + k1 r² + k2 r⁴) + p1 (r² + 2y²) + 2 p2 x y
#   - `iterative`: 계수가 이상점→왜곡점 방향으로 주어진 캘리브레이션을 위해
#     다항식을 고정점 반복(8회)으로 역변환합니다.
#
#   반올림은 `floor(v + 0.5)`로 고정되어 있어 LUT와 픽셀 단위 직접 계산이 항상 일치합니다.
#
#
from typing import Literal, Optional, Tuple

import numpy as np
from loguru import logger

from app.events.models import CameraIntrinsics, EventStream, UndistortionLUT
from app.utils.math import round_half_up
from app.utils.typing import Event

LutMethod = Literal["forward", "iterative"]

INVERSE_ITERATIONS = 8


def distort_normalized(xn, yn, dist: Tuple[float, float, float, float]):
    """정규화 좌표에 radial-tangential 다항식을 적용합니다 (스칼라/배열 공용)."""
    k1, k2, p1, p2 = dist
    x2 = xn * xn
    y2 = yn * yn
    xy = xn * yn
    r2 = x2 + y2
    radial = 1.0 + k1 * r2 + k2 * (r2 * r2)
    xd = xn * radial + 2.0 * p1 * xy + p2 * (r2 + 2.0 * x2)
    yd = yn * radial + p1 * (r2 + 2.0 * y2) + 2.0 * p2 * xy
    return xd, yd


def invert_normalized(xt, yt, dist: Tuple[float, float, float, float], iterations: int = INVERSE_ITERATIONS):
    """`distort_normalized(x, y) = (xt, yt)`를 만족하는 (x, y)를 고정점 반복으로 구합니다."""
    xu, yu = xt, yt
    for _ in range(iterations):
        xd, yd = distort_normalized(xu, yu, dist)
        xu = xt - (xd - xu)
        yu = yt - (yd - yu)
    return xu, yu


def map_pixel(x, y, intr: CameraIntrinsics, method: LutMethod = "forward"):
    """
    픽셀 좌표 하나(또는 배열)의 보정된 연속 좌표를 계산합니다.
    LUT 없이 직접 계산하는 경로이며, LUT는 이 함수를 전체 그리드에 적용한 결과입니다.
    """
    xn = (x - intr.u0) / intr.alpha_x
    yn = (y - intr.v0) / intr.alpha_y
    if method == "forward":
        xc, yc = distort_normalized(xn, yn, intr.dist)
    elif method == "iterative":
        xc, yc = invert_normalized(xn, yn, intr.dist)
    else:
        raise ValueError(f"Unknown LUT method '{method}'")
    return intr.alpha_x * xc + intr.u0, intr.alpha_y * yc + intr.v0


def build_undistortion_lut(intr: CameraIntrinsics, method: LutMethod = "forward") -> UndistortionLUT:
    """센서 전체 픽셀에 대한 보정 LUT를 생성합니다. 왜곡 계수가 0이면 항등 매핑입니다."""
    ys, xs = np.mgrid[0:intr.height, 0:intr.width]
    if not intr.has_distortion:
        valid = np.ones(xs.shape, dtype=bool)
        return UndistortionLUT(xs.astype(np.int64), ys.astype(np.int64), valid)

    u, v = map_pixel(xs.astype(np.float64), ys.astype(np.float64), intr, method)
    map_x = round_half_up(u)
    map_y = round_half_up(v)
    valid = (map_x >= 0) & (map_x < intr.width) & (map_y >= 0) & (map_y < intr.height)
    logger.debug(
        f"Undistortion LUT ({method}) built for {intr.width}x{intr.height}: "
        f"{int((~valid).sum())} invalid cells."
    )
    return UndistortionLUT(map_x, map_y, valid)


def undistort_event(e: Event, lut: UndistortionLUT) -> Optional[Event]:
    """이벤트 하나를 재매핑합니다. LUT 셀이 무효이면 `None` (버림)."""
    if not lut.valid[e.y, e.x]:
        return None
    return Event(e.t, int(lut.map_x[e.y, e.x]), int(lut.map_y[e.y, e.x]), e.p)


def undistort_stream(stream: EventStream, lut: UndistortionLUT) -> EventStream:
    """`undistort_event`의 벡터화 버전. 무효 셀 이벤트는 제거되고 순서는 유지됩니다."""
    if not len(stream):
        return stream
    keep = lut.valid[stream.y, stream.x]
    kept = stream.select(keep)
    result = EventStream(kept.t, lut.map_x[kept.y, kept.x], lut.map_y[kept.y, kept.x], kept.p, validate=False)
    dropped = len(stream) - len(result)
    if dropped:
        logger.warning(f"Undistortion dropped {dropped} events mapped outside the frame.")
    return result
