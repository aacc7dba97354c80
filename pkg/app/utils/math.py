# ===================================================================================
#   utils/math.py: 수학 관련 유틸리티 함수
# ===================================================================================
#
#   - 여러 단계(LUT, 허프 변환, 시뮬레이터, 포즈 보간)에서 공통으로 사용하는
#     반올림/각도 계산 함수들을 모아놓은 모듈입니다.
#
#   **주요 기능:**
#   - `round_half_up`: 가장 가까운 정수로 반올림 (동률은 +방향). 파이썬 기본
#     `round()`의 은행가 반올림과 달리 결정적이며 LUT/허프 셀 계산이 이 함수를 공유합니다.
#   - `wrap_angle`: 각도를 (−π, π] 구간으로 정규화합니다.
#   - `angle_diff`: 최단 호(shortest arc) 방향의 각도 차이를 계산합니다.
#
#
import math

import numpy as np


def round_half_up(values):
    """
    가장 가까운 정수로 반올림합니다. 0.5는 항상 +방향으로 올립니다.
    스칼라와 numpy 배열 모두 지원하며, 결과는 정수(int / int64 배열)입니다.
    """
    if np.isscalar(values):
        return int(math.floor(values + 0.5))
    return np.floor(np.asarray(values, dtype=np.float64) + 0.5).astype(np.int64)


def wrap_angle(theta):
    """각도(rad)를 (−π, π] 구간으로 정규화합니다."""
    return math.pi - np.mod(math.pi - theta, 2.0 * math.pi)


def angle_diff(a, b):
    """b에서 a로 가는 최단 호의 부호 있는 각도 차이 (−π, π]."""
    return wrap_angle(np.subtract(a, b))
