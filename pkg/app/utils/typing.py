# ===================================================================================
#   utils/typing.py: 전역 타입 정의
# ===================================================================================
#
#   - 여러 단계에서 공통으로 주고받는 가벼운 값 타입을 정의합니다.
#   - 이벤트 단위로 대량 생성되는 값은 Pydantic 모델 대신 `NamedTuple`을 사용합니다.
#     (검증 비용 없이 불변이고, 스레드 간에 안전하게 전달할 수 있습니다.)
#   - 타입 정의를 별도 파일로 분리함으로써 모듈 간의 순환 참조(circular import) 문제를
#     방지합니다.
#
#   **주요 정의:**
#   - `Event`: DVS 이벤트 튜플 ⟨t, x, y, p⟩ (t는 µs 정수).
#   - `Pose2`: SE(2) 포즈 (t, x, y, theta).
#   - `Cell`: 허프 공간 셀 인덱스 (theta_bin, r_bin).
#   - `Polarity`: 극성 상수 (1 = 밝기 증가, 0 = 감소).
#
#
from typing import NamedTuple, Tuple


class Polarity:
    NEGATIVE = 0
    POSITIVE = 1


class Event(NamedTuple):
    t: int
    x: int
    y: int
    p: int


class Pose2(NamedTuple):
    t: int
    x: float
    y: float
    theta: float


# (theta_bin, r_bin)
Cell = Tuple[int, int]
