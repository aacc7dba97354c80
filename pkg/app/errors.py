# ===================================================================================
#   errors.py: 파이프라인 공통 예외 정의
# ===================================================================================
#
#   - 모든 모듈이 공유하는 예외 계층을 한 곳에 모아둡니다.
#   - CLI는 `PoleMapError`만 잡아서 로그를 남기고 종료 코드 1로 끝냅니다.
#   - 파이프라인은 트랙 단위의 기하학적 실패(`TooShort`, `DegenerateGeometry`,
#     `BehindCamera`, `OutOfRange`)를 개별적으로 잡아 거부 카운트로 집계합니다.
#
#
from typing import Optional


class PoleMapError(Exception):
    """파이프라인에서 발생하는 모든 예외의 베이스 클래스"""


class ParseError(PoleMapError):
    """입력 파일의 행/레코드를 해석할 수 없을 때 발생합니다."""

    def __init__(self, message: str, path: Optional[str] = None, line: Optional[int] = None):
        self.path = path
        self.line = line
        where = ""
        if path is not None:
            where += f"{path}"
        if line is not None:
            where += f":{line}"
        super().__init__(f"{where}: {message}" if where else message)


class OrderError(PoleMapError):
    """타임스탬프가 역행할 때 발생합니다."""

    def __init__(self, message: str, record: Optional[int] = None):
        self.record = record
        super().__init__(message)


class BoundsError(PoleMapError):
    """픽셀 좌표가 센서 크기를 벗어날 때 발생합니다."""


class OutOfRange(PoleMapError):
    """질의 시각이 포즈 로그나 속도 프로파일의 범위를 벗어날 때 발생합니다."""


class TooShort(PoleMapError):
    """삼각측량에 필요한 샘플 수(2개)가 부족할 때 발생합니다."""


class DegenerateGeometry(PoleMapError):
    """DLT 행렬의 랭크가 부족하거나 해가 무한원점일 때 발생합니다."""


class BehindCamera(PoleMapError):
    """삼각측량된 점이 대부분의 샘플에서 카메라 뒤(또는 최소 깊이 이내)에 있을 때 발생합니다."""


class EmptyInput(PoleMapError):
    """평가에 필요한 맵 또는 그라운드 트루스가 비어 있을 때 발생합니다."""


class ConfigError(PoleMapError):
    """설정 파일/씬 파일의 키나 값이 잘못되었을 때 발생합니다."""


class EquivalenceFailure(PoleMapError):
    """반복 NMS와 전체 NMS의 결과가 다를 때 발생합니다."""

    def __init__(self, event_index: int, iterative: frozenset, full: frozenset):
        self.event_index = event_index
        self.iterative = iterative
        self.full = full
        super().__init__(
            f"Iterative and full NMS disagree at event #{event_index}: "
            f"iterative={sorted(iterative)} full={sorted(full)}"
        )
