# ===================================================================================
#   hough/models.py: 허프 검출 단계의 값 타입
# ===================================================================================
#
#   - `CellUpdateSet`: 이벤트 하나가 바꾼 누산기 셀 (P+ = 증가, P− = 감소).
#     셀은 테두리(0 패딩)를 포함한 평탄화(flat) 인덱스로 보관합니다.
#   - `Detection`: 시각 t에 방출된 거의 수직인 직선 하나 (r = 수평 위치).
#   - `NmsStats`: 반복 NMS가 이벤트당 검사한 셀 수 (복잡도 지표).
#
#
from dataclasses import dataclass
from typing import List, NamedTuple

import numpy as np

from app.utils.typing import Cell


class Detection(NamedTuple):
    t: int
    r: int
    theta: float
    polarity: int
    votes: int


@dataclass(frozen=True, eq=False)
class CellUpdateSet:
    polarity: int
    plus: np.ndarray
    minus: np.ndarray
    stride: int

    def _to_cells(self, flat: np.ndarray) -> List[Cell]:
        return [(int(f) // self.stride - 1, int(f) % self.stride - 1) for f in flat]

    @property
    def plus_cells(self) -> List[Cell]:
        return self._to_cells(self.plus)

    @property
    def minus_cells(self) -> List[Cell]:
        return self._to_cells(self.minus)

    @property
    def is_empty(self) -> bool:
        return not len(self.plus) and not len(self.minus)


@dataclass
class NmsStats:
    events: int = 0
    touched: int = 0
    reopened: int = 0
    grid_cells: int = 1

    def record(self, touched: int, reopened: int = 0):
        self.events += 1
        self.touched += touched
        self.reopened += reopened

    @property
    def mean_touched(self) -> float:
        return self.touched / self.events if self.events else 0.0

    def touched_fraction(self) -> float:
        """이벤트당 평균 검사 셀 수 / 전체 격자 셀 수 (N·M)"""
        return self.mean_touched / self.grid_cells
