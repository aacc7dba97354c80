# ===================================================================================
#   tracking/models.py: 시공간 추적 단계의 값 타입
# ===================================================================================
#
#   - `SpatioTemporalPoint`: 2차 허프 공간에 투표하는 (xpos, t, polarity) 점.
#   - `LineFit`: 트랙 샘플에 대한 최소제곱 직선 x(t) = x_ref + slope·(t − t_ref).
#   - `PolarityTrack`: 한 극성의 트랙 (샘플 + 2차 허프 직선 + 직선 피팅).
#   - `Track`: 양/음 극성 트랙을 짝지어 얻은 구조물 하나의 (t, xpos) 샘플 D.
#
#
from dataclasses import dataclass, field
from typing import NamedTuple, Tuple

import numpy as np


class SpatioTemporalPoint(NamedTuple):
    xpos: float
    t: int
    polarity: int


class LineFit(NamedTuple):
    t_ref: float
    x_ref: float
    slope: float  # px / µs

    def x_at(self, t):
        return self.x_ref + self.slope * (np.asarray(t, dtype=np.float64) - self.t_ref)

    @classmethod
    def fit(cls, t: np.ndarray, x: np.ndarray) -> "LineFit":
        """(t, x) 샘플에 대한 최소제곱 직선. 시각이 모두 같으면 기울기 0."""
        t = np.asarray(t, dtype=np.float64)
        x = np.asarray(x, dtype=np.float64)
        t_ref = float(t.mean())
        x_ref = float(x.mean())
        dt = t - t_ref
        denom = float(dt @ dt)
        slope = float(dt @ (x - x_ref)) / denom if denom > 0 else 0.0
        return cls(t_ref, x_ref, slope)


@dataclass(frozen=True, eq=False)
class PolarityTrack:
    polarity: int
    t: np.ndarray
    x: np.ndarray
    rho: float
    phi: float
    phi_bin: int
    fit: LineFit

    @property
    def t_first(self) -> int:
        return int(self.t[0])

    @property
    def t_last(self) -> int:
        return int(self.t[-1])

    @property
    def span(self) -> int:
        return self.t_last - self.t_first

    def __len__(self) -> int:
        return len(self.t)


@dataclass(frozen=True, eq=False)
class Track:
    track_id: int
    t: np.ndarray
    x: np.ndarray
    sources: Tuple[PolarityTrack, ...] = field(default=(), repr=False)

    @property
    def t_first(self) -> int:
        return int(self.t[0])

    @property
    def t_last(self) -> int:
        return int(self.t[-1])

    @property
    def t_mid(self) -> int:
        return int(self.t[len(self.t) // 2])

    def __len__(self) -> int:
        return len(self.t)
