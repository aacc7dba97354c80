# ===================================================================================
#   events/models.py: 이벤트/포즈/캘리브레이션 데이터 모델
# ===================================================================================
#
#   - 모든 단계가 공유하는 입력 데이터 타입을 정의합니다.
#   - `CameraIntrinsics`는 Pydantic 모델로 값의 유효성을 검증합니다.
#   - `EventStream`, `PoseLog`, `UndistortionLUT`은 numpy 열(column) 배열을 감싸는
#     불변 컨테이너입니다. 이벤트 수가 수백만 개에 달하므로 레코드 객체를 만들지 않습니다.
#
#   **불변 조건:**
#   - EventStream: t는 비감소(동일 t는 파일 순서 유지), p ∈ {0, 1}.
#   - PoseLog: t는 엄격 증가, theta ∈ (−π, π].
#
#
from typing import Iterator, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from app.errors import BoundsError, OrderError
from app.utils.math import wrap_angle
from app.utils.typing import Event, Pose2


class CameraIntrinsics(BaseModel):
    """핀홀 카메라 내부 파라미터 + 4계수 radial-tangential 왜곡 모델"""
    model_config = ConfigDict(frozen=True, extra="forbid")

    width: int = Field(..., gt=0, description="센서 폭 (px)")
    height: int = Field(..., gt=0, description="센서 높이 (px)")
    alpha_x: float = Field(..., gt=0, description="수평 초점 거리 (px)")
    alpha_y: float = Field(..., gt=0, description="수직 초점 거리 (px)")
    u0: float = Field(..., description="수평 주점 (px)")
    v0: float = Field(..., description="수직 주점 (px)")
    k1: float = 0.0
    k2: float = 0.0
    p1: float = 0.0
    p2: float = 0.0

    @model_validator(mode="after")
    def _check_principal_point(self) -> "CameraIntrinsics":
        if not 0.0 <= self.u0 < self.width:
            raise ValueError(f"u0={self.u0} must lie in [0, width={self.width})")
        return self

    @property
    def dist(self) -> Tuple[float, float, float, float]:
        return self.k1, self.k2, self.p1, self.p2

    @property
    def has_distortion(self) -> bool:
        return any(c != 0.0 for c in self.dist)


EVENT_DTYPE = np.dtype([("t", "<u8"), ("x", "<u2"), ("y", "<u2"), ("p", "u1")])
assert EVENT_DTYPE.itemsize == 13


class EventStream:
    """
    열 단위로 저장된 이벤트 스트림.
    반복(iteration)하면 `Event` 튜플을 순서대로 돌려줍니다.
    """
    __slots__ = ("t", "x", "y", "p")

    def __init__(self, t, x, y, p, validate: bool = True):
        self.t = np.ascontiguousarray(t, dtype=np.int64)
        self.x = np.ascontiguousarray(x, dtype=np.int64)
        self.y = np.ascontiguousarray(y, dtype=np.int64)
        self.p = np.ascontiguousarray(p, dtype=np.int64)
        if not (len(self.t) == len(self.x) == len(self.y) == len(self.p)):
            raise ValueError("EventStream columns must have equal length")
        for column in (self.t, self.x, self.y, self.p):
            column.setflags(write=False)
        if validate:
            self.check_order()

    @classmethod
    def empty(cls) -> "EventStream":
        return cls([], [], [], [])

    @classmethod
    def from_events(cls, events) -> "EventStream":
        events = list(events)
        if not events:
            return cls.empty()
        t, x, y, p = zip(*events)
        return cls(t, x, y, p)

    @classmethod
    def from_records(cls, records: np.ndarray) -> "EventStream":
        return cls(records["t"].astype(np.int64), records["x"], records["y"], records["p"])

    def to_records(self) -> np.ndarray:
        records = np.empty(len(self), dtype=EVENT_DTYPE)
        records["t"] = self.t
        records["x"] = self.x
        records["y"] = self.y
        records["p"] = self.p
        return records

    def check_order(self):
        """타임스탬프 역행 시 `OrderError` (레코드 번호는 1부터)."""
        if len(self.t) > 1:
            bad = np.flatnonzero(np.diff(self.t) < 0)
            if bad.size:
                record = int(bad[0]) + 2
                raise OrderError(
                    f"Timestamp regression at record {record}: "
                    f"{int(self.t[record - 1])} < {int(self.t[record - 2])}",
                    record=record,
                )

    def check_bounds(self, width: int, height: int):
        """픽셀 좌표가 센서 크기를 벗어나면 `BoundsError`."""
        bad = np.flatnonzero((self.x < 0) | (self.x >= width) | (self.y < 0) | (self.y >= height))
        if bad.size:
            i = int(bad[0])
            raise BoundsError(
                f"Event #{i + 1} at ({int(self.x[i])}, {int(self.y[i])}) outside {width}x{height} sensor"
            )

    def select(self, mask: np.ndarray) -> "EventStream":
        """불리언 마스크로 부분 스트림을 만듭니다. 순서는 유지됩니다."""
        return EventStream(self.t[mask], self.x[mask], self.y[mask], self.p[mask], validate=False)

    def polarity(self, p: int) -> "EventStream":
        return self.select(self.p == p)

    def __len__(self) -> int:
        return len(self.t)

    def __iter__(self) -> Iterator[Event]:
        for t, x, y, p in zip(self.t.tolist(), self.x.tolist(), self.y.tolist(), self.p.tolist()):
            yield Event(t, x, y, p)

    def __getitem__(self, i: int) -> Event:
        return Event(int(self.t[i]), int(self.x[i]), int(self.y[i]), int(self.p[i]))

    def __eq__(self, other) -> bool:
        if not isinstance(other, EventStream):
            return NotImplemented
        return all(np.array_equal(a, b) for a, b in zip(
            (self.t, self.x, self.y, self.p), (other.t, other.x, other.y, other.p)
        ))

    def __repr__(self) -> str:
        span = f"{int(self.t[0])}..{int(self.t[-1])}us" if len(self) else "empty"
        return f"EventStream(n={len(self)}, {span})"


class UndistortionLUT:
    """
    픽셀 (x, y) → 왜곡 보정된 정수 픽셀 (x', y') 룩업 테이블.
    `valid[y, x]`가 False이면 해당 픽셀의 이벤트는 버려집니다.
    """
    __slots__ = ("map_x", "map_y", "valid")

    def __init__(self, map_x: np.ndarray, map_y: np.ndarray, valid: np.ndarray):
        self.map_x = map_x
        self.map_y = map_y
        self.valid = valid
        for a in (map_x, map_y, valid):
            a.setflags(write=False)

    @property
    def shape(self) -> Tuple[int, int]:
        return self.map_x.shape

    @property
    def is_identity(self) -> bool:
        h, w = self.shape
        ys, xs = np.mgrid[0:h, 0:w]
        return bool(self.valid.all() and np.array_equal(self.map_x, xs) and np.array_equal(self.map_y, ys))


class PoseLog:
    """시간 순서의 SE(2) 포즈 로그 (열 배열)."""
    __slots__ = ("t", "x", "y", "theta")

    def __init__(self, t, x, y, theta):
        self.t = np.ascontiguousarray(t, dtype=np.int64)
        self.x = np.ascontiguousarray(x, dtype=np.float64)
        self.y = np.ascontiguousarray(y, dtype=np.float64)
        self.theta = np.ascontiguousarray(wrap_angle(np.asarray(theta, dtype=np.float64)), dtype=np.float64)
        if not (len(self.t) == len(self.x) == len(self.y) == len(self.theta)):
            raise ValueError("PoseLog columns must have equal length")
        if len(self.t) > 1:
            bad = np.flatnonzero(np.diff(self.t) <= 0)
            if bad.size:
                record = int(bad[0]) + 2
                raise OrderError(f"Pose timestamps must be strictly increasing (record {record})", record=record)
        for column in (self.t, self.x, self.y, self.theta):
            column.setflags(write=False)

    @classmethod
    def from_poses(cls, poses) -> "PoseLog":
        poses = list(poses)
        if not poses:
            return cls([], [], [], [])
        t, x, y, theta = zip(*poses)
        return cls(t, x, y, theta)

    @property
    def span(self) -> Optional[Tuple[int, int]]:
        if not len(self.t):
            return None
        return int(self.t[0]), int(self.t[-1])

    def __len__(self) -> int:
        return len(self.t)

    def __getitem__(self, i: int) -> Pose2:
        return Pose2(int(self.t[i]), float(self.x[i]), float(self.y[i]), float(self.theta[i]))

    def __iter__(self) -> Iterator[Pose2]:
        for i in range(len(self)):
            yield self[i]
