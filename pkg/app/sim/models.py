# ===================================================================================
#   sim/models.py: 합성 씬 시뮬레이터 설정 모델
# ===================================================================================
#
#   - 측면을 바라보는 카메라를 단 차량이 월드 x축을 따라 주행하며, 밝은 배경 앞의
#     어두운 수직 폴들을 지나갑니다.
#   - `Scene`: 폴 목록 (x, y, width) 과 화면에서 폴이 차지하는 행 범위 [v_top, v_bot].
#   - `VelocityProfile`: (t_us, v_mps) 매듭점 사이를 선형 보간하는 속도 프로파일.
#   - `SensorConfig`: 내부 파라미터, 노이즈율, 시뮬레이션 간격, 시드 등.
#
#
from typing import Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from app.events.models import CameraIntrinsics


class Pole(BaseModel):
    model_config = ConfigDict(frozen=True)

    x: float = Field(..., description="월드 x (m)")
    y: float = Field(..., description="월드 y (m) = 카메라로부터의 깊이")
    width: float = Field(..., gt=0, description="폴 폭 (m)")


class Scene(BaseModel):
    model_config = ConfigDict(frozen=True)

    poles: Tuple[Pole, ...] = ()
    v_top: int = Field(10, ge=0, description="폴 상단 행 (px)")
    v_bot: int = Field(169, description="폴 하단 행 (px)")

    @model_validator(mode="after")
    def _check_rows(self) -> "Scene":
        if not self.v_top < self.v_bot:
            raise ValueError("v_top must be < v_bot")
        return self

    @property
    def rows(self) -> int:
        return self.v_bot - self.v_top + 1


class VelocityProfile(BaseModel):
    model_config = ConfigDict(frozen=True)

    knots: Tuple[Tuple[int, float], ...] = Field(..., description="(t_us, v_mps) 매듭점")

    @model_validator(mode="after")
    def _check_knots(self) -> "VelocityProfile":
        if len(self.knots) < 2:
            raise ValueError("velocity profile needs at least two knots")
        ts = [t for t, _ in self.knots]
        if any(b <= a for a, b in zip(ts, ts[1:])):
            raise ValueError("velocity knots must be strictly time-ordered")
        if any(v < 0 for _, v in self.knots):
            raise ValueError("speeds must be non-negative")
        return self

    @classmethod
    def constant(cls, speed: float, duration_us: int, t0: int = 0) -> "VelocityProfile":
        return cls(knots=((t0, speed), (t0 + duration_us, speed)))

    @property
    def t_start(self) -> int:
        return self.knots[0][0]

    @property
    def t_end(self) -> int:
        return self.knots[-1][0]

    def arrays(self) -> Tuple[np.ndarray, np.ndarray]:
        t = np.array([k[0] for k in self.knots], dtype=np.int64)
        v = np.array([k[1] for k in self.knots], dtype=np.float64)
        return t, v


class SensorConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    intrinsics: CameraIntrinsics
    noise_rate: float = Field(0.0, ge=0, description="균일 노이즈 이벤트율 (events/s)")
    sim_step: int = Field(100, gt=0, description="시뮬레이션 간격 (µs)")
    seed: int = Field(0, description="난수 시드")
    pose_interval: int = Field(10_000, gt=0, description="포즈 로그 간격 (µs)")
    distort: bool = Field(False, description="왜곡 모델의 역변환을 이벤트 픽셀에 적용")
