# ===================================================================================
#   mapping/models.py: 랜드마크 맵 데이터 모델
# ===================================================================================
#
#   **주요 모델:**
#   - `Landmark`: 삼각측량된 2D 월드 좌표 (m)와 관측 메타데이터.
#     `residual`은 DLT 행렬의 최소 특이값, `t_ref`는 트랙 중간 시각(주행 방향 조회용).
#   - `LandmarkMap`: 병합 반경 이내에 두 랜드마크가 없도록 유지되는 맵.
#   - `GroundTruthPole`: 평가용 실제 폴 위치.
#   - `EvalReport`: TP/FN/FP, RMSE, 주행 방향/횡방향 평균 오차.
#
#
import math
from typing import List

from pydantic import BaseModel, ConfigDict, Field, field_validator


class Landmark(BaseModel):
    model_config = ConfigDict(frozen=True)

    x: float = Field(..., description="월드 x (m)")
    y: float = Field(..., description="월드 y (m)")
    n_obs: int = Field(..., ge=2, description="사용된 샘플 수")
    t_first: int = Field(..., description="첫 관측 시각 (µs)")
    t_last: int = Field(..., description="마지막 관측 시각 (µs)")
    residual: float = Field(0.0, ge=0, description="DLT 최소 특이값")
    t_ref: int = Field(0, description="트랙 중간 시각 (µs)")
    track_id: int = Field(-1, description="원본 트랙 id (병합 시 가장 작은 값)")

    @field_validator("x", "y")
    @classmethod
    def _finite(cls, v: float) -> float:
        if not math.isfinite(v):
            raise ValueError("landmark coordinates must be finite")
        return v


class LandmarkMap(BaseModel):
    landmarks: List[Landmark] = Field(default_factory=list)
    merge_radius: float = Field(1.0, gt=0)

    def __len__(self) -> int:
        return len(self.landmarks)

    def __iter__(self):
        return iter(self.landmarks)


class GroundTruthPole(BaseModel):
    model_config = ConfigDict(frozen=True)

    id: int
    x: float
    y: float


class EvalReport(BaseModel):
    model_config = ConfigDict(frozen=True)

    ground_truth: int = Field(..., description="평가 대상 GT 폴 수")
    true_positives: int
    false_negatives: int
    false_positives: int
    rmse: float = Field(..., description="매칭 쌍 RMSE (m), 매칭이 없으면 nan")
    longitudinal_mean: float = Field(..., description="주행 방향 평균 |오차| (m)")
    lateral_mean: float = Field(..., description="횡방향 평균 |오차| (m)")

    @property
    def detection_rate(self) -> float:
        return self.true_positives / self.ground_truth if self.ground_truth else 0.0

    def as_lines(self) -> List[str]:
        """표 형태의 key=value 행 (eval.txt 및 CLI 출력 공용)"""
        return [
            f"ground_truth={self.ground_truth}",
            f"true_positives={self.true_positives}",
            f"false_negatives={self.false_negatives}",
            f"false_positives={self.false_positives}",
            f"detection_rate={self.detection_rate:.4f}",
            f"rmse_m={self.rmse:.4f}",
            f"longitudinal_m={self.longitudinal_mean:.4f}",
            f"lateral_m={self.lateral_mean:.4f}",
        ]
