# ===================================================================================
#   config.py: 환경 변수 및 파이프라인 설정 관리
# ===================================================================================
#
#   - 프로세스 수준 설정(로그 레벨, 로그 파일 등)은 Pydantic-Settings를 사용하여
#     .env 파일 또는 환경 변수에서 로드합니다. 필수 환경 변수는 없습니다.
#   - 알고리즘 설정(허프 공간, 2차 허프 추적기, 삼각측량, 외부 파라미터, 입출력 경로)은
#     Pydantic 모델로 정의하고 `PipelineConfig`로 묶습니다.
#
#   **주요 기능:**
#   - **타입 안전성**: 모든 설정 값은 타입과 범위가 검증됩니다. 잘못된 값은 `ConfigError`.
#   - **오타 방지**: 알 수 없는 키는 에러로 처리합니다 (`extra="forbid"`).
#   - **평면 key=value 파일**: `threshold=15` 처럼 필드 이름만 쓰거나
#     `hough.threshold=15` 처럼 섹션을 명시할 수 있습니다. `#` 이후는 주석입니다.
#
#   **사용법:**
#   - `from app.config import settings` (프로세스 설정)
#   - `load_pipeline_config(path)` → `PipelineConfig`
#
#
from pathlib import Path
from typing import Dict, Literal, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator
from pydantic_settings import BaseSettings, SettingsConfigDict

from app.errors import ConfigError

# 이 파일(config.py)은 app/ 안에 있으므로, parent.parent는 프로젝트 루트를 가리킵니다.
PROJECT_ROOT = Path(__file__).parent.parent


class AppSettings(BaseSettings):
    """
    프로세스 전역 설정입니다.
    환경 변수 이름은 대소문자를 구분하지 않습니다. (e.g., log_level == LOG_LEVEL)
    """

    model_config = SettingsConfigDict(
        env_file=str(PROJECT_ROOT / ".env"), env_file_encoding="utf-8", extra="ignore"
    )

    # --- 로깅 설정 ---
    LOG_LEVEL: str = "INFO"
    LOG_TO_FILE: bool = False
    LOG_FILE_PATH: str = str(PROJECT_ROOT / "logs/app.log")
    LOG_JSON_FORMAT: bool = False  # JSON 형식으로 로그를 남길지 여부

    # --- 벤치마크 설정 ---
    # 센서 드라이버가 이벤트를 묶어 전달하는 단위 (33ms 이벤트 배열)
    EVENT_ARRAY_US: int = 33_000

    # --- 기본 센서 프리셋 (app/assets/sensors.yml) ---
    DEFAULT_SENSOR: str = "davis240"


settings = AppSettings()


# --------------------------------------------------------------------------
# 알고리즘 설정 모델
# --------------------------------------------------------------------------

class _FrozenModel(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")


class HoughConfig(_FrozenModel):
    """1차 허프 변환(r, θ) 및 반복 NMS 설정"""
    theta_min: float = Field(-10.0, description="최소 각도 (deg)")
    theta_max: float = Field(10.0, description="최대 각도 (deg)")
    theta_step: float = Field(1.0, gt=0, description="각도 간격 (deg)")
    r_min: int = Field(0, description="최소 거리 (px)")
    r_max: int = Field(260, description="최대 거리 (px), 1px 간격")
    window_size: int = Field(300, ge=1, description="극성별 슬라이딩 윈도우 이벤트 수")
    threshold: int = Field(15, ge=1, description="T_Hough: 로컬 최대값 최소 득표수")
    suppression_radius: int = Field(10, ge=1, description="R: 억제 반경 (셀)")
    distance_metric: Literal["euclidean", "chebyshev"] = Field("euclidean", description="억제 거리 척도")
    emit_stride: int = Field(30, ge=1, description="검출 방출 간격 (극성별 이벤트 수)")

    @model_validator(mode="after")
    def _check_ranges(self) -> "HoughConfig":
        if not self.theta_min < self.theta_max:
            raise ValueError("theta_min must be < theta_max")
        if not self.r_min < self.r_max:
            raise ValueError("r_min must be < r_max")
        return self

    @property
    def n_theta(self) -> int:
        return int(round((self.theta_max - self.theta_min) / self.theta_step)) + 1

    @property
    def n_r(self) -> int:
        return self.r_max - self.r_min + 1


class TrackerConfig(_FrozenModel):
    """2차(시공간) 허프 변환 추적기 및 극성 짝짓기 설정"""
    window_duration: int = Field(1_500_000, gt=0, description="롤링 윈도우 길이 (µs)")
    time_bins: int = Field(240, ge=2, description="윈도우 길이에 대응하는 시간 축 bin 수")
    rho_bins: int = Field(261, ge=2, description="rho 축 bin 수")
    phi_min: float = Field(5.0, description="최소 phi (deg)")
    phi_max: float = Field(85.0, description="최대 phi (deg)")
    phi_step: float = Field(1.0, gt=0, description="phi 간격 (deg)")
    travel_direction: Literal["forward", "reverse"] = Field(
        "forward", description="reverse이면 phi 범위를 부호 반전 (역방향 주행)"
    )
    x_extent: int = Field(260, gt=0, description="수평 위치 축의 최대값 (px)")
    track_threshold: int = Field(15, ge=1, description="트랙 최소 득표수")
    assoc_tolerance: float = Field(3.0, gt=0, description="직선과의 수평 거리 허용치 (px)")
    min_track_span: int = Field(200_000, gt=0, description="트랙 최소 시간 길이 (µs)")
    finalize_gap: int = Field(200_000, ge=0, description="최신 샘플이 이만큼 지나야 트랙 확정 (µs)")
    extract_interval: int = Field(100_000, gt=0, description="스트리밍 추출 주기 (µs)")
    pair_max_dx: float = Field(20.0, gt=0, description="짝짓기 평균 수평 거리 한도 (px)")
    pair_max_dphi: int = Field(2, ge=0, description="짝짓기 phi bin 차이 한도")
    frame_width: int = Field(240, gt=0, description="트랙 샘플 허용 폭 (px)")

    @model_validator(mode="after")
    def _check_ranges(self) -> "TrackerConfig":
        if not self.window_duration > self.min_track_span:
            raise ValueError("window_duration must be > min_track_span")
        if not 0.0 < self.phi_min < self.phi_max < 90.0:
            raise ValueError("phi range must lie strictly inside (0°, 90°)")
        return self

    @property
    def phi_range(self) -> Tuple[float, float]:
        if self.travel_direction == "reverse":
            return -self.phi_max, -self.phi_min
        return self.phi_min, self.phi_max

    @property
    def n_phi(self) -> int:
        return int(round((self.phi_max - self.phi_min) / self.phi_step)) + 1


class TriangulationConfig(_FrozenModel):
    """DLT 삼각측량, 맵 병합, 평가 설정"""
    max_samples: int = Field(50, ge=2, description="트랙당 최대 사용 샘플 수")
    min_depth: float = Field(1.0, ge=0, description="최소 깊이 (m), 지나가는 차량 필터")
    merge_radius: float = Field(1.0, gt=0, description="랜드마크 병합 반경 (m)")
    reject_radius: float = Field(4.0, gt=0, description="평가 매칭 거부 반경 (m)")


class ExtrinsicConfig(_FrozenModel):
    """카메라→차량 SE(2) 외부 파라미터 (수동 튜닝 값)"""
    ext_x: float = Field(0.0, description="차량 좌표계 x 오프셋 (m)")
    ext_y: float = Field(0.0, description="차량 좌표계 y 오프셋 (m)")
    ext_theta: float = Field(0.0, description="차량 좌표계 회전 (rad)")


class IOConfig(_FrozenModel):
    """입출력 경로 (CLI 플래그가 우선)"""
    events: Optional[Path] = None
    poses: Optional[Path] = None
    calib: Optional[Path] = None
    gt: Optional[Path] = None
    out: Optional[Path] = None
    format: Literal["csv", "binary"] = "csv"


class PipelineConfig(_FrozenModel):
    """파이프라인 전체 설정. 모든 필드에 기본값이 있습니다."""
    hough: HoughConfig = HoughConfig()
    tracker: TrackerConfig = TrackerConfig()
    triangulation: TriangulationConfig = TriangulationConfig()
    extrinsic: ExtrinsicConfig = ExtrinsicConfig()
    io: IOConfig = IOConfig()

    @classmethod
    def from_flat(cls, values: Dict[str, str]) -> "PipelineConfig":
        """평면 key=value 딕셔너리로부터 설정을 생성합니다."""
        sections: Dict[str, Dict[str, str]] = {name: {} for name in _SECTION_MODELS}
        for key, value in values.items():
            section, field = _resolve_key(key)
            sections[section][field] = value
        try:
            return cls(**{name: _SECTION_MODELS[name](**fields) for name, fields in sections.items()})
        except ValidationError as e:
            raise ConfigError(f"Invalid pipeline configuration: {e}") from e

    def with_io(self, **overrides) -> "PipelineConfig":
        """CLI 플래그로 입출력 경로를 덮어쓴 새 설정을 반환합니다."""
        updates = {k: v for k, v in overrides.items() if v is not None}
        return self.model_copy(update={"io": self.io.model_copy(update=updates)})


_SECTION_MODELS = {
    "hough": HoughConfig,
    "tracker": TrackerConfig,
    "triangulation": TriangulationConfig,
    "extrinsic": ExtrinsicConfig,
    "io": IOConfig,
}

# 섹션 간 필드 이름은 서로 겹치지 않습니다.
_FIELD_TO_SECTION = {
    field: section for section, model in _SECTION_MODELS.items() for field in model.model_fields
}


def _resolve_key(key: str) -> Tuple[str, str]:
    if "." in key:
        section, field = key.split(".", 1)
        model = _SECTION_MODELS.get(section)
        if model is None or field not in model.model_fields:
            raise ConfigError(f"Unknown config key '{key}'")
        return section, field
    section = _FIELD_TO_SECTION.get(key)
    if section is None:
        raise ConfigError(f"Unknown config key '{key}'")
    return section, key


def parse_key_value_lines(text: str, source: str = "<config>", repeatable: Tuple[str, ...] = ()) -> Dict[str, object]:
    """
    평면 `key=value` 텍스트를 파싱합니다.

    :param repeatable: 여러 번 등장할 수 있는 키 (값이 리스트로 모입니다).
    :return: {key: value} 또는 반복 키의 경우 {key: [value, ...]}
    """
    values: Dict[str, object] = {key: [] for key in repeatable}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected 'key=value', got '{raw.strip()}'")
        key, value = (part.strip() for part in line.split("=", 1))
        if not key:
            raise ConfigError(f"{source}:{lineno}: empty key")
        if key in repeatable:
            values[key].append(value)
            continue
        if key in values:
            raise ConfigError(f"{source}:{lineno}: duplicated key '{key}'")
        values[key] = value
    return values


def load_pipeline_config(path: Optional[Path]) -> PipelineConfig:
    """설정 파일을 읽어 `PipelineConfig`를 반환합니다. 경로가 없으면 기본값."""
    if path is None:
        return PipelineConfig()
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"Config file not found: {path}")
    values = parse_key_value_lines(path.read_text(encoding="utf-8"), source=str(path))
    return PipelineConfig.from_flat(values)  # type: ignore[arg-type]
