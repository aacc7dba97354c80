# ===================================================================================
#   assets/__init__.py: 애셋 로딩 유틸리티
# ===================================================================================
#
#   - `assets` 디렉토리에 있는 YAML 프리셋 파일들을 파이썬 객체로 로드하는
#     유틸리티 함수들을 제공합니다.
#   - 파일은 한 번만 읽어 메모리에 캐싱하여, 반복적인 파일 I/O를 방지합니다.
#
#   **번들 애셋:**
#   - `sensors.yml`: 센서 이름 → 내부 파라미터(CameraIntrinsics 필드) 프리셋
#   - `demo_scene.yml`: 시뮬레이터 기본 씬 (폴 10개, 등속 10 m/s)
#
#
from functools import lru_cache
from pathlib import Path
from typing import Any, Dict

import yaml

from app.errors import ConfigError

# 애셋 파일이 위치한 디렉토리 경로
ASSETS_DIR = Path(__file__).parent


@lru_cache(maxsize=None)
def _load_yaml_file(filename: str) -> Dict[str, Any]:
    """YAML 파일을 안전하게 로드하고 그 내용을 캐시합니다."""
    file_path = ASSETS_DIR / filename
    with open(file_path, "r", encoding="utf-8") as f:
        return yaml.safe_load(f)


def load_sensor_presets() -> Dict[str, Dict[str, float]]:
    """
    `sensors.yml` 파일을 로드하여 센서 프리셋 맵을 반환합니다.

    반환값: `{"davis240": {"width": 240, "height": 180, ...}, ...}`
    """
    return _load_yaml_file("sensors.yml")


def load_sensor_preset(name: str) -> Dict[str, float]:
    """이름으로 센서 프리셋 하나를 반환합니다. 없는 이름이면 `ConfigError`."""
    presets = load_sensor_presets()
    if name not in presets:
        raise ConfigError(f"Unknown sensor preset '{name}' (available: {sorted(presets)})")
    return dict(presets[name])


def load_demo_scene() -> Dict[str, Any]:
    """`demo_scene.yml`의 원본 딕셔너리를 반환합니다. (`app.sim.scene_io`가 모델로 변환)"""
    return _load_yaml_file("demo_scene.yml")
