# ===================================================================================
#   tests/conftest.py: Pytest 설정 및 Fixture
# ===================================================================================
#
#   - 여러 테스트 파일에서 공통으로 사용하는 Fixture와 Hook을 정의합니다.
#   - 시뮬레이션과 파이프라인 실행은 비용이 크므로 세션 범위로 한 번만 만들고 공유합니다.
#
#   **주요 Fixture:**
#   - `davis240`: 번들 센서 프리셋의 `CameraIntrinsics` (240×180, 왜곡 없음).
#   - `demo_setup`, `demo_sim`: 번들 데모 씬과 그 시뮬레이션 결과 (이벤트, 포즈, GT).
#   - `demo_result`: 데모 시뮬레이션에 대한 순차 파이프라인 실행 결과.
#
#   **마커:**
#   - `slow`: 시뮬레이션 기반 수용 테스트 (기본 실행).
#   - `perf`: 처리 시간 게이트. 머신에 따라 결과가 달라지므로 `RUN_PERF=1`일 때만 실행합니다.
#
#
import os

import pytest

from app.assets import load_sensor_preset
from app.events.io import intrinsics_from_mapping
from app.events.models import CameraIntrinsics
from app.pipeline.runner import PipelineResult, run_pipeline
from app.sim.scene_io import SceneSetup, demo_scene
from app.sim.simulator import simulate


def pytest_collection_modifyitems(config, items):
    """RUN_PERF=1이 아니면 perf 마커가 붙은 테스트를 건너뜁니다."""
    if os.environ.get("RUN_PERF") == "1":
        return
    skip_perf = pytest.mark.skip(reason="wall-clock gate; set RUN_PERF=1 to run")
    for item in items:
        if "perf" in item.keywords:
            item.add_marker(skip_perf)


@pytest.fixture(scope="session")
def davis240() -> CameraIntrinsics:
    return intrinsics_from_mapping(load_sensor_preset("davis240"), "davis240")


@pytest.fixture(scope="session")
def demo_setup() -> SceneSetup:
    return demo_scene()


@pytest.fixture(scope="session")
def demo_sim(demo_setup: SceneSetup):
    """(events, poses, ground_truth)"""
    return simulate(demo_setup.scene, demo_setup.profile, demo_setup.sensor)


@pytest.fixture(scope="session")
def demo_result(demo_sim, demo_setup: SceneSetup) -> PipelineResult:
    events, poses, _ = demo_sim
    return run_pipeline(events, poses, demo_setup.sensor.intrinsics)
