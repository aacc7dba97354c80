# ===================================================================================
#   sim/scene_io.py: 씬 파일 로더
# ===================================================================================
#
#   - 씬 파일은 파이프라인 설정과 같은 평면 `key=value` 형식입니다.
#       pole=x,y,width        (반복 가능)
#       knot=t_us,v_mps       (반복 가능, 또는 speed + duration_us 로 등속 프로파일)
#       v_top, v_bot, noise_rate, sim_step, seed, pose_interval, distort
#       sensor=<프리셋 이름> 과 캘리브레이션 키 (width, alpha_x, u0, k1, ...)
#   - 번들 데모 씬(`assets/demo_scene.yml`)도 같은 키를 사용합니다.
#
#
from pathlib import Path
from typing import Any, Mapping, NamedTuple, Union

from pydantic import ValidationError

from app.assets import load_demo_scene, load_sensor_preset
from app.config import parse_key_value_lines, settings
from app.errors import ConfigError
from app.events.io import CALIBRATION_KEYS, intrinsics_from_mapping
from app.sim.models import Pole, Scene, SensorConfig, VelocityProfile

SCENE_KEYS = (
    "sensor", "speed", "duration_us", "v_top", "v_bot",
    "noise_rate", "sim_step", "seed", "pose_interval", "distort",
)
_SCENE_FIELDS = ("v_top", "v_bot")
_SENSOR_FIELDS = ("noise_rate", "sim_step", "seed", "pose_interval", "distort")


class SceneSetup(NamedTuple):
    scene: Scene
    profile: VelocityProfile
    sensor: SensorConfig


def _split_numbers(item: Any, n: int, key: str, source: str):
    parts = item.split(",") if isinstance(item, str) else list(item)
    if len(parts) != n:
        raise ConfigError(f"{source}: '{key}' expects {n} comma-separated values, got {item!r}")
    try:
        return [float(part) for part in parts]
    except (TypeError, ValueError) as e:
        raise ConfigError(f"{source}: '{key}' has a non-numeric value in {item!r}") from e


def _build_profile(values: dict, knots, source: str) -> VelocityProfile:
    has_constant = "speed" in values or "duration_us" in values
    if knots and has_constant:
        raise ConfigError(f"{source}: use either 'knot' lines or 'speed'+'duration_us', not both")
    if knots:
        parsed = [_split_numbers(k, 2, "knot", source) for k in knots]
        return VelocityProfile(knots=tuple((int(t), v) for t, v in parsed))
    if "speed" not in values or "duration_us" not in values:
        raise ConfigError(f"{source}: velocity profile missing ('knot' lines or 'speed'+'duration_us')")
    return VelocityProfile.constant(float(values["speed"]), int(values["duration_us"]))


def scene_from_mapping(values: Mapping[str, Any], source: str = "<scene>") -> SceneSetup:
    """key → value 매핑으로부터 (씬, 속도 프로파일, 센서 설정)을 만듭니다."""
    values = dict(values)
    poles = list(values.pop("pole", None) or []) + list(values.pop("poles", None) or [])
    knots = list(values.pop("knot", None) or [])
    unknown = sorted(set(values) - set(SCENE_KEYS) - set(CALIBRATION_KEYS))
    if unknown:
        raise ConfigError(f"{source}: unknown scene keys {unknown}")

    calibration = dict(load_sensor_preset(str(values.get("sensor", settings.DEFAULT_SENSOR))))
    overrides = {key: values[key] for key in CALIBRATION_KEYS if key in values}
    if "alpha_x" in overrides and "alpha_y" not in overrides:
        overrides["alpha_y"] = overrides["alpha_x"]
    calibration.update(overrides)
    intrinsics = intrinsics_from_mapping(calibration, source)

    try:
        scene = Scene(
            poles=tuple(Pole(x=x, y=y, width=w) for x, y, w in (_split_numbers(p, 3, "pole", source) for p in poles)),
            **{key: values[key] for key in _SCENE_FIELDS if key in values},
        )
        profile = _build_profile(values, knots, source)
        sensor = SensorConfig(
            intrinsics=intrinsics,
            **{key: values[key] for key in _SENSOR_FIELDS if key in values},
        )
    except (ValidationError, ValueError) as e:
        raise ConfigError(f"{source}: invalid scene: {e}") from e
    return SceneSetup(scene, profile, sensor)


def load_scene(path: Union[str, Path]) -> SceneSetup:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"Scene file not found: {path}")
    values = parse_key_value_lines(path.read_text(encoding="utf-8"), source=str(path), repeatable=("pole", "knot"))
    return scene_from_mapping(values, source=str(path))


def demo_scene() -> SceneSetup:
    """번들 데모 씬 (10개 폴, 10 m/s 등속, 노이즈 없음)"""
    return scene_from_mapping(load_demo_scene(), source="demo_scene.yml")
