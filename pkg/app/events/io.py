# ===================================================================================
#   events/io.py: 이벤트/포즈/캘리브레이션 파일 입출력
# ===================================================================================
#
#   - 이벤트 CSV: 헤더 없는 `t_us,x,y,p` 행 (p ∈ {0, 1})
#   - 이벤트 바이너리: 리틀엔디언 13바이트 레코드 (u64 t, u16 x, u16 y, u8 p), 헤더/패딩 없음
#   - 포즈 CSV: 헤더 없는 `t_us,x_m,y_m,theta_rad` 행
#   - 캘리브레이션: 평면 `key=value` 텍스트 (width, height, alpha_x, alpha_y, u0, v0, k1, k2, p1, p2)
#
#   **에러 처리:**
#   - 해석할 수 없는 행/레코드 → `ParseError` (파일 경로와 행/레코드 번호 포함)
#   - 타임스탬프 역행 → `OrderError`, 센서 범위 밖 픽셀 → `BoundsError`
#
#
from pathlib import Path
from typing import Literal, Optional, Union

import numpy as np
import pandas as pd
from loguru import logger
from pydantic import ValidationError

from app.config import parse_key_value_lines
from app.errors import ConfigError, ParseError
from app.events.models import EVENT_DTYPE, CameraIntrinsics, EventStream, PoseLog

EventFormat = Literal["csv", "binary"]
PathLike = Union[str, Path]

EVENT_COLUMNS = ["t", "x", "y", "p"]
POSE_COLUMNS = ["t", "x", "y", "theta"]
CALIBRATION_KEYS = ("width", "height", "alpha_x", "alpha_y", "u0", "v0", "k1", "k2", "p1", "p2")


def _require_file(path: Path):
    if not path.is_file():
        raise ParseError("file not found", path=str(path))


def _locate_bad_line(path: Path, n_fields: int, parsers) -> Optional[ParseError]:
    """pandas가 실패한 경우, 행 단위로 다시 읽어 첫 번째 문제 행을 찾습니다."""
    with open(path, "r", encoding="utf-8") as f:
        for lineno, raw in enumerate(f, start=1):
            line = raw.strip()
            if not line:
                continue
            fields = line.split(",")
            if len(fields) != n_fields:
                return ParseError(f"expected {n_fields} fields, got {len(fields)}", path=str(path), line=lineno)
            try:
                for parse, field in zip(parsers, fields):
                    parse(field.strip())
            except ValueError:
                return ParseError(f"cannot parse '{line}'", path=str(path), line=lineno)
    return None


def _read_numeric_csv(path: Path, columns, dtypes, parsers) -> pd.DataFrame:
    try:
        frame = pd.read_csv(path, header=None, names=columns, dtype=dtypes, skip_blank_lines=True)
    except pd.errors.EmptyDataError:
        return pd.DataFrame({c: pd.Series([], dtype=dtypes[c]) for c in columns})
    except (ValueError, pd.errors.ParserError) as e:
        located = _locate_bad_line(path, len(columns), parsers)
        raise (located or ParseError(str(e), path=str(path))) from e
    if frame.isnull().values.any():
        located = _locate_bad_line(path, len(columns), parsers)
        raise located or ParseError("missing field", path=str(path))
    return frame


def load_events(
    path: PathLike,
    format: EventFormat = "csv",
    width: Optional[int] = None,
    height: Optional[int] = None,
) -> EventStream:
    """
    이벤트 파일을 읽어 `EventStream`을 반환합니다. 이벤트 순서는 파일 순서 그대로입니다.

    :param width, height: 주어지면 픽셀 좌표 범위를 검사합니다 (`BoundsError`).
    """
    path = Path(path)
    _require_file(path)

    if format == "binary":
        raw = path.read_bytes()
        if len(raw) % EVENT_DTYPE.itemsize:
            record = len(raw) // EVENT_DTYPE.itemsize + 1
            raise ParseError(f"truncated {EVENT_DTYPE.itemsize}-byte record", path=str(path), line=record)
        records = np.frombuffer(raw, dtype=EVENT_DTYPE)
        bad = np.flatnonzero(records["p"] > 1)
        if bad.size:
            raise ParseError(f"polarity must be 0 or 1, got {int(records['p'][bad[0]])}",
                             path=str(path), line=int(bad[0]) + 1)
        stream = EventStream.from_records(records)
    elif format == "csv":
        frame = _read_numeric_csv(path, EVENT_COLUMNS, {c: "int64" for c in EVENT_COLUMNS}, [int] * 4)
        invalid = (frame["p"] > 1) | (frame["p"] < 0) | (frame["t"] < 0) | (frame["x"] < 0) | (frame["y"] < 0)
        if invalid.any():
            row = int(np.flatnonzero(invalid.to_numpy())[0])
            raise ParseError(f"invalid event field values {frame.iloc[row].tolist()}",
                             path=str(path), line=_data_line_number(path, row))
        stream = EventStream(frame["t"], frame["x"], frame["y"], frame["p"], validate=False)
    else:
        raise ConfigError(f"Unknown event format '{format}'")

    stream.check_order()
    if width is not None and height is not None:
        stream.check_bounds(width, height)
    logger.info(f"Loaded {len(stream)} events from {path} ({format}).")
    return stream


def _data_line_number(path: Path, row: int) -> int:
    """빈 줄을 건너뛴 `row`번째 데이터 행의 실제 행 번호 (1부터)."""
    with open(path, "r", encoding="utf-8") as f:
        seen = -1
        for lineno, raw in enumerate(f, start=1):
            if raw.strip():
                seen += 1
                if seen == row:
                    return lineno
    return row + 1


def write_events(stream: EventStream, path: PathLike, format: EventFormat = "csv") -> Path:
    """이벤트 스트림을 파일로 씁니다. 바이너리 포맷은 읽기/쓰기가 바이트 단위로 동일합니다."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    if format == "binary":
        stream.to_records().tofile(path)
    elif format == "csv":
        frame = pd.DataFrame({"t": stream.t, "x": stream.x, "y": stream.y, "p": stream.p})
        frame.to_csv(path, header=False, index=False, lineterminator="\n")
    else:
        raise ConfigError(f"Unknown event format '{format}'")
    logger.debug(f"Wrote {len(stream)} events to {path} ({format}).")
    return path


def load_poses(path: PathLike) -> PoseLog:
    """포즈 CSV를 읽어 `PoseLog`를 반환합니다. 타임스탬프는 엄격 증가해야 합니다."""
    path = Path(path)
    _require_file(path)
    dtypes = {"t": "int64", "x": "float64", "y": "float64", "theta": "float64"}
    frame = _read_numeric_csv(path, POSE_COLUMNS, dtypes, [int, float, float, float])
    log = PoseLog(frame["t"], frame["x"], frame["y"], frame["theta"])
    logger.info(f"Loaded {len(log)} poses from {path}.")
    return log


def write_poses(log: PoseLog, path: PathLike) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    frame = pd.DataFrame({"t": log.t, "x": log.x, "y": log.y, "theta": log.theta})
    frame.to_csv(path, header=False, index=False, lineterminator="\n")
    return path


def load_calibration(path: PathLike) -> CameraIntrinsics:
    """
    캘리브레이션 파일(`key=value`)을 읽습니다.
    왜곡 계수(k1, k2, p1, p2)는 생략 시 0, alpha_y는 생략 시 alpha_x를 사용합니다.
    """
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"Calibration file not found: {path}")
    values = parse_key_value_lines(path.read_text(encoding="utf-8"), source=str(path))
    unknown = sorted(set(values) - set(CALIBRATION_KEYS))
    if unknown:
        raise ConfigError(f"{path}: unknown calibration keys {unknown}")
    return intrinsics_from_mapping(values, source=str(path))


def intrinsics_from_mapping(values, source: str = "<calibration>") -> CameraIntrinsics:
    values = dict(values)
    if "alpha_y" not in values and "alpha_x" in values:
        values["alpha_y"] = values["alpha_x"]
    try:
        return CameraIntrinsics(**values)
    except ValidationError as e:
        raise ConfigError(f"{source}: invalid calibration: {e}") from e


def write_calibration(intr: CameraIntrinsics, path: PathLike) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = [f"{key}={getattr(intr, key)!r}" for key in CALIBRATION_KEYS]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path
