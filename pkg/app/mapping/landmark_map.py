# ===================================================================================
#   mapping/landmark_map.py: 랜드마크 맵 누적 및 파일 입출력
# ===================================================================================
#
#   - 새 랜드마크가 기존 랜드마크와 merge_radius 이내이면 관측 수(n_obs) 가중 평균으로
#     병합합니다. 병합 결과가 다른 랜드마크와 가까워질 수 있으므로 더 이상 병합할 쌍이
#     없을 때까지 반복합니다.
#   - 맵 CSV: `id,x_m,y_m,n_obs,t_first_us,t_last_us` (헤더 포함)
#   - GT CSV: `id,x_m,y_m` (헤더 포함)
#
#
from pathlib import Path
from typing import Iterable, List, Union

import numpy as np
import pandas as pd
from loguru import logger

from app.errors import ParseError
from app.mapping.models import GroundTruthPole, Landmark, LandmarkMap, EvalReport
from app.utils.math import round_half_up

PathLike = Union[str, Path]

MAP_COLUMNS = ["id", "x_m", "y_m", "n_obs", "t_first_us", "t_last_us"]
GT_COLUMNS = ["id", "x_m", "y_m"]


def merge_landmarks(a: Landmark, b: Landmark) -> Landmark:
    n = a.n_obs + b.n_obs
    return Landmark(
        x=(a.x * a.n_obs + b.x * b.n_obs) / n,
        y=(a.y * a.n_obs + b.y * b.n_obs) / n,
        n_obs=n,
        t_first=min(a.t_first, b.t_first),
        t_last=max(a.t_last, b.t_last),
        residual=max(a.residual, b.residual),
        t_ref=round_half_up((a.t_ref * a.n_obs + b.t_ref * b.n_obs) / n),
        track_id=min(a.track_id, b.track_id),
    )


def _closest_pair(landmarks: List[Landmark], radius: float):
    if len(landmarks) < 2:
        return None
    xy = np.array([[lm.x, lm.y] for lm in landmarks])
    d = np.hypot(xy[:, None, 0] - xy[None, :, 0], xy[:, None, 1] - xy[None, :, 1])
    d[np.tril_indices(len(landmarks))] = np.inf
    i, j = np.unravel_index(int(np.argmin(d)), d.shape)
    if d[i, j] > radius:
        return None
    return int(i), int(j)


def accumulate_map(landmarks: Iterable[Landmark], merge_radius: float = 1.0) -> LandmarkMap:
    """랜드마크를 순서대로 삽입하며 merge_radius 이내의 쌍을 병합합니다."""
    merged: List[Landmark] = []
    n_merges = 0
    for landmark in landmarks:
        merged.append(landmark)
        while (pair := _closest_pair(merged, merge_radius)) is not None:
            i, j = pair
            combined = merge_landmarks(merged[i], merged[j])
            merged[i] = combined
            del merged[j]
            n_merges += 1
    if n_merges:
        logger.debug(f"Landmark map: {n_merges} merges within {merge_radius} m.")
    return LandmarkMap(landmarks=merged, merge_radius=merge_radius)


# --- 파일 입출력 ---

def write_map(lmap: LandmarkMap, path: PathLike) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    frame = pd.DataFrame(
        [[i, lm.x, lm.y, lm.n_obs, lm.t_first, lm.t_last] for i, lm in enumerate(lmap.landmarks)],
        columns=MAP_COLUMNS,
    )
    frame.to_csv(path, index=False, lineterminator="\n", float_format="%.6f")
    return path


def _read_table(path: PathLike, columns: List[str]) -> pd.DataFrame:
    path = Path(path)
    if not path.is_file():
        raise ParseError("file not found", path=str(path))
    try:
        frame = pd.read_csv(path)
    except pd.errors.EmptyDataError:
        raise ParseError("empty file (header expected)", path=str(path))
    except (ValueError, pd.errors.ParserError) as e:
        raise ParseError(str(e), path=str(path)) from e
    if list(frame.columns) != columns:
        raise ParseError(f"expected header {','.join(columns)}", path=str(path), line=1)
    if frame.isnull().values.any():
        row = int(np.flatnonzero(frame.isnull().any(axis=1).to_numpy())[0])
        raise ParseError("missing field", path=str(path), line=row + 2)
    return frame


def load_map(path: PathLike) -> LandmarkMap:
    frame = _read_table(path, MAP_COLUMNS)
    landmarks = [
        Landmark(
            x=float(row.x_m), y=float(row.y_m), n_obs=int(row.n_obs),
            t_first=int(row.t_first_us), t_last=int(row.t_last_us),
            t_ref=(int(row.t_first_us) + int(row.t_last_us)) // 2, track_id=int(row.id),
        )
        for row in frame.itertuples(index=False)
    ]
    return LandmarkMap(landmarks=landmarks)


def write_ground_truth(poles: Iterable[GroundTruthPole], path: PathLike) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    frame = pd.DataFrame([[p.id, p.x, p.y] for p in poles], columns=GT_COLUMNS)
    frame.to_csv(path, index=False, lineterminator="\n")
    return path


def load_ground_truth(path: PathLike) -> List[GroundTruthPole]:
    frame = _read_table(path, GT_COLUMNS)
    return [GroundTruthPole(id=int(r.id), x=float(r.x_m), y=float(r.y_m)) for r in frame.itertuples(index=False)]


def write_eval_report(report: EvalReport, path: PathLike) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text("\n".join(report.as_lines()) + "\n", encoding="utf-8")
    return path
