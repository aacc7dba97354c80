# ===================================================================================
#   pipeline/outputs.py: 중간 산출물(검출, 트랙) CSV 입출력
# ===================================================================================
#
#   - detections.csv: `t_us,r_px,theta_deg,polarity,votes`
#   - tracks.csv:     `track_id,t_us,xpos_px` (트랙 샘플 하나당 한 행)
#   - 모든 산출물은 자기 자신의 로더로 다시 읽을 수 있어야 합니다.
#
#
from pathlib import Path
from typing import List, Sequence, Union

import numpy as np
import pandas as pd

from app.errors import ParseError
from app.hough.models import Detection
from app.tracking.models import Track

PathLike = Union[str, Path]

DETECTION_COLUMNS = ["t_us", "r_px", "theta_deg", "polarity", "votes"]
TRACK_COLUMNS = ["track_id", "t_us", "xpos_px"]


def write_detections(detections: Sequence[Detection], path: PathLike) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    frame = pd.DataFrame(list(detections), columns=["t", "r", "theta", "polarity", "votes"])
    frame.columns = DETECTION_COLUMNS
    frame.to_csv(path, index=False, lineterminator="\n", float_format="%.6f")
    return path


def write_tracks(tracks: Sequence[Track], path: PathLike) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    if tracks:
        frame = pd.DataFrame({
            "track_id": np.concatenate([np.full(len(tr), tr.track_id) for tr in tracks]),
            "t_us": np.concatenate([np.asarray(tr.t, dtype=np.int64) for tr in tracks]),
            "xpos_px": np.concatenate([np.asarray(tr.x, dtype=np.float64) for tr in tracks]),
        })
    else:
        frame = pd.DataFrame(columns=TRACK_COLUMNS)
    frame.to_csv(path, index=False, lineterminator="\n", float_format="%.6f")
    return path


def _read(path: PathLike, columns: List[str]) -> pd.DataFrame:
    path = Path(path)
    if not path.is_file():
        raise ParseError("file not found", path=str(path))
    try:
        frame = pd.read_csv(path)
    except (ValueError, pd.errors.ParserError, pd.errors.EmptyDataError) as e:
        raise ParseError(str(e), path=str(path)) from e
    if list(frame.columns) != columns:
        raise ParseError(f"expected header {','.join(columns)}", path=str(path), line=1)
    return frame


def load_detections(path: PathLike) -> List[Detection]:
    frame = _read(path, DETECTION_COLUMNS)
    return [
        Detection(int(row.t_us), int(row.r_px), float(row.theta_deg), int(row.polarity), int(row.votes))
        for row in frame.itertuples(index=False)
    ]


def load_tracks(path: PathLike) -> List[Track]:
    frame = _read(path, TRACK_COLUMNS)
    tracks = []
    for track_id, group in frame.groupby("track_id", sort=True):
        tracks.append(Track(
            track_id=int(track_id),
            t=group["t_us"].to_numpy(dtype=np.int64),
            x=group["xpos_px"].to_numpy(dtype=np.float64),
        ))
    return tracks
