# ===================================================================================
#   pipeline/plots.py: SVG 산출물 (x–t 공간, 맵)
# ===================================================================================
#
#   - `plot_xt_space`: 극성별 검출 (시각, 수평 위치) 산점도와 추출된 트랙의 피팅 직선.
#   - `plot_map`: 주행 궤적, 랜드마크, GT 폴(거부 반경 원 포함).
#   - Agg 백엔드, 고정 해시 솔트, 날짜 메타데이터 없음 → 재실행 시 바이트 단위로 동일.
#
#
from pathlib import Path
from typing import Optional, Sequence, Union

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from app.config import HoughConfig  # noqa: E402
from app.events.models import PoseLog  # noqa: E402
from app.hough.models import Detection  # noqa: E402
from app.mapping.models import GroundTruthPole, LandmarkMap  # noqa: E402
from app.tracking.models import PolarityTrack  # noqa: E402

plt.rcParams["svg.hashsalt"] = "polemap"

PathLike = Union[str, Path]
_POLARITY_STYLE = {1: ("positive", "tab:red"), 0: ("negative", "tab:blue")}


def _save(fig, path: PathLike) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
    return path


def plot_xt_space(
    detections: Sequence[Detection],
    polarity_tracks: Sequence[PolarityTrack],
    cfg: HoughConfig,
    path: PathLike,
) -> Path:
    fig, axes = plt.subplots(2, 1, figsize=(10, 6), sharex=True)
    t_all = np.array([d.t for d in detections], dtype=np.float64) * 1e-6
    t_lo, t_hi = (float(t_all.min()), float(t_all.max())) if t_all.size else (0.0, 1.0)
    for ax, polarity in zip(axes, (1, 0)):
        name, color = _POLARITY_STYLE[polarity]
        own = [d for d in detections if d.polarity == polarity]
        if own:
            ax.scatter([d.t * 1e-6 for d in own], [d.r for d in own], s=1, color=color, alpha=0.4)
        for track in polarity_tracks:
            if track.polarity != polarity:
                continue
            ts = np.array([track.t_first, track.t_last], dtype=np.float64)
            ax.plot(ts * 1e-6, track.fit.x_at(ts), color="black", linewidth=0.8)
        ax.set_ylim(cfg.r_min, cfg.r_max)
        ax.set_xlim(t_lo, t_hi if t_hi > t_lo else t_lo + 1.0)
        ax.set_ylabel(f"{name} r [px]")
    axes[-1].set_xlabel("t [s]")
    return _save(fig, path)


def plot_map(
    lmap: LandmarkMap,
    path: PathLike,
    poses: Optional[PoseLog] = None,
    ground_truth: Sequence[GroundTruthPole] = (),
    reject_radius: float = 4.0,
) -> Path:
    fig, ax = plt.subplots(figsize=(10, 4))
    if poses is not None and len(poses):
        ax.plot(poses.x, poses.y, color="gray", linewidth=1.0, label="trajectory")
    for pole in ground_truth:
        ax.add_patch(plt.Circle((pole.x, pole.y), reject_radius, fill=False, color="tab:green", alpha=0.3))
    if ground_truth:
        ax.scatter([p.x for p in ground_truth], [p.y for p in ground_truth],
                   marker="o", facecolors="none", edgecolors="tab:green", label="ground truth")
    if len(lmap):
        ax.scatter([lm.x for lm in lmap], [lm.y for lm in lmap], marker="x", color="tab:red", label="landmarks")
    ax.set_aspect("equal", adjustable="datalim")
    ax.set_xlabel("x [m]")
    ax.set_ylabel("y [m]")
    if ax.get_legend_handles_labels()[0]:
        ax.legend(loc="upper right")
    return _save(fig, path)
