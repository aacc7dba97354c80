# ===================================================================================
#   mapping/evaluation.py: 그라운드 트루스 대비 맵 평가
# ===================================================================================
#
#   - 거리 오름차순으로 (랜드마크, GT) 쌍을 탐욕적으로 매칭합니다 (각각 한 번씩만 사용).
#     거부 반경(reject_radius, 기본 4 m)을 넘는 쌍은 매칭하지 않습니다.
#   - 매칭되지 않은 GT → FN, 매칭되지 않은 랜드마크 → FP.
#   - 매칭 오차는 랜드마크 t_ref 시각의 주행 방향(포즈 로그 heading)을 기준으로
#     주행 방향(longitudinal)과 횡방향(lateral) 성분으로 나누어 절댓값 평균을 보고합니다.
#     포즈 로그가 없으면 월드 x축을 주행 방향으로 사용합니다.
#
#
import math
from typing import Optional, Sequence

import numpy as np
from loguru import logger

from app.errors import EmptyInput
from app.events.models import PoseLog
from app.events.poses import interpolate_pose
from app.mapping.models import EvalReport, GroundTruthPole, LandmarkMap


def _heading_at(poses: Optional[PoseLog], t: int) -> float:
    if poses is None or not len(poses):
        return 0.0
    t = min(max(t, int(poses.t[0])), int(poses.t[-1]))
    return interpolate_pose(poses, t).theta


def restrict_ground_truth(gt: Sequence[GroundTruthPole], poses: PoseLog, max_range: float):
    """주행 궤적(포즈 위치)에서 max_range 이내의 GT 폴만 남깁니다."""
    if not len(poses):
        return list(gt)
    track_xy = np.column_stack([poses.x, poses.y])
    kept = []
    for pole in gt:
        d = np.hypot(track_xy[:, 0] - pole.x, track_xy[:, 1] - pole.y).min()
        if d <= max_range:
            kept.append(pole)
    return kept


def match_and_rmse(
    lmap: LandmarkMap,
    gt: Sequence[GroundTruthPole],
    reject_radius: float = 4.0,
    poses: Optional[PoseLog] = None,
    gt_max_range: Optional[float] = None,
) -> EvalReport:
    """최근접 탐욕 매칭으로 TP/FN/FP와 RMSE, 주행/횡방향 평균 오차를 계산합니다."""
    if reject_radius <= 0:
        raise ValueError("reject_radius must be positive")
    landmarks = list(lmap.landmarks)
    gt = list(gt)
    if gt_max_range is not None and poses is not None:
        gt = restrict_ground_truth(gt, poses, gt_max_range)
    if not landmarks:
        raise EmptyInput("Landmark map is empty")
    if not gt:
        raise EmptyInput("Ground-truth map is empty")

    candidates = []
    for i, lm in enumerate(landmarks):
        for j, pole in enumerate(gt):
            d = math.hypot(lm.x - pole.x, lm.y - pole.y)
            if d <= reject_radius:
                candidates.append((d, lm.x, lm.y, pole.x, pole.y, i, j))
    candidates.sort()

    used_lm, used_gt = set(), set()
    errors = []
    longitudinal = []
    lateral = []
    for d, lx, ly, gx, gy, i, j in candidates:
        if i in used_lm or j in used_gt:
            continue
        used_lm.add(i)
        used_gt.add(j)
        ex, ey = lx - gx, ly - gy
        theta = _heading_at(poses, landmarks[i].t_ref)
        c, s = math.cos(theta), math.sin(theta)
        errors.append(ex * ex + ey * ey)
        longitudinal.append(abs(ex * c + ey * s))
        lateral.append(abs(-ex * s + ey * c))

    tp = len(errors)
    report = EvalReport(
        ground_truth=len(gt),
        true_positives=tp,
        false_negatives=len(gt) - tp,
        false_positives=len(landmarks) - tp,
        rmse=math.sqrt(sum(errors) / tp) if tp else math.nan,
        longitudinal_mean=sum(longitudinal) / tp if tp else math.nan,
        lateral_mean=sum(lateral) / tp if tp else math.nan,
    )
    logger.info(
        f"Evaluation: TP={report.true_positives} FN={report.false_negatives} "
        f"FP={report.false_positives} RMSE={report.rmse:.4f} m"
    )
    return report
