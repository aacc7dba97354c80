# ===================================================================================
#   mapping/dlt.py: 2D DLT 삼각측량
# ===================================================================================
#
#   - 트랙 샘플 i (시각 t_i, 수평 위치 D_i)마다 정규화 좌표 s_i = (D_i − u0)/αx 를 구하고,
#     t_i에서 보간한 카메라 포즈의 world→camera 행렬 P_i (2×3)로 한 행을 만듭니다.
#         A[i] = s_i · P_i[1] − P_i[0]
#   - 동차 좌표 X는 A·X = 0 의 최소제곱 해, 즉 최소 특이값의 오른쪽 특이벡터입니다.
#     세 번째 성분으로 나누어 정규화합니다.
#
#   **거부 조건:**
#   - 샘플 2개 미만 → `TooShort`
#   - 랭크 < 2 또는 세 번째 성분이 1e−9 미만 (무한원점) → `DegenerateGeometry`
#   - 과반수 샘플에서 깊이가 min_depth 미만 (카메라 뒤, 지나가는 차량 등) → `BehindCamera`
#
#
from typing import Optional, Tuple

import numpy as np

from app.config import ExtrinsicConfig, TriangulationConfig
from app.errors import BehindCamera, DegenerateGeometry, TooShort
from app.events.models import CameraIntrinsics, PoseLog
from app.events.poses import compose_poses, interpolate_poses, world_to_camera_stack
from app.mapping.models import Landmark
from app.tracking.models import Track
from app.utils.math import round_half_up

RANK_TOLERANCE = 1e-12
INFINITY_TOLERANCE = 1e-9


def sample_indices(k: int, max_samples: int) -> np.ndarray:
    """k개 샘플 중 최대 max_samples개를 균등 간격으로 고릅니다 (양 끝 포함)."""
    if k <= max_samples:
        return np.arange(k)
    return np.unique(round_half_up(np.linspace(0, k - 1, max_samples)))


def camera_matrices(
    poses: PoseLog, ts: np.ndarray, extrinsic: Optional[ExtrinsicConfig] = None
) -> np.ndarray:
    """시각 ts의 (k, 2, 3) world→camera 행렬. 범위 밖이면 `OutOfRange`."""
    vehicle = interpolate_poses(poses, ts)
    if extrinsic is not None:
        vehicle = compose_poses(vehicle, extrinsic.ext_x, extrinsic.ext_y, extrinsic.ext_theta)
    return world_to_camera_stack(vehicle)


def build_dlt_matrix(
    track: Track,
    poses: PoseLog,
    intr: CameraIntrinsics,
    max_samples: int = 50,
    extrinsic: Optional[ExtrinsicConfig] = None,
) -> Tuple[np.ndarray, np.ndarray]:
    """
    트랙으로부터 k×3 DLT 행렬 A를 만듭니다.

    :return: (A, P). P는 사용된 샘플의 (k, 2, 3) world→camera 행렬
    """
    if len(track.t) < 2:
        raise TooShort(f"Track {track.track_id} has {len(track.t)} sample(s); at least 2 required")
    idx = sample_indices(len(track.t), max_samples)
    ts = np.asarray(track.t)[idx]
    s = (np.asarray(track.x, dtype=np.float64)[idx] - intr.u0) / intr.alpha_x
    P = camera_matrices(poses, ts, extrinsic)
    A = s[:, None] * P[:, 1, :] - P[:, 0, :]
    return A, P


def triangulate(
    track: Track,
    poses: PoseLog,
    intr: CameraIntrinsics,
    cfg: TriangulationConfig = TriangulationConfig(),
    extrinsic: Optional[ExtrinsicConfig] = None,
) -> Landmark:
    """트랙 하나를 삼각측량하여 랜드마크를 반환합니다."""
    A, P = build_dlt_matrix(track, poses, intr, cfg.max_samples, extrinsic)
    _, S, Vt = np.linalg.svd(A, full_matrices=True)
    if len(S) < 2 or S[0] == 0.0 or S[1] <= RANK_TOLERANCE * S[0]:
        raise DegenerateGeometry(f"Track {track.track_id}: DLT matrix has rank < 2 (singular values {S})")
    X = Vt[-1]
    if abs(X[2]) < INFINITY_TOLERANCE:
        raise DegenerateGeometry(f"Track {track.track_id}: triangulated point at infinity")
    residual = float(np.linalg.norm(A @ X))
    X = X / X[2]

    depth = P[:, 1, :] @ X
    behind = (depth <= 0.0) | (depth < cfg.min_depth)
    if 2 * int(behind.sum()) > len(depth):
        raise BehindCamera(
            f"Track {track.track_id}: depth below {cfg.min_depth} m for {int(behind.sum())}/{len(depth)} samples"
        )

    return Landmark(
        x=float(X[0]),
        y=float(X[1]),
        n_obs=len(depth),
        t_first=track.t_first,
        t_last=track.t_last,
        residual=residual,
        t_ref=track.t_mid,
        track_id=track.track_id,
    )
