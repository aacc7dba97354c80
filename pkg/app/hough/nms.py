# ===================================================================================
#   hough/nms.py: 반복(Iterative) 비최대 억제와 전체 재계산 오라클
# ===================================================================================
#
#   - 전역 최대값 G_t = 로컬 최대값 L_t 전체를 (votes 내림차순, θ 오름차순, r 오름차순)으로
#     정렬한 뒤, 이미 채택된 최대값과 억제 반경 이내에 있지 않은 것만 탐욕적으로 채택한 결과.
#   - 후보 집합 C가 G_t ⊆ C ⊆ L_t 이면 C에 대한 탐욕 채택 결과는 G_t와 정확히 같습니다.
#     반복 NMS는 이 조건을 만족하는 작은 C를 이벤트마다 국소적으로 만듭니다.
#
#   **Phase 1 (후보 생성):**
#   - 이전 전역 최대값 중 여전히 로컬 최대값인 것.
#   - 감소(P−)했거나 로컬 최대값 지위를 잃은 이전 전역 최대값 → 그 주변 원판을 다시 열어
#     원판 안의 로컬 최대값을 모두 추가.
#   - 증가(P+)한 셀 중 새로 로컬 최대값이 된 것.
#   - 감소한 셀의 값이 threshold−1 이상이면, 그 8-이웃 중 로컬 최대값이 된 것
#     (이웃이 감소하여 막혀 있던 동률이 풀린 경우).
#
#   **Phase 2 (억제 반복):**
#   - 후보를 정렬해 탐욕 채택합니다. 억제된 후보 중 이전 전역 최대값이 있으면, 그 셀이
#     억제하던 원판을 다시 열어 후보를 추가하고 반복합니다. 더 이상 없으면 종료합니다.
#
#
from typing import FrozenSet, List, Optional, Tuple

import numpy as np

from app.hough.models import CellUpdateSet, NmsStats
from app.hough.space import HoughSpace, HoughState
from app.utils.typing import Cell


def _greedy(space: HoughSpace, candidates: np.ndarray) -> Tuple[List[int], List[int]]:
    """후보를 결정적 순서로 정렬한 뒤 탐욕 채택합니다. (채택, 억제) 목록을 반환합니다."""
    votes = space.flat[candidates]
    # 평탄화 인덱스 오름차순 == (θ, r) 오름차순
    order = np.lexsort((candidates, -votes))
    accepted: List[int] = []
    suppressed: List[int] = []
    for f in candidates[order].tolist():
        for a in accepted:
            if space.within_radius(f, a):
                suppressed.append(f)
                break
        else:
            accepted.append(f)
    return accepted, suppressed


def full_nms_flat(space: HoughSpace) -> FrozenSet[int]:
    """전체 격자를 스캔하여 전역 최대값을 다시 계산합니다. O(NM)."""
    m, n = space.n_theta, space.n_r
    padded = space.padded
    core = padded[1:-1, 1:-1]
    mask = core >= space.threshold
    for di in (-1, 0, 1):
        for dj in (-1, 0, 1):
            if di or dj:
                mask &= core > padded[1 + di:m + 1 + di, 1 + dj:n + 1 + dj]
    i, j = np.nonzero(mask)
    if not i.size:
        return frozenset()
    candidates = (i + 1) * space.stride + j + 1
    accepted, _ = _greedy(space, candidates)
    return frozenset(accepted)


def iterative_nms_flat(
    space: HoughSpace,
    plus: np.ndarray,
    minus: np.ndarray,
    stats: Optional[NmsStats] = None,
) -> FrozenSet[int]:
    """누산기 갱신(plus/minus)에 영향받은 영역만 검사하여 전역 최대값을 갱신합니다."""
    prev = space.maxima
    if not len(plus) and not len(minus):
        if stats is not None:
            stats.record(0)
        return prev

    threshold = space.threshold
    flat = space.flat
    touched = 0

    # --- Phase 1 ---
    candidates = set()
    reopen = set()
    if prev:
        prev_arr = np.fromiter(prev, dtype=np.int64, count=len(prev))
        still_max = space.local_max_mask(prev_arr)
        touched += len(prev_arr)
        minus_set = set(minus.tolist())
        for f, ok in zip(prev_arr.tolist(), still_max.tolist()):
            if ok:
                candidates.add(f)
            if not ok or f in minus_set:
                reopen.add(f)

    hot_plus = plus[flat[plus] >= threshold]
    if len(hot_plus):
        touched += len(hot_plus)
        for f in hot_plus[space.local_max_mask(hot_plus)].tolist():
            if f not in prev:
                candidates.add(f)

    hot_minus = minus[flat[minus] >= threshold - 1]
    if len(hot_minus):
        around = np.unique((hot_minus[:, None] + space.neighbour_offsets).ravel())
        # 테두리 셀은 제외 (테두리는 항상 0이라 검사할 필요가 없음)
        row, col = np.divmod(around, space.stride)
        around = around[(row >= 1) & (row <= space.n_theta) & (col >= 1) & (col <= space.n_r)]
        touched += len(around)
        candidates.update(around[space.local_max_mask(around)].tolist())

    reopened = set()
    for g in reopen:
        touched += _open_disc(space, g, candidates)
        reopened.add(g)

    if not reopened and len(candidates) == len(prev) and candidates == prev:
        if stats is not None:
            stats.record(touched)
        return prev

    # --- Phase 2 ---
    while True:
        if not candidates:
            accepted: List[int] = []
            break
        accepted, suppressed = _greedy(space, np.fromiter(candidates, dtype=np.int64, count=len(candidates)))
        cascade = [f for f in suppressed if f in prev and f not in reopened]
        if not cascade:
            break
        for g in cascade:
            touched += _open_disc(space, g, candidates)
            reopened.add(g)

    if stats is not None:
        stats.record(touched, len(reopened))
    return frozenset(accepted)


def _open_disc(space: HoughSpace, center: int, candidates: set) -> int:
    cells = space.disc(center)
    candidates.update(cells[space.local_max_mask(cells)].tolist())
    return len(cells)


def iterative_nms(state: HoughState, updates: CellUpdateSet, stats: Optional[NmsStats] = None) -> FrozenSet[Cell]:
    """
    갱신된 누산기에 대해 반복 NMS를 수행하고, 해당 극성의 전역 최대값 집합을 교체합니다.
    `state`의 누산기는 이미 `updates`를 반영하고 있어야 합니다.
    """
    space = state.spaces[updates.polarity]
    space.maxima = iterative_nms_flat(space, updates.plus, updates.minus, stats)
    return space.to_cells(space.maxima)


def full_nms_oracle(state: HoughState, polarity: int) -> FrozenSet[Cell]:
    """현재 누산기 전체를 스캔하여 전역 최대값을 계산합니다 (상태는 바꾸지 않음)."""
    space = state.spaces[polarity]
    return space.to_cells(full_nms_flat(space))
