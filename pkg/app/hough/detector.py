# ===================================================================================
#   hough/detector.py: 이벤트 단위 직선 검출기
# ===================================================================================
#
#   - `detect_step`: 이벤트 하나를 누산기에 반영하고 반복 NMS를 수행합니다.
#     전역 최대값 집합은 이벤트마다 갱신되지만, 검출(Detection)은 해당 극성의
#     이벤트 `emit_stride`개마다 한 번씩 방출됩니다.
#   - `LineDetector`: 스트림 전체에 `detect_step`을 적용하는 래퍼.
#     `keep_history=True`이면 이벤트별 최대값 이력을 함께 기록합니다.
#
#
from typing import Iterable, List, Optional, Tuple

from loguru import logger

from app.config import HoughConfig
from app.hough.models import Detection, NmsStats
from app.hough.nms import iterative_nms_flat
from app.hough.space import HoughSpace, HoughState, theta_grid_deg
from app.utils.typing import Cell, Event


def _emit(space: HoughSpace, t: int, polarity: int, thetas) -> List[Detection]:
    detections = []
    for f in space.maxima:
        i, j = space.to_cell(f)
        detections.append(Detection(t, space.cfg.r_min + j, float(thetas[i]), polarity, int(space.flat[f])))
    detections.sort(key=lambda d: (d.r, d.theta))
    return detections


def detect_step(state: HoughState, e: Event, stats: Optional[NmsStats] = None) -> List[Detection]:
    """이벤트 하나를 처리하고, 방출 주기이면 해당 극성의 현재 최대값을 Detection으로 반환합니다."""
    space = state.spaces[e.p]
    plus, minus = space.push(e.x, e.y)
    space.maxima = iterative_nms_flat(space, plus, minus, stats)
    if space.n_events % state.cfg.emit_stride:
        return []
    return _emit(space, e.t, e.p, state.theta_deg)


class LineDetector:
    """이벤트 스트림 → Detection 목록"""

    def __init__(self, cfg: HoughConfig, width: int, height: int, keep_history: bool = False):
        self.cfg = cfg
        self.state = HoughState(cfg, width, height)
        self.stats = NmsStats(grid_cells=cfg.n_theta * cfg.n_r)
        self.keep_history = keep_history
        self.history: List[Tuple[int, int, frozenset]] = []

    def step(self, e: Event) -> List[Detection]:
        detections = detect_step(self.state, e, self.stats)
        if self.keep_history:
            space = self.state.spaces[e.p]
            self.history.append((e.t, e.p, space.to_cells(space.maxima)))
        return detections

    def run(self, events: Iterable[Event]) -> List[Detection]:
        detections: List[Detection] = []
        for e in events:
            detections.extend(self.step(e))
        logger.info(
            f"Line detection: {self.stats.events} events → {len(detections)} detections "
            f"(mean touched cells/event {self.stats.mean_touched:.1f})."
        )
        return detections

    def maxima(self, polarity: int) -> frozenset:
        return self.state.maxima(polarity)

    def history_detections(self, polarity: int) -> List[Tuple[int, frozenset]]:
        """이벤트별 최대값 이력 중 한 극성만 골라냅니다 (`keep_history=True` 필요)."""
        return [(t, cells) for t, p, cells in self.history if p == polarity]
