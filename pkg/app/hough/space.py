# ===================================================================================
#   hough/space.py: 슬라이딩 윈도우 반복 허프 공간
# ===================================================================================
#
#   - 극성별로 독립된 (θ, r) 누산기와 최근 `window_size`개 이벤트의 윈도우를 유지합니다.
#   - 새 이벤트가 들어오면 그 가설 셀(P+)을 1 증가시키고, 윈도우에서 밀려난
#     이벤트의 가설 셀(P−)을 1 감소시킵니다.
#
#   **누산기 배치:**
#   - 누산기는 (M+2)×(N+2) 배열 안에 0 테두리를 두고 저장합니다. 8-이웃 조회가
#     배열 밖으로 나가지 않으므로 격자 밖 이웃은 자동으로 0으로 취급됩니다.
#   - 셀은 평탄화 인덱스 `(θ+1)·(N+2) + (r+1)`로 다룹니다. 이 인덱스의 오름차순은
#     (θ bin, r bin) 사전식 순서와 같습니다.
#
#   **가설 셀 (직선 r = u·cosθ + v·sinθ):**
#   - θ bin마다 r을 `floor(r + 0.5)`로 반올림하고, [r_min, r_max] 밖이면 버립니다.
#   - 센서의 모든 픽셀에 대한 셀 목록을 한 번 계산해 두고 공유합니다.
#
#
from collections import deque
from functools import lru_cache
from typing import Deque, Dict, FrozenSet, List, Set, Tuple

import numpy as np

from app.config import HoughConfig
from app.hough.models import CellUpdateSet
from app.utils.typing import Cell, Event


def theta_grid_deg(cfg: HoughConfig) -> np.ndarray:
    return cfg.theta_min + cfg.theta_step * np.arange(cfg.n_theta)


@lru_cache(maxsize=None)
def _trig(cfg: HoughConfig) -> Tuple[np.ndarray, np.ndarray]:
    theta = np.deg2rad(theta_grid_deg(cfg))
    return np.cos(theta), np.sin(theta)


def _r_bins(u, v, cfg: HoughConfig) -> np.ndarray:
    """r bin 인덱스 (범위 밖은 −1). 마지막 축이 θ bin."""
    cos_t, sin_t = _trig(cfg)
    r = np.floor(np.multiply.outer(u, cos_t) + np.multiply.outer(v, sin_t) + 0.5).astype(np.int64)
    return np.where((r >= cfg.r_min) & (r <= cfg.r_max), r - cfg.r_min, -1)


def hypothesis_cells(u: int, v: int, cfg: HoughConfig) -> List[Cell]:
    """픽셀 (u, v)를 지나는 직선 가설 셀 목록 (θ bin당 최대 1개)."""
    r_bins = _r_bins(float(u), float(v), cfg)
    return [(i, int(r)) for i, r in enumerate(r_bins) if r >= 0]


class HypothesisTable:
    """센서 전체 픽셀의 가설 셀(평탄화 인덱스) 테이블."""

    def __init__(self, cfg: HoughConfig, width: int, height: int):
        self.cfg = cfg
        self.width = width
        self.height = height
        self.n_theta = cfg.n_theta
        self.n_r = cfg.n_r
        self.stride = self.n_r + 2
        ys, xs = np.mgrid[0:height, 0:width]
        r_bins = _r_bins(xs.astype(np.float64), ys.astype(np.float64), cfg)
        rows = (np.arange(self.n_theta) + 1) * self.stride
        self._flat = np.where(r_bins >= 0, rows + r_bins + 1, -1)
        self._cache: Dict[int, np.ndarray] = {}

    def cells(self, x: int, y: int) -> np.ndarray:
        key = y * self.width + x
        cells = self._cache.get(key)
        if cells is None:
            row = self._flat[y, x]
            cells = row[row >= 0]
            cells.setflags(write=False)
            self._cache[key] = cells
        return cells


@lru_cache(maxsize=8)
def hypothesis_table(cfg: HoughConfig, width: int, height: int) -> HypothesisTable:
    return HypothesisTable(cfg, width, height)


@lru_cache(maxsize=None)
def disc_offsets(radius: int, metric: str) -> Tuple[np.ndarray, np.ndarray]:
    """억제 거리 척도와 같은 모양의 (dθ, dr) 오프셋 (중심 포함)."""
    d = np.arange(-radius, radius + 1)
    di, dj = np.meshgrid(d, d, indexing="ij")
    if metric == "chebyshev":
        inside = np.ones(di.shape, dtype=bool)
    else:
        inside = di * di + dj * dj <= radius * radius
    return di[inside].ravel(), dj[inside].ravel()


class HoughSpace:
    """단일 극성의 누산기 + 이벤트 윈도우 + 현재 전역 최대값 집합."""

    def __init__(self, cfg: HoughConfig, table: HypothesisTable):
        self.cfg = cfg
        self.table = table
        self.n_theta = cfg.n_theta
        self.n_r = cfg.n_r
        self.stride = self.n_r + 2
        self.threshold = cfg.threshold
        self.radius = cfg.suppression_radius
        self.chebyshev = cfg.distance_metric == "chebyshev"
        self.padded = np.zeros((self.n_theta + 2, self.n_r + 2), dtype=np.int32)
        self.flat = self.padded.reshape(-1)
        s = self.stride
        self.neighbour_offsets = np.array([-s - 1, -s, -s + 1, -1, 1, s - 1, s, s + 1], dtype=np.int64)
        self.window: Deque[np.ndarray] = deque()
        self.maxima: FrozenSet[int] = frozenset()
        self.n_events = 0
        self._disc_i, self._disc_j = disc_offsets(self.radius, cfg.distance_metric)

    @property
    def accumulator(self) -> np.ndarray:
        """테두리를 뺀 (M, N) 누산기 뷰"""
        return self.padded[1:-1, 1:-1]

    # --- 셀 인덱스 변환 ---
    def to_flat(self, cell: Cell) -> int:
        return (cell[0] + 1) * self.stride + cell[1] + 1

    def to_cell(self, flat: int) -> Cell:
        return int(flat) // self.stride - 1, int(flat) % self.stride - 1

    def to_cells(self, flats) -> FrozenSet[Cell]:
        return frozenset(self.to_cell(f) for f in flats)

    def in_grid(self, cell: Cell) -> bool:
        return 0 <= cell[0] < self.n_theta and 0 <= cell[1] < self.n_r

    # --- 누산기 갱신 ---
    def push(self, x: int, y: int) -> Tuple[np.ndarray, np.ndarray]:
        """이벤트를 윈도우에 넣고 (plus, minus) 셀을 반환합니다. 누산기는 음수가 되지 않습니다."""
        plus = self.table.cells(x, y)
        self.window.append(plus)
        self.flat[plus] += 1
        if len(self.window) > self.cfg.window_size:
            minus = self.window.popleft()
            self.flat[minus] -= 1
        else:
            minus = _EMPTY
        self.n_events += 1
        return plus, minus

    # --- 로컬 최대값 검사 ---
    def local_max_mask(self, flats: np.ndarray) -> np.ndarray:
        """셀 배열에 대해 (votes ≥ threshold) & (8-이웃보다 엄격히 큼)을 한 번에 계산합니다."""
        values = self.flat[flats]
        neighbours = self.flat[flats[:, None] + self.neighbour_offsets]
        return (values >= self.threshold) & (values[:, None] > neighbours).all(axis=1)

    def disc(self, center: int) -> np.ndarray:
        """중심 셀 주위 억제 반경 안의 격자 내 셀들 (평탄화 인덱스)."""
        ci, cj = self.to_cell(center)
        i = ci + self._disc_i
        j = cj + self._disc_j
        inside = (i >= 0) & (i < self.n_theta) & (j >= 0) & (j < self.n_r)
        return (i[inside] + 1) * self.stride + j[inside] + 1

    def within_radius(self, a: int, b: int) -> bool:
        ai, aj = divmod(a, self.stride)
        bi, bj = divmod(b, self.stride)
        di, dj = ai - bi, aj - bj
        if self.chebyshev:
            return max(abs(di), abs(dj)) <= self.radius
        return di * di + dj * dj <= self.radius * self.radius

    def reset(self):
        self.padded.fill(0)
        self.window.clear()
        self.maxima = frozenset()
        self.n_events = 0


_EMPTY = np.zeros(0, dtype=np.int64)
_EMPTY.setflags(write=False)


class HoughState:
    """극성별 허프 공간 두 개 (0 = 음, 1 = 양). 가설 테이블은 공유합니다."""

    def __init__(self, cfg: HoughConfig, width: int, height: int):
        self.cfg = cfg
        self.table = hypothesis_table(cfg, width, height)
        self.spaces = (HoughSpace(cfg, self.table), HoughSpace(cfg, self.table))
        self.theta_deg = theta_grid_deg(cfg).tolist()

    def space(self, polarity: int) -> HoughSpace:
        return self.spaces[polarity]

    def maxima(self, polarity: int) -> FrozenSet[Cell]:
        space = self.spaces[polarity]
        return space.to_cells(space.maxima)

    def votes(self, polarity: int, cell: Cell) -> int:
        space = self.spaces[polarity]
        return int(space.flat[space.to_flat(cell)])


def apply_event(state: HoughState, e: Event) -> CellUpdateSet:
    """이벤트를 극성에 맞는 윈도우에 넣고 누산기를 갱신합니다."""
    space = state.spaces[e.p]
    plus, minus = space.push(e.x, e.y)
    return CellUpdateSet(e.p, plus, minus, space.stride)


def is_local_maximum(state: HoughState, polarity: int, cell: Cell) -> bool:
    """votes ≥ threshold 이고 8-이웃 모두보다 엄격히 크면 True (격자 밖 이웃은 0)."""
    space = state.spaces[polarity]
    return bool(space.local_max_mask(np.array([space.to_flat(cell)]))[0])


def local_maxima_in_radius(state: HoughState, polarity: int, center: Cell, radius: int) -> Set[Cell]:
    """중심 주위 반경 `radius`(bin 단위, 설정된 거리 척도) 안의 로컬 최대값만 찾습니다."""
    space = state.spaces[polarity]
    di, dj = disc_offsets(radius, state.cfg.distance_metric)
    i = center[0] + di
    j = center[1] + dj
    inside = (i >= 0) & (i < space.n_theta) & (j >= 0) & (j < space.n_r)
    flats = (i[inside] + 1) * space.stride + j[inside] + 1
    return set(space.to_cells(flats[space.local_max_mask(flats)]))
