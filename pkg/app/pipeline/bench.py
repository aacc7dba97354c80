# ===================================================================================
#   pipeline/bench.py: 반복 NMS vs 전체 NMS 벤치마크
# ===================================================================================
#
#   - 같은 이벤트 스트림을 두 개의 독립된 허프 상태에 동시에(lockstep) 적용합니다.
#       iterative: 누산기 갱신 + 반복 NMS
#       full:      누산기 갱신 + 전체 그리드 NMS (오라클)
#   - 이벤트마다 두 최대값 집합이 다르면 즉시 `EquivalenceFailure`(이벤트 번호 포함).
#   - 처리 시간은 단조 시계(`perf_counter_ns`)로 이벤트 단위 측정합니다.
#
#   **보고 항목 (`BenchReport`):**
#   - 변형별 이벤트당 처리 시간 평균/최대/표준편차 (µs)
#   - 입력 이벤트율 통계: EVENT_ARRAY_US(33 ms) 배열 단위의 events/s 평균/최대/표준편차
#   - 실시간 계수 = 평균 처리 시간 × 평균 이벤트율 (< 1 이면 실시간 처리 가능)
#   - 지연된 배열 비율: 배열 하나의 처리 시간 합이 배열 길이를 넘는 비율
#
#
import math
import time
from pathlib import Path
from typing import Optional, Union

import numpy as np
import orjson
from loguru import logger
from pydantic import BaseModel, Field

from app.config import HoughConfig, settings
from app.errors import EquivalenceFailure
from app.events.models import EventStream
from app.hough.models import NmsStats
from app.hough.nms import full_nms_flat, iterative_nms_flat
from app.hough.space import HoughState


class TimingStats(BaseModel):
    mean_us: float = 0.0
    max_us: float = 0.0
    std_us: float = 0.0
    real_time_factor: float = 0.0
    delayed_arrays: float = Field(0.0, description="처리 시간이 배열 길이를 넘은 배열 비율")

    @classmethod
    def from_samples(cls, ns: np.ndarray, array_index: np.ndarray, n_arrays: int,
                     array_us: int, mean_rate: float) -> "TimingStats":
        if not ns.size:
            return cls()
        us = ns / 1000.0
        per_array = np.bincount(array_index, weights=us, minlength=n_arrays)
        return cls(
            mean_us=float(us.mean()),
            max_us=float(us.max()),
            std_us=float(us.std()),
            real_time_factor=float(us.mean() * 1e-6 * mean_rate),
            delayed_arrays=float((per_array > array_us).mean()),
        )


class RateStats(BaseModel):
    mean: float = 0.0
    max: float = 0.0
    std: float = 0.0


class BenchReport(BaseModel):
    events: int = 0
    arrays: int = 0
    array_us: int = 33_000
    iterative: TimingStats = TimingStats()
    full: TimingStats = TimingStats()
    event_rate: RateStats = RateStats()
    speedup: float = Field(math.nan, description="full 평균 / iterative 평균")
    touched_fraction: float = Field(0.0, description="이벤트당 검사 셀 수 / 전체 셀 수")
    equivalence_failures: int = 0

    def to_json(self) -> bytes:
        return orjson.dumps(self.model_dump(), option=orjson.OPT_INDENT_2 | orjson.OPT_SORT_KEYS)

    def write(self, path: Union[str, Path]) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_bytes(self.to_json() + b"\n")
        return path

    def summary_lines(self):
        return [
            f"events={self.events} arrays={self.arrays}",
            f"event_rate mean={self.event_rate.mean:.0f}/s max={self.event_rate.max:.0f}/s std={self.event_rate.std:.0f}/s",
            f"iterative mean={self.iterative.mean_us:.3f}us max={self.iterative.max_us:.3f}us "
            f"std={self.iterative.std_us:.3f}us rtf={self.iterative.real_time_factor:.3f} "
            f"delayed={self.iterative.delayed_arrays:.3%}",
            f"full      mean={self.full.mean_us:.3f}us max={self.full.max_us:.3f}us "
            f"std={self.full.std_us:.3f}us rtf={self.full.real_time_factor:.3f} "
            f"delayed={self.full.delayed_arrays:.3%}",
            f"speedup={self.speedup:.2f}x touched_fraction={self.touched_fraction:.4f}",
        ]


def run_bench(
    stream: EventStream, cfg: HoughConfig, width: int, height: int, array_us: Optional[int] = None
) -> BenchReport:
    """두 NMS 변형을 lockstep으로 실행하여 동등성을 확인하고 처리 시간을 보고합니다."""
    array_us = array_us or settings.EVENT_ARRAY_US
    n = len(stream)
    if not n:
        logger.info("Bench: empty stream.")
        return BenchReport(array_us=array_us)

    iterative_state = HoughState(cfg, width, height)
    full_state = HoughState(cfg, width, height)
    stats = NmsStats(grid_cells=cfg.n_theta * cfg.n_r)
    t_iterative = np.empty(n, dtype=np.int64)
    t_full = np.empty(n, dtype=np.int64)
    clock = time.perf_counter_ns

    for i, e in enumerate(stream):
        space = iterative_state.spaces[e.p]
        start = clock()
        plus, minus = space.push(e.x, e.y)
        space.maxima = iterative_nms_flat(space, plus, minus, stats)
        t_iterative[i] = clock() - start

        reference = full_state.spaces[e.p]
        start = clock()
        reference.push(e.x, e.y)
        reference.maxima = full_nms_flat(reference)
        t_full[i] = clock() - start

        if space.maxima != reference.maxima:
            raise EquivalenceFailure(i, space.to_cells(space.maxima), reference.to_cells(reference.maxima))

    array_index = (stream.t - stream.t[0]) // array_us
    counts = np.bincount(array_index)
    rates = counts / (array_us * 1e-6)
    mean_rate = float(rates.mean())
    n_arrays = len(counts)

    iterative = TimingStats.from_samples(t_iterative, array_index, n_arrays, array_us, mean_rate)
    full = TimingStats.from_samples(t_full, array_index, n_arrays, array_us, mean_rate)
    report = BenchReport(
        events=n,
        arrays=n_arrays,
        array_us=array_us,
        iterative=iterative,
        full=full,
        event_rate=RateStats(mean=mean_rate, max=float(rates.max()), std=float(rates.std())),
        speedup=full.mean_us / iterative.mean_us if iterative.mean_us > 0 else math.nan,
        touched_fraction=stats.touched_fraction(),
    )
    for line in report.summary_lines():
        logger.info(f"Bench: {line}")
    return report
