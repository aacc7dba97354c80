# ===================================================================================
#   pipeline/runner.py: 전체 파이프라인 실행기
# ===================================================================================
#
#   이벤트 → 왜곡 보정 → 직선 검출(반복 NMS) → 2차 허프 추적 → 극성 짝짓기
#          → DLT 삼각측량 → 랜드마크 맵 누적
#
#   **실행 방식:**
#   - `run_pipeline`: 한 스레드에서 순차 실행.
#   - `run_pipeline_async`: 단계별 asyncio 태스크를 크기 제한 큐로 연결합니다.
#     검출 청크와 트랙별 삼각측량은 `asyncio.to_thread`로 워커 스레드에서 실행되고,
#     맵 누적은 트랙 id 순서로 수행되어 순차 실행과 결과가 같습니다.
#
#   트랙 단위 기하 실패(`TooShort`, `DegenerateGeometry`, `BehindCamera`, `OutOfRange`)는
#   예외를 전파하지 않고 거부 건수로 집계합니다.
#
#
import asyncio
from collections import Counter
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from loguru import logger

from app.config import PipelineConfig, TrackerConfig
from app.errors import BehindCamera, ConfigError, DegenerateGeometry, OutOfRange, PoleMapError, TooShort
from app.events.models import CameraIntrinsics, EventStream, PoseLog
from app.events.undistort import LutMethod, build_undistortion_lut, undistort_stream
from app.hough.detector import LineDetector
from app.hough.models import Detection
from app.mapping.dlt import triangulate
from app.mapping.landmark_map import accumulate_map
from app.mapping.models import Landmark, LandmarkMap
from app.tracking.models import PolarityTrack, Track
from app.tracking.pairing import TrackPairer
from app.tracking.second_ht import SpatioTemporalTracker

GEOMETRY_ERRORS = (TooShort, DegenerateGeometry, BehindCamera, OutOfRange)

Outcome = Union[Landmark, PoleMapError]


@dataclass
class PipelineResult:
    events_in: int
    events_used: int
    detections: List[Detection] = field(default_factory=list)
    polarity_tracks: List[PolarityTrack] = field(default_factory=list)
    tracks: List[Track] = field(default_factory=list)
    landmarks: List[Landmark] = field(default_factory=list)
    landmark_map: LandmarkMap = field(default_factory=LandmarkMap)
    rejected: Dict[str, int] = field(default_factory=dict)


def subsample_events(stream: EventStream, p: float, seed: int = 0) -> EventStream:
    """확률 p로 이벤트를 균일하게 버립니다. p = 0이면 그대로, p = 1이면 빈 스트림."""
    if not 0.0 <= p <= 1.0:
        raise ConfigError(f"subsample probability must be in [0, 1], got {p}")
    if p == 0.0 or not len(stream):
        return stream
    keep = np.random.default_rng(seed).random(len(stream)) >= p
    logger.info(f"Subsampling kept {int(keep.sum())}/{len(stream)} events (p={p}).")
    return stream.select(keep)


def prepare_events(
    stream: EventStream, intr: CameraIntrinsics, subsample: float = 0.0, seed: int = 0,
    lut_method: LutMethod = "forward",
) -> EventStream:
    stream.check_bounds(intr.width, intr.height)
    stream = subsample_events(stream, subsample, seed)
    lut = build_undistortion_lut(intr, lut_method)
    if lut.is_identity:
        return stream
    return undistort_stream(stream, lut)


class TrackingStage:
    """검출 묶음을 받아 2차 허프 추적과 극성 짝짓기를 수행합니다."""

    def __init__(self, cfg: TrackerConfig):
        self.tracker = SpatioTemporalTracker(cfg)
        self.pairer = TrackPairer(cfg)
        self.polarity_tracks: List[PolarityTrack] = []

    def feed(self, t: int, detections: Sequence[Detection]) -> List[Track]:
        for d in detections:
            self.tracker.ingest_detection(d)
        self._push(self.tracker.poll(t))
        return self.pairer.poll(t)

    def finish(self) -> List[Track]:
        self._push(self.tracker.flush())
        return self.pairer.flush()

    def _push(self, tracks: List[PolarityTrack]):
        if tracks:
            self.polarity_tracks.extend(tracks)
            self.pairer.push(tracks)


def triangulate_track(track: Track, poses: PoseLog, intr: CameraIntrinsics, cfg: PipelineConfig) -> Outcome:
    """트랙 하나를 삼각측량합니다. 기하 실패는 예외 객체를 그대로 반환합니다."""
    try:
        return triangulate(track, poses, intr, cfg.triangulation, cfg.extrinsic)
    except GEOMETRY_ERRORS as e:
        return e


def _assemble(
    result: PipelineResult, outcomes: List[Tuple[Track, Outcome]], cfg: PipelineConfig
) -> PipelineResult:
    rejected: Counter = Counter()
    landmarks = []
    for track, outcome in sorted(outcomes, key=lambda item: item[0].track_id):
        result.tracks.append(track)
        if isinstance(outcome, Landmark):
            landmarks.append(outcome)
        else:
            rejected[type(outcome).__name__] += 1
            logger.warning(f"Track {track.track_id} rejected: {outcome}")
    result.landmarks = landmarks
    result.rejected = dict(sorted(rejected.items()))
    result.landmark_map = accumulate_map(landmarks, cfg.triangulation.merge_radius)
    logger.info(
        f"Pipeline: {result.events_used}/{result.events_in} events → {len(result.detections)} detections → "
        f"{len(result.polarity_tracks)} polarity tracks → {len(result.tracks)} tracks → "
        f"{len(landmarks)} landmarks ({sum(rejected.values())} rejected) → {len(result.landmark_map)} map entries."
    )
    return result


def run_pipeline(
    events: EventStream,
    poses: PoseLog,
    intr: CameraIntrinsics,
    cfg: Optional[PipelineConfig] = None,
    subsample: float = 0.0,
    seed: int = 0,
) -> PipelineResult:
    """전체 파이프라인을 순차 실행합니다."""
    cfg = cfg or PipelineConfig()
    stream = prepare_events(events, intr, subsample, seed)
    result = PipelineResult(events_in=len(events), events_used=len(stream))

    detector = LineDetector(cfg.hough, intr.width, intr.height)
    stage = TrackingStage(cfg.tracker)
    tracks: List[Track] = []
    for e in stream:
        detections = detector.step(e)
        if detections:
            result.detections.extend(detections)
            tracks.extend(stage.feed(e.t, detections))
    tracks.extend(stage.finish())
    result.polarity_tracks = stage.polarity_tracks

    outcomes = [(track, triangulate_track(track, poses, intr, cfg)) for track in tracks]
    return _assemble(result, outcomes, cfg)


def _detect_chunk(detector: LineDetector, chunk: EventStream) -> List[Tuple[int, List[Detection]]]:
    batches = []
    for e in chunk:
        detections = detector.step(e)
        if detections:
            batches.append((e.t, detections))
    return batches


async def run_pipeline_async(
    events: EventStream,
    poses: PoseLog,
    intr: CameraIntrinsics,
    cfg: Optional[PipelineConfig] = None,
    subsample: float = 0.0,
    seed: int = 0,
    queue_size: int = 64,
    chunk_size: int = 4096,
    workers: int = 4,
) -> PipelineResult:
    """
    단계별 태스크로 파이프라인을 실행합니다. 결과는 `run_pipeline`과 동일합니다.

    :param queue_size: 단계 사이 큐의 최대 길이 (백프레셔)
    :param chunk_size: 검출 워커 스레드에 한 번에 넘기는 이벤트 수
    :param workers: 동시에 실행되는 삼각측량 스레드 수
    """
    cfg = cfg or PipelineConfig()
    stream = prepare_events(events, intr, subsample, seed)
    result = PipelineResult(events_in=len(events), events_used=len(stream))

    detection_queue: asyncio.Queue = asyncio.Queue(maxsize=queue_size)
    track_queue: asyncio.Queue = asyncio.Queue(maxsize=queue_size)
    stage = TrackingStage(cfg.tracker)

    async def detect():
        detector = LineDetector(cfg.hough, intr.width, intr.height)
        try:
            for start in range(0, len(stream), chunk_size):
                chunk = stream.select(slice(start, start + chunk_size))
                for batch in await asyncio.to_thread(_detect_chunk, detector, chunk):
                    await detection_queue.put(batch)
        finally:
            await detection_queue.put(None)

    async def track():
        try:
            while (item := await detection_queue.get()) is not None:
                t, detections = item
                result.detections.extend(detections)
                for tr in stage.feed(t, detections):
                    await track_queue.put(tr)
            for tr in stage.finish():
                await track_queue.put(tr)
        finally:
            await track_queue.put(None)

    async def solve():
        limit = asyncio.Semaphore(workers)

        async def one(tr: Track) -> Tuple[Track, Outcome]:
            async with limit:
                return tr, await asyncio.to_thread(triangulate_track, tr, poses, intr, cfg)

        pending = []
        while (tr := await track_queue.get()) is not None:
            pending.append(asyncio.create_task(one(tr)))
        return await asyncio.gather(*pending)

    _, _, outcomes = await asyncio.gather(detect(), track(), solve())
    result.polarity_tracks = stage.polarity_tracks
    return _assemble(result, list(outcomes), cfg)
