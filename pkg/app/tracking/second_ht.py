# ===================================================================================
#   tracking/second_ht.py: 2차 허프 변환 기반 시공간 추적기
# ===================================================================================
#
#   - 검출(Detection)의 (수평 위치 r, 시각 t)를 (x, τ) 평면의 점으로 보고,
#     극성별 (rho, phi) 누산기에 투표합니다. 등속 주행에서 한 구조물의 검출은
#     이 평면에서 직선을 이룹니다.
#   - τ = (t − origin)·time_bins / window_duration. 점은 window_duration이 지나면 만료되어
#     투표가 빠집니다. t − origin이 2·window_duration에 도달하면 origin을
#     (now − window_duration)으로 옮기고 살아있는 점의 투표를 다시 계산합니다.
#   - rho 범위는 x ∈ [0, x_extent], τ ∈ [0, 2·time_bins]의 꼭짓점을 phi 범위 전체에 대해
#     투영한 구간이며, rho_bins개의 같은 폭 bin으로 나눕니다.
#
#   **트랙 추출 (최대값 선택 후 제거 반복):**
#   1. 작업용 누산기 사본에서 최대 셀을 고릅니다 (track_threshold 미만이면 종료).
#   2. 그 직선에서 수평 거리 assoc_tolerance 이내의 점을 모으고, 최소제곱 직선으로
#      다시 맞춘 뒤 한 번 더 모읍니다.
#   3. 모은 점 중 가장 최근 점이 `now − finalize_gap`보다 최근이면 아직 진행 중인
#      트랙이므로 작업 사본에서만 제외합니다. 그렇지 않으면 점과 투표를 실제로 제거하고,
#      시간 길이가 min_track_span 이상이면 PolarityTrack으로 확정합니다.
#
#
from typing import Dict, List, Optional, Tuple

import numpy as np
from loguru import logger

from app.config import TrackerConfig
from app.errors import OrderError
from app.hough.models import Detection
from app.tracking.models import LineFit, PolarityTrack, SpatioTemporalPoint


class _PolaritySpace:
    """한 극성의 (phi, rho) 누산기와 살아있는 점들"""

    def __init__(self, n_phi: int, rho_bins: int):
        self.acc = np.zeros((n_phi, rho_bins), dtype=np.int32)
        # seq → (점, rho bin 행)
        self.points: Dict[int, Tuple[SpatioTemporalPoint, np.ndarray]] = {}

    def vote(self, bins: np.ndarray, sign: int, phi_index: np.ndarray):
        valid = bins >= 0
        self.acc[phi_index[valid], bins[valid]] += sign


class SpatioTemporalTracker:
    """극성별 2차 허프 누산기를 유지하며 검출을 트랙으로 묶습니다."""

    def __init__(self, cfg: TrackerConfig):
        self.cfg = cfg
        phi_lo, _ = cfg.phi_range
        self.phi_deg = phi_lo + cfg.phi_step * np.arange(cfg.n_phi)
        phi = np.deg2rad(self.phi_deg)
        self.cos_phi = np.cos(phi)
        self.sin_phi = np.sin(phi)
        self._phi_index = np.arange(cfg.n_phi)

        corners_x = np.array([0.0, 0.0, cfg.x_extent, cfg.x_extent])
        corners_tau = np.array([0.0, 2.0 * cfg.time_bins, 0.0, 2.0 * cfg.time_bins])
        rho = np.multiply.outer(corners_x, self.cos_phi) + np.multiply.outer(corners_tau, self.sin_phi)
        self.rho_lo = float(rho.min())
        self.rho_hi = float(rho.max())
        self.rho_width = (self.rho_hi - self.rho_lo) / cfg.rho_bins

        self.spaces = (_PolaritySpace(cfg.n_phi, cfg.rho_bins), _PolaritySpace(cfg.n_phi, cfg.rho_bins))
        self.origin: Optional[int] = None
        self.last_t: Optional[int] = None
        self.last_extract: Optional[int] = None
        self._seq = 0
        self.n_rebases = 0

    # --- 좌표 변환 ---
    def tau(self, t):
        return (np.asarray(t, dtype=np.float64) - self.origin) * (self.cfg.time_bins / self.cfg.window_duration)

    def rho_bins_for(self, xpos: float, t: int) -> np.ndarray:
        """점 하나의 phi별 rho bin (범위 밖은 −1)."""
        rho = xpos * self.cos_phi + float(self.tau(t)) * self.sin_phi
        bins = np.floor((rho - self.rho_lo) / self.rho_width).astype(np.int64)
        bins[(bins == self.cfg.rho_bins) & (rho <= self.rho_hi)] = self.cfg.rho_bins - 1
        bins[(bins < 0) | (bins >= self.cfg.rho_bins)] = -1
        return bins

    def rho_center(self, rho_bin: int) -> float:
        return self.rho_lo + (rho_bin + 0.5) * self.rho_width

    # --- 입력 ---
    def ingest_detection(self, d: Detection):
        """검출 하나를 극성에 맞는 누산기에 투표합니다. 시각이 역행하면 `OrderError`."""
        if self.last_t is not None and d.t < self.last_t:
            raise OrderError(f"Detection time regression: {d.t} < {self.last_t}")
        self.last_t = d.t
        if self.origin is None:
            self.origin = d.t
            self.last_extract = d.t
        self.expire(d.t)
        if d.t - self.origin >= 2 * self.cfg.window_duration:
            self._rebase(d.t)
        point = SpatioTemporalPoint(xpos=float(d.r), t=d.t, polarity=d.polarity)
        bins = self.rho_bins_for(point.xpos, point.t)
        space = self.spaces[point.polarity]
        space.vote(bins, +1, self._phi_index)
        space.points[self._seq] = (point, bins)
        self._seq += 1

    def expire(self, now: int):
        """window_duration보다 오래된 점을 제거하고 투표를 뺍니다."""
        horizon = now - self.cfg.window_duration
        for space in self.spaces:
            while space.points:
                seq = next(iter(space.points))
                point, bins = space.points[seq]
                if point.t >= horizon:
                    break
                space.vote(bins, -1, self._phi_index)
                del space.points[seq]

    def _rebase(self, now: int):
        self.origin = now - self.cfg.window_duration
        self.n_rebases += 1
        for space in self.spaces:
            space.acc.fill(0)
            for seq, (point, _) in list(space.points.items()):
                bins = self.rho_bins_for(point.xpos, point.t)
                space.points[seq] = (point, bins)
                space.vote(bins, +1, self._phi_index)

    # --- 검사/오라클용 ---
    def window_points(self, polarity: int) -> List[SpatioTemporalPoint]:
        return [point for point, _ in self.spaces[polarity].points.values()]

    def live_points(self, polarity: int) -> Tuple[np.ndarray, np.ndarray]:
        points = self.window_points(polarity)
        t = np.array([p.t for p in points], dtype=np.int64)
        x = np.array([p.xpos for p in points], dtype=np.float64)
        return t, x

    def accumulator(self, polarity: int) -> np.ndarray:
        return self.spaces[polarity].acc

    # --- 추출 ---
    def poll(self, now: int) -> List[PolarityTrack]:
        """extract_interval마다 한 번씩 `extract_tracks`를 수행합니다."""
        if self.last_extract is None or now - self.last_extract < self.cfg.extract_interval:
            return []
        self.last_extract = now
        return self.extract_tracks(now)

    def extract_tracks(self, now: int, finalize_all: bool = False) -> List[PolarityTrack]:
        """누산기 최대값을 반복적으로 골라 확정된 트랙을 추출합니다."""
        tracks: List[PolarityTrack] = []
        for polarity in (1, 0):
            tracks.extend(self._extract_polarity(polarity, now, finalize_all))
        tracks.sort(key=lambda tr: (tr.t_first, tr.polarity, float(tr.x[0])))
        return tracks

    def flush(self) -> List[PolarityTrack]:
        """스트림 종료 시 진행 중인 트랙까지 모두 확정합니다."""
        if self.last_t is None:
            return []
        return self.extract_tracks(self.last_t, finalize_all=True)

    def _extract_polarity(self, polarity: int, now: int, finalize_all: bool) -> List[PolarityTrack]:
        cfg = self.cfg
        space = self.spaces[polarity]
        if not space.points:
            return []
        seqs = list(space.points)
        records = list(space.points.values())
        t = np.array([point.t for point, _ in records], dtype=np.int64)
        x = np.array([point.xpos for point, _ in records], dtype=np.float64)
        bins = np.stack([b for _, b in records])
        tau = self.tau(t)
        work = space.acc.copy()
        consumed = np.zeros(len(seqs), dtype=bool)
        tracks: List[PolarityTrack] = []

        while True:
            best = int(np.argmax(work))
            phi_bin, rho_bin = divmod(best, cfg.rho_bins)
            if work[phi_bin, rho_bin] < cfg.track_threshold:
                break
            work[phi_bin, rho_bin] = 0

            rho = self.rho_center(rho_bin)
            x_line = (rho - tau * self.sin_phi[phi_bin]) / self.cos_phi[phi_bin]
            selected = ~consumed & (np.abs(x - x_line) <= cfg.assoc_tolerance)
            if selected.sum() >= 2:
                fit = LineFit.fit(t[selected], x[selected])
                selected = ~consumed & (np.abs(x - fit.x_at(t)) <= cfg.assoc_tolerance)
            if not selected.any():
                continue

            idx = np.flatnonzero(selected)
            sel_bins = bins[idx]
            valid = sel_bins >= 0
            np.add.at(work, (np.broadcast_to(self._phi_index, sel_bins.shape)[valid], sel_bins[valid]), -1)
            consumed[idx] = True

            if not finalize_all and int(t[idx].max()) > now - cfg.finalize_gap:
                continue

            for i in idx.tolist():
                space.vote(bins[i], -1, self._phi_index)
                del space.points[seqs[i]]

            ts, xs = t[idx], x[idx]
            span = int(ts[-1] - ts[0])
            if len(idx) < 2 or span < cfg.min_track_span:
                logger.debug(f"Dropped short line (polarity={polarity}, points={len(idx)}, span={span}us).")
                continue
            track = PolarityTrack(
                polarity=polarity,
                t=ts,
                x=xs,
                rho=rho,
                phi=float(self.phi_deg[phi_bin]),
                phi_bin=phi_bin,
                fit=LineFit.fit(ts, xs),
            )
            logger.debug(
                f"Polarity track: p={polarity} n={len(ts)} t=[{track.t_first}, {track.t_last}] "
                f"phi={track.phi:.0f}deg"
            )
            tracks.append(track)
        return tracks


def ingest_detection(tracker: SpatioTemporalTracker, d: Detection):
    tracker.ingest_detection(d)


def extract_tracks(tracker: SpatioTemporalTracker, now: int) -> List[PolarityTrack]:
    """
    `now` 기준으로 확정 가능한 트랙을 추출합니다. 최신 점이 `finalize_gap` 이내인 직선은 남겨 두므로,
    `finalize_gap=0`이면 `now` 시점에 모인 모든 직선을 즉시 확정합니다.
    """
    return tracker.extract_tracks(now)


def recount_accumulator(tracker: SpatioTemporalTracker, polarity: int) -> np.ndarray:
    """살아있는 점으로부터 누산기를 처음부터 다시 계산합니다 (검증용)."""
    acc = np.zeros_like(tracker.accumulator(polarity))
    t, x = tracker.live_points(polarity)
    for ti, xi in zip(t.tolist(), x.tolist()):
        bins = tracker.rho_bins_for(xi, ti)
        valid = bins >= 0
        acc[np.arange(len(bins))[valid], bins[valid]] += 1
    return acc
