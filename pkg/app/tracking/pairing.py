# ===================================================================================
#   tracking/pairing.py: 양/음 극성 트랙 짝짓기
# ===================================================================================
#
#   - 어두운 폴이 밝은 배경을 지나가면 두 가장자리에서 각각 음/양 극성 트랙이 생깁니다.
#     짝이 없는 트랙(노이즈, 큰 구조물의 한쪽 경계 등)은 버립니다.
#   - 양 트랙을 t_first 순서로 처리하며, 아직 짝이 없는 음 트랙 중
#     |Δphi bin| ≤ pair_max_dphi 이고 겹치는 시간 구간의 평균 |Δx| ≤ pair_max_dx 인
#     가장 가까운 것을 고릅니다.
#   - 짝지은 트랙의 샘플은 두 직선 피팅의 중점이며, 샘플 수가 더 많은 트랙의
#     (중복 제거된) 시각에서 계산합니다. [0, frame_width) 밖의 샘플은 버립니다.
#
#   **TrackPairer:**
#   - 스트리밍용 래퍼. 추출된 극성 트랙을 모아두었다가 짝이 생기는 즉시 Track을 내보내고,
#     끝난 지 window_duration이 지나도 짝이 없는 트랙은 버립니다.
#
#
import math
from typing import List, Optional, Sequence, Tuple

import numpy as np
from loguru import logger

from app.config import TrackerConfig
from app.tracking.models import PolarityTrack, Track


def _mean_dx(pos: PolarityTrack, neg: PolarityTrack) -> Optional[float]:
    lo = max(pos.t_first, neg.t_first)
    hi = min(pos.t_last, neg.t_last)
    if lo > hi:
        return None
    longer = pos if len(pos) >= len(neg) else neg
    ts = np.unique(longer.t)
    ts = ts[(ts >= lo) & (ts <= hi)]
    if not ts.size:
        ts = np.array([lo, hi])
    return float(np.mean(np.abs(pos.fit.x_at(ts) - neg.fit.x_at(ts))))


def match_tracks(
    pos: Sequence[PolarityTrack], neg: Sequence[PolarityTrack], cfg: TrackerConfig
) -> List[Tuple[PolarityTrack, PolarityTrack]]:
    """탐욕적 최근접 짝짓기. 결과는 양 트랙의 처리 순서를 따릅니다."""
    order = sorted(range(len(pos)), key=lambda i: (pos[i].t_first, pos[i].t_last, float(pos[i].x[0])))
    used = [False] * len(neg)
    pairs = []
    for i in order:
        p = pos[i]
        best, best_dx = None, math.inf
        for j, n in enumerate(neg):
            if used[j] or abs(p.phi_bin - n.phi_bin) > cfg.pair_max_dphi:
                continue
            dx = _mean_dx(p, n)
            if dx is None or dx > cfg.pair_max_dx:
                continue
            if dx < best_dx:
                best, best_dx = j, dx
        if best is not None:
            used[best] = True
            pairs.append((p, neg[best]))
    return pairs


def merge_pair(pos: PolarityTrack, neg: PolarityTrack, track_id: int, frame_width: int) -> Optional[Track]:
    """두 직선의 중점으로 Track을 만듭니다. 유효 샘플이 2개 미만이면 None."""
    longer = pos if len(pos) >= len(neg) else neg
    ts = np.unique(longer.t)
    mid = 0.5 * (pos.fit.x_at(ts) + neg.fit.x_at(ts))
    keep = (mid >= 0) & (mid < frame_width)
    if keep.sum() < 2:
        return None
    return Track(track_id=track_id, t=ts[keep], x=mid[keep], sources=(pos, neg))


def pair_tracks(
    pos: Sequence[PolarityTrack], neg: Sequence[PolarityTrack], cfg: TrackerConfig, start_id: int = 0
) -> List[Track]:
    """양/음 극성 트랙 목록을 짝지어 Track 목록을 반환합니다. 짝이 없는 트랙은 버립니다."""
    tracks = []
    next_id = start_id
    for p, n in match_tracks(pos, neg, cfg):
        track = merge_pair(p, n, next_id, cfg.frame_width)
        if track is not None:
            tracks.append(track)
            next_id += 1
    return tracks


class TrackPairer:
    """극성 트랙을 스트리밍으로 받아 짝이 생기는 대로 Track을 내보냅니다."""

    def __init__(self, cfg: TrackerConfig):
        self.cfg = cfg
        self.pending_pos: List[PolarityTrack] = []
        self.pending_neg: List[PolarityTrack] = []
        self.next_id = 0
        self.discarded = 0

    def push(self, tracks: Sequence[PolarityTrack]):
        for track in tracks:
            (self.pending_pos if track.polarity == 1 else self.pending_neg).append(track)

    def poll(self, now: Optional[int] = None) -> List[Track]:
        """대기 중인 트랙을 짝짓고, now 기준으로 오래된 미짝 트랙을 버립니다."""
        out = []
        pairs = match_tracks(self.pending_pos, self.pending_neg, self.cfg)
        for p, n in pairs:
            self.pending_pos.remove(p)
            self.pending_neg.remove(n)
            track = merge_pair(p, n, self.next_id, self.cfg.frame_width)
            if track is not None:
                out.append(track)
                self.next_id += 1
        self._expire(now)
        return out

    def flush(self) -> List[Track]:
        out = self.poll(None)
        self.discarded += len(self.pending_pos) + len(self.pending_neg)
        if self.pending_pos or self.pending_neg:
            logger.debug(
                f"Discarding {len(self.pending_pos)} positive / {len(self.pending_neg)} negative unpaired tracks."
            )
        self.pending_pos.clear()
        self.pending_neg.clear()
        return out

    def _expire(self, now: Optional[int]):
        if now is None:
            return
        horizon = now - self.cfg.window_duration
        for pool in (self.pending_pos, self.pending_neg):
            stale = [tr for tr in pool if tr.t_last < horizon]
            for tr in stale:
                pool.remove(tr)
            self.discarded += len(stale)
