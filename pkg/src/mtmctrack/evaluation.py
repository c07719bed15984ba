"""Identity-level and CLEAR tracking metrics.

The identity measures come from a global truth-to-result matching: every
ground-truth identity is paired with at most one predicted identity so that
the total of misses and false positives is minimal, then IDP/IDR/IDF1 are
read off the matched frame counts. The CLEAR pass matches boxes frame by
frame with a carry-over preference and counts FP/FN/identity switches.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .assignment import hungarian
from .core import BBox, FORBIDDEN, TrackRow, iou


@dataclass(frozen=True)
class IdMeasureReport:
    idtp: int
    idfp: int
    idfn: int
    idf1: float
    idp: float
    idr: float


@dataclass(frozen=True)
class ClearReport:
    mota: float
    ids: int
    fp: int
    fn: int


def _ratio(num: float, den: float) -> float:
    # Nothing demanded, nothing wrong: an empty denominator scores perfect.
    return num / den if den > 0 else 1.0


def _index_rows(rows: list[TrackRow]):
    """identity -> {(camera, frame): bbox}; duplicate (camera, frame) per
    identity violates the row contract."""
    by_id: dict[int, dict[tuple[int, int], BBox]] = {}
    for r in rows:
        frames = by_id.setdefault(r.identity, {})
        key = (r.camera_id, r.frame)
        if key in frames:
            raise ValueError(
                f"duplicate row for identity {r.identity} at camera "
                f"{key[0]} frame {key[1]}"
            )
        frames[key] = r.bbox
    return by_id


def _overlap_counts(gt_tracks, pred_tracks, iou_threshold):
    """matches[(g, p)] = number of (camera, frame) where the two co-locate."""
    counts: dict[tuple[int, int], int] = {}
    for g, g_frames in gt_tracks.items():
        for p, p_frames in pred_tracks.items():
            n = 0
            if len(g_frames) <= len(p_frames):
                small, large = g_frames, p_frames
            else:
                small, large = p_frames, g_frames
            for key, box in small.items():
                other = large.get(key)
                if other is not None and iou(box, other) >= iou_threshold:
                    n += 1
            if n:
                counts[(g, p)] = n
    return counts


def id_measures(
    gt: list[TrackRow], pred: list[TrackRow], iou_threshold: float = 0.5
) -> IdMeasureReport:
    """IDF1/IDP/IDR from the optimal global identity matching.

    Boxes co-locate when their IoU reaches the threshold. The bipartite
    cost of pairing a truth identity with a predicted identity is the
    misses plus false positives that pairing would leave; dummy partners
    charge a fully unmatched identity. The minimal-cost pairing is found
    with the Hungarian solver.
    """
    if not 0.0 < iou_threshold < 1.0:
        raise ValueError("iou_threshold must lie in (0, 1)")
    gt_tracks = _index_rows(gt)
    pred_tracks = _index_rows(pred)
    gt_ids = sorted(gt_tracks)
    pred_ids = sorted(pred_tracks)
    n_g, n_p = len(gt_ids), len(pred_ids)
    total_gt = sum(len(v) for v in gt_tracks.values())
    total_pred = sum(len(v) for v in pred_tracks.values())

    if n_g == 0 and n_p == 0:
        return IdMeasureReport(0, 0, 0, 1.0, 1.0, 1.0)

    counts = _overlap_counts(gt_tracks, pred_tracks, iou_threshold)

    size = n_g + n_p
    cost = np.full((size, size), FORBIDDEN)
    for gi, g in enumerate(gt_ids):
        for pi, p in enumerate(pred_ids):
            overlap = counts.get((g, p), 0)
            cost[gi, pi] = (
                len(gt_tracks[g]) + len(pred_tracks[p]) - 2 * overlap
            )
        # Dummy column: this truth identity stays unmatched (all misses).
        cost[gi, n_p + gi] = len(gt_tracks[g])
    for pi, p in enumerate(pred_ids):
        # Dummy row: this predicted identity stays unmatched (all FPs).
        cost[n_g + pi, pi] = len(pred_tracks[p])
    cost[n_g:, n_p:] = 0.0

    result = hungarian(cost)
    idtp = 0
    for r, c in result.matched_pairs:
        if r < n_g and c < n_p:
            idtp += counts.get((gt_ids[r], pred_ids[c]), 0)
    idfn = total_gt - idtp
    idfp = total_pred - idtp
    return IdMeasureReport(
        idtp=idtp,
        idfp=idfp,
        idfn=idfn,
        idf1=_ratio(2 * idtp, 2 * idtp + idfp + idfn),
        idp=_ratio(idtp, idtp + idfp),
        idr=_ratio(idtp, idtp + idfn),
    )


def clear_metrics(
    gt: list[TrackRow], pred: list[TrackRow], iou_threshold: float = 0.5
) -> ClearReport:
    """MOTA, identity switches, FP and FN via frame-by-frame matching.

    Within each (camera, frame) boxes are matched by Hungarian on 1 - IoU,
    gated at the threshold; pairings that continue the previous association
    of a truth identity are preferred over cheaper fresh ones. A switch is
    a matched truth box whose predicted identity differs from that truth
    identity's previous pairing in the same camera.
    """
    if not 0.0 < iou_threshold < 1.0:
        raise ValueError("iou_threshold must lie in (0, 1)")
    gt_by_key: dict[tuple[int, int], list[TrackRow]] = {}
    for r in gt:
        gt_by_key.setdefault((r.camera_id, r.frame), []).append(r)
    pred_by_key: dict[tuple[int, int], list[TrackRow]] = {}
    for r in pred:
        pred_by_key.setdefault((r.camera_id, r.frame), []).append(r)

    total_gt = len(gt)
    fp = fn = ids = 0
    last_pair: dict[tuple[int, int], int] = {}  # (camera, gt id) -> pred id

    for key in sorted(set(gt_by_key) | set(pred_by_key)):
        cam = key[0]
        g_rows = sorted(gt_by_key.get(key, []), key=lambda r: r.identity)
        p_rows = sorted(pred_by_key.get(key, []), key=lambda r: r.identity)
        if not g_rows:
            fp += len(p_rows)
            continue
        if not p_rows:
            fn += len(g_rows)
            continue
        # Any single continuation outweighs every possible IoU saving.
        penalty = 2.0 * (len(g_rows) + len(p_rows)) + 10.0
        cost = np.full((len(g_rows), len(p_rows)), FORBIDDEN)
        for i, gr in enumerate(g_rows):
            continued = last_pair.get((cam, gr.identity))
            for j, pr in enumerate(p_rows):
                overlap = iou(gr.bbox, pr.bbox)
                if overlap < iou_threshold:
                    continue
                cost[i, j] = 1.0 - overlap
                if continued != pr.identity:
                    cost[i, j] += penalty
        result = hungarian(cost)
        fn += len(result.unmatched_rows)
        fp += len(result.unmatched_cols)
        for i, j in result.matched_pairs:
            g_id = g_rows[i].identity
            p_id = p_rows[j].identity
            prev = last_pair.get((cam, g_id))
            if prev is not None and prev != p_id:
                ids += 1
            last_pair[(cam, g_id)] = p_id

    if total_gt > 0:
        mota = 1.0 - (fn + fp + ids) / total_gt
    else:
        mota = 1.0 if fp == 0 else 0.0
    return ClearReport(mota=mota, ids=ids, fp=fp, fn=fn)
