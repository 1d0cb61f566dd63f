"""Label recovery by exhaustive block matching.

Independent check that a generated clip's motion label can be read back
from its pixels.  For every consecutive frame pair the oracle searches
all integer offsets within a radius for the one minimizing the sum of
absolute differences (SAD) between a reference block in the later frame
and the shifted block in the earlier frame.  The winning offset is the
displacement of the sampling window across the source (the camera pan),
i.e. the same quantity the labels encode; ties go to the smallest offset
magnitude, then lexicographically by (dx, dy).

Two verification modes:

* white-box: matches inside the recorded unmasked window (whole frame
  when the sample is unmasked);
* black-box: ignores metadata, tiles the frame into a 4x4 grid, matches
  each tile and keeps the tile with the largest total displacement.

Summed per-step estimates are snapped to the nearest label's expected
total displacement.  SAD is computed in exact integer arithmetic, so
results are identical across the numba kernel, the numpy fallback, and
any thread schedule.
"""

from __future__ import annotations

import math
import os
from collections import deque
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from .errors import OracleError
from .labels import LabelPool, build_label_pool, per_axis_speed_count_to_K
from .trajectory import motion_distance, round_half_away

try:
    from numba import njit

    _HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    _HAVE_NUMBA = False

MIN_BLOCK_SIDE = 8
_INSET_KEEP = 12  # keep at least this many pixels per side when insetting
FLAT_STD = 2.0
BLACKBOX_GRID = 4


def default_search_radius(source_side: int, crop: int, frames: int) -> int:
    """Covers the largest per-step pan plus rounding slack."""
    return int(math.ceil((source_side - crop) / (frames - 1))) + 2


# ---------------------------------------------------------------------------
# SAD search kernels.  blocks rows are (y0, x0, h, w); the returned grid is
# indexed [step, block, dy + radius, dx + radius].

if _HAVE_NUMBA:

    @njit(cache=True, nogil=True)
    def _sad_grids_numba(frames, blocks, radius):  # pragma: no cover - compiled
        n = frames.shape[0]
        nb = blocks.shape[0]
        side = 2 * radius + 1
        out = np.zeros((n - 1, nb, side, side), dtype=np.int64)
        for s in range(n - 1):
            for b in range(nb):
                y0, x0, hh, ww = blocks[b, 0], blocks[b, 1], blocks[b, 2], blocks[b, 3]
                for dy in range(-radius, radius + 1):
                    for dx in range(-radius, radius + 1):
                        acc = np.int64(0)
                        for yy in range(hh):
                            for xx in range(ww):
                                for c in range(3):
                                    d = np.int32(frames[s + 1, y0 + yy, x0 + xx, c]) - np.int32(
                                        frames[s, y0 + yy + dy, x0 + xx + dx, c]
                                    )
                                    acc += d if d >= 0 else -d
                        out[s, b, dy + radius, dx + radius] = acc
        return out


def _sad_grids_numpy(frames: np.ndarray, blocks: np.ndarray, radius: int) -> np.ndarray:
    n = frames.shape[0]
    side = 2 * radius + 1
    out = np.zeros((n - 1, len(blocks), side, side), dtype=np.int64)
    f16 = frames.astype(np.int16)
    for s in range(n - 1):
        for b, (y0, x0, hh, ww) in enumerate(blocks):
            block = f16[s + 1, y0 : y0 + hh, x0 : x0 + ww]
            view = np.lib.stride_tricks.sliding_window_view(f16[s], (hh, ww, 3))[:, :, 0]
            sub = view[y0 - radius : y0 + radius + 1, x0 - radius : x0 + radius + 1]
            out[s, b] = np.abs(sub - block[None, None]).sum(axis=(2, 3, 4), dtype=np.int64)
    return out


def sad_grids(frames: np.ndarray, blocks: np.ndarray, radius: int) -> np.ndarray:
    """Exact SAD over all offsets in [-radius, radius]^2 for each block and step."""
    frames = np.ascontiguousarray(frames)
    blocks = np.ascontiguousarray(blocks, dtype=np.int64)
    if _HAVE_NUMBA:
        return _sad_grids_numba(frames, blocks, int(radius))
    return _sad_grids_numpy(frames, blocks, int(radius))


# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DisplacementEstimate:
    """Per-step and summed integer displacement, window-motion convention."""

    per_step: tuple[tuple[int, int], ...]
    total: tuple[int, int]
    confidence: float
    flat_steps: int = 0


@dataclass
class VerificationReport:
    samples_checked: int = 0
    label_agreement: float = 0.0
    per_class_confusion: list[list[int]] = field(default_factory=list)
    mask_exactness_failures: int = 0
    mean_confidence: float = 0.0
    unclassifiable: int = 0
    empty: bool = False
    mode: str = "white"
    classes: int = 0
    details: list[dict] | None = None

    def to_dict(self) -> dict:
        out = {
            "samples_checked": self.samples_checked,
            "label_agreement": self.label_agreement,
            "per_class_confusion": self.per_class_confusion,
            "mask_exactness_failures": self.mask_exactness_failures,
            "mean_confidence": self.mean_confidence,
            "unclassifiable": self.unclassifiable,
            "empty": self.empty,
            "mode": self.mode,
            "classes": self.classes,
        }
        if self.details is not None:
            out["details"] = self.details
        return out


def _offset_keys(radius: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    side = 2 * radius + 1
    dy, dx = np.mgrid[-radius : radius + 1, -radius : radius + 1]
    dy, dx = dy.ravel(), dx.ravel()
    return dx, dy, dx * dx + dy * dy


def _argmin_offset(grid: np.ndarray, radius: int) -> tuple[int, int, int]:
    """Best (dx, dy, sad): lowest SAD, then |offset|, then (dx, dy) order."""
    dx, dy, mag = _offset_keys(radius)
    flat = grid.ravel()
    j = np.lexsort((dy, dx, mag, flat))[0]
    return int(dx[j]), int(dy[j]), int(flat[j])


def _clip_to_margin(x0: int, y0: int, x1: int, y1: int, L: int, radius: int):
    return max(x0, radius), max(y0, radius), min(x1, L - radius), min(y1, L - radius)


def _whitebox_block(rect: tuple[int, int, int], L: int, radius: int) -> tuple[int, int, int, int] | None:
    """Matching block for a recorded unmasked window.

    The window is inset so the search stays mostly on moving content, but
    never below _INSET_KEEP pixels per side, then clipped to the
    searchable margin.  Returns (y0, x0, h, w) or None when unusable.
    """
    x, y, side = rect
    inset = max(0, min(radius, (side - _INSET_KEEP) // 2))
    x0, y0, x1, y1 = _clip_to_margin(x + inset, y + inset, x + side - inset, y + side - inset, L, radius)
    if x1 - x0 < MIN_BLOCK_SIDE or y1 - y0 < MIN_BLOCK_SIDE:
        x0, y0, x1, y1 = _clip_to_margin(x, y, x + side, y + side, L, radius)
    if x1 - x0 < MIN_BLOCK_SIDE or y1 - y0 < MIN_BLOCK_SIDE:
        return None
    return (y0, x0, y1 - y0, x1 - x0)


def _tile_blocks(L: int, radius: int) -> list[tuple[int, int, int, int]]:
    """4x4 grid tiles clipped to the searchable margin; unusable tiles dropped."""
    bounds = [round(L * i / BLACKBOX_GRID) for i in range(BLACKBOX_GRID + 1)]
    blocks = []
    for ty in range(BLACKBOX_GRID):
        for tx in range(BLACKBOX_GRID):
            x0, y0, x1, y1 = _clip_to_margin(
                bounds[tx], bounds[ty], bounds[tx + 1], bounds[ty + 1], L, radius
            )
            if x1 - x0 >= MIN_BLOCK_SIDE and y1 - y0 >= MIN_BLOCK_SIDE:
                blocks.append((y0, x0, y1 - y0, x1 - x0))
    return blocks


def _estimate_from_grids(
    grids: np.ndarray, frames: np.ndarray, block: tuple[int, int, int, int], radius: int
) -> DisplacementEstimate:
    """Turn one block's per-step SAD grids into a DisplacementEstimate."""
    y0, x0, hh, ww = block
    area = hh * ww * 3
    steps = []
    confs = []
    flat = 0
    for s in range(grids.shape[0]):
        dx, dy, sad = _argmin_offset(grids[s], radius)
        steps.append((dx, dy))
        confs.append(1.0 - sad / (255.0 * area))
        if float(frames[s + 1, y0 : y0 + hh, x0 : x0 + ww].std()) < FLAT_STD:
            flat += 1
    total = (sum(p[0] for p in steps), sum(p[1] for p in steps))
    return DisplacementEstimate(
        per_step=tuple(steps),
        total=total,
        confidence=float(np.mean(confs)),
        flat_steps=flat,
    )


def estimate_displacement(
    frames: np.ndarray, region: tuple[int, int, int, int], search_radius: int
) -> DisplacementEstimate:
    """Per-step displacement of the content in `region` (x, y, w, h).

    The region is clipped so every searched offset stays inside the
    frame; raises OracleError when the clipped block drops below
    8x8 pixels.
    """
    L = frames.shape[1]
    x, y, w, h = region
    if search_radius < 1:
        raise OracleError(f"search radius must be >= 1, got {search_radius}")
    x0, y0, x1, y1 = _clip_to_margin(x, y, x + w, y + h, L, search_radius)
    if x1 - x0 < MIN_BLOCK_SIDE or y1 - y0 < MIN_BLOCK_SIDE:
        raise OracleError(
            f"region {region} leaves a matching block below {MIN_BLOCK_SIDE}x{MIN_BLOCK_SIDE} "
            f"after clipping to the search margin ({search_radius})"
        )
    block = (y0, x0, y1 - y0, x1 - x0)
    grids = sad_grids(frames, np.array([block]), search_radius)
    return _estimate_from_grids(grids[:, 0], frames, block, search_radius)


# ---------------------------------------------------------------------------
# Sample classification.


@dataclass(frozen=True)
class _View:
    frames: np.ndarray
    source_dims: tuple[int, int]
    mask_rect: tuple[int, int, int] | None


def _as_view(sample) -> _View:
    if hasattr(sample, "record"):  # LoadedSample from dataset_io
        rec = sample.record
        mask = rec.get("mask")
        rect = (mask["x"], mask["y"], mask["side"]) if mask else None
        return _View(sample.frames, (rec["L_s"], rec["L_s"]), rect)
    mask = getattr(sample, "mask", None)
    rect = (mask.x, mask.y, mask.side) if (mask is not None and mask.enabled) else None
    return _View(sample.frames, sample.plan.source_dims, rect)


def _expected_totals(pool: LabelPool, source_dims: tuple[int, int], L: int) -> list[tuple[int, int]]:
    W, H = source_dims
    out = []
    for lab in pool.labels:
        dx, dy = motion_distance(lab, W, H, L, pool.K)
        out.append((round_half_away(dx), round_half_away(dy)))
    return out


def _nearest_label(total: tuple[int, int], pool: LabelPool, expected) -> int:
    best_key = None
    best_idx = 0
    for idx, (ex, lab) in enumerate(zip(expected, pool.labels)):
        d2 = (total[0] - ex[0]) ** 2 + (total[1] - ex[1]) ** 2
        key = (d2, abs(lab.x) + abs(lab.y), lab.x, lab.y)
        if best_key is None or key < best_key:
            best_key, best_idx = key, idx
    return best_idx


def _unclassifiable(est: DisplacementEstimate, n_steps: int) -> bool:
    return est.flat_steps > n_steps // 2


def classify_sample(
    sample,
    pool: LabelPool,
    mode: str = "white",
    search_radius: int | None = None,
) -> tuple[int | None, DisplacementEstimate]:
    """Recover the class index from pixels; None when content is too flat.

    `sample` may be a SequenceSample or a LoadedSample (record + frames).
    """
    results = classify_modes(sample, pool, modes=(mode,), search_radius=search_radius)
    return results[mode]


def classify_modes(
    sample,
    pool: LabelPool,
    modes: Iterable[str] = ("white", "black"),
    search_radius: int | None = None,
) -> dict[str, tuple[int | None, DisplacementEstimate]]:
    """Classify in one or both modes, sharing the tiled SAD pass.

    For unmasked samples the white-box block is the whole searchable
    frame, which equals the disjoint union of the black-box tiles, so the
    white-box SAD grid is recovered exactly by summing tile grids.
    """
    view = _as_view(sample)
    frames = np.ascontiguousarray(view.frames)
    n, L = frames.shape[0], frames.shape[1]
    W, H = view.source_dims
    radius = search_radius if search_radius is not None else default_search_radius(W, L, n)
    expected = _expected_totals(pool, view.source_dims, L)
    modes = tuple(modes)

    need_tiles = "black" in modes or ("white" in modes and view.mask_rect is None)
    tile_grids = None
    tiles: list[tuple[int, int, int, int]] = []
    if need_tiles:
        tiles = _tile_blocks(L, radius)
        if tiles:
            tile_grids = sad_grids(frames, np.array(tiles), radius)

    out: dict[str, tuple[int | None, DisplacementEstimate]] = {}
    for mode in modes:
        if mode not in ("white", "black"):
            raise OracleError(f"unknown verification mode {mode!r}")
        est = None
        if mode == "white":
            if view.mask_rect is not None:
                block = _whitebox_block(view.mask_rect, L, radius)
                if block is not None:
                    grids = sad_grids(frames, np.array([block]), radius)
                    est = _estimate_from_grids(grids[:, 0], frames, block, radius)
            elif tile_grids is not None:
                # whole searchable frame: sum of the disjoint tile blocks
                y0 = min(t[0] for t in tiles)
                x0 = min(t[1] for t in tiles)
                y1 = max(t[0] + t[2] for t in tiles)
                x1 = max(t[1] + t[3] for t in tiles)
                merged = (y0, x0, y1 - y0, x1 - x0)
                est = _estimate_from_grids(tile_grids.sum(axis=1), frames, merged, radius)
        else:
            if tile_grids is not None:
                # keep the tile with the largest total displacement; ties go
                # to the lowest tile index (row-major)
                for b in range(len(tiles)):
                    cand = _estimate_from_grids(tile_grids[:, b], frames, tiles[b], radius)
                    mag = cand.total[0] ** 2 + cand.total[1] ** 2
                    if est is None or mag > est.total[0] ** 2 + est.total[1] ** 2:
                        est = cand
        if est is None or _unclassifiable(est, n - 1):
            out[mode] = (None, est or DisplacementEstimate((), (0, 0), 0.0, flat_steps=n - 1))
        else:
            out[mode] = (_nearest_label(est.total, pool, expected), est)
    return out


# ---------------------------------------------------------------------------
# Dataset-level verification.


def _mask_exact_on_stored(record: dict, frames: np.ndarray) -> bool | None:
    """Re-check masked-area equality on stored frames.

    Returns None when not checkable (no mask, or frame-wise jitter which
    legitimately perturbs the background per frame).
    """
    mask = record.get("mask")
    if not mask:
        return None
    jitter = record.get("jitter")
    if jitter and jitter.get("mode") == "per-frame":
        return None
    L = frames.shape[1]
    sel = np.ones((L, L), dtype=bool)
    sel[mask["y"] : mask["y"] + mask["side"], mask["x"] : mask["x"] + mask["side"]] = False
    background = frames[mask["q"]][sel]
    return all(np.array_equal(frames[p][sel], background) for p in range(frames.shape[0]))


def _verify_one(loaded, pool, mode, radius):
    exact = _mask_exact_on_stored(loaded.record, loaded.frames)
    idx, est = classify_sample(loaded, pool, mode=mode, search_radius=radius)
    return {
        "sample_id": loaded.record["sample_id"],
        "true": loaded.record["label_index"],
        "predicted": idx,
        "confidence": est.confidence if est is not None else 0.0,
        "mask_ok": exact,
    }


def verify_dataset(
    manifest_path,
    mode: str = "white",
    search_radius: int | None = None,
    workers: int | None = None,
    details: bool = False,
) -> VerificationReport:
    """Classify every stored sample and aggregate a VerificationReport.

    Aggregation is plain integer counting, so the result is independent
    of worker count and completion order.
    """
    from .dataset_io import read_dataset, read_manifest

    records = read_manifest(manifest_path)
    if not records:
        return VerificationReport(empty=True, mode=mode)

    first_cfg = records[0]["config"]
    pool = build_label_pool(per_axis_speed_count_to_K(int(first_cfg["speeds"])), first_cfg["axis"])
    confusion = np.zeros((pool.size, pool.size), dtype=np.int64)
    agree = classified = unclassifiable = mask_fail = 0
    conf_sum = 0.0
    rows: list[dict] = []

    if workers is None:
        workers = min(4, os.cpu_count() or 1)

    def consume(result):
        nonlocal agree, classified, unclassifiable, mask_fail, conf_sum
        if result["mask_ok"] is False:
            mask_fail += 1
        if result["predicted"] is None:
            unclassifiable += 1
        else:
            classified += 1
            conf_sum += result["confidence"]
            confusion[result["true"], result["predicted"]] += 1
            if result["true"] == result["predicted"]:
                agree += 1
        if details:
            rows.append(result)

    stream = read_dataset(manifest_path)
    if workers <= 1:
        for loaded in stream:
            consume(_verify_one(loaded, pool, mode, search_radius))
    else:
        pending = deque()
        with ThreadPoolExecutor(max_workers=workers) as ex:
            for loaded in stream:
                pending.append(ex.submit(_verify_one, loaded, pool, mode, search_radius))
                while len(pending) >= workers * 4:
                    consume(pending.popleft().result())
            while pending:
                consume(pending.popleft().result())

    total = classified + unclassifiable
    return VerificationReport(
        samples_checked=total,
        label_agreement=(agree / classified) if classified else 0.0,
        per_class_confusion=confusion.tolist(),
        mask_exactness_failures=mask_fail,
        mean_confidence=(conf_sum / classified) if classified else 0.0,
        unclassifiable=unclassifiable,
        empty=False,
        mode=mode,
        classes=pool.size,
        details=rows if details else None,
    )
