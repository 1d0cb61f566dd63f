"""Dataset serialization, source enumeration and preview rendering.

On-disk layout (everything lives under one output directory):

    manifest.jsonl              one JSON record per sample, UTF-8,
                                sorted by sample_id
    <sample_id>/000.png ...     png format: one lossless PNG per frame
    <sample_id>.clip            raw format: little-endian header
                                {magic "MOSC", version u8, N u16, L u16,
                                channels u8} + N*L*L*C payload bytes,
                                row-major within frame, frames in order

Manifest records carry the full generation provenance (label, plan,
mask, jitter draws, seed material, 64-bit frame checksum) plus an echo
of the effective config, which is enough to regenerate the sample bit
for bit from the original source file.  Unknown record fields are
ignored with a warning so newer writers stay readable.
"""

from __future__ import annotations

import json
import struct
import warnings
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Iterator

import numpy as np
from PIL import Image, ImageDraw

from .compositor import SequenceSample
from .config import GenConfig
from .errors import DatasetError, IntegrityError
from .hashing import frames_checksum
from .seeding import frame_pick_rng

MANIFEST_NAME = "manifest.jsonl"
CLIP_MAGIC = b"MOSC"
CLIP_VERSION = 1
CLIP_HEADER = struct.Struct("<4sBHHB")  # magic, version, N, L, channels
SCHEMA_VERSION = 1

IMAGE_EXTENSIONS = {".png", ".jpg", ".jpeg", ".bmp", ".gif", ".webp", ".tif", ".tiff"}

_REQUIRED_FIELDS = {
    "schema_version",
    "sample_id",
    "source_path",
    "source_index",
    "epoch",
    "label_index",
    "label_xy",
    "K",
    "N",
    "L",
    "L_s",
    "start",
    "distance",
    "positions",
    "seed",
    "frames_checksum",
    "config",
}
_OPTIONAL_FIELDS = {
    "source_frame_index",
    "mask",
    "jitter",
    "mask_region_checksum_pre",
    "mask_region_checksum_post",
}


@dataclass(frozen=True)
class SourceRef:
    """One enumerated source: its stable index, path, and frame choice."""

    index: int
    path: Path
    rel: str
    frame_index: int | None = None


@dataclass
class LoadedSample:
    record: dict
    frames: np.ndarray


# ---------------------------------------------------------------------------
# Records.


def sample_record(sample: SequenceSample, config: GenConfig) -> dict:
    """Manifest record for a generated sample (requires seed material)."""
    m = sample.seed_material
    if m is None:
        raise DatasetError("cannot serialize a sample generated without seed material")
    rec = {
        "schema_version": SCHEMA_VERSION,
        "sample_id": m.sample_id,
        "source_path": sample.source_path,
        "source_frame_index": sample.source_frame_index,
        "source_index": m.source_index,
        "epoch": m.epoch,
        "label_index": sample.label_index,
        "label_xy": [sample.label.x, sample.label.y],
        "K": config.k,
        "N": config.frames,
        "L": config.crop,
        "L_s": config.source_size,
        "start": list(sample.plan.start),
        "distance": list(sample.plan.distance),
        "positions": [list(p) for p in sample.plan.positions],
        "seed": m.derived,
        "frames_checksum": frames_checksum(sample.frames),
        "config": config.to_dict(),
    }
    if sample.mask is not None:
        rec["mask"] = {
            "x": sample.mask.x,
            "y": sample.mask.y,
            "side": sample.mask.side,
            "q": sample.mask.q,
        }
        rec["mask_region_checksum_pre"] = sample.mask_region_checksum_pre
        rec["mask_region_checksum_post"] = sample.mask_region_checksum_post
    if sample.jitter is not None:
        rec["jitter"] = {
            "mode": sample.jitter.mode,
            "params": sample.jitter.params.tolist(),
        }
    return rec


def record_to_json(record: dict) -> str:
    return json.dumps(record, separators=(",", ":"))


# ---------------------------------------------------------------------------
# Frame storage.


def encode_clip(frames: np.ndarray) -> bytes:
    n, L = frames.shape[0], frames.shape[1]
    header = CLIP_HEADER.pack(CLIP_MAGIC, CLIP_VERSION, n, L, frames.shape[3])
    return header + np.ascontiguousarray(frames).tobytes()


def decode_clip(blob: bytes) -> np.ndarray:
    if len(blob) < CLIP_HEADER.size:
        raise IntegrityError("clip file shorter than its header")
    magic, version, n, L, channels = CLIP_HEADER.unpack_from(blob)
    if magic != CLIP_MAGIC:
        raise IntegrityError(f"bad clip magic {magic!r}")
    if version != CLIP_VERSION:
        raise IntegrityError(f"unsupported clip version {version}")
    expected = CLIP_HEADER.size + n * L * L * channels
    if len(blob) != expected:
        raise IntegrityError(f"clip payload is {len(blob)} bytes, expected {expected}")
    return np.frombuffer(blob, dtype=np.uint8, offset=CLIP_HEADER.size).reshape(n, L, L, channels)


def write_sample_frames(sample_id: str, frames: np.ndarray, out_dir: Path, fmt: str) -> None:
    out_dir = Path(out_dir)
    if fmt == "png":
        frame_dir = out_dir / sample_id
        frame_dir.mkdir(parents=True, exist_ok=True)
        for i in range(frames.shape[0]):
            Image.fromarray(frames[i]).save(frame_dir / f"{i:03d}.png")
    elif fmt == "raw":
        (out_dir / f"{sample_id}.clip").write_bytes(encode_clip(frames))
    else:
        raise DatasetError(f"unknown frame format {fmt!r}")


def load_frames(record: dict, base_dir: Path) -> np.ndarray:
    fmt = record["config"]["output_format"]
    n, L = record["N"], record["L"]
    sid = record["sample_id"]
    if fmt == "png":
        frame_dir = base_dir / sid
        frames = np.empty((n, L, L, 3), dtype=np.uint8)
        for i in range(n):
            path = frame_dir / f"{i:03d}.png"
            if not path.exists():
                raise IntegrityError(f"missing frame file {path}")
            frames[i] = np.asarray(Image.open(path).convert("RGB"))
        return frames
    if fmt == "raw":
        path = base_dir / f"{sid}.clip"
        if not path.exists():
            raise IntegrityError(f"missing clip file {path}")
        frames = decode_clip(path.read_bytes())
        if frames.shape[:3] != (n, L, L):
            raise IntegrityError(f"{path}: clip dims {frames.shape} disagree with manifest")
        return frames
    raise DatasetError(f"unknown frame format {fmt!r}")


# ---------------------------------------------------------------------------
# Whole datasets.


def write_dataset(
    samples: Iterable[SequenceSample], out_dir: str | Path, config: GenConfig
) -> Path:
    """Write frames for every sample plus a sample_id-sorted manifest."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    records = []
    seen = set()
    for sample in samples:
        rec = sample_record(sample, config)
        if rec["sample_id"] in seen:
            raise DatasetError(f"duplicate sample id {rec['sample_id']}")
        seen.add(rec["sample_id"])
        write_sample_frames(rec["sample_id"], sample.frames, out_dir, config.output_format)
        records.append(rec)
    return write_manifest(records, out_dir)


def write_manifest(records: list[dict], out_dir: str | Path) -> Path:
    records = sorted(records, key=lambda r: r["sample_id"])
    ids = [r["sample_id"] for r in records]
    if len(set(ids)) != len(ids):
        raise DatasetError("duplicate sample ids in manifest")
    path = Path(out_dir) / MANIFEST_NAME
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(record_to_json(rec) + "\n")
    return path


def read_manifest(manifest_path: str | Path) -> list[dict]:
    """Parse and schema-check all records; unknown fields warn once."""
    manifest_path = Path(manifest_path)
    records = []
    unknown: set[str] = set()
    known = _REQUIRED_FIELDS | _OPTIONAL_FIELDS
    with open(manifest_path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            rec = json.loads(line)
            missing = _REQUIRED_FIELDS - rec.keys()
            if missing:
                raise DatasetError(
                    f"{manifest_path}:{lineno}: record missing required fields {sorted(missing)}"
                )
            if int(rec["schema_version"]) != SCHEMA_VERSION:
                raise IntegrityError(
                    f"{manifest_path}:{lineno}: schema version {rec['schema_version']} "
                    f"not supported (expected {SCHEMA_VERSION})"
                )
            unknown.update(rec.keys() - known)
            records.append(rec)
    if unknown:
        warnings.warn(
            f"ignoring unknown manifest fields: {sorted(unknown)}", RuntimeWarning, stacklevel=2
        )
    return records


def read_dataset(manifest_path: str | Path) -> Iterator[LoadedSample]:
    """Stream samples back, verifying each frame checksum."""
    manifest_path = Path(manifest_path)
    base = manifest_path.parent
    for rec in read_manifest(manifest_path):
        frames = load_frames(rec, base)
        actual = frames_checksum(frames)
        if actual != rec["frames_checksum"]:
            raise IntegrityError(
                f"{rec['sample_id']}: frame checksum {actual} does not match manifest "
                f"{rec['frames_checksum']}"
            )
        yield LoadedSample(record=rec, frames=frames)


# ---------------------------------------------------------------------------
# Source enumeration.


def _image_files(root: Path, recursive: bool) -> list[Path]:
    it = root.rglob("*") if recursive else root.glob("*")
    return sorted(
        (p for p in it if p.is_file() and p.suffix.lower() in IMAGE_EXTENSIONS),
        key=lambda p: p.relative_to(root).as_posix(),
    )


def enumerate_sources(
    input_dir: str | Path, mode: str = "images", epoch: int = 0, seed: int = 0
) -> list[SourceRef]:
    """List sources deterministically.

    images mode: every image file under `input_dir`, sorted by relative
    path.  frame-dirs mode: each immediate subdirectory is one video;
    one frame is picked per directory from a seed derived from
    (seed, source_index, epoch), so the pick changes across epochs but
    repeats exactly when the epoch repeats.
    """
    root = Path(input_dir)
    if not root.is_dir():
        raise DatasetError(f"source directory {root} does not exist")
    refs: list[SourceRef] = []
    if mode == "images":
        for i, path in enumerate(_image_files(root, recursive=True)):
            refs.append(SourceRef(index=i, path=path, rel=path.relative_to(root).as_posix()))
    elif mode == "frame-dirs":
        subdirs = sorted((d for d in root.iterdir() if d.is_dir()), key=lambda d: d.name)
        index = 0
        for d in subdirs:
            frames = _image_files(d, recursive=False)
            if not frames:
                continue
            pick = int(frame_pick_rng(seed, index, epoch).integers(0, len(frames)))
            path = frames[pick]
            refs.append(
                SourceRef(
                    index=index,
                    path=path,
                    rel=path.relative_to(root).as_posix(),
                    frame_index=pick,
                )
            )
            index += 1
    else:
        raise DatasetError(f"unknown input mode {mode!r}")
    if not refs:
        raise DatasetError(f"no usable sources found in {root} (mode={mode})")
    return refs


def load_image(path: str | Path) -> np.ndarray:
    """Decode an image file to an HxWx3 uint8 RGB array."""
    try:
        with Image.open(path) as im:
            return np.asarray(im.convert("RGB"))
    except Exception as exc:
        raise DatasetError(f"cannot decode image {path}: {exc}") from exc


# ---------------------------------------------------------------------------
# Previews.


def _preview_items(target) -> list[tuple[np.ndarray, str, tuple[int, int, int] | None]]:
    items = target if isinstance(target, (list, tuple)) else [target]
    out = []
    for item in items:
        if isinstance(item, LoadedSample):
            rec = item.record
            label = tuple(rec["label_xy"])
            mask = rec.get("mask")
            rect = (mask["x"], mask["y"], mask["side"]) if mask else None
            caption = f"{rec['sample_id']}  class {rec['label_index']}  ({label[0]},{label[1]})"
            out.append((item.frames, caption, rect))
        else:
            mask = item.mask
            rect = (mask.x, mask.y, mask.side) if (mask is not None and mask.enabled) else None
            caption = f"class {item.label_index}  ({item.label.x},{item.label.y})"
            out.append((item.frames, caption, rect))
    return out


_GUTTER = 2
_CAP_H = 14


def _row_image(frames: np.ndarray, caption: str, rect) -> Image.Image:
    n, L = frames.shape[0], frames.shape[1]
    width = n * L + (n - 1) * _GUTTER
    row = Image.new("RGB", (width, L + _CAP_H), (24, 24, 24))
    draw = ImageDraw.Draw(row)
    draw.text((2, 1), caption, fill=(230, 230, 230))
    for i in range(n):
        x = i * (L + _GUTTER)
        row.paste(Image.fromarray(frames[i]), (x, _CAP_H))
        if rect is not None:
            rx, ry, side = rect
            draw.rectangle(
                [x + rx, _CAP_H + ry, x + rx + side - 1, _CAP_H + ry + side - 1],
                outline=(255, 48, 48),
            )
    return row


def render_preview(
    target, out_path: str | Path, style: str = "sheet", fps: int = 8
) -> Path:
    """Render a contact sheet PNG or an animated GIF.

    `target` is a SequenceSample, a LoadedSample, or a list of either
    (one row per item on the sheet; rows stacked per frame in the GIF).
    """
    items = _preview_items(target)
    out_path = Path(out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    if style == "sheet":
        rows = [_row_image(*item) for item in items]
        width = max(r.width for r in rows)
        height = sum(r.height for r in rows) + _GUTTER * (len(rows) - 1)
        sheet = Image.new("RGB", (width, height), (24, 24, 24))
        y = 0
        for r in rows:
            sheet.paste(r, (0, y))
            y += r.height + _GUTTER
        sheet.save(out_path)
    elif style == "anim":
        n = items[0][0].shape[0]
        if any(frames.shape[0] != n for frames, _, _ in items):
            raise DatasetError("animation requires equal frame counts per item")
        gif_frames = []
        for i in range(n):
            tiles = []
            for frames, _, rect in items:
                tile = Image.fromarray(frames[i])
                if rect is not None:
                    rx, ry, side = rect
                    ImageDraw.Draw(tile).rectangle(
                        [rx, ry, rx + side - 1, ry + side - 1], outline=(255, 48, 48)
                    )
                tiles.append(tile)
            width = max(t.width for t in tiles)
            height = sum(t.height for t in tiles)
            canvas = Image.new("RGB", (width, height))
            y = 0
            for t in tiles:
                canvas.paste(t, (0, y))
                y += t.height
            gif_frames.append(canvas)
        gif_frames[0].save(
            out_path,
            save_all=True,
            append_images=gif_frames[1:],
            duration=max(1, int(1000 / fps)),
            loop=0,
        )
    else:
        raise DatasetError(f"unknown preview style {style!r}")
    return out_path
