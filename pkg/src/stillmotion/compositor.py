"""Source preparation, crop extraction, static masks, color jitter.

The full pipeline for one sample is

    prepare_source -> plan_trajectory -> extract_sequence
        -> apply_static_mask (optional) -> color_jitter (optional)

Masking freezes every pixel outside a square "unmasked" window to one
randomly chosen background frame q, turning the global pan into a local
motion against a static backdrop.  Jitter runs after masking, so
frame-wise jitter deliberately re-perturbs the static background; the
masked-area byte-equality invariant is checked (and checksummed) before
jitter is applied.

All randomness flows through caller-supplied numpy generators; a batch
derives one generator per sample from its seed material, so generation
is reproducible bit for bit regardless of worker count or order.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from PIL import Image

from .config import GenConfig, JitterConfig
from .errors import ConfigError, DatasetError, StillMotionError, TrajectoryError
from .hashing import hash64
from .labels import LabelPool, MotionLabel, build_label_pool
from .seeding import SeedMaterialTuple, sample_rng
from .trajectory import TrajectoryPlan, plan_trajectory, round_half_away

_LUMA = np.array([0.299, 0.587, 0.114], dtype=np.float32)


@dataclass(frozen=True)
class SourceImage:
    """A prepared square source: L_s x L_s x 3, uint8."""

    pixels: np.ndarray
    origin: str = ""
    frame_index: int | None = None

    @property
    def dims(self) -> tuple[int, int]:
        h, w = self.pixels.shape[:2]
        return w, h


@dataclass(frozen=True)
class MaskSpec:
    """Square unmasked window at (x, y) with side `side`, background frame q."""

    x: int
    y: int
    side: int
    q: int
    enabled: bool = True

    def validate(self, L: int, N: int) -> None:
        if not self.enabled:
            return
        if self.side < 1:
            raise ConfigError(f"mask side must be >= 1, got {self.side}")
        if not (0 <= self.x <= L - self.side and 0 <= self.y <= L - self.side):
            raise ConfigError(f"mask window ({self.x},{self.y},{self.side}) leaves the {L}x{L} frame")
        if not (0 <= self.q < N):
            raise ConfigError(f"background frame index {self.q} outside 0..{N - 1}")

    def outside(self, L: int) -> np.ndarray:
        """Boolean (L, L) map of the masked (frozen) area."""
        sel = np.ones((L, L), dtype=bool)
        sel[self.y : self.y + self.side, self.x : self.x + self.side] = False
        return sel


@dataclass(frozen=True)
class JitterDraw:
    """Drawn jitter parameters: one row per frame (or a single row per clip).

    Columns: brightness, contrast, saturation factors and hue shift.
    """

    mode: str
    params: np.ndarray


@dataclass
class SequenceSample:
    frames: np.ndarray
    label: MotionLabel
    label_index: int
    plan: TrajectoryPlan
    mask: MaskSpec | None
    jitter: JitterDraw | None
    seed_material: SeedMaterialTuple | None = None
    source_path: str = ""
    source_frame_index: int | None = None
    mask_region_checksum_pre: int | None = None
    mask_region_checksum_post: int | None = None


def prepare_source(
    image: np.ndarray,
    L_s: int,
    rng: np.random.Generator,
    origin: str = "",
    frame_index: int | None = None,
) -> SourceImage:
    """Resize so the short side equals L_s, then crop a random L_s square.

    Bilinear resize; the long side is rounded to the nearest pixel.  The
    crop offset is drawn uniformly over valid placements, x before y.
    """
    if L_s < 1:
        raise ConfigError(f"source size must be >= 1, got {L_s}")
    arr = np.asarray(image)
    if arr.ndim != 3 or arr.shape[2] != 3 or arr.shape[0] < 1 or arr.shape[1] < 1:
        raise DatasetError(f"expected an HxWx3 image buffer, got shape {arr.shape}")
    h, w = arr.shape[:2]
    short = min(h, w)
    new_w = max(L_s, round_half_away(w * L_s / short))
    new_h = max(L_s, round_half_away(h * L_s / short))
    if (new_w, new_h) != (w, h):
        arr = np.asarray(
            Image.fromarray(arr.astype(np.uint8)).resize((new_w, new_h), Image.BILINEAR)
        )
    off_x = int(rng.integers(0, new_w - L_s + 1))
    off_y = int(rng.integers(0, new_h - L_s + 1))
    square = np.ascontiguousarray(arr[off_y : off_y + L_s, off_x : off_x + L_s])
    return SourceImage(pixels=square, origin=origin, frame_index=frame_index)


def extract_sequence(source: SourceImage, plan: TrajectoryPlan) -> np.ndarray:
    """Copy the N crops along the plan into an (N, L, L, 3) uint8 array."""
    W, H = source.dims
    if plan.source_dims != (W, H):
        raise TrajectoryError(f"plan was made for {plan.source_dims}, source is {(W, H)}")
    plan.validate()
    L = plan.L
    frames = np.empty((plan.N, L, L, 3), dtype=np.uint8)
    for i, (x, y) in enumerate(plan.positions):
        frames[i] = source.pixels[y : y + L, x : x + L]
    return frames


def sample_mask_spec(
    rng: np.random.Generator,
    L: int,
    N: int,
    ratio_range: tuple[float, float],
) -> MaskSpec:
    """Draw a mask: side ratio, then window x, window y, then background q."""
    lo, hi = ratio_range
    if not (0.0 < lo <= hi <= 1.0):
        raise ConfigError(f"mask ratio range must satisfy 0 < lo <= hi <= 1, got {lo}:{hi}")
    if L < 2:
        raise ConfigError(f"frame side must be >= 2 to mask, got {L}")
    u = float(rng.uniform(lo, hi))
    side = min(L, max(1, round_half_away(u * L)))
    mx = int(rng.integers(0, L - side + 1))
    my = int(rng.integers(0, L - side + 1))
    q = int(rng.integers(0, N))
    return MaskSpec(x=mx, y=my, side=side, q=q, enabled=True)


def apply_static_mask(frames: np.ndarray, mask: MaskSpec) -> np.ndarray:
    """Freeze everything outside the mask window to frame q; window content kept."""
    if not mask.enabled:
        return frames.copy()
    N, L = frames.shape[0], frames.shape[1]
    mask.validate(L, N)
    out = np.empty_like(frames)
    out[:] = frames[mask.q]
    ys, xs = mask.y, mask.x
    out[:, ys : ys + mask.side, xs : xs + mask.side] = frames[:, ys : ys + mask.side, xs : xs + mask.side]
    return out


def _rgb_to_hsv(rgb: np.ndarray) -> np.ndarray:
    # rgb float32 in [0, 1]; matches colorsys conventions, vectorized
    r, g, b = rgb[..., 0], rgb[..., 1], rgb[..., 2]
    maxc = rgb.max(axis=-1)
    minc = rgb.min(axis=-1)
    spread = maxc - minc
    safe = np.where(spread == 0, 1.0, spread)
    rc = (maxc - r) / safe
    gc = (maxc - g) / safe
    bc = (maxc - b) / safe
    h = np.where(maxc == r, bc - gc, np.where(maxc == g, 2.0 + rc - bc, 4.0 + gc - rc))
    h = np.where(spread == 0, 0.0, (h / 6.0) % 1.0)
    s = np.where(maxc == 0, 0.0, spread / np.where(maxc == 0, 1.0, maxc))
    return np.stack([h, s, maxc], axis=-1)


def _hsv_to_rgb(hsv: np.ndarray) -> np.ndarray:
    h, s, v = hsv[..., 0], hsv[..., 1], hsv[..., 2]
    i = np.floor(h * 6.0)
    f = h * 6.0 - i
    p = v * (1.0 - s)
    q = v * (1.0 - s * f)
    t = v * (1.0 - s * (1.0 - f))
    k = i.astype(np.int64) % 6
    conds = [k == j for j in range(6)]
    r = np.select(conds, [v, q, p, p, t, v])
    g = np.select(conds, [t, v, v, q, p, p])
    b = np.select(conds, [p, p, t, v, v, q])
    return np.stack([r, g, b], axis=-1)


def _jitter_one(frame: np.ndarray, b: float, c: float, s: float, h: float) -> np.ndarray:
    # every stage is a pure per-pixel map (contrast anchors at mid-gray, not
    # a frame statistic), so per-clip mode applies one identical map to all
    # frames and masked-area equality survives it exactly
    out = frame.astype(np.float32)
    if b != 1.0:
        out = np.clip(out * b, 0.0, 255.0)
    if c != 1.0:
        out = np.clip(127.5 + (out - 127.5) * c, 0.0, 255.0)
    if s != 1.0:
        luma = (out @ _LUMA)[..., None]
        out = np.clip(luma + (out - luma) * s, 0.0, 255.0)
    if h != 0.0:
        hsv = _rgb_to_hsv(out / 255.0)
        hsv[..., 0] = (hsv[..., 0] + h) % 1.0
        out = np.clip(_hsv_to_rgb(hsv) * 255.0, 0.0, 255.0)
    return np.rint(out).astype(np.uint8)


def color_jitter(
    frames: np.ndarray,
    ranges: JitterConfig,
    mode: str,
    rng: np.random.Generator,
) -> tuple[np.ndarray, JitterDraw]:
    """Brightness, contrast, saturation and hue jitter, in that order.

    "per-frame" draws an independent parameter row for every frame;
    "per-clip" draws once and applies it to all frames.  Identity factors
    skip their stage, so degenerate ranges reproduce the input bytes.
    """
    ranges.validate()
    if mode not in ("per-frame", "per-clip"):
        raise ConfigError(f"jitter mode must be per-frame or per-clip, got {mode!r}")
    n_draws = frames.shape[0] if mode == "per-frame" else 1
    params = np.empty((n_draws, 4), dtype=np.float64)
    for row in range(n_draws):
        params[row, 0] = rng.uniform(*ranges.brightness)
        params[row, 1] = rng.uniform(*ranges.contrast)
        params[row, 2] = rng.uniform(*ranges.saturation)
        params[row, 3] = rng.uniform(*ranges.hue)
    out = np.empty_like(frames)
    for p in range(frames.shape[0]):
        b, c, s, h = params[p if mode == "per-frame" else 0]
        out[p] = _jitter_one(frames[p], float(b), float(c), float(s), float(h))
    return out, JitterDraw(mode=mode, params=params)


def mask_region_checksum(frames: np.ndarray, mask: MaskSpec) -> int:
    """64-bit checksum over every frame's masked (outside-window) pixels."""
    sel = mask.outside(frames.shape[1])
    return hash64(np.ascontiguousarray(frames[:, sel]).tobytes())


def _check_mask_exactness(frames: np.ndarray, mask: MaskSpec) -> None:
    sel = mask.outside(frames.shape[1])
    background = frames[mask.q][sel]
    for p in range(frames.shape[0]):
        if not np.array_equal(frames[p][sel], background):
            raise StillMotionError(
                f"internal invariant violated: frame {p} differs from background frame "
                f"{mask.q} inside the masked area"
            )


def generate_sample(
    source: SourceImage,
    label: MotionLabel,
    config: GenConfig,
    rng: np.random.Generator,
    pool: LabelPool | None = None,
    seed_material: SeedMaterialTuple | None = None,
) -> SequenceSample:
    """Run the full pipeline for one label on a prepared source.

    Draw order from `rng`: start position, mask (if enabled), jitter
    parameters (if enabled).
    """
    if pool is None:
        pool = build_label_pool(config.k, config.axis)
    label = MotionLabel(*label)
    label_index = pool.index_of(label)

    plan = plan_trajectory(label, source.dims, config.crop, config.k, config.frames, rng)
    frames = extract_sequence(source, plan)

    mask = None
    pre_sum = post_sum = None
    if config.mask_enabled:
        mask = sample_mask_spec(rng, config.crop, config.frames, config.mask_ratio)
        frames = apply_static_mask(frames, mask)
        _check_mask_exactness(frames, mask)
        pre_sum = mask_region_checksum(frames, mask)

    jitter = None
    if config.jitter_enabled:
        frames, jitter = color_jitter(frames, config.jitter, config.jitter_mode, rng)
        if mask is not None:
            post_sum = mask_region_checksum(frames, mask)
    elif mask is not None:
        post_sum = pre_sum

    return SequenceSample(
        frames=frames,
        label=label,
        label_index=label_index,
        plan=plan,
        mask=mask,
        jitter=jitter,
        seed_material=seed_material,
        source_path=source.origin,
        source_frame_index=source.frame_index,
        mask_region_checksum_pre=pre_sum,
        mask_region_checksum_post=post_sum,
    )


def generate_batch(
    source: SourceImage,
    config: GenConfig,
    source_index: int,
    pool: LabelPool | None = None,
) -> list[SequenceSample]:
    """One sample per pool label, in pool order, all from the same source.

    Per-sample generators are derived from (seed, source_index, epoch,
    label_index), so the batch is reproducible sample by sample.
    """
    if pool is None:
        pool = build_label_pool(config.k, config.axis)
    samples = []
    for label_index, label in enumerate(pool.labels):
        rng, derived = sample_rng(config.seed, source_index, config.epoch, label_index)
        material = SeedMaterialTuple(
            seed=config.seed,
            source_index=source_index,
            epoch=config.epoch,
            label_index=label_index,
            derived=derived,
        )
        samples.append(
            generate_sample(source, label, config, rng, pool=pool, seed_material=material)
        )
    return samples
