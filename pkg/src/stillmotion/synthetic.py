"""Procedural textured test images.

Multi-octave value noise with a random color palette plus a few solid
shapes.  The result is deliberately photo-like in the one property the
block-matching oracle needs: dense, non-repeating local texture.  Used
by the demos, benchmarks and tests when no photo corpus is available.
"""

from __future__ import annotations

import numpy as np
from PIL import Image


def make_textured_image(seed: int, height: int = 480, width: int = 640) -> np.ndarray:
    """Deterministic HxWx3 uint8 texture for the given seed."""
    rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(0x7E57,)))

    field = np.zeros((height, width), dtype=np.float64)
    amp = 1.0
    for cells in (4, 8, 16, 32, 64):
        grid = rng.random((cells, cells))
        up = np.asarray(
            Image.fromarray((grid * 255).astype(np.uint8)).resize((width, height), Image.BILINEAR),
            dtype=np.float64,
        )
        field += amp * up / 255.0
        amp *= 0.55
    field -= field.min()
    field /= max(field.max(), 1e-9)

    # map the scalar field through a random smooth palette
    stops = rng.random((4, 3))
    t = field[..., None] * 3.0
    k = np.clip(t.astype(np.int64), 0, 2)
    frac = t - k
    img = stops[k[..., 0]] * (1 - frac) + stops[k[..., 0] + 1] * frac

    # a few solid shapes for larger-scale structure
    yy, xx = np.mgrid[0:height, 0:width]
    for _ in range(6):
        cy, cx = rng.integers(0, height), rng.integers(0, width)
        r = int(rng.integers(min(height, width) // 12, min(height, width) // 4))
        color = rng.random(3)
        blob = ((yy - cy) ** 2 + (xx - cx) ** 2) < r * r
        img[blob] = 0.65 * img[blob] + 0.35 * color

    # fine grain so no region is perfectly flat
    img += rng.normal(0.0, 0.015, size=img.shape)
    return np.clip(img * 255.0, 0, 255).astype(np.uint8)


def write_texture_corpus(out_dir, count: int = 50, seed: int = 0, size: tuple[int, int] = (480, 640)) -> list:
    """Write `count` deterministic textures as PNGs; returns the paths."""
    from pathlib import Path

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = []
    for i in range(count):
        img = make_textured_image(seed * 100003 + i, *size)
        path = out_dir / f"texture_{i:04d}.png"
        Image.fromarray(img).save(path)
        paths.append(path)
    return paths
