"""Deterministic per-sample seed derivation.

Every random decision in the generator is owned by a generator derived
from the global seed through numpy's splittable SeedSequence:

    SeedSequence(global_seed, spawn_key=(epoch, source_index, stream))

with three reserved streams:

    stream 0               frame selection for frame-directory sources
    stream 1               source preparation (resize crop offset)
    stream 2 + label_index one stream per sample of the same-batch group

Samples therefore own independent generators regardless of worker count
or generation order, and a manifest record's (seed, epoch, source_index,
label_index) quadruple is enough to replay it bit for bit.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

FRAME_PICK_STREAM = 0
SOURCE_PREP_STREAM = 1
SAMPLE_STREAM_BASE = 2


@dataclass(frozen=True)
class SeedMaterialTuple:
    """The inputs that determined one sample's randomness, plus the
    derived 64-bit value recorded in its manifest entry."""

    seed: int
    source_index: int
    epoch: int
    label_index: int
    derived: int

    @property
    def sample_id(self) -> str:
        return f"e{self.epoch:04d}-s{self.source_index:06d}-c{self.label_index:02d}"


def _sequence(seed: int, epoch: int, source_index: int, stream: int) -> np.random.SeedSequence:
    return np.random.SeedSequence(int(seed), spawn_key=(int(epoch), int(source_index), int(stream)))


def frame_pick_rng(seed: int, source_index: int, epoch: int) -> np.random.Generator:
    """Generator that picks the source frame index for one video directory."""
    return np.random.Generator(np.random.PCG64(_sequence(seed, epoch, source_index, FRAME_PICK_STREAM)))


def source_prep_rng(seed: int, source_index: int, epoch: int) -> np.random.Generator:
    """Generator that drives source preparation, shared by the whole batch."""
    return np.random.Generator(np.random.PCG64(_sequence(seed, epoch, source_index, SOURCE_PREP_STREAM)))


def sample_rng(
    seed: int, source_index: int, epoch: int, label_index: int
) -> tuple[np.random.Generator, int]:
    """Per-sample generator plus the derived 64-bit seed recorded in manifests."""
    seq = _sequence(seed, epoch, source_index, SAMPLE_STREAM_BASE + int(label_index))
    derived = int(seq.generate_state(1, np.uint64)[0])
    return np.random.Generator(np.random.PCG64(seq)), derived
