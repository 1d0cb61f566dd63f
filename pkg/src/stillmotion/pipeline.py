"""Dataset generation orchestration.

Generation is embarrassingly parallel across sources: every sample's
randomness is derived from (seed, source_index, epoch, label_index), so
worker count and scheduling cannot change a single output byte.  Workers
write their own frame files; the parent collects the records and writes
one manifest sorted by sample_id.
"""

from __future__ import annotations

import time
from dataclasses import replace
from pathlib import Path

from .compositor import SequenceSample, generate_batch, generate_sample, prepare_source
from .config import GenConfig
from .dataset_io import (
    SourceRef,
    enumerate_sources,
    load_image,
    sample_record,
    write_manifest,
    write_sample_frames,
)
from .errors import DatasetError
from .labels import LabelPool, build_label_pool
from .seeding import sample_rng, source_prep_rng


def prepare_ref(config: GenConfig, ref: SourceRef, source_index: int | None = None):
    """Load and prepare one enumerated source for batch generation."""
    idx = ref.index if source_index is None else source_index
    image = load_image(ref.path)
    rng = source_prep_rng(config.seed, idx, config.epoch)
    return prepare_source(
        image, config.source_size, rng, origin=ref.rel, frame_index=ref.frame_index
    )


def batch_for_source(
    config: GenConfig,
    ref: SourceRef,
    pool: LabelPool | None = None,
    source_index: int | None = None,
) -> list[SequenceSample]:
    idx = ref.index if source_index is None else source_index
    source = prepare_ref(config, ref, idx)
    return generate_batch(source, config, source_index=idx, pool=pool)


def _run_source(args) -> list[dict]:
    config, ref, out_dir = args
    records = []
    for sample in batch_for_source(config, ref):
        rec = sample_record(sample, config)
        write_sample_frames(rec["sample_id"], sample.frames, Path(out_dir), config.output_format)
        records.append(rec)
    return records


def generate_dataset(
    config: GenConfig,
    input_dir: str | Path,
    out_dir: str | Path,
    workers: int = 1,
) -> Path:
    """Generate one epoch over every source in `input_dir`; returns the manifest path."""
    config.validate()
    refs = enumerate_sources(input_dir, config.input_mode, config.epoch, config.seed)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    tasks = [(config, ref, str(out_dir)) for ref in refs]
    records: list[dict] = []
    if workers <= 1:
        for task in tasks:
            records.extend(_run_source(task))
    else:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=workers) as ex:
            for recs in ex.map(_run_source, tasks):
                records.extend(recs)

    seen = set()
    for rec in records:
        if rec["sample_id"] in seen:
            raise DatasetError(f"duplicate sample id {rec['sample_id']}")
        seen.add(rec["sample_id"])
    return write_manifest(records, out_dir)


def regenerate_sample(record: dict, input_dir: str | Path) -> SequenceSample:
    """Re-run the full pipeline for one manifest record.

    Given the same source files, the result is byte-identical to the
    stored sample (checksums can be compared against the record).
    """
    config = GenConfig.from_dict(record["config"]).validate()
    source_index = record["source_index"]
    epoch = record["epoch"]
    label_index = record["label_index"]
    config = replace(config, epoch=epoch)

    image = load_image(Path(input_dir) / record["source_path"])
    prep = source_prep_rng(config.seed, source_index, epoch)
    source = prepare_source(
        image,
        config.source_size,
        prep,
        origin=record["source_path"],
        frame_index=record.get("source_frame_index"),
    )
    pool = build_label_pool(config.k, config.axis)
    rng, _ = sample_rng(config.seed, source_index, epoch, label_index)
    from .seeding import SeedMaterialTuple

    material = SeedMaterialTuple(
        seed=config.seed,
        source_index=source_index,
        epoch=epoch,
        label_index=label_index,
        derived=record["seed"],
    )
    return generate_sample(
        source, pool.label_at(label_index), config, rng, pool=pool, seed_material=material
    )


def run_benchmark(config: GenConfig, input_dir: str | Path, duration: float = 10.0) -> dict:
    """Generate batches in memory for `duration` seconds; report throughput."""
    config.validate()
    refs = enumerate_sources(input_dir, config.input_mode, config.epoch, config.seed)
    pool = build_label_pool(config.k, config.axis)

    batches = samples = nbytes = 0
    cursor = 0
    start = time.perf_counter()
    while True:
        ref = refs[cursor % len(refs)]
        batch = batch_for_source(config, ref, pool=pool, source_index=cursor)
        cursor += 1
        batches += 1
        samples += len(batch)
        nbytes += sum(s.frames.nbytes for s in batch)
        elapsed = time.perf_counter() - start
        if elapsed >= duration:
            break
    return {
        "duration_s": elapsed,
        "batches": batches,
        "samples": samples,
        "bytes": nbytes,
        "batches_per_s": batches / elapsed,
        "samples_per_s": samples / elapsed,
        "mb_per_s": nbytes / elapsed / 1e6,
        "config": config.to_dict(),
    }
