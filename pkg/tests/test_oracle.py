import json

import numpy as np
import pytest

from stillmotion.compositor import generate_batch, prepare_source
from stillmotion.config import GenConfig
from stillmotion.dataset_io import read_manifest, write_manifest
from stillmotion.errors import OracleError
from stillmotion.labels import build_label_pool
from stillmotion.oracle import (
    classify_modes,
    classify_sample,
    default_search_radius,
    estimate_displacement,
    verify_dataset,
)
from stillmotion.pipeline import generate_dataset
from stillmotion.synthetic import make_textured_image

POOL = build_label_pool(2, "both")


def _window_pair(tex, x0, y0, dx, dy, L=96):
    """Two crops of one texture with the window shifted by (dx, dy)."""
    a = tex[y0 : y0 + L, x0 : x0 + L]
    b = tex[y0 + dy : y0 + dy + L, x0 + dx : x0 + dx + L]
    return np.stack([a, b])


def test_identical_frames_estimate_zero():
    tex = make_textured_image(1, 200, 200)
    frames = np.stack([tex[:96, :96]] * 5)
    est = estimate_displacement(frames, (0, 0, 96, 96), search_radius=8)
    assert est.per_step == ((0, 0),) * 4
    assert est.total == (0, 0)
    assert est.confidence == 1.0


def test_planted_shifts_recovered_exactly():
    tex = make_textured_image(2, 300, 300)
    for dx in range(-8, 9, 2):
        for dy in range(-8, 9, 2):
            frames = _window_pair(tex, 100, 100, dx, dy)
            est = estimate_displacement(frames, (0, 0, 96, 96), search_radius=8)
            assert est.per_step[0] == (dx, dy), f"planted ({dx},{dy})"
            assert est.total == (dx, dy)
            assert est.confidence == 1.0


def test_total_is_sum_of_steps():
    tex = make_textured_image(3, 400, 300)
    crops = [tex[50 : 50 + 96, x : x + 96] for x in (10, 17, 24, 31)]
    est = estimate_displacement(np.stack(crops), (0, 0, 96, 96), search_radius=10)
    assert est.per_step == ((7, 0), (7, 0), (7, 0))
    assert est.total == (21, 0)


def test_noise_scores_below_planted_match():
    rng = np.random.default_rng(4)
    noise = rng.integers(0, 256, size=(3, 96, 96, 3), dtype=np.uint8)
    noisy = estimate_displacement(noise, (0, 0, 96, 96), search_radius=6)
    tex = make_textured_image(5, 300, 300)
    planted = estimate_displacement(
        _window_pair(tex, 80, 80, 3, 0), (0, 0, 96, 96), search_radius=6
    )
    assert noisy.confidence < 0.9 < planted.confidence


def test_region_too_small_raises():
    frames = np.zeros((2, 64, 64, 3), dtype=np.uint8)
    with pytest.raises(OracleError):
        estimate_displacement(frames, (0, 0, 10, 10), search_radius=16)


def test_default_radius_covers_max_step():
    assert default_search_radius(320, 112, 16) == 16
    assert default_search_radius(320, 112, 8) >= (320 - 112) / 7


def test_classify_round_trip_all_modes(textured_image):
    src = prepare_source(textured_image, 320, np.random.default_rng(0))
    cfg = GenConfig(mask_enabled=False, jitter_enabled=False)
    for sample in generate_batch(src, cfg, source_index=0):
        res = classify_modes(sample, POOL)
        assert res["white"][0] == sample.label_index
        assert res["black"][0] == sample.label_index
        assert res["white"][1].total == res["black"][1].total or sample.label == (0, 0)


def test_classify_masked_white_box(textured_image):
    src = prepare_source(textured_image, 320, np.random.default_rng(1))
    cfg = GenConfig(mask_enabled=True, jitter_enabled=False)
    batch = generate_batch(src, cfg, source_index=0)
    hits = sum(classify_sample(s, POOL, mode="white")[0] == s.label_index for s in batch)
    assert hits >= 8  # of 9


def test_flat_content_is_unclassifiable():
    flat = np.full((8, 112, 112, 3), 128, dtype=np.uint8)

    class Stub:
        frames = flat
        mask = None

        class plan:
            source_dims = (320, 320)

    idx, est = classify_sample(Stub(), POOL, mode="white")
    assert idx is None
    assert est.flat_steps > 3


def test_classify_never_leaves_pool(textured_image):
    src = prepare_source(textured_image, 320, np.random.default_rng(2))
    cfg = GenConfig(mask_enabled=True, jitter_enabled=True)  # hardest case
    for sample in generate_batch(src, cfg, source_index=0):
        idx, _ = classify_sample(sample, POOL, mode="black")
        assert idx is None or 0 <= idx < POOL.size


# ---------------------------------------------------------------------------
# dataset-level verification


@pytest.fixture(scope="module")
def clean_dataset(tmp_path_factory):
    """2 textured sources, mask off, jitter off, raw clips: 18 samples."""
    from stillmotion.synthetic import write_texture_corpus

    src_dir = tmp_path_factory.mktemp("oracle_src")
    write_texture_corpus(src_dir, count=2, seed=31)
    out = tmp_path_factory.mktemp("oracle_out")
    cfg = GenConfig(mask_enabled=False, jitter_enabled=False, output_format="raw", seed=5)
    return generate_dataset(cfg, src_dir, out)


def test_verify_clean_dataset(clean_dataset):
    report = verify_dataset(clean_dataset, mode="white", workers=2)
    assert report.samples_checked == 18
    assert report.label_agreement == 1.0
    assert report.mask_exactness_failures == 0
    assert report.unclassifiable == 0
    confusion = np.array(report.per_class_confusion)
    assert confusion.trace() == 18
    assert confusion.sum(axis=1).tolist() == [2] * 9  # row sums = per-class counts
    assert report.mean_confidence > 0.9


def test_verify_is_schedule_invariant(clean_dataset):
    seq = verify_dataset(clean_dataset, mode="black", workers=1)
    par = verify_dataset(clean_dataset, mode="black", workers=4)
    assert seq.to_dict() == par.to_dict()


def test_verify_permuted_labels_drops_to_chance(clean_dataset, tmp_path):
    records = read_manifest(clean_dataset)
    rng = np.random.default_rng(17)
    for rec in records:
        fake = int(rng.integers(0, POOL.size))
        rec["label_index"] = fake
        rec["label_xy"] = list(POOL.label_at(fake))
    out = tmp_path / "permuted"
    out.mkdir()
    # frames stay where they are; point the permuted manifest at them
    for clip in clean_dataset.parent.glob("*.clip"):
        (out / clip.name).write_bytes(clip.read_bytes())
    manifest = write_manifest(records, out)
    report = verify_dataset(manifest, mode="white")
    assert report.label_agreement < 0.45  # chance is ~0.11 on 18 samples


def test_verify_empty_manifest(tmp_path):
    manifest = tmp_path / "manifest.jsonl"
    manifest.write_text("")
    report = verify_dataset(manifest)
    assert report.empty is True
    assert report.samples_checked == 0


def test_verify_details_rows(clean_dataset):
    report = verify_dataset(clean_dataset, mode="white", details=True)
    assert report.details is not None and len(report.details) == 18
    row = report.details[0]
    assert {"sample_id", "true", "predicted", "confidence"} <= row.keys()


def test_white_box_beats_black_box_on_masked_data(tmp_path_factory):
    from stillmotion.synthetic import write_texture_corpus

    src_dir = tmp_path_factory.mktemp("masked_src")
    write_texture_corpus(src_dir, count=2, seed=47)
    out = tmp_path_factory.mktemp("masked_out")
    cfg = GenConfig(jitter_enabled=False, output_format="raw", seed=6)
    manifest = generate_dataset(cfg, src_dir, out)
    white = verify_dataset(manifest, mode="white")
    black = verify_dataset(manifest, mode="black")
    assert white.label_agreement >= black.label_agreement
    assert white.mask_exactness_failures == 0


def test_report_serializes_to_json(clean_dataset):
    report = verify_dataset(clean_dataset, mode="black")
    parsed = json.loads(json.dumps(report.to_dict()))
    assert parsed["samples_checked"] == 18
    assert parsed["mode"] == "black"
