import numpy as np
import pytest

from earforge.augmentation import (
    STAGE1_SPEC,
    STAGE2_SPEC,
    AugmentSpec,
    _descriptor_augment,
    augment_descriptor_training,
    augment_landmark_training,
    balance_subjects,
    denormalize_target,
    normalize_target,
)
from earforge.exceptions import BadInputSizeError, EmptySubjectError
from earforge.synthetic import random_ear_shape, render_standard


@pytest.fixture(scope="module")
def annotated_ear():
    shape = random_ear_shape(np.random.default_rng(11))
    return render_standard(shape, size=160, rng=12, rotation=8.0)


class TestRotationSweep:
    def test_stage_specs_have_31_angles(self):
        assert len(STAGE1_SPEC.rotation_angles()) == 31
        assert len(STAGE2_SPEC.rotation_angles()) == 31

    def test_count_formula(self):
        spec = AugmentSpec(-10.0, 10.0, 4.0, 0.1, 0.1)
        assert len(spec.rotation_angles()) == int((10 - -10) / 4) + 1

    def test_invalid_specs_rejected(self):
        with pytest.raises(ValueError):
            AugmentSpec(5.0, -5.0, 1.0, 0.1, 0.1)
        with pytest.raises(ValueError):
            AugmentSpec(-5.0, 5.0, 0.0, 0.1, 0.1)
        with pytest.raises(ValueError):
            AugmentSpec(-5.0, 5.0, 1.0, 1.5, 0.1)


class TestLandmarkAugmentation:
    def test_one_sample_per_rotation(self, annotated_ear):
        img, lm = annotated_ear
        samples = augment_landmark_training(img, lm, STAGE2_SPEC, rng_seed=0)
        assert len(samples) == 31
        for out, target in samples:
            assert out.shape == (96, 96)
            assert target.shape == (110,)

    def test_zero_jitter_single_rotation_round_trip(self, annotated_ear):
        img, lm = annotated_ear
        spec = AugmentSpec(0.0, 0.0, 1.0, scale_jitter=0.0, translation_jitter=0.0)
        [(out, target)] = augment_landmark_training(img, lm, spec, rng_seed=0)
        # Targets should stay within the frame and denormalize consistently.
        pts = denormalize_target(target, 96)
        assert np.abs(target).max() <= 1.0
        assert pts.shape == (55, 2)
        # The upright ear's bbox center lands mid-frame.
        mid = (pts.min(axis=0) + pts.max(axis=0)) / 2
        assert np.allclose(mid, [47.5, 47.5], atol=1.0)

    def test_targets_mostly_in_range_stage1(self, annotated_ear):
        img, lm = annotated_ear
        samples = augment_landmark_training(img, lm, STAGE1_SPEC, rng_seed=3)
        flat = np.concatenate([t for _, t in samples])
        assert np.mean(np.abs(flat) <= 1.0) >= 0.99

    def test_same_seed_bit_identical(self, annotated_ear):
        img, lm = annotated_ear
        a = augment_landmark_training(img, lm, STAGE1_SPEC, rng_seed=5)
        b = augment_landmark_training(img, lm, STAGE1_SPEC, rng_seed=5)
        for (ia, ta), (ib, tb) in zip(a, b):
            assert np.array_equal(ia, ib)
            assert np.array_equal(ta, tb)

    def test_normalize_target_round_trip(self, rng):
        pts = rng.uniform(0, 96, size=(55, 2))
        assert np.allclose(denormalize_target(normalize_target(pts, 96), 96), pts)


class TestDescriptorAugmentation:
    def test_degenerate_draw_is_identity(self, rng):
        img = rng.random((128, 128))
        out = _descriptor_augment(img, angle_deg=0.0, crop_frac=1.0, fx=0.0,
                                  fy=0.0, contrast=1.0)
        assert np.allclose(out, img, atol=1e-12)

    def test_fixed_seed_bit_identical(self, rng):
        img = rng.random((128, 128))
        a = augment_descriptor_training(img, rng_seed=9)
        b = augment_descriptor_training(img, rng_seed=9)
        assert np.array_equal(a, b)
        assert a.shape == (128, 128)

    def test_wrong_size_rejected(self, rng):
        with pytest.raises(BadInputSizeError):
            augment_descriptor_training(rng.random((96, 96)), rng_seed=0)


def make_rows(counts):
    rows = []
    for subj, k in counts.items():
        for i in range(k):
            rows.append({"image_id": f"{subj}_{i}", "subject_id": subj,
                         "image_path": f"{subj}_{i}.png"})
    return rows


class TestBalanceSubjects:
    def test_expansion_to_target(self):
        rows = make_rows({"a": 10})
        out = balance_subjects(rows, 200, rng_seed=0)
        assert len(out) == 200
        per_original = {}
        seeds = set()
        for entry in out:
            per_original[entry["image_id"]] = per_original.get(entry["image_id"], 0) + 1
            seeds.add(entry["aug_seed"])
        assert all(v == 20 for v in per_original.values())
        assert len(seeds) == 200  # distinct augmentation seeds

    def test_exact_count_unchanged(self):
        rows = make_rows({"a": 7})
        out = balance_subjects(rows, 7, rng_seed=0)
        assert len(out) == 7
        assert [e["image_id"] for e in out] == [r["image_id"] for r in rows]
        assert all(not e["augment"] for e in out)

    def test_uneven_distribution_pigeonhole(self):
        rows = make_rows({"a": 3})
        out = balance_subjects(rows, 10, rng_seed=1)
        counts = {}
        for e in out:
            counts[e["image_id"]] = counts.get(e["image_id"], 0) + 1
        assert sorted(counts.values()) in ([3, 3, 4], [3, 4, 3])
        assert sum(counts.values()) == 10

    def test_multiple_subjects_independent(self):
        rows = make_rows({"a": 2, "b": 5})
        out = balance_subjects(rows, 10, rng_seed=2)
        per_subject = {}
        for e in out:
            per_subject[e["subject_id"]] = per_subject.get(e["subject_id"], 0) + 1
        assert per_subject == {"a": 10, "b": 10}

    def test_empty_subject_rejected(self):
        with pytest.raises(EmptySubjectError):
            balance_subjects([{"image_id": "x", "subject_id": ""}], 5, rng_seed=0)
