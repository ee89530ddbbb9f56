import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from earforge.descriptors.base import Descriptor
from earforge.exceptions import (
    IdMismatchError,
    LengthMismatchError,
    MetricMismatchError,
    NotNormalizedError,
    TooFewGalleryError,
)
from earforge.matching import (
    CHI_SQUARE_EPS,
    ScoreMatrix,
    distance,
    export_score_csv,
    fuse,
    load_score_matrix,
    minmax_normalize,
    save_score_matrix,
    score_matrix,
)


def desc(values, metric="chi-square", kind="lbp"):
    return Descriptor(values=np.asarray(values, dtype=np.float64), metric=metric,
                      kind=kind)


def chi2_oracle(a, b):
    return sum((x - y) ** 2 / (x + y + CHI_SQUARE_EPS) for x, y in zip(a, b))


class TestDistance:
    def test_identical_is_zero_all_metrics(self, rng):
        for metric, kind in (("chi-square", "lbp"), ("cosine", "gabor"),
                             ("whitened-euclidean", "pca")):
            v = np.abs(rng.random(16))
            d = distance(desc(v, metric, kind), desc(v.copy(), metric, kind))
            assert 0.0 <= d <= 1e-12

    def test_chi_square_disjoint_masses(self):
        d = distance(desc([1.0, 0.0]), desc([0.0, 1.0]))
        assert d == pytest.approx(2.0, abs=1e-9)

    def test_cosine_orthogonal(self):
        a = desc([1.0, 0.0], "cosine", "gabor")
        b = desc([0.0, 1.0], "cosine", "gabor")
        assert distance(a, b) == pytest.approx(1.0, abs=1e-9)

    def test_whitened_euclidean_norm(self):
        a = desc([1.0, 2.0], "whitened-euclidean", "pca")
        b = desc([4.0, 6.0], "whitened-euclidean", "pca")
        assert distance(a, b) == pytest.approx(5.0)

    def test_metric_and_length_mismatches(self, rng):
        a = desc(rng.random(4))
        with pytest.raises(MetricMismatchError):
            distance(a, desc(rng.random(4), "cosine", "gabor"))
        with pytest.raises(LengthMismatchError):
            distance(a, desc(rng.random(5)))

    @given(st.lists(st.floats(0.0, 10.0), min_size=3, max_size=8),
           st.lists(st.floats(0.0, 10.0), min_size=3, max_size=8))
    @settings(max_examples=200, deadline=None)
    def test_metric_axioms_chi_square(self, xs, ys):
        n = min(len(xs), len(ys))
        a, b = desc(xs[:n]), desc(ys[:n])
        dab = distance(a, b)
        assert dab >= 0.0
        assert distance(a, a) == 0.0
        assert abs(dab - distance(b, a)) < 1e-12

    def test_symmetry_all_metrics(self, rng):
        for metric, kind in (("chi-square", "lbp"), ("cosine", "gabor"),
                             ("whitened-euclidean", "pca")):
            vals = rng.random((20, 12)) if metric != "whitened-euclidean" else \
                rng.standard_normal((20, 12))
            for i in range(0, 20, 2):
                a = desc(vals[i], metric, kind)
                b = desc(vals[i + 1], metric, kind)
                assert distance(a, b) >= 0.0
                assert abs(distance(a, b) - distance(b, a)) < 1e-12


class TestScoreMatrix:
    def test_single_self_pair(self, rng):
        v = [desc(np.abs(rng.random(6)))]
        m = score_matrix(["x"], v, ["x"], v)
        assert m.scores.shape == (1, 1)
        assert m.scores[0, 0] == 0.0
        assert m.self_mask[0, 0]

    def test_two_by_two_composition(self, rng):
        probes = [desc(np.abs(rng.random(6))) for _ in range(2)]
        gallery = [desc(np.abs(rng.random(6))) for _ in range(2)]
        m = score_matrix(["p0", "p1"], probes, ["g0", "g1"], gallery)
        for i in range(2):
            for j in range(2):
                assert m.scores[i, j] == pytest.approx(
                    distance(probes[i], gallery[j]), abs=1e-12)

    def test_matches_brute_force_oracle(self, rng):
        probes = [desc(np.abs(rng.random(9))) for _ in range(10)]
        gallery = [desc(np.abs(rng.random(9))) for _ in range(15)]
        m = score_matrix([f"p{i}" for i in range(10)], probes,
                         [f"g{j}" for j in range(15)], gallery)
        for i in range(10):
            for j in range(15):
                assert m.scores[i, j] == pytest.approx(
                    chi2_oracle(probes[i].values, gallery[j].values), rel=1e-9)

    def test_mixed_metrics_rejected(self, rng):
        a = [desc(rng.random(4))]
        b = [desc(rng.random(4), "cosine", "gabor")]
        with pytest.raises(MetricMismatchError):
            score_matrix(["a"], a, ["b"], b)

    def test_round_trip_persistence(self, tmp_path, rng):
        m = ScoreMatrix(["p0", "p1"], ["g0", "g1", "g2"], rng.random((2, 3)),
                        normalized=False, kind="hog")
        save_score_matrix(m, tmp_path / "mat")
        back = load_score_matrix(tmp_path / "mat")
        assert back.probe_ids == m.probe_ids
        assert back.gallery_ids == m.gallery_ids
        assert np.allclose(back.scores, m.scores, atol=1e-6)  # float32 container
        export_score_csv(back, tmp_path / "mat.csv")
        assert (tmp_path / "mat.csv").read_text().startswith("probe_id,g0,g1,g2")


class TestMinMaxNormalize:
    def test_simple_row(self):
        m = ScoreMatrix(["p"], ["a", "b", "c"], np.array([[2.0, 4.0, 6.0]]))
        out = minmax_normalize(m)
        assert np.allclose(out.scores, [[0.0, 0.5, 1.0]])
        assert out.normalized

    def test_constant_row_maps_to_half(self):
        m = ScoreMatrix(["p"], ["a", "b", "c"], np.array([[3.0, 3.0, 3.0]]))
        out = minmax_normalize(m)
        assert np.allclose(out.scores, 0.5)

    def test_idempotent(self, rng):
        m = ScoreMatrix([f"p{i}" for i in range(5)],
                        [f"g{j}" for j in range(7)], rng.random((5, 7)))
        once = minmax_normalize(m)
        twice = minmax_normalize(once)
        assert np.allclose(once.scores, twice.scores, atol=1e-12, equal_nan=True)

    def test_self_pairs_become_nan(self, rng):
        ids = ["a", "b", "c"]
        m = ScoreMatrix(ids, ids, rng.random((3, 3)))
        out = minmax_normalize(m)
        assert np.all(np.isnan(np.diag(out.scores)))
        off = out.scores[~np.eye(3, dtype=bool)]
        assert np.nanmin(off) == 0.0 and np.nanmax(off) == 1.0

    def test_rank_preservation_per_row(self, rng):
        m = ScoreMatrix([f"p{i}" for i in range(4)],
                        [f"g{j}" for j in range(9)], rng.random((4, 9)))
        out = minmax_normalize(m)
        for i in range(4):
            assert np.array_equal(np.argsort(m.scores[i]), np.argsort(out.scores[i]))

    def test_too_few_gallery(self):
        m = ScoreMatrix(["a"], ["a", "b"], np.array([[0.0, 1.0]]))
        with pytest.raises(TooFewGalleryError):
            minmax_normalize(m)


def normalized_random(rng, probe_ids, gallery_ids, kind="k"):
    raw = ScoreMatrix(probe_ids, gallery_ids,
                      rng.random((len(probe_ids), len(gallery_ids))), kind=kind)
    return minmax_normalize(raw)


class TestFuse:
    def test_single_matcher_identity(self, rng):
        m = normalized_random(rng, ["p0", "p1"], ["g0", "g1", "g2"])
        out = fuse([m], "sum")
        assert np.allclose(out.scores, m.scores, equal_nan=True)

    def test_sum_is_mean(self, rng):
        ids_p, ids_g = ["p"], ["g0", "g1", "g2"]
        a = ScoreMatrix(ids_p, ids_g, np.array([[0.2, 0.5, 1.0]]), normalized=True)
        b = ScoreMatrix(ids_p, ids_g, np.array([[0.6, 0.5, 0.0]]), normalized=True)
        out = fuse([a, b], "sum")
        assert np.allclose(out.scores, [[0.4, 0.5, 0.5]])

    @pytest.mark.parametrize("rule,expected", [
        ("min", [[0.2, 0.5, 0.0]]),
        ("max", [[0.6, 0.5, 1.0]]),
        ("product", [[0.12, 0.25, 0.0]]),
    ])
    def test_other_rules(self, rule, expected):
        ids_p, ids_g = ["p"], ["g0", "g1", "g2"]
        a = ScoreMatrix(ids_p, ids_g, np.array([[0.2, 0.5, 1.0]]), normalized=True)
        b = ScoreMatrix(ids_p, ids_g, np.array([[0.6, 0.5, 0.0]]), normalized=True)
        assert np.allclose(fuse([a, b], rule).scores, expected)

    def test_sum_permutation_invariant(self, rng):
        ms = [normalized_random(rng, ["p0", "p1"], ["g0", "g1", "g2"], kind=str(i))
              for i in range(3)]
        a = fuse(ms, "sum").scores
        b = fuse(ms[::-1], "sum").scores
        assert np.allclose(a, b, equal_nan=True)

    def test_requires_normalized_and_matching_ids(self, rng):
        raw = ScoreMatrix(["p"], ["a", "b"], rng.random((1, 2)))
        norm = normalized_random(rng, ["p"], ["a", "b"])
        with pytest.raises(NotNormalizedError):
            fuse([raw, norm], "sum")
        other = normalized_random(rng, ["p"], ["a", "c"])
        with pytest.raises(IdMismatchError):
            fuse([norm, other], "sum")

    def test_ranking_invariant_to_affine_rescaling(self, rng):
        # Strictly increasing affine maps on raw matchers leave the fused
        # per-probe ranking unchanged after min-max normalization.
        probe_ids = [f"p{i}" for i in range(3)]
        gallery_ids = [f"g{j}" for j in range(8)]
        raws = [ScoreMatrix(probe_ids, gallery_ids, rng.random((3, 8)), kind=str(i))
                for i in range(2)]
        fused = fuse([minmax_normalize(m) for m in raws], "sum")
        scaled = [ScoreMatrix(probe_ids, gallery_ids, 3.5 * raws[0].scores + 2.0,
                              kind="0"),
                  ScoreMatrix(probe_ids, gallery_ids, 0.25 * raws[1].scores - 7.0,
                              kind="1")]
        fused2 = fuse([minmax_normalize(m) for m in scaled], "sum")
        for i in range(3):
            assert np.array_equal(np.argsort(fused.scores[i]),
                                  np.argsort(fused2.scores[i]))
