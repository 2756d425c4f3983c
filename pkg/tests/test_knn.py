"""Neighbor selection and regression against brute-force oracles."""

import numpy as np
import pytest

from kvc import (
    ConfigError,
    DegenerateInputError,
    EmptySetError,
    FeatureSequence,
    InsufficientDataError,
    KnnConfig,
    MatchingSet,
    build_matching_set,
    convert_sequence,
    cosine_distance,
    knn_regress_frame,
    top_k_neighbors,
)


def set_from_vectors(vectors):
    """MatchingSet over explicit raw vectors (one synthetic utterance)."""
    seq = FeatureSequence.from_frames(
        np.asarray(vectors, dtype=np.float32), metadata={"utterance_id": "u"}
    )
    return build_matching_set([seq])


def oracle_top_k(query, mset, k):
    """Full-sort reference: per-row float64 dot products, ties by index."""
    q = np.asarray(query, dtype=np.float64)
    q = q / np.linalg.norm(q)
    distances = [
        1.0 - float(np.dot(row.astype(np.float64), q)) for row in mset.unit_vectors
    ]
    order = sorted(range(mset.size), key=lambda i: (distances[i], i))
    chosen = order[: min(k, mset.size)]
    return chosen, [distances[i] for i in chosen]


def oracle_regress(query, mset, k):
    chosen, _ = oracle_top_k(query, mset, k)
    stacked = mset.vectors[chosen].astype(np.float64)
    return stacked.mean(axis=0)


class TestKnnConfig:
    def test_defaults(self):
        config = KnnConfig()
        assert (config.k, config.metric, config.weighting, config.k_overflow) == (
            4,
            "cosine",
            "uniform",
            "clamp",
        )

    @pytest.mark.parametrize(
        "kwargs",
        [
            {"k": 0},
            {"metric": "euclidean"},
            {"weighting": "distance"},
            {"k_overflow": "wrap"},
        ],
    )
    def test_invalid_values(self, kwargs):
        with pytest.raises(ConfigError):
            KnnConfig(**kwargs)


class TestCosineDistance:
    def test_identical_unit_vectors(self):
        e = np.zeros(4, dtype=np.float32)
        e[1] = 1.0
        assert cosine_distance(e, e) == 0.0

    def test_orthogonal(self):
        a = np.array([1.0, 0.0, 0.0])
        b = np.array([0.0, 1.0, 0.0])
        assert cosine_distance(a, b) == 1.0

    def test_antipodal(self):
        a = np.array([0.0, 0.0, 1.0])
        assert cosine_distance(a, -a) == 2.0

    def test_symmetry_and_range(self):
        rng = np.random.default_rng(0)
        for _ in range(50):
            a = rng.normal(size=8)
            b = rng.normal(size=8)
            a /= np.linalg.norm(a)
            b /= np.linalg.norm(b)
            d_ab = cosine_distance(a, b)
            assert d_ab == cosine_distance(b, a)
            assert 0.0 <= d_ab <= 2.0

    def test_dim_mismatch(self):
        with pytest.raises(ConfigError):
            cosine_distance(np.ones(3), np.ones(4))


class TestTopKNeighbors:
    def test_exact_member_query(self):
        mset = set_from_vectors(np.eye(5))
        result = top_k_neighbors(np.eye(5)[3], mset, KnnConfig(k=1))
        assert result.indices.tolist() == [3]
        assert result.distances.tolist() == [0.0]

    def test_duplicate_rows_tie_break_by_index(self):
        mset = set_from_vectors(np.tile([1.0, 2.0, 3.0], (6, 1)))
        result = top_k_neighbors([2.0, 1.0, 0.5], mset, KnnConfig(k=3))
        assert result.indices.tolist() == [0, 1, 2]
        assert np.all(result.distances == result.distances[0])

    def test_boundary_ties_resolve_by_index(self):
        # Rows 0..3 identical at the k-th distance; with k=2 the winner set
        # must be the two lowest indices, whatever the partition order was.
        vectors = np.array(
            [[1.0, 1.0], [1.0, 1.0], [1.0, 1.0], [1.0, 1.0], [-1.0, 0.1]]
        )
        mset = set_from_vectors(vectors)
        result = top_k_neighbors([1.0, 1.0], mset, KnnConfig(k=2))
        assert result.indices.tolist() == [0, 1]

    def test_matches_oracle_200x16_k8(self):
        rng = np.random.default_rng(42)
        mset = set_from_vectors(rng.normal(size=(200, 16)))
        query = rng.normal(size=16)
        expected_idx, expected_dist = oracle_top_k(query, mset, 8)
        result = top_k_neighbors(query, mset, KnnConfig(k=8))
        assert result.indices.tolist() == expected_idx
        np.testing.assert_allclose(result.distances, expected_dist, rtol=0, atol=1e-12)

    def test_matches_oracle_randomized(self):
        rng = np.random.default_rng(7)
        for _ in range(100):
            n = int(rng.integers(1, 300))
            dim = int(rng.integers(2, 32))
            k = int(rng.integers(1, 13))
            mset = set_from_vectors(rng.normal(size=(n, dim)))
            query = rng.normal(size=dim)
            expected_idx, _ = oracle_top_k(query, mset, k)
            result = top_k_neighbors(query, mset, KnnConfig(k=k))
            assert result.indices.tolist() == expected_idx

    def test_k_overflow_clamps_with_warning(self):
        mset = set_from_vectors(np.eye(3))
        with pytest.warns(UserWarning, match="clamping"):
            result = top_k_neighbors([1.0, 0.0, 0.0], mset, KnnConfig(k=10))
        assert result.k == 3

    def test_k_overflow_error_mode(self):
        mset = set_from_vectors(np.eye(3))
        with pytest.raises(InsufficientDataError):
            top_k_neighbors([1.0, 0.0, 0.0], mset, KnnConfig(k=10, k_overflow="error"))

    def test_empty_set(self):
        empty = MatchingSet(
            vectors=np.empty((0, 3), dtype=np.float32),
            unit_vectors=np.empty((0, 3), dtype=np.float32),
            source=(),
        )
        with pytest.raises(EmptySetError):
            top_k_neighbors([1.0, 0.0, 0.0], empty, KnnConfig(k=1))

    def test_zero_norm_query_rejected(self):
        mset = set_from_vectors(np.eye(3))
        with pytest.raises(DegenerateInputError):
            top_k_neighbors([0.0, 0.0, 0.0], mset, KnnConfig(k=1))

    def test_dim_mismatch(self):
        mset = set_from_vectors(np.eye(3))
        with pytest.raises(ConfigError):
            top_k_neighbors([1.0, 0.0], mset, KnnConfig(k=1))


class TestRegression:
    def test_k1_exact_member_returns_raw_vector(self):
        rng = np.random.default_rng(1)
        vectors = rng.normal(size=(20, 8)).astype(np.float32)
        mset = set_from_vectors(vectors)
        out = knn_regress_frame(vectors[11], mset, KnnConfig(k=1))
        np.testing.assert_array_equal(out, vectors[11])

    def test_identical_rows_mean_is_the_row(self):
        v = np.array([0.5, -1.5, 2.0], dtype=np.float32)
        mset = set_from_vectors(np.tile(v, (7, 1)))
        for k in (1, 3, 7):
            np.testing.assert_allclose(
                knn_regress_frame([1.0, 0.0, 0.0], mset, KnnConfig(k=k)), v, atol=1e-7
            )

    def test_two_nearest_of_three_dim2(self):
        # Neighbor ranking certified by computing all three cosine
        # distances right here before asserting the mean.
        vectors = np.array([[1.0, 0.0], [0.0, 1.0], [-1.0, 0.0]])
        query = np.array([1.0, 0.1]) / np.linalg.norm([1.0, 0.1])
        dists = [
            1.0 - np.dot(v / np.linalg.norm(v), query) for v in vectors
        ]
        assert np.argsort(dists).tolist() == [0, 1, 2]
        mset = set_from_vectors(vectors)
        out = knn_regress_frame(query, mset, KnnConfig(k=2))
        np.testing.assert_allclose(out, [0.5, 0.5], atol=1e-7)

    def test_matches_oracle_mean(self):
        rng = np.random.default_rng(3)
        for _ in range(25):
            n = int(rng.integers(4, 200))
            dim = int(rng.integers(2, 24))
            k = int(rng.integers(1, 9))
            mset = set_from_vectors(rng.normal(size=(n, dim)))
            query = rng.normal(size=dim)
            expected = oracle_regress(query, mset, k)
            out = knn_regress_frame(query, mset, KnnConfig(k=k))
            np.testing.assert_allclose(out, expected, rtol=1e-5)


class TestConvertSequence:
    def test_empty_query(self):
        mset = set_from_vectors(np.eye(4))
        query = FeatureSequence.from_frames(np.empty((0, 4), dtype=np.float32))
        out = convert_sequence(query, mset, KnnConfig())
        assert out.n_frames == 0
        assert out.dim == 4

    def test_self_reconstruction_k1(self):
        rng = np.random.default_rng(5)
        frames = rng.normal(size=(40, 12)).astype(np.float32)
        query = FeatureSequence.from_frames(frames, metadata={"utterance_id": "q"})
        out = convert_sequence(query, build_matching_set([query]), KnnConfig(k=1))
        np.testing.assert_allclose(out.frames, frames, atol=1e-6)

    def test_frame_count_and_envelope(self):
        rng = np.random.default_rng(6)
        mset = set_from_vectors(rng.normal(size=(500, 10)))
        query = FeatureSequence.from_frames(
            rng.normal(size=(123, 10)).astype(np.float32)
        )
        out = convert_sequence(query, mset, KnnConfig(k=4))
        assert out.n_frames == 123
        lo = mset.vectors.min(axis=0)
        hi = mset.vectors.max(axis=0)
        assert np.all(out.frames >= lo - 1e-6)
        assert np.all(out.frames <= hi + 1e-6)

    def test_metadata_records_conversion(self):
        mset = set_from_vectors(np.eye(3))
        query = FeatureSequence.from_frames(
            np.eye(3, dtype=np.float32), metadata={"utterance_id": "q"}
        )
        out = convert_sequence(query, mset, KnnConfig(k=2))
        record = out.header.metadata["conversion"]
        assert record["k"] == 2
        assert record["metric"] == "cosine"
        assert record["matching_set"]["size"] == 3
        assert out.header.metadata["utterance_id"] == "q"

    def test_scale_invariance_of_selected_indices(self):
        rng = np.random.default_rng(8)
        vectors = rng.normal(size=(60, 6))
        scaled = vectors.copy()
        scaled[17] *= 37.5
        query = rng.normal(size=6)
        base = top_k_neighbors(query, set_from_vectors(vectors), KnnConfig(k=5))
        after = top_k_neighbors(query, set_from_vectors(scaled), KnnConfig(k=5))
        assert base.indices.tolist() == after.indices.tolist()

    def test_permutation_of_rows_permutes_indices(self):
        rng = np.random.default_rng(9)
        vectors = rng.normal(size=(40, 5))
        perm = rng.permutation(40)
        query = rng.normal(size=5)
        base = top_k_neighbors(query, set_from_vectors(vectors), KnnConfig(k=4))
        permuted = top_k_neighbors(
            query, set_from_vectors(vectors[perm]), KnnConfig(k=4)
        )
        # row i moved to position perm^-1(i)
        inverse = np.argsort(perm)
        assert sorted(permuted.indices.tolist()) == sorted(
            inverse[base.indices].tolist()
        )
        # distances distinct here, so the regression output is unchanged
        assert len(set(base.distances.tolist())) == base.k
        out_a = knn_regress_frame(query, set_from_vectors(vectors), KnnConfig(k=4))
        out_b = knn_regress_frame(query, set_from_vectors(vectors[perm]), KnnConfig(k=4))
        np.testing.assert_allclose(out_a, out_b, rtol=1e-6)

    def test_determinism_across_runs(self):
        rng = np.random.default_rng(10)
        mset = set_from_vectors(rng.normal(size=(300, 8)))
        query = FeatureSequence.from_frames(
            rng.normal(size=(50, 8)).astype(np.float32)
        )
        a = convert_sequence(query, mset, KnnConfig())
        b = convert_sequence(query, mset, KnnConfig())
        assert a.frames.tobytes() == b.frames.tobytes()

    def test_determinism_across_thread_counts(self):
        threadpoolctl = pytest.importorskip("threadpoolctl")
        rng = np.random.default_rng(11)
        mset = set_from_vectors(rng.normal(size=(2000, 256)))
        query = FeatureSequence.from_frames(
            rng.normal(size=(300, 256)).astype(np.float32)
        )
        with threadpoolctl.threadpool_limits(limits=1):
            single = convert_sequence(query, mset, KnnConfig())
        threaded = convert_sequence(query, mset, KnnConfig())
        assert single.frames.tobytes() == threaded.frames.tobytes()

    def test_dim_mismatch(self):
        mset = set_from_vectors(np.eye(3))
        query = FeatureSequence.from_frames(np.ones((2, 4), dtype=np.float32))
        with pytest.raises(ConfigError):
            convert_sequence(query, mset, KnnConfig())
