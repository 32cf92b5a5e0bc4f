import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from kernelhc import (
    DistributionEmbedding,
    IdkFeatures,
    IsolationModel,
    embed_distribution,
    embed_point,
    fit_isolation_model,
    gdk_kernel,
    kernel_dist_dist,
    kernel_point_dist,
)
from kernelhc.ikernel import GdkOps, IdkOps, median_heuristic_bandwidth

from conftest import (
    oracle_cells,
    oracle_gdk,
    oracle_mean_pairwise,
    oracle_point_kernel,
    oracle_point_vector,
    rng_data,
)


class TestFitModel:
    def test_two_points_mutual_radius(self):
        X = np.array([[0.0, 0.0], [3.0, 4.0]])
        model = fit_isolation_model(X, psi=2, t=1, seed=0)
        # the only other center is the mutual nearest neighbor
        assert model.radii[0] == pytest.approx([5.0, 5.0])

    def test_psi_larger_than_n_rejected(self):
        with pytest.raises(ValueError, match="cannot exceed"):
            fit_isolation_model(rng_data(0, n=5), psi=6, t=3, seed=0)

    def test_psi_below_two_rejected(self):
        with pytest.raises(ValueError):
            fit_isolation_model(rng_data(0), psi=1, t=3, seed=0)

    def test_nonfinite_data_rejected(self):
        X = rng_data(0)
        X[3, 1] = np.nan
        with pytest.raises(ValueError, match="non-finite"):
            fit_isolation_model(X, psi=4, t=3, seed=0)

    def test_deterministic_and_bit_identical(self):
        X = rng_data(5, n=50)
        m1 = fit_isolation_model(X, psi=8, t=20, seed=9)
        m2 = fit_isolation_model(X, psi=8, t=20, seed=9)
        assert np.array_equal(m1.centers, m2.centers)
        assert np.array_equal(m1.radii, m2.radii)

    def test_radii_match_recomputation(self, small_model):
        for pi in range(small_model.t):
            c = small_model.centers[pi]
            for j in range(small_model.psi):
                d = np.sqrt(((c - c[j]) ** 2).sum(axis=1))
                d[j] = np.inf
                assert small_model.radii[pi, j] == pytest.approx(d.min())

    def test_centers_are_data_rows(self):
        X = rng_data(3, n=25)
        model = fit_isolation_model(X, psi=5, t=10, seed=1)
        rows = {tuple(r) for r in X}
        for pi in range(model.t):
            for c in model.centers[pi]:
                assert tuple(c) in rows

    def test_save_load_round_trip(self, small_model, tmp_path):
        path = tmp_path / "model.npz"
        small_model.save(path)
        loaded = IsolationModel.load(path)
        assert np.array_equal(loaded.centers, small_model.centers)
        assert np.array_equal(loaded.radii, small_model.radii)
        assert (loaded.psi, loaded.t, loaded.seed) == (
            small_model.psi, small_model.t, small_model.seed)

    def test_load_rejects_foreign_npz(self, tmp_path):
        path = tmp_path / "other.npz"
        np.savez(path, format=np.array("something-else"), version=np.array(1))
        with pytest.raises(ValueError, match="not an isolation model"):
            IsolationModel.load(path)


class TestEmbedPoint:
    def test_center_activates_own_cell(self, small_model):
        z = small_model.centers[0][3]
        fv = embed_point(small_model, z)
        block0 = [i for i in fv.indices if i < small_model.psi]
        assert block0 == [3]  # distance 0 <= radius

    def test_far_point_embeds_to_zero(self, small_model):
        fv = embed_point(small_model, np.array([1e6, 1e6]))
        assert len(fv.indices) == 0
        assert fv.norm_sq == 0.0

    def test_dimension_mismatch(self, small_model):
        with pytest.raises(ValueError, match="dimension"):
            embed_point(small_model, np.array([1.0, 2.0, 3.0]))

    def test_matches_bruteforce_scan(self, small_model):
        rng = np.random.default_rng(7)
        for _ in range(25):
            x = rng.uniform(-0.2, 1.2, size=2)
            fv = embed_point(small_model, x)
            assert np.allclose(fv.to_dense(), oracle_point_vector(small_model, x))

    def test_one_nonzero_per_block_and_norm_bound(self, small_model):
        rng = np.random.default_rng(11)
        for _ in range(25):
            fv = embed_point(small_model, rng.uniform(0, 1, size=2))
            blocks = fv.indices // small_model.psi
            assert len(set(blocks)) == len(blocks)
            covered = len(fv.indices)
            assert fv.norm_sq == pytest.approx(covered / small_model.t)
            assert fv.norm_sq <= 1.0


class TestEmbedDistribution:
    def test_singleton_equals_point_map(self, small_model):
        x = np.array([0.4, 0.6])
        emb = embed_distribution(small_model, x[None, :])
        assert np.allclose(emb.values, embed_point(small_model, x).to_dense())

    def test_duplicates_do_not_move_the_mean(self, small_model):
        x = np.array([0.4, 0.6])
        emb = embed_distribution(small_model, np.vstack([x, x]))
        assert np.allclose(emb.values, embed_point(small_model, x).to_dense())
        assert emb.support_size == 2

    def test_mean_of_bruteforce_point_maps(self, small_model):
        pts = rng_data(13, n=10)
        emb = embed_distribution(small_model, pts)
        expected = np.mean([oracle_point_vector(small_model, x) for x in pts], axis=0)
        assert np.array_equal(emb.values, expected) or np.allclose(
            emb.values, expected, atol=1e-15)

    def test_empty_set_rejected(self, small_model):
        with pytest.raises(ValueError, match="empty"):
            embed_distribution(small_model, np.empty((0, 2)))

    def test_norm_bounded_by_one(self, small_model):
        emb = embed_distribution(small_model, rng_data(17, n=20))
        assert emb.norm <= 1.0 + 1e-12


class TestDistributionKernels:
    def test_self_similarity_is_squared_norm(self, small_model):
        emb = embed_distribution(small_model, rng_data(19, n=8))
        assert kernel_dist_dist(emb, emb) == pytest.approx(emb.norm**2)
        assert kernel_dist_dist(emb, emb) <= 1.0

    def test_matches_bruteforce_double_sum(self, small_model):
        X = rng_data(23, n=7)
        Y = rng_data(29, n=5)
        got = kernel_dist_dist(
            embed_distribution(small_model, X), embed_distribution(small_model, Y))
        assert got == pytest.approx(oracle_mean_pairwise(small_model, X, Y), abs=1e-12)

    def test_disjoint_supports_give_zero(self):
        X = rng_data(1, n=20)
        model = fit_isolation_model(X, psi=4, t=30, seed=3)
        far = X + 1e5  # covered by no hypersphere
        a = embed_distribution(model, X[:10])
        b = embed_distribution(model, far[:10])
        assert kernel_dist_dist(a, b) == 0.0

    def test_symmetry_exact(self, small_model):
        a = embed_distribution(small_model, rng_data(31, n=9))
        b = embed_distribution(small_model, rng_data(37, n=6))
        assert kernel_dist_dist(a, b) == kernel_dist_dist(b, a)

    def test_dimension_mismatch_rejected(self, small_model):
        a = embed_distribution(small_model, rng_data(1, n=4))
        bad = DistributionEmbedding(values=np.zeros(3), support_size=1)
        with pytest.raises(ValueError, match="dimension"):
            kernel_dist_dist(a, bad)

    def test_point_to_dist_forms_agree(self, small_model):
        x = np.array([0.3, 0.7])
        members = rng_data(41, n=6)
        emb = embed_distribution(small_model, members)
        got = kernel_point_dist(small_model, x, emb)
        expected = np.mean([oracle_point_kernel(small_model, x, y) for y in members])
        assert got == pytest.approx(expected, abs=1e-12)

    def test_point_to_singleton_is_squared_norm(self, small_model):
        x = np.array([0.5, 0.5])
        emb = embed_distribution(small_model, x[None, :])
        fv = embed_point(small_model, x)
        assert kernel_point_dist(small_model, x, emb) == pytest.approx(fv.norm_sq)

    def test_uncovered_point_scores_zero(self, small_model):
        emb = embed_distribution(small_model, rng_data(43, n=5))
        assert kernel_point_dist(small_model, np.array([1e6, -1e6]), emb) == 0.0


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**20), psi=st.integers(2, 12), t=st.sampled_from([5, 24]))
def test_kme_identity_property(seed, psi, t):
    """Inner-product form == mean-pairwise form, to float accuracy."""
    rng = np.random.default_rng(seed)
    data = rng.uniform(0, 1, size=(max(psi, 14), 2))
    model = fit_isolation_model(data, psi=psi, t=t, seed=seed)
    X = rng.uniform(0, 1, size=(rng.integers(1, 8), 2))
    Y = rng.uniform(0, 1, size=(rng.integers(1, 8), 2))
    lhs = kernel_dist_dist(embed_distribution(model, X), embed_distribution(model, Y))
    assert lhs == pytest.approx(oracle_mean_pairwise(model, X, Y), abs=1e-12)
    assert 0.0 <= lhs <= 1.0


class TestIdkFeatures:
    def test_cells_match_oracle(self, small_model):
        X = rng_data(47, n=12)
        feats = IdkFeatures.fit(small_model, X)
        assert np.array_equal(feats.cells, oracle_cells(small_model, X))

    def test_batch_similarities_match_single_point_op(self, small_model):
        X = rng_data(53, n=10)
        feats = IdkFeatures.fit(small_model, X)
        emb = feats.mean_embedding(np.arange(4))
        batch = feats.similarities(emb)
        for i in range(10):
            assert batch[i] == pytest.approx(
                kernel_point_dist(small_model, X[i], emb), abs=1e-12)

    def test_pairwise_matches_rows(self, small_model):
        X = rng_data(59, n=9)
        feats = IdkFeatures.fit(small_model, X)
        K = feats.pairwise()
        assert np.allclose(K, K.T)
        for i in range(9):
            assert np.allclose(K[i], feats.point_kernel_row(i))

    def test_ops_set_similarity_is_embedding_dot(self, small_model):
        X = rng_data(61, n=12)
        ops = IdkOps(IdkFeatures.fit(small_model, X))
        a, b = np.arange(5), np.arange(5, 12)
        expected = kernel_dist_dist(
            embed_distribution(small_model, X[a]), embed_distribution(small_model, X[b]))
        assert ops.set_similarity(a, b) == pytest.approx(expected, abs=1e-15)


class TestGdk:
    def test_identical_singletons_score_one(self):
        x = np.array([[1.0, 2.0]])
        assert gdk_kernel(x, x, bandwidth=0.7) == pytest.approx(1.0)

    def test_symmetry(self):
        X, Y = rng_data(3, n=6), rng_data(5, n=4)
        assert gdk_kernel(X, Y, 1.3) == pytest.approx(gdk_kernel(Y, X, 1.3))

    def test_matches_hand_rolled_double_sum(self):
        X, Y = rng_data(7, n=5), rng_data(11, n=5)
        assert gdk_kernel(X, Y, 0.9) == pytest.approx(oracle_gdk(X, Y, 0.9), abs=1e-12)

    def test_nonpositive_bandwidth_rejected(self):
        X = rng_data(1, n=3)
        with pytest.raises(ValueError, match="bandwidth"):
            gdk_kernel(X, X, 0.0)

    def test_empty_set_rejected(self):
        X = rng_data(1, n=3)
        with pytest.raises(ValueError, match="empty"):
            gdk_kernel(X, np.empty((0, 2)), 1.0)

    def test_median_heuristic_positive_and_deterministic(self):
        X = rng_data(13, n=200)
        assert median_heuristic_bandwidth(X) == median_heuristic_bandwidth(X)
        assert median_heuristic_bandwidth(X) > 0

    def test_gdk_ops_consistent_with_gdk_kernel(self):
        X = rng_data(17, n=10)
        ops = GdkOps(X, bandwidth=0.8)
        a, b = np.arange(4), np.arange(4, 10)
        assert ops.set_similarity(a, b) == pytest.approx(gdk_kernel(X[a], X[b], 0.8))
        p2s = ops.point_to_set(b)
        assert p2s[2] == pytest.approx(gdk_kernel(X[2][None, :], X[b], 0.8))
