import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cdfag.data import DescriptorSet
from cdfag.encoding import (
    Codebook,
    build_codebook,
    llc_encode,
    pca_fit,
    pca_project,
    pool_codes,
    retained_component_count,
)
from cdfag.errors import (
    BadConfig,
    DegenerateData,
    DimensionMismatch,
    EmptyInput,
    InsufficientData,
    NonFiniteInput,
)


def descriptor_set(matrix, video_id="v0"):
    return DescriptorSet(video_id=video_id, descriptors=np.asarray(matrix, dtype=float))


class TestBuildCodebook:
    def test_two_separated_clouds(self):
        rng = np.random.default_rng(0)
        cloud_a = rng.normal(0.0, 0.05, size=(60, 3))
        cloud_b = rng.normal(10.0, 0.05, size=(60, 3))
        ds = [descriptor_set(np.vstack([cloud_a, cloud_b]))]
        model = build_codebook(ds, codebook_size=2, per_video_sample=1000, seed=1)
        # brute-force oracle: the two cloud means
        expected = sorted([cloud_a.mean(axis=0), cloud_b.mean(axis=0)], key=lambda v: v[0])
        got = sorted(model.bases, key=lambda v: v[0])
        for g, e in zip(got, expected):
            assert np.allclose(g, e, atol=1e-6)

    def test_k_distinct_points_are_a_fixed_point(self):
        points = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [5.0, 5.0]])
        model = build_codebook([descriptor_set(points)], codebook_size=4,
                               per_video_sample=10, seed=3)
        got = sorted(model.bases.tolist())
        assert got == sorted(points.tolist())

    def test_paper_scale_defaults(self):
        from cdfag.encoding import DEFAULT_CODEBOOK_SIZE, DEFAULT_PER_VIDEO_SAMPLE

        assert DEFAULT_CODEBOOK_SIZE == 4000
        assert DEFAULT_PER_VIDEO_SAMPLE == 200

    def test_deterministic_given_seed(self):
        rng = np.random.default_rng(5)
        ds = [descriptor_set(rng.standard_normal((300, 4)), f"v{i}") for i in range(3)]
        a = build_codebook(ds, codebook_size=8, per_video_sample=50, seed=42)
        b = build_codebook(ds, codebook_size=8, per_video_sample=50, seed=42)
        assert np.array_equal(a.bases, b.bases)

    def test_per_video_subsampling_limits_pool(self):
        rng = np.random.default_rng(6)
        big = descriptor_set(rng.standard_normal((500, 2)))
        # per_video_sample=4 leaves only 4 candidates: size 5 must fail
        with pytest.raises(InsufficientData):
            build_codebook([big], codebook_size=5, per_video_sample=4, seed=0)

    def test_insufficient_distinct_descriptors(self):
        dup = descriptor_set(np.tile([[1.0, 2.0]], (50, 1)))
        with pytest.raises(InsufficientData):
            build_codebook([dup], codebook_size=2, per_video_sample=50, seed=0)

    def test_non_finite_rejected(self):
        with pytest.raises(NonFiniteInput):
            descriptor_set([[np.nan, 1.0]])


class TestLlcEncode:
    def test_exact_codeword_single_basis(self):
        codebook = Codebook(np.array([[0.0, 0.0], [1.0, 1.0], [2.0, 0.0]]))
        codes = llc_encode(descriptor_set([[1.0, 1.0]]), codebook, num_bases=1)
        assert np.array_equal(codes, np.array([[0.0, 1.0, 0.0]]))

    def test_equidistant_pair_splits_evenly(self):
        codebook = Codebook(np.array([[-1.0, 0.0], [1.0, 0.0], [9.0, 9.0]]))
        codes = llc_encode(descriptor_set([[0.0, 0.5]]), codebook, num_bases=2)
        assert codes[0, 0] == pytest.approx(0.5, rel=1e-10)
        assert codes[0, 1] == pytest.approx(0.5, rel=1e-10)
        assert codes[0, 2] == 0.0

    def test_matches_constrained_least_squares_oracle(self):
        rng = np.random.default_rng(8)
        codebook = Codebook(rng.standard_normal((6, 3)))
        x = rng.standard_normal(3)
        reg = 1e-4
        codes = llc_encode(descriptor_set([x]), codebook, num_bases=3, reg=reg)
        sel = np.argsort(((codebook.bases - x) ** 2).sum(axis=1), kind="stable")[:3]
        z = codebook.bases[sel] - x
        c = z @ z.T
        a = c + reg * np.trace(c) * np.eye(3)
        # independent oracle: KKT block system for min w'Aw s.t. 1'w = 1
        kkt = np.zeros((4, 4))
        kkt[:3, :3] = 2.0 * a
        kkt[:3, 3] = -1.0
        kkt[3, :3] = 1.0
        rhs = np.array([0.0, 0.0, 0.0, 1.0])
        w = np.linalg.solve(kkt, rhs)[:3]
        assert np.allclose(codes[0, sel], w, atol=1e-8)

    def test_support_is_nearest_codewords(self):
        rng = np.random.default_rng(9)
        codebook = Codebook(rng.standard_normal((12, 4)))
        x = rng.standard_normal((5, 4))
        codes = llc_encode(descriptor_set(x), codebook, num_bases=4)
        for i in range(5):
            support = set(np.flatnonzero(codes[i]))
            order = np.argsort(((codebook.bases - x[i]) ** 2).sum(axis=1), kind="stable")
            assert support == set(order[:4])

    @settings(deadline=None, max_examples=25)
    @given(st.integers(min_value=0, max_value=10_000), st.integers(min_value=1, max_value=5))
    def test_rows_sum_to_one_with_exact_support(self, seed, num_bases):
        rng = np.random.default_rng(seed)
        codebook = Codebook(rng.standard_normal((8, 3)))
        codes = llc_encode(descriptor_set(rng.standard_normal((4, 3))), codebook, num_bases)
        assert np.allclose(codes.sum(axis=1), 1.0, atol=1e-10)
        assert np.all((codes != 0).sum(axis=1) == num_bases)

    def test_too_many_bases(self):
        codebook = Codebook(np.eye(3))
        with pytest.raises(BadConfig):
            llc_encode(descriptor_set([[1.0, 0.0, 0.0]]), codebook, num_bases=4)


class TestPoolCodes:
    def test_single_row_unchanged(self):
        row = np.array([[0.1, 0.5, 0.2]])
        assert np.array_equal(pool_codes(row), row[0])

    def test_disjoint_supports_merge(self):
        codes = np.array([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]])
        assert np.array_equal(pool_codes(codes), np.array([1.0, 1.0, 0.0]))

    def test_all_zero(self):
        assert np.array_equal(pool_codes(np.zeros((4, 3))), np.zeros(3))

    def test_permutation_invariance(self):
        rng = np.random.default_rng(4)
        codes = rng.random((9, 6))
        perm = rng.permutation(9)
        for mode in ("max", "sum", "mean"):
            assert np.allclose(pool_codes(codes, mode), pool_codes(codes[perm], mode))

    def test_empty_input(self):
        with pytest.raises(EmptyInput):
            pool_codes(np.zeros((0, 3)))

    def test_sum_and_mean_modes(self):
        codes = np.array([[1.0, 2.0], [3.0, 4.0]])
        assert np.array_equal(pool_codes(codes, "sum"), np.array([4.0, 6.0]))
        assert np.array_equal(pool_codes(codes, "mean"), np.array([2.0, 3.0]))


class TestPca:
    def test_variance_on_one_axis(self):
        pts = np.array([[1.0, 0.0], [-1.0, 0.0], [2.0, 0.0], [-2.0, 0.0]])
        model = pca_fit(pts, retained_fraction=0.99)
        assert model.n_components == 1
        assert np.allclose(model.components[0], [1.0, 0.0])  # sign rule picks +e1

    def test_strictly_over_threshold_boundary(self):
        # eigenvalue shares (99, 1): 99/100 does not strictly exceed 0.99
        assert retained_component_count(np.array([99.0, 1.0]), 0.99) == 2
        assert retained_component_count(np.array([99.1, 0.9]), 0.99) == 1

    def test_matches_dense_covariance_eigendecomposition(self):
        rng = np.random.default_rng(12)
        x = rng.standard_normal((40, 5)) @ np.diag([3.0, 2.0, 1.5, 1.0, 0.5])
        model = pca_fit(x, retained_fraction=1.0)
        cov = np.cov(x, rowvar=False, bias=True)
        w, v = np.linalg.eigh(cov)
        w, v = w[::-1], v[:, ::-1]
        assert np.allclose(model.eigenvalues, w, atol=1e-8)
        for j in range(5):
            direction = v[:, j]
            i = np.argmax(np.abs(direction))
            if direction[i] < 0:
                direction = -direction
            assert np.allclose(model.components[j], direction, atol=1e-8)

    def test_components_orthonormal_and_projection_decorrelated(self):
        rng = np.random.default_rng(14)
        x = rng.standard_normal((60, 6)) * np.array([4, 3, 2, 1, 0.5, 0.25])
        model = pca_fit(x, retained_fraction=0.999)
        identity = model.components @ model.components.T
        assert np.allclose(identity, np.eye(model.n_components), atol=1e-8)
        proj = pca_project(model, x)
        cov = np.cov(proj, rowvar=False, bias=True)
        off = cov - np.diag(np.diag(cov))
        assert np.abs(off).max() <= 1e-6

    def test_projecting_mean_gives_zero(self):
        rng = np.random.default_rng(15)
        x = rng.standard_normal((10, 3))
        model = pca_fit(x, retained_fraction=1.0)
        assert np.allclose(pca_project(model, x.mean(axis=0)[None, :]), 0.0, atol=1e-12)

    def test_full_rank_projection_is_centered_input(self):
        rng = np.random.default_rng(16)
        x = rng.standard_normal((20, 4))
        model = pca_fit(x, retained_fraction=1.0)
        proj = pca_project(model, x)
        recon = proj @ model.components + model.mean
        assert np.allclose(recon, x, atol=1e-10)

    def test_reconstruction_error_identity(self):
        rng = np.random.default_rng(18)
        n = 50
        x = rng.standard_normal((n, 6)) * np.array([5, 4, 3, 2, 1, 0.5])
        full = pca_fit(x, retained_fraction=1.0)
        model = pca_fit(x, retained_fraction=0.9)
        p = model.n_components
        assert p < 6
        proj = pca_project(model, x)
        recon = proj @ model.components + model.mean
        error = float(((x - recon) ** 2).sum())
        expected = float(full.eigenvalues[p:].sum()) * n
        assert error == pytest.approx(expected, rel=1e-6)

    def test_degenerate_data(self):
        with pytest.raises(DegenerateData):
            pca_fit(np.ones((5, 3)))

    def test_projection_dim_mismatch(self):
        model = pca_fit(np.random.default_rng(1).standard_normal((10, 3)))
        with pytest.raises(DimensionMismatch):
            pca_project(model, np.ones((2, 4)))
