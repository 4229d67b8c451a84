import numpy as np
import pytest

from cdfag.errors import (
    AsymmetricInput,
    BadConfig,
    DegenerateData,
    DimensionMismatch,
    SingularPencil,
)
from cdfag.graphs import (
    KernelSpec,
    build_laplacian_triple,
    gram,
    knn_topology_weights,
    label_weights,
    laplacian,
    median_bandwidth,
    solve_gevd,
)


def random_spd(rng, size, scale=1.0):
    m = rng.standard_normal((size, size))
    return m @ m.T + scale * size * np.eye(size)


class TestMedianBandwidth:
    def test_three_collinear_points(self):
        # distances {1, 2, 3}, median 2, half-median 1
        samples = np.array([[0.0], [1.0], [3.0]])
        assert median_bandwidth(samples) == pytest.approx(1.0)

    def test_two_points(self):
        samples = np.array([[0.0, 0.0], [4.0, 0.0]])
        assert median_bandwidth(samples) == pytest.approx(2.0)

    def test_matches_brute_force(self):
        rng = np.random.default_rng(7)
        samples = rng.standard_normal((50, 4))
        dists = []
        for i in range(50):
            for j in range(i + 1, 50):
                dists.append(np.linalg.norm(samples[i] - samples[j]))
        expected = 0.5 * float(np.median(sorted(dists)))
        assert median_bandwidth(samples) == pytest.approx(expected, rel=1e-12)

    def test_coincident_samples(self):
        with pytest.raises(DegenerateData):
            median_bandwidth(np.ones((5, 3)))

    def test_single_sample(self):
        with pytest.raises(BadConfig):
            median_bandwidth(np.ones((1, 3)))


class TestGram:
    def test_identical_rows_give_one(self):
        x = np.array([[1.0, 2.0], [1.0, 2.0]])
        k = gram(x, x, KernelSpec("rbf", bandwidth=1.5))
        assert k[0, 1] == pytest.approx(1.0)
        assert np.allclose(np.diag(k), 1.0)

    def test_half_value_at_closed_form_distance(self):
        bw = 0.7
        # ||a - b||^2 = 2 bw^2 ln 2  ->  entry exactly 0.5
        d = np.sqrt(2.0 * bw * bw * np.log(2.0))
        a = np.array([[0.0]])
        b = np.array([[d]])
        k = gram(a, b, KernelSpec("rbf", bandwidth=bw))
        assert k[0, 0] == pytest.approx(0.5, rel=1e-12)

    def test_rbf_gram_is_psd(self):
        rng = np.random.default_rng(3)
        x = rng.standard_normal((6, 3))
        k = gram(x, x, KernelSpec("rbf", bandwidth=1.0))
        eigenvalues = np.linalg.eigvalsh(k)
        assert eigenvalues.min() >= -1e-10

    def test_rbf_entries_in_unit_interval_and_symmetric(self):
        rng = np.random.default_rng(11)
        x = rng.standard_normal((30, 5))
        k = gram(x, x, KernelSpec("rbf", bandwidth=2.0))
        assert np.all(k > 0) and np.all(k <= 1.0)
        assert np.abs(k - k.T).max() <= 1e-12

    def test_linear_kernel(self):
        a = np.array([[1.0, 2.0]])
        b = np.array([[3.0, 4.0]])
        k = gram(a, b, KernelSpec("linear"))
        assert k[0, 0] == pytest.approx(11.0)

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionMismatch):
            gram(np.ones((2, 3)), np.ones((2, 4)), KernelSpec("linear"))

    def test_rbf_requires_bandwidth(self):
        with pytest.raises(BadConfig):
            KernelSpec("rbf", bandwidth=None)


class TestKnnTopology:
    def test_three_collinear_points(self):
        samples = np.array([[0.0], [1.0], [3.0]])
        w = knn_topology_weights(samples, k=1)
        expected = np.zeros((3, 3))
        expected[0, 1] = expected[1, 0] = np.exp(-1.0)
        expected[1, 2] = expected[2, 1] = np.exp(-4.0)
        assert np.allclose(w, expected)

    def test_full_graph_when_k_is_n_minus_1(self):
        rng = np.random.default_rng(5)
        samples = rng.standard_normal((7, 2))
        w = knn_topology_weights(samples, k=6)
        d2 = ((samples[:, None, :] - samples[None, :, :]) ** 2).sum(-1)
        expected = np.exp(-d2)
        np.fill_diagonal(expected, 0.0)
        assert np.allclose(w, expected)

    def test_edges_satisfy_union_rule_against_brute_force(self):
        rng = np.random.default_rng(9)
        samples = rng.standard_normal((20, 3))
        k = 10
        w = knn_topology_weights(samples, k=k)
        d2 = ((samples[:, None, :] - samples[None, :, :]) ** 2).sum(-1)
        neighbor_sets = []
        for i in range(20):
            order = sorted((d2[i, j], j) for j in range(20) if j != i)
            neighbor_sets.append({j for _, j in order[:k]})
        for i in range(20):
            for j in range(20):
                in_union = j in neighbor_sets[i] or i in neighbor_sets[j]
                if i == j:
                    assert w[i, j] == 0.0
                elif in_union:
                    assert w[i, j] == pytest.approx(np.exp(-d2[i, j]))
                else:
                    assert w[i, j] == 0.0

    def test_exact_tie_broken_by_lower_index(self):
        # node 0 is equidistant from nodes 1 and 2; the deterministic pick is 1.
        # nodes 1..4 all have strictly nearer neighbors elsewhere, so edge
        # (0, 2) appears only if the tie were broken the other way.
        samples = np.array([[0.0, 0.0], [0.0, 1.0], [0.0, -1.0], [0.0, -1.5], [0.0, 1.4]])
        w = knn_topology_weights(samples, k=1)
        assert w[0, 1] > 0
        assert w[0, 2] == 0.0
        w2 = knn_topology_weights(samples, k=1)
        assert np.array_equal(w, w2)

    def test_permutation_invariance(self):
        rng = np.random.default_rng(17)
        samples = rng.standard_normal((15, 4))
        perm = rng.permutation(15)
        w = knn_topology_weights(samples, k=4)
        w_perm = knn_topology_weights(samples[perm], k=4)
        assert np.allclose(w_perm, w[np.ix_(perm, perm)])

    def test_k_too_large(self):
        with pytest.raises(BadConfig):
            knn_topology_weights(np.ones((4, 2)), k=4)

    def test_mutual_mode_is_subset_of_union(self):
        rng = np.random.default_rng(23)
        samples = rng.standard_normal((12, 3))
        union = knn_topology_weights(samples, k=3, mode="union")
        mutual = knn_topology_weights(samples, k=3, mode="mutual")
        assert np.all((mutual > 0) <= (union > 0))


class TestLabelWeights:
    def test_same_class_edges(self):
        w = label_weights(np.array([0, 0, 1]), "same_class")
        expected = np.zeros((3, 3))
        expected[0, 1] = expected[1, 0] = 1.0
        assert np.array_equal(w, expected)

    def test_unlabeled_rows_are_isolated(self):
        w = label_weights(np.array([0, -1, 0]), "same_class")
        expected = np.zeros((3, 3))
        expected[0, 2] = expected[2, 0] = 1.0
        assert np.array_equal(w, expected)
        assert np.all(w[1] == 0) and np.all(w[:, 1] == 0)

    def test_different_class_complete_graph(self):
        w = label_weights(np.array([0, 1, 2]), "different_class")
        expected = np.ones((3, 3)) - np.eye(3)
        assert np.array_equal(w, expected)


class TestLaplacian:
    def test_two_node_edge(self):
        lap = laplacian(np.array([[0.0, 1.0], [1.0, 0.0]]))
        assert np.array_equal(lap, np.array([[1.0, -1.0], [-1.0, 1.0]]))

    def test_zero_weights(self):
        assert np.array_equal(laplacian(np.zeros((3, 3))), np.zeros((3, 3)))

    def test_quadratic_form_identity(self):
        rng = np.random.default_rng(2)
        w = rng.random((10, 10))
        w = 0.5 * (w + w.T)
        np.fill_diagonal(w, 0.0)
        lap = laplacian(w)
        for _ in range(100):
            x = rng.standard_normal(10)
            direct = 0.5 * sum(
                w[i, j] * (x[i] - x[j]) ** 2 for i in range(10) for j in range(10)
            )
            assert x @ lap @ x == pytest.approx(direct, abs=1e-9)

    def test_rejects_asymmetric(self):
        with pytest.raises(AsymmetricInput):
            laplacian(np.array([[0.0, 1.0], [0.5, 0.0]]))

    def test_zero_row_sums_and_psd(self):
        rng = np.random.default_rng(31)
        labels = rng.integers(-1, 4, size=60)
        feats = [rng.standard_normal((36, 3)), rng.standard_normal((24, 3))]
        triple = build_laplacian_triple(feats, labels, knn_k=5)
        for lap in (triple.topology, triple.similarity, triple.dissimilarity):
            assert np.abs(lap.sum(axis=1)).max() <= 1e-8
            assert np.abs(lap - lap.T).max() <= 1e-10
        for lap in (triple.topology, triple.similarity):
            assert np.linalg.eigvalsh(lap).min() >= -1e-8


class TestSolveGevd:
    def test_diagonal_pencil(self):
        a = np.diag([1.0, 2.0])
        values, vectors = solve_gevd(a, np.eye(2), n=2)
        assert np.allclose(values, [1.0, 2.0])
        assert np.allclose(np.abs(vectors), np.eye(2), atol=1e-12)
        # sign rule: the dominant entry of each eigenvector is positive
        assert vectors[0, 0] > 0 and vectors[1, 1] > 0

    def test_identity_pencil(self):
        values, _ = solve_gevd(np.eye(3), np.eye(3), n=3)
        assert np.allclose(values, 1.0)

    def test_matches_whitening_oracle(self):
        rng = np.random.default_rng(13)
        for trial in range(5):
            a = rng.standard_normal((8, 8))
            a = 0.5 * (a + a.T)
            b = random_spd(rng, 8)
            values, vectors = solve_gevd(a, b, n=8)
            # independent dense oracle: eigenvalues of B^{-1/2} A B^{-1/2}
            w, u = np.linalg.eigh(b)
            b_inv_sqrt = u @ np.diag(1.0 / np.sqrt(w)) @ u.T
            expected = np.linalg.eigvalsh(b_inv_sqrt @ a @ b_inv_sqrt)
            assert np.allclose(values, expected, atol=1e-8)
            # B-normalization of the eigenvectors
            assert np.allclose(vectors.T @ b @ vectors, np.eye(8), atol=1e-8)

    def test_residual_bound_holds(self):
        rng = np.random.default_rng(29)
        a = rng.standard_normal((12, 12))
        a = 0.5 * (a + a.T)
        b = random_spd(rng, 12, scale=0.1)
        ridge = 1e-6 * np.trace(b) / 12
        values, vectors = solve_gevd(a, b, n=12, ridge=ridge)
        b_reg = b + ridge * np.eye(12)
        for lam, v in zip(values, vectors.T):
            res = np.linalg.norm(a @ v - lam * (b_reg @ v))
            bound = 1e-6 * (np.linalg.norm(a, "fro") + abs(lam) * np.linalg.norm(b, "fro"))
            assert res <= bound

    def test_eigenvalues_ascending(self):
        rng = np.random.default_rng(41)
        a = rng.standard_normal((10, 10))
        a = 0.5 * (a + a.T)
        values, _ = solve_gevd(a, random_spd(rng, 10), n=6)
        assert np.all(np.diff(values) >= 0)

    def test_singular_pencil(self):
        with pytest.raises(SingularPencil):
            solve_gevd(np.eye(3), np.zeros((3, 3)), n=2, ridge=0.0)

    def test_shape_mismatch(self):
        with pytest.raises(DimensionMismatch):
            solve_gevd(np.eye(3), np.eye(4), n=2)
