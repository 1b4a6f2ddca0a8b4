import numpy as np
import pytest

from semvib.data import (
    MultiViewDataset,
    SyntheticSpec,
    generate_synthetic,
    load_dataset,
    minibatch_indices,
    normalize_views,
    save_dataset,
)
from semvib.errors import DataError
from semvib.evaluation import clustering_accuracy, kmeans


class TestDatasetInvariants:
    def test_needs_two_views(self):
        with pytest.raises(DataError):
            MultiViewDataset(views=[np.zeros((3, 2))])

    def test_row_mismatch(self):
        with pytest.raises(DataError, match="mismatch"):
            MultiViewDataset(views=[np.zeros((3, 2)), np.zeros((4, 2))])

    def test_nonfinite_rejected(self):
        bad = np.zeros((3, 2))
        bad[1, 1] = np.nan
        with pytest.raises(DataError):
            MultiViewDataset(views=[np.zeros((3, 2)), bad])

    def test_labels_must_cover_all_classes(self):
        views = [np.zeros((4, 2)), np.zeros((4, 3))]
        with pytest.raises(DataError):
            MultiViewDataset(views=views, labels=np.array([0, 0, 2, 2]))

    def test_views_are_read_only(self):
        ds = MultiViewDataset(views=[np.zeros((3, 2)), np.zeros((3, 2))])
        with pytest.raises(ValueError):
            ds.views[0][0, 0] = 1.0


class TestGenerateSynthetic:
    def test_identity_projection_zero_noise_reproduces_latents(self):
        spec = SyntheticSpec(
            n_samples=30,
            n_clusters=3,
            latent_dim=4,
            view_dims=(4, 4),
            noise_sigmas=(0.0, 0.0),
            identity_projection=True,
            seed=5,
        )
        ds = generate_synthetic(spec)
        # both views are the same raw latent matrix
        np.testing.assert_array_equal(ds.views[0], ds.views[1])
        # cluster means pairwise >= separation (up to sampling spread of 1)
        centers = np.array([ds.views[0][ds.labels == k].mean(axis=0) for k in range(3)])
        dists = np.linalg.norm(centers[:, None] - centers[None, :], axis=-1)
        assert dists[np.triu_indices(3, 1)].min() > spec.cluster_separation - 2.0

    def test_same_spec_same_seed_bit_identical(self):
        spec = SyntheticSpec(seed=11)
        a, b = generate_synthetic(spec), generate_synthetic(spec)
        for va, vb in zip(a.views, b.views):
            assert va.tobytes() == vb.tobytes()
        assert a.labels.tobytes() == b.labels.tobytes()

    def test_kmeans_on_latents_recovers_labels(self):
        # oracle for the separation semantics: latents with sigma=0.1 noise
        spec = SyntheticSpec(
            n_samples=300,
            n_clusters=3,
            latent_dim=4,
            view_dims=(4, 4),
            cluster_separation=10.0,
            noise_sigmas=(0.1, 0.1),
            identity_projection=True,
            seed=0,
        )
        ds = generate_synthetic(spec)
        labels, _ = kmeans(ds.views[0], 3, seed=0)
        assert clustering_accuracy(ds.labels, labels) == 1.0

    def test_too_many_clusters_rejected(self):
        with pytest.raises(DataError):
            SyntheticSpec(n_samples=2, n_clusters=3)

    def test_every_class_represented(self):
        ds = generate_synthetic(SyntheticSpec(n_samples=10, n_clusters=3, seed=1))
        assert set(ds.labels) == {0, 1, 2}

    def test_many_clusters_fallback_keeps_separation(self):
        spec = SyntheticSpec(
            n_samples=60, n_clusters=8, latent_dim=3, view_dims=(5, 5),
            noise_sigmas=(0.0, 0.0), cluster_separation=6.0, seed=2,
        )
        ds = generate_synthetic(spec)
        assert ds.n_samples == 60


class TestLoadSave:
    def write(self, tmp_path, name, text):
        p = tmp_path / name
        p.write_text(text, encoding="utf-8")
        return p

    def test_basic_construction(self, tmp_path):
        self.write(tmp_path, "v1.csv", "1,2\n3,4\n5,6\n7,8\n")
        self.write(tmp_path, "v2.csv", "1,2,3\n4,5,6\n7,8,9\n10,11,12\n")
        self.write(tmp_path, "y.txt", "0\n0\n1\n1\n")
        manifest = self.write(
            tmp_path, "m.txt", "view.1 = v1.csv\nview.2 = v2.csv\nlabels = y.txt\n"
        )
        ds = load_dataset(manifest)
        assert ds.n_samples == 4 and ds.n_views == 2 and ds.dims == [2, 3]
        np.testing.assert_array_equal(ds.labels, [0, 0, 1, 1])

    def test_row_mismatch_is_distinct_error(self, tmp_path):
        self.write(tmp_path, "v1.csv", "1,2\n3,4\n5,6\n7,8\n")
        self.write(tmp_path, "v2.csv", "1\n2\n3\n4\n5\n")
        manifest = self.write(tmp_path, "m.txt", "view.1 = v1.csv\nview.2 = v2.csv\n")
        with pytest.raises(DataError, match="mismatch"):
            load_dataset(manifest)

    def test_nan_cell_is_non_numeric_error(self, tmp_path):
        self.write(tmp_path, "v1.csv", "1,2\nNaN,4\n")
        self.write(tmp_path, "v2.csv", "1\n2\n")
        manifest = self.write(tmp_path, "m.txt", "view.1 = v1.csv\nview.2 = v2.csv\n")
        with pytest.raises(DataError, match="non-numeric"):
            load_dataset(manifest)

    def test_text_cell_is_non_numeric_error(self, tmp_path):
        self.write(tmp_path, "v1.csv", "1,2\nxyz,4\n")
        self.write(tmp_path, "v2.csv", "1\n2\n")
        manifest = self.write(tmp_path, "m.txt", "view.1 = v1.csv\nview.2 = v2.csv\n")
        with pytest.raises(DataError, match="non-numeric"):
            load_dataset(manifest)

    def test_missing_file_error(self, tmp_path):
        manifest = self.write(tmp_path, "m.txt", "view.1 = gone.csv\nview.2 = gone2.csv\n")
        with pytest.raises(DataError, match="missing"):
            load_dataset(manifest)

    def test_label_alphabets_remapped(self, tmp_path):
        self.write(tmp_path, "v1.csv", "1\n2\n3\n")
        self.write(tmp_path, "v2.csv", "1\n2\n3\n")
        self.write(tmp_path, "y.txt", "7\n-3\n7\n")
        manifest = self.write(
            tmp_path, "m.txt", "view.1 = v1.csv\nview.2 = v2.csv\nlabels = y.txt\n"
        )
        ds = load_dataset(manifest)
        np.testing.assert_array_equal(ds.labels, [1, 0, 1])

    def test_save_load_roundtrip(self, tmp_path):
        ds = generate_synthetic(SyntheticSpec(n_samples=20, seed=3))
        manifest = save_dataset(ds, tmp_path / "data")
        back = load_dataset(manifest)
        for a, b in zip(ds.views, back.views):
            np.testing.assert_array_equal(a, b)
        np.testing.assert_array_equal(ds.labels, back.labels)


class TestNormalize:
    def make(self, col):
        v = np.array(col, dtype=float).reshape(-1, 1)
        return MultiViewDataset(views=[v, v.copy()])

    def test_minmax_endpoints(self):
        out = normalize_views(self.make([1.0, 3.0]), "minmax")
        np.testing.assert_array_equal(out.views[0].ravel(), [0.0, 1.0])

    def test_constant_column_maps_to_zero(self):
        out = normalize_views(self.make([5.0, 5.0, 5.0]), "minmax")
        np.testing.assert_array_equal(out.views[0], 0.0)

    def test_zscore_two_points(self):
        out = normalize_views(self.make([0.0, 2.0]), "zscore")
        np.testing.assert_allclose(out.views[0].ravel(), [-1.0, 1.0], atol=1e-12)

    def test_none_is_identity(self):
        ds = self.make([1.0, 2.0])
        assert normalize_views(ds, "none") is ds

    def test_minmax_idempotent(self):
        rng = np.random.default_rng(8)
        ds = MultiViewDataset(
            views=[rng.standard_normal((10, 3)), rng.standard_normal((10, 2))]
        )
        once = normalize_views(ds, "minmax")
        twice = normalize_views(once, "minmax")
        for a, b in zip(once.views, twice.views):
            np.testing.assert_array_equal(a, b)

    def test_labels_pass_through(self):
        v = np.arange(6.0).reshape(3, 2)
        ds = MultiViewDataset(views=[v, v.copy()], labels=np.array([0, 1, 1]))
        out = normalize_views(ds, "minmax")
        np.testing.assert_array_equal(out.labels, ds.labels)

    def test_unknown_mode(self):
        with pytest.raises(DataError):
            normalize_views(self.make([1.0, 2.0]), "bogus")


class TestMinibatchIndices:
    def test_full_batch(self):
        batches = minibatch_indices(4, 4, seed=0)
        assert len(batches) == 1
        assert sorted(batches[0]) == [0, 1, 2, 3]

    def test_partition_sizes(self):
        batches = minibatch_indices(5, 2, seed=1)
        assert [len(b) for b in batches] == [2, 2, 1]
        assert sorted(np.concatenate(batches)) == list(range(5))

    def test_deterministic_per_seed_epoch(self):
        a = minibatch_indices(10, 3, seed=7, epoch=2)
        b = minibatch_indices(10, 3, seed=7, epoch=2)
        for x, y in zip(a, b):
            np.testing.assert_array_equal(x, y)
        c = minibatch_indices(10, 3, seed=7, epoch=3)
        assert any(not np.array_equal(x, y) for x, y in zip(a, c))

    def test_zero_batch_size_invalid(self):
        with pytest.raises(ValueError):
            minibatch_indices(5, 0, seed=0)

    def test_union_covers_range_without_duplicates(self):
        for epoch in range(5):
            batches = minibatch_indices(23, 4, seed=3, epoch=epoch)
            merged = np.concatenate(batches)
            assert sorted(merged) == list(range(23))
