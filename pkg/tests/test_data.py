import numpy as np
import pytest

from intelm.data import (
    DataFormatError,
    RawDataset,
    extract_patches,
    load_cifar10,
    load_csv,
    load_idx,
    load_raw_matrix,
    preprocess,
    split_train_val,
    synthetic_texture_image,
    synthetic_textures,
    write_cifar10_batch,
    write_idx,
    write_raw_matrix,
)
from intelm.seeding import make_rng


class TestIdx:
    def test_byte_level_fixture_roundtrip(self, rng, tmp_path):
        images = rng.integers(0, 256, size=(3, 4, 4)).astype(np.uint8)
        labels = np.array([2, 0, 1], dtype=np.uint8)
        write_idx(images, labels, tmp_path / "img", tmp_path / "lbl")
        ds = load_idx(tmp_path / "img", tmp_path / "lbl")
        np.testing.assert_array_equal(ds.samples, images.reshape(3, 16))
        np.testing.assert_array_equal(ds.labels, labels)
        # write-then-read-then-write is identity at byte level
        write_idx(ds.samples.astype(np.uint8), ds.labels, tmp_path / "img2", tmp_path / "lbl2")
        assert (tmp_path / "img").read_bytes() == (tmp_path / "img2").read_bytes()
        assert (tmp_path / "lbl").read_bytes() == (tmp_path / "lbl2").read_bytes()

    def test_single_image_fixture_bytes(self, tmp_path):
        import struct

        pixels = bytes(range(9))
        (tmp_path / "img").write_bytes(struct.pack(">4I", 0x00000803, 1, 3, 3) + pixels)
        (tmp_path / "lbl").write_bytes(struct.pack(">2I", 0x00000801, 1) + b"\x05")
        ds = load_idx(tmp_path / "img", tmp_path / "lbl")
        np.testing.assert_array_equal(ds.samples[0], list(range(9)))
        assert ds.labels[0] == 5

    def test_bad_magic_names_offset(self, tmp_path):
        import struct

        (tmp_path / "img").write_bytes(struct.pack(">4I", 0xDEAD, 1, 1, 1) + b"\x00")
        (tmp_path / "lbl").write_bytes(struct.pack(">2I", 0x00000801, 1) + b"\x00")
        with pytest.raises(DataFormatError, match="bad magic 0x0000dead at offset 0"):
            load_idx(tmp_path / "img", tmp_path / "lbl")

    def test_truncated_payload(self, tmp_path):
        import struct

        (tmp_path / "img").write_bytes(struct.pack(">4I", 0x00000803, 2, 2, 2) + b"\x00" * 5)
        (tmp_path / "lbl").write_bytes(struct.pack(">2I", 0x00000801, 2) + b"\x00\x01")
        with pytest.raises(DataFormatError, match="truncated"):
            load_idx(tmp_path / "img", tmp_path / "lbl")

    def test_count_mismatch(self, rng, tmp_path):
        images = rng.integers(0, 256, size=(2, 2, 2)).astype(np.uint8)
        write_idx(images, np.array([0, 1], dtype=np.uint8), tmp_path / "img", tmp_path / "lbl")
        write_idx(images[:1], np.array([0], dtype=np.uint8), tmp_path / "img1", tmp_path / "lbl1")
        with pytest.raises(DataFormatError, match="image count 2 != label count 1"):
            load_idx(tmp_path / "img", tmp_path / "lbl1")


class TestCifar10:
    def test_synthetic_batch_roundtrip(self, rng, tmp_path):
        samples = rng.integers(0, 256, size=(2, 3072)).astype(np.uint8)
        labels = np.array([4, 7], dtype=np.uint8)  # deer, horse
        write_cifar10_batch(samples, labels, tmp_path / "batch.bin")
        ds = load_cifar10([tmp_path / "batch.bin"], class_filter=None)
        np.testing.assert_array_equal(ds.samples, samples)
        np.testing.assert_array_equal(ds.labels, labels)
        write_cifar10_batch(
            ds.samples.astype(np.uint8), ds.labels.astype(np.uint8), tmp_path / "b2.bin"
        )
        assert (tmp_path / "batch.bin").read_bytes() == (tmp_path / "b2.bin").read_bytes()

    def test_deer_horse_filter_relabels(self, rng, tmp_path):
        samples = rng.integers(0, 256, size=(6, 3072)).astype(np.uint8)
        labels = np.array([4, 7, 0, 4, 9, 7], dtype=np.uint8)
        write_cifar10_batch(samples, labels, tmp_path / "batch.bin")
        ds = load_cifar10([tmp_path / "batch.bin"], class_filter=("deer", "horse"))
        assert ds.N == 4
        np.testing.assert_array_equal(ds.labels, [0, 1, 0, 1])
        assert ds.class_count == 2

    def test_bad_size_rejected(self, tmp_path):
        (tmp_path / "bad.bin").write_bytes(b"\x00" * 100)
        with pytest.raises(DataFormatError, match="multiple of 3073"):
            load_cifar10([tmp_path / "bad.bin"])

    def test_unknown_class_name(self, rng, tmp_path):
        write_cifar10_batch(
            rng.integers(0, 256, size=(1, 3072)).astype(np.uint8),
            np.array([4], dtype=np.uint8),
            tmp_path / "b.bin",
        )
        with pytest.raises(DataFormatError, match="unknown CIFAR-10 class"):
            load_cifar10([tmp_path / "b.bin"], class_filter=("deer", "unicorn"))


class TestRawMatrix:
    def test_roundtrip(self, rng, tmp_path):
        image = rng.integers(0, 256, size=(17, 23)).astype(np.uint8)
        write_raw_matrix(image, tmp_path / "tex.img0")
        np.testing.assert_array_equal(load_raw_matrix(tmp_path / "tex.img0"), image)


class TestPatches:
    def test_left_half_containment(self, rng):
        # paint the right half with a sentinel; left-half patches never see it
        image = np.zeros((24, 24), dtype=np.uint8)
        image[:, 12:] = 255
        patches = extract_patches(image, patch_size=12, count=40, region="left", seed=1)
        assert patches.max() == 0

    def test_constant_image_gives_identical_patches(self):
        image = np.full((30, 30), 7, dtype=np.uint8)
        patches = extract_patches(image, patch_size=12, count=10, region="right", seed=2)
        assert np.all(patches == 7)

    def test_deterministic(self, rng):
        image = rng.integers(0, 256, size=(40, 40)).astype(np.uint8)
        a = extract_patches(image, 12, 25, "top", seed=9)
        b = extract_patches(image, 12, 25, "top", seed=9)
        np.testing.assert_array_equal(a, b)

    def test_too_small_half_rejected(self):
        with pytest.raises(DataFormatError, match="cannot fit"):
            extract_patches(np.zeros((20, 20), dtype=np.uint8), 12, 5, "left", seed=0)

    def test_synthetic_textures_halves_disjoint(self):
        train, test = synthetic_textures(patch_size=12, count=50, seed=0, size=64)
        assert train.N == test.N == 100
        assert train.n == 144
        assert train.class_count == test.class_count == 2

    def test_texture_image_deterministic(self):
        a = synthetic_texture_image("rows", 4, seed=3, size=32)
        b = synthetic_texture_image("rows", 4, seed=3, size=32)
        np.testing.assert_array_equal(a, b)


class TestPreprocess:
    def _raw(self, samples, labels=None, m=2):
        samples = np.asarray(samples)
        if labels is None:
            labels = np.arange(samples.shape[0]) % m
        return RawDataset(samples, labels, class_count=m, value_range=(-1000, 1000))

    def test_l2_only(self):
        ds = preprocess(self._raw([[3, 4], [1, 0]]), ["l2_normalize"])
        np.testing.assert_allclose(ds.samples[0], [0.6, 0.8])

    def test_zero_mean_then_l2(self):
        ds = preprocess(self._raw([[1, 3], [0, 1]]), ["zero_mean", "l2_normalize"])
        np.testing.assert_allclose(ds.samples[0], [-1 / np.sqrt(2), 1 / np.sqrt(2)])

    def test_post_invariants_on_random_rows(self, rng):
        samples = rng.integers(1, 256, size=(30, 10))
        ds = preprocess(self._raw(samples), ["zero_mean", "l2_normalize"])
        np.testing.assert_allclose(np.linalg.norm(ds.samples, axis=1), 1.0, atol=1e-9)
        np.testing.assert_allclose(ds.samples.sum(axis=1), 0.0, atol=1e-9)

    def test_zero_row_rejected(self):
        with pytest.raises(DataFormatError, match=r"all-zero rows: \[1\]"):
            preprocess(self._raw([[1, 2], [0, 0]]), ["l2_normalize"])

    def test_labels_untouched(self, rng):
        raw = self._raw(rng.integers(1, 256, size=(12, 5)))
        ds = preprocess(raw, ["l2_normalize"])
        np.testing.assert_array_equal(ds.labels, raw.labels)
        assert (ds.N, ds.n) == (raw.N, raw.n)

    def test_unknown_step(self):
        with pytest.raises(ValueError, match="unknown preprocessing step"):
            preprocess(self._raw([[1, 2]], labels=[0], m=1), ["whiten"])


class TestSplit:
    def _balanced(self, rng, N=10, m=2):
        return RawDataset(
            rng.integers(0, 256, size=(N, 4)),
            np.arange(N) % m,
            class_count=m,
        )

    def test_stratified_80_20(self, rng):
        train, val = split_train_val(self._balanced(rng), fraction=0.8, seed=0)
        assert (train.N, val.N) == (8, 2)
        assert set(np.unique(train.labels)) == set(np.unique(val.labels)) == {0, 1}

    def test_disjoint_union(self, rng):
        ds = self._balanced(rng, N=20)
        train, val = split_train_val(ds, 0.7, seed=3)
        combined = np.concatenate([train.samples, val.samples])
        assert train.N + val.N == ds.N
        assert sorted(map(tuple, combined)) == sorted(map(tuple, ds.samples))

    def test_fraction_one_rejected(self, rng):
        with pytest.raises(ValueError, match="fraction"):
            split_train_val(self._balanced(rng), fraction=1.0, seed=0)

    def test_deterministic(self, rng):
        ds = self._balanced(rng, N=30)
        a = split_train_val(ds, 0.8, seed=5)
        b = split_train_val(ds, 0.8, seed=5)
        np.testing.assert_array_equal(a[0].samples, b[0].samples)
        np.testing.assert_array_equal(a[1].samples, b[1].samples)

    def test_tiny_class_rejected(self, rng):
        ds = RawDataset(rng.integers(0, 256, size=(3, 2)), [0, 0, 1], class_count=2)
        with pytest.raises(DataFormatError, match="class 1"):
            split_train_val(ds, 0.8, seed=0)


class TestCsv:
    def test_load_with_label_column(self, tmp_path):
        (tmp_path / "d.csv").write_text("a,b,label\n1,2,0\n3,4,1\n")
        ds = load_csv(tmp_path / "d.csv", "label")
        np.testing.assert_array_equal(ds.samples, [[1, 2], [3, 4]])
        np.testing.assert_array_equal(ds.labels, [0, 1])

    def test_missing_label_column(self, tmp_path):
        (tmp_path / "d.csv").write_text("a,b\n1,2\n")
        with pytest.raises(DataFormatError, match="no column named 'label'"):
            load_csv(tmp_path / "d.csv", "label")


class TestRawDatasetInvariants:
    def test_missing_class_detected(self, rng):
        ds = RawDataset(rng.integers(0, 256, size=(4, 2)), [0, 1, 0, 1], class_count=3)
        with pytest.raises(DataFormatError, match=r"classes with no samples: \[2\]"):
            ds.check_all_classes_present()

    def test_out_of_range_values_rejected(self):
        with pytest.raises(DataFormatError, match="declared range"):
            RawDataset(np.array([[300]]), [0], class_count=1, value_range=(0, 255))
