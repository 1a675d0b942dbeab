import numpy as np
import pytest

from pudefect.data import (
    FeatureMatrix,
    LabeledDataset,
    PUDataset,
    load_feature_file,
    load_matrix,
    make_pu_split,
    save_feature_file,
    save_matrix,
)
from pudefect.errors import DataError, FormatError


def random_dataset(n, d, seed, label_pool=(0, 1)):
    rng = np.random.default_rng(seed)
    feats = rng.normal(size=(n, d)).astype(np.float32)
    labels = rng.choice(label_pool, size=n).astype(np.int8)
    return LabeledDataset(FeatureMatrix(feats), labels)


class TestFeatureMatrix:
    def test_rejects_nan(self):
        with pytest.raises(DataError, match="row 1"):
            FeatureMatrix(np.array([[0.0, 1.0], [np.nan, 2.0]], dtype=np.float32))

    def test_rejects_zero_dim(self):
        with pytest.raises(DataError):
            FeatureMatrix(np.zeros((3, 0), dtype=np.float32))

    def test_empty_rows_ok(self):
        m = FeatureMatrix(np.zeros((0, 8), dtype=np.float32))
        assert (m.n, m.d) == (0, 8)


class TestCsvRoundTrip:
    def test_three_row_mixed_labels(self, tmp_path):
        path = tmp_path / "mixed.csv"
        path.write_text("id,label,f0,f1\n0,1,0.5,1.5\n1,0,2.5,3.5\n2,-1,4.5,5.5\n")
        with pytest.warns(UserWarning, match="negative rows excluded"):
            pu = load_feature_file(path, "csv", pu=True)
        assert isinstance(pu, PUDataset)
        assert pu.positives.n == 1 and pu.unlabeled.n == 1
        with pytest.raises(DataError, match="unlabeled"):
            load_feature_file(path, "csv")

    def test_single_value_identity(self, tmp_path):
        path = tmp_path / "one.csv"
        ds = LabeledDataset(FeatureMatrix(np.array([[0.5]], dtype=np.float32)), np.array([1]))
        save_feature_file(ds, path, "csv")
        back = load_feature_file(path, "csv")
        assert back.features.data.tobytes() == ds.features.data.tobytes()
        assert back.labels.tolist() == [1]

    def test_all_unlabeled_rows(self, tmp_path):
        path = tmp_path / "unl.csv"
        path.write_text("id,label,f0\n0,-1,1.0\n1,-1,2.0\n")
        pu = load_feature_file(path, "csv", pu=True)
        assert pu.positives.n == 0 and pu.unlabeled.n == 2

    def test_header_only_is_empty(self, tmp_path):
        path = tmp_path / "empty.csv"
        path.write_text("id,label,f0,f1,f2\n")
        ds = load_feature_file(path, "csv")
        assert ds.n == 0 and ds.features.d == 3

    def test_row_length_mismatch_names_row(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("id,label,f0,f1\n0,1,1.0,2.0\n1,1,3.0\n")
        with pytest.raises(DataError, match="row 3"):
            load_feature_file(path, "csv")

    def test_bad_label_code(self, tmp_path):
        path = tmp_path / "lab.csv"
        path.write_text("0,7,1.0\n")
        with pytest.raises(FormatError):
            load_feature_file(path, "csv")

    def test_float_values_roundtrip_exactly(self, tmp_path):
        ds = random_dataset(50, 7, seed=123)
        path = tmp_path / "r.csv"
        save_feature_file(ds, path, "csv")
        back = load_feature_file(path, "csv")
        assert back.features.data.tobytes() == ds.features.data.tobytes()


class TestPufvRoundTrip:
    @pytest.mark.parametrize("n,d", [(100, 16), (0, 8), (1, 1), (37, 3)])
    def test_bit_exact(self, tmp_path, n, d):
        ds = random_dataset(n, d, seed=n * 31 + d)
        path = tmp_path / "x.pufv"
        save_feature_file(ds, path, "pufv")
        back = load_feature_file(path, "pufv")
        assert back.features.data.tobytes() == ds.features.data.tobytes()
        assert np.array_equal(back.labels, ds.labels)

    def test_large_matrix_identity(self, tmp_path):
        ds = random_dataset(21835, 10, seed=4)
        path = tmp_path / "big.pufv"
        save_feature_file(ds, path, "pufv")
        back = load_feature_file(path, "pufv")
        assert back.features.data.tobytes() == ds.features.data.tobytes()

    def test_empty_with_dim(self, tmp_path):
        path = tmp_path / "e.pufv"
        save_matrix(FeatureMatrix(np.zeros((0, 8), dtype=np.float32)), path)
        m = load_matrix(path)
        assert (m.n, m.d) == (0, 8)

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "bad.pufv"
        path.write_bytes(b"NOPE" + b"\x00" * 40)
        with pytest.raises(FormatError, match="magic"):
            load_matrix(path)

    def test_truncated_payload(self, tmp_path):
        ds = random_dataset(10, 4, seed=1)
        path = tmp_path / "t.pufv"
        save_feature_file(ds, path, "pufv")
        path.write_bytes(path.read_bytes()[:-5])
        with pytest.raises(FormatError, match="size"):
            load_feature_file(path, "pufv")

    def test_missing_file(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            load_feature_file(tmp_path / "nope.pufv")

    def test_pu_dataset_roundtrip(self, tmp_path):
        full = random_dataset(40, 3, seed=9)
        pu = make_pu_split(full, 1, 0.5, seed=2)
        path = tmp_path / "pu.pufv"
        save_feature_file(pu, path)
        back = load_feature_file(path, pu=True)
        assert back.positives.data.tobytes() == pu.positives.data.tobytes()
        assert back.unlabeled.data.tobytes() == pu.unlabeled.data.tobytes()


class TestMakePuSplit:
    def test_full_fraction_takes_all_positives(self):
        full = random_dataset(30, 2, seed=7)
        n_pos = int((full.labels == 1).sum())
        pu = make_pu_split(full, 1, 1.0, seed=0)
        assert pu.positives.n == n_pos
        assert np.all(pu.hidden_truth == 0)

    def test_floor_rule_on_bsd_sized_class(self):
        labels = np.concatenate([np.ones(11075, dtype=np.int8), np.zeros(25, dtype=np.int8)])
        feats = FeatureMatrix(np.arange(11100, dtype=np.float32)[:, None])
        pu = make_pu_split(LabeledDataset(feats, labels), 1, 0.05, seed=3)
        assert pu.positives.n == 553

    def test_minimum_one(self):
        full = random_dataset(12, 2, seed=5)
        pu = make_pu_split(full, 1, 1e-6, seed=0)
        assert pu.positives.n == 1

    def test_partition_is_exact(self):
        full = random_dataset(200, 3, seed=8)
        pu = make_pu_split(full, 1, 0.3, seed=4)
        assert pu.positives.n + pu.unlabeled.n == full.n
        combined = np.concatenate([pu.positives.data, pu.unlabeled.data], axis=0)
        assert (
            np.sort(combined.view(np.uint32).reshape(-1)).tobytes()
            == np.sort(full.features.data.view(np.uint32).reshape(-1)).tobytes()
        )

    def test_determinism_and_seed_sensitivity(self):
        full = random_dataset(1000, 2, seed=10, label_pool=(1,))
        a = make_pu_split(full, 1, 0.5, seed=42)
        b = make_pu_split(full, 1, 0.5, seed=42)
        c = make_pu_split(full, 1, 0.5, seed=43)
        assert a.positives.data.tobytes() == b.positives.data.tobytes()
        assert a.positives.data.tobytes() != c.positives.data.tobytes()

    def test_empty_class_error(self):
        full = random_dataset(10, 2, seed=1, label_pool=(0,))
        with pytest.raises(DataError, match="class 1"):
            make_pu_split(full, 1, 0.5, seed=0)

    def test_hidden_truth_matches_remaining(self):
        full = random_dataset(60, 2, seed=12)
        pu = make_pu_split(full, 1, 0.5, seed=6)
        assert pu.hidden_truth is not None
        assert pu.hidden_truth.shape == (pu.unlabeled.n,)
        assert int(pu.hidden_truth.sum()) == int((full.labels == 1).sum()) - pu.positives.n
