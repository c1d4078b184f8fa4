import numpy as np
import pytest
import scipy.sparse as sp

from sampled_spectral import dataset as D


def write(tmp_path, name, text):
    path = tmp_path / name
    path.write_text(text)
    return path


def test_libsvm_line_transcription(tmp_path):
    ds = D.load_libsvm(write(tmp_path, "a.svm", "+1 1:0.5 3:2.0\n0 2:1.0\n"))
    np.testing.assert_array_equal(ds.dense(), [[0.5, 0.0, 2.0], [0.0, 1.0, 0.0]])
    np.testing.assert_array_equal(ds.labels, [1.0, -1.0])
    assert ds.n == 3 and ds.count == 2


def test_libsvm_comments_blank_lines_and_sparse(tmp_path):
    path = write(tmp_path, "b.svm", "# header\n-1 2:3 # trailing\n\n1 1:1\n")
    ds = D.load_libsvm(path, sparse=True)
    assert sp.issparse(ds.features) and ds.is_sparse
    np.testing.assert_array_equal(ds.dense(), [[0, 3], [1, 0]])
    assert ds == D.load_libsvm(path)


@pytest.mark.parametrize(
    "text, line",
    [("+1 3:x\n", 1), ("1 1:1\n1 0:2\n", 2), ("1 2:1 1:1\n", 1), ("1 1:1\nabc 1:1\n", 2), ("1 1:1 2\n", 1)],
)
def test_libsvm_parse_errors_cite_line(tmp_path, text, line):
    with pytest.raises(D.ParseError) as info:
        D.load_libsvm(write(tmp_path, "bad.svm", text))
    assert info.value.lineno == line
    assert f"line {line}" in str(info.value)


@pytest.mark.parametrize("labels", ["2 1:1\n1 1:2\n", "-1 1:1\n0 1:2\n"])
def test_libsvm_label_errors(tmp_path, labels):
    with pytest.raises(D.LabelError):
        D.load_libsvm(write(tmp_path, "l.svm", labels))


def test_libsvm_roundtrip(tmp_path):
    ds = D.synthesize(6, 40, seed=2)
    dense = ds.dense().copy()
    dense[:, -1] = 0.0  # trailing zero column must survive
    dense[3] = 0.0
    ds = D.Dataset(dense, ds.labels)
    D.write_libsvm(ds, tmp_path / "r.svm")
    back = D.load_libsvm(tmp_path / "r.svm")
    assert back == ds
    np.testing.assert_array_equal(back.dense(), dense)


def test_csv_rows(tmp_path):
    ds = D.load_csv(write(tmp_path, "a.csv", "1.0,2.0,-1\n0.5,0,1\n"))
    np.testing.assert_array_equal(ds.dense(), [[1.0, 2.0], [0.5, 0.0]])
    np.testing.assert_array_equal(ds.labels, [-1.0, 1.0])


def test_csv_errors(tmp_path):
    with pytest.raises(D.DimensionError):
        D.load_csv(write(tmp_path, "r.csv", "1,2,1\n1,2,3,1\n"))
    with pytest.raises(D.DatasetError, match="no data"):
        D.load_csv(write(tmp_path, "e.csv", ""))


def test_load_dispatch(tmp_path):
    p = write(tmp_path, "x.csv", "1,0,1\n0,1,0\n")
    assert D.load(p).count == 2
    with pytest.raises(ValueError):
        D.load(p, "parquet")


def test_split_sizes_and_determinism():
    ds = D.synthesize(3, 100, seed=1)
    part = D.split(ds, 0.95, seed=4)
    assert part.N == 95 and part.validation_indices.size == 5
    assert np.array_equal(np.union1d(part.train_indices, part.validation_indices), np.arange(100))
    again = D.split(ds, 0.95, seed=4)
    np.testing.assert_array_equal(part.train_indices, again.train_indices)
    with pytest.raises(D.DatasetError):
        D.split(ds, 0.999)


def test_split_seeds_give_distinct_partitions():
    ds = D.synthesize(3, 100, seed=1)
    parts = {tuple(D.split(ds, 0.95, seed=s).validation_indices) for s in range(20)}
    assert len(parts) == 20


def test_synthesize_properties():
    ds, w = D.synthesize(4, 300, seed=9, noise=0.0, return_truth=True)
    assert np.all(ds.labels * (ds.dense() @ w) >= 0.0)
    assert D.synthesize(4, 300, seed=9) == D.synthesize(4, 300, seed=9)
    tiny = D.synthesize(1, 2, seed=0)
    assert tiny.n == 1 and tiny.count == 2
    skewed = D.synthesize(5, 4000, seed=1, condition=100.0).dense()
    assert skewed[:, 0].std() / skewed[:, -1].std() == pytest.approx(100.0, rel=0.1)


def test_dataset_validation():
    with pytest.raises(D.LabelError):
        D.Dataset(np.zeros((2, 1)), np.array([1.0, 0.5]))
    with pytest.raises(D.DimensionError):
        D.Dataset(np.zeros((3, 1)), np.array([1.0, -1.0]))
