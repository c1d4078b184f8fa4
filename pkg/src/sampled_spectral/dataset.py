"""Binary-classification datasets: LIBSVM/CSV loaders, splits, synthetic data."""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.sparse as sp


class DatasetError(ValueError):
    """Raised for malformed or inconsistent dataset input."""


class ParseError(DatasetError):
    def __init__(self, lineno: int, message: str):
        super().__init__(f"line {lineno}: {message}")
        self.lineno = lineno


class LabelError(DatasetError):
    pass


class DimensionError(DatasetError):
    pass


@dataclass(frozen=True)
class Dataset:
    """Feature rows ``a_j`` (dense array or CSR matrix) and labels ``b_j`` in {-1, +1}."""

    features: np.ndarray | sp.csr_matrix
    labels: np.ndarray

    def __post_init__(self):
        labels = np.asarray(self.labels, dtype=float)
        object.__setattr__(self, "labels", labels)
        if labels.ndim != 1:
            raise DimensionError("labels must be one-dimensional")
        if self.features.ndim != 2 or self.features.shape[0] != labels.size:
            raise DimensionError(
                f"features shape {self.features.shape} does not match {labels.size} labels"
            )
        if labels.size < 2:
            raise DatasetError("a dataset needs at least 2 points")
        if not np.all(np.abs(labels) == 1.0):
            raise LabelError("labels must be -1 or +1")

    @property
    def n(self) -> int:
        return self.features.shape[1]

    @property
    def count(self) -> int:
        return self.labels.size

    @property
    def is_sparse(self) -> bool:
        return sp.issparse(self.features)

    def dense(self) -> np.ndarray:
        return self.features.toarray() if self.is_sparse else np.asarray(self.features)

    def __eq__(self, other):
        if not isinstance(other, Dataset):
            return NotImplemented
        return (
            self.features.shape == other.features.shape
            and np.array_equal(self.labels, other.labels)
            and np.array_equal(self.dense(), other.dense())
        )

    __hash__ = None


@dataclass(frozen=True)
class Split:
    train_indices: np.ndarray
    validation_indices: np.ndarray

    @property
    def N(self) -> int:
        return self.train_indices.size


def _map_labels(raw: list[float]) -> np.ndarray:
    values = set(raw)
    if values <= {-1.0, 1.0}:
        return np.array(raw, dtype=float)
    if values <= {0.0, 1.0}:
        return np.where(np.array(raw) == 0.0, -1.0, 1.0)
    raise LabelError(f"unsupported label set {sorted(values)}; expected {{-1,+1}} or {{0,1}}")


def load_libsvm(path, sparse: bool = False) -> Dataset:
    """Read ``label idx:val ...`` lines with 1-based ascending feature indices.

    The feature dimension is the largest index seen. Labels in {0, 1} are
    mapped to {-1, +1}.
    """
    labels: list[float] = []
    rows: list[int] = []
    cols: list[int] = []
    vals: list[float] = []
    n = 0
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            tokens = line.split()
            try:
                label = float(tokens[0])
            except ValueError:
                raise ParseError(lineno, f"bad label {tokens[0]!r}") from None
            last = 0
            row = len(labels)
            for tok in tokens[1:]:
                idx_s, sep, val_s = tok.partition(":")
                if not sep:
                    raise ParseError(lineno, f"expected idx:val, got {tok!r}")
                try:
                    idx = int(idx_s)
                    val = float(val_s)
                except ValueError:
                    raise ParseError(lineno, f"non-numeric entry {tok!r}") from None
                if idx <= last:
                    raise ParseError(lineno, f"indices must be 1-based and ascending ({tok!r})")
                last = idx
                rows.append(row)
                cols.append(idx - 1)
                vals.append(val)
            n = max(n, last)
            labels.append(label)
    if not labels:
        raise DatasetError("no data")
    if n == 0:
        raise DimensionError("no feature indices present")
    mat = sp.csr_matrix((vals, (rows, cols)), shape=(len(labels), n), dtype=float)
    features = mat if sparse else mat.toarray()
    return Dataset(features, _map_labels(labels))


def write_libsvm(ds: Dataset, path) -> None:
    """Write ``ds`` so that :func:`load_libsvm` reads it back unchanged."""
    dense = ds.dense()
    n = ds.n
    needs_last = not np.any(dense[:, n - 1] != 0.0)
    with open(path, "w") as fh:
        for i, (row, label) in enumerate(zip(dense, ds.labels)):
            parts = ["+1" if label > 0 else "-1"]
            for j in np.flatnonzero(row):
                parts.append(f"{j + 1}:{float(row[j])!r}")
            if i == 0 and needs_last:
                parts.append(f"{n}:0.0")
            fh.write(" ".join(parts) + "\n")


def load_csv(path) -> Dataset:
    """Comma-separated rows, last column is the label."""
    rows = []
    labels = []
    width = None
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            fields = line.split(",")
            if width is None:
                width = len(fields)
                if width < 2:
                    raise DimensionError(f"line {lineno}: need at least one feature and a label")
            elif len(fields) != width:
                raise DimensionError(f"line {lineno}: expected {width} columns, got {len(fields)}")
            try:
                nums = [float(v) for v in fields]
            except ValueError:
                raise ParseError(lineno, "non-numeric field") from None
            rows.append(nums[:-1])
            labels.append(nums[-1])
    if not rows:
        raise DatasetError("no data")
    return Dataset(np.array(rows, dtype=float), _map_labels(labels))


def load(path, fmt: str | None = None, sparse: bool = False) -> Dataset:
    fmt = fmt or ("csv" if Path(path).suffix.lower() == ".csv" else "libsvm")
    if fmt == "libsvm":
        return load_libsvm(path, sparse=sparse)
    if fmt == "csv":
        return load_csv(path)
    raise ValueError(f"unknown dataset format {fmt!r}")


def split(ds: Dataset, train_fraction: float = 0.95, seed: int = 0) -> Split:
    """Uniformly random train/validation partition, reproducible from ``seed``."""
    if not 0.0 < train_fraction < 1.0:
        raise ValueError("train_fraction must lie in (0, 1)")
    n_train = int(math.floor(train_fraction * ds.count + 0.5))
    if n_train == 0 or n_train == ds.count:
        raise DatasetError(
            f"train_fraction={train_fraction} leaves an empty side for {ds.count} points"
        )
    perm = np.random.Generator(np.random.Philox(seed)).permutation(ds.count)
    return Split(np.sort(perm[:n_train]), np.sort(perm[n_train:]))


def synthesize(
    n: int,
    count: int,
    seed: int = 0,
    noise: float = 0.1,
    condition: float = 1.0,
    return_truth: bool = False,
):
    """Gaussian features, labels ``sign(a^T w* + noise * xi)``.

    ``w*`` is a random unit vector. Features are standard normal; with
    ``condition > 1`` column ``i`` is scaled by ``condition**(-i / (n - 1))``
    to make the problem ill-conditioned. With ``return_truth`` the pair
    ``(dataset, w_star)`` is returned.
    """
    if n < 1 or count < 2:
        raise ValueError("need n >= 1 and count >= 2")
    if condition < 1.0:
        raise ValueError("condition must be >= 1")
    rng = np.random.Generator(np.random.Philox(seed))
    w_star = rng.standard_normal(n)
    w_star /= np.linalg.norm(w_star)
    A = rng.standard_normal((count, n))
    if condition > 1.0 and n > 1:
        A *= np.geomspace(1.0, 1.0 / condition, n)
    margin = A @ w_star + noise * rng.standard_normal(count)
    b = np.where(margin >= 0.0, 1.0, -1.0)
    ds = Dataset(A, b)
    return (ds, w_star) if return_truth else ds
