"""Dataset model, CSV/ARFF ingestion, OpenML client and CV splitting.

Datasets are immutable numeric matrices with binary {0,1} labels.  Label
mapping from the two raw class values is by lexicographic order.  All
loaders reject missing values instead of imputing.
"""

from __future__ import annotations

import csv
import hashlib
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

log = logging.getLogger(__name__)

OPENML_DESC_URL = "https://www.openml.org/api/v1/json/data/{did}"
OPENML_DOWNLOAD_URL = "https://www.openml.org/data/download/{file_id}"


class DataError(ValueError):
    """Raised for malformed or unsupported input data."""


@dataclass(frozen=True)
class Dataset:
    X: np.ndarray
    y: np.ndarray
    feature_names: tuple[str, ...]
    costs: np.ndarray = None

    def __post_init__(self):
        X = np.asarray(self.X, dtype=float)
        y = np.asarray(self.y, dtype=int)
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)
        if X.ndim != 2:
            raise DataError("X must be an n x p matrix")
        n, p = X.shape
        if n < 10:
            raise DataError(f"need at least 10 rows, got {n}")
        if p < 1:
            raise DataError("need at least one feature")
        if len(y) != n:
            raise DataError("label length mismatch")
        if not np.isfinite(X).all():
            raise DataError("X contains missing or non-finite values")
        if set(np.unique(y)) != {0, 1}:
            raise DataError("labels must contain both classes 0 and 1")
        if len(self.feature_names) != p:
            raise DataError("feature name count mismatch")
        costs = self.costs
        if costs is None:
            costs = np.full(p, 1.0 / p)
        costs = np.asarray(costs, dtype=float)
        if len(costs) != p or (costs <= 0).any():
            raise DataError("costs must be p positive reals")
        object.__setattr__(self, "costs", costs)
        X.setflags(write=False)
        y.setflags(write=False)
        costs.setflags(write=False)

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def p(self) -> int:
        return self.X.shape[1]

    def subset(self, idx: np.ndarray) -> "Dataset":
        return Dataset(self.X[idx], self.y[idx], self.feature_names, self.costs)

    def to_csv(self, path, target_name: str = "target"):
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(list(self.feature_names) + [target_name])
            for row, label in zip(self.X, self.y):
                writer.writerow([repr(float(v)) for v in row] + [int(label)])


@dataclass(frozen=True)
class CvSplit:
    folds: tuple
    stratified: bool
    seed: int

    def __post_init__(self):
        object.__setattr__(self, "folds", tuple(np.asarray(f, dtype=int) for f in self.folds))

    @property
    def k(self) -> int:
        return len(self.folds)

    def iter_train_test(self):
        all_idx = np.concatenate(self.folds)
        for fold in self.folds:
            train = np.setdiff1d(all_idx, fold)
            yield train, fold


def _map_labels(raw: list[str], where: str) -> np.ndarray:
    classes = sorted(set(raw))
    if len(classes) != 2:
        raise DataError(f"{where}: expected exactly 2 classes, got {classes}")
    return np.array([classes.index(v) for v in raw], dtype=int)


def load_csv(path, target_column: str) -> Dataset:
    """Load a comma-separated file with a header row.

    The target column's two distinct values map to {0,1} in
    lexicographic order; every other column must be numeric and
    complete.
    """
    path = Path(path)
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}: empty file")
        rows = list(reader)
    if target_column not in header:
        raise DataError(f"{path}: target column {target_column!r} not found")
    if not rows:
        raise DataError(f"{path}: no rows")
    t = header.index(target_column)
    feature_names = tuple(h for i, h in enumerate(header) if i != t)
    X = np.empty((len(rows), len(feature_names)))
    raw_y = []
    for r, row in enumerate(rows):
        if len(row) != len(header):
            raise DataError(f"{path}: row {r + 2} has {len(row)} cells, expected {len(header)}")
        raw_y.append(row[t].strip())
        c_out = 0
        for c, cell in enumerate(row):
            if c == t:
                continue
            cell = cell.strip()
            if cell in ("", "NA", "?", "NaN", "nan"):
                raise DataError(f"{path}: missing value at row {r + 2}, column {header[c]!r}")
            try:
                X[r, c_out] = float(cell)
            except ValueError:
                raise DataError(f"{path}: non-numeric value {cell!r} at row {r + 2}, column {header[c]!r}")
            c_out += 1
    y = _map_labels(raw_y, str(path))
    return Dataset(X, y, feature_names)


def load_arff(path) -> Dataset:
    """Load a dense ARFF file with numeric attributes and one binary nominal class.

    The nominal attribute (conventionally ``class``) becomes the target;
    string/date attributes and sparse data sections are rejected.
    """
    path = Path(path)
    attrs: list[tuple[str, list[str] | None]] = []
    data_lines = []
    in_data = False
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("%"):
                continue
            if in_data:
                data_lines.append(line)
                continue
            low = line.lower()
            if low.startswith("@attribute"):
                rest = line.split(None, 1)[1].strip()
                if rest.startswith("'") or rest.startswith('"'):
                    quote = rest[0]
                    end = rest.index(quote, 1)
                    name, spec = rest[1:end], rest[end + 1:].strip()
                else:
                    name, spec = rest.split(None, 1)
                spec = spec.strip()
                if spec.startswith("{"):
                    levels = [v.strip().strip("'\"") for v in spec.strip("{}").split(",")]
                    attrs.append((name, levels))
                elif spec.lower() in ("numeric", "real", "integer"):
                    attrs.append((name, None))
                else:
                    raise DataError(f"{path}: unsupported attribute type {spec!r} for {name!r}")
            elif low.startswith("@data"):
                in_data = True
    nominal = [(i, name, levels) for i, (name, levels) in enumerate(attrs) if levels is not None]
    if len(nominal) != 1:
        raise DataError(f"{path}: expected exactly one nominal class attribute, got {len(nominal)}")
    t, _, levels = nominal[0]
    if len(levels) != 2:
        raise DataError(f"{path}: class attribute must have 2 levels, got {levels}")
    if not data_lines:
        raise DataError(f"{path}: no data rows")
    feature_names = tuple(name for i, (name, _) in enumerate(attrs) if i != t)
    X = np.empty((len(data_lines), len(feature_names)))
    raw_y = []
    for r, line in enumerate(data_lines):
        if line.startswith("{"):
            raise DataError(f"{path}: sparse ARFF is not supported")
        cells = [c.strip().strip("'\"") for c in line.split(",")]
        if len(cells) != len(attrs):
            raise DataError(f"{path}: data row {r + 1} has {len(cells)} values, expected {len(attrs)}")
        raw_y.append(cells[t])
        c_out = 0
        for c, cell in enumerate(cells):
            if c == t:
                continue
            if cell == "?":
                raise DataError(f"{path}: missing value at data row {r + 1}, attribute {attrs[c][0]!r}")
            X[r, c_out] = float(cell)
            c_out += 1
    y = _map_labels(raw_y, str(path))
    return Dataset(X, y, feature_names)


def _default_http_get(url: str) -> bytes:
    import httpx

    resp = httpx.get(url, follow_redirects=True, timeout=60.0)
    resp.raise_for_status()
    return resp.content


def fetch_openml(did: int, cache_dir, http_get=None) -> Dataset:
    """Fetch an OpenML dataset by id, caching the description JSON and ARFF.

    A warm cache short-circuits the network entirely; ``http_get`` is
    injectable for tests and offline use.
    """
    from filelock import FileLock

    cache_dir = Path(cache_dir)
    cache_dir.mkdir(parents=True, exist_ok=True)
    arff_path = cache_dir / f"{did}.arff"
    json_path = cache_dir / f"{did}.json"
    if arff_path.exists():
        digest = hashlib.sha256(arff_path.read_bytes()).hexdigest()
        log.info("openml cache hit for did=%d (sha256=%s)", did, digest[:12])
        return load_arff(arff_path)
    if http_get is None:
        http_get = _default_http_get
    with FileLock(str(cache_dir / f"{did}.lock")):
        if not arff_path.exists():
            desc = http_get(OPENML_DESC_URL.format(did=did))
            json_path.write_bytes(desc)
            file_id = json.loads(desc)["data_set_description"]["file_id"]
            arff_path.write_bytes(http_get(OPENML_DOWNLOAD_URL.format(file_id=file_id)))
    return load_arff(arff_path)


def make_synthetic(n: int, p: int, k_informative: int, noise_sd: float, seed: int):
    """Generate a balanced binary task with known informative features.

    Labels threshold a linear combination of ``k_informative``
    standard-normal features (plus Gaussian noise) at the empirical
    median, so classes balance within a single count.  Returns the
    dataset and the informative index set.
    """
    if k_informative > p:
        raise DataError("k_informative must be <= p")
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((n, p))
    informative = np.arange(k_informative)
    score = X[:, informative].sum(axis=1) if k_informative else rng.standard_normal(n)
    score = score + rng.standard_normal(n) * noise_sd
    y = (score > np.median(score)).astype(int)
    if y.sum() in (0, n):  # all-median degenerate draw
        y[: n // 2] = 1 - y[0]
    names = tuple(f"f{j}" for j in range(p))
    return Dataset(X, y, names), informative


def split_cv(dataset: Dataset, k: int, stratified: bool = True, seed: int = 0) -> CvSplit:
    """Deterministic k-fold partition, stratified by class when requested."""
    n = dataset.n
    if k > n:
        raise DataError(f"k={k} exceeds n={n}")
    rng = np.random.default_rng(seed)
    if stratified:
        if k > min(np.bincount(dataset.y)):
            raise DataError("k exceeds the minority class count")
        folds = [[] for _ in range(k)]
        for cls in (0, 1):
            idx = np.flatnonzero(dataset.y == cls)
            rng.shuffle(idx)
            for i, j in enumerate(idx):
                folds[i % k].append(j)
        folds = [np.sort(np.array(f, dtype=int)) for f in folds]
    else:
        idx = rng.permutation(n)
        folds = [np.sort(chunk) for chunk in np.array_split(idx, k)]
    return CvSplit(folds=tuple(folds), stratified=stratified, seed=seed)
