"""Data pools: synthetic generators, CSV ingestion, splits and label oracles.

Randomness always flows through :func:`numpy.random.default_rng`, so any of
an int seed, a :class:`numpy.random.SeedSequence` or a ready Generator can
be passed where a ``seed`` is accepted.  PCG64 streams are portable across
platforms; replications get independent children via ``SeedSequence.spawn``.
"""

import csv
import json
import logging
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional

import numpy as np

from .errors import (
    InsufficientPool,
    InvalidSpec,
    MissingColumn,
    NonBinaryLabel,
    OracleFailure,
    ParseError,
)
from .logistic import sigmoid

log = logging.getLogger(__name__)

CASE_BETAS = {
    1: (0.5, -2.0, -0.6, 0.5, 1.2),
    2: (5.0, -20.0, -6.0, 5.0, 12.0),
    3: (1.0, -4.0, -2.0, 2.0, 3.0, 7.0),
}


@dataclass(frozen=True)
class TrueModelSpec:
    beta_true: np.ndarray
    case_id: str = "custom"

    @property
    def P(self):
        return self.beta_true.size

    @property
    def active_set(self):
        return tuple(int(j) for j in np.flatnonzero(self.beta_true))


def case_spec(case, P=100):
    """Coefficient vector of one of the three simulation cases, zero-padded to ``P``."""
    try:
        head = CASE_BETAS[int(case)]
    except (KeyError, ValueError):
        raise InvalidSpec(f"unknown case {case!r}; expected 1, 2 or 3") from None
    if P < len(head):
        raise InvalidSpec(f"case {case} needs P >= {len(head)}")
    beta = np.zeros(P)
    beta[: len(head)] = head
    return TrueModelSpec(beta, f"case{int(case)}")


@dataclass(frozen=True)
class DataPool:
    """Feature matrix with its hidden labels and the train/test partition.

    ``labeled`` is the initial labeled subset of ``train_idx``; the query
    loop keeps its own growing copy.  Labels must be obtained through a
    :class:`LabelOracle` by anything that pretends not to know them.
    """

    X: np.ndarray
    y: np.ndarray
    train_idx: np.ndarray
    test_idx: np.ndarray
    var_names: tuple
    intercept: Optional[int] = 0
    labeled: tuple = ()
    truth: Optional[TrueModelSpec] = None

    def __post_init__(self):
        if set(self.train_idx.tolist()) & set(self.test_idx.tolist()):
            raise InvalidSpec("train and test indices overlap")
        if not set(self.labeled) <= set(self.train_idx.tolist()):
            raise InvalidSpec("labeled subjects must come from the training split")
        if len(self.var_names) != self.X.shape[1]:
            raise InvalidSpec(f"{len(self.var_names)} names for {self.X.shape[1]} columns")
        if self.intercept is not None and not np.all(self.X[:, self.intercept] == 1.0):
            raise InvalidSpec(f"intercept column {self.intercept} is not identically 1")

    @property
    def N(self):
        return self.X.shape[0]

    @property
    def P(self):
        return self.X.shape[1]

    def unlabeled(self):
        return np.setdiff1d(self.train_idx, np.asarray(self.labeled, dtype=int))

    def describe(self):
        y_tr = self.y[self.train_idx]
        return {
            "N": self.N,
            "P": self.P,
            "train": int(self.train_idx.size),
            "test": int(self.test_idx.size),
            "positive_rate": float(self.y.mean()) if self.N else float("nan"),
            "train_positive_rate": float(y_tr.mean()) if y_tr.size else float("nan"),
        }


class LabelOracle:
    """Reveals stored labels for training-split indices and counts every query."""

    def __init__(self, pool, allowed=None):
        self._y = pool.y
        allowed = pool.train_idx if allowed is None else allowed
        self._allowed = np.zeros(pool.N, dtype=bool)
        self._allowed[np.asarray(allowed, dtype=int)] = True
        self.query_count = 0
        self.revealed = []

    def query(self, index):
        index = int(index)
        if not 0 <= index < self._allowed.size or not self._allowed[index]:
            raise OracleFailure(index)
        self.query_count += 1
        self.revealed.append(index)
        return int(self._y[index])

    def query_many(self, indices):
        return np.array([self.query(i) for i in indices], dtype=int)


def draw_means(P, seed=None):
    """Column means for the synthetic cases: 1 for the intercept, U(-1, 1) otherwise."""
    rng = np.random.default_rng(seed)
    mu = rng.uniform(-1.0, 1.0, size=P)
    mu[0] = 1.0
    return mu


def gen_synthetic(spec, N=20000, P=None, test_size=5000, seed=None, means=None):
    """Simulate a pool from a logistic model with an intercept column.

    Columns ``j >= 1`` are ``Normal(mu_j, 1)`` with ``mu_j ~ U(-1, 1)``; the
    means are drawn afresh unless ``means`` is given.  Labels are Bernoulli
    with success probability ``F(x | beta_true)``.  A uniformly random
    ``test_size`` subset forms the test split.
    """
    P = spec.P if P is None else int(P)
    if P != spec.P:
        if P < len(spec.active_set) or np.any(spec.beta_true[P:] != 0):
            raise InvalidSpec(f"P={P} cannot hold the active coefficients of {spec.case_id}")
        beta = np.zeros(P)
        m = min(P, spec.P)
        beta[:m] = spec.beta_true[:m]
        spec = TrueModelSpec(beta, spec.case_id)
    if not 0 < test_size < N:
        raise InvalidSpec(f"need 0 < test_size < N, got test_size={test_size}, N={N}")
    rng = np.random.default_rng(seed)
    mu = draw_means(P, rng) if means is None else np.asarray(means, dtype=float)
    if mu.shape != (P,):
        raise InvalidSpec(f"means must have length {P}")
    X = rng.standard_normal((N, P)) + mu
    X[:, 0] = 1.0
    p = sigmoid(X @ spec.beta_true)
    y = (rng.random(N) < p).astype(np.int8)
    perm = rng.permutation(N)
    test_idx = np.sort(perm[:test_size])
    train_idx = np.sort(perm[test_size:])
    names = tuple(f"x{j + 1}" for j in range(P))
    return DataPool(X, y, train_idx, test_idx, names, intercept=0, truth=spec)


def initial_split(pool, n0, seed=None):
    """Label ``n0`` training points drawn uniformly without replacement."""
    if not 1 <= n0 <= pool.train_idx.size:
        raise InsufficientPool(f"cannot draw n0={n0} from {pool.train_idx.size} training points")
    rng = np.random.default_rng(seed)
    chosen = rng.choice(pool.train_idx, size=n0, replace=False)
    return replace(pool, labeled=tuple(int(i) for i in np.sort(chosen)))


def split_pool(pool, test_size=None, train_size=None, seed=None):
    """Random train/test partition of all rows.

    Give exactly one of ``test_size`` / ``train_size``; either may be a
    fraction in (0, 1) or a row count.
    """
    if (test_size is None) == (train_size is None):
        raise InvalidSpec("give exactly one of test_size and train_size")
    N = pool.N
    size = test_size if test_size is not None else train_size
    if 0 < size < 1:
        size = int(round(size * N))
    size = int(size)
    if not 0 < size < N:
        raise InvalidSpec(f"split size {size} out of range for {N} rows")
    perm = np.random.default_rng(seed).permutation(N)
    first, rest = np.sort(perm[:size]), np.sort(perm[size:])
    train, test = (rest, first) if test_size is not None else (first, rest)
    return replace(pool, train_idx=train, test_idx=test, labeled=())


@dataclass
class CsvSchema:
    label_column: str
    feature_columns: Optional[list] = None
    has_header: bool = True
    intercept: str = "add"  # "add" | "present"
    intercept_column: Optional[str] = None
    label_map: Optional[dict] = None
    delimiter: str = ","

    def __post_init__(self):
        if self.intercept not in ("add", "present"):
            raise InvalidSpec(f"intercept must be 'add' or 'present', got {self.intercept!r}")


INTERCEPT_NAME = "(intercept)"


def _parse_label(raw, label_map, line, col):
    if label_map is not None:
        if raw in label_map:
            return int(label_map[raw])
        raise NonBinaryLabel(f"line {line}: label {raw!r} not in label map")
    try:
        value = float(raw)
    except ValueError:
        raise ParseError(line, col, f"cannot parse label {raw!r}") from None
    if value not in (0.0, 1.0):
        raise NonBinaryLabel(f"line {line}: label {raw!r} is not 0 or 1")
    return int(value)


def load_csv(path, schema):
    """Read a delimited file into a :class:`DataPool` with every row in training.

    Use :func:`split_pool` (or a manifest) to carve out a test split.
    """
    path = Path(path)
    with path.open(newline="") as fh:
        rows = list(csv.reader(fh, delimiter=schema.delimiter))
    first_line = 1
    if schema.has_header:
        if not rows:
            raise ParseError(1, 0, "file is empty")
        header = [h.strip() for h in rows[0]]
        rows = rows[1:]
        first_line = 2
    else:
        width = len(rows[0]) if rows else 0
        header = [str(i) for i in range(width)]

    if schema.label_column not in header:
        raise MissingColumn(schema.label_column)
    label_pos = header.index(schema.label_column)
    if schema.feature_columns is None:
        feat_names = [h for h in header if h != schema.label_column]
    else:
        feat_names = list(schema.feature_columns)
        for name in feat_names:
            if name not in header:
                raise MissingColumn(name)
    feat_pos = [header.index(h) for h in feat_names]

    X = np.empty((len(rows), len(feat_pos)))
    y = np.empty(len(rows), dtype=np.int8)
    for r, row in enumerate(rows):
        line = first_line + r
        if len(row) != len(header):
            raise ParseError(line, len(row), f"expected {len(header)} fields, found {len(row)}")
        for c, pos in enumerate(feat_pos):
            cell = row[pos].strip()
            try:
                X[r, c] = float(cell)
            except ValueError:
                raise ParseError(line, header[pos], f"non-numeric value {cell!r}") from None
            if not math.isfinite(X[r, c]):
                raise ParseError(line, header[pos], f"non-finite value {cell!r}")
        y[r] = _parse_label(row[label_pos].strip(), schema.label_map, line, schema.label_column)

    if schema.intercept == "add":
        X = np.hstack([np.ones((X.shape[0], 1)), X])
        feat_names = [INTERCEPT_NAME, *feat_names]
        intercept = 0
    else:
        name = schema.intercept_column or feat_names[0]
        if name not in feat_names:
            raise MissingColumn(name)
        intercept = feat_names.index(name)
    pool = DataPool(
        X,
        y,
        np.arange(X.shape[0]),
        np.array([], dtype=int),
        tuple(feat_names),
        intercept=intercept,
    )
    info = pool.describe()
    log.info("loaded %s: N=%d P=%d positive rate %.3f", path, info["N"], info["P"], info["positive_rate"])
    return pool


def write_csv(pool, path, label_column="y"):
    """Write features and labels; floats use ``repr`` so a reload is bit-exact."""
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([*pool.var_names, label_column])
        for row, label in zip(pool.X, pool.y):
            w.writerow([repr(float(v)) for v in row] + [int(label)])


@dataclass
class DatasetManifest:
    path: str
    label_column: str
    intercept: str = "add"
    intercept_column: Optional[str] = None
    feature_columns: Optional[list] = None
    has_header: bool = True
    label_map: Optional[dict] = None
    split: dict = field(default_factory=lambda: {"test_fraction": 0.3})
    seed: int = 0

    @classmethod
    def from_dict(cls, d, base_dir=None):
        known = set(cls.__dataclass_fields__)
        extra = set(d) - known
        if extra:
            raise InvalidSpec(f"unknown manifest keys: {sorted(extra)}")
        if "path" not in d or "label_column" not in d:
            raise InvalidSpec("manifest needs 'path' and 'label_column'")
        m = cls(**d)
        if base_dir is not None and not Path(m.path).is_absolute():
            m.path = str(Path(base_dir) / m.path)
        return m

    @classmethod
    def load(cls, path):
        path = Path(path)
        return cls.from_dict(json.loads(path.read_text()), base_dir=path.parent)

    def schema(self):
        return CsvSchema(
            label_column=self.label_column,
            feature_columns=self.feature_columns,
            has_header=self.has_header,
            intercept=self.intercept,
            intercept_column=self.intercept_column,
            label_map=self.label_map,
        )

    def split_kwargs(self):
        s = dict(self.split)
        allowed = {"train_size", "test_size", "test_fraction", "train_fraction"}
        if len(s) != 1 or not set(s) <= allowed:
            raise InvalidSpec(f"split must have exactly one of {sorted(allowed)}, got {s}")
        key, value = next(iter(s.items()))
        if key.endswith("fraction") and not 0 < value < 1:
            raise InvalidSpec(f"{key} must lie in (0, 1)")
        return {key.replace("fraction", "size"): value}


def load_manifest(manifest, seed=None):
    """Load and split the dataset described by a manifest (path or object)."""
    if not isinstance(manifest, DatasetManifest):
        manifest = DatasetManifest.load(manifest)
    pool = load_csv(manifest.path, manifest.schema())
    return split_pool(pool, seed=manifest.seed if seed is None else seed, **manifest.split_kwargs())
