"""Datasets, the synthetic shifted-Gaussian generator, and CSV I/O.

CSV layout: header ``f0,...,f{D-1},label``, one sample per row, label empty
for target rows.  UTF-8, ``\\n`` line endings.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

SOURCE = "source"
TARGET = "target"


@dataclass(frozen=True, eq=False)
class Dataset:
    """Feature matrix with samples as columns (``D x n``)."""

    features: np.ndarray
    labels: np.ndarray | None
    domain_tag: str

    def __post_init__(self):
        x = np.array(self.features, dtype=float)
        if x.ndim != 2:
            raise ValueError("features must be a D x n matrix")
        d, n = x.shape
        if d < 1 or n < 2:
            raise ValueError(f"need D >= 1 and n >= 2, got D={d}, n={n}")
        if not np.all(np.isfinite(x)):
            raise ValueError("features contain non-finite entries")
        if self.domain_tag not in (SOURCE, TARGET):
            raise ValueError(f"domain_tag must be 'source' or 'target', got {self.domain_tag!r}")
        y = self.labels
        if self.domain_tag == SOURCE:
            if y is None:
                raise ValueError("source data must be labeled")
            y = np.array(y, dtype=int).reshape(-1)
            if y.size != n:
                raise ValueError(f"{y.size} labels for {n} samples")
            if not np.all((y == 0) | (y == 1)):
                raise ValueError("labels must be 0 or 1")
            y.setflags(write=False)
        elif y is not None:
            raise ValueError("target data must be unlabeled")
        x.setflags(write=False)
        object.__setattr__(self, "features", x)
        object.__setattr__(self, "labels", y)

    @property
    def dim(self) -> int:
        return self.features.shape[0]

    @property
    def n(self) -> int:
        return self.features.shape[1]


def rotation(dim: int, angle: float) -> np.ndarray:
    """Rotation by ``angle`` in the (e1, e2) plane."""
    r = np.eye(dim)
    c, s = np.cos(angle), np.sin(angle)
    r[:2, :2] = [[c, -s], [s, c]]
    return r


def _axis_vector(values, dim: int, fill: float, name: str) -> np.ndarray:
    v = np.full(dim, fill, dtype=float)
    values = np.atleast_1d(np.asarray(values, dtype=float))
    if values.size == 1:
        v[:] = values[0]
    else:
        if values.size > dim:
            raise ValueError(f"{name} has {values.size} entries for dim {dim}")
        v[: values.size] = values
    return v


# Defaults give a source whose within-class spread is largest across the
# class axis, and a target that squeezes the class axis and stretches the
# other one.  Under this shift the source-whitened classifier degrades while
# the target-whitened one does not.
DEFAULT_NOISE_STD = (0.7, 2.0)
DEFAULT_SHIFT_SCALE = (0.5, 2.0)


def generate_synthetic_domains(
    dim: int,
    n_source: int,
    n_target: int,
    class_gap: float,
    shift_angle: float,
    shift_scale=DEFAULT_SHIFT_SCALE,
    seed: int = 0,
    noise_std=DEFAULT_NOISE_STD,
    class_balance: float = 0.5,
) -> tuple[Dataset, Dataset, np.ndarray]:
    """Two-class Gaussian source plus a rotated and rescaled target.

    Class ``c`` is drawn from ``N(+-class_gap/2 * e1, diag(noise_std**2))``.
    Target samples come from the same class-conditionals and are then mapped
    through ``rotation(shift_angle) @ diag(shift_scale)``.  Axes beyond the
    given ``shift_scale``/``noise_std`` entries default to 1.

    Returns ``(source, target, target_truth)``; the truth labels are for
    evaluation only.
    """
    if dim < 2:
        raise ValueError("dim must be >= 2")
    if n_source < 2 or n_target < 2:
        raise ValueError("n_source and n_target must be >= 2")
    if class_gap < 0:
        raise ValueError("class_gap must be non-negative")
    if not 0 < class_balance < 1:
        raise ValueError("class_balance must lie in (0, 1)")
    scale = _axis_vector(shift_scale, dim, 1.0, "shift_scale")
    std = _axis_vector(noise_std, dim, 1.0, "noise_std")
    rng = np.random.default_rng(seed)

    def draw(n):
        n1 = int(round(class_balance * n))
        n1 = min(max(n1, 1), n - 1)
        y = rng.permutation(np.r_[np.zeros(n - n1, dtype=int), np.ones(n1, dtype=int)])
        centers = np.zeros((dim, n))
        centers[0] = np.where(y == 1, class_gap / 2, -class_gap / 2)
        return centers + std[:, None] * rng.standard_normal((dim, n)), y

    xs, ys = draw(n_source)
    xt, yt = draw(n_target)
    xt = rotation(dim, shift_angle) @ (scale[:, None] * xt)
    return Dataset(xs, ys, SOURCE), Dataset(xt, None, TARGET), yt


# --------------------------------------------------------------------------
# CSV


def write_csv(path, data: Dataset) -> None:
    path = Path(path)
    with path.open("w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([f"f{i}" for i in range(data.dim)] + ["label"])
        for j in range(data.n):
            label = "" if data.labels is None else int(data.labels[j])
            w.writerow([repr(float(v)) for v in data.features[:, j]] + [label])


def read_csv(path, domain_tag: str | None = None) -> Dataset:
    """Load a dataset; the domain is inferred from the label column when not given."""
    path = Path(path)
    with path.open(encoding="utf-8", newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ValueError(f"{path}: empty file")
    header = rows[0]
    if not header or header[-1] != "label" or header[:-1] != [f"f{i}" for i in range(len(header) - 1)]:
        raise ValueError(f"{path}: header must be f0,...,f{{D-1}},label")
    d = len(header) - 1
    feats, labels = [], []
    for lineno, row in enumerate(rows[1:], start=2):
        if len(row) != d + 1:
            raise ValueError(f"{path}:{lineno}: expected {d + 1} fields, got {len(row)}")
        try:
            feats.append([float(v) for v in row[:d]])
        except ValueError as exc:
            raise ValueError(f"{path}:{lineno}: {exc}") from None
        labels.append(row[d].strip())
    present = [lab != "" for lab in labels]
    if domain_tag is None:
        if all(present):
            domain_tag = SOURCE
        elif not any(present):
            domain_tag = TARGET
        else:
            raise ValueError(f"{path}: label column is partially filled")
    if domain_tag == SOURCE:
        try:
            y = np.array([int(lab) for lab in labels])
        except ValueError:
            raise ValueError(f"{path}: source rows need integer labels") from None
    else:
        if any(present):
            raise ValueError(f"{path}: target rows must have an empty label column")
        y = None
    x = np.array(feats, dtype=float).T.reshape(d, len(feats))
    return Dataset(x, y, domain_tag)


def write_labels(path, labels) -> None:
    with Path(path).open("w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["index", "label"])
        for i, lab in enumerate(labels):
            w.writerow([i, int(lab)])


def read_labels(path) -> np.ndarray:
    with Path(path).open(encoding="utf-8", newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or rows[0] != ["index", "label"]:
        raise ValueError(f"{path}: header must be index,label")
    try:
        return np.array([int(r[1]) for r in rows[1:]], dtype=int)
    except (IndexError, ValueError):
        raise ValueError(f"{path}: malformed label row") from None
