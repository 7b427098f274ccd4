"""Classical whitening-based domain adaptation classifier.

This is the exact reference every quantum pipeline is checked against.

Second moments are *uncentered* and normalized to unit trace,
``X X^T / ||X||_F^2``, which is precisely the reduced density matrix of the
amplitude-encoded data matrix.  Class means are taken over raw columns.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import Dataset

DEFAULT_CUTOFF = 1e-6


@dataclass(frozen=True, eq=False)
class DomainStats:
    """Per-domain statistics.

    For a source domain ``mean0``/``mean1`` are the class means.  For a
    target domain ``mean0`` is the overall mean and ``mean1`` is None.
    """

    mean0: np.ndarray
    mean1: np.ndarray | None
    second_moment: np.ndarray
    frobenius_norm: float

    @property
    def dim(self) -> int:
        return self.second_moment.shape[0]


@dataclass(frozen=True, eq=False)
class Whitener:
    inverse_sqrt: np.ndarray
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    cutoff: float
    effective_rank: int

    def apply(self, x) -> np.ndarray:
        return self.inverse_sqrt @ np.asarray(x, dtype=float)

    @property
    def projector(self) -> np.ndarray:
        """Projector onto the retained eigenspace."""
        q = self.eigenvectors[:, : self.effective_rank]
        return q @ q.T


@dataclass(frozen=True, eq=False)
class DaClassifier:
    weight: np.ndarray
    whitener_source: Whitener
    whitener_target: Whitener
    mean_difference: np.ndarray

    @classmethod
    def fit(cls, source: Dataset, target: Dataset, cutoff: float = DEFAULT_CUTOFF) -> "DaClassifier":
        s = compute_domain_stats(source)
        t = compute_domain_stats(target)
        ws = build_whitener(s, cutoff)
        wt = build_whitener(t, cutoff)
        diff = s.mean1 - s.mean0
        return cls(weight=ws.apply(diff), whitener_source=ws, whitener_target=wt, mean_difference=diff)

    @property
    def dim(self) -> int:
        return self.weight.size


def compute_domain_stats(data: Dataset) -> DomainStats:
    x = data.features
    norm = float(np.linalg.norm(x))
    if norm == 0:
        raise ValueError("zero norm: data matrix is identically zero")
    second = x @ x.T / norm**2
    second = (second + second.T) / 2
    if data.domain_tag == "source":
        y = data.labels
        if np.all(y == y[0]):
            raise ValueError("degenerate labels: source data must contain both classes")
        mean0 = x[:, y == 0].mean(axis=1)
        mean1 = x[:, y == 1].mean(axis=1)
    else:
        mean0 = x.mean(axis=1)
        mean1 = None
    return DomainStats(mean0, mean1, second, norm)


def build_whitener(stats: DomainStats | np.ndarray, cutoff: float = DEFAULT_CUTOFF) -> Whitener:
    """Symmetric inverse square root with small eigenvalues filtered out.

    Eigenvalues at or below ``cutoff * lambda_max`` are dropped from the
    inverse rather than inverted.
    """
    sigma = stats.second_moment if isinstance(stats, DomainStats) else np.asarray(stats, dtype=float)
    if sigma.ndim != 2 or sigma.shape[0] != sigma.shape[1]:
        raise ValueError("second moment must be a square matrix")
    if not np.allclose(sigma, sigma.T, atol=1e-12):
        raise ValueError("second moment must be symmetric")
    lam, q = np.linalg.eigh((sigma + sigma.T) / 2)
    order = np.argsort(lam)[::-1]
    lam, q = lam[order], q[:, order]
    lam_max = lam[0]
    keep = lam > cutoff * lam_max if lam_max > 0 else np.zeros_like(lam, dtype=bool)
    rank = int(keep.sum())
    if rank == 0:
        raise ValueError("rank zero: no eigenvalue survives the cutoff")
    inv = np.zeros_like(lam)
    inv[keep] = lam[keep] ** -0.5
    w = (q * inv) @ q.T
    w = (w + w.T) / 2
    return Whitener(w, lam, q, float(cutoff), rank)


def label_from_score(score: float) -> int:
    # ties go to class 0
    return int(score > 0)


def classical_score(clf: DaClassifier, x) -> float:
    x = np.asarray(x, dtype=float).reshape(-1)
    if x.size != clf.dim:
        raise ValueError(f"dimension mismatch: classifier has D={clf.dim}, sample has {x.size}")
    return float(clf.weight @ clf.whitener_target.apply(x))


def classical_predict(clf: DaClassifier, features) -> tuple[np.ndarray, np.ndarray]:
    """Scores and labels for every column of ``features``."""
    features = np.asarray(features, dtype=float)
    if features.shape[0] != clf.dim:
        raise ValueError(f"dimension mismatch: classifier has D={clf.dim}, data has {features.shape[0]}")
    scores = clf.weight @ (clf.whitener_target.inverse_sqrt @ features)
    return scores, (scores > 0).astype(int)


def source_only_predict(clf: DaClassifier, features) -> tuple[np.ndarray, np.ndarray]:
    """The non-adapted classifier: target data whitened with the *source* statistics."""
    features = np.asarray(features, dtype=float)
    scores = clf.weight @ (clf.whitener_source.inverse_sqrt @ features)
    return scores, (scores > 0).astype(int)


def whitened_direction(whitener: Whitener, x) -> np.ndarray:
    """Unit vector along ``Sigma^{-1/2} x``."""
    v = whitener.apply(x)
    n = np.linalg.norm(v)
    if n == 0:
        raise ValueError("vector lies in the filtered null space")
    return v / n
