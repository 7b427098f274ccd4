import numpy as np
import pytest

from qdac.data import Dataset

ACCEPTANCE_LINES: list[str] = []


def random_state_vector(rng, dim, real=False):
    v = rng.standard_normal(dim)
    if not real:
        v = v + 1j * rng.standard_normal(dim)
    return v / np.linalg.norm(v)


def random_orthogonal(rng, d):
    q, r = np.linalg.qr(rng.standard_normal((d, d)))
    return q * np.sign(np.diag(r))


def exact_spectrum_matrix(rng, d, n, ks, s=1.0):
    """``U diag(k s) V^T`` with orthogonal U (d x d) and orthonormal V columns (n x d)."""
    u = random_orthogonal(rng, d)
    v = random_orthogonal(rng, n)[:, :d]
    return u @ np.diag(np.asarray(ks, dtype=float) * s) @ v.T


def labeled(features, rng):
    n = features.shape[1]
    y = rng.permutation(np.r_[np.zeros(n // 2, dtype=int), np.ones(n - n // 2, dtype=int)])
    return Dataset(features, y, "source")


def random_density(rng, dim, rank=None):
    rank = rank or dim
    g = rng.standard_normal((dim, rank)) + 1j * rng.standard_normal((dim, rank))
    rho = g @ g.conj().T
    return rho / np.trace(rho).real


def random_spd(rng, dim, kappa_max=10.0):
    """Random SPD matrix with condition number drawn in [1, kappa_max]."""
    q = random_orthogonal(rng, dim)
    kappa = rng.uniform(1.0, kappa_max)
    eig = np.exp(rng.uniform(0, np.log(kappa), dim))
    eig[0], eig[-1] = 1.0, kappa
    return (q * eig) @ q.T


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
