"""Variational classifier: state diagonalization plus a variational linear solver.

Both stages train a hardware-efficient ansatz (per layer: Ry then Rz on every
qubit, then a CZ ring) with exact expectation values.  Gradients use the
two-point parameter-shift rule; the linear-solver cost is a ratio of two
expectation values, so its gradient shifts those expectations and applies
the chain rule.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from . import sim
from .classical import DaClassifier, classical_predict, whitened_direction
from .data import Dataset
from .qblas import overlap_score, sample_seeds
from .report import RunReport
from .sim import Circuit, DensityMatrix, StateVector

SHIFT = np.pi / 2


@dataclass(frozen=True, eq=False)
class Ansatz:
    num_qubits: int
    layers: int = 4
    params: np.ndarray | None = None

    def __post_init__(self):
        if self.num_qubits < 1 or self.layers < 1:
            raise ValueError("ansatz needs at least one qubit and one layer")
        if self.params is not None:
            p = np.asarray(self.params, dtype=float).reshape(-1)
            if p.size != self.num_params:
                raise ValueError(f"expected {self.num_params} parameters, got {p.size}")
            object.__setattr__(self, "params", p)

    @property
    def num_params(self) -> int:
        return 2 * self.num_qubits * self.layers

    @property
    def dim(self) -> int:
        return 2**self.num_qubits

    def with_params(self, params) -> "Ansatz":
        return replace(self, params=np.asarray(params, dtype=float))

    def ring(self) -> list[tuple[int, int]]:
        q = self.num_qubits
        if q == 1:
            return []
        if q == 2:
            return [(0, 1)]
        return [(i, (i + 1) % q) for i in range(q)]

    def circuit(self, params=None) -> Circuit:
        p = self.params if params is None else np.asarray(params, dtype=float)
        q = self.num_qubits
        circ = Circuit(q)
        it = iter(p)
        for _ in range(self.layers):
            circ.extend(sim.ry(next(it), i) for i in range(q))
            circ.extend(sim.rz(next(it), i) for i in range(q))
            circ.extend(sim.cz(a, b) for a, b in self.ring())
        return circ

    def unitaries(self, params) -> np.ndarray:
        """Batched ansatz unitaries, shape ``(B, d, d)``, for params of shape ``(B, P)``.

        Same matrices as ``circuit(p).unitary()``, built layer by layer as
        ``CZring @ kron_i(Rz_i Ry_i)`` and vectorized over the batch; this is
        the path the optimizers use.
        """
        p = np.atleast_2d(np.asarray(params, dtype=float))
        b, q, d = p.shape[0], self.num_qubits, self.dim
        signs = np.ones((2,) * q)
        for a, c in self.ring():
            idx = [slice(None)] * q
            idx[a], idx[c] = 1, 1
            signs[tuple(idx)] *= -1
        signs = signs.reshape(1, d, 1)
        u = np.broadcast_to(np.eye(d, dtype=complex), (b, d, d))
        p = p.reshape(b, self.layers, 2, q)
        for layer in range(self.layers):
            alpha, beta = p[:, layer, 0], p[:, layer, 1]
            c, s = np.cos(alpha / 2), np.sin(alpha / 2)
            e = np.exp(-0.5j * beta)
            # Rz(beta) @ Ry(alpha), shape (B, q, 2, 2)
            g = np.empty((b, q, 2, 2), dtype=complex)
            g[..., 0, 0] = e * c
            g[..., 0, 1] = -e * s
            g[..., 1, 0] = e.conj() * s
            g[..., 1, 1] = e.conj() * c
            m = g[:, 0]
            for i in range(1, q):
                k = m.shape[-1]
                m = np.einsum("bij,bkl->bikjl", m, g[:, i]).reshape(b, 2 * k, 2 * k)
            u = signs * (m @ u)
        return u

    def states(self, params) -> np.ndarray:
        """Batched ``U(theta)|0>``, shape ``(B, d)``."""
        return self.unitaries(params)[:, :, 0]


@dataclass(frozen=True, eq=False)
class HamiltonianSpec:
    diagonal: np.ndarray

    def __post_init__(self):
        d = np.asarray(self.diagonal, dtype=float).reshape(-1)
        if np.any(d < 0):
            raise ValueError("Hamiltonian eigenvalues must be non-negative")
        if np.any(np.diff(d) <= 0):
            raise ValueError("Hamiltonian diagonal must be strictly increasing")
        object.__setattr__(self, "diagonal", d)

    @classmethod
    def default(cls, num_qubits: int) -> "HamiltonianSpec":
        d = 2**num_qubits
        return cls(np.arange(d) / (d - 1))


@dataclass(frozen=True)
class OptimizerConfig:
    method: str = "gradient_descent"
    learning_rate: float = 0.1
    max_iters: int = 2000
    restarts: int = 5
    seed: int = 0
    convergence_tol: float = 1e-8
    window: int = 50
    residual_tol: float = 1e-2
    spsa_perturbation: float = 0.1

    def __post_init__(self):
        if self.method not in ("gradient_descent", "spsa"):
            raise ValueError(f"unknown optimizer method {self.method!r}")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.max_iters < 1 or self.restarts < 1:
            raise ValueError("max_iters and restarts must be >= 1")


@dataclass(frozen=True, eq=False)
class VqsdResult:
    optimal_params: np.ndarray
    eigenvalues: np.ndarray
    diagonal: np.ndarray
    unitary: np.ndarray
    cost: float
    lower_bound: float
    cost_trace: np.ndarray
    residual: float
    converged: bool


@dataclass(frozen=True, eq=False)
class VqlsResult:
    optimal_params: np.ndarray
    solution_state: StateVector
    final_cost: float
    fidelity_vs_oracle: float | None
    cost_trace: np.ndarray
    converged: bool


# --------------------------------------------------------------------------
# gradients and optimizers


def parameter_shift_gradient(cost: Callable, params, shift: float = SHIFT, batched: bool = False) -> np.ndarray:
    """``dC/dtheta_k = [C(theta + s e_k) - C(theta - s e_k)] / (2 sin s)``.

    With ``batched=True``, ``cost`` maps a ``(B, P)`` array to ``(B,)`` or
    ``(B, K)`` and all shifted points are evaluated in one call; the result
    then has shape ``(P,)`` or ``(P, K)``.
    """
    p = np.asarray(params, dtype=float).reshape(-1)
    n = p.size
    shifted = np.concatenate([p + shift * np.eye(n), p - shift * np.eye(n)])
    if batched:
        vals = np.asarray(cost(shifted))
    else:
        vals = np.array([cost(row) for row in shifted])
    return (vals[:n] - vals[n:]) / (2 * np.sin(shift))


@dataclass
class _Run:
    params: np.ndarray
    cost: float
    trace: list = field(default_factory=list)
    converged: bool = False


def _gradient_descent(cost, grad, x0, opt: OptimizerConfig) -> _Run:
    # plain descent; a step that raises the cost is rejected and the rate halved
    x = x0.copy()
    c = cost(x)
    trace = [c]
    lr = opt.learning_rate
    converged = False
    for _ in range(opt.max_iters):
        g = grad(x)
        if not np.any(g):
            converged = True
            break
        while True:
            x_new = x - lr * g
            c_new = cost(x_new)
            if c_new <= c or lr < 1e-12:
                break
            lr *= 0.5
        if c_new > c:
            converged = True
            break
        x, c = x_new, c_new
        lr = min(opt.learning_rate, 2 * lr)
        trace.append(c)
        if len(trace) > opt.window and trace[-opt.window - 1] - c < opt.convergence_tol:
            converged = True
            break
        if c < 1e-15:
            converged = True
            break
    return _Run(x, c, trace, converged)


def _spsa(cost, x0, opt: OptimizerConfig, rng) -> _Run:
    x = x0.copy()
    trace = [cost(x)]
    best_x, best_c = x.copy(), trace[0]
    a, c0, big_a = opt.learning_rate, opt.spsa_perturbation, 0.1 * opt.max_iters
    for k in range(opt.max_iters):
        ak = a / (k + 1 + big_a) ** 0.602
        ck = c0 / (k + 1) ** 0.101
        delta = rng.choice([-1.0, 1.0], size=x.size)
        g = (cost(x + ck * delta) - cost(x - ck * delta)) / (2 * ck) * delta
        x = x - ak * g
        cx = cost(x)
        trace.append(cx)
        if cx < best_c:
            best_x, best_c = x.copy(), cx
    window = trace[-opt.window - 1 :]
    return _Run(best_x, best_c, trace, bool(max(window) - min(window) < opt.convergence_tol))


def minimize(cost, grad, num_params: int, opt: OptimizerConfig) -> _Run:
    """Best of ``opt.restarts`` runs from uniform(-pi, pi) starts."""
    best = None
    for child in np.random.SeedSequence(opt.seed).spawn(opt.restarts):
        rng = np.random.default_rng(child)
        x0 = rng.uniform(-np.pi, np.pi, num_params)
        if opt.method == "gradient_descent":
            run = _gradient_descent(cost, grad, x0, opt)
        else:
            run = _spsa(cost, x0, opt, rng)
        if best is None or run.cost < best.cost:
            best = run
    return best


# --------------------------------------------------------------------------
# diagonalization


def _rho_matrix(rho) -> np.ndarray:
    return rho.matrix if isinstance(rho, DensityMatrix) else np.asarray(rho, dtype=complex)


def _vqsd_costs(rho: np.ndarray, ansatz: Ansatz, h: HamiltonianSpec, params) -> np.ndarray:
    u = ansatz.unitaries(params)
    diag = np.einsum("bij,jk,bik->bi", u, rho, u.conj()).real
    return diag @ h.diagonal


def vqsd_cost(rho, ansatz: Ansatz, H: HamiltonianSpec) -> float:
    """``Tr(U rho U^dagger H)`` with ``U`` simulated gate by gate."""
    r = _rho_matrix(rho)
    if r.shape != (ansatz.dim, ansatz.dim) or H.diagonal.size != ansatz.dim:
        raise ValueError("rho, ansatz and Hamiltonian dimensions disagree")
    u = ansatz.circuit().unitary()
    return float(np.real(np.diag(u @ r @ u.conj().T)) @ H.diagonal)


def rearrangement_bound(eigenvalues, H: HamiltonianSpec) -> float:
    """Minimum of ``Tr(rho~ H)`` over unitaries: largest eigenvalue on smallest energy."""
    return float(np.sort(eigenvalues)[::-1] @ np.sort(H.diagonal))


def vqsd_diagonalize(rho, ansatz: Ansatz, H: HamiltonianSpec, opt: OptimizerConfig = OptimizerConfig()) -> VqsdResult:
    r = _rho_matrix(rho)
    if r.shape != (ansatz.dim, ansatz.dim) or H.diagonal.size != ansatz.dim:
        raise ValueError("rho, ansatz and Hamiltonian dimensions disagree")

    def cost(p):
        return float(_vqsd_costs(r, ansatz, H, p)[0])

    def grad(p):
        return parameter_shift_gradient(lambda b: _vqsd_costs(r, ansatz, H, b), p, batched=True)

    run = minimize(cost, grad, ansatz.num_params, opt)
    u = ansatz.unitaries(run.params)[0]
    rotated = u @ r @ u.conj().T
    diag = np.clip(np.real(np.diag(rotated)), 0.0, None)
    diag = diag / diag.sum()
    off = rotated - np.diag(np.diag(rotated))
    residual = float(np.linalg.norm(off))
    lower = rearrangement_bound(np.linalg.eigvalsh(r), H)
    return VqsdResult(
        optimal_params=run.params,
        eigenvalues=np.sort(diag)[::-1],
        diagonal=diag,
        unitary=u,
        cost=run.cost,
        lower_bound=lower,
        cost_trace=np.array(run.trace),
        residual=residual,
        converged=residual <= opt.residual_tol,
    )


def vqsd_gradient(rho, ansatz: Ansatz, H: HamiltonianSpec, params) -> np.ndarray:
    """Parameter-shift gradient of :func:`vqsd_cost` at ``params``."""
    r = _rho_matrix(rho)
    return parameter_shift_gradient(lambda b: _vqsd_costs(r, ansatz, H, b), params, batched=True)


def build_sigma_power(result: VqsdResult, power: float, cutoff: float = 1e-6, filter_positive: bool = False) -> np.ndarray:
    """``U^dagger diag(lambda^power) U`` in the learned eigenbasis.

    Eigenvalues at or below ``cutoff * lambda_max`` map to 0 for negative
    powers (and for positive ones too when ``filter_positive``).
    """
    lam = result.diagonal
    keep = lam > cutoff * lam.max()
    if not np.any(keep):
        raise ValueError("rank zero: no eigenvalue survives the cutoff")
    vals = np.zeros_like(lam)
    if power < 0 or filter_positive:
        vals[keep] = lam[keep] ** power
    else:
        vals = lam**power
    u = result.unitary
    m = u.conj().T @ np.diag(vals) @ u
    return (m + m.conj().T) / 2


def retained_projector(result: VqsdResult, cutoff: float) -> np.ndarray:
    keep = (result.diagonal > cutoff * result.diagonal.max()).astype(float)
    u = result.unitary
    return u.conj().T @ np.diag(keep) @ u


# --------------------------------------------------------------------------
# linear solver


def _columns(target_cols) -> np.ndarray:
    if isinstance(target_cols, StateVector):
        return target_cols.amplitudes[:, None]
    if isinstance(target_cols, (list, tuple)):
        cols = [c.amplitudes if isinstance(c, StateVector) else np.asarray(c, dtype=complex) for c in target_cols]
        x = np.stack(cols, axis=1)
    else:
        x = np.asarray(target_cols, dtype=complex)
        if x.ndim == 1:
            x = x[:, None]
    return x / np.linalg.norm(x, axis=0)


def _vqls_terms(cols: np.ndarray, a: np.ndarray, states: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Numerators ``|<x_j|A|psi>|^2`` (B, n) and denominators ``<psi|A^dag A|psi>`` (B,)."""
    a_psi = states @ a.T
    num = np.abs(a_psi @ cols.conj()) ** 2
    den = np.sum(np.abs(a_psi) ** 2, axis=1)
    return num, den


def vqls_cost(target_cols, sigma_half, candidate) -> float:
    """``1 - mean_j |<x_j|A|x^>| / ||A x^||`` with exact inner products."""
    cols = _columns(target_cols)
    a = np.asarray(sigma_half, dtype=complex)
    psi = candidate.amplitudes if isinstance(candidate, StateVector) else np.asarray(candidate, dtype=complex)
    if a.shape != (cols.shape[0], cols.shape[0]) or psi.size != cols.shape[0]:
        raise ValueError("vector and matrix dimensions disagree")
    a_psi = a @ psi
    den = np.linalg.norm(a_psi)
    if den == 0:
        raise ValueError("zero denominator: candidate lies in the null space of the matrix")
    return float(1 - np.mean(np.abs(cols.conj().T @ a_psi)) / den)


def _vqls_batch_cost(cols, a, ansatz, params) -> np.ndarray:
    num, den = _vqls_terms(cols, a, ansatz.states(params))
    return 1 - np.mean(np.sqrt(num / den[:, None]), axis=1)


def _vqls_gradient(cols, a, ansatz, params) -> np.ndarray:
    """Parameter-shift on the numerator and denominator expectations, then the chain rule."""
    p = np.asarray(params, dtype=float)

    def terms(batch):
        num, den = _vqls_terms(cols, a, ansatz.states(batch))
        return np.concatenate([num, den[:, None]], axis=1)

    jac = parameter_shift_gradient(terms, p, batched=True)  # (P, n+1)
    t0 = terms(p[None, :])[0]
    num, den = t0[:-1], t0[-1]
    ratio = np.sqrt(np.maximum(num, 1e-300) / den)
    # d sqrt(N/D) = (N' D - N D') / (2 D^2 sqrt(N/D))
    d_ratio = (jac[:, :-1] * den - num * jac[:, -1:]) / (2 * den**2 * ratio)
    return -np.mean(d_ratio, axis=1)


def vqls_gradient(target_cols, sigma_half, ansatz: Ansatz, params) -> np.ndarray:
    """Gradient of the linear-solver cost of ``U(params)|0>``."""
    return _vqls_gradient(_columns(target_cols), np.asarray(sigma_half, dtype=complex), ansatz, params)


def _phase_fix(psi: np.ndarray, cols: np.ndarray, a: np.ndarray) -> np.ndarray:
    # make sum_j <x_j|A|psi> real positive so signed overlaps are meaningful
    ov = np.sum(cols.conj().T @ (a @ psi))
    if abs(ov) > 0:
        psi = psi * (np.conj(ov) / abs(ov))
    return psi


def vqls_solve(x, sigma_half, ansatz: Ansatz, opt: OptimizerConfig = OptimizerConfig(), project: np.ndarray | None = None) -> VqlsResult:
    """Find ``|x^>`` with ``A|x^>`` parallel to ``|x>``.

    ``x`` may be a single vector or a ``d x n`` matrix; the latter trains one
    shared state against the averaged cost.  The returned state's global
    phase is fixed so that ``<x|A|x^>`` is real and positive.  ``project``
    optionally restricts the answer to a subspace (e.g. the retained
    eigenspace when ``A`` was filtered).
    """
    cols = _columns(x)
    a = np.asarray(sigma_half, dtype=complex)
    if a.shape != (ansatz.dim, ansatz.dim) or cols.shape[0] != ansatz.dim:
        raise ValueError("vector, matrix and ansatz dimensions disagree")

    def cost(p):
        return float(_vqls_batch_cost(cols, a, ansatz, p)[0])

    def grad(p):
        return _vqls_gradient(cols, a, ansatz, p)

    run = minimize(cost, grad, ansatz.num_params, opt)
    psi = ansatz.states(run.params)[0]
    if project is not None:
        psi = project @ psi
        psi = psi / np.linalg.norm(psi)
    psi = _phase_fix(psi, cols, a)
    state = StateVector.from_unnormalized(psi, ansatz.num_qubits)
    final = vqls_cost(cols, a, state)
    fid = None
    if cols.shape[1] == 1:
        sol, *_ = np.linalg.lstsq(a, cols[:, 0], rcond=1e-10)
        if np.linalg.norm(sol) > 0:
            fid = state.fidelity(StateVector.from_unnormalized(sol, ansatz.num_qubits))
    return VqlsResult(
        optimal_params=run.params,
        solution_state=state,
        final_cost=final,
        fidelity_vs_oracle=fid,
        cost_trace=np.array(run.trace),
        converged=final <= opt.residual_tol,
    )


# --------------------------------------------------------------------------
# end to end


def density_from_data(features, num_qubits: int) -> DensityMatrix:
    """Trace the sample index out of the amplitude-encoded data matrix."""
    x = np.asarray(features, dtype=float)
    d, n = x.shape
    n_index = sim.qubits_for(n)
    grid = np.zeros((2**n_index, 2**num_qubits))
    grid[:n, :d] = x.T
    state = sim.amplitude_encode(grid.reshape(-1), n_index + num_qubits)
    return sim.partial_trace(state, range(n_index, n_index + num_qubits))


def vqdac_classify(
    source: Dataset,
    target: Dataset,
    layers: int = 4,
    H: HamiltonianSpec | None = None,
    opt: OptimizerConfig = OptimizerConfig(),
    readout: str = "hadamard",
    shots: int | None = None,
    cutoff: float = 1e-3,
    shared_solution: bool = False,
) -> tuple[np.ndarray, RunReport]:
    """Label target columns with the variational classifier.

    Steps: reduced density matrices of both domains, variational
    diagonalization of each, ``Sigma^{1/2}`` in the learned eigenbases, one
    linear solve for the weight state and one per target column (or one
    shared solve when ``shared_solution``), then an overlap readout.
    """
    if source.dim != target.dim:
        raise ValueError("source and target dimensions differ")
    q = sim.qubits_for(source.dim)
    H = H or HamiltonianSpec.default(q)
    ansatz = Ansatz(q, layers)
    seeds = sample_seeds(opt.seed, 4 + target.n)
    flags = []

    rho_s = density_from_data(source.features, q)
    rho_t = density_from_data(target.features, q)
    vs = vqsd_diagonalize(rho_s, ansatz, H, replace(opt, seed=seeds[0]))
    vt = vqsd_diagonalize(rho_t, ansatz, H, replace(opt, seed=seeds[1]))
    for name, v in (("source", vs), ("target", vt)):
        if not v.converged:
            flags.append(f"vqsd_{name}_not_converged")
    half_s = build_sigma_power(vs, 0.5, cutoff, filter_positive=True)
    half_t = build_sigma_power(vt, 0.5, cutoff, filter_positive=True)
    proj_s = retained_projector(vs, cutoff)
    proj_t = retained_projector(vt, cutoff)

    clf = DaClassifier.fit(source, target)
    oracle_scores, oracle_labels = classical_predict(clf, target.features)
    d = 2**q

    def pad(v):
        out = np.zeros(d)
        out[: v.size] = v
        return out

    w = vqls_solve(pad(clf.mean_difference), half_s, ansatz, replace(opt, seed=seeds[2]), proj_s)
    if not w.converged:
        flags.append("vqls_weight_not_converged")
    w_oracle = sim.amplitude_encode(whitened_direction(clf.whitener_source, clf.mean_difference), q)
    class_states = None
    if readout == "two_swap":
        y = source.labels
        class_states = [
            vqls_solve(pad(source.features[:, y == c].mean(axis=1)), half_s, ansatz, replace(opt, seed=seeds[3] + c), proj_s).solution_state
            for c in (0, 1)
        ]
    elif readout != "hadamard":
        raise ValueError(f"unknown readout {readout!r}")

    if shared_solution:
        shared = vqls_solve(np.stack([pad(c) for c in target.features.T], axis=1), half_t, ansatz, replace(opt, seed=seeds[3]), proj_t)
        solves = [shared] * target.n
    else:
        solves = [
            vqls_solve(pad(target.features[:, j]), half_t, ansatz, replace(opt, seed=seeds[4 + j]), proj_t)
            for j in range(target.n)
        ]
    unconverged = sum(not s.converged for s in solves)
    if unconverged:
        flags.append(f"vqls_target_not_converged:{unconverged}")

    readout_seeds = sample_seeds(opt.seed + 1, target.n)
    rows, labels = [], np.zeros(target.n, dtype=int)
    for j, sol in enumerate(solves):
        xhat = sol.solution_state
        oracle_state = sim.amplitude_encode(whitened_direction(clf.whitener_target, target.features[:, j]), q)
        if readout == "hadamard":
            score, p0 = overlap_score(w.solution_state, xhat, "hadamard_test", shots, readout_seeds[j])
        else:
            s0, _ = overlap_score(class_states[0], xhat, "swap_test", shots, readout_seeds[j])
            s1, p0 = overlap_score(class_states[1], xhat, "swap_test", shots, readout_seeds[j] + 1)
            score = s1 - s0
        labels[j] = int(score > 0)
        rows.append(
            {
                "index": j,
                "oracle_score": float(oracle_scores[j]),
                "oracle_label": int(oracle_labels[j]),
                "quantum_score": float(score),
                "quantum_label": int(labels[j]),
                "fidelity": oracle_state.fidelity(xhat),
                "success_probability": None,
                "readout_p0": p0,
            }
        )
    aggregates = {
        "agreement_rate": float(np.mean(labels == oracle_labels)),
        "mean_fidelity": float(np.mean([r["fidelity"] for r in rows])),
        "weight_fidelity": w_oracle.fidelity(w.solution_state),
        "vqsd_residuals": {"source": vs.residual, "target": vt.residual},
        "vqsd_eigenvalues": {"source": vs.eigenvalues.tolist(), "target": vt.eigenvalues.tolist()},
        "cost_traces": {"vqsd_source": vs.cost_trace.tolist(), "vqsd_target": vt.cost_trace.tolist()},
        "vqls_final_costs": [s.final_cost for s in solves],
        "vqls_weight_cost": w.final_cost,
        "flags": flags,
        "readout": readout,
    }
    return labels, RunReport(per_sample=rows, aggregates=aggregates)
