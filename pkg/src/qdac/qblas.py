"""Phase-estimation based whitening classifier.

Register layout for the whitening operator, most significant first::

    [index] [clock (c qubits)] [ancilla] [extension bit] [data]

``index`` is optional (it carries the sample index when a whole data matrix
is encoded at once).  The extension bit selects the block of the Hermitian
extension ``|0><1| (x) X + |1><0| (x) X^T``; data vectors enter in block 0.

Singular values are read from the clock register as signed (two's
complement) phases: clock value ``k`` encodes ``phi = k/T`` (``k < T/2``)
or ``k/T - 1`` and ``|sigma| = |phi| * 2*pi / t``.  The ancilla rotation
is ``Ry(2 arcsin(gamma/|sigma|))``, so after projecting the ancilla on
``|1>`` each spectral component is weighted by ``gamma/|sigma|``.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from . import sim
from .classical import DEFAULT_CUTOFF, DaClassifier, classical_predict, whitened_direction
from .data import Dataset
from .report import RunReport
from .sim import Circuit, StateVector

POPULATED = 1e-10


class PostselectionError(RuntimeError):
    pass


@dataclass(frozen=True, eq=False)
class HermitianExtension:
    matrix: np.ndarray
    block_dims: tuple[int, int]
    block_size: int

    @property
    def num_qubits(self) -> int:
        return int(round(np.log2(self.matrix.shape[0])))

    @property
    def data_qubits(self) -> int:
        return self.num_qubits - 1

    def eigenvalues(self) -> np.ndarray:
        return np.linalg.eigvalsh(self.matrix)


@dataclass(frozen=True, eq=False)
class SpectralData:
    singular_values: np.ndarray
    left_vectors: np.ndarray
    right_vectors: np.ndarray
    betas: np.ndarray


@dataclass(frozen=True)
class PhaseConfig:
    """Phase-estimation settings.

    ``evolution_time`` and ``gamma`` may be left as None and are then fixed
    per data matrix by :meth:`resolve`: ``t`` puts the largest singular value
    at phase ``phase_margin`` and ``gamma = gamma_ratio * sigma_min``.
    ``filter_below`` is the smallest |sigma| estimate that gets rotated;
    None means "equal to gamma".
    """

    clock_bits: int = 8
    evolution_time: float | None = None
    gamma: float | None = None
    postselect_tolerance: float = 1e-9
    filter_below: float | None = None
    phase_margin: float = 0.45
    gamma_ratio: float = 0.9
    cutoff: float = DEFAULT_CUTOFF

    def __post_init__(self):
        if self.clock_bits < 1:
            raise ValueError("clock_bits must be >= 1")
        if self.evolution_time is not None and self.evolution_time <= 0:
            raise ValueError("evolution_time must be positive")
        if self.gamma is not None and self.gamma <= 0:
            raise ValueError("gamma must be positive")
        if not 0 < self.phase_margin < 0.5:
            raise ValueError("phase_margin must lie in (0, 1/2)")

    @property
    def clock_size(self) -> int:
        return 2**self.clock_bits

    def resolve(self, singular_values) -> "PhaseConfig":
        sv = np.sort(np.abs(np.asarray(singular_values, dtype=float)))[::-1]
        sv_max = sv[0]
        if sv_max <= 0:
            raise ValueError("zero norm: matrix has no nonzero singular value")
        retained = sv[sv**2 > self.cutoff * sv_max**2]
        t = self.evolution_time
        if t is None:
            t = 2 * np.pi * self.phase_margin / sv_max
        gamma = self.gamma
        if gamma is None:
            gamma = self.gamma_ratio * retained[-1]
        filt = self.filter_below if self.filter_below is not None else gamma
        return replace(self, evolution_time=float(t), gamma=float(gamma), filter_below=float(filt))

    def is_resolved(self) -> bool:
        return None not in (self.evolution_time, self.gamma, self.filter_below)

    def clock_sigmas(self) -> np.ndarray:
        """|sigma| estimate attached to each clock value."""
        T = self.clock_size
        k = np.arange(T)
        signed = np.where(k < T // 2, k, k - T) / T
        return np.abs(signed) * 2 * np.pi / self.evolution_time

    def rotation_angles(self) -> np.ndarray:
        """Ry angle applied to the ancilla for each clock value (0 = untouched)."""
        sig = self.clock_sigmas()
        angles = np.zeros_like(sig)
        active = (sig > 0) & (sig >= self.filter_below)
        angles[active] = 2 * np.arcsin(np.minimum(1.0, self.gamma / sig[active]))
        return angles


@dataclass(frozen=True, eq=False)
class PostselectionResult:
    state: StateVector
    success_probability: float
    clock_return_probability: float = 1.0


# --------------------------------------------------------------------------
# building blocks


def next_pow2(n: int) -> int:
    return 1 << max(0, int(np.ceil(np.log2(max(n, 1)))))


def hermitian_extend(X, min_block: int = 1) -> HermitianExtension:
    """``|0><1| (x) X + |1><0| (x) X^T`` with X zero-padded to a square power-of-two block."""
    X = np.asarray(X, dtype=float)
    if X.ndim != 2:
        raise ValueError("X must be a matrix")
    if not np.any(X):
        raise ValueError("zero norm: cannot extend the zero matrix")
    d, n = X.shape
    p = max(next_pow2(max(d, n)), next_pow2(min_block))
    block = np.zeros((p, p))
    block[:d, :n] = X
    m = np.zeros((2 * p, 2 * p))
    m[:p, p:] = block
    m[p:, :p] = block.T
    return HermitianExtension(m, (d, n), p)


def spectral_data(X) -> SpectralData:
    X = np.asarray(X, dtype=float)
    u, s, vt = np.linalg.svd(X, full_matrices=False)
    return SpectralData(s, u, vt.T, u.T @ X)


def _evolution(ext: HermitianExtension, time: float) -> np.ndarray:
    lam, v = np.linalg.eigh(ext.matrix)
    return (v * np.exp(1j * lam * time)) @ v.conj().T


def _check_phase_wrap(ext: HermitianExtension, cfg: PhaseConfig) -> None:
    sv_max = np.abs(ext.eigenvalues()).max()
    if sv_max * cfg.evolution_time / (2 * np.pi) >= 0.5:
        raise ValueError(
            "phase wrap: sigma_max * t / (2 pi) must stay below 1/2 "
            f"(got {sv_max * cfg.evolution_time / (2 * np.pi):.4f})"
        )


def qpe_circuit(ext: HermitianExtension, cfg: PhaseConfig, n_index: int = 0) -> Circuit:
    c = cfg.clock_bits
    clock = list(range(n_index, n_index + c))
    system = list(range(n_index + c + 1, n_index + c + 1 + ext.num_qubits))
    circ = Circuit(n_index + c + 1 + ext.num_qubits)
    circ.extend(sim.h(q) for q in clock)
    # clock qubit k controls exp(i X~ t)^(2^(c-1-k)), so clock value tau
    # accumulates exp(i X~ t tau) and the inverse QFT reads phi = lambda t / 2pi
    for k, q in enumerate(clock):
        power = 2 ** (c - 1 - k)
        circ.append(sim.controlled_unitary(_evolution(ext, cfg.evolution_time * power), system, [q]))
    circ.append(sim.qft_gate(clock, inverse=True))
    return circ


def _split(state: StateVector, ext: HermitianExtension, cfg: PhaseConfig) -> int:
    n_index = state.num_qubits - cfg.clock_bits - 1 - ext.num_qubits
    if n_index < 0:
        raise ValueError("state is too small for the clock/ancilla/system layout")
    return n_index


def qpe(generator: HermitianExtension, input: StateVector, cfg: PhaseConfig) -> StateVector:
    """Phase estimation of ``exp(i X~ t)`` on ``input``.

    ``input`` covers ``[index][system]``; the result covers
    ``[index][clock][ancilla][system]`` with the ancilla still in |0>.
    """
    if not cfg.is_resolved():
        cfg = cfg.resolve(generator.eigenvalues())
    _check_phase_wrap(generator, cfg)
    n_index = input.num_qubits - generator.num_qubits
    if n_index < 0:
        raise ValueError("input state is smaller than the extension register")
    c = cfg.clock_bits
    amps = input.amplitudes.reshape(2**n_index, 1, 1, -1)
    full = np.zeros((2**n_index, 2**c, 2, 2**generator.num_qubits), dtype=complex)
    full[:, :1, :1, :] = amps
    state = StateVector(full.reshape(-1), input.num_qubits + c + 1)
    return sim.apply(state, qpe_circuit(generator, cfg, n_index))


def conditioned_rotation(state: StateVector, clock_register, cfg: PhaseConfig, ancilla: int | None = None) -> StateVector:
    """Rotate the ancilla by ``2 arcsin(gamma/|sigma|)`` keyed on the clock value."""
    clock = list(clock_register)
    if ancilla is None:
        ancilla = clock[-1] + 1
    if len(clock) != cfg.clock_bits:
        raise ValueError("clock register width does not match clock_bits")
    sig = cfg.clock_sigmas()
    p = sim.marginal_probabilities(state, clock)
    offending = (p > POPULATED) & (sig > 0) & (sig >= cfg.filter_below) & (sig < cfg.gamma)
    if np.any(offending):
        k = int(np.flatnonzero(offending)[0])
        raise ValueError(
            f"gamma exceeds singular value: gamma={cfg.gamma:.6g} > |sigma|={sig[k]:.6g} "
            f"at populated clock value {k}"
        )
    angles = cfg.rotation_angles()
    # one multiplexed rotation: block k is Ry(angle_k) on the ancilla
    T = cfg.clock_size
    m = np.zeros((2 * T, 2 * T), dtype=complex)
    for k, a in enumerate(angles):
        m[2 * k : 2 * k + 2, 2 * k : 2 * k + 2] = sim.ry_matrix(a)
    return sim.apply(state, [sim.controlled_unitary(m, clock + [ancilla])])


def uncompute_and_postselect(state: StateVector, generator: HermitianExtension, cfg: PhaseConfig) -> PostselectionResult:
    """Undo phase estimation, keep the ancilla=1 branch, and return the clock to |0>.

    The returned state covers ``[index][system]``.  ``success_probability``
    is the weight of the ancilla=1 branch; ``clock_return_probability`` is
    the conditional weight of clock=0 inside it (1 when every phase is
    exactly representable).
    """
    if not cfg.is_resolved():
        cfg = cfg.resolve(generator.eigenvalues())
    n_index = _split(state, generator, cfg)
    undone = sim.apply(state, qpe_circuit(generator, cfg, n_index).inverse())
    t = undone.amplitudes.reshape(2**n_index, cfg.clock_size, 2, -1)
    branch = t[:, :, 1, :]
    success = float(np.sum(np.abs(branch) ** 2))
    if success < cfg.postselect_tolerance:
        raise PostselectionError(
            f"postselection starved: success probability {success:.3e} "
            f"below tolerance {cfg.postselect_tolerance:.1e}"
        )
    kept = branch[:, 0, :]
    returned = float(np.sum(np.abs(kept) ** 2))
    if returned <= 0:
        raise PostselectionError("postselection starved: clock never returns to zero")
    out = StateVector.from_unnormalized(kept.reshape(-1), n_index + generator.num_qubits)
    return PostselectionResult(out, success, returned / success)


def _embed(input: StateVector, ext: HermitianExtension) -> tuple[StateVector, int]:
    n_index = input.num_qubits - ext.data_qubits
    if n_index < 0:
        raise ValueError(
            f"input has {input.num_qubits} qubits, data register needs {ext.data_qubits}"
        )
    amps = input.amplitudes.reshape(2**n_index, 1, -1)
    full = np.zeros((2**n_index, 2, amps.shape[-1]), dtype=complex)
    full[:, :1, :] = amps
    return StateVector(full.reshape(-1), input.num_qubits + 1), n_index


def apply_U_M(X, input: StateVector, cfg: PhaseConfig) -> PostselectionResult:
    """Whiten ``input`` with the spectrum of ``X``.

    ``input`` covers ``[index][data]`` where the data register has
    ``log2(block_size)`` qubits; the result has the same layout and is
    proportional to ``sum_m gamma/sigma_m <u_m|x> |u_m>``.
    """
    ext = X if isinstance(X, HermitianExtension) else hermitian_extend(X, min_block=2)
    if not cfg.is_resolved():
        cfg = cfg.resolve(ext.eigenvalues())
    embedded, n_index = _embed(input, ext)
    s = qpe(ext, embedded, cfg)
    clock = range(n_index, n_index + cfg.clock_bits)
    s = conditioned_rotation(s, clock, cfg)
    res = uncompute_and_postselect(s, ext, cfg)
    # the answer lives in extension block 0
    t = res.state.amplitudes.reshape(2**n_index, 2, -1)
    block0 = t[:, 0, :]
    w0 = float(np.sum(np.abs(block0) ** 2))
    out = StateVector.from_unnormalized(block0.reshape(-1), input.num_qubits)
    return PostselectionResult(out, res.success_probability, res.clock_return_probability * w0)


def encode_vector(v, ext: HermitianExtension) -> StateVector:
    return sim.amplitude_encode(v, ext.data_qubits)


def prepare_weight_state(source: Dataset, cfg: PhaseConfig) -> PostselectionResult:
    """Whitened class-mean difference ``Sigma_s^{-1/2}(mu1 - mu0)`` as a state."""
    if source.labels is None:
        raise ValueError("source data must be labeled")
    y = source.labels
    if np.all(y == y[0]):
        raise ValueError("degenerate labels: source data must contain both classes")
    x = source.features
    diff = x[:, y == 1].mean(axis=1) - x[:, y == 0].mean(axis=1)
    if np.linalg.norm(diff) <= 1e-14 * max(1.0, np.abs(x).max()):
        raise ValueError("coincident class means: the weight vector vanishes")
    ext = hermitian_extend(x, min_block=2)
    return apply_U_M(ext, encode_vector(diff, ext), cfg)


# --------------------------------------------------------------------------
# readout


def state_prep_unitary(v) -> np.ndarray:
    """Unitary whose first column is the unit vector ``v``."""
    v = np.asarray(v, dtype=complex).reshape(-1)
    v = v / np.linalg.norm(v)
    d = v.size
    q, r = np.linalg.qr(np.column_stack([v, np.eye(d, dtype=complex)]))
    q = q[:, :d]
    q[:, 0] *= r[0, 0]
    return q


def swap_test_circuit(num_qubits: int) -> Circuit:
    q = num_qubits
    circ = Circuit(2 * q + 1)
    circ.append(sim.h(0))
    circ.extend(sim.swap(1 + i, 1 + q + i, controls=[0]) for i in range(q))
    circ.append(sim.h(0))
    return circ


def hadamard_test_circuit(w: StateVector, x: StateVector) -> Circuit:
    """Leaves ``(|0>|w> + |1>|x>)/sqrt2`` before the final H, so P(0) = (1 + Re<w|x>)/2."""
    q = w.num_qubits
    reg = list(range(1, q + 1))
    circ = Circuit(q + 1)
    circ.append(sim.h(0))
    circ.append(sim.controlled_unitary(state_prep_unitary(x.amplitudes), reg, [0]))
    circ.append(sim.x(0))
    circ.append(sim.controlled_unitary(state_prep_unitary(w.amplitudes), reg, [0]))
    circ.append(sim.x(0))
    circ.append(sim.h(0))
    return circ


def readout_p0(final: StateVector, shots: int | None, seed: int) -> float:
    if shots is None:
        return float(sim.marginal_probabilities(final, [0])[0])
    counts = sim.sample_shots(final, [0], shots, seed)
    return counts.get(0, 0) / shots


def overlap_score(w: StateVector, x: StateVector, mode: str = "hadamard_test", shots: int | None = None, seed: int = 0) -> tuple[float, float]:
    """Overlap estimate and the ancilla P(0) it was derived from.

    swap_test gives ``|<w|x>|`` from ``P(0) = (1 + |<w|x>|^2)/2``;
    hadamard_test gives the signed ``Re<w|x>`` from ``P(0) = (1 + Re<w|x>)/2``.
    Without ``shots`` probabilities are exact.
    """
    if w.num_qubits != x.num_qubits:
        raise ValueError("overlap needs registers of equal width")
    if mode in ("swap_test", "swap"):
        start = sim.basis_state(0, 1).tensor(w).tensor(x)
        final = sim.apply(start, swap_test_circuit(w.num_qubits))
        p0 = readout_p0(final, shots, seed)
        return float(np.sqrt(max(0.0, 2 * p0 - 1))), p0
    if mode in ("hadamard_test", "hadamard"):
        start = sim.basis_state(0, w.num_qubits + 1)
        final = sim.apply(start, hadamard_test_circuit(w, x))
        p0 = readout_p0(final, shots, seed)
        return float(2 * p0 - 1), p0
    raise ValueError(f"unknown overlap mode {mode!r}")


# --------------------------------------------------------------------------
# end to end


def sample_seeds(seed: int, n: int) -> list[int]:
    return [int(s.generate_state(1)[0]) for s in np.random.SeedSequence(seed).spawn(n)]


def qblas_classify(
    source: Dataset,
    target: Dataset,
    cfg: PhaseConfig = PhaseConfig(),
    readout: str = "hadamard",
    shots: int | None = None,
    seed: int = 0,
    source_cfg: PhaseConfig | None = None,
    target_cfg: PhaseConfig | None = None,
) -> tuple[np.ndarray, RunReport]:
    """Label every target column with the phase-estimation classifier.

    ``readout="hadamard"`` thresholds the signed overlap ``Re<w|x^>`` at 0.
    ``readout="two_swap"`` swap-tests ``x^`` against both whitened class means
    and picks the larger overlap; it only sees magnitudes, so it is an
    approximation of the signed rule.
    """
    if source.dim != target.dim:
        raise ValueError("source and target dimensions differ")
    ext_s = hermitian_extend(source.features, min_block=2)
    ext_t = hermitian_extend(target.features, min_block=2)
    cfg_s = (source_cfg or cfg).resolve(ext_s.eigenvalues())
    cfg_t = (target_cfg or cfg).resolve(ext_t.eigenvalues())

    clf = DaClassifier.fit(source, target, cutoff=cfg.cutoff)
    oracle_scores, oracle_labels = classical_predict(clf, target.features)

    weight = prepare_weight_state(source, cfg_s)
    w_oracle = sim.amplitude_encode(whitened_direction(clf.whitener_source, clf.mean_difference), ext_s.data_qubits)
    class_states = None
    if readout == "two_swap":
        y = source.labels
        class_states = [
            apply_U_M(ext_s, encode_vector(source.features[:, y == c].mean(axis=1), ext_s), cfg_s).state
            for c in (0, 1)
        ]
    elif readout != "hadamard":
        raise ValueError(f"unknown readout {readout!r}")
    if ext_s.data_qubits != ext_t.data_qubits:
        weight_state = _resize(weight.state, ext_t.data_qubits)
        if class_states:
            class_states = [_resize(s, ext_t.data_qubits) for s in class_states]
    else:
        weight_state = weight.state

    seeds = sample_seeds(seed, target.n)
    rows, labels = [], np.zeros(target.n, dtype=int)
    for j in range(target.n):
        xj = target.features[:, j]
        res = apply_U_M(ext_t, encode_vector(xj, ext_t), cfg_t)
        oracle_state = sim.amplitude_encode(whitened_direction(clf.whitener_target, xj), ext_t.data_qubits)
        if readout == "hadamard":
            score, p0 = overlap_score(weight_state, res.state, "hadamard_test", shots, seeds[j])
        else:
            s0, p00 = overlap_score(class_states[0], res.state, "swap_test", shots, seeds[j])
            s1, p01 = overlap_score(class_states[1], res.state, "swap_test", shots, seeds[j] + 1)
            score, p0 = s1 - s0, p01
        labels[j] = int(score > 0)
        rows.append(
            {
                "index": j,
                "oracle_score": float(oracle_scores[j]),
                "oracle_label": int(oracle_labels[j]),
                "quantum_score": float(score),
                "quantum_label": int(labels[j]),
                "fidelity": oracle_state.fidelity(res.state),
                "success_probability": res.success_probability,
                "readout_p0": p0,
            }
        )
    sv_s = spectral_data(source.features).singular_values
    sv_t = spectral_data(target.features).singular_values
    aggregates = {
        "agreement_rate": float(np.mean(labels == oracle_labels)),
        "mean_fidelity": float(np.mean([r["fidelity"] for r in rows])),
        "mean_success_probability": float(np.mean([r["success_probability"] for r in rows])),
        "weight_fidelity": w_oracle.fidelity(weight.state),
        "weight_success_probability": weight.success_probability,
        "condition_number_source": _kappa(sv_s, cfg.cutoff),
        "condition_number_target": _kappa(sv_t, cfg.cutoff),
        "phase_source": _cfg_echo(cfg_s),
        "phase_target": _cfg_echo(cfg_t),
        "readout": readout,
    }
    return labels, RunReport(per_sample=rows, aggregates=aggregates)


def _resize(state: StateVector, qubits: int) -> StateVector:
    amps = state.amplitudes
    if amps.size > 2**qubits:
        if np.linalg.norm(amps[2**qubits :]) > 1e-12:
            raise ValueError("cannot shrink a state with support beyond the new register")
        return StateVector.from_unnormalized(amps[: 2**qubits], qubits)
    out = np.zeros(2**qubits, dtype=complex)
    out[: amps.size] = amps
    return StateVector(out, qubits)


def _kappa(sv, cutoff: float) -> float:
    sv = np.asarray(sv)
    kept = sv[sv**2 > cutoff * sv.max() ** 2]
    return float(kept.max() / kept.min())


def _cfg_echo(cfg: PhaseConfig) -> dict:
    return {
        "clock_bits": cfg.clock_bits,
        "evolution_time": cfg.evolution_time,
        "gamma": cfg.gamma,
        "filter_below": cfg.filter_below,
    }
