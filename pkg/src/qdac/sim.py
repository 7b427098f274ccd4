"""Exact statevector simulator.

Bit ordering is big-endian throughout: qubit 0 is the most significant bit
of a basis-state index, so ``|q0 q1 ... q_{n-1}>`` has index
``q0 * 2**(n-1) + ... + q_{n-1}``.  Registers passed as qubit sequences are
read in the same order (first qubit = most significant).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

MAX_QUBITS = 20
NORM_TOL = 1e-10

_H = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)
_X = np.array([[0, 1], [1, 0]], dtype=complex)
_CZ = np.diag([1, 1, 1, -1]).astype(complex)
_CNOT = np.array([[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex)
_SWAP = np.array([[1, 0, 0, 0], [0, 0, 1, 0], [0, 1, 0, 0], [0, 0, 0, 1]], dtype=complex)


def _check_width(num_qubits: int) -> None:
    if num_qubits < 1:
        raise ValueError("a state needs at least one qubit")
    if num_qubits > MAX_QUBITS:
        raise ValueError(
            f"{num_qubits} qubits exceeds the simulator cap of {MAX_QUBITS}"
        )


@dataclass(frozen=True, eq=False)
class StateVector:
    """Normalized pure state over ``num_qubits`` qubits."""

    amplitudes: np.ndarray
    num_qubits: int

    def __post_init__(self):
        _check_width(self.num_qubits)
        amps = np.array(self.amplitudes, dtype=complex).reshape(-1)
        if amps.size != 2**self.num_qubits:
            raise ValueError(
                f"expected {2**self.num_qubits} amplitudes, got {amps.size}"
            )
        norm = np.linalg.norm(amps)
        if abs(norm - 1.0) > NORM_TOL:
            raise ValueError(f"state is not normalized (norm {norm!r})")
        amps.setflags(write=False)
        object.__setattr__(self, "amplitudes", amps)

    @classmethod
    def from_unnormalized(cls, amplitudes, num_qubits: int | None = None) -> "StateVector":
        amps = np.asarray(amplitudes, dtype=complex).reshape(-1)
        norm = np.linalg.norm(amps)
        if norm == 0:
            raise ValueError("zero vector cannot be normalized")
        if num_qubits is None:
            num_qubits = int(round(np.log2(amps.size)))
        return cls(amps / norm, num_qubits)

    @property
    def dim(self) -> int:
        return self.amplitudes.size

    def probabilities(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2

    def inner(self, other: "StateVector") -> complex:
        """<self|other>."""
        if other.num_qubits != self.num_qubits:
            raise ValueError(f"register widths differ: {self.num_qubits} vs {other.num_qubits}")
        return complex(np.vdot(self.amplitudes, other.amplitudes))

    def fidelity(self, other: "StateVector") -> float:
        return abs(self.inner(other)) ** 2

    def tensor(self, other: "StateVector") -> "StateVector":
        return StateVector(
            np.kron(self.amplitudes, other.amplitudes),
            self.num_qubits + other.num_qubits,
        )

    def __repr__(self):
        return f"StateVector(num_qubits={self.num_qubits})"


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    matrix: np.ndarray

    def __post_init__(self):
        m = np.array(self.matrix, dtype=complex)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ValueError("density matrix must be square")
        if not np.allclose(m, m.conj().T, atol=1e-10):
            raise ValueError("density matrix must be Hermitian")
        if abs(np.trace(m).real - 1.0) > 1e-10:
            raise ValueError("density matrix must have unit trace")
        if np.linalg.eigvalsh(m).min() < -1e-10:
            raise ValueError("density matrix must be positive semidefinite")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    @property
    def num_qubits(self) -> int:
        return int(round(np.log2(self.matrix.shape[0])))


def basis_state(index: int, num_qubits: int) -> StateVector:
    amps = np.zeros(2**num_qubits, dtype=complex)
    amps[index] = 1.0
    return StateVector(amps, num_qubits)


def qubits_for(length: int) -> int:
    """Smallest register width (at least 1) holding ``length`` amplitudes."""
    return max(1, int(np.ceil(np.log2(max(length, 1)))))


def amplitude_encode(v, qubits: int | None = None) -> StateVector:
    """Pad ``v`` with zeros to ``2**qubits`` entries and normalize."""
    v = np.asarray(v, dtype=complex).reshape(-1)
    if qubits is None:
        qubits = qubits_for(v.size)
    if v.size > 2**qubits:
        raise ValueError(f"vector of length {v.size} does not fit in {qubits} qubits")
    if not np.any(v):
        raise ValueError("cannot encode the zero vector")
    padded = np.zeros(2**qubits, dtype=complex)
    padded[: v.size] = v
    return StateVector.from_unnormalized(padded, qubits)


# --------------------------------------------------------------------------
# gates and circuits


def dft_matrix(num_qubits: int, inverse: bool = False) -> np.ndarray:
    n = 2**num_qubits
    k = np.arange(n)
    sign = -1.0 if inverse else 1.0
    return np.exp(sign * 2j * np.pi * np.outer(k, k) / n) / np.sqrt(n)


def ry_matrix(theta: float) -> np.ndarray:
    c, s = np.cos(theta / 2), np.sin(theta / 2)
    return np.array([[c, -s], [s, c]], dtype=complex)


def rz_matrix(theta: float) -> np.ndarray:
    return np.diag([np.exp(-0.5j * theta), np.exp(0.5j * theta)])


def phase_matrix(theta: float) -> np.ndarray:
    return np.diag([1.0, np.exp(1j * theta)])


_ARITY = {"H": 1, "X": 1, "RY": 1, "RZ": 1, "PHASE": 1, "CZ": 2, "CNOT": 2, "SWAP": 2}


@dataclass(frozen=True, eq=False)
class Gate:
    """One circuit operation.

    ``kind`` is one of H, X, RY, RZ, PHASE, CZ, CNOT, SWAP, QFT, IQFT or CU.
    CU carries an explicit ``matrix`` over ``targets``; with no controls it is
    a plain multi-qubit unitary.  Any kind may take extra ``controls``, which
    condition the operation on every control qubit being 1.
    """

    kind: str
    targets: tuple[int, ...]
    controls: tuple[int, ...] = ()
    param: float | None = None
    matrix: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "targets", tuple(int(t) for t in self.targets))
        object.__setattr__(self, "controls", tuple(int(c) for c in self.controls))
        if set(self.targets) & set(self.controls):
            raise ValueError("gate targets and controls must be disjoint")
        if len(set(self.targets)) != len(self.targets):
            raise ValueError("repeated target qubit")
        arity = _ARITY.get(self.kind)
        if arity is not None and len(self.targets) != arity:
            raise ValueError(f"{self.kind} acts on {arity} qubit(s)")
        if self.kind in ("RY", "RZ", "PHASE") and self.param is None:
            raise ValueError(f"{self.kind} needs an angle")
        if self.kind == "CU":
            m = np.asarray(self.matrix, dtype=complex)
            d = 2 ** len(self.targets)
            if m.shape != (d, d):
                raise ValueError(f"CU matrix must be {d}x{d}")
            if not np.allclose(m.conj().T @ m, np.eye(d), atol=1e-10):
                raise ValueError("CU matrix is not unitary")
            object.__setattr__(self, "matrix", m)
        elif self.kind not in _ARITY and self.kind not in ("QFT", "IQFT"):
            raise ValueError(f"unknown gate kind {self.kind!r}")

    @property
    def wires(self) -> tuple[int, ...]:
        return self.controls + self.targets

    def target_matrix(self) -> np.ndarray:
        """Unitary acting on ``targets`` (controls excluded)."""
        k = self.kind
        if k == "H":
            return _H
        if k == "X":
            return _X
        if k == "RY":
            return ry_matrix(self.param)
        if k == "RZ":
            return rz_matrix(self.param)
        if k == "PHASE":
            return phase_matrix(self.param)
        if k == "CZ":
            return _CZ
        if k == "CNOT":
            return _CNOT
        if k == "SWAP":
            return _SWAP
        if k == "CU":
            return self.matrix
        return Circuit(len(self.targets), self.decompose(range(len(self.targets)))).unitary()

    def decompose(self, register: Sequence[int] | None = None) -> list["Gate"]:
        """Elementary-gate expansion of QFT/IQFT (other kinds return themselves)."""
        if self.kind not in ("QFT", "IQFT"):
            return [self]
        reg = list(self.targets if register is None else register)
        gates = _qft_gates(reg)
        if self.kind == "IQFT":
            gates = [g.dagger() for g in reversed(gates)]
        if self.controls:
            gates = [
                Gate(g.kind, g.targets, self.controls + g.controls, g.param, g.matrix)
                for g in gates
            ]
        return gates

    def dagger(self) -> "Gate":
        if self.kind in ("RY", "RZ", "PHASE"):
            return Gate(self.kind, self.targets, self.controls, -self.param)
        if self.kind == "QFT":
            return Gate("IQFT", self.targets, self.controls)
        if self.kind == "IQFT":
            return Gate("QFT", self.targets, self.controls)
        if self.kind == "CU":
            return Gate("CU", self.targets, self.controls, matrix=self.matrix.conj().T)
        return self


def _qft_gates(reg: list[int]) -> list[Gate]:
    # textbook H + controlled-phase ladder, then reverse the register
    gates = []
    n = len(reg)
    for i in range(n):
        gates.append(Gate("H", (reg[i],)))
        for j in range(i + 1, n):
            gates.append(Gate("PHASE", (reg[i],), (reg[j],), 2 * np.pi / 2 ** (j - i + 1)))
    for i in range(n // 2):
        gates.append(Gate("SWAP", (reg[i], reg[n - 1 - i])))
    return gates


def h(q):
    return Gate("H", (q,))


def x(q):
    return Gate("X", (q,))


def ry(theta, q, controls=()):
    return Gate("RY", (q,), tuple(controls), float(theta))


def rz(theta, q, controls=()):
    return Gate("RZ", (q,), tuple(controls), float(theta))


def phase(theta, q, controls=()):
    return Gate("PHASE", (q,), tuple(controls), float(theta))


def cz(a, b):
    return Gate("CZ", (a, b))


def cnot(control, target):
    return Gate("CNOT", (control, target))


def swap(a, b, controls=()):
    return Gate("SWAP", (a, b), tuple(controls))


def qft_gate(register: Iterable[int], inverse: bool = False) -> Gate:
    return Gate("IQFT" if inverse else "QFT", tuple(register))


def controlled_unitary(matrix, targets: Iterable[int], controls: Iterable[int] = ()) -> Gate:
    return Gate("CU", tuple(targets), tuple(controls), matrix=np.asarray(matrix))


@dataclass
class Circuit:
    num_qubits: int
    gates: list[Gate] = field(default_factory=list)

    def __post_init__(self):
        _check_width(self.num_qubits)
        for g in self.gates:
            self._check(g)

    def _check(self, gate: Gate) -> None:
        bad = [w for w in gate.wires if not 0 <= w < self.num_qubits]
        if bad:
            raise ValueError(f"wire(s) {bad} out of range for {self.num_qubits} qubits")

    def append(self, *gates: Gate) -> "Circuit":
        for g in gates:
            self._check(g)
            self.gates.append(g)
        return self

    def extend(self, gates: Iterable[Gate]) -> "Circuit":
        return self.append(*gates)

    def inverse(self) -> "Circuit":
        return Circuit(self.num_qubits, [g.dagger() for g in reversed(self.gates)])

    def unitary(self) -> np.ndarray:
        """Dense matrix of the whole circuit, column k = circuit applied to |k>."""
        d = 2**self.num_qubits
        cols = np.eye(d, dtype=complex).reshape((d,) + (2,) * self.num_qubits)
        for g in self.gates:
            for e in g.decompose():
                cols = _apply_gate_tensor(cols, e, self.num_qubits, batch=1)
        return cols.reshape(d, d).T


# --------------------------------------------------------------------------
# application


def _apply_to_axes(t: np.ndarray, matrix: np.ndarray, axes: list[int]) -> np.ndarray:
    k = len(axes)
    front = list(range(k))
    moved = np.moveaxis(t, axes, front)
    shape = moved.shape
    out = (matrix @ moved.reshape(2**k, -1)).reshape(shape)
    return np.moveaxis(out, front, axes)


def _apply_gate_tensor(t: np.ndarray, gate: Gate, n: int, batch: int = 0) -> np.ndarray:
    """Apply ``gate`` to a tensor of shape ``(B,)*batch + (2,)*n``."""
    matrix = gate.target_matrix()
    if not gate.controls:
        return _apply_to_axes(t, matrix, [batch + q for q in gate.targets])
    t = t.copy()
    idx = [slice(None)] * (batch + n)
    for c in gate.controls:
        idx[batch + c] = 1
    idx = tuple(idx)
    remaining = [q for q in range(n) if q not in gate.controls]
    axes = [batch + remaining.index(q) for q in gate.targets]
    t[idx] = _apply_to_axes(t[idx], matrix, axes)
    return t


def apply(state: StateVector, circuit: Circuit | Iterable[Gate]) -> StateVector:
    """Run ``circuit`` on ``state`` and return the new state."""
    if not isinstance(circuit, Circuit):
        circuit = Circuit(state.num_qubits, list(circuit))
    if circuit.num_qubits != state.num_qubits:
        raise ValueError(
            f"circuit has {circuit.num_qubits} qubits, state has {state.num_qubits}"
        )
    n = state.num_qubits
    t = state.amplitudes.reshape((2,) * n)
    for g in circuit.gates:
        for e in g.decompose():
            t = _apply_gate_tensor(t, e, n)
    amps = t.reshape(-1)
    # renormalize away float drift accumulated over long circuits
    return StateVector(amps / np.linalg.norm(amps), n)


def qft(state: StateVector, register: Iterable[int], inverse: bool = False) -> StateVector:
    return apply(state, [qft_gate(register, inverse)])


# --------------------------------------------------------------------------
# readout


def _register(register, n: int) -> list[int]:
    reg = list(register)
    if not reg:
        raise ValueError("register must be nonempty")
    if any(not 0 <= q < n for q in reg) or len(set(reg)) != len(reg):
        raise ValueError(f"invalid register {reg} for {n} qubits")
    return reg


def partial_trace(state: StateVector, keep: Iterable[int]) -> DensityMatrix:
    """Reduced density matrix on ``keep`` (in the order given)."""
    n = state.num_qubits
    keep = _register(keep, n)
    rest = [q for q in range(n) if q not in keep]
    m = state.amplitudes.reshape((2,) * n).transpose(keep + rest).reshape(2 ** len(keep), -1)
    if not rest:
        return DensityMatrix(np.outer(m[:, 0], m[:, 0].conj()))
    rho = m @ m.conj().T
    return DensityMatrix((rho + rho.conj().T) / 2)


def marginal_probabilities(state: StateVector, register: Iterable[int]) -> np.ndarray:
    n = state.num_qubits
    reg = _register(register, n)
    rest = [q for q in range(n) if q not in reg]
    p = state.probabilities().reshape((2,) * n).transpose(reg + rest)
    return p.reshape(2 ** len(reg), -1).sum(axis=1)


def expectation(state: StateVector, observable) -> float:
    o = np.asarray(observable, dtype=complex)
    if o.shape != (state.dim, state.dim):
        raise ValueError(f"observable shape {o.shape} does not match state dimension {state.dim}")
    if not np.allclose(o, o.conj().T, atol=1e-10):
        raise ValueError("observable must be Hermitian")
    return float(np.vdot(state.amplitudes, o @ state.amplitudes).real)


def sample_shots(state: StateVector, register: Iterable[int], shots: int, seed: int) -> dict[int, int]:
    """Histogram of ``shots`` Born-rule samples of ``register``.

    Keys are register values (big-endian over the register), zero counts omitted.
    """
    if shots < 1:
        raise ValueError("shots must be >= 1")
    p = marginal_probabilities(state, register)
    p = np.clip(p, 0.0, None)
    counts = np.random.default_rng(seed).multinomial(shots, p / p.sum())
    return {int(k): int(c) for k, c in enumerate(counts) if c}
