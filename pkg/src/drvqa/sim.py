"""Exact density-matrix simulation with per-gate amplitude/phase damping.

States are stored as dense ``2**n x 2**n`` matrices. Qubit 0 is the most
significant bit of a basis index, so ``|10>`` means qubit 0 is excited.
Gates and channels are applied in place by small compiled kernels; the
public functions copy first so every value stays immutable.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Sequence

import numba
import numpy as np

from .errors import ConsistencyError, DomainError, ResourceError
from .pauli import PauliHamiltonian

MAX_QUBITS = 10


class GateKind(str, enum.Enum):
    H = "H"
    RX = "RX"
    RY = "RY"
    RZ = "RZ"
    CNOT = "CNOT"
    CZ = "CZ"
    RZZ = "RZZ"


_ARITY = {
    GateKind.H: 1,
    GateKind.RX: 1,
    GateKind.RY: 1,
    GateKind.RZ: 1,
    GateKind.CNOT: 2,
    GateKind.CZ: 2,
    GateKind.RZZ: 2,
}
_ROTATIONS = {GateKind.RX, GateKind.RY, GateKind.RZ, GateKind.RZZ}


@dataclass(frozen=True)
class Gate:
    kind: GateKind
    targets: tuple[int, ...]
    angle: float | None = None

    def __post_init__(self):
        kind = GateKind(self.kind)
        object.__setattr__(self, "kind", kind)
        targets = tuple(int(t) for t in self.targets)
        object.__setattr__(self, "targets", targets)
        if len(targets) != _ARITY[kind]:
            raise DomainError(f"{kind.value} acts on {_ARITY[kind]} qubit(s), got {targets}")
        if len(set(targets)) != len(targets) or min(targets) < 0:
            raise DomainError(f"invalid targets {targets}")
        if kind in _ROTATIONS:
            if self.angle is None or not math.isfinite(self.angle):
                raise DomainError(f"{kind.value} needs a finite angle")
            object.__setattr__(self, "angle", float(self.angle))
        elif self.angle is not None:
            raise DomainError(f"{kind.value} takes no angle")

    def unitary(self):
        """Matrix on the target qubits, first target most significant."""
        k, a = self.kind, self.angle
        if k is GateKind.H:
            return np.array([[1, 1], [1, -1]], dtype=complex) / math.sqrt(2)
        if k is GateKind.RX:
            c, s = math.cos(a / 2), math.sin(a / 2)
            return np.array([[c, -1j * s], [-1j * s, c]])
        if k is GateKind.RY:
            c, s = math.cos(a / 2), math.sin(a / 2)
            return np.array([[c, -s], [s, c]], dtype=complex)
        if k is GateKind.RZ:
            return np.diag([np.exp(-0.5j * a), np.exp(0.5j * a)])
        if k is GateKind.CNOT:
            return np.array(
                [[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex
            )
        if k is GateKind.CZ:
            return np.diag([1, 1, 1, -1]).astype(complex)
        # RZZ(a) = exp(-i a/2 Z⊗Z)
        m, p = np.exp(-0.5j * a), np.exp(0.5j * a)
        return np.diag([m, p, p, m])


@dataclass(frozen=True)
class Circuit:
    n_qubits: int
    gates: tuple[Gate, ...] = field(default_factory=tuple)

    def __post_init__(self):
        if self.n_qubits < 1:
            raise DomainError("circuit needs at least one qubit")
        gates = tuple(self.gates)
        object.__setattr__(self, "gates", gates)
        for g in gates:
            if max(g.targets) >= self.n_qubits:
                raise DomainError(f"gate {g} references a qubit outside 0..{self.n_qubits - 1}")


@dataclass(frozen=True)
class KrausChannel:
    operators: tuple[np.ndarray, ...]

    def __post_init__(self):
        ops = tuple(np.asarray(e, dtype=complex) for e in self.operators)
        if not ops:
            raise DomainError("channel needs at least one Kraus operator")
        dim = ops[0].shape[0]
        for e in ops:
            if e.shape != (dim, dim):
                raise DomainError("Kraus operators must share one square shape")
            e.setflags(write=False)
        object.__setattr__(self, "operators", ops)

    @property
    def dim(self):
        return self.operators[0].shape[0]

    def completeness_error(self):
        total = sum(e.conj().T @ e for e in self.operators)
        return float(np.max(np.abs(total - np.eye(self.dim))))

    def superoperator(self):
        """``S[r, c, r', c'] = sum_k E_k[r, r'] conj(E_k[c, c'])``."""
        d = self.dim
        s = sum(np.einsum("ab,cd->acbd", e, e.conj()) for e in self.operators)
        return s.reshape(d, d, d, d)


@dataclass(frozen=True)
class DensityMatrix:
    n_qubits: int
    data: np.ndarray

    def __post_init__(self):
        data = np.array(self.data, dtype=complex)
        dim = 2**self.n_qubits
        if data.shape != (dim, dim):
            raise DomainError(f"expected a {dim}x{dim} matrix, got {data.shape}")
        data.setflags(write=False)
        object.__setattr__(self, "data", data)

    @classmethod
    def zero_state(cls, n_qubits):
        data = np.zeros((2**n_qubits, 2**n_qubits), dtype=complex)
        data[0, 0] = 1.0
        return cls(n_qubits, data)

    @classmethod
    def from_statevector(cls, psi):
        psi = np.asarray(psi, dtype=complex)
        n = int(round(math.log2(psi.size)))
        return cls(n, np.outer(psi, psi.conj()))

    def trace(self):
        return complex(np.trace(self.data))

    def min_eigenvalue(self):
        herm = 0.5 * (self.data + self.data.conj().T)
        return float(np.linalg.eigvalsh(herm)[0])

    def check(self, trace_tol=1e-10, herm_tol=1e-10, eig_tol=1e-9):
        """Raise ConsistencyError unless the physical-state invariants hold."""
        if abs(self.trace() - 1) > trace_tol:
            raise ConsistencyError(f"trace {self.trace()} deviates from 1")
        if np.max(np.abs(self.data - self.data.conj().T)) > herm_tol:
            raise ConsistencyError("density matrix is not Hermitian")
        if self.min_eigenvalue() < -eig_tol:
            raise ConsistencyError(f"negative eigenvalue {self.min_eigenvalue()}")
        return self


def damping_channel(p_ad, p_pd):
    """Combined amplitude + phase damping channel {E0, E1, E2}."""
    for name, p in (("p_ad", p_ad), ("p_pd", p_pd)):
        if not 0.0 <= p <= 1.0:
            raise DomainError(f"{name}={p} outside [0, 1]")
    a = math.sqrt(1 - p_ad)
    e0 = np.array([[1, 0], [0, a * math.sqrt(1 - p_pd)]], dtype=complex)
    e1 = np.array([[0, math.sqrt(p_ad)], [0, 0]], dtype=complex)
    e2 = np.array([[0, 0], [0, a * math.sqrt(p_pd)]], dtype=complex)
    return KrausChannel((e0, e1, e2))


def _apply_tensor(t, op, axes):
    """Contract ``op`` (shape ``(2,)*2k``, outputs first) into tensor axes."""
    k = len(axes)
    out = np.tensordot(op, t, axes=(list(range(k, 2 * k)), list(axes)))
    return np.moveaxis(out, list(range(k)), list(axes))


def _check_qubit(n, q):
    if not 0 <= q < n:
        raise DomainError(f"qubit {q} outside 0..{n - 1}")


def _bits(n, q):
    return (np.arange(2**n) >> (n - 1 - q)) & 1


# In-place kernels. ``s`` is a 4x4 superoperator indexed [2r + c, 2R + C].
@numba.njit(cache=True)
def _superop_kernel(m, n, q, s):
    dim = m.shape[0]
    bit = 1 << (n - 1 - q)
    for i in range(dim):
        if i & bit:
            continue
        i1 = i | bit
        for j in range(dim):
            if j & bit:
                continue
            j1 = j | bit
            x0, x1, x2, x3 = m[i, j], m[i, j1], m[i1, j], m[i1, j1]
            m[i, j] = s[0, 0] * x0 + s[0, 1] * x1 + s[0, 2] * x2 + s[0, 3] * x3
            m[i, j1] = s[1, 0] * x0 + s[1, 1] * x1 + s[1, 2] * x2 + s[1, 3] * x3
            m[i1, j] = s[2, 0] * x0 + s[2, 1] * x1 + s[2, 2] * x2 + s[2, 3] * x3
            m[i1, j1] = s[3, 0] * x0 + s[3, 1] * x1 + s[3, 2] * x2 + s[3, 3] * x3


@numba.njit(cache=True)
def _damping_kernel(m, n, q, p_ad, coherence, decay):
    dim = m.shape[0]
    bit = 1 << (n - 1 - q)
    for i in range(dim):
        if i & bit:
            continue
        i1 = i | bit
        for j in range(dim):
            if j & bit:
                continue
            j1 = j | bit
            x3 = m[i1, j1]
            m[i, j] += p_ad * x3
            m[i, j1] *= coherence
            m[i1, j] *= coherence
            m[i1, j1] = decay * x3


@numba.njit(cache=True)
def _diagonal_kernel(m, d):
    dim = m.shape[0]
    for i in range(dim):
        di = d[i]
        for j in range(dim):
            m[i, j] *= di * np.conj(d[j])


def _unitary_superop(u):
    return np.einsum("ab,cd->acbd", u, u.conj()).reshape(4, 4)


def _diagonal_phases(gate, n):
    k, a = gate.kind, gate.angle
    if k is GateKind.RZ:
        bit = _bits(n, gate.targets[0])
        return np.where(bit, np.exp(0.5j * a), np.exp(-0.5j * a))
    bu, bv = _bits(n, gate.targets[0]), _bits(n, gate.targets[1])
    if k is GateKind.CZ:
        return np.where(bu & bv, -1.0, 1.0).astype(complex)
    return np.where(bu ^ bv, np.exp(0.5j * a), np.exp(-0.5j * a))


def _gate_step(m, n, gate, after=None):
    """Apply ``gate`` to ``m`` in place (may return a new array).

    ``after`` optionally fuses a 4x4 single-qubit superoperator applied after
    a one-qubit gate.
    """
    k = gate.kind
    if k in (GateKind.RZ, GateKind.CZ, GateKind.RZZ):
        _diagonal_kernel(m, _diagonal_phases(gate, n))
        if after is not None:
            _superop_kernel(m, n, gate.targets[0], after)
        return m
    if k is GateKind.CNOT:
        c, t = gate.targets
        perm = np.arange(2**n) ^ (_bits(n, c) << (n - 1 - t))
        return np.ascontiguousarray(m[perm][:, perm])
    s = _unitary_superop(gate.unitary())
    if after is not None:
        s = after @ s
    _superop_kernel(m, n, gate.targets[0], s)
    return m


def apply_gate(rho: DensityMatrix, gate: Gate) -> DensityMatrix:
    n = rho.n_qubits
    for q in gate.targets:
        _check_qubit(n, q)
    return DensityMatrix(n, _gate_step(rho.data.copy(), n, gate))


def apply_channel(rho: DensityMatrix, channel: KrausChannel, qubit: int) -> DensityMatrix:
    if channel.dim != 2:
        raise DomainError(f"expected a single-qubit channel, got dimension {channel.dim}")
    n = rho.n_qubits
    _check_qubit(n, qubit)
    m = rho.data.copy()
    _superop_kernel(m, n, qubit, channel.superoperator().reshape(4, 4))
    return DensityMatrix(n, m)


def run_noisy_circuit(circuit: Circuit, noise_level: float, max_qubits: int = MAX_QUBITS) -> DensityMatrix:
    """Evolve |0..0><0..0| through ``circuit``.

    Every gate is followed by ``damping_channel(p, p)`` on each qubit it
    touches. Idle qubits are not damped.
    """
    n = circuit.n_qubits
    if n > max_qubits:
        raise ResourceError(f"{n} qubits exceeds the simulator cap of {max_qubits}")
    p = noise_level
    damp = damping_channel(p, p).superoperator().reshape(4, 4)
    coherence = decay = 1.0 - p  # sqrt(1-p_ad) sqrt(1-p_pd) and 1-p_ad at p_ad = p_pd = p
    dim = 2**n
    m = np.zeros((dim, dim), dtype=complex)
    m[0, 0] = 1.0
    for gate in circuit.gates:
        if p > 0.0 and len(gate.targets) == 1:
            m = _gate_step(m, n, gate, after=damp)
            continue
        m = _gate_step(m, n, gate)
        if p > 0.0:
            for q in gate.targets:
                _damping_kernel(m, n, q, p, coherence, decay)
    return DensityMatrix(n, m)


def expectation(rho: DensityMatrix, observable: PauliHamiltonian | np.ndarray) -> float:
    """Tr[rho H] as a real number."""
    if isinstance(observable, PauliHamiltonian):
        if observable.n_qubits != rho.n_qubits:
            raise DomainError("observable and state qubit counts differ")
        if observable.is_diagonal:
            val = complex(np.dot(np.diagonal(rho.data), observable.diagonal))
        else:
            val = complex(np.sum(rho.data * observable.matrix.T))
    else:
        mat = np.asarray(observable)
        if mat.shape != rho.data.shape:
            raise DomainError("observable and state dimensions differ")
        val = complex(np.sum(rho.data * mat.T))
    if abs(val.imag) > 1e-6:
        raise ConsistencyError(f"expectation has imaginary part {val.imag:.3e}")
    return val.real


def statevector(circuit: Circuit) -> np.ndarray:
    """Noiseless pure-state evolution, used for fast noiseless objectives."""
    n = circuit.n_qubits
    psi = np.zeros((2,) * n, dtype=complex)
    psi[(0,) * n] = 1.0
    for gate in circuit.gates:
        k = len(gate.targets)
        op = gate.unitary().reshape((2,) * 2 * k)
        psi = _apply_tensor(psi, op, gate.targets)
    return psi.reshape(-1)


def pure_expectation(psi: np.ndarray, observable: PauliHamiltonian) -> float:
    if observable.is_diagonal:
        return float(np.dot(np.abs(psi) ** 2, observable.diagonal))
    return float(np.real(np.vdot(psi, observable.matrix @ psi)))


def embed(u: np.ndarray, targets: Sequence[int], n: int) -> np.ndarray:
    """Full ``2**n`` matrix of ``u`` acting on ``targets``."""
    k = len(targets)
    eye = np.eye(2**n, dtype=complex).reshape((2,) * 2 * n)
    return _apply_tensor(eye, u.reshape((2,) * 2 * k), list(targets)).reshape(2**n, 2**n)
