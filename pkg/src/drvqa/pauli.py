"""Pauli-sum observables."""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property, reduce

import numpy as np

from .errors import DomainError

PAULI = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}


@dataclass(frozen=True)
class PauliHamiltonian:
    """A real-weighted sum of Pauli strings.

    Character ``k`` of each string acts on qubit ``k``; qubit 0 is the most
    significant bit of a computational-basis index.
    """

    terms: tuple[tuple[float, str], ...]
    n_qubits: int

    def __post_init__(self):
        terms = tuple((float(c), str(s).upper()) for c, s in self.terms)
        for c, s in terms:
            if len(s) != self.n_qubits:
                raise DomainError(f"Pauli string {s!r} does not have length {self.n_qubits}")
            if set(s) - set("IXYZ"):
                raise DomainError(f"invalid Pauli string {s!r}")
            if not np.isfinite(c):
                raise DomainError("non-finite coefficient")
        object.__setattr__(self, "terms", terms)

    @classmethod
    def from_sparse(cls, n_qubits, terms):
        """Build from ``(coef, {qubit: 'X'|'Y'|'Z'})`` pairs."""
        out = []
        for coef, ops in terms:
            chars = ["I"] * n_qubits
            for q, p in ops.items():
                if not 0 <= q < n_qubits:
                    raise DomainError(f"qubit {q} out of range")
                chars[q] = p
            out.append((coef, "".join(chars)))
        return cls(tuple(out), n_qubits)

    @property
    def is_diagonal(self):
        return all(set(s) <= {"I", "Z"} for _, s in self.terms)

    @cached_property
    def diagonal(self):
        """Diagonal of the matrix; only valid when every string is I/Z."""
        if not self.is_diagonal:
            raise DomainError("Hamiltonian has off-diagonal terms")
        dim = 2**self.n_qubits
        idx = np.arange(dim)
        diag = np.zeros(dim)
        for coef, s in self.terms:
            sign = np.ones(dim)
            for q, p in enumerate(s):
                if p == "Z":
                    bit = (idx >> (self.n_qubits - 1 - q)) & 1
                    sign = sign * (1 - 2 * bit)
            diag += coef * sign
        return diag

    @cached_property
    def matrix(self):
        dim = 2**self.n_qubits
        if self.is_diagonal:
            return np.diag(self.diagonal).astype(complex)
        out = np.zeros((dim, dim), dtype=complex)
        for coef, s in self.terms:
            out += coef * reduce(np.kron, [PAULI[p] for p in s])
        return out

    def __add__(self, other):
        if other.n_qubits != self.n_qubits:
            raise DomainError("qubit count mismatch")
        return PauliHamiltonian(self.terms + other.terms, self.n_qubits)

    def __neg__(self):
        return self.scaled(-1.0)

    def scaled(self, factor):
        return PauliHamiltonian(tuple((factor * c, s) for c, s in self.terms), self.n_qubits)
