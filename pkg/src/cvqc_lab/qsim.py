"""Minimal dense statevector engine with named registers.

States live over an ordered list of named registers; the first register
occupies the most significant bits of the flat amplitude index. Everything
is immutable: operations return new states. Sub-normalized states are
first-class citizens because the partition machinery manipulates
unnormalized branch components throughout.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import config


class CapExceeded(Exception):
    """Total qubit count would exceed the configured dense-simulation cap."""


class DimensionMismatch(Exception):
    """Operator dimension does not match the targeted subsystem."""


class UnknownRegister(Exception):
    """A named register is not present in the layout."""


class MissingRegister(Exception):
    """A register required by an operation is absent."""


class NotAProjector(Exception):
    """Operator failed the projector well-formedness check."""


class NotUnitary(Exception):
    """Operator failed the unitarity check."""


class ZeroState(Exception):
    """Measurement attempted on a state with (numerically) zero norm."""


@dataclass(frozen=True)
class RegisterLayout:
    """Ordered named registers; first register = most significant qubits."""

    registers: tuple[tuple[str, int], ...]
    cap: int = config.QUBIT_CAP

    def __post_init__(self):
        object.__setattr__(self, "registers", tuple((str(n), int(w)) for n, w in self.registers))
        names = [n for n, _ in self.registers]
        if len(set(names)) != len(names):
            raise ValueError(f"duplicate register names in {names}")
        if any(w < 0 for _, w in self.registers):
            raise ValueError("negative register width")
        if self.total_qubits > self.cap:
            raise CapExceeded(f"{self.total_qubits} qubits exceeds cap {self.cap}")

    @property
    def total_qubits(self) -> int:
        return sum(w for _, w in self.registers)

    @property
    def dim(self) -> int:
        return 1 << self.total_qubits

    def width(self, name: str) -> int:
        for n, w in self.registers:
            if n == name:
                return w
        raise UnknownRegister(name)

    def has(self, name: str) -> bool:
        return any(n == name for n, _ in self.registers)

    def qubit_positions(self, name: str) -> list[int]:
        """Global qubit indices of a register (MSB-first)."""
        off = 0
        for n, w in self.registers:
            if n == name:
                return list(range(off, off + w))
            off += w
        raise UnknownRegister(name)

    def positions_of(self, names) -> list[int]:
        pos: list[int] = []
        for n in names:
            pos.extend(self.qubit_positions(n))
        return pos


@dataclass(frozen=True)
class StateVector:
    """Complex amplitudes over a register layout; possibly sub-normalized."""

    layout: RegisterLayout
    amps: np.ndarray

    def __post_init__(self):
        amps = np.ascontiguousarray(self.amps, dtype=np.complex128)
        if amps.shape != (self.layout.dim,):
            raise DimensionMismatch(
                f"amps length {amps.shape} vs layout dim {self.layout.dim}")
        if not np.all(np.isfinite(amps.view(np.float64))):
            raise ValueError("non-finite amplitude")
        object.__setattr__(self, "amps", amps)

    @property
    def norm2(self) -> float:
        return float(np.vdot(self.amps, self.amps).real)

    def to_snapshot(self) -> dict:
        """JSON-ready dump: layout plus amplitudes as [re, im] pairs."""
        return {
            "layout": [[n, w] for n, w in self.layout.registers],
            "amps": [[float(a.real), float(a.imag)] for a in self.amps],
        }


@dataclass(frozen=True)
class Operator:
    """Dense matrix on a power-of-2 dimension with a well-formedness tag."""

    dim: int
    mat: np.ndarray
    kind: str  # unitary | projector | hermitian | general

    def __post_init__(self):
        mat = np.asarray(self.mat, dtype=np.complex128)
        if mat.shape != (self.dim, self.dim):
            raise DimensionMismatch(f"matrix shape {mat.shape} vs dim {self.dim}")
        if self.dim < 1:
            raise DimensionMismatch(f"dim {self.dim}")
        if self.kind == "unitary":
            res = np.max(np.abs(mat.conj().T @ mat - np.eye(self.dim)))
            if res > config.ATOL:
                raise NotUnitary(f"U^dag U - I residual {res:.3e}")
        elif self.kind == "projector":
            res_idem = np.max(np.abs(mat @ mat - mat))
            res_herm = np.max(np.abs(mat - mat.conj().T))
            if res_idem > config.ATOL or res_herm > config.ATOL:
                raise NotAProjector(
                    f"P^2-P residual {res_idem:.3e}, P-P^dag residual {res_herm:.3e}")
        elif self.kind == "hermitian":
            if np.max(np.abs(mat - mat.conj().T)) > config.ATOL:
                raise ValueError("not hermitian")
        elif self.kind != "general":
            raise ValueError(f"unknown operator kind {self.kind!r}")
        object.__setattr__(self, "mat", mat)

    @classmethod
    def unitary(cls, mat) -> "Operator":
        mat = np.asarray(mat, dtype=np.complex128)
        return cls(mat.shape[0], mat, "unitary")

    @classmethod
    def projector(cls, mat) -> "Operator":
        mat = np.asarray(mat, dtype=np.complex128)
        return cls(mat.shape[0], mat, "projector")

    @classmethod
    def general(cls, mat) -> "Operator":
        mat = np.asarray(mat, dtype=np.complex128)
        return cls(mat.shape[0], mat, "general")


def zeros(layout: RegisterLayout) -> StateVector:
    amps = np.zeros(layout.dim, dtype=np.complex128)
    amps[0] = 1.0
    return StateVector(layout, amps)


def basis_state(layout: RegisterLayout, bits: str) -> StateVector:
    """Computational basis state from an MSB-first bitstring."""
    if len(bits) != layout.total_qubits:
        raise DimensionMismatch(f"{len(bits)} bits for {layout.total_qubits} qubits")
    amps = np.zeros(layout.dim, dtype=np.complex128)
    amps[int(bits, 2) if bits else 0] = 1.0
    return StateVector(layout, amps)


def from_amplitudes(layout: RegisterLayout, amps) -> StateVector:
    return StateVector(layout, np.asarray(amps, dtype=np.complex128))


def tensor(a: StateVector, b: StateVector) -> StateVector:
    """Kronecker product; a's registers become the most significant."""
    combined = a.layout.registers + b.layout.registers
    cap = max(a.layout.cap, b.layout.cap)
    total = a.layout.total_qubits + b.layout.total_qubits
    if total > cap:
        raise CapExceeded(f"{total} qubits exceeds cap {cap}")
    layout = RegisterLayout(combined, cap=cap)
    return StateVector(layout, np.kron(a.amps, b.amps))


def _permuted_apply(amps: np.ndarray, n: int, mat: np.ndarray, positions: list[int]) -> np.ndarray:
    k = len(positions)
    psi = amps.reshape((2,) * n) if n else amps.reshape(())
    psi = np.moveaxis(psi, positions, range(k))
    rest = psi.shape[k:]
    psi = psi.reshape(1 << k, -1)
    psi = mat @ psi
    psi = psi.reshape((2,) * k + rest)
    psi = np.moveaxis(psi, range(k), positions)
    return np.ascontiguousarray(psi).reshape(-1)


def apply(op: Operator, state: StateVector, targets) -> StateVector:
    """Apply op on the named target registers, identity elsewhere.

    The operator's qubit order matches the listed register order.
    """
    positions = state.layout.positions_of(targets)
    if op.dim != 1 << len(positions):
        raise DimensionMismatch(
            f"operator dim {op.dim} vs target dim {1 << len(positions)}")
    out = _permuted_apply(state.amps, state.layout.total_qubits, op.mat, positions)
    return StateVector(state.layout, out)


def project(p: Operator, state: StateVector, targets) -> StateVector:
    """Apply a projector without renormalizing; output may be sub-normalized."""
    if p.kind != "projector":
        raise NotAProjector(f"kind {p.kind!r}")
    return apply(p, state, targets)


def measure(state: StateVector, register: str, rng: np.random.Generator):
    """Projective computational-basis measurement of one register.

    Returns (outcome bitstring, renormalized post state, conditional
    probability of the outcome). Born probabilities are taken relative to
    the state's squared norm, so sub-normalized inputs behave like their
    normalized versions.
    """
    total = state.norm2
    if total <= config.ZERO_STATE_TOL:
        raise ZeroState(f"norm^2 = {total:.3e}")
    w = state.layout.width(register)
    positions = state.layout.qubit_positions(register)
    n = state.layout.total_qubits
    psi = state.amps.reshape((2,) * n)
    psi = np.moveaxis(psi, positions, range(w))
    blocks = psi.reshape(1 << w, -1)
    masses = np.einsum("ij,ij->i", blocks.conj(), blocks).real
    probs = np.clip(masses / total, 0.0, None)
    probs = probs / probs.sum()
    outcome = int(rng.choice(1 << w, p=probs))
    post_blocks = np.zeros_like(blocks)
    post_blocks[outcome] = blocks[outcome] / np.sqrt(masses[outcome])
    post = np.moveaxis(post_blocks.reshape((2,) * w + psi.shape[w:]), range(w), positions)
    bits = format(outcome, f"0{w}b") if w else ""
    return bits, StateVector(state.layout, np.ascontiguousarray(post).reshape(-1)), float(probs[outcome])
