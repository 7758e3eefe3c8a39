"""Exact linear algebra on the 4-dimensional spin (x) path space.

Basis order is fixed as ``[up-I, down-I, up-II, down-II]`` with spin
quantized along +z. The Kronecker convention is ``kron(spin, path)``
re-indexed so that the path index is the slow one, which is what makes
``tensor(sigma_z, PI_I)`` equal ``diag(+1, -1, 0, 0)``.
"""
from __future__ import annotations

from math import sqrt

import numpy as np

ATOL = 1e-12
DIM = 4

BASIS_LABELS = ("up,I", "down,I", "up,II", "down,II")

ID2 = np.eye(2, dtype=complex)
SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=complex)
PI_I = np.array([[1, 0], [0, 0]], dtype=complex)
PI_II = np.array([[0, 0], [0, 1]], dtype=complex)

_SQRT2_INV = 1 / sqrt(2)
_SPINORS = {
    "+x": np.array([_SQRT2_INV, _SQRT2_INV], dtype=complex),
    "-x": np.array([_SQRT2_INV, -_SQRT2_INV], dtype=complex),
    "+z": np.array([1, 0], dtype=complex),
    "-z": np.array([0, 1], dtype=complex),
}


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=complex, copy=True)
    a.setflags(write=False)
    return a


class SpinPathState:
    """Four complex amplitudes over ``[up-I, down-I, up-II, down-II]``.

    States may be sub-normalized (after an absorber) but never exceed unit
    norm by more than ``ATOL``.
    """

    __slots__ = ("amp",)

    def __init__(self, amp):
        amp = np.asarray(amp, dtype=complex).reshape(-1)
        if amp.shape != (DIM,):
            raise ValueError(f"expected {DIM} amplitudes, got shape {amp.shape}")
        if not np.all(np.isfinite(amp)):
            raise ValueError("state amplitudes must be finite")
        n = float(np.vdot(amp, amp).real)
        if n > 1 + ATOL:
            raise ValueError(f"squared norm {n!r} exceeds 1")
        object.__setattr__(self, "amp", _frozen(amp))

    def __setattr__(self, name, value):
        raise AttributeError("SpinPathState is immutable")

    @classmethod
    def from_product(cls, spinor, path_ket) -> SpinPathState:
        """Product state ``spinor (x) path_ket`` in the fixed basis order."""
        return cls(np.kron(np.asarray(path_ket, dtype=complex), np.asarray(spinor, dtype=complex)))

    @classmethod
    def basis(cls, k: int) -> SpinPathState:
        amp = np.zeros(DIM, dtype=complex)
        amp[k] = 1.0
        return cls(amp)

    @property
    def norm2(self) -> float:
        return float(np.vdot(self.amp, self.amp).real)

    def normalized(self) -> SpinPathState:
        n = sqrt(self.norm2)
        if n == 0:
            raise ValueError("cannot normalize the zero state")
        return SpinPathState(self.amp / n)

    def __repr__(self) -> str:
        return f"SpinPathState({np.array2string(self.amp, precision=6)})"


class BeamOperator:
    """A 4x4 complex matrix acting on :class:`SpinPathState`.

    The ``hermitian`` and ``unitary`` flags are computed from the matrix at
    construction (tolerance ``ATOL``), so they can always be trusted.
    """

    __slots__ = ("m", "hermitian", "unitary", "label")

    def __init__(self, m, label: str = ""):
        m = np.asarray(m, dtype=complex)
        if m.shape != (DIM, DIM):
            raise ValueError(f"expected a {DIM}x{DIM} matrix, got shape {m.shape}")
        if not np.all(np.isfinite(m)):
            raise ValueError("operator entries must be finite")
        object.__setattr__(self, "m", _frozen(m))
        object.__setattr__(self, "hermitian", bool(np.max(np.abs(m - m.conj().T)) <= ATOL))
        object.__setattr__(
            self, "unitary", bool(np.max(np.abs(m.conj().T @ m - np.eye(DIM))) <= ATOL)
        )
        object.__setattr__(self, "label", label)

    def __setattr__(self, name, value):
        raise AttributeError("BeamOperator is immutable")

    @classmethod
    def identity(cls) -> BeamOperator:
        return cls(np.eye(DIM), label="1")

    def dagger(self) -> BeamOperator:
        return BeamOperator(self.m.conj().T, label=f"({self.label})^+" if self.label else "")

    def __matmul__(self, other):
        if isinstance(other, BeamOperator):
            label = f"{self.label}*{other.label}" if self.label and other.label else ""
            return BeamOperator(self.m @ other.m, label=label)
        if isinstance(other, SpinPathState):
            return apply(self, other)
        return NotImplemented

    def __add__(self, other: BeamOperator) -> BeamOperator:
        if not isinstance(other, BeamOperator):
            return NotImplemented
        return BeamOperator(self.m + other.m)

    def __sub__(self, other: BeamOperator) -> BeamOperator:
        if not isinstance(other, BeamOperator):
            return NotImplemented
        return BeamOperator(self.m - other.m)

    def __mul__(self, c) -> BeamOperator:
        return BeamOperator(complex(c) * self.m)

    __rmul__ = __mul__

    def __repr__(self) -> str:
        flags = [f for f, on in (("hermitian", self.hermitian), ("unitary", self.unitary)) if on]
        name = self.label or "BeamOperator"
        return f"<{name} {'/'.join(flags) or 'general'}>"


def tensor(spin_op, path_op, label: str = "") -> BeamOperator:
    """Kronecker product ``spin_op (x) path_op`` in the fixed basis order."""
    spin_op = np.asarray(spin_op, dtype=complex)
    path_op = np.asarray(path_op, dtype=complex)
    if spin_op.shape != (2, 2) or path_op.shape != (2, 2):
        raise ValueError("tensor expects two 2x2 matrices")
    if not (np.all(np.isfinite(spin_op)) and np.all(np.isfinite(path_op))):
        raise ValueError("tensor inputs must be finite")
    # path index is the slow (outer) index of the basis
    return BeamOperator(np.kron(path_op, spin_op), label=label)


def inner(bra: SpinPathState, ket: SpinPathState) -> complex:
    """``<bra|ket>``, conjugate-linear in ``bra``."""
    return complex(np.vdot(bra.amp, ket.amp))


def apply(op: BeamOperator, s: SpinPathState) -> SpinPathState:
    return SpinPathState(op.m @ s.amp)


def expectation(s: SpinPathState, op: BeamOperator) -> complex:
    return inner(s, apply(op, s))


def spin_state(direction: str) -> np.ndarray:
    """Unit spinor along ``"+x"``, ``"-x"``, ``"+z"`` or ``"-z"``."""
    try:
        return _SPINORS[direction].copy()
    except KeyError:
        raise ValueError(f"unknown spin direction {direction!r}") from None


def random_state(rng: np.random.Generator) -> SpinPathState:
    """Haar-random normalized state, mainly for property tests."""
    v = rng.normal(size=DIM) + 1j * rng.normal(size=DIM)
    v /= np.linalg.norm(v)
    # guard against rounding pushing |v|^2 a hair above 1
    return SpinPathState(v * (1 - 1e-15))
