"""Pre/postselected states and interferometer elements as 4x4 operators.

Beamsplitters are not explicit elements. The preselected state is the state
just after the first splitter, and recombination is done by projecting on
the exit-port path states (see :mod:`cheshire.experiment`).
"""
from __future__ import annotations

import enum
from dataclasses import dataclass
from math import isfinite, sqrt
from typing import Iterable, Union

import numpy as np

from .hilbert import (
    ID2,
    PI_I,
    PI_II,
    SIGMA_Z,
    BeamOperator,
    SpinPathState,
    spin_state,
    tensor,
)


class Path(enum.Enum):
    I = "I"
    II = "II"

    @property
    def projector(self) -> np.ndarray:
        """2x2 path projector."""
        return PI_I if self is Path.I else PI_II

    @property
    def other(self) -> Path:
        return Path.II if self is Path.I else Path.I


def _as_path(path) -> Path:
    return path if isinstance(path, Path) else Path(str(path))


def _check_finite(name: str, x: float) -> float:
    x = float(x)
    if not isfinite(x):
        raise ValueError(f"{name} must be finite, got {x!r}")
    return x


def _check_transmissivity(T: float) -> float:
    T = float(T)
    if not (0.0 < T <= 1.0):
        raise ValueError(f"transmissivity must lie in (0, 1], got {T!r}")
    return T


@dataclass(frozen=True)
class PhaseShifter:
    chi: float

    def __post_init__(self):
        object.__setattr__(self, "chi", _check_finite("chi", self.chi))


@dataclass(frozen=True)
class Absorber:
    T: float
    path: Path

    def __post_init__(self):
        object.__setattr__(self, "T", _check_transmissivity(self.T))
        object.__setattr__(self, "path", _as_path(self.path))


@dataclass(frozen=True)
class Larmor:
    alpha: float
    path: Path

    def __post_init__(self):
        object.__setattr__(self, "alpha", _check_finite("alpha", self.alpha))
        object.__setattr__(self, "path", _as_path(self.path))


ElementSpec = Union[PhaseShifter, Absorber, Larmor]


def preselected_state() -> SpinPathState:
    """(|+x>|I> + |-x>|II>)/sqrt(2) = (0.5, 0.5, 0.5, -0.5)."""
    plus = SpinPathState.from_product(spin_state("+x"), [1, 0]).amp
    minus = SpinPathState.from_product(spin_state("-x"), [0, 1]).amp
    return SpinPathState((plus + minus) / sqrt(2))


def postselected_state(chi: float = 0.0) -> SpinPathState:
    """|-x> (x) (|I> + exp(-i chi)|II>)/sqrt(2)."""
    chi = _check_finite("chi", chi)
    path = np.array([1, np.exp(-1j * chi)]) / sqrt(2)
    return SpinPathState.from_product(spin_state("-x"), path)


def path_projector(path) -> BeamOperator:
    path = _as_path(path)
    return tensor(ID2, path.projector, label=f"Pi_{path.value}")


def spin_path_observable(path) -> BeamOperator:
    """sigma_z Pi_j: the spin component along z, restricted to one path."""
    path = _as_path(path)
    return tensor(SIGMA_Z, path.projector, label=f"sz*Pi_{path.value}")


def absorber_operator(T: float, path) -> BeamOperator:
    """Multiply both spin amplitudes on ``path`` by sqrt(T).

    The transmission amplitude is real (purely absorptive potential), so
    ``sqrt(T) = 1 - M`` with the amplitude absorption coefficient ``M``.
    """
    T = _check_transmissivity(T)
    path = _as_path(path)
    other = path.other.projector
    return tensor(ID2, sqrt(T) * path.projector + other, label=f"ABS_{path.value}(T={T:g})")


def larmor_operator(alpha: float, path) -> BeamOperator:
    """exp(i alpha sigma_z Pi_j / 2): rotation about z by alpha on one path only."""
    alpha = _check_finite("alpha", alpha)
    path = _as_path(path)
    rot = np.diag([np.exp(0.5j * alpha), np.exp(-0.5j * alpha)])
    return BeamOperator(
        np.kron(path.projector, rot) + np.kron(path.other.projector, ID2),
        label=f"MAG_{path.value}(alpha={alpha:g})",
    )


def phase_shifter_operator(chi: float) -> BeamOperator:
    """Multiply both spin amplitudes on path II by exp(+i chi).

    With this sign, evolving through the shifter and projecting on
    ``postselected_state(0)`` gives the same amplitude as projecting the
    unshifted state on ``postselected_state(chi)``.
    """
    chi = _check_finite("chi", chi)
    return tensor(ID2, np.diag([1.0, np.exp(1j * chi)]), label=f"PS(chi={chi:g})")


def element_operator(spec: ElementSpec) -> BeamOperator:
    if isinstance(spec, PhaseShifter):
        return phase_shifter_operator(spec.chi)
    if isinstance(spec, Absorber):
        return absorber_operator(spec.T, spec.path)
    if isinstance(spec, Larmor):
        return larmor_operator(spec.alpha, spec.path)
    raise TypeError(f"not a beamline element: {spec!r}")


def compose(elements: Iterable[ElementSpec]) -> BeamOperator:
    """Whole-beamline operator; the first element in the list acts first."""
    m = np.eye(4, dtype=complex)
    for spec in elements:
        m = element_operator(spec).m @ m
    return BeamOperator(m)
