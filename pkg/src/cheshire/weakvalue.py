"""Weak values under pre- and postselection.

Weak values are complex in general. The absorber measurement is sensitive to
the real part and the Larmor measurement to the squared magnitude, so
:func:`predicted_table` reports exactly those quantities.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .beamline import path_projector, postselected_state, preselected_state, spin_path_observable
from .hilbert import ID2, SIGMA_Z, BeamOperator, SpinPathState, inner, tensor

EPS_OVERLAP = 1e-10


class OrthogonalSelection(ValueError):
    """Pre- and postselected states are (numerically) orthogonal."""


@dataclass(frozen=True)
class WeakValue:
    value: complex
    observable_label: str = ""
    pre_label: str = ""
    post_label: str = ""

    @property
    def real(self) -> float:
        return self.value.real

    @property
    def imag(self) -> float:
        return self.value.imag

    @property
    def abs2(self) -> float:
        return abs(self.value) ** 2


def weak_value(
    pre: SpinPathState,
    post: SpinPathState,
    obs: BeamOperator,
    *,
    eps_overlap: float = EPS_OVERLAP,
    pre_label: str = "psi_i",
    post_label: str = "psi_f",
) -> WeakValue:
    """<post|obs|pre> / <post|pre>.

    Raises :class:`OrthogonalSelection` when ``|<post|pre>| <= eps_overlap``;
    the weak value is undefined there because postselection never succeeds.
    """
    overlap = inner(post, pre)
    if abs(overlap) <= eps_overlap:
        raise OrthogonalSelection(
            f"|<post|pre>| = {abs(overlap):.3e} is not above eps_overlap={eps_overlap:g}"
        )
    # raw matrix-vector product: obs need not be a contraction, so obs|pre>
    # is not always a valid SpinPathState
    value = complex(np.vdot(post.amp, obs.m @ pre.amp)) / overlap
    return WeakValue(value, obs.label, pre_label, post_label)


def product_rule_gap(
    pre: SpinPathState,
    post: SpinPathState,
    obs_a: BeamOperator,
    obs_b: BeamOperator,
    **kwargs,
) -> complex:
    """<AB>_w - <A>_w <B>_w; nonzero whenever weak values fail to factorize."""
    ab = weak_value(pre, post, obs_a @ obs_b, **kwargs).value
    a = weak_value(pre, post, obs_a, **kwargs).value
    b = weak_value(pre, post, obs_b, **kwargs).value
    return ab - a * b


def cheshire_weak_values(post_chi: float = 0.0) -> dict[str, WeakValue]:
    """The four headline weak values plus <sigma_z>_w for the Cheshire selection."""
    pre = preselected_state()
    post = postselected_state(post_chi)
    observables = {
        "Pi_I": path_projector("I"),
        "Pi_II": path_projector("II"),
        "sz_Pi_I": spin_path_observable("I"),
        "sz_Pi_II": spin_path_observable("II"),
        "sz": tensor(SIGMA_Z, ID2, label="sz"),
    }
    return {
        key: weak_value(pre, post, obs, post_label=f"psi_f(chi={post_chi:g})")
        for key, obs in observables.items()
    }


def predicted_table(post_chi: float = 0.0) -> list[tuple[str, float]]:
    """Theory rows in the form the two probes measure them.

    Path populations are reported as Re<Pi_j>_w, spin locations as
    |<sigma_z Pi_j>_w|^2.
    """
    wv = cheshire_weak_values(post_chi)
    return [
        ("Pi_I", wv["Pi_I"].real),
        ("Pi_II", wv["Pi_II"].real),
        ("|sz_Pi_I|^2", wv["sz_Pi_I"].abs2),
        ("|sz_Pi_II|^2", wv["sz_Pi_II"].abs2),
    ]
