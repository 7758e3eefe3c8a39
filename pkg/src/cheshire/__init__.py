"""Quantum Cheshire Cat neutron-interferometer simulator.

Spin (x) path states, weak values under pre/postselection, exact detector
rates for the absorber and Larmor-rotation probes, Poisson scans, fringe
fits and first-order weak-value extraction.
"""
from .beamline import (
    Absorber,
    Larmor,
    Path,
    PhaseShifter,
    absorber_operator,
    compose,
    larmor_operator,
    path_projector,
    phase_shifter_operator,
    postselected_state,
    preselected_state,
    spin_path_observable,
)
from .experiment import (
    FitDegenerate,
    FitResult,
    Interferogram,
    Scenario,
    WeakValueEstimate,
    extract_population,
    extract_spin,
    fit_interferogram,
    h_port_rate,
    make_scenario,
    o_port_rate,
    run_cheshire_experiment,
    scan,
)
from .hilbert import BeamOperator, SpinPathState, apply, inner, spin_state, tensor
from .stochastics import Quantity, aggregate, draw_poisson, make_stream, propagate
from .weakvalue import OrthogonalSelection, WeakValue, predicted_table, product_rule_gap, weak_value

__version__ = "0.1.0"
