import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cheshire.hilbert import (
    ID2,
    PI_I,
    PI_II,
    SIGMA_X,
    SIGMA_Z,
    BeamOperator,
    SpinPathState,
    apply,
    inner,
    random_state,
    spin_state,
    tensor,
)

from .conftest import PSI_I, psi_f


def test_tensor_identity():
    op = tensor(ID2, ID2)
    assert np.array_equal(op.m, np.eye(4))
    assert op.unitary and op.hermitian


def test_tensor_sigma_z_path_I_is_diag():
    # hand expansion: sz on up/down, nonzero only on the path-I block
    assert np.array_equal(tensor(SIGMA_Z, PI_I).m, np.diag([1, -1, 0, 0]))


def test_path_projector_completeness():
    total = tensor(ID2, PI_I) + tensor(ID2, PI_II)
    assert np.array_equal(total.m, np.eye(4))


@pytest.mark.parametrize("spin", [ID2, SIGMA_Z])
@pytest.mark.parametrize("path", [PI_I, PI_II])
def test_observables_hermitian(spin, path):
    op = tensor(spin, path)
    assert op.hermitian
    assert np.max(np.abs(op.m - op.m.conj().T)) <= 1e-12


def test_tensor_rejects_non_finite():
    with pytest.raises(ValueError):
        tensor(np.full((2, 2), np.nan), ID2)


def test_inner_examples():
    pre, post = SpinPathState(PSI_I), SpinPathState(psi_f(0))
    assert inner(post, pre) == pytest.approx(0.5, abs=1e-15)
    assert inner(pre, pre) == pytest.approx(1.0, abs=1e-15)
    assert inner(SpinPathState.basis(0), SpinPathState.basis(1)) == 0


def test_inner_conjugate_symmetry_random_pairs(rng):
    for _ in range(1000):
        a, b = random_state(rng), random_state(rng)
        assert abs(inner(a, b) - inner(b, a).conjugate()) <= 1e-12


def test_inner_conjugate_linear_in_bra():
    a = SpinPathState([0.5j, 0, 0, 0])
    b = SpinPathState([0.5, 0, 0, 0])
    assert inner(a, b) == pytest.approx(-0.25j)


def test_apply_examples():
    pre = SpinPathState(PSI_I)
    assert np.array_equal(apply(BeamOperator.identity(), pre).amp, pre.amp)
    out = apply(tensor(SIGMA_Z, PI_I), pre)
    assert np.allclose(out.amp, [0.5, -0.5, 0, 0], atol=1e-15)


@settings(max_examples=200, deadline=None)
@given(
    st.lists(st.floats(-np.pi, np.pi), min_size=3, max_size=3),
    st.integers(0, 2**32 - 1),
)
def test_apply_unitary_preserves_norm(angles, seed):
    a, b, c = angles
    rng = np.random.default_rng(seed)
    s = random_state(rng)
    rz = np.diag([np.exp(1j * a), np.exp(-1j * a)])
    rx = np.cos(b) * ID2 - 1j * np.sin(b) * SIGMA_X
    path_u = np.array([[np.cos(c), -np.sin(c)], [np.sin(c), np.cos(c)]])
    u = tensor(rz @ rx, path_u)
    assert u.unitary
    assert abs(apply(u, s).norm2 - s.norm2) <= 1e-12


def test_spin_states():
    assert np.allclose(spin_state("+x"), [1 / np.sqrt(2), 1 / np.sqrt(2)])
    assert abs(np.vdot(spin_state("+x"), spin_state("-x"))) <= 1e-12
    assert np.allclose(SIGMA_Z @ spin_state("+x"), spin_state("-x"))
    for d in ("+x", "-x", "+z", "-z"):
        assert np.linalg.norm(spin_state(d)) == pytest.approx(1.0, abs=1e-15)
    with pytest.raises(ValueError):
        spin_state("+y")


def test_state_invariants():
    with pytest.raises(ValueError):
        SpinPathState([1, 1, 0, 0])
    with pytest.raises(ValueError):
        SpinPathState([np.nan, 0, 0, 0])
    with pytest.raises(ValueError):
        SpinPathState([1, 0, 0])
    s = SpinPathState([0.5, 0, 0, 0])  # sub-normalized is fine
    assert s.norm2 == 0.25


def test_values_are_immutable():
    s = SpinPathState(PSI_I)
    with pytest.raises(ValueError):
        s.amp[0] = 1
    with pytest.raises(AttributeError):
        s.amp = np.zeros(4)
    op = BeamOperator.identity()
    with pytest.raises(ValueError):
        op.m[0, 0] = 2


def test_flags_computed_not_trusted():
    m = np.zeros((4, 4))
    m[0, 1] = 1
    op = BeamOperator(m)
    assert not op.hermitian and not op.unitary
