import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from chaostunnel.core import (TAU, PhaseSpacePoint, SystemParams, equations_of_motion, h0,
                              hamiltonian, wrap_angle)

finite = st.floats(-50, 50, allow_nan=False)
gam = st.floats(0, 2, allow_nan=False)


def test_free_particle_energy():
    assert hamiltonian(SystemParams.symmetric(0.0), 1.0, 0.0, 0.0) == 0.5


def test_potential_minimum_value():
    assert hamiltonian(SystemParams.symmetric(0.72), 0.0, 0.0, 0.0) == pytest.approx(-0.72,
                                                                                    abs=1e-15)


@given(p=finite, q=finite, g=gam)
def test_quarter_period_cancels_drive(p, q, g):
    assert hamiltonian(SystemParams.symmetric(g), p, q, math.pi / 2) == pytest.approx(
        0.5 * p * p, abs=1e-12 * (1 + p * p))


def test_equations_of_motion_examples():
    assert equations_of_motion(SystemParams.symmetric(0.0), 2.0, 1.0, 0.0) == (0.0, 2.0)
    dp, dq = equations_of_motion(SystemParams.symmetric(0.3), 0.7, 0.0, 0.0)
    assert dp == pytest.approx(0.0, abs=1e-16) and dq == 0.7
    dp, dq = equations_of_motion(SystemParams.symmetric(0.72), 0.4, math.pi / 2, 0.0)
    assert dp == pytest.approx(-0.72) and dq == 0.4


def test_h0_examples():
    p = SystemParams.symmetric(0.72)
    assert h0(p, 1.0, math.pi / 2) == pytest.approx(0.0, abs=1e-16)
    assert h0(p, 1.0, 0.0) == pytest.approx(-0.36)
    assert h0(SystemParams.symmetric(0.1), 1.0, math.pi) == pytest.approx(0.05)
    assert h0(p, -1.0, 0.0, island="lower") == pytest.approx(-0.36)
    with pytest.raises(ValueError):
        h0(p, 0.0, 0.0, island="middle")


@given(p=finite, q=finite, t=finite, g=gam)
def test_time_reversal_symmetry(p, q, t, g):
    s = SystemParams.symmetric(g)
    assert hamiltonian(s, p, q, t) == pytest.approx(hamiltonian(s, -p, q, -t), abs=1e-12)


@given(p=finite, q=finite, t=finite, gp=gam, gm=gam)
def test_periodicity(p, q, t, gp, gm):
    s = SystemParams(gp, gm)
    h = hamiltonian(s, p, q, t)
    assert hamiltonian(s, p, q + TAU, t) == pytest.approx(h, abs=1e-9)
    assert hamiltonian(s, p, q, t + TAU) == pytest.approx(h, abs=1e-9)


@settings(max_examples=50)
@given(p=st.floats(-5, 5), q=st.floats(-4, 4), t=st.floats(-4, 4), gp=st.floats(0.05, 2),
       gm=st.floats(0.05, 2))
def test_equations_are_hamiltonian_gradient(p, q, t, gp, gm):
    s = SystemParams(gp, gm)
    h = 1e-5
    dHdq = (hamiltonian(s, p, q + h, t) - hamiltonian(s, p, q - h, t)) / (2 * h)
    dHdp = (hamiltonian(s, p + h, q, t) - hamiltonian(s, p - h, q, t)) / (2 * h)
    dp, dq = equations_of_motion(s, p, q, t)
    assert abs(dp + dHdq) <= 1e-8 * max(1.0, abs(dHdq))
    assert abs(dq - dHdp) <= 1e-8 * max(1.0, abs(dHdp))


def test_params_validation_and_mode():
    assert SystemParams.symmetric(0.3).symmetric_mode
    assert not SystemParams(0.3, 0.2).symmetric_mode
    assert SystemParams.symmetric(0.3).tau == TAU
    with pytest.raises(ValueError):
        SystemParams(-0.1, 0.1)
    with pytest.raises(ValueError):
        SystemParams(0.1, 0.1, hbar=0.0)
    with pytest.raises(ValueError):
        SystemParams(0.1, 0.1, tau=1.0)


@given(q=st.floats(-1e3, 1e3))
def test_points_are_wrapped(q):
    x = PhaseSpacePoint(0.0, q)
    assert -math.pi <= x.q < math.pi
    assert math.isclose(math.cos(x.q), math.cos(q), abs_tol=1e-9)
    assert float(wrap_angle(math.pi)) == -math.pi
    assert np.array_equal(x.reflected().as_array(), np.array([-0.0, x.q]))
