import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from accelcert import coeffs
from accelcert.coeffs import CoefficientTable, default_table

# 17-digit values from a 50-digit mpmath evaluation of the recurrences
THETA = {1: 1.6180339887498948, 2: 2.1935270853310539, 3: 2.7497913401204452,
         10: 6.4631157504385642, 100: 51.984258453554972}
THETA_TILDE = {1: 2.0, 2: 2.8422356793243053, 3: 3.6421524705465675,
               10: 8.9182836080911982, 50: 37.717047801394046}
PHI = {1: 2.0, 2: 4.7320508075688773, 3: 8.1262209785402052,
       10: 48.563934088262286, 100: 2858.575633781642}


@pytest.mark.parametrize("k,v", sorted(THETA.items()))
def test_theta_reference(k, v):
    assert coeffs.theta(k) == pytest.approx(v, rel=1e-14)


@pytest.mark.parametrize("k,v", sorted(THETA_TILDE.items()))
def test_theta_tilde_reference(k, v):
    assert coeffs.theta_tilde(k) == pytest.approx(v, rel=1e-14)


@pytest.mark.parametrize("k,v", sorted(PHI.items()))
def test_phi_reference(k, v):
    assert coeffs.phi(k) == pytest.approx(v, rel=1e-14)


def test_initial_values():
    assert coeffs.theta(0) == 1.0
    assert coeffs.phi(0) == 0.0
    assert coeffs.phi(1) == 2.0
    assert coeffs.phi(2) == pytest.approx(3.0 + math.sqrt(3.0), rel=1e-15)


def test_theta_2_value():
    assert coeffs.theta(2) == pytest.approx(2.193527085331054, abs=1e-14)


def test_bad_indices():
    with pytest.raises(ValueError):
        coeffs.theta(-1)
    with pytest.raises(TypeError):
        coeffs.phi(1.5)
    with pytest.raises(ValueError):
        coeffs.theta_tilde(0)


def test_arrays_match_scalars():
    t = default_table()
    th = t.theta_array(30)
    ph = t.phi_array(30)
    assert th.shape == (30,) and ph.shape == (30,)
    assert all(th[k] == t.theta(k) for k in range(30))
    assert all(ph[k] == t.phi(k) for k in range(30))


def test_fresh_table_extends_consistently():
    small = CoefficientTable(initial=4)
    big = default_table()
    assert small.theta(5000) == big.theta(5000)
    assert small.phi(5000) == big.phi(5000)


@settings(max_examples=60, deadline=None)
@given(st.integers(min_value=0, max_value=20000))
def test_recurrences_and_ordering(k):
    t = default_table()
    th, thn = t.theta(k), t.theta(k + 1)
    assert thn ** 2 - thn == pytest.approx(th ** 2, rel=1e-12)
    ph, phn = t.phi(k), t.phi(k + 1)
    assert phn == pytest.approx(ph + 1 + math.sqrt(1 + ph), rel=1e-12)
    assert (phn - ph) ** 2 == pytest.approx(phn + (phn - ph), rel=1e-11)
    assert th ** 2 <= phn * (1 + 1e-15)
    assert t.theta_tilde(k + 1) >= thn


def test_growth_rates():
    t = default_table()
    k = 10000
    assert t.theta(k) / (k / 2) == pytest.approx(1.0, rel=1e-2)
    assert t.phi(k) / (k * k / 4) == pytest.approx(1.0, rel=1e-2)


def test_vectorized_ordering_to_1e4():
    t = default_table()
    th = t.theta_array(10001)
    ph = t.phi_array(10002)
    assert np.all(th ** 2 <= ph[1:] * (1 + 1e-15))
