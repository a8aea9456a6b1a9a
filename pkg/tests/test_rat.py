import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from chaostunnel.classical import ResonanceData
from chaostunnel.rat import (BAND, LOG_VARIANCE, InvalidRegime, PoleAtDegeneracy, RatInput,
                             cauchy_splitting_pdf, chain_length_kc, log_moments,
                             log_moments_quadrature, mean_splitting, perturbed_central_state,
                             pn_estimate, pole_position, predict_single, predict_switching,
                             quantized_action, two_resonance_threshold, unperturbed_energy,
                             veff_single, veff_two)


def res(I0=1.2, m0=1.0, V0=1e-3, ell=7, s=3):
    return ResonanceData(s, ell, 1.0, 0.5, I0, m0, V0, 0.1)


def test_quantized_action():
    assert quantized_action(0, 0.1) == pytest.approx(0.05)
    assert quantized_action(7, 1 / 16) == pytest.approx(0.46875)
    assert np.all(np.diff(quantized_action(np.arange(20), 0.03)) > 0)
    with pytest.raises(ValueError):
        quantized_action(-1, 0.1)


def test_unperturbed_energy():
    assert unperturbed_energy(0, res(I0=1.2), 1 / 16) == pytest.approx(0.6830, abs=5e-5)
    r = res(I0=0.1 * 4.5)
    assert unperturbed_energy(4, r, 0.1) == pytest.approx(0.0, abs=1e-15)
    assert unperturbed_energy(2, r, 0.1) == pytest.approx(unperturbed_energy(6, r, 0.1))
    with pytest.raises(ValueError):
        unperturbed_energy(0, res(m0=0.0), 0.1)


def test_chain_length():
    assert chain_length_kc(res(ell=7), 0.8, 1 / 16) == 2
    assert chain_length_kc(res(ell=7), 0.3, 1 / 16) == 1
    with pytest.raises(ValueError):
        chain_length_kc(res(), 0.01, 0.1)


@given(I_c=st.floats(0.05, 2.0), ell=st.integers(2, 12), ih=st.floats(2, 80))
def test_chain_length_definition(I_c, ell, ih):
    hb = 1 / ih
    if I_c <= hb / 2:
        return
    k = chain_length_kc(res(ell=ell), I_c, hb)
    assert quantized_action(k * ell, hb) > I_c
    assert k == 1 or quantized_action((k - 1) * ell, hb) <= I_c


def test_chain_length_steps_with_inv_hbar():
    r = res(ell=7)
    ks = [chain_length_kc(r, 0.31, 1 / x) for x in np.linspace(5, 80, 400)]
    assert np.all(np.diff(ks) >= 0) and set(np.diff(ks)) <= {0, 1}


def test_veff_single_examples():
    r = res(I0=0.3, ell=7, V0=1e-3)
    assert veff_single(r, 0.2, 1 / 16) == pytest.approx(1e-3)
    # k_c = 2 with E0 - E_ell = 0.5 gives V0^2 / 0.5
    hb = 1 / 16
    m0 = ((quantized_action(0, hb) - 0.3) ** 2 - (quantized_action(7, hb) - 0.3) ** 2) / (2 * 0.5)
    r = res(I0=0.3, m0=m0, V0=1e-3)
    assert veff_single(r, 0.8, hb) == pytest.approx(2e-6, rel=1e-12)


@given(I0=st.floats(0.05, 1.0), V0=st.floats(1e-7, 1e-3), I_c=st.floats(0.1, 1.5),
       c=st.floats(0.1, 10), ih=st.floats(5, 60))
@settings(max_examples=60)
def test_chain_identities(I0, V0, I_c, c, ih):
    hb = 1 / ih
    if I_c <= hb / 2:
        return
    r = res(I0=I0, V0=V0)
    try:
        coef = perturbed_central_state(r, I_c, hb)
        v = veff_single(r, I_c, hb)
    except PoleAtDegeneracy:
        return
    k = chain_length_kc(r, I_c, hb)
    assert len(coef) == k and coef[0] == 1.0
    assert v == pytest.approx(V0 * coef[-1], rel=1e-12)
    scaled = veff_single(res(I0=I0, V0=c * V0), I_c, hb)
    assert scaled == pytest.approx(c**k * v, rel=1e-9)
    if k > 1:
        e0 = unperturbed_energy(0, r, hb)
        assert coef[1] == pytest.approx(V0 / (e0 - unperturbed_energy(r.ell, r, hb)))


def test_pole_detection():
    hb = 0.1
    r = res(I0=quantized_action(7, hb) / 2 + quantized_action(0, hb) / 2, ell=7)
    with pytest.raises(PoleAtDegeneracy):
        perturbed_central_state(r, 1.0, hb)
    p = predict_single(r, 1.0, hb)
    assert math.isinf(p.mean_split)
    assert pole_position(r) == pytest.approx(1 / hb)


def test_veff_two():
    a = ResonanceData(3, 7, 0, 0, 0.1, 1.0, 2e-6, 0.0)
    b = ResonanceData(5, 11, 0, 0, 0.26, 1.0, 4e-6, 0.0)
    hb = 1 / 35
    den = unperturbed_energy(0, a, hb) - unperturbed_energy(7, a, hb)
    assert veff_two(a, b, hb) == pytest.approx(a.V0 / den * b.V0)
    # denominator -1 leaves the bare product up to sign
    m0 = (quantized_action(7, hb) - 0.1) ** 2 / 2 - (quantized_action(0, hb) - 0.1) ** 2 / 2
    a1 = ResonanceData(3, 7, 0, 0, 0.1, m0, 2e-6, 0.0)
    assert veff_two(a1, b, hb) == pytest.approx(-a.V0 * b.V0)
    with pytest.raises(InvalidRegime):
        veff_two(a, b, 1 / 20)
    assert two_resonance_threshold(a, b) == pytest.approx(7.5 / 0.26)


def test_predict_switching_mechanisms():
    a = ResonanceData(3, 7, 0, 0, 0.1, 1.0, 2e-6, 0.0)
    b = ResonanceData(5, 11, 0, 0, 0.26, 2.0, 4e-6, 0.0)
    lo = predict_switching(a, b, 0.3, 1 / 20)
    hi = predict_switching(a, b, 0.3, 1 / 35)
    assert lo.mechanism == "single" and hi.mechanism == "two_resonance"
    for p in (lo, hi):
        assert p.band_lo < p.mean_split < p.band_hi
        assert p.mean_split == pytest.approx(2 * math.pi * p.V_eff**2 * p.inv_hbar)
        assert p.contains(p.mean_split) and not p.contains(10 * p.band_hi)


def test_mean_splitting():
    m, lo, hi = mean_splitting(1e-4, 1 / 16)
    assert m == pytest.approx(2 * math.pi * 1e-8 * 16) and m == pytest.approx(1.005e-6,
                                                                               rel=1e-3)
    assert hi / lo == pytest.approx(math.exp(math.pi))
    assert mean_splitting(0.0, 0.1)[0] == 0.0


@given(v=st.floats(1e-12, 1e-2), hb=st.floats(0.01, 0.5), c=st.floats(0.1, 10))
def test_mean_splitting_quadratic(v, hb, c):
    assert mean_splitting(c * v, hb)[0] == pytest.approx(c * c * mean_splitting(v, hb)[0],
                                                          rel=1e-12)
    m, lo, hi = mean_splitting(v, hb)
    assert lo < m < hi and hi / lo == pytest.approx(BAND**2)


def test_cauchy_pdf_median_and_norm():
    s = 3e-7
    f = lambda u: s * cauchy_splitting_pdf(s * u, s)
    total = integrate.quad(f, 0, np.inf)[0]
    half = integrate.quad(f, 0, 1)[0]
    assert total == pytest.approx(1.0, abs=1e-8) and half == pytest.approx(0.5, abs=1e-8)


@pytest.mark.parametrize("scale", [1e-12, 3e-7, 1.0, 50.0])
def test_log_moments(scale):
    m, v = log_moments(scale)
    qm, qv = log_moments_quadrature(scale)
    assert abs(qm - math.log(scale)) < 1e-6 and abs(qv - math.pi**2 / 4) < 1e-6
    assert m == math.log(scale) and v == LOG_VARIANCE


def test_log_moments_sampling():
    rng = np.random.default_rng(3)
    x = np.abs(2e-6 * np.tan(math.pi * (rng.random(400_000) - 0.5)))
    lx = np.log(x)
    assert lx.mean() == pytest.approx(math.log(2e-6), abs=0.01)
    assert lx.var() == pytest.approx(LOG_VARIANCE, rel=0.02)


def test_pn_asymptotic_example():
    A = 5 * 2 * math.pi * 0.05
    v, branch = pn_estimate(A, 0.05)
    assert branch == "asymptotic"
    assert v == pytest.approx(0.05 / (16 * math.pi * 125) * math.exp(-0.613706 * 5), rel=1e-5)
    assert v == pytest.approx(3.70e-7, rel=2e-3)


def test_pn_branches():
    hb = 0.05
    A = 2 * 2 * math.pi * hb
    assert pn_estimate(A, hb)[1] == "gamma"
    with pytest.raises(ValueError):
        pn_estimate(0.5 * 2 * math.pi * hb, hb, branch="asymptotic")
    with pytest.raises(ValueError):
        pn_estimate(A, hb, branch="other")
    assert pn_estimate(A, hb, omega_prefactor=3)[0] == pytest.approx(3 * pn_estimate(A, hb)[0])


def test_pn_monotone_in_N():
    hb = 0.04
    Ns = np.linspace(1, 40, 80)
    for branch in ("gamma", "asymptotic"):
        vals = [pn_estimate(N * 2 * math.pi * hb, hb, branch=branch)[0] for N in Ns]
        assert np.all(np.diff(vals) < 0)
    auto = [pn_estimate(N * 2 * math.pi * hb, hb)[0] for N in Ns]
    assert np.all(np.diff(auto) < 0)


def test_pn_branch_ratio():
    """The two branches differ by a factor that grows like 4 sqrt(pi) N^1.5."""
    hb = 0.05
    for N, expected in ((3, 0.787), (10, 0.914), (50, 0.980)):
        A = N * 2 * math.pi * hb
        g = pn_estimate(A, hb, branch="gamma")[0]
        a = pn_estimate(A, hb, branch="asymptotic")[0]
        assert g / a / (4 * math.sqrt(math.pi) * N**1.5) == pytest.approx(expected, abs=2e-3)


def test_rat_input_warns_inside_layer():
    r = res(I0=0.3, m0=5.0, V0=1e-3)
    with pytest.warns(RuntimeWarning):
        RatInput(r, 0.08, 0.05)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        RatInput(r, 0.5, 0.05)
