"""Resonance-assisted tunnelling estimates from classical resonance parameters."""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import integrate, special

from .classical import ResonanceData

TWO_PI = 2.0 * math.pi
BAND = math.exp(math.pi / 2.0)
LOG_VARIANCE = math.pi**2 / 4.0


class PoleAtDegeneracy(ArithmeticError):
    """An energy denominator of the coupling chain vanishes."""


class InvalidRegime(ValueError):
    pass


@dataclass
class RatInput:
    resonance: ResonanceData
    I_c: float
    hbar: float

    def __post_init__(self):
        r = self.resonance
        if self.I_c <= r.I0 - 2.0 * math.sqrt(2.0 * r.m0 * r.V0):
            warnings.warn("chaos border lies inside the resonance layer", RuntimeWarning)


@dataclass
class RatPrediction:
    inv_hbar: float
    k_c: int
    V_eff: float
    mean_split: float
    band_lo: float
    band_hi: float
    mechanism: str

    def contains(self, delta: float) -> bool:
        return self.band_lo <= delta <= self.band_hi


def quantized_action(n, hbar: float):
    n = np.asarray(n)
    if np.any(n < 0):
        raise ValueError("n must be non-negative")
    return hbar * (n + 0.5)


def unperturbed_energy(n, res: ResonanceData, hbar: float):
    """Pendulum level E_n = (I_n - I0)^2 / (2 m0) in the co-rotating frame."""
    if not res.m0 > 0:
        raise ValueError("m0 must be positive")
    return (quantized_action(n, hbar) - res.I0) ** 2 / (2.0 * res.m0)


def chain_length_kc(res: ResonanceData, I_c: float, hbar: float) -> int:
    """Smallest k >= 1 with I_{k ell} > I_c."""
    if not I_c > 0.5 * hbar:
        raise ValueError("chaos border below the ground-state action")
    k = max(1, math.ceil((I_c / hbar - 0.5) / res.ell))
    while quantized_action(k * res.ell, hbar) <= I_c:
        k += 1
    while k > 1 and quantized_action((k - 1) * res.ell, hbar) > I_c:
        k -= 1
    return k


def perturbed_central_state(res: ResonanceData, I_c: float, hbar: float) -> np.ndarray:
    """Lowest-order amplitudes of |k ell> in the dressed central state, k = 0..k_c-1."""
    kc = chain_length_kc(res, I_c, hbar)
    e0 = unperturbed_energy(0, res, hbar)
    coef = [1.0]
    for k in range(1, kc):
        ek = unperturbed_energy(k * res.ell, res, hbar)
        den = e0 - ek
        if abs(den) <= 1e-12 * max(abs(e0), abs(ek)):
            raise PoleAtDegeneracy(f"E_0 = E_{k * res.ell}")
        coef.append(coef[-1] * res.V0 / den)
    return np.array(coef)


def veff_single(res: ResonanceData, I_c: float, hbar: float) -> float:
    """Coupling of the central state to the first state beyond the chaos border."""
    return float(res.V0 * perturbed_central_state(res, I_c, hbar)[-1])


def veff_two(res_a: ResonanceData, res_b: ResonanceData, hbar: float) -> float:
    """One step along resonance a, then resonance b carries the state out.

    Valid while the first excited rung I_{ell_a} lies below I0 of b.
    """
    if not quantized_action(res_a.ell, hbar) < res_b.I0:
        raise InvalidRegime("I_ell of the inner resonance exceeds I0 of the outer one")
    e0 = unperturbed_energy(0, res_a, hbar)
    el = unperturbed_energy(res_a.ell, res_a, hbar)
    den = e0 - el
    if abs(den) <= 1e-12 * max(abs(e0), abs(el)):
        raise PoleAtDegeneracy(f"E_0 = E_{res_a.ell}")
    return float(res_a.V0 / den * res_b.V0)


def two_resonance_threshold(res_a: ResonanceData, res_b: ResonanceData) -> float:
    """1/hbar above which veff_two applies."""
    return (res_a.ell + 0.5) / res_b.I0


def pole_position(res: ResonanceData, k: int = 1) -> float:
    """1/hbar where E_0 = E_{k ell}, i.e. I0 = hbar (k ell + 1) / 2."""
    return (k * res.ell + 1) / (2.0 * res.I0)


def mean_splitting(V_eff: float, hbar: float):
    """Geometric-mean splitting 2 pi V_eff^2 / hbar and its e^{-+pi/2} band."""
    mean = TWO_PI * V_eff**2 / hbar
    return mean, mean / BAND, mean * BAND


def cauchy_splitting_pdf(x, scale: float):
    """One-sided Cauchy density of the splittings, x >= 0."""
    x = np.asarray(x, dtype=float)
    return (2.0 / math.pi) * scale / (x**2 + scale**2)


def log_moments(scale: float, check: bool = True):
    """(ln scale, pi^2/4) for the one-sided Cauchy law, optionally verified by quadrature.

    The quadrature runs in u = ln(x/scale), where the density becomes
    (1/pi) sech(u) and both moments converge quickly.
    """
    mean, var = math.log(scale), LOG_VARIANCE
    if check:
        qm, qv = log_moments_quadrature(scale)
        if abs(qm - mean) > 1e-6 or abs(qv - var) > 1e-6:
            raise ArithmeticError("log-moment quadrature disagrees with closed form")
    return mean, var


def log_moments_quadrature(scale: float):
    # sech(80) ~ 1e-34, so the truncated range is exact at double precision
    w = lambda u: 1.0 / (math.pi * math.cosh(u))
    m1 = integrate.quad(lambda u: u * w(u), -80.0, 80.0, epsabs=1e-13, limit=200)[0]
    m2 = integrate.quad(lambda u: u * u * w(u), -80.0, 80.0, epsabs=1e-13, limit=200)[0]
    return math.log(scale) + m1, m2 - m1**2


def pn_estimate(area_A: float, hbar: float, omega_prefactor: float = 1.0,
                branch: str = "auto"):
    """Chaos-assisted splitting estimate from the island size alone.

    Returns (value, branch) with branch "gamma" (regularized incomplete
    Gamma form) or "asymptotic". ``auto`` uses the asymptotic form for N > 3.
    """
    N = area_A / (TWO_PI * hbar)
    if branch == "auto":
        branch = "asymptotic" if N > 3 else "gamma"
    if branch == "asymptotic":
        if N < 1:
            raise ValueError("asymptotic branch needs N >= 1")
        val = hbar * omega_prefactor / (16.0 * math.pi * N**3) * math.exp(
            -2.0 * (1.0 - math.log(2.0)) * N)
    elif branch == "gamma":
        # Gamma(2N, 4N) / Gamma(2N + 1) = Q(2N, 4N) / (2N)
        val = hbar * omega_prefactor * special.gammaincc(2 * N, 4 * N) / (2 * N)
    else:
        raise ValueError(f"unknown branch {branch!r}")
    return float(val), branch


def predict_single(res: ResonanceData, I_c: float, hbar: float) -> RatPrediction:
    kc = chain_length_kc(res, I_c, hbar)
    try:
        v = veff_single(res, I_c, hbar)
    except PoleAtDegeneracy:
        return RatPrediction(1 / hbar, kc, math.inf, math.inf, math.inf, math.inf, "single")
    m, lo, hi = mean_splitting(v, hbar)
    return RatPrediction(1 / hbar, kc, v, m, lo, hi, "single")


def predict_switching(inner: ResonanceData, outer: ResonanceData, I_c: float,
                      hbar: float) -> RatPrediction:
    """Single step via ``outer`` below the two-resonance threshold, chained above it."""
    try:
        v = veff_two(inner, outer, hbar)
    except InvalidRegime:
        return predict_single(outer, I_c, hbar)
    except PoleAtDegeneracy:
        return RatPrediction(1 / hbar, 2, math.inf, math.inf, math.inf, math.inf,
                             "two_resonance")
    m, lo, hi = mean_splitting(v, hbar)
    return RatPrediction(1 / hbar, 2, v, m, lo, hi, "two_resonance")
