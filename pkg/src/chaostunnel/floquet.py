"""One-period quantum propagator on the cylinder and its eigen-decomposition."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.fft
import scipy.linalg

from .core import TAU, SystemParams, potential
from ._kernels import DRIFT, KICK


class NonUnitaryInput(ValueError):
    pass


@dataclass(frozen=True)
class MomentumBasis:
    """Plane waves exp(i n q), n = -n_max..n_max, momentum p_n = hbar*n."""

    hbar: float
    n_max: int

    def __post_init__(self):
        if not self.hbar > 0 or self.n_max < 1:
            raise ValueError("need hbar > 0 and n_max >= 1")

    @classmethod
    def for_bound(cls, hbar: float, p_bound: float = 4.0) -> "MomentumBasis":
        return cls(hbar, int(math.ceil(p_bound / hbar - 1e-9)))

    @property
    def dim(self) -> int:
        return 2 * self.n_max + 1

    @property
    def n(self) -> np.ndarray:
        return np.arange(-self.n_max, self.n_max + 1)

    @property
    def p(self) -> np.ndarray:
        return self.hbar * self.n

    @property
    def q_grid(self) -> np.ndarray:
        """Uniform angle grid matched to the basis (symmetric under q -> -q)."""
        return TAU * np.arange(self.dim) / self.dim

    @property
    def p_max(self) -> float:
        return self.hbar * self.n_max


def _stages(order: int):
    """Drift/kick weights of one symmetric composition step."""
    if order == 2:
        return np.array([0.5, 0.5]), np.array([1.0])
    if order == 4:
        return DRIFT, KICK
    raise ValueError("order must be 2 or 4")


def propagate(params: SystemParams, basis: MomentumBasis, states, t0=0.0, duration=TAU,
              steps: int = 512, order: int = 4):
    """Apply the split-operator evolution to momentum-space column vectors."""
    drift, kick = _stages(order)
    h = duration / steps
    hb = basis.hbar
    # rows = states, momentum index in FFT order along the last axis
    n_fft = np.fft.ifftshift(basis.n).astype(float)
    q = basis.q_grid
    kin = {w: np.exp(-0.5j * hb * n_fft**2 * w * h) for w in set(drift.tolist())}
    cols = np.asarray(states, dtype=complex)
    if params.gamma_plus == 0 and params.gamma_minus == 0:
        # free motion is diagonal; skipping the FFTs keeps exact degeneracies exact
        phase = np.exp(-0.5j * hb * basis.n.astype(float) ** 2 * duration)
        return (phase[:, None] * cols) if cols.ndim == 2 else phase * cols
    vec = cols.ndim == 1
    if vec:
        cols = cols[:, None]
    rows = np.ascontiguousarray(np.fft.ifftshift(cols, axes=0).T)
    t = t0
    for _ in range(steps):
        for s in range(len(kick)):
            rows *= kin[drift[s]]
            t += drift[s] * h
            psi = scipy.fft.ifft(rows, axis=1, norm="ortho", overwrite_x=True)
            psi *= np.exp(-1j * potential(params, q, t) * kick[s] * h / hb)
            rows = scipy.fft.fft(psi, axis=1, norm="ortho", overwrite_x=True)
        rows *= kin[drift[-1]]
        t += drift[-1] * h
    out = np.fft.fftshift(rows.T, axes=0)
    return out[:, 0].copy() if vec else np.ascontiguousarray(out)


def build_propagator(params: SystemParams, basis: MomentumBasis, steps_per_period: int = 512,
                     order: int = 4) -> np.ndarray:
    """Floquet operator U(2*pi, 0) in the momentum basis.

    Kinetic phases are applied in momentum space, potential phases on the
    matching q-grid; the composition is time-symmetric so U inherits the
    antiunitary symmetry exactly.
    """
    if steps_per_period < 128:
        raise ValueError("steps_per_period must be >= 128")
    return propagate(params, basis, np.eye(basis.dim, dtype=complex), steps=steps_per_period,
                     order=order)


def unitarity_error(U: np.ndarray) -> float:
    return float(np.abs(U.conj().T @ U - np.eye(U.shape[0])).max())


def parity_blocks(n_max: int):
    """Orthonormal even/odd bases (columns) under n -> -n."""
    dim = 2 * n_max + 1
    even = np.zeros((dim, n_max + 1))
    odd = np.zeros((dim, n_max))
    even[n_max, 0] = 1.0
    r = 1.0 / math.sqrt(2.0)
    for k in range(1, n_max + 1):
        even[n_max + k, k] = even[n_max - k, k] = r
        odd[n_max + k, k - 1] = r
        odd[n_max - k, k - 1] = -r
    return even, odd


def quasienergy(eigenvalues, hbar: float) -> np.ndarray:
    """Map eigenvalues exp(-i eps tau/hbar) onto the zone (-hbar/2, hbar/2]."""
    eps = -hbar * np.angle(eigenvalues) / TAU
    return np.where(eps <= -hbar / 2, eps + hbar, eps)


@dataclass
class FloquetSpectrum:
    """Quasienergies and eigenvectors (columns, momentum basis).

    ``parity`` holds +1/-1 per state when the operator commutes with
    n -> -n and the blocks were diagonalised separately, else 0.
    """

    quasienergies: np.ndarray
    eigenvectors: np.ndarray
    basis: MomentumBasis
    params: SystemParams
    parity: np.ndarray = field(default=None)
    steps_per_period: int = 512

    def __post_init__(self):
        if self.parity is None:
            self.parity = np.zeros(len(self.quasienergies), dtype=int)

    @property
    def hbar(self) -> float:
        return self.basis.hbar

    @property
    def gamma(self) -> float:
        return self.params.gamma

    def __len__(self):
        return len(self.quasienergies)


def _schur_eig(M):
    T, Z = scipy.linalg.schur(M, output="complex")
    return np.diag(T), Z


def diagonalize(U: np.ndarray, basis: MomentumBasis, params: SystemParams | None = None,
                use_parity: bool = True, tol: float = 1e-8, steps_per_period: int = 512
                ) -> FloquetSpectrum:
    """Unitary eigen-decomposition of U via complex Schur form.

    If U commutes with momentum reflection, even and odd blocks are
    diagonalised separately; that keeps tiny doublet splittings well
    above round-off because each member comes from its own block.
    """
    if U.shape != (basis.dim, basis.dim):
        raise ValueError("dimension mismatch between U and basis")
    err = unitarity_error(U)
    if err > tol:
        raise NonUnitaryInput(f"max|U^+U - 1| = {err:.2e}")
    flipped = U[::-1, ::-1]
    symmetric = use_parity and np.abs(flipped - U).max() < 1e-9
    if symmetric:
        even, odd = parity_blocks(basis.n_max)
        lam_e, z_e = _schur_eig(even.T @ U @ even)
        lam_o, z_o = _schur_eig(odd.T @ U @ odd)
        lam = np.concatenate([lam_e, lam_o])
        vecs = np.hstack([even @ z_e, odd @ z_o])
        par = np.concatenate([np.ones(len(lam_e), int), -np.ones(len(lam_o), int)])
    else:
        lam, vecs = _schur_eig(U)
        par = np.zeros(len(lam), int)
    eps = quasienergy(lam, basis.hbar)
    order = np.argsort(eps, kind="stable")
    if params is None:
        params = SystemParams(0.0, 0.0, basis.hbar)
    return FloquetSpectrum(eps[order], vecs[:, order], basis, params, par[order],
                           steps_per_period)


def floquet_spectrum(params: SystemParams, basis: MomentumBasis | None = None,
                     steps_per_period: int = 512, p_bound: float = 4.0) -> FloquetSpectrum:
    if basis is None:
        basis = MomentumBasis.for_bound(params.hbar, p_bound)
    U = build_propagator(params, basis, steps_per_period)
    return diagonalize(U, basis, params, steps_per_period=steps_per_period)


def circle_distance(e1, e2, hbar: float):
    """Distance on the quasienergy circle of circumference hbar."""
    d = np.abs(np.asarray(e1) - np.asarray(e2)) % hbar
    return np.minimum(d, hbar - d)


def circle_offset(e, ref, hbar: float):
    """Signed offset e - ref folded into [-hbar/2, hbar/2)."""
    return (np.asarray(e) - ref + hbar / 2) % hbar - hbar / 2
