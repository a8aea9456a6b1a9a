"""Coherent-state probes, Husimi maps, doublet selection and state labelling."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .core import TAU, PhaseSpacePoint
from .floquet import FloquetSpectrum, MomentumBasis, circle_distance, circle_offset


class DoubletAmbiguous(RuntimeError):
    """Second and third largest overlaps are too close to call."""


class IndeterminateParity(RuntimeError):
    pass


@dataclass(frozen=True)
class CoherentState:
    """Minimum-uncertainty probe centered at (p0, q0) with width sqrt(hbar/2)."""

    p0: float
    q0: float
    hbar: float

    @property
    def width_p(self) -> float:
        return math.sqrt(self.hbar / 2.0)

    @classmethod
    def at(cls, point: PhaseSpacePoint, hbar: float) -> "CoherentState":
        return cls(point.p, point.q, hbar)


def _gaussian(basis: MomentumBasis, p0):
    p0 = np.atleast_1d(np.asarray(p0, dtype=float))
    return np.exp(-((basis.p[None, :] - p0[:, None]) ** 2) / (2.0 * basis.hbar))


def coherent_vector(basis: MomentumBasis, cs: CoherentState) -> np.ndarray:
    """Momentum components c_n of the coherent state, unit norm."""
    if not math.isclose(cs.hbar, basis.hbar, rel_tol=1e-12):
        raise ValueError("coherent state and basis use different hbar")
    c = _gaussian(basis, cs.p0)[0] * np.exp(-1j * basis.n * cs.q0)
    return c / np.linalg.norm(c)


def _probe(spectrum_or_basis, cs):
    basis = getattr(spectrum_or_basis, "basis", spectrum_or_basis)
    if isinstance(cs, CoherentState):
        return coherent_vector(basis, cs)
    return np.asarray(cs, dtype=complex)


def overlaps(spectrum: FloquetSpectrum, cs) -> np.ndarray:
    """sigma_m = |<z|psi_m>| for every eigenstate, in spectrum order.

    ``cs`` is a CoherentState or an explicit probe vector.
    """
    z = _probe(spectrum, cs)
    return np.abs(spectrum.eigenvectors.conj().T @ z)


@dataclass
class DoubletRecord:
    """The pair of Floquet states with the largest probe overlaps.

    ``eps_plus``/``eps_minus`` follow the parity labels when available,
    otherwise the overlap ranking.
    """

    eps_plus: float
    eps_minus: float
    delta: float
    sigma_plus: float
    sigma_minus: float
    index_plus: int
    index_minus: int
    parity_labels: tuple | None = None
    ambiguous: bool = False
    sigma_third: float = 0.0

    @property
    def indices(self):
        return self.index_plus, self.index_minus

    def center(self, hbar: float) -> float:
        """Mean position of the pair on the quasienergy circle."""
        off = circle_offset(self.eps_plus, self.eps_minus, hbar)
        return float(circle_offset(self.eps_minus + 0.5 * off, 0.0, hbar))


def select_doublet(spectrum: FloquetSpectrum, cs_upper, strict: bool = False,
                   ambiguity: float = 0.1) -> DoubletRecord:
    """Pick the two states with maximal overlap with the island probe.

    With ``strict`` a near-tie between the 2nd and 3rd overlaps raises
    DoubletAmbiguous; otherwise the record is flagged.
    """
    sig = overlaps(spectrum, cs_upper)
    order = np.argsort(-sig, kind="stable")
    i, j = int(order[0]), int(order[1])
    third = float(sig[order[2]]) if len(sig) > 2 else 0.0
    ambiguous = third > 0 and (sig[j] - third) < ambiguity * sig[j]
    if ambiguous and strict:
        raise DoubletAmbiguous(f"sigma_2={sig[j]:.3e}, sigma_3={third:.3e}")
    par = spectrum.parity
    labels = None
    if par[i] != 0 and par[j] != 0:
        if par[i] < par[j]:
            i, j = j, i
        labels = ("+" if par[i] > 0 else "-", "+" if par[j] > 0 else "-")
    eps = spectrum.quasienergies
    return DoubletRecord(float(eps[i]), float(eps[j]),
                         float(circle_distance(eps[i], eps[j], spectrum.hbar)),
                         float(sig[i]), float(sig[j]), i, j, labels, bool(ambiguous), third)


@dataclass
class HusimiField:
    """|<z(p, q)|psi>|^2 on a rectangular grid, rows along p."""

    p: np.ndarray
    q: np.ndarray
    intensity: np.ndarray
    normalization: str = "unit-norm probes, no prefactor"
    meta: dict = field(default_factory=dict)

    def peak(self):
        k = np.unravel_index(np.argmax(self.intensity), self.intensity.shape)
        return float(self.p[k[0]]), float(self.q[k[1]])


def husimi(state, basis: MomentumBasis, p_range=(-2.0, 2.0), q_range=(-math.pi, math.pi),
           shape=(200, 200), p=None, q=None) -> HusimiField:
    """Husimi distribution of a momentum-space state.

    Explicit ``p``/``q`` arrays override the ranges.
    """
    psi = np.asarray(state, dtype=complex)
    if psi.shape != (basis.dim,):
        raise ValueError("state does not match basis")
    if p is None:
        p = np.linspace(*p_range, shape[0])
    if q is None:
        q = np.linspace(*q_range, shape[1])
    p = np.asarray(p, float)
    q = np.asarray(q, float)
    g = _gaussian(basis, p)
    g /= np.linalg.norm(g, axis=1, keepdims=True)
    # <z|psi> = sum_n g_n exp(i n q0) psi_n
    amp = (g * psi[None, :]) @ np.exp(1j * np.outer(basis.n, q))
    return HusimiField(p, q, np.abs(amp) ** 2)


def symmetry_conjugate(state) -> np.ndarray:
    """c'_n = conj(c_{-n}): maps the upper island onto the lower one."""
    return np.conj(np.asarray(state)[..., ::-1])


def parity_label(state, cs_upper, basis: MomentumBasis | None = None) -> str:
    """'+' or '-' for a state invariant (up to phase) under symmetry_conjugate."""
    psi = np.asarray(state, dtype=complex)
    zu = coherent_vector(basis, cs_upper) if isinstance(cs_upper, CoherentState) else \
        np.asarray(cs_upper, dtype=complex)
    zl = symmetry_conjugate(zu)
    alpha = np.angle(np.vdot(psi, symmetry_conjugate(psi)))
    psi = psi * np.exp(0.5j * alpha)
    a, b = np.vdot(zu, psi), np.vdot(zl, psi)
    if min(abs(a), abs(b)) < 1e-12:
        raise IndeterminateParity("state has no weight on one of the islands")
    return "+" if (a * np.conj(b)).real > 0 else "-"


# ---------------------------------------------------------------------------
# harmonic states and spectral ladders


@dataclass
class HarmonicStates:
    """Eigenstates of the quadratic approximation around a stable periodic point.

    Built from the ladder operator b = v_p (q - qc) - v_q (p - pc), where
    v is the monodromy eigenvector; columns of ``vectors`` are |l>,
    l = 0, 1, ...
    """

    vectors: np.ndarray
    numbers: np.ndarray
    center: PhaseSpacePoint

    def weights(self, states) -> np.ndarray:
        """|<l|psi>|^2, shape (n_levels, n_states)."""
        return np.abs(self.vectors.conj().T @ np.asarray(states)) ** 2


def harmonic_states(basis: MomentumBasis, center: PhaseSpacePoint, monodromy,
                    n_levels: int = 12) -> HarmonicStates:
    M = np.asarray(monodromy, dtype=float)
    lam, vecs = np.linalg.eig(M)
    if np.max(np.abs(lam.imag)) == 0:
        raise ValueError("monodromy is not elliptic")
    v = vecs[:, 0]
    hb = basis.hbar
    comm = -2.0 * hb * np.imag(v[1] * np.conj(v[0]))
    if comm < 0:
        v = v.conj()
    comm = abs(comm)
    qw = np.asarray(((basis.q_grid - center.q + math.pi) % TAU) - math.pi)
    E = np.exp(1j * np.outer(basis.q_grid, basis.n)) / math.sqrt(basis.dim)
    Q = E.conj().T @ (qw[:, None] * E)
    b = v[0] * Q - v[1] * np.diag(basis.p - center.p)
    number = b.conj().T @ b / comm
    ev, U = np.linalg.eigh(number)
    return HarmonicStates(U[:, :n_levels], ev[:n_levels], center)


def ladder_offsets(hbar: float, l_max: int, omega0: float, frequency=None) -> np.ndarray:
    """Expected eps_l - eps_0 for l = 0..l_max.

    Linear ladder l*hbar*omega0 by default. ``frequency`` (a callable
    Omega(I), e.g. a numpy Polynomial fitted to a rotation profile) adds
    the anharmonic correction int_{I_0}^{I_l} Omega dI with
    I_l = hbar (l + 1/2).
    """
    ls = np.arange(l_max + 1)
    if frequency is None:
        return ls * hbar * omega0
    from scipy.integrate import quad
    I = hbar * (ls + 0.5)
    return np.array([quad(frequency, I[0], x)[0] for x in I])


def harmonic_index(spectrum: FloquetSpectrum, doublet: DoubletRecord, candidate,
                   omega0: float, l_max: int = 15, frequency=None):
    """Integer l minimising the circle distance to eps_0 + l*hbar*omega0.

    ``candidate`` is a state index or a quasienergy value (float). Returns
    (l, residual) with the residual in energy units.
    """
    hb = spectrum.hbar
    if isinstance(candidate, (int, np.integer)):
        eps = spectrum.quasienergies[candidate]
    else:
        eps = float(candidate)
    e0 = doublet.center(hb)
    d = circle_distance(eps, e0 + ladder_offsets(hb, l_max, omega0, frequency), hb)
    l = int(np.argmin(d))
    return l, float(d[l])
