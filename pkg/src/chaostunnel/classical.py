"""Classical stroboscopic dynamics, periodic orbits and resonance geometry."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels as K
from .core import TAU, PhaseSpacePoint, SystemParams, wrap_angle


class NoConvergence(RuntimeError):
    pass


class SingularJacobian(RuntimeError):
    pass


class ManifoldEscape(RuntimeError):
    pass


class GridTooCoarse(RuntimeError):
    pass


# ---------------------------------------------------------------------------
# maps


class StroboscopicMap:
    """Period map of the driven pendulum sampled at t = 0 mod 2*pi."""

    periodic_q = True

    def __init__(self, params: SystemParams, steps: int = 256):
        self.params = params
        self.steps = int(steps)

    def _g(self):
        return self.params.gamma_plus, self.params.gamma_minus

    def iterate(self, p, q, n: int = 1, wrap: bool = True):
        p = np.atleast_1d(np.asarray(p, dtype=float))
        q = np.atleast_1d(np.asarray(q, dtype=float))
        if n == 0:
            return p.copy(), (wrap_angle(q) if wrap else q.copy())
        a, b = K.flow(p, q, 0.0, TAU * n, self.steps * n, *self._g())
        return a, (wrap_angle(b) if wrap else b)

    def jacobian(self, p, q, n: int = 1):
        """Image and exact Jacobian d(p', q')/d(p, q) of the n-fold map."""
        p = np.atleast_1d(np.asarray(p, dtype=float))
        q = np.atleast_1d(np.asarray(q, dtype=float))
        a, b, jac = K.flow_tangent(p, q, 0.0, TAU * n, self.steps * n, *self._g())
        return a, wrap_angle(b), jac

    def dq(self, q1, q0):
        return wrap_angle(np.asarray(q1) - np.asarray(q0))


class PendulumResonanceMap:
    """Synthetic isolated resonance H = (I - I0)^2/(2 m0) + 2 V0 cos(ell*theta).

    Points live in the plane with q = sqrt(2I) cos(theta) and
    p = -sqrt(2I) sin(theta) (canonical, area = 2*pi*I); keep I0 small
    enough that |q| < pi so point objects never wrap. One map step flows
    the pendulum for one period and then rotates by 2*pi*s/ell, so the
    ell-fold map has the pendulum's X and O points as fixed points.
    """

    periodic_q = False

    def __init__(self, I0, m0, V0, ell, s=1, steps=400):
        self.I0, self.m0, self.V0 = float(I0), float(m0), float(V0)
        self.ell, self.s, self.steps = int(ell), int(s), int(steps)

    def to_action_angle(self, p, q):
        return 0.5 * (p * p + q * q), np.arctan2(-p, q)

    def to_plane(self, I, th):
        r = np.sqrt(2.0 * I)
        return -r * np.sin(th), r * np.cos(th)

    def _flow(self, I, th, duration):
        h = duration / self.steps
        I = I.copy()
        th = th.copy()
        for _ in range(self.steps):
            for s in range(3):
                th += K.DRIFT[s] * h * (I - self.I0) / self.m0
                I += K.KICK[s] * h * 2.0 * self.V0 * self.ell * np.sin(self.ell * th)
            th += K.DRIFT[3] * h * (I - self.I0) / self.m0
        return I, th

    def iterate(self, p, q, n: int = 1, wrap: bool = True):
        I, th = self.to_action_angle(np.atleast_1d(p).astype(float), np.atleast_1d(q).astype(float))
        I, th = self._flow(I, th, TAU * n)
        return self.to_plane(I, th + TAU * self.s * n / self.ell)

    def jacobian(self, p, q, n: int = 1, h: float = 1e-6):
        return fd_jacobian(self, p, q, n, h)

    def dq(self, q1, q0):
        return np.asarray(q1) - np.asarray(q0)


def fd_jacobian(mapping, p, q, n=1, h=1e-6):
    """Central finite-difference Jacobian of the n-fold map."""
    p = np.atleast_1d(np.asarray(p, dtype=float))
    q = np.atleast_1d(np.asarray(q, dtype=float))
    m = len(p)
    pp = np.concatenate([p + h, p - h, p, p, p])
    qq = np.concatenate([q, q, q + h, q - h, q])
    a, b = mapping.iterate(pp, qq, n, wrap=False)
    jac = np.empty((m, 2, 2))
    jac[:, 0, 0] = (a[:m] - a[m:2 * m]) / (2 * h)
    jac[:, 1, 0] = (b[:m] - b[m:2 * m]) / (2 * h)
    jac[:, 0, 1] = (a[2 * m:3 * m] - a[3 * m:4 * m]) / (2 * h)
    jac[:, 1, 1] = (b[2 * m:3 * m] - b[3 * m:4 * m]) / (2 * h)
    a0, b0 = a[4 * m:], b[4 * m:]
    if mapping.periodic_q:
        b0 = wrap_angle(b0)
    return a0, b0, jac


# ---------------------------------------------------------------------------
# trajectories


def _check_finite(*vals):
    if not all(np.all(np.isfinite(v)) for v in vals):
        raise ValueError("non-finite input")


def integrate(params: SystemParams, x0: PhaseSpacePoint, t0: float, t1: float,
              tol: float | None = None, steps_per_period: int = 256) -> PhaseSpacePoint:
    """Propagate one point from t0 to t1.

    With ``tol`` the step count is doubled until the end point moves by less
    than ``tol``.
    """
    _check_finite(x0.p, x0.q, t0, t1)
    if t1 < t0:
        raise ValueError("t1 must not precede t0")
    dur = t1 - t0
    if dur == 0:
        return x0
    g = (params.gamma_plus, params.gamma_minus)

    def run(spp):
        n = max(1, int(math.ceil(dur / TAU * spp)))
        a, b = K.flow(np.array([x0.p]), np.array([x0.q]), t0, dur, n, *g)
        return a[0], b[0]

    spp = steps_per_period
    p, q = run(spp)
    if tol is not None:
        for _ in range(12):
            spp *= 2
            p2, q2 = run(spp)
            done = max(abs(p2 - p), abs(q2 - q)) < tol
            p, q = p2, q2
            if done:
                break
    return PhaseSpacePoint(p, q)


def integrate_backward(params: SystemParams, x0: PhaseSpacePoint, t0: float, t1: float,
                       steps_per_period: int = 256) -> PhaseSpacePoint:
    """Integrate from t0 back to t1 <= t0 with the same (reversible) scheme."""
    dur = t1 - t0
    n = max(1, int(math.ceil(abs(dur) / TAU * steps_per_period)))
    a, b = K.flow(np.array([x0.p]), np.array([x0.q]), t0, dur, n,
                  params.gamma_plus, params.gamma_minus)
    return PhaseSpacePoint(a[0], b[0])


def strobe_map(params: SystemParams, x: PhaseSpacePoint, steps: int = 256) -> PhaseSpacePoint:
    _check_finite(x.p, x.q)
    p, q = StroboscopicMap(params, steps).iterate(x.p, x.q)
    return PhaseSpacePoint(p[0], q[0])


def calibrate_steps(params: SystemParams, points, start: int = 256, tol: float = 1e-11,
                    max_steps: int = 1 << 14) -> int:
    """Smallest power-of-two refinement of ``start`` whose period map is stable to ``tol``."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    steps = start
    prev = StroboscopicMap(params, steps).iterate(pts[:, 0], pts[:, 1], wrap=False)
    while steps < max_steps:
        steps *= 2
        cur = StroboscopicMap(params, steps).iterate(pts[:, 0], pts[:, 1], wrap=False)
        if max(np.abs(cur[0] - prev[0]).max(), np.abs(cur[1] - prev[1]).max()) < tol:
            return steps // 2
        prev = cur
    return steps


@dataclass
class StroboscopicOrbit:
    seed: PhaseSpacePoint
    p: np.ndarray
    q: np.ndarray
    classification: str  # "regular" | "chaotic" | "escaped"

    @property
    def points(self):
        return [PhaseSpacePoint(a, b) for a, b in zip(self.p, self.q)]


_CLASSES = {0: "regular", 1: "chaotic", 2: "escaped"}


def classify_seeds(params: SystemParams, p, q, n_iter: int = 2000, steps: int = 256,
                   p_escape: float = 4.0, offset: float = 1e-9, threshold: float = 1e-3):
    codes, _ = K.divergence_test(np.asarray(p, float), np.asarray(q, float), offset, n_iter,
                                 steps, params.gamma_plus, params.gamma_minus, p_escape,
                                 threshold)
    return [_CLASSES[int(c)] for c in codes]


def poincare_section(params: SystemParams, seeds, n_iter: int, p_escape: float = 4.0,
                     steps: int = 256, chaos_iter: int | None = None) -> list[StroboscopicOrbit]:
    """Stroboscopic orbits of each seed, classified regular/chaotic/escaped."""
    if n_iter < 1:
        raise ValueError("n_iter must be >= 1")
    seeds = [s if isinstance(s, PhaseSpacePoint) else PhaseSpacePoint(*s) for s in seeds]
    p0 = np.array([s.p for s in seeds], float)
    q0 = np.array([s.q for s in seeds], float)
    P, Q = K.strobe_orbits(p0, q0, n_iter, steps, params.gamma_plus, params.gamma_minus,
                           p_escape)
    labels = classify_seeds(params, p0, q0, chaos_iter or max(n_iter, 200), steps, p_escape)
    out = []
    for i, s in enumerate(seeds):
        ok = np.isfinite(P[i])
        label = "escaped" if not ok.all() or np.abs(P[i][ok]).max() > p_escape else labels[i]
        out.append(StroboscopicOrbit(s, P[i][ok], Q[i][ok], label))
    return out


# ---------------------------------------------------------------------------
# periodic orbits


@dataclass
class PeriodicOrbit:
    anchor: PhaseSpacePoint
    period_multiplier: int
    winding: int
    residual: float
    monodromy: np.ndarray
    trace: float
    turns: float = float("nan")

    @property
    def stable(self) -> bool:
        return abs(self.trace) < 2

    @property
    def unstable(self) -> bool:
        return abs(self.trace) > 2


def _residual(mapping, x, ell):
    a, b = mapping.iterate(x[0], x[1], ell, wrap=False)
    return np.array([a[0] - x[0], float(mapping.dq(b[0], x[1]))])


def find_periodic_orbit(params_or_map, guess, ell: int, center: PhaseSpacePoint | None = None,
                        steps: int = 256, max_iter: int = 50, tol: float = 1e-12,
                        max_step: float = 0.05) -> PeriodicOrbit:
    """Newton iteration on F(x) = map^ell(x) - x (q difference taken on the circle).

    The winding is the number of turns the orbit makes around ``center``
    during ell periods, folded into 0..ell/2 the same way the rotation
    profile folds its frequencies.
    """
    mapping = (StroboscopicMap(params_or_map, steps) if isinstance(params_or_map, SystemParams)
               else params_or_map)
    if not isinstance(guess, PhaseSpacePoint):
        guess = PhaseSpacePoint(*guess)
    x = np.array([guess.p, guess.q], float)
    for _ in range(max_iter):
        a, b, jac = mapping.jacobian(x[0], x[1], ell)
        F = np.array([a[0] - x[0], float(mapping.dq(b[0], x[1]))])
        A = jac[0] - np.eye(2)
        det = np.linalg.det(A)
        if abs(det) < 1e-10 * max(1.0, np.abs(jac[0]).max() ** 2):
            raise SingularJacobian(f"det(DF - 1) = {det:.2e} at {x}")
        dx = np.linalg.solve(A, -F)
        size = np.abs(dx).max()
        if size > max_step:
            dx *= max_step / size
        x = x + dx
        if mapping.periodic_q:
            x[1] = float(wrap_angle(x[1]))
        if size < tol:
            break
    else:
        raise NoConvergence(f"no convergence after {max_iter} Newton steps")
    F = _residual(mapping, x, ell)
    res = float(np.abs(F).max())
    if res > 1e-10:
        raise NoConvergence(f"residual {res:.2e} after Newton iteration")
    _, _, jac = mapping.jacobian(x[0], x[1], ell)
    M = jac[0]
    winding, turns = 0, float("nan")
    if center is not None and isinstance(mapping, StroboscopicMap):
        nu = K.rotation_about(np.array([x[0]]), np.array([x[1]]), center.p, center.q, ell,
                              mapping.steps, *mapping._g())[0]
        turns = nu * ell
        k = int(round(abs(turns))) % ell
        winding = min(k, ell - k)
    return PeriodicOrbit(PhaseSpacePoint(x[0], x[1]), ell, winding, res, M,
                         float(np.trace(M)), turns)


def orbit_points(mapping, orbit: PeriodicOrbit):
    """All ell points of a periodic orbit, in visiting order."""
    pts = [(orbit.anchor.p, orbit.anchor.q)]
    p, q = np.array([orbit.anchor.p]), np.array([orbit.anchor.q])
    for _ in range(orbit.period_multiplier - 1):
        p, q = mapping.iterate(p, q)
        pts.append((p[0], q[0]))
    return np.array(pts)


# ---------------------------------------------------------------------------
# island geometry


@dataclass
class IslandData:
    center: PhaseSpacePoint
    omega0_center: float
    trace_center: float
    area_A: float = float("nan")
    I_c: float = float("nan")
    grid: dict = field(default=None, repr=False)


def fold_frequency(turns_per_period):
    """Fold turns per period into [0, 1/2] (stroboscopic aliasing)."""
    f = np.mod(np.abs(turns_per_period), 1.0)
    return np.minimum(f, 1.0 - f)


def island_center_and_frequency(params: SystemParams, p_hint: float = 1.0, steps: int = 256
                                ) -> IslandData:
    """Stable period-1 orbit near p_hint and its stroboscopic frequency."""
    mapping = StroboscopicMap(params, steps)
    guess = PhaseSpacePoint(p_hint * (1.0 + 0.25 * params.gamma), 0.0)
    orb = find_periodic_orbit(mapping, guess, 1)
    if not orb.stable:
        raise NoConvergence(f"period-1 orbit at {orb.anchor} is not elliptic")
    omega0 = math.acos(orb.trace / 2.0) / TAU
    return IslandData(orb.anchor, omega0, orb.trace)


def island_area(params: SystemParams, center: PhaseSpacePoint, grid_resolution: int = 64,
                n_iter: int = 2000, steps: int = 256, half_width_p: float = 1.0,
                offset: float = 1e-9, threshold: float = 1e-3, p_escape: float = 4.0
                ) -> IslandData:
    """Area of the connected regular region around an island center.

    Cells on a (p, q) grid, periodic in q, are classified lazily while a
    breadth-first flood fill grows from the center cell: a cell belongs to
    the island when its seed is regular (paired orbits stay within
    ``threshold``) and librates in the frame co-moving with the island.
    """
    n_p = n_q = int(grid_resolution)
    dp = 2.0 * half_width_p / n_p
    dq = TAU / n_q
    p_edges0 = center.p - half_width_p
    drift = 1.0 if center.p > 0 else -1.0
    status = np.full((n_p, n_q), -1, dtype=np.int64)
    ip0 = int((center.p - p_edges0) / dp)
    iq0 = int(((center.q + math.pi) % TAU) / dq)

    def cell_center(ip, iq):
        return p_edges0 + (ip + 0.5) * dp, -math.pi + (iq + 0.5) * dq

    def classify(cells):
        ps = np.array([cell_center(i, j)[0] for i, j in cells])
        qs = np.array([cell_center(i, j)[1] for i, j in cells])
        codes = K.island_membership(ps, qs, offset, n_iter, steps, params.gamma_plus,
                                    params.gamma_minus, p_escape, threshold, drift)
        for (i, j), c in zip(cells, codes):
            status[i, j] = c

    classify([(ip0, iq0)])
    if status[ip0, iq0] != 0:
        raise GridTooCoarse("center cell is not regular")
    frontier = [(ip0, iq0)]
    inside = {(ip0, iq0)}
    touched = False
    while frontier:
        nxt = []
        for i, j in frontier:
            for di, dj in ((1, 0), (-1, 0), (0, 1), (0, -1)):
                a, b = i + di, (j + dj) % n_q
                if not 0 <= a < n_p:
                    touched = True
                    continue
                if (a, b) not in inside and status[a, b] == -1:
                    nxt.append((a, b))
        nxt = sorted(set(nxt))
        if nxt:
            classify(nxt)
        frontier = [c for c in nxt if status[c] == 0 and c not in inside]
        inside.update(frontier)
    if touched:
        raise GridTooCoarse("regular region reaches the p-boundary of the grid")
    area = len(inside) * dp * dq
    omega = island_center_and_frequency(params, np.sign(center.p) or 1.0, steps)
    mask = np.zeros((n_p, n_q), bool)
    for c in inside:
        mask[c] = True
    return IslandData(center, omega.omega0_center, omega.trace_center, area, area / TAU,
                      grid={"status": status, "mask": mask, "dp": dp, "dq": dq,
                            "p0": p_edges0})


def orbit_action(p, q, center: PhaseSpacePoint, periodic_q: bool = True) -> float:
    """Enclosed action of an invariant curve from its sampled points.

    Points are sorted by polar angle about the center and closed into a
    polygon; action = area / (2*pi).
    """
    x = wrap_angle(np.asarray(q) - center.q) if periodic_q else np.asarray(q) - center.q
    y = np.asarray(p) - center.p
    order = np.argsort(np.arctan2(y, x))
    x, y = x[order], y[order]
    area = 0.5 * abs(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1)))
    return area / TAU


@dataclass
class RotationSample:
    I: float
    omega: float
    turns: float
    seed: PhaseSpacePoint

    def __iter__(self):
        yield self.I
        yield self.omega


def rotation_profile(params: SystemParams, center: PhaseSpacePoint, n_samples: int = 40,
                     r_max: float = 0.8, direction: float = 0.0, n_iter: int = 400,
                     steps: int = 256, chaos_iter: int = 1000, r_min: float | None = None
                     ) -> list[RotationSample]:
    """Rotation frequency and enclosed action along a ray from the center.

    ``direction`` is the ray angle in the (q, p) plane measured from +p.
    The frequency is the folded number of turns per period around the
    center, so it is directly comparable with arccos(trace/2)/tau.
    """
    r = np.linspace(r_min if r_min is not None else r_max / n_samples, r_max, n_samples)
    ps = center.p + r * math.cos(direction)
    qs = np.asarray(wrap_angle(center.q + r * math.sin(direction)), float)
    codes, _ = K.divergence_test(ps, qs, 1e-9, chaos_iter, steps, params.gamma_plus,
                                 params.gamma_minus, 4.0, 1e-3)
    keep = codes == 0
    ps, qs = ps[keep], qs[keep]
    if len(ps) == 0:
        return []
    turns = K.rotation_about(ps, qs, center.p, center.q, n_iter, steps, params.gamma_plus,
                             params.gamma_minus)
    P, Q = K.strobe_orbits(ps, qs, n_iter, steps, params.gamma_plus, params.gamma_minus, 4.0)
    out = []
    for i in range(len(ps)):
        I = orbit_action(P[i], Q[i], center)
        out.append(RotationSample(I, float(fold_frequency(turns[i])), float(turns[i]),
                                  PhaseSpacePoint(ps[i], qs[i])))
    return out


# ---------------------------------------------------------------------------
# separatrices


def _polygon_area(x, y):
    return 0.5 * abs(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1)))


def _trace_branch(mapping, h, v, lam, ell, targets, center, delta, n_fund, escape_radius):
    """Ordered points of one unstable-manifold branch from h up to its landing point.

    Seeds fill one fundamental domain h + delta*lam**u*v, u in [0, 1); the
    k-th image of seed u sits at manifold parameter k + u, which orders
    the whole branch.
    """
    u = np.arange(n_fund) / n_fund
    p = h[0] + delta * lam**u * v[0]
    q = h[1] + delta * lam**u * v[1]
    spacing = np.min([np.hypot(t[0] - h[0], float(mapping.dq(t[1], h[1]))) for t in targets])
    k_max = int(math.ceil(math.log(spacing / delta) / math.log(lam))) + 8
    pts_p, pts_q = [p], [q]
    for _ in range(k_max):
        p, q = mapping.iterate(p, q, ell)
        pts_p.append(p)
        pts_q.append(q)
    P = np.concatenate(pts_p)
    Q = np.concatenate(pts_q)
    rx = mapping.dq(Q, center[1])
    ry = P - center[0]
    if np.any(~np.isfinite(P)):
        raise ManifoldEscape("non-finite manifold points")
    dists = np.stack([np.hypot(P - t[0], mapping.dq(Q, t[1])) for t in targets])
    d_near = dists.min(axis=0)
    which = dists.argmin(axis=0)
    hr = math.hypot(float(mapping.dq(h[1], center[1])), h[0] - center[0])
    far = np.hypot(rx, ry) > escape_radius * hr
    rho = 0.3 * spacing
    hit = np.nonzero(d_near < rho)[0]
    esc = np.nonzero(far)[0]
    if len(hit) == 0 or (len(esc) and esc[0] < hit[0]):
        raise ManifoldEscape("unstable manifold left the island neighbourhood")
    i = hit[0]
    tgt = which[i]
    while i + 1 < len(P) and dists[tgt, i + 1] <= dists[tgt, i]:
        i += 1
    return P[: i + 1], Q[: i + 1], tgt


def _close_curve(mapping, arc_p, arc_q, ell, xpoints, center):
    """Assemble the ell images of one arc into a closed polygon; return its area."""
    arcs = []
    p, q = arc_p.copy(), arc_q.copy()
    for j in range(ell):
        if j:
            p, q = mapping.iterate(p, q, 1)
        arcs.append((p.copy(), q.copy()))

    def nearest(pt):
        d = [math.hypot(pt[0] - x[0], float(mapping.dq(pt[1], x[1]))) for x in xpoints]
        return int(np.argmin(d))

    start = {nearest((a[0][0], a[1][0])): k for k, a in enumerate(arcs)}
    if len(start) != ell:
        return None
    xs, ys = [], []
    cur = nearest((arcs[0][0][0], arcs[0][1][0]))
    for _ in range(ell):
        a = arcs[start[cur]]
        xs.append(mapping.dq(a[1], center[1]))
        ys.append(a[0] - center[0])
        cur = nearest((a[0][-1], a[1][-1]))
    if cur != nearest((arcs[0][0][0], arcs[0][1][0])):
        return None
    return _polygon_area(np.concatenate(xs), np.concatenate(ys))


def _sorted_area(mapping, arc_p, arc_q, ell, center):
    ps, qs = [arc_p], [arc_q]
    p, q = arc_p, arc_q
    for _ in range(ell - 1):
        p, q = mapping.iterate(p, q, 1)
        ps.append(p)
        qs.append(q)
    x = mapping.dq(np.concatenate(qs), center[1])
    y = np.concatenate(ps) - center[0]
    o = np.argsort(np.arctan2(y, x))
    return _polygon_area(x[o], y[o])


def separatrix_areas(params_or_map, chain: PeriodicOrbit, ell: int, center: PhaseSpacePoint,
                     delta: float = 1e-8, n_fund: int = 200, steps: int = 256,
                     escape_radius: float = 2.0):
    """Areas (S_outer, S_inner) enclosed by the outer and inner separatrices.

    Both branches of the unstable manifold of the hyperbolic chain point are
    traced until they land on a neighbouring hyperbolic point; the arcs are
    carried around the chain with the period map and closed into polygons.
    """
    mapping = (StroboscopicMap(params_or_map, steps) if isinstance(params_or_map, SystemParams)
               else params_or_map)
    if not chain.unstable:
        raise ValueError("separatrix tracing needs a hyperbolic chain orbit")
    h = np.array([chain.anchor.p, chain.anchor.q])
    c = (center.p, center.q)
    xpoints = orbit_points(mapping, chain)
    targets = [x for x in xpoints[1:]]
    w, vecs = np.linalg.eig(chain.monodromy)
    iu = int(np.argmax(np.abs(w)))
    lam = float(abs(w[iu]))
    v = np.real(vecs[:, iu])
    v = v / np.hypot(*v)
    areas = []
    for sign in (1.0, -1.0):
        P, Q, _ = _trace_branch(mapping, h, sign * v, lam, ell, targets, c, delta, n_fund,
                                escape_radius)
        a = _close_curve(mapping, P, Q, ell, xpoints, c)
        if a is None:
            a = _sorted_area(mapping, P, Q, ell, c)
        areas.append(a)
    s_out, s_in = max(areas), min(areas)
    return s_out, s_in


def bracket_areas(params: SystemParams, center: PhaseSpacePoint, s: int, ell: int,
                  direction: float = 0.0, r_max: float = 0.8, offset: float = 2e-3,
                  n_iter: int = 600, steps: int = 256):
    """Fallback: areas of invariant curves just outside/inside the s/ell chain.

    Bisects along a ray for the radii where the folded frequency equals
    s/ell +- offset and returns the enclosed areas (outer, inner).
    """
    target = s / ell

    def omega_at(r):
        p = np.array([center.p + r * math.cos(direction)])
        q = np.array([float(wrap_angle(center.q + r * math.sin(direction)))])
        return float(fold_frequency(K.rotation_about(p, q, center.p, center.q, n_iter, steps,
                                                     params.gamma_plus,
                                                     params.gamma_minus)[0])), p, q

    rs = np.linspace(r_max / 40, r_max, 40)
    om = np.array([omega_at(r)[0] for r in rs])
    w0 = om[0]
    sgn = 1.0 if target > w0 else -1.0

    def find(level):
        above = np.nonzero(sgn * (om - level) > 0)[0]
        if len(above) == 0:
            raise ManifoldEscape("rotation profile never reaches the resonance")
        hi = rs[above[0]]
        lo = rs[above[0] - 1] if above[0] else 0.0
        for _ in range(30):
            mid = 0.5 * (lo + hi)
            if sgn * (omega_at(mid)[0] - level) > 0:
                hi = mid
            else:
                lo = mid
        return lo

    areas = []
    for level in (target - sgn * offset, target + sgn * offset):
        r = find(level)
        _, p, q = omega_at(r)
        P, Q = K.strobe_orbits(p, q, n_iter, steps, params.gamma_plus, params.gamma_minus, 4.0)
        areas.append(TAU * orbit_action(P[0], Q[0], center))
    inner, outer = areas
    return max(outer, inner), min(outer, inner)


# ---------------------------------------------------------------------------
# resonance parameters


@dataclass
class ResonanceData:
    s: int
    ell: int
    S_outer: float
    S_inner: float
    I0: float
    m0: float
    V0: float
    trace_stable: float
    method: str = "manifold"
    extras: dict = field(default_factory=dict)

    def to_dict(self):
        d = {k: getattr(self, k) for k in ("s", "ell", "S_outer", "S_inner", "I0", "m0", "V0",
                                           "trace_stable", "method")}
        d.update(self.extras)
        return d

    @classmethod
    def from_dict(cls, d):
        known = ("s", "ell", "S_outer", "S_inner", "I0", "m0", "V0", "trace_stable", "method")
        return cls(**{k: d[k] for k in known if k in d},
                   extras={k: v for k, v in d.items() if k not in known})


def resonance_parameters(S_outer: float, S_inner: float, trace_stable: float, ell: int,
                         tau: float = TAU, s: int = 0, inv_mass_hint: float | None = None,
                         ) -> ResonanceData:
    """Pendulum parameters (I0, m0, V0) from separatrix areas and a monodromy trace.

    Uses 16*sqrt(2*m0*V0) = S_outer - S_inner and
    ell*sqrt(2*V0/m0)*ell*tau = arccos(trace/2) + 2*pi*k. Without a hint
    the smallest positive rotation angle is used; ``inv_mass_hint``
    (|d omega/dI| from a rotation profile) picks the branch whose implied
    libration frequency it matches best.
    """
    if not -2.0 < trace_stable < 2.0:
        raise ValueError("stable trace must lie in (-2, 2)")
    if not S_outer > S_inner > 0:
        raise ValueError("need S_outer > S_inner > 0")
    mv = 0.5 * ((S_outer - S_inner) / 16.0) ** 2  # m0 * V0
    base = math.acos(trace_stable / 2.0)
    candidates = sorted({base + TAU * k for k in range(3)} | {TAU * k - base for k in range(1, 3)})
    theta = candidates[0]
    if inv_mass_hint is not None and inv_mass_hint > 0:
        implied = ell * math.sqrt(2.0 * mv) * inv_mass_hint
        theta = min(candidates, key=lambda th: abs(th / (ell * tau) - implied))
    omega_res = theta / (ell * tau)
    v_over_m = omega_res**2 / (2.0 * ell**2)
    V0 = math.sqrt(mv * v_over_m)
    m0 = math.sqrt(mv / v_over_m)
    I0 = (S_outer + S_inner) / (4.0 * math.pi)
    return ResonanceData(s, ell, S_outer, S_inner, I0, m0, V0, trace_stable,
                         extras={"branch_angle": theta})


def locate_chain(params: SystemParams, center: PhaseSpacePoint, s: int, ell: int,
                 steps: int = 256, r_max: float = 0.75, n_scan: int = 60):
    """Find the hyperbolic and elliptic period-ell orbits of the s/ell chain.

    Scans the folded rotation profile along the +p ray for the s/ell
    crossing, then runs Newton from seeds around it. Returns
    (hyperbolic, elliptic, r_res); the hyperbolic anchor is the chain point
    nearest q = center.q.
    """
    mapping = StroboscopicMap(params, steps)
    target = s / ell
    rs = np.linspace(r_max / n_scan, r_max, n_scan)
    ps = center.p + rs
    qs = np.full_like(ps, center.q)
    om = fold_frequency(K.rotation_about(ps, qs, center.p, center.q, 300, steps,
                                         params.gamma_plus, params.gamma_minus))
    sgn = 1.0 if target > om[0] else -1.0
    idx = np.nonzero(sgn * (om - target) >= 0)[0]
    if len(idx) == 0:
        raise NoConvergence(f"rotation profile never reaches {s}/{ell}")
    r_res = rs[idx[0]]
    seeds = [(center.p + r, center.q) for r in np.linspace(r_res - 0.08, r_res + 0.08, 17)]
    seeds += [(center.p - r, center.q) for r in np.linspace(r_res - 0.08, r_res + 0.08, 9)]
    hyper, ellip = [], []
    for sp, sq in seeds:
        try:
            orb = find_periodic_orbit(mapping, PhaseSpacePoint(sp, sq), ell, center=center)
        except (NoConvergence, SingularJacobian):
            continue
        if orb.winding != s:
            continue
        d0 = math.hypot(orb.anchor.p - center.p, float(wrap_angle(orb.anchor.q - center.q)))
        if d0 < 1e-3:
            continue
        (hyper if orb.unstable else ellip).append(orb)
    if not hyper or not ellip:
        raise NoConvergence(f"could not find both chain orbits of {s}/{ell}")

    def best(orbs):
        # prefer chain points on the +p side of the center, nearest q = center.q
        cands = []
        for o in orbs:
            for pt in orbit_points(mapping, o):
                cands.append((abs(float(wrap_angle(pt[1] - center.q))), -pt[0], pt, o))
        cands.sort(key=lambda c: (round(c[0], 6), c[1]))
        _, _, pt, o = cands[0]
        return find_periodic_orbit(mapping, PhaseSpacePoint(*pt), ell, center=center)

    return best(hyper), best(ellip), float(r_res)


def inverse_mass_from_profile(profile: list[RotationSample], I0: float, window: float = 0.06):
    """|d omega / dI| near I0 from a straight-line fit to nearby profile samples."""
    pts = [(r.I, r.omega) for r in profile if abs(r.I - I0) < window]
    if len(pts) < 3:
        return None
    I, w = np.array(pts).T
    slope = np.polyfit(I, w, 1)[0]
    return abs(float(slope))


def frequency_curve(profile: list[RotationSample], deg: int = 2, I_max: float | None = None):
    """Polynomial fit Omega(I) of the unaliased rotation frequency.

    Unlike ``omega`` this keeps the full turns per period, which is the
    spacing that shows up in the quasienergy ladder of the island states.
    """
    pts = [(r.I, abs(r.turns)) for r in profile if I_max is None or r.I <= I_max]
    if len(pts) <= deg:
        raise ValueError("not enough profile samples for the fit")
    I, w = np.array(pts).T
    return np.polynomial.Polynomial.fit(I, w, deg).convert()


def extract_resonance(params: SystemParams, s: int, ell: int, island: IslandData | None = None,
                      steps: int = 256, n_fund: int = 200) -> ResonanceData:
    """Full classical pipeline: center, chain, monodromy, separatrices, parameters."""
    if island is None:
        island = island_center_and_frequency(params, 1.0, steps)
    center = island.center
    hyper, ellip, r_res = locate_chain(params, center, s, ell, steps)
    method = "manifold"
    try:
        s_out, s_in = separatrix_areas(params, hyper, ell, center, n_fund=n_fund, steps=steps)
    except ManifoldEscape:
        s_out, s_in = bracket_areas(params, center, s, ell, steps=steps)
        method = "bracket"
    I0 = (s_out + s_in) / (4 * math.pi)
    profile = rotation_profile(params, center, n_samples=40, r_max=max(0.05, r_res - 0.02),
                               steps=steps, n_iter=300)
    hint = inverse_mass_from_profile(profile, I0, window=0.5 * I0)
    res = resonance_parameters(s_out, s_in, ellip.trace, ell, s=s, inv_mass_hint=hint)
    res.method = method
    res.extras.update({
        "gamma_plus": params.gamma_plus, "gamma_minus": params.gamma_minus,
        "x_point_p": hyper.anchor.p, "x_point_q": hyper.anchor.q, "trace_unstable": hyper.trace,
        "o_point_p": ellip.anchor.p, "o_point_q": ellip.anchor.q,
        "center_p": center.p, "center_q": center.q, "omega0": island.omega0_center,
        "inv_mass_hint": hint,
    })
    return res
