"""Parameter sweeps over 1/hbar, convergence audits, RAT overlays and persistence."""
from __future__ import annotations

import csv
import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, fields

import numpy as np

from . import __version__
from .classical import ResonanceData, island_center_and_frequency
from .core import PhaseSpacePoint, SystemParams
from .floquet import MomentumBasis, build_propagator, circle_offset, diagonalize
from .phasespace import CoherentState, coherent_vector, overlaps, select_doublet
from .rat import pn_estimate, predict_single, predict_switching

CSV_VERSION = 1


@dataclass
class SweepConfig:
    """Grid and numerics of a 1/hbar sweep at fixed (symmetric) coupling."""

    gamma: float
    inv_hbar_min: float = 5.0
    inv_hbar_max: float = 45.0
    count: int = 200
    sigma_filter: float = 7e-3
    p_bound: float = 4.0
    steps_per_period: int = 512
    probe_p: float | None = None
    probe_q: float = 0.0

    def __post_init__(self):
        if self.gamma < 0:
            raise ValueError("gamma must be non-negative")
        if self.count < 1 or (self.count > 1 and not self.inv_hbar_max > self.inv_hbar_min):
            raise ValueError("inv_hbar grid must be strictly increasing")
        if self.inv_hbar_min <= 0:
            raise ValueError("inv_hbar must be positive")
        if not 0 < self.sigma_filter < 1:
            raise ValueError("sigma_filter must lie in (0, 1)")
        if self.steps_per_period < 128:
            raise ValueError("steps_per_period must be >= 128")
        if self.p_bound <= 0:
            raise ValueError("p_bound must be positive")

    @property
    def inv_hbar(self) -> np.ndarray:
        if self.count == 1:
            return np.array([float(self.inv_hbar_min)])
        return np.linspace(self.inv_hbar_min, self.inv_hbar_max, self.count)

    @classmethod
    def from_points(cls, gamma, points, **kw):
        """Config for an explicit grid (kept via min/max/count when uniform)."""
        points = np.asarray(points, float)
        cfg = cls(gamma, float(points[0]), float(points[-1]), len(points), **kw)
        if not np.allclose(cfg.inv_hbar, points, rtol=0, atol=1e-12):
            raise ValueError("explicit grids must be uniform")
        return cfg

    def probe(self) -> PhaseSpacePoint:
        if self.probe_p is not None:
            return PhaseSpacePoint(self.probe_p, self.probe_q)
        if self.gamma == 0:
            return PhaseSpacePoint(1.0, 0.0)
        return island_center_and_frequency(SystemParams.symmetric(self.gamma)).center


@dataclass
class SplittingRecord:
    inv_hbar: float
    delta_eps0: float
    eps_plus: float = math.nan
    eps_minus: float = math.nan
    sigma_plus: float = math.nan
    sigma_minus: float = math.nan
    sigma_third: float = math.nan
    n_retained: int = 0
    n_max: int = 0
    steps_per_period: int = 0
    ambiguous: bool = False
    certified: bool | None = None
    drift: float = math.nan
    error: str = ""


@dataclass
class LevelDynamicsRecord:
    inv_hbar: float
    rel_eps: np.ndarray
    sigma: np.ndarray
    parity: np.ndarray = field(default=None)

    def __post_init__(self):
        if self.parity is None:
            self.parity = np.zeros(len(self.sigma), int)


@dataclass
class AuditReport:
    delta: float
    delta_nmax: float
    delta_steps: float
    drift: float
    certified: bool
    n_max: int
    steps_per_period: int


def _doublet_delta(params, basis, steps, probe: PhaseSpacePoint):
    spec = diagonalize(build_propagator(params, basis, steps), basis, params,
                       steps_per_period=steps)
    return select_doublet(spec, CoherentState(probe.p, probe.q, basis.hbar)).delta


def convergence_audit(params: SystemParams, basis: MomentumBasis, probe: PhaseSpacePoint,
                      steps_per_period: int = 512, delta: float | None = None,
                      tol: float = 0.05) -> AuditReport:
    """Recompute the doublet splitting with n_max +25% and with twice the steps.

    The splitting is certified when both relative drifts stay below ``tol``.
    """
    if delta is None:
        delta = _doublet_delta(params, basis, steps_per_period, probe)
    big = MomentumBasis(basis.hbar, int(math.ceil(1.25 * basis.n_max)))
    d_n = _doublet_delta(params, big, steps_per_period, probe)
    d_s = _doublet_delta(params, basis, 2 * steps_per_period, probe)
    ref = max(abs(delta), abs(d_n), abs(d_s))
    drift = 0.0 if ref == 0 else max(abs(d_n - delta), abs(d_s - delta)) / ref
    return AuditReport(delta, d_n, d_s, drift, drift < tol, basis.n_max, steps_per_period)


def analyze_point(config: SweepConfig, inv_hbar: float, probe: PhaseSpacePoint,
                  audit: bool = False):
    """Splitting record and filtered level-dynamics row for one grid point."""
    hb = 1.0 / inv_hbar
    params = SystemParams.symmetric(config.gamma, hb)
    basis = MomentumBasis.for_bound(hb, config.p_bound)
    steps = config.steps_per_period
    try:
        spec = diagonalize(build_propagator(params, basis, steps), basis, params,
                           steps_per_period=steps)
        cs = CoherentState(probe.p, probe.q, hb)
        sig = overlaps(spec, coherent_vector(basis, cs))
        d = select_doublet(spec, cs)
    except (ValueError, ArithmeticError, np.linalg.LinAlgError) as exc:
        rec = SplittingRecord(inv_hbar, math.nan, n_max=basis.n_max, steps_per_period=steps,
                              error=f"{type(exc).__name__}: {exc}")
        return rec, LevelDynamicsRecord(inv_hbar, np.empty(0), np.empty(0))
    keep = np.nonzero(sig >= config.sigma_filter)[0]
    rel = circle_offset(spec.quasienergies[keep], d.center(hb), hb)
    level = LevelDynamicsRecord(inv_hbar, rel, sig[keep], spec.parity[keep])
    rec = SplittingRecord(inv_hbar, d.delta, d.eps_plus, d.eps_minus, d.sigma_plus,
                          d.sigma_minus, d.sigma_third, len(keep), basis.n_max, steps,
                          d.ambiguous)
    if audit:
        rep = convergence_audit(params, basis, probe, steps, d.delta)
        rec.certified, rec.drift = rep.certified, rep.drift
    return rec, level


def run_sweep(config: SweepConfig, threads: int = 1, audit: bool = False,
              points=None):
    """Evaluate every grid point; output order follows the grid regardless of threads."""
    grid = config.inv_hbar if points is None else np.asarray(points, float)
    probe = config.probe()
    task = lambda x: analyze_point(config, float(x), probe, audit)
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            out = list(pool.map(task, grid))
    else:
        out = [task(x) for x in grid]
    return [o[0] for o in out], [o[1] for o in out]


def splitting_sweep(config: SweepConfig, threads: int = 1, audit: bool = False):
    return run_sweep(config, threads, audit)[0]


def level_dynamics(config: SweepConfig, threads: int = 1):
    return run_sweep(config, threads)[1]


@dataclass
class OverlayRow:
    inv_hbar: float
    delta_eps0: float
    certified: bool | None
    ambiguous: bool
    k_c: int
    V_eff: float
    mean: float
    band_lo: float
    band_hi: float
    mechanism: str
    pn: float
    pn_branch: str
    error: str = ""

    @property
    def in_band(self) -> bool:
        return self.band_lo <= self.delta_eps0 <= self.band_hi


def rat_overlay(records, resonance: ResonanceData, I_c: float, area_A: float | None = None,
                inner: ResonanceData | None = None, omega_prefactor: float = 1.0):
    """Attach RAT and PN predictions to quantum splitting records.

    With ``inner`` given, the prediction switches from a single step via
    ``resonance`` to the two-resonance chain inner -> resonance at the
    validity boundary of the latter.
    """
    rows = []
    for r in records:
        hb = 1.0 / r.inv_hbar
        err = r.error
        try:
            if inner is None:
                p = predict_single(resonance, I_c, hb)
            else:
                p = predict_switching(inner, resonance, I_c, hb)
        except (ValueError, ArithmeticError) as exc:
            err = err or f"{type(exc).__name__}: {exc}"
            rows.append(OverlayRow(r.inv_hbar, r.delta_eps0, r.certified, r.ambiguous, 0,
                                   math.nan, math.nan, math.nan, math.nan, "none", math.nan,
                                   "", err))
            continue
        pn, branch = (math.nan, "")
        if area_A is not None and area_A / (2 * math.pi * hb) >= 1:
            pn, branch = pn_estimate(area_A, hb, omega_prefactor)
        rows.append(OverlayRow(r.inv_hbar, r.delta_eps0, r.certified, r.ambiguous, p.k_c,
                               p.V_eff, p.mean_split, p.band_lo, p.band_hi, p.mechanism, pn,
                               branch, err))
    return rows


def band_fraction(rows, lo=-math.inf, hi=math.inf) -> float:
    """Fraction of certified, unambiguous rows in [lo, hi] inside the band."""
    sel = [r for r in rows if lo <= r.inv_hbar <= hi and r.certified is not False
           and not r.ambiguous and not r.error and np.isfinite(r.mean)]
    if not sel:
        return math.nan
    return sum(r.in_band for r in sel) / len(sel)


# ---------------------------------------------------------------------------
# persistence


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if v is None:
        return ""
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".17g")
    return str(v)


def write_csv(path, header, rows):
    try:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(header)
            for row in rows:
                w.writerow([_fmt(v) for v in row])
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc}") from exc


def read_csv(path):
    try:
        with open(path, newline="") as fh:
            rd = csv.reader(fh)
            header = next(rd)
            return header, [row for row in rd]
    except OSError as exc:
        raise OSError(f"cannot read {path}: {exc}") from exc


def _parse(tp, s):
    if s == "":
        return None if "None" in str(tp) else (math.nan if "float" in str(tp) else s)
    t = str(tp)
    if "bool" in t:
        return s == "1"
    if "int" in t and "float" not in t:
        return int(s)
    if "float" in t:
        return float(s)
    return s


def records_to_csv(path, records):
    cls = type(records[0])
    names = [f.name for f in fields(cls)]
    write_csv(path, names, ([getattr(r, n) for n in names] for r in records))


def records_from_csv(path, cls):
    header, rows = read_csv(path)
    types = {f.name: f.type for f in fields(cls)}
    return [cls(**{h: _parse(types[h], v) for h, v in zip(header, row)}) for row in rows]


def level_dynamics_to_csv(path, levels):
    rows = []
    for rec in levels:
        for e, s, p in zip(rec.rel_eps, rec.sigma, rec.parity):
            rows.append((rec.inv_hbar, e, s, int(p)))
    write_csv(path, ["inv_hbar", "rel_eps", "sigma", "parity"], rows)


def level_dynamics_from_csv(path):
    _, rows = read_csv(path)
    grouped: dict[float, list] = {}
    for ih, e, s, p in rows:
        grouped.setdefault(float(ih), []).append((float(e), float(s), int(p)))
    out = []
    for ih, vals in grouped.items():
        a = np.array(vals)
        out.append(LevelDynamicsRecord(ih, a[:, 0], a[:, 1], a[:, 2].astype(int)))
    return out


MANIFEST = "manifest.json"


def update_manifest(directory, filename, info: dict | None = None, config: dict | None = None):
    """Register a data file (and/or configuration) in the directory's single manifest."""
    path = os.path.join(directory, MANIFEST)
    man = {"version": __version__, "csv_version": CSV_VERSION, "config": {}, "files": {}}
    if os.path.exists(path):
        with open(path) as fh:
            man = json.load(fh)
    if config:
        man["config"].update(config)
    if filename is not None:
        man["files"][filename] = info or {}
    with open(path, "w") as fh:
        json.dump(man, fh, indent=2, sort_keys=True, default=_json_default)
    return path


def _json_default(o):
    if isinstance(o, np.integer):
        return int(o)
    if isinstance(o, np.floating):
        return float(o)
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(type(o).__name__)


def persist(records, directory, config: SweepConfig, name: str = "splittings.csv",
            extra: dict | None = None):
    """Write splitting records plus a manifest entry with per-point provenance."""
    os.makedirs(directory, exist_ok=True)
    records_to_csv(os.path.join(directory, name), records)
    info = {
        "kind": type(records[0]).__name__,
        "rows": len(records),
        "points": [{"inv_hbar": r.inv_hbar, "n_max": getattr(r, "n_max", None),
                    "steps_per_period": getattr(r, "steps_per_period", None),
                    "certified": getattr(r, "certified", None),
                    "drift": getattr(r, "drift", None)} for r in records],
    }
    if extra:
        info.update(extra)
    return update_manifest(directory, name, info, {"sweep": asdict(config)})


def load(directory, name: str = "splittings.csv", cls=SplittingRecord):
    with open(os.path.join(directory, MANIFEST)) as fh:
        man = json.load(fh)
    cfg = SweepConfig(**man["config"]["sweep"]) if "sweep" in man["config"] else None
    return records_from_csv(os.path.join(directory, name), cls), cfg, man
