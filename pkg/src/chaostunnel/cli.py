"""Command-line front end.

Every subcommand writes CSV data plus one ``manifest.json`` per output
directory. Exit status: 0 success, 2 configuration error, 3 numerical failure.
"""
from __future__ import annotations

import argparse
import configparser
import json
import math
import os
import sys
import time

import numpy as np

from . import __version__

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3


class ConfigError(ValueError):
    pass


class StageError(RuntimeError):
    def __init__(self, stage, exc):
        super().__init__(f"{type(exc).__name__}: {exc}")
        self.stage = stage


def _stage(name, fn, *a, **kw):
    try:
        return fn(*a, **kw)
    except (ConfigError, OSError):
        raise
    except Exception as exc:  # tagged and re-raised for the exit-code contract
        raise StageError(name, exc) from exc


# ---------------------------------------------------------------------------
# argument handling


def _range(text):
    parts = [p for p in text.replace(",", ":").split(":") if p.strip()]
    if len(parts) not in (2, 3):
        raise argparse.ArgumentTypeError("expected MIN:MAX[:COUNT]")
    lo, hi = float(parts[0]), float(parts[1])
    n = int(parts[2]) if len(parts) == 3 else 20
    if not (hi > lo > 0 and n >= 2):
        raise argparse.ArgumentTypeError("need 0 < MIN < MAX and COUNT >= 2")
    return lo, hi, n


def _chain(text):
    try:
        s, ell = (int(x) for x in text.split("/"))
    except ValueError:
        raise argparse.ArgumentTypeError("expected S/ELL, e.g. 3/7") from None
    if not 0 < s < ell:
        raise argparse.ArgumentTypeError("need 0 < S < ELL")
    return s, ell


def _grid(text):
    try:
        a, b = (int(x) for x in text.lower().split("x"))
    except ValueError:
        raise argparse.ArgumentTypeError("expected NPxNQ, e.g. 200x200") from None
    return a, b


def _pair(text):
    a, b = (float(x) for x in text.replace(",", ":").split(":"))
    return a, b


# option name -> (type, default); shared flags are added to every subcommand
COMMON = {
    "gamma": (float, None),
    "inv_hbar": (float, None),
    "inv_hbar_range": (_range, None),
    "sigma_filter": (float, 7e-3),
    "p_bound": (float, 4.0),
    "steps": (int, 512),
    "out": (str, "out"),
    "threads": (int, 1),
}

SPECIFIC = {
    "poincare": {"seeds": (int, 60), "n_iter": (int, 500), "p_range": (_pair, (-2.2, 2.2))},
    "resonance": {"chain": (_chain, (3, 7))},
    "floquet": {},
    "splittings": {"audit": (bool, False)},
    "rat": {"chain": (_chain, (3, 7)), "inner": (_chain, None), "resonance_file": (str, None),
            "inner_file": (str, None), "I_c": (float, None), "area": (float, None),
            "quantum": (bool, False), "audit": (bool, False)},
    "husimi": {"state": (int, None), "eps": (float, None), "grid": (_grid, (200, 200)),
               "p_range": (_pair, (-2.2, 2.2)), "q_range": (_pair, (-math.pi, math.pi))},
    "leveldyn": {},
    "pn": {"area": (float, None), "omega": (float, 1.0)},
}

HELP = {
    "poincare": "stroboscopic section as a point cloud",
    "resonance": "classical s/ell resonance parameters (JSON)",
    "floquet": "quasienergies, overlaps and eigenvectors at one 1/hbar",
    "splittings": "doublet splittings over a 1/hbar grid",
    "rat": "resonance-assisted prediction over a 1/hbar grid",
    "husimi": "Husimi distribution of one Floquet state",
    "leveldyn": "overlap-filtered level dynamics around the doublet",
    "pn": "island-size estimate of the splittings",
}


def build_parser():
    ap = argparse.ArgumentParser(prog="chaostunnel", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)
    for name, extra in SPECIFIC.items():
        sp = sub.add_parser(name, help=HELP[name])
        sp.add_argument("--config", help="key = value file ([common] and [%s] sections)" % name)
        sp.add_argument("--plot", action="store_true", help="also render PNG figures")
        for key, (tp, _) in {**COMMON, **extra}.items():
            flag = "--" + key.replace("_", "-")
            if key == "I_c":
                flag = "--I-c"
            if tp is bool:
                sp.add_argument(flag, dest=key, action="store_const", const=True, default=None)
            else:
                sp.add_argument(flag, dest=key, type=tp, default=None)
    return ap


def _coerce(key, tp, raw):
    if tp is bool:
        return raw.strip().lower() in ("1", "true", "yes", "on")
    try:
        return tp(raw.strip())
    except (ValueError, argparse.ArgumentTypeError) as exc:
        raise ConfigError(f"config key {key!r}: {exc}") from None


def effective_config(args) -> dict:
    """Defaults, then the config file, then explicit command-line flags."""
    spec = {**COMMON, **SPECIFIC[args.command]}
    cfg = {k: d for k, (_, d) in spec.items()}
    if args.config:
        cp = configparser.ConfigParser()
        cp.optionxform = str
        if not cp.read(args.config):
            raise ConfigError(f"cannot read config file {args.config}")
        for section in ("common", args.command):
            if not cp.has_section(section):
                continue
            for key, raw in cp.items(section):
                k = key.replace("-", "_")
                if k not in spec:
                    raise ConfigError(f"unknown key {key!r} in [{section}]")
                cfg[k] = _coerce(k, spec[k][0], raw)
    for k in spec:
        v = getattr(args, k, None)
        if v is not None:
            cfg[k] = v
    if cfg["gamma"] is not None and cfg["gamma"] < 0:
        raise ConfigError("gamma must be non-negative")
    if cfg["threads"] < 1:
        raise ConfigError("threads must be >= 1")
    if cfg["steps"] < 128:
        raise ConfigError("steps must be >= 128")
    if not 0 < cfg["sigma_filter"] < 1:
        raise ConfigError("sigma-filter must lie in (0, 1)")
    return cfg


def _need(cfg, *keys):
    for k in keys:
        if cfg.get(k) is None:
            raise ConfigError(f"missing required option --{k.replace('_', '-')}")


def _grid_points(cfg):
    if cfg["inv_hbar_range"] is not None:
        return cfg["inv_hbar_range"]
    if cfg["inv_hbar"] is not None:
        return cfg["inv_hbar"], cfg["inv_hbar"], 1
    raise ConfigError("give --inv-hbar or --inv-hbar-range")


def _sweep_config(cfg):
    from .sweep import SweepConfig

    lo, hi, n = _grid_points(cfg)
    try:
        return SweepConfig(cfg["gamma"], lo, hi, n, cfg["sigma_filter"], cfg["p_bound"],
                           cfg["steps"])
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def _jsonable(cfg):
    return {k: (list(v) if isinstance(v, tuple) else v) for k, v in cfg.items()}


# ---------------------------------------------------------------------------
# subcommands


def cmd_poincare(cfg, out, plot):
    from . import plotting
    from .classical import poincare_section
    from .core import SystemParams
    from .sweep import update_manifest, write_csv

    _need(cfg, "gamma")
    params = SystemParams.symmetric(cfg["gamma"])
    lo, hi = cfg["p_range"]
    n = cfg["seeds"]
    ps = np.linspace(lo, hi, n)
    seeds = [(p, 0.0) for p in ps] + [(p, math.pi - 1e-9) for p in ps[::2]]
    orbits = _stage("poincare", poincare_section, params, seeds, cfg["n_iter"])
    rows = []
    for o in orbits:
        for k, (p, q) in enumerate(zip(o.p, o.q)):
            rows.append((o.seed.p, o.seed.q, k, p, q, o.classification))
    write_csv(os.path.join(out, "poincare.csv"),
              ["seed_p", "seed_q", "iter", "p", "q", "class"], rows)
    info = {"columns": ["seed_p", "seed_q", "iter", "p", "q", "class"], "seeds": len(seeds),
            "n_iter": cfg["n_iter"]}
    update_manifest(out, "poincare.csv", info)
    if plot:
        a = np.array([(r[3], r[4]) for r in rows])
        plotting.poincare(os.path.join(out, "poincare.png"), a[:, 0], a[:, 1],
                          [r[5] for r in rows], f"gamma = {cfg['gamma']}")
        update_manifest(out, "poincare.png", {"kind": "figure", "source": "poincare.csv"})


def _resonance(gamma, chain, steps=256):
    from .classical import extract_resonance, island_center_and_frequency
    from .core import SystemParams

    params = SystemParams.symmetric(gamma)
    island = _stage("island-center", island_center_and_frequency, params)
    return _stage("resonance", extract_resonance, params, chain[0], chain[1], island, steps)


def _island(gamma, resolution=64, n_iter=2000):
    from .classical import island_area, island_center_and_frequency
    from .core import SystemParams

    params = SystemParams.symmetric(gamma)
    island = _stage("island-center", island_center_and_frequency, params)
    return _stage("island-area", island_area, params, island.center, resolution, n_iter)


def cmd_resonance(cfg, out, plot):
    from .sweep import update_manifest

    _need(cfg, "gamma")
    res = _resonance(cfg["gamma"], cfg["chain"])
    name = f"resonance_{res.s}_{res.ell}.json"
    with open(os.path.join(out, name), "w") as fh:
        json.dump(res.to_dict(), fh, indent=2)
    update_manifest(out, name, {"kind": "ResonanceData", "method": res.method})


def _spectrum(cfg):
    from .core import SystemParams
    from .floquet import MomentumBasis, build_propagator, diagonalize

    hb = 1.0 / cfg["inv_hbar"]
    params = SystemParams.symmetric(cfg["gamma"], hb)
    basis = MomentumBasis.for_bound(hb, cfg["p_bound"])
    U = _stage("propagator", build_propagator, params, basis, cfg["steps"])
    return _stage("diagonalize", diagonalize, U, basis, params,
                  steps_per_period=cfg["steps"])


def _probe(gamma):
    from .classical import island_center_and_frequency
    from .core import PhaseSpacePoint, SystemParams

    if gamma == 0:
        return PhaseSpacePoint(1.0, 0.0)
    return _stage("island-center", island_center_and_frequency,
                  SystemParams.symmetric(gamma)).center


def cmd_floquet(cfg, out, plot):
    from .phasespace import CoherentState, overlaps, select_doublet
    from .sweep import update_manifest, write_csv

    _need(cfg, "gamma", "inv_hbar")
    spec = _spectrum(cfg)
    c = _probe(cfg["gamma"])
    cs = CoherentState(c.p, c.q, spec.hbar)
    sig = overlaps(spec, cs)
    d = select_doublet(spec, cs)
    rows = [(i, e, s, int(p)) for i, (e, s, p) in
            enumerate(zip(spec.quasienergies, sig, spec.parity))]
    write_csv(os.path.join(out, "spectrum.csv"),
              ["index", "quasienergy", "sigma_overlap", "parity"], rows)
    key = f"g{cfg['gamma']}_h{spec.hbar:.17g}_n{spec.basis.n_max}_s{cfg['steps']}"
    np.savez_compressed(os.path.join(out, "eigenvectors.npz"), **{
        "key": key, "vectors": spec.eigenvectors, "n": spec.basis.n,
        "quasienergies": spec.quasienergies})
    update_manifest(out, "spectrum.csv", {
        "gamma": cfg["gamma"], "hbar": spec.hbar, "n_max": spec.basis.n_max,
        "steps_per_period": cfg["steps"], "doublet": [d.index_plus, d.index_minus],
        "delta_eps0": d.delta, "ambiguous": d.ambiguous})
    update_manifest(out, "eigenvectors.npz", {"key": key, "layout": "columns, n ascending"})


def _persist_sweep(out, recs, config, levels=None):
    from .sweep import level_dynamics_to_csv, persist, update_manifest

    persist(recs, out, config)
    if levels is not None:
        level_dynamics_to_csv(os.path.join(out, "leveldyn.csv"), levels)
        update_manifest(out, "leveldyn.csv", {
            "columns": ["inv_hbar", "rel_eps", "sigma", "parity"],
            "sigma_filter": config.sigma_filter})


def cmd_splittings(cfg, out, plot):
    from . import plotting
    from .sweep import run_sweep, update_manifest

    _need(cfg, "gamma")
    config = _sweep_config(cfg)
    recs, _ = _stage("sweep", run_sweep, config, cfg["threads"], bool(cfg["audit"]))
    _persist_sweep(out, recs, config)
    if plot:
        plotting.splittings(os.path.join(out, "splittings.png"), [r.inv_hbar for r in recs],
                            [r.delta_eps0 for r in recs], title=f"gamma = {config.gamma}")
        update_manifest(out, "splittings.png", {"kind": "figure", "source": "splittings.csv"})


def cmd_leveldyn(cfg, out, plot):
    from . import plotting
    from .sweep import run_sweep, update_manifest

    _need(cfg, "gamma")
    config = _sweep_config(cfg)
    recs, levels = _stage("sweep", run_sweep, config, cfg["threads"])
    _persist_sweep(out, recs, config, levels)
    if plot:
        plotting.level_dynamics(os.path.join(out, "leveldyn.png"), levels,
                                title=f"gamma = {config.gamma}, sigma >= {config.sigma_filter}")
        update_manifest(out, "leveldyn.png", {"kind": "figure", "source": "leveldyn.csv"})


def _load_resonance(path):
    from .classical import ResonanceData

    try:
        with open(path) as fh:
            return ResonanceData.from_dict(json.load(fh))
    except (OSError, KeyError, TypeError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot load resonance file {path}: {exc}") from None


def cmd_rat(cfg, out, plot):
    from . import plotting
    from .sweep import SplittingRecord, rat_overlay, records_to_csv, run_sweep, update_manifest

    _need(cfg, "gamma")
    config = _sweep_config(cfg)
    res = (_load_resonance(cfg["resonance_file"]) if cfg["resonance_file"]
           else _resonance(cfg["gamma"], cfg["chain"]))
    inner = None
    if cfg["inner_file"]:
        inner = _load_resonance(cfg["inner_file"])
    elif cfg["inner"] is not None:
        inner = _resonance(cfg["gamma"], cfg["inner"])
    area = cfg["area"]
    I_c = cfg["I_c"]
    if I_c is None or area is None:
        isl = _island(cfg["gamma"])
        area = isl.area_A if area is None else area
        I_c = isl.I_c if I_c is None else I_c
    if cfg["quantum"]:
        recs, _ = _stage("sweep", run_sweep, config, cfg["threads"], bool(cfg["audit"]))
    else:
        recs = [SplittingRecord(float(x), math.nan) for x in config.inv_hbar]
    rows = _stage("rat", rat_overlay, recs, res, I_c, area, inner)
    records_to_csv(os.path.join(out, "rat.csv"), rows)
    info = {"resonance": res.to_dict(), "I_c": I_c, "area_A": area, "sweep": config.__dict__}
    if inner is not None:
        from .rat import pole_position, two_resonance_threshold

        info["inner"] = inner.to_dict()
        info["crossover_inv_hbar"] = two_resonance_threshold(inner, res)
        info["pole_inv_hbar"] = pole_position(inner)
    update_manifest(out, "rat.csv", info)
    if plot:
        plotting.splittings(os.path.join(out, "rat.png"), [r.inv_hbar for r in rows],
                            [r.delta_eps0 for r in rows], rows, f"gamma = {config.gamma}")
        update_manifest(out, "rat.png", {"kind": "figure", "source": "rat.csv"})


def cmd_husimi(cfg, out, plot):
    from . import plotting
    from .floquet import circle_distance
    from .phasespace import CoherentState, husimi, select_doublet
    from .sweep import update_manifest, write_csv

    _need(cfg, "gamma", "inv_hbar")
    spec = _spectrum(cfg)
    if cfg["state"] is not None:
        idx = cfg["state"]
        if not 0 <= idx < len(spec):
            raise ConfigError(f"state index outside 0..{len(spec) - 1}")
    elif cfg["eps"] is not None:
        idx = int(np.argmin(circle_distance(spec.quasienergies, cfg["eps"], spec.hbar)))
    else:
        c = _probe(cfg["gamma"])
        idx = select_doublet(spec, CoherentState(c.p, c.q, spec.hbar)).index_plus
    n_p, n_q = cfg["grid"]
    field = husimi(spec.eigenvectors[:, idx], spec.basis, cfg["p_range"], cfg["q_range"],
                   (n_p, n_q))
    rows = [[p, *row] for p, row in zip(field.p, field.intensity)]
    write_csv(os.path.join(out, "husimi.csv"), ["p\\q", *[f"{q:.17g}" for q in field.q]], rows)
    update_manifest(out, "husimi.csv", {
        "state": idx, "quasienergy": float(spec.quasienergies[idx]),
        "window": {"p": list(cfg["p_range"]), "q": list(cfg["q_range"])},
        "grid": [n_p, n_q], "normalization": field.normalization,
        "layout": "rows p, columns q (header)"})
    if plot:
        plotting.husimi(os.path.join(out, "husimi.png"), field,
                        f"eps = {spec.quasienergies[idx]:.6f}")
        update_manifest(out, "husimi.png", {"kind": "figure", "source": "husimi.csv"})


def cmd_pn(cfg, out, plot):
    from . import plotting
    from .rat import pn_estimate
    from .sweep import update_manifest, write_csv

    area = cfg["area"]
    if area is None:
        _need(cfg, "gamma")
        area = _island(cfg["gamma"]).area_A
    lo, hi, n = _grid_points(cfg)
    xs = np.linspace(lo, hi, n)
    rows = []
    for x in xs:
        hb = 1.0 / x
        N = area / (2 * math.pi * hb)
        if N < 1:
            rows.append((x, N, math.nan, "none"))
            continue
        v, br = pn_estimate(area, hb, cfg["omega"])
        rows.append((x, N, v, br))
    write_csv(os.path.join(out, "pn.csv"), ["inv_hbar", "N", "splitting", "branch"], rows)
    update_manifest(out, "pn.csv", {"area_A": area, "omega": cfg["omega"]})
    if plot:
        plotting.curve(os.path.join(out, "pn.png"), xs, {"PN": [r[2] for r in rows]})
        update_manifest(out, "pn.png", {"kind": "figure", "source": "pn.csv"})


COMMANDS = {
    "poincare": cmd_poincare, "resonance": cmd_resonance, "floquet": cmd_floquet,
    "splittings": cmd_splittings, "rat": cmd_rat, "husimi": cmd_husimi,
    "leveldyn": cmd_leveldyn, "pn": cmd_pn,
}


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    try:
        cfg = effective_config(args)
        out = cfg["out"]
        os.makedirs(out, exist_ok=True)
        from .sweep import update_manifest

        t0 = time.time()
        COMMANDS[args.command](cfg, out, args.plot)
        update_manifest(out, None, None, {"command": args.command, "effective": _jsonable(cfg),
                         "elapsed_s": round(time.time() - t0, 3)})
    except ConfigError as exc:
        print(f"[{args.command}:config] {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except StageError as exc:
        print(f"[{args.command}:{exc.stage}] {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except OSError as exc:
        print(f"[{args.command}:io] {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
