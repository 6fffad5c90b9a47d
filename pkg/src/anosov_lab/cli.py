"""
Experiment runner.

    anosov-lab <kind> --config run.json [--out DIR] [--seed N] [--jobs N] [--plots]
    anosov-lab validate --config run.json
    anosov-lab plot --report out/sweep_summary.json [--kind ratio-vs-h]

ANOSOV_LAB_OUT and ANOSOV_LAB_JOBS override the config (flags override both).
"""

from __future__ import annotations

import argparse
import copy
import csv
import hashlib
import io
import json
import math
import os
import shutil
import sys
import tempfile
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import jsonschema
import numpy as np

from . import __version__

SCHEMA_VERSION = 1
KINDS = ("norms", "livsic", "threshold", "source-sweep", "propagation", "foliation", "mls",
         "stretch-stability", "conformal")
POW2 = [2**k for k in range(3, 13)]

_weight_schema = {
    "oneOf": [
        {"type": "number"},
        {"type": "object", "additionalProperties": False, "required": ["kind"],
         "properties": {"kind": {"enum": ["constant", "cos"]}, "value": {"type": "number"},
                        "amplitude": {"type": "number"}, "axis": {"enum": [0, 1]}}},
    ]
}
_roof_schema = {
    "type": "object", "additionalProperties": False, "required": ["kind"],
    "properties": {"kind": {"enum": ["constant", "cos", "coboundary"]}, "value": {"type": "number", "exclusiveMinimum": 0},
                   "base": {"type": "number", "exclusiveMinimum": 0}, "amplitude": {"type": "number"},
                   "axis": {"enum": [0, 1]}, "k_max": {"type": "integer", "minimum": 1, "maximum": 16}},
}
_num_list = {"type": "array", "items": {"type": "number"}, "minItems": 1}
_pos_list = {"type": "array", "items": {"type": "number", "exclusiveMinimum": 0}, "minItems": 1}

PARAM_SCHEMAS = {
    "norms": {"alpha": {"type": "number", "exclusiveMinimum": 0, "maximum": 4}, "J": {"type": ["integer", "null"]},
              "s_list": _num_list, "reconstruction_tol": {"type": "number", "exclusiveMinimum": 0},
              "alpha_tol": {"type": "number", "exclusiveMinimum": 0}},
    "livsic": {"n_samples": {"type": "integer", "minimum": 1, "maximum": 10000},
               "k_max": {"type": "integer", "minimum": 1}, "tol": {"type": "number", "exclusiveMinimum": 0}},
    "threshold": {"weight": _weight_schema, "P": {"type": "integer", "minimum": 4, "maximum": 16},
                  "rho_step": {"type": "number", "exclusiveMinimum": 0, "maximum": 1},
                  "expected_omega_plus": {"type": ["number", "null"]}, "tol": {"type": "number", "minimum": 0},
                  "doubling": {"type": "boolean"}, "m_max": {"type": "integer", "minimum": 2, "maximum": 14},
                  "doubling_tol": {"type": "number", "minimum": 0}},
    "source-sweep": {"rho": _num_list, "weight": {"type": "number"},
                     "h_exponents": {"type": "array", "items": {"type": "integer", "minimum": 0}, "minItems": 2},
                     "n_samples": {"type": "integer", "minimum": 1}, "N": {"type": "number", "minimum": 0},
                     "half_angle_deg": {"type": "number", "exclusiveMinimum": 0, "maximum": 90},
                     "expect": {"enum": ["auto", "bounded", "divergence", "none"]},
                     "stability_max": {"type": "number", "exclusiveMinimum": 1},
                     "bounded_slope_max": {"type": "number"}, "divergence_slope_min": {"type": "number"}},
    "propagation": {"s": {"type": "number"}, "T": {"type": "integer", "minimum": 0, "maximum": 12},
                    "n_samples": {"type": "integer", "minimum": 1}, "ratio_max": {"type": "number", "exclusiveMinimum": 0},
                    "block_rho": {"type": "number", "minimum": 0},
                    "block_T": {"type": "array", "items": {"type": "integer", "minimum": 1}, "minItems": 2},
                    "block_h": {"type": "number", "exclusiveMinimum": 0, "maximum": 1},
                    "rate_tol": {"type": "number", "minimum": 0}},
    "foliation": {"eps": {"type": "number", "minimum": 0, "maximum": 0.2}, "deltas": _pos_list,
                  "T": {"type": "integer", "minimum": 10}, "P": {"type": "integer", "minimum": 1, "maximum": 8}},
    "mls": {"roof": _roof_schema, "roof_prime": _roof_schema, "P": {"type": "integer", "minimum": 1, "maximum": 12},
            "tol": {"type": "number", "exclusiveMinimum": 0}},
    "stretch-stability": {"roof": _roof_schema, "P": {"type": "integer", "minimum": 1, "maximum": 12},
                          "n_samples": {"type": "integer", "minimum": 1}, "amplitudes": _pos_list,
                          "k_max": {"type": "integer", "minimum": 1}, "homogeneity_tol": {"type": "number", "minimum": 0}},
    "conformal": {"words": {"type": "array", "items": {"type": "string", "pattern": "^[abcdABCD]+$"}, "minItems": 1},
                  "eps": _pos_list, "n_points": {"type": "integer", "minimum": 64},
                  "slope_range": {"type": "array", "items": {"type": "number"}, "minItems": 2, "maxItems": 2},
                  "sigma": {"type": "object", "additionalProperties": False,
                            "properties": {"constant": {"type": "number"},
                                           "bumps": {"type": "array", "items": {
                                               "type": "object", "additionalProperties": False,
                                               "required": ["center", "radius"],
                                               "properties": {"center": {"type": "array", "items": {"type": "number"},
                                                                         "minItems": 2, "maxItems": 2},
                                                              "radius": {"type": "number", "exclusiveMinimum": 0},
                                                              "amplitude": {"type": "number"}}}}}}},
}

DEFAULTS = {
    "norms": {"grid": {"n_side": 256}, "params": {"alpha": 0.5, "J": None, "s_list": [0.25, 0.5, 0.75],
                                                  "reconstruction_tol": 1e-10, "alpha_tol": 0.05}},
    "livsic": {"grid": {"n_side": 64}, "params": {"n_samples": 100, "k_max": 8, "tol": 1e-10}},
    "threshold": {"grid": {"n_side": 256}, "params": {"weight": 0.0, "P": 12, "rho_step": 1 / 64,
                                                      "expected_omega_plus": None, "tol": 1 / 64, "doubling": False,
                                                      "m_max": 10, "doubling_tol": 0.01}},
    "source-sweep": {"grid": {"n_side": 256}, "params": {"rho": [0.25, 0.5, 1.0], "weight": 0.0,
                                                         "h_exponents": [5, 6, 7, 8, 9], "n_samples": 50, "N": 4,
                                                         "half_angle_deg": 20.0, "expect": "auto",
                                                         "stability_max": 2.0, "bounded_slope_max": 0.1,
                                                         "divergence_slope_min": 0.25}},
    "propagation": {"grid": {"n_side": 128}, "params": {"s": 0.5, "T": 3, "n_samples": 50, "ratio_max": 10.0,
                                                        "block_rho": 0.5, "block_T": [2, 3, 4, 5, 6, 7, 8],
                                                        "block_h": 1 / 64, "rate_tol": 0.2}},
    "foliation": {"grid": {"n_side": 64}, "params": {"eps": 0.01, "deltas": [1e-2, 1e-3, 1e-4], "T": 200, "P": 4}},
    "mls": {"grid": {"n_side": 32}, "params": {"roof": {"kind": "constant", "value": 1.0},
                                               "roof_prime": {"kind": "cos", "base": 1.0, "amplitude": 0.1, "axis": 0},
                                               "P": 10, "tol": 1e-12}},
    "stretch-stability": {"grid": {"n_side": 32}, "params": {"roof": {"kind": "constant", "value": 1.0}, "P": 8,
                                                             "n_samples": 20, "amplitudes": [1e-3, 1e-2], "k_max": 4,
                                                             "homogeneity_tol": 0.01}},
    "conformal": {"grid": {"n_side": 64}, "params": {"words": ["a"], "eps": [1e-2, 5e-3, 2.5e-3], "n_points": 512,
                                                     "slope_range": [1.8, 2.2],
                                                     "sigma": {"constant": 0.0, "bumps": [
                                                         {"center": [0.05, 0.02], "radius": 1.2, "amplitude": 1.0}]}}},
}


def config_schema(kind=None):
    params = {"type": "object"}
    if kind in PARAM_SCHEMAS:
        params = {"type": "object", "additionalProperties": False, "properties": PARAM_SCHEMAS[kind]}
    return {
        "$schema": "https://json-schema.org/draft/2020-12/schema",
        "type": "object",
        "additionalProperties": False,
        "required": ["schema_version", "experiment"],
        "properties": {
            "schema_version": {"const": SCHEMA_VERSION},
            "experiment": {"enum": list(KINDS)},
            "system": {"type": "object", "additionalProperties": False,
                       "properties": {"kind": {"enum": ["cat", "perturbed"]},
                                      "matrix": {"type": "array", "minItems": 2, "maxItems": 2,
                                                 "items": {"type": "array", "minItems": 2, "maxItems": 2,
                                                           "items": {"type": "integer"}}},
                                      "eps": {"type": "number", "minimum": 0, "maximum": 0.2}}},
            "grid": {"type": "object", "additionalProperties": False,
                     "properties": {"n_side": {"enum": POW2}, "n_s": {"type": "integer", "minimum": 8, "maximum": 256,
                                                                      "multipleOf": 2}}},
            "params": params,
            "seed": {"type": "integer", "minimum": 0, "maximum": 2**64 - 1},
            "out": {"type": "string"},
            "jobs": {"type": "integer", "minimum": 1, "maximum": 256},
        },
    }


class ConfigError(ValueError):
    def __init__(self, errors):
        self.errors = list(errors)
        super().__init__("; ".join(self.errors))


def _fmt_error(e):
    path = ".".join(str(p) for p in e.absolute_path) or "<root>"
    if e.validator == "enum" and path.endswith("n_side"):
        return f"{path}: {e.instance!r} must be a power of two in [8, 4096]"
    if e.validator == "additionalProperties":
        return f"{path}: {e.message}"
    return f"{path}: {e.message}"


def _merge(base, over):
    out = copy.deepcopy(base)
    for k, v in over.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


def resolve_config(raw):
    """Validate a config mapping and fill defaults; raises ConfigError listing every violation."""
    if not isinstance(raw, dict):
        raise ConfigError(["<root>: config must be a JSON object"])
    kind = raw.get("experiment")
    v = jsonschema.Draft202012Validator(config_schema(kind if kind in KINDS else None))
    errs = sorted(v.iter_errors(raw), key=lambda e: (list(map(str, e.absolute_path)), e.message))
    if errs:
        raise ConfigError([_fmt_error(e) for e in errs])
    base = {"system": {"kind": "cat", "matrix": [[2, 1], [1, 1]], "eps": 0.0}, "grid": {"n_side": 64, "n_s": 16},
            "params": {}, "seed": 0, "out": "out", "jobs": 1}
    cfg = _merge(_merge(base, DEFAULTS[kind]), raw)
    return cfg


def validate_config(path):
    try:
        text = Path(path).read_text()
    except OSError as e:
        raise ConfigError([f"<file>: cannot read {path}: {e.strerror}"]) from None
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigError([f"<file>: invalid JSON at line {e.lineno}: {e.msg}"]) from None
    return resolve_config(raw)


def config_hash(cfg):
    keep = {k: v for k, v in cfg.items() if k not in ("out", "jobs")}
    return hashlib.sha256(json.dumps(keep, sort_keys=True, separators=(",", ":")).encode()).hexdigest()


# ---------------------------------------------------------------------------
# helpers
# ---------------------------------------------------------------------------


@dataclass
class Check:
    name: str
    passed: bool
    value: object = None
    bound: object = None

    def to_dict(self):
        return {"pass": bool(self.passed), "value": _plain(self.value), "bound": _plain(self.bound)}


def _plain(x):
    if isinstance(x, (np.floating, np.integer)):
        return x.item()
    if isinstance(x, (list, tuple)):
        return [_plain(v) for v in x]
    if isinstance(x, dict):
        return {str(k): _plain(v) for k, v in x.items()}
    if isinstance(x, float) and not math.isfinite(x):
        return str(x)
    return x


def _dump_json(obj):
    return json.dumps(_plain(obj), sort_keys=True, indent=2) + "\n"


def _csv(header, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in r])
    return buf.getvalue()


def _system(cfg):
    from .systems import cat_map_system, perturbed_cat_map

    s = cfg["system"]
    m = cat_map_system(tuple(map(tuple, s["matrix"])))
    if s["kind"] == "perturbed":
        m = perturbed_cat_map(m, float(s["eps"]))
    return m


def _spec(cfg):
    from .lp_calculus import GridSpec

    return GridSpec(cfg["grid"]["n_side"], cfg["grid"].get("n_s", 16))


def _weight_field(w, spec):
    from .lp_calculus import Grid2Field

    if isinstance(w, (int, float)):
        return float(w)
    if w["kind"] == "constant":
        return float(w.get("value", 0.0))
    amp = float(w.get("amplitude", 0.0))
    ax = int(w.get("axis", 0))
    return Grid2Field.from_function(spec, lambda x1, x2: amp * np.cos(2 * np.pi * (x1 if ax == 0 else x2)))


def _roof(r, spec, m, rng):
    from .cohomology import coboundary
    from .lp_calculus import Grid2Field, random_trig_field

    if r["kind"] == "constant":
        return Grid2Field.constant(spec, float(r.get("value", 1.0)))
    base = float(r.get("base", 1.0))
    amp = float(r.get("amplitude", 0.0))
    if r["kind"] == "cos":
        ax = int(r.get("axis", 0))
        return Grid2Field.from_function(spec, lambda x1, x2: base + amp * np.cos(2 * np.pi * (x1 if ax == 0 else x2)))
    w = random_trig_field(spec, int(r.get("k_max", 3)), rng)
    cb = coboundary(w, m)
    cb = Grid2Field(spec, values=cb.values.real / max(cb.sup(), 1e-300))
    return Grid2Field(spec, values=base + amp * cb.values.real)


def _rngs(seed, n):
    return [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(n)]


# ---------------------------------------------------------------------------
# experiment kinds: each returns ({filename: text}, [Check])
# ---------------------------------------------------------------------------


def _run_norms(cfg):
    from .cohomology import regularity_profile, weierstrass_field
    from .lp_calculus import build_lp_filters, hz_norm

    spec = _spec(cfg)
    p = cfg["params"]
    bank = build_lp_filters(spec)
    J = p["J"] if p["J"] is not None else bank.j_max - 1
    f = weierstrass_field(spec, p["alpha"], J)
    prof = regularity_profile(f)
    rows = [(s, hz_norm(f, s)) for s in p["s_list"]]
    files = {"filter_bank.json": _dump_json({**bank.describe(), "reconstruction_error": bank.reconstruction_error()}),
             "band_profile.csv": prof.to_csv(),
             "norms.csv": _csv(["s", "hz_norm"], rows)}
    rec = bank.reconstruction_error()
    a_err = abs(prof.alpha_hat - p["alpha"]) if prof.alpha_hat is not None else math.inf
    return files, [Check("reconstruction", rec <= p["reconstruction_tol"], rec, p["reconstruction_tol"]),
                   Check("weierstrass_alpha", a_err <= p["alpha_tol"], prof.alpha_hat, p["alpha"])]


def _run_livsic(cfg):
    from .cohomology import coboundary, livsic_solve
    from .lp_calculus import random_trig_field

    spec = _spec(cfg)
    m = _system(cfg)
    p = cfg["params"]
    rows = []
    for i, rng in enumerate(_rngs(cfg["seed"], p["n_samples"])):
        u = random_trig_field(spec, p["k_max"], rng)
        F = coboundary(u, m)
        res = livsic_solve(F, system=m)
        err = float(np.max(np.abs(res.u.values - u.values)))
        rows.append((i, err, res.residual))
    worst = max(r[1] for r in rows)
    return ({"livsic.csv": _csv(["sample", "error", "residual"], rows)},
            [Check("recovery_error", worst <= p["tol"], worst, p["tol"])])


def _run_threshold(cfg):
    from .thresholds import SubadditiveSpec, forward_threshold, subadditive_limit

    spec = _spec(cfg)
    m = _system(cfg)
    p = cfg["params"]
    w = _weight_field(p["weight"], spec)
    rep = forward_threshold(m, w, P=p["P"], rho_step=p["rho_step"])
    files = {"threshold.json": rep.to_json() + "\n", "orbits.csv": rep.orbit_csv()}
    checks = []
    if p["expected_omega_plus"] is not None:
        d = abs(rep.omega_plus - p["expected_omega_plus"])
        checks.append(Check("omega_plus", d <= p["tol"], rep.omega_plus, p["expected_omega_plus"]))
    if p["doubling"]:
        conv = subadditive_limit(SubadditiveSpec("birkhoff", w), m, m_max=p["m_max"], P=p["P"], n=spec.n_side,
                                 seed=cfg["seed"] % 2**32)
        files["doubling.csv"] = _csv(["T", "value"], list(zip(conv.T, conv.doubling)))
        rel = abs(conv.doubling[-1] - conv.orbit_max) / max(abs(conv.orbit_max), 1e-300)
        checks.append(Check("doubling_vs_orbit_max", rel <= p["doubling_tol"] or abs(conv.gap) <= 1e-12,
                            conv.doubling[-1], conv.orbit_max))
    if not checks:
        checks.append(Check("threshold_computed", math.isfinite(rep.omega_plus), rep.omega_plus, None))
    return files, checks


def _sweep_one(args):
    from .source_lab import make_radial_pair, source_estimate_sweep

    cfg, rho, seed = args
    m = _system(cfg)
    p = cfg["params"]
    pair = make_radial_pair(m, math.radians(p["half_angle_deg"]))
    hs = [2.0 ** -k for k in p["h_exponents"]]
    return source_estimate_sweep(m, pair, rho, N=p["N"], h_list=hs, n_samples=p["n_samples"],
                                 weight=float(p["weight"]), seed=seed, spec=_spec(cfg))


def _run_source_sweep(cfg):
    from .thresholds import forward_threshold

    m = _system(cfg)
    p = cfg["params"]
    omega = forward_threshold(m, float(p["weight"])).omega_plus
    seeds = [int(s.generate_state(1)[0]) for s in np.random.SeedSequence(cfg["seed"]).spawn(len(p["rho"]))]
    tasks = [(cfg, float(rho), s) for rho, s in zip(p["rho"], seeds)]
    if cfg["jobs"] > 1:
        with ProcessPoolExecutor(max_workers=cfg["jobs"]) as ex:
            reps = list(ex.map(_sweep_one, tasks))
    else:
        reps = [_sweep_one(t) for t in tasks]
    files = {}
    summary = {"omega_plus": omega, "weight": p["weight"], "sweeps": []}
    checks = []
    for rho, rep in zip(p["rho"], reps):
        rep.predicted_slope = max(0.0, omega - rho)
        name = f"sweep_rho_{rho:g}.csv"
        files[name] = rep.to_csv()
        summary["sweeps"].append({"rho": rho, "csv": name, **rep.summary()})
        expect = p["expect"]
        if expect == "auto":
            expect = "bounded" if rho > omega + 0.25 or omega == 0 else ("divergence" if rho < omega - 0.25 else "none")
        if expect == "bounded":
            ok = rep.stability < p["stability_max"] and rep.slope <= p["bounded_slope_max"]
            checks.append(Check(f"bounded_rho_{rho:g}", ok, [rep.stability, rep.slope],
                                [p["stability_max"], p["bounded_slope_max"]]))
        elif expect == "divergence":
            ok = rep.slope >= p["divergence_slope_min"]
            checks.append(Check(f"divergence_rho_{rho:g}", ok, rep.slope, p["divergence_slope_min"]))
    files["sweep_summary.json"] = _dump_json(summary)
    return files, checks


def _run_propagation(cfg):
    from .source_lab import WaveFamily, block_decay_probe, propagation_pair, propagation_sweep, stable_dual_direction

    m = _system(cfg)
    p = cfg["params"]
    A, B, D = propagation_pair(m, T=p["T"])
    r = propagation_sweep(m, A, B, D, p["s"], p["T"], n_samples=p["n_samples"], seed=cfg["seed"] % 2**32,
                          spec=_spec(cfg))
    es, _ = stable_dual_direction(m)
    h = p["block_h"]
    fam = WaveFamily.along(es, 0.6 * abs(m.lam_u) ** max(p["block_T"]) / h)
    T, vals, slope = block_decay_probe(m, fam, p["block_rho"], p["block_T"], h=h)
    target = -p["block_rho"] * m.log_lambda
    files = {"propagation.json": _dump_json({k: r[k] for k in ("max", "median", "min", "coverage_deficit")}),
             "block_decay.csv": _csv(["T", "value"], list(zip(T, vals)))}
    if target != 0:
        ok = abs(slope - target) <= p["rate_tol"] * abs(target)
    else:
        ok = abs(slope) <= 0.02
    return files, [Check("propagation_ratio", r["max"] <= p["ratio_max"], r["max"], p["ratio_max"]),
                   Check("block_decay_rate", ok, slope, target)]


def _run_foliation(cfg):
    from .orbits import enumerate_periodic_orbits
    from .systems import lyapunov_data, perturbed_cat_map, projector_lie_residual, suspension_flow
    from .thresholds import foliation_threshold
    from .lp_calculus import Grid2Field

    m = _system(cfg)
    p = cfg["params"]
    spec = _spec(cfg)
    pts = np.vstack([o.points[:1] for o in enumerate_periodic_orbits(m, p["P"])])
    lin = m if not m.is_perturbed else None
    from .systems import cat_map_system

    lin = lin or cat_map_system(tuple(map(tuple, m.matrix)))
    lyap = lyapunov_data(lin, pts, T=p["T"])
    bound = foliation_threshold(lyap, volume_preserving_3d=True)
    flow_lin = suspension_flow(lin, Grid2Field.constant(spec, 1.0))
    pert = perturbed_cat_map(lin, p["eps"]) if p["eps"] > 0 else lin
    flow_p = suspension_flow(pert, Grid2Field.constant(spec, 1.0))
    rows = []
    for d in p["deltas"]:
        rows.append((d, projector_lie_residual(flow_lin, d), projector_lie_residual(flow_p, d)))
    lin_max = max(r[1] for r in rows)
    pr = [r[2] for r in rows]
    dec = all(b < a for a, b in zip(pr, pr[1:])) if p["eps"] > 0 else True
    files = {"foliation.json": _dump_json({"bound": bound, "lyapunov": lyap.to_dict()}),
             "lie_residuals.csv": _csv(["delta", "linear", "perturbed"], rows)}
    return files, [Check("foliation_bound", abs(bound - 2.0) <= 1e-12, bound, 2.0),
                   Check("lie_linear_roundoff", lin_max <= 1e-10, lin_max, 1e-10),
                   Check("lie_perturbed_decreasing", dec, pr, None)]


def _run_mls(cfg):
    from .mls_stretch import mls_compare
    from .orbits import enumerate_periodic_orbits, marked_spectrum
    from .systems import suspension_flow

    m = _system(cfg)
    p = cfg["params"]
    spec = _spec(cfg)
    rng1, rng2 = _rngs(cfg["seed"], 2)
    f1 = suspension_flow(m, _roof(p["roof"], spec, m, rng1))
    f2 = suspension_flow(m, _roof(p["roof_prime"], spec, m, rng2))
    orbs = enumerate_periodic_orbits(m, p["P"])
    tab = marked_spectrum(f1, p["P"], orbs).with_second(marked_spectrum(f2, p["P"], orbs))
    cmp_ = mls_compare(f1, f2, p["P"], orbs)
    res = cmp_.max_residual()
    return ({"spectrum.csv": tab.to_csv(), "mls_compare.csv": cmp_.to_csv()},
            [Check("first_order_residual", res <= p["tol"], res, p["tol"])])


def _run_stretch_stability(cfg):
    from .lp_calculus import Grid2Field, random_trig_field
    from .mls_stretch import stability_experiment
    from .orbits import enumerate_periodic_orbits

    m = _system(cfg)
    p = cfg["params"]
    spec = _spec(cfg)
    rngs = _rngs(cfg["seed"], p["n_samples"] + 1)
    r0 = _roof(p["roof"], spec, m, rngs[-1])
    base = []
    for rng in rngs[:-1]:
        g = random_trig_field(spec, p["k_max"], rng)
        base.append(Grid2Field(spec, values=g.values.real / g.sup()))
    orbs = enumerate_periodic_orbits(m, p["P"])
    rows = []
    per_amp = []
    for amp in p["amplitudes"]:
        rep = stability_experiment(r0, [g * amp for g in base], p["P"], m, orbits=orbs)
        per_amp.append({r["sample"]: r["ratio"] for r in rep.rows})
        rows += [(r["sample"], amp, r["residual_norm"], r["s_lower"], r["ratio"]) for r in rep.rows]
    common = set.intersection(*(set(d) for d in per_amp))
    spread = 0.0
    for i in common:
        v = [d[i] for d in per_amp]
        spread = max(spread, (max(v) - min(v)) / max(v))
    cmax = max((r[4] for r in rows), default=None)
    files = {"stability.csv": _csv(["sample", "amplitude", "residual_norm", "s_lower", "ratio"], rows),
             "stability.json": _dump_json({"max_ratio": cmax, "homogeneity_spread": spread, "P": p["P"]})}
    return files, [Check("homogeneity", spread <= p["homogeneity_tol"], spread, p["homogeneity_tol"]),
                   Check("finite_constant", cmax is not None and math.isfinite(cmax), cmax, None)]


def _run_conformal(cfg):
    from .mls_stretch import conformal_linearization_experiment
    from .orbits import Bump, ConformalFactor, Discretization
    from .systems import fuchsian_bolza

    p = cfg["params"]
    sg = p["sigma"]
    sigma = ConformalFactor(float(sg.get("constant", 0.0)),
                            tuple(Bump(complex(*b["center"]), float(b["radius"]), float(b.get("amplitude", 1.0)))
                                  for b in sg.get("bumps", [])))
    fits = conformal_linearization_experiment(fuchsian_bolza(), sigma, p["eps"], p["words"],
                                              Discretization(n_points=p["n_points"]))
    rows = [(f.word, e, R) for f in fits for e, R in zip(f.eps, f.R)]
    lo, hi = p["slope_range"]
    checks = [Check(f"slope_{f.word}", f.slope is not None and lo <= f.slope <= hi, f.slope, [lo, hi]) for f in fits]
    return ({"conformal.json": _dump_json({"fits": [f.to_dict() for f in fits]}),
             "conformal.csv": _csv(["word", "eps", "R"], rows)}, checks)


RUNNERS = {"norms": _run_norms, "livsic": _run_livsic, "threshold": _run_threshold,
           "source-sweep": _run_source_sweep, "propagation": _run_propagation, "foliation": _run_foliation,
           "mls": _run_mls, "stretch-stability": _run_stretch_stability, "conformal": _run_conformal}


# ---------------------------------------------------------------------------
# running
# ---------------------------------------------------------------------------


@dataclass
class RunManifest:
    config_hash: str
    version: str
    wall_time_s: float
    files: list
    checks: dict = field(default_factory=dict)

    @property
    def all_pass(self):
        return all(c["pass"] for c in self.checks.values())

    def to_json(self):
        return _dump_json({"config_hash": self.config_hash, "version": self.version,
                           "wall_time_s": self.wall_time_s, "files": self.files, "checks": self.checks,
                           "all_pass": self.all_pass})


def run_experiment(cfg, plots=False):
    """
    Run a resolved config.  Reports are staged in a scratch directory and
    moved into cfg["out"] only when the run completes; on an exception
    nothing is left behind.
    """
    out = Path(cfg["out"])
    out.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    stage = Path(tempfile.mkdtemp(prefix=".partial-", dir=out))
    try:
        files, checks = RUNNERS[cfg["experiment"]](cfg)
        for name, text in files.items():
            with open(stage / name, "w", newline="\n") as fh:
                fh.write(text)
        if plots:
            for name in list(files):
                if name in PLOTTABLE:
                    emit_plots(stage / name, PLOTTABLE[name], out_dir=stage)
        names = sorted(p.name for p in stage.iterdir())
        manifest = RunManifest(config_hash(cfg), __version__, round(time.perf_counter() - t0, 3),
                               names + ["manifest.json"], {c.name: c.to_dict() for c in checks})
        (stage / "manifest.json").write_text(manifest.to_json())
        for name in names + ["manifest.json"]:
            os.replace(stage / name, out / name)
    finally:
        shutil.rmtree(stage, ignore_errors=True)
    return manifest


# ---------------------------------------------------------------------------
# plots
# ---------------------------------------------------------------------------

PLOTTABLE = {"sweep_summary.json": "ratio-vs-h", "block_decay.csv": "band-decay", "band_profile.csv": "band-decay",
             "conformal.json": "slope-fit", "orbits.csv": "threshold"}


class PlotError(ValueError):
    pass


def _read_csv(path):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise PlotError(f"{path}: empty report")
    return rows[0], rows[1:]


def _figure():
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    plt.rcParams["svg.hashsalt"] = "anosov-lab"
    fig, ax = plt.subplots(figsize=(5, 3.6))
    return plt, fig, ax


def _save(plt, fig, path):
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None, "Creator": None})
    plt.close(fig)
    return Path(path)


def emit_plots(report_path, kind=None, out_dir=None):
    """Write SVG plot(s) for a report; returns the list of files."""
    report_path = Path(report_path)
    if not report_path.exists():
        raise PlotError(f"{report_path}: no such report")
    kind = kind or PLOTTABLE.get(report_path.name)
    if kind is None:
        raise PlotError(f"{report_path.name}: cannot infer plot kind")
    out_dir = Path(out_dir) if out_dir is not None else report_path.parent
    out = []
    if kind == "ratio-vs-h":
        try:
            summary = json.loads(report_path.read_text())
            sweeps = summary["sweeps"]
        except (json.JSONDecodeError, KeyError, TypeError) as e:
            raise PlotError(f"{report_path}: malformed sweep summary ({e})") from None
        if not sweeps:
            raise PlotError("nothing to plot")
        for sw in sweeps:
            _, rows = _read_csv(report_path.parent / sw["csv"])
            if not rows:
                raise PlotError("nothing to plot")
            h = np.array([float(r[1]) for r in rows])
            ratio = np.array([float(r[4]) for r in rows])
            plt, fig, ax = _figure()
            ax.scatter(np.log2(1 / h), np.log2(ratio), s=6, alpha=0.5, label="samples")
            hs = sorted(set(h), reverse=True)
            med = [np.median(ratio[h == v]) for v in hs]
            ax.plot(np.log2(1 / np.array(hs)), np.log2(med), "k-o", ms=3, label="median")
            ax.set_xlabel("log2(1/h)")
            ax.set_ylabel("log2(ratio)")
            ax.set_title(f"rho = {sw['rho']:g}")
            ax.legend(fontsize=7)
            out.append(_save(plt, fig, out_dir / f"ratio_vs_h_rho_{sw['rho']:g}.svg"))
        return out
    if kind in ("band-decay", "threshold"):
        header, rows = _read_csv(report_path)
        if not rows:
            raise PlotError("nothing to plot")
        try:
            data = np.array([[float(v) for v in r[-len(header):]] for r in rows]) if kind == "band-decay" else None
        except ValueError:
            raise PlotError(f"{report_path}: malformed numeric data") from None
        plt, fig, ax = _figure()
        if kind == "band-decay":
            x, y = data[:, 0], data[:, 1]
            keep = y > 0
            if not keep.any():
                plt.close(fig)
                raise PlotError("nothing to plot")
            ax.plot(x[keep], np.log2(y[keep]), "o-", ms=3)
            ax.set_xlabel(header[0] + (" (band index = log2 |xi|)" if header[0] == "j" else ""))
            ax.set_ylabel(f"log2 {header[1]}")
            name = report_path.stem + ".svg"
        else:
            try:
                a = np.array([float(r[3]) for r in rows])
                b = np.array([float(r[4]) for r in rows])
            except (ValueError, IndexError):
                plt.close(fig)
                raise PlotError(f"{report_path}: malformed orbit table") from None
            rho = np.linspace(0, max(2.0, 1.5 * float(np.max(a / b))), 400)
            ax.plot(rho, [np.max(a - r * b) for r in rho])
            ax.axhline(0, color="k", lw=0.5)
            ax.set_xlabel("rho")
            ax.set_ylabel("max over orbits of a - rho b")
            name = "threshold_bisection.svg"
        out.append(_save(plt, fig, out_dir / name))
        return out
    if kind == "slope-fit":
        try:
            fits = json.loads(report_path.read_text())["fits"]
        except (json.JSONDecodeError, KeyError, TypeError) as e:
            raise PlotError(f"{report_path}: malformed fit report ({e})") from None
        if not fits:
            raise PlotError("nothing to plot")
        plt, fig, ax = _figure()
        for f in fits:
            R = np.abs(np.array(f["R"], float))
            if np.any(R > 0):
                ax.loglog(f["eps"], R, "o-", ms=3, label=f"{f['word']} slope {f['slope']}")
        ax.set_xlabel("eps")
        ax.set_ylabel("|R(eps)|")
        ax.legend(fontsize=7)
        out.append(_save(plt, fig, out_dir / "slope_fit.svg"))
        return out
    raise PlotError(f"unknown plot kind {kind!r}")


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------


def _parser():
    ap = argparse.ArgumentParser(prog="anosov-lab", description="Anosov-flow numerical experiments")
    sub = ap.add_subparsers(dest="command", required=True)
    for kind in KINDS:
        sp = sub.add_parser(kind, help=f"run a {kind} experiment")
        sp.add_argument("--config", required=True)
        sp.add_argument("--out")
        sp.add_argument("--seed", type=int)
        sp.add_argument("--jobs", type=int)
        sp.add_argument("--plots", action="store_true")
    sp = sub.add_parser("validate", help="check a config and print the resolved form")
    sp.add_argument("--config", required=True)
    sp = sub.add_parser("plot", help="render SVG plots for a report")
    sp.add_argument("--report", "--config", dest="report", required=True)
    sp.add_argument("--kind", choices=["ratio-vs-h", "band-decay", "slope-fit", "threshold"])
    sp.add_argument("--out")
    return ap


def main(argv=None):
    args = _parser().parse_args(argv)
    if args.command == "plot":
        try:
            files = emit_plots(args.report, args.kind, args.out)
        except PlotError as e:
            print(f"error: {e}", file=sys.stderr)
            return 2
        for f in files:
            print(f)
        return 0
    try:
        cfg = validate_config(args.config)
    except ConfigError as e:
        for msg in e.errors:
            print(f"error: {msg}", file=sys.stderr)
        return 2
    if args.command == "validate":
        print(json.dumps(cfg, sort_keys=True, indent=2))
        return 0
    if cfg["experiment"] != args.command:
        print(f"error: config is for {cfg['experiment']!r}, not {args.command!r}", file=sys.stderr)
        return 2
    if os.environ.get("ANOSOV_LAB_OUT"):
        cfg["out"] = os.environ["ANOSOV_LAB_OUT"]
    if os.environ.get("ANOSOV_LAB_JOBS"):
        cfg["jobs"] = int(os.environ["ANOSOV_LAB_JOBS"])
    if args.out:
        cfg["out"] = args.out
    if args.jobs:
        cfg["jobs"] = args.jobs
    if args.seed is not None:
        if not 0 <= args.seed < 2**64:
            print("error: seed must be an unsigned 64-bit integer", file=sys.stderr)
            return 2
        cfg["seed"] = args.seed
    try:
        manifest = run_experiment(cfg, plots=args.plots)
    except Exception as e:  # module errors: report with context, outputs already cleaned
        print(f"error: {cfg['experiment']} failed: {type(e).__name__}: {e}", file=sys.stderr)
        return 2
    for name, c in manifest.checks.items():
        print(f"{'PASS' if c['pass'] else 'FAIL'} {name}: {c['value']}")
    print(f"wrote {len(manifest.files)} files to {cfg['out']}")
    return 0 if manifest.all_pass else 1


if __name__ == "__main__":
    sys.exit(main())
