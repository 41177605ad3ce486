"""Command-line driver: ``nhssh <subcommand> --config FILE [--out DIR] [--set key=value ...]``.

Every run writes ``config.resolved.json`` (the fully defaulted config, which
reproduces the run when passed back with ``--config``), one CSV per result
and ``<command>_summary.json``.

Exit codes: 0 success, 1 invalid config, 2 numerical failure (details in
``diagnostic.json``), 3 validation mismatches.
"""

from __future__ import annotations

import argparse
import copy
import json
import math
import sys
import traceback
from pathlib import Path

import jsonschema
import numpy as np

from . import __version__
from .circuit import (CircuitParams, crossing_k_sensitivity, resonance_frequency, tbr_sweep,
                      two_point_admittance)
from .closed_form import closed_form_pieces, oracle_discriminant
from .exceptional import PAIRINGS, bz_median_magnitudes, ep_line_scan, min_pair_gap, n_scan, \
    scan_discriminant_zeros
from .model import ModelParams, symmetry_residuals
from .realspace import bloch_consistency_report
from .spectrum import batch_energies, fermi_gap
from .tables import SweepTable, config_hash
from .topology import (GapClosureError, ZAK_MODES, anomalous_hall, chern_number, curvature_field,
                       nernst, quantum_index, snap_distance, zak_map)
from .validation import CHECKS, run_validation

COMMANDS = ("bands", "symmetry", "ep-scan", "zak", "berry", "nernst", "ahc", "circuit",
            "realspace", "validate")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_MISMATCH = 0, 1, 2, 3

_num = {"type": "number"}
_int = {"type": "integer", "minimum": 1}
_pair = {"type": "array", "items": _num, "minItems": 2, "maxItems": 2}
_numlist = {"type": "array", "items": _num, "minItems": 1}

_MODEL_PROPS = {
    "u": _num, "t1": _num, "v": _num, "t2": _num, "mu": _num,
    "a": {"type": "number", "exclusiveMinimum": 0},
    "gamma": _num, "gamma1": _num, "gamma2": _num,
    "gains": {"type": "array", "items": _num, "minItems": 4, "maxItems": 4},
}

SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "command": {"oneOf": [{"enum": list(COMMANDS)},
                              {"type": "array", "items": {"enum": list(COMMANDS)}, "minItems": 1}]},
        "description": {"type": "string"},
        "output": {"type": "string"},
        "model": {"type": "object", "additionalProperties": False, "properties": _MODEL_PROPS},
        "cases": {
            "type": "array", "minItems": 1,
            "items": {"type": "object", "additionalProperties": False,
                      "properties": {"label": {"type": "string", "pattern": "^[A-Za-z0-9_.-]+$"},
                                     "ky": _num, **_MODEL_PROPS}},
        },
        "grid": {
            "type": "object", "additionalProperties": False,
            "properties": {
                "ky": _num, "kx_range": _pair, "samples": {"type": "integer", "minimum": 2},
                "j_map": {"type": "integer", "minimum": 0},
                "n": _int, "median_grid": _int, "random_samples": _int, "seed": {"type": "integer"},
                "ratios": _numlist, "zak_segments": {"type": "integer", "minimum": 16},
                "transverse_k": _num, "gamma_values": _numlist,
                "mu_values": _numlist, "T_values": {"type": "array", "items": {
                    "type": "number", "exclusiveMinimum": 0}, "minItems": 1},
                "nernst_mode": {"enum": ["finite-T", "low-T"]},
                "smearing": {"type": "number", "exclusiveMinimum": 0},
                "grid_doubling": {"type": "boolean"},
                "chern": {"type": "boolean"},
                "sizes": {"type": "array", "items": {"type": "integer", "minimum": 2}, "minItems": 1},
            },
        },
        "circuit": {
            "type": "object", "additionalProperties": False,
            "properties": {
                "L1": _num, "L2": _num, "C": _num, "R": _num, "R_L": _num,
                "omega": {"type": ["number", "null"]},
                "R_list": _numlist, "omega_range": _pair,
                "samples": {"type": "integer", "minimum": 64}, "log": {"type": "boolean"},
                "k": _pair, "k_sensitivity": {"type": "boolean"},
                "admittance": {"type": "object", "additionalProperties": False, "properties": {
                    "beta": {"enum": [1, 2, 3, 4]}, "beta_p": {"enum": [1, 2, 3, 4]},
                    "r": {"type": "array", "items": {"type": "integer"}, "minItems": 2, "maxItems": 2},
                    "n": _int}},
            },
        },
        "tolerances": {
            "type": "object", "additionalProperties": False,
            "properties": {k: {"type": "number", "exclusiveMinimum": 0} for k in
                           ("symmetry", "ep_energy", "ep_vector", "validate", "zak_gap",
                            "realspace")},
        },
        "conventions": {
            "type": "object", "additionalProperties": False,
            "properties": {
                "pairing": {"enum": list(PAIRINGS)},
                "eigvec_variant": {"enum": ["printed", "corrected"]},
                "zak_mode": {"enum": list(ZAK_MODES)},
                "circuit_transpose": {"type": "boolean"},
            },
        },
        "validate": {
            "type": "object", "additionalProperties": False,
            "properties": {
                "checks": {"type": "array", "items": {"enum": list(CHECKS)}, "minItems": 1},
                "samples": _int, "seed": {"type": "integer"}, "circuit": {"type": "boolean"},
            },
        },
    },
}

DEFAULTS = {
    "description": "",
    "output": "out",
    "model": {"u": 1.0, "t1": 1.0, "v": 0.75, "t2": 0.75, "mu": 0.0, "a": 1.0,
              "gains": [0.0, 0.0, 0.0, 0.0]},
    "grid": {
        "ky": 0.0, "kx_range": [-math.pi, math.pi], "samples": 401, "j_map": 0, "n": 128,
        "median_grid": 64,
        "random_samples": 200, "seed": 0, "ratios": [0.5, 0.8, 1.25, 2.0],
        "zak_segments": 1024, "transverse_k": 0.0, "gamma_values": [0.0],
        "mu_values": [0.0], "T_values": [0.05], "nernst_mode": "finite-T", "smearing": 0.02,
        "grid_doubling": False, "chern": False, "sizes": [2, 4, 8],
    },
    "circuit": {
        "L1": 1e-4, "L2": 1e-4, "C": 1e-8, "R": 1.0, "R_L": 0.0, "omega": None,
        "R_list": [1.0, 26.0, 50.0], "omega_range": [5e3, 2e5], "samples": 512, "log": True,
        "k": [0.0, 0.0], "k_sensitivity": False,
        "admittance": {"beta": 1, "beta_p": 2, "r": [0, 0], "n": 16},
    },
    "tolerances": {"symmetry": 1e-12, "ep_energy": 1e-8, "ep_vector": 1e-2, "validate": 1e-9,
                   "zak_gap": 1e-8, "realspace": 1e-9},
    "conventions": {"pairing": "conjugated", "eigvec_variant": "printed",
                    "zak_mode": "determinant", "circuit_transpose": False},
    "validate": {"checks": list(CHECKS), "samples": 200, "seed": 0, "circuit": True},
}


class ConfigError(ValueError):
    pass


class NumericalFailure(RuntimeError):
    pass


# --- config -------------------------------------------------------------------

def _merge(base, over):
    out = copy.deepcopy(base)
    for k, v in over.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


def apply_set(config: dict, assignment: str) -> dict:
    """Apply one ``dotted.key=value`` override; the value is parsed as JSON when possible."""
    if "=" not in assignment:
        raise ConfigError(f"--set expects key=value, got {assignment!r}")
    key, raw = assignment.split("=", 1)
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    parts = key.strip().split(".")
    node = config
    for p in parts[:-1]:
        if p.isdigit() and isinstance(node, list):
            node = node[int(p)]
            continue
        node = node.setdefault(p, {})
        if not isinstance(node, (dict, list)):
            raise ConfigError(f"cannot descend into {p!r} of {key!r}")
    last = parts[-1]
    if isinstance(node, list) and last.isdigit():
        node[int(last)] = value
    else:
        node[last] = value
    return config


def _model_dict(p: ModelParams) -> dict:
    return p.to_dict()


def resolve_config(raw: dict) -> dict:
    """Validate and fill defaults; model blocks are canonicalized to explicit gains."""
    try:
        jsonschema.validate(raw, SCHEMA)
    except jsonschema.ValidationError as exc:
        where = "/".join(str(x) for x in exc.absolute_path) or "<root>"
        raise ConfigError(f"{where}: {exc.message}") from None
    cfg = _merge(DEFAULTS, {k: v for k, v in raw.items() if k not in ("model", "cases")})
    try:
        base = ModelParams.from_dict(_merge(DEFAULTS["model"], raw.get("model", {})))
        cfg["model"] = _model_dict(base)
        cases = []
        for i, c in enumerate(raw.get("cases", [{"label": "main"}])):
            c = dict(c)
            label = c.pop("label", f"case{i}")
            ky = c.pop("ky", None)
            p = ModelParams.from_dict(_merge(cfg["model"], c)) if c else base
            entry = {"label": label, **_model_dict(p)}
            if ky is not None:
                entry["ky"] = ky
            cases.append(entry)
        labels = [c["label"] for c in cases]
        if len(set(labels)) != len(labels):
            raise ConfigError(f"case labels must be unique, got {labels}")
        cfg["cases"] = cases
        c = cfg["circuit"]
        CircuitParams(c["L1"], c["L2"], c["C"], c["R"], c["omega"] or 1.0, c["R_L"])
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from None
    return cfg


def load_config(path, sets=()) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            raw = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from None
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    for s in sets:
        apply_set(raw, s)
    return resolve_config(raw)


def case_params(cfg):
    """(label, params) per case."""
    out = []
    for c in cfg["cases"]:
        d = {k: v for k, v in c.items() if k not in ("label", "ky")}
        out.append((c["label"], ModelParams.from_dict(d)))
    return out


def case_ky(cfg, label) -> float:
    """Per-case ky override, else the grid value."""
    for c in cfg["cases"]:
        if c["label"] == label and "ky" in c:
            return float(c["ky"])
    return float(cfg["grid"]["ky"])


def circuit_params(cfg) -> CircuitParams:
    c = cfg["circuit"]
    omega = c["omega"] or resonance_frequency(c["L1"], c["L2"], c["C"])
    return CircuitParams(c["L1"], c["L2"], c["C"], c["R"], omega, c["R_L"],
                         cfg["conventions"]["circuit_transpose"])


def _clean(x):
    """JSON-safe copy: non-finite floats become null, tuples lists, numpy scalars python."""
    if isinstance(x, dict):
        return {str(k): _clean(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_clean(v) for v in x]
    if isinstance(x, np.ndarray):
        return _clean(x.tolist())
    if isinstance(x, (np.floating, np.integer, np.bool_)):
        x = x.item()
    if isinstance(x, complex):
        return {"re": _clean(x.real), "im": _clean(x.imag)}
    if isinstance(x, float) and not math.isfinite(x):
        return None
    return x


# --- subcommands --------------------------------------------------------------

def cmd_bands(cfg):
    g = cfg["grid"]
    kx = np.linspace(g["kx_range"][0], g["kx_range"][1], g["samples"])
    tables, summary = {}, {}
    for label, p in case_params(cfg):
        ky = case_ky(cfg, label)
        e = batch_energies(p, kx, ky)
        gaps = min_pair_gap(p, kx, ky)
        cols = ["kx"] + [f"re_E{j}" for j in range(1, 5)] + [f"im_E{j}" for j in range(1, 5)]
        t = SweepTable(cols, ["1/a"] + ["u"] * 8)
        for i, x in enumerate(kx):
            status = "degenerate" if gaps[i] < 1e-9 else "ok"
            t.add([float(x)] + [float(v) for v in e[i].real] + [float(v) for v in e[i].imag], status)
        tables[f"bands_{label}"] = t
        summary[label] = {"ky": ky, "samples": g["samples"],
                          "fermi_gap": fermi_gap(p, kx, ky),
                          "max_abs_imag": float(np.max(np.abs(e.imag))),
                          "degenerate_samples": int(np.sum(gaps < 1e-9))}
    return tables, summary, EXIT_OK


def cmd_symmetry(cfg):
    g, tol = cfg["grid"], cfg["tolerances"]["symmetry"]
    names = ["PHS", "TRS", "chiral", "chiral-mirror", "TRS-swapped-order", "TRS-spinless",
             "chiral-mirror-commuting"]
    tables, summary = {}, {}
    for i, (label, p) in enumerate(case_params(cfg)):
        rng = np.random.default_rng(g["seed"] + i)
        ks = rng.uniform(-np.pi / p.a, np.pi / p.a, size=(g["random_samples"], 2))
        t = SweepTable(["kx", "ky"] + names, ["1/a", "1/a"] + ["u"] * len(names))
        worst = dict.fromkeys(names, 0.0)
        for kx, ky in ks:
            rep = symmetry_residuals(p, kx, ky)
            vals = {**rep.residuals, **rep.alternatives}
            for n in names:
                worst[n] = max(worst[n], vals[n])
            t.add([float(kx), float(ky)] + [vals[n] for n in names])
        tables[f"symmetry_{label}"] = t
        summary[label] = {"max_residual": worst,
                          "holds": {n: worst[n] <= tol for n in names}, "tolerance": tol}
    return tables, summary, EXIT_OK


def cmd_ep_scan(cfg):
    g, conv, tol = cfg["grid"], cfg["conventions"], cfg["tolerances"]
    kx = np.linspace(g["kx_range"][0], g["kx_range"][1], g["samples"])
    tables, summary = {}, {}
    for label, p in case_params(cfg):
        ky = case_ky(cfg, label)
        closed = p.is_uniform and p.mu == 0
        jo = oracle_discriminant(p, kx, ky)
        gaps = min_pair_gap(p, kx, ky)
        if closed:
            jp = closed_form_pieces(p, kx, ky).J
            n1, n2 = n_scan(p, kx, ky, conv["pairing"], conv["eigvec_variant"])
        else:
            jp = n1 = n2 = np.full(kx.shape, np.nan)
        t = SweepTable(["kx", "J_printed", "J_oracle", "re_N1", "im_N1", "re_N2", "im_N2",
                        "pair_gap"], ["1/a", "u^4", "u^4", "", "", "", "", "u"])
        for i, x in enumerate(kx):
            vals = [float(x), float(np.real(jp[i])), float(jo[i]),
                    float(np.real(n1[i])), float(np.imag(n1[i])),
                    float(np.real(n2[i])), float(np.imag(n2[i])), float(gaps[i])]
            t.add(vals, "ok" if closed else "no-closed-form")
        tables[f"ep-scan_{label}"] = t
        info = {"ky": ky, "pairing": conv["pairing"], "variant": conv["eigvec_variant"],
                "oracle_J_roots": [r.kx for r in scan_discriminant_zeros(p, ky, g["kx_range"],
                                                                         source="oracle")]}
        if closed:
            info["printed_J_roots"] = [r.kx for r in scan_discriminant_zeros(
                p, ky, g["kx_range"], source="closed-form")]
            info["bz_median_N"] = bz_median_magnitudes(p, g["median_grid"], conv["pairing"],
                                                       conv["eigvec_variant"])
            pts = ep_line_scan(p, ky, tuple(g["kx_range"]), g["samples"], tol["ep_energy"],
                               tol["ep_vector"])
            pt = SweepTable(["kx", "ky", "band_i", "band_j", "gap", "oracle_gap", "coalescence",
                             "J", "abs_N1", "abs_N2", "re_E", "im_E", "classification"],
                            ["1/a", "1/a", "", "", "u", "u", "", "u^4", "", "", "u", "u", ""])
            for e in pts:
                pt.add([e.kx, e.ky, e.bands[0], e.bands[1], e.gap, e.oracle_gap, e.coalescence,
                        e.J, e.self_orth[0], e.self_orth[1], e.energy.real, e.energy.imag,
                        e.classification])
            tables[f"ep-points_{label}"] = pt
            info["points"] = [{"kx": e.kx, "classification": e.classification, "gap": e.gap,
                               "coalescence": e.coalescence, "abs_N": e.self_orth}
                              for e in pts]
        if g["j_map"]:
            tables[f"j-map_{label}"] = _j_map(p, g["j_map"], closed)
        summary[label] = info
    return tables, summary, EXIT_OK


def _j_map(p, n, closed):
    k = np.linspace(-np.pi / p.a, np.pi / p.a, n)
    KX, KY = np.meshgrid(k, k, indexing="xy")
    jo = oracle_discriminant(p, KX, KY)
    jp = closed_form_pieces(p, KX, KY).J if closed else np.full(KX.shape, np.nan)
    t = SweepTable(["kx", "ky", "J_printed", "J_oracle"], ["1/a", "1/a", "u^4", "u^4"])
    for iy in range(n):
        for ix in range(n):
            t.add([float(KX[iy, ix]), float(KY[iy, ix]), float(np.real(jp[iy, ix])),
                   float(jo[iy, ix])], "ok" if closed else "no-closed-form")
    return t


def cmd_zak(cfg):
    g, conv = cfg["grid"], cfg["conventions"]
    t = SweepTable(["gamma", "ratio", "phi_x", "phi_y", "n_x", "n_y", "snap_x", "snap_y",
                    "gap_x", "gap_y"], ["", "", "rad", "rad", "pi", "pi", "rad", "rad", "u", "u"])
    summary = {"segments": g["zak_segments"], "transverse_k": g["transverse_k"],
               "mode": conv["zak_mode"], "cases": {}}
    for label, p in case_params(cfg):
        for gamma in g["gamma_values"]:
            rows, trans = zak_map(p.with_(gamma=gamma), g["ratios"], g["zak_segments"],
                                  g["transverse_k"], conv["zak_mode"], cfg["tolerances"]["zak_gap"])
            for r in rows:
                t.add([float(gamma), r["ratio"], r["phi_x"], r["phi_y"]]
                      + [_quantum_or_nan(r[f"phi_{d}"]) for d in "xy"]
                      + [_snap_or_nan(r[f"phi_{d}"]) for d in "xy"]
                      + [r["gap_x"], r["gap_y"]], r["status"])
            summary["cases"][f"{label}@gamma={gamma:g}"] = {
                "phases": [{"ratio": r["ratio"], "phi_x": r["phi_x"], "phi_y": r["phi_y"],
                            "n_x": _quantum_or_nan(r["phi_x"]), "n_y": _quantum_or_nan(r["phi_y"]),
                            "snap_x": _snap_or_nan(r["phi_x"]), "snap_y": _snap_or_nan(r["phi_y"])}
                           for r in rows],
                "transitions": trans}
    return {"zak": t}, summary, EXIT_OK


def _quantum_or_nan(phase):
    return quantum_index(phase) if math.isfinite(phase) else float("nan")


def _snap_or_nan(phase):
    return snap_distance(phase) if math.isfinite(phase) else float("nan")


def cmd_berry(cfg):
    g = cfg["grid"]
    tables, summary = {}, {}
    for label, p in case_params(cfg):
        fld = curvature_field(p, g["n"])
        t = SweepTable(["kx", "ky"] + [f"Omega{j}" for j in range(1, 5)]
                       + [f"E{j}" for j in range(1, 5)], ["1/a", "1/a"] + ["a^2"] * 4 + ["u"] * 4)
        for iy in range(g["n"]):
            for ix in range(g["n"]):
                fl = fld.flags[iy, ix]
                t.add([float(fld.kx[iy, ix]), float(fld.ky[iy, ix])]
                      + [float(v) for v in fld.omega[iy, ix]] + [float(v) for v in fld.energies[iy, ix]],
                      "ok" if not fl.any() else "degenerate-band-" + "+".join(
                          str(j + 1) for j in np.flatnonzero(fl)))
        tables[f"berry_{label}"] = t
        info = {"n": g["n"], "max_abs_omega": float(np.max(np.abs(fld.omega))),
                "max_abs_band_sum": float(np.max(np.abs(np.sum(fld.omega, axis=-1)))),
                "flagged_fraction": float(fld.flags.mean())}
        if g["chern"]:
            try:
                info["chern_lower_pair"] = chern_number(p, (0, 1), min(g["n"], 64)).value
            except GapClosureError as exc:
                info["chern_lower_pair"] = None
                info["chern_note"] = str(exc)
        summary[label] = info
    return tables, summary, EXIT_OK


def cmd_ahc(cfg):
    g = cfg["grid"]
    t = SweepTable(["u_over_v", "mu", "sigma_xy", "flagged_fraction", "drift"],
                   ["", "u", "e^2/h", "", "e^2/h"])
    summary = {}
    for label, p in case_params(cfg):
        fld = curvature_field(p, g["n"])
        fld2 = curvature_field(p, 2 * g["n"]) if g["grid_doubling"] else None
        rows = []
        for mu in g["mu_values"]:
            r = anomalous_hall(p, mu, g["n"], fld=fld)
            drift = float("nan")
            if fld2 is not None:
                drift = abs(anomalous_hall(p, mu, 2 * g["n"], fld=fld2).value - r.value)
            status = "edge" if r.edge_warning else "ok"
            t.add([_ratio(p), float(mu), r.value, r.flagged_fraction, drift], status)
            rows.append({"mu": mu, "sigma_xy": r.value, "drift": drift, "edge": r.edge_warning})
        summary[label] = rows
    return {"ahc": t}, summary, EXIT_OK


def _ratio(p):
    return float(p.u / p.v) if p.v != 0 else float("inf")


def cmd_nernst(cfg):
    g = cfg["grid"]
    t = SweepTable(["u_over_v", "mu", "T", "alpha_xy", "flagged_fraction"],
                   ["", "u", "u", "e u / h", ""])
    summary = {"mode": g["nernst_mode"], "smearing": g["smearing"], "cases": {}}
    for label, p in case_params(cfg):
        fld = curvature_field(p, g["n"])
        rows = []
        for mu in g["mu_values"]:
            for T in g["T_values"]:
                r = nernst(p, mu, T, g["n"], g["nernst_mode"], g["smearing"], fld=fld)
                t.add([_ratio(p), float(mu), float(T), r.value, r.flagged_fraction])
                rows.append({"mu": mu, "T": T, "alpha_xy": r.value})
        summary["cases"][label] = {"u_over_v": _ratio(p), "values": rows}
    return {"nernst": t}, summary, EXIT_OK


def cmd_circuit(cfg):
    c = cfg["circuit"]
    circ = circuit_params(cfg)
    sweeps = tbr_sweep(circ, c["R_list"], tuple(c["omega_range"]), c["samples"], tuple(c["k"]),
                       c["log"])
    tables, crossings = {}, []
    for sw in sweeps:
        t = SweepTable(["omega"] + [f"re_E{j}" for j in range(1, 5)]
                       + [f"re_lambda{j}" for j in range(1, 5)], ["1/s"] + ["S/s"] * 8)
        for i, w in enumerate(sw.omegas):
            status = "ok" if not sw.flags[i].any() else "complex-branch"
            t.add([float(w)] + [float(v) for v in sw.branches[i]]
                  + [float(v) for v in sw.oracle_branches[i]], status)
        tables[f"circuit_R{sw.R:g}"] = t
        for b, w, br in sw.crossings:
            crossings.append([sw.R, "closed-form", b, w, br[0], br[1]])
        for b, w, br in sw.oracle_crossings:
            crossings.append([sw.R, "laplacian", b, w, br[0], br[1]])
    ct = SweepTable(["R", "source", "branch", "omega", "bracket_lo", "bracket_hi"],
                    ["ohm", "", "", "1/s", "1/s", "1/s"])
    for row in crossings:
        ct.add(row)
    tables["circuit_crossings"] = ct
    adm = c["admittance"]
    y = two_point_admittance(circ, adm["beta"], adm["beta_p"], tuple(adm["r"]), adm["n"])
    summary = {
        "resonance_omega": resonance_frequency(c["L1"], c["L2"], c["C"]),
        "omega": circ.omega,
        "tbr": {f"{sw.R:g}": {"compliant": sw.tbr_compliant,
                              "crossings": [{"branch": b, "omega": w} for b, w, _ in sw.crossings],
                              "laplacian_crossings": [{"branch": b, "omega": w}
                                                      for b, w, _ in sw.oracle_crossings]}
                for sw in sweeps},
        "admittance": {"value": y.value, "flagged": y.flagged, "grid": y.grid, **adm},
    }
    if c["k_sensitivity"]:
        rows, spread = crossing_k_sensitivity(circ, 1, tuple(c["omega_range"]))
        summary["k_sensitivity"] = {"rows": rows, "relative_spread": spread}
    return tables, summary, EXIT_OK


def cmd_realspace(cfg):
    g, tol = cfg["grid"], cfg["tolerances"]["realspace"]
    tables, summary, code = {}, {}, EXIT_OK
    for label, p in case_params(cfg):
        info = {}
        for n in g["sizes"]:
            t, dist = bloch_consistency_report(p, n, n)
            tables[f"realspace_{label}_{n}x{n}"] = t
            if not math.isfinite(dist):
                raise NumericalFailure(f"finite-lattice eigensolve failed for {label} at {n}x{n}")
            info[f"{n}x{n}"] = {"max_distance": dist, "consistent": dist < tol}
        summary[label] = info
    return tables, summary, code


def cmd_validate(cfg):
    v = cfg["validate"]
    models = [p for _, p in case_params(cfg)]
    circuits = [circuit_params(cfg)] if v["circuit"] else []
    log = run_validation(models, circuits, tuple(v["checks"]), v["samples"], v["seed"],
                         cfg["tolerances"]["validate"])
    summary = {**log.summary(), "checks": v["checks"], "errata": log.as_dicts()}
    code = EXIT_MISMATCH if log.entries else EXIT_OK
    return {"errata": log.table()}, summary, code


HANDLERS = {"bands": cmd_bands, "symmetry": cmd_symmetry, "ep-scan": cmd_ep_scan, "zak": cmd_zak,
            "berry": cmd_berry, "ahc": cmd_ahc, "nernst": cmd_nernst, "circuit": cmd_circuit,
            "realspace": cmd_realspace, "validate": cmd_validate}


# --- driver -------------------------------------------------------------------

def run_command(name: str, cfg: dict, out: Path, argv_text: str) -> int:
    out.mkdir(parents=True, exist_ok=True)
    tables, summary, code = HANDLERS[name](cfg)
    for fname, table in tables.items():
        table.write_csv(out / f"{fname}.csv", argv_text, cfg)
    doc = {"command": name, "version": __version__, "config_sha256": config_hash(cfg),
           "exit_code": code, "files": sorted(f"{f}.csv" for f in tables), "results": summary}
    with open(out / f"{name}_summary.json", "w", encoding="utf-8") as fh:
        json.dump(_clean(doc), fh, indent=2, sort_keys=True)
        fh.write("\n")
    return code


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="nhssh", description=__doc__.split("\n")[0])
    ap.add_argument("--version", action="version", version=f"nhssh {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)
    for name in COMMANDS + ("run",):
        sp = sub.add_parser(name, help="run the config's command list" if name == "run" else None)
        sp.add_argument("--config", required=True, help="JSON config file")
        sp.add_argument("--out", help="output directory (overrides the config)")
        sp.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                        help="override a config entry by dotted path; value parsed as JSON")
    return ap


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    args = build_parser().parse_args(argv)
    argv_text = "nhssh " + " ".join(argv)
    try:
        cfg = load_config(args.config, args.set)
    except ConfigError as exc:
        print(f"invalid config: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    out = Path(args.out or cfg["output"])
    if args.command == "run":
        cmds = cfg.get("command")
        if cmds is None:
            print("invalid config: 'run' needs a 'command' entry", file=sys.stderr)
            return EXIT_CONFIG
        cmds = [cmds] if isinstance(cmds, str) else list(cmds)
    else:
        cmds = [args.command]
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "config.resolved.json", "w", encoding="utf-8") as fh:
        json.dump(cfg, fh, indent=2, sort_keys=True)
        fh.write("\n")
    worst = EXIT_OK
    for name in cmds:
        try:
            code = run_command(name, cfg, out, argv_text)
        except (NumericalFailure, GapClosureError, np.linalg.LinAlgError, FloatingPointError,
                ArithmeticError) as exc:
            diag = {"command": name, "error": type(exc).__name__, "message": str(exc),
                    "k": getattr(exc, "k", None), "traceback": traceback.format_exc()}
            with open(out / "diagnostic.json", "w", encoding="utf-8") as fh:
                json.dump(_clean(diag), fh, indent=2)
            print(f"numerical failure in {name}: {exc} (see {out / 'diagnostic.json'})",
                  file=sys.stderr)
            return EXIT_NUMERIC
        except ValueError as exc:
            print(f"invalid config for {name}: {exc}", file=sys.stderr)
            return EXIT_CONFIG
        worst = max(worst, code)
    return worst


if __name__ == "__main__":
    sys.exit(main())
