"""Erratum log: every published closed form measured against its oracle.

Each check returns a list of :class:`Erratum` entries, one per sample whose
deviation exceeds the tolerance, so the log is complete by construction:
a disagreement that is not in the log was never observed.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .circuit import CircuitParams, circuit_spectrum_closed, laplacian_eigenvalues
from .closed_form import (closed_form_energies, closed_form_pieces, eigvec_pieces,
                          oracle_discriminant, relative_residual)
from .exceptional import scan_discriminant_zeros
from .model import ModelParams
from .spectrum import batch_energies, matching_distance
from .tables import SweepTable
from .topology import appendix_b_curvature, berry_curvature

CHECKS = ("discriminant", "energies", "eigenvectors", "discriminant-roots",
          "appendix-B", "circuit")


@dataclass(frozen=True)
class Erratum:
    check: str
    params: str
    k: tuple
    printed: float
    oracle: float
    deviation: float
    tolerance: float
    note: str = ""


def _pstr(p) -> str:
    if isinstance(p, ModelParams):
        return "u={} t1={} v={} t2={} mu={} gains={}".format(
            p.u, p.t1, p.v, p.t2, p.mu, "/".join(f"{g:g}" for g in p.gains))
    return "L1={} L2={} C={} R={} omega={:.9g} R_L={}".format(
        p.L1, p.L2, p.C, p.R, p.omega, p.R_L)


def sample_momenta(n: int, seed: int = 0, a: float = 1.0):
    rng = np.random.default_rng(seed)
    return rng.uniform(-np.pi / a, np.pi / a, size=(n, 2))


def check_discriminant(params, ks, tol=1e-9):
    out = []
    jp = closed_form_pieces(params, ks[:, 0], ks[:, 1]).J
    jo = oracle_discriminant(params, ks[:, 0], ks[:, 1])
    scale = np.maximum(1.0, np.abs(jo))
    for (kx, ky), a, b, s in zip(ks, jp, jo, scale):
        dev = abs(a - b) / s
        if dev > tol:
            out.append(Erratum("discriminant", _pstr(params), (float(kx), float(ky)), float(a),
                               float(b), float(dev), tol, "printed J vs (tr H^2/4)^2 - det H"))
    return out


def check_energies(params, ks, tol=1e-9):
    out = []
    cf = closed_form_energies(params, ks[:, 0], ks[:, 1])
    orc = batch_energies(params, ks[:, 0], ks[:, 1])
    for (kx, ky), a, b in zip(ks, cf, orc):
        dist, _ = matching_distance(a, b)
        if dist > tol:
            out.append(Erratum("energies", _pstr(params), (float(kx), float(ky)),
                               float(np.max(np.abs(a))), float(np.max(np.abs(b))), float(dist), tol,
                               "multiset matching distance, closed-form vs oracle"))
    return out


def check_eigenvectors(params, ks, tol=1e-8, variant="printed"):
    """Relative residual of the closed-form vectors at the oracle energies."""
    out = []
    orc = batch_energies(params, ks[:, 0], ks[:, 1])
    for (kx, ky), es in zip(ks, orc):
        for band, E in enumerate(es):
            psi = eigvec_pieces(params, kx, ky, E, variant).psi
            res = relative_residual(params, kx, ky, E, psi)
            if not np.isfinite(res):
                note = "zero vector (defective flag)"
                res = float("inf")
            else:
                note = f"band {band + 1} relative residual ({variant} pieces)"
            if res > tol:
                out.append(Erratum("eigenvectors", _pstr(params), (float(kx), float(ky)),
                                   float("nan"), 0.0, float(res), tol, note))
    return out


def check_discriminant_roots(params, ky=0.0, tol=0.05, n=2001):
    """Printed-J roots vs oracle-J roots on one line."""
    rp = [r.kx for r in scan_discriminant_zeros(params, ky, n=n, source="closed-form")]
    ro = [r.kx for r in scan_discriminant_zeros(params, ky, n=n, source="oracle")]
    out = []
    for x in ro:
        near = min((abs(x - y) for y in rp), default=float("inf"))
        if near > tol:
            out.append(Erratum("discriminant-roots", _pstr(params), (float(x), float(ky)),
                               float("nan") if not rp else float(min(rp, key=lambda y: abs(x - y))),
                               float(x), float(near), tol, "oracle root without printed counterpart"))
    for y in rp:
        near = min((abs(x - y) for x in ro), default=float("inf"))
        if near > tol:
            out.append(Erratum("discriminant-roots", _pstr(params), (float(y), float(ky)), float(y),
                               float("nan") if not ro else float(min(ro, key=lambda x: abs(x - y))),
                               float(near), tol, "printed root without oracle counterpart"))
    return out


def check_appendix_b(params, ks, rtol=1e-4, atol=1e-8, variant="printed"):
    out = []
    for kx, ky in ks:
        for band in range(4):
            ref = berry_curvature(params, kx, ky, band, "kubo")
            if ref.flagged:
                continue
            val = appendix_b_curvature(params, kx, ky, band, variant)
            dev = abs(val - ref.value)
            if dev > atol + rtol * abs(ref.value):
                out.append(Erratum("appendix-B", _pstr(params), (float(kx), float(ky)), float(val),
                                   float(ref.value), float(dev), rtol,
                                   f"band {band + 1} curvature, {variant} pieces vs Kubo"))
    return out


def check_circuit(circ: CircuitParams, omegas, ks, tol=1e-9):
    """Closed-form branches vs Laplacian eigenvalues (real parts, relative to |b|)."""
    out = []
    for w in omegas:
        c = circ.at(float(w))
        for kx, ky in ks:
            cf = np.sort(circuit_spectrum_closed(c, kx, ky).real)
            orc = np.sort(laplacian_eigenvalues(c, kx, ky).real)
            scale = max(abs(c.b), abs(c.a1) + abs(c.a2))
            dist, _ = matching_distance(cf, orc)
            dev = dist / scale
            if dev > tol:
                out.append(Erratum("circuit", _pstr(c), (float(kx), float(ky)), float(cf[-1]),
                                   float(orc[-1]), float(dev), tol,
                                   "Re branches vs Re Laplacian eigenvalues (relative)"))
    return out


@dataclass
class ErratumLog:
    entries: list
    counts: dict
    samples: dict

    def by_check(self, name):
        return [e for e in self.entries if e.check == name]

    def covers(self, check: str, k, tol=1e-12) -> bool:
        return any(e.check == check and abs(e.k[0] - k[0]) < tol and abs(e.k[1] - k[1]) < tol
                   for e in self.entries)

    def table(self) -> SweepTable:
        t = SweepTable(["check", "params", "kx", "ky", "printed", "oracle", "deviation",
                        "tolerance", "note"])
        for e in self.entries:
            t.add([e.check, e.params, e.k[0], e.k[1], e.printed, e.oracle, e.deviation,
                   e.tolerance, e.note], "mismatch")
        return t

    def summary(self) -> dict:
        return {"counts": self.counts, "samples": self.samples,
                "total_mismatches": len(self.entries)}

    def as_dicts(self):
        return [asdict(e) for e in self.entries]


def run_validation(model_sets, circuit_sets=(), checks=CHECKS, n_samples=200, seed=0,
                   tol=1e-9, circuit_omegas=(1e4, 3e4, 1e5, 1e6), circuit_ks=((0.0, 0.0), (0.5, 0.5), (1.0, 0.3))):
    """Run the selected checks and collect a complete erratum log."""
    unknown = set(checks) - set(CHECKS)
    if unknown:
        raise ValueError(f"unknown checks {sorted(unknown)}")
    entries, counts, samples = [], {c: 0 for c in checks}, {c: 0 for c in checks}
    for i, p in enumerate(model_sets):
        ks = sample_momenta(n_samples, seed + i, p.a)
        if p.is_uniform and p.mu == 0:
            if "discriminant" in checks:
                e = check_discriminant(p, ks, tol)
                entries += e
                counts["discriminant"] += len(e)
                samples["discriminant"] += len(ks)
            if "energies" in checks:
                e = check_energies(p, ks, tol)
                entries += e
                counts["energies"] += len(e)
                samples["energies"] += len(ks)
            if "eigenvectors" in checks:
                e = check_eigenvectors(p, ks[:50])
                entries += e
                counts["eigenvectors"] += len(e)
                samples["eigenvectors"] += 4 * len(ks[:50])
            if "discriminant-roots" in checks:
                e = check_discriminant_roots(p)
                entries += e
                counts["discriminant-roots"] += len(e)
                samples["discriminant-roots"] += 1
        if "appendix-B" in checks and p.hermitian:
            e = check_appendix_b(p, ks[:25])
            entries += e
            counts["appendix-B"] += len(e)
            samples["appendix-B"] += 4 * len(ks[:25])
    if "circuit" in checks:
        for c in circuit_sets:
            e = check_circuit(c, circuit_omegas, circuit_ks)
            entries += e
            counts["circuit"] += len(e)
            samples["circuit"] += len(circuit_omegas) * len(circuit_ks)
    return ErratumLog(entries, counts, samples)
