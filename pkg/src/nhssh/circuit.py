"""Topoelectric RLC circuit: Laplacian, resonance, TBR sweeps and admittance.

SI units throughout (henry, farad, ohm, 1/s).  The Laplacian J relates node
currents and voltages by I = i omega J V with

    a_i = 1 / (omega^2 L_i)            (ideal inductors)
    a_i = 1 / (omega^2 L_i - i omega R_L)  (series loss R_L on each inductor)
    b   = C - i/(R omega) - 2 a_1 - 2 a_2
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np
from scipy.optimize import brentq

from ._parallel import ordered_map


@dataclass(frozen=True)
class CircuitParams:
    L1: float
    L2: float
    C: float
    R: float
    omega: float
    R_L: float = 0.0
    transpose: bool = False

    def __post_init__(self):
        for name in ("L1", "L2", "C", "R", "omega"):
            val = getattr(self, name)
            if not (np.isfinite(val) and val > 0):
                raise ValueError(f"{name} must be a positive finite number, got {val}")
        if not (np.isfinite(self.R_L) and self.R_L >= 0):
            raise ValueError(f"R_L must be non-negative, got {self.R_L}")

    @property
    def a1(self) -> complex | float:
        return _bond(self.omega, self.L1, self.R_L)

    @property
    def a2(self) -> complex | float:
        return _bond(self.omega, self.L2, self.R_L)

    @property
    def b(self) -> complex:
        return self.C - 1j / (self.R * self.omega) - 2 * self.a1 - 2 * self.a2

    def at(self, omega: float) -> "CircuitParams":
        return replace(self, omega=omega)


def _bond(omega, L, R_L):
    if R_L == 0:
        return 1.0 / (omega**2 * L)
    return 1.0 / (omega**2 * L - 1j * omega * R_L)


def resonance_frequency(L1: float, L2: float, C: float) -> float:
    """omega* = sqrt(2 / ((L1 + L2) C)).

    Note this does not zero C - 2 a1 - 2 a2 for a_i = 1/(omega^2 L_i); that
    happens at sqrt(2 (1/L1 + 1/L2) / C) instead.
    """
    if not (L1 > 0 and L2 > 0 and C > 0):
        raise ValueError("L1, L2 and C must be positive")
    return float(np.sqrt(2.0 / ((L1 + L2) * C)))


def circuit_laplacian(circ: CircuitParams, kx, ky) -> np.ndarray:
    """4x4 Laplacian (broadcasting over k); ``transpose`` flips the phase convention."""
    kx, ky = np.broadcast_arrays(np.asarray(kx, dtype=float), np.asarray(ky, dtype=float))
    a1, a2, b = circ.a1, circ.a2, circ.b

    def bond(k):
        return a2 + a1 * np.exp(1j * k)

    j = np.zeros(kx.shape + (4, 4), dtype=complex)
    for i in range(4):
        j[..., i, i] = b
    j[..., 0, 1], j[..., 1, 0] = bond(-kx), bond(kx)
    j[..., 1, 2], j[..., 2, 1] = bond(-ky), bond(ky)
    j[..., 2, 3], j[..., 3, 2] = bond(-kx), bond(kx)
    j[..., 0, 3], j[..., 3, 0] = bond(-ky), bond(ky)
    if circ.transpose:
        j = np.swapaxes(j, -1, -2)
    return j


@dataclass(frozen=True)
class ClosedCircuitSpectrum:
    """Four branches E1..E4 and their radicand diagnostics.

    E1 = c + sqrt(r + P + sqrt(D)),  E2 = c + sqrt(r + P - sqrt(D)),
    E3 = c - sqrt(r + P + sqrt(D)),  E4 = c - sqrt(r + P - sqrt(D)),
    c = C - 2 a1 - 2 a2, r = 1/(R omega)^2, D = P^2 - Q^2.
    """

    values: np.ndarray  # (..., 4) complex
    inner: np.ndarray  # D
    flags: np.ndarray  # (..., 4) bool: branch non-real

    @property
    def real(self) -> np.ndarray:
        return self.values.real


def pq(circ: CircuitParams, kx, ky):
    a1, a2 = circ.a1, circ.a2
    kx = np.asarray(kx, dtype=float)
    ky = np.asarray(ky, dtype=float)
    P = 2 * a1**2 + 2 * a1 * a2 * (np.cos(kx) + np.cos(ky)) + 2 * a2**2
    Q2 = (sum((2 * a1**2 + 2 * a1 * a2 * np.cos(k) + 2 * a2**2) ** 2 for k in (kx, ky))
          - (a1**2 + 2 * a1 * a2 * np.cos(ky) + a2**2)
          * (2 * a2**2 + 4 * a1 * a2 * np.cos(kx) + 2 * a1**2 * np.cos(2 * kx)))
    return P, Q2


def circuit_spectrum_closed(circ: CircuitParams, kx, ky) -> ClosedCircuitSpectrum:
    P, Q2 = pq(circ, kx, ky)
    c = circ.C - 2 * circ.a1 - 2 * circ.a2
    r = 1.0 / (circ.R * circ.omega) ** 2
    D = np.asarray(P**2 - Q2, dtype=complex)
    sD = np.sqrt(D)
    o1 = np.sqrt(r + P + sD + 0j)
    o2 = np.sqrt(r + P - sD + 0j)
    vals = np.stack(np.broadcast_arrays(c + o1, c + o2, c - o1, c - o2), axis=-1)
    scale = np.maximum(np.abs(vals), 1e-300)
    flags = np.abs(vals.imag) > 1e-12 * scale
    return ClosedCircuitSpectrum(vals, D, flags)


def laplacian_eigenvalues(circ: CircuitParams, kx, ky) -> np.ndarray:
    """Oracle eigenvalues of the Laplacian sorted by real part."""
    w = np.linalg.eigvals(circuit_laplacian(circ, kx, ky))
    return np.take_along_axis(w, np.argsort(w.real, axis=-1, kind="stable"), axis=-1)


@dataclass(frozen=True)
class TbrSweep:
    R: float
    omegas: np.ndarray
    branches: np.ndarray  # (n, 4) real parts of E1..E4
    crossings: list  # (branch 1..4, omega, bracket)
    oracle_branches: np.ndarray  # (n, 4) real parts of sorted Laplacian eigenvalues
    oracle_crossings: list
    flags: np.ndarray  # (n, 4)
    k: tuple = (0.0, 0.0)
    extras: dict = field(default_factory=dict)

    def branch_crosses(self, branch: int) -> bool:
        return any(b == branch for b, _, _ in self.crossings)

    @property
    def tbr_compliant(self) -> bool:
        """Both E1 and E2 reach zero inside the sweep."""
        return self.branch_crosses(1) and self.branch_crosses(2)


def _crossings(f, omegas, values, rtol=1e-6):
    out = []
    for b in range(values.shape[1]):
        col = values[:, b]
        for i in range(len(omegas) - 1):
            if col[i] == 0 or col[i] * col[i + 1] < 0:
                lo, hi = omegas[i], omegas[i + 1]
                if col[i] == 0:
                    root = lo
                else:
                    root = brentq(lambda w: f(w)[b], lo, hi, xtol=1e-12 * lo, rtol=rtol * 1e-3)
                out.append((b + 1, float(root), (float(lo), float(hi))))
    return out


def tbr_sweep(circ: CircuitParams, R_list, omega_range=(5e3, 2e5), samples: int = 512,
              k=(0.0, 0.0), log: bool = True) -> list[TbrSweep]:
    """Real parts of the closed-form branches (and the oracle) over omega, per R."""
    if samples < 64:
        raise ValueError("need at least 64 omega samples")
    lo, hi = omega_range
    if not 0 < lo < hi:
        raise ValueError("omega range must satisfy 0 < lo < hi")
    omegas = np.geomspace(lo, hi, samples) if log else np.linspace(lo, hi, samples)
    kx, ky = k

    def one(R):
        base = replace(circ, R=float(R))

        def closed_at(w):
            return circuit_spectrum_closed(base.at(w), kx, ky).real

        def oracle_at(w):
            return laplacian_eigenvalues(base.at(w), kx, ky).real

        cl = [circuit_spectrum_closed(base.at(w), kx, ky) for w in omegas]
        vals = np.array([c.real for c in cl])
        flags = np.array([c.flags for c in cl])
        orc = np.array([oracle_at(w) for w in omegas])
        return TbrSweep(float(R), omegas, vals, _crossings(closed_at, omegas, vals), orc,
                        _crossings(oracle_at, omegas, orc), flags, (float(kx), float(ky)))

    return ordered_map(one, list(R_list))


def crossing_k_sensitivity(circ: CircuitParams, branch: int = 1, omega_range=(5e3, 2e5),
                           samples: int = 256, k_grid=None):
    """First zero crossing of one branch at several k; returns (rows, relative spread)."""
    if k_grid is None:
        k_grid = [(x, y) for x in (0.0, 0.5, 1.0) for y in (0.0, 0.5, 1.0)]
    rows = []
    for kx, ky in k_grid:
        sw = tbr_sweep(circ, [circ.R], omega_range, samples, (kx, ky))[0]
        hits = [w for b, w, _ in sw.crossings if b == branch]
        rows.append({"kx": kx, "ky": ky, "omega": hits[0] if hits else float("nan")})
    ws = np.array([r["omega"] for r in rows])
    ok = ws[np.isfinite(ws)]
    spread = float((ok.max() - ok.min()) / ok.mean()) if ok.size else float("nan")
    return rows, spread


@dataclass(frozen=True)
class Admittance:
    value: complex
    flagged: int  # number of regularized eigenvalues
    grid: int


def two_point_admittance(circ: CircuitParams, beta: int, beta_p: int, r=(0, 0),
                         n: int = 16, floor: float = 1e-12) -> Admittance:
    """Y = { (1/N_k) sum_{k,alpha} |zeta(k,beta) - zeta(k,beta') e^{ik.r}|^2 / J_{k,alpha} }^-1.

    ``beta``, ``beta_p`` are node labels 1..4; ``r`` an integer cell offset;
    k runs over the n-by-n periodic grid 2 pi m / n.  Eigenvalues below
    ``floor * ||J||`` in magnitude are floored (keeping their phase) and
    counted in ``flagged``.
    """
    if beta not in (1, 2, 3, 4) or beta_p not in (1, 2, 3, 4):
        raise ValueError("node labels must be in 1..4")
    rx, ry = r
    if beta == beta_p and rx == 0 and ry == 0:
        raise ValueError("admittance of a node with itself is undefined")
    k = 2 * np.pi * np.arange(n) / n
    KX, KY = np.meshgrid(k, k, indexing="xy")
    lap = circuit_laplacian(circ, KX, KY)
    w, v = np.linalg.eig(lap)
    v = v / np.linalg.norm(v, axis=-2, keepdims=True)
    norm = np.max(np.abs(lap), axis=(-2, -1))[..., None]
    tiny = np.abs(w) < floor * norm
    w = np.where(tiny, floor * norm * np.exp(1j * np.angle(w)), w)
    phase = np.exp(1j * (KX * rx + KY * ry))[..., None]
    diff = np.abs(v[..., beta - 1, :] - v[..., beta_p - 1, :] * phase) ** 2
    total = np.sum(diff / w) / (n * n)
    return Admittance(complex(1.0 / total), int(np.sum(tiny)), n)
