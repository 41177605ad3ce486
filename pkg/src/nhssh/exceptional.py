"""Exceptional-point search: discriminant zeros, coalescence and self-orthogonality.

Two independent routes locate degeneracies on a line ``ky = const``:

* sign changes (and touching zeros) of a discriminant, either the printed
  closed form or the oracle one ``(tr H^2/4)^2 - det H``, refined by
  bisection;
* golden-section minimization of the smallest oracle eigenvalue gap.

A degeneracy is an EP only if the eigenvectors coalesce as well.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import mpmath as mp
import numpy as np
import scipy.linalg as sla
from scipy.optimize import minimize, minimize_scalar

from ._parallel import ordered_map
from .closed_form import (closed_form_energies, closed_form_pieces, eigvec_pieces,
                          oracle_discriminant)
from .model import ModelParams, build_bloch
from .spectrum import batch_energies

TOL_E = 1e-8
TOL_V = 1e-2
PAIRINGS = ("conjugated", "bilinear")


# --- self-orthogonality -------------------------------------------------------

@dataclass(frozen=True)
class SelfOrthogonality:
    """N1, N2 under the primary pairing, plus every evaluated alternative.

    ``alternatives`` maps ``(variant, pairing)`` to ``(N1, N2)``.
    ``rigidity`` is the smallest biorthogonal phase rigidity
    |<L|R>| / (|L| |R|) over the four oracle bands; it vanishes at an EP.
    """

    kx: float
    ky: float
    N1: complex
    N2: complex
    pairing: str
    variant: str
    alternatives: dict = field(default_factory=dict)
    rigidity: float = float("nan")

    @property
    def magnitudes(self) -> tuple[float, float]:
        return abs(self.N1), abs(self.N2)


def _n_sums(params, kx, ky, variant):
    """Both pairings of N1, N2 over the four closed-form bands (broadcasting)."""
    energies = closed_form_energies(params, kx, ky)
    n1c = n2c = n1b = n2b = 0
    for band in range(4):
        psi = eigvec_pieces(params, kx, ky, energies[..., band], variant).psi
        n1c = n1c + np.abs(psi[..., 0]) ** 2
        n2c = n2c + np.abs(psi[..., 1]) ** 2
        n1b = n1b + psi[..., 0] ** 2
        n2b = n2b + psi[..., 1] ** 2
    return {"conjugated": (n1c, n2c), "bilinear": (n1b, n2b)}


def n_scan(params: ModelParams, kx, ky, pairing="conjugated", variant="printed"):
    """Vectorized (N1, N2) over momenta for one pairing/variant."""
    if pairing not in PAIRINGS:
        raise ValueError(f"pairing must be one of {PAIRINGS}, got {pairing!r}")
    return _n_sums(params, kx, ky, variant)[pairing]


def phase_rigidity(h: np.ndarray) -> np.ndarray:
    """Per-band |<L|R>| / (|L| |R|) for one matrix."""
    w, vl, vr = sla.eig(h, left=True, right=True)
    num = np.abs(np.sum(vl.conj() * vr, axis=0))
    return num / (np.linalg.norm(vl, axis=0) * np.linalg.norm(vr, axis=0))


def self_orthogonality(params: ModelParams, kx: float, ky: float,
                       pairing: str = "conjugated", variant: str = "printed") -> SelfOrthogonality:
    if pairing not in PAIRINGS:
        raise ValueError(f"pairing must be one of {PAIRINGS}, got {pairing!r}")
    alts = {}
    for var in ("printed", "corrected"):
        for pr, (n1, n2) in _n_sums(params, kx, ky, var).items():
            alts[(var, pr)] = (complex(n1), complex(n2))
    n1, n2 = alts[(variant, pairing)]
    rig = float(np.min(phase_rigidity(build_bloch(params, kx, ky))))
    return SelfOrthogonality(float(kx), float(ky), n1, n2, pairing, variant, alts, rig)


def bz_median_magnitudes(params: ModelParams, n: int = 64, pairing="conjugated",
                         variant="printed") -> tuple[float, float]:
    """Median of |N1| and |N2| over an n-by-n midpoint grid of the zone."""
    k = (np.arange(n) + 0.5) * 2 * np.pi / (n * params.a) - np.pi / params.a
    KX, KY = np.meshgrid(k, k)
    n1, n2 = n_scan(params, KX, KY, pairing, variant)
    return float(np.median(np.abs(n1))), float(np.median(np.abs(n2)))


# --- discriminant roots -------------------------------------------------------

@dataclass(frozen=True)
class Root:
    kx: float
    bracket: tuple[float, float]
    value: float
    kind: str  # "crossing" or "touch"


def discriminant(params: ModelParams, kx, ky, source: str = "closed-form"):
    if source == "closed-form":
        return closed_form_pieces(params, kx, ky).J
    if source == "oracle":
        return oracle_discriminant(params, kx, ky)
    raise ValueError(f"source must be 'closed-form' or 'oracle', got {source!r}")


def _bisect(f, lo, hi, flo, tol=1e-12, maxiter=200):
    fm = flo
    for _ in range(maxiter):
        mid = 0.5 * (lo + hi)
        fm = f(mid)
        if abs(fm) < tol and hi - lo < 1e-13:
            break
        if fm == 0:
            return mid, (lo, hi), fm
        if np.sign(fm) == np.sign(flo):
            lo, flo = mid, fm
        else:
            hi = mid
        if hi - lo <= 4 * np.finfo(float).eps * max(1.0, abs(mid)):
            break
    return 0.5 * (lo + hi), (lo, hi), fm


def scan_discriminant_zeros(params: ModelParams, ky: float, kx_range=(-np.pi, np.pi),
                            n: int = 2001, source: str = "closed-form",
                            touch_tol: float = 1e-10) -> list[Root]:
    """Roots of J(kx) at fixed ky, ordered by kx.

    Sign changes are bisected until |J| < 1e-12 or the bracket reaches
    machine resolution.  Sampled local minima of |J| that do not change sign
    are refined by bounded minimization and kept as ``touch`` roots when
    |J| < ``touch_tol``.
    """
    if n < 3:
        raise ValueError("need at least 3 samples")
    xs = np.linspace(kx_range[0], kx_range[1], n)
    js = discriminant(params, xs, ky, source)
    f = lambda x: float(discriminant(params, x, ky, source))  # noqa: E731
    roots = []
    for i in range(n - 1):
        a, b = js[i], js[i + 1]
        if a == 0:
            roots.append(Root(float(xs[i]), (float(xs[i]), float(xs[i])), 0.0, "crossing"))
        elif a * b < 0:
            x, br, v = _bisect(f, xs[i], xs[i + 1], a)
            roots.append(Root(float(x), tuple(map(float, br)), float(v), "crossing"))
    absj = np.abs(js)
    for i in range(1, n - 1):
        if absj[i] <= absj[i - 1] and absj[i] <= absj[i + 1] and js[i - 1] * js[i + 1] > 0 \
                and np.sign(js[i]) == np.sign(js[i - 1]):
            res = minimize_scalar(lambda x: abs(f(x)), bounds=(xs[i - 1], xs[i + 1]),
                                  method="bounded", options={"xatol": 1e-13})
            if res.fun < touch_tol:
                roots.append(Root(float(res.x), (float(xs[i - 1]), float(xs[i + 1])),
                                  float(f(res.x)), "touch"))
    roots.sort(key=lambda r: r.kx)
    # adjacent sampled minima of one flat touch give overlapping brackets
    out = []
    for r in roots:
        if out and r.kind == out[-1].kind == "touch" and r.bracket[0] <= out[-1].bracket[1]:
            if abs(r.value) < abs(out[-1].value):
                out[-1] = r
            continue
        out.append(r)
    return out


def min_pair_gap(params: ModelParams, kx, ky) -> np.ndarray:
    """Smallest |E_i - E_j| over oracle eigenvalue pairs (broadcasting)."""
    e = batch_energies(params, kx, ky)
    d = np.abs(e[..., :, None] - e[..., None, :])
    d = d + np.where(np.eye(4, dtype=bool), np.inf, 0.0)
    return np.min(d, axis=(-2, -1))


def golden_gap_minimum(params: ModelParams, ky: float, bracket: tuple[float, float]):
    """Golden-section minimization of the oracle pair gap inside a bracket."""
    lo, hi = bracket
    res = minimize_scalar(lambda x: float(min_pair_gap(params, x, ky)),
                          bracket=(lo, 0.5 * (lo + hi), hi) if lo < hi else None,
                          method="golden", tol=1e-12)
    return float(res.x), float(res.fun)


# --- EP detection -------------------------------------------------------------

@dataclass(frozen=True)
class ExceptionalPoint:
    kx: float
    ky: float
    bands: tuple[int, int]
    gap: float
    oracle_gap: float
    coalescence: float
    J: float
    self_orth: tuple[float, float]
    classification: str
    energy: complex


def _mp_discriminant(params, kx, ky, prec=60):
    """High-precision (J, A) from the oracle algebra."""
    with mp.workdps(prec):
        h = mp.matrix(4, 4)
        ex = mp.expj(params.a * mp.mpf(kx))
        ey = mp.expj(params.a * mp.mpf(ky))
        s = params.u + params.t1 * ex
        q = params.v + params.t2 * ey
        r = params.t1 + params.u * ex
        p = params.t2 + params.v / ey
        for i, g in enumerate(params.gains):
            h[i, i] = mp.mpc(-params.mu, g)
        h[0, 1], h[1, 0] = s, mp.conj(s)
        h[1, 2], h[2, 1] = q, mp.conj(q)
        h[2, 3], h[3, 2] = r, mp.conj(r)
        h[0, 3], h[3, 0] = p, mp.conj(p)
        h2 = h * h
        A = sum(h2[i, i] for i in range(4)) / 4
        return A * A - mp.det(h), A


def _refine_mp(params, ky, bracket, fn, prec=60, iters=160):
    """Bisection of a real-valued mp function of kx at fixed ky."""
    with mp.workdps(prec):
        lo, hi = mp.mpf(bracket[0]), mp.mpf(bracket[1])
        flo = mp.re(fn(params, lo, ky)[0])
        for _ in range(iters):
            mid = (lo + hi) / 2
            fm = mp.re(fn(params, mid, ky)[0])
            if fm == 0:
                return mid
            if mp.sign(fm) == mp.sign(flo):
                lo, flo = mid, fm
            else:
                hi = mid
        return (lo + hi) / 2


def _coalescence(h, i, j):
    _, v = np.linalg.eig(h)
    w = np.linalg.eigvals(h)
    order = np.lexsort((np.round(w.imag, 12), np.round(w.real, 12)))
    v = v[:, order]
    vi, vj = v[:, i], v[:, j]
    return float(abs(np.vdot(vi, vj)) / (np.linalg.norm(vi) * np.linalg.norm(vj)))


def classify_point(params: ModelParams, kx: float, ky: float, tol_e: float = TOL_E,
                   tol_v: float = TOL_V, gap_override: float | None = None,
                   J: float = float("nan")) -> ExceptionalPoint:
    """Classify the closest eigenvalue pair at k as EP or accidental degeneracy."""
    h = build_bloch(params, kx, ky)
    e = batch_energies(params, kx, ky)
    d = np.abs(e[:, None] - e[None, :]) + np.diag(np.full(4, np.inf))
    i, j = np.unravel_index(np.argmin(d), d.shape)
    i, j = int(min(i, j)), int(max(i, j))
    oracle_gap = float(d[i, j])
    gap = oracle_gap if gap_override is None else gap_override
    coal = _coalescence(h, i, j)
    scale = max(1.0, float(np.max(np.abs(e))))
    if params.is_uniform:
        so = self_orthogonality(params, kx, ky).magnitudes
    else:
        so = (float("nan"), float("nan"))
    if gap < tol_e * scale and coal > 1 - tol_v:
        label = "EP"
    else:
        label = "accidental-degeneracy"
    return ExceptionalPoint(float(kx), float(ky), (i + 1, j + 1), float(gap), oracle_gap,
                            coal, float(J), so, label, complex(0.5 * (e[i] + e[j])))


def _mp_det(params, kx, ky, prec=60):
    J, A = _mp_discriminant(params, kx, ky, prec)
    return A * A - J, A


def _line_values(params, xs, ky, name):
    if name == "J":
        return oracle_discriminant(params, xs, ky)
    return np.linalg.det(build_bloch(params, xs, ky)).real


def _mp_sign_change(params, ky, bracket, fn):
    with mp.workdps(60):
        a = mp.re(fn(params, mp.mpf(bracket[0]), ky)[0])
        b = mp.re(fn(params, mp.mpf(bracket[1]), ky)[0])
        return a * b <= 0


def _degeneracy_gap(params, x, ky, name):
    """High-precision splitting of the merging pair at a refined zero."""
    with mp.workdps(60):
        J, A = _mp_discriminant(params, x, ky)
        rj = mp.sqrt(J)
        if name == "J":
            # sqrt(A + sqrt J) and sqrt(A - sqrt J) merge
            gap = abs(mp.sqrt(A + rj) - mp.sqrt(A - rj))
        else:
            # +-sqrt of the vanishing squared root merge at E = 0
            gap = 2 * abs(mp.sqrt(min(A - rj, A + rj, key=abs)))
        return float(gap), float(mp.re(J))


def _row_points(params, ky, kx_range, n, tol_e, tol_v):
    """Degeneracies on one row: J zeros (E^2 coalescence) and det zeros (E = 0).

    Sign changes are confirmed and bisected in 60-digit arithmetic; touching
    zeros (no sign change, as for Hermitian degeneracies) are found as sampled
    local minima of |f| and refined by bounded minimization.
    """
    xs = np.linspace(kx_range[0], kx_range[1], n)
    pts = []
    for name, fn in (("J", _mp_discriminant), ("det", _mp_det)):
        vals = _line_values(params, xs, ky, name)
        scale = max(1.0, float(np.max(np.abs(vals))))
        for i in range(n - 1):
            if vals[i] * vals[i + 1] < 0 or vals[i] == 0:
                if not _mp_sign_change(params, ky, (xs[i], xs[i + 1]), fn):
                    continue
                x = _refine_mp(params, ky, (xs[i], xs[i + 1]), fn)
                gap, J = _degeneracy_gap(params, x, ky, name)
                pts.append(classify_point(params, float(x), float(ky), tol_e, tol_v,
                                          gap_override=gap, J=J))
        absv = np.abs(vals)
        for i in range(1, n - 1):
            if not (absv[i] < absv[i - 1] and absv[i] <= absv[i + 1]
                    and vals[i - 1] * vals[i] > 0 and vals[i] * vals[i + 1] > 0):
                continue
            res = minimize_scalar(lambda x: abs(float(_line_values(params, x, ky, name))),
                                  bounds=(xs[i - 1], xs[i + 1]), method="bounded",
                                  options={"xatol": 1e-14})
            if res.fun > 1e-10 * scale:
                continue
            pts.append(classify_point(params, float(res.x), float(ky), tol_e, tol_v,
                                      J=float(oracle_discriminant(params, res.x, ky))))
    pts.sort(key=lambda p: p.kx)
    # the same point can be found as both a J and a det zero
    out = []
    for p in pts:
        if not out or abs(p.kx - out[-1].kx) > 1e-9:
            out.append(p)
    return out


def detect_ep(params: ModelParams, region=(-np.pi, np.pi, -np.pi, np.pi), n: int = 32,
              tol_e: float = TOL_E, tol_v: float = TOL_V) -> list[ExceptionalPoint]:
    """EPs and accidental degeneracies inside a k-rectangle.

    For the uniform gain pattern at mu = 0 each grid row is scanned for sign
    changes of the oracle discriminant and of det H, and every bracket is
    refined at 60-digit precision, which resolves the square-root splitting
    of a defective point far below double precision.  Otherwise candidates
    are local minima of the oracle pair gap refined by Nelder-Mead.
    """
    if n < 8:
        raise ValueError("grid must be at least 8x8")
    kx0, kx1, ky0, ky1 = region
    kys = np.linspace(ky0, ky1, n)
    if params.is_uniform and params.mu == 0:
        rows = ordered_map(lambda ky: _row_points(params, ky, (kx0, kx1), n, tol_e, tol_v), kys)
        return [p for r in rows for p in r]
    kxs = np.linspace(kx0, kx1, n)
    KX, KY = np.meshgrid(kxs, kys)
    gaps = min_pair_gap(params, KX, KY)
    pts = []
    for iy in range(n):
        for ix in range(n):
            nb = gaps[max(0, iy - 1):iy + 2, max(0, ix - 1):ix + 2]
            if gaps[iy, ix] > np.min(nb) or gaps[iy, ix] > 1e-2 * max(1.0, float(np.max(gaps))):
                continue
            res = minimize(lambda k: float(min_pair_gap(params, k[0], k[1])),
                           [KX[iy, ix], KY[iy, ix]], method="Nelder-Mead",
                           options={"xatol": 1e-12, "fatol": 1e-14})
            pts.append(classify_point(params, float(res.x[0]), float(res.x[1]), tol_e, tol_v))
    return pts


def ep_line_scan(params: ModelParams, ky: float = 0.0, kx_range=(-np.pi, np.pi), n: int = 256,
                 tol_e: float = TOL_E, tol_v: float = TOL_V) -> list[ExceptionalPoint]:
    """Degeneracies along the single row ``ky`` (uniform gains, mu = 0)."""
    if not (params.is_uniform and params.mu == 0):
        raise ValueError("line scan requires the uniform gain pattern at mu = 0")
    return _row_points(params, ky, kx_range, max(n, 8), tol_e, tol_v)
