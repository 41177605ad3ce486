"""Zak phases, Berry curvature, Chern numbers and anomalous transport.

Units: hbar = e = k_B = 1.  Conductivities are returned in units of e^2/h
(``sigma``) and k_B e / hbar per unit cell (``alpha``); temperatures are
k_B T in units of the hopping ``u``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from ._parallel import chunks, ordered_map
from .closed_form import eigvec_piece_derivatives, eigvec_pieces
from .model import ModelParams, bloch_derivatives, build_bloch

ZAK_MODES = ("determinant", "band-sum")
CURVATURE_METHODS = ("kubo", "appendix-B", "finite-difference")
REG_FLOOR = 1e-6  # degeneracy floor, relative to the bandwidth


class GapClosureError(RuntimeError):
    """Occupied and empty bands touch on a loop or grid."""

    def __init__(self, message, k=None):
        super().__init__(message)
        self.k = k


class NonHermitianError(ValueError):
    pass


def _require_hermitian(params: ModelParams):
    if not params.hermitian:
        raise NonHermitianError(
            "Berry curvature and transport are defined here only for the Hermitian "
            f"regime (all gains zero); got gains={params.gains}")


# --- Zak phase ----------------------------------------------------------------

@dataclass(frozen=True)
class ZakResult:
    direction: str
    transverse_k: float
    phase: float
    segments: int
    mode: str
    phase_half: float
    min_gap: float
    bands: tuple = (2, 4)

    @property
    def converged_delta(self) -> float:
        """|phase(N) - phase(N/2)| on the circle."""
        d = abs(self.phase - self.phase_half) % (2 * np.pi)
        return min(d, 2 * np.pi - d)


def occupied_subspace(h: np.ndarray):
    """Orthonormal basis of the invariant subspace of the two lowest-Re eigenvalues.

    Returns (basis 4x2, separation Re E3 - Re E2).  A Schur basis stays well
    conditioned at exceptional points inside the occupied pair, where the
    individual eigenvectors do not.
    """
    w = np.linalg.eigvals(h)
    re = np.sort(w.real)
    gap = re[2] - re[1]
    thr = 0.5 * (re[1] + re[2])
    _, z, sdim = sla.schur(h, output="complex", sort=lambda e: e.real < thr)
    if sdim != 2:
        return None, 0.0
    return z[:, :2], float(gap)


def _occupied_bands(h: np.ndarray):
    """Two lowest-Re right eigenvectors, unit norm, plus their energies."""
    w, v = np.linalg.eig(h)
    o = np.lexsort((np.round(w.imag, 12), np.round(w.real, 12)))
    w, v = w[o], v[:, o]
    v = v / np.linalg.norm(v, axis=0)
    return w[:2], v[:, :2], float(w[2].real - w[1].real)


def _loop_momenta(direction, transverse_k, n, a):
    ks = -np.pi / a + np.arange(n) * 2 * np.pi / (n * a)
    if direction == "x":
        return ks, np.full(n, transverse_k)
    if direction == "y":
        return np.full(n, transverse_k), ks
    raise ValueError(f"direction must be 'x' or 'y', got {direction!r}")


def _wilson_phase(params, direction, transverse_k, n, mode, gap_tol, gauge=None):
    kx, ky = _loop_momenta(direction, transverse_k, n, params.a)
    hs = build_bloch(params, kx, ky)
    min_gap = np.inf
    if mode == "determinant":
        bases = []
        for i in range(n):
            q, gap = occupied_subspace(hs[i])
            if q is None or gap < gap_tol:
                raise GapClosureError(
                    f"occupied/empty gap closes on the {direction}-loop at k=({kx[i]:.6g}, {ky[i]:.6g})",
                    (float(kx[i]), float(ky[i])))
            min_gap = min(min_gap, gap)
            if gauge is not None:
                q = q @ gauge(i)
            bases.append(q)
        w = np.eye(2, dtype=complex)
        for i in range(n):
            w = w @ (bases[i].conj().T @ bases[(i + 1) % n])
        phase = -np.angle(np.linalg.det(w))
    elif mode == "band-sum":
        vecs = []
        for i in range(n):
            _, v, gap = _occupied_bands(hs[i])
            if gap < gap_tol:
                raise GapClosureError(
                    f"occupied/empty gap closes on the {direction}-loop at k=({kx[i]:.6g}, {ky[i]:.6g})",
                    (float(kx[i]), float(ky[i])))
            min_gap = min(min_gap, gap)
            if gauge is not None:
                v = v * np.asarray(gauge(i))[None, :]
            vecs.append(v)
        # continuity tracking and a per-band parallel-transport gauge; the
        # closing link then carries each band's holonomy
        cur = vecs[0]
        first = cur
        prod = 1.0 + 0j
        for i in range(1, n + 1):
            nxt = vecs[i] if i < n else first
            if i < n:
                m = np.abs(cur.conj().T @ nxt)
                if m[0, 0] + m[1, 1] < m[0, 1] + m[1, 0]:
                    nxt = nxt[:, ::-1]
                ov = np.sum(cur.conj() * nxt, axis=0)
                nxt = nxt * np.conj(ov / np.abs(ov))
            prod *= np.sum(cur.conj() * nxt)
            cur = nxt
        phase = -np.angle(prod)
    else:
        raise ValueError(f"mode must be one of {ZAK_MODES}, got {mode!r}")
    return float(np.mod(phase, 2 * np.pi)), float(min_gap)


def zak_phase(params: ModelParams, direction: str = "x", transverse_k: float = 0.0,
              N: int = 1024, mode: str = "determinant", gap_tol: float = 1e-8,
              gauge=None) -> ZakResult:
    """Discrete Wilson-loop Zak phase of the two lowest bands along one direction.

    ``mode='determinant'`` uses the non-Abelian loop det prod Q_i^dag Q_{i+1}
    on orthonormal occupied-subspace bases.  ``mode='band-sum'`` multiplies
    the band-summed overlaps sum_j <u_j(k_i)|u_j(k_{i+1})> of individually
    tracked bands.  ``gauge`` (test hook) maps the loop index to a 2x2
    unitary (determinant) or two phases (band-sum) applied before overlaps.
    Phases are returned in [0, 2 pi).
    """
    if N < 16:
        raise ValueError("need at least 16 segments")
    phase, gap = _wilson_phase(params, direction, transverse_k, N, mode, gap_tol, gauge)
    half, _ = _wilson_phase(params, direction, transverse_k, N // 2, mode, gap_tol)
    return ZakResult(direction, float(transverse_k), phase, N, mode, half, gap)


def snap_distance(phase: float) -> float:
    """Distance on the circle from ``phase`` to the nearest of {0, pi}."""
    d0 = min(phase % (2 * np.pi), 2 * np.pi - phase % (2 * np.pi))
    return min(d0, abs(np.pi - d0))


def zak_transverse_average(params: ModelParams, direction: str = "x", n_perp: int = 32,
                           N: int = 256, mode: str = "determinant", gap_tol: float = 1e-8):
    """Average of the loop phase over midpoint transverse momenta.

    Lines whose loop closes the gap are excluded; returns
    (mean phase, excluded fraction, per-line phases with NaN for excluded).
    """
    a = params.a
    ks = -np.pi / a + (np.arange(n_perp) + 0.5) * 2 * np.pi / (n_perp * a)

    def one(k):
        try:
            return zak_phase(params, direction, k, N, mode, gap_tol).phase
        except GapClosureError:
            return np.nan

    phases = np.array(ordered_map(one, ks))
    ok = np.isfinite(phases)
    mean = float(np.mean(phases[ok])) if ok.any() else float("nan")
    return mean, float(1 - ok.mean()), phases


def zak_map(params: ModelParams, ratios, N: int = 1024, transverse_k: float = 0.0,
            mode: str = "determinant", gap_tol: float = 1e-8):
    """Zak phases over u/v with t1 = u, t2 = v (u held fixed).

    Returns ``(rows, transitions)``: each row is a dict with ratio, phi_x,
    phi_y and status; transitions are ratios bracketing a jump between the
    two quantized values, refined by bisection on the ratio.
    """
    u = params.u

    def template(r):
        v = u / r
        return params.with_(t1=u, v=v, t2=v)

    def one(r):
        row = {"ratio": float(r)}
        status = []
        for d in ("x", "y"):
            try:
                res = zak_phase(template(r), d, transverse_k, N, mode, gap_tol)
                row[f"phi_{d}"] = res.phase
                row[f"gap_{d}"] = res.min_gap
            except GapClosureError:
                row[f"phi_{d}"] = float("nan")
                row[f"gap_{d}"] = 0.0
                status.append(f"gap-closed-{d}")
        row["status"] = ";".join(status) or "ok"
        return row

    rows = ordered_map(one, list(ratios))
    transitions = []
    for d in ("x", "y"):
        key = f"phi_{d}"
        for r0, r1 in zip(rows, rows[1:]):
            p0, p1 = r0[key], r1[key]
            if not (np.isfinite(p0) and np.isfinite(p1)):
                continue
            if quantum_index(p0) != quantum_index(p1):
                lo, hi = r0["ratio"], r1["ratio"]
                q0 = quantum_index(p0)
                for _ in range(40):
                    mid = 0.5 * (lo + hi)
                    try:
                        pm = zak_phase(template(mid), d, transverse_k, max(64, N // 4), mode,
                                       gap_tol).phase
                    except GapClosureError:
                        # the gap closes at the transition itself
                        break
                    if quantum_index(pm) == q0:
                        lo = mid
                    else:
                        hi = mid
                transitions.append({"direction": d, "ratio": 0.5 * (lo + hi),
                                    "bracket": (lo, hi), "from": q0, "to": quantum_index(p1)})
    return rows, transitions


def quantum_index(phase):
    """0 or 1 for the nearest of {0, pi} on the circle."""
    d0 = min(phase % (2 * np.pi), 2 * np.pi - phase % (2 * np.pi))
    return int(d0 > np.pi / 2)


# --- Berry curvature ----------------------------------------------------------

def kubo_curvature(h, dx, dy, floor: float | None = None):
    """Per-band curvature of Hermitian matrices by the sum-over-states formula.

    Works on stacks (..., n, n).  Returns (omega (..., n), energies, flags)
    where ``flags[..., a]`` marks bands whose energy denominators were
    floored at ``floor`` (default (1e-6 * bandwidth)^2).
    """
    e, v = np.linalg.eigh(h)
    xm = np.einsum("...ia,...ij,...jb->...ab", v.conj(), dx, v)
    ym = np.einsum("...ia,...ij,...jb->...ab", v.conj(), dy, v)
    de2 = (e[..., :, None] - e[..., None, :]) ** 2
    if floor is None:
        bw = np.max(e, axis=-1) - np.min(e, axis=-1)
        floor = (REG_FLOOR * np.maximum(bw, 1e-300)) ** 2
        floor = np.asarray(floor)[..., None, None]
    n = h.shape[-1]
    off = ~np.eye(n, dtype=bool)
    small = (de2 < floor) & off
    den = np.where(off, np.maximum(de2, floor), 1.0)
    terms = np.where(off, xm * np.swapaxes(ym, -1, -2) / den, 0.0)
    omega = -2 * np.imag(np.sum(terms, axis=-1))
    return omega, e, np.any(small, axis=-1)


def _hermitian_states(params, kx, ky):
    return np.linalg.eigh(build_bloch(params, kx, ky))


def plaquette_curvature(states, kx, ky, band, h=1e-3):
    """-arg of the overlap product around a small square / area.

    ``states(kx, ky)`` must return (energies, vectors) with sorted bands.
    ``band`` may be an int or a sequence (non-Abelian product via det).
    """
    idx = np.atleast_1d(band)
    corners = [(kx - h / 2, ky - h / 2), (kx + h / 2, ky - h / 2),
               (kx + h / 2, ky + h / 2), (kx - h / 2, ky + h / 2)]
    vs = [states(*c)[1][..., idx] for c in corners]
    prod = 1.0 + 0j
    for i in range(4):
        prod = prod * np.linalg.det(np.swapaxes(vs[i].conj(), -1, -2) @ vs[(i + 1) % 4])
    return -np.angle(prod) / h**2


def appendix_b_curvature(params: ModelParams, kx: float, ky: float, band: int,
                         variant: str = "printed"):
    """Curvature from the P/Q split of the closed-form eigenvector pieces.

    The band energy and its gradient come from the Hermitian oracle
    (Hellmann-Feynman); the pieces and their partial derivatives are the
    closed-form ones, so any defect in them shows up directly here.
    """
    _require_hermitian(params)
    e, v = _hermitian_states(params, kx, ky)
    dx, dy = bloch_derivatives(params, kx, ky)
    psi = v[:, band]
    E = e[band]
    dEx = float(np.real(np.vdot(psi, dx @ psi)))
    dEy = float(np.real(np.vdot(psi, dy @ psi)))
    d = eigvec_pieces(params, kx, ky, E, variant).pieces.real
    px, py, pe = (x.real for x in eigvec_piece_derivatives(params, kx, ky, E, variant))
    ddx = px + pe * dEx
    ddy = py + pe * dEy
    N = np.sum(d**2)
    dNx = 2 * np.sum(d * ddx)
    dNy = 2 * np.sum(d * ddy)

    def part(dd, dN, k):
        return -0.5 * N**-1.5 * dN * d[k::2] + N**-0.5 * dd[k::2]

    P_x, Q_x = part(ddx, dNx, 0), part(ddx, dNx, 1)
    P_y, Q_y = part(ddy, dNy, 0), part(ddy, dNy, 1)
    return float(-2 * np.sum(P_x * Q_y - Q_x * P_y))


@dataclass(frozen=True)
class CurvatureValue:
    value: float
    method: str
    flagged: bool = False


def berry_curvature(params: ModelParams, kx: float, ky: float, band: int,
                    method: str = "kubo", h: float = 1e-3, variant: str = "printed") -> CurvatureValue:
    """Omega_z of band 0..3 (sorted ascending) at one momentum."""
    _require_hermitian(params)
    if method == "kubo":
        dx, dy = bloch_derivatives(params, kx, ky)
        om, _, flags = kubo_curvature(build_bloch(params, kx, ky), dx, dy)
        return CurvatureValue(float(om[band]), method, bool(flags[band]))
    if method == "finite-difference":
        val = plaquette_curvature(lambda x, y: _hermitian_states(params, x, y), kx, ky, band, h)
        return CurvatureValue(float(val), method)
    if method == "appendix-B":
        return CurvatureValue(appendix_b_curvature(params, kx, ky, band, variant), method)
    raise ValueError(f"method must be one of {CURVATURE_METHODS}, got {method!r}")


def midpoint_grid(n: int, a: float = 1.0):
    k = -np.pi / a + (np.arange(n) + 0.5) * 2 * np.pi / (n * a)
    return np.meshgrid(k, k, indexing="xy")


@dataclass(frozen=True)
class CurvatureField:
    kx: np.ndarray
    ky: np.ndarray
    omega: np.ndarray  # (n, n, 4)
    energies: np.ndarray  # (n, n, 4)
    flags: np.ndarray  # (n, n, 4)
    method: str = "kubo"


def curvature_field(params: ModelParams, n: int, chunk_rows: int = 16) -> CurvatureField:
    """Kubo curvature of all bands on an n-by-n midpoint grid.

    Rows are evaluated in independent chunks (threaded) and reassembled in
    grid order, so the result does not depend on the thread count.
    """
    _require_hermitian(params)
    KX, KY = midpoint_grid(n, params.a)

    def work(sl):
        h = build_bloch(params, KX[sl], KY[sl])
        dx, dy = bloch_derivatives(params, KX[sl], KY[sl])
        return kubo_curvature(h, dx, dy)

    parts = ordered_map(work, chunks(n, chunk_rows))
    om = np.concatenate([p[0] for p in parts])
    e = np.concatenate([p[1] for p in parts])
    fl = np.concatenate([p[2] for p in parts])
    return CurvatureField(KX, KY, om, e, fl)


# --- transport ----------------------------------------------------------------

def fermi(e, mu, T):
    """Fermi function; a step (with 1/2 at e = mu) when T = 0."""
    x = np.asarray(e, dtype=float) - mu
    if T == 0:
        return np.where(x < 0, 1.0, np.where(x > 0, 0.0, 0.5))
    return 0.5 * (1 - np.tanh(x / (2 * T)))


def minus_dfde(e, mu, T):
    """-df/dE, written via cosh to stay finite for any argument."""
    x = (np.asarray(e, dtype=float) - mu) / (2 * T)
    return 1.0 / (4 * T * np.cosh(np.clip(x, -350, 350)) ** 2)


def log1p_exp(x):
    """log(1 + e^x) without overflow."""
    x = np.asarray(x, dtype=float)
    return np.where(x < 0, np.log1p(np.exp(np.minimum(x, 0))), x + np.log1p(np.exp(-np.abs(x))))


def entropy_density(e, mu, T):
    """s = ((e - mu)/T) f + log(1 + e^{(mu - e)/T})."""
    x = (np.asarray(e, dtype=float) - mu) / T
    return x * fermi(e, mu, T) + log1p_exp(-x)


@dataclass(frozen=True)
class TransportResult:
    value: float
    quantity: str
    mu: float
    T: float
    grid: int
    mode: str
    flagged_fraction: float = 0.0
    edge_warning: bool = False
    extras: dict = field(default_factory=dict)


def _weighted_integral(fld: CurvatureField, weight):
    """sum over grid and bands of Omega * weight * d^2k, flagged cells dropped."""
    dk = fld.kx[0, 1] - fld.kx[0, 0]
    ok = ~fld.flags
    integrand = np.where(ok, fld.omega * weight, 0.0)
    # fixed summation order: bands, then rows, then columns
    return float(np.sum(np.sum(np.sum(integrand, axis=-1), axis=-1), axis=-1) * dk * dk), \
        float(1 - ok.mean())


def anomalous_hall(params: ModelParams, mu: float = 0.0, n: int = 128, T: float = 0.0,
                   edge_tol: float = 1e-6, fld: CurvatureField | None = None) -> TransportResult:
    """sigma_xy / (e^2/h) = (1/2 pi) sum_bands int d^2k f(E - mu) Omega."""
    _require_hermitian(params)
    if n < 32:
        raise ValueError("grid must be at least 32x32")
    fld = fld or curvature_field(params, n)
    total, bad = _weighted_integral(fld, fermi(fld.energies, mu, T))
    edge = bool(np.min(np.abs(fld.energies - mu)) < edge_tol)
    return TransportResult(total / (2 * np.pi), "sigma_xy", mu, T, n,
                           "zero-T" if T == 0 else "finite-T", bad, edge)


def nernst(params: ModelParams, mu: float = 0.0, T: float = 0.05, n: int = 128,
           mode: str = "finite-T", smearing: float = 0.02,
           fld: CurvatureField | None = None) -> TransportResult:
    """Anomalous Nernst coefficient alpha_xy.

    finite-T : sum int d^2k/(2 pi)^2 Omega s(E)
    low-T    : (pi^2 T / 3) sum int d^2k/(2 pi)^2 Omega (-df/dE), with -df/dE
               evaluated at the fixed broadening ``smearing`` so the result is
               exactly linear in T.
    """
    _require_hermitian(params)
    if T <= 0:
        raise ValueError("temperature must be positive")
    fld = fld or curvature_field(params, n)
    if mode == "finite-T":
        total, bad = _weighted_integral(fld, entropy_density(fld.energies, mu, T))
        value = total / (2 * np.pi) ** 2
    elif mode == "low-T":
        total, bad = _weighted_integral(fld, minus_dfde(fld.energies, mu, smearing))
        value = np.pi**2 * T / 3 * total / (2 * np.pi) ** 2
    else:
        raise ValueError(f"mode must be 'finite-T' or 'low-T', got {mode!r}")
    return TransportResult(float(value), "alpha_xy", mu, T, n, mode, bad,
                           extras={"smearing": smearing} if mode == "low-T" else {})


# --- Chern number -------------------------------------------------------------

@dataclass(frozen=True)
class ChernResult:
    value: float
    bands: tuple
    grid: int

    @property
    def distance_to_integer(self) -> float:
        return float(abs(self.value - round(self.value)))


def chern_from_states(vectors: np.ndarray) -> float:
    """Lattice Chern number from a periodic grid of occupied frames.

    ``vectors`` has shape (n, n, dim, m): rows ky, columns kx.
    """
    v = vectors
    vx = np.roll(v, -1, axis=1)
    vy = np.roll(v, -1, axis=0)
    vxy = np.roll(vx, -1, axis=0)

    def link(a, b):
        return np.linalg.det(np.swapaxes(a.conj(), -1, -2) @ b)

    prod = link(v, vx) * link(vx, vxy) * link(vxy, vy) * link(vy, v)
    flux = -np.angle(prod)
    return float(np.sum(flux) / (2 * np.pi))


def chern_number(params: ModelParams, bands=(0, 1), n: int = 64, gap_tol: float = 1e-8,
                 gauge=None) -> ChernResult:
    """Plaquette Chern number of a band set (indices into the sorted spectrum).

    ``gauge`` (test hook) maps (n, n, m) random phases onto the frames.
    """
    _require_hermitian(params)
    bands = tuple(int(b) for b in bands)
    k = 2 * np.pi * np.arange(n) / (n * params.a)
    KX, KY = np.meshgrid(k, k, indexing="xy")
    e, v = np.linalg.eigh(build_bloch(params, KX, KY))
    sel = list(bands)
    rest = [b for b in range(4) if b not in sel]
    if rest:
        gap = np.min(np.abs(e[..., sel][..., :, None] - e[..., rest][..., None, :]))
        if gap < gap_tol:
            i = np.unravel_index(np.argmin(np.min(np.abs(
                e[..., sel][..., :, None] - e[..., rest][..., None, :]), axis=(-1, -2))), KX.shape)
            raise GapClosureError(f"band set {bands} touches the rest at k=({KX[i]:.6g}, {KY[i]:.6g})",
                                  (float(KX[i]), float(KY[i])))
    frames = v[..., sel]
    if gauge is not None:
        frames = frames * gauge[..., None, :]
    return ChernResult(chern_from_states(frames), bands, n)
