"""Bloch and real-space Hamiltonians of the 2D non-Hermitian SSH lattice.

Basis order inside a unit cell is (A, B, C, D).  Bonds:

    A-B : u intra-cell, t1 from A(R) to B(R + x)
    C-D : t1 intra-cell, u from C(R) to D(R + x)
    B-C : v intra-cell, t2 from B(R) to C(R + y)
    D-A : t2 intra-cell, v from D(R) to A(R + y)

On-site terms are i*gamma_P - mu.  Energies are in units of ``u`` by
convention, momenta in units of 1/a.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

SUBLATTICES = ("A", "B", "C", "D")

# Pauli matrices
S0 = np.eye(2, dtype=complex)
SX = np.array([[0, 1], [1, 0]], dtype=complex)
SY = np.array([[0, -1j], [1j, 0]], dtype=complex)
SZ = np.array([[1, 0], [0, -1]], dtype=complex)

PHS_OP = np.kron(S0, SZ)
CHIRAL_OP = np.kron(SY, SY)
MIRROR_OP = np.kron(SX, SZ)
TRS_OP = 1j * np.kron(S0, SY)
# the other tensor order for the unitary part of T
TRS_OP_SWAPPED = 1j * np.kron(SY, S0)


@dataclass(frozen=True)
class ModelParams:
    """Full parameter set of the lattice model.

    ``gains`` holds the imaginary on-site potentials (gamma_A .. gamma_D).
    Use :meth:`uniform` for the (g, -g, -g, g) pattern and :meth:`prime`
    for (g1, -g1, g2, -g2).
    """

    u: float = 1.0
    t1: float = 1.0
    v: float = 0.75
    t2: float = 0.75
    mu: float = 0.0
    a: float = 1.0
    gains: tuple[float, float, float, float] = (0.0, 0.0, 0.0, 0.0)

    def __post_init__(self):
        if not self.a > 0:
            raise ValueError(f"lattice constant must be positive, got {self.a}")
        hops = (self.u, self.t1, self.v, self.t2, self.mu)
        if not all(np.isfinite(h) and np.isreal(h) for h in hops):
            raise ValueError("hoppings and mu must be finite real numbers")
        gains = tuple(float(g) for g in self.gains)
        if len(gains) != 4 or not all(np.isfinite(gains)):
            raise ValueError("gains must be four finite real numbers")
        object.__setattr__(self, "gains", gains)

    @classmethod
    def uniform(cls, u=1.0, t1=1.0, v=0.75, t2=0.75, gamma=0.0, mu=0.0, a=1.0):
        return cls(u, t1, v, t2, mu, a, (gamma, -gamma, -gamma, gamma))

    @classmethod
    def prime(cls, u=1.0, t1=1.0, v=0.75, t2=0.75, gamma1=0.0, gamma2=0.0,
              mu=0.0, a=1.0):
        return cls(u, t1, v, t2, mu, a, (gamma1, -gamma1, gamma2, -gamma2))

    @property
    def is_uniform(self) -> bool:
        g = self.gains
        return g[1] == -g[0] and g[2] == -g[0] and g[3] == g[0]

    @property
    def gamma(self) -> float:
        """Gain strength of the uniform pattern."""
        if not self.is_uniform:
            raise ValueError(
                f"gain pattern {self.gains} is not of the uniform (g, -g, -g, g) form")
        return self.gains[0]

    @property
    def hermitian(self) -> bool:
        return not any(self.gains)

    def with_(self, **changes) -> "ModelParams":
        """Copy with fields replaced; ``gamma=`` rebuilds a uniform pattern."""
        if "gamma" in changes:
            g = changes.pop("gamma")
            changes["gains"] = (g, -g, -g, g)
        return replace(self, **changes)

    def to_dict(self) -> dict:
        return {"u": self.u, "t1": self.t1, "v": self.v, "t2": self.t2,
                "mu": self.mu, "a": self.a, "gains": list(self.gains)}

    @classmethod
    def from_dict(cls, d: dict) -> "ModelParams":
        d = dict(d)
        gamma = d.pop("gamma", None)
        gamma12 = (d.pop("gamma1", None), d.pop("gamma2", None))
        p = cls(**{k: (tuple(v) if k == "gains" else v) for k, v in d.items()})
        if gamma is not None:
            p = p.with_(gamma=gamma)
        if gamma12 != (None, None):
            g1, g2 = (g or 0.0 for g in gamma12)
            p = replace(p, gains=(g1, -g1, g2, -g2))
        return p


def reduce_momentum(k, a: float = 1.0):
    """Map wavenumbers into the first zone (-pi/a, pi/a]."""
    k = np.asarray(k, dtype=float)
    period = 2 * np.pi / a
    r = np.mod(k + np.pi / a, period) - np.pi / a
    # -pi/a belongs to the other edge
    return np.where(np.isclose(r, -np.pi / a, rtol=0, atol=1e-15 * period), np.pi / a, r)


def bond_amplitudes(params: ModelParams, kx, ky):
    """Return the four k-dependent bond sums (s, q, r, p).

    s = u + t1 e^{i a kx}   (A,B)     q = v + t2 e^{i a ky}  (B,C)
    r = t1 + u e^{i a kx}   (C,D)     p = t2 + v e^{-i a ky} (A,D)
    """
    ex = np.exp(1j * params.a * np.asarray(kx, dtype=float))
    ey = np.exp(1j * params.a * np.asarray(ky, dtype=float))
    s = params.u + params.t1 * ex
    q = params.v + params.t2 * ey
    r = params.t1 + params.u * ex
    p = params.t2 + params.v * np.conj(ey)
    return s, q, r, p


def build_bloch(params: ModelParams, kx, ky) -> np.ndarray:
    """Bloch matrix H(k); broadcasts over array-valued ``kx``, ``ky``.

    The result has shape ``broadcast(kx, ky).shape + (4, 4)``.
    """
    kx, ky = np.broadcast_arrays(np.asarray(kx, dtype=float), np.asarray(ky, dtype=float))
    s, q, r, p = bond_amplitudes(params, kx, ky)
    h = np.zeros(kx.shape + (4, 4), dtype=complex)
    for i, g in enumerate(params.gains):
        h[..., i, i] = 1j * g - params.mu
    h[..., 0, 1], h[..., 1, 0] = s, np.conj(s)
    h[..., 1, 2], h[..., 2, 1] = q, np.conj(q)
    h[..., 2, 3], h[..., 3, 2] = r, np.conj(r)
    h[..., 0, 3], h[..., 3, 0] = p, np.conj(p)
    return h


def bloch_derivatives(params: ModelParams, kx, ky):
    """Analytic dH/dkx and dH/dky (same broadcasting as :func:`build_bloch`)."""
    kx, ky = np.broadcast_arrays(np.asarray(kx, dtype=float), np.asarray(ky, dtype=float))
    a = params.a
    ex = np.exp(1j * a * kx)
    ey = np.exp(1j * a * ky)
    dx = np.zeros(kx.shape + (4, 4), dtype=complex)
    dy = np.zeros(kx.shape + (4, 4), dtype=complex)
    ds = 1j * a * params.t1 * ex
    dr = 1j * a * params.u * ex
    dx[..., 0, 1], dx[..., 1, 0] = ds, np.conj(ds)
    dx[..., 2, 3], dx[..., 3, 2] = dr, np.conj(dr)
    dq = 1j * a * params.t2 * ey
    dp = -1j * a * params.v * np.conj(ey)
    dy[..., 1, 2], dy[..., 2, 1] = dq, np.conj(dq)
    dy[..., 0, 3], dy[..., 3, 0] = dp, np.conj(dp)
    return dx, dy


@dataclass(frozen=True)
class SymmetryReport:
    """Max-norm defects of the symmetry identities at one momentum.

    ``residuals`` holds the four named symmetries; ``alternatives`` holds
    the other operator conventions that were also evaluated.
    """

    residuals: dict
    alternatives: dict = field(default_factory=dict)

    def holds(self, name: str, tol: float = 1e-10) -> bool:
        table = {**self.residuals, **self.alternatives}
        return table[name] <= tol


def _defect(x) -> float:
    return float(np.max(np.abs(x)))


def symmetry_residuals(params: ModelParams, kx: float, ky: float) -> SymmetryReport:
    """Evaluate the PHS, TRS, chiral and chiral-mirror identities at k.

    PHS          : P conj(H(k)) P^-1 + H(-k)
    chiral       : C H(k) C^-1 + H(k)
    chiral-mirror: M H(k) M^-1 + H(k)
    TRS          : U conj(H(k)) U^-1 - H(-k),  T = U K
    """
    h = build_bloch(params, kx, ky)
    hm = build_bloch(params, -kx, -ky)

    def conj_by(op, m):
        return op @ m @ np.linalg.inv(op)

    residuals = {
        "PHS": _defect(conj_by(PHS_OP, h.conj()) + hm),
        "TRS": _defect(conj_by(TRS_OP, h.conj()) - hm),
        "chiral": _defect(conj_by(CHIRAL_OP, h) + h),
        "chiral-mirror": _defect(conj_by(MIRROR_OP, h) + h),
    }
    alternatives = {
        "TRS-swapped-order": _defect(conj_by(TRS_OP_SWAPPED, h.conj()) - hm),
        "TRS-spinless": _defect(h.conj() - hm),
        "chiral-mirror-commuting": _defect(conj_by(MIRROR_OP, h) - h),
    }
    return SymmetryReport(residuals, alternatives)


@dataclass(frozen=True)
class RealSpaceHamiltonian:
    matrix: np.ndarray
    nx: int
    ny: int
    bc: str

    def index(self, x: int, y: int, sub: int | str) -> int:
        """Row of (cell x, cell y, sublattice); cells row-major, x fastest."""
        if isinstance(sub, str):
            sub = SUBLATTICES.index(sub)
        return 4 * (x + self.nx * y) + sub

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]


def build_real_space(params: ModelParams, nx: int, ny: int, bc: str = "PBC") -> RealSpaceHamiltonian:
    """Finite-lattice Hamiltonian with periodic or open boundaries."""
    if nx < 1 or ny < 1:
        raise ValueError(f"lattice size must be at least 1x1, got {nx}x{ny}")
    bc = bc.upper()
    if bc not in ("PBC", "OBC"):
        raise ValueError(f"boundary condition must be PBC or OBC, got {bc!r}")
    periodic = bc == "PBC"
    n = 4 * nx * ny
    h = np.zeros((n, n), dtype=complex)
    idx = lambda x, y, s: 4 * (x + nx * y) + s  # noqa: E731

    def hop(i, j, t):
        # accumulate: for nx or ny = 1 the wrap bond lands on the intra-cell pair
        h[i, j] += t
        h[j, i] += np.conj(t)

    A, B, C, D = range(4)
    for y in range(ny):
        for x in range(nx):
            for s, g in enumerate(params.gains):
                h[idx(x, y, s), idx(x, y, s)] = 1j * g - params.mu
            hop(idx(x, y, A), idx(x, y, B), params.u)
            hop(idx(x, y, C), idx(x, y, D), params.t1)
            hop(idx(x, y, B), idx(x, y, C), params.v)
            hop(idx(x, y, A), idx(x, y, D), params.t2)
            if x + 1 < nx or periodic:
                xp = (x + 1) % nx
                hop(idx(x, y, A), idx(xp, y, B), params.t1)
                hop(idx(x, y, C), idx(xp, y, D), params.u)
            if y + 1 < ny or periodic:
                yp = (y + 1) % ny
                hop(idx(x, y, B), idx(x, yp, C), params.t2)
                hop(idx(x, y, D), idx(x, yp, A), params.v)
    return RealSpaceHamiltonian(h, nx, ny, bc)


def commensurate_grid(nx: int, ny: int, a: float = 1.0):
    """Momenta allowed by a periodic nx-by-ny lattice, as two flat arrays."""
    kx = 2 * np.pi * np.arange(nx) / (nx * a)
    ky = 2 * np.pi * np.arange(ny) / (ny * a)
    KX, KY = np.meshgrid(kx, ky, indexing="xy")
    return KX.ravel(), KY.ravel()
