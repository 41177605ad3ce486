"""Printed closed-form spectrum and eigenvector pieces of the uniform-gain model.

Everything here is evaluated literally as published, typos included, so that
:mod:`nhssh.validation` can measure it against the oracle.  The one addition
is a ``"corrected"`` eigenvector variant built from the adjugate of
``E - H(k)``, which is an exact eigenvector whenever it is nonzero.

Square roots use the principal branch throughout:

    E1 = +sqrt(A + sqrt(J))    E2 = -sqrt(A + sqrt(J))
    E3 = +sqrt(A - sqrt(J))    E4 = -sqrt(A - sqrt(J))
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import sympy as sp

from .model import ModelParams, build_bloch

VARIANTS = ("printed", "corrected")


def _require_uniform(params: ModelParams) -> float:
    if not params.is_uniform:
        raise ValueError(
            "closed forms exist only for the uniform (g, -g, -g, g) gain pattern, "
            f"got gains={params.gains}")
    return params.gamma


@dataclass(frozen=True)
class ClosedFormPieces:
    p: np.ndarray
    s: np.ndarray
    A: np.ndarray
    J: np.ndarray
    F1: np.ndarray
    F2: np.ndarray


def closed_form_pieces(params: ModelParams, kx, ky) -> ClosedFormPieces:
    """p, s, A, J, F1, F2 exactly as printed (broadcasts over k)."""
    g = _require_uniform(params)
    u, t1, v, t2, a = params.u, params.t1, params.v, params.t2, params.a
    X = a * np.asarray(kx, dtype=float)
    Y = a * np.asarray(ky, dtype=float)
    cos, sin = np.cos, np.sin
    p = t2 + v * np.exp(-1j * Y)
    s = u + t1 * np.exp(1j * X)
    P2, S2 = np.abs(p) ** 2, np.abs(s) ** 2
    F1 = (u * v * t1 + v * t1**2 + t1**2 * t2 + u * t1 * t2 * cos(Y)
          + t2 * t1**2 * cos(X + Y) + u**2 * v * cos(X) + u * v * t1 * cos(2 * X)
          + t2 * u**2 * cos(X + Y) + u * t1 * t2 * cos(2 * X + Y))
    F2 = (u * t1 * t2 * sin(Y) + t2 * t1**2 * sin(X + Y) + u**2 * v * sin(X)
          + u * v * t1 * sin(2 * X) + t2 * u**2 * sin(X + Y) + u * t1 * t2 * sin(2 * X + Y))
    A = P2 + S2 - g**2
    J = (2 * P2 * S2 + 2 * (t2 + v * cos(Y)) * F1 - 2 * v * sin(Y) * F2
         - 4 * (P2 + S2) * g**2)
    return ClosedFormPieces(p, s, A, J, F1, F2)


def closed_form_energies(params: ModelParams, kx, ky, J=None) -> np.ndarray:
    """The four branches (E1, E2, E3, E4), shape ``broadcast(kx, ky) + (4,)``.

    ``J`` may be supplied to evaluate the same branch formulas on another
    discriminant (e.g. the oracle one).
    """
    pieces = closed_form_pieces(params, kx, ky)
    A = pieces.A.astype(complex)
    rJ = np.sqrt(np.asarray(pieces.J if J is None else J, dtype=complex))
    plus = np.sqrt(A + rJ)
    minus = np.sqrt(A - rJ)
    return np.stack([plus, -plus, minus, -minus], axis=-1)


def oracle_discriminant(params: ModelParams, kx, ky) -> np.ndarray:
    """J computed without eigensolving: (tr H^2 / 4)^2 - det H.

    At mu = 0 the characteristic polynomial is E^4 - 2 A E^2 + det H, so its
    squared-energy roots are A +- sqrt(A^2 - det H).  Real for the uniform
    gain pattern.
    """
    h = build_bloch(params, kx, ky)
    a_or = np.einsum("...ij,...ji->...", h, h) / 4
    return (a_or**2 - np.linalg.det(h)).real


def oracle_discriminant_from_energies(energies) -> np.ndarray:
    """((E1^2 - E3^2)/2)^2 from the two distinct squared energies; complex in general.

    The squares come in equal pairs (E and -E), so the distinct pair is the
    one with the largest separation.
    """
    e2 = np.asarray(energies) ** 2
    d = e2[..., :, None] - e2[..., None, :]
    flat = d.reshape(d.shape[:-2] + (-1,))
    idx = np.argmax(np.abs(flat), axis=-1)
    return (np.take_along_axis(flat, idx[..., None], axis=-1)[..., 0] / 2) ** 2


# --- eigenvector pieces -----------------------------------------------------

_SYM = sp.symbols("u t1 v t2 gamma a kx ky", real=True)
_E = sp.Symbol("E", real=True)


def _printed_exprs():
    u, t1, v, t2, g, a, kx, ky = _SYM
    E = _E
    X, Y = a * kx, a * ky
    c, sn = sp.cos, sp.sin
    P2 = (t2 + v * c(Y))**2 + (v * sn(Y))**2
    S2 = (u + t1 * c(X))**2 + (t1 * sn(X))**2
    Q2 = (v + t2 * sp.exp(sp.I * Y)) * (v + t2 * sp.exp(-sp.I * Y))
    d10 = ((u*v*t1 + v*t1**2*c(X)) + u*t1*t2*c(Y) + t2*t1**2*c(X + Y) + u**2*v*c(X)
           + u*v*t1*c(2*X) + t2*u**2*c(X + Y) + u*t1*t2*c(2*X + Y)
           - (t2 + v*c(Y)) * (E**2 - g**2 - P2))
    d11 = ((v*t1**2*sn(X)) + u*t1*t2*sn(Y) + t2*t1**2*sn(X + Y) + u**2*v*sn(X)
           + u*v*t1*sn(2*X) + t2*u**2*sn(X + Y) + u*t1*t2*sn(2*X + Y)
           - (v*sn(Y)) * (E**2 - g**2 - Q2))
    d20 = (E * ((v + t2*c(Y))*(t1 + u*c(X)) - u*t2*sn(X)*sn(Y)
                + (t2 + v*c(Y))*(u + t1*c(X)) - v*t1*sn(X)*sn(Y))
           + g * (t2*sn(Y)*(t1 + u*c(X)) + u*sn(X)*(v + t2*c(Y))
                  - v*sn(Y)*(u + t1*c(X)) - t1*sn(X)*(t2 + v*c(Y))))
    # the (v + t2 sin) factor is transcribed as published
    d21 = (E * ((t2*sn(Y))*(t1 + u*c(X)) + u*sn(X)*(v + t2*sn(Y))
                + (v*sn(Y))*(u + t1*c(X)) - t1*sn(X)*(t2 + v*c(Y)))
           - g * ((v + t2*c(Y))*(t1 + u*c(X)) + u*t2*sn(X)*sn(Y)
                  + (t2 + v*c(Y))*(u + t1*c(X)) - v*t1*sn(X)*sn(Y)))
    d30 = (S2*(v + t2*c(Y)) - (E**2 - g**2)*(t1 + u*c(X)) + (u*v*t2 + u*v**2*c(Y))
           + u*t2**2*c(Y) + u*v*t2*c(2*Y) + t1*t2*v*c(X) + t1*(t2**2 + v**2)*c(X + Y)
           + t1*t2*v*c(2*Y + X))
    d31 = (-S2*(t2*sn(Y)) + (E**2 - g**2)*(u*sn(X)) - u*v**2*sn(Y) - u*t2**2*sn(Y)
           - u*v*t2*sn(2*Y) - t1*t2*v*sn(X) - t1*(t2**2 + v**2)*sn(X + Y)
           - t1*t2*v*sn(2*Y + X))
    d40 = E**3 - E*g**2 - E*P2 - E*S2
    d41 = g**3 + g*P2 + g*S2 - g*E**2
    return [d10, d11, d20, d21, d30, d31, d40, d41]


def _corrected_exprs():
    """Column 4 of adj(E - H), split into the same real/imaginary layout.

    The split is taken with E and gamma treated as real symbols, so the
    identity D0 + i D1 = adjugate column is polynomial and also holds when
    complex energies are substituted.
    """
    u, t1, v, t2, g, a, kx, ky = _SYM
    E = _E
    X, Y = a * kx, a * ky
    ex = sp.cos(X) + sp.I * sp.sin(X)
    ey = sp.cos(Y) + sp.I * sp.sin(Y)
    exc = sp.cos(X) - sp.I * sp.sin(X)
    eyc = sp.cos(Y) - sp.I * sp.sin(Y)
    H = sp.Matrix([[sp.I*g, u + t1*ex, 0, t2 + v*eyc],
                   [u + t1*exc, -sp.I*g, v + t2*ey, 0],
                   [0, v + t2*eyc, -sp.I*g, t1 + u*ex],
                   [t2 + v*ey, 0, t1 + u*exc, sp.I*g]])
    M = E * sp.eye(4) - H
    out = []
    for i in range(4):
        c = sp.expand((-1) ** (i + 3) * M.minor_submatrix(3, i).det())
        re, im = c.as_real_imag()
        out += [re, im]
    return out


@lru_cache(maxsize=None)
def _compiled(variant: str):
    if variant == "printed":
        exprs = _printed_exprs()
    elif variant == "corrected":
        exprs = _corrected_exprs()
    else:
        raise ValueError(f"unknown eigenvector variant {variant!r}; choose from {VARIANTS}")
    _, _, _, _, _, _, kx, ky = _SYM
    args = (*_SYM, _E)
    f = sp.lambdify(args, exprs, "numpy")
    fx = sp.lambdify(args, [sp.diff(e, kx) for e in exprs], "numpy")
    fy = sp.lambdify(args, [sp.diff(e, ky) for e in exprs], "numpy")
    fe = sp.lambdify(args, [sp.diff(e, _E) for e in exprs], "numpy")
    return f, fx, fy, fe


def _args(params, kx, ky, E):
    g = _require_uniform(params)
    kx, ky, E = np.broadcast_arrays(np.asarray(kx, dtype=float), np.asarray(ky, dtype=float),
                                    np.asarray(E, dtype=complex))
    return (params.u, params.t1, params.v, params.t2, g, params.a, kx, ky, E), kx.shape


def _stack(values, shape):
    return np.stack([np.broadcast_to(np.asarray(x, dtype=complex), shape) for x in values], axis=-1)


@dataclass(frozen=True)
class EigvecComponents:
    """Eight pieces D10, D11, ..., D41 (last axis) and the derived vector.

    ``psi[..., j] = D[j, 0] + i D[j, 1]``; ``N`` is the sum of the eight
    squared magnitudes; ``vector = psi / sqrt(N)``.  ``defective`` marks
    points where sqrt(N) is below 1e-12 of ``scale**3`` (``scale`` is the
    energy scale of the inputs), in which case ``vector`` is zero.
    """

    pieces: np.ndarray
    variant: str
    scale: float | np.ndarray = 1.0

    @property
    def psi(self) -> np.ndarray:
        d = self.pieces
        return d[..., 0::2] + 1j * d[..., 1::2]

    @property
    def N(self) -> np.ndarray:
        return np.sum(np.abs(self.pieces) ** 2, axis=-1)

    @property
    def defective(self) -> np.ndarray:
        # pieces are cubic in the energy scale
        return np.sqrt(self.N) <= 1e-12 * np.asarray(self.scale) ** 3

    @property
    def vector(self) -> np.ndarray:
        n = self.N
        safe = np.where(self.defective, 1.0, n)
        return np.where(self.defective[..., None], 0.0, self.psi / np.sqrt(safe)[..., None])


def eigvec_pieces(params: ModelParams, kx, ky, E, variant: str = "printed") -> EigvecComponents:
    """Evaluate the eight pieces at explicit energies ``E`` (broadcasting)."""
    f = _compiled(variant)[0]
    args, shape = _args(params, kx, ky, E)
    scale = np.maximum(abs(params.u) + abs(params.t1) + abs(params.v) + abs(params.t2)
                       + max(abs(g) for g in params.gains), np.abs(np.asarray(E)))
    return EigvecComponents(_stack(f(*args), shape), variant, scale)


def eigvec_piece_derivatives(params: ModelParams, kx, ky, E, variant: str = "printed"):
    """Partial derivatives of the pieces: (d/dkx, d/dky, d/dE) at fixed other arguments."""
    _, fx, fy, fe = _compiled(variant)
    args, shape = _args(params, kx, ky, E)
    return tuple(_stack(fn(*args), shape) for fn in (fx, fy, fe))


def closed_form_eigenvector(params: ModelParams, kx, ky, band: int, E=None,
                            variant: str = "printed") -> EigvecComponents:
    """Eigenvector pieces for band 1..4 at the closed-form energy (or a given ``E``)."""
    if band not in (1, 2, 3, 4):
        raise ValueError(f"band must be 1..4, got {band}")
    if E is None:
        E = closed_form_energies(params, kx, ky)[..., band - 1]
    return eigvec_pieces(params, kx, ky, E, variant)


def relative_residual(params: ModelParams, kx: float, ky: float, E, psi) -> float:
    """||H psi - E psi||_inf / (||H||_inf ||psi||_inf); nan for a zero vector."""
    h = build_bloch(params, kx, ky)
    psi = np.asarray(psi, dtype=complex)
    scale = np.max(np.abs(psi))
    if scale == 0:
        return float("nan")
    hn = np.max(np.sum(np.abs(h), axis=1))
    return float(np.max(np.abs(h @ psi - E * psi)) / (hn * scale))


__all__ = [
    "ClosedFormPieces", "EigvecComponents", "VARIANTS",
    "closed_form_energies", "closed_form_eigenvector", "closed_form_pieces",
    "eigvec_piece_derivatives", "eigvec_pieces", "oracle_discriminant",
    "oracle_discriminant_from_energies", "relative_residual",
]
