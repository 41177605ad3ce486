"""Numerical eigensolver oracle for the 4x4 Bloch matrices.

The oracle is LAPACK ``zgeev`` (via numpy) followed by a residual check,
optional inverse-iteration refinement and a deterministic gauge.  It is the
ground truth against which the closed-form expressions in
:mod:`nhssh.closed_form` are validated.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import maximum_bipartite_matching

from .model import ModelParams, build_bloch

RESIDUAL_TOL = 1e-10
DEGENERACY_TOL = 1e-9


@dataclass(frozen=True)
class BandSolution:
    """Eigenpairs of one matrix, sorted by (Re E, Im E).

    ``vectors[:, j]`` is the unit-norm right eigenvector of ``energies[j]``.
    ``order`` is the permutation that sorted LAPACK's raw output.
    ``degenerate`` lists index pairs whose energies agree within the
    degeneracy tolerance; those columns span the (near-)invariant subspace
    and have been orthonormalized.
    """

    energies: np.ndarray
    vectors: np.ndarray
    residuals: np.ndarray
    order: np.ndarray
    degenerate: tuple = ()
    converged: bool = True

    @property
    def max_residual(self) -> float:
        return float(np.max(self.residuals))


def sort_order(energies) -> np.ndarray:
    """Permutation sorting by real part, ties broken by imaginary part."""
    e = np.asarray(energies)
    # round away LAPACK jitter so that exact ties sort stably
    return np.lexsort((np.round(e.imag, 12), np.round(e.real, 12)))


def fix_gauge(vectors: np.ndarray) -> np.ndarray:
    """Normalize columns and make their largest component real positive."""
    v = vectors / np.linalg.norm(vectors, axis=-2, keepdims=True)
    idx = np.argmax(np.abs(v) - 1e-12 * np.arange(v.shape[-2])[:, None], axis=-2)
    pivot = np.take_along_axis(v, idx[..., None, :], axis=-2)
    return v * (np.abs(pivot) / pivot)


def _residuals(h, energies, vectors):
    r = h @ vectors - vectors * energies[..., None, :]
    return np.max(np.abs(r), axis=-2)


def _refine(h, e, v, steps=3):
    """Inverse iteration with a shifted Rayleigh quotient."""
    n = h.shape[0]
    for _ in range(steps):
        shift = e + 1e-13 * max(1.0, abs(e))
        try:
            w = np.linalg.solve(h - shift * np.eye(n), v)
        except np.linalg.LinAlgError:
            break
        v = w / np.linalg.norm(w)
        e = np.vdot(v, h @ v)
    return e, v


def eig_oracle(h: np.ndarray, degeneracy_tol: float = DEGENERACY_TOL) -> BandSolution:
    """Eigen-decompose a general complex square matrix.

    Pairs with residual above :data:`RESIDUAL_TOL` are refined by inverse
    iteration.  Residuals are always reported as measured, so an exceptional
    point shows up as a flagged degeneracy, never as a silent error.
    """
    h = np.asarray(h, dtype=complex)
    if not np.all(np.isfinite(h)):
        raise ValueError("matrix has non-finite entries")
    w, vr = np.linalg.eig(h)
    order = sort_order(w)
    w, vr = w[order], vr[:, order]
    res = _residuals(h, w, vr)
    for j in np.flatnonzero(res > RESIDUAL_TOL):
        w[j], vr[:, j] = _refine(h, w[j], vr[:, j])
    scale = max(1.0, float(np.max(np.abs(w))))
    degenerate = []
    n = len(w)
    for i in range(n):
        for j in range(i + 1, n):
            if abs(w[i] - w[j]) < degeneracy_tol * scale:
                degenerate.append((i, j))
    if degenerate:
        groups = _groups(degenerate, n)
        for g in groups:
            q, _ = np.linalg.qr(vr[:, g])
            vr[:, g] = q
    vr = fix_gauge(vr)
    res = _residuals(h, w, vr)
    converged = bool(np.all(np.isfinite(w)) and np.all(res < RESIDUAL_TOL * scale)) or bool(degenerate)
    return BandSolution(w, vr, res, order, tuple(degenerate), converged)


def _groups(pairs, n):
    parent = list(range(n))

    def find(i):
        while parent[i] != i:
            i = parent[i]
        return i

    for i, j in pairs:
        parent[find(j)] = find(i)
    out = {}
    for i in range(n):
        out.setdefault(find(i), []).append(i)
    return [g for g in out.values() if len(g) > 1]


def solve_bloch(params: ModelParams, kx: float, ky: float) -> BandSolution:
    return eig_oracle(build_bloch(params, kx, ky))


def batch_energies(params: ModelParams, kx, ky) -> np.ndarray:
    """Sorted oracle energies over a broadcast array of momenta, shape (..., 4)."""
    w = np.linalg.eigvals(build_bloch(params, kx, ky))
    # lexicographic (Re, Im) sort along the last axis
    idx = np.lexsort((np.round(w.imag, 12), np.round(w.real, 12)), axis=-1)
    return np.take_along_axis(w, idx, axis=-1)


def batch_residuals(h: np.ndarray) -> np.ndarray:
    """Max eigenpair residual for each matrix in a stack."""
    w, v = np.linalg.eig(h)
    v = v / np.linalg.norm(v, axis=-2, keepdims=True)
    return np.max(_residuals(h, w, v), axis=-1)


def track_bands(solutions: list[BandSolution]) -> list[np.ndarray]:
    """Continuity ordering along a path: permutation per point maximizing overlaps.

    Returns one permutation per solution such that
    ``solutions[i].energies[perm[i]]`` follows the bands smoothly.
    """
    perms = [np.arange(len(solutions[0].energies))]
    for prev, cur in zip(solutions, solutions[1:]):
        vp = prev.vectors[:, perms[-1]]
        overlap = np.abs(vp.conj().T @ cur.vectors)
        _, cols = linear_sum_assignment(-overlap)
        perms.append(cols)
    return perms


def matching_distance(a, b) -> tuple[float, np.ndarray]:
    """Bottleneck distance between two equal-size multisets of complex numbers.

    Returns the smallest achievable maximum deviation over all one-to-one
    assignments, together with one optimal assignment (``b[perm]`` pairs
    with ``a``).
    """
    a = np.asarray(a, dtype=complex).ravel()
    b = np.asarray(b, dtype=complex).ravel()
    if a.shape != b.shape:
        raise ValueError(f"multisets differ in size: {a.size} vs {b.size}")
    if a.size == 0:
        return 0.0, np.zeros(0, dtype=int)
    cost = np.abs(a[:, None] - b[None, :])
    levels = np.unique(cost)
    lo, hi = 0, len(levels) - 1
    best = None
    while lo <= hi:
        mid = (lo + hi) // 2
        graph = csr_matrix(cost <= levels[mid])
        match = maximum_bipartite_matching(graph, perm_type="column")
        if np.all(match >= 0):
            best, hi = match, mid - 1
        else:
            lo = mid + 1
    return float(levels[lo]), best


def fermi_gap(params: ModelParams, kx, ky, method: str = "oracle") -> float:
    """min over the given momenta of min_j |Re E_j(k)|.

    ``method='closed-form'`` evaluates the printed closed-form energies
    instead of the oracle (uniform gain pattern only).
    """
    kx, ky = np.broadcast_arrays(np.asarray(kx, dtype=float), np.asarray(ky, dtype=float))
    if kx.size == 0:
        raise ValueError("empty momentum grid")
    if method == "oracle":
        e = batch_energies(params, kx, ky)
    elif method == "closed-form":
        from .closed_form import closed_form_energies
        e = closed_form_energies(params, kx, ky)
    else:
        raise ValueError(f"unknown method {method!r}")
    return float(np.min(np.abs(e.real)))
