"""Finite-lattice spectra and their consistency with the Bloch bands."""

from __future__ import annotations

import numpy as np

from .model import ModelParams, build_real_space, commensurate_grid
from .spectrum import batch_energies, matching_distance
from .tables import SweepTable


def real_space_spectrum(params: ModelParams, nx: int, ny: int, bc: str = "PBC") -> np.ndarray:
    """Eigenvalues of the finite lattice sorted by (Re, Im)."""
    h = build_real_space(params, nx, ny, bc).matrix
    w = np.linalg.eigvals(h)
    return w[np.lexsort((np.round(w.imag, 12), np.round(w.real, 12)))]


def bloch_union(params: ModelParams, nx: int, ny: int) -> np.ndarray:
    kx, ky = commensurate_grid(nx, ny, params.a)
    return batch_energies(params, kx, ky).ravel()


def bloch_consistency_report(params: ModelParams, nx: int, ny: int, bc: str = "PBC"):
    """Match real-space eigenvalues to Bloch eigenvalues on the commensurate grid.

    Returns (table, max matching distance).  Rows pair each (k, band) with its
    assigned real-space eigenvalue; a failed eigensolve is reported as one
    diagnostic row rather than raised.
    """
    if bc.upper() != "PBC":
        raise ValueError("consistency check is defined only for PBC")
    if nx < 2 or ny < 2:
        raise ValueError("consistency check needs nx, ny >= 2")
    table = SweepTable(["kx", "ky", "band", "re_bloch", "im_bloch", "re_lattice",
                        "im_lattice", "distance"],
                       ["1/a", "1/a", "", "u", "u", "u", "u", "u"])
    kx, ky = commensurate_grid(nx, ny, params.a)
    try:
        bloch = batch_energies(params, kx, ky)
        lattice = real_space_spectrum(params, nx, ny, "PBC")
    except np.linalg.LinAlgError as exc:
        table.add([float("nan")] * 8, f"eigensolver-failure: {exc}")
        return table, float("inf")
    flat = bloch.ravel()
    dist, perm = matching_distance(flat, lattice)
    matched = lattice[perm]
    for i, e in enumerate(flat):
        q, band = divmod(i, 4)
        m = matched[i]
        table.add([float(kx[q]), float(ky[q]), band + 1, e.real, e.imag, m.real, m.imag,
                   float(abs(e - m))])
    return table, dist
