"""Finite-volume meshes on the unit interval / unit square.

Cells are intervals between consecutive faces; values attached to a mesh
are cell averages.  The 2D mesh is a tensor product of two 1D meshes with
the core/SOL interface r = 1/2 required to coincide with a cell face.
"""

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "Mesh1D",
    "Mesh2D",
    "build_mesh_1d",
    "build_uniform_mesh_1d",
    "build_mesh_2d",
    "restrict_cell_averages",
    "restrict_cell_averages_2d",
]

_FACE_TOL = 1e-12


@dataclass(frozen=True)
class Mesh1D:
    """Cell faces, widths and centers of a 1D finite-volume mesh on [0, 1]."""

    faces: np.ndarray
    widths: np.ndarray = field(init=False)
    centers: np.ndarray = field(init=False)
    xi: float = field(init=False)

    def __post_init__(self):
        faces = np.asarray(self.faces, dtype=float)
        if faces.ndim != 1 or faces.size < 2:
            raise ValueError("a mesh needs at least two faces")
        if abs(faces[0]) > _FACE_TOL or abs(faces[-1] - 1.0) > _FACE_TOL:
            raise ValueError("mesh must span [0, 1]")
        widths = np.diff(faces)
        if np.any(widths <= 0):
            raise ValueError("faces must be strictly increasing")
        object.__setattr__(self, "faces", faces)
        object.__setattr__(self, "widths", widths)
        object.__setattr__(self, "centers", 0.5 * (faces[:-1] + faces[1:]))
        object.__setattr__(self, "xi", float(widths.min() / widths.max()))
        self.faces.setflags(write=False)
        self.widths.setflags(write=False)
        self.centers.setflags(write=False)

    @property
    def n_cells(self):
        return self.widths.size

    @property
    def max_width(self):
        return float(self.widths.max())


@dataclass(frozen=True)
class Mesh2D:
    """Tensor-product mesh; r = 1/2 must be a face of the r-mesh."""

    s_mesh: Mesh1D
    r_mesh: Mesh1D
    sol_start_index: int = field(init=False)

    def __post_init__(self):
        hits = np.nonzero(np.abs(self.r_mesh.faces - 0.5) <= _FACE_TOL)[0]
        if hits.size == 0:
            raise ValueError(
                "r = 1/2 must coincide with a cell face: the boundary type in s "
                "switches between periodic (core) and limiter (SOL) there"
            )
        object.__setattr__(self, "sol_start_index", int(hits[0]))

    @property
    def shape(self):
        return (self.s_mesh.n_cells, self.r_mesh.n_cells)

    @property
    def h(self):
        return max(self.s_mesh.max_width, self.r_mesh.max_width)

    @property
    def xi(self):
        wmin = min(self.s_mesh.widths.min(), self.r_mesh.widths.min())
        return float(wmin / self.h)

    def cell_areas(self):
        return np.outer(self.s_mesh.widths, self.r_mesh.widths)


def build_mesh_1d(faces):
    """Mesh from an explicit (possibly non-uniform) face sequence."""
    return Mesh1D(np.asarray(faces, dtype=float))


def build_uniform_mesh_1d(n):
    """Uniform mesh with ``n`` cells of width 1/n."""
    if n < 1:
        raise ValueError("number of cells must be >= 1")
    return Mesh1D(np.linspace(0.0, 1.0, n + 1))


def build_mesh_2d(ns, nr):
    """Uniform tensor-product mesh; ``nr`` must be even so r = 1/2 is a face."""
    if ns < 1 or nr < 1:
        raise ValueError("mesh sizes must be >= 1")
    if nr % 2 != 0:
        raise ValueError(
            "nr must be even: the core/SOL interface r = 1/2 has to be a cell "
            "face, which a uniform odd mesh cannot provide"
        )
    return Mesh2D(build_uniform_mesh_1d(ns), build_uniform_mesh_1d(nr))


def _restriction_slices(fine, coarse):
    """Index of the fine face matching each coarse face, or raise."""
    idx = np.searchsorted(fine.faces, coarse.faces - _FACE_TOL)
    if np.any(np.abs(fine.faces[np.clip(idx, 0, fine.faces.size - 1)] - coarse.faces) > 1e-10):
        raise ValueError("meshes are not nested: coarse faces must be fine faces")
    return idx


def restrict_cell_averages(fine_values, fine_mesh, coarse_mesh):
    """Width-weighted averages of a fine 1D field onto a nested coarse mesh."""
    fine_values = np.asarray(fine_values, dtype=float)
    if fine_values.shape[0] != fine_mesh.n_cells:
        raise ValueError("field does not match its mesh")
    idx = _restriction_slices(fine_mesh, coarse_mesh)
    out = np.empty(coarse_mesh.n_cells)
    for k in range(coarse_mesh.n_cells):
        lo, hi = idx[k], idx[k + 1]
        w = fine_mesh.widths[lo:hi]
        out[k] = np.dot(w, fine_values[lo:hi]) / w.sum()
    return out


def restrict_cell_averages_2d(fine_values, fine_mesh, coarse_mesh):
    """Tensor-product restriction of a 2D field onto a nested coarse mesh."""
    fine_values = np.asarray(fine_values, dtype=float)
    if fine_values.shape != fine_mesh.shape:
        raise ValueError("field does not match its mesh")
    si = _restriction_slices(fine_mesh.s_mesh, coarse_mesh.s_mesh)
    ri = _restriction_slices(fine_mesh.r_mesh, coarse_mesh.r_mesh)
    ns, nr = coarse_mesh.shape
    ws, wr = fine_mesh.s_mesh.widths, fine_mesh.r_mesh.widths
    out = np.empty((ns, nr))
    for a in range(ns):
        block = fine_values[si[a]:si[a + 1]]
        wsa = ws[si[a]:si[a + 1]]
        for b in range(nr):
            wrb = wr[ri[b]:ri[b + 1]]
            cell = block[:, ri[b]:ri[b + 1]]
            out[a, b] = wsa @ cell @ wrb / (wsa.sum() * wrb.sum())
    return out
