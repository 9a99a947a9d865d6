"""Structured tensor-product grids and Q1 finite-element assembly.

Nodes are enumerated lexicographically with x fastest; this ordering is
part of the output contract (VTK files and CSV snapshots depend on it).
All integrals use tensor-product Gauss quadrature with 2 points per axis,
exact for products of multilinear basis functions.  Boundary conditions
are the natural homogeneous Neumann ones, so assembly needs no boundary
handling at all.
"""

from __future__ import annotations


from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .errors import ModelError, ParameterError, ShapeError


class StructuredGrid:
    """Axis-aligned box in 1/2/3 dimensions with uniform cells per axis."""

    def __init__(self, cells, domain=None):
        cells = tuple(int(c) for c in np.atleast_1d(cells))
        if not 1 <= len(cells) <= 3:
            raise ParameterError("grid dimension must be 1, 2 or 3")
        if any(c < 1 for c in cells):
            raise ParameterError(f"cells per axis must be positive: {cells}")
        if domain is None:
            domain = tuple((0.0, 1.0) for _ in cells)
        domain = tuple((float(lo), float(hi)) for lo, hi in domain)
        if len(domain) != len(cells):
            raise ParameterError("domain and cells dimension mismatch")
        if any(hi <= lo for lo, hi in domain):
            raise ParameterError("domain extents must be positive")
        self.cells = cells
        self.domain = domain
        self.dim = len(cells)
        self.spacing = tuple((hi - lo) / c for (lo, hi), c in zip(domain, cells))
        self.nodes_per_axis = tuple(c + 1 for c in cells)
        self.n_nodes = int(np.prod(self.nodes_per_axis))
        self.n_cells = int(np.prod(cells))
        self.volume = float(np.prod([hi - lo for lo, hi in domain]))
        self._conn = None
        self._quad = None

    def __eq__(self, other):
        return (isinstance(other, StructuredGrid)
                and self.cells == other.cells and self.domain == other.domain)

    def __hash__(self):
        return hash((self.cells, self.domain))

    def node_coords(self) -> np.ndarray:
        """(n_nodes, dim) coordinates in lexicographic order, x fastest."""
        axes = [np.linspace(lo, hi, n) for (lo, hi), n
                in zip(self.domain, self.nodes_per_axis)]
        mesh = np.meshgrid(*axes, indexing="ij")
        # Fortran ravel of 'ij' meshgrid arrays varies the first axis (x)
        # fastest, matching the node enumeration contract.
        return np.stack([m.ravel(order="F") for m in mesh], axis=-1)

    def element_nodes(self) -> np.ndarray:
        """(n_cells, 2^dim) global node indices; local index x fastest."""
        if self._conn is None:
            npa = self.nodes_per_axis
            strides = np.cumprod((1,) + npa[:-1])
            cell_axes = [np.arange(c) for c in self.cells]
            mesh = np.meshgrid(*cell_axes, indexing="ij")
            base = sum(m.ravel(order="F") * s for m, s in zip(mesh, strides))
            # local node k has axis offsets given by the bits of k, x fastest
            offsets = [sum(((k >> a) & 1) * s for a, s in enumerate(strides))
                       for k in range(2 ** self.dim)]
            self._conn = base[:, None] + np.array(offsets)[None, :]
        return self._conn

    def quadrature_tables(self):
        """Shape values N, physical gradients G, and weights at Gauss points.

        Returns (N, G, wdet): N is (n_gp, n_loc), G is (n_gp, n_loc, dim),
        wdet the quadrature weight times cell volume per Gauss point.
        """
        if self._quad is None:
            gp = np.array([0.5 - 0.5 / np.sqrt(3.0), 0.5 + 0.5 / np.sqrt(3.0)])
            n_loc = 2 ** self.dim
            combos = [[(k >> a) & 1 for a in range(self.dim)]
                      for k in range(n_loc)]
            # Gauss points indexed like local nodes: x index fastest
            N = np.empty((n_loc, n_loc))
            G = np.empty((n_loc, n_loc, self.dim))
            for q, qi in enumerate(combos):
                xi = [gp[i] for i in qi]
                for a, ai in enumerate(combos):
                    val = 1.0
                    for d in range(self.dim):
                        val *= xi[d] if ai[d] else (1.0 - xi[d])
                    N[q, a] = val
                    for d in range(self.dim):
                        g = (1.0 if ai[d] else -1.0) / self.spacing[d]
                        for e in range(self.dim):
                            if e != d:
                                g *= xi[e] if ai[e] else (1.0 - xi[e])
                        G[q, a, d] = g
            cell_vol = float(np.prod(self.spacing))
            wdet = np.full(n_loc, cell_vol / n_loc)
            self._quad = (N, G, wdet)
        return self._quad


@dataclass
class ScalarField:
    """Nodal coefficient vector of a Q1 function on a structured grid."""

    grid: StructuredGrid
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (self.grid.n_nodes,):
            raise ShapeError(
                f"field has {self.values.shape} values for a grid with "
                f"{self.grid.n_nodes} nodes")
        if not np.all(np.isfinite(self.values)):
            raise ShapeError("field values must be finite")

    def copy(self) -> "ScalarField":
        return ScalarField(self.grid, self.values.copy())


def constant_field(grid: StructuredGrid, value: float) -> ScalarField:
    return ScalarField(grid, np.full(grid.n_nodes, float(value)))


def field_from_function(grid: StructuredGrid, fn) -> ScalarField:
    """Interpolate a callable of the coordinates onto the grid nodes."""
    coords = grid.node_coords()
    return ScalarField(grid, np.asarray(
        fn(*[coords[:, d] for d in range(grid.dim)]), dtype=float))


def _scatter(grid: StructuredGrid, local: np.ndarray) -> sp.csr_matrix:
    conn = grid.element_nodes()
    n_loc = conn.shape[1]
    rows = np.repeat(conn, n_loc, axis=1).ravel()
    cols = np.tile(conn, (1, n_loc)).ravel()
    A = sp.coo_matrix((local.ravel(), (rows, cols)),
                      shape=(grid.n_nodes, grid.n_nodes))
    return A.tocsr()


def assemble_mass(grid: StructuredGrid) -> sp.csr_matrix:
    """Consistent Q1 mass matrix (no lumping)."""
    N, _, wdet = grid.quadrature_tables()
    local = np.einsum("q,qa,qb->ab", wdet, N, N)
    tiled = np.broadcast_to(local, (grid.n_cells,) + local.shape)
    return _scatter(grid, np.ascontiguousarray(tiled))


def assemble_stiffness(grid: StructuredGrid) -> sp.csr_matrix:
    """Q1 stiffness matrix of -Laplace with natural Neumann conditions."""
    _, G, wdet = grid.quadrature_tables()
    local = np.einsum("q,qad,qbd->ab", wdet, G, G)
    tiled = np.broadcast_to(local, (grid.n_cells,) + local.shape)
    return _scatter(grid, np.ascontiguousarray(tiled))


def interpolate_at_gauss(grid: StructuredGrid, values: np.ndarray) -> np.ndarray:
    """(n_cells, n_gp) values of the Q1 interpolant at the Gauss points."""
    N, _, _ = grid.quadrature_tables()
    return values[grid.element_nodes()] @ N.T


def assemble_weighted_stiffness(grid: StructuredGrid, coeff: ScalarField,
                                mobility) -> sp.csr_matrix:
    """Stiffness weighted by m(phi_h) evaluated at the Gauss points.

    ``mobility`` is a MobilityLaw; phi_h is the Q1 interpolant of ``coeff``.
    Raises ModelError if the mobility is negative at any quadrature point.
    """
    if coeff.grid != grid:
        raise ShapeError("coefficient field lives on a different grid")
    _, G, wdet = grid.quadrature_tables()
    m_gp = mobility.value(interpolate_at_gauss(grid, coeff.values))
    if np.any(m_gp < 0.0):
        raise ModelError("mobility is negative at a quadrature point")
    GG = np.einsum("q,qad,qbd->qab", wdet, G, G)
    local = np.einsum("eq,qab->eab", m_gp, GG)
    return _scatter(grid, local)


def assemble_weighted_mass(grid: StructuredGrid, coeff_values: np.ndarray,
                           fn=None) -> sp.csr_matrix:
    """Mass matrix weighted by fn(phi_h) (fn defaults to identity)."""
    N, _, wdet = grid.quadrature_tables()
    c_gp = interpolate_at_gauss(grid, np.asarray(coeff_values, dtype=float))
    if fn is not None:
        c_gp = fn(c_gp)
    NN = np.einsum("q,qa,qb->qab", wdet, N, N)
    local = np.einsum("eq,qab->eab", c_gp, NN)
    return _scatter(grid, local)


def assemble_gradient_coupling(grid: StructuredGrid, coeff_gp: np.ndarray,
                               flux_values: np.ndarray) -> sp.csr_matrix:
    """Matrix S_ij = integral of c(x) (grad w_h . grad N_i) N_j.

    ``coeff_gp`` holds c at the Gauss points, shape (n_cells, n_gp);
    ``flux_values`` are the nodal coefficients of w_h.  This is the
    linearization of phi -> K_m(phi) mu with c = m'(phi_h) and w_h = mu_h.
    """
    N, G, wdet = grid.quadrature_tables()
    conn = grid.element_nodes()
    grad_w = np.einsum("ea,qad->eqd", flux_values[conn], G)
    local = np.einsum("eq,q,qid,eqd,qj->eij", coeff_gp, wdet, G, grad_w, N)
    return _scatter(grid, local)


def nonlinear_load(grid: StructuredGrid, values: np.ndarray, fn) -> np.ndarray:
    """Load vector L_i = integral of fn(phi_h) h_i over the domain."""
    N, _, wdet = grid.quadrature_tables()
    g_gp = fn(interpolate_at_gauss(grid, np.asarray(values, dtype=float)))
    contrib = np.einsum("eq,q,qa->ea", g_gp, wdet, N)
    out = np.zeros(grid.n_nodes)
    np.add.at(out, grid.element_nodes(), contrib)
    return out


def integrate(grid: StructuredGrid, values: np.ndarray, fn) -> float:
    """Integral of fn(phi_h) over the domain by the assembly quadrature."""
    _, _, wdet = grid.quadrature_tables()
    g_gp = fn(interpolate_at_gauss(grid, np.asarray(values, dtype=float)))
    return float(np.einsum("eq,q->", g_gp, wdet))
