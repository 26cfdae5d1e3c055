"""Coupled P2 velocity / P0 pressure space with shared interface DOFs."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..meshkit import DIRICHLET, FLUID, INFLOW, OUTFLOW, Mesh, MeshError
from .quadrature import EDGES


@dataclass(frozen=True, eq=False)
class CoupledSpace:
    """Velocity DOF ``2*node + c`` for scalar P2 node ``node`` and component ``c``.

    Interface vertices and edge midpoints carry a single scalar P2 node referenced
    by the fluid-side and the structure-side element maps.
    """
    mesh: Mesh
    element_nodes: np.ndarray      # (M, 6) scalar P2 node per local node
    p2_coords: np.ndarray          # (n_p2, 2), reference configuration
    element_pressure: np.ndarray   # (M,), -1 on structure triangles
    dirichlet_dofs: np.ndarray
    inflow_dofs: np.ndarray        # subset of dirichlet_dofs carrying inflow data
    fluid_p2: np.ndarray           # bool (n_p2,), node touched by a fluid element
    structure_p2: np.ndarray       # bool (n_p2,)
    right_end: str = "natural"

    @property
    def n_p2(self) -> int:
        return len(self.p2_coords)

    @property
    def n_velocity(self) -> int:
        return 2 * self.n_p2

    @property
    def n_pressure(self) -> int:
        return int((self.element_pressure >= 0).sum())

    def element_dofs(self, elems=None) -> np.ndarray:
        """(E, 12) velocity DOFs in local order 2*i + c."""
        en = self.element_nodes if elems is None else self.element_nodes[elems]
        return np.stack([2 * en, 2 * en + 1], axis=2).reshape(len(en), 12)

    @property
    def free_dofs(self) -> np.ndarray:
        mask = np.ones(self.n_velocity, bool)
        mask[self.dirichlet_dofs] = False
        return np.flatnonzero(mask)

    def fluid_dofs(self) -> np.ndarray:
        n = np.flatnonzero(self.fluid_p2)
        return np.sort(np.concatenate([2 * n, 2 * n + 1]))

    def structure_dofs(self) -> np.ndarray:
        n = np.flatnonzero(self.structure_p2)
        return np.sort(np.concatenate([2 * n, 2 * n + 1]))

    def interpolate(self, func) -> np.ndarray:
        """Nodal interpolant of ``func(xy) -> (n, 2)`` evaluated at reference P2 nodes."""
        vals = np.asarray(func(self.p2_coords), dtype=float).reshape(self.n_p2, 2)
        return vals.ravel()


def build_space(mesh: Mesh, right_end: str = "natural") -> CoupledSpace:
    """Number P2 nodes with fluid/structure identification across the interface.

    ``right_end='noflux'`` additionally constrains the normal (x) component on the
    outflow boundary.
    """
    if right_end not in ("natural", "noflux"):
        raise ValueError(f"unknown right_end {right_end!r}")
    pairs = mesh.interface_node_pairs()
    canon = np.arange(mesh.n_nodes)
    if len(pairs):
        if len(np.unique(pairs[:, 1])) != len(pairs) or len(np.unique(pairs[:, 0])) != len(pairs):
            raise MeshError("non-matching interface: node paired more than once")
        ref = mesh.reference
        tol = 1e-12 * mesh.diameter()
        if np.max(np.abs(ref[pairs[:, 0]] - ref[pairs[:, 1]])) > tol:
            raise MeshError("non-matching interface: paired nodes differ in reference position")
        canon[pairs[:, 1]] = pairs[:, 0]

    tri = canon[mesh.triangles]
    used_vertices = np.unique(tri)
    vnum = -np.ones(mesh.n_nodes, dtype=np.int64)
    vnum[used_vertices] = np.arange(len(used_vertices))
    nv = len(used_vertices)

    m = mesh.n_triangles
    ekeys = np.sort(tri[:, EDGES.ravel()].reshape(m, 3, 2), axis=2).reshape(-1, 2)
    uniq, inv = np.unique(ekeys, axis=0, return_inverse=True)
    element_nodes = np.column_stack([vnum[tri], nv + inv.reshape(m, 3)])

    ref = mesh.reference
    coords = np.vstack([ref[used_vertices], 0.5 * (ref[uniq[:, 0]] + ref[uniq[:, 1]])])

    def edge_p2_nodes(edges):
        if len(edges) == 0:
            return np.zeros(0, dtype=np.int64)
        ce = np.sort(canon[edges], axis=1)
        pos = _lookup_rows(uniq, ce)
        return np.unique(np.concatenate([vnum[ce.ravel()], nv + pos]))

    dir_nodes = edge_p2_nodes(mesh.edges_with(DIRICHLET, INFLOW))
    inflow_nodes = edge_p2_nodes(mesh.edges_with(INFLOW))
    dofs = [2 * dir_nodes, 2 * dir_nodes + 1]
    if right_end == "noflux":
        dofs.append(2 * edge_p2_nodes(mesh.edges_with(OUTFLOW)))
    dirichlet = np.unique(np.concatenate(dofs))
    inflow = np.intersect1d(np.concatenate([2 * inflow_nodes, 2 * inflow_nodes + 1]), dirichlet)

    is_fluid = mesh.tags == FLUID
    pressure = -np.ones(m, dtype=np.int64)
    pressure[is_fluid] = np.arange(int(is_fluid.sum()))
    fluid_p2 = np.zeros(len(coords), bool)
    fluid_p2[element_nodes[is_fluid].ravel()] = True
    structure_p2 = np.zeros(len(coords), bool)
    structure_p2[element_nodes[~is_fluid].ravel()] = True
    return CoupledSpace(mesh, element_nodes, coords, pressure, dirichlet, inflow,
                        fluid_p2, structure_p2, right_end)


def _lookup_rows(table: np.ndarray, rows: np.ndarray) -> np.ndarray:
    """Index of each row of ``rows`` in the lexicographically sorted ``table``."""
    keys = table[:, 0] * (table.max() + 1) + table[:, 1]
    q = rows[:, 0] * (table.max() + 1) + rows[:, 1]
    pos = np.searchsorted(keys, q)
    if np.any(pos >= len(keys)) or np.any(keys[np.minimum(pos, len(keys) - 1)] != q):
        raise MeshError("boundary edge not found in triangulation")
    return pos


def with_mesh(space: CoupledSpace, mesh: Mesh) -> CoupledSpace:
    """Same DOF layout on a moved mesh with identical connectivity."""
    if mesh.triangles.shape != space.mesh.triangles.shape or not np.array_equal(
            mesh.triangles, space.mesh.triangles):
        raise MeshError("connectivity changed; rebuild the space")
    from dataclasses import replace
    return replace(space, mesh=mesh)
