"""Two-region triangulations, discrete ALE mesh motion and geometric diagnostics.

A :class:`Mesh` holds fluid and structure triangles over one node array.  Nodes
on the fluid-structure interface are stored twice (one copy per side) so the
fluid copy can follow the ALE map while the structure stays on its reference
configuration.  ``interface_edges`` pairs each fluid-side edge with its
structure-side twin, endpoint by endpoint.
"""
from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Callable, Optional

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

FLUID = 0
STRUCTURE = 1
TAG_NAMES = {FLUID: "fluid", STRUCTURE: "structure"}
TAG_CODES = {v: k for k, v in TAG_NAMES.items()}

# Boundary markers.  ``inflow`` is a Dirichlet boundary carrying nonzero data.
DIRICHLET = "outer_dirichlet"
INFLOW = "inflow"
OUTFLOW = "outflow"
INTERFACE = "interface"
MARKERS = (DIRICHLET, INFLOW, OUTFLOW, INTERFACE)

GEOMETRIES = ("cavity_halves", "channel_flag", "fluid_square")


class MeshError(ValueError):
    pass


class InvalidMotionError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class Mesh:
    nodes: np.ndarray                 # (N, 2)
    triangles: np.ndarray             # (M, 3), counterclockwise
    tags: np.ndarray                  # (M,), FLUID or STRUCTURE
    boundary_edges: np.ndarray        # (K, 2)
    boundary_markers: tuple           # (K,) marker names
    interface_edges: np.ndarray       # (I, 2, 2): [fluid edge, structure edge]
    reference_nodes: Optional[np.ndarray] = None
    geometry: str = ""
    level: int = 0

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)

    @property
    def n_triangles(self) -> int:
        return len(self.triangles)

    @property
    def fluid_triangles(self) -> np.ndarray:
        return np.flatnonzero(self.tags == FLUID)

    @property
    def structure_triangles(self) -> np.ndarray:
        return np.flatnonzero(self.tags == STRUCTURE)

    @property
    def reference(self) -> np.ndarray:
        return self.nodes if self.reference_nodes is None else self.reference_nodes

    def fluid_nodes(self) -> np.ndarray:
        return np.unique(self.triangles[self.tags == FLUID])

    def structure_nodes(self) -> np.ndarray:
        return np.unique(self.triangles[self.tags == STRUCTURE])

    def interface_node_pairs(self) -> np.ndarray:
        """(P, 2) array of (fluid node, structure node), sorted by fluid node."""
        pairs = self.interface_edges.transpose(0, 2, 1).reshape(-1, 2)
        pairs = np.unique(pairs, axis=0)
        return pairs

    def edges_with(self, *markers: str) -> np.ndarray:
        sel = [i for i, m in enumerate(self.boundary_markers) if m in markers]
        return self.boundary_edges[sel].reshape(-1, 2)

    def diameter(self) -> float:
        pts = self.reference
        return float(np.linalg.norm(pts.max(axis=0) - pts.min(axis=0)))

    def signed_areas(self, nodes: Optional[np.ndarray] = None) -> np.ndarray:
        x = self.nodes if nodes is None else nodes
        p0, p1, p2 = x[self.triangles[:, 0]], x[self.triangles[:, 1]], x[self.triangles[:, 2]]
        return 0.5 * ((p1[:, 0] - p0[:, 0]) * (p2[:, 1] - p0[:, 1])
                      - (p2[:, 0] - p0[:, 0]) * (p1[:, 1] - p0[:, 1]))

    def validate(self) -> None:
        """Raise :class:`MeshError` if any structural invariant is violated."""
        if np.any(self.signed_areas() <= 0):
            raise MeshError("triangle with non-positive signed area")
        ref = self.reference
        tol = 1e-12 * self.diameter()
        fl_edges = _edge_set(self.triangles[self.tags == FLUID])
        st_edges = _edge_set(self.triangles[self.tags == STRUCTURE])
        seen_f, seen_s = set(), set()
        for fe, se in self.interface_edges:
            kf, ks = tuple(sorted(fe)), tuple(sorted(se))
            if kf not in fl_edges or ks not in st_edges:
                raise MeshError(f"interface edge {fe}/{se} not on the expected side")
            if kf in seen_f or ks in seen_s:
                raise MeshError(f"interface edge {fe}/{se} listed twice")
            seen_f.add(kf)
            seen_s.add(ks)
            if np.max(np.abs(ref[fe] - ref[se])) > tol:
                raise MeshError(f"interface edges {fe}/{se} do not match geometrically")
        # every edge of a fluid triangle lying on a structure triangle must be paired
        pair_map = dict(map(tuple, self.interface_node_pairs()))
        for kf in fl_edges:
            img = tuple(sorted((pair_map.get(kf[0], -1), pair_map.get(kf[1], -1))))
            if img in st_edges and kf not in seen_f:
                raise MeshError(f"unpaired interface edge {kf}")


def _edge_set(tris: np.ndarray) -> set:
    e = np.sort(np.concatenate([tris[:, [0, 1]], tris[:, [1, 2]], tris[:, [2, 0]]]), axis=1)
    return set(map(tuple, e))


# ---------------------------------------------------------------------------
# construction


def _grid_triangulation(xs, ys, cell_tag):
    """Tensor grid split along the bottom-left/top-right diagonal.

    ``cell_tag(xc, yc)`` returns FLUID, STRUCTURE or None (hole) for a cell center.
    """
    nx, ny = len(xs), len(ys)
    X, Y = np.meshgrid(xs, ys, indexing="ij")
    nodes = np.column_stack([X.ravel(), Y.ravel()])
    idx = np.arange(nx * ny).reshape(nx, ny)
    tris, tags = [], []
    for i in range(nx - 1):
        for j in range(ny - 1):
            t = cell_tag(0.5 * (xs[i] + xs[i + 1]), 0.5 * (ys[j] + ys[j + 1]))
            if t is None:
                continue
            a, b, c, d = idx[i, j], idx[i + 1, j], idx[i + 1, j + 1], idx[i, j + 1]
            tris += [(a, b, c), (a, c, d)]
            tags += [t, t]
    tris = np.array(tris, dtype=np.int64)
    used = np.unique(tris)
    renum = -np.ones(len(nodes), dtype=np.int64)
    renum[used] = np.arange(len(used))
    return nodes[used], renum[tris], np.array(tags, dtype=np.int8)


def refine_triangulation(nodes, tris, tags):
    """Uniform quadrisection through edge midpoints; children keep the parent tag."""
    edges = np.sort(np.concatenate([tris[:, [1, 2]], tris[:, [2, 0]], tris[:, [0, 1]]]), axis=1)
    uniq, inv = np.unique(edges, axis=0, return_inverse=True)
    inv = inv.ravel()
    m = len(tris)
    mid = len(nodes) + inv.reshape(3, m).T  # midpoint opposite each vertex
    new_nodes = np.vstack([nodes, 0.5 * (nodes[uniq[:, 0]] + nodes[uniq[:, 1]])])
    v0, v1, v2 = tris.T
    m0, m1, m2 = mid.T
    children = np.concatenate([
        np.column_stack([v0, m2, m1]),
        np.column_stack([m2, v1, m0]),
        np.column_stack([m1, m0, v2]),
        np.column_stack([m0, m1, m2]),
    ])
    return new_nodes, children, np.tile(tags, 4)


def _channel_flag_base():
    # Channel of height 0.41 with a square obstacle standing in for the cylinder
    # and a thin elastic flag attached to its downstream face.
    xs = np.concatenate([[0.0, 0.075, 0.15, 0.25], np.linspace(0.25, 0.6, 4)[1:],
                         np.linspace(0.6, 2.5, 20)[1:]])
    ys = np.array([0.0, 0.075, 0.15, 0.19, 0.21, 0.25, 0.33, 0.41])

    def cell_tag(xc, yc):
        if 0.15 < xc < 0.25 and 0.15 < yc < 0.25:
            return None
        if 0.25 < xc < 0.6 and 0.19 < yc < 0.21:
            return STRUCTURE
        return FLUID

    return _grid_triangulation(xs, ys, cell_tag), (0.0, 2.5, 0.0, 0.41)


def _base_triangulation(geometry: str):
    if geometry == "cavity_halves":
        g = np.linspace(0.0, 1.0, 5)
        return _grid_triangulation(g, g, lambda xc, yc: FLUID if yc > 0.5 else STRUCTURE), (0, 1, 0, 1)
    if geometry == "fluid_square":
        g = np.linspace(0.0, 1.0, 3)
        return _grid_triangulation(g, g, lambda xc, yc: FLUID), (0, 1, 0, 1)
    if geometry == "channel_flag":
        return _channel_flag_base()
    raise MeshError(f"unknown geometry {geometry!r}; expected one of {GEOMETRIES}")


def build_two_region_mesh(geometry: str, refinement_level: int = 0) -> Mesh:
    """Build a tagged triangulation, refined ``refinement_level`` times by quadrisection.

    ``cavity_halves``: unit square, fluid above y = 0.5, structure below; fluid enters
    through the left side and leaves through the right side.  ``channel_flag``:
    channel with a square obstacle and an elastic flag.  ``fluid_square``: single
    fluid region (used to check reductions to plain Stokes layouts).
    """
    if refinement_level < 0:
        raise MeshError("refinement_level must be >= 0")
    (nodes, tris, tags), box = _base_triangulation(geometry)
    for _ in range(refinement_level):
        nodes, tris, tags = refine_triangulation(nodes, tris, tags)
    return _assemble_mesh(nodes, tris, tags, _marker_rule(geometry, box), geometry, refinement_level)


def _marker_rule(geometry, box) -> Callable[[np.ndarray], str]:
    x0, x1, y0, y1 = box
    eps = 1e-12

    def rule(mid):
        x, y = mid
        if geometry == "cavity_halves" and y < 0.5:
            return DIRICHLET
        if abs(x - x0) < eps:
            return INFLOW
        if abs(x - x1) < eps:
            return OUTFLOW
        return DIRICHLET

    return rule


def _assemble_mesh(nodes, tris, tags, marker_rule, geometry="", level=0) -> Mesh:
    """Classify boundary edges and split interface nodes into fluid/structure copies."""
    m = len(tris)
    loc = np.array([[0, 1], [1, 2], [2, 0]])
    all_edges = tris[:, loc].reshape(-1, 2)               # oriented, per triangle
    owner = np.repeat(np.arange(m), 3)
    key = np.sort(all_edges, axis=1)
    uniq, inv, counts = np.unique(key, axis=0, return_inverse=True, return_counts=True)
    inv = inv.ravel()

    # duplicate nodes touched by both fluid and structure triangles
    touches_f = np.zeros(len(nodes), bool)
    touches_s = np.zeros(len(nodes), bool)
    touches_f[tris[tags == FLUID].ravel()] = True
    touches_s[tris[tags == STRUCTURE].ravel()] = True
    shared = np.flatnonzero(touches_f & touches_s)
    copy_of = -np.ones(len(nodes), dtype=np.int64)
    copy_of[shared] = len(nodes) + np.arange(len(shared))
    new_nodes = np.vstack([nodes, nodes[shared]])
    new_tris = tris.copy()
    st = tags == STRUCTURE
    sub = new_tris[st]
    sub = np.where(copy_of[sub] >= 0, copy_of[sub], sub)
    new_tris[st] = sub

    b_edges, b_markers, iface = [], [], []
    for e in range(len(uniq)):
        occ = np.flatnonzero(inv == e)
        if counts[e] == 1:
            t = owner[occ[0]]
            edge = new_tris[t][loc[occ[0] % 3]]
            b_edges.append(edge)
            b_markers.append(marker_rule(nodes[uniq[e]].mean(axis=0)))
        else:
            t0, t1 = owner[occ]
            if tags[t0] == tags[t1]:
                continue
            f_occ, s_occ = (occ[0], occ[1]) if tags[t0] == FLUID else (occ[1], occ[0])
            fe = tris[owner[f_occ]][loc[f_occ % 3]]
            fe_new = new_tris[owner[f_occ]][loc[f_occ % 3]]
            se_new = copy_of[fe]
            iface.append((fe_new, se_new))
            b_edges += [fe_new, se_new[::-1]]
            b_markers += [INTERFACE, INTERFACE]

    mesh = Mesh(
        nodes=new_nodes,
        triangles=new_tris,
        tags=tags.astype(np.int8),
        boundary_edges=np.array(b_edges, dtype=np.int64).reshape(-1, 2),
        boundary_markers=tuple(b_markers),
        interface_edges=np.array(iface, dtype=np.int64).reshape(-1, 2, 2),
        geometry=geometry,
        level=level,
    )
    mesh.validate()
    return mesh


# ---------------------------------------------------------------------------
# text format


def write_mesh(mesh: Mesh, path) -> None:
    """Write ``nodes N triangles M edges K`` followed by node, triangle and edge lines.

    Interface edges are written in consecutive (fluid side, structure side) pairs.
    """
    with open(path, "w") as f:
        f.write(format_mesh(mesh))


def format_mesh(mesh: Mesh) -> str:
    edges, markers = [], []
    for e, mk in zip(mesh.boundary_edges, mesh.boundary_markers):
        if mk != INTERFACE:
            edges.append(e)
            markers.append(mk)
    for fe, se in mesh.interface_edges:
        edges += [fe, se]
        markers += [INTERFACE, INTERFACE]
    lines = [f"nodes {mesh.n_nodes} triangles {mesh.n_triangles} edges {len(edges)}"]
    lines += [f"{x:.17g} {y:.17g}" for x, y in mesh.nodes]
    lines += [f"{i} {j} {k} {TAG_NAMES[int(t)]}" for (i, j, k), t in zip(mesh.triangles, mesh.tags)]
    lines += [f"{i} {j} {mk}" for (i, j), mk in zip(edges, markers)]
    return "\n".join(lines) + "\n"


def read_mesh(path, validate: bool = True) -> Mesh:
    with open(path) as f:
        return parse_mesh(f.read(), validate=validate)


def parse_mesh(text: str, validate: bool = True) -> Mesh:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    head = lines[0].split()
    if head[0::2] != ["nodes", "triangles", "edges"]:
        raise MeshError(f"bad mesh header: {lines[0]!r}")
    n, m, k = (int(v) for v in head[1::2])
    body = lines[1:]
    nodes = np.array([[float(v) for v in ln.split()] for ln in body[:n]]).reshape(-1, 2)
    tri_rows = [ln.split() for ln in body[n:n + m]]
    tris = np.array([[int(v) for v in r[:3]] for r in tri_rows], dtype=np.int64).reshape(-1, 3)
    tags = np.array([TAG_CODES[r[3]] for r in tri_rows], dtype=np.int8)
    b_edges, b_markers, iface_flat = [], [], []
    for ln in body[n + m:n + m + k]:
        i, j, mk = ln.split()
        if mk not in MARKERS:
            raise MeshError(f"unknown marker {mk!r}")
        e = np.array([int(i), int(j)])
        if mk == INTERFACE:
            iface_flat.append(e)
        b_edges.append(e)
        b_markers.append(mk)
    if len(iface_flat) % 2:
        raise MeshError("interface edges must come in fluid/structure pairs")
    iface = np.array(iface_flat, dtype=np.int64).reshape(-1, 2, 2)
    mesh = Mesh(nodes, tris, tags, np.array(b_edges, dtype=np.int64).reshape(-1, 2),
                tuple(b_markers), iface)
    if validate:
        mesh.validate()
    return mesh


# ---------------------------------------------------------------------------
# ALE extension


@dataclass(frozen=True, eq=False)
class MeshMotion:
    reference_mesh: Mesh
    node_displacement: np.ndarray     # (N, 2), all nodes of the reference mesh
    operator_kind: str = "laplacian"
    min_det: float = 1.0

    @property
    def valid(self) -> bool:
        return self.min_det > 0

    @classmethod
    def from_displacement(cls, mesh: Mesh, displacement, operator_kind="prescribed"):
        disp = np.asarray(displacement, dtype=float).reshape(mesh.n_nodes, 2)
        return cls(mesh, disp, operator_kind, _min_fluid_det(mesh, disp))

    @classmethod
    def identity(cls, mesh: Mesh):
        return cls.from_displacement(mesh, np.zeros((mesh.n_nodes, 2)), "identity")


def _element_jacobians(mesh: Mesh, disp: np.ndarray, elems: np.ndarray) -> np.ndarray:
    """Constant Jacobian of x -> x + disp(x) on each listed element, shape (E, 2, 2)."""
    ref = mesh.reference
    t = mesh.triangles[elems]
    X = np.stack([ref[t[:, 1]] - ref[t[:, 0]], ref[t[:, 2]] - ref[t[:, 0]]], axis=2)
    dU = np.stack([disp[t[:, 1]] - disp[t[:, 0]], disp[t[:, 2]] - disp[t[:, 0]]], axis=2)
    # I + grad(disp) keeps the identity motion exact
    return np.eye(2) + dU @ np.linalg.inv(X)


def _min_fluid_det(mesh: Mesh, disp: np.ndarray) -> float:
    jac = _element_jacobians(mesh, disp, mesh.fluid_triangles)
    return float(np.linalg.det(jac).min()) if len(jac) else 1.0


def p1_extension_matrix(mesh: Mesh, operator_kind: str = "laplacian",
                        mu: float = 1.0, lam: float = 1.0) -> sp.csr_matrix:
    """Vector P1 stiffness on the reference fluid triangles, node-interleaved (2*i + c)."""
    ref = mesh.reference
    t = mesh.triangles[mesh.fluid_triangles]
    p = ref[t]                                               # (E, 3, 2)
    d1, d2 = p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]
    det = d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0]
    area = 0.5 * det
    # gradients of barycentric coordinates
    g = np.empty((len(t), 3, 2))
    g[:, 1] = np.column_stack([d2[:, 1], -d2[:, 0]]) / det[:, None]
    g[:, 2] = np.column_stack([-d1[:, 1], d1[:, 0]]) / det[:, None]
    g[:, 0] = -g[:, 1] - g[:, 2]
    ke = np.zeros((len(t), 6, 6))
    if operator_kind == "laplacian":
        lap = np.einsum("eik,ejk->eij", g, g) * area[:, None, None]
        ke[:, 0::2, 0::2] = lap
        ke[:, 1::2, 1::2] = lap
    elif operator_kind == "elasticity":
        # symmetric gradient basis: local dof 2*i + c has grad = e_c (x) g_i
        G = np.zeros((len(t), 6, 2, 2))
        for i in range(3):
            for c in range(2):
                G[:, 2 * i + c, c, :] = g[:, i]
        eps = 0.5 * (G + G.transpose(0, 1, 3, 2))
        div = np.trace(G, axis1=2, axis2=3)
        ke = (2 * mu * np.einsum("eiab,ejab->eij", eps, eps)
              + lam * np.einsum("ei,ej->eij", div, div)) * area[:, None, None]
    else:
        raise ValueError(f"unknown extension operator {operator_kind!r}")
    dofs = np.stack([2 * t, 2 * t + 1], axis=2).reshape(len(t), 6)
    rows = np.repeat(dofs, 6, axis=1).ravel()
    cols = np.tile(dofs, (1, 6)).ravel()
    n = 2 * mesh.n_nodes
    return sp.coo_matrix((ke.ravel(), (rows, cols)), shape=(n, n)).tocsr()


def fluid_boundary_nodes(mesh: Mesh) -> np.ndarray:
    """Fluid nodes on the outer fluid boundary (excluding interface-only nodes)."""
    fluid = set(mesh.fluid_nodes().tolist())
    outer = {int(i) for i in mesh.edges_with(DIRICHLET, INFLOW, OUTFLOW).ravel() if int(i) in fluid}
    return np.array(sorted(outer), dtype=np.int64)


def extend(mesh: Mesh, fixed_nodes: np.ndarray, fixed_values: np.ndarray,
           operator_kind: str = "laplacian", mu: float = 1.0, lam: float = 1.0) -> np.ndarray:
    """Solve the P1 extension with displacement prescribed on ``fixed_nodes``.

    Returns an (N, 2) displacement that is zero on structure-only nodes.
    """
    K = p1_extension_matrix(mesh, operator_kind, mu, lam)
    fluid = mesh.fluid_nodes()
    fixed_nodes = np.asarray(fixed_nodes, dtype=np.int64)
    fixed_values = np.asarray(fixed_values, dtype=float).reshape(-1, 2)
    free_nodes = np.setdiff1d(fluid, fixed_nodes)
    fixed = np.stack([2 * fixed_nodes, 2 * fixed_nodes + 1], axis=1).ravel()
    free = np.stack([2 * free_nodes, 2 * free_nodes + 1], axis=1).ravel()
    u = np.zeros(2 * mesh.n_nodes)
    u[fixed] = fixed_values.ravel()
    if len(free):
        Kff = K[free][:, free].tocsc()
        rhs = -K[free][:, fixed] @ u[fixed]
        try:
            u[free] = spla.splu(Kff).solve(rhs)
        except RuntimeError as exc:
            raise MeshError(f"singular extension system: {exc}") from exc
    return u.reshape(-1, 2)


def solve_ale_extension(mesh: Mesh, interface_displacement, operator_kind: str = "laplacian",
                        mu: float = 1.0, lam: float = 1.0,
                        structure_displacement=None) -> MeshMotion:
    """Extend interface motion into the fluid with zero motion on the outer fluid boundary.

    ``interface_displacement`` is (P, 2), ordered like ``mesh.interface_node_pairs()``.
    ``structure_displacement`` (N, 2), if given, supplies the vertex motion of the
    structure nodes used by :func:`geometry_report`; otherwise structure nodes move
    only on the interface.
    """
    pairs = mesh.interface_node_pairs()
    gi = np.asarray(interface_displacement, dtype=float).reshape(-1, 2)
    if len(gi) != len(pairs):
        raise ValueError(f"expected {len(pairs)} interface displacements, got {len(gi)}")
    outer = np.setdiff1d(fluid_boundary_nodes(mesh), pairs[:, 0])
    nodes = np.concatenate([outer, pairs[:, 0]])
    vals = np.vstack([np.zeros((len(outer), 2)), gi])
    disp = extend(mesh, nodes, vals, operator_kind, mu, lam)
    if structure_displacement is not None:
        sd = np.asarray(structure_displacement, dtype=float).reshape(-1, 2)
        snodes = mesh.structure_nodes()
        disp[snodes] = sd[snodes]
    disp[pairs[:, 1]] = gi
    return MeshMotion(mesh, disp, operator_kind, _min_fluid_det(mesh, disp))


def move_mesh(mesh: Mesh, motion: MeshMotion) -> Mesh:
    """Move the fluid nodes by ``motion``; structure nodes keep reference coordinates."""
    if not motion.valid:
        raise InvalidMotionError(f"motion flips a fluid element (min det {motion.min_det:.3e})")
    if motion.reference_mesh.n_nodes != mesh.n_nodes:
        raise InvalidMotionError("motion and mesh disagree on node count")
    ref = mesh.reference
    new = ref.copy()
    fl = mesh.fluid_nodes()
    new[fl] = ref[fl] + motion.node_displacement[fl]
    return replace(mesh, nodes=new, reference_nodes=ref)


def mesh_velocity(motion_prev: MeshMotion, motion_next: MeshMotion, k: float) -> np.ndarray:
    if k <= 0:
        raise ValueError("time step must be positive")
    if motion_prev.node_displacement.shape != motion_next.node_displacement.shape:
        raise ValueError("motions live on different meshes")
    return (motion_next.node_displacement - motion_prev.node_displacement) / k


@dataclass(frozen=True)
class GeometryReport:
    d0: float
    d1: float
    min_det: float
    min_angle: float


def interface_elements(mesh: Mesh) -> np.ndarray:
    """Structure triangles with at least one vertex on the interface."""
    s_iface = np.zeros(mesh.n_nodes, bool)
    s_iface[mesh.interface_edges[:, 1].ravel()] = True
    st = mesh.structure_triangles
    return st[s_iface[mesh.triangles[st]].any(axis=1)]


def geometry_report(mesh: Mesh, motion: MeshMotion) -> GeometryReport:
    disp = motion.node_displacement
    elems = interface_elements(mesh)
    jac = _element_jacobians(mesh, disp, elems)
    if len(jac):
        norms = np.linalg.norm(jac, ord=2, axis=(1, 2))
        dets = np.linalg.det(jac)
        with np.errstate(divide="ignore"):
            inv_det = np.where(dets > 0, 1.0 / np.where(dets > 0, dets, 1.0), np.inf)
        d0 = max(float(norms.max()), 1.0)
        d1 = max(float(inv_det.max()), 1.0)
    else:
        d0 = d1 = 1.0
    cur = mesh.reference + disp
    t = mesh.triangles[mesh.fluid_triangles]
    angles = []
    for a, b, c in ((0, 1, 2), (1, 2, 0), (2, 0, 1)):
        u = cur[t[:, b]] - cur[t[:, a]]
        v = cur[t[:, c]] - cur[t[:, a]]
        cosang = np.einsum("ij,ij->i", u, v) / (np.linalg.norm(u, axis=1) * np.linalg.norm(v, axis=1))
        angles.append(np.arccos(np.clip(cosang, -1.0, 1.0)))
    return GeometryReport(d0=d0, d1=d1, min_det=_min_fluid_det(mesh, disp),
                          min_angle=float(np.min(angles)))
