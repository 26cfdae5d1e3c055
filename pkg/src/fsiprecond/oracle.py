"""Dense reference computations written independently of the vectorized assembly.

Each element is handled in a Python loop with a monomial basis fitted to the P2
nodes in physical coordinates and a collapsed Gauss-Legendre rule, so nothing
here shares quadrature, basis or scatter code with :mod:`fsiprecond.femcore`.
Only meant for small meshes.
"""
from __future__ import annotations

import numpy as np

from .femcore.space import CoupledSpace
from .meshkit import FLUID

_LOCAL_EDGES = ((1, 2), (2, 0), (0, 1))


def collapsed_gauss(p: np.ndarray, n: int = 6):
    """Points and weights on triangle ``p`` (3, 2) from an n x n Duffy-mapped rule."""
    t, w = np.polynomial.legendre.leggauss(n)
    t = 0.5 * (t + 1.0)
    w = 0.5 * w
    pts, wts = [], []
    for ui, wu in zip(t, w):
        for vi, wv in zip(t, w):
            s, r = ui, vi * (1.0 - ui)
            pts.append(p[0] + s * (p[1] - p[0]) + r * (p[2] - p[0]))
            wts.append(wu * wv * (1.0 - ui))
    d1, d2 = p[1] - p[0], p[2] - p[0]
    jac = abs(d1[0] * d2[1] - d1[1] * d2[0])
    return np.array(pts), np.array(wts) * jac


class LocalP2:
    """Quadratic nodal basis on one triangle via a monomial Vandermonde fit."""

    def __init__(self, p: np.ndarray):
        self.center = p.mean(axis=0)
        self.scale = np.max(np.linalg.norm(p - self.center, axis=1))
        nodes = list(p) + [0.5 * (p[a] + p[b]) for a, b in _LOCAL_EDGES]
        V = np.array([self._mono(x) for x in nodes])
        self.coef = np.linalg.inv(V)          # column i: coefficients of basis i

    def _mono(self, x):
        X, Y = (np.asarray(x) - self.center) / self.scale
        return np.array([1.0, X, Y, X * X, X * Y, Y * Y])

    def _dmono(self, x):
        X, Y = (np.asarray(x) - self.center) / self.scale
        dx = np.array([0.0, 1.0, 0.0, 2 * X, Y, 0.0]) / self.scale
        dy = np.array([0.0, 0.0, 1.0, 0.0, X, 2 * Y]) / self.scale
        return np.stack([dx, dy])

    def values(self, x) -> np.ndarray:
        return self._mono(x) @ self.coef                      # (6,)

    def grads(self, x) -> np.ndarray:
        return (self._dmono(x) @ self.coef).T                 # (6, 2)


def _elements(space: CoupledSpace):
    mesh = space.mesh
    for e, tri in enumerate(mesh.triangles):
        yield e, mesh.nodes[tri], mesh.tags[e] == FLUID, space.element_nodes[e]


def _vec_dofs(nodes6):
    return [2 * n + c for n in nodes6 for c in range(2)]


def _vec_basis(basis: LocalP2, x):
    """Values (12, 2) and gradients (12, 2, 2) of the vector basis phi_i e_c."""
    phi, g = basis.values(x), basis.grads(x)
    val = np.zeros((12, 2))
    grad = np.zeros((12, 2, 2))
    for i in range(6):
        for c in range(2):
            val[2 * i + c, c] = phi[i]
            grad[2 * i + c, c, :] = g[i]
    return val, grad


def dense_blocks(space: CoupledSpace, params):
    """Dense A, B, D, Mp and the per-piece matrices, by elementwise quadrature."""
    nv, npr = space.n_velocity, space.n_pressure
    A = np.zeros((nv, nv))
    D = np.zeros((nv, nv))
    B = np.zeros((npr, nv))
    Mp = np.zeros((npr, npr))
    for e, p, fluid, nodes6 in _elements(space):
        basis = LocalP2(p)
        dofs = _vec_dofs(nodes6)
        xs, ws = collapsed_gauss(p)
        Ae = np.zeros((12, 12))
        De = np.zeros((12, 12))
        Be = np.zeros(12)
        for x, w in zip(xs, ws):
            val, grad = _vec_basis(basis, x)
            eps = 0.5 * (grad + grad.transpose(0, 2, 1))
            div = grad[:, 0, 0] + grad[:, 1, 1]
            mass = val @ val.T
            strain = np.einsum("iab,jab->ij", eps, eps)
            dd = np.outer(div, div)
            if fluid:
                Ae += w * (params.rho_f / params.k * mass + params.mu_f * strain)
                De += w * dd
                Be += w * div
            else:
                Ae += w * (params.rho_s / params.k * mass
                           + params.k * (params.mu_s * strain + params.lambda_s * dd))
        A[np.ix_(dofs, dofs)] += Ae
        D[np.ix_(dofs, dofs)] += De
        if fluid:
            q = space.element_pressure[e]
            B[q, dofs] += Be
            Mp[q, q] += ws.sum()
    return A, B, D, Mp


def dense_rhs(space: CoupledSpace, params, v_prev, u_s_prev, w_vertex=None,
              g_f=(0.0, 0.0), g_s=(0.0, 0.0)) -> np.ndarray:
    """Dense evaluation of the modified-GCE load vector (see ``assemble_rhs``)."""
    rhs = np.zeros(space.n_velocity)
    g_f, g_s = np.asarray(g_f, float), np.asarray(g_s, float)
    mesh = space.mesh
    for e, p, fluid, nodes6 in _elements(space):
        basis = LocalP2(p)
        dofs = _vec_dofs(nodes6)
        ve = np.asarray(v_prev)[dofs]
        ue = np.asarray(u_s_prev)[dofs]
        if w_vertex is not None:
            wv = np.asarray(w_vertex)[mesh.triangles[e]]
            # linear interpolation of the vertex mesh velocity
            M = np.column_stack([np.ones(3), p])
            wcoef = np.linalg.solve(M, wv)
        xs, ws = collapsed_gauss(p)
        for x, w in zip(xs, ws):
            val, grad = _vec_basis(basis, x)
            v = val.T @ ve
            if fluid:
                gv = np.einsum("i,iab->ab", ve, grad)
                adv = v - (np.array([1.0, *x]) @ wcoef if w_vertex is not None else 0.0)
                f = params.rho_f / params.k * v + g_f - params.rho_f * gv @ adv
                rhs[dofs] += w * val @ f
            else:
                gu = np.einsum("i,iab->ab", ue, grad)
                eps_u = 0.5 * (gu + gu.T)
                stress = params.mu_s * eps_u + params.lambda_s * np.trace(gu) * np.eye(2)
                eps = 0.5 * (grad + grad.transpose(0, 2, 1))
                f = params.rho_s / params.k * v + g_s
                rhs[dofs] += w * (val @ f - np.einsum("ab,iab->i", stress, eps))
    return rhs


def norm_pieces(space: CoupledSpace, params, u: np.ndarray):
    """Return (a(u,u), ||div u_f||^2, ||P0 div u_f||^2) by direct quadrature of u.

    ``u`` may be a matrix with one coefficient vector per column; the three
    results are then arrays over the columns.
    """
    U = np.asarray(u, dtype=float)
    single = U.ndim == 1
    U = U.reshape(U.shape[0], -1)
    m = U.shape[1]
    a, div2, pdiv2 = np.zeros(m), np.zeros(m), np.zeros(m)
    for e, p, fluid, nodes6 in _elements(space):
        basis = LocalP2(p)
        ue = U[_vec_dofs(nodes6)]                              # (12, m)
        xs, ws = collapsed_gauss(p)
        mean_div = np.zeros(m)
        for x, w in zip(xs, ws):
            val, grad = _vec_basis(basis, x)
            v = val.T @ ue                                     # (2, m)
            g = np.einsum("im,iab->abm", ue, grad)
            eps = 0.5 * (g + g.transpose(1, 0, 2))
            div = g[0, 0] + g[1, 1]
            vv = np.sum(v * v, axis=0)
            ee = np.sum(eps * eps, axis=(0, 1))
            if fluid:
                a += w * (params.rho_f / params.k * vv + params.mu_f * ee)
                div2 += w * div * div
                mean_div += w * div
            else:
                a += w * (params.rho_s / params.k * vv
                          + params.k * (params.mu_s * ee + params.lambda_s * div * div))
        if fluid:
            pdiv2 += mean_div ** 2 / ws.sum()
    if single:
        return float(a[0]), float(div2[0]), float(pdiv2[0])
    return a, div2, pdiv2


def dense_h1_gram(space: CoupledSpace) -> np.ndarray:
    """Gram matrix of ||v_f||_1^2 + ||v_s||_1^2 (mass + full gradient)."""
    nv = space.n_velocity
    G = np.zeros((nv, nv))
    for e, p, fluid, nodes6 in _elements(space):
        basis = LocalP2(p)
        dofs = _vec_dofs(nodes6)
        xs, ws = collapsed_gauss(p)
        Ge = np.zeros((12, 12))
        for x, w in zip(xs, ws):
            val, grad = _vec_basis(basis, x)
            Ge += w * (val @ val.T + np.einsum("iab,jab->ij", grad, grad))
        G[np.ix_(dofs, dofs)] += Ge
    return G
