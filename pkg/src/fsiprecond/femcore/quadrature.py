"""Quadrature and the quadratic Lagrange basis on triangles."""
import numpy as np

_s15 = np.sqrt(15.0)
_a1, _b1 = (9 - 2 * _s15) / 21, (6 + _s15) / 21
_a2, _b2 = (9 + 2 * _s15) / 21, (6 - _s15) / 21
_w1, _w2 = (155 + _s15) / 1200, (155 - _s15) / 1200

# 7-point symmetric rule, exact for degree 5; weights sum to 1 (multiply by area).
BARYCENTRIC = np.array([
    [1 / 3, 1 / 3, 1 / 3],
    [_a1, _b1, _b1], [_b1, _a1, _b1], [_b1, _b1, _a1],
    [_a2, _b2, _b2], [_b2, _a2, _b2], [_b2, _b2, _a2],
])
WEIGHTS = np.array([9 / 40, _w1, _w1, _w1, _w2, _w2, _w2])

# local P2 nodes: vertices 0, 1, 2 then midpoints of edges (1,2), (2,0), (0,1)
EDGES = np.array([[1, 2], [2, 0], [0, 1]])


def p2_values(lam: np.ndarray) -> np.ndarray:
    """Basis values at barycentric points ``lam`` (nq, 3) -> (nq, 6)."""
    l0, l1, l2 = lam.T
    return np.column_stack([
        l0 * (2 * l0 - 1), l1 * (2 * l1 - 1), l2 * (2 * l2 - 1),
        4 * l1 * l2, 4 * l2 * l0, 4 * l0 * l1,
    ])


def p2_barycentric_derivatives(lam: np.ndarray) -> np.ndarray:
    """d(phi_i)/d(lambda_k) at points ``lam``, shape (nq, 6, 3)."""
    nq = len(lam)
    d = np.zeros((nq, 6, 3))
    for i in range(3):
        d[:, i, i] = 4 * lam[:, i] - 1
    for m, (a, b) in enumerate(EDGES):
        d[:, 3 + m, a] = 4 * lam[:, b]
        d[:, 3 + m, b] = 4 * lam[:, a]
    return d


def barycentric_gradients(p: np.ndarray):
    """Gradients of barycentric coordinates for triangles ``p`` (E, 3, 2).

    Returns ``(grads (E, 3, 2), areas (E,))``.
    """
    d1 = p[:, 1] - p[:, 0]
    d2 = p[:, 2] - p[:, 0]
    det = d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0]
    g = np.empty(p.shape)
    g[:, 1] = np.column_stack([d2[:, 1], -d2[:, 0]]) / det[:, None]
    g[:, 2] = np.column_stack([-d1[:, 1], d1[:, 0]]) / det[:, None]
    g[:, 0] = -g[:, 1] - g[:, 2]
    return g, 0.5 * det
