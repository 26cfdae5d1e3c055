"""Full (non-restarted) right-preconditioned GMRES."""
from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np
import scipy.sparse.linalg as spla


@dataclass
class SolveReport:
    iterations: int
    residual_history: list
    converged: bool
    wall_time: float
    preconditioner: str = "none"
    variant: str = ""
    final_residual: float = 0.0
    replacements: int = 0

    def summary(self) -> str:
        state = "converged" if self.converged else "NOT converged"
        return (f"{self.preconditioner}/{self.variant}: {self.iterations} it, {state}, "
                f"rel. residual {self.final_residual:.2e}, {self.wall_time:.3f}s")


def _as_apply(op):
    if op is None:
        return lambda x: x
    if callable(op) and not hasattr(op, "shape"):
        return op
    if hasattr(op, "apply"):
        return op.apply
    return spla.aslinearoperator(op).matvec


def gmres(operator, preconditioner, b, tol: float = 1e-10, max_iter: int = 500,
          reorthogonalize: bool = True, max_replacements: int = 3):
    """Solve ``K x = b`` with right preconditioning ``K P y = b, x = P y``.

    Stops when the true relative residual ``||b - K x|| / ||b||`` drops below
    ``tol``.  If the Arnoldi estimate reaches ``tol`` while the true residual
    has not (rounding floor from badly scaled blocks), the true residual seeds
    a fresh Krylov cycle; at most ``max_replacements`` times.  ``max_iter``
    bounds the total count.  Returns ``(x, SolveReport)``; non-convergence is
    reported, not raised.
    """
    t0 = time.perf_counter()
    K = _as_apply(operator)
    P = _as_apply(preconditioner)
    kind = getattr(preconditioner, "kind", "none" if preconditioner is None else "custom")
    b = np.asarray(b, dtype=float)
    if not np.all(np.isfinite(b)):
        raise ValueError("right-hand side is not finite")
    bnorm = np.linalg.norm(b)
    if bnorm == 0.0:
        return np.zeros(b.size), SolveReport(0, [0.0], True, time.perf_counter() - t0, kind)

    x = np.zeros(b.size)
    history = [1.0]
    total = 0
    converged = False
    true_res = 1.0
    replacements = 0
    r = b
    while True:
        dx, its, true_res, hit = _cycle(K, P, r, b, x, bnorm, tol, max_iter - total,
                                        reorthogonalize, history)
        x = x + dx
        total += its
        if true_res < tol:
            converged = True
            break
        if not hit or replacements >= max_replacements or total >= max_iter:
            break
        replacements += 1
        r = b - K(x)
    report = SolveReport(total, history, converged, time.perf_counter() - t0, kind,
                         final_residual=float(true_res), replacements=replacements)
    return x, report


def _cycle(K, P, r0, b, x0, bnorm, tol, budget, reorthogonalize, history):
    """One Arnoldi cycle on ``K dx = r0``; residuals are measured against ``b``.

    Returns ``(dx, iterations, true relative residual, estimate_reached_tol)``.
    """
    n = r0.size
    m = min(budget, n)
    if m <= 0:
        return np.zeros(n), 0, np.linalg.norm(b - K(x0)) / bnorm, False
    V = np.zeros((m + 1, n))
    H = np.zeros((m + 1, m))
    cs, sn = np.zeros(m), np.zeros(m)
    g = np.zeros(m + 1)
    beta = np.linalg.norm(r0)
    V[0] = r0 / beta
    g[0] = beta
    dx = np.zeros(n)
    true_res = beta / bnorm
    hit = False
    j = 0
    for j in range(m):
        w = K(P(V[j]))
        for _ in range(2 if reorthogonalize else 1):
            for i in range(j + 1):
                h = V[i] @ w
                H[i, j] += h
                w = w - h * V[i]
        H[j + 1, j] = np.linalg.norm(w)
        breakdown = H[j + 1, j] <= 1e-14 * np.abs(H[: j + 1, j]).max(initial=1e-300)
        if not breakdown:
            V[j + 1] = w / H[j + 1, j]
        for i in range(j):
            a, c = H[i, j], H[i + 1, j]
            H[i, j] = cs[i] * a + sn[i] * c
            H[i + 1, j] = -sn[i] * a + cs[i] * c
        denom = np.hypot(H[j, j], H[j + 1, j])
        cs[j], sn[j] = (1.0, 0.0) if denom == 0 else (H[j, j] / denom, H[j + 1, j] / denom)
        H[j, j] = cs[j] * H[j, j] + sn[j] * H[j + 1, j]
        H[j + 1, j] = 0.0
        g[j + 1] = -sn[j] * g[j]
        g[j] = cs[j] * g[j]
        est = abs(g[j + 1]) / bnorm
        history.append(est)
        if est < tol or breakdown or j == m - 1:
            y = _back_substitute(H[: j + 1, : j + 1], g[: j + 1])
            # P applied once to the orthonormal combination; summing preconditioned
            # basis vectors loses digits when the blocks are badly scaled
            dx = P(y @ V[: j + 1])
            true_res = np.linalg.norm(b - K(x0 + dx)) / bnorm
            hit = est < tol or breakdown
            if true_res < tol or hit:
                break
    if hit and true_res >= tol:
        # estimates below the attainable floor are not meaningful; clip them so
        # the history stays monotone across a replacement
        start = len(history) - (j + 1)
        for i in range(start, len(history)):
            history[i] = max(history[i], true_res)
    return dx, j + 1, true_res, hit


def _back_substitute(R: np.ndarray, g: np.ndarray) -> np.ndarray:
    k = len(g)
    y = np.zeros(k)
    for i in range(k - 1, -1, -1):
        y[i] = (g[i] - R[i, i + 1:] @ y[i + 1:]) / R[i, i] if R[i, i] != 0 else 0.0
    return y
