"""Small-scale damped Levenberg-Marquardt with finite-difference Jacobians.

The systems solved here are tiny (a handful of unknowns), so robustness and
determinism matter more than speed: Jacobians are central differences and the
normal-equations solve uses fixed, unrandomized LAPACK routines.
"""

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

Residual = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class LmOptions:
    max_iter: int = 200
    tol_residual: float = 1e-10
    tol_step: float = 1e-12
    lambda_init: float = 1e-3
    lambda_up: float = 10.0
    lambda_down: float = 0.1

    def __post_init__(self):
        if min(self.max_iter, self.tol_residual, self.tol_step, self.lambda_init) <= 0:
            raise ValueError("LmOptions fields must be positive")
        if not (self.lambda_up > 1.0 > self.lambda_down > 0.0):
            raise ValueError("need lambda_up > 1 > lambda_down > 0")


@dataclass
class LmResult:
    x: np.ndarray
    residual_norm: float
    iterations: int
    converged: bool
    damping_trace: list = field(default_factory=list)


def fd_jacobian(residual: Residual, x: np.ndarray, h: float = 1e-6) -> np.ndarray:
    """Central-difference Jacobian; step scaled per component by max(1, |x_i|)."""
    if h <= 0:
        raise ValueError("step must be positive")
    x = np.asarray(x, dtype=float)
    r0 = np.asarray(residual(x), dtype=float)
    jac = np.empty((r0.size, x.size))
    for i in range(x.size):
        hi = h * max(1.0, abs(x[i]))
        xp = x.copy()
        xp[i] += hi
        xm = x.copy()
        xm[i] -= hi
        rp = np.asarray(residual(xp), dtype=float)
        rm = np.asarray(residual(xm), dtype=float)
        if not (np.all(np.isfinite(rp)) and np.all(np.isfinite(rm))):
            raise FloatingPointError("non-finite residual in finite-difference Jacobian")
        jac[:, i] = (rp - rm) / (2.0 * hi)
    return jac


def levenberg_marquardt(residual: Residual, x0: np.ndarray,
                        opts: LmOptions = LmOptions()) -> LmResult:
    """Damped LM iteration on residual(x) = 0 from x0.

    Marquardt scaling: (J^T J + lam * diag(J^T J)) d = -J^T r, with diagonal
    entries floored at 1e-12. Accepted steps never increase the residual norm.
    """
    x = np.asarray(x0, dtype=float).copy()
    r = np.asarray(residual(x), dtype=float)
    if not np.all(np.isfinite(r)):
        raise FloatingPointError("residual not finite at initial point")
    rnorm = float(np.linalg.norm(r))
    lam = opts.lambda_init
    trace = []
    converged = rnorm <= opts.tol_residual
    it = 0
    while not converged and it < opts.max_iter:
        it += 1
        jac = fd_jacobian(residual, x)
        jtj = jac.T @ jac
        grad = jac.T @ r
        diag = np.maximum(np.diag(jtj), 1e-12)
        accepted = False
        step_norm = 0.0
        for _ in range(50):
            try:
                d = np.linalg.solve(jtj + lam * np.diag(diag), -grad)
            except np.linalg.LinAlgError:
                lam *= opts.lambda_up
                continue
            xt = x + d
            rt = np.asarray(residual(xt), dtype=float)
            if not np.all(np.isfinite(rt)):
                raise FloatingPointError("non-finite residual during iteration")
            rtnorm = float(np.linalg.norm(rt))
            if rtnorm <= rnorm:
                x, r, rnorm = xt, rt, rtnorm
                step_norm = float(np.linalg.norm(d))
                lam = max(lam * opts.lambda_down, 1e-14)
                accepted = True
                break
            lam *= opts.lambda_up
        trace.append(lam)
        if not accepted:
            break
        if rnorm <= opts.tol_residual or step_norm <= opts.tol_step:
            converged = True
    return LmResult(x=x, residual_norm=rnorm, iterations=it,
                    converged=converged or rnorm <= opts.tol_residual,
                    damping_trace=trace)
