"""Offline sliding surface design via LMI feasibility plus stability sweeps.

The static gain G is obtained from a semidefinite feasibility problem over
(R1, Rg, gamma); any returned point is re-certified by a direct eigenvalue
check that is independent of the SDP solver.
"""

from dataclasses import dataclass

import numpy as np

from .plant import RegularForm

DEFAULT_MARGIN_TOL = 1e-7


class LmiInfeasibleError(RuntimeError):
    """No strictly feasible certified point was found."""


@dataclass(frozen=True)
class SurfaceGain:
    """Gain of the sliding variable s = G x1 + x2."""
    g: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "g", np.atleast_2d(np.asarray(self.g, dtype=float)))

    @property
    def n_input(self) -> int:
        return self.g.shape[0]

    @property
    def g_bar(self) -> np.ndarray:
        return np.hstack([self.g, np.eye(self.n_input)])


@dataclass(frozen=True)
class LmiSolution:
    r1: np.ndarray
    rg: np.ndarray
    gamma: float
    g: np.ndarray
    certificate: float  # eigenvalue margin of the negated LMI block


def lmi_block(rf: RegularForm, r1: np.ndarray, rg: np.ndarray, gamma: float) -> np.ndarray:
    """The symmetric 3x3 block matrix whose negativity certifies feasibility."""
    m = rf.n_red
    ne = rf.e_bar.shape[0]
    a11, a12 = rf.a11, rf.a12
    e1, e2 = rf.e_bar1, rf.e_bar2
    d1 = rf.d_bar1
    b12 = r1 @ a11.T - rg.T @ a12.T
    b13 = r1 @ e1.T - rg.T @ e2.T
    return np.block([
        [-r1, b12, b13],
        [b12.T, -r1 + gamma * (d1 @ d1.T), np.zeros((m, ne))],
        [b13.T, np.zeros((ne, m)), -gamma * np.eye(ne)],
    ])


def certify(rf: RegularForm, r1: np.ndarray, rg: np.ndarray, gamma: float,
            margin_tol: float = DEFAULT_MARGIN_TOL) -> float:
    """Eigenvalue margin of the candidate point; positive iff certified.

    Returns min(-lambda_max(block), lambda_min(r1), gamma) - a point is
    strictly feasible when this exceeds margin_tol.
    """
    block_margin = -float(np.linalg.eigvalsh(lmi_block(rf, r1, rg, gamma)).max())
    r1_margin = float(np.linalg.eigvalsh(r1).min())
    return min(block_margin, r1_margin, gamma)


def design_g_lmi(rf: RegularForm, margin_tol: float = DEFAULT_MARGIN_TOL) -> LmiSolution:
    """Maximize the feasibility margin of the surface-design LMI.

    Scale is pinned by R1 <= I (the gain G = Rg R1^-1 is scale invariant).
    The SDP solution is only a candidate: it is certified by `certify` before
    being returned.
    """
    import cvxpy as cp

    m = rf.n_red
    nu = rf.n_input
    if m < 1:
        raise ValueError("no reduced dynamics to stabilize (n_x - n_u < 1)")
    ne = rf.e_bar.shape[0]
    r1 = cp.Variable((m, m), symmetric=True)
    rg = cp.Variable((nu, m))
    gamma = cp.Variable()
    t = cp.Variable()
    b12 = r1 @ rf.a11.T - rg.T @ rf.a12.T
    b13 = r1 @ rf.e_bar1.T - rg.T @ rf.e_bar2.T
    block = cp.bmat([
        [-r1, b12, b13],
        [b12.T, -r1 + gamma * (rf.d_bar1 @ rf.d_bar1.T), np.zeros((m, ne))],
        [b13.T, np.zeros((ne, m)), -gamma * np.eye(ne)],
    ])
    n_blk = 2 * m + ne
    constraints = [
        block << -t * np.eye(n_blk),
        r1 << np.eye(m),
        r1 >> 1e-8 * np.eye(m),
        gamma >= 1e-9,
    ]
    problem = cp.Problem(cp.Maximize(t), constraints)
    try:
        problem.solve(solver=cp.CLARABEL)
    except cp.error.SolverError:
        problem.solve(solver=cp.SCS)
    if problem.status not in ("optimal", "optimal_inaccurate") or t.value is None:
        raise LmiInfeasibleError(f"infeasible within iteration budget (status {problem.status})")
    r1_v = np.asarray(r1.value)
    r1_v = 0.5 * (r1_v + r1_v.T)
    rg_v = np.asarray(rg.value)
    gamma_v = float(gamma.value)
    margin = certify(rf, r1_v, rg_v, gamma_v, margin_tol)
    if margin < margin_tol:
        raise LmiInfeasibleError(f"solver point failed certification (margin {margin:.3e})")
    g = rg_v @ np.linalg.inv(r1_v)
    return LmiSolution(r1=r1_v, rg=rg_v, gamma=gamma_v, g=g, certificate=margin)


def certify_gain(rf: RegularForm, gain: SurfaceGain,
                 margin_tol: float = DEFAULT_MARGIN_TOL) -> LmiSolution:
    """Search (R1, gamma) certifying a fixed gain G, with Rg = G R1."""
    import cvxpy as cp

    m = rf.n_red
    ne = rf.e_bar.shape[0]
    g = gain.g
    r1 = cp.Variable((m, m), symmetric=True)
    gamma = cp.Variable()
    t = cp.Variable()
    rg = g @ r1
    b12 = r1 @ rf.a11.T - rg.T @ rf.a12.T
    b13 = r1 @ rf.e_bar1.T - rg.T @ rf.e_bar2.T
    block = cp.bmat([
        [-r1, b12, b13],
        [b12.T, -r1 + gamma * (rf.d_bar1 @ rf.d_bar1.T), np.zeros((m, ne))],
        [b13.T, np.zeros((ne, m)), -gamma * np.eye(ne)],
    ])
    constraints = [
        block << -t * np.eye(2 * m + ne),
        r1 << np.eye(m),
        r1 >> 1e-8 * np.eye(m),
        gamma >= 1e-9,
    ]
    problem = cp.Problem(cp.Maximize(t), constraints)
    try:
        problem.solve(solver=cp.CLARABEL)
    except cp.error.SolverError:
        problem.solve(solver=cp.SCS)
    if problem.status not in ("optimal", "optimal_inaccurate") or t.value is None:
        raise LmiInfeasibleError(f"no certificate for fixed gain (status {problem.status})")
    r1_v = 0.5 * (np.asarray(r1.value) + np.asarray(r1.value).T)
    rg_v = g @ r1_v
    gamma_v = float(gamma.value)
    margin = certify(rf, r1_v, rg_v, gamma_v, margin_tol)
    if margin < margin_tol:
        raise LmiInfeasibleError(f"fixed gain failed certification (margin {margin:.3e})")
    return LmiSolution(r1=r1_v, rg=rg_v, gamma=gamma_v, g=g.copy(), certificate=margin)


@dataclass(frozen=True)
class StabilityReport:
    spectral_radii: np.ndarray
    max_radius: float
    stable: bool


def default_delta_grid(rf: RegularForm, n_points: int = 21, seed: int = 0) -> list[np.ndarray]:
    """Uniform scalar grid on [-1, 1]; random unit-norm matrices when Delta
    is not scalar."""
    nd = rf.d_bar.shape[1]
    ne = rf.e_bar.shape[0]
    if nd == 1 and ne == 1:
        return [np.array([[v]]) for v in np.linspace(-1.0, 1.0, n_points)]
    rng = np.random.default_rng(seed)
    grid = []
    for _ in range(n_points):
        raw = rng.standard_normal((nd, ne))
        grid.append(raw / np.linalg.norm(raw, 2))
    return grid


def verify_quadratic_stability(rf: RegularForm, gain: SurfaceGain,
                               delta_grid: list[np.ndarray]) -> StabilityReport:
    """Spectral radius of the on-surface dynamics over a grid of realizations.

    A_g(Delta) = (A11 + dA11) - (A12 + dA12) G, with x2 = -G x1 on the
    surface (minus-sign convention).
    """
    if len(delta_grid) == 0:
        raise ValueError("delta grid must be nonempty")
    m = rf.n_red
    g = gain.g
    radii = []
    for delta in delta_grid:
        da = rf.delta_a(delta)
        a_g = (rf.a11 + da[:m, :m]) - (rf.a12 + da[:m, m:]) @ g
        radii.append(float(np.abs(np.linalg.eigvals(a_g)).max()) if m else 0.0)
    radii = np.array(radii)
    max_radius = float(radii.max())
    return StabilityReport(spectral_radii=radii, max_radius=max_radius,
                           stable=bool(max_radius < 1.0))
