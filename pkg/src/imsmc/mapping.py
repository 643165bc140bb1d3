"""Input-mapping history buffer, co-design objective and the online SMC law.

The current state is expressed as a linear combination L of the last N
states plus a residual; the surface gain for the next step, the converging
parameter and L are then chosen together by driving the stationarity system
of the one-step-ahead objective to zero with Levenberg-Marquardt.
"""

from dataclasses import dataclass, replace

import numpy as np

from .nlsolve import LmOptions, levenberg_marquardt
from .plant import RegularForm
from .reaching import sgn


class BandUndefinedError(ValueError):
    """The band formulas require sqrt(n_u) * xi_t > delta_bar."""


@dataclass(frozen=True)
class HistoryBuffer:
    """Sliding window of the last N+1 states and N inputs.

    `states[:, 0]` is the newest entry; `x_next` is the window ending at the
    current state and `x_hist` the one-step-older window used for the
    decomposition of x(k).
    """
    n: int
    states: np.ndarray  # n_x x (N+1)
    inputs: np.ndarray  # n_u x N

    @classmethod
    def zeros(cls, n: int, n_x: int, n_u: int) -> "HistoryBuffer":
        return cls(n=n, states=np.zeros((n_x, n + 1)), inputs=np.zeros((n_u, n)))

    @property
    def x_next(self) -> np.ndarray:
        """X(k) = [x(k) ... x(k-N+1)]."""
        return self.states[:, : self.n]

    @property
    def x_hist(self) -> np.ndarray:
        """X(k-1) = [x(k-1) ... x(k-N)]."""
        return self.states[:, 1:]

    @property
    def u_hist(self) -> np.ndarray:
        """U(k-1) = [u(k-1) ... u(k-N)]."""
        return self.inputs

    def x1_next(self, n_red: int) -> np.ndarray:
        return self.states[:n_red, : self.n]


def push(h: HistoryBuffer, x_new: np.ndarray, u_applied: np.ndarray) -> HistoryBuffer:
    """Prepend the newest state/input column, dropping the oldest."""
    x_new = np.asarray(x_new, dtype=float).reshape(-1, 1)
    u_applied = np.asarray(u_applied, dtype=float).reshape(-1, 1)
    return replace(
        h,
        states=np.hstack([x_new, h.states[:, : h.n]]),
        inputs=np.hstack([u_applied, h.inputs[:, : h.n - 1]]),
    )


@dataclass(frozen=True)
class CoDesignContext:
    """Everything the stationarity system needs at one control step.

    `x` is the measured current state; it is carried separately because the
    zero-initialized history buffer does not contain it during warm-up.
    """
    rf: RegularForm
    buffer: HistoryBuffer
    x: np.ndarray
    s_now: np.ndarray
    varpi_hat: np.ndarray
    xi_t: float

    @property
    def n(self) -> int:
        return self.buffer.n

    @property
    def n_unknowns(self) -> int:
        rf = self.rf
        return self.n + rf.n_input * rf.n_red + 1


@dataclass(frozen=True)
class CoDesignSolution:
    l: np.ndarray
    g_next: np.ndarray
    mu0: float
    residual_norm: float
    clamped: bool
    iterations: int
    fallback: bool = False
    frozen: bool = False


@dataclass(frozen=True)
class QsmbBand:
    omega: float
    eta: float
    phi_bar: float
    delta_bar: float


@dataclass(frozen=True)
class ResidualPair:
    delta_x: np.ndarray
    delta_u: np.ndarray


def pack_omega(l: np.ndarray, g: np.ndarray, mu0: float) -> np.ndarray:
    """col(L, columns of G, mu0)."""
    return np.concatenate([np.asarray(l, dtype=float),
                           np.asarray(g, dtype=float).ravel(order="F"),
                           [float(mu0)]])


def unpack_omega(omega: np.ndarray, ctx: CoDesignContext) -> tuple[np.ndarray, np.ndarray, float]:
    n = ctx.n
    rf = ctx.rf
    l = omega[:n]
    g = omega[n: n + rf.n_input * rf.n_red].reshape(rf.n_input, rf.n_red, order="F")
    return l, g, float(omega[-1])


def _pieces(ctx: CoDesignContext, g: np.ndarray, mu0: float):
    """Shared factors: projector P = B (G_bar B)^-1, W, and the bracket c."""
    rf = ctx.rf
    g_bar = np.hstack([g, np.eye(rf.n_input)])
    p = rf.b @ np.linalg.inv(g_bar @ rf.b)
    xk = ctx.buffer.x_next
    w = xk - p @ g_bar @ xk
    s = ctx.s_now
    c = mu0 * s + ctx.xi_t * sgn(s) - s + ctx.varpi_hat
    return g_bar, p, w, c


def objective_j(l: np.ndarray, g_next: np.ndarray, mu0: float,
                ctx: CoDesignContext) -> float:
    """Squared norm of the predicted next state under the candidate law."""
    _, p, w, c = _pieces(ctx, np.atleast_2d(g_next), mu0)
    r = w @ np.asarray(l, dtype=float) - p @ c
    return float(r @ r)


def stationarity_residual(omega: np.ndarray, ctx: CoDesignContext) -> np.ndarray:
    """The three stationarity blocks, stacked.

    Blocks: (i) d/dL, length N; (ii) the G block, built from the x1 rows of
    the history only (with the regular-form input matrix this coincides with
    the exact gradient of the objective); (iii) d/dmu0, scalar. Total length
    N + n_u*(n_x-n_u) + 1.
    """
    l, g, mu0 = unpack_omega(np.asarray(omega, dtype=float), ctx)
    _, p, w, c = _pieces(ctx, g, mu0)
    r = w @ l - p @ c
    block_l = 2.0 * w.T @ r
    x1 = ctx.buffer.x1_next(ctx.rf.n_red)
    x1l = x1 @ l  # (n_x - n_u,)
    block_g = (2.0 * np.outer(x1l, x1l) @ g.T
               + 2.0 * np.outer(x1l, c)).ravel(order="F")
    block_mu = np.atleast_1d(2.0 * (-p @ ctx.s_now) @ r)
    return np.concatenate([block_l, block_g, block_mu])


MU0_LO, MU0_HI = 0.01, 0.99


def solve_l_frozen(ctx: CoDesignContext, g: np.ndarray, mu0: float) -> np.ndarray:
    """Minimum-norm L solving the first stationarity block with (G, mu0)
    fixed; this is an ordinary linear least-squares problem."""
    _, p, w, c = _pieces(ctx, np.atleast_2d(g), mu0)
    return np.linalg.lstsq(w, p @ c, rcond=None)[0]


def _solve_lg(ctx: CoDesignContext, mu0: float, opts: LmOptions):
    """Re-solve blocks (i)-(ii) for (L, G) with mu0 held fixed."""
    rf = ctx.rf
    n_lg = ctx.n + rf.n_input * rf.n_red

    def reduced(v):
        full = np.concatenate([v, [mu0]])
        return stationarity_residual(full, ctx)[:n_lg]

    return levenberg_marquardt(reduced, np.zeros(n_lg), opts)


def co_design_solve(ctx: CoDesignContext, opts: LmOptions = LmOptions()) -> CoDesignSolution:
    """Solve the stationarity system from the zero initial iterate.

    A converging parameter landing outside [0.01, 0.99] is clamped to the
    nearest bound and (L, G) are re-solved from the first two blocks with
    the clamped value held fixed.
    """
    result = levenberg_marquardt(lambda om: stationarity_residual(om, ctx),
                                 np.zeros(ctx.n_unknowns), opts)
    l, g, mu0 = unpack_omega(result.x, ctx)
    clamped = False
    residual_norm = result.residual_norm
    iterations = result.iterations
    if not MU0_LO <= mu0 <= MU0_HI:
        mu0 = MU0_HI if mu0 > MU0_HI else MU0_LO
        clamped = True
        reduced = _solve_lg(ctx, mu0, opts)
        l = reduced.x[: ctx.n]
        g = reduced.x[ctx.n:].reshape(ctx.rf.n_input, ctx.rf.n_red, order="F")
        residual_norm = reduced.residual_norm
        iterations += reduced.iterations
        converged = reduced.converged
    else:
        converged = result.converged
    return CoDesignSolution(l=l, g_next=g, mu0=mu0, residual_norm=residual_norm,
                            clamped=clamped, iterations=iterations,
                            fallback=not converged)


def qsmb_omega(xi_t: float, delta_bar: float, n_u: int,
               mu0_history) -> QsmbBand:
    """Band radius: the supremum of sqrt(phi_bar^2 + 2 eta phi_bar) over the
    recorded converging parameters."""
    snu = np.sqrt(n_u)
    if snu * xi_t <= delta_bar:
        raise BandUndefinedError(
            f"band undefined: sqrt(n_u)*xi_t = {snu * xi_t:.3g} <= delta_bar = {delta_bar:.3g}")
    best = None
    for mu0 in mu0_history:
        eta = (1.0 - mu0) * (snu * xi_t - delta_bar)
        phi_bar = (snu * xi_t + delta_bar) ** 2 / (2.0 * (1.0 - mu0) * (snu * xi_t - delta_bar))
        omega = float(np.sqrt(phi_bar ** 2 + 2.0 * eta * phi_bar))
        if best is None or omega > best.omega:
            best = QsmbBand(omega=omega, eta=eta, phi_bar=phi_bar, delta_bar=delta_bar)
    if best is None:
        raise ValueError("mu0 history must be nonempty")
    return best


def phi_bar_of(xi_t: float, delta_bar: float, n_u: int, mu0: float) -> float:
    snu = np.sqrt(n_u)
    return (snu * xi_t + delta_bar) ** 2 / (2.0 * (1.0 - mu0) * (snu * xi_t - delta_bar))


def band_policy(s_now: np.ndarray, band: QsmbBand) -> bool:
    """True when the surface value is inside the band, i.e. the co-design
    should freeze (G, mu0) and only refresh L."""
    return bool(np.linalg.norm(s_now) <= band.omega)


def imsmc_control(ctx: CoDesignContext, sol: CoDesignSolution) -> tuple[np.ndarray, ResidualPair]:
    """The input-mapping control law for one step.

    delta_x = x(k) - X(k-1) L; the input correction delta_u cancels the
    predictable part of the sliding recursion under the next-step gain; the
    applied input is U(k-1) L + delta_u.
    """
    rf = ctx.rf
    g_bar = np.hstack([sol.g_next, np.eye(rf.n_input)])
    buf = ctx.buffer
    delta_x = np.asarray(ctx.x, dtype=float) - buf.x_hist @ sol.l
    s = ctx.s_now
    bracket = (sol.mu0 * s + ctx.xi_t * sgn(s) - s
               + g_bar @ buf.x_next @ sol.l
               + g_bar @ rf.a @ delta_x
               + ctx.varpi_hat)
    delta_u = -np.linalg.solve(g_bar @ rf.b, bracket)
    u = buf.u_hist @ sol.l + delta_u
    return u, ResidualPair(delta_x=delta_x, delta_u=delta_u)
