"""Disturbance-compensated reaching law and the static-gain SMC baseline.

The compensator keeps a running estimate of the lumped uncertainty term in
the sliding-variable recursion by accumulating the measured deviation between
the realized and the ideal reaching step; it is shared by the baseline and
the co-design controller.
"""

from dataclasses import dataclass, field, replace

import numpy as np

from .plant import RegularForm
from .surface import SurfaceGain

ONE_STEP = "one_step"
LITERAL_SUM = "literal_sum"
OFF = "off"
COMPENSATOR_MODES = (ONE_STEP, LITERAL_SUM, OFF)


@dataclass(frozen=True)
class ReachingParams:
    mu0: float          # lumped converging parameter, in (0, 1)
    xi_t: float         # lumped switching gain
    delta_bar: float    # assumed bound on the compensator increment

    def __post_init__(self):
        if not 0.0 < self.mu0 < 1.0:
            raise ValueError("mu0 must lie in (0, 1)")
        if self.xi_t <= 0.0:
            raise ValueError("xi_t must be positive")
        if self.delta_bar < 0.0:
            raise ValueError("delta_bar must be non-negative")


def sgn(v: np.ndarray) -> np.ndarray:
    """Componentwise sign with sgn(0) = -1 (including signed zero)."""
    return np.where(np.asarray(v, dtype=float) > 0.0, 1.0, -1.0)


@dataclass(frozen=True)
class CompensatorState:
    """Running disturbance estimate along one trajectory.

    `varpi_hat` stays zero until two sliding values have been observed; in
    one_step mode it then accumulates the per-step deviation between realized
    and ideal reaching increments, and in literal_sum mode it is recomputed
    each step from the full logged history of s.
    """
    n_u: int
    mode: str = ONE_STEP
    varpi_hat: np.ndarray = None
    s_prev: np.ndarray = None
    mu0_prev: float = None
    updates: int = 0
    s_log: tuple = field(default_factory=tuple)

    def __post_init__(self):
        if self.mode not in COMPENSATOR_MODES:
            raise ValueError(f"unknown compensator mode {self.mode!r}")
        if self.varpi_hat is None:
            object.__setattr__(self, "varpi_hat", np.zeros(self.n_u))

    def seeded(self, s0: np.ndarray) -> "CompensatorState":
        """Record the initial sliding value before the first update."""
        return replace(self, s_prev=np.asarray(s0, dtype=float), s_log=(np.asarray(s0, dtype=float),))


def _literal_sum(s_log: tuple, mu0: float, xi_t: float) -> np.ndarray:
    """The history summation form of the compensator, taken verbatim:
    sum_{i=2..k} { s(i) - [(1 - mu0) s(k-i) - xi_t sgn s(k)] } over the
    logged values s(0..k)."""
    k = len(s_log) - 1
    out = np.zeros_like(s_log[0])
    sk_sign = sgn(s_log[k])
    for i in range(2, k + 1):
        out = out + s_log[i] - ((1.0 - mu0) * s_log[k - i] - xi_t * sk_sign)
    return out


def update_compensator(c: CompensatorState, s_now: np.ndarray,
                       params: ReachingParams) -> CompensatorState:
    """Advance the compensator after measuring the next sliding value.

    `params.mu0` must be the converging parameter actually used at the step
    that produced s_now. The estimate stays zero until the second update.
    """
    if c.s_prev is None:
        raise ValueError("compensator not seeded with the initial sliding value")
    if c.mode == OFF:
        return replace(c, s_prev=np.asarray(s_now, dtype=float),
                       mu0_prev=params.mu0, updates=c.updates + 1)
    s_now = np.asarray(s_now, dtype=float)
    s_log = c.s_log + (s_now,)
    if c.updates < 1:
        # sums start two steps in: keep the zero estimate
        return replace(c, s_prev=s_now, mu0_prev=params.mu0,
                       updates=c.updates + 1, s_log=s_log)
    increment = s_now - (1.0 - params.mu0) * c.s_prev + params.xi_t * sgn(c.s_prev)
    if c.mode == ONE_STEP:
        varpi = c.varpi_hat + increment
    else:
        varpi = _literal_sum(s_log, params.mu0, params.xi_t)
    return replace(c, varpi_hat=varpi, s_prev=s_now, mu0_prev=params.mu0,
                   updates=c.updates + 1, s_log=s_log)


def robust_smc_control(rf: RegularForm, gain: SurfaceGain, x: np.ndarray,
                       c: CompensatorState, params: ReachingParams) -> np.ndarray:
    """Static-gain SMC law with disturbance compensation.

    u(k) = -(G_bar B)^-1 [mu0 s + xi_t sgn s + G_bar A x - s + varpi_hat].
    """
    x = np.asarray(x, dtype=float)
    g_bar = gain.g_bar
    s = g_bar @ x
    gb = g_bar @ rf.b
    bracket = params.mu0 * s + params.xi_t * sgn(s) + g_bar @ rf.a @ x - s + c.varpi_hat
    return -np.linalg.solve(gb, bracket)
