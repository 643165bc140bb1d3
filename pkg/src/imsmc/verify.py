"""Runtime invariant suite behind the `verify` CLI subcommand.

Each check returns a (name, passed, detail) record. Checks that are
conditional on a realized bound (the logged compensator increment versus the
switching gain) report the condition status in their detail string.
"""

from dataclasses import dataclass, replace

import numpy as np

from .config import ExperimentConfig
from .harness import compute_metrics, run_experiment
from .mapping import (
    CoDesignContext,
    HistoryBuffer,
    objective_j,
    pack_omega,
    phi_bar_of,
    stationarity_residual,
)
from .nlsolve import LmOptions, levenberg_marquardt
from .plant import DisturbanceSchedule, Plant, step, to_regular_form
from .reaching import CompensatorState, ReachingParams, update_compensator
from .surface import SurfaceGain


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    detail: str


def _no_disturbance(cfg: ExperimentConfig) -> ExperimentConfig:
    plant = Plant(a_tilde=cfg.plant.a_tilde, b_tilde=cfg.plant.b_tilde,
                  d=cfg.plant.d, e=cfg.plant.e, delta=cfg.plant.delta,
                  disturbance=DisturbanceSchedule())
    return ExperimentConfig(plant=plant, controller=cfg.controller,
                            simulation=cfg.simulation)


def _nominal(cfg: ExperimentConfig) -> ExperimentConfig:
    cfg = _no_disturbance(cfg)
    plant = Plant(a_tilde=cfg.plant.a_tilde, b_tilde=cfg.plant.b_tilde,
                  d=cfg.plant.d, e=cfg.plant.e,
                  delta=np.zeros_like(cfg.plant.delta),
                  disturbance=DisturbanceSchedule())
    return ExperimentConfig(plant=plant, controller=cfg.controller,
                            simulation=cfg.simulation)


def check_plant_linearity(cfg: ExperimentConfig, seed: int = 0) -> CheckResult:
    rf = to_regular_form(cfg.plant)
    plant = _no_disturbance(cfg).plant
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(20):
        x1 = rng.standard_normal(rf.n_state)
        x2 = rng.standard_normal(rf.n_state)
        u1 = rng.standard_normal(rf.n_input)
        u2 = rng.standard_normal(rf.n_input)
        a, b = rng.standard_normal(2)
        lhs = step(rf, plant, a * x1 + b * x2, a * u1 + b * u2, 0)
        rhs = a * step(rf, plant, x1, u1, 0) + b * step(rf, plant, x2, u2, 0)
        worst = max(worst, float(np.abs(lhs - rhs).max()))
    return CheckResult("plant superposition", worst < 1e-10, f"max error {worst:.2e}")


def check_regular_form(cfg: ExperimentConfig) -> CheckResult:
    rf = to_regular_form(cfg.plant)
    zero_block = float(np.abs(rf.b[: rf.n_red, :]).max()) if rf.n_red else 0.0
    round_trip = float(np.abs(np.linalg.inv(rf.t_c) @ rf.t_c - np.eye(rf.n_state)).max())
    ok = zero_block == 0.0 and round_trip < 1e-12
    return CheckResult("regular form structure",
                       ok, f"zero block {zero_block:.1e}, T_c round trip {round_trip:.2e}")


def check_nominal_reaching(cfg: ExperimentConfig, steps: int = 100) -> CheckResult:
    """s(k+1) = (1 - mu0) s(k) - xi_t sgn s(k) under the robust law with
    Delta = 0, f = 0 and the compensator off."""
    from .reaching import robust_smc_control, sgn

    cfg = _nominal(cfg)
    rf = to_regular_form(cfg.plant)
    gain = SurfaceGain(cfg.controller.g_init) if cfg.controller.g_init is not None \
        else SurfaceGain(np.zeros((rf.n_input, rf.n_red)))
    params = ReachingParams(cfg.controller.mu0_init, cfg.controller.xi_t,
                            cfg.controller.delta_bar)
    comp = CompensatorState(n_u=rf.n_input, mode="off").seeded(
        gain.g_bar @ cfg.simulation.x0)
    x = np.asarray(cfg.simulation.x0, dtype=float)
    worst = 0.0
    for k in range(steps):
        s = gain.g_bar @ x
        u = robust_smc_control(rf, gain, x, comp, params)
        x = step(rf, cfg.plant, x, u, k)
        s_next = gain.g_bar @ x
        ideal = (1.0 - params.mu0) * s - params.xi_t * sgn(s)
        worst = max(worst, float(np.abs(s_next - ideal).max()))
    return CheckResult("nominal reaching identity", worst < 1e-10, f"max error {worst:.2e}")


def check_compensator_equivalence(cfg: ExperimentConfig) -> CheckResult:
    """one_step and literal_sum agree on sequences with constant s; for
    general trajectories the two forms differ and only this restricted case
    is assertable."""
    n_u = cfg.plant.n_input
    params = ReachingParams(0.3, cfg.controller.xi_t, cfg.controller.delta_bar)
    s_const = np.full(n_u, 0.7)
    one = CompensatorState(n_u=n_u, mode="one_step").seeded(s_const)
    lit = CompensatorState(n_u=n_u, mode="literal_sum").seeded(s_const)
    worst = 0.0
    for _ in range(6):
        one = update_compensator(one, s_const, params)
        lit = update_compensator(lit, s_const, params)
        worst = max(worst, float(np.abs(one.varpi_hat - lit.varpi_hat).max()))
    return CheckResult("compensator mode equivalence (constant s)",
                       worst < 1e-12, f"max divergence {worst:.2e}")


def _random_context(cfg: ExperimentConfig, rng) -> tuple[CoDesignContext, np.ndarray]:
    rf = to_regular_form(cfg.plant)
    n = cfg.controller.n_history
    buf = HistoryBuffer(n=n, states=rng.standard_normal((rf.n_state, n + 1)),
                        inputs=rng.standard_normal((rf.n_input, n)))
    ctx = CoDesignContext(rf=rf, buffer=buf, x=buf.states[:, 0],
                          s_now=rng.standard_normal(rf.n_input),
                          varpi_hat=0.1 * rng.standard_normal(rf.n_input),
                          xi_t=cfg.controller.xi_t)
    omega = np.concatenate([rng.standard_normal(n),
                            rng.standard_normal(rf.n_input * rf.n_red),
                            [rng.uniform(0.05, 0.95)]])
    return ctx, omega


def check_gradient_blocks(cfg: ExperimentConfig, n_points: int = 100,
                          seed: int = 0) -> tuple[CheckResult, list[float]]:
    """Blocks (i)/(iii) of the stationarity system against central finite
    differences of the objective; the G block's discrepancy is returned for
    logging, not asserted. (With the regular-form input matrix the projector
    B (G_bar B)^-1 does not depend on G, which makes the G block coincide
    with the exact gradient; the log documents that.)"""
    rng = np.random.default_rng(seed)
    worst = 0.0
    g_block_discrepancies = []
    for _ in range(n_points):
        ctx, omega = _random_context(cfg, rng)
        n = ctx.n
        rf = ctx.rf
        analytic = stationarity_residual(omega, ctx)

        def j_of(om):
            l = om[:n]
            g = om[n:-1].reshape(rf.n_input, rf.n_red, order="F")
            return objective_j(l, g, om[-1], ctx)

        fd = np.empty_like(omega)
        for i in range(omega.size):
            h = 1e-6 * max(1.0, abs(omega[i]))
            op = omega.copy()
            op[i] += h
            om_ = omega.copy()
            om_[i] -= h
            fd[i] = (j_of(op) - j_of(om_)) / (2.0 * h)
        idx_l = np.arange(n)
        idx_mu = np.array([omega.size - 1])
        idx_g = np.arange(n, omega.size - 1)
        for idx in (idx_l, idx_mu):
            num = float(np.abs(analytic[idx] - fd[idx]).max())
            den = max(1.0, float(np.abs(fd[idx]).max()))
            worst = max(worst, num / den)
        if idx_g.size:
            num = float(np.abs(analytic[idx_g] - fd[idx_g]).max())
            den = max(1.0, float(np.abs(fd[idx_g]).max()))
            g_block_discrepancies.append(num / den)
    result = CheckResult("stationarity blocks (i)/(iii) vs finite differences",
                         worst < 1e-6, f"max relative error {worst:.2e} over {n_points} points")
    return result, g_block_discrepancies


def check_decomposition_and_prediction(cfg: ExperimentConfig) -> list[CheckResult]:
    """Reconstruction x(k) = X(k-1) L + delta_x (exact) and the one-step
    prediction identity for steps with a fully populated, disturbance-free
    window."""
    cfg = _no_disturbance(cfg)
    rf = to_regular_form(cfg.plant)
    n = cfg.controller.n_history
    log = run_experiment(cfg)
    da = rf.delta_a(cfg.plant.delta)
    worst_dec = 0.0
    worst_pred = 0.0
    horizon = len(log)
    for k in range(n + 1, horizon - 1):
        x_hist = log.x[k - 1: k - 1 - n: -1].T if k - 1 - n >= 0 else None
        if x_hist is None or x_hist.shape[1] != n:
            continue
        x_next_mat = log.x[k: k - n: -1].T
        u_hist = log.u[k - 1: k - 1 - n: -1].T
        l = log.l[k]
        delta_x = log.x[k] - x_hist @ l
        worst_dec = max(worst_dec, float(np.abs(log.x[k] - (x_hist @ l + delta_x)).max()))
        delta_u = log.u[k] - u_hist @ l
        pred = x_next_mat @ l + (rf.a + da) @ delta_x + rf.b @ delta_u
        worst_pred = max(worst_pred, float(np.abs(log.x[k + 1] - pred).max()))
    return [
        CheckResult("decomposition identity", worst_dec < 1e-12, f"max error {worst_dec:.2e}"),
        CheckResult("prediction identity", worst_pred < 1e-9, f"max error {worst_pred:.2e}"),
    ]


def check_band_and_lyapunov(cfg: ExperimentConfig) -> list[CheckResult]:
    cfg = _no_disturbance(cfg)
    ctl = cfg.controller
    log = run_experiment(cfg)
    metrics = compute_metrics(log, cfg)
    n_u = cfg.plant.n_input
    bound = np.sqrt(n_u) * ctl.xi_t
    delta_hat = metrics.compensator_increment_bound
    condition = delta_hat < bound
    cond_note = (f"delta_hat {delta_hat:.3e} {'<' if condition else '>='} "
                 f"sqrt(n_u)*xi_t {bound:.3e}")
    omega = float(log.omega.max())
    inside = log.s_norm <= omega
    results = []
    if inside.any():
        entry = int(np.argmax(inside))
        violation = float(np.maximum(log.s_norm[entry:] - omega, 0.0).max())
        band_holds = violation <= 1e-6
    else:
        band_holds = False
        violation = float("inf")
    results.append(CheckResult(
        "band invariance after entry",
        band_holds or not condition,
        f"max violation {violation:.2e}; {cond_note}"
        + ("" if condition else " (guarantee void, reported only)")))
    # Lyapunov decrement at out-of-band steps with ||s|| > phi_bar
    worst_dv = -np.inf
    checked = 0
    for k in range(len(log) - 1):
        phi = phi_bar_of(ctl.xi_t, ctl.delta_bar, n_u, log.mu0[k])
        if log.s_norm[k] > max(phi, omega):
            dv = 0.5 * (log.s_norm[k + 1] ** 2 - log.s_norm[k] ** 2)
            worst_dv = max(worst_dv, dv)
            checked += 1
    lyap_ok = (checked == 0) or worst_dv < 0.0 or not condition
    results.append(CheckResult(
        "Lyapunov decrement out of band",
        lyap_ok,
        f"{checked} steps checked, max dV {worst_dv:.3e}; {cond_note}"))
    return results


def check_clamp_invariant(cfg: ExperimentConfig) -> CheckResult:
    log = run_experiment(cfg)
    ok = bool(np.all((log.mu0 >= 0.01 - 1e-15) & (log.mu0 <= 0.99 + 1e-15)))
    return CheckResult("mu0 clamp invariant",
                       ok, f"range [{log.mu0.min():.4f}, {log.mu0.max():.4f}]")


def check_lm_properties(seed: int = 0) -> list[CheckResult]:
    rng = np.random.default_rng(seed)
    a = rng.standard_normal((4, 3))
    b = rng.standard_normal(4)

    def res(x):
        return a @ x - b

    r1 = levenberg_marquardt(res, np.zeros(3))
    r2 = levenberg_marquardt(res, np.zeros(3))
    deterministic = bool(np.array_equal(r1.x, r2.x))
    r10 = levenberg_marquardt(lambda x: 10.0 * res(x), np.zeros(3),
                              LmOptions(tol_residual=1e-9))
    scale_ok = float(np.abs(r1.x - r10.x).max()) < 1e-6
    # accepted-step monotonicity is structural; re-check via a nonconvex case
    def circle(x):
        return np.array([x[0] ** 2 + x[1] ** 2 - 1.0, x[0] - x[1]])

    rc = levenberg_marquardt(circle, np.array([1.0, 0.0]))
    return [
        CheckResult("LM determinism", deterministic, "identical solutions on repeat"),
        CheckResult("LM scale sanity", scale_ok,
                    f"solution shift {float(np.abs(r1.x - r10.x).max()):.2e}"),
        CheckResult("LM convergence", rc.converged and rc.residual_norm < 1e-8,
                    f"residual {rc.residual_norm:.2e}"),
    ]


def run_verification(cfg: ExperimentConfig) -> tuple[list[CheckResult], list[float]]:
    """All invariant checks for one configuration, plus the logged G-block
    finite-difference discrepancies."""
    results = [
        check_plant_linearity(cfg),
        check_regular_form(cfg),
        check_nominal_reaching(cfg),
        check_compensator_equivalence(cfg),
    ]
    grad, g_log = check_gradient_blocks(cfg)
    results.append(grad)
    results.extend(check_decomposition_and_prediction(cfg))
    results.extend(check_band_and_lyapunov(cfg))
    results.append(check_clamp_invariant(cfg))
    results.extend(check_lm_properties())
    return results, g_log
