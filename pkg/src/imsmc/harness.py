"""Closed-loop experiment runner, metrics and CSV export.

One run executes either the static-gain baseline or the co-design loop for a
fixed horizon and produces a complete per-step log; metrics and CSV export
operate on the log only.
"""

import io
from dataclasses import dataclass, replace

import numpy as np

from .config import ExperimentConfig
from .mapping import (
    CoDesignContext,
    CoDesignSolution,
    HistoryBuffer,
    band_policy,
    co_design_solve,
    imsmc_control,
    push,
    qsmb_omega,
    solve_l_frozen,
)
from .plant import to_regular_form, step
from .reaching import (
    CompensatorState,
    ReachingParams,
    robust_smc_control,
    update_compensator,
)
from .surface import SurfaceGain, design_g_lmi


@dataclass
class TrajectoryLog:
    """Complete per-step record of one closed-loop run.

    `g` holds the next-step surface gain row-flattened (n_u x (n_x - n_u),
    column-major to match the solver packing); `omega` the running band
    radius consulted at each step.
    """
    x: np.ndarray
    u: np.ndarray
    s: np.ndarray
    s_norm: np.ndarray
    l: np.ndarray
    g: np.ndarray
    mu0: np.ndarray
    varpi: np.ndarray
    residual_norm: np.ndarray
    in_band: np.ndarray
    clamped: np.ndarray
    fallback: np.ndarray
    omega: np.ndarray
    y: np.ndarray | None = None

    def __len__(self) -> int:
        return self.x.shape[0]


@dataclass(frozen=True)
class Metrics:
    settling_time: int
    band_entry_time: int
    max_band_violation: float
    chattering_index: float
    compensator_increment_bound: float


def resolve_gain(cfg: ExperimentConfig) -> SurfaceGain:
    """The configured static gain, or the LMI design when none is given."""
    if cfg.controller.g_init is not None:
        return SurfaceGain(cfg.controller.g_init)
    rf = to_regular_form(cfg.plant)
    return SurfaceGain(design_g_lmi(rf).g)


def _empty_log(cfg: ExperimentConfig, n_x: int, n_u: int, m: int) -> TrajectoryLog:
    horizon = cfg.simulation.horizon
    n_hist = cfg.controller.n_history
    return TrajectoryLog(
        x=np.zeros((horizon, n_x)),
        u=np.zeros((horizon, n_u)),
        s=np.zeros((horizon, n_u)),
        s_norm=np.zeros(horizon),
        l=np.zeros((horizon, n_hist)),
        g=np.zeros((horizon, n_u * m)),
        mu0=np.zeros(horizon),
        varpi=np.zeros((horizon, n_u)),
        residual_norm=np.zeros(horizon),
        in_band=np.zeros(horizon, dtype=bool),
        clamped=np.zeros(horizon, dtype=bool),
        fallback=np.zeros(horizon, dtype=bool),
        omega=np.zeros(horizon),
        y=np.zeros(horizon) if cfg.simulation.output_map is not None else None,
    )


def run_experiment(cfg: ExperimentConfig) -> TrajectoryLog:
    """Run the configured controller for the full horizon.

    Deterministic for a fixed config; controller failure modes (LM budget
    exhaustion) are recorded as flagged log rows, never raised.
    """
    rf = to_regular_form(cfg.plant)
    n_x, n_u, m = rf.n_state, rf.n_input, rf.n_red
    gain = resolve_gain(cfg)
    log = _empty_log(cfg, n_x, n_u, m)
    if cfg.controller.type == "robust":
        _run_robust(cfg, rf, gain, log)
    else:
        _run_imsmc(cfg, rf, gain, log)
    if cfg.simulation.output_map is not None:
        log.y = log.x @ cfg.simulation.output_map
    return log


def _record(log: TrajectoryLog, k, x, u, s, l, g, mu0, varpi, res, in_band,
            clamped, fallback, omega):
    log.x[k] = x
    log.u[k] = u
    log.s[k] = s
    log.s_norm[k] = np.linalg.norm(s)
    log.l[k] = l
    log.g[k] = np.asarray(g).ravel(order="F")
    log.mu0[k] = mu0
    log.varpi[k] = varpi
    log.residual_norm[k] = res
    log.in_band[k] = in_band
    log.clamped[k] = clamped
    log.fallback[k] = fallback
    log.omega[k] = omega


def _run_robust(cfg: ExperimentConfig, rf, gain: SurfaceGain, log: TrajectoryLog):
    ctl = cfg.controller
    params = ReachingParams(mu0=ctl.mu0_init, xi_t=ctl.xi_t, delta_bar=ctl.delta_bar)
    band = qsmb_omega(ctl.xi_t, ctl.delta_bar, rf.n_input, [ctl.mu0_init])
    comp = CompensatorState(n_u=rf.n_input, mode=ctl.compensator_mode)
    x = np.asarray(cfg.simulation.x0, dtype=float)
    zeros_l = np.zeros(ctl.n_history)
    for k in range(cfg.simulation.horizon):
        s = gain.g_bar @ x
        if k == 0:
            comp = comp.seeded(s)
        u = robust_smc_control(rf, gain, x, comp, params)
        _record(log, k, x, u, s, zeros_l, gain.g, params.mu0, comp.varpi_hat,
                0.0, band_policy(s, band), False, False, band.omega)
        x_next = step(rf, cfg.plant, x, u, k)
        comp = update_compensator(comp, gain.g_bar @ x_next, params)
        x = x_next


def _run_imsmc(cfg: ExperimentConfig, rf, gain: SurfaceGain, log: TrajectoryLog):
    ctl = cfg.controller
    n_u, m = rf.n_input, rf.n_red
    buf = HistoryBuffer.zeros(ctl.n_history, rf.n_state, n_u)
    comp = CompensatorState(n_u=n_u, mode=ctl.compensator_mode)
    g_cur = np.atleast_2d(gain.g)
    sol_prev = CoDesignSolution(l=np.zeros(ctl.n_history), g_next=g_cur,
                                mu0=ctl.mu0_init, residual_norm=0.0,
                                clamped=False, iterations=0)
    mu0_history = [ctl.mu0_init]
    x = np.asarray(cfg.simulation.x0, dtype=float)
    for k in range(cfg.simulation.horizon):
        s = np.hstack([g_cur, np.eye(n_u)]) @ x
        if k == 0:
            comp = comp.seeded(s)
        ctx = CoDesignContext(rf=rf, buffer=buf, x=x, s_now=s,
                              varpi_hat=comp.varpi_hat, xi_t=ctl.xi_t)
        band = qsmb_omega(ctl.xi_t, ctl.delta_bar, n_u, mu0_history)
        in_band = band_policy(s, band)
        if in_band:
            l = solve_l_frozen(ctx, sol_prev.g_next, sol_prev.mu0)
            sol = replace(sol_prev, l=l, residual_norm=0.0, clamped=False,
                          iterations=0, fallback=False, frozen=True)
        else:
            sol = co_design_solve(ctx, ctl.lm)
            if sol.fallback:
                # budget exhausted: reuse the previous gain and refresh L only
                l = solve_l_frozen(ctx, sol_prev.g_next, sol_prev.mu0)
                sol = replace(sol_prev, l=l, residual_norm=sol.residual_norm,
                              clamped=False, iterations=sol.iterations,
                              fallback=True, frozen=True)
        u, _residuals = imsmc_control(ctx, sol)
        _record(log, k, x, u, s, sol.l, sol.g_next, sol.mu0, comp.varpi_hat,
                sol.residual_norm, in_band, sol.clamped, sol.fallback, band.omega)
        x_next = step(rf, cfg.plant, x, u, k)
        s_next = np.hstack([sol.g_next, np.eye(n_u)]) @ x_next
        comp = update_compensator(
            comp, s_next,
            ReachingParams(mu0=sol.mu0, xi_t=ctl.xi_t, delta_bar=ctl.delta_bar))
        buf = push(buf, x_next, u)
        g_cur = sol.g_next
        sol_prev = sol
        mu0_history.append(sol.mu0)
        x = x_next


def compute_metrics(log: TrajectoryLog, cfg: ExperimentConfig,
                    eps_settle: float | None = None, hold: int = 20) -> Metrics:
    """Summary metrics from one log; settling sentinel is horizon + 1."""
    if len(log) == 0:
        raise ValueError("empty trajectory log")
    horizon = len(log)
    if eps_settle is None:
        eps_settle = 0.02 * float(np.abs(cfg.simulation.x0).max())
    inf_norms = np.abs(log.x).max(axis=1)
    settling = horizon + 1
    for k0 in range(horizon):
        if np.all(inf_norms[k0: min(k0 + hold + 1, horizon)] <= eps_settle):
            settling = k0
            break
    omega = float(log.omega.max())
    inside = log.s_norm <= omega
    entry = int(np.argmax(inside)) if inside.any() else horizon + 1
    if inside.any() and entry < horizon:
        violation = float(np.maximum(log.s_norm[entry:] - omega, 0.0).max())
    else:
        violation = 0.0
    chattering = float(np.abs(np.diff(log.u, axis=0)).sum())
    increments = np.linalg.norm(np.diff(log.varpi, axis=0), axis=1)
    delta_hat = float(increments.max()) if increments.size else 0.0
    return Metrics(settling_time=settling, band_entry_time=entry,
                   max_band_violation=violation, chattering_index=chattering,
                   compensator_increment_bound=delta_hat)


def _columns(log: TrajectoryLog) -> list[tuple[str, np.ndarray, bool]]:
    cols: list[tuple[str, np.ndarray, bool]] = []

    def vec(name, arr):
        for i in range(arr.shape[1]):
            cols.append((f"{name}_{i}", arr[:, i], False))

    vec("x", log.x)
    vec("u", log.u)
    vec("s", log.s)
    cols.append(("s_norm", log.s_norm, False))
    vec("l", log.l)
    vec("g", log.g)
    cols.append(("mu0", log.mu0, False))
    vec("varpi", log.varpi)
    cols.append(("residual_norm", log.residual_norm, False))
    cols.append(("in_band", log.in_band, True))
    cols.append(("clamped", log.clamped, True))
    cols.append(("fallback", log.fallback, True))
    cols.append(("omega", log.omega, False))
    if log.y is not None:
        cols.append(("y", log.y, False))
    return cols


def format_csv(log: TrajectoryLog) -> str:
    """UTF-8/LF CSV, one row per step, 17 significant digits."""
    cols = _columns(log)
    out = io.StringIO()
    out.write("k," + ",".join(name for name, _, _ in cols) + "\n")
    for k in range(len(log)):
        cells = [str(k)]
        for _, arr, is_flag in cols:
            cells.append(str(int(arr[k])) if is_flag else format(float(arr[k]), ".17g"))
        out.write(",".join(cells) + "\n")
    return out.getvalue()


def export_csv(log: TrajectoryLog, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(format_csv(log))


def load_csv(path) -> TrajectoryLog:
    """Re-parse an exported log; inverse of export_csv at 17-digit precision."""
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().strip().split(",")
        rows = [line.strip().split(",") for line in fh if line.strip()]
    data = {name: np.array([float(row[i]) for row in rows])
            for i, name in enumerate(header)}

    def gather(prefix):
        idx = 0
        out = []
        while f"{prefix}_{idx}" in data:
            out.append(data[f"{prefix}_{idx}"])
            idx += 1
        if not out:
            return np.zeros((len(rows), 0))
        return np.column_stack(out)

    return TrajectoryLog(
        x=gather("x"), u=gather("u"), s=gather("s"), s_norm=data["s_norm"],
        l=gather("l"), g=gather("g"), mu0=data["mu0"], varpi=gather("varpi"),
        residual_norm=data["residual_norm"],
        in_band=data["in_band"].astype(bool),
        clamped=data["clamped"].astype(bool),
        fallback=data["fallback"].astype(bool),
        omega=data["omega"],
        y=data.get("y"),
    )
