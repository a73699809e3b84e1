"""Induced-gain computation and Monte Carlo simulation.

For a fixed parameter choice the L1 and Linf gains of the switching network
are characterized by small linear programs over positive certificate vectors
(one per mode).  A single-mode system also has the classic static-gain
formula ``Gout (-A)^-1 Gin`` which serves as an independent oracle, and a
trajectory simulator provides a statistical cross-check for the switching
case.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .netmodel import BufferNetwork, MarkovChain, ModeSystem, TuningParams, assemble_system
from .simplex import LpInfeasible, solve_lp

__all__ = [
    "Unstable",
    "MultiMode",
    "Singular",
    "InvalidHorizon",
    "ZeroInput",
    "LpInfeasible",
    "StabilityReport",
    "GainReport",
    "EmpiricalGain",
    "TrajectoryBatch",
    "PiecewiseConstantInput",
    "lifted_matrix",
    "stability_check",
    "l1_gain",
    "linf_gain",
    "resolvent_gain",
    "sample_mode_path",
    "simulate_mjls",
    "empirical_gain",
    "export_trajectory_csv",
]

STRICTNESS_BASE = 1e-9
CERT_FLOOR = 1e-12


class Unstable(RuntimeError):
    """The lifted first-moment system is not exponentially mean stable."""


class MultiMode(RuntimeError):
    """Resolvent formula only applies to single-mode networks."""


class Singular(RuntimeError):
    pass


class InvalidHorizon(ValueError):
    pass


class ZeroInput(ValueError):
    pass


@dataclass(frozen=True)
class StabilityReport:
    stable: bool
    abscissa: float
    certificates: tuple[np.ndarray, ...] | None

    def __bool__(self) -> bool:
        return self.stable


@dataclass(frozen=True)
class GainReport:
    gamma: float
    certificates: tuple[np.ndarray, ...]
    method: str
    norm: str
    residuals: dict[str, float]


@dataclass(frozen=True)
class EmpiricalGain:
    value: float
    half_width: float
    norm: str
    method: str = "monte-carlo"


def _mode_systems(net: BufferNetwork, p: TuningParams) -> list[ModeSystem]:
    return [assemble_system(net, p, i) for i in range(net.N)]


def lifted_matrix(systems: Sequence[ModeSystem], pi: np.ndarray) -> np.ndarray:
    """Mode-major lifted matrix ``blockdiag(A_1..A_N) + Pi^T (x) I_n``.

    Governs the mode-indexed first moments q_i = E[x 1{sigma = i}]; it is
    Metzler, so its spectral abscissa is a real eigenvalue.
    """
    n = systems[0].n
    big = len(systems) * n
    lam = np.zeros((big, big))
    for i, sys_i in enumerate(systems):
        lam[i * n : (i + 1) * n, i * n : (i + 1) * n] = sys_i.A
    lam += np.kron(np.asarray(pi).T, np.eye(n))
    return lam


def stability_check(net: BufferNetwork, p: TuningParams) -> StabilityReport:
    """Exponential mean stability test via the lifted matrix.

    Stable iff the spectral abscissa is negative; in that case a strictly
    positive left certificate ``v = (-Lambda)^-T 1`` (so ``v^T Lambda = -1^T``)
    is returned, split per mode.
    """
    systems = _mode_systems(net, p)
    lam = lifted_matrix(systems, net.chain.Pi)
    abscissa = float(np.linalg.eigvals(lam).real.max())
    if abscissa >= 0:
        return StabilityReport(False, abscissa, None)
    v = np.linalg.solve(-lam.T, np.ones(lam.shape[0]))
    n = net.n
    certs = tuple(v[i * n : (i + 1) * n] for i in range(net.N))
    return StabilityReport(True, abscissa, certs)


def _strictness(systems: Sequence[ModeSystem]) -> float:
    scale = max(max(np.abs(s.A).max(), s.Gout.sum(axis=0).max()) for s in systems)
    return STRICTNESS_BASE * max(1.0, scale)


def _gain_lp(net: BufferNetwork, p: TuningParams, norm: str) -> GainReport:
    report = stability_check(net, p)
    if not report.stable:
        raise Unstable(f"lifted spectral abscissa {report.abscissa:.6g} >= 0")
    systems = _mode_systems(net, p)
    pi = net.chain.Pi
    n, big_n = net.n, net.N
    eps = _strictness(systems)

    n_var = 1 + big_n * n  # [gamma, v_1, ..., v_N]

    def vslot(i: int, k: int) -> int:
        return 1 + i * n + k

    rows: list[np.ndarray] = []
    rhs: list[float] = []
    for i, sys_i in enumerate(systems):
        if norm == "l1":
            colsum_gout = sys_i.Gout.sum(axis=0)
            for k in range(n):
                coef = np.zeros(n_var)
                coef[vslot(i, 0) : vslot(i, n)] += sys_i.A[:, k]
                for j in range(big_n):
                    coef[vslot(j, k)] += pi[i, j]
                rows.append(coef)
                rhs.append(-colsum_gout[k] - eps)
            for c in range(sys_i.s):
                coef = np.zeros(n_var)
                coef[vslot(i, 0) : vslot(i, n)] += sys_i.Gin[:, c]
                coef[0] = -1.0
                rows.append(coef)
                rhs.append(0.0)
        else:
            gin_ones = sys_i.Gin @ np.ones(sys_i.s)
            for k in range(n):
                coef = np.zeros(n_var)
                coef[vslot(i, 0) : vslot(i, n)] += sys_i.A[k, :]
                for j in range(big_n):
                    coef[vslot(j, k)] += pi[i, j]
                rows.append(coef)
                rhs.append(-gin_ones[k] - eps)
            for rho in range(sys_i.r):
                grow = sys_i.Gout[rho]
                if not np.any(grow):
                    continue  # vacuous output row (e.g. alpha = 0 edge rows)
                coef = np.zeros(n_var)
                coef[vslot(i, 0) : vslot(i, n)] += grow
                coef[0] = -1.0
                rows.append(coef)
                rhs.append(0.0)

    lower = np.full(n_var, CERT_FLOOR)
    lower[0] = 0.0
    cost = np.zeros(n_var)
    cost[0] = 1.0
    res = solve_lp(cost, np.array(rows), np.array(rhs), lower=lower)

    gamma = float(res.x[0])
    certs = tuple(res.x[vslot(i, 0) : vslot(i, n)].copy() for i in range(big_n))

    row_resid = -np.inf
    io_resid = -np.inf
    for i, sys_i in enumerate(systems):
        coupling = sum(pi[i, j] * certs[j] for j in range(big_n))
        if norm == "l1":
            lhs = certs[i] @ sys_i.A + coupling + sys_i.Gout.sum(axis=0)
            io = certs[i] @ sys_i.Gin - gamma
        else:
            lhs = sys_i.A @ certs[i] + coupling + sys_i.Gin @ np.ones(sys_i.s)
            io = sys_i.Gout @ certs[i] - gamma
        row_resid = max(row_resid, float(lhs.max()))
        io_resid = max(io_resid, float(io.max()))

    return GainReport(
        gamma=gamma,
        certificates=certs,
        method="lp",
        norm=norm,
        residuals={"rows": row_resid, "io": io_resid, "lp_iterations": float(res.iterations)},
    )


def l1_gain(net: BufferNetwork, p: TuningParams) -> GainReport:
    """L1 gain: smallest gamma with positive per-mode certificates v_i satisfying
    ``v_i^T A_i + sum_j pi_ij v_j^T + 1^T Gout_i <= 0`` and ``v_i^T Gin_i <= gamma 1^T``.
    """
    return _gain_lp(net, p, "l1")


def linf_gain(net: BufferNetwork, p: TuningParams) -> GainReport:
    """Linf gain: smallest gamma with certificates satisfying
    ``A_i v_i + sum_j pi_ij v_j + Gin_i 1 <= 0`` and ``Gout_i v_i <= gamma 1``.
    """
    return _gain_lp(net, p, "linf")


def resolvent_gain(net: BufferNetwork, p: TuningParams, norm: str) -> float:
    """Static-gain oracle for single-mode networks.

    ``G = Gout (-A)^-1 Gin``; the L1 gain is the max column sum, the Linf
    gain the max row sum.  Independent of the LP route.
    """
    if net.N != 1:
        raise MultiMode(f"resolvent gain needs a single mode, got {net.N}")
    sys0 = assemble_system(net, p, 0)
    abscissa = float(np.linalg.eigvals(sys0.A).real.max())
    if abscissa >= 0:
        raise Unstable(f"A has spectral abscissa {abscissa:.6g} >= 0")
    try:
        static = sys0.Gout @ np.linalg.solve(-sys0.A, sys0.Gin)
    except np.linalg.LinAlgError as exc:
        raise Singular(str(exc)) from None
    if norm == "l1":
        return float(static.sum(axis=0).max())
    if norm == "linf":
        return float(static.sum(axis=1).max())
    raise ValueError(f"unknown norm {norm!r}")


# ---------------------------------------------------------------------------
# simulation


@dataclass(frozen=True)
class PiecewiseConstantInput:
    """Input signal that is constant on consecutive time segments.

    ``boundaries`` are the segment start times (first entry 0); segment j is
    active on ``[boundaries[j], boundaries[j+1])`` and the last segment
    extends to infinity.  ``values`` has one row of channel levels per
    segment.  Discontinuities are snapped to the integration grid by the
    simulator, which keeps one-step propagation exact.
    """

    boundaries: np.ndarray
    values: np.ndarray

    def __post_init__(self) -> None:
        b = np.atleast_1d(np.asarray(self.boundaries, dtype=float))
        v = np.atleast_2d(np.asarray(self.values, dtype=float))
        if b[0] != 0.0 or np.any(np.diff(b) <= 0):
            raise ValueError("boundaries must start at 0 and strictly increase")
        if v.shape[0] != b.size:
            raise ValueError("need one value row per segment")
        object.__setattr__(self, "boundaries", b)
        object.__setattr__(self, "values", v)

    @property
    def n_channels(self) -> int:
        return self.values.shape[1]

    @classmethod
    def constant(cls, levels: Sequence[float]) -> "PiecewiseConstantInput":
        return cls(np.array([0.0]), np.array([levels], dtype=float))

    @classmethod
    def zero(cls, n_channels: int) -> "PiecewiseConstantInput":
        return cls.constant(np.zeros(n_channels))

    @classmethod
    def pulse(
        cls, n_channels: int, width: float, amplitude: float = 1.0, channel: int = 0
    ) -> "PiecewiseConstantInput":
        """Rectangular pulse of the given width on one channel, zero after."""
        if not width > 0:
            raise ValueError("pulse width must be positive")
        levels = np.zeros((2, n_channels))
        levels[0, channel] = amplitude
        return cls(np.array([0.0, width]), levels)


def sample_mode_path(
    chain: MarkovChain, horizon: float, rng: np.random.Generator, initial: int | None = None
) -> tuple[np.ndarray, np.ndarray]:
    """Sample one switching path on [0, horizon].

    Holding times are exponential with rate ``-pi_ii`` and the jump target is
    drawn with probabilities ``pi_ij / (-pi_ii)``.  Returns ``(times, modes)``
    where ``modes[j]`` is active on ``[times[j], times[j+1])`` (the last mode
    until the horizon) and ``times[0] == 0``.  The initial mode is uniform
    unless given.
    """
    n_modes = chain.N
    mode = int(rng.integers(n_modes)) if initial is None else int(initial)
    times = [0.0]
    modes = [mode]
    t = 0.0
    while True:
        rate = -float(chain.Pi[mode, mode])
        if rate <= 0:
            break
        t += rng.exponential(1.0 / rate)
        if t >= horizon:
            break
        probs = np.clip(chain.Pi[mode].copy(), 0.0, None)
        probs[mode] = 0.0
        probs /= probs.sum()
        mode = int(rng.choice(n_modes, p=probs))
        times.append(t)
        modes.append(mode)
    return np.array(times), np.array(modes, dtype=np.int64)


def _rk4_propagators(a: np.ndarray, h: float) -> tuple[np.ndarray, np.ndarray]:
    """One-step RK4 maps for ``xdot = A x + b`` with b constant on the step:
    ``x+ = M x + P b``.  Algebraically identical to the four-stage update."""
    n = a.shape[0]
    eye = np.eye(n)
    a2 = a @ a
    a3 = a2 @ a
    a4 = a3 @ a
    m = eye + h * a + (h**2 / 2) * a2 + (h**3 / 6) * a3 + (h**4 / 24) * a4
    pmat = h * eye + (h**2 / 2) * a + (h**3 / 6) * a2 + (h**4 / 24) * a3
    return m, pmat


@dataclass
class TrajectoryBatch:
    """Result of a Monte Carlo run.

    Full per-step paths for all trajectories would be enormous, so the batch
    stores (a) full paths for the first ``n_stored`` trajectories on the
    save grid, (b) the across-trajectory mean output on the save grid, with
    per-batch means for confidence intervals, (c) per-trajectory integrals
    of the output 1-norm, and (d) the minimum state value ever seen.
    """

    t: np.ndarray  # save grid (n_save,)
    states: np.ndarray  # (n_stored, n_save, n)
    outputs: np.ndarray  # (n_stored, n_save, r)
    modes: np.ndarray  # (n_stored, n_save)
    mean_output: np.ndarray  # (n_save, r)
    batch_mean_output: np.ndarray  # (n_batches, n_save, r)
    traj_output_l1: np.ndarray  # (n_traj,)
    min_state: float
    n_traj: int
    seed: int
    step: float
    horizon: float
    input_l1_mass: float
    input_sup: float


def simulate_mjls(
    net: BufferNetwork,
    p: TuningParams,
    signal: PiecewiseConstantInput,
    horizon: float,
    n_traj: int,
    seed: int,
    step: float | None = None,
    x0: np.ndarray | None = None,
    store_paths: int = 10,
    n_batches: int = 20,
    save_stride: int | None = None,
) -> TrajectoryBatch:
    """Simulate the switching network with exact handling of jump instants.

    The mode path of each trajectory is sampled from its own stream keyed by
    ``(seed, trajectory index)``.  Between jumps the state is advanced by
    fixed-step RK4 with step at most ``1e-3 / max diagonal rate`` (one
    thousandth of the fastest time constant); steps containing a jump are
    split exactly at the jump instant.  Identical seeds reproduce the batch
    bit for bit.
    """
    if not horizon > 0:
        raise InvalidHorizon(f"horizon must be positive, got {horizon!r}")
    if n_traj < 1:
        raise ValueError(f"n_traj must be >= 1, got {n_traj}")
    systems = _mode_systems(net, p)
    n, r, s = systems[0].n, systems[0].r, systems[0].s
    if signal.n_channels != s:
        raise ValueError(f"signal has {signal.n_channels} channels, network has {s} inputs")

    max_rate = max(float(np.abs(np.linalg.eigvals(sys_i.A)).max()) for sys_i in systems)
    max_rate = max(max_rate, 1e-12)
    step_cap = 1e-3 / max_rate
    h_target = min(step, step_cap) if step is not None else step_cap
    n_steps = max(1, int(np.ceil(horizon / h_target - 1e-12)))
    h = horizon / n_steps

    # snap input segment boundaries onto the step grid
    raw_bounds = signal.boundaries
    idx_bounds = [0]
    for tb in raw_bounds[1:]:
        k = int(round(tb / h))
        idx_bounds.append(max(k, idx_bounds[-1] + 1))
    idx_bounds.append(n_steps + 1)  # sentinel
    seg_of_step = np.zeros(n_steps, dtype=np.int64)
    for j in range(len(raw_bounds)):
        lo, hi = idx_bounds[j], min(idx_bounds[j + 1], n_steps)
        if lo < n_steps:
            seg_of_step[lo:hi] = j
    seg_values = signal.values
    seg_lengths = np.bincount(seg_of_step, minlength=seg_values.shape[0]) * h
    input_l1_mass = float(seg_lengths @ np.abs(seg_values).sum(axis=1))
    active = seg_lengths > 0
    input_sup = float(np.abs(seg_values[active]).max()) if np.any(active) else 0.0

    # per-mode propagators for a full step, per-mode drive vectors per segment
    prop_mt = []
    prop_drift = []  # [mode][segment] -> (n,)
    drive = []  # [mode][segment] -> Gin @ u
    for sys_i in systems:
        m_i, p_i = _rk4_propagators(sys_i.A, h)
        prop_mt.append(np.ascontiguousarray(m_i.T))
        gin_u = sys_i.Gin @ seg_values.T  # (n, n_seg)
        prop_drift.append((p_i @ gin_u).T.copy())  # (n_seg, n)
        drive.append(gin_u.T.copy())

    def split_step(mode: int, dt: float, x: np.ndarray, u_seg: int) -> np.ndarray:
        # Horner form of the same RK4 one-step maps for an off-grid interval
        a = systems[mode].A
        y = x + (dt / 4.0) * (a @ x)
        y = x + (dt / 3.0) * (a @ y)
        y = x + (dt / 2.0) * (a @ y)
        out = x + dt * (a @ y)
        b = drive[mode][u_seg]
        z = b + (dt / 4.0) * (a @ b)
        z = b + (dt / 3.0) * (a @ z)
        z = b + (dt / 2.0) * (a @ z)
        return out + dt * z

    # mode paths, one rng stream per trajectory
    jump_times: list[np.ndarray] = []
    jump_modes: list[np.ndarray] = []
    for tau in range(n_traj):
        rng = np.random.default_rng([seed, tau])
        times, modes_tau = sample_mode_path(net.chain, horizon, rng)
        jump_times.append(times)
        jump_modes.append(modes_tau)

    n_modes = len(systems)
    initial_modes = np.array([jm[0] for jm in jump_modes], dtype=np.int64)

    # trajectories live permuted into contiguous per-mode blocks so the hot
    # loop is one in-place GEMM per mode; jumps move single rows via swaps
    perm = np.argsort(initial_modes, kind="stable")
    pos_of = np.argsort(perm)
    bounds = np.concatenate([[0], np.cumsum(np.bincount(initial_modes, minlength=n_modes))])
    cur_mode_p = initial_modes[perm].copy()
    ptr_p = np.zeros(n_traj, dtype=np.int64)
    next_jump_p = np.array(
        [jump_times[tau][1] if jump_times[tau].size > 1 else np.inf for tau in perm]
    )

    x_all = np.zeros((n_traj, n))
    if x0 is not None:
        x0 = np.asarray(x0, dtype=float)
        x_all[:] = x0[None, :] if x0.ndim == 1 else x0[perm]
    scratch = np.empty_like(x_all)

    def swap_rows(a: int, b: int) -> None:
        if a == b:
            return
        x_all[[a, b]] = x_all[[b, a]]
        for arr in (next_jump_p, ptr_p, cur_mode_p, perm):
            arr[[a, b]] = arr[[b, a]]
        pos_of[perm[a]] = a
        pos_of[perm[b]] = b

    def move_between_blocks(pp: int, a: int, b: int) -> int:
        while a < b:
            last = bounds[a + 1] - 1
            swap_rows(pp, last)
            pp = last
            bounds[a + 1] -= 1
            a += 1
        while a > b:
            first = bounds[a]
            swap_rows(pp, first)
            pp = first
            bounds[a] += 1
            a -= 1
        return pp

    if save_stride is None:
        save_stride = max(1, int(round(n_steps / min(n_steps, 2000))))
    save_steps = list(range(0, n_steps + 1, save_stride))
    if save_steps[-1] != n_steps:
        save_steps.append(n_steps)
    save_set = {k: j for j, k in enumerate(save_steps)}
    n_save = len(save_steps)
    t_save = h * np.array(save_steps)

    n_stored = min(store_paths, n_traj)
    states_store = np.zeros((n_stored, n_save, n))
    outputs_store = np.zeros((n_stored, n_save, r))
    modes_store = np.zeros((n_stored, n_save), dtype=np.int64)
    n_batches = max(1, min(n_batches, n_traj))
    batch_edges = np.linspace(0, n_traj, n_batches + 1).astype(int)
    batch_sizes = np.diff(batch_edges)
    batch_sum = np.zeros((n_batches, n_save, r))
    traj_l1 = np.zeros(n_traj)
    prev_norm = np.zeros(n_traj)
    prev_t = 0.0
    min_state = np.inf

    gout_t = [sys_i.Gout.T.copy() for sys_i in systems]

    def record(save_idx: int, t_now: float) -> None:
        nonlocal min_state, prev_t, traj_l1
        y_perm = np.empty((n_traj, r))
        for i in range(n_modes):
            lo, hi = bounds[i], bounds[i + 1]
            if hi > lo:
                np.dot(x_all[lo:hi], gout_t[i], out=y_perm[lo:hi])
        y_all = np.empty_like(y_perm)
        y_all[perm] = y_perm  # back to trajectory order
        batch_sum[:, save_idx, :] += np.add.reduceat(y_all, batch_edges[:-1], axis=0)
        y_norm = y_all.sum(axis=1)
        if save_idx > 0:
            traj_l1 += 0.5 * (t_now - prev_t) * (prev_norm + y_norm)
        prev_norm[:] = y_norm
        prev_t = t_now
        min_state = min(min_state, float(x_all.min()))
        store_pos = pos_of[:n_stored]
        states_store[:, save_idx, :] = x_all[store_pos]
        outputs_store[:, save_idx, :] = y_all[:n_stored]
        modes_store[:, save_idx] = cur_mode_p[store_pos]

    record(0, 0.0)
    for k in range(n_steps):
        t0 = k * h
        t1 = (k + 1) * h
        seg = int(seg_of_step[k])
        jpos = np.nonzero(next_jump_p < t1)[0]
        if jpos.size:
            jump_ids = perm[jpos].copy()
            saved_x = x_all[jpos].copy()
        for i in range(n_modes):
            lo, hi = bounds[i], bounds[i + 1]
            if hi > lo:
                blk = x_all[lo:hi]
                np.dot(blk, prop_m[i].T, out=scratch[: hi - lo])
                np.add(scratch[: hi - lo], prop_drift[i][seg], out=blk)
        if jpos.size:
            for jid, x_saved in zip(jump_ids, saved_x):
                pp = int(pos_of[jid])
                x = x_saved
                t_cur = t0
                mode = int(cur_mode_p[pp])
                while next_jump_p[pp] < t1:
                    tj = float(next_jump_p[pp])
                    if tj > t_cur:
                        x = split_step(mode, tj - t_cur, x, seg)
                    t_cur = tj
                    ptr_p[pp] += 1
                    new_mode = int(jump_modes[jid][ptr_p[pp]])
                    nxt = ptr_p[pp] + 1
                    next_jump_p[pp] = (
                        jump_times[jid][nxt] if nxt < len(jump_times[jid]) else np.inf
                    )
                    cur_mode_p[pp] = new_mode
                    pp = move_between_blocks(pp, mode, new_mode)
                    mode = new_mode
                if t1 > t_cur:
                    x = split_step(mode, t1 - t_cur, x, seg)
                x_all[pp] = x
        if (k + 1) in save_set:
            record(save_set[k + 1], t1)

    mean_output = batch_sum.sum(axis=0) / n_traj
    batch_mean = batch_sum / batch_sizes[:, None, None]

    return TrajectoryBatch(
        t=t_save,
        states=states_store,
        outputs=outputs_store,
        modes=modes_store,
        mean_output=mean_output,
        batch_mean_output=batch_mean,
        traj_output_l1=traj_l1,
        min_state=float(min_state),
        n_traj=n_traj,
        seed=seed,
        step=h,
        horizon=horizon,
        input_l1_mass=input_l1_mass,
        input_sup=input_sup,
    )


def empirical_gain(batch: TrajectoryBatch, norm: str) -> EmpiricalGain:
    """Monte Carlo gain estimate with a 95% normal-approximation half-width.

    L1: time integral of the mean output 1-norm over the input's L1 mass
    (outputs are nonnegative, so the per-trajectory integrals average to the
    same quantity and give the spread).  Probe with a short pulse: the ratio
    then approaches the gain of the pulsed channel.

    Linf: peak entry of the mean output over the input's sup-norm; the
    spread comes from contiguous trajectory batches evaluated at the peak.
    Probe with a constant input on all channels.
    """
    if norm == "l1":
        if batch.input_l1_mass <= 0:
            raise ZeroInput("input has zero L1 mass")
        vals = batch.traj_output_l1 / batch.input_l1_mass
        value = float(vals.mean())
        half = 1.96 * float(vals.std(ddof=1)) / np.sqrt(batch.n_traj) if batch.n_traj > 1 else 0.0
        return EmpiricalGain(value, half, "l1")
    if norm == "linf":
        if batch.input_sup <= 0:
            raise ZeroInput("input has zero sup-norm")
        flat = int(np.argmax(batch.mean_output))
        k_star, c_star = np.unravel_index(flat, batch.mean_output.shape)
        value = float(batch.mean_output[k_star, c_star]) / batch.input_sup
        bvals = batch.batch_mean_output[:, k_star, c_star] / batch.input_sup
        nb = bvals.size
        half = 1.96 * float(bvals.std(ddof=1)) / np.sqrt(nb) if nb > 1 else 0.0
        return EmpiricalGain(value, half, "linf")
    raise ValueError(f"unknown norm {norm!r}")


def export_trajectory_csv(batch: TrajectoryBatch, index: int, path: str) -> None:
    """Write one stored trajectory as CSV: t, mode, x_1..x_n, y_1..y_r."""
    if not 0 <= index < batch.states.shape[0]:
        raise IndexError(f"trajectory {index} not stored (have {batch.states.shape[0]})")
    n = batch.states.shape[2]
    r = batch.outputs.shape[2]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["t", "mode"] + [f"x_{i+1}" for i in range(n)] + [f"y_{j+1}" for j in range(r)])
        for j, t in enumerate(batch.t):
            row = [format(t, ".12g"), int(batch.modes[index, j])]
            row += [format(v, ".12g") for v in batch.states[index, j]]
            row += [format(v, ".12g") for v in batch.outputs[index, j]]
            writer.writerow(row)
