"""Penalty convex-concave solver for difference-of-convex programs.

A program here minimizes a log-transformed posynomial objective subject to
constraints ``log P_i(exp w) - log Q_i(exp w) <= 0`` and box bounds.  Each
outer iteration replaces the concave parts ``-log Q_i`` by their tangents at
the current iterate (a global over-estimate of the constraint), appends
nonnegative slacks weighted by a growing penalty, and solves the resulting
smooth convex subproblem with a dense log-barrier Newton method.  Only local
optimality is guaranteed; multistart mitigates (but cannot remove) that.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
import scipy.linalg

from .posylog import (
    AffineFunction,
    DCConstraint,
    LogPosynomial,
    Posynomial,
    VariableSpace,
    linearize_concave,
    log_transform,
)

__all__ = [
    "DCProgram",
    "SolveOptions",
    "SolveTrace",
    "TraceRow",
    "ConvexSubproblem",
    "SubproblemResult",
    "DCSolution",
    "MaxIterations",
    "NumericalBreakdown",
    "NoFeasiblePointFound",
    "convexify",
    "solve_subproblem",
    "solve_dc",
]


class MaxIterations(RuntimeError):
    pass


class NumericalBreakdown(RuntimeError):
    pass


class NoFeasiblePointFound(RuntimeError):
    """Every multistart ended with some constraint violated beyond tolerance."""


@dataclass(frozen=True)
class DCProgram:
    """Objective and DC constraints over a shared variable space.

    The objective is ``log f0(exp w)`` minus, when present, the log of a
    concave-part posynomial (a DC pair).  Box bounds are kept separate from
    the DC constraints; they enter the subproblems as actual bounds.
    """

    space: VariableSpace
    objective: Posynomial
    constraints: tuple[DCConstraint, ...]
    lower: np.ndarray
    upper: np.ndarray
    objective_concave: Posynomial | None = None

    def __post_init__(self) -> None:
        lo = np.asarray(self.lower, dtype=float)
        hi = np.asarray(self.upper, dtype=float)
        if lo.shape != (self.space.size,) or hi.shape != (self.space.size,):
            raise ValueError("bounds must match the variable space size")
        if np.any(~np.isfinite(lo)) or np.any(~np.isfinite(hi)):
            raise ValueError("bounds must be finite")
        if np.any(hi <= lo):
            raise ValueError("upper bounds must exceed lower bounds")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    @property
    def is_gp_equivalent(self) -> bool:
        """True when every concave part is a single monomial, i.e. the log-log
        transform already makes the whole program convex."""
        return self.objective_concave is None and all(c.Q.is_monomial for c in self.constraints)

    def true_objective(self, w: np.ndarray) -> float:
        val = log_transform(self.objective).value(w)
        if self.objective_concave is not None:
            val -= log_transform(self.objective_concave).value(w)
        return val

    def violations(self, w: np.ndarray) -> np.ndarray:
        return np.array([max(c.violation(w), 0.0) for c in self.constraints])


@dataclass(frozen=True)
class SolveOptions:
    tol_stationarity: float = 1e-8
    tol_feasibility: float = 1e-8
    max_outer_iters: int = 100
    tau0: float = 1.0
    mu: float = 5.0
    tau_max: float = 1e6
    multistarts: int = 8
    seed: int = 0

    def __post_init__(self) -> None:
        if not (
            self.tol_stationarity > 0
            and self.tol_feasibility > 0
            and self.max_outer_iters > 0
            and self.tau0 > 0
            and self.mu > 1
            and self.tau_max > 0
            and self.multistarts > 0
        ):
            raise ValueError("solver options must be positive (and mu > 1)")


@dataclass(frozen=True)
class TraceRow:
    iteration: int
    objective: float
    violation: float
    penalty: float
    step_norm: float
    merit: float


@dataclass
class SolveTrace:
    rows: list[TraceRow] = field(default_factory=list)

    def to_csv(self, path: str) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["iter", "objective", "violation", "penalty"])
            for row in self.rows:
                writer.writerow(
                    [
                        row.iteration,
                        format(row.objective, ".12g"),
                        format(row.violation, ".12g"),
                        format(row.penalty, ".12g"),
                    ]
                )


@dataclass
class ConvexSubproblem:
    """Convex majorization of a DC program at a linearization point.

    Constraint i reads ``lse_i(w) - tangent_i(w) <= s_i`` with slack
    ``s_i >= 0``; a point with all slacks zero is feasible for the original
    program.  Always strictly feasible thanks to the slacks.  All constraint
    terms are stacked into one exponent matrix so values, gradients and the
    Hessian contraction are segmented-matrix operations.
    """

    space: VariableSpace
    f0: LogPosynomial
    f0_shift: AffineFunction | None
    cons_lse: tuple[LogPosynomial, ...]
    cons_tangent: tuple[AffineFunction, ...]
    lower: np.ndarray
    upper: np.ndarray
    labels: tuple[str, ...]

    def __post_init__(self) -> None:
        self._stack_a = np.vstack([lse.source.expos for lse in self.cons_lse])
        self._stack_logc = np.concatenate([np.log(lse.source.coeffs) for lse in self.cons_lse])
        sizes = [lse.source.n_terms for lse in self.cons_lse]
        self._seg_starts = np.concatenate([[0], np.cumsum(sizes)])[:-1].astype(np.intp)
        self._seg_id = np.repeat(np.arange(len(sizes)), sizes)
        self._tan_slope = np.array([tan.slope for tan in self.cons_tangent])
        self._tan_icpt = np.array([tan.intercept for tan in self.cons_tangent])

    def objective_value_grad(self, w: np.ndarray) -> tuple[float, np.ndarray]:
        val, grad = self.f0.value_and_grad(w)
        if self.f0_shift is not None:
            val -= self.f0_shift.value(w)
            grad = grad - self.f0_shift.slope
        return val, grad

    def constraint_values(self, w: np.ndarray) -> np.ndarray:
        z = self._stack_a @ w + self._stack_logc
        m = np.maximum.reduceat(z, self._seg_starts)
        sums = np.add.reduceat(np.exp(z - m[self._seg_id]), self._seg_starts)
        return m + np.log(sums) - (self._tan_slope @ w + self._tan_icpt)

    def constraint_state(self, w: np.ndarray):
        """Values, Jacobian, per-term softmax weights, and raw lse gradients."""
        z = self._stack_a @ w + self._stack_logc
        m = np.maximum.reduceat(z, self._seg_starts)
        e = np.exp(z - m[self._seg_id])
        sums = np.add.reduceat(e, self._seg_starts)
        vals = m + np.log(sums) - (self._tan_slope @ w + self._tan_icpt)
        p = e / sums[self._seg_id]
        lse_grads = np.add.reduceat(p[:, None] * self._stack_a, self._seg_starts, axis=0)
        jac = lse_grads - self._tan_slope
        return vals, jac, p, lse_grads

    def constraint_hessian_sum(self, coef: np.ndarray, p: np.ndarray, lse_grads: np.ndarray) -> np.ndarray:
        """``sum_i coef_i * hess(lse_i)`` using the softmax state from
        :meth:`constraint_state` (tangents contribute no curvature)."""
        d = p * coef[self._seg_id]
        h = self._stack_a.T @ (d[:, None] * self._stack_a)
        h -= (lse_grads * coef[:, None]).T @ lse_grads
        return h


def convexify(prog: DCProgram, w_k: np.ndarray) -> ConvexSubproblem:
    """Tangent-majorize every concave part at ``w_k``.

    For a monomial Q the tangent equals ``log Q`` everywhere, so the
    convexification is exact and independent of ``w_k``.
    """
    w_k = np.asarray(w_k, dtype=float)
    lses = tuple(c.log_p for c in prog.constraints)
    tangents = tuple(linearize_concave(c.Q, w_k) for c in prog.constraints)
    shift = None if prog.objective_concave is None else linearize_concave(prog.objective_concave, w_k)
    return ConvexSubproblem(
        space=prog.space,
        f0=log_transform(prog.objective),
        f0_shift=shift,
        cons_lse=lses,
        cons_tangent=tangents,
        lower=prog.lower,
        upper=prog.upper,
        labels=tuple(c.label for c in prog.constraints),
    )


@dataclass
class SubproblemResult:
    w: np.ndarray
    slacks: np.ndarray
    multipliers: dict[str, np.ndarray]
    kkt_residual: float
    newton_iterations: int
    status: str


def solve_subproblem(
    sub: ConvexSubproblem,
    penalty: float,
    warm_start: np.ndarray | None = None,
    gap_tol: float = 1e-10,
    newton_budget: int = 4000,
) -> SubproblemResult:
    """Minimize ``F(w) + penalty * sum(s)`` over the majorized constraints.

    Dense log-barrier Newton path following: deterministic for fixed inputs,
    returns the iterate together with barrier multiplier estimates and the
    KKT stationarity residual they certify.
    """
    v_dim = sub.space.size
    m_con = len(sub.cons_lse)
    lb, ub = sub.lower, sub.upper
    margin = 1e-8 * (ub - lb)
    w = np.clip(
        warm_start if warm_start is not None else 0.5 * (lb + ub),
        lb + margin,
        ub - margin,
    ).astype(float)

    s = np.maximum(sub.constraint_values(w), 0.0) + 1.0
    n_ineq = 2 * m_con + 2 * v_dim

    def barrier_value(wv: np.ndarray, sv: np.ndarray, t: float) -> float:
        d1 = sv - sub.constraint_values(wv)
        d3 = wv - lb
        d4 = ub - wv
        if np.any(d1 <= 0) or np.any(sv <= 0) or np.any(d3 <= 0) or np.any(d4 <= 0):
            return np.inf
        fval, _ = sub.objective_value_grad(wv)
        return float(
            t * (fval + penalty * sv.sum())
            - np.log(d1).sum()
            - np.log(sv).sum()
            - np.log(d3).sum()
            - np.log(d4).sum()
        )

    t = 1.0
    mu_t = 100.0
    total_newton = 0
    while True:
        # loose centering along the path, tight only at the final stage
        last_stage = n_ineq / t <= gap_tol
        for _ in range(120):
            gvals, jac, soft_p, lse_grads = sub.constraint_state(w)
            d1 = s - gvals
            d3 = w - lb
            d4 = ub - w
            _, fgrad = sub.objective_value_grad(w)

            inv_d1 = 1.0 / d1
            grad_w = t * fgrad + jac.T @ inv_d1 - 1.0 / d3 + 1.0 / d4
            grad_s = t * penalty - inv_d1 - 1.0 / s
            if last_stage and max(np.abs(grad_w).max(), np.abs(grad_s).max()) <= 1e-8 * t:
                break  # stationarity residual of the original problem met

            h_ww = t * sub.f0.hessian(w)
            h_ww += (jac * (inv_d1**2)[:, None]).T @ jac
            h_ww += sub.constraint_hessian_sum(inv_d1, soft_p, lse_grads)
            h_ww[np.diag_indices_from(h_ww)] += 1.0 / d3**2 + 1.0 / d4**2
            h_ws = -jac.T * (inv_d1**2)[None, :]
            h_ss = inv_d1**2 + 1.0 / s**2

            dim = v_dim + m_con
            hess = np.zeros((dim, dim))
            hess[:v_dim, :v_dim] = h_ww
            hess[:v_dim, v_dim:] = h_ws
            hess[v_dim:, :v_dim] = h_ws.T
            hess[v_dim:, v_dim:] = np.diag(h_ss)
            grad = np.concatenate([grad_w, grad_s])

            dz = None
            ridge = 0.0
            for _attempt in range(4):
                try:
                    cf = scipy.linalg.cho_factor(
                        hess if ridge == 0.0 else hess + ridge * np.eye(dim), check_finite=False
                    )
                    dz = scipy.linalg.cho_solve(cf, -grad, check_finite=False)
                    break
                except scipy.linalg.LinAlgError:
                    ridge = max(ridge * 100.0, 1e-12 * max(1.0, float(np.abs(hess).max())))
            if dz is None:
                raise NumericalBreakdown("barrier Newton system not positive definite")

            decrement = float(-grad @ dz)
            total_newton += 1
            if total_newton > newton_budget:
                raise MaxIterations(f"barrier Newton budget {newton_budget} exhausted")
            if decrement / 2.0 <= (1e-9 if last_stage else 1e-2):
                break

            dw, ds = dz[:v_dim], dz[v_dim:]
            alpha = 1.0
            for vec, dvec in ((s, ds), (d3, dw), (d4, -dw)):
                neg = dvec < 0
                if np.any(neg):
                    alpha = min(alpha, 0.99 * float((vec[neg] / -dvec[neg]).min()))
            psi0 = barrier_value(w, s, t)
            accepted = False
            for _bt in range(60):
                w_try = w + alpha * dw
                s_try = s + alpha * ds
                if barrier_value(w_try, s_try, t) <= psi0 - 1e-4 * alpha * decrement:
                    w, s = w_try, s_try
                    accepted = True
                    break
                alpha *= 0.5
            if not accepted:
                break  # no further progress at this stage
        if last_stage:
            break
        t *= mu_t

    gvals, jac, _, _ = sub.constraint_state(w)
    d1 = s - gvals
    lam = 1.0 / (t * d1)
    nu_s = 1.0 / (t * s)
    mu_lo = 1.0 / (t * (w - lb))
    mu_hi = 1.0 / (t * (ub - w))
    _, fgrad = sub.objective_value_grad(w)
    r_w = fgrad + jac.T @ lam - mu_lo + mu_hi
    r_s = penalty - lam - nu_s
    kkt = max(float(np.abs(r_w).max()), float(np.abs(r_s).max()) if m_con else 0.0)

    return SubproblemResult(
        w=w,
        slacks=s,
        multipliers={"constraints": lam, "slack_sign": nu_s, "lower": mu_lo, "upper": mu_hi},
        kkt_residual=kkt,
        newton_iterations=total_newton,
        status="optimal",
    )


@dataclass
class StartSummary:
    start_index: int
    feasible: bool
    objective: float
    violation: float
    status: str
    iterations: int


@dataclass
class DCSolution:
    """Best feasible iterate across multistarts.

    ``guarantee`` is always "local": the convex-concave procedure does not
    certify global optimality.
    """

    w: np.ndarray
    objective: float
    log_objective: float
    max_violation: float
    feasible: bool
    status: str
    start_index: int
    trace: SolveTrace
    summaries: list[StartSummary]
    guarantee: str = "local"


def _default_starts(prog: DCProgram, opts: SolveOptions) -> list[np.ndarray]:
    rng = np.random.default_rng(opts.seed)
    lb, ub = prog.lower, prog.upper
    mid = 0.5 * (lb + ub)
    span = ub - lb
    narrow = span <= 20.0
    starts = [mid.copy()]
    for _ in range(opts.multistarts - 1):
        w = mid + rng.uniform(-2.0, 2.0, prog.space.size)
        w[narrow] = lb[narrow] + rng.uniform(0.0, 1.0, int(narrow.sum())) * span[narrow]
        starts.append(np.clip(w, lb, ub))
    return starts


def _solve_single(
    prog: DCProgram, opts: SolveOptions, w0: np.ndarray
) -> tuple[np.ndarray, SolveTrace, str, int]:
    w = np.clip(np.asarray(w0, dtype=float), prog.lower, prog.upper)
    trace = SolveTrace()

    if prog.is_gp_equivalent:
        # tangents of monomial concave parts are exact: one convex solve
        sub = convexify(prog, w)
        tau = opts.tau0
        res = solve_subproblem(sub, tau, warm_start=w)
        while float(prog.violations(res.w).max(initial=0.0)) > opts.tol_feasibility and tau < opts.tau_max:
            tau = min(opts.mu * tau, opts.tau_max)
            res = solve_subproblem(sub, tau, warm_start=res.w)
        w_new = res.w
        viol = prog.violations(w_new)
        trace.rows.append(
            TraceRow(
                iteration=1,
                objective=float(np.exp(prog.true_objective(w_new))),
                violation=float(viol.max(initial=0.0)),
                penalty=tau,
                step_norm=float(np.abs(w_new - w).max()),
                merit=prog.true_objective(w_new) + tau * float(viol.sum()),
            )
        )
        return w_new, trace, "converged", 1

    tau = opts.tau0
    prev_merit = prog.true_objective(w) + tau * float(prog.violations(w).sum())
    status = "max-iterations"
    plateau = 0
    it = 0
    for it in range(1, opts.max_outer_iters + 1):
        sub = convexify(prog, w)
        res = solve_subproblem(sub, tau, warm_start=w)
        w_new = res.w
        merit_new = prog.true_objective(w_new) + tau * float(prog.violations(w_new).sum())
        if merit_new <= prev_merit + 1e-9 * max(1.0, abs(prev_merit)):
            step = float(np.abs(w_new - w).max())
            improvement = prev_merit - merit_new
            w = w_new
        else:
            step = 0.0  # reject uphill step (inexact subproblem); keep iterate
            improvement = 0.0
        viol = prog.violations(w)
        viol_max = float(viol.max(initial=0.0))
        merit_now = prog.true_objective(w) + tau * float(viol.sum())
        trace.rows.append(
            TraceRow(
                iteration=it,
                objective=float(np.exp(prog.true_objective(w))),
                violation=viol_max,
                penalty=tau,
                step_norm=step,
                merit=merit_now,
            )
        )
        if step <= opts.tol_stationarity and viol_max <= opts.tol_feasibility:
            status = "converged"
            break
        plateau = plateau + 1 if improvement <= 1e-13 * max(1.0, abs(prev_merit)) else 0
        if plateau >= 5 and (viol_max <= opts.tol_feasibility or tau >= opts.tau_max):
            # stalled: feasible plateaus are a valid finish; an infeasible one
            # with a saturated penalty cannot recover, so stop burning iterations
            status = "plateau" if viol_max <= opts.tol_feasibility else "stalled"
            break
        tau = min(opts.mu * tau, opts.tau_max)
        prev_merit = prog.true_objective(w) + tau * float(prog.violations(w).sum())
    return w, trace, status, it


def solve_dc(
    prog: DCProgram,
    opts: SolveOptions | None = None,
    starts: Sequence[np.ndarray] | None = None,
) -> DCSolution:
    """Run the penalty convex-concave procedure from several starts.

    Each start iterates convexify/solve with penalty ``tau`` growing by
    ``mu`` up to ``tau_max`` and stops when the iterate stalls and the
    original constraints hold within ``tol_feasibility``.  Candidates are
    ranked feasible-first, then by objective, violation and start index.
    Raises :class:`NoFeasiblePointFound` when every start ends infeasible.
    """
    opts = opts or SolveOptions()
    start_list = [np.asarray(w, dtype=float) for w in (starts if starts is not None else _default_starts(prog, opts))]
    if not start_list:
        raise ValueError("need at least one start")
    if prog.is_gp_equivalent:
        start_list = start_list[:1]  # convex case: every start finds the same optimum

    candidates = []
    summaries = []
    for idx, w0 in enumerate(start_list):
        try:
            w, trace, status, iters = _solve_single(prog, opts, w0)
        except (NumericalBreakdown, MaxIterations) as exc:
            summaries.append(StartSummary(idx, False, np.inf, np.inf, f"failed: {exc}", 0))
            continue
        viol = float(prog.violations(w).max(initial=0.0))
        log_obj = prog.true_objective(w)
        feasible = viol <= opts.tol_feasibility
        summaries.append(StartSummary(idx, feasible, float(np.exp(log_obj)), viol, status, iters))
        candidates.append((idx, w, trace, status, viol, log_obj, feasible))

    feasible_cands = [c for c in candidates if c[6]]
    if not feasible_cands:
        best_viol = min((c[4] for c in candidates), default=np.inf)
        raise NoFeasiblePointFound(
            f"all {len(start_list)} starts ended infeasible; best max violation {best_viol:.3e}"
        )
    idx, w, trace, status, viol, log_obj, _ = min(
        feasible_cands, key=lambda c: (c[5], c[4], c[0])
    )
    return DCSolution(
        w=w,
        objective=float(np.exp(log_obj)),
        log_objective=float(log_obj),
        max_violation=viol,
        feasible=True,
        status=status,
        start_index=idx,
        trace=trace,
        summaries=summaries,
    )
