"""Build the parameter-tuning DC programs and map solutions back.

Two program families: minimize the L1 gain subject to a tuning-cost budget,
and minimize the tuning cost subject to an Linf gain bound.  Both substitute
``gamma = exp(c)``, ``v_i = exp(nu_i)``, ``beta = exp(phi)``,
``delta = exp(eta)`` so that every inequality becomes the log of one
posynomial minus the log of another and the machinery in :mod:`dcsolve`
applies.  A geometric-programming baseline shares one flow multiplier per
node (all out-edges equal), shrinking the variable space.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from . import dcsolve
from .dcsolve import DCProgram, DCSolution, SolveOptions, solve_dc
from .gains import GainReport, l1_gain, linf_gain, stability_check
from .netmodel import (
    BufferNetwork,
    EdgeKey,
    ParamBounds,
    TuningParams,
    edge_name,
)
from .posylog import DCConstraint, Posynomial, VariableSpace

__all__ = [
    "CostModel",
    "VariableMap",
    "OptimizationResult",
    "NonPosynomialCost",
    "EmptyDestinations",
    "NonpositiveGammaBound",
    "BoundViolation",
    "RevalidationFailed",
    "build_l1_problem",
    "build_linf_problem",
    "build_gp_baseline",
    "extract_solution",
    "optimize_l1",
    "optimize_linf",
    "compare_gp",
]

CERT_BOX = 40.0  # log-space bounds for certificate and gain variables
DEFAULT_FLOOR_RATIO = 1e-6  # lower box bound as a fraction of the upper bound


class NonPosynomialCost(ValueError):
    pass


class EmptyDestinations(ValueError):
    pass


class NonpositiveGammaBound(ValueError):
    pass


class BoundViolation(ValueError):
    pass


class RevalidationFailed(RuntimeError):
    """The extracted parameters failed the independent gain re-check."""


TermList = tuple[tuple[float, float], ...]


def _check_terms(terms: Sequence[tuple[float, float]], where: str) -> TermList:
    out = []
    for c, a in terms:
        if not c > 0:
            raise NonPosynomialCost(f"{where}: coefficient {c!r} is not positive")
        out.append((float(c), float(a)))
    if not out:
        raise NonPosynomialCost(f"{where}: empty monomial list")
    return tuple(out)


@dataclass(frozen=True)
class CostModel:
    """Tuning cost ``sum_i g_i(beta_i) + sum_e h_e(delta_e)``.

    Each ``g_i`` / ``h_e`` is a univariate posynomial given as monomial terms
    ``(coefficient, exponent)``.  ``budget`` bounds the cost in the
    gain-minimization problem; ``gamma_bound`` bounds the gain in the
    cost-minimization problem.
    """

    g: Mapping[int, TermList]
    h: Mapping[EdgeKey, TermList]
    budget: float | None = None
    gamma_bound: float | None = None

    def __post_init__(self) -> None:
        object.__setattr__(
            self, "g", {i: _check_terms(t, f"g[{i}]") for i, t in self.g.items()}
        )
        object.__setattr__(
            self, "h", {k: _check_terms(t, f"h[{edge_name(k)}]") for k, t in self.h.items()}
        )

    @classmethod
    def linear(
        cls, net: BufferNetwork, budget: float | None = None, gamma_bound: float | None = None
    ) -> "CostModel":
        """Unit-coefficient linear costs on every parameter."""
        return cls(
            {i: ((1.0, 1.0),) for i in net.destinations_sorted},
            {k: ((1.0, 1.0),) for k in net.edge_keys},
            budget=budget,
            gamma_bound=gamma_bound,
        )

    def value(self, p: TuningParams) -> float:
        total = 0.0
        for i, terms in self.g.items():
            total += sum(c * p.beta[i] ** a for c, a in terms)
        for k, terms in self.h.items():
            total += sum(c * p.delta[k] ** a for c, a in terms)
        return total


@dataclass(frozen=True)
class VariableMap:
    """Index layout of the optimization variables.

    Order: gain slot (absent in the cost-minimization problem), certificate
    blocks per mode, log-decay per destination, log-flow-multiplier per edge
    (shared per tail node in the GP baseline).
    """

    space: VariableSpace
    gamma: int | None
    nu: tuple[tuple[int, ...], ...]  # [mode][node 0-based] -> index
    phi: Mapping[int, int]  # destination -> index
    eta: Mapping[EdgeKey, int]  # edge -> index (shared indices in GP mode)

    @property
    def eta_indices(self) -> tuple[int, ...]:
        return tuple(sorted(set(self.eta.values())))

    @property
    def phi_indices(self) -> tuple[int, ...]:
        return tuple(self.phi[i] for i in sorted(self.phi))


def _registry(
    net: BufferNetwork, include_gamma: bool, share_eta: bool
) -> VariableMap:
    names: list[str] = []
    gamma_idx = None
    if include_gamma:
        gamma_idx = 0
        names.append("gamma")
    nu: list[tuple[int, ...]] = []
    for i in range(net.N):
        block = []
        for k in range(net.n):
            block.append(len(names))
            names.append(f"nu[{i}][{k + 1}]")
        nu.append(tuple(block))
    phi: dict[int, int] = {}
    for d in net.destinations_sorted:
        phi[d] = len(names)
        names.append(f"phi[{d}]")
    eta: dict[EdgeKey, int] = {}
    if share_eta:
        node_slot: dict[int, int] = {}
        for key in net.edge_keys:
            tail = key[0]
            if tail not in node_slot:
                node_slot[tail] = len(names)
                names.append(f"eta[{tail}->*]")
            eta[key] = node_slot[tail]
    else:
        for key in net.edge_keys:
            eta[key] = len(names)
            names.append(f"eta[{edge_name(key)}]")
    return VariableMap(VariableSpace(tuple(names)), gamma_idx, tuple(nu), phi, eta)


def _box_bounds(
    net: BufferNetwork, vmap: VariableMap, bounds: ParamBounds, floor_ratio: float
) -> tuple[np.ndarray, np.ndarray]:
    size = vmap.space.size
    lo = np.full(size, -CERT_BOX)
    hi = np.full(size, CERT_BOX)
    log_floor = np.log(floor_ratio)
    for d, idx in vmap.phi.items():
        bar = bounds.beta_bar.get(d)
        if bar is None:
            raise BoundViolation(f"no beta_bar for destination {d}")
        hi[idx] = np.log(bar)
        lo[idx] = np.log(bar) + log_floor
    for key, idx in vmap.eta.items():
        bar = bounds.delta_bar.get(key)
        if bar is None:
            raise BoundViolation(f"no delta_bar for edge {edge_name(key)}")
        # shared slots keep the tightest bound over their edges
        hi[idx] = min(hi[idx], np.log(bar))
        lo[idx] = min(hi[idx] + log_floor, lo[idx]) if lo[idx] != -CERT_BOX else hi[idx] + log_floor
    return lo, hi


def _cost_posynomial(net: BufferNetwork, cost: CostModel, vmap: VariableMap) -> Posynomial:
    terms: list[tuple[float, dict[int, float]]] = []
    for d in net.destinations_sorted:
        if d not in cost.g:
            raise NonPosynomialCost(f"cost model has no g term for destination {d}")
        for c, a in cost.g[d]:
            terms.append((c, {vmap.phi[d]: a}))
    for key in net.edge_keys:
        if key not in cost.h:
            raise NonPosynomialCost(f"cost model has no h term for edge {edge_name(key)}")
        for c, a in cost.h[key]:
            terms.append((c, {vmap.eta[key]: a}))
    return Posynomial.from_terms(vmap.space, terms)


def _diagonal_q_terms(
    net: BufferNetwork, vmap: VariableMap, mode: int, node: int
) -> list[tuple[float, dict[int, float]]]:
    """Terms of the diagonal decay at ``node`` (1-based): outflow rates plus
    destination decay plus the diagonal chain rate."""
    g = net.graphs[mode]
    pi = net.chain.Pi
    nu = vmap.nu[mode]
    terms: list[tuple[float, dict[int, float]]] = []
    for idx in g.out_edges[node]:
        e = g.edges[idx]
        terms.append((e.weight, {nu[node - 1]: 1.0, vmap.eta[e.key]: 1.0}))
    if node in g.destinations:
        terms.append((1.0, {nu[node - 1]: 1.0, vmap.phi[node]: 1.0}))
    if pi[mode, mode] < 0:
        terms.append((-pi[mode, mode], {nu[node - 1]: 1.0}))
    return terms


def build_l1_problem(
    net: BufferNetwork,
    cost: CostModel,
    bounds: ParamBounds,
    share_eta: bool = False,
    floor_ratio: float = DEFAULT_FLOOR_RATIO,
) -> tuple[DCProgram, VariableMap]:
    """Gain-minimization program: minimize gamma subject to the certificate
    rows, the input columns, the cost budget, and the parameter box."""
    if not net.destinations_sorted:
        raise EmptyDestinations("network has no destinations")
    if cost.budget is None or not cost.budget > 0:
        raise ValueError("cost model must carry a positive budget for the gain-minimization problem")
    vmap = _registry(net, include_gamma=True, share_eta=share_eta)
    space = vmap.space
    pi = net.chain.Pi
    constraints: list[DCConstraint] = []

    for i in range(net.N):
        g = net.graphs[i]
        nu = vmap.nu[i]
        for k in range(net.n):
            node = k + 1
            p_terms: list[tuple[float, dict[int, float]]] = []
            for idx in g.out_edges[node]:
                e = g.edges[idx]
                p_terms.append((e.weight, {nu[e.head - 1]: 1.0, vmap.eta[e.key]: 1.0}))
            for j in range(net.N):
                if j != i and pi[i, j] > 0:
                    p_terms.append((pi[i, j], {vmap.nu[j][k]: 1.0}))
            p_terms.append((1.0, {}))  # identity block of the output column sum
            if net.alpha > 0:
                for idx in g.out_edges[node]:
                    e = g.edges[idx]
                    p_terms.append((net.alpha * e.weight, {vmap.eta[e.key]: 1.0}))
            q_terms = _diagonal_q_terms(net, vmap, i, node)
            constraints.append(
                DCConstraint(
                    Posynomial.from_terms(space, p_terms),
                    Posynomial.from_terms(space, q_terms),
                    label=f"mode{i}/col{node}",
                )
            )
        for c, origin in enumerate(net.origins_sorted):
            constraints.append(
                DCConstraint(
                    Posynomial.monomial(space, 1.0, {nu[origin - 1]: 1.0}),
                    Posynomial.monomial(space, 1.0, {vmap.gamma: 1.0}),
                    label=f"mode{i}/in{c}",
                )
            )

    constraints.append(
        DCConstraint(
            _cost_posynomial(net, cost, vmap),
            Posynomial.constant(space, cost.budget),
            label="budget",
        )
    )

    lo, hi = _box_bounds(net, vmap, bounds, floor_ratio)
    objective = Posynomial.monomial(space, 1.0, {vmap.gamma: 1.0})
    prog = DCProgram(space, objective, tuple(constraints), lo, hi)
    return prog, vmap


def build_linf_problem(
    net: BufferNetwork,
    cost: CostModel,
    bounds: ParamBounds,
    floor_ratio: float = DEFAULT_FLOOR_RATIO,
) -> tuple[DCProgram, VariableMap]:
    """Cost-minimization program under an Linf gain bound ``gamma_bound``."""
    if not net.destinations_sorted:
        raise EmptyDestinations("network has no destinations")
    if cost.gamma_bound is None:
        raise ValueError("cost model must carry gamma_bound for the cost-minimization problem")
    if not cost.gamma_bound > 0:
        raise NonpositiveGammaBound(f"gamma bound must be positive, got {cost.gamma_bound!r}")
    gamma_bar = cost.gamma_bound
    vmap = _registry(net, include_gamma=False, share_eta=False)
    space = vmap.space
    pi = net.chain.Pi
    constraints: list[DCConstraint] = []

    for i in range(net.N):
        g = net.graphs[i]
        nu = vmap.nu[i]
        for k in range(net.n):
            node = k + 1
            p_terms: list[tuple[float, dict[int, float]]] = []
            for idx in g.in_edges[node]:
                e = g.edges[idx]
                p_terms.append((e.weight, {nu[e.tail - 1]: 1.0, vmap.eta[e.key]: 1.0}))
            for j in range(net.N):
                if j != i and pi[i, j] > 0:
                    p_terms.append((pi[i, j], {vmap.nu[j][k]: 1.0}))
            if node in g.origins:
                p_terms.append((1.0, {}))  # Gin row sum
            q_terms = _diagonal_q_terms(net, vmap, i, node)
            constraints.append(
                DCConstraint(
                    Posynomial.from_terms(space, p_terms),
                    Posynomial.from_terms(space, q_terms),
                    label=f"mode{i}/row{node}",
                )
            )
        for k in range(net.n):
            constraints.append(
                DCConstraint(
                    Posynomial.monomial(space, 1.0, {nu[k]: 1.0}),
                    Posynomial.constant(space, gamma_bar),
                    label=f"mode{i}/out{k + 1}",
                )
            )
        if net.alpha > 0:
            for e in g.edges:
                constraints.append(
                    DCConstraint(
                        Posynomial.from_terms(
                            space,
                            [(net.alpha * e.weight, {vmap.eta[e.key]: 1.0, nu[e.tail - 1]: 1.0})],
                        ),
                        Posynomial.constant(space, gamma_bar),
                        label=f"mode{i}/out{edge_name(e.key)}",
                    )
                )

    lo, hi = _box_bounds(net, vmap, bounds, floor_ratio)
    objective = _cost_posynomial(net, cost, vmap)
    prog = DCProgram(space, objective, tuple(constraints), lo, hi)
    return prog, vmap


def build_gp_baseline(
    net: BufferNetwork,
    cost: CostModel,
    bounds: ParamBounds,
    floor_ratio: float = DEFAULT_FLOOR_RATIO,
) -> tuple[DCProgram, VariableMap]:
    """Gain-minimization baseline with one shared flow multiplier per node.

    Equivalent to adding ``delta_ij = delta_ik`` for all out-edges of every
    node; the feasible set shrinks, so its optimum can only be no better
    than the unrestricted one.
    """
    return build_l1_problem(net, cost, bounds, share_eta=True, floor_ratio=floor_ratio)


def extract_solution(w: np.ndarray, vmap: VariableMap, bounds: ParamBounds | None = None) -> TuningParams:
    """Exponentiate the decay/flow slots back into physical parameters.

    Values may exceed their bounds only by floating-point slack (1e-9
    relative); anything larger raises :class:`BoundViolation`.
    """
    w = np.asarray(w, dtype=float)
    beta = {d: float(np.exp(w[idx])) for d, idx in vmap.phi.items()}
    delta = {key: float(np.exp(w[idx])) for key, idx in vmap.eta.items()}
    if bounds is not None:
        for d, val in beta.items():
            bar = bounds.beta_bar.get(d)
            if bar is not None:
                if val > bar * (1 + 1e-9):
                    raise BoundViolation(f"beta[{d}] = {val!r} exceeds bound {bar!r}")
                beta[d] = min(val, bar)
        for key, val in delta.items():
            bar = bounds.delta_bar.get(key)
            if bar is not None:
                if val > bar * (1 + 1e-9):
                    raise BoundViolation(f"delta[{edge_name(key)}] = {val!r} exceeds bound {bar!r}")
                delta[key] = min(val, bar)
    return TuningParams(beta, delta, bounds)


def _informed_starts(
    net: BufferNetwork,
    bounds: ParamBounds,
    prog: DCProgram,
    vmap: VariableMap,
    opts: SolveOptions,
    norm: str,
) -> list[np.ndarray]:
    """Multistart points: log-uniform parameter samples inside the box (the
    first start at the box midpoint), certificates seeded from the gain LP of
    the sampled parameters whenever they give a stable system."""
    rng = np.random.default_rng(opts.seed)
    lo, hi = prog.lower, prog.upper
    param_slots = list(vmap.phi_indices) + list(vmap.eta_indices)
    starts: list[np.ndarray] = []
    for k in range(opts.multistarts):
        w = np.zeros(vmap.space.size)
        if k == 0:
            for idx in param_slots:
                w[idx] = 0.5 * (lo[idx] + hi[idx])
        else:
            for idx in param_slots:
                w[idx] = rng.uniform(lo[idx], hi[idx])
        params = extract_solution(w, vmap, bounds)
        report = stability_check(net, params)
        if report.stable:
            try:
                gain = l1_gain(net, params) if norm == "l1" else linf_gain(net, params)
            except Exception:
                gain = None
            if gain is not None:
                for i, block in enumerate(vmap.nu):
                    logs = np.log(np.maximum(gain.certificates[i], 1e-15))
                    for k_node, idx in enumerate(block):
                        w[idx] = logs[k_node]
                if vmap.gamma is not None:
                    w[vmap.gamma] = np.log(max(gain.gamma, 1e-15))
        starts.append(np.clip(w, lo, hi))
    return starts


@dataclass
class OptimizationResult:
    params: TuningParams
    gamma: float
    cost: float
    objective: float
    solution: DCSolution
    vmap: VariableMap
    norm: str
    gain_report: GainReport


def optimize_l1(
    net: BufferNetwork,
    cost: CostModel,
    bounds: ParamBounds,
    opts: SolveOptions | None = None,
    gp_baseline: bool = False,
) -> OptimizationResult:
    """Minimize the L1 gain under the budget; re-validates the winner through
    the gain LP and fails loudly if the certified gain exceeds the solver's."""
    opts = opts or SolveOptions()
    builder = build_gp_baseline if gp_baseline else build_l1_problem
    prog, vmap = builder(net, cost, bounds)
    starts = _informed_starts(net, bounds, prog, vmap, opts, "l1")
    sol = solve_dc(prog, opts, starts=starts)
    params = extract_solution(sol.w, vmap, bounds)
    report = l1_gain(net, params)
    if report.gamma > sol.objective + 1e-6 * max(1.0, sol.objective):
        raise RevalidationFailed(
            f"LP gain {report.gamma:.9g} exceeds solver objective {sol.objective:.9g}"
        )
    return OptimizationResult(
        params=params,
        gamma=report.gamma,
        cost=cost.value(params),
        objective=sol.objective,
        solution=sol,
        vmap=vmap,
        norm="l1",
        gain_report=report,
    )


def optimize_linf(
    net: BufferNetwork,
    cost: CostModel,
    bounds: ParamBounds,
    opts: SolveOptions | None = None,
) -> OptimizationResult:
    """Minimize the tuning cost under the Linf gain bound; re-validates that
    the achieved LP gain honors the bound."""
    opts = opts or SolveOptions()
    prog, vmap = build_linf_problem(net, cost, bounds)
    starts = _informed_starts(net, bounds, prog, vmap, opts, "linf")
    sol = solve_dc(prog, opts, starts=starts)
    params = extract_solution(sol.w, vmap, bounds)
    report = linf_gain(net, params)
    assert cost.gamma_bound is not None
    if report.gamma > cost.gamma_bound * (1 + 1e-6) + 1e-9:
        raise RevalidationFailed(
            f"LP gain {report.gamma:.9g} violates the bound {cost.gamma_bound:.9g}"
        )
    return OptimizationResult(
        params=params,
        gamma=report.gamma,
        cost=cost.value(params),
        objective=sol.objective,
        solution=sol,
        vmap=vmap,
        norm="linf",
        gain_report=report,
    )


def compare_gp(
    net: BufferNetwork,
    cost: CostModel,
    bounds: ParamBounds,
    budgets: Sequence[float],
    opts: SolveOptions | None = None,
) -> list[dict[str, float]]:
    """Budget sweep comparing the unrestricted optimum against the GP baseline.

    Returns one row per budget with the two gains and their ratio.
    """
    import dataclasses

    rows = []
    for budget in budgets:
        cost_b = dataclasses.replace(cost, budget=float(budget))
        dc = optimize_l1(net, cost_b, bounds, opts)
        gp = optimize_l1(net, cost_b, bounds, opts, gp_baseline=True)
        rows.append(
            {
                "budget": float(budget),
                "gamma_dc": dc.gamma,
                "gamma_gp": gp.gamma,
                "ratio": dc.gamma / gp.gamma,
            }
        )
    return rows
