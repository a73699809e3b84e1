import numpy as np
import pytest

from buffernet.dcsolve import (
    DCProgram,
    NoFeasiblePointFound,
    SolveOptions,
    convexify,
    solve_dc,
    solve_subproblem,
)
from buffernet.posylog import DCConstraint, Posynomial, VariableSpace

LOG2 = float(np.log(2.0))


def affine_lower_bound_program(c: float) -> DCProgram:
    # minimize x subject to x >= exp(c), in log variables: monomial constraint
    sp = VariableSpace(("x",))
    con = DCConstraint(
        Posynomial.monomial(sp, np.exp(c)),  # exp(c) <= x
        Posynomial.monomial(sp, 1.0, {0: 1.0}),
    )
    return DCProgram(
        sp,
        Posynomial.monomial(sp, 1.0, {0: 1.0}),
        (con,),
        np.array([-20.0]),
        np.array([20.0]),
    )


def e1_budget_program(budget: float = 3.0):
    """Hand-built gain-minimization program for the 2-node chain:
    min gamma s.t. delta*v2 + 1 <= delta*v1, 1 <= beta*v2, v1 <= gamma,
    beta + delta <= budget, beta, delta <= 2."""
    sp = VariableSpace(("gamma", "nu1", "nu2", "phi", "eta"))
    G, N1, N2, PH, ET = range(5)
    cons = (
        DCConstraint(
            Posynomial.from_terms(sp, [(1.0, {N2: 1, ET: 1}), (1.0, {})]),
            Posynomial.monomial(sp, 1.0, {N1: 1, ET: 1}),
            "col1",
        ),
        DCConstraint(
            Posynomial.constant(sp, 1.0),
            Posynomial.monomial(sp, 1.0, {N2: 1, PH: 1}),
            "col2",
        ),
        DCConstraint(
            Posynomial.monomial(sp, 1.0, {N1: 1}),
            Posynomial.monomial(sp, 1.0, {G: 1}),
            "input",
        ),
        DCConstraint(
            Posynomial.from_terms(sp, [(1.0, {PH: 1}), (1.0, {ET: 1})]),
            Posynomial.constant(sp, budget),
            "budget",
        ),
    )
    lo = np.array([-40.0, -40.0, -40.0, np.log(2.0) - 14.0, np.log(2.0) - 14.0])
    hi = np.array([40.0, 40.0, 40.0, np.log(2.0), np.log(2.0)])
    return DCProgram(sp, Posynomial.monomial(sp, 1.0, {G: 1}), cons, lo, hi)


def two_mode_e1_program(budget: float = 3.0, rho: float = 1.0):
    """Same network switching between two identical modes with rate ``rho``:
    the diagonal chain term makes the concave sides two-term posynomials, so
    the program is genuinely DC, yet the optimum is the single-mode one."""
    sp = VariableSpace(("gamma", "n11", "n12", "n21", "n22", "phi", "eta"))
    G, A1, A2, B1, B2, PH, ET = range(7)
    cons = []
    for (x1, x2), (o1, o2) in (((A1, A2), (B1, B2)), ((B1, B2), (A1, A2))):
        cons.append(
            DCConstraint(
                Posynomial.from_terms(sp, [(1.0, {x2: 1, ET: 1}), (rho, {o1: 1}), (1.0, {})]),
                Posynomial.from_terms(sp, [(1.0, {x1: 1, ET: 1}), (rho, {x1: 1})]),
            )
        )
        cons.append(
            DCConstraint(
                Posynomial.from_terms(sp, [(rho, {o2: 1}), (1.0, {})]),
                Posynomial.from_terms(sp, [(1.0, {x2: 1, PH: 1}), (rho, {x2: 1})]),
            )
        )
        cons.append(
            DCConstraint(
                Posynomial.monomial(sp, 1.0, {x1: 1}),
                Posynomial.monomial(sp, 1.0, {G: 1}),
            )
        )
    cons.append(
        DCConstraint(
            Posynomial.from_terms(sp, [(1.0, {PH: 1}), (1.0, {ET: 1})]),
            Posynomial.constant(sp, budget),
        )
    )
    lo = np.full(7, -40.0)
    hi = np.full(7, 40.0)
    lo[PH] = lo[ET] = np.log(2.0) - 14.0
    hi[PH] = hi[ET] = np.log(2.0)
    return DCProgram(sp, Posynomial.monomial(sp, 1.0, {G: 1}), tuple(cons), lo, hi)


class TestConvexify:
    def test_monomial_q_is_exact_for_any_point(self):
        prog = e1_budget_program()
        rng = np.random.default_rng(0)
        for _ in range(5):
            wk = rng.normal(size=5)
            sub = convexify(prog, wk)
            w = rng.normal(size=5)
            ghat = sub.constraint_values(w)
            true = np.array([c.violation(w) for c in prog.constraints])
            assert np.abs(ghat - true).max() < 1e-10

    def test_majorizes_true_constraints(self):
        prog = two_mode_e1_program()
        rng = np.random.default_rng(1)
        wk = rng.normal(size=7)
        sub = convexify(prog, wk)
        # exact at the linearization point
        assert np.abs(
            sub.constraint_values(wk) - np.array([c.violation(wk) for c in prog.constraints])
        ).max() < 1e-10
        for _ in range(200):
            w = rng.normal(scale=2.0, size=7)
            ghat = sub.constraint_values(w)
            true = np.array([c.violation(w) for c in prog.constraints])
            assert np.all(ghat >= true - 1e-10)

    def test_feasible_point_gets_zero_optimal_slack(self):
        prog = affine_lower_bound_program(0.5)
        w_feas = np.array([2.0])  # x = e^2 > e^0.5, margin well over 0.1
        sub = convexify(prog, w_feas)
        res = solve_subproblem(sub, penalty=100.0, warm_start=w_feas)
        assert res.slacks.max() < 1e-6


class TestSubproblem:
    def test_affine_bound_solved_exactly(self):
        for c in (0.0, 0.5, -1.2):
            prog = affine_lower_bound_program(c)
            sub = convexify(prog, np.zeros(1))
            res = solve_subproblem(sub, penalty=50.0)
            assert res.w[0] == pytest.approx(c, abs=1e-6)
            assert res.kkt_residual < 1e-4

    def test_descent_from_feasible_start(self):
        prog = e1_budget_program()
        w0 = np.array([np.log(3.0), np.log(2.5), np.log(1.2), 0.0, 0.0])  # feasible
        assert max(c.violation(w0) for c in prog.constraints) <= 0
        sub = convexify(prog, w0)
        res = solve_subproblem(sub, penalty=50.0, warm_start=w0)
        f0_start = sub.objective_value_grad(w0)[0]
        f0_end = sub.objective_value_grad(res.w)[0]
        assert f0_end <= f0_start + 1e-9

    def test_multipliers_nonnegative(self):
        prog = e1_budget_program()
        sub = convexify(prog, np.zeros(5))
        res = solve_subproblem(sub, penalty=10.0)
        for vals in res.multipliers.values():
            assert np.all(vals >= 0)


class TestSolveDC:
    def test_gp_case_one_outer_iteration(self):
        prog = e1_budget_program(budget=3.0)
        assert prog.is_gp_equivalent
        sol = solve_dc(prog, SolveOptions(seed=1))
        assert len(sol.trace.rows) == 1
        assert sol.objective == pytest.approx(4.0 / 3.0, rel=1e-6)
        assert sol.feasible and sol.guarantee == "local"

    def test_two_mode_dc_recovers_known_optimum(self):
        prog = two_mode_e1_program(budget=3.0)
        assert not prog.is_gp_equivalent
        sol = solve_dc(prog, SolveOptions(seed=2, multistarts=4))
        assert sol.objective == pytest.approx(4.0 / 3.0, rel=1e-2)
        assert sol.max_violation <= 1e-8
        # returned point satisfies the original constraints, not a relaxation
        assert max(c.violation(sol.w) for c in prog.constraints) <= 1e-8

    def test_merit_nonincreasing_at_fixed_penalty(self):
        prog = two_mode_e1_program(budget=3.0)
        sol = solve_dc(prog, SolveOptions(seed=3, multistarts=2))
        by_tau: dict[float, list[float]] = {}
        for row in sol.trace.rows:
            by_tau.setdefault(row.penalty, []).append(row.merit)
        for merits in by_tau.values():
            for a, b in zip(merits, merits[1:]):
                assert b <= a + 1e-7 * max(1.0, abs(a))

    def test_infeasible_program_detected(self):
        # gamma bound 0.4 forces delta >= 2.5 > 2 on the 2-node chain
        sp = VariableSpace(("n1", "n2", "phi", "eta"))
        N1, N2, PH, ET = range(4)
        cons = (
            DCConstraint(
                Posynomial.constant(sp, 1.0),
                Posynomial.monomial(sp, 1.0, {ET: 1, N1: 1}),
            ),
            DCConstraint(
                Posynomial.monomial(sp, 1.0, {ET: 1, N1: 1}),
                Posynomial.monomial(sp, 1.0, {PH: 1, N2: 1}),
            ),
            DCConstraint(Posynomial.monomial(sp, 1.0, {N1: 1}), Posynomial.constant(sp, 0.4)),
            DCConstraint(Posynomial.monomial(sp, 1.0, {N2: 1}), Posynomial.constant(sp, 0.4)),
        )
        lo = np.array([-40.0, -40.0, np.log(2.0) - 14.0, np.log(2.0) - 14.0])
        hi = np.array([40.0, 40.0, np.log(2.0), np.log(2.0)])
        prog = DCProgram(
            sp,
            Posynomial.from_terms(sp, [(1.0, {PH: 1}), (1.0, {ET: 1})]),
            cons,
            lo,
            hi,
        )
        with pytest.raises(NoFeasiblePointFound):
            solve_dc(prog, SolveOptions(seed=4, multistarts=3))

    def test_deterministic_given_seed(self):
        prog = two_mode_e1_program(budget=2.8)
        opts = SolveOptions(seed=7, multistarts=3)
        s1 = solve_dc(prog, opts)
        s2 = solve_dc(prog, opts)
        assert s1.objective == s2.objective
        assert len(s1.trace.rows) == len(s2.trace.rows)
        assert np.array_equal(s1.w, s2.w)

    def test_trace_csv_columns(self, tmp_path):
        prog = e1_budget_program()
        sol = solve_dc(prog, SolveOptions(seed=0))
        path = tmp_path / "trace.csv"
        sol.trace.to_csv(str(path))
        lines = path.read_text().strip().splitlines()
        assert lines[0] == "iter,objective,violation,penalty"
        assert len(lines) == len(sol.trace.rows) + 1
