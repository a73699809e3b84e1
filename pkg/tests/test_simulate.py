import numpy as np
import pytest
import scipy.linalg

from buffernet import (
    BufferNetwork,
    MarkovChain,
    PiecewiseConstantInput,
    TuningParams,
    empirical_gain,
    export_trajectory_csv,
    l1_gain,
    linf_gain,
    sample_mode_path,
    simulate_mjls,
)
from buffernet.gains import InvalidHorizon, ZeroInput
from buffernet.netmodel import assemble_system, build_graph
from tests.conftest import e1_graph, random_two_mode_net


def e1_setup(beta=1.0, delta=1.0):
    net = BufferNetwork.single(e1_graph())
    return net, TuningParams({2: beta}, {(1, 2): delta})


class TestDeterministicIntegration:
    def test_single_mode_matches_matrix_exponential(self):
        net, p = e1_setup()
        signal = PiecewiseConstantInput.constant([1.0])
        horizon = 3.0
        batch = simulate_mjls(net, p, signal, horizon, n_traj=2, seed=0, store_paths=2)
        sys0 = assemble_system(net, p, 0)
        aug = np.zeros((3, 3))
        aug[:2, :2] = sys0.A
        aug[:2, 2] = (sys0.Gin @ np.array([1.0])).ravel()
        for j, t in enumerate(batch.t):
            x_ref = scipy.linalg.expm(aug * t)[:2, 2]
            assert np.abs(batch.states[0, j] - x_ref).max() < 1e-6

    def test_zero_input_zero_state_stays_zero(self):
        net, p = e1_setup()
        batch = simulate_mjls(net, p, PiecewiseConstantInput.zero(1), 2.0, 3, seed=1)
        assert np.all(batch.states == 0.0)
        assert np.all(batch.mean_output == 0.0)

    def test_conservation_without_decay_or_input(self):
        # beta = 0 is outside the parameter intervals; 1e-12 leaks ~1e-11 mass
        # over the horizon, within the 1e-9 conservation tolerance
        g = build_graph(3, [(1, 2, 1.0), (2, 3, 2.0)], [1], [3])
        net = BufferNetwork.single(g)
        p = TuningParams({3: 1e-12}, {(1, 2): 1.0, (2, 3): 0.7})
        x0 = np.array([2.0, 1.0, 0.5])
        batch = simulate_mjls(
            net, p, PiecewiseConstantInput.zero(1), 5.0, 1, seed=0, x0=x0, store_paths=1
        )
        masses = batch.states[0].sum(axis=1)
        assert np.abs(masses - x0.sum()).max() < 1e-9

    def test_positivity_from_nonnegative_data(self):
        rng = np.random.default_rng(99)
        for _ in range(3):
            net, p = random_two_mode_net(rng)
            batch = simulate_mjls(
                net,
                p,
                PiecewiseConstantInput.constant(np.ones(net.s)),
                4.0,
                50,
                seed=7,
                x0=rng.uniform(0.0, 1.0, net.n),
            )
            assert batch.min_state >= -1e-9

    def test_step_respects_fastest_time_constant(self):
        net, p = e1_setup(beta=4.0)  # fastest diagonal rate 4
        batch = simulate_mjls(net, p, PiecewiseConstantInput.zero(1), 1.0, 1, seed=0)
        assert batch.step <= 1e-3 / 4.0 + 1e-15


class TestModeSampling:
    def test_empirical_generator_within_three_sigma(self):
        chain = MarkovChain([[-1.0, 1.0], [1.0, -1.0]])
        rng = np.random.default_rng(5150)
        times, modes = sample_mode_path(chain, 1.0e5, rng)
        assert len(times) > 50_000
        bounds = np.append(times, 1.0e5)
        occupancy = np.zeros(2)
        jumps = np.zeros((2, 2))
        for k in range(len(modes)):
            occupancy[modes[k]] += bounds[k + 1] - bounds[k]
            if k + 1 < len(modes):
                jumps[modes[k], modes[k + 1]] += 1
        for i, j in ((0, 1), (1, 0)):
            rate_hat = jumps[i, j] / occupancy[i]
            sigma = np.sqrt(jumps[i, j]) / occupancy[i]
            assert abs(rate_hat - 1.0) < 3 * sigma

    def test_single_mode_never_jumps(self):
        chain = MarkovChain([[0.0]])
        times, modes = sample_mode_path(chain, 10.0, np.random.default_rng(0))
        assert len(times) == 1 and modes[0] == 0

    def test_jump_times_strictly_increasing(self):
        chain = MarkovChain([[-2.0, 2.0], [0.7, -0.7]])
        times, _ = sample_mode_path(chain, 200.0, np.random.default_rng(3))
        assert np.all(np.diff(times) > 0)


class TestDeterminism:
    def test_same_seed_bitwise_identical(self, e2_net):
        p = TuningParams({2: 1.0}, {(1, 2): 1.0})
        sig = PiecewiseConstantInput.constant([1.0])
        b1 = simulate_mjls(e2_net, p, sig, 3.0, 40, seed=11)
        b2 = simulate_mjls(e2_net, p, sig, 3.0, 40, seed=11)
        assert np.array_equal(b1.mean_output, b2.mean_output)
        assert np.array_equal(b1.states, b2.states)
        assert np.array_equal(b1.traj_output_l1, b2.traj_output_l1)

    def test_different_seed_differs(self, e2_net):
        p = TuningParams({2: 1.0}, {(1, 2): 1.0})
        sig = PiecewiseConstantInput.constant([1.0])
        b1 = simulate_mjls(e2_net, p, sig, 3.0, 40, seed=11)
        b2 = simulate_mjls(e2_net, p, sig, 3.0, 40, seed=12)
        assert not np.array_equal(b1.mean_output, b2.mean_output)


class TestEmpiricalGain:
    def test_e1_pulse_approximates_l1_gain(self):
        net, p = e1_setup()
        sig = PiecewiseConstantInput.pulse(1, width=1e-3)
        batch = simulate_mjls(net, p, sig, 16.0, 4, seed=0)
        est = empirical_gain(batch, "l1")
        assert abs(est.value - 2.0) / 2.0 < 0.05

    def test_e1_constant_approximates_linf_gain(self):
        net, p = e1_setup()
        batch = simulate_mjls(net, p, PiecewiseConstantInput.constant([1.0]), 16.0, 4, seed=0)
        est = empirical_gain(batch, "linf")
        assert abs(est.value - 1.0) < 0.05

    def test_two_mode_estimates_match_lp_gains(self, e2_net):
        p = TuningParams({2: 1.0}, {(1, 2): 1.0})
        gamma1 = l1_gain(e2_net, p).gamma
        batch = simulate_mjls(e2_net, p, PiecewiseConstantInput.pulse(1, width=1e-3), 16.0, 2000, seed=3)
        est = empirical_gain(batch, "l1")
        assert abs(est.value - gamma1) / gamma1 < 0.05
        gammainf = linf_gain(e2_net, p).gamma
        batch2 = simulate_mjls(e2_net, p, PiecewiseConstantInput.constant([1.0]), 16.0, 2000, seed=4)
        est2 = empirical_gain(batch2, "linf")
        assert abs(est2.value - gammainf) / gammainf < 0.05

    def test_input_scaling_leaves_ratio_invariant(self):
        net, p = e1_setup()
        b1 = simulate_mjls(net, p, PiecewiseConstantInput.pulse(1, width=1e-3, amplitude=1.0), 8.0, 2, seed=0)
        b3 = simulate_mjls(net, p, PiecewiseConstantInput.pulse(1, width=1e-3, amplitude=3.0), 8.0, 2, seed=0)
        e1 = empirical_gain(b1, "l1")
        e3 = empirical_gain(b3, "l1")
        assert e1.value == pytest.approx(e3.value, rel=1e-12)

    def test_zero_input_rejected(self):
        net, p = e1_setup()
        batch = simulate_mjls(net, p, PiecewiseConstantInput.zero(1), 1.0, 2, seed=0)
        with pytest.raises(ZeroInput):
            empirical_gain(batch, "l1")
        with pytest.raises(ZeroInput):
            empirical_gain(batch, "linf")

    def test_invalid_horizon_rejected(self):
        net, p = e1_setup()
        with pytest.raises(InvalidHorizon):
            simulate_mjls(net, p, PiecewiseConstantInput.zero(1), 0.0, 2, seed=0)


class TestExport:
    def test_trajectory_csv_columns(self, tmp_path):
        net, p = e1_setup()
        batch = simulate_mjls(net, p, PiecewiseConstantInput.constant([1.0]), 1.0, 2, seed=0)
        path = tmp_path / "traj.csv"
        export_trajectory_csv(batch, 0, str(path))
        lines = path.read_text().strip().splitlines()
        assert lines[0] == "t,mode,x_1,x_2,y_1,y_2,y_3"
        assert len(lines) == len(batch.t) + 1
        first = lines[1].split(",")
        assert float(first[0]) == 0.0 and first[1] == "0"
