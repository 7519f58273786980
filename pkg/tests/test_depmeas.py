import numpy as np
import pytest

from netar import (
    FlipNetwork,
    InnovationSpec,
    MarkovEdgeNetwork,
    NarSpec,
    NeighborhoodFn,
    estimate_delta_network,
    estimate_delta_x,
)

from test_netdyn import example1_network_matrices
from test_model import example1_alpha


class TestNetworkCoupling:
    def test_deterministic_chain_has_zero_delta(self):
        m = MarkovEdgeNetwork(np.ones((2, 2)), np.zeros((2, 2)), initial=np.ones((2, 2)))
        run = estimate_delta_network(m, q=2, max_lag=6, reps=500, seed=0)
        assert (run.delta == 0).all()

    def test_single_edge_decay_ratio(self):
        # coupled chains coalesce iff the shared uniform falls outside
        # (enter, stay); survival probability per step is stay - enter = 0.9;
        # at q = 1 the estimated delta IS the difference probability
        m = MarkovEdgeNetwork(np.full((1, 1), 0.95), np.full((1, 1), 0.05))
        run = estimate_delta_network(m, q=1, max_lag=15, reps=100_000, seed=1)
        assert run.decay_ratio == pytest.approx(0.9, abs=0.03)
        assert run.raw_qth[0] > 0
        # exact geometric law for the underlying difference probability
        p0 = run.raw_qth[0]
        for j in range(1, 16):
            se = np.sqrt(run.raw_qth[j] * (1 - run.raw_qth[j]) / 100_000 + 1e-12)
            assert run.raw_qth[j] == pytest.approx(p0 * 0.9 ** j, abs=4 * se + 2e-3)

    def test_iid_network_forgets_immediately(self):
        m = MarkovEdgeNetwork(np.full((3, 3), 0.4), np.full((3, 3), 0.4))
        run = estimate_delta_network(m, q=2, max_lag=8, reps=2000, seed=2)
        assert run.delta[0] > 0
        assert (run.delta[1:] == 0).all()

    def test_flip_network_decay(self):
        run = estimate_delta_network(FlipNetwork(0.95), q=1, max_lag=12,
                                     reps=50_000, seed=3)
        # flip coupling survives with probability 0.9 each step as well
        assert run.decay_ratio == pytest.approx(0.9, abs=0.03)

    def test_q_only_rescales_binary_deltas(self):
        # binary differences make the averaged q-th power the plain
        # difference probability, identical across q under one seed
        m = MarkovEdgeNetwork(np.full((2, 2), 0.9), np.full((2, 2), 0.1))
        run1 = estimate_delta_network(m, q=1, max_lag=6, reps=5000, seed=4)
        run2 = estimate_delta_network(m, q=2, max_lag=6, reps=5000, seed=4)
        assert np.array_equal(run1.raw_qth, run2.raw_qth)
        mask = run1.raw_qth > 0
        assert (run2.delta[mask] >= run1.delta[mask] - 1e-12).all()

    def test_reps_guard(self):
        with pytest.raises(ValueError):
            estimate_delta_network(FlipNetwork(), q=2, max_lag=3, reps=1, seed=0)


class TestSeriesCoupling:
    def test_zero_coefficients_forget_after_lag_zero(self):
        d = 3
        spec = NarSpec(1, [np.zeros((d, d))], [NeighborhoodFn.transpose()])
        m = MarkovEdgeNetwork(np.full((d, d), 0.8), np.full((d, d), 0.1))
        run = estimate_delta_x(spec, m, InnovationSpec.standard(d), q=2,
                               max_lag=5, reps=1000, seed=5)
        assert run.delta[0] > 0
        assert (run.delta[1:] < 1e-12).all()

    def test_static_network_decay_matches_spectral_radius(self):
        # constant complete network, A = 0.5 I: only the time-0 noise redraw
        # propagates, scaled by A^j
        d = 3
        spec = NarSpec(1, [np.eye(d) * 0.5], [NeighborhoodFn.transpose()])
        m = MarkovEdgeNetwork(np.ones((d, d)), np.zeros((d, d)),
                              initial=np.ones((d, d)))
        run = estimate_delta_x(spec, m, InnovationSpec.standard(d), q=2,
                               max_lag=10, reps=3000, seed=6)
        assert run.decay_ratio == pytest.approx(0.5, abs=0.1)
        # exact halving per lag for this diagonal case
        for j in range(1, 11):
            assert run.delta[j] == pytest.approx(run.delta[j - 1] * 0.5, rel=1e-9)

    def test_example1_process_is_geometrically_stable(self):
        stay, enter = example1_network_matrices()
        net = MarkovEdgeNetwork(stay, enter)
        spec = NarSpec(1, [example1_alpha()], [NeighborhoodFn.identity()])
        innov = InnovationSpec(np.array([-1.0, 4.0, -9.0, 16.0]), np.eye(4))
        run = estimate_delta_x(spec, net, innov, q=2, max_lag=20, reps=4000, seed=7)
        assert np.isfinite(run.delta_total)
        assert run.decay_ratio < 1.0
        assert run.decay_r2 > 0.9
        # delta peaks at lag 1 (the redrawn network state starts to matter)
        # and then shrinks geometrically
        assert run.tail_value < run.delta.max() * 0.6

    def test_network_only_mode_keeps_shared_noise(self):
        # with zero coefficients the series is the innovations; redrawing only
        # the network cannot move it at all
        d = 2
        spec = NarSpec(1, [np.zeros((d, d))], [NeighborhoodFn.transpose()])
        m = MarkovEdgeNetwork(np.full((d, d), 0.7), np.full((d, d), 0.2))
        run = estimate_delta_x(spec, m, InnovationSpec.standard(d), q=2,
                               max_lag=4, reps=500, seed=8, mode="network_only")
        assert (run.delta == 0).all()

    def test_mode_validation(self):
        spec = NarSpec(1, [np.zeros((2, 2))], [NeighborhoodFn.transpose()])
        m = MarkovEdgeNetwork(np.full((2, 2), 0.5), np.full((2, 2), 0.5))
        with pytest.raises(ValueError, match="mode"):
            estimate_delta_x(spec, m, InnovationSpec.standard(2), q=2,
                             max_lag=2, reps=10, seed=0, mode="bogus")
