import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from nrowan.agent import (
    Agent,
    AgentConfig,
    ConfigError,
    QNetwork,
    default_config,
    epsilon_at,
    evaluate,
    k_frame,
    k_reward,
    objective,
    select_action,
    sync_target,
    td_target,
    train,
    train_step,
)
from nrowan.envs import CartPole, make_env
from nrowan.nn_core import AdamState, NumericError, ShapeError, finite_diff_check
from nrowan.replay import Batch


def small_net(rng, noisy=True, obs_dim=3, n_actions=2, hidden=(6, 5)):
    return QNetwork(obs_dim, n_actions, hidden, noisy, rng)


def random_batch(rng, n=8, obs_dim=3, n_actions=2, terminal_rate=0.3):
    return Batch(
        rng.normal(size=(n, obs_dim)),
        rng.integers(0, n_actions, n),
        rng.normal(size=n),
        rng.normal(size=(n, obs_dim)),
        rng.random(n) < terminal_rate,
    )


def constant_q_net(q):
    net = QNetwork(3, len(q), (4,), True, np.random.default_rng(0))
    for layer in net.linear_layers:
        layer.sigma_w[...] = 0.0
        layer.sigma_b[...] = 0.0
    out = net.output_layer
    out.mu_w[...] = 0.0
    out.mu_b[...] = q
    return net


class TestSelectAction:
    def test_noise_free_argmax(self, rng):
        net = constant_q_net([1.0, 3.0])
        assert all(select_action(net, rng.normal(size=3), rng) == 1 for _ in range(20))

    def test_tie_goes_to_lowest_index(self, rng):
        net = constant_q_net([2.0, 2.0, 2.0])
        assert select_action(net, rng.normal(size=3), rng) == 0

    def test_bias_shift_invariance(self):
        net = small_net(np.random.default_rng(1))
        obs = np.random.default_rng(2).normal(size=(30, 3))
        before = [select_action(net, o, np.random.default_rng(i)) for i, o in enumerate(obs)]
        net.output_layer.mu_b += 17.5
        after = [select_action(net, o, np.random.default_rng(i)) for i, o in enumerate(obs)]
        assert before == after

    def test_shape_error(self, rng):
        with pytest.raises(ShapeError):
            select_action(small_net(rng), np.zeros(4), rng)

    def test_resamples_noise(self, rng):
        net = small_net(rng)
        select_action(net, np.zeros(3), rng)
        first = net.output_layer.eps_w.copy()
        select_action(net, np.zeros(3), rng)
        assert not np.array_equal(first, net.output_layer.eps_w)

    def test_epsilon_schedule(self):
        cfg = AgentConfig(algorithm="dqn")
        assert epsilon_at(0, cfg) == 1.0
        assert epsilon_at(7500, cfg) == pytest.approx(0.505)
        assert epsilon_at(15_000, cfg) == pytest.approx(0.01)
        assert epsilon_at(29_000, cfg) == pytest.approx(0.01)


class TestSchedules:
    def test_frame_start(self):
        assert k_frame(0, 4.0, 5000) == 0.0

    def test_frame_limit(self):
        assert k_frame(1e7, 4.0, 5000) == pytest.approx(4.0)

    def test_frame_at_growth_constant(self):
        assert k_frame(5000, 4.0, 5000) == pytest.approx(4 * (1 - math.exp(-1)))
        assert k_frame(5000, 4.0, 5000) == pytest.approx(2.5285, abs=1e-4)

    def test_reward_anchors(self):
        assert k_reward(-200, -200, -110, 4.0) == 0.0
        assert k_reward(-110, -200, -110, 4.0) == 4.0
        assert k_reward(-155, -200, -110, 4.0) == pytest.approx(2.0)

    @given(st.floats(-1e4, 1e4), st.floats(0, 10))
    def test_reward_clamped(self, r, k_final):
        assert 0.0 <= k_reward(r, 0.0, 200.0, k_final) <= k_final

    @given(st.floats(0, 1e6), st.floats(0, 10))
    def test_frame_bounded(self, n, k_final):
        assert 0.0 <= k_frame(n, k_final, 5000.0) <= k_final


class TestTdTarget:
    def test_terminal_ignores_next_state(self, rng):
        net = small_net(rng)
        batch = Batch(np.zeros((1, 3)), np.array([0]), np.array([1.0]), np.full((1, 3), 1e6), np.array([True]))
        assert td_target(net, batch, 0.99)[0] == 1.0

    def test_myopic(self, rng):
        net = small_net(rng)
        batch = random_batch(rng, terminal_rate=0.0)
        np.testing.assert_array_equal(td_target(net, batch, 0.0), batch.rewards)

    def test_hand_evaluated(self):
        net = constant_q_net([2.0, -1.0])
        batch = Batch(np.zeros((1, 3)), np.array([0]), np.array([1.0]), np.ones((1, 3)), np.array([False]))
        assert td_target(net, batch, 0.99)[0] == pytest.approx(2.98)


def fd_error(online, target, batch, k):
    def loss_fn():
        loss, _, grad = objective(online, target, batch, k)
        return loss, online.split(grad)

    return finite_diff_check(online, loss_fn)


class TestTrainStep:
    @pytest.mark.parametrize("seed", range(4))
    @pytest.mark.parametrize("k", [0.0, 4.0])
    def test_combined_gradient_finite_differences(self, seed, k):
        rng = np.random.default_rng(seed)
        online, target = small_net(rng), small_net(rng)
        online.sample_noise(rng)
        target.sample_noise(rng)
        assert fd_error(online, target, random_batch(rng), k) < 1e-4

    def test_plain_network_gradient(self, rng):
        online, target = small_net(rng, noisy=False), small_net(rng, noisy=False)
        assert fd_error(online, target, random_batch(rng), 0.0) < 1e-4

    def test_k_zero_is_noisynet_update(self):
        def run(k):
            rng = np.random.default_rng(3)
            online, target = small_net(rng), small_net(rng)
            online.sample_noise(rng)
            target.sample_noise(rng)
            opt = AdamState(online.flat.shape, alpha=1e-3)
            train_step(online, target, random_batch(rng), k, opt)
            return online.flat.copy()

        assert run(0.0).tobytes() == run(-0.0).tobytes()

    def test_zero_td_error_only_shrinks_output_sigma(self, rng):
        online, target = small_net(rng), small_net(rng)
        online.sample_noise(rng)
        batch = random_batch(rng, terminal_rate=1.0)
        q = online.forward(batch.states)
        batch = batch._replace(rewards=q[np.arange(len(q)), batch.actions])
        before = {name: v.copy() for name, v in online.parameters().items()}
        opt = AdamState(online.flat.shape, alpha=1e-3)
        loss, D = train_step(online, target, batch, 4.0, opt)
        assert loss == pytest.approx(4.0 * D, abs=1e-20)
        out_sigma = {online.output_key("sigma_w"), online.output_key("sigma_b")}
        for name, value in online.parameters().items():
            if name in out_sigma:
                assert (np.abs(value) < np.abs(before[name])).all()
            else:
                np.testing.assert_array_equal(value, before[name])

    def test_gradient_separation(self, rng):
        online, target = small_net(rng), small_net(rng)
        online.sample_noise(rng)
        target.sample_noise(rng)
        batch = random_batch(rng)
        _, _, g0 = objective(online, target, batch, 0.0)
        g0 = g0.copy()
        _, _, g4 = objective(online, target, batch, 4.0)
        diff = online.split(g4 - g0)
        out_sigma = {online.output_key("sigma_w"), online.output_key("sigma_b")}
        for name, d in diff.items():
            if name in out_sigma:
                assert np.abs(d).min() > 0
            else:
                assert not d.any()

    @pytest.mark.filterwarnings("ignore::RuntimeWarning")
    def test_non_finite_loss(self, rng):
        online, target = small_net(rng), small_net(rng)
        batch = random_batch(rng)._replace(rewards=np.full(8, np.inf))
        with pytest.raises(NumericError):
            train_step(online, target, batch, 0.0, AdamState(online.flat.shape))


class TestSyncTarget:
    def test_equal_q_after_sync(self, rng):
        online, target = small_net(rng), small_net(rng)
        sync_target(online, target)
        online.zero_noise()
        target.zero_noise()
        x = rng.normal(size=(10, 3))
        np.testing.assert_array_equal(online.forward(x), target.forward(x))

    def test_deep_copy(self, rng):
        online, target = small_net(rng), small_net(rng)
        sync_target(online, target)
        snapshot = target.flat.copy()
        online.flat += 1.0
        np.testing.assert_array_equal(target.flat, snapshot)

    def test_noise_not_copied(self, rng):
        online, target = small_net(rng), small_net(rng)
        online.sample_noise(rng)
        sync_target(online, target)
        assert not target.output_layer.eps_w.any()

    def test_structure_mismatch(self, rng):
        with pytest.raises(ShapeError):
            sync_target(small_net(rng), small_net(rng, hidden=(6, 4)))

    def test_sync_count_over_budget(self):
        # learning disabled so only the counter arithmetic is exercised
        cfg = AgentConfig(frames=30_000, target_update=1000, learning_starts=30_000, hidden=(4,))
        assert train(CartPole(), cfg, seed=0).syncs == 30


class TestConfig:
    def test_defaults(self):
        cfg = default_config("nrowan", "mountaincar")
        assert cfg.alpha == 1e-3 and (cfg.inf_R, cfg.sup_R) == (-200, -110)
        assert default_config("nrowan", "cartpole").alpha == 1e-4

    @pytest.mark.parametrize(
        "overrides, field",
        [({"inf_R": 5, "sup_R": 5}, "inf_R"), ({"k_final": -1}, "k_final"), ({"capacity": 0}, "capacity"),
         ({"schedule": "cosine"}, "schedule"), ({"algorithm": "a3c"}, "algorithm")],
    )
    def test_invalid(self, overrides, field):
        with pytest.raises(ConfigError, match=field):
            AgentConfig(**overrides).validate()

    def test_unknown_override(self):
        with pytest.raises(ConfigError, match="learning_rate"):
            default_config("nrowan", "cartpole", learning_rate=1)


class TestTrain:
    def test_zero_budget(self):
        cfg = AgentConfig(frames=0)
        m = train(CartPole(), cfg, seed=3)
        fresh = Agent(cfg, 4, 2, seed=3)
        assert m.episodes == [] and m.frames == []
        assert m.agent.online.flat.tobytes() == fresh.online.flat.tobytes()

    def test_deterministic(self):
        cfg = default_config("nrowan", "cartpole", frames=400, hidden=(16, 16))
        a, b = train(CartPole(), cfg, 7), train(CartPole(), cfg, 7)
        assert a.episodes == b.episodes
        assert np.array_equal(np.array(a.frames), np.array(b.frames), equal_nan=True)
        assert a.agent.online.flat.tobytes() == b.agent.online.flat.tobytes()

    def test_k_zero_reduces_to_noisynet(self):
        nrowan = default_config("nrowan", "cartpole", frames=300, hidden=(16, 16), schedule="none")
        noisy = default_config("noisynet", "cartpole", frames=300, hidden=(16, 16))
        a, b = train(CartPole(), nrowan, 11), train(CartPole(), noisy, 11)
        assert a.agent.online.flat.tobytes() == b.agent.online.flat.tobytes()

    def test_schedule_logged_per_frame(self):
        cfg = default_config("nrowan", "cartpole", frames=600, hidden=(16, 16))
        m = train(CartPole(), cfg, 2)
        frames = np.array(m.frames)
        assert (np.diff(frames[:, 0]) > 0).all()
        ks = frames[:, 1]
        assert ((ks >= 0) & (ks <= cfg.k_final)).all()
        ends = {row[1] for row in m.episodes}
        starts = {1} | {t + 1 for t in ends}
        for t, k, *_ in m.frames:
            if t in starts:
                assert k == pytest.approx(4.0 / 200)
            elif t - 1 not in ends:
                assert k >= m.frames[t - 2][1]
        lo, hi = CartPole.return_bounds
        assert all(lo <= r <= hi for r in m.returns)

    def test_dqn_has_no_noise_term(self):
        m = train(CartPole(), default_config("dqn", "cartpole", frames=100, hidden=(8,)), 0)
        assert all(k == 0.0 and D == 0.0 for _, k, D, _ in m.frames)

    def test_frame_schedule(self):
        cfg = default_config("nrowan", "cartpole", frames=100, hidden=(8,), schedule="frame", growth_a=50.0)
        m = train(CartPole(), cfg, 0)
        for t, k, *_ in m.frames:
            assert k == pytest.approx(k_frame(t, 4.0, 50.0))

    def test_loss_starts_after_warmup(self):
        m = train(CartPole(), default_config("nrowan", "cartpole", frames=40, hidden=(8,)), 0)
        losses = [row[3] for row in m.frames]
        assert all(math.isnan(v) for v in losses[:32])
        assert all(math.isfinite(v) for v in losses[32:])


class FixedResetCartPole(CartPole):
    def reset(self, seed=None):
        return super().reset(0)


def test_evaluate_zero_sigma_is_deterministic():
    net = QNetwork(4, 2, (8,), True, np.random.default_rng(0))
    for layer in net.linear_layers:
        layer.sigma_w[...] = 0.0
        layer.sigma_b[...] = 0.0
    mean, std, returns = evaluate(net, FixedResetCartPole(), episodes=5, seed=3)
    assert std == 0.0 and len(set(returns)) == 1 and mean == returns[0]


def test_evaluate_counts_episodes():
    net = QNetwork(2, 3, (8,), False, np.random.default_rng(0))
    mean, std, returns = evaluate(net, make_env("mountaincar"), episodes=3, seed=0)
    assert len(returns) == 3 and mean == pytest.approx(np.mean(returns))
