"""DQN, NoisyNet-DQN and NROWAN-DQN agents and the training loop.

NROWAN-DQN is NoisyNet-DQN with ``k * D`` added to the squared TD loss, where
``D`` is the mean absolute noise scale of the output layer and ``k`` follows
either the per-episode reward or the frame count.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, fields
from typing import Sequence

import numpy as np

from .envs import Env, make_env
from .nn_core import AdamState, DenseLayer, NumericError, ReLU, ShapeError, adam_step
from .noisy_layer import NoisyLinear, compute_D, grad_D
from .replay import Batch, ReplayBuffer, Transition

log = logging.getLogger(__name__)

ALGORITHMS = ("dqn", "noisynet", "nrowan")
SCHEDULES = ("reward", "frame", "none")

# Learning rates and reward anchors (inf_R, sup_R) per environment.
ENV_DEFAULTS = {
    "cartpole": {"alpha": 1e-4, "inf_R": 0.0, "sup_R": 200.0},
    "mountaincar": {"alpha": 1e-3, "inf_R": -200.0, "sup_R": -110.0},
    "acrobot": {"alpha": 1e-3, "inf_R": -500.0, "sup_R": -80.0},
}


class ConfigError(ValueError):
    pass


@dataclass
class AgentConfig:
    algorithm: str = "nrowan"
    gamma: float = 0.99
    alpha: float = 1e-4
    target_update: int = 1000
    learning_starts: int = 32
    capacity: int = 10_000
    frames: int = 30_000
    batch_size: int = 32
    k_final: float = 4.0
    growth_a: float = 5000.0
    inf_R: float = 0.0
    sup_R: float = 200.0
    sigma_0: float = 0.4
    schedule: str = "reward"
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 0.0
    hidden: tuple[int, ...] = (128, 128)
    eps_start: float = 1.0
    eps_end: float = 0.01
    eps_decay_frames: int = 15_000

    def validate(self) -> "AgentConfig":
        if self.algorithm not in ALGORITHMS:
            raise ConfigError(f"algorithm: {self.algorithm!r} not in {ALGORITHMS}")
        if self.schedule not in SCHEDULES:
            raise ConfigError(f"schedule: {self.schedule!r} not in {SCHEDULES}")
        if not self.inf_R < self.sup_R:
            raise ConfigError(f"inf_R/sup_R: need inf_R < sup_R, got {self.inf_R} >= {self.sup_R}")
        if self.k_final < 0:
            raise ConfigError(f"k_final: must be >= 0, got {self.k_final}")
        for name in ("target_update", "capacity", "batch_size", "eps_decay_frames"):
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name}: must be positive, got {getattr(self, name)}")
        for name in ("frames", "learning_starts"):
            if getattr(self, name) < 0:
                raise ConfigError(f"{name}: must be non-negative, got {getattr(self, name)}")
        if self.alpha <= 0 or self.growth_a <= 0:
            raise ConfigError("alpha/growth_a: must be positive")
        if not 0 <= self.gamma <= 1:
            raise ConfigError(f"gamma: must lie in [0, 1], got {self.gamma}")
        return self

    @property
    def noisy(self) -> bool:
        return self.algorithm != "dqn"

    @property
    def effective_schedule(self) -> str:
        return self.schedule if self.algorithm == "nrowan" else "none"


def default_config(algorithm: str, env: str, **overrides) -> AgentConfig:
    if env not in ENV_DEFAULTS:
        raise ConfigError(f"environment: unknown {env!r}")
    known = {f.name for f in fields(AgentConfig)}
    for name in overrides:
        if name not in known:
            raise ConfigError(f"{name}: not an agent setting")
    return AgentConfig(algorithm=algorithm, **{**ENV_DEFAULTS[env], **overrides}).validate()


class QNetwork:
    """Linear/ReLU stack; noisy layers for the noisy agents, plain otherwise."""

    def __init__(
        self,
        obs_dim: int,
        n_actions: int,
        hidden: Sequence[int] = (128, 128),
        noisy: bool = True,
        rng: np.random.Generator | None = None,
        sigma_0: float = 0.4,
    ):
        self.obs_dim = obs_dim
        self.n_actions = n_actions
        self.noisy = noisy
        sizes = [obs_dim, *hidden, n_actions]
        self.layers: list = []
        for i, (p, q) in enumerate(zip(sizes[:-1], sizes[1:])):
            if noisy:
                self.layers.append(NoisyLinear(p, q, rng, sigma_0))
            else:
                self.layers.append(DenseLayer(p, q, rng))
            if i < len(sizes) - 2:
                self.layers.append(ReLU())
        # Re-home every parameter array as a view of one flat vector so the
        # optimizer and target sync touch a single buffer.
        named = [(layer, name, value) for layer in self.layers for name, value in layer.parameters().items()]
        self.flat = np.concatenate([value.ravel() for _, _, value in named]) if named else np.zeros(0)
        offset = 0
        for layer, name, value in named:
            view = self.flat[offset:offset + value.size].reshape(value.shape)
            setattr(layer, name, view)
            offset += value.size

    @property
    def linear_layers(self) -> list:
        return [layer for layer in self.layers if not isinstance(layer, ReLU)]

    @property
    def output_layer(self):
        return self.layers[-1]

    def forward(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        if x.shape[-1] != self.obs_dim:
            raise ShapeError(f"observation has dimension {x.shape[-1]}, network expects {self.obs_dim}")
        for layer in self.layers:
            x = layer.forward(x)
        return x

    __call__ = forward

    def backward(self, grad_out: np.ndarray) -> None:
        g = grad_out
        for layer in reversed(self.layers):
            if isinstance(layer, DenseLayer):
                g = layer.backward(g)[2]
            else:
                g = layer.backward(g)

    def sample_noise(self, rng: np.random.Generator) -> None:
        if self.noisy:
            for layer in self.linear_layers:
                layer.sample_noise(rng)

    def zero_noise(self) -> None:
        if self.noisy:
            for layer in self.linear_layers:
                layer.zero_noise()

    def parameters(self) -> dict[str, np.ndarray]:
        return {
            f"{i}.{name}": value
            for i, layer in enumerate(self.layers)
            for name, value in layer.parameters().items()
        }

    def grads(self) -> dict[str, np.ndarray]:
        return {
            f"{i}.{name}": value
            for i, layer in enumerate(self.layers)
            if not isinstance(layer, ReLU)
            for name, value in layer.grads.items()
        }

    def flat_grad(self) -> np.ndarray:
        return np.concatenate(
            [layer.grads[name].ravel() for layer in self.linear_layers for name in layer.parameters()]
        )

    def split(self, flat: np.ndarray) -> dict[str, np.ndarray]:
        """View a flat vector laid out like ``self.flat`` as named arrays."""
        out, offset = {}, 0
        for name, value in self.parameters().items():
            out[name] = flat[offset:offset + value.size].reshape(value.shape)
            offset += value.size
        return out

    def output_key(self, name: str) -> str:
        return f"{len(self.layers) - 1}.{name}"

    def noise_level(self) -> float:
        return compute_D(self.output_layer) if self.noisy else 0.0


def sync_target(online: QNetwork, target: QNetwork) -> None:
    """Copy every learnable parameter from ``online`` into ``target`` (noise excluded)."""
    src, dst = online.parameters(), target.parameters()
    if src.keys() != dst.keys() or any(src[k].shape != dst[k].shape for k in src):
        raise ShapeError("online and target networks differ in structure")
    np.copyto(target.flat, online.flat)




def k_frame(n_frames: float, k_final: float, a: float) -> float:
    return k_final - k_final * math.exp(-n_frames / a)


def k_reward(r_plus: float, inf_R: float, sup_R: float, k_final: float) -> float:
    k = k_final * (r_plus - inf_R) / (sup_R - inf_R)
    return min(max(k, 0.0), k_final)


def epsilon_at(frame: int, cfg: AgentConfig) -> float:
    frac = min(frame / cfg.eps_decay_frames, 1.0)
    return cfg.eps_start + frac * (cfg.eps_end - cfg.eps_start)


def select_action(net: QNetwork, obs, rng: np.random.Generator, epsilon: float = 0.0) -> int:
    """Greedy action after resampling noise (noisy nets) or epsilon-greedy (plain nets).

    Ties go to the lowest action index.
    """
    if epsilon > 0.0 and rng.random() < epsilon:
        return int(rng.integers(net.n_actions))
    net.sample_noise(rng)
    return int(np.argmax(net.forward(obs)))


def td_target(target_net: QNetwork, batch: Batch, gamma: float) -> np.ndarray:
    q_next = target_net.forward(batch.next_states).max(axis=1)
    return np.where(batch.terminals, batch.rewards, batch.rewards + gamma * q_next)


def td_loss_and_grad(online: QNetwork, batch: Batch, targets: np.ndarray) -> tuple[float, np.ndarray]:
    q = online.forward(batch.states)
    n = len(targets)
    rows = np.arange(n)
    err = targets - q[rows, batch.actions]
    grad_out = np.zeros_like(q)
    grad_out[rows, batch.actions] = -2.0 * err / n
    return float(np.mean(err * err)), grad_out


def objective(online: QNetwork, target: QNetwork, batch: Batch, k: float, gamma: float = 0.99):
    """Loss ``mean squared TD error + k * D`` and its gradient, without updating.

    Uses whatever noise is currently set on both networks. Returns
    ``(loss, D, flat_grad)`` with ``flat_grad`` aligned to ``online.flat``.
    """
    targets = td_target(target, batch, gamma)
    td, grad_out = td_loss_and_grad(online, batch, targets)
    D = online.noise_level()
    loss = td + k * D
    online.backward(grad_out)
    out = online.output_layer
    if k != 0.0 and online.noisy:
        for name, g in grad_D(out).items():
            out.grads[name] = out.grads[name] + k * g
    return loss, D, online.flat_grad()


def train_step(online: QNetwork, target: QNetwork, batch: Batch, k: float, optimizer: AdamState, gamma: float = 0.99):
    """One Adam step on ``mean squared TD error + k * D``.

    The caller samples noise on both networks beforehand. Returns the loss and
    the value of D it was evaluated at.
    """
    loss, D, grad = objective(online, target, batch, k, gamma)
    if not np.isfinite(loss):
        raise NumericError(f"non-finite loss {loss}")
    adam_step(optimizer, online.flat, grad)
    return loss, D


@dataclass
class RunMetrics:
    episodes: list[tuple[int, int, float, int]] = field(default_factory=list)
    frames: list[tuple[int, float, float, float]] = field(default_factory=list)
    eval_returns: list[float] = field(default_factory=list)
    eval_mean: float = float("nan")
    eval_std: float = float("nan")
    syncs: int = 0
    agent: "Agent | None" = field(default=None, repr=False, compare=False)

    @property
    def returns(self) -> list[float]:
        return [row[2] for row in self.episodes]


class Agent:
    """Networks, replay memory, optimizer and schedule state for one run."""

    def __init__(self, config: AgentConfig, obs_dim: int, n_actions: int, seed: int):
        self.config = config.validate()
        init_seq, noise_seq, replay_seq, explore_seq, env_seq = np.random.SeedSequence(seed).spawn(5)
        self.noise_rng = np.random.default_rng(noise_seq)
        self.replay_rng = np.random.default_rng(replay_seq)
        self.explore_rng = np.random.default_rng(explore_seq)
        self.env_seed = int(env_seq.generate_state(1)[0])
        init_rng = np.random.default_rng(init_seq)
        self.online = QNetwork(obs_dim, n_actions, config.hidden, config.noisy, init_rng, config.sigma_0)
        self.target = QNetwork(obs_dim, n_actions, config.hidden, config.noisy, None, config.sigma_0)
        sync_target(self.online, self.target)
        self.buffer = ReplayBuffer(config.capacity, obs_dim)
        self.optimizer = AdamState(
            self.online.flat.shape, alpha=config.alpha, beta1=config.beta1, beta2=config.beta2, epsilon=config.adam_eps
        )
        self.frame_count = 0
        self.r_plus = 0.0
        self.current_k = 0.0

    def act(self, obs) -> int:
        if self.config.noisy:
            return select_action(self.online, obs, self.noise_rng)
        eps = epsilon_at(self.frame_count, self.config)
        return select_action(self.online, obs, self.explore_rng, eps)

    def schedule_k(self) -> float:
        cfg = self.config
        kind = cfg.effective_schedule
        if kind == "reward":
            return k_reward(self.r_plus, cfg.inf_R, cfg.sup_R, cfg.k_final)
        if kind == "frame":
            return k_frame(self.frame_count, cfg.k_final, cfg.growth_a)
        return 0.0

    def learn(self, k: float) -> tuple[float, float]:
        batch = self.buffer.sample_batch(self.config.batch_size, self.replay_rng)
        self.online.sample_noise(self.noise_rng)
        self.target.sample_noise(self.noise_rng)
        return train_step(self.online, self.target, batch, k, self.optimizer, self.config.gamma)


def train(env: Env | str, config: AgentConfig, seed: int) -> RunMetrics:
    """Run the full interaction/learning loop for ``config.frames`` frames."""
    if isinstance(env, str):
        env = make_env(env)
    config.validate()
    agent = Agent(config, env.obs_dim, env.n_actions, seed)
    metrics = RunMetrics(agent=agent)
    if config.frames == 0:
        return metrics

    obs = env.reset(agent.env_seed).observation
    episode, ep_return, ep_start = 0, 0.0, 1
    for t in range(1, config.frames + 1):
        agent.frame_count = t - 1
        action = agent.act(obs)
        next_obs, reward, terminal = env.step(action)
        agent.buffer.push(Transition(obs, action, reward, next_obs, terminal))
        agent.frame_count = t
        D = agent.online.noise_level()
        agent.r_plus += reward
        k = agent.current_k = agent.schedule_k()
        ep_return += reward
        if terminal:
            metrics.episodes.append((episode, t, ep_return, t - ep_start + 1))
            agent.r_plus = 0.0
            episode, ep_return, ep_start = episode + 1, 0.0, t + 1
            obs = env.reset().observation
        else:
            obs = next_obs
        loss = float("nan")
        if t > config.learning_starts and len(agent.buffer) >= config.batch_size:
            loss, _ = agent.learn(k)
        if t % config.target_update == 0:
            sync_target(agent.online, agent.target)
            metrics.syncs += 1
        metrics.frames.append((t, k, D, loss))
        if terminal and episode % 50 == 0:
            log.debug("frame %d episode %d return %.1f k %.3f D %.5f", t, episode, metrics.episodes[-1][2], k, D)
    return metrics


def evaluate(
    net: QNetwork,
    env: Env | str,
    episodes: int = 64,
    seed: int = 0,
    epsilon: float | None = None,
) -> tuple[float, float, list[float]]:
    """Mean and standard deviation of undiscounted returns over ``episodes`` episodes.

    Noisy networks keep resampling noise every step; plain networks act
    epsilon-greedily with the 0.01 floor unless ``epsilon`` is given.
    """
    if isinstance(env, str):
        env = make_env(env)
    if epsilon is None:
        epsilon = 0.0 if net.noisy else 0.01
    env_seed, act_seed = np.random.SeedSequence(seed).spawn(2)
    rng = np.random.default_rng(act_seed)
    returns = []
    obs = env.reset(int(env_seed.generate_state(1)[0])).observation
    for _ in range(episodes):
        total, done = 0.0, False
        while not done:
            obs, reward, done = env.step(select_action(net, obs, rng, epsilon))
            total += reward
        returns.append(total)
        obs = env.reset().observation
    return float(np.mean(returns)), float(np.std(returns)), returns


def train_and_evaluate(env_name: str, config: AgentConfig, seed: int, eval_episodes: int = 64) -> RunMetrics:
    metrics = train(make_env(env_name), config, seed)
    mean, std, returns = evaluate(metrics.agent.online, make_env(env_name), eval_episodes, seed + 1_000_003)
    metrics.eval_mean, metrics.eval_std, metrics.eval_returns = mean, std, returns
    return metrics

