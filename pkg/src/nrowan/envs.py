"""CartPole, MountainCar and Acrobot with seeded resets.

All three follow the classic-control benchmark dynamics. ``step`` returns
``StepResult(observation, reward, terminal)``; ``terminal`` is set by either
the failure/goal rule or the episode step cap.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .nn_core import StateError


class StepResult(NamedTuple):
    observation: np.ndarray
    reward: float
    terminal: bool


@dataclass
class EnvState:
    observation: np.ndarray
    step_index: int


class Env:
    name: str = ""
    obs_dim: int = 0
    n_actions: int = 0
    max_steps: int = 0
    return_bounds: tuple[float, float] = (0.0, 0.0)

    def __init__(self, seed: int | None = None):
        self.rng = np.random.default_rng(seed)
        self.state: np.ndarray | None = None
        self.step_index = 0
        self.done = True

    def reset(self, seed: int | None = None) -> EnvState:
        if seed is not None:
            self.rng = np.random.default_rng(seed)
        self.state = self._initial_state()
        self.step_index = 0
        self.done = False
        return EnvState(self.observation(), 0)

    def step(self, action: int) -> StepResult:
        if self.done:
            raise StateError(f"{self.name}: step called on a terminal state; call reset()")
        if not 0 <= int(action) < self.n_actions:
            raise ValueError(f"{self.name}: invalid action {action}")
        reward, failed = self._advance(int(action))
        self.step_index += 1
        self.done = failed or self.step_index >= self.max_steps
        return StepResult(self.observation(), reward, self.done)

    def observation(self) -> np.ndarray:
        return self.state.copy()

    def _initial_state(self) -> np.ndarray:
        raise NotImplementedError

    def _advance(self, action: int) -> tuple[float, bool]:
        raise NotImplementedError


class CartPole(Env):
    name = "cartpole"
    obs_dim = 4
    n_actions = 2
    max_steps = 200
    return_bounds = (1.0, 200.0)

    gravity = 9.8
    masscart = 1.0
    masspole = 0.1
    length = 0.5  # half the pole length
    force_mag = 10.0
    tau = 0.02
    theta_threshold = 12 * 2 * math.pi / 360
    x_threshold = 2.4

    def _initial_state(self):
        return self.rng.uniform(-0.05, 0.05, 4)

    def _advance(self, action):
        x, x_dot, theta, theta_dot = self.state
        total_mass = self.masspole + self.masscart
        polemass_length = self.masspole * self.length
        force = self.force_mag if action == 1 else -self.force_mag
        costheta, sintheta = math.cos(theta), math.sin(theta)
        temp = (force + polemass_length * theta_dot**2 * sintheta) / total_mass
        thetaacc = (self.gravity * sintheta - costheta * temp) / (
            self.length * (4.0 / 3.0 - self.masspole * costheta**2 / total_mass)
        )
        xacc = temp - polemass_length * thetaacc * costheta / total_mass
        x = x + self.tau * x_dot
        x_dot = x_dot + self.tau * xacc
        theta = theta + self.tau * theta_dot
        theta_dot = theta_dot + self.tau * thetaacc
        self.state = np.array([x, x_dot, theta, theta_dot])
        failed = abs(x) > self.x_threshold or abs(theta) > self.theta_threshold
        return 1.0, failed


class MountainCar(Env):
    name = "mountaincar"
    obs_dim = 2
    n_actions = 3
    max_steps = 200
    return_bounds = (-200.0, -1.0)

    min_position = -1.2
    max_position = 0.6
    max_speed = 0.07
    goal_position = 0.5
    force = 0.001
    gravity = 0.0025

    def _initial_state(self):
        return np.array([self.rng.uniform(-0.6, -0.4), 0.0])

    def _advance(self, action):
        position, velocity = self.state
        velocity += (action - 1) * self.force - self.gravity * math.cos(3 * position)
        velocity = min(max(velocity, -self.max_speed), self.max_speed)
        position += velocity
        position = min(max(position, self.min_position), self.max_position)
        if position == self.min_position and velocity < 0:
            velocity = 0.0
        self.state = np.array([position, velocity])
        return -1.0, position >= self.goal_position


def rk4(derivs, y0: np.ndarray, dt: float) -> np.ndarray:
    """One classical Runge-Kutta step."""
    k1 = derivs(y0)
    k2 = derivs(y0 + dt / 2 * k1)
    k3 = derivs(y0 + dt / 2 * k2)
    k4 = derivs(y0 + dt * k3)
    return y0 + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)


def _wrap(x: float) -> float:
    return (x + math.pi) % (2 * math.pi) - math.pi


class Acrobot(Env):
    """Two-link pendulum actuated at the middle joint (textbook dynamics)."""

    name = "acrobot"
    obs_dim = 6
    n_actions = 3
    max_steps = 500
    return_bounds = (-500.0, -1.0)

    dt = 0.2
    link_length_1 = 1.0
    link_mass_1 = 1.0
    link_mass_2 = 1.0
    link_com_pos_1 = 0.5
    link_com_pos_2 = 0.5
    link_moi = 1.0
    gravity = 9.8
    max_vel_1 = 4 * math.pi
    max_vel_2 = 9 * math.pi
    torques = (-1.0, 0.0, 1.0)

    def _initial_state(self):
        return self.rng.uniform(-0.1, 0.1, 4)

    def observation(self):
        t1, t2, d1, d2 = self.state
        return np.array([math.cos(t1), math.sin(t1), math.cos(t2), math.sin(t2), d1, d2])

    def dynamics(self, s: np.ndarray, torque: float) -> np.ndarray:
        """Time derivative of ``(theta1, theta2, dtheta1, dtheta2)``."""
        m1, m2 = self.link_mass_1, self.link_mass_2
        l1 = self.link_length_1
        lc1, lc2 = self.link_com_pos_1, self.link_com_pos_2
        i1 = i2 = self.link_moi
        g = self.gravity
        theta1, theta2, dtheta1, dtheta2 = s
        d1 = m1 * lc1**2 + m2 * (l1**2 + lc2**2 + 2 * l1 * lc2 * math.cos(theta2)) + i1 + i2
        d2 = m2 * (lc2**2 + l1 * lc2 * math.cos(theta2)) + i2
        # cos(a - pi/2) written as sin(a) so the hanging rest state is exact
        phi2 = m2 * lc2 * g * math.sin(theta1 + theta2)
        phi1 = (
            -m2 * l1 * lc2 * dtheta2**2 * math.sin(theta2)
            - 2 * m2 * l1 * lc2 * dtheta2 * dtheta1 * math.sin(theta2)
            + (m1 * lc1 + m2 * l1) * g * math.sin(theta1)
            + phi2
        )
        ddtheta2 = (
            torque + d2 / d1 * phi1 - m2 * l1 * lc2 * dtheta1**2 * math.sin(theta2) - phi2
        ) / (m2 * lc2**2 + i2 - d2**2 / d1)
        ddtheta1 = -(d2 * ddtheta2 + phi1) / d1
        return np.array([dtheta1, dtheta2, ddtheta1, ddtheta2])

    def integrate(self, s: np.ndarray, torque: float) -> np.ndarray:
        """Raw RK4 step over ``dt`` with no wrapping or clamping."""
        return rk4(lambda y: self.dynamics(y, torque), np.asarray(s, dtype=np.float64), self.dt)

    def _advance(self, action):
        ns = self.integrate(self.state, self.torques[action])
        ns[0] = _wrap(ns[0])
        ns[1] = _wrap(ns[1])
        ns[2] = min(max(ns[2], -self.max_vel_1), self.max_vel_1)
        ns[3] = min(max(ns[3], -self.max_vel_2), self.max_vel_2)
        self.state = ns
        reached = -math.cos(ns[0]) - math.cos(ns[1] + ns[0]) > 1.0
        return -1.0, reached


ENVIRONMENTS: dict[str, type[Env]] = {"cartpole": CartPole, "mountaincar": MountainCar, "acrobot": Acrobot}


def make_env(name: str, seed: int | None = None) -> Env:
    try:
        return ENVIRONMENTS[name](seed)
    except KeyError:
        raise ValueError(f"unknown environment {name!r}; choose from {sorted(ENVIRONMENTS)}") from None
