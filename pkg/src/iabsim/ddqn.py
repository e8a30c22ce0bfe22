"""Double DQN over the enumerated joint action space.

The train network picks the next-state action, the target network scores it;
the target is refreshed by a periodic hard copy. Only viable when the joint
action space fits under ``action_cap`` -- the actor-critic agent is the one
meant for larger instances.
"""

from __future__ import annotations

import numpy as np

from iabsim import mlp
from iabsim.env import Transition, action_space_size
from iabsim.replay import ReplayBuffer


class ActionSpaceTooLarge(ValueError):
    pass


class DoubleDqnAgent:
    def __init__(
        self,
        n_iab: int,
        n_chan: int,
        hidden: tuple[int, ...] = (500, 1000, 500),
        gamma: float = 0.9,
        epsilon: float = 0.9,
        epsilon_decay: float = 0.9995,
        epsilon_min: float = 0.01,
        lr: float = 1e-4,
        batch_n: int = 32,
        target_sync_period: int = 100,
        buffer_capacity: int = 10_000,
        action_cap: int = 65_536,
        optimizer: str = "sgd",
        grad_clip: float = 0.0,
        rng: np.random.Generator | None = None,
    ):
        self.n_iab = n_iab
        self.n_chan = n_chan
        self.action_count = action_space_size(n_iab, n_chan)
        if self.action_count > action_cap:
            raise ActionSpaceTooLarge(
                f"joint action space {self.action_count} exceeds cap {action_cap}; "
                "use the actor-critic agent for instances this large"
            )
        self.gamma = gamma
        self.epsilon = epsilon
        self.epsilon_decay = epsilon_decay
        self.epsilon_min = epsilon_min
        self.lr = lr
        self.batch_n = batch_n
        self.target_sync_period = target_sync_period
        self.grad_clip = grad_clip
        self.rng = rng if rng is not None else np.random.default_rng()

        sizes = [1 + n_iab, *hidden, self.action_count]
        self.q_train = mlp.init(sizes, rng=self.rng)
        self.q_target = self.q_train.copy()
        self.buffer = ReplayBuffer(buffer_capacity)
        if optimizer == "adam":
            self._adam = mlp.AdamState(self.q_train)
        elif optimizer == "sgd":
            self._adam = None
        else:
            raise ValueError(f"unknown optimizer {optimizer!r}")
        self._train_steps = 0

    def select_action(self, obs: np.ndarray, rng: np.random.Generator | None = None) -> int:
        """Epsilon-greedy over the train network's outputs (ties break to the
        lowest action index)."""
        rng = rng if rng is not None else self.rng
        if rng.random() < self.epsilon:
            return int(rng.integers(0, self.action_count))
        return self.greedy_action(obs)

    def greedy_action(self, obs: np.ndarray) -> int:
        q, _ = mlp.forward(self.q_train, obs)
        return int(np.argmax(q))

    def td_targets(self, batch: list[Transition]) -> np.ndarray:
        """y_i = r_i + gamma * Q_target(s', argmax_a Q_train(s', a)).

        Episodes truncate at the horizon without an absorbing state, so there
        is no terminal masking.
        """
        s_next = np.stack([t.s_next for t in batch])
        r = np.array([t.r for t in batch])
        q_next_train, _ = mlp.forward(self.q_train, s_next)
        a_star = np.argmax(q_next_train, axis=1)
        q_next_target, _ = mlp.forward(self.q_target, s_next)
        return r + self.gamma * q_next_target[np.arange(len(batch)), a_star]

    def train_step(self, rng: np.random.Generator | None = None) -> float:
        """One minibatch regression step toward the TD targets; the squared
        error flows only through each transition's taken action. Returns the
        mean squared TD error and hard-syncs the target on schedule."""
        rng = rng if rng is not None else self.rng
        if len(self.buffer) < self.batch_n:
            raise ValueError(
                f"buffer holds {len(self.buffer)} transitions, need {self.batch_n}"
            )
        batch = self.buffer.sample(self.batch_n, rng)
        y = self.td_targets(batch)
        s = np.stack([t.s for t in batch])
        a = np.array([t.a for t in batch], dtype=np.int64)
        q, cache = mlp.forward(self.q_train, s)
        rows = np.arange(len(batch))
        delta = q[rows, a] - y
        loss = float(np.mean(delta**2))
        grad_out = np.zeros_like(q)
        grad_out[rows, a] = 2.0 * delta / len(batch)
        grads, _ = mlp.backward(self.q_train, cache, grad_out)
        mlp.clip_grads(grads, self.grad_clip)
        if self._adam is not None:
            self._adam.step(self.q_train, grads, self.lr)
        else:
            mlp.sgd_step(self.q_train, grads, self.lr)
        self._train_steps += 1
        if self._train_steps % self.target_sync_period == 0:
            self.sync_target()
        return loss

    def sync_target(self) -> None:
        self.q_target = self.q_train.copy()

    def end_episode(self) -> None:
        self.epsilon = max(self.epsilon * self.epsilon_decay, self.epsilon_min)
