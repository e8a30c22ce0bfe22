"""Actor-critic agent with a deterministic policy over relaxed allocations.

The actor maps the QoS observation to a relaxed (2L+1) x M allocation via the
structured output head; the executed action is its binary projection. The
critic scores (observation, relaxed action) pairs, and the actor climbs the
critic's action gradient. Target copies of both networks track the train
networks with a soft update every environment step.

Training differentiates through the relaxed action (the binary projection has
no gradient), so by default stored transitions keep the relaxed matrix that
produced the executed action; random exploration actions are stored as their
0/1 matrices.
"""

from __future__ import annotations

import numpy as np

from iabsim import mlp
from iabsim.baselines import random_feasible
from iabsim.env import Transition, discretize
from iabsim.rates import Allocation
from iabsim.replay import ReplayBuffer


class ActorCriticAgent:
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
        tau: float = 0.01,
        batch_n: int = 32,
        buffer_capacity: int = 10_000,
        store_relaxed: bool = True,
        optimizer: str = "sgd",
        grad_clip: float = 0.0,
        rng: np.random.Generator | None = None,
    ):
        if not 0.0 < tau <= 1.0:
            raise ValueError("tau must be in (0, 1]")
        self.n_iab = n_iab
        self.n_chan = n_chan
        self.obs_dim = 1 + n_iab
        self.action_dim = (2 * n_iab + 1) * n_chan
        self.gamma = gamma
        self.epsilon = epsilon
        self.epsilon_decay = epsilon_decay
        self.epsilon_min = epsilon_min
        self.lr = lr
        self.tau = tau
        self.batch_n = batch_n
        self.store_relaxed = store_relaxed
        self.grad_clip = grad_clip
        self.rng = rng if rng is not None else np.random.default_rng()

        head = mlp.structured_head(n_iab, n_chan)
        self.actor = mlp.init([self.obs_dim, *hidden, self.action_dim], head, self.rng)
        self.critic = mlp.init([self.obs_dim + self.action_dim, *hidden, 1], rng=self.rng)
        self.actor_target = self.actor.copy()
        self.critic_target = self.critic.copy()
        self.buffer = ReplayBuffer(buffer_capacity)
        if optimizer == "adam":
            self._adam_actor = mlp.AdamState(self.actor)
            self._adam_critic = mlp.AdamState(self.critic)
        elif optimizer == "sgd":
            self._adam_actor = self._adam_critic = None
        else:
            raise ValueError(f"unknown optimizer {optimizer!r}")

    def act(
        self, obs: np.ndarray, rng: np.random.Generator | None = None
    ) -> tuple[np.ndarray, Allocation]:
        """Epsilon-greedy: either a uniform random feasible allocation (its
        0/1 matrices double as the relaxed form) or the actor's output
        projected to binary. Returns (relaxed matrix, executed allocation)."""
        rng = rng if rng is not None else self.rng
        if rng.random() < self.epsilon:
            alloc = random_feasible(self.n_iab, self.n_chan, rng)
            relaxed = np.vstack([alloc.x, alloc.z]).astype(float)
            return relaxed, alloc
        return self.greedy(obs)

    def greedy(self, obs: np.ndarray) -> tuple[np.ndarray, Allocation]:
        out, _ = mlp.forward(self.actor, obs)
        relaxed = out.reshape(2 * self.n_iab + 1, self.n_chan)
        return relaxed, discretize(relaxed, self.n_iab, self.n_chan)

    def remember(
        self,
        s: np.ndarray,
        relaxed: np.ndarray,
        alloc: Allocation,
        r: float,
        s_next: np.ndarray,
    ) -> None:
        if self.store_relaxed:
            stored = relaxed.ravel().copy()
        else:
            stored = np.vstack([alloc.x, alloc.z]).astype(float).ravel()
        self.buffer.push(Transition(s, stored, r, s_next))

    def critic_targets(self, batch: list[Transition]) -> np.ndarray:
        """y_i = r_i + gamma * Q_target(s', actor_target(s')); the target
        actor's relaxed output is used as-is, no binary projection."""
        s_next = np.stack([t.s_next for t in batch])
        r = np.array([t.r for t in batch])
        a_next, _ = mlp.forward(self.actor_target, s_next)
        q_next, _ = mlp.forward(self.critic_target, np.hstack([s_next, a_next]))
        return r + self.gamma * q_next[:, 0]

    def critic_update(
        self, batch: list[Transition], rng: np.random.Generator | None = None
    ) -> np.ndarray:
        """Regress the critic toward the TD targets on the stored
        (observation, action) pairs; returns the elementwise TD errors
        measured before the update."""
        y = self.critic_targets(batch)
        s = np.stack([t.s for t in batch])
        a = np.stack([t.a for t in batch])
        q, cache = mlp.forward(self.critic, np.hstack([s, a]))
        delta = y - q[:, 0]
        grad_out = (-2.0 * delta / len(batch))[:, None]
        grads, _ = mlp.backward(self.critic, cache, grad_out)
        mlp.clip_grads(grads, self.grad_clip)
        if self._adam_critic is not None:
            self._adam_critic.step(self.critic, grads, self.lr)
        else:
            mlp.sgd_step(self.critic, grads, self.lr)
        return delta

    def actor_update(self, batch: list[Transition]) -> float:
        """Deterministic policy-gradient ascent on the batch-mean critic
        value: chain the critic's action gradient through the actor. Returns
        the gradient norm."""
        s = np.stack([t.s for t in batch])
        a, actor_cache = mlp.forward(self.actor, s)
        q, critic_cache = mlp.forward(self.critic, np.hstack([s, a]))
        grad_q = np.full((len(batch), 1), 1.0 / len(batch))
        _, grad_input = mlp.backward(self.critic, critic_cache, grad_q)
        grad_action = grad_input[:, self.obs_dim :]
        grads, _ = mlp.backward(self.actor, actor_cache, grad_action)
        mlp.clip_grads(grads, self.grad_clip)
        # gradient ascent: climb the critic's score
        if self._adam_actor is not None:
            neg = mlp.MlpGrads([-g for g in grads.weights], [-g for g in grads.biases])
            self._adam_actor.step(self.actor, neg, self.lr)
        else:
            for w, gw in zip(self.actor.weights, grads.weights):
                w += self.lr * gw
            for b, gb in zip(self.actor.biases, grads.biases):
                b += self.lr * gb
        return grads.flat_norm()

    def train_step(self, rng: np.random.Generator | None = None) -> float:
        """Sample one minibatch, update critic then actor on it; returns the
        mean squared TD error."""
        rng = rng if rng is not None else self.rng
        if len(self.buffer) < self.batch_n:
            raise ValueError(
                f"buffer holds {len(self.buffer)} transitions, need {self.batch_n}"
            )
        batch = self.buffer.sample(self.batch_n, rng)
        delta = self.critic_update(batch)
        self.actor_update(batch)
        return float(np.mean(delta**2))

    def soft_sync(self) -> None:
        mlp.soft_update(self.critic_target, self.critic, self.tau)
        mlp.soft_update(self.actor_target, self.actor, self.tau)

    def end_episode(self) -> None:
        self.epsilon = max(self.epsilon * self.epsilon_decay, self.epsilon_min)
