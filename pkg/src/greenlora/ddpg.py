"""Actor-critic agent for continuous per-frame battery-draw decisions.

The actor maps the (harvest, demand, weight) state to a draw fraction in
[0, 1]; the environment scales it onto the feasible [0, min(X, B)] range,
so causality and the demand cap hold by construction and training
concentrates on the storage-overflow constraint. Target copies of both
networks follow the mains through small Polyak steps.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .nn import Adam, Mlp, soft_update


@dataclass
class DdpgConfig:
    gamma: float = 0.99
    actor_lr: float = 1e-4
    critic_lr: float = 1e-3
    rho: float = 0.001
    batch_size: int = 64
    buffer_capacity: int = 25_000
    episodes: int = 300
    hidden: tuple[int, ...] = (64, 64)
    noise_sigma_start: float = 0.2
    noise_sigma_end: float = 0.01
    noise_enabled: bool = True
    seed: int = 0


class ReplayBuffer:
    """Fixed-capacity ring with FIFO eviction and uniform sampling."""

    def __init__(self, capacity: int, state_dim: int):
        self.capacity = capacity
        self.s = np.zeros((capacity, state_dim))
        self.a = np.zeros(capacity)
        self.r = np.zeros(capacity)
        self.s2 = np.zeros((capacity, state_dim))
        self.terminal = np.zeros(capacity, dtype=bool)
        self.idx = 0
        self.size = 0

    def add(self, s, a, r, s2, terminal):
        i = self.idx
        self.s[i] = s
        self.a[i] = a
        self.r[i] = r
        self.s2[i] = s2 if s2 is not None else 0.0
        self.terminal[i] = terminal
        self.idx = (i + 1) % self.capacity
        self.size = min(self.size + 1, self.capacity)

    def sample(self, rng: np.random.Generator, n: int) -> dict:
        idx = rng.integers(0, self.size, size=n)
        return {"s": self.s[idx], "a": self.a[idx], "r": self.r[idx],
                "s2": self.s2[idx], "terminal": self.terminal[idx]}


class EnergyManagementEnv:
    """One episode = one L-frame trajectory of (E, X, W) with a live battery.

    episode_source(rng) must yield equal-length arrays (x, e, w). State
    components are normalized by their running maxima (kept across
    episodes and available for logging as `norms`).
    """

    def __init__(self, episode_source, b_max: float, rng: np.random.Generator):
        self.episode_source = episode_source
        self.b_max = b_max
        self.rng = rng
        self.norms = np.array([1e-12, 1e-12, 1e-12])  # running max of (E, X, W)

    def reset(self) -> np.ndarray:
        self.x, self.e, self.w = (np.asarray(v, dtype=float)
                                  for v in self.episode_source(self.rng))
        self.t = 0
        self.b = min(self.b_max, self.e[0])
        return self._state()

    def _state(self) -> np.ndarray:
        raw = np.array([self.e[self.t], self.x[self.t], self.w[self.t]])
        self.norms = np.maximum(self.norms, raw)
        return raw / self.norms

    @property
    def bound(self) -> float:
        """Feasible draw this frame: min(X(t), B(t))."""
        return min(self.x[self.t], self.b)

    def step(self, u: float):
        """Apply a draw fraction u in [0, 1]. Returns (reward, next_state, done, info)."""
        t = self.t
        a = float(np.clip(u, 0.0, 1.0)) * self.bound
        c5 = a <= self.x[t] + 1e-9
        c3 = a <= self.b + 1e-9  # battery never exceeds cumulative harvest
        last = t + 1 >= len(self.x)
        raw_next = self.b - a + (0.0 if last else self.e[t + 1])
        c4 = last or raw_next <= self.b_max + 1e-9  # no storage overflow
        ok = c3 and c4 and c5
        reward = self.w[t] * a if ok else -1.0
        self.b = min(self.b_max, raw_next)
        self.t += 1
        info = {"ok": ok, "a": a, "c3": c3, "c4": c4, "c5": c5}
        if last:
            return reward, None, True, info
        return reward, self._state(), False, info


def squash(z):
    """Actor head: map a raw score to a draw fraction in (0, 1)."""
    return (np.tanh(z) + 1.0) / 2.0


def select_action(actor: Mlp, state: np.ndarray, bound: float,
                  rng: np.random.Generator | None = None,
                  sigma: float = 0.0) -> tuple[float, float]:
    """Draw in joules: squashed actor output scaled to [0, bound], optionally
    perturbed by Gaussian exploration noise and re-clamped. Returns (a, u)."""
    z, _ = actor.forward(state)
    u = float(squash(z[0]))
    if sigma > 0.0 and rng is not None:
        u = float(np.clip(u + rng.normal(0.0, sigma), 0.0, 1.0))
    return u * bound, u


def critic_target(batch: dict, target_actor: Mlp, target_critic: Mlp,
                  gamma: float) -> np.ndarray:
    """y = r + gamma * Q'(s', mu'(s')); terminal steps keep y = r."""
    z, _ = target_actor.forward(batch["s2"])
    a2 = squash(z[:, 0])
    q2, _ = target_critic.forward(np.column_stack([batch["s2"], a2]))
    return batch["r"] + gamma * q2[:, 0] * (~batch["terminal"])


def critic_update(critic: Mlp, opt: Adam, batch: dict, y: np.ndarray) -> float:
    """One squared-error step toward the targets."""
    sa = np.column_stack([batch["s"], batch["a"]])
    q, cache = critic.forward(sa)
    err = q[:, 0] - y
    grads, _ = critic.backward(cache, (2.0 * err / len(y))[:, None])
    opt.step(critic.params, grads)
    return float(np.mean(err**2))


def actor_update(actor: Mlp, opt: Adam, critic: Mlp, states: np.ndarray) -> float:
    """Ascend mean_j Q(s_j, mu(s_j)) through the critic's action input."""
    z, acache = actor.forward(states)
    u = squash(z[:, 0])
    sa = np.column_stack([states, u])
    q, ccache = critic.forward(sa)
    n = len(states)
    _, dinput = critic.backward(ccache, np.full((n, 1), 1.0 / n))
    dq_du = dinput[:, -1]
    du_dz = (1.0 - np.tanh(z[:, 0]) ** 2) / 2.0
    upstream = -(dq_du * du_dz)[:, None]  # descend the negated objective
    grads, _ = actor.backward(acache, upstream)
    opt.step(actor.params, grads)
    return float(np.mean(q[:, 0]))


def train_energy_agent(env: EnergyManagementEnv, ddpg_cfg: DdpgConfig):
    """Full loop per the actor-critic recipe. Returns (actor, critic, logs)."""
    rng = np.random.default_rng(ddpg_cfg.seed)
    state_dim = 3
    actor = Mlp((state_dim, *ddpg_cfg.hidden, 1), rng=rng)
    critic = Mlp((state_dim + 1, *ddpg_cfg.hidden, 1), rng=rng)
    actor_t = actor.copy()
    critic_t = critic.copy()
    actor_opt = Adam(lr=ddpg_cfg.actor_lr)
    critic_opt = Adam(lr=ddpg_cfg.critic_lr)
    buffer = ReplayBuffer(ddpg_cfg.buffer_capacity, state_dim)

    logs = {"episode": [], "cum_reward": [], "accuracy": [], "drawn": []}
    for episode in range(ddpg_cfg.episodes):
        frac = episode / max(1, ddpg_cfg.episodes - 1)
        sigma = (ddpg_cfg.noise_sigma_start
                 + frac * (ddpg_cfg.noise_sigma_end - ddpg_cfg.noise_sigma_start)
                 if ddpg_cfg.noise_enabled else 0.0)
        state = env.reset()
        cum_reward = 0.0
        drawn = 0.0
        all_ok = True
        done = False
        while not done:
            a, u = select_action(actor, state, env.bound, rng, sigma)
            reward, next_state, done, info = env.step(u)
            buffer.add(state, u, reward, next_state, done)
            cum_reward += reward
            drawn += info["a"]
            all_ok = all_ok and info["ok"]
            state = next_state
            if buffer.size >= ddpg_cfg.batch_size:
                batch = buffer.sample(rng, ddpg_cfg.batch_size)
                y = critic_target(batch, actor_t, critic_t, ddpg_cfg.gamma)
                critic_update(critic, critic_opt, batch, y)
                actor_update(actor, actor_opt, critic, batch["s"])
                soft_update(critic_t, critic, ddpg_cfg.rho)
                soft_update(actor_t, actor, ddpg_cfg.rho)
        logs["episode"].append(episode)
        logs["cum_reward"].append(cum_reward)
        logs["accuracy"].append(bool(all_ok))
        logs["drawn"].append(drawn)
    return actor, critic, {k: np.asarray(v) for k, v in logs.items()}


def actor_split_trajectory(actor: Mlp, env: EnergyManagementEnv):
    """Evaluation rollout (no noise): returns the realized draw sequence."""
    state = env.reset()
    draws = []
    done = False
    while not done:
        a, u = select_action(actor, state, env.bound)
        _, state, done, info = env.step(u)
        draws.append(info["a"])
    return np.asarray(draws)
