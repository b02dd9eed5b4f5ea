"""Clipped-surrogate policy-gradient agent for per-step channel + SF choice.

Each step assigns (or declines to assign) one device. The state is the
frame's assigned-SF occupancy matrix plus the device's per-channel gains;
the action is one categorical index over (M+1)*N outcomes where the first
N indices all mean "leave the device unscheduled". Episodes span one frame
for uncorrelated channels and all L frames for time-correlated ones.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .assignment import Assignment
from .channel import (ChannelRealization, GilbertElliottProcess, Topology,
                      sample_iid_channels, step_gilbert_elliott)
from .config import NetworkConfig
from .nn import Adam, Mlp, categorical_sample, log_prob


@dataclass
class PpoConfig:
    gamma: float = 0.99
    lr: float = 1e-4
    clip_eps: float = 0.2
    gae_lambda: float = 0.01
    epochs: int = 4
    batch_size: int = 64
    episodes: int = 3000
    hidden: tuple[int, ...] = (64, 64)
    seed: int = 0


def episode_layout(cfg: NetworkConfig, correlated: bool) -> int:
    """Steps per episode: one device visit per frame covered."""
    return cfg.k * cfg.l if correlated else cfg.k


def default_penalty_scale(topo: Topology, cfg: NetworkConfig) -> float:
    """Normalization applied to the reward's energy penalty.

    2^-12 divided by the topology's median per-link cost coefficient
    gamma_th * sigma^2 / beta, so a median link at the largest SF lands
    near penalty 1. Falls back to 1.0 when the target SNR is zero.
    """
    coeff = cfg.gamma_th * np.asarray(cfg.sigma2_w)[None, :] / topo.beta[:, None]
    med = float(np.median(coeff))
    return 1.0 if med == 0.0 else 2.0**-12 / med


def step_reward(assigned_sf: np.ndarray, channel_attempts: np.ndarray,
                action: int, gains_row: np.ndarray, cfg: NetworkConfig,
                scale: float):
    """Reward, constraint flags, and raw penalty for one action.

    Scheduled actions count against the chosen channel's attempt budget
    (occupancy constraint) and the chosen (channel, SF) cell (distinctness
    constraint); violating either earns 0. A valid assignment earns
    1 - scaled penalty. Declining to schedule satisfies both constraints,
    carries no penalty, and forgoes the constraint bonus entirely.
    Returns (reward, c1, c2, raw_penalty, m, sf_index).
    """
    n = cfg.n_sf
    m_plus, sf_idx = divmod(action, n)
    if m_plus == 0:
        return 0.0, True, True, 0.0, -1, sf_idx
    m = m_plus - 1
    channel_attempts[m] += 1
    c1 = channel_attempts[m] <= n
    c2 = not assigned_sf[m, sf_idx]
    sf = cfg.sf_set[sf_idx]
    gain = gains_row[m]
    raw_pen = cfg.gamma_th * cfg.sigma2_w[m] / gain * 2.0**sf
    reward = 1.0 - raw_pen * scale if (c1 and c2) else 0.0
    return reward, c1, c2, raw_pen, m, sf_idx


class ChannelAssignEnv:
    """Sequential per-device allocation over i.i.d. or Markov-fading frames."""

    def __init__(self, cfg: NetworkConfig, topo: Topology,
                 rng: np.random.Generator, correlated: bool = False,
                 penalty_scale: float | None = None,
                 replay_frames: list[ChannelRealization] | None = None):
        self.cfg = cfg
        self.topo = topo
        self.rng = rng
        self.correlated = correlated
        self.scale = (default_penalty_scale(topo, cfg)
                      if penalty_scale is None else penalty_scale)
        # gains span many decades; a log feature keyed to the median
        # large-scale gain keeps the network input in a usable range
        self.gain_ref = float(np.median(topo.beta))
        self.state_dim = cfg.m * cfg.n_sf + cfg.m
        self.action_count = (cfg.m + 1) * cfg.n_sf
        self.replay_frames = replay_frames
        if replay_frames is not None:
            self.frames_per_episode = len(replay_frames)
        else:
            self.frames_per_episode = cfg.l if correlated else 1
        self._ge: GilbertElliottProcess | None = None

    def _gain_features(self, device: int) -> np.ndarray:
        g = self.realization.gain[device] / self.gain_ref
        return np.clip(np.log10(np.maximum(g, 1e-300)) / 6.0, -1.0, 1.0)

    def _new_frame(self):
        if self.replay_frames is not None:
            self.realization = self.replay_frames[self.frame]
        elif self.correlated:
            self.realization = step_gilbert_elliott(self._ge, self.topo, self.rng)
        else:
            self.realization = sample_iid_channels(self.topo, self.cfg, self.rng)
        self.assigned_sf = np.zeros((self.cfg.m, self.cfg.n_sf), dtype=bool)
        self.attempts = np.zeros(self.cfg.m, dtype=int)
        self.frame_actions: list[tuple[int, int, int]] = []  # (device, m, sf_idx)
        self.device = 0

    def reset(self) -> np.ndarray:
        if self.correlated and self.replay_frames is None:
            self._ge = GilbertElliottProcess.from_config(self.cfg, self.rng)
        self.frame = 0
        self._new_frame()
        return self.state()

    def state(self) -> np.ndarray:
        return np.concatenate([self.assigned_sf.ravel().astype(float),
                               self._gain_features(self.device)])

    def step(self, action: int):
        """Returns (reward, next_state or None, done, info)."""
        reward, c1, c2, raw_pen, m, sf_idx = step_reward(
            self.assigned_sf, self.attempts, action,
            self.realization.gain[self.device], self.cfg, self.scale)
        if m >= 0 and c1 and c2:
            self.assigned_sf[m, sf_idx] = True
            self.frame_actions.append((self.device, m, sf_idx))
        info = {"valid": c1 and c2, "raw_penalty": raw_pen, "scheduled": m >= 0}
        self.device += 1
        if self.device >= self.cfg.k:
            info["frame_result"] = (self.realization, self.frame_assignment())
            self.frame += 1
            if self.frame >= self.frames_per_episode:
                return reward, None, True, info
            self._new_frame()
        return reward, self.state(), False, info

    def frame_assignment(self) -> Assignment:
        """Assignment built from the current frame's valid actions."""
        chi = np.zeros((self.cfg.k, self.cfg.m), dtype=bool)
        alpha = np.zeros(self.cfg.k, dtype=int)
        for device, m, sf_idx in self.frame_actions:
            chi[device, m] = True
            alpha[device] = self.cfg.sf_set[sf_idx]
        return Assignment(chi=chi, alpha=alpha,
                          frame_index=self.realization.frame_index)


def gae_estimator(rewards: np.ndarray, values: np.ndarray,
                  gamma: float, lam: float) -> np.ndarray:
    """Discounted sum of TD residuals; the state after the episode is worth 0."""
    rewards = np.asarray(rewards, dtype=float)
    values = np.asarray(values, dtype=float)
    n = len(rewards)
    next_values = np.append(values[1:], 0.0)
    deltas = rewards + gamma * next_values - values
    adv = np.zeros(n)
    acc = 0.0
    for t in range(n - 1, -1, -1):
        acc = deltas[t] + gamma * lam * acc
        adv[t] = acc
    return adv


def discounted_returns(rewards: np.ndarray, gamma: float) -> np.ndarray:
    out = np.zeros(len(rewards))
    acc = 0.0
    for t in range(len(rewards) - 1, -1, -1):
        acc = rewards[t] + gamma * acc
        out[t] = acc
    return out


def surrogate_loss_and_grad(policy: Mlp, states: np.ndarray, actions: np.ndarray,
                            logp_old: np.ndarray, advantages: np.ndarray,
                            clip_eps: float):
    """Negative clipped surrogate and its gradient w.r.t. the policy logits."""
    probs, cache = policy.forward(states)
    idx = np.arange(len(actions))
    p_a = np.maximum(probs[idx, actions], 1e-300)
    ratio = np.exp(np.log(p_a) - logp_old)
    unclipped = ratio * advantages
    clipped = np.clip(ratio, 1.0 - clip_eps, 1.0 + clip_eps) * advantages
    surrogate = np.minimum(unclipped, clipped)
    loss = -float(np.mean(surrogate))
    # gradient flows only where the unclipped branch is active
    active = (unclipped <= clipped).astype(float)
    coeff = -(active * advantages * ratio) / len(actions)
    dlogits = coeff[:, None] * (-probs)
    dlogits[idx, actions] += coeff
    return loss, dlogits, cache


def ppo_update(policy: Mlp, policy_old: Mlp, value_net: Mlp,
               batch: dict, policy_opt: Adam, value_opt: Adam,
               ppo_cfg: PpoConfig, rng: np.random.Generator) -> dict:
    """Several epochs of minibatch updates, then sync the sampling policy."""
    n = len(batch["actions"])
    stats = {"policy_loss": 0.0, "value_loss": 0.0, "updates": 0}
    for _ in range(ppo_cfg.epochs):
        order = rng.permutation(n)
        for start in range(0, n, ppo_cfg.batch_size):
            mb = order[start:start + ppo_cfg.batch_size]
            loss, dlogits, cache = surrogate_loss_and_grad(
                policy, batch["states"][mb], batch["actions"][mb],
                batch["logp_old"][mb], batch["advantages"][mb], ppo_cfg.clip_eps)
            if not np.isfinite(loss):
                raise RuntimeError(
                    f"non-finite policy loss {loss}; "
                    f"adv range [{batch['advantages'].min()}, {batch['advantages'].max()}]")
            grads, _ = policy.backward(cache, dlogits)
            policy_opt.step(policy.params, grads)

            v, vcache = value_net.forward(batch["states"][mb])
            err = v[:, 0] - batch["returns"][mb]
            vloss = float(np.mean(err**2))
            if not np.isfinite(vloss):
                raise RuntimeError(f"non-finite value loss {vloss}")
            vgrads, _ = value_net.backward(vcache, (2.0 * err / len(mb))[:, None])
            value_opt.step(value_net.params, vgrads)
            stats["policy_loss"] += loss
            stats["value_loss"] += vloss
            stats["updates"] += 1
    for t, s in zip(policy_old.params, policy.params):
        t[...] = s
    return stats


def train_channel_agent(env: ChannelAssignEnv, ppo_cfg: PpoConfig):
    """Full training loop. Returns (policy, value_net, logs).

    logs carries one entry per episode: cumulative reward, cumulative raw
    penalty over scheduled attempts, and a flag for episodes whose every
    step respected both allocation constraints.
    """
    rng = np.random.default_rng(ppo_cfg.seed)
    sizes = (env.state_dim, *ppo_cfg.hidden, env.action_count)
    policy = Mlp(sizes, head="softmax", rng=rng)
    policy_old = policy.copy()
    value_net = Mlp((env.state_dim, *ppo_cfg.hidden, 1), head="linear", rng=rng)
    policy_opt = Adam(lr=ppo_cfg.lr)
    value_opt = Adam(lr=ppo_cfg.lr)

    logs = {"episode": [], "cum_reward": [], "cum_penalty": [], "accuracy": []}
    for episode in range(ppo_cfg.episodes):
        state = env.reset()
        states, actions, rewards, logps = [], [], [], []
        all_valid = True
        cum_pen = 0.0
        done = False
        while not done:
            probs, _ = policy_old.forward(state)
            action = categorical_sample(probs, rng)
            logps.append(log_prob(probs, action))
            states.append(state)
            actions.append(action)
            reward, state, done, info = env.step(action)
            rewards.append(reward)
            all_valid = all_valid and info["valid"]
            if info["scheduled"]:
                cum_pen += info["raw_penalty"]
        states = np.asarray(states)
        rewards = np.asarray(rewards)
        values = value_net.forward(states)[0][:, 0]
        batch = {
            "states": states,
            "actions": np.asarray(actions),
            "logp_old": np.asarray(logps),
            "advantages": gae_estimator(rewards, values, ppo_cfg.gamma,
                                        ppo_cfg.gae_lambda),
            "returns": discounted_returns(rewards, ppo_cfg.gamma),
        }
        ppo_update(policy, policy_old, value_net, batch, policy_opt, value_opt,
                   ppo_cfg, rng)
        logs["episode"].append(episode)
        logs["cum_reward"].append(float(rewards.sum()))
        logs["cum_penalty"].append(cum_pen)
        logs["accuracy"].append(bool(all_valid))
    return policy, value_net, {k: np.asarray(v) for k, v in logs.items()}


def rollout_assignments(policy: Mlp, env: ChannelAssignEnv,
                        rng: np.random.Generator, greedy: bool = True):
    """Roll the policy over one episode; return [(realization, Assignment)]
    for every completed frame. With greedy=True the argmax action is taken
    (evaluation mode); otherwise actions are sampled."""
    state = env.reset()
    frames = []
    done = False
    while not done:
        probs, _ = policy.forward(state)
        action = int(np.argmax(probs)) if greedy else categorical_sample(probs, rng)
        _, state, done, info = env.step(action)
        if "frame_result" in info:
            frames.append(info["frame_result"])
    return frames
