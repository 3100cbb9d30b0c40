"""Hybrid-action Q-learning with sequential per-user selection.

The Actor maps a user state to one continuous blocklength parameter per
discrete action plus a discrete-action probability head; the Critic scores
(state, all parameters) with one Q-value per discrete action.  Users select
sequentially within a slot in a rotating order, telegraphing their budget
consumption and choices to later users through the state.  Baselines: a
plain DQN over the fully discretised action space and a random policy.
"""
from __future__ import annotations

import json
import math
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .config import ScenarioConfig, config_hash
from .env import HybridAction, RisDownlinkEnv, StateVector
from .neural import Mlp, OptimizerState, clip_global_norm, optimizer_step

CHECKPOINT_VERSION = 1


@dataclass
class EpsilonSchedule:
    """Linear decay from start to end, reaching the floor exactly at
    decay_steps and staying there."""

    start: float = 1.0
    end: float = 0.05
    decay_steps: int = 4000

    def value(self, step: int) -> float:
        if self.decay_steps <= 0:
            return self.end
        frac = min(1.0, max(0.0, step / self.decay_steps))
        return self.start - (self.start - self.end) * frac


@dataclass
class AgentConfig:
    alpha: float = 1e-3              # critic learning rate
    beta: float = 1e-4               # actor learning rate
    gamma_discount: float = 0.9
    epsilon: EpsilonSchedule = field(default_factory=EpsilonSchedule)
    n_step: int = 3
    batch_size: int = 32
    buffer_capacity: int = 20000
    target_sync: int = 100
    use_target: bool = True
    actor_loss_mode: str = "paper_literal"
    optimizer: str = "adam"
    warmup: int = 500
    grad_clip: float = 10.0
    hidden: tuple = (128, 128)
    per_user_networks: bool = False
    cbl_levels: int = 8

    def __post_init__(self):
        if self.alpha <= 0 or self.beta <= 0:
            raise ValueError("learning rates must be positive")
        if not 0.0 <= self.gamma_discount <= 1.0:
            raise ValueError("discount must be in [0, 1]")
        if self.n_step < 1:
            raise ValueError("n_step must be >= 1")
        if self.actor_loss_mode not in ("paper_literal", "standard_pdqn"):
            raise ValueError(f"unknown actor_loss_mode: {self.actor_loss_mode}")

    @classmethod
    def from_scenario(cls, cfg: ScenarioConfig) -> "AgentConfig":
        a = cfg.values["agent"]
        return cls(
            alpha=a["alpha"], beta=a["beta"], gamma_discount=a["gamma"],
            epsilon=EpsilonSchedule(a["epsilon_start"], a["epsilon_end"],
                                    a["epsilon_decay_steps"]),
            n_step=a["n_step"], batch_size=a["batch_size"],
            buffer_capacity=a["buffer_capacity"], target_sync=a["target_sync"],
            use_target=a["use_target"], actor_loss_mode=a["actor_loss_mode"],
            optimizer=a["optimizer"], warmup=cfg.warmup_transitions,
            grad_clip=a["grad_clip"], hidden=tuple(a["hidden"]),
            per_user_networks=a["per_user_networks"], cbl_levels=a["cbl_levels"])

    def make_optimizer(self, lr: float) -> OptimizerState:
        if self.optimizer == "plain_sgd":
            return OptimizerState(lr, beta1=0.0, beta2=0.0)
        return OptimizerState(lr)


class ReplayBuffer:
    """Fixed-capacity ring of n-step transition records.

    Oldest entries are overwritten in insertion order after wraparound;
    batches are sampled uniformly without replacement.
    """

    def __init__(self, capacity: int, state_dim: int, param_dim: int):
        self.capacity = capacity
        self.states = np.zeros((capacity, state_dim))
        self.param_vecs = np.zeros((capacity, param_dim))
        self.action_idx = np.zeros(capacity, dtype=int)
        self.n_reward = np.zeros(capacity)
        self.next_states = np.zeros((capacity, state_dim))
        self.done = np.zeros(capacity, dtype=bool)
        self.steps = np.zeros(capacity, dtype=int)
        self.cursor = 0
        self.size = 0

    def __len__(self) -> int:
        return self.size

    def insert(self, state, action_idx, param_vec, n_reward, next_state, done, steps):
        i = self.cursor
        self.states[i] = state
        self.action_idx[i] = action_idx
        self.param_vecs[i] = param_vec
        self.n_reward[i] = n_reward
        self.next_states[i] = next_state
        self.done[i] = done
        self.steps[i] = steps
        self.cursor = (self.cursor + 1) % self.capacity
        self.size = min(self.size + 1, self.capacity)

    def sample(self, rng: np.random.Generator, batch_size: int) -> dict:
        idx = rng.choice(self.size, size=min(batch_size, self.size), replace=False)
        return {
            "states": self.states[idx],
            "action_idx": self.action_idx[idx],
            "param_vecs": self.param_vecs[idx],
            "n_reward": self.n_reward[idx],
            "next_states": self.next_states[idx],
            "done": self.done[idx],
            "steps": self.steps[idx],
        }


def select_action(state_enc: np.ndarray, actor: Mlp, critic: Mlp, epsilon: float,
                  codebook_size: int, rng: np.random.Generator):
    """Epsilon-greedy hybrid selection.

    The actor always produces the full parameter vector; the discrete index
    is uniform with probability epsilon, otherwise the Q-argmax given those
    parameters.  Returns (HybridAction, param_vector).
    """
    (params, _probs), _ = actor.forward(state_enc)
    params = params[0]
    if rng.random() < epsilon:
        idx = int(rng.integers(codebook_size))
    else:
        q, _ = critic.forward(np.concatenate([state_enc, params]))
        idx = int(np.argmax(q[0]))
    return HybridAction(idx, float(params[idx])), params


def sid_collect_slot(states: list, order, actor_for, critic_for, epsilon: float,
                     codebook, env: RisDownlinkEnv, rng: np.random.Generator):
    """Sequential within-slot selection with budget/action telegraphing.

    Users act in the given order; each selection decrements the remaining
    power/blocklength budgets and updates the peer summary seen by later
    users.  Returns per-user actions and the encoded states each user saw.
    """
    n_users = len(states)
    actions: list = [None] * n_users
    encoded: list = [None] * n_users
    params_all: list = [None] * n_users
    remaining_power = env.p_max
    remaining_cbl = env.n_max
    power_fracs: list = []
    cbl_params: list = []
    for rank, user in enumerate(order):
        sv = states[user]
        sv.remaining_power = remaining_power
        sv.remaining_cbl = remaining_cbl
        sv.slot_peers = np.array([
            rank / max(1, n_users),
            float(np.mean(power_fracs)) if power_fracs else 0.0,
            float(np.mean(cbl_params)) if cbl_params else 0.0,
        ])
        enc = sv.encode(env.p_max, env.n_max)
        act, params = select_action(enc, actor_for(user), critic_for(user),
                                    epsilon, codebook.size, rng)
        actions[user] = act
        encoded[user] = enc
        params_all[user] = params
        p_req, _ = codebook.decode(act.discrete_index)
        n_req = env.blocklength_of(act.continuous_param)
        remaining_power = max(0.0, remaining_power - p_req)
        remaining_cbl = max(0.0, remaining_cbl - n_req)
        power_fracs.append(p_req / env.p_max)
        cbl_params.append(act.continuous_param)
    return actions, encoded, params_all


def n_step_target(batch: dict, critic_target: Mlp, actor: Mlp, gamma: float):
    """y = sum_i gamma^i r_{t+i} + gamma^k max_L Q(s_{t+k}, L, x_L(s_{t+k}));
    the bootstrap term is dropped on episode-truncated chains."""
    (params, _), _ = actor.forward(batch["next_states"])
    q_in = np.concatenate([batch["next_states"], params], axis=1)
    q, _ = critic_target.forward(q_in)
    boot = q.max(axis=1)
    return batch["n_reward"] + np.where(batch["done"], 0.0,
                                        gamma ** batch["steps"] * boot)


def critic_loss_and_grads(batch: dict, critic: Mlp, targets: np.ndarray):
    """Mean of 0.5*(Q(s_t, L_t, x; w) - y)^2 over the batch."""
    q_in = np.concatenate([batch["states"], batch["param_vecs"]], axis=1)
    q, cache = critic.forward(q_in)
    rows = np.arange(q.shape[0])
    err = q[rows, batch["action_idx"]] - targets
    loss = float(np.mean(0.5 * err ** 2))
    dq = np.zeros_like(q)
    dq[rows, batch["action_idx"]] = err / q.shape[0]
    grads, _ = critic.backward(cache, dq)
    return loss, grads


def critic_update(batch: dict, critic: Mlp, targets: np.ndarray,
                  opt: OptimizerState, grad_clip: float = 0.0) -> float:
    loss, grads = critic_loss_and_grads(batch, critic, targets)
    if grad_clip > 0:
        grads = clip_global_norm(grads, grad_clip)
    optimizer_step(critic.parameters(), grads, opt)
    return loss


def actor_loss_and_grads(batch: dict, actor: Mlp, critic: Mlp, mode: str):
    """Policy loss and actor gradients; critic parameters are left untouched.

    paper_literal: -sum_L Q[s, L, x_L(s); w] * P(L|s) with gradients through
    both the parameter heads and the probability head; standard_pdqn drops
    the probability weighting.
    """
    if mode not in ("paper_literal", "standard_pdqn"):
        raise ValueError(f"unknown actor loss mode: {mode}")
    states = batch["states"]
    (params, probs), cache_a = actor.forward(states)
    q_in = np.concatenate([states, params], axis=1)
    q, cache_c = critic.forward(q_in)
    b = states.shape[0]
    if mode == "paper_literal":
        loss = float(np.mean(-(q * probs).sum(axis=1)))
        dq = -probs / b
        dprobs = -q / b
    else:
        loss = float(np.mean(-q.sum(axis=1)))
        dq = np.full_like(q, -1.0 / b)
        dprobs = np.zeros_like(probs)
    _, grad_qin = critic.backward(cache_c, dq)
    grad_params = grad_qin[:, states.shape[1]:]
    grads, _ = actor.backward(cache_a, (grad_params, dprobs))
    return loss, grads


def actor_update(batch: dict, actor: Mlp, critic: Mlp, opt: OptimizerState,
                 mode: str, grad_clip: float = 0.0) -> float:
    loss, grads = actor_loss_and_grads(batch, actor, critic, mode)
    if grad_clip > 0:
        grads = clip_global_norm(grads, grad_clip)
    optimizer_step(actor.parameters(), grads, opt)
    return loss


class NStepAssembler:
    """Builds n-step records from a per-user stream of transitions."""

    def __init__(self, n: int, gamma: float):
        self.n = n
        self.gamma = gamma
        self.pending = deque()

    def push(self, state, action_idx, param_vec, reward, next_state):
        self.pending.append([state, action_idx, param_vec, reward, next_state])
        if len(self.pending) == self.n:
            return [self._emit(done=False)]
        return []

    def flush(self):
        out = []
        while self.pending:
            out.append(self._emit(done=True))
        return out

    def _emit(self, done: bool):
        k = len(self.pending)
        r_n = sum(self.gamma ** i * rec[3] for i, rec in enumerate(self.pending))
        first = self.pending.popleft()
        last_next = first[4] if k == 1 else self._last_next
        return (first[0], first[1], first[2], r_n, last_next, done, k)

    @property
    def _last_next(self):
        return self.pending[-1][4] if self.pending else None


@dataclass
class TrainingLog:
    rows: list = field(default_factory=list)

    def append(self, **kw):
        self.rows.append(kw)

    def final_mean_reward(self, n: int = 100) -> float:
        rewards = [r["reward"] for r in self.rows[-n:]]
        return float(np.mean(rewards)) if rewards else math.nan


class SidPdqnAgent:
    """Hybrid-action agent over a RisDownlinkEnv."""

    def __init__(self, env: RisDownlinkEnv, config: AgentConfig, seed: int = 0):
        self.env = env
        self.config = config
        self.rng = np.random.default_rng([seed, 21])
        net_rng = np.random.default_rng([seed, 22])
        n_l = env.codebook.size
        self.n_discrete = n_l
        from .env import STATE_DIM
        self.state_dim = STATE_DIM
        n_nets = env.n_users if config.per_user_networks else 1
        self.actors = [Mlp([self.state_dim, *config.hidden, 2 * n_l], net_rng,
                           head="actor", n_discrete=n_l) for _ in range(n_nets)]
        self.critics = [Mlp([self.state_dim + n_l, *config.hidden, n_l], net_rng)
                        for _ in range(n_nets)]
        self.critic_targets = [c.copy() for c in self.critics]
        self.actor_opts = [config.make_optimizer(config.beta) for _ in range(n_nets)]
        self.critic_opts = [config.make_optimizer(config.alpha) for _ in range(n_nets)]
        self.buffers = [ReplayBuffer(config.buffer_capacity, self.state_dim, n_l)
                        for _ in range(n_nets)]
        self.global_step = 0

    def _net_index(self, user: int) -> int:
        return user if self.config.per_user_networks else 0

    def _bootstrap_critic(self, i: int) -> Mlp:
        return self.critic_targets[i] if self.config.use_target else self.critics[i]

    def train(self, episodes: int, steps: int, log: TrainingLog | None = None) -> TrainingLog:
        log = log or TrainingLog()
        cfg = self.config
        env = self.env
        for ep in range(episodes):
            states = env.reset()
            assemblers = [NStepAssembler(cfg.n_step, cfg.gamma_discount)
                          for _ in range(env.n_users)]
            ep_rewards = []
            for _ in range(steps):
                eps = cfg.epsilon.value(self.global_step)
                actions, encoded, params_all = sid_collect_slot(
                    states, env.sid_order,
                    lambda u: self.actors[self._net_index(u)],
                    lambda u: self.critics[self._net_index(u)],
                    eps, env.codebook, env, self.rng)
                outcome = env.step(actions)
                next_enc = [sv.encode(env.p_max, env.n_max)
                            for sv in outcome.next_states]
                for u in range(env.n_users):
                    recs = assemblers[u].push(encoded[u], actions[u].discrete_index,
                                              params_all[u], outcome.reward, next_enc[u])
                    for rec in recs:
                        self.buffers[self._net_index(u)].insert(*rec)
                closs, aloss = self._learn()
                ep_rewards.append(outcome.reward)
                log.append(episode=ep, step=self.global_step, epsilon=eps,
                           reward=outcome.reward,
                           mean_episode_reward=float(np.mean(ep_rewards)),
                           critic_loss=closs, actor_loss=aloss,
                           buffer_fill=sum(len(b) for b in self.buffers))
                states = outcome.next_states
                self.global_step += 1
                if cfg.use_target and self.global_step % cfg.target_sync == 0:
                    self.critic_targets = [c.copy() for c in self.critics]
            for u in range(env.n_users):
                for rec in assemblers[u].flush():
                    self.buffers[self._net_index(u)].insert(*rec)
        return log

    def _learn(self):
        cfg = self.config
        closs = aloss = math.nan
        for i in range(len(self.actors)):
            buf = self.buffers[i]
            if len(buf) < cfg.warmup or len(buf) < cfg.batch_size:
                continue
            batch = buf.sample(self.rng, cfg.batch_size)
            y = n_step_target(batch, self._bootstrap_critic(i), self.actors[i],
                              cfg.gamma_discount)
            closs = critic_update(batch, self.critics[i], y, self.critic_opts[i],
                                  cfg.grad_clip)
            aloss = actor_update(batch, self.actors[i], self.critics[i],
                                 self.actor_opts[i], cfg.actor_loss_mode,
                                 cfg.grad_clip)
        return closs, aloss

    def evaluate(self, episodes: int, steps: int, profile: str = "eval"):
        """Greedy rollouts under the requested quadrature profile."""
        env = self.env
        saved = env.quadrature_profile
        env.quadrature_profile = profile
        rewards = []
        varpis = np.zeros(env.n_users)
        count = 0
        try:
            for _ in range(episodes):
                states = env.reset()
                for _ in range(steps):
                    actions, _, _ = sid_collect_slot(
                        states, env.sid_order,
                        lambda u: self.actors[self._net_index(u)],
                        lambda u: self.critics[self._net_index(u)],
                        0.0, env.codebook, env, self.rng)
                    outcome = env.step(actions)
                    rewards.append(outcome.reward)
                    varpis += np.asarray(outcome.per_user_varpi)
                    count += 1
                    states = outcome.next_states
        finally:
            env.quadrature_profile = saved
        mean_varpi = (varpis / max(count, 1)).tolist()
        return float(np.mean(rewards)) if rewards else math.nan, mean_varpi

    # -- persistence -----------------------------------------------------

    def to_blob(self) -> dict:
        return {
            "version": CHECKPOINT_VERSION,
            "algo": "sid_pdqn",
            "n_discrete": self.n_discrete,
            "actors": [a.to_blob() for a in self.actors],
            "critics": [c.to_blob() for c in self.critics],
            "critic_targets": [c.to_blob() for c in self.critic_targets],
            "actor_opts": [o.to_blob() for o in self.actor_opts],
            "critic_opts": [o.to_blob() for o in self.critic_opts],
            "rng_state": self.rng.bit_generator.state,
            "global_step": self.global_step,
        }

    def load_blob(self, blob: dict):
        if blob.get("version") != CHECKPOINT_VERSION:
            raise ValueError(f"checkpoint version mismatch: {blob.get('version')}")
        if blob.get("algo") != "sid_pdqn":
            raise ValueError(f"checkpoint algo mismatch: {blob.get('algo')}")
        self.actors = [Mlp.from_blob(b) for b in blob["actors"]]
        self.critics = [Mlp.from_blob(b) for b in blob["critics"]]
        self.critic_targets = [Mlp.from_blob(b) for b in blob["critic_targets"]]
        self.actor_opts = [OptimizerState.from_blob(b) for b in blob["actor_opts"]]
        self.critic_opts = [OptimizerState.from_blob(b) for b in blob["critic_opts"]]
        self.rng.bit_generator.state = blob["rng_state"]
        self.global_step = blob["global_step"]


class DqnAgent:
    """Plain DQN baseline over the fully discretised action space.

    The continuous blocklength parameter is collapsed onto a fixed grid so
    one flat index selects (codeword, blocklength level).
    """

    def __init__(self, env: RisDownlinkEnv, config: AgentConfig, seed: int = 0):
        self.env = env
        self.config = config
        self.rng = np.random.default_rng([seed, 31])
        net_rng = np.random.default_rng([seed, 32])
        levels = config.cbl_levels
        self.cbl_grid = np.array([0.5]) if levels == 1 else np.linspace(0.0, 1.0, levels)
        self.n_actions = env.codebook.size * len(self.cbl_grid)
        from .env import STATE_DIM
        self.state_dim = STATE_DIM
        self.q_net = Mlp([self.state_dim, *config.hidden, self.n_actions], net_rng)
        self.q_target = self.q_net.copy()
        self.opt = config.make_optimizer(config.alpha)
        self.buffer = ReplayBuffer(config.buffer_capacity, self.state_dim, 1)
        self.global_step = 0

    def flat_to_hybrid(self, flat: int) -> HybridAction:
        grid = len(self.cbl_grid)
        return HybridAction(flat // grid, float(self.cbl_grid[flat % grid]))

    def _select(self, enc: np.ndarray, epsilon: float) -> int:
        if self.rng.random() < epsilon:
            return int(self.rng.integers(self.n_actions))
        q, _ = self.q_net.forward(enc)
        return int(np.argmax(q[0]))

    def _collect(self, states, epsilon):
        env = self.env
        actions = [None] * env.n_users
        encoded = [None] * env.n_users
        flats = [None] * env.n_users
        remaining_power, remaining_cbl = env.p_max, env.n_max
        done_fracs, cbl_params = [], []
        for rank, user in enumerate(env.sid_order):
            sv = states[user]
            sv.remaining_power = remaining_power
            sv.remaining_cbl = remaining_cbl
            sv.slot_peers = np.array([
                rank / max(1, env.n_users),
                float(np.mean(done_fracs)) if done_fracs else 0.0,
                float(np.mean(cbl_params)) if cbl_params else 0.0,
            ])
            enc = sv.encode(env.p_max, env.n_max)
            flat = self._select(enc, epsilon)
            act = self.flat_to_hybrid(flat)
            actions[user], encoded[user], flats[user] = act, enc, flat
            p_req, _ = env.codebook.decode(act.discrete_index)
            n_req = env.blocklength_of(act.continuous_param)
            remaining_power = max(0.0, remaining_power - p_req)
            remaining_cbl = max(0.0, remaining_cbl - n_req)
            done_fracs.append(p_req / env.p_max)
            cbl_params.append(act.continuous_param)
        return actions, encoded, flats

    def train(self, episodes: int, steps: int, log: TrainingLog | None = None) -> TrainingLog:
        log = log or TrainingLog()
        cfg = self.config
        env = self.env
        zero_param = np.zeros(1)
        for ep in range(episodes):
            states = env.reset()
            assemblers = [NStepAssembler(cfg.n_step, cfg.gamma_discount)
                          for _ in range(env.n_users)]
            ep_rewards = []
            for _ in range(steps):
                eps = cfg.epsilon.value(self.global_step)
                actions, encoded, flats = self._collect(states, eps)
                outcome = env.step(actions)
                next_enc = [sv.encode(env.p_max, env.n_max)
                            for sv in outcome.next_states]
                for u in range(env.n_users):
                    for rec in assemblers[u].push(encoded[u], flats[u], zero_param,
                                                  outcome.reward, next_enc[u]):
                        self.buffer.insert(*rec)
                closs = self._learn()
                ep_rewards.append(outcome.reward)
                log.append(episode=ep, step=self.global_step, epsilon=eps,
                           reward=outcome.reward,
                           mean_episode_reward=float(np.mean(ep_rewards)),
                           critic_loss=closs, actor_loss=math.nan,
                           buffer_fill=len(self.buffer))
                states = outcome.next_states
                self.global_step += 1
                if cfg.use_target and self.global_step % cfg.target_sync == 0:
                    self.q_target = self.q_net.copy()
            for u in range(env.n_users):
                for rec in assemblers[u].flush():
                    self.buffer.insert(*rec)
        return log

    def _learn(self):
        cfg = self.config
        if len(self.buffer) < cfg.warmup or len(self.buffer) < cfg.batch_size:
            return math.nan
        batch = self.buffer.sample(self.rng, cfg.batch_size)
        tgt_net = self.q_target if cfg.use_target else self.q_net
        q_next, _ = tgt_net.forward(batch["next_states"])
        y = batch["n_reward"] + np.where(
            batch["done"], 0.0,
            cfg.gamma_discount ** batch["steps"] * q_next.max(axis=1))
        q, cache = self.q_net.forward(batch["states"])
        rows = np.arange(q.shape[0])
        err = q[rows, batch["action_idx"]] - y
        loss = float(np.mean(0.5 * err ** 2))
        dq = np.zeros_like(q)
        dq[rows, batch["action_idx"]] = err / q.shape[0]
        grads, _ = self.q_net.backward(cache, dq)
        if cfg.grad_clip > 0:
            grads = clip_global_norm(grads, cfg.grad_clip)
        optimizer_step(self.q_net.parameters(), grads, self.opt)
        return loss

    def evaluate(self, episodes: int, steps: int, profile: str = "eval"):
        env = self.env
        saved = env.quadrature_profile
        env.quadrature_profile = profile
        rewards = []
        varpis = np.zeros(env.n_users)
        count = 0
        try:
            for _ in range(episodes):
                states = env.reset()
                for _ in range(steps):
                    actions, _, _ = self._collect(states, 0.0)
                    outcome = env.step(actions)
                    rewards.append(outcome.reward)
                    varpis += np.asarray(outcome.per_user_varpi)
                    count += 1
                    states = outcome.next_states
        finally:
            env.quadrature_profile = saved
        mean_varpi = (varpis / max(count, 1)).tolist()
        return float(np.mean(rewards)) if rewards else math.nan, mean_varpi

    def to_blob(self) -> dict:
        return {
            "version": CHECKPOINT_VERSION,
            "algo": "dqn",
            "q_net": self.q_net.to_blob(),
            "q_target": self.q_target.to_blob(),
            "opt": self.opt.to_blob(),
            "cbl_grid": self.cbl_grid.tolist(),
            "rng_state": self.rng.bit_generator.state,
            "global_step": self.global_step,
        }

    def load_blob(self, blob: dict):
        if blob.get("version") != CHECKPOINT_VERSION:
            raise ValueError(f"checkpoint version mismatch: {blob.get('version')}")
        if blob.get("algo") != "dqn":
            raise ValueError(f"checkpoint algo mismatch: {blob.get('algo')}")
        self.q_net = Mlp.from_blob(blob["q_net"])
        self.q_target = Mlp.from_blob(blob["q_target"])
        self.opt = OptimizerState.from_blob(blob["opt"])
        self.cbl_grid = np.array(blob["cbl_grid"])
        self.rng.bit_generator.state = blob["rng_state"]
        self.global_step = blob["global_step"]


def random_policy_log(env: RisDownlinkEnv, episodes: int, steps: int,
                      rng: np.random.Generator) -> TrainingLog:
    """Uniform-random hybrid actions; the learnability reference."""
    log = TrainingLog()
    step_count = 0
    for ep in range(episodes):
        env.reset()
        ep_rewards = []
        for _ in range(steps):
            actions = [HybridAction(int(rng.integers(env.codebook.size)),
                                    float(rng.random()))
                       for _ in range(env.n_users)]
            outcome = env.step(actions)
            ep_rewards.append(outcome.reward)
            log.append(episode=ep, step=step_count, epsilon=1.0,
                       reward=outcome.reward,
                       mean_episode_reward=float(np.mean(ep_rewards)),
                       critic_loss=math.nan, actor_loss=math.nan, buffer_fill=0)
            step_count += 1
    return log


def save_checkpoint(path: str, agent, scenario: ScenarioConfig):
    blob = agent.to_blob()
    blob["config_hash"] = config_hash(scenario)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(blob, fh)


def load_checkpoint(path: str, agent, scenario: ScenarioConfig | None = None):
    with open(path, "r", encoding="utf-8") as fh:
        blob = json.load(fh)
    if scenario is not None and blob.get("config_hash") != config_hash(scenario):
        raise ValueError("checkpoint was trained under a different config")
    agent.load_blob(blob)
    return agent
