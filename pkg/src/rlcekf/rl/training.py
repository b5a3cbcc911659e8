"""Off-policy actor-critic training of the compensation policy.

Each iteration collects full RLC-EKF episodes with the current actor (plus
Gaussian exploration on the gain), stores the transitions, then runs gradient
steps: the critic regresses onto ``c + γ V_target(s')``, the actor descends
the one-step objective ``c(U) + γ V(s'(U))`` where both the cost and the next
residual are differentiable functions of the gain, and the target critic is
Polyak-averaged with rate ``kappa``.
"""

from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, field, replace

import numpy as np
import torch
from torch import nn

from ..ekf import EkfParams
from ..errors import ConfigurationError, TrainingError
from ..imu_sim import SimConfig, sample_initial_quaternion, simulate_episode
from .policy import CompensatorPolicy
from .replay import ReplayMemory
from .rollout import estimate_costs, run_rlcekf

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class TrainingConfig:
    gamma: float = 0.5
    critic_lr: float = 1e-3
    actor_lr: float = 3e-4
    kappa: float = 5e-3
    batch_size: int = 256
    iterations: int = 30
    episodes_per_iteration: int = 2
    gradient_steps: int = 50
    n_policies: int = 20
    n_validation: int = 50
    episode_samples: int = 1000
    buffer_capacity: int = 100_000
    exploration_start: float = 0.05
    exploration_end: float = 0.005
    actor_final_std: float = 0.01
    hidden: tuple[int, ...] = (64, 64)
    u_max: float = 1.0
    frame: str = "navigation"
    grad_clip: float | None = 1.0
    actor_uses_target: bool = True

    def __post_init__(self):
        if not 0.0 <= self.gamma < 1.0:
            raise ConfigurationError("gamma must lie in [0, 1)")
        if self.critic_lr < 0 or self.actor_lr < 0:
            raise ConfigurationError("learning rates must be non-negative")
        if not 0.0 < self.kappa <= 1.0:
            raise ConfigurationError("kappa must lie in (0, 1]")
        if min(self.batch_size, self.iterations, self.episodes_per_iteration,
               self.n_policies, self.n_validation) < 1 or self.episode_samples < 2:
            raise ConfigurationError("counts must be positive")
        if self.gradient_steps < 0:
            raise ConfigurationError("gradient_steps must be non-negative")

    def with_(self, **changes) -> "TrainingConfig":
        return replace(self, **changes)


@dataclass
class TrainingLog:
    episode_cost: list[float] = field(default_factory=list)
    critic_loss: list[float] = field(default_factory=list)
    actor_loss: list[float] = field(default_factory=list)

    def smoothed(self, window: int = 20) -> np.ndarray:
        c = np.asarray(self.episode_cost)
        w = min(window, len(c))
        return np.convolve(c, np.ones(w) / w, mode="valid")

    def to_dict(self) -> dict:
        return asdict(self)


# --------------------------------------------------------------------------
# torch mirrors of the numpy networks


def _mlp(sizes) -> nn.Sequential:
    mods = []
    for i, (a, b) in enumerate(zip(sizes[:-1], sizes[1:])):
        mods.append(nn.Linear(a, b))
        if i < len(sizes) - 2:
            mods.append(nn.Tanh())
    return nn.Sequential(*mods)


def _to_torch(layers) -> nn.Sequential:
    sizes = [layers[0][0].shape[1]] + [W.shape[0] for W, _ in layers]
    net = _mlp(sizes)
    lin = [m for m in net if isinstance(m, nn.Linear)]
    with torch.no_grad():
        for m, (W, b) in zip(lin, layers):
            m.weight.copy_(torch.from_numpy(W.copy()))
            m.bias.copy_(torch.from_numpy(b.copy()))
    return net


def _to_numpy(net: nn.Sequential):
    return [(m.weight.detach().numpy().copy(), m.bias.detach().numpy().copy())
            for m in net if isinstance(m, nn.Linear)]


def _t_quat_exp(v: torch.Tensor) -> torch.Tensor:
    theta = torch.sqrt((v * v).sum(-1, keepdim=True) + 1e-24)
    half = 0.5 * theta
    return torch.cat([torch.cos(half), torch.sin(half) / theta * v], -1)


def _t_product(a: torch.Tensor, b: torch.Tensor) -> torch.Tensor:
    aw, ax, ay, az = a.unbind(-1)
    bw, bx, by, bz = b.unbind(-1)
    return torch.stack([
        aw * bw - ax * bx - ay * by - az * bz,
        aw * bx + ax * bw + ay * bz - az * by,
        aw * by - ax * bz + ay * bw + az * bx,
        aw * bz + ax * by - ay * bx + az * bw,
    ], -1)


def correction_cost(pre_error: torch.Tensor, eta: torch.Tensor) -> torch.Tensor:
    """Squared angle of ``exp(δ) ⊗ exp(-η)``: the true error left after injecting ``η``."""
    d = _t_product(_t_quat_exp(pre_error), _t_quat_exp(-eta))
    n = torch.sqrt((d[..., 1:] ** 2).sum(-1) + 1e-24)
    ang = 2.0 * torch.atan2(n, d[..., 0].abs())
    return ang * ang


class Learner:
    """Owns the trainable parameters; rollout code only sees numpy snapshots."""

    def __init__(self, policy: CompensatorPolicy, config: TrainingConfig):
        self.config = config
        self.u_max = policy.u_max
        self.actor = _to_torch(policy.actor)
        self.critic = _to_torch(policy.critic)
        self.target = _to_torch(policy.target_critic)
        for p in self.target.parameters():
            p.requires_grad_(False)
        self.actor_opt = torch.optim.Adam(self.actor.parameters(), lr=config.actor_lr)
        self.critic_opt = torch.optim.Adam(self.critic.parameters(), lr=config.critic_lr)

    def step(self, batch: dict[str, np.ndarray]) -> tuple[float, float]:
        cfg = self.config
        b = {k: torch.from_numpy(v.astype(np.float32)) for k, v in batch.items()}
        not_done = 1.0 - b["done"][:, 0]

        with torch.no_grad():
            target = b["cost"][:, 0] + cfg.gamma * not_done * self.target(b["next_state"])[:, 0]
        v = self.critic(b["state"])[:, 0]
        critic_loss = ((v - target) ** 2).mean()
        self.critic_opt.zero_grad()
        critic_loss.backward()
        if cfg.grad_clip:
            nn.utils.clip_grad_norm_(self.critic.parameters(), cfg.grad_clip)
        if cfg.critic_lr > 0:
            self.critic_opt.step()

        gain = self.u_max * torch.tanh(self.actor(b["state"])).view(-1, 3, 6)
        eta = (gain @ b["eps_frame"].unsqueeze(-1))[..., 0]
        cost = correction_cost(b["pre_error"], eta)
        future = (self.target if cfg.actor_uses_target else self.critic)(eta)[:, 0]
        actor_loss = (cost + cfg.gamma * not_done * future).mean()
        self.actor_opt.zero_grad()
        actor_loss.backward()
        if cfg.grad_clip:
            nn.utils.clip_grad_norm_(self.actor.parameters(), cfg.grad_clip)
        if cfg.actor_lr > 0:
            self.actor_opt.step()

        with torch.no_grad():
            for pt, p in zip(self.target.parameters(), self.critic.parameters()):
                pt.lerp_(p, cfg.kappa)
        return critic_loss.item(), actor_loss.item()

    def publish(self, policy: CompensatorPolicy) -> None:
        """Copy the current parameters into ``policy``."""
        policy.set_weights(_to_numpy(self.actor), _to_numpy(self.critic), _to_numpy(self.target))


# --------------------------------------------------------------------------


def _episode_seeds(seed: int, n: int) -> list[int]:
    return [int(s.generate_state(1)[0]) for s in np.random.SeedSequence(seed).spawn(n)]


def train(sim_config: SimConfig, config: TrainingConfig = TrainingConfig(), seed: int = 0,
          ekf_params: EkfParams | None = None) -> tuple[CompensatorPolicy, TrainingLog]:
    """Train one compensation policy on episodes drawn from ``sim_config``.

    True and estimated initial attitudes are drawn uniformly for every episode.
    Raises :class:`TrainingError` with a diagnostic snapshot on a non-finite loss.
    """
    if ekf_params is None:
        ekf_params = EkfParams.from_noise(sim_config.noise, sim_config.dip_deg)
    sim = replace(sim_config, n_samples=config.episode_samples)
    root = np.random.SeedSequence(seed)
    init_ss, batch_ss, noise_ss, ep_ss = root.spawn(4)
    policy = CompensatorPolicy.initial(np.random.default_rng(init_ss), config.hidden, config.u_max,
                                       config.gamma, config.actor_final_std)
    learner = Learner(policy, config)
    memory = ReplayMemory(config.buffer_capacity)
    batch_rng = np.random.default_rng(batch_ss)
    noise_rng = np.random.default_rng(noise_ss)
    n_ep = config.iterations * config.episodes_per_iteration
    ep_seeds = _episode_seeds(int(ep_ss.generate_state(1)[0]), n_ep)
    history = TrainingLog()

    torch.manual_seed(seed)
    for it in range(config.iterations):
        frac = it / max(config.iterations - 1, 1)
        sigma = config.exploration_start + frac * (config.exploration_end - config.exploration_start)
        for j in range(config.episodes_per_iteration):
            s = ep_seeds[it * config.episodes_per_iteration + j]
            rec = simulate_episode(sim, s)
            q0 = sample_initial_quaternion(np.random.default_rng([s, 1]))
            _, tr = run_rlcekf(rec, q0, ekf_params, policy, config.frame, sigma, noise_rng, trace=True)
            memory.add_trace(tr)
            history.episode_cost.append(float(tr.cost.mean()))
        if len(memory) < config.batch_size:
            continue
        for g in range(config.gradient_steps):
            batch = memory.sample(config.batch_size, batch_rng)
            lc, la = learner.step(batch)
            if not (np.isfinite(lc) and np.isfinite(la)):
                raise TrainingError(
                    f"non-finite loss at iteration {it}, gradient step {g}",
                    {"seed": seed, "iteration": it, "step": g, "critic_loss": lc, "actor_loss": la,
                     "batch_mean": {k: v.mean(axis=0).tolist() for k, v in batch.items()}})
        history.critic_loss.append(lc)
        history.actor_loss.append(la)
        learner.publish(policy)
        log.debug("seed %d iteration %d: cost %.4f critic %.4g actor %.4g", seed, it,
                  np.mean(history.episode_cost[-config.episodes_per_iteration:]), lc, la)
    return policy, history


# --------------------------------------------------------------------------
# validation and selection


def make_validation_set(sim_config: SimConfig, n: int, seed: int) -> list[tuple[object, np.ndarray]]:
    """``n`` episodes with uniformly random true and estimated initial attitudes."""
    out = []
    for s in _episode_seeds(seed, n):
        rec = simulate_episode(sim_config, s)
        out.append((rec, sample_initial_quaternion(np.random.default_rng([s, 1]))))
    return out


def validation_cost(policy: CompensatorPolicy, episodes, ekf_params: EkfParams,
                    frame: str = "navigation") -> float:
    """Mean per-frame squared attitude error over the validation episodes."""
    if not episodes:
        raise ConfigurationError("validation set is empty")
    costs = []
    for rec, q0 in episodes:
        try:
            est = run_rlcekf(rec, q0, ekf_params, policy, frame)
        except ArithmeticError:
            return float("inf")
        costs.append(estimate_costs(rec.truth, est)[1:].mean())
    return float(np.mean(costs))


def select_policy(policies, episodes, ekf_params: EkfParams, frame: str = "navigation"
                  ) -> tuple[int, CompensatorPolicy, list[float]]:
    """Index, policy and per-policy costs of the lowest mean validation cost (first on ties)."""
    if not policies:
        raise ConfigurationError("no candidate policies")
    if not episodes:
        raise ConfigurationError("validation set is empty")
    costs = [validation_cost(p, episodes, ekf_params, frame) for p in policies]
    best = int(np.argmin(costs))
    return best, policies[best], costs


def train_and_select(sim_config: SimConfig, config: TrainingConfig = TrainingConfig(), seed: int = 0,
                     ekf_params: EkfParams | None = None):
    """Train ``config.n_policies`` independent policies and keep the best on validation.

    Returns ``(policy, logs, validation_costs)``.
    """
    if ekf_params is None:
        ekf_params = EkfParams.from_noise(sim_config.noise, sim_config.dip_deg)
    seeds = _episode_seeds(seed, config.n_policies + 1)
    trained = [train(sim_config, config, s, ekf_params) for s in seeds[:-1]]
    val = make_validation_set(sim_config, config.n_validation, seeds[-1])
    _, best, costs = select_policy([p for p, _ in trained], val, ekf_params, config.frame)
    return best, [lg for _, lg in trained], costs
