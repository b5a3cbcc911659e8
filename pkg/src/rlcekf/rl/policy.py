"""Compensation policy and the RL correction stage of the filter.

The actor maps the previously injected residual ``η̂_{t-1}`` to a 3x6 gain
``U_t``; the correction ``η̂_t = U_t ε^RL`` is injected on the left of the
normalized EKF estimate. Inference runs in numpy; weights are held as float32
so that saving and loading is lossless.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..ekf import EkfParams, FilterState, measurement_model
from ..errors import ConfigurationError
from ..rotation import conjugate, quat_exp, quat_left, quat_log, quat_multiply, quat_to_rotmat

STATE_DIM = 3
GAIN_SHAPE = (3, 6)
ACTION_DIM = 18
FRAMES = ("navigation", "sensor")

Layer = tuple[np.ndarray, np.ndarray]


def _init_mlp(sizes, rng: np.random.Generator, final_std: float | None = None) -> list[Layer]:
    layers = []
    for i, (n_in, n_out) in enumerate(zip(sizes[:-1], sizes[1:])):
        last = i == len(sizes) - 2
        if last and final_std is not None:
            W = rng.normal(0.0, final_std, (n_out, n_in))
        else:
            W = rng.uniform(-1.0, 1.0, (n_out, n_in)) * np.sqrt(6.0 / (n_in + n_out))
        layers.append((W.astype(np.float32), np.zeros(n_out, dtype=np.float32)))
    return layers


def _forward(layers: list[Layer], x: np.ndarray) -> np.ndarray:
    h = x
    for W, b in layers[:-1]:
        h = np.tanh(h @ W.T + b)
    W, b = layers[-1]
    return h @ W.T + b


def layer_sizes(layers: list[Layer]) -> list[int]:
    return [layers[0][0].shape[1]] + [W.shape[0] for W, _ in layers]


@dataclass
class CompensatorPolicy:
    """Actor, critic and target critic as lists of ``(W, b)`` float32 pairs.

    ``W`` has shape ``(out, in)``. The actor output is squashed to
    ``u_max * tanh(.)`` and reshaped row-major to ``U`` (3x6).
    """

    actor: list[Layer]
    critic: list[Layer]
    target_critic: list[Layer]
    u_max: float = 1.0
    gamma: float = 0.5
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        if layer_sizes(self.actor)[0] != STATE_DIM or layer_sizes(self.actor)[-1] != ACTION_DIM:
            raise ConfigurationError("actor must map R^3 to R^18")
        if layer_sizes(self.critic)[0] != STATE_DIM or layer_sizes(self.critic)[-1] != 1:
            raise ConfigurationError("critic must map R^3 to R")
        if layer_sizes(self.target_critic) != layer_sizes(self.critic):
            raise ConfigurationError("target critic must mirror the critic")
        if not self.u_max > 0:
            raise ConfigurationError("u_max must be positive")

    @classmethod
    def initial(cls, seed=None, hidden=(64, 64), u_max: float = 1.0, gamma: float = 0.5,
                actor_final_std: float = 0.01) -> "CompensatorPolicy":
        """Fresh networks; the actor's last layer is drawn near zero so ``U ≈ 0``."""
        rng = np.random.default_rng(seed)
        actor = _init_mlp([STATE_DIM, *hidden, ACTION_DIM], rng, final_std=actor_final_std)
        critic = _init_mlp([STATE_DIM, *hidden, 1], rng)
        target = [(W.copy(), b.copy()) for W, b in critic]
        return cls(actor, critic, target, u_max, gamma)

    @classmethod
    def zero(cls, hidden=(64, 64), u_max: float = 1.0, gamma: float = 0.5) -> "CompensatorPolicy":
        """Policy whose gain is exactly zero: the RLC-EKF reduces to the plain EKF."""
        return cls.initial(0, hidden, u_max, gamma, actor_final_std=0.0)

    def _f64(self):
        # float64 copies of the float32 weights; invalidated by set_weights
        if "actor" not in self._cache:
            self._cache["actor"] = [(W.astype(float), b.astype(float)) for W, b in self.actor]
            self._cache["critic"] = [(W.astype(float), b.astype(float)) for W, b in self.critic]
        return self._cache["actor"], self._cache["critic"]

    def set_weights(self, actor=None, critic=None, target_critic=None) -> None:
        if actor is not None:
            self.actor = [(np.asarray(W, np.float32), np.asarray(b, np.float32)) for W, b in actor]
        if critic is not None:
            self.critic = [(np.asarray(W, np.float32), np.asarray(b, np.float32)) for W, b in critic]
        if target_critic is not None:
            self.target_critic = [(np.asarray(W, np.float32), np.asarray(b, np.float32))
                                  for W, b in target_critic]
        self._cache.clear()

    def copy(self) -> "CompensatorPolicy":
        dup = lambda layers: [(W.copy(), b.copy()) for W, b in layers]  # noqa: E731
        return CompensatorPolicy(dup(self.actor), dup(self.critic), dup(self.target_critic),
                                 self.u_max, self.gamma)

    def action(self, residual: np.ndarray) -> np.ndarray:
        """Flattened gain (18,) for one residual, or (n, 18) for a batch."""
        actor, _ = self._f64()
        return self.u_max * np.tanh(_forward(actor, np.asarray(residual, dtype=float)))

    def gain(self, residual: np.ndarray) -> np.ndarray:
        return self.action(residual).reshape(GAIN_SHAPE)

    def value(self, residual: np.ndarray) -> np.ndarray:
        _, critic = self._f64()
        return _forward(critic, np.asarray(residual, dtype=float))[..., 0]

    def all_finite(self) -> bool:
        return all(np.all(np.isfinite(a)) for net in (self.actor, self.critic, self.target_critic)
                   for layer in net for a in layer)


def rl_innovation(q: np.ndarray, y: np.ndarray, params: EkfParams) -> np.ndarray:
    """``ε^RL = (y_a; y_m) - h(q̃_{t|t})`` at the normalized EKF estimate."""
    return np.asarray(y, dtype=float) - measurement_model(q, params)


def frame_innovation(q: np.ndarray, eps: np.ndarray, frame: str = "navigation") -> np.ndarray:
    """Innovation in the coordinates the gain acts on.

    ``"navigation"`` rotates both 3-blocks by ``R^nb(q̃)``; ``"sensor"`` returns
    ``eps`` untouched.
    """
    if frame == "sensor":
        return eps
    if frame != "navigation":
        raise ConfigurationError(f"unknown compensation frame {frame!r}")
    R = quat_to_rotmat(q)
    return np.concatenate([R @ eps[:3], R @ eps[3:]])


def inject(state: FilterState, eta: np.ndarray) -> FilterState:
    """``q̂ = exp(η̂) ⊗ q̃`` and ``P̂ = M P̃ Mᵀ`` with ``M = (exp(η̂))^L``."""
    M = quat_left(quat_exp(eta))
    P = M @ state.P @ M.T
    return FilterState(M @ state.q, 0.5 * (P + P.T))


def compensate(state: FilterState, eps_rl: np.ndarray, policy: CompensatorPolicy,
               prev_residual: np.ndarray, frame: str = "navigation",
               action_noise: np.ndarray | None = None) -> tuple[FilterState, np.ndarray]:
    """Apply the RL correction to a normalized EKF state.

    Returns the compensated state and the injected residual ``η̂_t``.
    ``action_noise`` (18,) is added to the flattened gain during data collection.
    """
    U = policy.action(prev_residual)
    if action_noise is not None:
        U = U + action_noise
    return apply_gain(state, eps_rl, U, frame)


def apply_gain(state: FilterState, eps_rl: np.ndarray, action: np.ndarray,
               frame: str = "navigation") -> tuple[FilterState, np.ndarray]:
    eta = action.reshape(GAIN_SHAPE) @ frame_innovation(state.q, eps_rl, frame)
    return inject(state, eta), eta


def episode_cost(q_true: np.ndarray, q_hat: np.ndarray) -> float:
    """Squared attitude error ``|log(q_true ⊗ q̂*)|²`` (rad²)."""
    v = quat_log(quat_multiply(q_true, conjugate(q_hat)))
    return float(v @ v)
