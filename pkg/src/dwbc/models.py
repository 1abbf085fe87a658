"""The two learned functions: a tanh-squashed Gaussian policy and a
two-stream discriminator over (state, action, normalized log-likelihood)."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .nn import (
    LayerSlot,
    MlpSpec,
    ParamVector,
    _act,
    _act_deriv,
    build_layout,
    init_params,
    mlp_backward,
    mlp_forward_cached,
    spec_layout,
)

TANH_EPS = 1e-6  # inside log(1 - a^2 + eps)
ACTION_CLIP = 1.0 - 1e-6  # dataset actions may sit on the boundary
SIGMOID_GUARD = 1e-12  # keeps discriminator outputs strictly inside (0, 1)
LOG_2PI = float(np.log(2.0 * np.pi))


@dataclass(frozen=True)
class LogProbBounds:
    """Clamp range applied to log-likelihood values before the discriminator."""

    lo: float = -20.0
    hi: float = 10.0

    def __post_init__(self) -> None:
        if not self.lo < self.hi:
            raise ValueError(f"need lo < hi, got [{self.lo}, {self.hi}]")


def normalize_logp(logp: float, bounds: LogProbBounds = LogProbBounds()) -> float:
    """Clamp a log-likelihood into the bounds; idempotent."""
    if not np.isfinite(logp):
        raise ValueError(f"log-likelihood must be finite, got {logp}")
    return float(min(max(logp, bounds.lo), bounds.hi))


def normalize_logp_array(logps: np.ndarray, bounds: LogProbBounds = LogProbBounds()) -> np.ndarray:
    logps = np.asarray(logps, dtype=np.float64)
    if not np.isfinite(logps).all():
        raise ValueError("log-likelihood array contains non-finite entries")
    return np.clip(logps, bounds.lo, bounds.hi)


@dataclass
class ObsNorm:
    """Per-dimension affine input normalization, fixed at training time."""

    mean: np.ndarray
    std: np.ndarray

    def __post_init__(self) -> None:
        self.mean = np.asarray(self.mean, dtype=np.float64).ravel()
        self.std = np.asarray(self.std, dtype=np.float64).ravel()
        if self.mean.shape != self.std.shape:
            raise ValueError("mean and std must have equal shapes")
        if np.any(self.std <= 0.0):
            raise ValueError("std entries must be positive")

    def apply(self, states: np.ndarray) -> np.ndarray:
        return (np.asarray(states, dtype=np.float64) - self.mean) / self.std


@dataclass
class GaussianPolicy:
    """MLP emitting mean and log-std of a tanh-squashed Gaussian over actions."""

    spec: MlpSpec
    params: ParamVector
    state_dim: int
    action_dim: int
    log_std_bounds: tuple[float, float] = (-5.0, 2.0)
    obs_norm: ObsNorm | None = None


def make_policy(
    state_dim: int,
    action_dim: int,
    hidden: tuple[int, ...] = (64, 64),
    seed: int = 0,
    activation: str = "relu",
    log_std_bounds: tuple[float, float] = (-5.0, 2.0),
    obs_norm: ObsNorm | None = None,
) -> GaussianPolicy:
    spec = MlpSpec((state_dim, *hidden, 2 * action_dim), activation=activation, seed=seed)
    return GaussianPolicy(spec, init_params(spec), state_dim, action_dim, log_std_bounds, obs_norm)


def _policy_inputs(policy: GaussianPolicy, states: np.ndarray) -> np.ndarray:
    states = np.asarray(states, dtype=np.float64)
    if policy.obs_norm is not None:
        states = policy.obs_norm.apply(states)
    return states


def _squash_terms(policy: GaussianPolicy, actions: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Clamped actions -> (pre-squash values u, per-sample tanh correction)."""
    a = np.clip(np.asarray(actions, dtype=np.float64), -ACTION_CLIP, ACTION_CLIP)
    u = np.arctanh(a)
    correction = np.sum(np.log(1.0 - a * a + TANH_EPS), axis=-1)
    return u, correction


def policy_log_prob_batch(policy: GaussianPolicy, states: np.ndarray, actions: np.ndarray) -> np.ndarray:
    states = np.asarray(states, dtype=np.float64)
    actions = np.asarray(actions, dtype=np.float64)
    if not (np.isfinite(states).all() and np.isfinite(actions).all()):
        raise ValueError("states and actions must be finite")
    if states.shape[1] != policy.state_dim or actions.shape[1] != policy.action_dim:
        raise ValueError(
            f"expected dims ({policy.state_dim}, {policy.action_dim}), "
            f"got ({states.shape[1]}, {actions.shape[1]})"
        )
    out, _ = mlp_forward_cached(policy.spec, policy.params, _policy_inputs(policy, states))
    da = policy.action_dim
    mu = out[:, :da]
    log_std = np.clip(out[:, da:], *policy.log_std_bounds)
    u, correction = _squash_terms(policy, actions)
    inv_var = np.exp(-2.0 * log_std)
    diff = u - mu
    gauss = np.sum(-0.5 * LOG_2PI - log_std - 0.5 * diff * diff * inv_var, axis=1)
    return gauss - correction


def policy_log_prob(policy: GaussianPolicy, s: np.ndarray, a: np.ndarray) -> float:
    """Log-density of action a under the squashed Gaussian at state s."""
    s = np.asarray(s, dtype=np.float64)
    a = np.asarray(a, dtype=np.float64)
    return float(policy_log_prob_batch(policy, s[None, :], a[None, :])[0])


def policy_logp_with_grad(
    policy: GaussianPolicy, states: np.ndarray, actions: np.ndarray, coeffs: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Per-sample log-probs plus the gradient of sum_i coeffs[i] * logp[i].

    The workhorse for every policy-side loss: each loss is a weighted sum of
    log-likelihood terms, so its gradient is one backward pass with per-row
    coefficients.
    """
    states = np.asarray(states, dtype=np.float64)
    actions = np.asarray(actions, dtype=np.float64)
    coeffs = np.asarray(coeffs, dtype=np.float64)
    out, cache = mlp_forward_cached(policy.spec, policy.params, _policy_inputs(policy, states))
    da = policy.action_dim
    mu = out[:, :da]
    raw_log_std = out[:, da:]
    lo, hi = policy.log_std_bounds
    log_std = np.clip(raw_log_std, lo, hi)
    clamp_mask = ((raw_log_std > lo) & (raw_log_std < hi)).astype(np.float64)
    u, correction = _squash_terms(policy, actions)
    inv_var = np.exp(-2.0 * log_std)
    diff = u - mu
    logps = np.sum(-0.5 * LOG_2PI - log_std - 0.5 * diff * diff * inv_var, axis=1) - correction
    # d logp / d mu = diff * inv_var ; d logp / d log_std = diff^2 * inv_var - 1
    dmu = coeffs[:, None] * diff * inv_var
    dls = coeffs[:, None] * (diff * diff * inv_var - 1.0) * clamp_mask
    grad, _ = mlp_backward(policy.spec, policy.params, cache, np.concatenate([dmu, dls], axis=1))
    return logps, grad


def policy_sample(
    policy: GaussianPolicy,
    s: np.ndarray,
    rng: np.random.Generator | None = None,
    deterministic: bool = False,
) -> np.ndarray:
    """Draw an action; deterministic mode returns tanh of the mean."""
    s = np.asarray(s, dtype=np.float64)
    out, _ = mlp_forward_cached(policy.spec, policy.params, _policy_inputs(policy, s[None, :]))
    da = policy.action_dim
    mu = out[0, :da]
    if deterministic:
        pre = mu
    else:
        if rng is None:
            raise ValueError("stochastic sampling needs a generator")
        std = np.exp(np.clip(out[0, da:], *policy.log_std_bounds))
        pre = mu + std * rng.standard_normal(da)
    return np.clip(np.tanh(pre), -1.0 + 1e-12, 1.0 - 1e-12)


@dataclass
class TwoStreamDiscriminator:
    """Separate first-layer streams for (s, a) and the normalized
    log-likelihood, merged into an MLP ending in a single logit."""

    sa_spec: MlpSpec
    logp_spec: MlpSpec
    merge_spec: MlpSpec
    params: ParamVector
    state_dim: int
    action_dim: int
    logp_bounds: LogProbBounds = LogProbBounds()
    obs_norm: ObsNorm | None = None

    @property
    def activation(self) -> str:
        return self.merge_spec.activation


def make_discriminator(
    state_dim: int,
    action_dim: int,
    sa_width: int = 32,
    logp_width: int = 32,
    merge_hidden: tuple[int, ...] = (64,),
    seed: int = 0,
    activation: str = "relu",
    logp_bounds: LogProbBounds = LogProbBounds(),
    obs_norm: ObsNorm | None = None,
) -> TwoStreamDiscriminator:
    sa_spec = MlpSpec((state_dim + action_dim, sa_width), activation=activation, seed=seed)
    logp_spec = MlpSpec((1, logp_width), activation=activation, seed=seed + 1)
    merge_spec = MlpSpec((sa_width + logp_width, *merge_hidden, 1), activation=activation, seed=seed + 2)
    # one flat vector: [sa layer | logp layer | merge layers]
    dims = [(sa_spec.in_dim, sa_width), (1, logp_width)]
    sizes = merge_spec.layer_sizes
    dims += [(sizes[i], sizes[i + 1]) for i in range(merge_spec.n_layers)]
    layout = build_layout(dims)
    values = np.concatenate(
        [init_params(sa_spec).values, init_params(logp_spec).values, init_params(merge_spec).values]
    )
    params = ParamVector(values, layout)
    return TwoStreamDiscriminator(
        sa_spec, logp_spec, merge_spec, params, state_dim, action_dim, logp_bounds, obs_norm
    )


def _disc_inputs(
    disc: TwoStreamDiscriminator, states: np.ndarray, actions: np.ndarray, logps: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    states = np.asarray(states, dtype=np.float64)
    actions = np.asarray(actions, dtype=np.float64)
    logps = np.asarray(logps, dtype=np.float64).reshape(-1, 1)
    if states.shape[1] != disc.state_dim or actions.shape[1] != disc.action_dim:
        raise ValueError(
            f"expected dims ({disc.state_dim}, {disc.action_dim}), "
            f"got ({states.shape[1]}, {actions.shape[1]})"
        )
    if logps.shape[0] != states.shape[0]:
        raise ValueError("log-likelihood column must match the batch length")
    if disc.obs_norm is not None:
        states = disc.obs_norm.apply(states)
    return np.concatenate([states, actions], axis=1), logps


def discriminator_logits_cached(
    disc: TwoStreamDiscriminator, states: np.ndarray, actions: np.ndarray, logps: np.ndarray
) -> tuple[np.ndarray, dict]:
    sa, lp = _disc_inputs(disc, states, actions, logps)
    act = disc.activation
    z_sa = sa @ disc.params.weight(0) + disc.params.bias(0)
    h_sa = _act(act, z_sa)
    z_lp = lp @ disc.params.weight(1) + disc.params.bias(1)
    h_lp = _act(act, z_lp)
    merged = np.concatenate([h_sa, h_lp], axis=1)
    merge_params = _merge_view(disc)
    out, merge_cache = mlp_forward_cached(disc.merge_spec, merge_params, merged)
    cache = {"sa": (sa, z_sa), "lp": (lp, z_lp), "merge": merge_cache, "merge_params": merge_params}
    return out[:, 0], cache


def _merge_view(disc: TwoStreamDiscriminator) -> ParamVector:
    # merge layers occupy layout slots 2.. of the flat vector; re-expose them
    # as a standalone ParamVector sharing the same storage
    start = disc.params.layout[2].w_off
    slots = tuple(
        LayerSlot(s.n_in, s.n_out, s.w_off - start, s.b_off - start)
        for s in disc.params.layout[2:]
    )
    return ParamVector(disc.params.values[start:], slots)


def discriminator_logits(
    disc: TwoStreamDiscriminator, states: np.ndarray, actions: np.ndarray, logps: np.ndarray
) -> np.ndarray:
    return discriminator_logits_cached(disc, states, actions, logps)[0]


def sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z, dtype=np.float64)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def discriminator_values(
    disc: TwoStreamDiscriminator, states: np.ndarray, actions: np.ndarray, logps: np.ndarray
) -> np.ndarray:
    """Batch of discriminator outputs, guarded strictly inside (0, 1)."""
    z = discriminator_logits(disc, states, actions, logps)
    return np.clip(sigmoid(z), SIGMOID_GUARD, 1.0 - SIGMOID_GUARD)


def discriminator_forward(
    disc: TwoStreamDiscriminator, s: np.ndarray, a: np.ndarray, logp: float
) -> float:
    """Single-sample output in (0, 1); logp must already be normalized."""
    s = np.asarray(s, dtype=np.float64)
    a = np.asarray(a, dtype=np.float64)
    return float(discriminator_values(disc, s[None, :], a[None, :], np.array([logp]))[0])


def disc_logit_grad(
    disc: TwoStreamDiscriminator,
    states: np.ndarray,
    actions: np.ndarray,
    logps: np.ndarray,
    coeffs: np.ndarray,
) -> tuple[np.ndarray, np.ndarray]:
    """Logits plus the gradient of sum_i coeffs[i] * logit[i] w.r.t. params."""
    z, cache = discriminator_logits_cached(disc, states, actions, logps)
    coeffs = np.asarray(coeffs, dtype=np.float64)
    grad = np.zeros(len(disc.params), dtype=np.float64)
    merge_params = cache["merge_params"]
    merge_grad, d_merged = mlp_backward(
        disc.merge_spec, merge_params, cache["merge"], coeffs[:, None]
    )
    start = disc.params.layout[2].w_off
    grad[start:] = merge_grad
    act = disc.activation
    sa_width = disc.sa_spec.out_dim
    for slot_idx, (inp, z_pre), delta in (
        (0, cache["sa"], d_merged[:, :sa_width]),
        (1, cache["lp"], d_merged[:, sa_width:]),
    ):
        delta = delta * _act_deriv(act, z_pre, _act(act, z_pre))
        slot = disc.params.layout[slot_idx]
        grad[slot.w_off : slot.b_off] = (inp.T @ delta).ravel()
        grad[slot.b_off : slot.end] = delta.sum(axis=0)
    return z, grad
