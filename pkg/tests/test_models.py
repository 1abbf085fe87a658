import numpy as np
import pytest
from scipy import integrate

from dwbc.models import (
    LogProbBounds,
    ObsNorm,
    disc_logit_grad,
    discriminator_forward,
    discriminator_logits,
    discriminator_values,
    make_discriminator,
    make_policy,
    normalize_logp,
    policy_log_prob,
    policy_log_prob_batch,
    policy_logp_with_grad,
    policy_sample,
)
from dwbc.nn import ParamVector, finite_diff_grad, relative_error, zeros_params


def unit_gaussian_policy():
    # zero weights and biases: mu = 0, log_std = 0 -> sigma = 1
    policy = make_policy(state_dim=2, action_dim=1, hidden=(4,), seed=0)
    policy.params = zeros_params(policy.spec)
    return policy


def test_log_prob_at_mode_matches_analytic_value():
    policy = unit_gaussian_policy()
    lp = policy_log_prob(policy, np.array([0.3, -0.7]), np.array([0.0]))
    # -0.5*log(2*pi) - log(1 + eps)
    assert lp == pytest.approx(-0.9189, abs=2e-4)
    assert lp == pytest.approx(-0.5 * np.log(2 * np.pi) - np.log(1 + 1e-6), abs=1e-12)


def test_log_prob_symmetry_at_zero_mean():
    policy = unit_gaussian_policy()
    s = np.array([1.0, 2.0])
    for a in (0.3, 0.85, 0.999):
        assert policy_log_prob(policy, s, np.array([a])) == pytest.approx(
            policy_log_prob(policy, s, np.array([-a])), abs=1e-12
        )


def test_log_prob_density_integrates_to_one():
    policy = make_policy(state_dim=2, action_dim=1, hidden=(8,), seed=3)
    s = np.array([0.4, -0.2])

    def density(a):
        return np.exp(policy_log_prob(policy, s, np.array([a])))

    total, _ = integrate.quad(density, -1 + 1e-9, 1 - 1e-9, limit=200)
    assert total == pytest.approx(1.0, abs=1e-3)


def test_log_prob_boundary_actions_clamped_not_rejected():
    policy = unit_gaussian_policy()
    lp = policy_log_prob(policy, np.zeros(2), np.array([1.0]))
    assert np.isfinite(lp)
    lp2 = policy_log_prob(policy, np.zeros(2), np.array([-1.5]))
    assert np.isfinite(lp2)


def test_log_prob_rejects_nan():
    policy = unit_gaussian_policy()
    with pytest.raises(ValueError):
        policy_log_prob(policy, np.array([np.nan, 0.0]), np.array([0.0]))
    with pytest.raises(ValueError):
        policy_log_prob(policy, np.zeros(2), np.array([np.nan]))


def test_log_prob_gradient_matches_finite_differences():
    policy = make_policy(state_dim=3, action_dim=2, hidden=(8, 8), seed=7)
    rng = np.random.default_rng(21)
    states = rng.normal(size=(4, 3))
    actions = np.tanh(rng.normal(size=(4, 2)))
    coeffs = rng.normal(size=4)

    def loss(p: ParamVector) -> float:
        probe = make_policy(state_dim=3, action_dim=2, hidden=(8, 8), seed=7)
        probe.params = p
        return float(np.sum(coeffs * policy_log_prob_batch(probe, states, actions)))

    _, analytic = policy_logp_with_grad(policy, states, actions, coeffs)
    numeric = finite_diff_grad(loss, policy.params, h=1e-5)
    assert relative_error(analytic, numeric) <= 1e-4


def test_obs_norm_changes_inputs():
    policy = make_policy(state_dim=2, action_dim=1, hidden=(4,), seed=5)
    raw = policy_log_prob(policy, np.array([2.0, 4.0]), np.array([0.1]))
    policy.obs_norm = ObsNorm(mean=np.array([2.0, 4.0]), std=np.array([1.0, 2.0]))
    normed = policy_log_prob(policy, np.array([2.0, 4.0]), np.array([0.1]))
    centered = policy_log_prob(
        make_policy(state_dim=2, action_dim=1, hidden=(4,), seed=5), np.zeros(2), np.array([0.1])
    )
    assert normed == pytest.approx(centered, abs=1e-12)
    assert normed != raw


def test_sample_deterministic_zero_mean():
    policy = unit_gaussian_policy()
    a = policy_sample(policy, np.array([0.5, 0.5]), deterministic=True)
    np.testing.assert_array_equal(a, np.zeros(1))


def test_samples_stay_inside_open_interval():
    policy = make_policy(state_dim=2, action_dim=2, hidden=(8,), seed=1)
    rng = np.random.default_rng(0)
    states = rng.normal(size=(10_000, 2))
    for i in range(0, 10_000, 500):
        a = policy_sample(policy, states[i], rng)
        assert np.all(np.abs(a) < 1.0)
    # scripted extreme: huge mean must still stay strictly inside
    policy.params.values[:] = 50.0
    a = policy_sample(policy, np.ones(2), deterministic=True)
    assert np.all(np.abs(a) < 1.0)


def test_sample_reproducible_per_seed():
    policy = make_policy(state_dim=2, action_dim=2, hidden=(8,), seed=2)
    s = np.array([0.1, -0.3])
    first = [policy_sample(policy, s, np.random.default_rng(123)) for _ in range(1)]
    second = [policy_sample(policy, s, np.random.default_rng(123)) for _ in range(1)]
    np.testing.assert_array_equal(first[0], second[0])


def test_normalize_logp_clamps_and_is_idempotent():
    b = LogProbBounds()
    assert normalize_logp(-50.0, b) == -20.0
    assert normalize_logp(3.0, b) == 3.0
    assert normalize_logp(25.0, b) == 10.0
    for x in (-50.0, 3.0, 25.0):
        once = normalize_logp(x, b)
        assert normalize_logp(once, b) == once
    with pytest.raises(ValueError):
        normalize_logp(float("inf"), b)
    with pytest.raises(ValueError):
        LogProbBounds(lo=5.0, hi=5.0)


def test_discriminator_zero_output_layer_gives_half():
    disc = make_discriminator(state_dim=3, action_dim=2, seed=4)
    final = len(disc.params.layout) - 1
    disc.params.weight(final)[:] = 0.0
    disc.params.bias(final)[:] = 0.0
    rng = np.random.default_rng(5)
    for _ in range(5):
        out = discriminator_forward(disc, rng.normal(size=3), rng.normal(size=2), 1.0)
        assert out == 0.5


def test_discriminator_output_strictly_inside_unit_interval():
    disc = make_discriminator(state_dim=2, action_dim=1, seed=8)
    rng = np.random.default_rng(11)
    states = rng.normal(size=(10_000, 2)) * 3
    actions = rng.uniform(-1, 1, size=(10_000, 1))
    logps = rng.uniform(-20, 10, size=10_000)
    vals = discriminator_values(disc, states, actions, logps)
    assert np.all(vals > 0.0) and np.all(vals < 1.0)
    # saturated logits still avoid exact 0/1
    disc.params.values[:] = 30.0
    v = discriminator_forward(disc, np.ones(2), np.ones(1), 10.0)
    assert 0.0 < v < 1.0


def test_discriminator_logp_stream_is_wired_in():
    disc = make_discriminator(state_dim=2, action_dim=1, seed=9)
    s, a = np.array([0.2, -0.4]), np.array([0.3])
    base = discriminator_forward(disc, s, a, 1.0)
    moved = discriminator_forward(disc, s, a, 2.0)
    assert base != moved


def test_discriminator_handcrafted_logp_weights():
    # single unit per stream, identity merge readout: logit = relu(s+a sum) + relu(2*logp)
    disc = make_discriminator(
        state_dim=1, action_dim=1, sa_width=1, logp_width=1, merge_hidden=(), seed=0
    )
    disc.params.values[:] = 0.0
    disc.params.weight(0)[:] = np.array([[1.0], [1.0]])
    disc.params.weight(1)[:] = np.array([[2.0]])
    disc.params.weight(2)[:] = np.array([[1.0], [1.0]])
    z = discriminator_logits(disc, np.array([[0.5]]), np.array([[0.25]]), np.array([3.0]))
    assert z[0] == pytest.approx(0.75 + 6.0, abs=1e-12)
    z2 = discriminator_logits(disc, np.array([[0.5]]), np.array([[0.25]]), np.array([4.0]))
    assert z2[0] == pytest.approx(0.75 + 8.0, abs=1e-12)


def test_discriminator_rejects_dimension_mismatch():
    disc = make_discriminator(state_dim=3, action_dim=2, seed=1)
    with pytest.raises(ValueError):
        discriminator_forward(disc, np.zeros(2), np.zeros(2), 0.0)
    with pytest.raises(ValueError):
        discriminator_forward(disc, np.zeros(3), np.zeros(3), 0.0)


def test_disc_logit_grad_matches_finite_differences():
    disc = make_discriminator(
        state_dim=3, action_dim=2, sa_width=6, logp_width=4, merge_hidden=(8,), seed=13
    )
    rng = np.random.default_rng(17)
    states = rng.normal(size=(5, 3))
    actions = rng.uniform(-1, 1, size=(5, 2))
    logps = rng.uniform(-5, 5, size=5)
    coeffs = rng.normal(size=5)

    def loss(p: ParamVector) -> float:
        probe = make_discriminator(
            state_dim=3, action_dim=2, sa_width=6, logp_width=4, merge_hidden=(8,), seed=13
        )
        probe.params = p
        return float(np.sum(coeffs * discriminator_logits(probe, states, actions, logps)))

    _, analytic = disc_logit_grad(disc, states, actions, logps, coeffs)
    numeric = finite_diff_grad(loss, disc.params, h=1e-5)
    assert relative_error(analytic, numeric) <= 1e-4
