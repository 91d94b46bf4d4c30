"""Tests for the adaptive loss-weight scheme."""

import numpy as np
import pytest

from poropinn import weights


def make_state(lams, initial, alpha=1.0, beta=0.1):
    st = weights.WeightState.uniform(len(lams), alpha=alpha, beta=beta)
    st.lambdas = np.asarray(lams, dtype=np.float64)
    st.capture_initial(np.asarray(initial, dtype=np.float64))
    return st


def test_scores_reference_arithmetic():
    # ratios (0.5, 0.2, 0.3) normalized by their mean 1/3
    s = weights.scores(np.array([5.0, 2.0, 3.0]),
                       np.array([10.0, 10.0, 10.0]))
    np.testing.assert_allclose(s, [1.5, 0.6, 0.9], rtol=1e-15)


def test_scores_uniform_progress_is_one():
    s = weights.scores(np.array([0.4, 0.04]), np.array([10.0, 1.0]))
    np.testing.assert_allclose(s, [1.0, 1.0], rtol=1e-15)


def test_gradnorm_target_arithmetic_beta_one():
    # two terms, G = (2, 1), equal scores -> targets E[G]/G_i = (0.75, 1.5)
    st = make_state([1.0, 1.0], [1.0, 1.0], beta=1.0)
    new = weights.gradnorm_update(st, np.array([2.0, 1.0]),
                                  np.array([1.0, 1.0]))
    np.testing.assert_allclose(new.lambdas, [0.75, 1.5], rtol=1e-15)


def test_gradnorm_relaxation_beta_small():
    # same setup under beta = 0.1: lambda = 0.9 * 1 + 0.1 * target
    st = make_state([1.0, 1.0], [1.0, 1.0], beta=0.1)
    new = weights.gradnorm_update(st, np.array([2.0, 1.0]),
                                  np.array([1.0, 1.0]))
    np.testing.assert_allclose(new.lambdas, [0.975, 1.05], rtol=1e-15)


def test_gradnorm_fixed_point():
    # equal weighted gradient norms and equal scores: nothing moves
    st = make_state([2.0, 2.0, 2.0], [1.0, 1.0, 1.0], beta=0.7)
    G = np.array([5.0, 5.0, 5.0])
    new = weights.gradnorm_update(st, G, np.array([0.5, 0.5, 0.5]))
    np.testing.assert_allclose(new.lambdas, st.lambdas, rtol=1e-15)


def test_gradnorm_beta_one_rescales_exactly():
    """With beta = 1 the post-update weighted norms hit the targets exactly:
    lambda'_i G_i / lambda_i = E[G] s_i."""
    rng = np.random.default_rng(0)
    lams = rng.uniform(0.5, 2.0, 4)
    losses = rng.uniform(0.1, 1.0, 4)
    init = rng.uniform(1.0, 2.0, 4)
    G = rng.uniform(0.5, 3.0, 4)
    st = make_state(lams, init, beta=1.0)
    new = weights.gradnorm_update(st, G, losses)
    s = weights.scores(losses, init)
    np.testing.assert_allclose(new.lambdas * G / lams, np.mean(G) * s,
                               rtol=1e-12)


def test_gradnorm_positivity():
    rng = np.random.default_rng(3)
    st = make_state(rng.uniform(0.1, 5, 6), rng.uniform(0.1, 5, 6))
    for _ in range(50):
        st = weights.gradnorm_update(st, rng.uniform(1e-6, 10, 6),
                                     rng.uniform(1e-6, 10, 6))
        assert np.all(st.lambdas > 0)
        assert np.all(np.isfinite(st.lambdas))


def test_gradnorm_nonfinite_keeps_previous():
    st = make_state([1.0, 2.0], [1.0, 1.0])
    new = weights.gradnorm_update(st, np.array([np.nan, 1.0]),
                                  np.array([1.0, 1.0]))
    np.testing.assert_array_equal(new.lambdas, [1.0, 2.0])


def test_gradnorm_zero_grad_term_kept():
    st = make_state([1.0, 2.0], [1.0, 1.0])
    new = weights.gradnorm_update(st, np.array([0.0, 1.0]),
                                  np.array([1.0, 1.0]))
    assert new.lambdas[0] == 1.0  # untouched
    assert new.lambdas[1] > 0


def test_capture_initial_pins_zero_loss():
    st = weights.WeightState.uniform(2)
    st.capture_initial(np.array([0.0, 3.0]))
    s = weights.scores(np.array([1.0, 3.0]), st.initial_losses, st.pinned)
    assert np.isfinite(s).all()
    # capture only happens once
    st.capture_initial(np.array([9.0, 9.0]))
    assert st.initial_losses[1] == 3.0


def test_capture_initial_floors_near_zero_loss():
    # a term starting at ~1e-6 of the largest initial loss must not be able
    # to dominate every score through L/L(0); its L(0) is floored to the
    # healthy-term mean so later growth still raises its score
    st = weights.WeightState.uniform(3)
    st.capture_initial(np.array([1e-6, 0.2, 1.0]))
    assert st.pinned.tolist() == [False, False, False]
    assert st.initial_losses[0] == pytest.approx(0.6)  # mean(0.2, 1.0)
    rel = np.array([0.03 / 0.6, 0.01 / 0.2, 0.5 / 1.0])
    s = weights.scores(np.array([0.03, 0.01, 0.5]), st.initial_losses,
                       st.pinned)
    np.testing.assert_allclose(s, rel / rel.mean())
    assert s[1] > 0.01  # not crushed by the near-zero-L(0) term


def test_update_preserves_metadata():
    st = make_state([1.0, 1.0], [2.0, 4.0], alpha=1.0, beta=0.25)
    new = weights.gradnorm_update(st, np.array([1.0, 2.0]),
                                  np.array([1.0, 1.0]))
    assert new.beta == 0.25
    np.testing.assert_array_equal(new.initial_losses, st.initial_losses)
    assert new.update_period == st.update_period


def test_alpha_exponent_applied():
    # alpha = 2 squares the score before it scales the target
    st = make_state([1.0, 1.0], [1.0, 1.0], alpha=2.0, beta=1.0)
    losses = np.array([1.5, 0.5])  # scores (1.5, 0.5)
    G = np.array([1.0, 1.0])
    new = weights.gradnorm_update(st, G, losses)
    np.testing.assert_allclose(new.lambdas, [1.5 ** 2, 0.5 ** 2], rtol=1e-15)
