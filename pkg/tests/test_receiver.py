import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from phasetrack.physics import QPSKSymbol, ReceiverParams, bin_mean, db_below, qnl_qpsk
from phasetrack.receiver import (InvariantViolation, PosteriorState, bayes_update,
                                 detection_likelihood, discriminate, error_rate,
                                 exact_error_probability, likelihood_table, map_choice,
                                 simulate_pulses)

HALF_PI = math.pi / 2


def brute_force_error(params: ReceiverParams, phi_off=0.0):
    """Error probability by walking every detection path with scalar arithmetic.

    Written independently of the vectorised receiver: plain Poisson pmf and
    tail sums, and explicit equal-weight branching over tied MAP candidates.
    """
    cap = params.pnr_cap

    def mean(h, k, off):
        e = params.efficiency * params.mean_photon_number / params.n_adaptive
        return 2 * e * (1 - params.visibility * math.cos(off - (h - k) * HALF_PI)) + params.dark_rate

    def prob(d, mu):
        if d < cap:
            return math.exp(-mu) * mu ** d / math.factorial(d)
        return 1 - sum(math.exp(-mu) * mu ** j / math.factorial(j) for j in range(cap))

    def argmax_set(post):
        top = max(post)
        return [k for k, p in enumerate(post) if p >= top * (1 - 1e-12)]

    def walk(truth, post, step, weight):
        if step == params.n_adaptive:
            best = argmax_set(post)
            return weight * (truth in best) / len(best)
        hyps = [0] if step == 0 else argmax_set(post)
        total = 0.0
        for h in hyps:
            w_h = weight / len(hyps)
            for d in range(cap + 1):
                p_d = prob(d, mean(h, truth, phi_off))
                if p_d == 0:
                    continue
                new = [post[k] * prob(d, mean(h, k, 0.0)) for k in range(4)]
                z = sum(new)
                total += walk(truth, [x / z for x in new], step + 1, w_h * p_d)
        return total

    p_correct = sum(walk(t, [0.25] * 4, 0, 1.0) for t in range(4)) / 4
    return 1 - p_correct


SMALL = ReceiverParams(mean_photon_number=2.0, n_adaptive=2, pnr_cap=1)


def test_small_receiver_enumeration_matches_exact():
    assert exact_error_probability(SMALL) == pytest.approx(brute_force_error(SMALL), abs=1e-12)
    off = SMALL.with_(dark_rate=0.0)
    assert exact_error_probability(off, 0.3) == pytest.approx(brute_force_error(off, 0.3), abs=1e-12)


def test_small_receiver_enumeration_matches_monte_carlo():
    truth = brute_force_error(SMALL)
    p, se = error_rate(SMALL, 0.0, 200_000, np.random.default_rng(2))
    assert abs(p - truth) < 4 * se


def test_default_receiver_exact_matches_monte_carlo():
    p, se = error_rate(ReceiverParams(), 0.2, 200_000, np.random.default_rng(8))
    assert abs(p - exact_error_probability(ReceiverParams(), 0.2)) < 4 * se


def test_likelihood_tail_example():
    p = ReceiverParams(efficiency=1.0, visibility=1.0, dark_rate=0.0)
    mu = 20 / 7
    assert bin_mean(0.0, math.pi, p) == pytest.approx(mu)
    expected = 1 - math.exp(-mu) * (1 + mu + mu ** 2 / 2)
    assert detection_likelihood(3, 0.0, math.pi, 0.0, p) == pytest.approx(expected, rel=1e-12)


def test_vacuum_never_clicks():
    p = ReceiverParams(visibility=1.0, dark_rate=0.0)
    assert detection_likelihood(0, HALF_PI, HALF_PI, 0.0, p) == pytest.approx(1.0)


@given(st.sampled_from(range(4)), st.sampled_from(range(4)), st.floats(-math.pi, math.pi),
       st.floats(0.0, 15.0), st.integers(1, 5))
def test_likelihood_normalised(h, k, off, mpn, cap):
    p = ReceiverParams(mean_photon_number=mpn, pnr_cap=cap)
    total = sum(detection_likelihood(d, h * HALF_PI, k * HALF_PI, off, p) for d in range(cap + 1))
    assert total == pytest.approx(1.0, abs=1e-12)


@pytest.mark.parametrize("d", [-1, 4, 1.5])
def test_likelihood_rejects_out_of_range(d):
    with pytest.raises(ValueError):
        detection_likelihood(d, 0.0, 0.0, 0.0, ReceiverParams())


def test_bayes_update_examples():
    flat = ReceiverParams(mean_photon_number=0.0, dark_rate=0.0)
    post = bayes_update(PosteriorState.uniform(), 0, 0.0, flat)
    np.testing.assert_allclose(post.probabilities, 0.25)

    sure = PosteriorState(np.array([1.0, 0.0, 0.0, 0.0]))
    for d in range(4):
        np.testing.assert_allclose(bayes_update(sure, d, HALF_PI, ReceiverParams()).probabilities,
                                   [1, 0, 0, 0])

    ideal = ReceiverParams(visibility=1.0, dark_rate=0.0)
    post = bayes_update(PosteriorState.uniform(), 0, 0.0, ideal).probabilities
    assert post[0] > max(post[1:])


def test_bayes_update_rejects_impossible_data():
    ideal = ReceiverParams(visibility=1.0, dark_rate=0.0)
    sure = PosteriorState(np.array([1.0, 0.0, 0.0, 0.0]))
    with pytest.raises(InvariantViolation):
        bayes_update(sure, 2, 0.0, ideal)
    with pytest.raises(ValueError):
        PosteriorState(np.array([0.5, 0.5, 0.5, 0.0]))


@given(st.lists(st.tuples(st.integers(0, 3), st.integers(0, 3)), min_size=1, max_size=7))
def test_posterior_stays_normalised(steps):
    state = PosteriorState.uniform()
    for d, h in steps:
        state = bayes_update(state, d, h * HALF_PI, ReceiverParams())
        assert abs(state.probabilities.sum() - 1) < 1e-12


def test_zero_energy_guesses():
    p = ReceiverParams(mean_photon_number=0.0, dark_rate=0.0)
    rng = np.random.default_rng(0)
    batch = simulate_pulses(rng.integers(0, 4, 40_000), 0.0, p, rng)
    assert np.all(batch.counts == 0)
    assert batch.correct.mean() == pytest.approx(0.25, abs=0.01)
    assert exact_error_probability(p) == pytest.approx(0.75)


def test_map_choice_ties():
    post = np.tile([0.4, 0.4, 0.1, 0.1], (4000, 1))
    assert np.all(map_choice(post, None) == 0)
    picks = map_choice(post, np.random.default_rng(1))
    assert set(np.unique(picks)) == {0, 1}
    assert picks.mean() == pytest.approx(0.5, abs=0.05)


def _per_truth_errors(params, tie_rng, trials, rng):
    """Error rate conditioned on each truth for the adaptive loop with a given tie policy.

    Truths 1 and 3 mirror each other about the fixed first hypothesis, so a
    symmetric policy must give them equal error rates.
    """
    out = []
    for t in range(4):
        batch_truth = np.full(trials, t)
        post = np.full((trials, 4), 0.25)
        for j in range(params.n_adaptive):
            h = np.zeros(trials, dtype=int) if j == 0 else map_choice(post, tie_rng)
            d = np.minimum(rng.poisson(bin_mean((h - batch_truth) * HALF_PI, 0.0, params)),
                           params.pnr_cap)
            post = post * likelihood_table(params)[d, h]
            post /= post.sum(axis=1, keepdims=True)
        out.append(np.mean(map_choice(post, tie_rng) != batch_truth))
    return np.array(out)


def test_random_tie_break_is_symmetric_across_truths():
    p = ReceiverParams(mean_photon_number=0.5, n_adaptive=2, pnr_cap=1)
    err = _per_truth_errors(p, np.random.default_rng(1), 20_000, np.random.default_rng(2))
    assert abs(err[1] - err[3]) < 0.03


@pytest.mark.xfail(strict=True, reason="lowest-index tie-breaking favours low-index truths; "
                                       "the receiver breaks ties at random instead")
def test_lowest_index_tie_break_is_symmetric_across_truths():
    p = ReceiverParams(mean_photon_number=0.5, n_adaptive=2, pnr_cap=1)
    err = _per_truth_errors(p, None, 20_000, np.random.default_rng(2))
    assert abs(err[1] - err[3]) < 0.03


def test_discriminate_record():
    rec = discriminate(QPSKSymbol(2), 0.0, ReceiverParams(), np.random.default_rng(4))
    assert rec.counts.shape == (7,)
    assert rec.lo_indices[0] == 0
    assert rec.truth.index == 2
    assert rec.correct == (rec.verdict_index == 2)


def test_error_rate_even_in_offset():
    p = ReceiverParams()
    plus = exact_error_probability(p, 0.35)
    minus = exact_error_probability(p, -0.35)
    assert plus == pytest.approx(minus, rel=1e-9)
    a, se_a = error_rate(p, 0.35, 100_000, np.random.default_rng(5))
    b, se_b = error_rate(p, -0.35, 100_000, np.random.default_rng(6))
    assert abs(a - b) < 4 * math.hypot(se_a, se_b)


def test_error_rate_monotone_in_efficiency_and_energy():
    etas = [exact_error_probability(ReceiverParams(efficiency=e)) for e in (0.5, 0.72, 0.9, 1.0)]
    assert all(b <= a for a, b in zip(etas, etas[1:]))
    mpns = [exact_error_probability(ReceiverParams(mean_photon_number=m)) for m in (1, 2, 5, 10)]
    assert all(b <= a for a, b in zip(mpns, mpns[1:]))


def test_offset_curve_minimum_at_zero_and_crosses_limit():
    p = ReceiverParams()
    offs = np.linspace(-np.pi / 2, np.pi / 2, 31)
    pe = np.array([exact_error_probability(p, o) for o in offs])
    assert np.argmin(pe) == 15
    assert pe[15] < qnl_qpsk(5.0) < pe.max()


def test_laboratory_error_rate_at_default_dark_counts():
    p, se = error_rate(ReceiverParams(), 0.0, 1_000_000, np.random.default_rng(7))
    assert abs(p - 1.128e-2) < 3 * se


@pytest.mark.xfail(strict=True, reason="the static receiver reaches 7.6 dB below the limit at "
                                       "|alpha|^2=10, not 6 dB")
def test_high_power_static_gap_is_six_db():
    pe = exact_error_probability(ReceiverParams(mean_photon_number=10.0))
    assert db_below(pe, qnl_qpsk(10.0)) == pytest.approx(6.0, abs=0.5)


def test_invalid_trials():
    with pytest.raises(ValueError):
        error_rate(ReceiverParams(), 0.0, 0, np.random.default_rng(0))
