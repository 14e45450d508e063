"""Adaptive Bayesian QPSK discrimination with photon-number-resolving detection.

The pulse is sliced into ``N`` equal-energy bins. In each bin the local
oscillator nulls the currently most probable hypothesis, the displaced
field is counted with resolution up to ``pnr_cap`` (higher counts are
lumped into the last outcome) and the posterior over the four symbols is
updated with Bayes' rule. The receiver's internal model assumes no phase
offset; the true offset only enters the sampled counts.

The first bin always tests symbol 0. Later MAP decisions break exact ties
uniformly at random: the usual tie is between the two neighbours of a
rejected hypothesis, and a fixed preference there would skew errors (and
the phase estimates built on them) towards one rotation direction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import stats

from .physics import QPSK_PHASES, QPSKSymbol, ReceiverParams, bin_mean


class InvariantViolation(RuntimeError):
    """Raised when an internal consistency check fails (e.g. a zero posterior)."""


@dataclass
class PosteriorState:
    probabilities: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.probabilities, dtype=float)
        if p.shape != (4,) or np.any(p < 0) or abs(p.sum() - 1.0) > 1e-12:
            raise ValueError(f"posterior must be 4 non-negative values summing to 1, got {p}")
        self.probabilities = p

    @classmethod
    def uniform(cls) -> "PosteriorState":
        return cls(np.full(4, 0.25))

    @property
    def map_index(self) -> int:
        return int(np.argmax(self.probabilities))


@dataclass
class DetectionRecord:
    counts: np.ndarray
    lo_phases: np.ndarray
    verdict: float
    truth: QPSKSymbol

    @property
    def correct(self) -> bool:
        return _phase_index(self.verdict) == self.truth.index

    @property
    def lo_indices(self) -> np.ndarray:
        return _phase_index(self.lo_phases)

    @property
    def verdict_index(self) -> int:
        return int(_phase_index(self.verdict))


@dataclass
class PulseBatch:
    """Vectorised outcome of many discrimination measurements.

    ``counts`` and ``lo_idx`` have shape (pulses, N); ``lo_idx`` and the
    verdict/truth arrays hold symbol indices (phase = index * pi/2).
    """

    counts: np.ndarray
    lo_idx: np.ndarray
    verdict_idx: np.ndarray
    truth_idx: np.ndarray

    def __len__(self):
        return len(self.truth_idx)

    @property
    def correct(self) -> np.ndarray:
        return self.verdict_idx == self.truth_idx

    def record(self, i: int) -> DetectionRecord:
        return DetectionRecord(
            counts=self.counts[i].copy(),
            lo_phases=QPSK_PHASES[self.lo_idx[i]],
            verdict=float(QPSK_PHASES[self.verdict_idx[i]]),
            truth=QPSKSymbol(int(self.truth_idx[i])),
        )


TIE_RTOL = 1e-12


def tied_maxima(post: np.ndarray) -> np.ndarray:
    """Boolean mask of entries within TIE_RTOL of each row's maximum."""
    top = post.max(axis=-1, keepdims=True)
    return post >= top * (1.0 - TIE_RTOL)


def map_choice(post: np.ndarray, rng: np.random.Generator | None) -> np.ndarray:
    """Row-wise MAP index with uniform random tie-breaking.

    Without ``rng`` the lowest tied index is taken.
    """
    tied = tied_maxima(post)
    choice = np.argmax(tied, axis=1)
    if rng is None:
        return choice
    rows = np.flatnonzero(tied.sum(axis=1) > 1)
    if rows.size:
        u = rng.random((rows.size, post.shape[1])) * tied[rows]
        choice[rows] = np.argmax(u, axis=1)
    return choice


def _phase_index(phase):
    idx = np.rint(np.asarray(phase) / (np.pi / 2)).astype(int) % 4
    return idx if idx.ndim else int(idx)


def _pnr_probabilities(mean, pnr_cap):
    """Outcome probabilities for counts 0..pnr_cap, last one the upper tail.

    Returns an array with the outcome on the leading axis.
    """
    mean = np.asarray(mean, dtype=float)
    d = np.arange(pnr_cap).reshape((-1,) + (1,) * mean.ndim)
    head = stats.poisson.pmf(d, mean)
    tail = stats.poisson.sf(pnr_cap - 1, mean)
    return np.concatenate([head, tail[None]], axis=0)


def detection_likelihood(d: int, hypothesis_phase: float, candidate_phase: float,
                         phi_off: float, params: ReceiverParams) -> float:
    """P(outcome d | LO nulls ``hypothesis_phase``, signal is ``candidate_phase``)."""
    if not (0 <= d <= params.pnr_cap) or int(d) != d:
        raise ValueError(f"detection outcome must be an integer in [0, {params.pnr_cap}], got {d!r}")
    mu = bin_mean(hypothesis_phase - candidate_phase, phi_off, params)
    if d < params.pnr_cap:
        return float(stats.poisson.pmf(d, mu))
    return float(stats.poisson.sf(params.pnr_cap - 1, mu))


@lru_cache(maxsize=64)
def likelihood_table(params: ReceiverParams) -> np.ndarray:
    """Receiver model L[d, hypothesis, candidate] at zero phase offset."""
    delta = QPSK_PHASES[:, None] - QPSK_PHASES[None, :]
    table = _pnr_probabilities(bin_mean(delta, 0.0, params), params.pnr_cap)
    table.setflags(write=False)
    return table


def bayes_update(state: PosteriorState, d: int, lo_phase: float,
                 params: ReceiverParams) -> PosteriorState:
    if not (0 <= d <= params.pnr_cap):
        raise ValueError(f"detection outcome must lie in [0, {params.pnr_cap}]")
    lik = likelihood_table(params)[d, _phase_index(lo_phase)]
    post = state.probabilities * lik
    z = post.sum()
    if not z > 0:
        raise InvariantViolation("posterior vanished for every hypothesis")
    return PosteriorState(post / z)


def simulate_pulses(truth_idx, phi_off, params: ReceiverParams, rng: np.random.Generator,
                    amp_scale=1.0) -> PulseBatch:
    """Run the N-step adaptive measurement on a batch of pulses.

    ``phi_off`` and ``amp_scale`` broadcast against ``truth_idx`` and are
    held fixed over the bins of one pulse.
    """
    truth_idx = np.asarray(truth_idx, dtype=np.int64)
    B = truth_idx.shape[0]
    phi_off = np.broadcast_to(np.asarray(phi_off, dtype=float), (B,))
    amp_scale = np.broadcast_to(np.asarray(amp_scale, dtype=float), (B,))
    table = likelihood_table(params)
    N, cap = params.n_adaptive, params.pnr_cap

    post = np.full((B, 4), 0.25)
    counts = np.empty((B, N), dtype=np.int64)
    lo_idx = np.empty((B, N), dtype=np.int64)
    truth_phase = QPSK_PHASES[truth_idx]
    for j in range(N):
        h = np.zeros(B, dtype=np.int64) if j == 0 else map_choice(post, rng)
        mu = bin_mean(QPSK_PHASES[h] - truth_phase, phi_off, params, amp_scale)
        d = np.minimum(rng.poisson(mu), cap)
        counts[:, j] = d
        lo_idx[:, j] = h
        post *= table[d, h]
        post /= post.sum(axis=1, keepdims=True)
    return PulseBatch(counts, lo_idx, map_choice(post, rng), truth_idx)


def discriminate(truth: QPSKSymbol, phi_off: float, params: ReceiverParams,
                 rng: np.random.Generator, amp_scale: float = 1.0) -> DetectionRecord:
    """Discriminate a single pulse. See :func:`simulate_pulses` for the batch form."""
    batch = simulate_pulses(np.array([truth.index]), phi_off, params, rng, amp_scale)
    return batch.record(0)


def random_symbols(n: int, rng: np.random.Generator) -> np.ndarray:
    return rng.integers(0, 4, size=n)


def error_rate(params: ReceiverParams, phi_off: float, trials: int,
               rng: np.random.Generator, amp_noise: float = 0.0,
               batch_size: int = 1 << 16) -> tuple[float, float]:
    """Monte Carlo error probability and its binomial standard error.

    ``amp_noise`` is the relative standard deviation of a per-pulse Gaussian
    energy multiplier (truncated at zero).
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    errors = 0
    done = 0
    while done < trials:
        n = min(batch_size, trials - done)
        truth = random_symbols(n, rng)
        scale = 1.0
        if amp_noise > 0:
            scale = np.maximum(1.0 + amp_noise * rng.standard_normal(n), 0.0)
        batch = simulate_pulses(truth, phi_off, params, rng, scale)
        errors += int(np.count_nonzero(~batch.correct))
        done += n
    p = errors / trials
    return p, math.sqrt(p * (1.0 - p) / trials)


def exact_error_probability(params: ReceiverParams, phi_off: float = 0.0,
                            amp_scale: float = 1.0) -> float:
    """Exact error probability by enumerating every detection path.

    Random tie-breaks are enumerated as equally weighted branches. The tree
    has (pnr_cap+1)^N leaves per symbol before tie branching; fine for the
    default PNR(3), N=7 receiver.
    """
    table = likelihood_table(params)
    p_correct = 0.0
    for t in range(4):
        post = np.full((1, 4), 0.25)
        prob = np.ones(1)
        for j in range(params.n_adaptive):
            if j == 0:
                h = np.zeros(1, dtype=np.int64)
            else:
                # split each path over its tied MAP candidates
                tied = tied_maxima(post)
                w = tied / tied.sum(axis=1, keepdims=True)
                rows, h = np.nonzero(w)
                post, prob = post[rows], prob[rows] * w[rows, h]
            mu = bin_mean(QPSK_PHASES[h] - QPSK_PHASES[t], phi_off, params, amp_scale)
            p_out = _pnr_probabilities(mu, params.pnr_cap)  # (d, S)
            post = (post[None] * table[:, h, :]).reshape(-1, 4)
            # impossible outcomes give 0/0 rows; they are dropped just below
            with np.errstate(invalid="ignore"):
                post /= post.sum(axis=1, keepdims=True)
            prob = (prob[None] * p_out).reshape(-1)
            keep = prob > 0
            post, prob = post[keep], prob[keep]
        tied = tied_maxima(post)
        p_correct += np.sum(prob * tied[:, t] / tied.sum(axis=1)) / 4.0
    return 1.0 - p_correct
