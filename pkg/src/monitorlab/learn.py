"""Bayesian discrimination of two states from measurement outcomes.

Both games follow the same rule: with a flat prior, the posterior of a label
is its likelihood over the sum of both likelihoods, and the observer guesses
the label with the larger likelihood (fair coin on exact ties).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from . import qstate
from .circuit import (
    COINS,
    OUTCOMES,
    STATES,
    CircuitSpec,
    replay_outcomes,
    run_trajectory,
)
from .haar import RandomStream, as_generator, sample_haar_states, sample_orthogonal_haar_pair
from .qstate import QuditState
from .sampling import map_samples, mean_stderr


@dataclass
class GameResult:
    correct: bool
    posterior_correct: float
    log_likelihoods: tuple[float, float]  # indexed by label
    truth: int = 0
    dead_branch: bool = False


def bayes_posterior(log_likelihoods: Sequence[float], label: int) -> float:
    """Flat-prior posterior of ``label`` from log likelihoods (stable in log space)."""
    ll = np.asarray(log_likelihoods, dtype=float)
    if np.all(ll == -math.inf):
        raise ValueError("both hypotheses assign zero likelihood")
    top = ll.max()
    w = np.exp(ll - top)
    return float(w[label] / w.sum())


def _decide(ll: Sequence[float], truth: int, rng: np.random.Generator) -> GameResult:
    ll = (float(ll[0]), float(ll[1]))
    if ll[0] == ll[1]:
        guess = int(rng.integers(2))
    else:
        guess = int(ll[1] > ll[0])
    dead = ll[1 - truth] == -math.inf
    return GameResult(guess == truth, bayes_posterior(ll, truth), ll, truth, dead)


# --- single-shot Haar game ---------------------------------------------------


def single_shot_game(
    D: int, rng, states: tuple[np.ndarray, np.ndarray] | None = None
) -> GameResult:
    """One computational-basis measurement of one of two Haar states.

    Label 0 is ``phi`` and label 1 is ``psi``; ``states`` fixes them instead of
    drawing fresh independent Haar states.
    """
    rng = as_generator(rng)
    if states is None:
        phi, psi = sample_haar_states(D, 2, rng)
    else:
        phi, psi = (np.asarray(s, dtype=complex) for s in states)
    probs = np.abs(np.stack([phi, psi])) ** 2
    truth = int(rng.integers(2))
    m = int(rng.choice(D, p=probs[truth] / probs[truth].sum()))
    with np.errstate(divide="ignore"):
        ll = np.log(probs[:, m])
    return _decide(ll, truth, rng)


@dataclass
class GameBatch:
    correct: np.ndarray
    posterior_correct: np.ndarray
    truth: np.ndarray
    posterior_label1: np.ndarray
    dead_branches: int = 0

    @property
    def accuracy(self) -> float:
        return float(self.correct.mean())

    @property
    def credence(self) -> float:
        return float(self.posterior_correct.mean())


def single_shot_games(D: int, num_games: int, rng: RandomStream, batch: int = 1000) -> GameBatch:
    """Vectorized ``single_shot_game`` over many independent games."""
    correct, post, truth_all, post1 = [], [], [], []
    for start in range(0, num_games, batch):
        g = rng.child(start // batch).generator()
        n = min(batch, num_games - start)
        states = sample_haar_states(D, 2 * n, g).reshape(n, 2, D)
        probs = np.abs(states) ** 2
        truth = g.integers(2, size=n)
        cdf = np.cumsum(probs[np.arange(n), truth], axis=1)
        u = g.random(n) * cdf[:, -1]
        m = np.minimum((cdf < u[:, None]).sum(axis=1), D - 1)
        lik = probs[np.arange(n), :, m]  # (n, 2)
        coin = g.integers(2, size=n)
        guess = np.where(lik[:, 1] > lik[:, 0], 1, np.where(lik[:, 1] < lik[:, 0], 0, coin))
        p1 = lik[:, 1] / lik.sum(axis=1)
        correct.append(guess == truth)
        post.append(np.where(truth == 1, p1, 1.0 - p1))
        truth_all.append(truth)
        post1.append(p1)
    return GameBatch(
        np.concatenate(correct),
        np.concatenate(post),
        np.concatenate(truth_all),
        np.concatenate(post1),
    )


# --- monitored-circuit game --------------------------------------------------


def initial_pair(L: int, d: int, rng, kind: str = "haar") -> tuple[QuditState, QuditState]:
    """Two orthogonal initial states: a Haar pair or ``|0...0>``, ``|1 0...0>``."""
    if kind == "haar":
        a, b = sample_orthogonal_haar_pair(d**L, as_generator(rng))
        return QuditState(a, d, L), QuditState(b, d, L)
    if kind == "product":
        return (
            qstate.product_state(L, d, [0] * L),
            qstate.product_state(L, d, [1] + [0] * (L - 1)),
        )
    raise ValueError(f"unknown initial-pair kind {kind!r}")


def monitored_game(
    spec: CircuitSpec, init_pair: tuple[QuditState, QuditState], rng
) -> GameResult:
    """Guess which of two initial states produced a monitored trajectory.

    The truth runs with Born-sampled outcomes; the other hypothesis is driven
    through the same gates and positions with the recorded outcomes imposed.
    A record impossible under the other hypothesis gives posterior 1 and sets
    ``dead_branch``.
    """
    if isinstance(rng, RandomStream):
        coin, outcome_rng = rng.child(COINS).generator(), rng.child(OUTCOMES).generator()
    else:
        coin = outcome_rng = as_generator(rng)
    truth = int(coin.integers(2))
    res = run_trajectory(spec, init_pair[truth], outcome_rng)
    other = replay_outcomes(spec, init_pair[1 - truth], res.record.outcomes)
    ll = [0.0, 0.0]
    ll[truth] = res.log_born
    ll[1 - truth] = other.log_weight - init_pair[1 - truth].log_weight
    return _decide(ll, truth, coin)


def _monitored_sample(args):
    spec, kind, stream = args
    real = spec.realization(stream)
    pair = initial_pair(spec.L, spec.d, stream.child(STATES).generator(), kind)
    return monitored_game(real, pair, stream)


def monitored_games(
    spec: CircuitSpec,
    num_games: int,
    rng: RandomStream,
    kind: str = "haar",
    workers: int = 1,
) -> GameBatch:
    """Independent games, each with fresh gates, positions, states and outcomes."""
    args = [(spec, kind, rng.child(i)) for i in range(num_games)]
    res = map_samples(_monitored_sample, args, workers)
    truth = np.array([r.truth for r in res])
    post = np.array([r.posterior_correct for r in res])
    return GameBatch(
        np.array([r.correct for r in res]),
        post,
        truth,
        np.where(truth == 1, post, 1.0 - post),
        sum(r.dead_branch for r in res),
    )


def parse_depth_rule(rule) -> Callable[[int], int]:
    """``int`` (fixed depth), ``"2L"``-style multiplier, or a callable."""
    if callable(rule):
        return rule
    if isinstance(rule, (int, np.integer)):
        return lambda L: int(rule)
    text = str(rule).strip()
    if text.endswith("L"):
        k = float(text[:-1] or 1)
        return lambda L: max(1, int(round(k * L)))
    return lambda L: int(text)


def accuracy_curve(
    L_grid: Sequence[int],
    p_grid: Sequence[float],
    depth_rule,
    games_per_point: int,
    rng: RandomStream,
    d: int = 2,
    kind: str = "haar",
    workers: int = 1,
) -> list[dict]:
    """Accuracy and credence of the monitored game over an ``(L, p)`` grid."""
    depth_of = parse_depth_rule(depth_rule)
    rows = []
    for i, L in enumerate(L_grid):
        for j, p in enumerate(p_grid):
            spec = CircuitSpec(int(L), d, depth_of(int(L)), float(p))
            batch = monitored_games(spec, games_per_point, rng.child(i, j), kind, workers)
            acc, acc_err = mean_stderr(batch.correct.astype(float))
            cred, cred_err = mean_stderr(batch.posterior_correct)
            rows.append(
                dict(
                    L=int(L),
                    p=float(p),
                    depth=spec.depth,
                    games=games_per_point,
                    accuracy=float(acc),
                    accuracy_stderr=float(acc_err),
                    credence=float(cred),
                    credence_stderr=float(cred_err),
                    dead_branches=batch.dead_branches,
                )
            )
    return rows


def calibration_table(posterior_label1: np.ndarray, truth: np.ndarray, bins: int = 10):
    """Per posterior bin: mean predicted ``P(label 1)``, observed frequency, count.

    A calibrated posterior has the two columns agree within binomial error.
    """
    edges = np.linspace(0.0, 1.0, bins + 1)
    which = np.clip(np.digitize(posterior_label1, edges) - 1, 0, bins - 1)
    out = []
    for b in range(bins):
        sel = which == b
        n = int(sel.sum())
        if n:
            out.append((float(posterior_label1[sel].mean()), float(truth[sel].mean()), n))
    return out
