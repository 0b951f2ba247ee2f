"""One social-learning run: Bayes update, sharing modification, log-linear
combination.

Everything stays in the log domain. Belief ratios decay linearly in the
iteration index, so linear-domain probabilities underflow within a few
hundred steps; exponentiate only at the edges (export, verdicts). The mass
spread over the non-transmitted hypotheses is computed as a log-sum-exp of
the *other* components rather than log(1 - exp(tx)), which stays finite even
when the transmitted component is within one ulp of probability one.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np

from .errors import NumericalError, ValidationError
from .likelihoods import (
    LikelihoodModel,
    log_likelihood_row,
    log_likelihood_rows,
    sample_observation,
)
from .network import Network

BELIEF_SUM_TOL = 1e-9


# -- sharing strategies -------------------------------------------------------

@dataclass(frozen=True)
class FullSharing:
    """Agents exchange entire belief vectors (classic log-linear learning)."""


@dataclass(frozen=True)
class PartialSharing:
    """Only the tx component is transmitted; receivers spread the remaining
    mass uniformly, and agents apply the same segmentation to themselves."""

    tx_index: int


@dataclass(frozen=True)
class SelfAwarePartialSharing:
    """Like partial sharing, but each agent combines its own unmodified
    intermediate belief (weight a_kk) with neighbors' modified ones."""

    tx_index: int


@dataclass(frozen=True)
class MaxBeliefSharing:
    """Each agent transmits its currently strongest component. Ties break
    toward the lowest hypothesis index so runs are reproducible. The
    self-aware flavor is accepted by the engine but is beyond the behavior
    validated by the bundled experiments."""

    self_aware: bool = False


SharingStrategy = Union[FullSharing, PartialSharing, SelfAwarePartialSharing, MaxBeliefSharing]


@dataclass(frozen=True)
class NetworkState:
    """Per-agent log-beliefs at one iteration."""

    log_beliefs: np.ndarray  # (N, H)
    iteration: int = 0


# -- log-domain helpers -------------------------------------------------------

def _row_logsumexp(x: np.ndarray) -> np.ndarray:
    m = x.max(axis=1, keepdims=True)
    return m + np.log(np.exp(x - m).sum(axis=1, keepdims=True))


def log_normalize(log_values: np.ndarray) -> np.ndarray:
    """Normalize a single log-probability vector to exp-sum one."""
    v = np.asarray(log_values, dtype=float)
    m = v.max()
    return v - (m + np.log(np.exp(v - m).sum()))


def check_log_beliefs(log_beliefs: np.ndarray) -> None:
    """Hard invariant: finite entries, rows exp-summing to 1 within 1e-9.

    Raises instead of clamping; a violation means the engine lost positivity.
    """
    b = np.atleast_2d(log_beliefs)
    if not np.all(np.isfinite(b)):
        raise NumericalError("non-finite log-belief entry")
    sums = np.exp(b).sum(axis=1)
    worst = float(np.max(np.abs(sums - 1.0)))
    if worst > BELIEF_SUM_TOL:
        raise NumericalError(f"belief normalization off by {worst:.3g}")


def uniform_log_beliefs(n_agents: int, n_hypotheses: int) -> np.ndarray:
    return np.full((n_agents, n_hypotheses), -np.log(n_hypotheses))


def log_beliefs_from_table(table) -> np.ndarray:
    """Validate and log a linear-domain (N, H) belief table."""
    t = np.asarray(table, dtype=float)
    if t.ndim != 2:
        raise ValidationError("initial beliefs must be a 2-D table")
    if np.any(t <= 0):
        raise ValidationError("initial beliefs must be strictly positive")
    sums = t.sum(axis=1)
    if np.any(np.abs(sums - 1.0) > BELIEF_SUM_TOL):
        raise ValidationError("initial belief rows must sum to 1")
    return np.log(t)


# -- the three algorithm steps ------------------------------------------------

def bayesian_update(log_belief: np.ndarray, model: LikelihoodModel, xi) -> np.ndarray:
    """Posterior log-belief after observing xi: prior + log-likelihood,
    renormalized."""
    out = log_normalize(np.asarray(log_belief, dtype=float) + log_likelihood_row(model, xi))
    check_log_beliefs(out)
    return out


def _spread_rows(log_psi: np.ndarray, tx_per_row: np.ndarray) -> np.ndarray:
    """Rowwise sharing modification: keep the tx entry, split the rest evenly.

    The split value is logsumexp of the non-tx entries minus log(H-1), i.e.
    the exact log of (1 - psi_tx)/(H-1) computed from the surviving mass.
    """
    n, h = log_psi.shape
    rows = np.arange(n)
    masked = log_psi.copy()
    masked[rows, tx_per_row] = -np.inf
    spread = _row_logsumexp(masked) - np.log(h - 1)
    out = np.broadcast_to(spread, (n, h)).copy()
    out[rows, tx_per_row] = log_psi[rows, tx_per_row]
    return out


def modify_for_sharing(log_psi: np.ndarray, strategy: SharingStrategy) -> np.ndarray:
    """Belief vector as reconstructed by receivers under the given strategy."""
    v = np.asarray(log_psi, dtype=float)
    single = v.ndim == 1
    rows = v[None, :] if single else v
    n, h = rows.shape
    if isinstance(strategy, FullSharing):
        out = rows.copy()
    elif isinstance(strategy, (PartialSharing, SelfAwarePartialSharing)):
        tx = strategy.tx_index
        if not 0 <= tx < h:
            raise ValidationError(f"tx index {tx} out of range for H={h}")
        out = _spread_rows(rows, np.full(n, tx))
    elif isinstance(strategy, MaxBeliefSharing):
        out = _spread_rows(rows, np.argmax(rows, axis=1))
    else:
        raise ValidationError(f"unknown strategy {strategy!r}")
    return out[0] if single else out


def combine_step(
    net: Network,
    log_shared: np.ndarray,
    log_own: np.ndarray,
    strategy: SharingStrategy,
) -> np.ndarray:
    """Log-linear pooling of the (modified) neighbor beliefs.

    Full/partial/max-belief: row k of the result is sum_l a_lk * shared_l.
    Self-aware: the a_kk term uses the agent's own unmodified belief instead
    of its modified one.
    """
    shared = np.asarray(log_shared, dtype=float)
    pooled = net.matrix.T @ shared
    self_aware = isinstance(strategy, SelfAwarePartialSharing) or (
        isinstance(strategy, MaxBeliefSharing) and strategy.self_aware
    )
    if self_aware:
        own = np.asarray(log_own, dtype=float)
        akk = np.diag(net.matrix)[:, None]
        pooled = pooled + akk * (own - shared)
    out = pooled - _row_logsumexp(pooled)
    check_log_beliefs(out)
    return out


# -- full iteration -----------------------------------------------------------

def _draw_observations(models, true_index: int, n_agents: int, rng) -> np.ndarray:
    if isinstance(models, (list, tuple)):
        if len(models) != n_agents:
            raise ValidationError("need one likelihood model per agent")
        return np.array(
            [sample_observation(m, true_index, rng) for m in models]
        )
    return sample_observation(models, true_index, rng, size=n_agents)


def _log_likelihood_table(models, xi: np.ndarray) -> np.ndarray:
    if isinstance(models, (list, tuple)):
        return np.vstack([log_likelihood_row(m, x) for m, x in zip(models, xi)])
    return log_likelihood_rows(models, xi)


def run_iteration(
    state: NetworkState,
    net: Network,
    models: Union[LikelihoodModel, Sequence[LikelihoodModel]],
    true_index: int,
    strategy: SharingStrategy,
    rng: np.random.Generator,
):
    """Advance the network by one step.

    Draws one observation per agent from the true-hypothesis distribution,
    performs the Bayesian update, applies the sharing modification, and pools.
    Returns the new state together with the drawn observations (needed by the
    recursion checks and optional trajectory retention).
    """
    n = net.size
    if state.log_beliefs.shape[0] != n:
        raise ValidationError("state size does not match the network")
    xi = _draw_observations(models, true_index, n, rng)
    unnorm = state.log_beliefs + _log_likelihood_table(models, xi)
    log_psi = unnorm - _row_logsumexp(unnorm)
    log_shared = modify_for_sharing(log_psi, strategy)
    log_next = combine_step(net, log_shared, log_psi, strategy)
    return NetworkState(log_next, state.iteration + 1), xi


def run_trajectory(
    initial_log_beliefs: np.ndarray,
    net: Network,
    models,
    true_index: int,
    strategy: SharingStrategy,
    horizon: int,
    rng: np.random.Generator,
    keep_observations: bool = False,
):
    """Run ``horizon`` iterations; return ((horizon+1, N, H) log-beliefs,
    observations or None). Index 0 holds the initial beliefs."""
    if horizon < 1:
        raise ValidationError("horizon must be >= 1")
    init = np.asarray(initial_log_beliefs, dtype=float)
    check_log_beliefs(init)
    n, h = init.shape
    out = np.empty((horizon + 1, n, h))
    out[0] = init
    obs = None
    state = NetworkState(init, 0)
    for i in range(1, horizon + 1):
        state, xi = run_iteration(state, net, models, true_index, strategy, rng)
        out[i] = state.log_beliefs
        if keep_observations:
            if obs is None:
                obs = np.empty((horizon, n), dtype=np.asarray(xi).dtype)
            obs[i - 1] = xi
    return out, obs
