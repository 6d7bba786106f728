"""Extreme measures, risk contributions and their order-statistic estimators."""
from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import ConfigError, SamplerError
from .scenarios import RETURNS, MarketModel, make_rng
from .spectral import Sample, WeightingMeasure, risk_weights


@dataclass(frozen=True)
class ExtremeWeights:
    """Per-scenario masses ``q`` of an extreme measure.

    ``tied`` flags that the generating outcome had tied values, in which case
    ``q`` is one element (the weight-proportional split) of a non-singleton
    extreme set.
    """

    q: np.ndarray
    tied: bool = False

    def __post_init__(self):
        q = np.array(self.q, dtype=float).reshape(-1)
        q.setflags(write=False)
        object.__setattr__(self, "q", q)

    def expectation(self, x) -> float:
        return float(self.q @ np.asarray(x, dtype=float))

    def density(self, nu) -> np.ndarray:
        """Radon-Nikodym weights ``q_t / nu_t``; zero where both vanish."""
        nu = np.asarray(nu, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            phi = np.where(nu > 0, self.q / np.where(nu > 0, nu, 1.0), np.where(self.q > 0, np.inf, 0.0))
        return phi


def extreme_measure(w: Sample, mu: WeightingMeasure) -> ExtremeWeights:
    """The measure Q in the determining set with ``E_Q W = -rho_mu(W)``."""
    v = w.values
    tied = v.size != np.unique(v).size
    return ExtremeWeights(risk_weights(v, w.weights, mu), tied=tied)


def risk_contribution(x, w: Sample, mu: WeightingMeasure) -> float:
    """Contribution of ``x`` to the risk of ``w``: ``-E_Q x`` under the extreme measure of ``w``."""
    x = np.asarray(x, dtype=float).reshape(-1)
    if x.size != len(w):
        raise ConfigError(f"length mismatch: {x.size} values against {len(w)} scenarios")
    return -float(risk_weights(w.values, w.weights, mu) @ x)


class MCEstimate(NamedTuple):
    value: float
    std_err: float
    draws: int


def _draw_groups(source, alpha: int, k: int, seed: int):
    rng = make_rng(seed)
    try:
        x, y = source(rng, k * alpha)
    except Exception as exc:
        raise SamplerError(f"pair sampler failed: {exc!r}") from exc
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != (k * alpha,) or y.shape != (k * alpha,):
        raise SamplerError(f"pair sampler must return two arrays of length {k * alpha}")
    return x.reshape(k, alpha), y.reshape(k, alpha)


def _check_orders(alpha, beta, k):
    for name, v in (("alpha", alpha), ("beta", beta), ("k", k)):
        if int(v) != v or v < 1:
            raise ConfigError(f"{name} must be a positive integer, got {v}")
    if beta > alpha:
        raise ConfigError(f"need beta <= alpha, got beta={beta}, alpha={alpha}")


def smallest_indices(y: np.ndarray, beta: int) -> np.ndarray:
    """Column indices of the ``beta`` smallest entries per row; ties go to the earlier draw."""
    if beta == 1:
        return np.argmin(y, axis=1)[:, None]
    return np.argsort(y, axis=1, kind="stable")[:, :beta]


def _estimate(per_group: np.ndarray) -> MCEstimate:
    k = per_group.size
    se = float(per_group.std(ddof=1) / np.sqrt(k)) if k > 1 else float("nan")
    return MCEstimate(-float(per_group.mean()), se, k)


def mc_contribution_beta(source, alpha: int, beta: int, k: int, seed: int) -> MCEstimate:
    """Order-statistic estimate of the Beta V@R contribution of x to y.

    ``source(rng, n)`` returns ``n`` independent ``(x, y)`` draws as two arrays.
    Each of ``k`` groups of ``alpha`` draws contributes the mean of ``x`` over
    the ``beta`` draws with the smallest ``y``.
    """
    _check_orders(alpha, beta, k)
    alpha, beta, k = int(alpha), int(beta), int(k)
    x, y = _draw_groups(source, alpha, k, seed)
    sel = smallest_indices(y, beta)
    per_group = np.take_along_axis(x, sel, axis=1).mean(axis=1)
    return _estimate(per_group)


def mc_contribution_alpha(source, alpha: int, k: int, seed: int) -> MCEstimate:
    """Alpha V@R contribution: average of ``-x`` at the argmin of ``y`` in each group."""
    _check_orders(alpha, 1, k)
    x, y = _draw_groups(source, int(alpha), int(k), seed)
    l_k = np.argmin(y, axis=1)
    return _estimate(x[np.arange(x.shape[0]), l_k])


def reward_estimate(m: MarketModel, mu: WeightingMeasure, asset) -> float:
    """``E_Q dS^i`` with Q the extreme measure of the index returns."""
    s = m.scenarios
    if s.index_col is None:
        raise ConfigError("reward estimation needs a designated index column")
    if s.mode != RETURNS:
        raise ConfigError("reward estimation works on return scenarios")
    i = s.col(asset)
    index = Sample(s.index_values(), s.weights)
    contrib = risk_contribution(s.outcomes[:, i], index, mu)
    s0, rf = m.s0[i], m.r_f
    return -s0 / (1.0 + rf) * contrib - s0 * rf / (1.0 + rf)
