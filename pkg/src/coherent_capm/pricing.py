"""No Better Choice pricing of single-underlier claims under the contact measure.

Payoff functions receive the terminal (undiscounted) underlier price
``S1 = S0 (1 + r)`` and must return the *discounted* payoff; any discount
factor belongs inside the payoff.
"""
from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Optional

import numpy as np

from .capm import ContactKernel
from .errors import (
    AbsoluteContinuityError,
    ConfigError,
    DataError,
    EmptyDataError,
    KinkWarning,
    ParseError,
    PayoffError,
)
from .extreme import MCEstimate, smallest_indices
from .scenarios import RETURNS, ScenarioSet, make_rng, pair_sampler
from .spectral import BetaFamily, WeightingMeasure, risk_weights

DEFAULT_GROUPS = 50000


@dataclass(frozen=True)
class ClaimSpec:
    """A European claim on one underlier.

    ``payoff`` and ``derivative`` act elementwise on arrays of terminal prices.
    ``kinks`` lists prices where the payoff is not differentiable.
    """

    payoff: Callable[[np.ndarray], np.ndarray]
    underlier: object
    s0: float
    kind: str = "custom"
    strike: Optional[float] = None
    derivative: Optional[Callable[[np.ndarray], np.ndarray]] = None
    kinks: tuple = ()

    def __post_init__(self):
        if not (self.s0 > 0) or not math.isfinite(self.s0):
            raise ConfigError(f"spot must be positive, got {self.s0}")

    def values(self, s1: np.ndarray) -> np.ndarray:
        try:
            out = np.asarray(self.payoff(s1), dtype=float)
        except Exception as exc:
            raise PayoffError(f"payoff evaluation failed: {exc!r}") from exc
        out = np.broadcast_to(out, s1.shape).astype(float)
        if not np.all(np.isfinite(out)):
            raise PayoffError("payoff is not finite on every scenario")
        return out

    def slopes(self, s1: np.ndarray) -> np.ndarray:
        if self.derivative is None:
            raise ConfigError("claim has no derivative; sensitivities are unavailable")
        if self.kinks:
            hits = np.isin(s1, np.asarray(self.kinks, dtype=float))
            if hits.any():
                warnings.warn(
                    f"{int(hits.sum())} scenario(s) land exactly on a payoff kink; using the right derivative",
                    KinkWarning,
                    stacklevel=3,
                )
        try:
            out = np.asarray(self.derivative(s1), dtype=float)
        except Exception as exc:
            raise PayoffError(f"payoff derivative failed: {exc!r}") from exc
        return np.broadcast_to(out, s1.shape).astype(float)


def vanilla_call(strike: float, underlier, s0: float, discount: float = 1.0) -> ClaimSpec:
    k = float(strike)
    return ClaimSpec(
        payoff=lambda s: discount * np.maximum(s - k, 0.0),
        derivative=lambda s: discount * (s >= k).astype(float),
        underlier=underlier, s0=s0, kind="call", strike=k, kinks=(k,),
    )


def vanilla_put(strike: float, underlier, s0: float, discount: float = 1.0) -> ClaimSpec:
    k = float(strike)
    return ClaimSpec(
        payoff=lambda s: discount * np.maximum(k - s, 0.0),
        derivative=lambda s: -discount * (s < k).astype(float),
        underlier=underlier, s0=s0, kind="put", strike=k, kinks=(k,),
    )


def tabulated(prices, payoffs, underlier, s0: float) -> ClaimSpec:
    """Piecewise-linear payoff through ``(prices, payoffs)`` with flat extrapolation."""
    xs = np.asarray(prices, dtype=float)
    ys = np.asarray(payoffs, dtype=float)
    if xs.ndim != 1 or xs.size < 2 or xs.size != ys.size:
        raise ConfigError("a payoff table needs at least two (S1, F) points")
    if np.any(np.diff(xs) <= 0):
        raise ConfigError("payoff table prices must be strictly increasing")
    if not (np.all(np.isfinite(xs)) and np.all(np.isfinite(ys))):
        raise ConfigError("payoff table must be finite")
    slope = np.diff(ys) / np.diff(xs)

    def derivative(s):
        j = np.searchsorted(xs, s, side="right") - 1
        inside = (j >= 0) & (j < slope.size)
        return np.where(inside, slope[np.clip(j, 0, slope.size - 1)], 0.0)

    return ClaimSpec(
        payoff=lambda s: np.interp(s, xs, ys),
        derivative=derivative,
        underlier=underlier, s0=s0, kind="custom", kinks=tuple(xs),
    )


def load_payoff_table(path, underlier, s0: float) -> ClaimSpec:
    """Read a two-column ``S1,F`` CSV; a non-numeric first line is treated as a header."""
    path = Path(path)
    try:
        fh = path.open(newline="", encoding="utf-8-sig")
    except OSError as exc:
        raise DataError(f"cannot open {path}: {exc.strerror}") from None
    with fh:
        rows = [r for r in csv.reader(fh)]
    pts = []
    for line, row in enumerate(rows, start=1):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != 2:
            raise ParseError(f"{path}: expected 2 fields, got {len(row)}", line=line)
        try:
            pts.append((float(row[0]), float(row[1])))
        except ValueError:
            if line == 1 and not pts:
                continue
            raise ParseError(f"{path}: not a number", line=line) from None
    if not pts:
        raise EmptyDataError(f"{path}: no payoff points")
    arr = np.array(pts)
    if not np.all(np.isfinite(arr)):
        raise ParseError(f"{path}: non-finite payoff table entry")
    if np.any(np.diff(arr[:, 0]) <= 0):
        raise ParseError(f"{path}: S1 column must be strictly increasing")
    return tabulated(arr[:, 0], arr[:, 1], underlier, s0)


def _terminal(claim: ClaimSpec, scenarios: ScenarioSet) -> tuple[np.ndarray, np.ndarray]:
    if scenarios.mode != RETURNS:
        raise ConfigError("claim pricing needs return scenarios")
    x = scenarios.column(claim.underlier)
    return x, claim.s0 * (1.0 + x)


def nbc_price(claim: ClaimSpec, ck: ContactKernel, scenarios: ScenarioSet) -> float:
    """``E_R f(S0 (1 + r))`` under the contact measure."""
    _, s1 = _terminal(claim, scenarios)
    f = claim.values(s1)
    if ck.r.size != f.size:
        raise ConfigError("contact kernel and scenarios disagree on the number of scenarios")
    return float(ck.r @ f)


def nbc_sensitivity(claim: ClaimSpec, ck: ContactKernel, scenarios: ScenarioSet) -> float:
    """``dV/dS0 = E_R (1 + r) f'(S0 (1 + r))``."""
    x, s1 = _terminal(claim, scenarios)
    return float(ck.r @ ((1.0 + x) * claim.slopes(s1)))


def risk_adjustment(claim: ClaimSpec, ck: ContactKernel, scenarios: ScenarioSet) -> tuple[float, float]:
    """Exact ``V - E_P f`` and its first-order form ``R* E_P (phi - 1) f`` with ``phi = dQ/dP``."""
    nu, q = ck.nu, ck.q.q
    if np.any((nu == 0) & (q > 0)):
        raise AbsoluteContinuityError("extreme measure charges a scenario of zero probability")
    _, s1 = _terminal(claim, scenarios)
    f = claim.values(s1)
    ep = float(nu @ f)
    exact = float(ck.r @ f) - ep
    phi = ck.q.density(nu)
    first = ck.r_star * float(nu @ ((phi - 1.0) * f))
    return exact, first


def empirical_price(
    claim: ClaimSpec,
    mu: WeightingMeasure,
    r_star: float,
    source,
    seed: int = 0,
    k: int = DEFAULT_GROUPS,
) -> tuple[float, Optional[float]]:
    """Price estimate from ``(underlier return, index return)`` data.

    ``source`` is a ScenarioSet with a designated index column, or for
    integer Beta/Alpha V@R a sampler ``source(rng, n) -> (x, y)``.
    Weighting measures without an order-statistic form are priced by exact
    reweighting of the scenarios (no standard error); integer Beta and
    Alpha V@R use ``k`` groups of independent draws.
    """
    if not (r_star >= 0) or not math.isfinite(r_star):
        raise ConfigError(f"R* must be finite and nonnegative, got {r_star}")
    group = isinstance(mu, BetaFamily) and mu.is_integer
    if isinstance(source, ScenarioSet):
        if source.index_col is None:
            raise ConfigError("empirical pricing needs an index column in the scenario set")
        x = source.column(claim.underlier)
        y = source.index_values()
        if not group:
            if source.mode != RETURNS:
                raise ConfigError("claim pricing needs return scenarios")
            f = claim.values(claim.s0 * (1.0 + x))
            q = risk_weights(y, source.weights, mu)
            return float((source.weights @ f + r_star * (q @ f)) / (1.0 + r_star)), None
        sampler = pair_sampler(x, y, source.weights)
    elif callable(source):
        if not group:
            raise ConfigError("a draw sampler can only price under integer Beta or Alpha V@R")
        sampler = source
    else:
        raise ConfigError("source must be a ScenarioSet or a pair sampler")
    est = _group_price(claim, int(mu.alpha), int(mu.beta), r_star, sampler, seed, int(k))
    return est.value, est.std_err


def _group_price(claim, alpha, beta, r_star, sampler, seed, k) -> MCEstimate:
    if k < 2:
        raise ConfigError("need at least two groups for a standard error")
    rng = make_rng(seed)
    try:
        x, y = sampler(rng, k * alpha)
    except Exception as exc:
        raise DataError(f"pair sampler failed: {exc!r}") from exc
    x = np.asarray(x, dtype=float).reshape(k, alpha)
    y = np.asarray(y, dtype=float).reshape(k, alpha)
    f = claim.values(claim.s0 * (1.0 + x))
    tail = np.take_along_axis(f, smallest_indices(y, beta), axis=1).mean(axis=1)
    per_group = (f.mean(axis=1) + r_star * tail) / (1.0 + r_star)
    se = float(per_group.std(ddof=1) / np.sqrt(k))
    return MCEstimate(float(per_group.mean()), se, k)
