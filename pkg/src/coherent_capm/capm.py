"""Security market line, contact measure and equilibrium reward/risk ratio."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from .errors import (
    ConfigError,
    DataError,
    EmptyDataError,
    ParseError,
    RiskNeutralityError,
    ZeroDenominatorError,
)
from .extreme import ExtremeWeights
from .frontier import FrontierResult
from .scenarios import MarketModel
from .spectral import WeightingMeasure, check_weights, risk_of, risk_weights


def _certificate(m: MarketModel, mu: WeightingMeasure, res: FrontierResult) -> np.ndarray:
    if res.q is not None:
        return res.q.q
    return risk_weights(m.pnl() @ res.h_star, m.weights, mu)


def market_excess(m: MarketModel, h) -> np.ndarray:
    """Per-scenario ``r_* - r_f`` of portfolio h: ``(1 + r_f) <h, dS> / <h, S0>``."""
    h = np.asarray(h, dtype=float)
    value = float(h @ m.s0)
    if value == 0.0:
        raise ZeroDenominatorError("portfolio has zero initial value; its return is undefined")
    return (1.0 + m.r_f) * (m.pnl() @ h) / value


def beta_of(excess, q, market) -> float:
    """``E_Q excess / E_Q market`` for per-scenario excess returns."""
    den = float(np.asarray(q) @ np.asarray(market))
    if den == 0.0:
        raise ZeroDenominatorError("market excess return has zero expectation under Q")
    return float(np.asarray(q) @ np.asarray(excess)) / den


def sml_betas(m: MarketModel, mu: WeightingMeasure, res: FrontierResult) -> np.ndarray:
    """Coherent betas ``E_Q(r^i - r_f) / E_Q(r_* - r_f)`` with Q the extreme measure at the optimum."""
    q = _certificate(m, mu, res)
    rm = market_excess(m, res.h_star)
    den = float(q @ rm)
    if den == 0.0:
        raise ZeroDenominatorError("market excess return has zero expectation under Q")
    return (q @ m.excess_returns()) / den


def sml_residuals(m: MarketModel, mu: WeightingMeasure, res: FrontierResult) -> np.ndarray:
    """``E_P dS^i + R* E_Q dS^i`` per asset; zero at an exact optimum."""
    pnl = m.pnl()
    q = _certificate(m, mu, res)
    return m.weights @ pnl + res.r_star * (q @ pnl)


@dataclass(frozen=True)
class ContactKernel:
    """Mixture ``r = nu / (1 + R*) + q R* / (1 + R*)`` of the real-world and extreme measures."""

    r_star: float
    q: ExtremeWeights
    r: np.ndarray
    nu: np.ndarray
    max_violation: float = float("nan")

    @property
    def p_weight(self) -> float:
        # complement of q_weight so the two add to exactly 1.0
        return 1.0 - self.q_weight

    @property
    def q_weight(self) -> float:
        return self.r_star / (1.0 + self.r_star)


def contact_measure(nu, q, r_star: float, pnl=None, tol: Optional[float] = None) -> ContactKernel:
    """Mix P and Q; with ``pnl`` given, record and check ``max_i |E_R dS^i|``."""
    nu = np.asarray(nu, dtype=float).reshape(-1)
    qw = q if isinstance(q, ExtremeWeights) else ExtremeWeights(q)
    if qw.q.size != nu.size:
        raise ConfigError("nu and q must have the same length")
    check_weights(nu)
    check_weights(qw.q, tol=1e-10)
    if not (r_star >= 0.0) or not math.isfinite(r_star):
        raise ConfigError(f"R* must be finite and nonnegative, got {r_star}")
    wq = r_star / (1.0 + r_star)
    r = nu * (1.0 - wq) + qw.q * wq
    violation = float("nan")
    if pnl is not None:
        violation = float(np.abs(r @ np.asarray(pnl, dtype=float)).max())
        if tol is not None and violation > tol:
            raise RiskNeutralityError(
                f"contact measure misprices an asset by {violation:.3g} > {tol:.3g}; "
                "the optimum is probably not converged"
            )
    r.setflags(write=False)
    return ContactKernel(float(r_star), qw, r, nu, violation)


def contact_from_result(m: MarketModel, res: FrontierResult, tol: Optional[float] = None) -> ContactKernel:
    pnl = m.pnl()
    if tol is None:
        tol = 1e-5 * np.abs(m.weights @ pnl).max() / (1.0 + res.r_star)
    return contact_measure(m.weights, res.q, res.r_star, pnl=pnl, tol=tol)


@dataclass(frozen=True)
class Economy:
    """Agents with endowments ``W_n`` and risk aversions ``a_n``."""

    endowments: np.ndarray
    aversions: np.ndarray

    def __post_init__(self):
        w = np.array(self.endowments, dtype=float).reshape(-1)
        a = np.array(self.aversions, dtype=float).reshape(-1)
        if w.size == 0 or w.size != a.size:
            raise ConfigError("need one aversion per endowment and at least one agent")
        if not (np.all(np.isfinite(w)) and np.all(np.isfinite(a))) or np.any(w <= 0) or np.any(a <= 0):
            raise ConfigError("endowments and aversions must be positive")
        object.__setattr__(self, "endowments", w)
        object.__setattr__(self, "aversions", a)

    @property
    def tolerance_sum(self) -> float:
        """``sum_n W_n / a_n``."""
        return math.fsum(self.endowments / self.aversions)


def equilibrium_rstar(e: Economy, market_value: float, risk_value: float) -> float:
    """Positive root of ``R^2 + R - (sum W/a)^-1 [E_P <H, S1> + rho(<H, S1>)] = 0``."""
    ratio = (market_value + risk_value) / e.tolerance_sum
    if ratio < 0:
        raise ConfigError(
            f"E_P<H,S1> + rho(<H,S1>) = {market_value + risk_value:.6g} is negative; no admissible R*"
        )
    # rationalized root: avoids cancellation for small ratios
    return 2.0 * ratio / (1.0 + math.sqrt(1.0 + 4.0 * ratio))


def equilibrium_from_market(e: Economy, m: MarketModel, mu: WeightingMeasure, holdings) -> tuple[float, float, float]:
    """Compute ``E_P <H, S1>`` and ``rho(<H, S1>)`` from scenarios, then R*.

    S1 is the discounted terminal price vector ``S0 + dS``.
    """
    h = np.asarray(holdings, dtype=float).reshape(-1)
    s1 = m.s0 + m.pnl()
    wealth = s1 @ h
    mv = float(m.weights @ wealth)
    rv = risk_of(wealth, m.weights, mu)
    return equilibrium_rstar(e, mv, rv), mv, rv


def agent_allocations(e: Economy, h_star_market) -> list[np.ndarray]:
    """Split the market portfolio in proportion to ``W_n / a_n``; the last agent absorbs rounding.

    The split is exact: the allocations sum to ``H`` with no floating-point residue.
    """
    H = np.asarray(h_star_market, dtype=float).reshape(-1)
    k = e.endowments / e.aversions
    shares = k / e.tolerance_sum
    # Snap every share but the last to the ulp grid of H: partial sums and the
    # residual are then exact, so the allocations add up to H in any order.
    quantum = np.spacing(np.abs(H))
    out = [np.round(H * s / quantum) * quantum for s in shares[:-1]]
    out.append(H - np.sum(out, axis=0) if out else H.copy())
    return out


def load_economy(path) -> Economy:
    """Read a two-column ``endowment,aversion`` CSV."""
    path = Path(path)
    try:
        fh = path.open(newline="", encoding="utf-8-sig")
    except OSError as exc:
        raise DataError(f"cannot open {path}: {exc.strerror}") from None
    with fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise EmptyDataError(f"{path}: file is empty")
    header = [h.strip().lower() for h in rows[0]]
    if header != ["endowment", "aversion"]:
        raise ParseError(f"{path}: header must be 'endowment,aversion'", line=1)
    w, a = [], []
    for line, row in enumerate(rows[1:], start=2):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != 2:
            raise ParseError(f"{path}: expected 2 fields, got {len(row)}", line=line)
        vals = []
        for col, cell in enumerate(row, start=1):
            try:
                v = float(cell)
            except ValueError:
                raise ParseError(f"{path}: not a number {cell.strip()!r}", line=line, column=col) from None
            if not math.isfinite(v) or v <= 0:
                raise ParseError(f"{path}: value must be positive and finite", line=line, column=col)
            vals.append(v)
        w.append(vals[0])
        a.append(vals[1])
    if not w:
        raise EmptyDataError(f"{path}: no agents")
    return Economy(np.array(w), np.array(a))
