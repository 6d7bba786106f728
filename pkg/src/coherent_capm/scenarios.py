"""Scenario sets: ingestion, historical weighting, bootstrap and Monte Carlo generation.

Random draws use numpy's PCG64 bit generator seeded with the user's integer
seed (``numpy.random.Generator(PCG64(seed))``), so a seed reproduces the same
scenarios on every platform numpy supports.
"""
from __future__ import annotations

import csv
import datetime as dt
import math
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Optional

import numpy as np

from .errors import (
    ConfigError,
    DataError,
    EmptyDataError,
    NonFiniteValueError,
    ParseError,
    SamplerError,
)
from .spectral import check_weights

RETURNS = "returns"
PNL = "pnl"


def make_rng(seed: int) -> np.random.Generator:
    if isinstance(seed, bool) or int(seed) != seed or seed < 0 or seed >= 2**64:
        raise ConfigError(f"seed must be an integer in [0, 2**64), got {seed!r}")
    return np.random.Generator(np.random.PCG64(int(seed)))


@dataclass(frozen=True)
class ScenarioSet:
    """T scenarios of d asset outcomes with probability weights.

    Rows are ordered oldest first. ``mode`` says whether outcomes are returns
    (0.01 = 1%) or discounted P&L in currency.
    """

    outcomes: np.ndarray
    weights: np.ndarray
    labels: tuple
    index_col: Optional[int] = None
    mode: str = RETURNS
    dates: Optional[tuple] = None

    def __post_init__(self):
        x = np.array(self.outcomes, dtype=float)
        if x.ndim == 1:
            x = x[:, None]
        if x.ndim != 2 or x.shape[0] < 1:
            raise ConfigError("outcomes must be a nonempty T x d matrix")
        if not np.all(np.isfinite(x)):
            raise DataError("scenario outcomes must be finite")
        w = np.array(self.weights, dtype=float).reshape(-1)
        if w.size != x.shape[0]:
            raise ConfigError("one weight per scenario is required")
        check_weights(w)
        labels = tuple(str(s) for s in self.labels)
        if len(labels) != x.shape[1]:
            raise ConfigError("one label per asset column is required")
        if len(set(labels)) != len(labels):
            raise ConfigError("asset labels must be unique")
        if self.index_col is not None and not (0 <= self.index_col < x.shape[1]):
            raise ConfigError(f"index column {self.index_col} out of range")
        if self.mode not in (RETURNS, PNL):
            raise ConfigError(f"mode must be {RETURNS!r} or {PNL!r}")
        x.setflags(write=False)
        w.setflags(write=False)
        object.__setattr__(self, "outcomes", x)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "labels", labels)

    @classmethod
    def uniform(cls, outcomes, labels=None, **kw) -> "ScenarioSet":
        x = np.asarray(outcomes, dtype=float)
        if x.ndim == 1:
            x = x[:, None]
        if labels is None:
            labels = tuple(f"a{i}" for i in range(x.shape[1]))
        return cls(x, np.full(x.shape[0], 1.0 / x.shape[0]), labels, **kw)

    @property
    def n_scenarios(self) -> int:
        return self.outcomes.shape[0]

    @property
    def n_assets(self) -> int:
        return self.outcomes.shape[1]

    def col(self, key) -> int:
        if isinstance(key, (int, np.integer)):
            if not 0 <= key < self.n_assets:
                raise ConfigError(f"asset index {key} out of range")
            return int(key)
        try:
            return self.labels.index(str(key))
        except ValueError:
            raise ConfigError(f"unknown asset label {key!r}; have {', '.join(self.labels)}") from None

    def column(self, key) -> np.ndarray:
        return self.outcomes[:, self.col(key)]

    def with_index(self, key) -> "ScenarioSet":
        return replace(self, index_col=None if key is None else self.col(key))

    def index_values(self) -> np.ndarray:
        if self.index_col is None:
            raise ConfigError("no index column designated")
        return self.outcomes[:, self.index_col]

    def select(self, keys) -> "ScenarioSet":
        cols = [self.col(k) for k in keys]
        idx = self.index_col
        new_idx = cols.index(idx) if idx is not None and idx in cols else None
        return replace(
            self,
            outcomes=self.outcomes[:, cols],
            labels=tuple(self.labels[c] for c in cols),
            index_col=new_idx,
        )

    def without_index(self) -> "ScenarioSet":
        if self.index_col is None:
            return self
        keep = [i for i in range(self.n_assets) if i != self.index_col]
        return self.select(keep)


@dataclass(frozen=True)
class MarketModel:
    """Scenarios plus the risk-free rate per period and spot prices."""

    scenarios: ScenarioSet
    r_f: float = 0.0
    s0: Optional[np.ndarray] = None

    def __post_init__(self):
        if not (self.r_f > -1.0) or not math.isfinite(self.r_f):
            raise ConfigError(f"risk-free rate must exceed -1, got {self.r_f}")
        d = self.scenarios.n_assets
        s0 = np.ones(d) if self.s0 is None else np.array(self.s0, dtype=float).reshape(-1)
        if s0.size != d:
            raise ConfigError(f"need {d} spot prices, got {s0.size}")
        if not np.all(np.isfinite(s0)) or np.any(s0 <= 0):
            raise ConfigError("spot prices must be positive")
        s0.setflags(write=False)
        object.__setattr__(self, "s0", s0)

    @property
    def weights(self) -> np.ndarray:
        return self.scenarios.weights

    def pnl(self) -> np.ndarray:
        """Discounted P&L matrix; returns-mode scenarios are converted."""
        if self.scenarios.mode == PNL:
            return self.scenarios.outcomes
        return pnl_from_returns(self)

    def excess_returns(self) -> np.ndarray:
        """``r - r_f`` per scenario and asset, valid in either mode."""
        return self.pnl() * ((1.0 + self.r_f) / self.s0)


def pnl_from_returns(m: MarketModel) -> np.ndarray:
    """Discounted increments ``s0 / (1 + r_f) * (r - r_f)`` per scenario and asset."""
    if m.scenarios.mode != RETURNS:
        raise ConfigError("scenarios are already in P&L units")
    return m.s0 / (1.0 + m.r_f) * (m.scenarios.outcomes - m.r_f)


def load_returns(path, index: Optional[str] = None) -> ScenarioSet:
    """Read a ``date,<label1>,...`` return CSV (oldest row first) with uniform weights."""
    path = Path(path)
    try:
        fh = path.open(newline="", encoding="utf-8-sig")
    except OSError as exc:
        raise DataError(f"cannot open {path}: {exc.strerror}") from None
    with fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise EmptyDataError(f"{path}: file is empty") from None
        except csv.Error as exc:
            raise ParseError(f"{path}: {exc}", line=reader.line_num) from None
        header = [h.strip() for h in header]
        if len(header) < 2 or header[0].lower() != "date":
            raise ParseError(f"{path}: header must be 'date,<label1>,...'", line=1)
        labels = header[1:]
        if any(not s for s in labels):
            raise ParseError(f"{path}: empty asset label in header", line=1)
        if len(set(labels)) != len(labels):
            raise ParseError(f"{path}: duplicate asset label in header", line=1)

        rows, dates = [], []
        try:
            for fields in reader:
                line = reader.line_num
                if not fields or all(not f.strip() for f in fields):
                    continue
                if len(fields) != len(header):
                    raise ParseError(
                        f"{path}: expected {len(header)} fields, got {len(fields)}", line=line
                    )
                date = fields[0].strip()
                try:
                    dt.date.fromisoformat(date)
                except ValueError:
                    raise ParseError(f"{path}: bad ISO-8601 date {date!r}", line=line, column=1) from None
                row = []
                for j, cell in enumerate(fields[1:], start=2):
                    cell = cell.strip()
                    if not cell:
                        raise ParseError(f"{path}: missing value", line=line, column=j)
                    try:
                        v = float(cell)
                    except ValueError:
                        raise ParseError(f"{path}: not a number {cell!r}", line=line, column=j) from None
                    if not math.isfinite(v):
                        raise NonFiniteValueError(
                            f"{path}: non-finite value {cell!r}", line=line, column=j
                        )
                    row.append(v)
                rows.append(row)
                dates.append(date)
        except csv.Error as exc:
            raise ParseError(f"{path}: {exc}", line=reader.line_num) from None

    if not rows:
        raise EmptyDataError(f"{path}: no data rows")
    s = ScenarioSet.uniform(np.array(rows), labels=tuple(labels), dates=tuple(dates))
    if index is not None:
        if index not in s.labels:
            raise ConfigError(f"index label {index!r} not found in {path}")
        s = s.with_index(index)
    return s


def geometric_profile(t: int, lam: float) -> np.ndarray:
    """Normalized weights ``lam**age`` for rows ordered oldest first."""
    age = np.arange(t - 1, -1, -1, dtype=float)
    w = lam**age
    return w / w.sum()


def weight_geometric(s: ScenarioSet, lam: float) -> ScenarioSet:
    """Weighted historical simulation: the k-th most recent row gets mass proportional to lam**(k-1)."""
    if not (0.0 < lam < 1.0):
        raise ConfigError(f"geometric parameter must lie in (0, 1), got {lam}")
    return replace(s, weights=geometric_profile(s.n_scenarios, lam))


def bootstrap(
    s: ScenarioSet,
    n: int,
    t_out: int,
    seed: int,
    recency_lambda: Optional[float] = None,
) -> ScenarioSet:
    """Compound ``n`` jointly drawn sub-period rows into each of ``t_out`` scenarios.

    A whole source row is drawn per factor, which keeps the cross-asset
    dependence. With ``recency_lambda`` the rows are drawn with geometric
    recency bias; the output weights stay uniform either way.
    """
    if s.n_scenarios < 1:
        raise DataError("cannot bootstrap from an empty scenario set")
    if s.mode != RETURNS:
        raise ConfigError("bootstrap compounds returns; got P&L scenarios")
    if int(n) != n or n < 1 or int(t_out) != t_out or t_out < 1:
        raise ConfigError("bootstrap needs positive integers n and t_out")
    p = None
    if recency_lambda is not None:
        if not (0.0 < recency_lambda < 1.0):
            raise ConfigError(f"recency_lambda must lie in (0, 1), got {recency_lambda}")
        p = geometric_profile(s.n_scenarios, recency_lambda)
    rng = make_rng(seed)
    idx = rng.choice(s.n_scenarios, size=(int(t_out), int(n)), replace=True, p=p)
    gross = np.prod(1.0 + s.outcomes[idx], axis=1)
    return ScenarioSet.uniform(gross - 1.0, labels=s.labels, index_col=s.index_col)


def monte_carlo(model_hook, t_out: int, seed: int, labels=None, index_col=None) -> ScenarioSet:
    """``t_out`` i.i.d. joint draws from ``model_hook(rng, t_out)``, uniform weights."""
    if int(t_out) != t_out or t_out < 1:
        raise ConfigError(f"t_out must be a positive integer, got {t_out}")
    rng = make_rng(seed)
    try:
        draws = np.asarray(model_hook(rng, int(t_out)), dtype=float)
    except Exception as exc:
        raise SamplerError(f"scenario sampler failed: {exc!r}") from exc
    if draws.ndim == 1:
        draws = draws[:, None]
    if draws.shape[0] != t_out:
        raise SamplerError(f"sampler returned {draws.shape[0]} rows, expected {t_out}")
    if not np.all(np.isfinite(draws)):
        raise SamplerError("sampler produced non-finite values")
    return ScenarioSet.uniform(draws, labels=labels, index_col=index_col)


def gaussian_hook(mean, cov):
    mean = np.asarray(mean, dtype=float)
    cov = np.asarray(cov, dtype=float)

    def hook(rng: np.random.Generator, n: int) -> np.ndarray:
        return rng.multivariate_normal(mean, cov, size=n, method="cholesky")

    return hook


def fit_gaussian(s: ScenarioSet):
    """Weighted mean and covariance of the outcomes, as a sampler hook."""
    w = s.weights
    mean = w @ s.outcomes
    dev = s.outcomes - mean
    cov = (dev * w[:, None]).T @ dev
    return gaussian_hook(mean, cov)


def pair_sampler(x, y, weights):
    """Sampler of ``(x, y)`` pairs drawn by row with probabilities ``weights``."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    w = np.asarray(weights, dtype=float)

    def draw(rng: np.random.Generator, n: int):
        idx = rng.choice(x.size, size=n, replace=True, p=w)
        return x[idx], y[idx]

    return draw
