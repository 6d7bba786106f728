"""Weighting measures and spectral (Weighted V@R) risk of discrete samples.

A weighting measure ``mu`` is a probability measure on (0, 1]. It enters the
risk only through

    psi(x) = integral over [x, 1] of 1/lam mu(d lam)
    Psi(z) = integral_0^z psi(x) dx

and on a finite sample the risk is ``-sum_t x_(t) * (Psi(z_t) - Psi(z_{t-1}))``
with values sorted increasingly and ``z_t`` the cumulative sorted weight.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import integrate, special

from .errors import ConfigError, DomainError

WEIGHT_TOL = 1e-12


class WeightingMeasure:
    """Base class. Subclasses implement vectorized ``_psi`` and ``_cum_psi``."""

    def _psi(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def _cum_psi(self, z: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def psi(self, x):
        return psi(self, x)

    def cumulative_psi(self, z):
        return cumulative_psi(self, z)


@dataclass(frozen=True)
class Dirac(WeightingMeasure):
    """Point mass at ``lam``; the spectral risk is Tail V@R of order ``lam``."""

    lam: float

    def __post_init__(self):
        lam = float(self.lam)
        if not (0.0 < lam <= 1.0):
            raise ConfigError(f"Dirac atom must lie in (0, 1], got {self.lam}")
        object.__setattr__(self, "lam", lam)

    def _psi(self, x):
        return np.where(x <= self.lam, 1.0 / self.lam, 0.0)

    def _cum_psi(self, z):
        return np.minimum(z, self.lam) / self.lam


@dataclass(frozen=True)
class Atomic(WeightingMeasure):
    """Finite mixture of point masses, given as ``((lam_1, w_1), ...)``."""

    atoms: tuple

    def __post_init__(self):
        atoms = tuple((float(lam), float(w)) for lam, w in self.atoms)
        if not atoms:
            raise ConfigError("Atomic measure needs at least one atom")
        for lam, w in atoms:
            if not (0.0 < lam <= 1.0):
                raise ConfigError(f"atom location must lie in (0, 1], got {lam}")
            if w < 0 or not np.isfinite(w):
                raise ConfigError(f"atom weight must be nonnegative, got {w}")
        total = sum(w for _, w in atoms)
        if abs(total - 1.0) > WEIGHT_TOL:
            raise ConfigError(f"atom weights must sum to 1, got {total!r}")
        object.__setattr__(self, "atoms", atoms)

    @property
    def locations(self) -> np.ndarray:
        return np.array([lam for lam, _ in self.atoms])

    @property
    def masses(self) -> np.ndarray:
        return np.array([w for _, w in self.atoms])

    def _psi(self, x):
        lam, w = self.locations, self.masses
        return ((x[..., None] <= lam) * (w / lam)).sum(axis=-1)

    def _cum_psi(self, z):
        lam, w = self.locations, self.masses
        return (np.minimum(z[..., None], lam) / lam * w).sum(axis=-1)


@dataclass(frozen=True)
class BetaFamily(WeightingMeasure):
    """Beta V@R weighting density ``x**beta (1-x)**(alpha-beta-1) / B(beta+1, alpha-beta)``.

    For integers ``1 <= beta < alpha`` the risk equals minus the expected mean
    of the ``beta`` smallest among ``alpha`` independent copies.
    """

    alpha: float
    beta: float
    _quad_tol: float = field(default=1e-12, repr=False, compare=False)

    def __post_init__(self):
        a, b = float(self.alpha), float(self.beta)
        if not (a > -1.0):
            raise ConfigError(f"Beta V@R needs alpha > -1, got {a}")
        if not (-1.0 < b < a):
            raise ConfigError(f"Beta V@R needs -1 < beta < alpha, got beta={b}, alpha={a}")
        object.__setattr__(self, "alpha", a)
        object.__setattr__(self, "beta", b)

    @property
    def is_integer(self) -> bool:
        return float(self.alpha).is_integer() and float(self.beta).is_integer() and self.beta >= 1

    def density(self, x):
        a, b = self.alpha, self.beta
        x = np.asarray(x, dtype=float)
        return np.exp(
            b * np.log(x) + (a - b - 1) * np.log1p(-x) - special.betaln(b + 1, a - b)
        )

    def _upper_integral(self, z: np.ndarray) -> np.ndarray:
        """Integral over (z, 1] of density(lam) / lam."""
        a, b = self.alpha, self.beta
        if b > 0:
            # density/lam is proportional to a Beta(b, a-b) density; the ratio
            # B(b, a-b) / B(b+1, a-b) equals a/b
            return (a / b) * special.betaincc(b, a - b, z)
        out = np.empty_like(z)
        norm = special.beta(b + 1, a - b)
        for i, zi in np.ndenumerate(z):
            if zi <= 0.0:
                out[i] = np.inf
            elif zi >= 1.0:
                out[i] = 0.0
            else:
                val, _ = integrate.quad(
                    lambda lam: lam ** (b - 1.0),
                    zi,
                    1.0,
                    weight="alg",
                    wvar=(0.0, a - b - 1.0),
                    epsabs=self._quad_tol,
                    epsrel=1e-12,
                    limit=200,
                )
                out[i] = val / norm
        return out

    def _psi(self, x):
        return self._upper_integral(x)

    def _cum_psi(self, z):
        a, b = self.alpha, self.beta
        lower = special.betainc(b + 1, a - b, z)
        upper = self._upper_integral(z)
        # z * upper -> 0 as z -> 0 even when psi(0) is infinite
        tail = np.where(z > 0.0, z * np.where(np.isfinite(upper), upper, 0.0), 0.0)
        return np.clip(lower + tail, 0.0, 1.0)


def make_tail(lam: float) -> Dirac:
    """Tail V@R (expected shortfall) of order ``lam``."""
    return Dirac(lam)


def make_beta(alpha: int, beta: int) -> WeightingMeasure:
    """Beta V@R with integer parameters ``1 <= beta <= alpha``.

    ``beta == alpha`` (the mean of all copies) is the degenerate limit of the
    density and is returned as ``Dirac(1.0)``.
    """
    if int(alpha) != alpha or int(beta) != beta:
        raise ConfigError("make_beta takes integer parameters; use BetaFamily for real ones")
    alpha, beta = int(alpha), int(beta)
    if alpha < 1 or not (1 <= beta <= alpha):
        raise ConfigError(f"Beta V@R needs integers 1 <= beta <= alpha, got ({alpha}, {beta})")
    if beta == alpha:
        return Dirac(1.0)
    return BetaFamily(alpha, beta)


def make_alpha(alpha: int) -> WeightingMeasure:
    """Alpha V@R: minus the expected minimum of ``alpha`` independent copies."""
    if int(alpha) != alpha or alpha < 1:
        raise ConfigError(f"Alpha V@R needs a positive integer, got {alpha}")
    return make_beta(int(alpha), 1)


def _check_unit(v, name):
    arr = np.asarray(v, dtype=float)
    if np.any(~np.isfinite(arr)) or np.any(arr < 0.0) or np.any(arr > 1.0):
        raise DomainError(f"{name} must lie in [0, 1]")
    return arr


def psi(mu: WeightingMeasure, x):
    """Spectral density ``psi_mu(x)``; scalar in, scalar out."""
    arr = _check_unit(x, "x")
    out = mu._psi(np.atleast_1d(arr))
    return float(out[0]) if arr.ndim == 0 else out.reshape(arr.shape)


def cumulative_psi(mu: WeightingMeasure, z):
    """Distortion ``Psi_mu(z)``, concave and increasing from 0 to 1."""
    arr = _check_unit(z, "z")
    out = mu._cum_psi(np.atleast_1d(arr))
    return float(out[0]) if arr.ndim == 0 else out.reshape(arr.shape)


@dataclass(frozen=True)
class Sample:
    """Discrete random variable: ``values[t]`` occurs with probability ``weights[t]``."""

    values: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        values = np.array(self.values, dtype=float).reshape(-1)
        weights = np.array(self.weights, dtype=float).reshape(-1)
        if values.size < 1:
            raise ConfigError("a sample needs at least one scenario")
        if weights.shape != values.shape:
            raise ConfigError("values and weights must have the same length")
        if not np.all(np.isfinite(values)):
            raise ConfigError("sample values must be finite")
        check_weights(weights)
        values.setflags(write=False)
        weights.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "weights", weights)

    @classmethod
    def uniform(cls, values) -> "Sample":
        values = np.asarray(values, dtype=float).reshape(-1)
        return cls(values, np.full(values.size, 1.0 / values.size))

    def __len__(self):
        return self.values.size

    def mean(self) -> float:
        return float(self.weights @ self.values)


def check_weights(weights: np.ndarray, tol: float = WEIGHT_TOL) -> None:
    if not np.all(np.isfinite(weights)) or np.any(weights < 0):
        raise ConfigError("probability weights must be finite and nonnegative")
    if abs(weights.sum() - 1.0) > tol:
        raise ConfigError(f"probability weights must sum to 1, got {weights.sum()!r}")


def sorted_increments(
    values: np.ndarray, weights: np.ndarray, mu: WeightingMeasure
) -> tuple[np.ndarray, np.ndarray]:
    """Stable ascending order of ``values`` and the Psi-increments per sorted position."""
    order = np.argsort(values, kind="stable")
    z = np.cumsum(weights[order])
    z[-1] = 1.0
    np.clip(z, 0.0, 1.0, out=z)
    cum = mu._cum_psi(z)
    cum[-1] = mu._cum_psi(np.array([1.0]))[0]
    inc = np.diff(cum, prepend=0.0)
    # Psi is nondecreasing; clip rounding noise
    np.maximum(inc, 0.0, out=inc)
    return order, inc


def risk_weights(values: np.ndarray, weights: np.ndarray, mu: WeightingMeasure) -> np.ndarray:
    """Per-scenario masses of the extreme measure of ``values``.

    Tied values share their block's total mass in proportion to ``weights``.
    """
    values = np.asarray(values, dtype=float)
    weights = np.asarray(weights, dtype=float)
    order, inc = sorted_increments(values, weights, mu)
    sv = values[order]
    q_sorted = inc
    if sv.size > 1 and np.any(sv[1:] == sv[:-1]):
        starts = np.flatnonzero(np.r_[True, sv[1:] != sv[:-1]])
        block_id = np.cumsum(np.r_[True, sv[1:] != sv[:-1]]) - 1
        w_sorted = weights[order]
        block_mass = np.add.reduceat(inc, starts)
        block_w = np.add.reduceat(w_sorted, starts)
        size = np.diff(np.r_[starts, sv.size])
        share = np.where(
            block_w[block_id] > 0,
            w_sorted / np.where(block_w[block_id] > 0, block_w[block_id], 1.0),
            1.0 / size[block_id],
        )
        q_sorted = block_mass[block_id] * share
    q = np.empty_like(q_sorted)
    q[order] = q_sorted
    return q


def spectral_risk(sample: Sample, mu: WeightingMeasure) -> float:
    """Weighted V@R of a discrete sample."""
    order, inc = sorted_increments(sample.values, sample.weights, mu)
    return float(-(sample.values[order] @ inc))


def risk_of(values, weights, mu: WeightingMeasure) -> float:
    """``spectral_risk`` on raw arrays, skipping Sample validation."""
    values = np.asarray(values, dtype=float)
    order, inc = sorted_increments(values, np.asarray(weights, dtype=float), mu)
    return float(-(values[order] @ inc))


def parse_measure(text: str) -> WeightingMeasure:
    """Parse ``tail:<lam>``, ``alpha:<a>``, ``beta:<a>,<b>`` or ``atomic:<lam>=<w>,...``."""
    kind, _, arg = text.strip().partition(":")
    kind = kind.lower()
    try:
        if kind == "tail":
            return make_tail(float(arg))
        if kind == "alpha":
            return make_alpha(_int(arg))
        if kind == "beta":
            a, b = arg.split(",")
            return make_beta(_int(a), _int(b))
        if kind == "atomic":
            atoms = []
            for part in arg.split(","):
                lam, w = part.split("=")
                atoms.append((float(lam), float(w)))
            return Atomic(tuple(atoms))
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(f"cannot parse measure {text!r}: {exc}") from None
    raise ConfigError(f"unknown measure family {kind!r}; expected tail, alpha, beta or atomic")


def _int(s: str) -> int:
    v = float(s)
    if not v.is_integer():
        raise ValueError(f"{s!r} is not an integer")
    return int(v)


def describe(mu: WeightingMeasure) -> str:
    if isinstance(mu, Dirac):
        return f"tail:{mu.lam:g}"
    if isinstance(mu, BetaFamily):
        if mu.beta == 1:
            return f"alpha:{mu.alpha:g}"
        return f"beta:{mu.alpha:g},{mu.beta:g}"
    if isinstance(mu, Atomic):
        return "atomic:" + ",".join(f"{lam:g}={w:g}" for lam, w in mu.atoms)
    return repr(mu)

