"""Coherent Markowitz problem: maximize reward under a risk budget.

The problem is solved on the affine slice ``E_P <h, dS> = 1`` by minimizing
the convex, positively homogeneous risk ``f(h) = rho(<h, dS>)``. Every
evaluation produces an extreme measure Q of ``<h, dS>`` and thereby a linear
minorant ``f(h') >= -E_Q <h', dS>`` that is tight at h. Two methods use these
subgradients:

``cutting-plane`` (default)
    Box-step cutting planes. The dual of the cut model gives a convex
    combination of the collected extreme measures whose generator point is
    ``-lambda * E_P dS``; ``lambda`` is a global lower bound on the minimum,
    and the combined measure is the certificate reported with the optimum.

``subgradient``
    Projected subgradient descent with step backtracking. Cheaper per step,
    approximate at kinks; the reported measure is the extreme measure at the
    final iterate.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linprog

from .errors import (
    ConfigError,
    DegenerateRewardError,
    NonConvergenceError,
    UnboundedRiskError,
)
from .extreme import ExtremeWeights
from .scenarios import MarketModel
from .spectral import WeightingMeasure, risk_weights, sorted_increments

METHODS = ("cutting-plane", "subgradient")


@dataclass
class SolverOptions:
    method: str = "cutting-plane"
    tol: float = 1e-8
    max_iter: int = 50000
    patience: int = 500
    seed: int = 0
    # relative size of the seeded initial perturbation inside the slice
    jitter: float = 1e-6

    def __post_init__(self):
        if self.method not in METHODS:
            raise ConfigError(f"unknown method {self.method!r}; expected one of {METHODS}")
        if not (self.tol > 0):
            raise ConfigError("tol must be positive")
        if int(self.max_iter) != self.max_iter or self.max_iter < 1:
            raise ConfigError("max_iter must be a positive integer")


@dataclass(frozen=True)
class FrontierResult:
    """Optimal strategy scaled to unit risk, with the reward/risk ratio."""

    h_star: np.ndarray
    r_star: float
    q: ExtremeWeights
    risk_at_opt: float = 1.0
    iterations: int = 0
    gradient_norm: float = float("nan")
    lower_bound: float = float("nan")
    gap: float = float("nan")
    method: str = "cutting-plane"
    objective_trace: np.ndarray = field(default_factory=lambda: np.empty(0))
    labels: tuple = ()


class _Risk:
    """``rho(<h, dS>)`` and its extreme measure, with Psi-increments cached for uniform weights."""

    def __init__(self, pnl: np.ndarray, nu: np.ndarray, mu: WeightingMeasure):
        self.pnl = pnl
        self.nu = nu
        self.mu = mu
        self.uniform = bool(np.all(nu == nu[0]))
        self._inc = None
        if self.uniform:
            _, self._inc = sorted_increments(np.zeros(nu.size), nu, mu)

    def evaluate(self, h: np.ndarray):
        """Return ``(risk, g)`` with ``g = -E_Q dS`` for an extreme measure Q of <h, dS>."""
        w = self.pnl @ h
        if self.uniform:
            order = np.argsort(w, kind="stable")
            inc = self._inc
        else:
            order, inc = sorted_increments(w, self.nu, self.mu)
        risk = -float(w[order] @ inc)
        g = -(inc @ self.pnl[order])
        return risk, g

    def measure(self, h: np.ndarray) -> np.ndarray:
        """Per-scenario masses matching ``evaluate`` (ties follow the stable sort)."""
        w = self.pnl @ h
        if self.uniform:
            order, inc = np.argsort(w, kind="stable"), self._inc
        else:
            order, inc = sorted_increments(w, self.nu, self.mu)
        q = np.empty_like(inc)
        q[order] = inc
        return q


def _slice_basis(m: np.ndarray):
    h0 = m / (m @ m)
    _, _, vt = np.linalg.svd(m[None, :])
    return h0, vt[1:].T


def optimize(m: MarketModel, mu: WeightingMeasure, opts: SolverOptions | None = None) -> FrontierResult:
    """Minimize risk over ``{h : E_P <h, dS> = 1}`` and rescale the minimizer to unit risk."""
    opts = opts or SolverOptions()
    pnl = np.ascontiguousarray(m.pnl())
    nu = np.asarray(m.weights)
    mvec = nu @ pnl
    scale = np.abs(pnl).max()
    if not np.any(mvec) or np.abs(mvec).max() <= 1e-14 * max(scale, 1e-300):
        raise DegenerateRewardError("expected discounted P&L is zero for every asset")

    risk = _Risk(pnl, nu, mu)
    labels = m.scenarios.labels
    d = pnl.shape[1]
    if d == 1:
        h = np.array([1.0 / mvec[0]])
        f, g = risk.evaluate(h)
        _check_positive(f, h)
        q = risk.measure(h)
        return _finish(h, f, ExtremeWeights(q), iterations=1, gradient_norm=0.0,
                       lower_bound=f, method=opts.method, trace=np.array([f]), labels=labels)
    if opts.method == "subgradient":
        return _subgradient(risk, mvec, opts, labels)
    return _cutting_plane(risk, mvec, opts, labels)


def _check_positive(f: float, h: np.ndarray):
    if f <= 0.0:
        raise UnboundedRiskError(
            f"strategy {np.array2string(h, precision=6)} has unit reward and risk {f:.6g} <= 0; "
            "the reward/risk ratio is unbounded on these scenarios"
        )


def _finish(h, f, q, *, iterations, gradient_norm, lower_bound, method, trace, labels):
    h_star = h / f
    return FrontierResult(
        h_star=h_star,
        r_star=1.0 / f,
        q=q,
        risk_at_opt=1.0,
        iterations=iterations,
        gradient_norm=gradient_norm,
        lower_bound=lower_bound,
        gap=(f - lower_bound) / f,
        method=method,
        objective_trace=np.asarray(trace),
        labels=labels,
    )


def _start(h0, basis, opts):
    rng = np.random.Generator(np.random.PCG64(int(opts.seed)))
    return opts.jitter * np.linalg.norm(h0) * rng.standard_normal(basis.shape[1])


_HIGHS = {"primal_feasibility_tolerance": 1e-10, "dual_feasibility_tolerance": 1e-10}


def _lower_bound(a: np.ndarray, c: np.ndarray, f_ref: float):
    """Dual of the cut model on the slice.

    Cut k reads ``f(h0 + B y) >= c_k + a_k . y``. Any theta in the simplex
    with ``sum_k theta_k a_k = 0`` certifies ``min f >= sum_k theta_k c_k``.
    Returns ``(theta, bound)`` or ``None`` when the cuts do not yet enclose
    a bounded model.
    """
    k, n = a.shape
    a_scale = max(np.abs(a).max(), 1e-300)
    a_eq = np.vstack([a.T / a_scale, np.ones((1, k))])
    b_eq = np.zeros(n + 1)
    b_eq[n] = 1.0
    res = linprog(-(c - f_ref) / f_ref, A_eq=a_eq, b_eq=b_eq, bounds=(0, None),
                  method="highs", options=_HIGHS)
    if res.status != 0:
        return None
    theta = np.maximum(res.x, 0.0)
    theta = _polish_weights(a, theta)
    if np.abs(theta @ a).max() > 1e-9 * a_scale:
        return None
    return theta, float(theta @ c)


def _polish_weights(a, theta):
    """Re-solve ``sum theta_k a_k = 0, sum theta_k = 1`` on the support to machine precision."""
    support = np.flatnonzero(theta > 1e-12 * theta.max())
    n = a.shape[1]
    mat = np.vstack([a[support].T, np.ones((1, support.size))])
    rhs = np.zeros(n + 1)
    rhs[n] = 1.0
    sol, *_ = np.linalg.lstsq(mat, rhs, rcond=None)
    out = np.zeros_like(theta)
    if np.all(sol >= 0) and np.abs(mat @ sol - rhs).max() < 1e-14:
        out[support] = sol
    else:
        out[support] = theta[support] / theta[support].sum()
    return out


def _cutting_plane(risk: _Risk, mvec, opts: SolverOptions, labels) -> FrontierResult:
    h0, basis = _slice_basis(mvec)
    n = basis.shape[1]
    hscale = np.linalg.norm(h0)

    points, a_rows, c_vals = [], [], []

    def evaluate(y):
        h = h0 + basis @ y
        f, g = risk.evaluate(h)
        _check_positive(f, h)
        points.append(h)
        a_rows.append(basis.T @ g)
        c_vals.append(g @ h0)
        return f

    center = _start(h0, basis, opts)
    f_center = evaluate(center)
    radius = hscale
    trace = [f_center]
    lb, theta = -np.inf, None
    best_seen, idle = (f_center, lb), 0

    for it in range(1, int(opts.max_iter) + 1):
        a = np.array(a_rows)
        c = np.array(c_vals)
        bound = _lower_bound(a, c, f_center)
        if bound is not None and bound[1] > lb:
            theta, lb = bound
        if f_center - lb <= opts.tol * f_center:
            break

        # box-step master in scaled variables u = (y - center) / radius,
        # tau = (t - f_center) / f_center: (radius / f) a_k . u - tau <= err_k / f
        err = f_center - (c + a @ center)
        a_ub = np.hstack([a * (radius / f_center), -np.ones((len(c), 1))])
        cost = np.zeros(n + 1)
        cost[-1] = 1.0
        res = linprog(cost, A_ub=a_ub, b_ub=err / f_center, bounds=[(-1, 1)] * n + [(None, None)],
                      method="highs", options=_HIGHS)
        if res.status != 0:
            raise NonConvergenceError(f"cut model LP failed: {res.message}", _diag(it, f_center, lb, radius))
        u = res.x[:n]
        y_new = center + radius * u
        model_val = float(np.max(c + a @ y_new))
        predicted = f_center - model_val
        on_edge = np.abs(u).max() >= 1 - 1e-9

        f_new = evaluate(y_new)
        if f_new < f_center - 0.1 * max(predicted, 0.0):
            center, f_center = y_new, f_new
            if on_edge:
                radius *= 2.0
        elif not on_edge:
            radius = max(radius * 0.5, 1e-14 * hscale)
        if radius > 1e12 * hscale:
            raise UnboundedRiskError("risk keeps decreasing along the slice; no finite optimum")
        trace.append(f_center)

        if f_center < best_seen[0] or lb > best_seen[1]:
            best_seen, idle = (f_center, lb), 0
        else:
            idle += 1
            if idle >= opts.patience:
                raise NonConvergenceError(
                    f"cutting-plane solver stalled at relative gap {(f_center - lb) / f_center:.3g}",
                    _diag(it, f_center, lb, radius),
                )
    else:
        raise NonConvergenceError(
            f"cutting-plane solver did not reach relative gap {opts.tol:g} in {opts.max_iter} iterations",
            _diag(opts.max_iter, f_center, lb, radius),
        )

    h_best = h0 + basis @ center
    q = np.zeros(risk.nu.size)
    for k in np.flatnonzero(theta):
        q += theta[k] * risk.measure(points[k])
    grad = theta @ np.array(a_rows[: theta.size])
    return _finish(
        h_best, f_center, ExtremeWeights(q), iterations=it, gradient_norm=float(np.linalg.norm(grad)),
        lower_bound=lb, method="cutting-plane", trace=trace, labels=labels,
    )


def _diag(it, f, lb, radius):
    return {"iterations": it, "objective": f, "lower_bound": lb, "radius": radius}


def _subgradient(risk: _Risk, mvec, opts: SolverOptions, labels) -> FrontierResult:
    h0, basis = _slice_basis(mvec)
    hscale = np.linalg.norm(h0)
    y = _start(h0, basis, opts)
    f, g = risk.evaluate(h0 + basis @ y)
    _check_positive(f, h0 + basis @ y)
    step = hscale
    trace = [f]
    best_window = f
    since = 0
    pg = basis.T @ g
    for it in range(1, int(opts.max_iter) + 1):
        norm = np.linalg.norm(pg)
        if norm <= opts.tol * np.linalg.norm(g) or step <= opts.tol * hscale:
            break
        trial = y - step * pg / norm
        h = h0 + basis @ trial
        f_t, g_t = risk.evaluate(h)
        _check_positive(f_t, h)
        if f_t < f:
            y, f, g, pg = trial, f_t, g_t, basis.T @ g_t
            step *= 1.5
            trace.append(f)
        else:
            step *= 0.5
        since += 1
        if since >= opts.patience:
            if best_window - f <= opts.tol * f:
                break
            best_window, since = f, 0
    else:
        raise NonConvergenceError(
            f"subgradient solver did not converge in {opts.max_iter} iterations",
            {"iterations": opts.max_iter, "objective": f, "step": step},
        )
    h = h0 + basis @ y
    q = ExtremeWeights(risk.measure(h))
    return _finish(
        h, f, q, iterations=it, gradient_norm=float(np.linalg.norm(pg)), lower_bound=float("nan"),
        method="subgradient", trace=trace, labels=labels,
    )


def frontier(res: FrontierResult, c_values) -> list[tuple[float, float]]:
    """Efficient frontier points ``(risk = c, reward = R* c)``; the strategy at c is ``c * h_star``."""
    out = []
    for c in c_values:
        c = float(c)
        if not (c >= 0.0):
            raise ConfigError(f"risk level must be nonnegative, got {c}")
        out.append((c, res.r_star * c))
    return out


def support_probe(m: MarketModel, mu: WeightingMeasure, h) -> tuple[float, np.ndarray]:
    """Risk of h and the generator point ``E_Q dS`` that attains ``min_x <h, x> = -risk``."""
    h = np.asarray(h, dtype=float).reshape(-1)
    if not np.any(h):
        raise ConfigError("support probe needs a nonzero strategy")
    pnl = m.pnl()
    if h.size != pnl.shape[1]:
        raise ConfigError(f"strategy has {h.size} entries, model has {pnl.shape[1]} assets")
    q = risk_weights(pnl @ h, m.weights, mu)
    point = q @ pnl
    return float(-(point @ h)), point
