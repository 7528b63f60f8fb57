"""Monte Carlo path generation and hedging backtests.

The backtester independently verifies the closed-form machinery: it
simulates increments with the model samplers, runs the feedback recursion
path by path, and compares the empirical mean squared hedging error with
the predicted variance.

Paths are generated in fixed-size chunks; chunk ``j`` draws from a
generator seeded with ``(seed, j)``, so results are bit-reproducible for
a given (seed, config) regardless of how chunks are scheduled, and every
path is a deterministic function of (seed, path_index).

Per-step hedge ratios and price levels are tabulated once on a log-spaced
spot grid (refined geometrically around every strike so kinks and jumps
of the terminal payoff are resolved) by the same transform quadrature
that defines them, then linearly interpolated in the spot; the
interpolation bias is orders of magnitude below the Monte Carlo noise the
reports quantify.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterator, Optional

import numpy as np

from . import hedge_continuous as hc
from . import hedge_discrete as hd
from . import models as mdl
from . import payoffs as po

__all__ = [
    "PathGrid",
    "BacktestReport",
    "CHUNK_PATHS",
    "simulate_paths",
    "backtest_discrete",
    "backtest_continuous_approx",
]

CHUNK_PATHS = 8192


@dataclass(frozen=True)
class PathGrid:
    """One simulated path: times from 0 to T, log prices with X_0 = 0."""

    times: np.ndarray
    log_prices: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        x = np.asarray(self.log_prices, dtype=float)
        if t.shape != x.shape:
            raise ValueError("times and log_prices must have equal length")
        if t[0] != 0.0 or x[0] != 0.0:
            raise ValueError("paths start at t = 0 with X_0 = 0")
        if np.any(np.diff(t) <= 0.0):
            raise ValueError("times must be strictly increasing")


@dataclass(frozen=True)
class BacktestReport:
    """Empirical hedging-error statistics against the predicted variance.

    ``empirical_error_variance`` is the mean of squared terminal errors
    (capital + gains - payoff), matching the quantity the closed form
    predicts; ``std_error`` is the sample standard deviation of the
    squared errors divided by sqrt(n_paths).
    """

    n_paths: int
    capital_used: float
    empirical_mean_error: float
    empirical_error_variance: float
    std_error: float
    predicted_J0: float
    seed: int

    @property
    def z_score(self) -> float:
        if self.std_error == 0.0:
            return 0.0
        return (self.empirical_error_variance - self.predicted_J0) / self.std_error


def _chunk_rng(seed: int, chunk_index: int) -> np.random.Generator:
    return np.random.default_rng([int(seed), int(chunk_index)])


def _increments_chunk(model, dt, rng, n_rows, n_steps, antithetic):
    if not antithetic:
        return mdl.sample_increments(model, dt, rng, size=(n_rows, n_steps))
    half = (n_rows + 1) // 2
    shape = (half, n_steps)
    if isinstance(model, mdl.Gaussian):
        z = rng.standard_normal(shape)
        loc = (model.mu - 0.5 * model.sigma ** 2) * dt
        scale = model.sigma * math.sqrt(dt)
        x = np.vstack((loc + scale * z, loc - scale * z))
    elif isinstance(model, mdl.MertonJD):
        z = rng.standard_normal(shape)
        n = rng.poisson(model.jump_intensity * dt, size=shape)
        zj = rng.standard_normal(shape)
        jumps = n * model.jump_mean + np.sqrt(n) * model.jump_sd * zj
        diff = model.mu * dt + model.sigma * math.sqrt(dt) * z
        anti = model.mu * dt - model.sigma * math.sqrt(dt) * z
        x = np.vstack((diff + jumps, anti + jumps))
    elif isinstance(model, (mdl.NIG, mdl.VG)):
        if isinstance(model, mdl.NIG):
            gam = math.sqrt(model.alpha ** 2 - model.beta ** 2)
            y = rng.wald(model.delta * dt / gam, (model.delta * dt) ** 2, size=shape)
        else:
            y = rng.gamma(model.delta * dt, 1.0 / model.alpha, size=shape)
        z = rng.standard_normal(shape)
        base = model.mu * dt + model.beta * y
        x = np.vstack((base + np.sqrt(y) * z, base - np.sqrt(y) * z))
    else:
        raise mdl.UnsupportedModelError(
            f"{type(model).__name__} has no increment sampler")
    return x[:n_rows]


def simulate_paths(model, S0: float, T: float, steps: int, n_paths: int,
                   seed: int) -> Iterator[PathGrid]:
    """Stream of iid paths on the uniform grid, one PathGrid per path."""
    if steps < 1:
        raise ValueError(f"steps must be >= 1, got {steps}")
    if n_paths < 0:
        raise ValueError(f"n_paths must be >= 0, got {n_paths}")
    dt = T / steps
    times = np.linspace(0.0, T, steps + 1)
    emitted = 0
    chunk_index = 0
    while emitted < n_paths:
        n_rows = min(CHUNK_PATHS, n_paths - emitted)
        rng = _chunk_rng(seed, chunk_index)
        dx = mdl.sample_increments(model, dt, rng, size=(n_rows, steps))
        x = np.concatenate((np.zeros((n_rows, 1)), np.cumsum(dx, axis=1)), axis=1)
        for i in range(n_rows):
            yield PathGrid(times=times, log_prices=x[i])
        emitted += n_rows
        chunk_index += 1


# ---------------------------------------------------------------------------
# Spot grids and transform tables
# ---------------------------------------------------------------------------

def _spot_grid(model, payoff, S0, T, n_base=1400, n_sigma=8.0):
    k1, k2 = mdl.cumulant_derivatives(model)
    sd = math.sqrt(max(k2 * T, 1e-12))
    lo = math.log(S0) + min(k1 * T, 0.0) - n_sigma * sd
    hi = math.log(S0) + max(k1 * T, 0.0) + n_sigma * sd
    pts = [np.linspace(lo, hi, n_base)]
    for line in payoff.lines():
        k = math.log(line.strike_scale)
        if lo < k < hi:
            offs = 10.0 ** np.arange(-8.0, 0.0)
            pts.append(np.concatenate((k - offs, [k], k + offs)))
    grid = np.unique(np.concatenate(pts))
    grid = grid[(grid >= lo) & (grid <= hi)]
    return np.exp(grid)


def _damping_cap(line, weight_abs, tol_abs, s_hi, c_start=64.0):
    """Height at which the damped integrand is negligible for good."""
    amp0 = weight_abs(np.array([0.0, 1.0]))
    peak = float(np.max(np.abs(line.density(line.abscissa + 1j * np.array([0.5, 1.0])))
                        * amp0)) * s_hi ** line.abscissa + 1e-300
    c = c_start
    while c < 1e9:
        v = np.array([0.71 * c, c])
        probe = float(np.max(np.abs(line.density(line.abscissa + 1j * v))
                             * weight_abs(v))) * s_hi ** line.abscissa
        if probe * c < 1e-3 * tol_abs + 1e-16 * peak:
            return c
        c *= 2.0
    return 1e9


def _tables_discrete(coeffs: hd.DiscreteHedgeCoefficients, payoff, s_grid,
                     tol_abs):
    """xi_n and H_n on the spot grid for every step, plus terminal payoff.

    Returns (xi_tab[n-1] for n=1..N, h_tab[n] for n=0..N) as two arrays of
    shape (N, len(grid)) and (N+1, len(grid)).  One node plan per line is
    shared by all steps: the plan is budgeted for the undamped terminal
    payoff, which dominates every damped interior weight.
    """
    N = coeffs.N
    ln_s = np.log(s_grid)
    xi_tab = np.zeros((N, s_grid.size))
    h_tab = np.zeros((N + 1, s_grid.size))

    for line in payoff.lines():
        edges, c_per_s, correct = po._planned_edges(line, s_grid, tol_abs)
        cut = edges[np.minimum(np.searchsorted(edges, c_per_s), edges.size - 1)]
        v, w = po.numerics._nodes_from_edges(edges)
        z = line.abscissa + 1j * v
        dens = w * line.density(z)
        g_z = coeffs.g(z)
        h_z = coeffs.h(z)
        # coefficient rows: 0..N-1 hold xi_(n) at row n-1 (weight g h^(N-n)),
        # rows N..2N hold H_n at row N+n (weight h^(N-n))
        coefs = np.empty((2 * N + 1, z.size), dtype=complex)
        h_pow = np.ones_like(h_z)
        for k in range(N + 1):                    # h_pow == h^k here
            coefs[N + (N - k)] = dens * h_pow     # H_(N-k)
            if k <= N - 1:
                coefs[(N - k) - 1] = dens * g_z * h_pow   # xi_(N-k)
            h_pow = h_pow * h_z
        mask = v[:, None] <= cut[None, :]
        block = 512
        for lo in range(0, s_grid.size, block):
            hi = min(lo + block, s_grid.size)
            emat = np.exp(np.multiply.outer(z, ln_s[lo:hi]))
            emat *= mask[:, lo:hi]
            vals = 2.0 * np.real(coefs @ emat)
            xi_tab[:, lo:hi] += vals[:N]
            h_tab[:, lo:hi] += vals[N:]
        # complete the truncated oscillatory tails row by row
        do_corr = correct & (cut * np.abs(np.log(s_grid / line.strike_scale))
                             >= 0.9 * po._CX_MIN)
        if np.any(do_corr):
            s_sel = s_grid[do_corr]
            cs = cut[do_corr]
            for k in range(N + 1):
                def w_h(z3, k=k):
                    return coeffs.h(z3) ** k
                tail, _ = po.tail_completion(line, s_sel, cs, w_h)
                h_tab[N - k][do_corr] += tail
                if k <= N - 1:
                    def w_xi(z3, k=k):
                        return coeffs.g(z3) * coeffs.h(z3) ** k
                    tail, _ = po.tail_completion(line, s_sel, cs, w_xi)
                    xi_tab[(N - k) - 1][do_corr] += tail
    for pm in payoff.point_masses():
        g_p = coeffs.g(np.asarray(pm.location))
        h_p = coeffs.h(np.asarray(pm.location))
        e = np.exp(pm.location * ln_s)
        for n in range(1, N + 1):
            xi_tab[n - 1] += np.real(pm.weight * g_p * h_p ** (N - n) * e)
        for n in range(N + 1):
            h_tab[n] += np.real(pm.weight * h_p ** (N - n) * e)
    return xi_tab / s_grid, h_tab


def _aggregate(err_chunks):
    """Compensated aggregation of (sum e, sum e^2, sum e^4, n) tuples."""
    s1 = math.fsum(c[0] for c in err_chunks)
    s2 = math.fsum(c[1] for c in err_chunks)
    s4 = math.fsum(c[2] for c in err_chunks)
    n = sum(c[3] for c in err_chunks)
    mean_err = s1 / n
    mean_sq = s2 / n
    var_sq = max(s4 / n - mean_sq ** 2, 0.0)
    std_error = math.sqrt(var_sq / n)
    return mean_err, mean_sq, std_error, n


def backtest_discrete(model, payoff, S0: float, T: float, N: int,
                      n_paths: int, seed: int,
                      capital: Optional[float] = None, *,
                      antithetic: bool = False,
                      tol: float = 1e-6) -> BacktestReport:
    """Run the N-date feedback strategy over simulated paths.

    Capital defaults to the variance-optimal V0; a fixed endowment c runs
    the risk-minimizing strategy seeded with c instead (its squared-error
    mean is reported raw, still against the optimal-capital prediction).
    """
    if n_paths < 1:
        raise ValueError("n_paths must be >= 1")
    coeffs = hd.coefficients(model, T, N)
    v0 = hd.initial_capital(coeffs, payoff, S0)
    cap = v0 if capital is None else float(capital)
    predicted = hd.error_variance(coeffs, payoff, S0)
    lam = coeffs.lambda_feedback
    dt = T / N

    s_grid = _spot_grid(model, payoff, S0, T)
    tol_abs = tol * (1.0 + S0)
    xi_tab, h_tab = _tables_discrete(coeffs, payoff, s_grid, tol_abs)

    chunks = []
    emitted = 0
    chunk_index = 0
    while emitted < n_paths:
        n_rows = min(CHUNK_PATHS, n_paths - emitted)
        rng = _chunk_rng(seed, chunk_index)
        dx = _increments_chunk(model, dt, rng, n_rows, N, antithetic)
        s_prev = np.full(n_rows, float(S0))
        gains = np.zeros(n_rows)
        for n in range(1, N + 1):
            phi = np.interp(s_prev, s_grid, xi_tab[n - 1])
            if lam != 0.0:
                h_prev = np.interp(s_prev, s_grid, h_tab[n - 1])
                phi = phi + lam / s_prev * (h_prev - cap - gains)
            s_next = s_prev * np.exp(dx[:, n - 1])
            gains += phi * (s_next - s_prev)
            s_prev = s_next
        h_term = np.interp(s_prev, s_grid, h_tab[N])
        err = cap + gains - h_term
        chunks.append((float(np.sum(err)), float(np.sum(err ** 2)),
                       float(np.sum(err ** 4)), n_rows))
        emitted += n_rows
        chunk_index += 1

    mean_err, mean_sq, std_error, n = _aggregate(chunks)
    return BacktestReport(n, cap, mean_err, mean_sq, std_error,
                          predicted, int(seed))


def _tables_continuous(coeffs: hc.ContinuousHedgeCoefficients, payoff,
                       s_grid, times, tol_abs):
    """xi_t and H_t on the spot grid for each decision time, plus payoff.

    Shapes (len(times), len(grid)); ``h_terminal`` is separate.
    """
    T = coeffs.T
    taus = T - np.asarray(times)
    ln_s = np.log(s_grid)
    nt = taus.size
    xi_tab = np.zeros((nt, s_grid.size))
    h_tab = np.zeros((nt, s_grid.size))
    tau_min = max(float(np.min(taus)), 1e-12)
    s_hi = float(np.max(s_grid))

    for line in payoff.lines():
        def weight_abs(v, line=line):
            eta = coeffs.eta(line.abscissa + 1j * np.atleast_1d(v))
            return np.exp(np.real(eta) * tau_min)

        cap = _damping_cap(line, weight_abs, tol_abs, s_hi)
        edges, c_per_s, correct = po._planned_edges(line, s_grid, tol_abs, cap)
        cut = edges[np.minimum(np.searchsorted(edges, np.minimum(c_per_s, cap)),
                               edges.size - 1)]
        v, w = po.numerics._nodes_from_edges(edges)
        z = line.abscissa + 1j * v
        dens = w * line.density(z)
        gam = coeffs.gamma(z)
        eta = coeffs.eta(z)
        emat = np.exp(np.multiply.outer(z, ln_s))
        emat *= (v[:, None] <= cut[None, :])
        t_block = 256
        for lo in range(0, nt, t_block):
            hi = min(lo + t_block, nt)
            wmat = np.exp(np.multiply.outer(taus[lo:hi], eta))     # (t, nodes)
            h_tab[lo:hi] += 2.0 * np.real((wmat * dens[None, :]) @ emat)
            xi_tab[lo:hi] += 2.0 * np.real((wmat * (dens * gam)[None, :]) @ emat)
        do_corr = correct & (cut * np.abs(np.log(s_grid / line.strike_scale))
                             >= 0.9 * po._CX_MIN)
        if np.any(do_corr):
            s_sel = s_grid[do_corr]
            cs = cut[do_corr]
            for k in range(nt):
                def w_h(z3, tau=taus[k]):
                    return np.exp(coeffs.eta(z3) * tau)

                def w_xi(z3, tau=taus[k]):
                    return coeffs.gamma(z3) * np.exp(coeffs.eta(z3) * tau)

                tail_h, _ = po.tail_completion(line, s_sel, cs, w_h)
                tail_x, _ = po.tail_completion(line, s_sel, cs, w_xi)
                h_tab[k][do_corr] += tail_h
                xi_tab[k][do_corr] += tail_x
    for pm in payoff.point_masses():
        e = np.exp(pm.location * ln_s)[None, :] \
            * np.exp(coeffs.eta(np.asarray(pm.location)) * taus)[:, None]
        h_tab += np.real(pm.weight * e)
        xi_tab += np.real(pm.weight * coeffs.gamma(np.asarray(pm.location)) * e)
    h_term, _ = po.tabulate_transform(payoff, s_grid, None, tol_abs=tol_abs)
    return xi_tab / s_grid, h_tab, h_term


def backtest_continuous_approx(model, payoff, S0: float, T: float, steps: int,
                               n_paths: int, seed: int, *,
                               antithetic: bool = False,
                               tol: float = 1e-6) -> BacktestReport:
    """Grid approximation of the continuously rebalanced strategy.

    The strategy is exact only in the continuous limit; applied at grid
    times its empirical error approaches the predicted variance from above
    as ``steps`` grows (additional discretization error on top of the
    inherent incompleteness).
    """
    if n_paths < 1:
        raise ValueError("n_paths must be >= 1")
    coeffs = hc.coefficients_ct(model, T)
    v0 = hc.initial_capital_ct(coeffs, payoff, S0)
    predicted = hc.error_variance_ct(coeffs, payoff, S0)
    lam = coeffs.lambda_feedback
    dt = T / steps
    times = np.linspace(0.0, T, steps + 1)[:-1]

    s_grid = _spot_grid(model, payoff, S0, T)
    tol_abs = tol * (1.0 + S0)
    xi_tab, h_tab, h_term = _tables_continuous(coeffs, payoff, s_grid, times,
                                               tol_abs)

    chunks = []
    emitted = 0
    chunk_index = 0
    while emitted < n_paths:
        n_rows = min(CHUNK_PATHS, n_paths - emitted)
        rng = _chunk_rng(seed, chunk_index)
        dx = _increments_chunk(model, dt, rng, n_rows, steps, antithetic)
        s_prev = np.full(n_rows, float(S0))
        gains = np.zeros(n_rows)
        for k in range(steps):
            phi = np.interp(s_prev, s_grid, xi_tab[k])
            if lam != 0.0:
                h_prev = np.interp(s_prev, s_grid, h_tab[k])
                phi = phi + lam / s_prev * (h_prev - v0 - gains)
            s_next = s_prev * np.exp(dx[:, k])
            gains += phi * (s_next - s_prev)
            s_prev = s_next
        err = v0 + gains - np.interp(s_prev, s_grid, h_term)
        chunks.append((float(np.sum(err)), float(np.sum(err ** 2)),
                       float(np.sum(err ** 4)), n_rows))
        emitted += n_rows
        chunk_index += 1

    mean_err, mean_sq, std_error, n = _aggregate(chunks)
    return BacktestReport(n, v0, mean_err, mean_sq, std_error,
                          predicted, int(seed))
