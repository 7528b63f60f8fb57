"""Catalog of exponential-Lévy log-price models.

Each model supplies a cumulant function ``kappa`` with
``E[exp(z * X_t)] = exp(t * kappa(z))`` on its strip of finiteness, the
per-trading-period moment function ``m(z) = exp(kappa(z) * dt)``, and an
increment sampler (except the hyperbolic model, which has no tractable
subordinator representation and is transform-only here).

Parameter conventions follow the usual model-specific ones:

* ``Gaussian(mu, sigma)``: ``mu`` is the *asset* drift, so
  ``kappa(z) = (mu - sigma^2/2) z + sigma^2 z^2 / 2`` and log returns per
  unit time have mean ``mu - sigma^2/2``.
* ``MertonJD(mu, ...)``: ``mu`` is the drift of the Brownian part of the
  *log* price, i.e. ``kappa(z) = mu z + sigma^2 z^2/2 + jump terms``.
  The Poisson rate is named ``jump_intensity`` because the plain symbol
  lambda is reserved for the hedge feedback constant elsewhere.
* NIG / VG / Hyperbolic use the (alpha, beta, delta, mu) parameterisation
  of the generalized-hyperbolic family.

Everything is in discounted terms; there is no interest-rate parameter.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Union

import numpy as np

from .numerics import DomainError, bessel_k1, bessel_k1e, continuous_log

__all__ = [
    "Gaussian",
    "MertonJD",
    "NIG",
    "VG",
    "Hyperbolic",
    "LevyModelSpec",
    "MomentStrip",
    "UnsupportedModelError",
    "cumulant",
    "mgf_step",
    "strip_of_finiteness",
    "no_arbitrage_check",
    "sample_increment",
    "sample_increments",
    "cumulant_derivatives",
    "gaussian_benchmark",
]


class UnsupportedModelError(ValueError):
    """Operation not available for this model."""


@dataclass(frozen=True)
class Gaussian:
    mu: float
    sigma: float

    def __post_init__(self):
        if not self.sigma > 0.0:
            raise ValueError(f"Gaussian.sigma must be > 0, got {self.sigma}")


@dataclass(frozen=True)
class MertonJD:
    mu: float
    sigma: float
    jump_intensity: float
    jump_mean: float
    jump_sd: float

    def __post_init__(self):
        if self.sigma < 0.0:
            raise ValueError(f"MertonJD.sigma must be >= 0, got {self.sigma}")
        if self.jump_intensity < 0.0:
            raise ValueError(
                f"MertonJD.jump_intensity must be >= 0, got {self.jump_intensity}")
        if self.jump_sd < 0.0:
            raise ValueError(f"MertonJD.jump_sd must be >= 0, got {self.jump_sd}")


@dataclass(frozen=True)
class NIG:
    alpha: float
    beta: float
    delta: float
    mu: float

    def __post_init__(self):
        if not self.alpha > 0.0:
            raise ValueError(f"NIG.alpha must be > 0, got {self.alpha}")
        if not self.delta > 0.0:
            raise ValueError(f"NIG.delta must be > 0, got {self.delta}")
        if not abs(self.beta) < self.alpha:
            raise ValueError(f"NIG requires |beta| < alpha, got beta={self.beta}")


@dataclass(frozen=True)
class VG:
    alpha: float
    beta: float
    delta: float
    mu: float

    def __post_init__(self):
        if not self.alpha > 0.0:
            raise ValueError(f"VG.alpha must be > 0, got {self.alpha}")
        if not self.delta > 0.0:
            raise ValueError(f"VG.delta must be > 0, got {self.delta}")
        for p in (0.0, 1.0, 2.0):
            if not self.alpha - self.beta * p - 0.5 * p * p > 0.0:
                raise ValueError(
                    f"VG requires alpha - beta*p - p^2/2 > 0 for p in {{0,1,2}}; "
                    f"fails at p={p}")


@dataclass(frozen=True)
class Hyperbolic:
    alpha: float
    beta: float
    delta: float
    mu: float

    def __post_init__(self):
        if not self.alpha > 0.0:
            raise ValueError(f"Hyperbolic.alpha must be > 0, got {self.alpha}")
        if not self.delta > 0.0:
            raise ValueError(f"Hyperbolic.delta must be > 0, got {self.delta}")
        if not abs(self.beta) < self.alpha:
            raise ValueError(
                f"Hyperbolic requires |beta| < alpha, got beta={self.beta}")


LevyModelSpec = Union[Gaussian, MertonJD, NIG, VG, Hyperbolic]


@dataclass(frozen=True)
class MomentStrip:
    """Open interval of p with E[exp(p * X_1)] finite.

    Hedging needs ``lo < 0`` and ``hi > 2`` with room to spare: both twice
    the payoff abscissas and the point 2 itself must lie strictly inside.
    """

    lo: float
    hi: float
    open_ends: tuple = (True, True)

    def contains(self, p: float, margin: float = 0.0) -> bool:
        return self.lo + margin < p < self.hi - margin


def strip_of_finiteness(model: LevyModelSpec) -> MomentStrip:
    if isinstance(model, (Gaussian, MertonJD)):
        return MomentStrip(-math.inf, math.inf)
    if isinstance(model, (NIG, Hyperbolic)):
        return MomentStrip(-model.alpha - model.beta, model.alpha - model.beta)
    if isinstance(model, VG):
        # roots of alpha - beta p - p^2/2 = 0
        disc = math.sqrt(model.beta ** 2 + 2.0 * model.alpha)
        return MomentStrip(-model.beta - disc, -model.beta + disc)
    raise UnsupportedModelError(f"unknown model {model!r}")


def _check_strip(model: LevyModelSpec, re_z: np.ndarray) -> None:
    strip = strip_of_finiteness(model)
    lo = float(np.min(re_z))
    hi = float(np.max(re_z))
    if lo <= strip.lo or hi >= strip.hi:
        raise DomainError(
            f"Re(z) in [{lo:g}, {hi:g}] outside the open moment strip "
            f"({strip.lo:g}, {strip.hi:g}) of {type(model).__name__}")


# -- hyperbolic branch tracking ---------------------------------------------
#
# The hyperbolic cumulant is the log of a Bessel/sqrt ratio times e^{mu z};
# along a vertical contour that ratio can wind around the origin, so the
# pointwise principal log is wrong beyond the first crossing.  The ratio is
# split as exp(-delta(s(z) - s0)) * q(z) with s the principal square root
# (continuous on the strip) and q built from the *scaled* Bessel function,
# which decays only algebraically: the exponential part of the distinguished
# log is exact and only q needs winding tracked.  That is done with a ladder
# of finely spaced samples per (model, Re z) line, anchored at v = 0 where q
# is real and positive; conjugate symmetry maps v < 0 onto v > 0.

_HYP_LADDER_CACHE: dict = {}
_HYP_CACHE_LIMIT = 64


def _hyp_parts(model: Hyperbolic, z):
    """(s(z), q(z)) with ratio = exp(-delta (s - s0)) q and kappa(0) = 0.

    q(0) goes through the identical complex code path as q(z), so it is
    bitwise 1 at z = 0.
    """
    a2 = model.alpha ** 2
    s0 = complex(np.sqrt(complex(a2 - model.beta ** 2)))
    s = np.sqrt((a2 - (model.beta + z) ** 2).astype(complex)
                if np.ndim(z) else complex(a2 - (model.beta + z) ** 2))
    q = (s0 / s) * (bessel_k1e(model.delta * s) / bessel_k1e(model.delta * s0))
    return s, s0, q


def _hyp_ratio(model: Hyperbolic, z):
    """The quantity whose distinguished log is kappa(z) - mu z."""
    s, s0, q = _hyp_parts(model, z)
    return np.exp(-model.delta * (s - s0)) * q


def _hyp_ladder(model: Hyperbolic, R: float, v_max: float):
    key = (model.alpha, model.beta, model.delta, model.mu, R)
    step = 0.5 / (2.0 + model.delta)
    entry = _HYP_LADDER_CACHE.get(key)
    if entry is not None and entry[0][-1] >= v_max:
        return entry
    n = int(math.ceil(v_max / step)) + 2
    v = np.linspace(0.0, step * n, n + 1)
    _, _, q = _hyp_parts(model, R + 1j * v)
    logs = continuous_log(q)
    if len(_HYP_LADDER_CACHE) >= _HYP_CACHE_LIMIT:
        _HYP_LADDER_CACHE.clear()
    _HYP_LADDER_CACHE[key] = (v, logs.imag)
    return _HYP_LADDER_CACHE[key]


def _hyp_kappa(model: Hyperbolic, z):
    scalar = np.ndim(z) == 0
    if scalar and complex(z) == 0.0:
        return 0.0 + 0j
    shape = np.shape(z)
    zz = np.atleast_1d(np.asarray(z, dtype=complex)).ravel()
    re = zz.real
    if not scalar and zz.size > 1 and np.ptp(re) > 1e-12:
        raise DomainError(
            "hyperbolic cumulant on arrays requires a constant-Re contour")
    s, s0, q = _hyp_parts(model, zz)
    log_q = np.log(q)
    log_q[zz == 0.0] = 0.0
    if scalar:
        out = model.mu * zz - model.delta * (s - s0) + log_q
        return complex(out[0])
    R = float(re[0])
    v = zz.imag
    sgn = np.where(v >= 0.0, 1.0, -1.0)
    ladder_v, ladder_arg = _hyp_ladder(model, R, float(np.max(np.abs(v))) + 1.0)
    target = np.interp(np.abs(v), ladder_v, ladder_arg)
    # winding correction applies on |v|; conjugate symmetry restores sign
    k = np.round((target - log_q.imag * sgn) / (2.0 * math.pi))
    arg_abs = log_q.imag * sgn + 2.0 * math.pi * k
    unwound = log_q.real + 1j * arg_abs * sgn
    return (model.mu * zz - model.delta * (s - s0) + unwound).reshape(shape)


def cumulant(model: LevyModelSpec, z):
    """Cumulant function kappa with ``E[e^{z X_t}] = e^{t kappa(z)}``.

    Accepts a complex scalar or ndarray; ``Re(z)`` must lie strictly inside
    the model's moment strip.  For the hyperbolic model an array argument
    is treated as a discretization of a constant-Re contour and evaluated
    on the branch-continuous (distinguished) logarithm anchored at the
    real axis; a scalar argument uses the exact exponential part plus the
    principal log of the scaled Bessel ratio, which agrees with the
    distinguished branch whenever that ratio stays off the negative reals.
    """
    scalar = np.ndim(z) == 0
    zz = np.asarray(z, dtype=complex)
    _check_strip(model, np.atleast_1d(zz.real))
    if isinstance(model, Gaussian):
        out = (model.mu - 0.5 * model.sigma ** 2) * zz + 0.5 * model.sigma ** 2 * zz ** 2
    elif isinstance(model, MertonJD):
        out = (model.mu * zz + 0.5 * model.sigma ** 2 * zz ** 2
               + model.jump_intensity
               * (np.exp(model.jump_mean * zz + 0.5 * model.jump_sd ** 2 * zz ** 2) - 1.0))
    elif isinstance(model, NIG):
        a2 = model.alpha ** 2
        g0 = math.sqrt(a2 - model.beta ** 2)
        out = model.mu * zz + model.delta * (g0 - np.sqrt((a2 - (model.beta + zz) ** 2)
                                                          .astype(complex) if not scalar
                                                          else complex(a2 - (model.beta + zz) ** 2)))
    elif isinstance(model, VG):
        # alpha - beta z - z^2/2 stays in the right half-plane on the strip,
        # so the principal log is already branch-continuous along contours.
        denom = model.alpha - model.beta * zz - 0.5 * zz ** 2
        out = model.mu * zz + model.delta * np.log(model.alpha / denom)
    elif isinstance(model, Hyperbolic):
        return _hyp_kappa(model, z)
    else:
        raise UnsupportedModelError(f"unknown model {model!r}")
    return out if not scalar else complex(out)


def mgf_step(model: LevyModelSpec, z, dt: float):
    """Per-period moment function ``m(z) = exp(kappa(z) * dt)``.

    For the hyperbolic model the fractional power is taken through the
    distinguished logarithm along the supplied contour (see ``cumulant``).
    """
    if not dt > 0.0:
        raise ValueError(f"dt must be > 0, got {dt}")
    out = np.exp(np.asarray(cumulant(model, z)) * dt)
    return complex(out) if np.ndim(z) == 0 else out


def cumulant_derivatives(model: LevyModelSpec) -> tuple:
    """(kappa'(0), kappa''(0)): mean and variance of X_1.

    Central differences with one Richardson step; accurate to ~1e-9, which
    is far beyond what moment-matched benchmarking needs.
    """
    def d1(h):
        return (cumulant(model, h).real - cumulant(model, -h).real) / (2.0 * h)

    def d2(h):
        return (cumulant(model, h).real - 2.0 * cumulant(model, 0.0).real
                + cumulant(model, -h).real) / (h * h)

    h = 1e-3
    k1 = (4.0 * d1(h / 2) - d1(h)) / 3.0
    k2 = (4.0 * d2(h / 2) - d2(h)) / 3.0
    return k1, k2


def gaussian_benchmark(model: LevyModelSpec) -> Gaussian:
    """Gaussian model with the same mean and variance of log returns."""
    k1, k2 = cumulant_derivatives(model)
    return Gaussian(mu=k1 + 0.5 * k2, sigma=math.sqrt(k2))


def no_arbitrage_check(model: LevyModelSpec, dt: float) -> bool:
    """True iff the one-period variance denominator m(2) - m(1)^2 is
    materially positive (deterministic prices are rejected)."""
    m1 = mgf_step(model, 1.0, dt).real
    m2 = mgf_step(model, 2.0, dt).real
    return m2 - m1 * m1 > 1e-12 * max(m2, m1 * m1)


# ---------------------------------------------------------------------------
# Sampling
# ---------------------------------------------------------------------------

def sample_increments(model: LevyModelSpec, dt: float, rng: np.random.Generator,
                      size) -> np.ndarray:
    """Draws of X_{t+dt} - X_t, vectorized.

    Gaussian: closed form.  Merton: Brownian part plus a compound Poisson
    sum of normal jumps (aggregated per step).  NIG: inverse-Gaussian
    subordinator, then conditionally normal.  VG: gamma subordinator, then
    conditionally normal.  The hyperbolic model has no closed subordinator
    representation and is rejected.
    """
    if not dt > 0.0:
        raise ValueError(f"dt must be > 0, got {dt}")
    if isinstance(model, Gaussian):
        loc = (model.mu - 0.5 * model.sigma ** 2) * dt
        return rng.normal(loc, model.sigma * math.sqrt(dt), size=size)
    if isinstance(model, MertonJD):
        x = rng.normal(model.mu * dt, model.sigma * math.sqrt(dt), size=size)
        n = rng.poisson(model.jump_intensity * dt, size=size)
        # sum of n iid N(jump_mean, jump_sd^2) given n
        x = x + n * model.jump_mean + np.sqrt(n) * model.jump_sd * rng.standard_normal(size=size)
        return x
    if isinstance(model, NIG):
        gam = math.sqrt(model.alpha ** 2 - model.beta ** 2)
        mean = model.delta * dt / gam
        shape = (model.delta * dt) ** 2
        y = rng.wald(mean, shape, size=size)
        return model.mu * dt + model.beta * y + np.sqrt(y) * rng.standard_normal(size=size)
    if isinstance(model, VG):
        y = rng.gamma(model.delta * dt, 1.0 / model.alpha, size=size)
        return model.mu * dt + model.beta * y + np.sqrt(y) * rng.standard_normal(size=size)
    raise UnsupportedModelError(
        f"{type(model).__name__} has no increment sampler")


def sample_increment(model: LevyModelSpec, dt: float, rng: np.random.Generator) -> float:
    """One draw of X_{t+dt} - X_t."""
    return float(sample_increments(model, dt, rng, size=()))
