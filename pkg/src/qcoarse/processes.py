"""Wait-time distributions of continuous-time renewal event processes.

A renewal process is fixed by the density ``phi(t)`` of the time between
consecutive events.  Every distribution here exposes the density, the
survival probability ``Phi(t) = P(wait > t)``, the mean firing rate
``mu = 1 / E[wait]``, the steady-state density ``mu * Phi(t)`` of the time
since the last event, and the square-root amplitude ``psi = sqrt(phi)``
consumed by the exponential-sum decomposition.

All computation downstream happens on a rescaled unit domain: the
approximation region ``[0, T]`` (with ``Phi(T) < 1e-6``) is mapped onto
``[0, 1]`` by :func:`tail_cutoff` plus :meth:`WaitTimeDistribution.rescaled`.
``time_unit`` is carried as metadata and only applied at I/O boundaries.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import erf, erfc

from qcoarse.errors import (
    DomainError,
    InputError,
    UnsupportedDistributionError,
)

__all__ = [
    "WaitTimeDistribution",
    "Exponential",
    "AlternatingPoisson",
    "BimodalGaussian",
    "TopHat",
    "Tabulated",
    "make_distribution",
    "parse_dist_spec",
    "tail_cutoff",
    "sample_grid",
    "unit_rate",
]

_SQRT_PI = math.sqrt(math.pi)
TAIL_THRESHOLD = 1e-6


def _check_times(t):
    """Validate and broadcast a time argument; negative times are a domain error."""
    arr = np.asarray(t, dtype=float)
    if arr.size and float(arr.min()) < 0.0:
        raise DomainError("wait times must be non-negative")
    return arr


def _maybe_scalar(arr, t):
    if np.isscalar(t) or getattr(t, "ndim", 1) == 0:
        return float(arr)
    return arr


class WaitTimeDistribution:
    """Base class for wait-time distributions.

    Subclasses implement :meth:`pdf`, :meth:`survival`, :meth:`mean_wait`
    and :meth:`rescaled`; the derived quantities live here.
    """

    kind = "base"
    time_unit = 1.0

    def pdf(self, t):
        """Probability density of the wait time, vectorized over ``t >= 0``."""
        raise NotImplementedError

    def survival(self, t):
        """P(wait > t), vectorized over ``t >= 0``."""
        raise NotImplementedError

    def mean_wait(self) -> float:
        """Expected wait between events."""
        raise NotImplementedError

    def rescaled(self, scale: float) -> "WaitTimeDistribution":
        """Distribution of ``scale * wait`` (time measured in new units)."""
        raise NotImplementedError

    def mean_firing_rate(self) -> float:
        """Long-run event rate ``mu = 1 / E[wait]``."""
        mean = self.mean_wait()
        if not np.isfinite(mean) or mean <= 0.0:
            raise UnsupportedDistributionError(
                f"{self.kind}: mean wait {mean!r} does not define a firing rate"
            )
        return 1.0 / mean

    def steady_state_density(self, t):
        """Density ``mu * Phi(t)`` of the time since the last event."""
        return self.mean_firing_rate() * self.survival(t)

    def sqrt_wave(self, t):
        """Square-root amplitude ``psi(t) = sqrt(phi(t))``."""
        return np.sqrt(self.pdf(t))

    def params(self) -> dict:
        """Constructor parameters, for spec strings and serialization."""
        raise NotImplementedError

    def spec_string(self) -> str:
        items = ",".join(
            f"{k}={v}" if isinstance(v, str) else f"{k}={float(v)!r}"
            for k, v in self.params().items()
        )
        return f"{self.kind}:{items}"

    def __repr__(self):
        return f"{type(self).__name__}({self.spec_string()!r})"


@dataclass(frozen=True, repr=False)
class Exponential(WaitTimeDistribution):
    """Memoryless wait times, density ``gamma * exp(-gamma t)``."""

    gamma: float
    time_unit: float = 1.0
    kind = "exponential"

    def __post_init__(self):
        if self.gamma <= 0:
            raise InputError("exponential: gamma must be positive")
        if self.time_unit <= 0:
            raise InputError("time_unit must be positive")

    def pdf(self, t):
        tt = _check_times(t)
        return _maybe_scalar(self.gamma * np.exp(-self.gamma * tt), t)

    def survival(self, t):
        tt = _check_times(t)
        return _maybe_scalar(np.exp(-self.gamma * tt), t)

    def mean_wait(self):
        return 1.0 / self.gamma

    def rescaled(self, scale):
        if scale <= 0:
            raise InputError("scale must be positive")
        if scale == 1.0:
            return self
        return Exponential(self.gamma / scale, time_unit=self.time_unit)

    def params(self):
        return {"gamma": self.gamma}


@dataclass(frozen=True, repr=False)
class AlternatingPoisson(WaitTimeDistribution):
    """Every second event of a Poisson process: density ``gamma^2 t exp(-gamma t)``.

    The underlying Poisson process has rate ``gamma``; keeping every other
    event halves the firing rate to ``gamma / 2``.
    """

    gamma: float
    time_unit: float = 1.0
    kind = "alternating_poisson"

    def __post_init__(self):
        if self.gamma <= 0:
            raise InputError("alternating_poisson: gamma must be positive")
        if self.time_unit <= 0:
            raise InputError("time_unit must be positive")

    def pdf(self, t):
        tt = _check_times(t)
        return _maybe_scalar(self.gamma**2 * tt * np.exp(-self.gamma * tt), t)

    def survival(self, t):
        tt = _check_times(t)
        return _maybe_scalar((1.0 + self.gamma * tt) * np.exp(-self.gamma * tt), t)

    def mean_wait(self):
        return 2.0 / self.gamma

    def rescaled(self, scale):
        if scale <= 0:
            raise InputError("scale must be positive")
        if scale == 1.0:
            return self
        return AlternatingPoisson(self.gamma / scale, time_unit=self.time_unit)

    def params(self):
        return {"gamma": self.gamma}


@dataclass(frozen=True, repr=False)
class BimodalGaussian(WaitTimeDistribution):
    """Mixture of two Gaussian bumps restricted to ``t >= 0``.

    Density ``p1 * exp(-((t - mu1)/sigma1)^2) + p2 * exp(-((t - mu2)/sigma2)^2)``.
    The weights passed to the constructor are rescaled jointly so the density
    integrates to one on ``[0, inf)``; the stored ``p1, p2`` are the
    normalized coefficients.
    """

    p1: float
    p2: float
    mu1: float
    mu2: float
    sigma1: float = 1.0
    sigma2: float = 1.0
    time_unit: float = 1.0
    kind = "bimodal_gaussian"

    def __post_init__(self):
        if self.p1 <= 0 or self.p2 <= 0:
            raise InputError("bimodal_gaussian: weights must be positive")
        if self.sigma1 <= 0 or self.sigma2 <= 0:
            raise InputError("bimodal_gaussian: widths must be positive")
        if self.time_unit <= 0:
            raise InputError("time_unit must be positive")
        total = self.p1 * self._bump_integral(self.mu1, self.sigma1) + (
            self.p2 * self._bump_integral(self.mu2, self.sigma2)
        )
        object.__setattr__(self, "p1", self.p1 / total)
        object.__setattr__(self, "p2", self.p2 / total)

    @staticmethod
    def _bump_integral(mu, sigma):
        # int_0^inf exp(-((t-mu)/sigma)^2) dt
        return sigma * _SQRT_PI / 2.0 * (1.0 + erf(mu / sigma))

    def pdf(self, t):
        tt = _check_times(t)
        out = self.p1 * np.exp(-(((tt - self.mu1) / self.sigma1) ** 2)) + (
            self.p2 * np.exp(-(((tt - self.mu2) / self.sigma2) ** 2))
        )
        return _maybe_scalar(out, t)

    def survival(self, t):
        # anchored at t=0 (the two erf terms cancel there bit-exactly) so that
        # survival(0) is exactly one
        tt = _check_times(t)
        cum = self.p1 * self._bump_cum(tt, self.mu1, self.sigma1) + (
            self.p2 * self._bump_cum(tt, self.mu2, self.sigma2)
        )
        out = np.clip(1.0 - cum, 0.0, 1.0)
        return _maybe_scalar(out, t)

    @staticmethod
    def _bump_cum(tt, mu, sigma):
        # int_0^t exp(-((s-mu)/sigma)^2) ds
        return sigma * _SQRT_PI / 2.0 * (erf((tt - mu) / sigma) - erf((0.0 - mu) / sigma))

    def mean_wait(self):
        def bump_mean(mu, sigma):
            return sigma**2 / 2.0 * math.exp(-((mu / sigma) ** 2)) + (
                mu * self._bump_integral(mu, sigma)
            )

        return self.p1 * bump_mean(self.mu1, self.sigma1) + (
            self.p2 * bump_mean(self.mu2, self.sigma2)
        )

    def rescaled(self, scale):
        if scale <= 0:
            raise InputError("scale must be positive")
        if scale == 1.0:
            return self
        # X' = scale * X: bumps move/stretch, weights renormalize in __post_init__
        return BimodalGaussian(
            self.p1 / scale,
            self.p2 / scale,
            self.mu1 * scale,
            self.mu2 * scale,
            self.sigma1 * scale,
            self.sigma2 * scale,
            time_unit=self.time_unit,
        )

    def params(self):
        return {
            "p1": self.p1,
            "p2": self.p2,
            "mu1": self.mu1,
            "mu2": self.mu2,
            "sigma1": self.sigma1,
            "sigma2": self.sigma2,
        }


@dataclass(frozen=True, repr=False)
class TopHat(WaitTimeDistribution):
    """Uniform wait on ``[tau - width, tau]``."""

    tau: float
    width: float
    time_unit: float = 1.0
    kind = "top_hat"

    def __post_init__(self):
        if self.tau <= 0:
            raise InputError("top_hat: tau must be positive")
        if not 0 < self.width <= self.tau:
            raise InputError("top_hat: width must satisfy 0 < width <= tau")
        if self.time_unit <= 0:
            raise InputError("time_unit must be positive")

    def pdf(self, t):
        tt = _check_times(t)
        lo = self.tau - self.width
        out = np.where((tt >= lo) & (tt <= self.tau), 1.0 / self.width, 0.0)
        return _maybe_scalar(out, t)

    def survival(self, t):
        tt = _check_times(t)
        lo = self.tau - self.width
        out = np.clip((self.tau - tt) / self.width, 0.0, 1.0)
        out = np.where(tt <= lo, 1.0, out)
        return _maybe_scalar(out, t)

    def mean_wait(self):
        return self.tau - self.width / 2.0

    def rescaled(self, scale):
        if scale <= 0:
            raise InputError("scale must be positive")
        if scale == 1.0:
            return self
        return TopHat(self.tau * scale, self.width * scale, time_unit=self.time_unit)

    def params(self):
        return {"tau": self.tau, "width": self.width}


class Tabulated(WaitTimeDistribution):
    """Piecewise-linear density from ``(t, density)`` pairs.

    The grid must be strictly ascending and start at ``t >= 0``; values are
    renormalized on load so the density integrates to one.  Outside the grid
    the density is zero.  Survival and mean use the exact integrals of the
    piecewise-linear density.
    """

    kind = "tabulated"

    def __init__(self, grid, values, time_unit=1.0):
        grid = np.asarray(grid, dtype=float)
        values = np.asarray(values, dtype=float)
        if grid.ndim != 1 or grid.shape != values.shape or grid.size < 2:
            raise InputError("tabulated: grid and values must be equal-length 1-D arrays")
        if grid[0] < 0:
            raise InputError("tabulated: grid must start at t >= 0")
        if np.any(np.diff(grid) <= 0):
            raise InputError("tabulated: grid must be strictly ascending")
        if np.any(values < 0) or not np.all(np.isfinite(values)):
            raise InputError("tabulated: densities must be finite and non-negative")
        if time_unit <= 0:
            raise InputError("time_unit must be positive")
        total = np.trapezoid(values, grid)
        if total <= 0:
            raise InputError("tabulated: density integrates to zero")
        self.grid = grid
        self.values = values / total
        self.time_unit = float(time_unit)
        # survival at the nodes via reverse cumulative trapezoid
        seg = 0.5 * (self.values[1:] + self.values[:-1]) * np.diff(grid)
        tail = np.concatenate([np.cumsum(seg[::-1])[::-1], [0.0]])
        self._node_survival = tail

    @classmethod
    def from_file(cls, path, time_unit=1.0):
        """Load a two-column ``t density`` text file ('#' comments allowed)."""
        try:
            data = np.loadtxt(path, comments="#", ndmin=2)
        except (OSError, ValueError) as exc:
            raise InputError(f"tabulated: cannot read {path}: {exc}") from exc
        if data.shape[1] != 2:
            raise InputError("tabulated: expected exactly two columns (t, density)")
        return cls(data[:, 0], data[:, 1], time_unit=time_unit)

    def pdf(self, t):
        tt = _check_times(t)
        out = np.interp(tt, self.grid, self.values, left=0.0, right=0.0)
        return _maybe_scalar(out, t)

    def survival(self, t):
        tt = _check_times(t)
        flat = np.atleast_1d(tt)
        idx = np.searchsorted(self.grid, flat, side="right") - 1
        out = np.empty_like(flat)
        # no mass below grid[0], so survival there is exactly one
        out[flat <= self.grid[0]] = 1.0
        out[flat >= self.grid[-1]] = 0.0
        inside = (idx >= 0) & (flat < self.grid[-1]) & (flat > self.grid[0])
        i = idx[inside]
        x = flat[inside]
        x0, x1 = self.grid[i], self.grid[i + 1]
        v0, v1 = self.values[i], self.values[i + 1]
        vx = v0 + (v1 - v0) / (x1 - x0) * (x - x0)
        # exact integral of the linear segment from x to x1
        out[inside] = self._node_survival[i + 1] + 0.5 * (vx + v1) * (x1 - x)
        if tt.ndim == 0:
            return float(out[0])
        return out

    def mean_wait(self):
        # exact first moment of the piecewise-linear density
        x0, x1 = self.grid[:-1], self.grid[1:]
        v0, v1 = self.values[:-1], self.values[1:]
        h = x1 - x0
        seg = h * (v0 * (2 * x0 + x1) + v1 * (x0 + 2 * x1)) / 6.0
        return float(np.sum(seg))

    def rescaled(self, scale):
        if scale <= 0:
            raise InputError("scale must be positive")
        if scale == 1.0:
            return self
        return Tabulated(self.grid * scale, self.values / scale, time_unit=self.time_unit)

    def params(self):
        return {"points": self.grid.size}

    def spec_string(self):
        return f"tabulated:{self.grid.size} points"


_FAMILIES = {
    "exponential": Exponential,
    "alternating_poisson": AlternatingPoisson,
    "bimodal_gaussian": BimodalGaussian,
    "top_hat": TopHat,
}


def make_distribution(kind, **params) -> WaitTimeDistribution:
    """Construct a built-in distribution by family name."""
    if kind == "tabulated":
        if "path" in params:
            return Tabulated.from_file(params.pop("path"), **params)
        return Tabulated(**params)
    try:
        cls = _FAMILIES[kind]
    except KeyError:
        raise InputError(
            f"unknown distribution kind {kind!r}; expected one of "
            f"{sorted(_FAMILIES) + ['tabulated']}"
        ) from None
    return cls(**params)


def parse_dist_spec(spec: str) -> WaitTimeDistribution:
    """Parse ``kind:key=value,...`` strings, e.g. ``exponential:gamma=1``.

    Tabulated files are referenced as ``tabulated:path=waits.txt``.
    """
    if ":" not in spec:
        raise InputError(f"distribution spec {spec!r} must look like 'kind:key=value,...'")
    kind, _, body = spec.partition(":")
    kind = kind.strip()
    params = {}
    if body.strip():
        for item in body.split(","):
            key, sep, value = item.partition("=")
            if not sep:
                raise InputError(f"bad parameter {item!r} in distribution spec {spec!r}")
            key = key.strip()
            value = value.strip()
            if kind == "tabulated" and key == "path":
                params[key] = value
            else:
                try:
                    params[key] = float(value)
                except ValueError:
                    raise InputError(
                        f"parameter {key!r} in spec {spec!r} is not a number"
                    ) from None
    try:
        return make_distribution(kind, **params)
    except TypeError as exc:
        raise InputError(f"bad parameters for {kind!r}: {exc}") from None


def tail_cutoff(dist, threshold: float = TAIL_THRESHOLD, max_doublings: int = 48) -> float:
    """Smallest power-of-two ``T`` with ``survival(T) < threshold``.

    A dyadic cutoff keeps the unit-domain rescaling exactly equivariant under
    power-of-two time rescalings, which downstream reproducibility checks use.
    Works for anything exposing ``survival``.
    """
    t = 1.0
    for _ in range(max_doublings):
        if float(dist.survival(t)) < threshold:
            return t
        t *= 2.0
    raise UnsupportedDistributionError(
        f"survival still >= {threshold} at t={t}; tail too heavy for a finite cutoff"
    )


def unit_rate(dist: WaitTimeDistribution, rate: float = 1.0) -> WaitTimeDistribution:
    """Rescale time so the mean firing rate equals ``rate``.

    Returns ``dist`` itself when the rate already matches to 1e-12, so
    processes defined at the target rate pass through bit for bit.
    """
    if rate <= 0:
        raise InputError("target rate must be positive")
    scale = dist.mean_firing_rate() / rate
    if abs(scale - 1.0) < 1e-12:
        return dist
    return dist.rescaled(scale)


def sample_grid(dist: WaitTimeDistribution, m: int, domain=None) -> np.ndarray:
    """Amplitude samples ``psi`` on the rescaled unit interval.

    The approximation region ``[0, T]`` (``domain=(0, T)``, default from
    :func:`tail_cutoff`) is mapped to ``[0, 1]`` and the square-root amplitude
    of the rescaled process is sampled at ``j / m`` for ``0 <= j <= m``.
    ``m`` must be even so the downstream Hankel matrix is square.
    """
    if m < 2 or m % 2 != 0:
        raise InputError("sample count m must be an even integer >= 2")
    if domain is None:
        t_max = tail_cutoff(dist)
    else:
        lo, t_max = (0.0, float(domain)) if np.isscalar(domain) else map(float, domain)
        if lo != 0.0:
            raise InputError("approximation domain must start at 0")
        if t_max <= 0:
            raise InputError("approximation domain must have positive length")
    unit = dist.rescaled(1.0 / t_max)
    return unit.sqrt_wave(np.arange(m + 1) / m)
