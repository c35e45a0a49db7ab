"""Nonlinearities h(s): catalog, truncations, envelopes and regularizations.

Every evaluator here is vectorized over numpy arrays and exposes ``slope`` (an
a.e. derivative) next to ``__call__`` so solvers can linearize any of them.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Optional, Protocol, Sequence

import numpy as np

from sdlab.errors import NonlinearityError

ArrayFn = Callable[[np.ndarray], np.ndarray]

_TINY = 1e-300
_FD_STEP = 1e-6


class Monotonicity(str, Enum):
    NONINCREASING = "nonincreasing"
    GENERAL = "general"


class Scheme(str, Enum):
    TRUNCATION = "truncation"
    SHIFT = "shift"


class ScalarNonlinearity(Protocol):
    def __call__(self, s: np.ndarray) -> np.ndarray: ...

    def slope(self, s: np.ndarray) -> np.ndarray: ...


def _fd_slope(fn: ArrayFn, s: np.ndarray) -> np.ndarray:
    s = np.asarray(s, dtype=float)
    step = _FD_STEP * np.maximum(np.abs(s), 1e-8)
    lower = np.maximum(s - step, 0.5 * s)
    upper = s + step
    return (fn(upper) - fn(lower)) / (upper - lower)


# ---------------------------------------------------------------------------
# Truncations
# ---------------------------------------------------------------------------


def truncate_T(k: float, s):
    """T_k(s) = max(-k, min(s, k))."""
    if k <= 0:
        raise ValueError(f"truncation level must be positive, got {k}")
    out = np.clip(s, -k, k)
    return float(out) if np.ndim(out) == 0 else out


def truncate_G(k: float, s):
    """G_k(s) = (|s| - k)^+ sign(s), so that T_k + G_k is the identity."""
    if k <= 0:
        raise ValueError(f"truncation level must be positive, got {k}")
    s_arr = np.asarray(s, dtype=float)
    out = np.maximum(np.abs(s_arr) - k, 0.0) * np.sign(s_arr)
    return float(out) if np.ndim(out) == 0 else out


# ---------------------------------------------------------------------------
# Specs
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class NonlinearitySpec:
    """A continuous h: (0, inf) -> [0, inf) with the constants of its growth bounds.

    ``k1, omega_low`` bound h by k1 * s^-gamma below omega_low; the optional
    ``k2, theta, omega_high`` bound it by k2 * s^-theta above omega_high.
    """

    func: ArrayFn
    gamma: float
    k1: float
    omega_low: float
    h_infinity: float = 0.0
    theta: Optional[float] = None
    k2: Optional[float] = None
    omega_high: Optional[float] = None
    monotone: Monotonicity = Monotonicity.GENERAL
    name: str = "custom"
    derivative: Optional[ArrayFn] = field(default=None, compare=False)

    def __call__(self, s) -> np.ndarray:
        return self.func(np.asarray(s, dtype=float))

    def slope(self, s) -> np.ndarray:
        s = np.asarray(s, dtype=float)
        if self.derivative is not None:
            return self.derivative(s)
        return _fd_slope(self.func, s)

    @property
    def nonincreasing(self) -> bool:
        return self.monotone is Monotonicity.NONINCREASING

    def check(self, num_samples: int = 400, limit_tol: float = 1e-2) -> list[str]:
        """Spot-check the growth assumptions; returns a list of violations."""
        problems: list[str] = []
        low = np.logspace(-8, math.log10(self.omega_low), num_samples, endpoint=False)
        values = self(low)
        if not np.all(np.isfinite(values)) or np.any(values < 0):
            problems.append("h is not finite and nonnegative near zero")
        bound = self.k1 * low ** (-self.gamma)
        if np.any(values > bound * (1 + 1e-12)):
            problems.append(f"h exceeds k1*s^-gamma below omega_low={self.omega_low:g}")
        if self.theta is not None:
            if self.k2 is None or self.omega_high is None:
                problems.append("theta given without k2 and omega_high")
            else:
                high = np.logspace(math.log10(self.omega_high), 6, num_samples)[1:]
                if np.any(self(high) > self.k2 * high ** (-self.theta) * (1 + 1e-12)):
                    problems.append(f"h exceeds k2*s^-theta above omega_high={self.omega_high:g}")
        far = self(np.array([1e2, 1e4, 1e6]))
        gaps = np.abs(far - self.h_infinity)
        if gaps[-1] > limit_tol * max(1.0, self.h_infinity) or gaps[-1] > gaps[0] + 1e-12:
            problems.append(f"h does not approach h_infinity={self.h_infinity:g}")
        if self.nonincreasing:
            grid = np.logspace(-8, 6, 4 * num_samples)
            if np.any(np.diff(self(grid)) > 1e-12 * np.abs(self(grid[:-1]))):
                problems.append("h is flagged nonincreasing but increases on samples")
        return problems

    def validate(self) -> "NonlinearitySpec":
        problems = self.check()
        if problems:
            raise NonlinearityError(f"{self.name}: " + "; ".join(problems))
        return self


def make_model_h(gamma: float) -> NonlinearitySpec:
    """The model nonlinearity h(s) = s^-gamma."""
    if gamma <= 0:
        raise NonlinearityError(f"gamma must be positive, got {gamma}")

    def func(s: np.ndarray) -> np.ndarray:
        with np.errstate(divide="ignore"):
            return np.power(np.maximum(s, 0.0), -gamma)

    def derivative(s: np.ndarray) -> np.ndarray:
        with np.errstate(divide="ignore"):
            return -gamma * np.power(np.maximum(s, 0.0), -gamma - 1.0)

    return NonlinearitySpec(
        func=func,
        gamma=gamma,
        k1=1.0,
        omega_low=1.0,
        h_infinity=0.0,
        theta=gamma,
        k2=1.0,
        omega_high=1.0,
        monotone=Monotonicity.NONINCREASING,
        name=f"model_power(gamma={gamma:g})",
        derivative=derivative,
    )


def make_bounded_h(c_infinity: float, gamma: float = 1.0, k1: float = 1.0, cap: float = 1.0) -> NonlinearitySpec:
    """h(s) = max(c_inf, min(k1*s^-gamma, cap)): bounded, nonincreasing, h(inf) = c_inf."""
    if c_infinity < 0:
        raise NonlinearityError(f"c_infinity must be nonnegative, got {c_infinity}")
    if gamma <= 0 or k1 <= 0 or cap <= 0:
        raise NonlinearityError("gamma, k1 and cap must be positive")

    def func(s: np.ndarray) -> np.ndarray:
        with np.errstate(divide="ignore"):
            power = k1 * np.power(np.maximum(s, 0.0), -gamma)
        return np.maximum(c_infinity, np.minimum(power, cap))

    def derivative(s: np.ndarray) -> np.ndarray:
        with np.errstate(divide="ignore"):
            power = k1 * np.power(np.maximum(s, 0.0), -gamma)
            active = (power < cap) & (power > c_infinity)
            return np.where(active, -gamma * power / np.maximum(s, _TINY), 0.0)

    decays = c_infinity == 0
    return NonlinearitySpec(
        func=func,
        gamma=gamma,
        k1=max(k1, c_infinity),
        omega_low=1.0,
        h_infinity=c_infinity,
        theta=gamma if decays else None,
        k2=k1 if decays else None,
        omega_high=1.0 if decays else None,
        monotone=Monotonicity.NONINCREASING,
        name=f"bounded(c_inf={c_infinity:g}, gamma={gamma:g})",
        derivative=derivative,
    )


def make_power_pair_h(gamma: float, theta: float) -> NonlinearitySpec:
    """h(s) = s^-gamma on (0, 1] and s^-theta on (1, inf)."""
    if gamma <= 0 or theta <= 0:
        raise NonlinearityError("gamma and theta must be positive")

    def func(s: np.ndarray) -> np.ndarray:
        s = np.maximum(s, 0.0)
        with np.errstate(divide="ignore"):
            return np.where(s <= 1.0, np.power(s, -gamma), np.power(s, -theta))

    def derivative(s: np.ndarray) -> np.ndarray:
        s = np.maximum(s, 0.0)
        with np.errstate(divide="ignore"):
            return np.where(s <= 1.0, -gamma * np.power(s, -gamma - 1), -theta * np.power(s, -theta - 1))

    return NonlinearitySpec(
        func=func,
        gamma=gamma,
        k1=1.0,
        omega_low=1.0,
        h_infinity=0.0,
        theta=theta,
        k2=1.0,
        omega_high=1.0,
        monotone=Monotonicity.NONINCREASING,
        name=f"power_pair(gamma={gamma:g}, theta={theta:g})",
        derivative=derivative,
    )


def make_table_h(points: Sequence[tuple[float, float]], gamma: float) -> NonlinearitySpec:
    """Piecewise-linear h through (s, h) points, constant outside the table."""
    if len(points) < 2:
        raise NonlinearityError("a table nonlinearity needs at least two points")
    table = np.array(sorted(points), dtype=float)
    xs, ys = table[:, 0], table[:, 1]
    if np.any(xs <= 0) or np.any(ys < 0):
        raise NonlinearityError("table abscissae must be positive and values nonnegative")

    def func(s: np.ndarray) -> np.ndarray:
        return np.interp(s, xs, ys)

    omega_low = float(xs[-1])
    below = np.logspace(-8, math.log10(omega_low), 200)
    k1 = float(np.max(func(below) * below**gamma))
    monotone = Monotonicity.NONINCREASING if np.all(np.diff(ys) <= 0) else Monotonicity.GENERAL
    return NonlinearitySpec(
        func=func,
        gamma=gamma,
        k1=max(k1, _TINY),
        omega_low=omega_low,
        h_infinity=float(ys[-1]),
        monotone=monotone,
        name="custom_table",
    )


def nonlinearity_from_config(
    name: str,
    gamma: float = 1.0,
    theta: Optional[float] = None,
    c_infinity: float = 0.0,
    cap: float = 1.0,
    table: Sequence[tuple[float, float]] = (),
) -> NonlinearitySpec:
    """Build a catalog nonlinearity from its scenario-file name and parameters."""
    if name == "model_power":
        return make_model_h(gamma)
    if name == "bounded":
        return make_bounded_h(c_infinity, gamma, cap=cap)
    if name == "power_pair":
        return make_power_pair_h(gamma, theta if theta is not None else gamma)
    if name == "custom_table":
        return make_table_h(table, gamma)
    raise NonlinearityError(f"Unknown nonlinearity: {name!r}")


# ---------------------------------------------------------------------------
# Envelopes
# ---------------------------------------------------------------------------


def _tail_sup(spec: NonlinearitySpec, s_max: float) -> float:
    if spec.theta is not None and spec.k2 is not None and spec.omega_high is not None and s_max > spec.omega_high:
        return spec.k2 * s_max ** (-spec.theta)
    far = np.logspace(math.log10(s_max), math.log10(s_max) + 6, 600)
    return float(max(np.max(spec(far)), spec.h_infinity))


@dataclass(frozen=True, eq=False)
class UpperEnvelope:
    """Nonincreasing continuous majorant: power law below rho, then unit steps.

    On [rho + m - 1, rho + m - 1/2) it descends linearly from level m-1 to level
    m, and it stays at level m on [rho + m - 1/2, rho + m].
    """

    nonincreasing = True

    k1: float
    gamma: float
    rho: float
    levels: np.ndarray

    def _level(self, m: np.ndarray) -> np.ndarray:
        return self.levels[np.minimum(m, self.levels.shape[0] - 1)]

    def __call__(self, s) -> np.ndarray:
        s = np.asarray(s, dtype=float)
        with np.errstate(divide="ignore"):
            power = self.k1 * np.power(np.maximum(s, 0.0), -self.gamma)
        x = np.maximum(s - self.rho, 0.0)
        m = np.floor(x).astype(np.int64) + 1
        frac = x - (m - 1)
        previous, current = self._level(m - 1), self._level(m)
        steps = np.where(frac < 0.5, 2.0 * (current - previous) * frac + previous, current)
        return np.where(s < self.rho, power, steps)

    def slope(self, s) -> np.ndarray:
        return _fd_slope(self, s)


def build_upper_envelope(
    spec: NonlinearitySpec,
    samples_per_unit: int = 512,
    s_max: float = 200.0,
    sup_margin: float = 1e-6,
) -> UpperEnvelope:
    """Construct the majorant with the largest admissible rho <= omega_low.

    Suprema over tails are estimated by dense sampling up to ``s_max`` and by the
    decay bound at infinity beyond it.
    """
    tail = _tail_sup(spec, s_max)
    head = np.linspace(spec.omega_low, s_max, max(int(samples_per_unit * (s_max - spec.omega_low)), 2))
    sup_high = max(float(np.max(spec(head))), tail)
    if not math.isfinite(sup_high):
        raise NonlinearityError(f"{spec.name}: h is unbounded on [omega_low, inf)")
    rho = spec.omega_low if sup_high <= 0 else min(spec.omega_low, (spec.k1 / sup_high) ** (1.0 / spec.gamma))

    t = np.linspace(rho, s_max, max(int(samples_per_unit * (s_max - rho)), 2))
    suffix = np.maximum(np.maximum.accumulate(spec(t)[::-1])[::-1], tail)
    num_units = int(math.ceil(s_max - rho))
    starts = rho + np.arange(num_units + 1)
    idx = np.searchsorted(t, starts, side="left")
    tail_levels = np.where(idx < t.shape[0], suffix[np.minimum(idx, t.shape[0] - 1)], tail)

    top = spec.k1 * rho ** (-spec.gamma)
    # levels[j + 1] bounds h on [rho + j, inf); the last entry covers s beyond s_max
    levels = np.empty(num_units + 3)
    levels[0] = top
    levels[1:-1] = tail_levels
    levels[-1] = tail
    levels[1:] = np.minimum(levels[1:] * (1.0 + sup_margin), top)
    levels = np.minimum.accumulate(levels)
    levels.setflags(write=False)
    return UpperEnvelope(k1=spec.k1, gamma=spec.gamma, rho=rho, levels=levels)


@dataclass(frozen=True, eq=False)
class LowerEnvelope:
    """Nonincreasing continuous minorant, below min(h, 1) on the sampled range."""

    nonincreasing = True

    log_s: np.ndarray
    log_values: np.ndarray
    tail_decay: float

    def __call__(self, s) -> np.ndarray:
        s = np.maximum(np.asarray(s, dtype=float), _TINY)
        log_s = np.log(s)
        inside = np.exp(np.interp(log_s, self.log_s, self.log_values))
        beyond = np.exp(self.log_values[-1] - self.tail_decay * (log_s - self.log_s[-1]))
        return np.where(log_s > self.log_s[-1], beyond, inside)

    def slope(self, s) -> np.ndarray:
        return _fd_slope(self, s)


def build_lower_envelope(
    spec: NonlinearitySpec,
    s_min: float = 1e-8,
    s_max: float = 200.0,
    num_samples: int = 6000,
    margin: float = 1e-3,
) -> LowerEnvelope:
    """Running minimum of min(h, 1), interpolated log-log and shrunk by ``margin``.

    Capping at 1 = T_1 keeps the minorant below every truncation T_n(h), n >= 1.
    Beyond ``s_max`` the minorant is flat when h(inf) > 0 and decays like
    s^-(theta + 1) otherwise.
    """
    t = np.logspace(math.log10(s_min), math.log10(s_max), num_samples)
    running = np.minimum.accumulate(np.minimum(spec(t), 1.0)) * (1.0 - margin)
    if np.any(running <= 0):
        raise NonlinearityError(f"{spec.name}: h vanishes on the sampled range")
    decay = 0.0 if spec.h_infinity > 0 else (spec.theta or 1.0) + 1.0
    return LowerEnvelope(log_s=np.log(t), log_values=np.log(running), tail_decay=decay)


@dataclass(frozen=True, eq=False)
class EnvelopePair:
    lower: LowerEnvelope
    upper: UpperEnvelope

    @property
    def rho(self) -> float:
        return self.upper.rho


def build_envelopes(spec: NonlinearitySpec, samples_per_unit: int = 512, s_max: float = 200.0) -> EnvelopePair:
    return EnvelopePair(
        lower=build_lower_envelope(spec, s_max=s_max),
        upper=build_upper_envelope(spec, samples_per_unit=samples_per_unit, s_max=s_max),
    )


# ---------------------------------------------------------------------------
# Regularization
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class RegularizedNonlinearity:
    """h_n for the truncation scheme min(h, n) or the shift scheme h(s + 1/n)."""

    base: ScalarNonlinearity
    n: float
    scheme: Scheme = Scheme.TRUNCATION
    nonincreasing: bool = True

    def __call__(self, s) -> np.ndarray:
        s = np.asarray(s, dtype=float)
        if self.scheme is Scheme.SHIFT:
            return self.base(np.maximum(s, 0.0) + 1.0 / self.n)
        # s <= 0 takes the limit h(0+), capped at n
        with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
            raw = self.base(np.where(s > 0, s, _TINY))
        return np.minimum(raw, self.n)

    def slope(self, s) -> np.ndarray:
        s = np.asarray(s, dtype=float)
        if self.scheme is Scheme.SHIFT:
            return self.base.slope(np.maximum(s, 0.0) + 1.0 / self.n)
        positive = s > 0
        safe = np.where(positive, s, 1.0)
        active = positive & (self.base(safe) < self.n)
        return np.where(active, self.base.slope(safe), 0.0)

    def _kink(self, lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
        """Where the nonincreasing base crosses level n inside [lo, hi] (nan if it does not)."""
        lo = np.maximum(lo, 1e-300)
        crossing = (self.base(lo) > self.n) & (self.base(hi) <= self.n)
        left, right = lo.copy(), hi.copy()
        # geometric bisection: kinks sit at tiny s when n is large
        for _ in range(80):
            mid = np.sqrt(left * right)
            above = self.base(mid) > self.n
            left = np.where(above, mid, left)
            right = np.where(above, right, mid)
        return np.where(crossing, right, np.nan)

    def max_abs_slope(self, lo: np.ndarray, hi: np.ndarray, samples: int = 17) -> np.ndarray:
        """Sampled bound of |h_n'| on each nodal interval [lo_i, hi_i]."""
        lo = np.asarray(lo, dtype=float)
        hi = np.maximum(np.asarray(hi, dtype=float), lo)
        weights = np.linspace(0.0, 1.0, samples)[:, None]
        points = lo[None, :] + weights * (hi - lo)[None, :]
        bound = np.max(np.abs(self.slope(points)), axis=0)
        if self.scheme is Scheme.TRUNCATION and self.nonincreasing:
            kink = self._kink(lo, hi)
            has_kink = np.isfinite(kink)
            if np.any(has_kink):
                at_kink = np.abs(self.slope(np.where(has_kink, kink * (1 + 1e-12), 1.0)))
                bound = np.where(has_kink, np.maximum(bound, at_kink), bound)
        return 1.05 * bound


def regularize(base: ScalarNonlinearity, n: float, scheme: Scheme | str = Scheme.TRUNCATION) -> RegularizedNonlinearity:
    """Bounded continuous approximation h_n converging to h pointwise on (0, inf)."""
    if n < 1:
        raise ValueError(f"regularization index must be >= 1, got {n}")
    nonincreasing = bool(getattr(base, "nonincreasing", True))
    return RegularizedNonlinearity(base=base, n=float(n), scheme=Scheme(scheme), nonincreasing=nonincreasing)
