"""Medium geometry: interface trajectories and travel-time bookkeeping.

The medium occupies (0, b) with wave speed 1 on (0, a(t)) and k on (a(t), b).
Everything downstream is driven by three monotone travel-time maps built from
the trajectory,

    emission(t)    = t - a(t)      time a ray hitting the interface at t left x=0
    echo(t)        = t + a(t)      time the reflected ray returns to x=0
    transmitted(t) = t - a(t)/k    boundary-time coordinate of the transmitted ray

and by the amplitude coefficients of reflection/transmission at the moving
interface.  All maps are strictly increasing as long as the interface is
subsonic for both media, i.e. sup |a'(t)| < min(1, k).

Every object here is immutable after construction and every operation is a
pure function of its inputs.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.interpolate import CubicSpline


class TrajectoryRangeError(ValueError):
    """Interface trajectory leaves the open interval (0, b)."""


class SubsonicError(ValueError):
    """Operation requires the subsonic condition sup|a'| < min(1, k)."""


# ---------------------------------------------------------------------------
# Interface trajectories
# ---------------------------------------------------------------------------

class _TrajectoryBase:
    """Common clamped extension: constant value, zero slope outside [0, t_ext].

    Subclasses implement ``_position/_slope/_curvature`` on the nominal
    domain; the public accessors clamp the argument so that queries slightly
    outside [0, t_ext] (root brackets, inverse maps near the horizon) are
    well defined and keep the subsonic bound.
    """

    t_ext: float

    def _clamp(self, t):
        return np.clip(t, 0.0, self.t_ext)

    def position(self, t):
        return self._position(self._clamp(t))

    def slope(self, t):
        t = np.asarray(t, dtype=float)
        inside = (t >= 0.0) & (t <= self.t_ext)
        out = np.where(inside, self._slope(self._clamp(t)), 0.0)
        return out if out.ndim else float(out)

    def curvature(self, t):
        t = np.asarray(t, dtype=float)
        inside = (t >= 0.0) & (t <= self.t_ext)
        out = np.where(inside, self._curvature(self._clamp(t)), 0.0)
        return out if out.ndim else float(out)


@dataclass(frozen=True)
class ConstantTrajectory(_TrajectoryBase):
    """a(t) = a0."""

    a0: float
    t_ext: float = np.inf

    def _position(self, t):
        t = np.asarray(t, float)
        return np.full_like(t, self.a0) if t.ndim else self.a0

    def _slope(self, t):
        t = np.asarray(t, float)
        return np.zeros_like(t) if t.ndim else 0.0

    def _curvature(self, t):
        t = np.asarray(t, float)
        return np.zeros_like(t) if t.ndim else 0.0


@dataclass(frozen=True)
class AffineTrajectory(_TrajectoryBase):
    """a(t) = a0 + rate * t on [0, t_ext], clamped outside."""

    a0: float
    rate: float
    t_ext: float

    def _position(self, t):
        return self.a0 + self.rate * np.asarray(t, float)

    def _slope(self, t):
        t = np.asarray(t, float)
        return np.full_like(t, self.rate) if t.ndim else self.rate

    def _curvature(self, t):
        t = np.asarray(t, float)
        return np.zeros_like(t) if t.ndim else 0.0


@dataclass(frozen=True)
class SinusoidalTrajectory(_TrajectoryBase):
    """a(t) = a0 + amplitude * sin(omega * t + phase)."""

    a0: float
    amplitude: float
    omega: float
    phase: float = 0.0
    t_ext: float = np.inf

    def _position(self, t):
        return self.a0 + self.amplitude * np.sin(self.omega * np.asarray(t, float) + self.phase)

    def _slope(self, t):
        return self.amplitude * self.omega * np.cos(self.omega * np.asarray(t, float) + self.phase)

    def _curvature(self, t):
        return -self.amplitude * self.omega**2 * np.sin(self.omega * np.asarray(t, float) + self.phase)


@dataclass(frozen=True)
class SplineTrajectory(_TrajectoryBase):
    """Cubic-spline trajectory through (times, values) samples.

    Slopes and curvatures come from the spline's analytic derivatives, so the
    subsonic validation is exact to spline precision rather than to a finite
    difference step.
    """

    times: tuple
    values: tuple
    t_ext: float = field(init=False)
    _spline: CubicSpline = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        times = np.asarray(self.times, float)
        values = np.asarray(self.values, float)
        if times.size < 4:
            raise ValueError("spline trajectory needs at least 4 samples")
        spline = CubicSpline(times, values, bc_type="clamped")
        object.__setattr__(self, "_spline", spline)
        object.__setattr__(self, "t_ext", float(times[-1]))

    def _position(self, t):
        return self._spline(t)

    def _slope(self, t):
        return self._spline(t, 1)

    def _curvature(self, t):
        return self._spline(t, 2)


def trajectory_from_config(cfg: dict, horizon: float):
    """Build a trajectory from a config block; extension covers root brackets."""
    kind = cfg.get("kind")
    t_ext = float(cfg.get("t_ext", 2.0 * horizon + 2.0))
    if kind == "constant":
        return ConstantTrajectory(a0=float(cfg["a0"]))
    if kind == "affine":
        return AffineTrajectory(a0=float(cfg["a0"]), rate=float(cfg["rate"]), t_ext=t_ext)
    if kind == "sinusoidal":
        return SinusoidalTrajectory(
            a0=float(cfg["a0"]),
            amplitude=float(cfg["amplitude"]),
            omega=float(cfg["omega"]),
            phase=float(cfg.get("phase", 0.0)),
        )
    if kind == "spline":
        return SplineTrajectory(times=tuple(cfg["times"]), values=tuple(cfg["values"]))
    raise ValueError(f"unknown trajectory kind: {kind!r}")


# ---------------------------------------------------------------------------
# Medium specification
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MediumSpec:
    """Domain length b, speed contrast k, horizon T, and the trajectory.

    k = 1 is accepted here (useful for solver oracles) but rejected by the
    inversion pipeline, which needs a genuine contrast.
    """

    b: float
    k: float
    T: float
    trajectory: _TrajectoryBase

    def __post_init__(self):
        if self.b <= 0 or self.k <= 0 or self.T <= 0:
            raise ValueError("b, k, T must be positive")

    @property
    def slope_bound(self) -> float:
        return min(1.0, self.k)

    def interface(self, t):
        return self.trajectory.position(t)

    def interface_slope(self, t):
        return self.trajectory.slope(t)

    def interface_curvature(self, t):
        return self.trajectory.curvature(t)

    def clearance(self, samples: int = 2048) -> float:
        """min over time of min(a, b - a): distance of the interface to the walls."""
        t = _sample_grid(self, samples)
        a = np.asarray(self.interface(t))
        return float(min(a.min(), (self.b - a).min()))

    @property
    def half_gap(self) -> float:
        """Half the space distance from the interface curve to the walls."""
        return 0.5 * self.clearance()


def _sample_grid(spec: MediumSpec, samples: int) -> np.ndarray:
    t_hi = min(spec.trajectory.t_ext, 2.0 * spec.T + 2.0)
    if not np.isfinite(t_hi):
        t_hi = 2.0 * spec.T + 2.0
    return np.linspace(0.0, t_hi, samples)


@dataclass(frozen=True)
class SubsonicReport:
    max_slope: float
    bound: float
    margin: float
    passed: bool
    samples: int


def validate_subsonic(spec: MediumSpec, samples: int = 4096) -> SubsonicReport:
    """Check sup|a'(t)| < min(1, k) on a dense grid.

    Raises TrajectoryRangeError if the trajectory leaves (0, b); that is a
    geometry defect, reported separately from a subsonic failure.
    """
    if samples < 2:
        raise ValueError("samples must be >= 2")
    t = _sample_grid(spec, samples)
    a = np.asarray(spec.interface(t), float)
    if a.min() <= 0.0 or a.max() >= spec.b:
        raise TrajectoryRangeError(
            f"interface range [{a.min():.6g}, {a.max():.6g}] leaves (0, {spec.b})"
        )
    max_slope = float(np.max(np.abs(spec.interface_slope(t))))
    bound = spec.slope_bound
    return SubsonicReport(
        max_slope=max_slope,
        bound=bound,
        margin=bound - max_slope,
        passed=max_slope < bound,
        samples=samples,
    )


def require_subsonic(spec: MediumSpec) -> None:
    report = validate_subsonic(spec)
    if not report.passed:
        raise SubsonicError(
            f"sup|a'| = {report.max_slope:.6g} >= min(1, k) = {report.bound:.6g}"
        )


def wave_speed_squared(spec: MediumSpec, t, x):
    """Coefficient of the wave operator: 1 left of the interface, k^2 right.

    On the interface itself the right limit k^2 is returned; the coefficient
    is only defined a.e., but quadrature needs one fixed convention.
    """
    x = np.asarray(x, dtype=float)
    if np.any(x < 0.0) or np.any(x > spec.b):
        raise ValueError("position outside [0, b]")
    a = spec.interface(t)
    out = np.where(x < a, 1.0, spec.k**2)
    return out if out.ndim else float(out)


# ---------------------------------------------------------------------------
# Travel-time maps
# ---------------------------------------------------------------------------

def _bisect_newton(fun: Callable, dfun: Callable, y, lo, hi, tol: float, iters: int = 80):
    """Vectorized bracketed bisection with a Newton polish, for monotone fun."""
    y = np.atleast_1d(np.asarray(y, dtype=float))
    lo = np.full_like(y, lo, dtype=float)
    hi = np.full_like(y, hi, dtype=float)
    flo = fun(lo) - y
    fhi = fun(hi) - y
    if np.any(flo > 1e-12) or np.any(fhi < -1e-12):
        raise ValueError("inverse query outside the map's range")
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        fm = fun(mid) - y
        take_lo = fm > 0.0
        hi = np.where(take_lo, mid, hi)
        lo = np.where(take_lo, lo, mid)
        if np.max(hi - lo) < tol:
            break
    t = 0.5 * (lo + hi)
    for _ in range(3):
        d = dfun(t)
        step = np.where(d != 0.0, (fun(t) - y) / np.where(d == 0.0, 1.0, d), 0.0)
        t_new = t - step
        t = np.where((t_new >= lo - tol) & (t_new <= hi + tol), t_new, t)
    return t


@dataclass(frozen=True)
class TravelTimeMaps:
    """The three monotone travel-time maps and their numeric inverses."""

    spec: MediumSpec
    tol: float = 1e-10

    def emission(self, t):
        return np.asarray(t, float) - self.spec.interface(t)

    def echo(self, t):
        return np.asarray(t, float) + self.spec.interface(t)

    def transmitted(self, t):
        return np.asarray(t, float) - self.spec.interface(t) / self.spec.k

    def _bracket(self):
        ext = self.spec.trajectory.t_ext
        hi = min(ext, 2.0 * self.spec.T + 2.0) if np.isfinite(ext) else 2.0 * self.spec.T + 2.0
        return -self.spec.b - 1.0, hi + self.spec.b + 1.0

    def emission_inverse(self, s):
        lo, hi = self._bracket()
        out = _bisect_newton(
            self.emission, lambda t: 1.0 - self.spec.interface_slope(t), s, lo, hi, self.tol
        )
        return out if np.ndim(s) else float(out[0])

    def echo_inverse(self, m):
        lo, hi = self._bracket()
        out = _bisect_newton(
            self.echo, lambda t: 1.0 + self.spec.interface_slope(t), m, lo, hi, self.tol
        )
        return out if np.ndim(m) else float(out[0])

    def transmitted_inverse(self, v):
        lo, hi = self._bracket()
        out = _bisect_newton(
            self.transmitted,
            lambda t: 1.0 - self.spec.interface_slope(t) / self.spec.k,
            v,
            lo,
            hi,
            self.tol,
        )
        return out if np.ndim(v) else float(out[0])


def travel_time_maps(spec: MediumSpec, tol: float = 1e-10) -> TravelTimeMaps:
    require_subsonic(spec)
    return TravelTimeMaps(spec=spec, tol=tol)


@dataclass(frozen=True)
class FirstArrival:
    """First interface hit of a ray emitted at time s, and its return time."""

    emitted_at: float
    hit_time: float      # unique root t >= s of a(t) = t - s
    return_time: float   # 2 * hit_time - s, when the reflection reaches x = 0


def first_arrival(spec: MediumSpec, s: float) -> FirstArrival:
    """Solve a(t) = t - s for the unique t >= s (unique under the subsonic bound)."""
    if s < 0.0 or s > spec.T:
        raise ValueError("emission time outside [0, T]")
    lo = s
    hi = s + spec.b + 1.0
    # phi(t) = a(t) - (t - s): positive at t = s, strictly decreasing slope < 0
    phi = lambda t: np.asarray(spec.interface(t), float) - (np.asarray(t, float) - s)
    dphi = lambda t: np.asarray(spec.interface_slope(t), float) - 1.0
    if phi(hi) > 0.0:
        raise ValueError("first-arrival root not bracketed within extended domain")
    t_hit = float(_bisect_newton(lambda t: -phi(t), lambda t: -dphi(t), 0.0, lo, hi, 1e-12)[0])
    return FirstArrival(emitted_at=s, hit_time=t_hit, return_time=2.0 * t_hit - s)


def first_echo_time(spec: MediumSpec) -> float:
    """Earliest time a boundary-launched signal can return to x = 0."""
    return first_arrival(spec, 0.0).return_time


# ---------------------------------------------------------------------------
# Reflection / transmission coefficients
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ReflectionCoefficients:
    """Amplitude coefficients at the moving interface, plus map stretches.

    reflection  = (1 - k + (k - 1/k) a') / (1 + k + (k - 1/k) a')
    transmission = 2 / (1 + k + (k - 1/k) a')
    echo_stretch = d(echo)/d(emission) = (1 + a') / (1 - a')
    transmitted_stretch = d(transmitted)/d(emission) = (1 - a'/k) / (1 - a')

    They satisfy  reflection * echo_stretch - transmission * transmitted_stretch = -1
    and  reflection + k * transmission = 1  identically under the subsonic bound.
    """

    reflection: np.ndarray
    transmission: np.ndarray
    echo_stretch: np.ndarray
    transmitted_stretch: np.ndarray


def reflection_coefficients(spec: MediumSpec, t) -> ReflectionCoefficients:
    k = spec.k
    ad = np.asarray(spec.interface_slope(t), dtype=float)
    denom = 1.0 + k + (k - 1.0 / k) * ad
    alpha = (1.0 - k + (k - 1.0 / k) * ad) / denom
    beta = 2.0 / denom
    echo_stretch = (1.0 + ad) / (1.0 - ad)
    trans_stretch = (1.0 - ad / k) / (1.0 - ad)
    return ReflectionCoefficients(
        reflection=alpha if alpha.ndim else float(alpha),
        transmission=beta if beta.ndim else float(beta),
        echo_stretch=echo_stretch if echo_stretch.ndim else float(echo_stretch),
        transmitted_stretch=trans_stretch if trans_stretch.ndim else float(trans_stretch),
    )


def _coefficient_slopes(spec: MediumSpec, t):
    """d/dt of (reflection * echo_stretch) and (transmission * transmitted_stretch).

    Both products are algebraic in a'(t); the chain rule factors through a''.
    Used by the flux-jump coefficient of the geometric-optics field.
    """
    k = spec.k
    ad = np.asarray(spec.interface_slope(t), dtype=float)
    add = np.asarray(spec.interface_curvature(t), dtype=float)
    D = 1.0 + k + (k - 1.0 / k) * ad
    alpha = (1.0 - k + (k - 1.0 / k) * ad) / D
    beta = 2.0 / D
    m = (1.0 + ad) / (1.0 - ad)
    nn = (1.0 - ad / k) / (1.0 - ad)
    dalpha = 2.0 * (k**2 - 1.0) / D**2
    dbeta = -2.0 * (k - 1.0 / k) / D**2
    dm = 2.0 / (1.0 - ad) ** 2
    dn = (1.0 - 1.0 / k) / (1.0 - ad) ** 2
    d_am = (dalpha * m + alpha * dm) * add
    d_bn = (dbeta * nn + beta * dn) * add
    return d_am, d_bn
