"""Leading-order geometric-optics field for the moving-interface problem.

For boundary input f the field is assembled from the incident ray f(t - x),
one reflected component and one transmitted component,

    left of the interface:   f(t-x) + e(t+x) - e(t-x) * cutoff(x)
    right of the interface:  cutoff(x - b + 2 eps) * w(t - x/k)

where e (echo component) and w (transmitted component) are the probe warped
through the travel-time maps and scaled by the interface coefficients:

    e(echo(t)) = reflection(t) * echo_stretch(t) * f(emission(t))
    w(transmitted(t)) = transmission(t) * transmitted_stretch(t) * f(emission(t))

The field is continuous across the interface; its flux carries a jump
proportional to f(emission(t)), and applying the wave operator leaves a
residual supported in the two cutoff transition bands plus that interface
jump.  The boundary observable of the field is

    trace(echo(t)) = 2 * reflection(t) * f'(emission(t)).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from waveprobe.medium import (
    MediumSpec,
    TravelTimeMaps,
    _coefficient_slopes,
    reflection_coefficients,
    travel_time_maps,
)
from waveprobe.probe import ProbeSignal
from waveprobe.signals import centered_derivative, interp_causal, midpoint_times


# ---------------------------------------------------------------------------
# Plateau cutoff: 1 below eps/2, 0 above eps, quintic C^2 smoothstep between
# ---------------------------------------------------------------------------

def plateau_cutoff(r, eps: float):
    s = np.clip((np.asarray(r, float) - 0.5 * eps) / (0.5 * eps), 0.0, 1.0)
    return 1.0 - (10.0 * s**3 - 15.0 * s**4 + 6.0 * s**5)


def plateau_cutoff_d1(r, eps: float):
    r = np.asarray(r, float)
    s = (r - 0.5 * eps) / (0.5 * eps)
    inside = (s > 0.0) & (s < 1.0)
    s = np.clip(s, 0.0, 1.0)
    val = -(30.0 * s**2 - 60.0 * s**3 + 30.0 * s**4) / (0.5 * eps)
    return np.where(inside, val, 0.0)


def plateau_cutoff_d2(r, eps: float):
    r = np.asarray(r, float)
    s = (r - 0.5 * eps) / (0.5 * eps)
    inside = (s > 0.0) & (s < 1.0)
    s = np.clip(s, 0.0, 1.0)
    val = -(60.0 * s - 180.0 * s**2 + 120.0 * s**3) / (0.5 * eps) ** 2
    return np.where(inside, val, 0.0)


# ---------------------------------------------------------------------------
# Ansatz field
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TraceSignal:
    """Boundary observable of the ansatz on the (0, T) midpoint grid."""

    values: np.ndarray
    dt: float

    @property
    def times(self) -> np.ndarray:
        return midpoint_times(len(self.values), self.dt)


@dataclass(frozen=True)
class AnsatzField:
    medium: MediumSpec
    probe: ProbeSignal
    epsilon: float
    maps: TravelTimeMaps
    echo_values: np.ndarray          # echo component sampled on the (0,T) grid
    transmitted_values: np.ndarray   # transmitted component on the (0,T) grid
    echo_rate: np.ndarray            # its derivative along the echo axis
    transmitted_rate: np.ndarray     # derivative along the transmitted axis

    @property
    def dt(self) -> float:
        return self.probe.dt


def default_epsilon(spec: MediumSpec) -> float:
    """0.4 of the interface-to-wall clearance: safely inside the admissible band."""
    return 0.4 * spec.clearance()


def _component_on_grid(spec: MediumSpec, probe: ProbeSignal, maps: TravelTimeMaps,
                       which: str):
    """Component values and their axis derivative, by the analytic chain rule.

    Differencing the warped arrays would amplify interpolation error by one
    grid scale, so the derivative is assembled from the probe's own difference
    quotient composed with the exact map rates instead.
    """
    n = len(probe.values)
    grid = midpoint_times(n, probe.dt)
    if which == "echo":
        t = maps.echo_inverse(grid)
    else:
        t = maps.transmitted_inverse(grid)
    xi = maps.emission(t)
    slope = np.asarray(spec.interface_slope(t), float)
    coeffs = reflection_coefficients(spec, t)
    f_at = interp_causal(probe.values, probe.dt, xi)
    fp_at = interp_causal(centered_derivative(probe.values, probe.dt), probe.dt, xi)
    d_am, d_bn = _coefficient_slopes(spec, t)
    if which == "echo":
        amp = coeffs.reflection * coeffs.echo_stretch
        vals = amp * f_at
        rate = (d_am * f_at + amp * fp_at * (1.0 - slope)) / (1.0 + slope)
    else:
        amp = coeffs.transmission * coeffs.transmitted_stretch
        vals = amp * f_at
        rate = (d_bn * f_at + amp * fp_at * (1.0 - slope)) / (1.0 - slope / spec.k)
    return vals, rate


def build_ansatz(spec: MediumSpec, probe: ProbeSignal,
                 epsilon: Optional[float] = None) -> AnsatzField:
    maps = travel_time_maps(spec)
    eps = default_epsilon(spec) if epsilon is None else float(epsilon)
    if not 0.0 < eps <= 0.5 * spec.clearance():
        raise ValueError("cutoff width must lie in (0, clearance/2]")
    echo_vals, echo_rate = _component_on_grid(spec, probe, maps, "echo")
    trans_vals, trans_rate = _component_on_grid(spec, probe, maps, "transmitted")
    return AnsatzField(
        medium=spec, probe=probe, epsilon=eps, maps=maps,
        echo_values=echo_vals, transmitted_values=trans_vals,
        echo_rate=echo_rate, transmitted_rate=trans_rate,
    )


def echo_component(spec: MediumSpec, probe: ProbeSignal) -> np.ndarray:
    """Reflected component sampled against its own (echo-time) axis."""
    maps = travel_time_maps(spec)
    return _component_on_grid(spec, probe, maps, "echo")


def transmitted_component(spec: MediumSpec, probe: ProbeSignal) -> np.ndarray:
    """Transmitted component sampled against its own (transmitted-time) axis."""
    maps = travel_time_maps(spec)
    return _component_on_grid(spec, probe, maps, "transmitted")


def eval_field(field: AnsatzField, t: float, x) -> np.ndarray:
    """Field value at time t and positions x (vectorized over x).

    On the interface itself the right branch is used, consistent with the
    right-limit convention of the wave-speed coefficient; the field is
    continuous there, so the convention only fixes which formula evaluates.
    """
    spec = field.medium
    x = np.atleast_1d(np.asarray(x, float))
    if t < 0.0 or t > spec.T or np.any(x < 0.0) or np.any(x > spec.b):
        raise ValueError("evaluation point outside [0, T] x [0, b]")
    a = spec.interface(t)
    probe = field.probe
    dt = probe.dt
    out = np.empty_like(x)

    left = x < a
    if np.any(left):
        xl = x[left]
        f_in = interp_causal(probe.values, dt, t - xl)
        e_plus = interp_causal(field.echo_values, dt, t + xl)
        e_minus = interp_causal(field.echo_values, dt, t - xl)
        out[left] = f_in + e_plus - e_minus * plateau_cutoff(xl, field.epsilon)
    right = ~left
    if np.any(right):
        xr = x[right]
        w = interp_causal(field.transmitted_values, dt, t - xr / spec.k)
        out[right] = plateau_cutoff(xr - spec.b + 2.0 * field.epsilon, field.epsilon) * w
    return out


def field_slope(field: AnsatzField, t: float, x) -> np.ndarray:
    """Space derivative of the field (vectorized over x; interface excluded).

    Composes the sampled components' difference-quotient derivatives with the
    ray arguments, so it is exact up to grid scale; used for flux-jump and
    weak-form verification.
    """
    spec = field.medium
    x = np.atleast_1d(np.asarray(x, float))
    a = spec.interface(t)
    probe = field.probe
    dt = probe.dt
    fprime = centered_derivative(probe.values, dt)
    e_prime = centered_derivative(field.echo_values, dt)
    w_prime = centered_derivative(field.transmitted_values, dt)
    eps = field.epsilon
    out = np.empty_like(x)

    left = x < a
    if np.any(left):
        xl = x[left]
        e_m = interp_causal(field.echo_values, dt, t - xl)
        out[left] = (
            -interp_causal(fprime, dt, t - xl)
            + interp_causal(e_prime, dt, t + xl)
            + interp_causal(e_prime, dt, t - xl) * plateau_cutoff(xl, eps)
            - e_m * plateau_cutoff_d1(xl, eps)
        )
    right = ~left
    if np.any(right):
        xr = x[right]
        shifted = xr - spec.b + 2.0 * eps
        w_val = interp_causal(field.transmitted_values, dt, t - xr / spec.k)
        out[right] = (
            plateau_cutoff_d1(shifted, eps) * w_val
            - plateau_cutoff(shifted, eps)
            * interp_causal(w_prime, dt, t - xr / spec.k) / spec.k
        )
    return out


def boundary_trace(field: AnsatzField) -> TraceSignal:
    """trace(m) = 2 * reflection(t) * f'(emission(t)) on the echo-time grid.

    f' is the grid-scale difference quotient of the probe: for singular probes
    the derivative exists only distributionally, and downstream consumers use
    the trace through its local regularity, which the difference-quotient
    signal represents faithfully down to one grid step.  The trace vanishes
    before the first echo time because emission < 0 there.
    """
    spec = field.medium
    probe = field.probe
    grid = midpoint_times(len(probe.values), probe.dt)
    t = field.maps.echo_inverse(grid)
    xi = field.maps.emission(t)
    alpha = reflection_coefficients(spec, t).reflection
    fprime = centered_derivative(probe.values, probe.dt)
    vals = 2.0 * alpha * interp_causal(fprime, probe.dt, xi)
    return TraceSignal(values=vals, dt=probe.dt)


def flux_jump_coefficient(spec: MediumSpec, t, method: str = "analytic",
                          step: float = 1e-5):
    """Coefficient tau(t) of the interface flux jump of the ansatz.

    The flux gamma * d_x(field) jumps across the interface by
    tau(t) * f(emission(t)) with

        tau = -k * d(transmission * transmitted_stretch)/d(transmitted)
              - d(reflection * echo_stretch)/d(echo).

    "analytic" differentiates the coefficient products through the chain rule
    (exact for closed-form trajectories); "numeric" uses centered differences
    in the respective map variables.
    """
    k = spec.k
    if method == "analytic":
        d_am, d_bn = _coefficient_slopes(spec, t)
        ad = np.asarray(spec.interface_slope(t), float)
        mu_rate = 1.0 + ad
        nu_rate = 1.0 - ad / k
        out = -k * d_bn / nu_rate - d_am / mu_rate
        return out if np.ndim(out) else float(out)
    if method == "numeric":
        t = np.asarray(t, float)

        def am(tv):
            c = reflection_coefficients(spec, tv)
            return np.asarray(c.reflection) * np.asarray(c.echo_stretch)

        def bn(tv):
            c = reflection_coefficients(spec, tv)
            return np.asarray(c.transmission) * np.asarray(c.transmitted_stretch)

        maps = TravelTimeMaps(spec)
        d_am = (am(t + step) - am(t - step)) / (maps.echo(t + step) - maps.echo(t - step))
        d_bn = (bn(t + step) - bn(t - step)) / (
            maps.transmitted(t + step) - maps.transmitted(t - step)
        )
        out = -k * d_bn - d_am
        return out if np.ndim(out) else float(out)
    raise ValueError(f"unknown method: {method!r}")


def interface_line_source(spec: MediumSpec, t, f_value, fprime_value):
    """Coefficient of the interface line source of the wave operator.

    Applying the wave operator to the field leaves, besides the cutoff
    residual, a line source on the interface.  For a static interface it is
    exactly the flux jump tau(t) f(emission); a moving interface adds the
    transport of the slope jump (the time derivative of the field jumps by
    -a' times the space-derivative jump across a moving contact):

        line(t) = tau f - a'^2 ( (1-reflection)(1-1/k^2) f' + kappa f ),
        kappa   = -(1/k) d(transmission * transmitted_stretch)/d(transmitted)
                  - d(reflection * echo_stretch)/d(echo).

    The quadratic-in-slope correction vanishes for static interfaces, which
    is the regime where the flux jump alone is the whole source.
    """
    k = spec.k
    ad = np.asarray(spec.interface_slope(t), float)
    co = reflection_coefficients(spec, t)
    d_am, d_bn = _coefficient_slopes(spec, t)
    mu_rate = 1.0 + ad
    nu_rate = 1.0 - ad / k
    tau = -k * d_bn / nu_rate - d_am / mu_rate
    kappa = -(1.0 / k) * d_bn / nu_rate - d_am / mu_rate
    slope_jump = ((1.0 - np.asarray(co.reflection)) * (1.0 - 1.0 / k**2)
                  * np.asarray(fprime_value)
                  + kappa * np.asarray(f_value))
    out = tau * np.asarray(f_value) - ad**2 * slope_jump
    return out if np.ndim(out) else float(out)


def cutoff_residual(field: AnsatzField, t: float, x) -> np.ndarray:
    """Smooth residual left by the wave operator, away from the interface jump.

    Applying the wave operator to the field kills the ray terms and leaves
    products of cutoff derivatives with the components:

        left:   cutoff''(x) e(t-x) - 2 cutoff'(x) e'(t-x)
        right:  -k^2 cutoff''(x-b+2eps) w(t-x/k) + 2 k cutoff'(x-b+2eps) w'(t-x/k)

    supported in the transition bands [eps/2, eps] and [b-3eps/2, b-eps].
    """
    spec = field.medium
    eps = field.epsilon
    x = np.atleast_1d(np.asarray(x, float))
    a = spec.interface(t)
    dt = field.probe.dt
    e_prime = centered_derivative(field.echo_values, dt)
    w_prime = centered_derivative(field.transmitted_values, dt)
    out = np.zeros_like(x)

    left = x < a
    if np.any(left):
        xl = x[left]
        out[left] = (
            plateau_cutoff_d2(xl, eps) * interp_causal(field.echo_values, dt, t - xl)
            - 2.0 * plateau_cutoff_d1(xl, eps) * interp_causal(e_prime, dt, t - xl)
        )
    right = ~left
    if np.any(right):
        xr = x[right]
        shifted = xr - spec.b + 2.0 * eps
        k = spec.k
        out[right] = (
            -(k**2) * plateau_cutoff_d2(shifted, eps)
            * interp_causal(field.transmitted_values, dt, t - xr / k)
            + 2.0 * k * plateau_cutoff_d1(shifted, eps)
            * interp_causal(w_prime, dt, t - xr / k)
        )
    return out
