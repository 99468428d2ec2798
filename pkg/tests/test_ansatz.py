"""Geometric-optics field: components, continuity, trace, flux jump, residual."""

import numpy as np
import pytest

from waveprobe.ansatz import (
    boundary_trace,
    build_ansatz,
    cutoff_residual,
    echo_component,
    eval_field,
    field_slope,
    flux_jump_coefficient,
    plateau_cutoff,
    plateau_cutoff_d1,
    plateau_cutoff_d2,
    transmitted_component,
)
from waveprobe.medium import (
    AffineTrajectory,
    ConstantTrajectory,
    MediumSpec,
    SinusoidalTrajectory,
    first_echo_time,
    reflection_coefficients,
    travel_time_maps,
    wave_speed_squared,
)
from waveprobe.probe import ProbeSignal, smooth_pulse_probe
from waveprobe.signals import centered_derivative, interp_causal, midpoint_times


def const_spec(a0=0.5, k=2.0, b=1.0, T=2.0):
    return MediumSpec(b=b, k=k, T=T, trajectory=ConstantTrajectory(a0=a0))


def sin_spec(a0=0.45, amp=0.06, omega=2.0, phase=0.5, k=2.0, T=2.0):
    return MediumSpec(b=1.0, k=k, T=T,
                      trajectory=SinusoidalTrajectory(a0=a0, amplitude=amp,
                                                      omega=omega, phase=phase))


def pulse(T=2.0, n=2**13, center=0.4, width=0.08):
    return smooth_pulse_probe(T=T, dt=T / n, center=center, width=width)


def zero_probe(T=2.0, n=2**12):
    return ProbeSignal(values=np.zeros(n), dt=T / n, T=T, r0=None, origin="external")


class TestCutoff:
    def test_plateau_values(self):
        eps = 0.2
        assert plateau_cutoff(0.05, eps) == 1.0
        assert plateau_cutoff(0.3, eps) == 0.0
        r = np.linspace(0.0, 0.3, 200)
        vals = plateau_cutoff(r, eps)
        assert np.all(np.diff(vals) <= 1e-15)

    def test_derivatives_match_finite_differences(self):
        eps = 0.2
        r = np.linspace(0.0, 0.25, 77)
        h = 1e-6
        d1 = (plateau_cutoff(r + h, eps) - plateau_cutoff(r - h, eps)) / (2 * h)
        assert np.max(np.abs(d1 - plateau_cutoff_d1(r, eps))) < 1e-6
        d2 = (plateau_cutoff_d1(r + h, eps) - plateau_cutoff_d1(r - h, eps)) / (2 * h)
        assert np.max(np.abs(d2 - plateau_cutoff_d2(r, eps))) < 1e-4


class TestComponents:
    def test_zero_probe_gives_zero_components(self):
        spec = const_spec()
        p = zero_probe()
        assert np.all(echo_component(spec, p) == 0.0)
        assert np.all(transmitted_component(spec, p) == 0.0)

    def test_constant_medium_closed_form_echo(self):
        # a = 1/2, k = 2: echo component e(m) = -(1/3) f(m - 1)
        spec = const_spec()
        p = pulse()
        vals = echo_component(spec, p)
        grid = midpoint_times(len(p.values), p.dt)
        ref = -(1.0 / 3.0) * interp_causal(p.values, p.dt, grid - 1.0)
        assert np.max(np.abs(vals - ref)) < 1e-12

    def test_constant_medium_closed_form_transmitted(self):
        # transmitted(t) = t - 1/4, emission(t) = t - 1/2: w(v) = (2/3) f(v - 1/4)
        spec = const_spec()
        p = pulse()
        vals = transmitted_component(spec, p)
        grid = midpoint_times(len(p.values), p.dt)
        ref = (2.0 / 3.0) * interp_causal(p.values, p.dt, grid - 0.25)
        assert np.max(np.abs(vals - ref)) < 1e-12

    def test_sinusoidal_spot_checks_against_scalar_chain(self):
        spec = sin_spec()
        p = pulse()
        maps = travel_time_maps(spec)
        vals = echo_component(spec, p)
        grid = midpoint_times(len(p.values), p.dt)
        for idx in (2000, 3500, 5000, 6500, 7900):
            m = grid[idx]
            t = maps.echo_inverse(float(m))
            co = reflection_coefficients(spec, t)
            expected = co.reflection * co.echo_stretch * interp_causal(
                p.values, p.dt, maps.emission(t))
            assert vals[idx] == pytest.approx(float(expected), abs=1e-12)


class TestFieldEvaluation:
    def test_vanishes_near_right_wall(self):
        spec = const_spec()
        field = build_ansatz(spec, pulse())
        xs = np.linspace(spec.b - 0.4 * field.epsilon, spec.b, 9)
        assert np.max(np.abs(eval_field(field, 1.5, xs))) == 0.0

    def test_incident_only_before_first_arrival(self):
        spec = const_spec()
        p = pulse()
        field = build_ansatz(spec, p)
        t = 0.45  # before first echo at 1.0
        xs = np.linspace(field.epsilon + 0.01, spec.interface(t) - 0.02, 7)
        vals = eval_field(field, t, xs)
        ref = interp_causal(p.values, p.dt, t - xs)
        assert np.max(np.abs(vals - ref)) < 1e-14

    def test_continuity_across_interface(self):
        for spec in (const_spec(), sin_spec()):
            field = build_ansatz(spec, pulse(n=2**16, width=0.1))
            for t in np.linspace(0.05, 1.95, 20):
                a = spec.interface(t)
                lo = eval_field(field, t, [a - 1e-9])[0]
                hi = eval_field(field, t, [a + 1e-9])[0]
                assert abs(hi - lo) < 1e-10

    def test_out_of_domain_rejected(self):
        field = build_ansatz(const_spec(), pulse())
        with pytest.raises(ValueError):
            eval_field(field, 0.5, [1.5])
        with pytest.raises(ValueError):
            eval_field(field, 2.5, [0.5])

    def test_slope_matches_finite_differences(self):
        spec = sin_spec()
        field = build_ansatz(spec, pulse())
        t = 1.3
        a = spec.interface(t)
        xs = np.array([0.3 * a, 0.7 * a, a + 0.3 * (spec.b - a)])
        h = 2e-6
        fd = (eval_field(field, t, xs + h) - eval_field(field, t, xs - h)) / (2 * h)
        sl = field_slope(field, t, xs)
        assert np.max(np.abs(fd - sl)) < 1e-3 * max(1.0, np.max(np.abs(sl)))


class TestBoundaryTrace:
    def test_zero_probe_zero_trace(self):
        trace = boundary_trace(build_ansatz(const_spec(), zero_probe()))
        assert np.all(trace.values == 0.0)

    def test_constant_medium_closed_form(self):
        spec = const_spec()
        p = pulse()
        trace = boundary_trace(build_ansatz(spec, p))
        fp = centered_derivative(p.values, p.dt)
        grid = midpoint_times(len(p.values), p.dt)
        ref = -(2.0 / 3.0) * interp_causal(fp, p.dt, grid - 1.0)
        assert np.max(np.abs(trace.values - ref)) == 0.0

    def test_supported_after_first_echo(self):
        spec = sin_spec()
        p = pulse()
        trace = boundary_trace(build_ansatz(spec, p))
        mu0 = first_echo_time(spec)
        grid = trace.times
        before = grid < mu0 - 2.0 * trace.dt
        assert np.max(np.abs(trace.values[before])) == 0.0


class TestFluxJump:
    def test_static_and_affine_give_zero(self):
        assert flux_jump_coefficient(const_spec(), 1.0) == pytest.approx(0.0, abs=1e-15)
        spec = MediumSpec(b=1.0, k=2.0, T=2.0,
                          trajectory=AffineTrajectory(a0=0.55, rate=-0.06, t_ext=6.0))
        assert flux_jump_coefficient(spec, 1.0) == pytest.approx(0.0, abs=1e-12)

    def test_analytic_vs_numeric(self):
        spec = sin_spec(amp=0.1, omega=3.0)
        ts = np.linspace(0.1, 1.9, 13)
        tau_a = flux_jump_coefficient(spec, ts, method="analytic")
        tau_n = flux_jump_coefficient(spec, ts, method="numeric")
        assert np.max(np.abs(tau_a - tau_n)) < 1e-6

    def test_flux_jump_identity(self):
        # gamma d_x(field) jumps by tau(t) f(emission(t)) across the interface
        spec = sin_spec(a0=0.45, amp=0.1, omega=3.0, phase=0.2)
        p = smooth_pulse_probe(T=2.0, dt=2.0 / 2**17, center=0.3, width=0.1)
        field = build_ansatz(spec, p)
        maps = field.maps
        t_center = maps.emission_inverse(0.3)
        for t in np.linspace(t_center - 0.08, t_center + 0.08, 7):
            a = spec.interface(t)
            left = field_slope(field, t, [a - 1e-9])[0]
            right = field_slope(field, t, [a + 1e-9])[0]
            jump = spec.k**2 * right - left
            model = flux_jump_coefficient(spec, t) * interp_causal(
                p.values, p.dt, maps.emission(t))
            assert jump == pytest.approx(float(model), rel=1e-4)

    def test_slope_jump_transport_coefficient(self):
        # the line source of the wave operator carries, besides the flux jump,
        # the transported slope jump scaled by the squared interface speed
        from waveprobe.ansatz import interface_line_source
        spec = sin_spec(a0=0.45, amp=0.1, omega=3.0, phase=0.2)
        p = smooth_pulse_probe(T=2.0, dt=2.0 / 2**17, center=0.3, width=0.1)
        field = build_ansatz(spec, p)
        maps = field.maps
        fp = centered_derivative(p.values, p.dt)
        t_center = maps.emission_inverse(0.3)
        for t in np.linspace(t_center - 0.06, t_center + 0.06, 5):
            a = spec.interface(t)
            ad = float(spec.interface_slope(t))
            left = field_slope(field, t, [a - 1e-9])[0]
            right = field_slope(field, t, [a + 1e-9])[0]
            measured = (spec.k**2 * right - left) - ad**2 * (right - left)
            xi = maps.emission(t)
            model = interface_line_source(
                spec, t,
                float(interp_causal(p.values, p.dt, xi)),
                float(interp_causal(fp, p.dt, xi)),
            )
            assert measured == pytest.approx(float(model), rel=1e-3)


def _bump(u):
    """C^2 bump on (-1, 1)."""
    u = np.asarray(u, float)
    out = np.where(np.abs(u) < 1.0, (1.0 - np.clip(u, -1, 1) ** 2) ** 3, 0.0)
    return out


def _bump_dd(u):
    u = np.asarray(u, float)
    c = np.clip(u, -1, 1)
    val = -6.0 * (1.0 - c**2) ** 2 + 24.0 * c**2 * (1.0 - c**2)
    return np.where(np.abs(u) < 1.0, val, 0.0)


def _bump_d(u):
    u = np.asarray(u, float)
    c = np.clip(u, -1, 1)
    return np.where(np.abs(u) < 1.0, -6.0 * c * (1.0 - c**2) ** 2, 0.0)


def _simpson_nodes(a, b, n):
    x = np.linspace(a, b, n)
    w = np.ones(n)
    w[1:-1:2] = 4.0
    w[2:-1:2] = 2.0
    return x, w * (x[1] - x[0]) / 3.0


class TestCutoffResidual:
    def test_zero_probe_zero_residual(self):
        field = build_ansatz(const_spec(), zero_probe())
        xs = np.linspace(0.01, 0.99, 41)
        assert np.all(cutoff_residual(field, 1.2, xs) == 0.0)

    def test_vanishes_between_cutoff_bands(self):
        spec = sin_spec()
        field = build_ansatz(spec, pulse())
        eps = field.epsilon
        for t in (0.6, 1.1, 1.7):
            xs = np.linspace(eps + 1e-6, spec.b - 1.5 * eps - 1e-6, 31)
            assert np.max(np.abs(cutoff_residual(field, t, xs))) == 0.0
        # and also outside the outer edges of the bands
        for t in (0.6, 1.7):
            xs = np.linspace(0.0, 0.5 * eps - 1e-6, 9)
            assert np.max(np.abs(cutoff_residual(field, t, xs))) == 0.0
            xs = np.linspace(spec.b - eps + 1e-6, spec.b, 9)
            assert np.max(np.abs(cutoff_residual(field, t, xs))) == 0.0

    def test_weak_form_of_wave_operator(self):
        """<field, phi_tt> + <gamma slope, phi_x> = <residual, phi> - int line phi(., a(.)).

        The wave operator applied to the field equals the cutoff residual plus
        an interface line source (flux jump plus the moving-contact transport
        of the slope jump); verified against 10 smooth test functions by
        quadrature, relative to the largest pairing magnitude.
        """
        from waveprobe.ansatz import interface_line_source

        spec = sin_spec(a0=0.45, amp=0.06, omega=2.0, phase=0.5)
        p = smooth_pulse_probe(T=2.0, dt=2.0 / 2**14, center=0.35, width=0.07)
        field = build_ansatz(spec, p)
        maps = field.maps
        k = spec.k
        fp_probe = centered_derivative(p.values, p.dt)

        cases = []
        for tc in (0.9, 1.2, 1.5):
            for xc, xw in ((0.25, 0.22), (0.5, 0.35), (0.8, 0.18)):
                cases.append((tc, 0.35, xc, xw))
        cases.append((1.35, 0.5, 0.45, 0.42))
        assert len(cases) == 10

        pairs = []
        for tc, tw, xc, xw in cases:
            tx, twts = _simpson_nodes(tc - tw, tc + tw, 121)
            lhs = 0.0
            rhs = 0.0
            for t, wt in zip(tx, twts):
                a = float(spec.interface(t))
                delta = 1e-7
                xs1, w1 = _simpson_nodes(1e-9, a - delta, 241)
                xs2, w2 = _simpson_nodes(a + delta, spec.b - 1e-9, 241)
                xs = np.concatenate([xs1, xs2])
                ws = np.concatenate([w1, w2])
                phi = _bump((t - tc) / tw) * _bump((xs - xc) / xw)
                phi_tt = _bump_dd((t - tc) / tw) / tw**2 * _bump((xs - xc) / xw)
                phi_x = _bump((t - tc) / tw) * _bump_d((xs - xc) / xw) / xw
                u = eval_field(field, t, xs)
                slope = field_slope(field, t, xs)
                gamma = np.where(xs < a, 1.0, k**2)
                lhs += wt * float(np.sum(ws * (u * phi_tt + gamma * slope * phi_x)))
                rhs += wt * float(np.sum(ws * cutoff_residual(field, t, xs) * phi))
                xi = maps.emission(t)
                line = interface_line_source(
                    spec, t,
                    float(interp_causal(p.values, p.dt, xi)),
                    float(interp_causal(fp_probe, p.dt, xi)),
                )
                rhs -= wt * line * float(_bump((t - tc) / tw) * _bump((a - xc) / xw))
            pairs.append((lhs, rhs))
        ref = max(max(abs(l), abs(r)) for l, r in pairs)
        for lhs, rhs in pairs:
            scale = max(abs(lhs), abs(rhs), 1e-3 * ref)
            assert abs(lhs - rhs) / scale < 1e-3


def test_epsilon_validation():
    spec = const_spec()
    with pytest.raises(ValueError):
        build_ansatz(spec, pulse(), epsilon=0.4)  # > clearance/2 = 0.25


def test_gamma_consistency_with_field_branches():
    spec = const_spec()
    assert wave_speed_squared(spec, 0.2, spec.interface(0.2)) == spec.k**2
