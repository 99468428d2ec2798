"""Medium geometry: trajectories, maps, coefficients."""

import numpy as np
import pytest

from waveprobe.medium import (
    AffineTrajectory,
    ConstantTrajectory,
    MediumSpec,
    SinusoidalTrajectory,
    SplineTrajectory,
    TrajectoryRangeError,
    first_arrival,
    first_echo_time,
    reflection_coefficients,
    travel_time_maps,
    validate_subsonic,
    wave_speed_squared,
)


def const_spec(a0=0.5, k=2.0, b=1.0, T=2.0):
    return MediumSpec(b=b, k=k, T=T, trajectory=ConstantTrajectory(a0=a0))


class TestSubsonic:
    def test_constant_passes(self):
        rep = validate_subsonic(const_spec())
        assert rep.passed and rep.max_slope == 0.0

    def test_affine_too_fast_fails(self):
        spec = MediumSpec(b=2.0, k=0.5, T=1.0,
                          trajectory=AffineTrajectory(a0=0.5, rate=0.6, t_ext=1.5))
        rep = validate_subsonic(spec)
        assert not rep.passed
        assert rep.max_slope == pytest.approx(0.6)
        assert rep.bound == pytest.approx(0.5)

    def test_sinusoidal_grid_maximum(self):
        spec = MediumSpec(b=1.0, k=2.0, T=2.0,
                          trajectory=SinusoidalTrajectory(a0=0.4, amplitude=0.1, omega=3.0))
        rep = validate_subsonic(spec)
        assert rep.passed
        # grid maximum of |0.3 cos(3t)|
        assert rep.max_slope == pytest.approx(0.3, abs=1e-4)

    def test_range_violation_is_distinct_error(self):
        spec = MediumSpec(b=1.0, k=2.0, T=2.0,
                          trajectory=AffineTrajectory(a0=0.5, rate=0.9, t_ext=4.0))
        with pytest.raises(TrajectoryRangeError):
            validate_subsonic(spec)

    def test_sample_count_validated(self):
        with pytest.raises(ValueError):
            validate_subsonic(const_spec(), samples=1)


class TestWaveSpeed:
    def test_left_of_interface(self):
        assert wave_speed_squared(const_spec(), 0.0, 0.25) == 1.0

    def test_right_of_interface(self):
        assert wave_speed_squared(const_spec(), 0.0, 0.75) == 4.0

    def test_on_interface_right_limit_convention(self):
        spec = MediumSpec(b=1.0, k=3.0, T=2.0,
                          trajectory=AffineTrajectory(a0=0.4, rate=0.1, t_ext=4.0))
        assert wave_speed_squared(spec, 1.0, 0.5) == 9.0

    def test_out_of_domain(self):
        with pytest.raises(ValueError):
            wave_speed_squared(const_spec(), 0.0, 1.5)


class TestTravelTimeMaps:
    def test_constant_closed_forms(self):
        maps = travel_time_maps(const_spec())
        assert maps.emission(1.0) == pytest.approx(0.5)
        assert maps.echo(1.0) == pytest.approx(1.5)
        assert maps.transmitted(1.0) == pytest.approx(0.75)

    def test_echo_inverse_constant(self):
        maps = travel_time_maps(const_spec())
        assert maps.echo_inverse(1.5) == pytest.approx(1.0, abs=1e-10)

    def test_roundtrip_sinusoidal(self):
        spec = MediumSpec(b=1.0, k=2.0, T=2.0,
                          trajectory=SinusoidalTrajectory(a0=0.4, amplitude=0.1, omega=3.0))
        maps = travel_time_maps(spec)
        assert maps.echo_inverse(float(maps.echo(0.7))) == pytest.approx(0.7, abs=1e-9)
        assert maps.emission_inverse(float(maps.emission(0.7))) == pytest.approx(0.7, abs=1e-9)
        assert maps.transmitted_inverse(float(maps.transmitted(0.7))) == pytest.approx(0.7, abs=1e-9)

    def test_maps_strictly_increasing(self):
        spec = MediumSpec(b=1.0, k=0.5, T=2.0,
                          trajectory=SinusoidalTrajectory(a0=0.5, amplitude=0.08, omega=2.0))
        maps = travel_time_maps(spec)
        t = np.linspace(0.0, spec.T, 2048)
        for m in (maps.emission, maps.echo, maps.transmitted):
            assert np.all(np.diff(m(t)) > 0)

    def test_inverse_out_of_range(self):
        maps = travel_time_maps(const_spec())
        with pytest.raises(ValueError):
            maps.echo_inverse(1e9)


class TestFirstArrival:
    def test_constant_closed_form(self):
        spec = const_spec()
        for s in (0.0, 0.3, 0.8):
            fa = first_arrival(spec, s)
            assert fa.hit_time == pytest.approx(s + 0.5, abs=1e-10)
            assert fa.return_time == pytest.approx(s + 1.0, abs=1e-10)
        assert first_echo_time(spec) == pytest.approx(1.0, abs=1e-10)

    def test_affine_closed_form(self):
        spec = MediumSpec(b=1.0, k=2.0, T=2.0,
                          trajectory=AffineTrajectory(a0=0.4, rate=0.1, t_ext=4.0))
        fa = first_arrival(spec, 0.0)
        # 0.4 + 0.1 t = t  ->  t = 4/9
        assert fa.hit_time == pytest.approx(4.0 / 9.0, abs=1e-10)
        assert first_echo_time(spec) == pytest.approx(8.0 / 9.0, abs=1e-10)

    def test_sinusoidal_residual(self):
        spec = MediumSpec(b=1.0, k=2.0, T=2.0,
                          trajectory=SinusoidalTrajectory(a0=0.4, amplitude=0.1, omega=3.0))
        fa = first_arrival(spec, 0.2)
        residual = spec.interface(fa.hit_time) - (fa.hit_time - 0.2)
        assert abs(residual) < 1e-9

    def test_hit_and_return_increasing(self):
        spec = MediumSpec(b=1.0, k=2.0, T=2.0,
                          trajectory=SinusoidalTrajectory(a0=0.4, amplitude=0.1, omega=3.0))
        ss = np.linspace(0.0, 1.0, 9)
        hits = [first_arrival(spec, s).hit_time for s in ss]
        rets = [first_arrival(spec, s).return_time for s in ss]
        assert np.all(np.diff(hits) > 0)
        assert np.all(np.diff(rets) > 0)

    def test_hit_consistency_with_maps(self):
        # echo(hit_time) = return_time and emission(hit_time) = s
        spec = MediumSpec(b=1.0, k=2.0, T=2.0,
                          trajectory=SinusoidalTrajectory(a0=0.4, amplitude=0.1, omega=3.0))
        maps = travel_time_maps(spec)
        for s in (0.0, 0.25, 0.6):
            fa = first_arrival(spec, s)
            assert maps.echo(fa.hit_time) == pytest.approx(fa.return_time, abs=1e-9)
            assert maps.emission(fa.hit_time) == pytest.approx(s, abs=1e-9)


class TestReflectionCoefficients:
    def test_static_values(self):
        co = reflection_coefficients(const_spec(), 0.0)
        assert co.reflection == pytest.approx(-1.0 / 3.0)
        assert co.transmission == pytest.approx(2.0 / 3.0)

    def test_reflection_vanishes_at_critical_slope(self):
        # ad = k/(1+k) kills the reflection coefficient
        k = 2.0
        spec = MediumSpec(b=4.0, k=k, T=1.0,
                          trajectory=AffineTrajectory(a0=1.0, rate=k / (1 + k), t_ext=3.0))
        co = reflection_coefficients(spec, 0.5)
        assert abs(co.reflection) < 1e-14

    def test_stretch_identity_pointwise(self):
        spec = MediumSpec(b=4.0, k=2.0, T=1.0,
                          trajectory=AffineTrajectory(a0=1.0, rate=0.25, t_ext=3.0))
        co = reflection_coefficients(spec, 0.5)
        lhs = co.reflection * co.echo_stretch - co.transmission * co.transmitted_stretch
        assert lhs == pytest.approx(-1.0, abs=1e-12)

    def test_identities_over_trajectory_family(self):
        rng = np.random.default_rng(7)
        for k in (0.5, 2.0, 3.0):
            for traj in (
                ConstantTrajectory(a0=0.5),
                AffineTrajectory(a0=0.55, rate=-0.06, t_ext=6.0),
                SinusoidalTrajectory(a0=0.4, amplitude=0.1, omega=3.0),
            ):
                spec = MediumSpec(b=1.0, k=k, T=2.0, trajectory=traj)
                t = rng.uniform(0.0, 2.0, 64)
                co = reflection_coefficients(spec, t)
                p0 = co.reflection * co.echo_stretch - co.transmission * co.transmitted_stretch
                p1 = co.reflection + k * co.transmission
                assert np.max(np.abs(p0 + 1.0)) < 1e-12
                assert np.max(np.abs(p1 - 1.0)) < 1e-12


class TestSplineTrajectory:
    def test_matches_samples_and_validates(self):
        times = np.linspace(0.0, 3.0, 25)
        values = 0.45 + 0.05 * np.cos(1.3 * times)
        traj = SplineTrajectory(times=tuple(times), values=tuple(values))
        spec = MediumSpec(b=1.0, k=2.0, T=1.2, trajectory=traj)
        rep = validate_subsonic(spec)
        assert rep.passed
        assert traj.position(1.0) == pytest.approx(0.45 + 0.05 * np.cos(1.3), abs=1e-4)

    def test_needs_enough_samples(self):
        with pytest.raises(ValueError):
            SplineTrajectory(times=(0.0, 1.0), values=(0.4, 0.5))


def test_clamped_extension_keeps_subsonic_bound():
    traj = AffineTrajectory(a0=0.55, rate=-0.06, t_ext=3.0)
    assert traj.position(10.0) == pytest.approx(traj.position(3.0))
    assert traj.slope(10.0) == 0.0
    assert traj.slope(-1.0) == 0.0
