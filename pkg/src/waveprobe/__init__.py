"""Numerical laboratory for 1D wave propagation through a moving interface.

The medium occupies (0, b) and carries a piecewise-constant wave speed: 1 on
the near side of a moving internal interface x = a(t), and k on the far side.
A signal injected at x = 0 partially reflects off the interface; the package

* simulates the forward problem with a spectral Galerkin solver,
* synthesizes singular probing signals whose local Sobolev smoothness decays
  linearly in time, so that every reflection time-stamps itself by roughness,
* measures local fractional regularity of sampled signals, and
* reconstructs the interface trajectory a(t) and the speed contrast k from a
  single boundary observation.
"""

from waveprobe.medium import (
    AffineTrajectory,
    ConstantTrajectory,
    FirstArrival,
    MediumSpec,
    ReflectionCoefficients,
    SinusoidalTrajectory,
    SplineTrajectory,
    SubsonicReport,
    TrajectoryRangeError,
    TravelTimeMaps,
    first_arrival,
    reflection_coefficients,
    travel_time_maps,
    validate_subsonic,
    wave_speed_squared,
)
from waveprobe.probe import (
    CuspLadder,
    ProbeSignal,
    RegularityEstimate,
    appendix_ladder,
    build_probe,
    estimate_regularity,
    estimate_regularity_neg,
    gagliardo_seminorm,
    sample_ladder,
    scheduled_ladder,
    smooth_pulse_probe,
)
from waveprobe.ansatz import (
    AnsatzField,
    TraceSignal,
    boundary_trace,
    build_ansatz,
    cutoff_residual,
    echo_component,
    eval_field,
    flux_jump_coefficient,
    transmitted_component,
)
from waveprobe.solver import (
    LiftedProblem,
    Measurement,
    SpectralBasis,
    SpectralTrajectory,
    StabilityError,
    energy_series,
    integrate,
    lift_boundary_data,
    measure_boundary,
    static_echo_oracle,
    stiffness_matrix,
)
from waveprobe.inversion import (
    ContrastReport,
    Reconstruction,
    RegularityProfile,
    detect_first_echo,
    emission_profile,
    estimate_reflection,
    reconstruct_interface,
    recover_contrast,
    run_inversion,
)

__version__ = "0.1.0"
