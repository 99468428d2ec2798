"""Uniformly sampled signals: grids, derivatives, interpolation, CSV I/O.

Sampled signals on an interval (0, T) live on the midpoint grid
t_i = (i + 1/2) dt with n = round(T / dt) samples, so the open endpoints are
never sampled.  CSV files carry (t, value) rows printed with 17 significant
digits, which reproduces doubles bit-exactly across runs.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np


def sample_count(T: float, dt: float) -> int:
    return int(round(T / dt))


def midpoint_times(n: int, dt: float) -> np.ndarray:
    return (np.arange(n) + 0.5) * dt


def centered_derivative(values: np.ndarray, dt: float) -> np.ndarray:
    """Centered difference quotient, one-sided at the ends (grid-scale derivative)."""
    return np.gradient(np.asarray(values, dtype=float), dt)


def interp_causal(values: np.ndarray, dt: float, x) -> np.ndarray:
    """Linear interpolation on the midpoint grid; zero left of the grid.

    Signals vanish on (-inf, 0], so queries at or before t = 0 return 0.
    Right of the grid the last sample is held.
    """
    values = np.asarray(values, dtype=float)
    t = midpoint_times(values.size, dt)
    return np.interp(x, t, values, left=0.0)


def window_samples(values: np.ndarray, dt: float, upto: float) -> np.ndarray:
    """Samples of the restriction to (0, upto): midpoints strictly below upto."""
    n = int(np.floor(upto / dt - 0.5)) + 1
    n = max(0, min(n, len(values)))
    return np.asarray(values, dtype=float)[:n]


def write_signal_csv(path, values: np.ndarray, dt: float, value_name: str = "value") -> None:
    values = np.asarray(values, dtype=float)
    t = midpoint_times(values.size, dt)
    lines = [f"t,{value_name}"]
    lines.extend(f"{ti:.17g},{vi:.17g}" for ti, vi in zip(t, values))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_signal_csv(path) -> tuple[np.ndarray, np.ndarray, float]:
    """Read a (t, value) CSV; returns (t, values, dt)."""
    raw = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    t = raw[:, 0]
    values = raw[:, 1]
    if t.size < 2:
        raise ValueError("signal CSV needs at least two samples")
    dt = float(t[1] - t[0])
    return t, values, dt
