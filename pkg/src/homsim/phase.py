"""EOM drive waveforms as evaluable phase-vs-time functions.

Profiles are piecewise affine, stored unwrapped (no mod 2 pi) so that
the sawtooth-vs-ramp equivalence is a measurable property rather than
an encoding artifact.  Times in ns, phases in radians, voltages in V.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# engineering defaults; the experiment's own rise/fall times are not published
DEFAULT_STEP_RISE_NS = 10.0
DEFAULT_SAWTOOTH_FALL_NS = 4.0


@dataclass(frozen=True)
class EomCalibration:
    """Voltage-to-phase conversion of the modulator.

    Attributes:
        v_pi: voltage producing a pi phase shift (V), > 0
    """

    v_pi: float

    def __post_init__(self):
        if not self.v_pi > 0:
            raise ValueError(f"v_pi must be > 0, got {self.v_pi}")

    def phase_of(self, volts):
        return np.pi * np.asarray(volts, dtype=np.float64) / self.v_pi


class PhaseProfile:
    """Piecewise-affine phase phi(t), constant before the first and after
    the last knot.

    Knots are (time, phase) pairs with non-decreasing times; a repeated
    time encodes an instantaneous jump (evaluation at exactly that time
    yields the right-hand value).
    """

    def __init__(self, knot_times, knot_phases):
        t = np.atleast_1d(np.asarray(knot_times, dtype=np.float64))
        p = np.atleast_1d(np.asarray(knot_phases, dtype=np.float64))
        if t.shape != p.shape or t.ndim != 1 or t.size == 0:
            raise ValueError("knot arrays must be equal-length 1-D and non-empty")
        if not np.all(np.isfinite(t)) or not np.all(np.isfinite(p)):
            raise ValueError("knots must be finite")
        if np.any(np.diff(t) < 0):
            raise ValueError("knot times must be non-decreasing")
        self.knot_times = t
        self.knot_phases = p

    def phase(self, t) -> np.ndarray:
        """Evaluate phi at times t (radians)."""
        t = np.asarray(t, dtype=np.float64)
        return np.interp(t, self.knot_times, self.knot_phases)

    def __call__(self, t):
        return self.phase(t)

    def shifted(self, delta_t: float) -> "PhaseProfile":
        """Same waveform displaced in time by delta_t."""
        return PhaseProfile(self.knot_times + delta_t, self.knot_phases)

    def plus(self, other: "PhaseProfile") -> "PhaseProfile":
        """Pointwise sum of two profiles (exact for smoothed profiles;
        coincident zero-width jumps merge to their right-hand values)."""
        t = np.sort(np.concatenate([self.knot_times, other.knot_times]))
        return PhaseProfile(t, self.phase(t) + other.phase(t))

    @property
    def total_phase(self) -> float:
        return float(self.knot_phases[-1] - self.knot_phases[0])


def zero_profile() -> PhaseProfile:
    return PhaseProfile([0.0], [0.0])


def step_profile(t_step: float, delta_phi: float,
                 rise_time: float = DEFAULT_STEP_RISE_NS) -> PhaseProfile:
    """Phase step of height delta_phi at t_step.

    phi = 0 for t < t_step - rise_time/2, delta_phi for
    t > t_step + rise_time/2, linear in between.  rise_time = 0 gives an
    instantaneous jump.
    """
    if rise_time < 0:
        raise ValueError(f"rise_time must be >= 0, got {rise_time}")
    half = 0.5 * rise_time
    return PhaseProfile([t_step - half, t_step + half], [0.0, delta_phi])


def linear_ramp_profile(t_start: float, duration: float,
                        total_phase: float) -> PhaseProfile:
    """Linear ramp from 0 to total_phase over [t_start, t_start+duration].

    The implied frequency shift is total_phase / (2 pi duration), i.e.
    1000 * total_phase / (2 pi duration) in MHz for duration in ns.
    """
    if not duration > 0:
        raise ValueError(f"duration must be > 0, got {duration}")
    return PhaseProfile([t_start, t_start + duration], [0.0, total_phase])


def ramp_frequency_shift_mhz(duration_ns: float, total_phase: float) -> float:
    """Frequency shift (MHz) produced by a linear ramp."""
    return 1e3 * total_phase / (2.0 * np.pi * duration_ns)


def sawtooth_profile(t_start: float, tooth_period: float, n_teeth: int,
                     tooth_phase: float,
                     fall_time: float = DEFAULT_SAWTOOTH_FALL_NS) -> PhaseProfile:
    """Repeated linear ramps 0 -> tooth_phase, each falling back to 0.

    Each tooth rises over (tooth_period - fall_time) and falls over
    fall_time.  With tooth_phase = 2 pi and fall_time = 0 the waveform is
    phase-equivalent (mod 2 pi) to one continuous ramp of the same slope.
    """
    if not tooth_period > 0:
        raise ValueError(f"tooth_period must be > 0, got {tooth_period}")
    if n_teeth < 1:
        raise ValueError(f"n_teeth must be >= 1, got {n_teeth}")
    if not 0 <= fall_time < tooth_period:
        raise ValueError("fall_time must satisfy 0 <= fall_time < tooth_period")
    times = [t_start]
    phases = [0.0]
    for k in range(n_teeth):
        t0 = t_start + k * tooth_period
        times.extend([t0 + tooth_period - fall_time, t0 + tooth_period])
        phases.extend([tooth_phase, 0.0])
    return PhaseProfile(times, phases)


def phase_from_voltage(time_ns, volts, cal: EomCalibration) -> PhaseProfile:
    """Phase profile from a sampled voltage trace: phi(t) = pi V(t) / v_pi.

    Samples are interpolated linearly; values outside the trace hold the
    end samples.

    Raises:
        ValueError: on non-finite samples or unsorted times.
    """
    t = np.asarray(time_ns, dtype=np.float64)
    v = np.asarray(volts, dtype=np.float64)
    if t.shape != v.shape or t.ndim != 1 or t.size == 0:
        raise ValueError("trace must be two equal-length 1-D columns")
    if not (np.all(np.isfinite(t)) and np.all(np.isfinite(v))):
        raise ValueError("voltage trace contains non-finite samples")
    if np.any(np.diff(t) < 0):
        raise ValueError("voltage trace times must be non-decreasing")
    return PhaseProfile(t, cal.phase_of(v))
