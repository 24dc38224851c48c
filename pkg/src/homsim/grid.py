"""Single-photon temporal mode functions on a shared uniform time grid.

All times are in nanoseconds, frequencies in MHz, phases in radians.
A packet's complex amplitude samples have units ns^-1/2 so that the
intensity |amp|^2 integrates to 1 with the midpoint rule.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# intensity sigma = FWHM / (2 sqrt(2 ln 2))
SIGMA_FROM_FWHM = 1.0 / (2.0 * np.sqrt(2.0 * np.log(2.0)))
FWHM_FROM_SIGMA = 1.0 / SIGMA_FROM_FWHM

# 1 MHz expressed in cycles per nanosecond
MHZ_PER_NS = 1e-3

NORM_TOL = 1e-9


class GridError(ValueError):
    """Raised for grid mismatches or envelopes that do not fit the grid."""


@dataclass(frozen=True)
class TimeGrid:
    """Uniform time axis shared by all packets of a simulation.

    Attributes:
        t_start: time of the first sample (ns)
        dt: sample spacing (ns), > 0
        n_points: number of samples, >= 2
    """

    t_start: float
    dt: float
    n_points: int

    def __post_init__(self):
        if not self.dt > 0:
            raise GridError(f"dt must be > 0, got {self.dt}")
        if self.n_points < 2:
            raise GridError(f"n_points must be >= 2, got {self.n_points}")

    @classmethod
    def symmetric(cls, span: float, dt: float = 0.5) -> "TimeGrid":
        """Grid covering [-span, +span] around zero with spacing dt."""
        n = int(round(2.0 * span / dt)) + 1
        return cls(t_start=-span, dt=dt, n_points=n)

    @property
    def times(self) -> np.ndarray:
        return self.t_start + self.dt * np.arange(self.n_points)

    @property
    def t_end(self) -> float:
        return self.t_start + self.dt * (self.n_points - 1)


@dataclass
class WavePacket:
    """Normalized complex temporal mode of one photon.

    Attributes:
        grid: the shared time axis
        amplitude: complex samples at grid nodes (ns^-1/2)
        center: nominal packet center (ns)
        meta: free-form label for bookkeeping
    """

    grid: TimeGrid
    amplitude: np.ndarray
    center: float = 0.0
    meta: str = ""

    def __post_init__(self):
        self.amplitude = np.asarray(self.amplitude, dtype=np.complex128)
        if self.amplitude.shape != (self.grid.n_points,):
            raise GridError(
                f"amplitude shape {self.amplitude.shape} does not match grid "
                f"({self.grid.n_points} points)"
            )
        if not np.all(np.isfinite(self.amplitude.view(np.float64))):
            raise ValueError("amplitude contains non-finite samples")
        norm = float(np.sum(np.abs(self.amplitude) ** 2).real * self.grid.dt)
        if abs(norm - 1.0) > NORM_TOL:
            raise ValueError(f"packet not normalized: sum |amp|^2 dt = {norm!r}")

    @property
    def intensity(self) -> np.ndarray:
        return np.abs(self.amplitude) ** 2

    def norm(self) -> float:
        return float(np.sum(self.intensity) * self.grid.dt)


def gaussian_envelope(grid: TimeGrid, center: float, fwhm_intensity: float,
                      meta: str = "") -> WavePacket:
    """Build a transform-limited Gaussian packet with zero phase.

    The width parameter is the FWHM of the detection-time density
    |amp|^2, not of the field amplitude.

    Args:
        grid: time axis the packet lives on
        center: packet center (ns)
        fwhm_intensity: intensity FWHM (ns), > 0

    Raises:
        GridError: if the envelope violates the 3-sigma fit rule, with the
            missing margin reported.
    """
    if not fwhm_intensity > 0:
        raise ValueError(f"fwhm_intensity must be > 0, got {fwhm_intensity}")
    sigma = fwhm_intensity * SIGMA_FROM_FWHM
    lo_margin = (center - 3.0 * sigma) - grid.t_start
    hi_margin = grid.t_end - (center + 3.0 * sigma)
    if lo_margin < 0 or hi_margin < 0:
        raise GridError(
            "envelope exceeds grid: need center +/- 3 sigma inside "
            f"[{grid.t_start}, {grid.t_end}] ns; margins are "
            f"{lo_margin:.3f} ns (low) and {hi_margin:.3f} ns (high)"
        )
    t = grid.times
    amp = np.exp(-((t - center) ** 2) / (4.0 * sigma**2)).astype(np.complex128)
    amp /= np.sqrt(np.sum(np.abs(amp) ** 2) * grid.dt)
    return WavePacket(grid=grid, amplitude=amp, center=center, meta=meta)


def inner_product(a: WavePacket, b: WavePacket) -> complex:
    """Mode overlap <a|b> = sum conj(a) b dt on the shared grid."""
    if a.grid != b.grid:
        raise GridError("inner_product requires packets on the same grid")
    return complex(np.vdot(a.amplitude, b.amplitude) * a.grid.dt)


def apply_phase(wp: WavePacket, profile) -> WavePacket:
    """Multiply the packet by exp(i phi(t)); |amp| is unchanged pointwise.

    Args:
        wp: input packet
        profile: object with a ``phase(t)`` method returning radians
    """
    phi = np.asarray(profile.phase(wp.grid.times), dtype=np.float64)
    amp = wp.amplitude * np.exp(1j * phi)
    return WavePacket(grid=wp.grid, amplitude=amp, center=wp.center, meta=wp.meta)


def apply_detuning(wp: WavePacket, delta_nu_mhz: float) -> WavePacket:
    """Shift the packet frequency: phase ramp 2 pi delta_nu (t - center)."""
    t = wp.grid.times
    phi = 2.0 * np.pi * delta_nu_mhz * MHZ_PER_NS * (t - wp.center)
    amp = wp.amplitude * np.exp(1j * phi)
    return WavePacket(grid=wp.grid, amplitude=amp, center=wp.center, meta=wp.meta)
