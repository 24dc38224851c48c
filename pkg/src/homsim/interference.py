"""Exact two-photon counting statistics at a balanced beam splitter.

For input modes a(t), b(t) and a static mode-overlap factor in [0, 1]
(spatial/polarization mismatch; temporal and spectral structure is
carried exactly by the mode functions), the joint densities over the
ordered detection-time pair (t1, t2) are

    p_cross = 1/4 [ |a1|^2 |b2|^2 + |b1|^2 |a2|^2
                    - 2 overlap^2 Re(a1 b2 conj(a2) conj(b1)) ]
    p_same  = same expression with + the interference term,

where p_cross is the density for detections in opposite output ports
and p_same aggregates both same-port outcomes (each port individually
carries p_same / 2).  For b = a e^{i phi} the conditional opposite-port
probability reduces to sin^2(dphi/2) with dphi = phi(t2) - phi(t1).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grid import MHZ_PER_NS, TimeGrid, WavePacket

MASS_TOL = 1e-6


@dataclass
class JointDensity:
    """Pair-detection probability densities over (t1, t2), units ns^-2.

    Total mass sum (p_cross + p_same) dt^2 equals 1; p_cross is symmetric
    under t1 <-> t2.
    """

    grid: TimeGrid
    p_cross: np.ndarray
    p_same: np.ndarray
    mode_overlap: float

    def cross_mass(self) -> float:
        return float(self.p_cross.sum() * self.grid.dt**2)

    def same_mass(self) -> float:
        return float(self.p_same.sum() * self.grid.dt**2)

    def total_mass(self) -> float:
        return self.cross_mass() + self.same_mass()

    def conditional_cross(self, floor: float = 0.0) -> np.ndarray:
        """Pointwise p_cross / (p_cross + p_same); cells with total density
        <= floor are returned as NaN."""
        tot = self.p_cross + self.p_same
        with np.errstate(invalid="ignore", divide="ignore"):
            q = np.where(tot > floor, self.p_cross / tot, np.nan)
        return q

    def cross_tau_marginal(self, tau: np.ndarray) -> np.ndarray:
        """Cross-port density marginalized onto tau = t2 - t1 (units ns^-1),
        evaluated by summing the density along diagonals."""
        n = self.grid.n_points
        dt = self.grid.dt
        out = np.empty_like(np.asarray(tau, dtype=np.float64))
        flat = out.ravel()
        for i, tv in enumerate(np.asarray(tau, dtype=np.float64).ravel()):
            k = int(round(tv / dt))
            if abs(k) >= n:
                flat[i] = 0.0
            else:
                flat[i] = float(np.trace(self.p_cross, offset=k) * dt)
        return out


def joint_densities(a: WavePacket, b: WavePacket, mode_overlap: float = 1.0) -> JointDensity:
    """Exact joint densities for two single photons on a 50/50 splitter.

    Args:
        a, b: normalized packets on a shared grid
        mode_overlap: static amplitude overlap of the non-temporal degrees
            of freedom, in [0, 1]; its square scales the interference term

    Raises:
        ValueError: for grid mismatch, unnormalized packets, or an overlap
            outside [0, 1].
    """
    if a.grid != b.grid:
        raise ValueError("packets must share one grid")
    if not 0.0 <= mode_overlap <= 1.0:
        raise ValueError(f"mode_overlap must be in [0, 1], got {mode_overlap}")
    for name, wp in (("a", a), ("b", b)):
        if abs(wp.norm() - 1.0) > 1e-9:
            raise ValueError(f"packet {name} is not normalized")
    fa = np.abs(a.amplitude) ** 2
    fb = np.abs(b.amplitude) ** 2
    classical = np.outer(fa, fb)
    classical = classical + classical.T  # |a1|^2|b2|^2 + |b1|^2|a2|^2
    w = np.outer(a.amplitude, b.amplitude)
    interf = 2.0 * mode_overlap**2 * (w * np.conj(w.T)).real
    p_cross = 0.25 * (classical - interf)
    p_same = 0.25 * (classical + interf)
    # clip float residuals of perfectly destructive interference
    np.clip(p_cross, 0.0, None, out=p_cross)
    np.clip(p_same, 0.0, None, out=p_same)
    return JointDensity(grid=a.grid, p_cross=p_cross, p_same=p_same,
                        mode_overlap=mode_overlap)


def noninterfering_density(a: WavePacket, b: WavePacket) -> JointDensity:
    """Reference densities for fully distinguishable photons: p_cross and
    p_same coincide and carry no interference term."""
    return joint_densities(a, b, mode_overlap=0.0)


def conditional_cross_prob(delta_phi) -> np.ndarray:
    """Opposite-port probability for a relative phase between the two
    detections: sin^2(delta_phi / 2)."""
    return np.sin(np.asarray(delta_phi, dtype=np.float64) / 2.0) ** 2


def region_mass(jd: JointDensity, region) -> float:
    """Integral of p_cross over the grid cells whose centers satisfy the
    region predicate."""
    t = jd.grid.times
    t1, t2 = np.meshgrid(t, t, indexing="ij")
    mask = np.asarray(region(t1, t2), dtype=bool)
    return float(jd.p_cross[mask].sum() * jd.grid.dt**2)


def region_rate_ratio(jd: JointDensity, ref: JointDensity, region) -> float:
    """Cross-port mass of jd over that of ref, restricted to the cells
    whose centers lie in the region.

    Raises:
        ValueError: if the region selects no cells or the reference mass
            vanishes there.
    """
    if jd.grid != ref.grid:
        raise ValueError("densities must share one grid")
    t = jd.grid.times
    t1, t2 = np.meshgrid(t, t, indexing="ij")
    mask = np.asarray(region(t1, t2), dtype=bool)
    if not mask.any():
        raise ValueError("region selects no grid cells")
    ref_mass = float(ref.p_cross[mask].sum() * ref.grid.dt**2)
    if ref_mass <= 0.0:
        raise ValueError("reference mass in region is zero")
    return float(jd.p_cross[mask].sum() * jd.grid.dt**2) / ref_mass


def half_pair_region(step_time: float, kind: str, rise_exclusion: float = 5.0,
                     tail_cutoff: float = 80.0):
    """Predicate over (t1, t2) selecting temporal-half pair combinations.

    kind: 'same' (both before or both after the step), 'cross' (one on
    each side), or 'all' (both merely inside the included windows).
    Detections within rise_exclusion of the step or at least tail_cutoff
    away are excluded.
    """
    if kind not in ("same", "cross", "all"):
        raise ValueError(f"unknown region kind {kind!r}")

    def included(t):
        d = np.abs(t - step_time)
        return (d > rise_exclusion) & (d < tail_cutoff)

    def predicate(t1, t2):
        ok = included(t1) & included(t2)
        if kind == "all":
            return ok
        first = (t1 < step_time) == (t2 < step_time)
        return ok & first if kind == "same" else ok & ~first

    return predicate


def predict_beat_curve(delta_nu_mhz: float, ref_tau_marginal, tau) -> np.ndarray:
    """Expected opposite-port coincidences vs detection-time difference for
    two photons offset in frequency: twice the non-interfering level
    modulated by sin^2(pi delta_nu tau).

    Args:
        delta_nu_mhz: frequency difference (MHz)
        ref_tau_marginal: callable or array giving the non-interfering
            marginal at tau
        tau: detection-time differences (ns)
    """
    tau = np.asarray(tau, dtype=np.float64)
    if not np.isfinite(delta_nu_mhz):
        raise ValueError("delta_nu must be finite")
    ref = ref_tau_marginal(tau) if callable(ref_tau_marginal) else np.asarray(ref_tau_marginal)
    return 2.0 * ref * np.sin(np.pi * delta_nu_mhz * MHZ_PER_NS * tau) ** 2
