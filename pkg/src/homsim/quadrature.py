"""Deterministic (sampling-free) predictions for jitter-free scenarios.

Builds the exact joint densities for the scenario's nominal packet and
phase profile and integrates them over the analysis regions.  Used by
the phase-sweep command's quadrature engine and as the independent
check against Monte Carlo region rates.
"""

from __future__ import annotations

from .grid import gaussian_envelope, apply_phase
from .interference import (JointDensity, half_pair_region, joint_densities,
                           noninterfering_density, region_rate_ratio)
from .scenario import Scenario


def nominal_densities(scenario: Scenario, delta_phi: float | None = None):
    """(interfering, non-interfering) densities for the nominal packets."""
    a = gaussian_envelope(scenario.grid, 0.0, scenario.source.fwhm_ns)
    profile = scenario.phase_profile(delta_phi)
    b = apply_phase(a, profile) if profile is not None else a
    jd = joint_densities(a, b, scenario.source.mode_overlap)
    ref = noninterfering_density(a, b)
    return jd, ref


def quadrature_half_ratios(scenario: Scenario,
                           delta_phi: float | None = None) -> dict:
    """Same/cross/all temporal-half ratios from exact integration."""
    jd, ref = nominal_densities(scenario, delta_phi)
    a = scenario.analysis
    out = {}
    for pairing in ("same", "cross", "all"):
        region = half_pair_region(a["step_time_ns"], pairing,
                                  a["rise_exclusion_ns"], a["tail_cutoff_ns"])
        out[pairing] = region_rate_ratio(jd, ref, region)
    return out
