#!/usr/bin/env python3
"""Derive the default imperfection calibration shipped in the bundled
scenarios.

Model knobs and what pins them:
  sigma_nu   - per-photon Gaussian frequency offset; controls how the
               interference contrast decays with detection-time
               difference (and thus the visibility/cross-half level).
  amp_jitter - envelope-width scaling jitter; adds contrast loss that is
               nearly independent of the detection-time difference.  It
               is bounded above by the beat-reference envelope width.
  rise_ns    - modulator step transition width.  A transition slightly
               wider than the excluded +/-5 ns window leaves partially
               shifted detections inside the analysis region and lifts
               the same-half floor; with Gaussian jitter alone the
               same-half, cross-half, and envelope targets cannot be met
               simultaneously.
  p_two_photon / dark_rate - set the 5% background offset and, through
               the same budget, the ~95% autocorrelation suppression.

The fit integrates the exact pair densities over the analysis regions:
Gauss-Hermite over the width jitter, analytic averaging over the
relative frequency offset (a exp(-4 pi^2 sigma_nu^2 tau^2) factor on the
interference term).

Run:  python scripts/fit_calibration.py [--scan] [--verify-trials N]
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np
from numpy.polynomial.hermite_e import hermegauss
from scipy.optimize import curve_fit
from scipy.special import ndtr

from homsim.grid import MHZ_PER_NS, SIGMA_FROM_FWHM, TimeGrid, gaussian_envelope
from homsim.interference import half_pair_region
from homsim.phase import step_profile
from homsim.source import MIN_WIDTH_SCALE, SourceConfig

FWHM_NS = 150.0
MODE_OVERLAP = 0.995          # static overlap, fidelity > 99%
P_CLICK = 0.07
RISE_EXCL_NS, TAIL_NS = 5.0, 80.0

BG_TOTAL = 0.050              # offset due solely to multi-atom + detector noise
BG_DARK_SHARE = 0.001         # implementer choice: small detector-noise share

# acceptance windows the operating point must sit inside
BANDS = {
    "same": (0.13, 0.19),
    "cross": (1.74, 1.92),
    "visibility": (0.62, 0.72),
    "integrated": (0.94, 1.02),
    "envelope_fwhm": (202.0, 222.0),
}
# planned Monte Carlo standard errors at the acceptance trial counts,
# used to score band margins
MC_SIGMA = {"same": 0.004, "cross": 0.017, "visibility": 0.013,
            "integrated": 0.010, "envelope_fwhm": 1.5}

SWEEP_PHASES = np.arange(0.0, 3.01, 0.25) * np.pi


class WidthEnsemble:
    """Region-restricted pair-density pieces averaged over width jitter.

    For each analysis region R the interference term factorizes per
    (sigma_nu, rise) variant as  dot(Bbar_R, cos(dphi) * decoherence),
    where Bbar_R is the width-averaged bilinear packet product on the
    region cells.  This makes scans over sigma_nu/rise cheap.
    """

    def __init__(self, amp_jitter: float, n_nodes: int = 9, dt: float = 1.0):
        nodes, weights = hermegauss(n_nodes)
        weights = weights / weights.sum()
        scales = np.maximum(1.0 + amp_jitter * nodes, MIN_WIDTH_SCALE)
        widest = float(scales.max())
        span = max(450.0, float(np.ceil(3.2 * FWHM_NS * widest * SIGMA_FROM_FWHM)))
        grid = TimeGrid.symmetric(span, dt)
        t = grid.times
        t1 = t[:, None]
        t2 = t[None, :]

        self.regions = {}
        packets = [gaussian_envelope(grid, 0.0, FWHM_NS * w).amplitude
                   for w in scales]
        intens = [np.abs(a) ** 2 for a in packets]
        for kind in ("same", "cross", "all"):
            mask = half_pair_region(0.0, kind, RISE_EXCL_NS, TAIL_NS)(t1, t2)
            idx = np.flatnonzero(mask.ravel())
            tt1 = np.broadcast_to(t1, mask.shape).ravel()[idx]
            tt2 = np.broadcast_to(t2, mask.shape).ravel()[idx]
            self.regions[kind] = {
                "t1": tt1, "t2": tt2,
                "Bbar": np.zeros(idx.size),
                "classical": 0.0,
            }
            for i, wi in enumerate(weights):
                for j, wj in enumerate(weights):
                    w = wi * wj
                    fa, fb = intens[i], intens[j]
                    classical = (np.outer(fa, fb) + np.outer(fb, fa)).ravel()[idx]
                    prod = np.outer(packets[i], packets[j])
                    b = 2.0 * (prod * np.conj(prod.T)).real.ravel()[idx]
                    self.regions[kind]["Bbar"] += w * b
                    self.regions[kind]["classical"] += w * float(classical.sum())

    def ratios(self, sigma_nu_mhz: float, gamma_nu_mhz: float,
               rise_ns: float, delta_phi: float = np.pi) -> dict:
        """Same/cross/all cross-port ratios vs the non-interfering level.

        The relative offset of a pair is the difference of two
        independent per-photon offsets, each Gaussian(sigma_nu) plus
        Lorentzian(gamma_nu); averaging cos(2 pi Delta tau) gives the
        Voigt-type decoherence factor
        exp(-4 pi^2 sigma_nu^2 tau^2) * exp(-4 pi gamma_nu |tau|).
        """
        s_nu = sigma_nu_mhz * MHZ_PER_NS
        g_nu = gamma_nu_mhz * MHZ_PER_NS
        profile = step_profile(0.0, delta_phi, rise_ns)
        out = {}
        for kind, reg in self.regions.items():
            tau = reg["t2"] - reg["t1"]
            dphi = profile.phase(reg["t2"]) - profile.phase(reg["t1"])
            decoh = np.exp(-4.0 * np.pi**2 * s_nu**2 * tau**2
                           - 4.0 * np.pi * g_nu * np.abs(tau))
            interf = float(reg["Bbar"] @ (np.cos(dphi) * decoh))
            num = reg["classical"] - MODE_OVERLAP**2 * interf
            out[kind] = num / reg["classical"]
        return out


def predicted_observables(ens: WidthEnsemble, sigma_nu: float,
                          gamma_nu: float, rise: float,
                          amp_jitter: float) -> dict:
    r_pi = ens.ratios(sigma_nu, gamma_nu, rise, np.pi)
    cross_curve = []
    same_curve = []
    for phi in SWEEP_PHASES:
        r = ens.ratios(sigma_nu, gamma_nu, rise, phi)
        cross_curve.append(r["cross"] + BG_TOTAL)
        same_curve.append(r["same"] + BG_TOTAL)
    cross_curve = np.asarray(cross_curve)
    x = np.column_stack([np.ones_like(SWEEP_PHASES), -np.cos(SWEEP_PHASES)])
    c, a = np.linalg.lstsq(x, cross_curve, rcond=None)[0]
    return {
        "same": r_pi["same"] + BG_TOTAL,
        "cross": r_pi["cross"] + BG_TOTAL,
        "integrated": r_pi["all"] + BG_TOTAL,
        "visibility": a / c,
        "envelope_fwhm": envelope_fwhm_fit(amp_jitter),
        "same_curve_spread": float(np.ptp(same_curve)),
    }


def envelope_fwhm_fit(amp_jitter: float, n_nodes: int = 9,
                      window: float = 150.0, bin_w: float = 5.0) -> float:
    """Free-width Gaussian fit of the width-averaged reference marginal,
    restricted to the beat analysis window (matches the beat analysis)."""
    nodes, weights = hermegauss(n_nodes)
    weights = weights / weights.sum()
    scales = np.maximum(1.0 + amp_jitter * nodes, MIN_WIDTH_SCALE)
    sig0 = FWHM_NS * SIGMA_FROM_FWHM
    centers = np.arange(-window + bin_w / 2, window, bin_w)
    y = np.zeros_like(centers)
    for wi, sci in zip(weights, scales):
        for wj, scj in zip(weights, scales):
            st = sig0 * np.hypot(sci, scj)
            y += wi * wj * np.exp(-centers**2 / (2 * st**2)) / st

    def model(x, a, sf):
        return a * np.exp(-x**2 / (2 * sf**2))

    popt, _ = curve_fit(model, centers, y, p0=[y.max(), sig0 * np.sqrt(2)])
    return float(abs(popt[1]) / SIGMA_FROM_FWHM)


def margin_score(obs: dict) -> tuple[float, dict]:
    """Smallest band margin in planned-MC sigma units."""
    margins = {}
    for key, (lo, hi) in BANDS.items():
        sig = MC_SIGMA[key]
        margins[key] = min(obs[key] - lo, hi - obs[key]) / sig
    return min(margins.values()), margins


def background_budget():
    """Multi-atom probability and dark rate supplying the 5% offset, and
    the implied stream-autocorrelation suppression."""
    cfg = SourceConfig()
    sigma0 = FWHM_NS * SIGMA_FROM_FWHM
    q = float(ndtr(TAIL_NS / sigma0) - ndtr(RISE_EXCL_NS / sigma0))

    bg_multi = BG_TOTAL - BG_DARK_SHARE
    p2 = 0.5 * bg_multi * P_CLICK**2
    mu = P_CLICK + p2

    width_region = TAIL_NS - RISE_EXCL_NS
    ref_same = P_CLICK**2 * q**2 / 4.0
    r_per_ns = BG_DARK_SHARE * ref_same / (mu * 2.0 * q * width_region)
    dark_hz = r_per_ns * 1e9

    period = cfg.rep_period_ns
    dark_term = 2.0 * mu * r_per_ns * period
    loss = (p2 / 2.0 + dark_term) / (mu**2 / 4.0 + dark_term)
    return p2, dark_hz, 100.0 * (1.0 - loss)


def scan(args):
    rows = []
    for s in args.amp_grid:
        ens = WidthEnsemble(s, n_nodes=args.nodes)
        for snu in args.snu_grid:
            for gnu in args.gnu_grid:
                obs = predicted_observables(ens, snu, gnu, 10.0, s)
                score, margins = margin_score(obs)
                rows.append((score, s, snu, gnu, obs))
                print(f"s={s:.2f} snu={snu:.2f} gnu={gnu:.3f}: "
                      f"same={obs['same']:.4f} cross={obs['cross']:.4f} "
                      f"v={obs['visibility']:.4f} integ={obs['integrated']:.4f} "
                      f"env={obs['envelope_fwhm']:.1f} "
                      f"flat={obs['same_curve_spread']:.4f} "
                      f"min-margin={score:+.2f} sigma")
    rows.sort(reverse=True, key=lambda r: r[0])
    return rows[0]


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--verify-trials", type=int, default=0)
    ap.add_argument("--nodes", type=int, default=9)
    ap.add_argument("--amp-grid", type=float, nargs="+",
                    default=[0.16, 0.20, 0.24])
    ap.add_argument("--snu-grid", type=float, nargs="+",
                    default=[0.0, 0.2, 0.4])
    ap.add_argument("--gnu-grid", type=float, nargs="+",
                    default=[0.20, 0.25, 0.30, 0.35])
    args = ap.parse_args(argv)
    args.amp_grid = args.amp_grid
    args.snu_grid = args.snu_grid
    args.gnu_grid = args.gnu_grid

    best = scan(args)
    score, s, snu, gnu, obs = best
    print(f"\nbest point: amp_jitter={s}, sigma_nu={snu} MHz, "
          f"gamma_nu={gnu} MHz (min margin {score:+.2f} sigma)")
    for k, v in obs.items():
        print(f"  {k}: {v:.4f}" if isinstance(v, float) else f"  {k}: {v}")

    p2, dark_hz, g2_pct = background_budget()
    print(f"\nbackground budget: p_two_photon = {p2:.4e}, "
          f"dark_rate = {dark_hz:.1f} Hz")
    print(f"implied autocorrelation suppression = {g2_pct:.2f}%")

    calib = {
        "p_click": P_CLICK,
        "p_two_photon": round(p2, 10),
        "sigma_nu_mhz": snu,
        "gamma_nu_mhz": gnu,
        "amp_jitter": s,
        "dark_rate_hz": round(dark_hz, 1),
        "mode_overlap": MODE_OVERLAP,
    }
    print("\ncalibrated fields:")
    print(json.dumps(calib, indent=2))

    if args.verify_trials:
        verify(calib, args.verify_trials)
    return 0


def verify(calib, n_trials):
    from homsim.detection import run_experiment
    from homsim.report import build_summary
    from homsim.scenario import load_scenario, validate_scenario

    doc = load_scenario("fig2_pi_step").resolved_dict()
    doc["source"].update(calib)
    doc["run"]["n_trials"] = n_trials
    scn = validate_scenario(doc)
    ev = run_experiment(scn.source, n_trials, scn.run["seed"],
                        scn.phase_profile(), mode=scn.mode)
    s = build_summary(ev, scn)
    hr = s["half_ratios"]
    print(f"\nMonte Carlo verification at {n_trials} trials:")
    for k in ("same", "cross", "all"):
        sec = hr[k]["raw"]
        print(f"  {k:5s}: {sec['ratio']:.4f} +/- {sec['error']:.4f}")
    g2 = s["g2"]
    print(f"  adjacent-peak ratio: {g2['adjacent_peak_ratio']:.4f}")


if __name__ == "__main__":
    sys.exit(main())
