"""Data reductions: temporal-half ratios, visibility fits, beat curves,
and stream-autocorrelation suppression.

All coincidence ratios are normalized to the non-interfering reference:
the mean of the outer correlation peaks (2 <= |n| <= 6) divided by two,
restricted to the same detection-time region as the numerator.  The
peaks at |n| = 1 are never used as a reference (their rate is lowered
by the routing combinatorics).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import curve_fit

from .coincidence import CoincidenceHistogram, PairTable
from .grid import FWHM_FROM_SIGMA, MHZ_PER_NS, SIGMA_FROM_FWHM

LABEL_I, LABEL_II, LABEL_EXCLUDED = 0, 1, 2

DEFAULT_RISE_EXCLUSION_NS = 5.0
DEFAULT_TAIL_CUTOFF_NS = 80.0


@dataclass(frozen=True)
class HalfClassification:
    """Temporal-half label of one detection relative to the phase step."""

    label: str            # "I", "II", or "excluded"
    reason: str           # "rise-window", "far-tail", or "in-range"


def classify_half(t: float, step_time: float,
                  rise_exclusion: float = DEFAULT_RISE_EXCLUSION_NS,
                  tail_cutoff: float = DEFAULT_TAIL_CUTOFF_NS) -> HalfClassification:
    """Classify a detection time into half I (before the step), half II
    (after), or excluded (inside the rise window or beyond the tail
    cutoff)."""
    d = abs(t - step_time)
    if d <= rise_exclusion:
        return HalfClassification("excluded", "rise-window")
    if d >= tail_cutoff:
        return HalfClassification("excluded", "far-tail")
    return HalfClassification("I" if t < step_time else "II", "in-range")


def classify_half_codes(t, step_time, rise_exclusion=DEFAULT_RISE_EXCLUSION_NS,
                        tail_cutoff=DEFAULT_TAIL_CUTOFF_NS) -> np.ndarray:
    """Vectorized classify_half returning integer labels."""
    t = np.asarray(t, dtype=np.float64)
    d = np.abs(t - step_time)
    out = np.where(t < step_time, LABEL_I, LABEL_II)
    return np.where((d <= rise_exclusion) | (d >= tail_cutoff),
                    LABEL_EXCLUDED, out)


def pairing_mask(pairs: PairTable, pairing: str, step_time: float = 0.0,
                 rise_exclusion: float = DEFAULT_RISE_EXCLUSION_NS,
                 tail_cutoff: float = DEFAULT_TAIL_CUTOFF_NS) -> np.ndarray:
    """Mask of pairs whose two detections fall in the requested half
    combination: 'same', 'cross', or 'all' (any included halves)."""
    if pairing not in ("same", "cross", "all"):
        raise ValueError(f"unknown pairing {pairing!r}")
    c1 = classify_half_codes(pairs.t_local_c, step_time, rise_exclusion,
                             tail_cutoff)
    c2 = classify_half_codes(pairs.t_local_d, step_time, rise_exclusion,
                             tail_cutoff)
    ok = (c1 != LABEL_EXCLUDED) & (c2 != LABEL_EXCLUDED)
    if pairing == "all":
        return ok
    if pairing == "same":
        return ok & (c1 == c2)
    return ok & (c1 != c2)


@dataclass
class RatioResult:
    """A normalized coincidence ratio with its statistical error."""

    ratio: float
    error: float
    n_selected: int
    reference: float
    n_outer_total: int


def normalized_rates(hist: CoincidenceHistogram, pairing: str,
                     step_time: float = 0.0,
                     rise_exclusion: float = DEFAULT_RISE_EXCLUSION_NS,
                     tail_cutoff: float = DEFAULT_TAIL_CUTOFF_NS,
                     pair_mask=None) -> RatioResult:
    """Central-peak coincidences over the non-interfering reference.

    The reference is the mean of the outer peaks (2 <= |n| <= 6) divided
    by two, restricted to the same temporal-half region.

    Args:
        pair_mask: optional extra mask over the pair table (e.g. to drop
            dark-involved pairs)

    Raises:
        ValueError: if the reference region holds no counts.
    """
    pairs = hist.pairs
    region = pairing_mask(pairs, pairing, step_time, rise_exclusion,
                          tail_cutoff)
    if pair_mask is not None:
        region = region & pair_mask
    outer = (np.abs(pairs.lag) >= 2) & (np.abs(pairs.lag) <= 6)
    n_outer = int(np.count_nonzero(outer & region))
    if n_outer == 0:
        raise ValueError("empty reference: no outer-peak pairs in region")
    reference = n_outer / 10.0 / 2.0
    n0 = int(np.count_nonzero((pairs.lag == 0) & region))
    ratio = n0 / reference
    sig_n0 = np.sqrt(n0) if n0 > 0 else 1.0
    err = ratio * np.sqrt((sig_n0 / max(n0, 1)) ** 2 + 1.0 / n_outer) \
        if n0 > 0 else sig_n0 / reference
    return RatioResult(ratio=float(ratio), error=float(err), n_selected=n0,
                       reference=float(reference), n_outer_total=n_outer)


@dataclass
class VisibilityFit:
    """Weighted fit of R(dphi) = baseline - amplitude cos(dphi)."""

    v: float
    baseline: float
    amplitude: float
    v_maxmin: float
    residuals: np.ndarray
    converged: bool
    phase_scale: float | None = None


def fit_visibility(points, min_points: int = 4,
                   min_span: float = 2.0 * np.pi) -> VisibilityFit:
    """Fit the sinusoidal coincidence law to (delta_phi, ratio, error)
    triples and report the visibility amplitude/baseline.

    A refused or degenerate fit is returned with converged=False rather
    than raised.
    """
    pts = np.asarray([(p[0], p[1], p[2]) for p in points], dtype=np.float64)
    refused = VisibilityFit(v=float("nan"), baseline=float("nan"),
                            amplitude=float("nan"), v_maxmin=float("nan"),
                            residuals=np.array([]), converged=False)
    if pts.shape[0] < min_points:
        return refused
    phi, ratio, err = pts[:, 0], pts[:, 1], pts[:, 2]
    if phi.max() - phi.min() < min_span - 1e-12:
        return refused
    w = 1.0 / np.where(err > 0, err, np.nanmin(err[err > 0], initial=1.0)) ** 2
    x = np.column_stack([np.ones_like(phi), -np.cos(phi)])
    xtwx = x.T @ (w[:, None] * x)
    if np.linalg.cond(xtwx) > 1e12:
        return refused
    c, a = np.linalg.solve(xtwx, x.T @ (w * ratio))
    resid = ratio - (c - a * np.cos(phi))
    v_maxmin = (ratio.max() - ratio.min()) / (ratio.max() + ratio.min())
    if not (np.isfinite(c) and np.isfinite(a)) or c <= 0:
        return refused
    return VisibilityFit(v=float(a / c), baseline=float(c), amplitude=float(a),
                         v_maxmin=float(v_maxmin), residuals=resid,
                         converged=True)


def fit_flat_slope(points):
    """Weighted linear fit ratio = p0 + p1 * dphi; returns (slope,
    slope_error) for flatness checks."""
    pts = np.asarray([(p[0], p[1], p[2]) for p in points], dtype=np.float64)
    phi, ratio, err = pts[:, 0], pts[:, 1], pts[:, 2]
    w = 1.0 / np.where(err > 0, err, 1.0) ** 2
    x = np.column_stack([np.ones_like(phi), phi])
    cov = np.linalg.inv(x.T @ (w[:, None] * x))
    p = cov @ (x.T @ (w * ratio))
    return float(p[1]), float(np.sqrt(cov[1, 1]))


def central_suppression(hist: CoincidenceHistogram) -> float:
    """Percent suppression of the central correlation peak relative to the
    mean outer peak, for a stream-autocorrelation log.

    Raises:
        ValueError: if the outer peaks are empty.
    """
    outer = hist.outer_peak_mean()
    if outer <= 0:
        raise ValueError("empty reference: outer peaks hold no counts")
    return 100.0 * (1.0 - hist.peak(0) / outer)


@dataclass
class BeatOverlay:
    """Measured beat histogram with its non-interfering reference and the
    parameter-free predicted curve."""

    tau_centers: np.ndarray
    measured: np.ndarray
    reference: np.ndarray          # outer-peak average / 2, per bin
    reference_fit: np.ndarray      # amplitude-only Gaussian fit of reference
    predicted: np.ndarray          # 2 * fit * sin^2(pi dnu tau)
    delta_nu_mhz: float
    nominal_fwhm_ns: float
    window_ns: float
    ref_amplitude: float
    envelope_fwhm_ns: float        # free-width Gaussian fit of the reference
    envelope_fwhm_err_ns: float


def _window_factor(tau, sigma_tau, window_ns):
    """Fraction of pairs at detection-time difference tau surviving the
    per-detection |t| <= window cut, for Gaussian packets whose
    difference-time width is sigma_tau."""
    from scipy.special import ndtr
    sc = np.maximum(sigma_tau, 1e-9) / 2.0
    lo = np.maximum(-window_ns, -window_ns - tau)
    hi = np.minimum(window_ns, window_ns - tau)
    mu = -tau / 2.0
    return np.maximum(ndtr((hi - mu) / sc) - ndtr((lo - mu) / sc), 0.0)


def beat_overlay(pairs: PairTable, delta_nu_mhz: float,
                 nominal_fwhm_ns: float, window_ns: float = 150.0,
                 bin_width_ns: float = 4.0,
                 tau_range_ns: float | None = None,
                 timing_resolution_ns: float = 2.0) -> BeatOverlay:
    """Beat analysis of the central peak against the outer-peak reference.

    Detections more than window_ns from their slot center are dropped on
    both sides; the difference histogram spans +/- tau_range_ns
    (window_ns when omitted).  With quantized timestamps the bin width
    is snapped to a multiple of the resolution and the edges offset by
    half a resolution step, so every bin holds the same number of
    quantized lag values.  The predicted curve uses the envelope width
    implied by the nominal packet FWHM and fits only the reference
    amplitude; the free-width envelope fit corrects for the window
    truncation so that an ideal Gaussian stream recovers
    sqrt(2) x packet FWHM.
    """
    if delta_nu_mhz < 0:
        raise ValueError("delta_nu_mhz must be >= 0")
    if tau_range_ns is None:
        tau_range_ns = window_ns
    offset = 0.0
    if timing_resolution_ns > 0:
        bin_width_ns = max(timing_resolution_ns, timing_resolution_ns * round(
            bin_width_ns / timing_resolution_ns))
        offset = 0.5 * timing_resolution_ns
    edges = np.arange(-tau_range_ns, tau_range_ns + bin_width_ns,
                      bin_width_ns) + offset
    centers = 0.5 * (edges[:-1] + edges[1:])
    in_window = (np.abs(pairs.t_local_c) <= window_ns) & \
                (np.abs(pairs.t_local_d) <= window_ns)
    central = in_window & (pairs.lag == 0)
    measured, _ = np.histogram(pairs.tau[central], bins=edges)

    outer = in_window & (np.abs(pairs.lag) >= 2) & (np.abs(pairs.lag) <= 6)
    tau_folded = pairs.tau[outer] - pairs.lag[outer] * pairs.period_ns
    ref_counts, _ = np.histogram(tau_folded, bins=edges)
    reference = ref_counts / 10.0 / 2.0

    sigma_tau = np.sqrt(2.0) * nominal_fwhm_ns * SIGMA_FROM_FWHM
    shape = np.exp(-(centers**2) / (2.0 * sigma_tau**2)) * _window_factor(
        centers, sigma_tau, window_ns)
    denom = float(shape @ shape)
    amp = float(shape @ reference) / denom if denom > 0 else 0.0
    reference_fit = amp * shape
    predicted = 2.0 * reference_fit * np.sin(
        np.pi * delta_nu_mhz * MHZ_PER_NS * centers) ** 2

    fwhm, fwhm_err = _fit_envelope_fwhm(centers, reference, sigma_tau,
                                        window_ns)
    return BeatOverlay(tau_centers=centers, measured=measured,
                       reference=reference, reference_fit=reference_fit,
                       predicted=predicted, delta_nu_mhz=delta_nu_mhz,
                       nominal_fwhm_ns=nominal_fwhm_ns, window_ns=window_ns,
                       ref_amplitude=amp, envelope_fwhm_ns=fwhm,
                       envelope_fwhm_err_ns=fwhm_err)


def _fit_envelope_fwhm(centers, reference, sigma0, window_ns):
    """Free-width Gaussian fit of the reference marginal, with the
    per-detection window truncation modeled."""
    if reference.sum() <= 0:
        return float("nan"), float("nan")

    def model(x, a, s):
        s = abs(s)
        return a * np.exp(-(x**2) / (2.0 * s**2)) * _window_factor(
            x, s, window_ns)

    try:
        popt, pcov = curve_fit(model, centers, reference,
                               p0=[max(reference.max(), 1e-9), sigma0])
        fwhm = FWHM_FROM_SIGMA * abs(popt[1])
        err = FWHM_FROM_SIGMA * float(np.sqrt(max(pcov[1, 1], 0.0)))
        return float(fwhm), err
    except RuntimeError:
        return float("nan"), float("nan")


def fit_beat_oscillation(overlay: BeatOverlay):
    """Fit the measured beat histogram with an envelope-modulated
    oscillation; returns (freq_cycles_per_ns, freq_err, tau_offset_ns,
    offset_err).

    The model is the measured-curve shape for a partially coherent pair
    ensemble: env(tau) * [(1 - C(tau)) + 2 C(tau) sin^2(pi f (tau-tau0))]
    with interference contrast C(tau) = c0 exp(-|tau|/L), plus a flat
    floor.  The envelope width is held at the overlay's fitted reference
    value (falling back to the nominal packet width) and the per-
    detection window truncation is part of the envelope.  The
    oscillation minima sit at tau_offset + k / freq regardless of the
    contrast decay.
    """
    c = overlay.tau_centers
    y = overlay.measured.astype(np.float64)
    f0 = max(overlay.delta_nu_mhz * MHZ_PER_NS, 1e-6)
    a0 = max(overlay.ref_amplitude, y.max() if y.size else 1.0)
    fwhm = overlay.envelope_fwhm_ns
    if not np.isfinite(fwhm) or fwhm <= 0:
        fwhm = np.sqrt(2.0) * overlay.nominal_fwhm_ns
    sigma_env = fwhm * SIGMA_FROM_FWHM
    env = np.exp(-(c**2) / (2.0 * sigma_env**2)) * _window_factor(
        c, sigma_env, overlay.window_ns)

    def model(x, a, contrast, decay, f, tau0, floor):
        ctau = np.clip(contrast, 0.0, 1.0) * np.exp(
            -np.abs(x) / max(decay, 10.0))
        osc = (1.0 - ctau) + 2.0 * ctau * np.sin(np.pi * f * (x - tau0)) ** 2
        return a * env * osc + floor

    popt, pcov = curve_fit(
        model, c, y, p0=[a0 / 2.0, 0.9, 300.0, f0, 0.0, 0.0],
        sigma=np.sqrt(np.maximum(y, 1.0)), absolute_sigma=True,
        maxfev=40000)
    perr = np.sqrt(np.maximum(np.diag(pcov), 0.0))
    return float(popt[3]), float(perr[3]), float(popt[4]), float(perr[4])
