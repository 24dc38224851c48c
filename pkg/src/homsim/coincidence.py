"""Coincidence counting between the two detector channels.

The correlator forms every (C, D) detection pair within a lag window of
+/- max_lag repetition periods, the discrete analogue of the
second-order correlation measurement.  Pair lags are classified into
integer peaks n with windows of +/- half a period around n * period,
which partitions the lag axis exactly.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .detection import EventLog, ORIGIN_DARK, PORT_C, PORT_D

DEFAULT_MAX_LAG = 6


@dataclass
class PairTable:
    """All cross-detector detection pairs within the lag window.

    tau = t_C - t_D; lag is the nearest integer peak; local times are
    relative to each detection's own slot center.
    """

    period_ns: float
    tau: np.ndarray
    lag: np.ndarray
    t_local_c: np.ndarray
    t_local_d: np.ndarray
    involves_dark: np.ndarray
    involves_extra: np.ndarray

    def __len__(self):
        return self.tau.size

    def select(self, mask) -> "PairTable":
        return PairTable(self.period_ns, self.tau[mask], self.lag[mask],
                         self.t_local_c[mask], self.t_local_d[mask],
                         self.involves_dark[mask], self.involves_extra[mask])


@dataclass
class CoincidenceHistogram:
    """Binned lag histogram plus integrated per-peak counts."""

    bin_width_ns: float
    period_ns: float
    bin_edges: np.ndarray
    counts: np.ndarray
    peak_counts: dict[int, int]
    peak_half_width_ns: float
    pairs: PairTable
    normalization: str = "raw counts"

    def peak(self, n: int) -> int:
        return int(self.peak_counts.get(n, 0))

    def outer_peak_mean(self, n_min: int = 2, n_max: int = DEFAULT_MAX_LAG) -> float:
        vals = [self.peak(n) for n in range(n_min, n_max + 1)]
        vals += [self.peak(-n) for n in range(n_min, n_max + 1)]
        return float(np.mean(vals))


def build_pairs(events: EventLog, period_ns: float,
                max_lag: int = DEFAULT_MAX_LAG) -> PairTable:
    """Collect all (C, D) pairs with |t_C - t_D| <= (max_lag + 1/2) periods."""
    is_c = events.port == PORT_C
    is_d = events.port == PORT_D
    tc = events.timestamp_ns[is_c]
    td = events.timestamp_ns[is_d]
    dark_c = events.origin[is_c] == ORIGIN_DARK
    dark_d = events.origin[is_d] == ORIGIN_DARK
    extra_c = events.is_extra[is_c]
    extra_d = events.is_extra[is_d]

    oc = np.argsort(tc, kind="stable")
    od = np.argsort(td, kind="stable")
    tc, dark_c, extra_c = tc[oc], dark_c[oc], extra_c[oc]
    td, dark_d, extra_d = td[od], dark_d[od], extra_d[od]

    window = (max_lag + 0.5) * period_ns
    lo = np.searchsorted(td, tc - window, side="left")
    hi = np.searchsorted(td, tc + window, side="right")
    counts = hi - lo
    idx_c = np.repeat(np.arange(tc.size), counts)
    # concatenated ranges lo[i]..hi[i] for each C event
    offsets = np.arange(int(counts.sum())) - np.repeat(
        np.cumsum(counts) - counts, counts)
    idx_d = np.repeat(lo, counts) + offsets

    tau = tc[idx_c] - td[idx_d]
    lag = np.round(tau / period_ns).astype(np.int64)
    slot_c = np.round(tc[idx_c] / period_ns)
    slot_d = np.round(td[idx_d] / period_ns)
    return PairTable(
        period_ns=period_ns,
        tau=tau,
        lag=lag,
        t_local_c=tc[idx_c] - slot_c * period_ns,
        t_local_d=td[idx_d] - slot_d * period_ns,
        involves_dark=dark_c[idx_c] | dark_d[idx_d],
        involves_extra=extra_c[idx_c] | extra_d[idx_d],
    )


def g2_histogram(events: EventLog, period_ns: float, bin_width_ns: float = 2.0,
                 peak_half_width_ns: float | None = None,
                 max_lag: int = DEFAULT_MAX_LAG,
                 pairs: PairTable | None = None) -> CoincidenceHistogram:
    """Histogram of C-D detection-time differences with per-peak sums.

    Args:
        events: detector event log
        period_ns: repetition period
        bin_width_ns: lag histogram bin width, > 0
        peak_half_width_ns: integration half-window around each integer
            peak; defaults to half a period (exact partition)
        max_lag: peaks are reported for |n| <= max_lag
        pairs: precomputed pair table (rebuilt from events when omitted)
    """
    if bin_width_ns <= 0:
        raise ValueError("bin_width_ns must be > 0")
    if peak_half_width_ns is None:
        peak_half_width_ns = 0.5 * period_ns
    if pairs is None:
        pairs = build_pairs(events, period_ns, max_lag)
    span = (max_lag + 0.5) * period_ns
    n_bins = int(np.ceil(2.0 * span / bin_width_ns))
    edges = -span + bin_width_ns * np.arange(n_bins + 1)
    counts, _ = np.histogram(pairs.tau, bins=edges)
    peak_counts = {}
    for n in range(-max_lag, max_lag + 1):
        center = n * period_ns
        inside = np.abs(pairs.tau - center) <= peak_half_width_ns
        peak_counts[n] = int(np.count_nonzero(inside & (pairs.lag == n)))
    return CoincidenceHistogram(
        bin_width_ns=bin_width_ns, period_ns=period_ns, bin_edges=edges,
        counts=counts, peak_counts=peak_counts,
        peak_half_width_ns=float(peak_half_width_ns), pairs=pairs)
